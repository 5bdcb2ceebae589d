use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Partition of the skeleton's joints into local groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingScheme {
    groups: Vec<Vec<usize>>,
    n_joints: usize,
}

/// Group counts with a predefined assignment on the 17-joint skeleton.
pub const STANDARD_GROUP_COUNTS: [usize; 7] = [1, 2, 3, 5, 6, 8, 17];

impl GroupingScheme {
    /// Validates that `groups` are non-empty, disjoint and cover `0..n_joints`.
    pub fn new(groups: Vec<Vec<usize>>, n_joints: usize) -> Result<Self> {
        if groups.is_empty() {
            return Err(Error::Config("grouping needs at least one group".into()));
        }
        let mut seen = vec![false; n_joints];
        for (g, members) in groups.iter().enumerate() {
            if members.is_empty() {
                return Err(Error::Config(format!("group {g} is empty")));
            }
            for &j in members {
                if j >= n_joints {
                    return Err(Error::Config(format!(
                        "group {g} names joint {j}, skeleton has {n_joints}"
                    )));
                }
                if std::mem::replace(&mut seen[j], true) {
                    return Err(Error::Config(format!("joint {j} appears in two groups")));
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::Config(format!(
                "joint {missing} belongs to no group"
            )));
        }
        Ok(Self { groups, n_joints })
    }

    /// Every joint in one group.
    pub fn single(n_joints: usize) -> Self {
        Self {
            groups: vec![(0..n_joints).collect()],
            n_joints,
        }
    }

    /// Predefined groupings of the 17-joint skeleton (pelvis, right leg, left
    /// leg, spine, thorax, neck, head, left arm, right arm).
    ///
    /// The five-group case is torso / right arm / left arm / right leg /
    /// left leg; the others split or merge those parts.
    pub fn standard17(count: usize) -> Result<Self> {
        let groups: Vec<Vec<usize>> = match count {
            1 => vec![(0..17).collect()],
            2 => vec![
                vec![0, 1, 2, 3, 4, 5, 6],
                vec![7, 8, 9, 10, 11, 12, 13, 14, 15, 16],
            ],
            3 => vec![
                vec![0, 7, 8, 9, 10],
                vec![11, 12, 13, 14, 15, 16],
                vec![1, 2, 3, 4, 5, 6],
            ],
            5 => vec![
                vec![0, 7, 8, 9, 10],
                vec![14, 15, 16],
                vec![11, 12, 13],
                vec![1, 2, 3],
                vec![4, 5, 6],
            ],
            6 => vec![
                vec![0, 7],
                vec![8, 9, 10],
                vec![14, 15, 16],
                vec![11, 12, 13],
                vec![1, 2, 3],
                vec![4, 5, 6],
            ],
            8 => vec![
                vec![0, 7, 8],
                vec![9, 10],
                vec![14, 15, 16],
                vec![11, 12, 13],
                vec![1, 2],
                vec![3],
                vec![4, 5],
                vec![6],
            ],
            17 => (0..17).map(|j| vec![j]).collect(),
            other => {
                return Err(Error::Config(format!(
                "no standard grouping with {other} groups; choose one of {STANDARD_GROUP_COUNTS:?}"
            )))
            }
        };
        Self::new(groups, 17)
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn n_joints(&self) -> usize {
        self.n_joints
    }

    /// Randomly reassigns the joints of `count` randomly chosen groups among
    /// themselves, keeping every group's size.
    pub fn shuffled<R: Rng + ?Sized>(&self, count: usize, rng: &mut R) -> Result<Self> {
        if count > self.groups.len() {
            return Err(Error::Config(format!(
                "cannot shuffle {count} of {} groups",
                self.groups.len()
            )));
        }
        let mut chosen: Vec<usize> = (0..self.groups.len()).collect();
        chosen.shuffle(rng);
        chosen.truncate(count);
        chosen.sort_unstable();
        let mut pool: Vec<usize> = chosen
            .iter()
            .flat_map(|&g| self.groups[g].clone())
            .collect();
        pool.shuffle(rng);
        let mut groups = self.groups.clone();
        let mut rest = pool.as_slice();
        for &g in &chosen {
            let (take, tail) = rest.split_at(groups[g].len());
            groups[g] = take.to_vec();
            groups[g].sort_unstable();
            rest = tail;
        }
        Self::new(groups, self.n_joints)
    }

    /// Splits `width` channels across groups in proportion to joint counts.
    ///
    /// Each share is `round(width · n_g / N)`; the rounding remainder goes to
    /// the group with the most joints (first such group on ties). When
    /// rounding overshoots, channels are taken back from the largest groups
    /// without letting any share drop below one.
    pub fn channel_alloc(&self, width: usize) -> Result<Vec<usize>> {
        let g = self.groups.len();
        if width < g {
            return Err(Error::Config(format!(
                "width {width} cannot give each of {g} groups a channel"
            )));
        }
        let n = self.n_joints as f64;
        let mut alloc: Vec<usize> = self
            .groups
            .iter()
            .map(|m| ((width as f64 * m.len() as f64 / n).round() as usize).max(1))
            .collect();
        let mut order: Vec<usize> = (0..g).collect();
        order.sort_by(|&a, &b| {
            self.groups[b]
                .len()
                .cmp(&self.groups[a].len())
                .then(a.cmp(&b))
        });
        let total: usize = alloc.iter().sum();
        if total < width {
            alloc[order[0]] += width - total;
        } else {
            // width >= group count, so some share above one always exists
            for _ in width..total {
                let i = order
                    .iter()
                    .copied()
                    .filter(|&i| alloc[i] > 1)
                    .max_by(|&a, &b| {
                        (self.groups[a].len(), alloc[a])
                            .cmp(&(self.groups[b].len(), alloc[b]))
                            .then(b.cmp(&a))
                    })
                    .expect("a share above one");
                alloc[i] -= 1;
            }
        }
        Ok(alloc)
    }

    /// Contiguous channel blocks sized by [`Self::channel_alloc`].
    pub fn block_layout(&self, width: usize) -> Result<ChannelLayout> {
        let alloc = self.channel_alloc(width)?;
        let mut start = 0;
        let groups = alloc
            .iter()
            .map(|&d| {
                let r: Vec<usize> = (start..start + d).collect();
                start += d;
                r
            })
            .collect();
        Ok(ChannelLayout { groups, width })
    }

    /// Channels of a per-joint vector with `coords` values per joint, e.g.
    /// the 2N input (`coords = 2`) or the 3N output (`coords = 3`).
    pub fn joint_layout(&self, coords: usize) -> ChannelLayout {
        let groups = self
            .groups
            .iter()
            .map(|m| {
                m.iter()
                    .flat_map(|&j| (0..coords).map(move |c| j * coords + c))
                    .collect()
            })
            .collect();
        ChannelLayout {
            groups,
            width: self.n_joints * coords,
        }
    }
}

/// Assignment of a layer's channels to groups.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ChannelLayout {
    groups: Vec<Vec<usize>>,
    width: usize,
}

impl ChannelLayout {
    pub fn new(groups: Vec<Vec<usize>>, width: usize) -> Result<Self> {
        let mut seen = vec![false; width];
        for g in &groups {
            for &c in g {
                if c >= width || std::mem::replace(&mut seen[c], true) {
                    return Err(Error::Config(format!(
                        "invalid channel {c} in layout of width {width}"
                    )));
                }
            }
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Config(
                "channel layout does not cover every channel".into(),
            ));
        }
        Ok(Self { groups, width })
    }

    /// The whole width as one group.
    pub fn dense(width: usize) -> Self {
        Self {
            groups: vec![(0..width).collect()],
            width,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn group(&self, g: usize) -> &[usize] {
        &self.groups[g]
    }

    pub fn groups(&self) -> &[Vec<usize>] {
        &self.groups
    }

    /// Channels outside group `g`, ascending.
    pub fn complement(&self, g: usize) -> Vec<usize> {
        let mut mask = vec![true; self.width];
        for &c in &self.groups[g] {
            mask[c] = false;
        }
        (0..self.width).filter(|&c| mask[c]).collect()
    }

    /// Position of each channel in the group-major concatenation, or `None`
    /// when that concatenation is already in channel order.
    pub(crate) fn scatter_order(&self) -> Option<Vec<usize>> {
        let flat: Vec<usize> = self.groups.iter().flatten().copied().collect();
        if flat.iter().enumerate().all(|(i, &c)| i == c) {
            return None;
        }
        let mut pos = vec![0; self.width];
        for (i, &c) in flat.iter().enumerate() {
            pos[c] = i;
        }
        Some(pos)
    }
}
