use serde::{Deserialize, Serialize};

use super::rare::{select_rare, DEFAULT_SIGMA_MM};
use crate::data::{Dataset, PoseSample};
use crate::error::{Error, Result};

/// Which evaluation protocol carves a dataset into train and test sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProtocolKind {
    Subject,
    CrossAction { train_action: String },
    RarePose { percent: f64, sigma: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub kind: ProtocolKind,
    pub train_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    /// Optional restriction of the actions on each side, e.g. for
    /// compositional splits. Empty means all actions.
    #[serde(default)]
    pub train_actions: Vec<String>,
    #[serde(default)]
    pub test_actions: Vec<String>,
}

impl ProtocolSpec {
    pub fn subject(train: &[&str], test: &[&str]) -> Self {
        Self {
            kind: ProtocolKind::Subject,
            train_subjects: train.iter().map(|s| s.to_string()).collect(),
            test_subjects: test.iter().map(|s| s.to_string()).collect(),
            train_actions: Vec::new(),
            test_actions: Vec::new(),
        }
    }

    pub fn with_actions(mut self, train: &[String], test: &[String]) -> Self {
        self.train_actions = train.to_vec();
        self.test_actions = test.to_vec();
        self
    }

    pub fn cross_action(train_action: &str, train: &[&str], test: &[&str]) -> Self {
        Self {
            kind: ProtocolKind::CrossAction {
                train_action: train_action.into(),
            },
            ..Self::subject(train, test)
        }
    }

    /// Rare-pose protocol with the default uniform σ for `n_joints`.
    pub fn rare_pose(percent: f64, n_joints: usize, train: &[&str], test: &[&str]) -> Self {
        Self {
            kind: ProtocolKind::RarePose {
                percent,
                sigma: vec![DEFAULT_SIGMA_MM; n_joints],
            },
            ..Self::subject(train, test)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.train_subjects.is_empty() || self.test_subjects.is_empty() {
            return Err(Error::Config(
                "protocol needs train and test subjects".into(),
            ));
        }
        if let ProtocolKind::RarePose { percent, sigma } = &self.kind {
            if !(*percent > 0.0 && *percent <= 100.0) {
                return Err(Error::Config(format!(
                    "R must be in (0, 100], got {percent}"
                )));
            }
            if let Some(i) = sigma.iter().position(|&s| !(s > 0.0)) {
                return Err(Error::Config(format!(
                    "sigma of joint {i} must be positive"
                )));
            }
        }
        Ok(())
    }
}

fn check_labels(wanted: &[String], available: &[String], what: &str) -> Result<()> {
    if let Some(missing) = wanted.iter().find(|w| !available.contains(w)) {
        return Err(Error::Config(format!(
            "{what} {missing:?} not in dataset; available: {}",
            available.join(", ")
        )));
    }
    Ok(())
}

/// A test set, possibly reduced to a subset of its samples.
#[derive(Clone, Debug)]
pub struct TestSet {
    pub data: Dataset,
    /// Kept samples as `(clip, frame-in-clip)`, in protocol order.
    pub selected: Vec<(usize, usize)>,
}

impl TestSet {
    pub fn all(data: Dataset) -> Self {
        let selected = data
            .clips
            .iter()
            .enumerate()
            .flat_map(|(c, clip)| (0..clip.len()).map(move |f| (c, f)))
            .collect();
        Self { data, selected }
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn sample(&self, k: usize) -> &PoseSample {
        let (c, f) = self.selected[k];
        &self.data.clips[c].samples[f]
    }

    pub fn samples(&self) -> impl Iterator<Item = &PoseSample> {
        (0..self.len()).map(|k| self.sample(k))
    }
}

/// Splits a dataset per protocol. Test clips stay whole so temporal models
/// keep their context frames; rare-pose selection only marks samples.
pub fn build_split(ds: &Dataset, spec: &ProtocolSpec) -> Result<(Dataset, TestSet)> {
    spec.validate()?;
    let subjects = ds.subjects();
    let actions = ds.actions();
    check_labels(&spec.train_subjects, &subjects, "subject")?;
    check_labels(&spec.test_subjects, &subjects, "subject")?;
    check_labels(&spec.train_actions, &actions, "action")?;
    check_labels(&spec.test_actions, &actions, "action")?;
    let in_list = |list: &[String], v: &str| list.is_empty() || list.iter().any(|x| x == v);
    let train_action = match &spec.kind {
        ProtocolKind::CrossAction { train_action } => {
            check_labels(std::slice::from_ref(train_action), &actions, "action")?;
            Some(train_action.clone())
        }
        _ => None,
    };
    let train = ds.filter_clips(|s| {
        spec.train_subjects.contains(&s.subject)
            && in_list(&spec.train_actions, &s.action)
            && train_action.as_ref().is_none_or(|a| *a == s.action)
    });
    let test = ds.filter_clips(|s| {
        spec.test_subjects.contains(&s.subject) && in_list(&spec.test_actions, &s.action)
    });
    let overlap = {
        let keys: std::collections::HashSet<_> = train.samples().map(PoseSample::key).collect();
        test.samples().any(|s| keys.contains(&s.key()))
    };
    if overlap {
        return Err(Error::Config("train and test sets share samples".into()));
    }
    let mut test = TestSet::all(test);
    if let ProtocolKind::RarePose { percent, sigma } = &spec.kind {
        let poses: Vec<&[[f64; 3]]> = test.samples().map(|s| s.pose_3d.as_slice()).collect();
        if !poses.is_empty() {
            let keep = select_rare(&poses, *percent, sigma)?;
            test.selected = keep.into_iter().map(|k| test.selected[k]).collect();
        }
    }
    Ok((train, test))
}
