use crate::error::{shape_err, Error, Result};

use super::metrics::Pose3;

pub const DEFAULT_SIGMA_MM: f64 = 100.0;

fn check_sigma(sigma: &[f64], n: usize) -> Result<()> {
    if sigma.len() != n {
        return Err(shape_err("sigma per joint", &[sigma.len()], &[n]));
    }
    if let Some(i) = sigma.iter().position(|&s| !(s > 0.0 && s.is_finite())) {
        return Err(Error::Invalid(format!(
            "sigma of joint {i} must be positive, got {}",
            sigma[i]
        )));
    }
    Ok(())
}

fn ps_unchecked(j: &Pose3, i: &Pose3, sigma: &[f64]) -> f64 {
    let mut acc = 0.0;
    for k in 0..j.len() {
        let (dx, dy, dz) = (j[k][0] - i[k][0], j[k][1] - i[k][1], j[k][2] - i[k][2]);
        let d2 = dx * dx + dy * dy + dz * dz;
        acc += (-d2 / (2.0 * sigma[k] * sigma[k])).exp();
    }
    acc / j.len() as f64
}

/// Mean over joints of an unnormalized Gaussian of the joint distance.
pub fn pose_similarity(j: &Pose3, i: &Pose3, sigma: &[f64]) -> Result<f64> {
    if j.len() != i.len() || j.is_empty() {
        return Err(shape_err("pose similarity", &[j.len(), 3], &[i.len(), 3]));
    }
    check_sigma(sigma, j.len())?;
    Ok(ps_unchecked(j, i, sigma))
}

/// Mean similarity of `j` to every pose of `set`, itself included if present.
pub fn occurrence<P: AsRef<Pose3>>(j: &Pose3, set: &[P], sigma: &[f64]) -> Result<f64> {
    if set.is_empty() {
        return Err(Error::Invalid("occurrence over an empty pose set".into()));
    }
    let mut acc = 0.0;
    for i in set {
        acc += pose_similarity(j, i.as_ref(), sigma)?;
    }
    Ok(acc / set.len() as f64)
}

/// Occurrence of every pose within the set itself.
///
/// Each similarity is evaluated once and credited to both poses. Row sums
/// still accumulate in ascending index order, so the result is bit-identical
/// to calling [`occurrence`] per pose.
pub fn occurrences<P: AsRef<Pose3>>(set: &[P], sigma: &[f64]) -> Result<Vec<f64>> {
    let Some(first) = set.first() else {
        return Err(Error::Invalid("occurrence over an empty pose set".into()));
    };
    let n = first.as_ref().len();
    if n == 0 {
        return Err(Error::Invalid("poses have no joints".into()));
    }
    check_sigma(sigma, n)?;
    if let Some(p) = set.iter().find(|p| p.as_ref().len() != n) {
        return Err(shape_err("pose set", &[n, 3], &[p.as_ref().len(), 3]));
    }
    let m = set.len();
    let mut acc = vec![0.0; m];
    for a in 0..m {
        let pa = set[a].as_ref();
        for b in a..m {
            let s = ps_unchecked(pa, set[b].as_ref(), sigma);
            acc[a] += s;
            if b != a {
                acc[b] += s;
            }
        }
    }
    Ok(acc.into_iter().map(|s| s / m as f64).collect())
}

/// Indices ordered from rarest to most common; ties keep index order.
pub fn rank_by_occurrence(occ: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..occ.len()).collect();
    idx.sort_by(|&a, &b| occ[a].total_cmp(&occ[b]).then(a.cmp(&b)));
    idx
}

/// Number of poses kept by the rare-pose protocol: `⌈R·M/100⌉`.
pub fn rare_count(percent: f64, m: usize) -> Result<usize> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(Error::Invalid(format!(
            "R must be in (0, 100], got {percent}"
        )));
    }
    let exact = percent * m as f64 / 100.0;
    let k = exact.ceil() as usize;
    // guard against products like 100·M/100 landing just above an integer
    let k = if (k as f64 - 1.0 - exact).abs() < 1e-9 * exact.max(1.0) {
        k - 1
    } else {
        k
    };
    Ok(k.min(m))
}

/// The `⌈R·M/100⌉` poses with the lowest occurrence, rarest first.
pub fn select_rare<P: AsRef<Pose3>>(set: &[P], percent: f64, sigma: &[f64]) -> Result<Vec<usize>> {
    let k = rare_count(percent, set.len())?;
    let occ = occurrences(set, sigma)?;
    let mut ranked = rank_by_occurrence(&occ);
    ranked.truncate(k);
    Ok(ranked)
}

/// Rareness decile of each pose: 0 holds the rarest tenth, 9 the most common.
pub fn rareness_deciles(occ: &[f64]) -> Vec<usize> {
    let m = occ.len();
    let mut out = vec![0; m];
    for (rank, i) in rank_by_occurrence(occ).into_iter().enumerate() {
        out[i] = rank * 10 / m;
    }
    out
}
