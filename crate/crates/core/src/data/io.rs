use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::sample::{Dataset, PoseSample};
use super::skeleton::SkeletonSpec;
use crate::error::{Error, Result};

pub const FORMAT_NAME: &str = "srlift-poses";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Units {
    pose_3d: String,
    keypoints_2d: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    units: Units,
    skeleton: SkeletonSpec,
}

const LABEL_FIELDS: usize = 6;

/// Reads a dataset file. An empty file yields an empty dataset on the
/// default skeleton.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())?;
    read_dataset(file)
}

pub fn read_dataset(reader: impl Read) -> Result<Dataset> {
    let mut lines = BufReader::new(reader).lines();
    let Some(first) = lines.next() else {
        return Ok(Dataset::new(SkeletonSpec::h36m17()));
    };
    let first = first?;
    if first.trim().is_empty() {
        if let Some(line) = lines.find_map(|l| l.ok().filter(|l| !l.trim().is_empty())) {
            return Err(Error::Parse {
                line: 1,
                msg: format!(
                    "expected a header before records, found {:?}",
                    truncate(&line)
                ),
            });
        }
        return Ok(Dataset::new(SkeletonSpec::h36m17()));
    }
    let header: Header = serde_json::from_str(&first).map_err(|e| Error::Parse {
        line: 1,
        msg: format!("bad header: {e}"),
    })?;
    if header.format != FORMAT_NAME || header.version != FORMAT_VERSION {
        return Err(Error::Parse {
            line: 1,
            msg: format!(
                "unsupported format {} v{} (expected {FORMAT_NAME} v{FORMAT_VERSION})",
                header.format, header.version
            ),
        });
    }
    if header.units.pose_3d != "mm" || header.units.keypoints_2d != "px" {
        return Err(Error::Parse {
            line: 1,
            msg: "units must be mm for 3D and px for 2D".into(),
        });
    }
    let skeleton = header.skeleton;
    skeleton.validate().map_err(|e| Error::Parse {
        line: 1,
        msg: e.to_string(),
    })?;
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        let lineno = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let s = parse_record(&line, &skeleton).map_err(|msg| Error::Parse { line: lineno, msg })?;
        samples.push(s);
    }
    Ok(Dataset::from_samples(skeleton, samples))
}

fn truncate(s: &str) -> String {
    s.chars().take(40).collect()
}

fn parse_record(line: &str, skeleton: &SkeletonSpec) -> std::result::Result<PoseSample, String> {
    let n = skeleton.n_joints();
    let fields: Vec<&str> = line.split('\t').collect();
    let expected = LABEL_FIELDS + 5 * n;
    if fields.len() != expected {
        let floats = fields.len().saturating_sub(LABEL_FIELDS);
        return Err(format!(
            "expected {expected} fields for N = {n} joints (6 labels + {} coordinates), got {} ({floats} coordinates, i.e. {} joints)",
            5 * n,
            fields.len(),
            floats as f64 / 5.0
        ));
    }
    let num = |k: usize| -> std::result::Result<f64, String> {
        let v: f64 = fields[k]
            .parse()
            .map_err(|_| format!("field {} is not a number: {:?}", k + 1, fields[k]))?;
        if !v.is_finite() {
            return Err(format!("field {} is not finite", k + 1));
        }
        Ok(v)
    };
    let frame: usize = fields[3]
        .parse()
        .map_err(|_| format!("frame index is not a non-negative integer: {:?}", fields[3]))?;
    let (width, height) = (num(4)?, num(5)?);
    if width <= 0.0 || height <= 0.0 {
        return Err(format!(
            "image size must be positive, got {width} x {height}"
        ));
    }
    let mut keypoints_2d = Vec::with_capacity(n);
    for j in 0..n {
        let k = LABEL_FIELDS + 2 * j;
        keypoints_2d.push([num(k)?, num(k + 1)?]);
    }
    let mut pose_3d = Vec::with_capacity(n);
    for j in 0..n {
        let k = LABEL_FIELDS + 2 * n + 3 * j;
        pose_3d.push([num(k)?, num(k + 1)?, num(k + 2)?]);
    }
    let root = pose_3d[skeleton.root];
    for p in &mut pose_3d {
        for c in 0..3 {
            p[c] -= root[c];
        }
    }
    Ok(PoseSample {
        keypoints_2d,
        pose_3d,
        width,
        height,
        subject: fields[0].to_string(),
        action: fields[1].to_string(),
        camera: fields[2].to_string(),
        frame,
    })
}

pub fn write_dataset(ds: &Dataset, mut out: impl Write) -> Result<()> {
    let header = Header {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        units: Units {
            pose_3d: "mm".into(),
            keypoints_2d: "px".into(),
        },
        skeleton: ds.skeleton.clone(),
    };
    writeln!(out, "{}", serde_json::to_string(&header)?)?;
    let n = ds.skeleton.n_joints();
    let mut line = String::new();
    for s in ds.samples() {
        if s.keypoints_2d.len() != n || s.pose_3d.len() != n {
            return Err(Error::Invalid(format!(
                "sample {:?}/{:?} frame {} has {} joints, expected N = {n}",
                s.subject,
                s.action,
                s.frame,
                s.pose_3d.len()
            )));
        }
        for label in [&s.subject, &s.action, &s.camera] {
            if label.is_empty() || label.contains(['\t', '\n', '\r']) {
                return Err(Error::Invalid(format!(
                    "label {label:?} is empty or contains a tab or newline"
                )));
            }
        }
        line.clear();
        write!(
            line,
            "{}\t{}\t{}\t{}\t{:.16e}\t{:.16e}",
            s.subject, s.action, s.camera, s.frame, s.width, s.height
        )
        .expect("write to string");
        for v in s
            .keypoints_2d
            .iter()
            .flatten()
            .chain(s.pose_3d.iter().flatten())
        {
            write!(line, "\t{v:.16e}").expect("write to string");
        }
        line.push('\n');
        out.write_all(line.as_bytes())?;
    }
    Ok(())
}

/// Writes through a temporary file and renames it into place.
pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let tmp = path.with_extension("tmp");
    {
        let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
        write_dataset(ds, &mut w)?;
        w.flush()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(frame: usize) -> PoseSample {
        let n = 17;
        PoseSample {
            keypoints_2d: (0..n)
                .map(|j| [j as f64 * 10.5, 0.1 + j as f64 / 3.0])
                .collect(),
            pose_3d: (0..n)
                .map(|j| {
                    if j == 0 {
                        [0.0; 3]
                    } else {
                        [j as f64 / 7.0, -(j as f64), 1e-300 * j as f64]
                    }
                })
                .collect(),
            width: 1000.0,
            height: 1002.0,
            subject: "S1".into(),
            action: "Walk A".into(),
            camera: "c0".into(),
            frame,
        }
    }

    fn roundtrip(ds: &Dataset) -> Dataset {
        let mut buf = Vec::new();
        write_dataset(ds, &mut buf).unwrap();
        read_dataset(buf.as_slice()).unwrap()
    }

    #[test]
    fn empty_input_is_an_empty_dataset() {
        let ds = read_dataset(&b""[..]).unwrap();
        assert!(ds.is_empty());
        assert_eq!(ds.skeleton.n_joints(), 17);
    }

    #[test]
    fn one_record_is_one_clip() {
        let ds = Dataset::from_samples(SkeletonSpec::h36m17(), vec![sample(4)]);
        let back = roundtrip(&ds);
        assert_eq!(back.clips.len(), 1);
        assert_eq!(back.clips[0].len(), 1);
        assert_eq!(back, ds);
    }

    #[test]
    fn clips_split_on_gaps() {
        let ds = Dataset::from_samples(
            SkeletonSpec::h36m17(),
            vec![sample(0), sample(1), sample(3)],
        );
        assert_eq!(
            ds.clips.iter().map(|c| c.len()).collect::<Vec<_>>(),
            vec![2, 1]
        );
        assert_eq!(roundtrip(&ds), ds);
    }

    #[test]
    fn wrong_joint_count_names_n() {
        let ds = Dataset::from_samples(SkeletonSpec::h36m17(), vec![sample(0)]);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines: Vec<&str> = text.lines().collect();
        let short = lines[1].rsplitn(6, '\t').last().unwrap().to_string();
        lines[1] = &short;
        let err = read_dataset(lines.join("\n").as_bytes()).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("line 2") && msg.contains("N = 17"), "{msg}");
    }

    #[test]
    fn bad_number_reports_line() {
        let ds = Dataset::from_samples(SkeletonSpec::h36m17(), vec![sample(0), sample(1)]);
        let mut buf = Vec::new();
        write_dataset(&ds, &mut buf).unwrap();
        let text = String::from_utf8(buf)
            .unwrap()
            .replacen("1.0000000000000000e3", "abc", 2);
        let msg = read_dataset(text.as_bytes()).unwrap_err().to_string();
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn loading_recentres_on_root() {
        let mut s = sample(0);
        for p in &mut s.pose_3d {
            p[0] += 5.0;
        }
        let ds = Dataset::from_samples(SkeletonSpec::h36m17(), vec![s]);
        let back = roundtrip(&ds);
        let first = back.samples().next().unwrap();
        assert_eq!(first.pose_3d[0], [0.0; 3]);
        assert_eq!(first.pose_3d[3][0], 3.0 / 7.0 + 5.0 - 5.0);
    }

    #[test]
    fn tabs_in_labels_are_rejected() {
        let mut s = sample(0);
        s.action = "a\tb".into();
        let ds = Dataset::from_samples(SkeletonSpec::h36m17(), vec![s]);
        assert!(write_dataset(&ds, Vec::new()).is_err());
    }
}
