//! File-format adapters for the supported accelerometer datasets.
//!
//! Each adapter reads the dataset's public layout and emits one
//! `RawRecording` per (subject, activity, trial), with device position and
//! sampling rate filled in from the dataset's documentation. Readings stored
//! in g are converted to m/s² so all adapters agree on units.

use std::collections::BTreeMap;
use std::io::BufRead;
use std::path::{Path, PathBuf};

use super::{IngestError, RawRecording};

const G_TO_MS2: f64 = 9.80665;

pub fn parse_dataset(path: &Path, adapter: &str) -> Result<Vec<RawRecording>, IngestError> {
    let mut recordings = match adapter {
        "motionsense" => motionsense(path)?,
        "pamap2" => pamap2(path)?,
        "ucihar" => ucihar(path)?,
        "hhar" => hhar(path)?,
        "generic-csv" => generic_csv(path)?,
        other => return Err(IngestError::UnknownAdapter(other.to_string())),
    };
    if recordings.is_empty() {
        return Err(IngestError::EmptyDataset(path.display().to_string()));
    }
    // Stable order independent of directory traversal quirks.
    recordings.sort_by(|a, b| {
        natural_key(&a.subject_id)
            .cmp(&natural_key(&b.subject_id))
            .then_with(|| a.activity_label.cmp(&b.activity_label))
    });
    Ok(recordings)
}

/// Sort key that orders numeric ids numerically ("2" before "10").
fn natural_key(id: &str) -> (u64, String) {
    match id.parse::<u64>() {
        Ok(n) => (n, String::new()),
        Err(_) => (u64::MAX, id.to_string()),
    }
}

fn malformed(path: &Path, line: usize, detail: impl Into<String>) -> IngestError {
    IngestError::MalformedFile {
        path: path.display().to_string(),
        line,
        detail: detail.into(),
    }
}

fn parse_cell(field: &str, path: &Path, line: usize) -> Result<f64, IngestError> {
    let v: f64 = field
        .trim()
        .parse()
        .map_err(|_| malformed(path, line, format!("non-numeric value '{}'", field.trim())))?;
    if !v.is_finite() {
        return Err(malformed(path, line, "non-finite acceleration"));
    }
    Ok(v)
}

fn sorted_entries(dir: &Path) -> Result<Vec<PathBuf>, IngestError> {
    let mut out: Vec<PathBuf> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|e| e.path())
        .collect();
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------------------
// MotionSense: B_Accelerometer_data/<activity>_<trial>/sub_<N>.csv, 50 Hz,
// readings in g, phone in the trousers' front pocket.
// ---------------------------------------------------------------------------

fn motionsense_label(code: &str) -> String {
    match code {
        "jog" => "Jogging",
        "sit" => "Sitting",
        "std" => "Standing",
        "ups" => "Upstairs",
        "dws" => "Downstairs",
        "wlk" => "Walking",
        other => other,
    }
    .to_string()
}

fn motionsense(root: &Path) -> Result<Vec<RawRecording>, IngestError> {
    let data_dir = if root.join("B_Accelerometer_data").is_dir() {
        root.join("B_Accelerometer_data")
    } else {
        root.to_path_buf()
    };
    let mut recordings = Vec::new();
    for trial_dir in sorted_entries(&data_dir)? {
        if !trial_dir.is_dir() {
            continue;
        }
        let dir_name = trial_dir.file_name().unwrap_or_default().to_string_lossy();
        let Some((code, _trial)) = dir_name.split_once('_') else {
            continue;
        };
        let label = motionsense_label(code);
        for file in sorted_entries(&trial_dir)? {
            let name = file.file_name().unwrap_or_default().to_string_lossy();
            let Some(subject) = name
                .strip_prefix("sub_")
                .and_then(|r| r.strip_suffix(".csv"))
            else {
                continue;
            };
            let samples = read_xyz_csv(&file, G_TO_MS2)?;
            if samples.is_empty() {
                continue;
            }
            recordings.push(RawRecording {
                dataset_id: "motionsense".into(),
                subject_id: subject.to_string(),
                activity_label: label.clone(),
                device_position: "Trousers' front pocket".into(),
                sampling_rate_hz: 50.0,
                samples,
            });
        }
    }
    Ok(recordings)
}

/// CSV with columns named x, y, z (extra columns such as a row index are
/// ignored). Values are scaled by `factor`.
fn read_xyz_csv(path: &Path, factor: f64) -> Result<Vec<[f64; 3]>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| malformed(path, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| malformed(path, 1, e.to_string()))?
        .clone();
    let col = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let (cx, cy, cz) = match (col("x"), col("y"), col("z")) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => {
            if headers.len() < 3 {
                return Err(malformed(path, 1, "expected x,y,z columns"));
            }
            (headers.len() - 3, headers.len() - 2, headers.len() - 1)
        }
    };
    let mut samples = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| malformed(path, line, e.to_string()))?;
        let get = |c: usize| -> Result<f64, IngestError> {
            let field = record
                .get(c)
                .ok_or_else(|| malformed(path, line, "missing acceleration column"))?;
            parse_cell(field, path, line)
        };
        samples.push([get(cx)? * factor, get(cy)? * factor, get(cz)? * factor]);
    }
    Ok(samples)
}

// ---------------------------------------------------------------------------
// PAMAP2: Protocol/subjectNNN.dat, space-separated, 100 Hz, hand IMU.
// Column 2 is the activity id, columns 5-7 the hand ±16g accelerometer
// (already m/s²). Activity 0 is transient and dropped; rows whose
// accelerometer cells read NaN are missing samples and are skipped.
// ---------------------------------------------------------------------------

fn pamap2_label(id: u32) -> String {
    match id {
        1 => "Lying".into(),
        2 => "Sitting".into(),
        3 => "Standing".into(),
        4 => "Walking".into(),
        5 => "Running".into(),
        6 => "Cycling".into(),
        7 => "Nordic walking".into(),
        12 => "Ascending stairs".into(),
        13 => "Descending stairs".into(),
        16 => "Vacuum cleaning".into(),
        17 => "Ironing".into(),
        24 => "Rope jumping".into(),
        other => format!("activity_{other}"),
    }
}

fn pamap2(root: &Path) -> Result<Vec<RawRecording>, IngestError> {
    let data_dir = if root.join("Protocol").is_dir() {
        root.join("Protocol")
    } else {
        root.to_path_buf()
    };
    let mut recordings = Vec::new();
    for file in sorted_entries(&data_dir)? {
        let name = file.file_name().unwrap_or_default().to_string_lossy();
        let Some(subject) = name
            .strip_prefix("subject")
            .and_then(|r| r.strip_suffix(".dat"))
        else {
            continue;
        };
        let reader = std::io::BufReader::new(std::fs::File::open(&file)?);
        let mut current: Option<(u32, Vec<[f64; 3]>)> = None;
        let flush = |cur: &mut Option<(u32, Vec<[f64; 3]>)>,
                         recs: &mut Vec<RawRecording>| {
            if let Some((id, samples)) = cur.take() {
                if !samples.is_empty() {
                    recs.push(RawRecording {
                        dataset_id: "pamap2".into(),
                        subject_id: subject.to_string(),
                        activity_label: pamap2_label(id),
                        device_position: "Hand".into(),
                        sampling_rate_hz: 100.0,
                        samples,
                    });
                }
            }
        };
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() < 7 {
                return Err(malformed(&file, line_no, "expected at least 7 columns"));
            }
            let activity: u32 = fields[1]
                .parse()
                .map_err(|_| malformed(&file, line_no, "bad activity id"))?;
            if activity == 0 {
                flush(&mut current, &mut recordings);
                continue;
            }
            // Missing samples are written as literal NaN cells.
            if fields[4..7].iter().any(|f| f.eq_ignore_ascii_case("nan")) {
                continue;
            }
            let sample = [
                parse_cell(fields[4], &file, line_no)?,
                parse_cell(fields[5], &file, line_no)?,
                parse_cell(fields[6], &file, line_no)?,
            ];
            match &mut current {
                Some((id, samples)) if *id == activity => samples.push(sample),
                _ => {
                    flush(&mut current, &mut recordings);
                    current = Some((activity, vec![sample]));
                }
            }
        }
        flush(&mut current, &mut recordings);
    }
    Ok(recordings)
}

// ---------------------------------------------------------------------------
// UCI HAR: train/test folders with Inertial Signals/total_acc_{x,y,z}_*.txt
// (128-sample windows, 50% overlap, in g), subject_*.txt, y_*.txt, and
// activity_labels.txt. Consecutive windows of one (subject, activity) run are
// stitched back into a continuous signal: first window whole, then the last
// 64 samples of each following window.
// ---------------------------------------------------------------------------

fn ucihar(root: &Path) -> Result<Vec<RawRecording>, IngestError> {
    let labels = ucihar_activity_names(root)?;
    let mut recordings = Vec::new();
    for part in ["train", "test"] {
        let dir = root.join(part);
        if !dir.is_dir() {
            continue;
        }
        recordings.extend(ucihar_partition(&dir, part, &labels)?);
    }
    Ok(recordings)
}

fn ucihar_activity_names(root: &Path) -> Result<BTreeMap<u32, String>, IngestError> {
    let path = root.join("activity_labels.txt");
    let mut map = BTreeMap::new();
    if !path.is_file() {
        return Ok(map);
    }
    let reader = std::io::BufReader::new(std::fs::File::open(&path)?);
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let (Some(id), Some(name)) = (parts.next(), parts.next()) else {
            continue;
        };
        let id: u32 = id
            .parse()
            .map_err(|_| malformed(&path, idx + 1, "bad activity id"))?;
        // WALKING_UPSTAIRS -> "Walking upstairs"
        let pretty = {
            let lower = name.to_ascii_lowercase().replace('_', " ");
            let mut chars = lower.chars();
            match chars.next() {
                Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
                None => lower,
            }
        };
        map.insert(id, pretty);
    }
    Ok(map)
}

fn ucihar_partition(
    dir: &Path,
    part: &str,
    labels: &BTreeMap<u32, String>,
) -> Result<Vec<RawRecording>, IngestError> {
    let read_ints = |path: &Path| -> Result<Vec<u32>, IngestError> {
        let reader = std::io::BufReader::new(std::fs::File::open(path)?);
        reader
            .lines()
            .enumerate()
            .filter(|(_, l)| l.as_ref().map(|s| !s.trim().is_empty()).unwrap_or(true))
            .map(|(idx, l)| {
                let l = l?;
                l.trim()
                    .parse()
                    .map_err(|_| malformed(path, idx + 1, "bad integer"))
            })
            .collect()
    };
    let subjects = read_ints(&dir.join(format!("subject_{part}.txt")))?;
    let activities = read_ints(&dir.join(format!("y_{part}.txt")))?;
    let signals = dir.join("Inertial Signals");
    let axis = |a: &str| -> Result<Vec<Vec<f64>>, IngestError> {
        let path = signals.join(format!("total_acc_{a}_{part}.txt"));
        let reader = std::io::BufReader::new(std::fs::File::open(&path)?);
        let mut rows = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|f| parse_cell(f, &path, idx + 1))
                .collect::<Result<_, _>>()?;
            rows.push(row);
        }
        Ok(rows)
    };
    let (xs, ys, zs) = (axis("x")?, axis("y")?, axis("z")?);
    let n = subjects.len();
    if activities.len() != n || xs.len() != n || ys.len() != n || zs.len() != n {
        return Err(malformed(dir, 0, "row counts disagree across files"));
    }

    let mut recordings = Vec::new();
    let mut current: Option<(u32, u32, Vec<[f64; 3]>)> = None;
    let flush = |cur: &mut Option<(u32, u32, Vec<[f64; 3]>)>,
                     recs: &mut Vec<RawRecording>| {
        if let Some((subject, activity, samples)) = cur.take() {
            recs.push(RawRecording {
                dataset_id: "ucihar".into(),
                subject_id: subject.to_string(),
                activity_label: labels
                    .get(&activity)
                    .cloned()
                    .unwrap_or_else(|| format!("activity_{activity}")),
                device_position: "Waist".into(),
                sampling_rate_hz: 50.0,
                samples,
            });
        }
    };
    for i in 0..n {
        let window: Vec<[f64; 3]> = (0..xs[i].len())
            .map(|t| {
                [
                    xs[i][t] * G_TO_MS2,
                    ys[i][t] * G_TO_MS2,
                    zs[i][t] * G_TO_MS2,
                ]
            })
            .collect();
        match &mut current {
            Some((s, a, samples)) if *s == subjects[i] && *a == activities[i] => {
                let overlap = window.len() / 2;
                samples.extend_from_slice(&window[overlap..]);
            }
            _ => {
                flush(&mut current, &mut recordings);
                current = Some((subjects[i], activities[i], window));
            }
        }
    }
    flush(&mut current, &mut recordings);
    Ok(recordings)
}

// ---------------------------------------------------------------------------
// HHAR: Watch_accelerometer.csv with columns
// Index,Arrival_Time,Creation_Time,x,y,z,User,Model,Device,gt. Users a-i map
// to subjects 1-9; rows with a null label are dropped; the sampling rate is
// estimated from the nanosecond creation timestamps of each run.
// ---------------------------------------------------------------------------

fn hhar(root: &Path) -> Result<Vec<RawRecording>, IngestError> {
    let file = if root.is_file() {
        root.to_path_buf()
    } else {
        root.join("Watch_accelerometer.csv")
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(&file)
        .map_err(|e| malformed(&file, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| malformed(&file, 1, e.to_string()))?
        .clone();
    let col = |name: &str| -> Result<usize, IngestError> {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(name))
            .ok_or_else(|| malformed(&file, 1, format!("missing column '{name}'")))
    };
    let (ct, cx, cy, cz, cu, cd, cg) = (
        col("Creation_Time")?,
        col("x")?,
        col("y")?,
        col("z")?,
        col("User")?,
        col("Device")?,
        col("gt")?,
    );

    struct Run {
        subject: String,
        label: String,
        timestamps: Vec<f64>,
        samples: Vec<[f64; 3]>,
    }
    let mut runs: Vec<Run> = Vec::new();
    let mut current_key: Option<(String, String, String)> = None;
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| malformed(&file, line, e.to_string()))?;
        let get = |c: usize| record.get(c).unwrap_or("").trim().to_string();
        let label = get(cg);
        if label.is_empty() || label.eq_ignore_ascii_case("null") {
            current_key = None;
            continue;
        }
        let user = get(cu);
        let subject = match user.as_bytes() {
            [c @ b'a'..=b'z'] => ((c - b'a') as u32 + 1).to_string(),
            _ => user.clone(),
        };
        let device = get(cd);
        let t = parse_cell(&get(ct), &file, line)?;
        let sample = [
            parse_cell(&get(cx), &file, line)?,
            parse_cell(&get(cy), &file, line)?,
            parse_cell(&get(cz), &file, line)?,
        ];
        let key = (user, label.clone(), device);
        if current_key.as_ref() != Some(&key) {
            current_key = Some(key);
            runs.push(Run {
                subject,
                label,
                timestamps: Vec::new(),
                samples: Vec::new(),
            });
        }
        let run = runs.last_mut().expect("run exists");
        run.timestamps.push(t);
        run.samples.push(sample);
    }

    Ok(runs
        .into_iter()
        .filter(|r| !r.samples.is_empty())
        .map(|r| {
            let rate = estimate_rate_hz(&r.timestamps, 1e9).unwrap_or(50.0);
            RawRecording {
                dataset_id: "hhar".into(),
                subject_id: r.subject,
                activity_label: r.label,
                device_position: "Arm".into(),
                sampling_rate_hz: rate,
                samples: r.samples,
            }
        })
        .collect())
}

/// Mean rate implied by a monotone timestamp sequence; `ticks_per_second`
/// converts the raw units.
fn estimate_rate_hz(timestamps: &[f64], ticks_per_second: f64) -> Option<f64> {
    if timestamps.len() < 2 {
        return None;
    }
    let span = (timestamps[timestamps.len() - 1] - timestamps[0]) / ticks_per_second;
    if span <= 0.0 {
        return None;
    }
    Some((timestamps.len() - 1) as f64 / span)
}

// ---------------------------------------------------------------------------
// Generic CSV: header subject,activity,timestamp_s,ax,ay,az. A path may be a
// single file or a directory of .csv files. Contiguous (subject, activity)
// row runs become separate recordings; the rate comes from the timestamps.
// ---------------------------------------------------------------------------

fn generic_csv(root: &Path) -> Result<Vec<RawRecording>, IngestError> {
    let files: Vec<PathBuf> = if root.is_file() {
        vec![root.to_path_buf()]
    } else {
        sorted_entries(root)?
            .into_iter()
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect()
    };
    let mut recordings = Vec::new();
    for file in files {
        recordings.extend(generic_csv_file(&file)?);
    }
    Ok(recordings)
}

fn generic_csv_file(file: &Path) -> Result<Vec<RawRecording>, IngestError> {
    let mut reader = csv::ReaderBuilder::new()
        .from_path(file)
        .map_err(|e| malformed(file, 1, e.to_string()))?;
    let headers = reader
        .headers()
        .map_err(|e| malformed(file, 1, e.to_string()))?
        .clone();
    let expected = ["subject", "activity", "timestamp_s", "ax", "ay", "az"];
    for (i, name) in expected.iter().enumerate() {
        if headers.get(i).map(str::trim) != Some(*name) {
            return Err(malformed(
                file,
                1,
                format!("expected header 'subject,activity,timestamp_s,ax,ay,az', got '{}'",
                    headers.iter().collect::<Vec<_>>().join(",")),
            ));
        }
    }

    struct Run {
        subject: String,
        activity: String,
        timestamps: Vec<f64>,
        samples: Vec<[f64; 3]>,
    }
    let mut runs: Vec<Run> = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let line = idx + 2;
        let record = record.map_err(|e| malformed(file, line, e.to_string()))?;
        if record.len() < 6 {
            return Err(malformed(file, line, "expected 6 fields"));
        }
        let subject = record[0].trim().to_string();
        let activity = record[1].trim().to_string();
        let t = parse_cell(&record[2], file, line)?;
        let sample = [
            parse_cell(&record[3], file, line)?,
            parse_cell(&record[4], file, line)?,
            parse_cell(&record[5], file, line)?,
        ];
        let same_run = runs
            .last()
            .is_some_and(|r| r.subject == subject && r.activity == activity);
        if !same_run {
            runs.push(Run {
                subject,
                activity,
                timestamps: Vec::new(),
                samples: Vec::new(),
            });
        }
        let run = runs.last_mut().expect("run exists");
        run.timestamps.push(t);
        run.samples.push(sample);
    }

    Ok(runs
        .into_iter()
        .map(|r| {
            let rate = estimate_rate_hz(&r.timestamps, 1.0).unwrap_or(50.0);
            RawRecording {
                dataset_id: "generic-csv".into(),
                subject_id: r.subject,
                activity_label: r.activity,
                device_position: "the user's body".into(),
                sampling_rate_hz: rate,
                samples: r.samples,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(path: &Path, content: &str) {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(path, content).unwrap();
    }

    #[test]
    fn unknown_adapter_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_dataset(dir.path(), "wisdm"),
            Err(IngestError::UnknownAdapter(_))
        ));
    }

    #[test]
    fn empty_tree_is_an_empty_dataset() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            parse_dataset(dir.path(), "generic-csv"),
            Err(IngestError::EmptyDataset(_))
        ));
    }

    #[test]
    fn generic_csv_single_run() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data.csv");
        let mut content = String::from("subject,activity,timestamp_s,ax,ay,az\n");
        for i in 0..100 {
            content.push_str(&format!("1,walking,{},0.1,0.2,0.3\n", i as f64 * 0.02));
        }
        write(&file, &content);
        let recs = parse_dataset(&file, "generic-csv").unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].samples.len(), 100);
        assert_eq!(recs[0].activity_label, "walking");
        assert!((recs[0].sampling_rate_hz - 50.0).abs() < 1e-9);
    }

    #[test]
    fn generic_csv_splits_contiguous_runs() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data.csv");
        write(
            &file,
            "subject,activity,timestamp_s,ax,ay,az\n\
             1,walk,0.00,1,1,1\n\
             1,walk,0.02,1,1,1\n\
             1,run,0.04,2,2,2\n\
             2,walk,0.00,3,3,3\n",
        );
        let recs = parse_dataset(&file, "generic-csv").unwrap();
        assert_eq!(recs.len(), 3);
    }

    #[test]
    fn generic_csv_bad_cell_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("data.csv");
        write(
            &file,
            "subject,activity,timestamp_s,ax,ay,az\n\
             1,walk,0.00,1,1,1\n\
             1,walk,0.02,oops,1,1\n",
        );
        match parse_dataset(&file, "generic-csv") {
            Err(IngestError::MalformedFile { line, .. }) => assert_eq!(line, 3),
            other => panic!("expected MalformedFile, got {other:?}"),
        }
    }

    #[test]
    fn motionsense_layout_and_unit_conversion() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write(
            &root.join("B_Accelerometer_data/jog_9/sub_1.csv"),
            ",x,y,z\n0,1.0,0.0,0.5\n1,1.0,0.0,0.5\n",
        );
        write(
            &root.join("B_Accelerometer_data/wlk_7/sub_12.csv"),
            ",x,y,z\n0,0.1,0.1,0.1\n",
        );
        let recs = parse_dataset(root, "motionsense").unwrap();
        assert_eq!(recs.len(), 2);
        let jog = recs.iter().find(|r| r.activity_label == "Jogging").unwrap();
        assert_eq!(jog.subject_id, "1");
        assert_eq!(jog.device_position, "Trousers' front pocket");
        assert_eq!(jog.sampling_rate_hz, 50.0);
        assert!((jog.samples[0][0] - G_TO_MS2).abs() < 1e-12);
        assert!(recs.iter().any(|r| r.subject_id == "12"));
    }

    #[test]
    fn pamap2_selects_hand_accel_and_skips_gaps() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        // Columns: time, activity, heart, hand temp, hand accel16 x 3, filler.
        let row = |t: f64, act: u32, ax: f64| {
            format!("{t} {act} 100 30 {ax} 0.5 9.8 0 0 0\n")
        };
        let mut content = String::new();
        content.push_str(&row(0.00, 0, 1.0)); // transient, dropped
        content.push_str(&row(0.01, 4, 1.1));
        content.push_str(&row(0.02, 4, 1.2));
        content.push_str("0.03 4 100 30 NaN NaN NaN 0 0 0\n"); // missing sample
        content.push_str(&row(0.04, 4, 1.3));
        content.push_str(&row(0.05, 5, 2.0)); // new activity -> new recording
        write(&root.join("Protocol/subject101.dat"), &content);
        let recs = parse_dataset(root, "pamap2").unwrap();
        assert_eq!(recs.len(), 2);
        let walking = recs.iter().find(|r| r.activity_label == "Walking").unwrap();
        assert_eq!(walking.subject_id, "101");
        assert_eq!(walking.device_position, "Hand");
        assert_eq!(walking.sampling_rate_hz, 100.0);
        assert_eq!(walking.samples.len(), 3); // NaN row skipped
        assert_eq!(walking.samples[0][0], 1.1);
        assert!(recs.iter().any(|r| r.activity_label == "Running"));
    }

    #[test]
    fn ucihar_stitches_overlapping_windows() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        write(&root.join("activity_labels.txt"), "1 WALKING\n2 WALKING_UPSTAIRS\n");
        write(&root.join("train/subject_train.txt"), "1\n1\n1\n");
        write(&root.join("train/y_train.txt"), "2\n2\n1\n");
        let window_row = |start: usize| {
            (start..start + 128)
                .map(|v| format!("{:.3}", v as f64 * 0.001))
                .collect::<Vec<_>>()
                .join(" ")
                + "\n"
        };
        // Rows 1 and 2 overlap by 64 samples; row 3 is a new activity.
        let rows = window_row(0) + &window_row(64) + &window_row(500);
        for axis in ["x", "y", "z"] {
            write(
                &root.join(format!("train/Inertial Signals/total_acc_{axis}_train.txt")),
                &rows,
            );
        }
        let recs = parse_dataset(root, "ucihar").unwrap();
        assert_eq!(recs.len(), 2);
        let upstairs = recs
            .iter()
            .find(|r| r.activity_label == "Walking upstairs")
            .unwrap();
        assert_eq!(upstairs.samples.len(), 192); // 128 + 64
        assert_eq!(upstairs.device_position, "Waist");
        // Stitched signal is the continuous ramp, in m/s².
        assert!((upstairs.samples[128][0] - 0.128 * G_TO_MS2).abs() < 1e-9);
        let walking = recs.iter().find(|r| r.activity_label == "Walking").unwrap();
        assert_eq!(walking.samples.len(), 128);
    }

    #[test]
    fn hhar_maps_users_and_estimates_rate() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        let mut content = String::from(
            "Index,Arrival_Time,Creation_Time,x,y,z,User,Model,Device,gt\n",
        );
        // Subject a at 100 Hz (10 ms in nanoseconds between samples).
        for i in 0..5 {
            content.push_str(&format!(
                "{i},0,{},0.1,0.2,0.3,a,gear,gear_1,stand\n",
                1_000_000_000u64 + i * 10_000_000
            ));
        }
        content.push_str("9,0,2000000000,0.1,0.2,0.3,a,gear,gear_1,null\n");
        content.push_str("10,0,3000000000,0.4,0.5,0.6,c,gear,gear_1,walk\n");
        write(&root.join("Watch_accelerometer.csv"), &content);
        let recs = parse_dataset(root, "hhar").unwrap();
        assert_eq!(recs.len(), 2);
        let stand = recs.iter().find(|r| r.activity_label == "stand").unwrap();
        assert_eq!(stand.subject_id, "1");
        assert_eq!(stand.device_position, "Arm");
        assert_eq!(stand.samples.len(), 5);
        assert!((stand.sampling_rate_hz - 100.0).abs() < 1e-6);
        let walk = recs.iter().find(|r| r.activity_label == "walk").unwrap();
        assert_eq!(walk.subject_id, "3");
        assert_eq!(walk.sampling_rate_hz, 50.0); // single sample, default rate
    }
}
