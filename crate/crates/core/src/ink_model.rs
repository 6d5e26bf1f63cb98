//! Participants, copy tasks and raw pen recordings.
//!
//! Recordings are stored one file per (participant, task) as
//! `<participant_id>_task<k>.csv` with header `t_ms,x,y,pressure[,status]`,
//! where `status` is `paper` or `air`. When the status column is absent the
//! pen is on paper iff `pressure > epsilon` (epsilon defaults to 0).
//! Participant metadata lives in `participants.csv` with header
//! `id,cohort,sex,age,work,education`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLING_RATE_HZ: f64 = 200.0;
pub const PARTICIPANTS_FILE: &str = "participants.csv";
const RECORDING_HEADER: [&str; 4] = ["t_ms", "x", "y", "pressure"];
const PARTICIPANT_HEADER: [&str; 6] = ["id", "cohort", "sex", "age", "work", "education"];

macro_rules! text_enum {
    ($name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        impl $name {
            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.trim() {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!(
                        "unknown {} {:?} (expected one of {})",
                        stringify!($name),
                        other,
                        [$($text),+].join(", ")
                    )),
                }
            }
        }
    };
}

/// Diagnostic cohort. `Hc` is class 0 and `Ad` class 1 for the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Cohort {
    #[serde(rename = "HC")]
    Hc,
    #[serde(rename = "AD")]
    Ad,
}
text_enum!(Cohort { Hc => "HC", Ad => "AD" });

impl Cohort {
    pub fn class(self) -> u8 {
        match self {
            Cohort::Hc => 0,
            Cohort::Ad => 1,
        }
    }

    pub fn from_class(class: u8) -> Self {
        if class == 0 {
            Cohort::Hc
        } else {
            Cohort::Ad
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Sex {
    F,
    M,
}
text_enum!(Sex { F => "F", M => "M" });

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Work {
    Intellectual,
    Manual,
}
text_enum!(Work { Intellectual => "intellectual", Manual => "manual" });

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Participant {
    pub id: String,
    pub cohort: Cohort,
    pub sex: Sex,
    pub age: u32,
    pub work: Work,
    pub education: u32,
}

impl Participant {
    pub fn new(
        id: impl Into<String>,
        cohort: Cohort,
        sex: Sex,
        age: u32,
        work: Work,
        education: u32,
    ) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(',') {
            return Err(Error::Validation(format!("invalid participant id {id:?}")));
        }
        if age == 0 {
            return Err(Error::Validation(format!("participant {id}: age must be positive")));
        }
        Ok(Participant {
            id,
            cohort,
            sex,
            age,
            work,
            education,
        })
    }
}

/// Word category of a copy task.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Category {
    #[serde(rename = "RW")]
    Rw,
    #[serde(rename = "NRW")]
    Nrw,
    #[serde(rename = "NW")]
    Nw,
}
text_enum!(Category { Rw => "RW", Nrw => "NRW", Nw => "NW" });

impl Category {
    pub const ALL: [Category; 3] = [Category::Rw, Category::Nrw, Category::Nw];

    /// The two task ids of this category, in ascending order.
    pub fn task_ids(self) -> [u8; 2] {
        match self {
            Category::Rw => [1, 2],
            Category::Nrw => [3, 4],
            Category::Nw => [5, 6],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub task_id: u8,
    pub category: Category,
    pub word: String,
}

const TASK_TABLE: [(u8, Category, &str); 6] = [
    (1, Category::Rw, "pane"),
    (2, Category::Rw, "mela"),
    (3, Category::Nrw, "prosciutto"),
    (4, Category::Nrw, "ciliegia"),
    (5, Category::Nw, "taganaccio"),
    (6, Category::Nw, "lonfo"),
];

impl TaskSpec {
    pub fn new(task_id: u8) -> Result<Self> {
        TASK_TABLE
            .iter()
            .find(|(id, _, _)| *id == task_id)
            .map(|&(task_id, category, word)| TaskSpec {
                task_id,
                category,
                word: word.to_string(),
            })
            .ok_or_else(|| Error::Validation(format!("task id {task_id} outside 1..=6")))
    }

    pub fn all() -> Vec<TaskSpec> {
        (1..=6).map(|id| TaskSpec::new(id).unwrap()).collect()
    }
}

pub fn category_of(task_id: u8) -> Option<Category> {
    TASK_TABLE
        .iter()
        .find(|(id, _, _)| *id == task_id)
        .map(|(_, c, _)| *c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TraitKind {
    OnPaper,
    InAir,
}

impl TraitKind {
    pub fn as_status(self) -> &'static str {
        match self {
            TraitKind::OnPaper => "paper",
            TraitKind::InAir => "air",
        }
    }

    pub fn from_status(s: &str) -> Option<Self> {
        match s.trim() {
            "paper" => Some(TraitKind::OnPaper),
            "air" => Some(TraitKind::InAir),
            _ => None,
        }
    }

    /// Short prefix used in merged feature names.
    pub fn prefix(self) -> &'static str {
        match self {
            TraitKind::OnPaper => "P",
            TraitKind::InAir => "A",
        }
    }
}

impl fmt::Display for TraitKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TraitKind::OnPaper => "on-paper",
            TraitKind::InAir => "in-air",
        })
    }
}

/// Rule deriving pen status from pressure when a file carries no status column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatusRule {
    pub pressure_epsilon: f64,
}

impl Default for StatusRule {
    fn default() -> Self {
        StatusRule {
            pressure_epsilon: 0.0,
        }
    }
}

impl StatusRule {
    pub fn status(&self, pressure: f64) -> TraitKind {
        if pressure > self.pressure_epsilon {
            TraitKind::OnPaper
        } else {
            TraitKind::InAir
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenSample {
    /// Milliseconds since the start of the recording.
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub pressure: f64,
    pub status: TraitKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub participant_id: String,
    pub task_id: u8,
    samples: Vec<PenSample>,
    pub nominal_rate: f64,
}

impl Recording {
    pub fn new(participant_id: impl Into<String>, task_id: u8, samples: Vec<PenSample>) -> Result<Self> {
        let participant_id = participant_id.into();
        TaskSpec::new(task_id)?;
        if samples.is_empty() {
            return Err(Error::Validation(format!(
                "{participant_id}/task {task_id}: empty recording"
            )));
        }
        if samples.len() < 2 {
            return Err(Error::Validation(format!(
                "{participant_id}/task {task_id}: a recording needs at least 2 samples"
            )));
        }
        for (i, s) in samples.iter().enumerate() {
            if !(s.t.is_finite() && s.x.is_finite() && s.y.is_finite() && s.pressure.is_finite()) {
                return Err(Error::Validation(format!(
                    "{participant_id}/task {task_id}: non-finite value at sample {i}"
                )));
            }
            if s.t < 0.0 || s.pressure < 0.0 {
                return Err(Error::Validation(format!(
                    "{participant_id}/task {task_id}: negative time or pressure at sample {i}"
                )));
            }
        }
        if let Some(i) = samples.windows(2).position(|w| w[1].t <= w[0].t) {
            return Err(Error::Validation(format!(
                "{participant_id}/task {task_id}: non-monotone timestamp at sample {} ({} after {})",
                i + 1,
                samples[i + 1].t,
                samples[i].t
            )));
        }
        if !samples.iter().any(|s| s.status == TraitKind::OnPaper) {
            return Err(Error::Validation(format!(
                "{participant_id}/task {task_id}: no on-paper samples"
            )));
        }
        Ok(Recording {
            participant_id,
            task_id,
            samples,
            nominal_rate: DEFAULT_SAMPLING_RATE_HZ,
        })
    }

    pub fn samples(&self) -> &[PenSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    /// Writes the recording in the interchange CSV format, status column included.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let to_err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["t_ms", "x", "y", "pressure", "status"]).map_err(to_err)?;
        for s in &self.samples {
            w.write_record([
                s.t.to_string(),
                s.x.to_string(),
                s.y.to_string(),
                s.pressure.to_string(),
                s.status.as_status().to_string(),
            ])
            .map_err(to_err)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

pub fn recording_file_name(participant_id: &str, task_id: u8) -> String {
    format!("{participant_id}_task{task_id}.csv")
}

/// Splits `<participant_id>_task<k>.csv` into its parts.
pub fn parse_recording_file_name(name: &str) -> Option<(String, u8)> {
    let stem = name.strip_suffix(".csv")?;
    let at = stem.rfind("_task")?;
    let task_id: u8 = stem[at + 5..].parse().ok()?;
    let pid = &stem[..at];
    (!pid.is_empty()).then(|| (pid.to_string(), task_id))
}

fn parse_field<T: FromStr>(path: &Path, line: u64, name: &str, raw: Option<&str>) -> Result<T>
where
    T::Err: fmt::Display,
{
    let raw = raw.ok_or_else(|| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("missing column {name}"),
    })?;
    raw.trim().parse().map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line,
        message: format!("bad {name} value {raw:?}: {e}"),
    })
}

fn csv_reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(input)
}

fn csv_parse_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: e.to_string(),
    }
}

/// Parses a recording CSV. `path` is only used in error messages.
pub fn read_recording<R: Read>(
    input: R,
    path: &Path,
    participant_id: &str,
    task_id: u8,
    rule: StatusRule,
) -> Result<Recording> {
    let mut reader = csv_reader(input);
    let headers = reader.headers().map_err(|e| csv_parse_error(path, e))?.clone();
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(Error::Validation(format!("{}: empty recording file", path.display())));
    }
    let names: Vec<&str> = headers.iter().collect();
    let has_status = match names.as_slice() {
        [a, b, c, d] if [*a, *b, *c, *d] == RECORDING_HEADER => false,
        [a, b, c, d, "status"] if [*a, *b, *c, *d] == RECORDING_HEADER => true,
        _ => {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("expected header t_ms,x,y,pressure[,status], got {}", names.join(",")),
            })
        }
    };
    let width = if has_status { 5 } else { 4 };

    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_parse_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("expected {width} columns, found {}", record.len()),
            });
        }
        let t: f64 = parse_field(path, line, "t_ms", record.get(0))?;
        let x: f64 = parse_field(path, line, "x", record.get(1))?;
        let y: f64 = parse_field(path, line, "y", record.get(2))?;
        let pressure: f64 = parse_field(path, line, "pressure", record.get(3))?;
        let status = if has_status {
            let raw = record.get(4).unwrap_or("");
            TraitKind::from_status(raw).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("bad status {raw:?} (expected air or paper)"),
            })?
        } else {
            rule.status(pressure)
        };
        samples.push(PenSample {
            t,
            x,
            y,
            pressure,
            status,
        });
    }
    if samples.is_empty() {
        return Err(Error::Validation(format!("{}: empty recording file", path.display())));
    }
    Recording::new(participant_id, task_id, samples)
        .map_err(|e| Error::Validation(format!("{}: {}", path.display(), strip_prefix(&e))))
}

fn strip_prefix(e: &Error) -> String {
    match e {
        Error::Validation(m) => m.clone(),
        other => other.to_string(),
    }
}

/// Loads one recording file for a known participant and task.
pub fn load_recording(path: &Path, participant: &Participant, task: &TaskSpec) -> Result<Recording> {
    load_recording_with(path, &participant.id, task.task_id, StatusRule::default())
}

pub fn load_recording_with(path: &Path, participant_id: &str, task_id: u8, rule: StatusRule) -> Result<Recording> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_recording(std::io::BufReader::new(file), path, participant_id, task_id, rule)
}

pub fn read_participants<R: Read>(input: R, path: &Path) -> Result<Vec<Participant>> {
    let mut reader = csv_reader(input);
    let headers = reader.headers().map_err(|e| csv_parse_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != PARTICIPANT_HEADER {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("expected header {}", PARTICIPANT_HEADER.join(",")),
        });
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_parse_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id: String = parse_field(path, line, "id", record.get(0))?;
        let cohort: Cohort = parse_field(path, line, "cohort", record.get(1))?;
        let sex: Sex = parse_field(path, line, "sex", record.get(2))?;
        let age: u32 = parse_field(path, line, "age", record.get(3))?;
        let work: Work = parse_field(path, line, "work", record.get(4))?;
        let education: u32 = parse_field(path, line, "education", record.get(5))?;
        let p = Participant::new(id, cohort, sex, age, work, education).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: strip_prefix(&e),
        })?;
        out.push(p);
    }
    Ok(out)
}

pub fn write_participants<W: Write>(participants: &[Participant], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let to_err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
    w.write_record(PARTICIPANT_HEADER).map_err(to_err)?;
    for p in participants {
        w.write_record([
            p.id.clone(),
            p.cohort.to_string(),
            p.sex.to_string(),
            p.age.to_string(),
            p.work.to_string(),
            p.education.to_string(),
        ])
        .map_err(to_err)?;
    }
    w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub enum Issue {
    DanglingReference { participant_id: String, task_id: u8 },
    Duplicate { participant_id: String, task_id: u8 },
    DuplicateParticipant { participant_id: String },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::DanglingReference {
                participant_id,
                task_id,
            } => write!(f, "dangling reference: recording {participant_id}/task {task_id} names an unknown participant"),
            Issue::Duplicate {
                participant_id,
                task_id,
            } => write!(f, "duplicate: more than one recording for {participant_id}/task {task_id}"),
            Issue::DuplicateParticipant { participant_id } => {
                write!(f, "duplicate participant id {participant_id}")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    /// Sorted, so the report does not depend on input order.
    pub issues: Vec<Issue>,
    pub cohort_counts: BTreeMap<Cohort, usize>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.issues.is_empty()
    }
}

pub fn validate_study(recordings: &[Recording], participants: &[Participant]) -> ValidationReport {
    let mut issues = Vec::new();
    let mut known = BTreeMap::new();
    for p in participants {
        if known.insert(p.id.as_str(), p.cohort).is_some() {
            issues.push(Issue::DuplicateParticipant {
                participant_id: p.id.clone(),
            });
        }
    }
    let mut cohort_counts = BTreeMap::new();
    for cohort in known.values() {
        *cohort_counts.entry(*cohort).or_insert(0) += 1;
    }

    let mut seen = BTreeSet::new();
    let mut duplicates = BTreeSet::new();
    for r in recordings {
        let key = (r.participant_id.clone(), r.task_id);
        if !known.contains_key(r.participant_id.as_str()) {
            issues.push(Issue::DanglingReference {
                participant_id: key.0.clone(),
                task_id: key.1,
            });
        }
        if !seen.insert(key.clone()) {
            duplicates.insert(key);
        }
    }
    issues.extend(duplicates.into_iter().map(|(participant_id, task_id)| Issue::Duplicate {
        participant_id,
        task_id,
    }));
    issues.sort();
    issues.dedup();
    ValidationReport {
        issues,
        cohort_counts,
    }
}

/// A study directory: `participants.csv` plus one recording file per
/// (participant, task).
#[derive(Debug, Clone, Default)]
pub struct Study {
    pub participants: Vec<Participant>,
    pub recordings: Vec<Recording>,
}

/// Per-file load failures collected while reading a study directory.
#[derive(Debug, Default)]
pub struct LoadLog {
    pub failures: Vec<(PathBuf, String)>,
}

impl Study {
    pub fn participant(&self, id: &str) -> Option<&Participant> {
        self.participants.iter().find(|p| p.id == id)
    }

    /// Reads a study directory. Recordings that fail to parse are reported in
    /// the returned log and skipped; a missing or malformed participant file
    /// is an error.
    pub fn load(dir: &Path, rule: StatusRule) -> Result<(Study, LoadLog)> {
        let ppath = dir.join(PARTICIPANTS_FILE);
        let file = fs::File::open(&ppath).map_err(|e| Error::io(&ppath, e))?;
        let participants = read_participants(std::io::BufReader::new(file), &ppath)?;

        let mut entries: Vec<(String, u8, PathBuf)> = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().to_string_lossy().into_owned();
                parse_recording_file_name(&name).map(|(pid, task)| (pid, task, e.path()))
            })
            .collect();
        entries.sort();

        let mut log = LoadLog::default();
        let mut recordings = Vec::new();
        for (pid, task, path) in entries {
            match load_recording_with(&path, &pid, task, rule) {
                Ok(r) => recordings.push(r),
                Err(e) => log.failures.push((path, e.to_string())),
            }
        }
        Ok((
            Study {
                participants,
                recordings,
            },
            log,
        ))
    }

    /// Writes the study in the directory layout [`Study::load`] reads and
    /// returns the written paths relative to `dir`.
    pub fn save(&self, dir: &Path) -> Result<Vec<String>> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let ppath = dir.join(PARTICIPANTS_FILE);
        let file = fs::File::create(&ppath).map_err(|e| Error::io(&ppath, e))?;
        write_participants(&self.participants, std::io::BufWriter::new(file))?;
        let mut written = vec![PARTICIPANTS_FILE.to_string()];
        for r in &self.recordings {
            let name = recording_file_name(&r.participant_id, r.task_id);
            r.save(&dir.join(&name))?;
            written.push(name);
        }
        Ok(written)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Recording> {
        read_recording(text.as_bytes(), Path::new("mem.csv"), "p1", 1, StatusRule::default())
    }

    fn participant(id: &str, cohort: Cohort) -> Participant {
        Participant::new(id, cohort, Sex::F, 70, Work::Manual, 8).unwrap()
    }

    fn recording(pid: &str, task: u8) -> Recording {
        parse("t_ms,x,y,pressure\n0,0,0,1\n5,1,1,1\n")
            .map(|mut r| {
                r.participant_id = pid.to_string();
                r.task_id = task;
                r
            })
            .unwrap()
    }

    #[test]
    fn status_derived_from_pressure() {
        let r = parse("t_ms,x,y,pressure\n0,0,0,0\n5,1,1,1\n10,2,2,1\n").unwrap();
        let st: Vec<_> = r.samples().iter().map(|s| s.status).collect();
        assert_eq!(st, [TraitKind::InAir, TraitKind::OnPaper, TraitKind::OnPaper]);
    }

    #[test]
    fn explicit_status_wins() {
        let r = parse("t_ms,x,y,pressure,status\n0,0,0,0,paper\n5,1,1,3,air\n").unwrap();
        assert_eq!(r.samples()[0].status, TraitKind::OnPaper);
        assert_eq!(r.samples()[1].status, TraitKind::InAir);
    }

    #[test]
    fn pressure_epsilon_applies() {
        let rule = StatusRule {
            pressure_epsilon: 2.0,
        };
        assert_eq!(rule.status(1.5), TraitKind::InAir);
        assert_eq!(rule.status(2.5), TraitKind::OnPaper);
    }

    #[test]
    fn non_monotone_rejected() {
        let err = parse("t_ms,x,y,pressure\n10,0,0,1\n5,1,1,1\n").unwrap_err();
        assert!(err.to_string().contains("non-monotone timestamp"), "{err}");
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("t_ms,x,y,pressure\n0,0,0,1\n5,abc,1,1\n").unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other}"),
        }
        let err = parse("t_ms,x,y,pressure\n0,0,0,1\n5,1,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
    }

    #[test]
    fn empty_file_rejected() {
        assert!(matches!(parse(""), Err(Error::Validation(_))));
        assert!(matches!(parse("t_ms,x,y,pressure\n"), Err(Error::Validation(_))));
    }

    #[test]
    fn needs_on_paper_sample() {
        let err = parse("t_ms,x,y,pressure\n0,0,0,0\n5,1,1,0\n").unwrap_err();
        assert!(err.to_string().contains("no on-paper"));
    }

    #[test]
    fn file_name_round_trip() {
        let name = recording_file_name("HC_007", 4);
        assert_eq!(name, "HC_007_task4.csv");
        assert_eq!(parse_recording_file_name(&name), Some(("HC_007".into(), 4)));
        assert_eq!(parse_recording_file_name("participants.csv"), None);
    }

    #[test]
    fn task_table_is_fixed() {
        let words: Vec<_> = TaskSpec::all().into_iter().map(|t| (t.category, t.word)).collect();
        assert_eq!(words[0], (Category::Rw, "pane".to_string()));
        assert_eq!(words[3], (Category::Nrw, "ciliegia".to_string()));
        assert_eq!(words[5], (Category::Nw, "lonfo".to_string()));
        assert!(TaskSpec::new(7).is_err());
    }

    #[test]
    fn participants_round_trip() {
        let ps = vec![participant("a", Cohort::Ad), participant("b", Cohort::Hc)];
        let mut buf = Vec::new();
        write_participants(&ps, &mut buf).unwrap();
        let back = read_participants(buf.as_slice(), Path::new("p.csv")).unwrap();
        assert_eq!(back, ps);
        let err = read_participants(
            "id,cohort,sex,age,work,education\nx,XX,F,1,manual,2\n".as_bytes(),
            Path::new("p.csv"),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }

    #[test]
    fn complete_study_is_clean() {
        let ps = vec![participant("a", Cohort::Ad), participant("b", Cohort::Hc)];
        let rs: Vec<_> = ["a", "b"]
            .iter()
            .flat_map(|p| (1..=6).map(move |t| recording(p, t)))
            .collect();
        let report = validate_study(&rs, &ps);
        assert!(report.is_clean());
        assert_eq!(report.cohort_counts[&Cohort::Ad], 1);
        assert_eq!(report.cohort_counts[&Cohort::Hc], 1);
    }

    #[test]
    fn dangling_and_duplicate_reported() {
        let ps = vec![participant("a", Cohort::Ad)];
        let report = validate_study(&[recording("zz", 1)], &ps);
        assert_eq!(
            report.issues,
            vec![Issue::DanglingReference {
                participant_id: "zz".into(),
                task_id: 1
            }]
        );
        let report = validate_study(&[recording("a", 3), recording("a", 3)], &ps);
        assert_eq!(
            report.issues,
            vec![Issue::Duplicate {
                participant_id: "a".into(),
                task_id: 3
            }]
        );
    }

    #[test]
    fn validation_ignores_order() {
        let ps = vec![participant("a", Cohort::Ad), participant("b", Cohort::Hc)];
        let mut rs = vec![recording("a", 1), recording("q", 2), recording("b", 2), recording("b", 2)];
        let forward = validate_study(&rs, &ps);
        rs.reverse();
        let mut ps_rev = ps.clone();
        ps_rev.reverse();
        assert_eq!(forward, validate_study(&rs, &ps_rev));
    }
}
