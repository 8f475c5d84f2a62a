//! Labeled multichannel recordings and their plain-text on-disk format.
//!
//! Recording file:
//!
//! ```text
//! id=<text>
//! subject=<text>
//! pain_score=<int 0..=10>
//! sample_period_ms=<real>
//! kind:placement:name,kind:placement:name,...      (N channel specs)
//! v_1,v_2,...,v_N                                  (one line per timestep)
//! ```
//!
//! Manifest file: `dataset=<text>`, `categories=<ascending ints>`, then one
//! recording path per line, relative to the manifest's directory.

use std::collections::HashSet;
use std::fmt::{self, Write as _};
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::nn::Grid2D;

pub const CANONICAL_PERIOD_MS: f64 = 15.0;
pub const MAX_PAIN_SCORE: u8 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ChannelKind {
    Pulse,
    Temperature,
    Gsr,
    Accel,
    Gyro,
    Force,
}

impl ChannelKind {
    pub const ALL: [ChannelKind; 6] = [
        ChannelKind::Pulse,
        ChannelKind::Temperature,
        ChannelKind::Gsr,
        ChannelKind::Accel,
        ChannelKind::Gyro,
        ChannelKind::Force,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChannelKind::Pulse => "pulse",
            ChannelKind::Temperature => "temperature",
            ChannelKind::Gsr => "gsr",
            ChannelKind::Accel => "accel",
            ChannelKind::Gyro => "gyro",
            ChannelKind::Force => "force",
        }
    }
}

impl fmt::Display for ChannelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ChannelKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        ChannelKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown channel kind `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChannelSpec {
    pub name: String,
    pub kind: ChannelKind,
    pub placement: String,
}

impl ChannelSpec {
    pub fn new(kind: ChannelKind, placement: &str, name: &str) -> Self {
        Self {
            name: name.to_string(),
            kind,
            placement: placement.to_string(),
        }
    }
}

/// One device session. `values` is channels × timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub id: String,
    pub subject_id: String,
    pub pain_score: u8,
    pub sample_period_ms: f64,
    pub channels: Vec<ChannelSpec>,
    pub values: Grid2D,
}

fn bad_text(s: &str) -> bool {
    s.is_empty() || s.contains([',', ':', '\n', '\r', '='])
}

impl Recording {
    /// Builds a recording, checking every invariant.
    pub fn new(
        id: &str,
        subject_id: &str,
        pain_score: u8,
        sample_period_ms: f64,
        channels: Vec<ChannelSpec>,
        values: Grid2D,
    ) -> Result<Self> {
        let rec = Self {
            id: id.to_string(),
            subject_id: subject_id.to_string(),
            pain_score,
            sample_period_ms,
            channels,
            values,
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() || self.id.contains(['\n', '\r']) {
            return Err(Error::Manifest("recording id must be a non-empty single line".into()));
        }
        if self.subject_id.is_empty() || self.subject_id.contains(['\n', '\r']) {
            return Err(Error::Manifest("subject id must be a non-empty single line".into()));
        }
        if self.pain_score > MAX_PAIN_SCORE {
            return Err(Error::Manifest(format!(
                "pain score {} outside 0..={MAX_PAIN_SCORE}",
                self.pain_score
            )));
        }
        if !(self.sample_period_ms.is_finite() && self.sample_period_ms > 0.0) {
            return Err(Error::Manifest(format!(
                "sample period {} ms must be positive",
                self.sample_period_ms
            )));
        }
        if self.channels.is_empty() {
            return Err(Error::usage("recording has no channels"));
        }
        let mut seen = HashSet::new();
        for c in &self.channels {
            if bad_text(&c.name) || c.placement.contains([',', ':', '\n', '\r']) {
                return Err(Error::Manifest(format!(
                    "channel name/placement `{}`/`{}` is empty or contains a delimiter",
                    c.name, c.placement
                )));
            }
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Manifest(format!("duplicate channel name `{}`", c.name)));
            }
        }
        if self.values.rows() != self.channels.len() {
            return Err(Error::Data {
                row: self.values.rows(),
                col: 0,
                msg: format!(
                    "{} value rows for {} channels",
                    self.values.rows(),
                    self.channels.len()
                ),
            });
        }
        if self.values.cols() == 0 {
            return Err(Error::Data {
                row: 0,
                col: 0,
                msg: "recording has no timesteps".into(),
            });
        }
        if let Some(k) = self.values.as_slice().iter().position(|v| !v.is_finite()) {
            let t = self.values.cols();
            return Err(Error::Data {
                row: k / t,
                col: k % t,
                msg: "non-finite value".into(),
            });
        }
        Ok(())
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn num_timesteps(&self) -> usize {
        self.values.cols()
    }

    /// Keeps only the listed channels, in the order given.
    pub fn select_channels(&self, idx: &[usize]) -> Result<Recording> {
        let channels = idx
            .iter()
            .map(|&i| {
                self.channels
                    .get(i)
                    .cloned()
                    .ok_or_else(|| Error::shape(format!("channel {i} out of range")))
            })
            .collect::<Result<Vec<_>>>()?;
        Recording::new(
            &self.id,
            &self.subject_id,
            self.pain_score,
            self.sample_period_ms,
            channels,
            self.values.select_rows(idx)?,
        )
    }
}

fn format_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn meta_value<'a>(path: &Path, line_no: usize, line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| Error::Manifest(format!("{}: missing `{key}`", path.display())))?;
    match line.split_once('=') {
        Some((k, v)) if k.trim() == key => Ok(v.trim()),
        Some((k, _)) => Err(Error::Manifest(format!(
            "{}: line {line_no}: expected key `{key}`, found `{}`",
            path.display(),
            k.trim()
        ))),
        None => Err(format_err(path, line_no, format!("expected `{key}=<value>`"))),
    }
}

/// Reads and validates a recording file.
pub fn load_recording(path: &Path) -> Result<Recording> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_recording(&text, path)
}

pub fn parse_recording(text: &str, path: &Path) -> Result<Recording> {
    let mut lines = text.lines();
    let id = meta_value(path, 1, lines.next(), "id")?.to_string();
    let subject = meta_value(path, 2, lines.next(), "subject")?.to_string();
    let score_text = meta_value(path, 3, lines.next(), "pain_score")?;
    let score: i64 = score_text
        .parse()
        .map_err(|_| format_err(path, 3, format!("pain_score `{score_text}` is not an integer")))?;
    if !(0..=MAX_PAIN_SCORE as i64).contains(&score) {
        return Err(Error::Manifest(format!(
            "{}: pain_score {score} outside 0..={MAX_PAIN_SCORE}",
            path.display()
        )));
    }
    let period_text = meta_value(path, 4, lines.next(), "sample_period_ms")?;
    let period: f64 = period_text
        .parse()
        .map_err(|_| format_err(path, 4, format!("sample_period_ms `{period_text}` is not a number")))?;

    let spec_line = lines
        .next()
        .ok_or_else(|| Error::Manifest(format!("{}: missing channel list", path.display())))?;
    let mut channels = Vec::new();
    for (i, triplet) in spec_line.split(',').enumerate() {
        let parts: Vec<&str> = triplet.split(':').collect();
        if parts.len() != 3 {
            return Err(format_err(
                path,
                5,
                format!("channel spec {i} `{triplet}` is not kind:placement:name"),
            ));
        }
        let kind = parts[0]
            .trim()
            .parse::<ChannelKind>()
            .map_err(|e| format_err(path, 5, e))?;
        channels.push(ChannelSpec::new(kind, parts[1].trim(), parts[2].trim()));
    }
    let n = channels.len();

    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); n];
    for (t, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut count = 0;
        for (c, field) in line.split(',').enumerate() {
            if c >= n {
                return Err(Error::Data {
                    row: c,
                    col: t,
                    msg: format!("line {} has more than {n} values", t + 6),
                });
            }
            let v: f64 = field.trim().parse().map_err(|_| Error::Data {
                row: c,
                col: t,
                msg: format!("`{}` is not a number (line {})", field.trim(), t + 6),
            })?;
            if !v.is_finite() {
                return Err(Error::Data {
                    row: c,
                    col: t,
                    msg: format!("non-finite value (line {})", t + 6),
                });
            }
            cols[c].push(v);
            count += 1;
        }
        if count != n {
            return Err(Error::Data {
                row: count,
                col: t,
                msg: format!("line {} has {count} values, expected {n}", t + 6),
            });
        }
    }
    let t_len = cols.first().map_or(0, Vec::len);
    let mut data = Vec::with_capacity(n * t_len);
    for c in cols {
        data.extend(c);
    }
    let values = Grid2D::from_vec(n, t_len, data)?;
    Recording::new(&id, &subject, score as u8, period, channels, values)
}

pub fn format_recording(rec: &Recording) -> Result<String> {
    rec.validate()?;
    let (n, t) = rec.values.shape();
    let mut s = String::with_capacity(64 + n * t * 20);
    writeln!(s, "id={}", rec.id).expect("string write");
    writeln!(s, "subject={}", rec.subject_id).expect("string write");
    writeln!(s, "pain_score={}", rec.pain_score).expect("string write");
    writeln!(s, "sample_period_ms={}", rec.sample_period_ms).expect("string write");
    let specs: Vec<String> = rec
        .channels
        .iter()
        .map(|c| format!("{}:{}:{}", c.kind, c.placement, c.name))
        .collect();
    s.push_str(&specs.join(","));
    s.push('\n');
    for j in 0..t {
        for i in 0..n {
            if i > 0 {
                s.push(',');
            }
            // `Display` for f64 prints the shortest string that parses back
            // to the same value.
            write!(s, "{}", rec.values.get(i, j)).expect("string write");
        }
        s.push('\n');
    }
    Ok(s)
}

/// Writes a recording; reloading it reproduces every value bit-exactly.
pub fn save_recording(rec: &Recording, path: &Path) -> Result<()> {
    let text = format_recording(rec)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    /// Path as written in the manifest (relative to `base_dir` unless absolute).
    pub path: PathBuf,
    /// Id from the recording header, when the file was readable.
    pub recording_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetManifest {
    pub dataset_name: String,
    pub category_values: Vec<u8>,
    pub recording_entries: Vec<ManifestEntry>,
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn num_categories(&self) -> usize {
        self.category_values.len()
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    /// Position of `score` within `category_values`.
    pub fn category_index(&self, score: u8) -> Option<usize> {
        self.category_values.iter().position(|&c| c == score)
    }

    /// Loads every listed recording in manifest order.
    pub fn load_recordings(&self) -> Result<Vec<Recording>> {
        self.recording_entries
            .iter()
            .map(|e| load_recording(&self.resolve(e)))
            .collect()
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("dataset={}\ncategories=", self.dataset_name);
        let cats: Vec<String> = self.category_values.iter().map(u8::to_string).collect();
        s.push_str(&cats.join(","));
        s.push('\n');
        for e in &self.recording_entries {
            s.push_str(&e.path.to_string_lossy());
            s.push('\n');
        }
        s
    }
}

fn read_first_line(path: &Path) -> Option<String> {
    let f = fs::File::open(path).ok()?;
    let mut line = String::new();
    BufReader::new(f).read_line(&mut line).ok()?;
    line.trim_end().strip_prefix("id=").map(str::to_string)
}

pub fn load_manifest(path: &Path) -> Result<DatasetManifest> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut lines = text.lines();
    let name = meta_value(path, 1, lines.next(), "dataset")?.to_string();
    let cats_text = meta_value(path, 2, lines.next(), "categories")?;
    let category_values = cats_text
        .split(',')
        .map(|c| {
            c.trim()
                .parse::<u8>()
                .map_err(|_| format_err(path, 2, format!("category `{}` is not an integer", c.trim())))
        })
        .collect::<Result<Vec<u8>>>()?;
    let mut manifest = DatasetManifest {
        dataset_name: name,
        category_values,
        recording_entries: Vec::new(),
        base_dir,
    };
    for line in lines {
        let p = line.trim();
        if p.is_empty() {
            continue;
        }
        let mut entry = ManifestEntry {
            path: PathBuf::from(p),
            recording_id: None,
        };
        entry.recording_id = read_first_line(&manifest.resolve(&entry));
        manifest.recording_entries.push(entry);
    }
    Ok(manifest)
}

pub fn save_manifest(m: &DatasetManifest, path: &Path) -> Result<()> {
    fs::write(path, m.to_text()).map_err(|e| Error::io(path, e))
}

/// One problem found by [`validate_manifest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestIssue {
    pub path: Option<PathBuf>,
    pub message: String,
}

impl fmt::Display for ManifestIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.path {
            Some(p) => write!(f, "{}: {}", p.display(), self.message),
            None => f.write_str(&self.message),
        }
    }
}

/// Checks that every entry loads and carries a listed category. Problems are
/// returned, never raised.
pub fn validate_manifest(m: &DatasetManifest) -> Vec<ManifestIssue> {
    validate_with(m, load_recording)
}

pub(crate) fn validate_with(
    m: &DatasetManifest,
    mut load: impl FnMut(&Path) -> Result<Recording>,
) -> Vec<ManifestIssue> {
    let mut issues = Vec::new();
    if m.category_values.is_empty() {
        issues.push(ManifestIssue {
            path: None,
            message: "no categories listed".into(),
        });
    }
    if m.category_values.windows(2).any(|w| w[0] >= w[1]) {
        issues.push(ManifestIssue {
            path: None,
            message: "categories must be strictly ascending".into(),
        });
    }
    if let Some(&c) = m.category_values.iter().find(|&&c| c > MAX_PAIN_SCORE) {
        issues.push(ManifestIssue {
            path: None,
            message: format!("category {c} outside 0..={MAX_PAIN_SCORE}"),
        });
    }
    let mut ids = HashSet::new();
    for e in &m.recording_entries {
        let full = m.resolve(e);
        if !full.exists() {
            issues.push(ManifestIssue {
                path: Some(full),
                message: "file does not exist".into(),
            });
            continue;
        }
        match load(&full) {
            Ok(rec) => {
                if !m.category_values.contains(&rec.pain_score) {
                    issues.push(ManifestIssue {
                        path: Some(full.clone()),
                        message: format!(
                            "pain score {} not among categories {:?}",
                            rec.pain_score, m.category_values
                        ),
                    });
                }
                if !ids.insert(rec.id.clone()) {
                    issues.push(ManifestIssue {
                        path: Some(full),
                        message: format!("duplicate recording id `{}`", rec.id),
                    });
                }
            }
            Err(err) => issues.push(ManifestIssue {
                path: Some(full),
                message: err.to_string(),
            }),
        }
    }
    issues
}
