//! JSON-Lines study files: one header record, then one record per trial.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::study::{Study, StudyHeader, Trial};
use super::AutotuneError;

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(Box<StudyHeader>),
    Trial(Box<Trial>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedStudy {
    pub study: Study,
    /// Set when an incomplete final line was dropped.
    pub truncated_tail: bool,
}

/// Parses a study file. A final line that does not parse (an interrupted
/// append) is dropped with a warning; any other bad line is an error
/// naming its 1-based line number.
pub fn parse_study(text: &str) -> Result<LoadedStudy, AutotuneError> {
    let lines: Vec<&str> = text.split('\n').collect();
    let last_nonempty = lines.iter().rposition(|l| !l.trim().is_empty());
    let mut header = None;
    let mut trials = Vec::new();
    let mut truncated_tail = false;
    for (i, line) in lines.iter().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = i + 1;
        let record: Record = match serde_json::from_str(line) {
            Ok(r) => r,
            Err(e) => {
                if Some(i) == last_nonempty && header.is_some() {
                    log::warn!("ignoring truncated final line {lineno} of study file: {e}");
                    truncated_tail = true;
                    break;
                }
                return Err(AutotuneError::BadLine {
                    line: lineno,
                    message: e.to_string(),
                });
            }
        };
        match record {
            Record::Header(h) if header.is_none() && trials.is_empty() => header = Some(*h),
            Record::Header(_) => {
                return Err(AutotuneError::BadLine {
                    line: lineno,
                    message: "unexpected second header".into(),
                })
            }
            Record::Trial(t) => {
                if header.is_none() {
                    return Err(AutotuneError::BadLine {
                        line: lineno,
                        message: "trial before header".into(),
                    });
                }
                if t.index != trials.len() {
                    return Err(AutotuneError::BadLine {
                        line: lineno,
                        message: format!("expected trial {}, found {}", trials.len(), t.index),
                    });
                }
                trials.push(*t);
            }
        }
    }
    let header = header.ok_or(AutotuneError::BadLine {
        line: 1,
        message: "missing header record".into(),
    })?;
    Ok(LoadedStudy {
        study: Study { header, trials },
        truncated_tail,
    })
}

pub fn load_study(path: &Path) -> Result<LoadedStudy, AutotuneError> {
    let text = std::fs::read_to_string(path).map_err(|e| AutotuneError::Io(format!("{}: {e}", path.display())))?;
    parse_study(&text)
}

fn to_line<T: Serialize>(value: &T) -> Result<String, AutotuneError> {
    let mut s = serde_json::to_string(value).map_err(|e| AutotuneError::Io(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Append-only writer. Each record is written with a single `write_all`
/// and synced, so a crash leaves at most one partial final line.
pub struct StudyWriter {
    file: File,
    path: PathBuf,
}

impl StudyWriter {
    /// Creates (or truncates) `path` and writes the header and any trials
    /// already in `study`.
    pub fn create(path: &Path, study: &Study) -> Result<Self, AutotuneError> {
        let io = |e: std::io::Error| AutotuneError::Io(format!("{}: {e}", path.display()));
        let mut out = BufWriter::new(File::create(path).map_err(io)?);
        out.write_all(to_line(&Record::Header(Box::new(study.header.clone())))?.as_bytes())
            .map_err(io)?;
        for t in &study.trials {
            out.write_all(to_line(&Record::Trial(Box::new(t.clone())))?.as_bytes())
                .map_err(io)?;
        }
        let file = out.into_inner().map_err(|e| io(e.into_error()))?;
        file.sync_data().map_err(io)?;
        Ok(Self {
            file,
            path: path.to_path_buf(),
        })
    }

    /// Opens an existing study for appending. A truncated tail is cut off
    /// first so new records start on a fresh line.
    pub fn resume(path: &Path) -> Result<(Self, LoadedStudy), AutotuneError> {
        let loaded = load_study(path)?;
        if loaded.truncated_tail {
            Self::create(path, &loaded.study)?;
        }
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| AutotuneError::Io(format!("{}: {e}", path.display())))?;
        Ok((
            Self {
                file,
                path: path.to_path_buf(),
            },
            loaded,
        ))
    }

    pub fn append(&mut self, trial: &Trial) -> Result<(), AutotuneError> {
        let io = |e: std::io::Error| AutotuneError::Io(format!("{}: {e}", self.path.display()));
        let line = to_line(&Record::Trial(Box::new(trial.clone())))?;
        self.file.write_all(line.as_bytes()).map_err(io)?;
        self.file.sync_data().map_err(io)
    }
}

pub fn save_study(path: &Path, study: &Study) -> Result<(), AutotuneError> {
    StudyWriter::create(path, study).map(|_| ())
}
