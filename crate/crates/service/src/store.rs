//! On-disk trial logs.
//!
//! Each trial lives in `<data_dir>/trials/<id>.jsonl`: a [`TrialHeader`] line
//! followed by one [`EnrollmentEvent`] line per enrollment. An event is
//! written and `fsync`ed before the enrollment is acknowledged. A crash in the
//! middle of a write leaves at most one unterminated trailing line, which was
//! never acknowledged and is cut off when the log is reopened.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use covbal_api::{CreateTrialRequest, EnrollRequest, EnrollmentEvent, TrialHeader, TrialSummary, TrialView};

use crate::error::{Result, ServiceError};
use crate::live::LiveTrial;

const LOG_EXT: &str = "jsonl";

struct OpenTrial {
    trial: LiveTrial,
    file: File,
    len: u64,
}

type Slot = Arc<Mutex<OpenTrial>>;

/// All trials under one data directory. Writes to a trial are serialized by
/// its own lock; different trials proceed independently.
pub struct Store {
    dir: PathBuf,
    trials: RwLock<HashMap<String, Slot>>,
    broken: RwLock<HashMap<String, ServiceError>>,
}

/// Parsed contents of a log file.
pub struct LogContents {
    pub header: TrialHeader,
    pub events: Vec<EnrollmentEvent>,
    /// Length of the intact prefix in bytes.
    pub valid_len: u64,
    /// Whether an unterminated trailing line was found.
    pub torn: bool,
}

fn corrupt(id: &str, seq: usize, reason: impl Into<String>) -> ServiceError {
    ServiceError::CorruptLog {
        id: id.to_string(),
        seq,
        reason: reason.into(),
    }
}

/// Parse a log without modifying it.
pub fn read_log(path: &Path) -> Result<LogContents> {
    let id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or_default()
        .to_string();
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let complete = bytes.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    let torn = complete < bytes.len();
    let text = std::str::from_utf8(&bytes[..complete]).map_err(|e| corrupt(&id, 0, e.to_string()))?;

    let mut lines = text.lines();
    let header_line = lines.next().ok_or_else(|| corrupt(&id, 0, "missing header"))?;
    let header: TrialHeader = serde_json::from_str(header_line).map_err(|e| corrupt(&id, 0, format!("header: {e}")))?;
    let events = lines
        .enumerate()
        .map(|(i, line)| serde_json::from_str(line).map_err(|e| corrupt(&id, i + 1, e.to_string())))
        .collect::<Result<Vec<EnrollmentEvent>>>()?;
    Ok(LogContents {
        header,
        events,
        valid_len: complete as u64,
        torn,
    })
}

fn json_line<T: serde::Serialize>(value: &T) -> Vec<u8> {
    let mut line = serde_json::to_vec(value).expect("wire types serialize");
    line.push(b'\n');
    line
}

fn sync_dir(dir: &Path) -> std::io::Result<()> {
    File::open(dir)?.sync_all()
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Micros, true)
}

impl Store {
    /// Open (creating if needed) the store under `data_dir` and replay every
    /// log. Trials whose logs fail to replay stay listed as broken and answer
    /// requests with a `corrupt_log` error.
    pub fn open(data_dir: impl AsRef<Path>) -> Result<Self> {
        let dir = data_dir.as_ref().join("trials");
        fs::create_dir_all(&dir)?;
        let store = Store {
            dir,
            trials: RwLock::new(HashMap::new()),
            broken: RwLock::new(HashMap::new()),
        };
        for entry in fs::read_dir(&store.dir)? {
            let path = entry?.path();
            let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
            if name.starts_with('.') && name.ends_with(".tmp") {
                // Creation never reached the rename, so the trial was never acknowledged.
                let _ = fs::remove_file(&path);
                continue;
            }
            if path.extension().and_then(|e| e.to_str()) != Some(LOG_EXT) {
                continue;
            }
            let id = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            match store.load(&path) {
                Ok(open) => {
                    store.trials.write().unwrap().insert(id, Arc::new(Mutex::new(open)));
                }
                Err(e) => {
                    tracing::error!(trial = %id, error = %e, "trial log failed to replay");
                    store.broken.write().unwrap().insert(id, e);
                }
            }
        }
        Ok(store)
    }

    fn load(&self, path: &Path) -> Result<OpenTrial> {
        let contents = read_log(path)?;
        let file = OpenOptions::new().read(true).append(true).open(path)?;
        if contents.torn {
            tracing::warn!(path = %path.display(), "dropping unterminated trailing line");
            file.set_len(contents.valid_len)?;
            file.sync_all()?;
        }
        let trial = LiveTrial::replay(contents.header, contents.events)?;
        Ok(OpenTrial {
            trial,
            file,
            len: contents.valid_len,
        })
    }

    pub fn data_dir(&self) -> &Path {
        self.dir.parent().unwrap_or(&self.dir)
    }

    pub fn log_path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.{LOG_EXT}"))
    }

    fn slot(&self, id: &str) -> Result<Slot> {
        if let Some(slot) = self.trials.read().unwrap().get(id) {
            return Ok(slot.clone());
        }
        match self.broken.read().unwrap().get(id) {
            Some(e) => Err(e.clone()),
            None => Err(ServiceError::NotFound(id.to_string())),
        }
    }

    /// Create a trial and persist its header.
    pub fn create(&self, req: CreateTrialRequest, seed: u64) -> Result<TrialHeader> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let trial = LiveTrial::create(id.clone(), req, seed, now())?;
        let path = self.log_path(&id);
        let tmp = self.dir.join(format!(".{id}.tmp"));
        {
            let mut f = File::create(&tmp)?;
            f.write_all(&json_line(trial.header()))?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        sync_dir(&self.dir)?;
        let file = OpenOptions::new().read(true).append(true).open(&path)?;
        let len = file.metadata()?.len();
        let header = trial.header().clone();
        self.trials
            .write()
            .unwrap()
            .insert(id, Arc::new(Mutex::new(OpenTrial { trial, file, len })));
        Ok(header)
    }

    /// Allocate the next subject. Returns only after the event is on disk.
    pub fn enroll(&self, id: &str, req: EnrollRequest) -> Result<EnrollmentEvent> {
        let slot = self.slot(id)?;
        let mut open = slot.lock().unwrap();
        let event = open.trial.propose(req, now())?;
        let line = json_line(&event);
        let written = open.file.write_all(&line).and_then(|_| open.file.sync_data());
        if let Err(e) = written {
            // Put the file back to the last acknowledged event.
            let len = open.len;
            let _ = open.file.set_len(len).and_then(|_| open.file.sync_all());
            return Err(e.into());
        }
        open.len += line.len() as u64;
        open.trial.commit(event.clone());
        Ok(event)
    }

    pub fn view(&self, id: &str) -> Result<TrialView> {
        let slot = self.slot(id)?;
        let trial = slot.lock().unwrap().trial.clone();
        trial.view()
    }

    pub fn events(&self, id: &str) -> Result<Vec<EnrollmentEvent>> {
        let slot = self.slot(id)?;
        let events = slot.lock().unwrap().trial.events().to_vec();
        Ok(events)
    }

    pub fn header(&self, id: &str) -> Result<TrialHeader> {
        let slot = self.slot(id)?;
        let header = slot.lock().unwrap().trial.header().clone();
        Ok(header)
    }

    /// Trials in id order.
    pub fn list(&self) -> Vec<TrialSummary> {
        let slots: Vec<Slot> = self.trials.read().unwrap().values().cloned().collect();
        let mut out: Vec<TrialSummary> = slots.iter().map(|s| s.lock().unwrap().trial.summary()).collect();
        out.sort_by(|a, b| a.id.cmp(&b.id));
        out
    }
}
