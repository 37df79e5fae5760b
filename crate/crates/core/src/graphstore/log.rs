//! Append-only commit log: one JSON record per line.

use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::graph::{Graph, Op};
use super::StoreError;

pub(crate) const LOG_FILE: &str = "graph.log";

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
pub(crate) enum Record {
    Commit { seq: u64, ops: Vec<Op> },
    /// Ids below `next_id` were issued, possibly by a rolled-back transaction.
    HighWater { next_id: u64 },
}

pub(crate) struct CommitLog {
    path: PathBuf,
    file: File,
    sync: bool,
}

pub(crate) struct Recovered {
    pub graph: Graph,
    pub seq: u64,
    pub next_id: u64,
}

impl CommitLog {
    /// Opens (or creates) the log under `dir` and replays it. A torn final
    /// record is truncated; damage anywhere else is reported.
    pub fn open(dir: &Path, sync: bool) -> Result<(Self, Recovered), StoreError> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(LOG_FILE);
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(&path)?;

        let mut recovered = Recovered {
            graph: Graph::default(),
            seq: 0,
            next_id: 1,
        };
        let mut good_len = 0u64;
        let mut reader = BufReader::new(&file);
        let mut line = String::new();
        let mut line_no = 0usize;
        let mut torn = false;
        loop {
            line.clear();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            let complete = line.ends_with('\n');
            let parsed = serde_json::from_str::<Record>(line.trim_end());
            match (parsed, complete) {
                (Ok(record), true) => {
                    replay(&mut recovered, record);
                    good_len += n as u64;
                }
                (Ok(_), false) | (Err(_), false) => {
                    torn = true;
                    break;
                }
                (Err(e), true) => {
                    // Only the last line may be damaged.
                    let mut rest = String::new();
                    if reader.read_line(&mut rest)? == 0 {
                        torn = true;
                        break;
                    }
                    return Err(StoreError::Corrupt {
                        line: line_no,
                        message: e.to_string(),
                    });
                }
            }
        }
        drop(reader);
        if torn {
            log::warn!("truncating torn record at end of {}", path.display());
            file.set_len(good_len)?;
        }
        file.seek(SeekFrom::End(0))?;
        Ok((Self { path, file, sync }, recovered))
    }

    pub fn append(&mut self, record: &Record) -> Result<(), StoreError> {
        let mut buf = serde_json::to_vec(record).map_err(|e| StoreError::Corrupt {
            line: 0,
            message: e.to_string(),
        })?;
        buf.push(b'\n');
        let before = self.file.metadata()?.len();
        let written = self.file.write_all(&buf).and_then(|()| {
            if self.sync {
                self.file.sync_data()
            } else {
                Ok(())
            }
        });
        if let Err(e) = written {
            // Leave no partial record behind for the next append to follow.
            let _ = self.file.set_len(before);
            return Err(e.into());
        }
        Ok(())
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

fn replay(state: &mut Recovered, record: Record) {
    match record {
        Record::Commit { seq, ops } => {
            for op in ops {
                let id = match &op {
                    Op::CreateNode { id, .. } => id.0,
                    Op::CreateEdge { id, .. } => id.0,
                    _ => 0,
                };
                state.next_id = state.next_id.max(id + 1);
                state.graph.apply(op);
            }
            state.seq = state.seq.max(seq);
        }
        Record::HighWater { next_id } => state.next_id = state.next_id.max(next_id),
    }
}
