//! Resumable per-stage checkpoints.
//!
//! One JSONL file per (stage, field, scope): a header line identifying the
//! run, one block line per completed unit of work (a b value, an orbit
//! representative), and a final `done` line holding the finished envelope.
//! A rerun with the same configuration replays the blocks instead of
//! recomputing them; a completed file short-circuits to the stored envelope,
//! which keeps warm reruns byte-identical.  A torn tail line (the process
//! was killed mid-write) is truncated on open; a header that fails its own
//! hash or does not match the requested run is an error, not a silent
//! rebuild.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Seek, SeekFrom, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::report::{Envelope, FieldDesc};
use r2cs_core::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Header {
    pub version: String,
    pub stage: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub field: Option<FieldDesc>,
    pub scope: String,
}

impl Header {
    fn check(&self) -> String {
        let id = format!(
            "{}|{}|{}|{}",
            self.version,
            self.stage,
            self.scope,
            serde_json::to_string(&self.field).unwrap_or_default()
        );
        format!("{:016x}", fnv64(id.as_bytes()))
    }

    /// Stable file name for this run's checkpoints.
    pub fn file_name(&self) -> String {
        let field = match &self.field {
            Some(f) => format!(
                "p{}e{}n{}-{:08x}",
                f.p,
                f.e,
                f.n,
                fnv64(format!("{:?}|{}", f.modulus, f.eta).as_bytes()) as u32
            ),
            None => "nofield".into(),
        };
        format!("{}-{}-{}.jsonl", self.stage, field, self.scope)
    }
}

fn fnv64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Line {
    Header {
        #[serde(flatten)]
        header: Header,
        check: String,
    },
    Block {
        id: String,
        data: Value,
    },
    Done {
        envelope: Envelope,
    },
}

pub struct CacheFile {
    /// None for cache-less runs: blocks live only in memory.
    file: Option<File>,
    pub blocks: BTreeMap<String, Value>,
    pub done: Option<Envelope>,
}

impl CacheFile {
    /// Open or create the checkpoint file for `header` under `dir`.
    pub fn open(dir: &Path, header: &Header) -> Result<CacheFile> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(header.file_name());
        let mut blocks = BTreeMap::new();
        let mut done = None;
        let mut keep: u64 = 0;

        if path.exists() {
            let mut reader = BufReader::new(File::open(&path)?);
            let mut first = String::new();
            reader.read_line(&mut first)?;
            let parsed: Line = serde_json::from_str(first.trim_end()).map_err(|_| {
                Error::BadCache(format!("{}: unreadable header line", path.display()))
            })?;
            match parsed {
                Line::Header { header: h, check } => {
                    if check != h.check() {
                        return Err(Error::BadCache(format!(
                            "{}: header hash mismatch",
                            path.display()
                        )));
                    }
                    if &h != header {
                        return Err(Error::BadCache(format!(
                            "{}: header does not match this run (cached {} {})",
                            path.display(),
                            h.stage,
                            h.scope
                        )));
                    }
                }
                _ => {
                    return Err(Error::BadCache(format!(
                        "{}: first line is not a header",
                        path.display()
                    )))
                }
            }
            keep = first.len() as u64;
            // Blocks until the first torn or foreign line; the tail is
            // dropped so a killed run resumes cleanly.
            let mut line = String::new();
            loop {
                line.clear();
                let got = reader.read_line(&mut line)?;
                if got == 0 {
                    break;
                }
                if !line.ends_with('\n') {
                    break;
                }
                match serde_json::from_str(line.trim_end()) {
                    Ok(Line::Block { id, data }) => {
                        blocks.insert(id, data);
                    }
                    Ok(Line::Done { envelope }) => {
                        done = Some(envelope);
                    }
                    _ => break,
                }
                keep += got as u64;
            }
        }

        let mut file = OpenOptions::new().create(true).write(true).open(&path)?;
        file.set_len(keep)?;
        file.seek(SeekFrom::End(0))?;
        if keep == 0 {
            let line = Line::Header {
                header: header.clone(),
                check: header.check(),
            };
            let mut s = serde_json::to_string(&line)?;
            s.push('\n');
            file.write_all(s.as_bytes())?;
            file.flush()?;
        }
        Ok(CacheFile {
            file: Some(file),
            blocks,
            done,
        })
    }

    /// In-memory stand-in for runs without a cache directory.
    pub fn ephemeral() -> CacheFile {
        CacheFile {
            file: None,
            blocks: BTreeMap::new(),
            done: None,
        }
    }

    pub fn push_block(&mut self, id: &str, data: Value) -> Result<()> {
        if let Some(f) = &mut self.file {
            let line = Line::Block {
                id: id.to_string(),
                data: data.clone(),
            };
            let mut s = serde_json::to_string(&line)?;
            s.push('\n');
            f.write_all(s.as_bytes())?;
            f.flush()?;
        }
        self.blocks.insert(id.to_string(), data);
        Ok(())
    }

    pub fn finish(&mut self, envelope: &Envelope) -> Result<()> {
        if let Some(f) = &mut self.file {
            let line = Line::Done {
                envelope: envelope.clone(),
            };
            let mut s = serde_json::to_string(&line)?;
            s.push('\n');
            f.write_all(s.as_bytes())?;
            f.flush()?;
        }
        self.done = Some(envelope.clone());
        Ok(())
    }
}
