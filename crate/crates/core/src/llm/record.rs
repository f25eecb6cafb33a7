use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{Completion, CompletionRequest, GuidanceBackend, LlmError, StopReason};

pub const RECORDING_SCHEMA: &str = "tacsearch.recording/1";

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    schema: String,
}

/// One delivered completion, one JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordEntry {
    pub seq: usize,
    pub prompt_sha256: String,
    pub text: String,
    pub stop_reason: StopReason,
    pub latency_s: f64,
}

/// Forwards to an inner backend and appends every delivered completion to
/// a JSON-lines log.
pub struct RecordingBackend<B> {
    inner: B,
    out: Box<dyn Write + Send>,
    entries: Vec<RecordEntry>,
}

impl<B: GuidanceBackend> RecordingBackend<B> {
    pub fn new(inner: B, mut out: Box<dyn Write + Send>) -> Result<Self, LlmError> {
        let header = Header {
            schema: RECORDING_SCHEMA.into(),
        };
        writeln!(
            out,
            "{}",
            serde_json::to_string(&header).expect("header serializes")
        )?;
        out.flush()?;
        Ok(Self {
            inner,
            out,
            entries: Vec::new(),
        })
    }

    pub fn to_file(inner: B, path: &Path) -> Result<Self, LlmError> {
        let f = OpenOptions::new().create(true).append(true).open(path)?;
        Self::new(inner, Box::new(BufWriter::new(f)))
    }

    pub fn entries(&self) -> &[RecordEntry] {
        &self.entries
    }

    pub fn into_inner(self) -> B {
        self.inner
    }
}

impl<B: GuidanceBackend> GuidanceBackend for RecordingBackend<B> {
    fn complete(&mut self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let c = self.inner.complete(request)?;
        let entry = RecordEntry {
            seq: self.entries.len() + 1,
            prompt_sha256: request.fingerprint(),
            text: c.text.clone(),
            stop_reason: c.stop_reason,
            latency_s: c.latency.as_secs_f64(),
        };
        writeln!(
            self.out,
            "{}",
            serde_json::to_string(&entry).expect("entry serializes")
        )?;
        self.out.flush()?;
        self.entries.push(entry);
        Ok(c)
    }
}

/// Serves recorded completions in order, refusing requests whose content
/// differs from what was recorded.
#[derive(Debug, Clone)]
pub struct ReplayBackend {
    entries: Vec<RecordEntry>,
    next: usize,
}

impl ReplayBackend {
    pub fn from_entries(entries: Vec<RecordEntry>) -> Self {
        Self { entries, next: 0 }
    }

    pub fn parse(text: &str) -> Result<Self, LlmError> {
        Self::read(text.as_bytes())
    }

    pub fn from_file(path: &Path) -> Result<Self, LlmError> {
        Self::read(BufReader::new(File::open(path)?))
    }

    fn read(reader: impl BufRead) -> Result<Self, LlmError> {
        let mut entries = Vec::new();
        let mut header_seen = false;
        for (n, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            if let Ok(h) = serde_json::from_str::<Header>(&line) {
                if h.schema != RECORDING_SCHEMA {
                    return Err(LlmError::Config(format!(
                        "line {}: unsupported recording schema '{}'",
                        n + 1,
                        h.schema
                    )));
                }
                header_seen = true;
                continue;
            }
            let e: RecordEntry = serde_json::from_str(&line)
                .map_err(|err| LlmError::Config(format!("line {}: {err}", n + 1)))?;
            entries.push(e);
        }
        if !header_seen {
            return Err(LlmError::Config("recording has no schema header".into()));
        }
        Ok(Self::from_entries(entries))
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - self.next
    }
}

impl GuidanceBackend for ReplayBackend {
    fn complete(&mut self, request: &CompletionRequest) -> Result<Completion, LlmError> {
        let Some(e) = self.entries.get(self.next) else {
            return Err(LlmError::ReplayExhausted(self.next));
        };
        let seq = self.next + 1;
        let fp = request.fingerprint();
        if fp != e.prompt_sha256 {
            return Err(LlmError::ReplayDivergence {
                seq,
                message: format!("prompt hash {fp} differs from recorded {}", e.prompt_sha256),
            });
        }
        self.next += 1;
        Ok(Completion {
            text: e.text.clone(),
            stop_reason: e.stop_reason,
            latency: Duration::from_secs_f64(e.latency_s.max(0.0)),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::llm::ScriptedBackend;
    use std::sync::{Arc, Mutex};

    #[derive(Clone, Default)]
    struct Shared(Arc<Mutex<Vec<u8>>>);

    impl Write for Shared {
        fn write(&mut self, buf: &[u8]) -> std::io::Result<usize> {
            self.0.lock().unwrap().extend_from_slice(buf);
            Ok(buf.len())
        }
        fn flush(&mut self) -> std::io::Result<()> {
            Ok(())
        }
    }

    #[test]
    fn record_then_replay_is_byte_identical() {
        let sink = Shared::default();
        let inner = ScriptedBackend::sequence(["one", "two\nlines", "[RUN TACTIC] x [END]"]);
        let mut rec = RecordingBackend::new(inner, Box::new(sink.clone())).unwrap();
        let reqs: Vec<_> = (0..3)
            .map(|i| CompletionRequest::new("sys", format!("prompt {i}")))
            .collect();
        let live: Vec<_> = reqs.iter().map(|r| rec.complete(r).unwrap().text).collect();
        let log = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        let mut rep = ReplayBackend::parse(&log).unwrap();
        assert_eq!(rep.remaining(), 3);
        for (r, want) in reqs.iter().zip(&live) {
            assert_eq!(&rep.complete(r).unwrap().text, want);
        }
        assert!(matches!(
            rep.complete(&reqs[0]),
            Err(LlmError::ReplayExhausted(3))
        ));
    }

    #[test]
    fn replay_rejects_changed_prompt() {
        let sink = Shared::default();
        let mut rec =
            RecordingBackend::new(ScriptedBackend::sequence(["a"]), Box::new(sink.clone()))
                .unwrap();
        rec.complete(&CompletionRequest::new("s", "p")).unwrap();
        let log = String::from_utf8(sink.0.lock().unwrap().clone()).unwrap();
        let mut rep = ReplayBackend::parse(&log).unwrap();
        assert!(matches!(
            rep.complete(&CompletionRequest::new("s", "q")),
            Err(LlmError::ReplayDivergence { seq: 1, .. })
        ));
    }

    #[test]
    fn missing_header_is_rejected() {
        assert!(ReplayBackend::parse("").is_err());
    }
}
