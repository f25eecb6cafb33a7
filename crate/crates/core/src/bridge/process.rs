use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, Command, ExitStatus, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use super::BridgeError;

/// A running adapter: line writes to stdin, line reads from stdout with a
/// timeout.
pub struct AdapterProcess {
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
}

impl AdapterProcess {
    pub fn spawn(command: &[String]) -> Result<Self, BridgeError> {
        let (program, args) = command
            .split_first()
            .ok_or_else(|| BridgeError::Spawn("empty adapter command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| BridgeError::Spawn(format!("{program}: {e}")))?;
        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout is piped");
        let (tx, lines) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                let stop = line.is_err();
                if tx.send(line).is_err() || stop {
                    break;
                }
            }
        });
        Ok(Self {
            child,
            stdin,
            lines,
        })
    }

    pub fn send_line(&mut self, line: &str) -> Result<(), BridgeError> {
        let stdin = self.stdin.as_mut().ok_or(BridgeError::Closed)?;
        writeln!(stdin, "{line}")
            .and_then(|_| stdin.flush())
            .map_err(|e| BridgeError::Crashed(format!("write failed: {e}")))
    }

    pub fn recv_line(&mut self, timeout: Duration) -> Result<String, BridgeError> {
        match self.lines.recv_timeout(timeout) {
            Ok(Ok(line)) => Ok(line),
            Ok(Err(e)) => Err(BridgeError::Crashed(format!("read failed: {e}"))),
            Err(RecvTimeoutError::Timeout) => Err(BridgeError::Timeout(timeout)),
            Err(RecvTimeoutError::Disconnected) => {
                Err(BridgeError::Crashed("adapter closed its output".into()))
            }
        }
    }

    /// Closes stdin and waits up to `timeout` for the adapter to exit.
    pub fn wait(&mut self, timeout: Duration) -> Result<ExitStatus, BridgeError> {
        self.stdin.take();
        let deadline = Instant::now() + timeout;
        loop {
            if let Some(status) = self
                .child
                .try_wait()
                .map_err(|e| BridgeError::Crashed(e.to_string()))?
            {
                return Ok(status);
            }
            if Instant::now() >= deadline {
                self.kill();
                return Err(BridgeError::Timeout(timeout));
            }
            thread::sleep(Duration::from_millis(5));
        }
    }

    pub fn kill(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

impl Drop for AdapterProcess {
    fn drop(&mut self) {
        if matches!(self.child.try_wait(), Ok(None)) {
            self.kill();
        }
    }
}
