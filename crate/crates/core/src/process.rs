//! Subprocess execution with a wall-clock timeout and a concurrency cap.

use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use crate::error::{Error, Result};

/// Counting semaphore bounding concurrent subprocesses.
#[derive(Clone, Debug)]
pub struct Limiter {
    inner: Arc<(Mutex<usize>, Condvar)>,
}

pub struct Permit {
    inner: Arc<(Mutex<usize>, Condvar)>,
}

impl Limiter {
    pub fn new(slots: usize) -> Self {
        Self {
            inner: Arc::new((Mutex::new(slots.max(1)), Condvar::new())),
        }
    }

    pub fn acquire(&self) -> Permit {
        let (lock, cv) = &*self.inner;
        let mut free = lock.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        Permit {
            inner: Arc::clone(&self.inner),
        }
    }
}

impl Drop for Permit {
    fn drop(&mut self) {
        let (lock, cv) = &*self.inner;
        *lock.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        cv.notify_one();
    }
}

/// Runs `argv` (program first) and returns its standard output.
/// Non-zero exit, failure to start and timeout are distinct errors.
pub fn run_captured(argv: &[String], timeout: Duration) -> Result<String> {
    let display = argv.join(" ");
    let (program, args) = argv.split_first().ok_or_else(|| Error::ScorerSpawn {
        command: display.clone(),
        cause: "empty command".into(),
    })?;
    let mut child = Command::new(program)
        .args(args)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .map_err(|e| Error::ScorerSpawn {
            command: display.clone(),
            cause: e.to_string(),
        })?;

    // drain stdout on a thread so a chatty child cannot block on a full pipe
    let mut stdout = child.stdout.take().expect("piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = stdout.read_to_end(&mut buf);
        buf
    });

    let start = Instant::now();
    let status = loop {
        match child.try_wait() {
            Ok(Some(status)) => break status,
            Ok(None) if start.elapsed() >= timeout => {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::ScorerTimeout(timeout));
            }
            Ok(None) => std::thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                return Err(Error::ScorerSpawn {
                    command: display,
                    cause: e.to_string(),
                })
            }
        }
    };
    let out = reader.join().unwrap_or_default();
    if !status.success() {
        return Err(Error::ScorerExit {
            command: display,
            status: status.to_string(),
        });
    }
    Ok(String::from_utf8_lossy(&out).into_owned())
}

/// Splits a command line on whitespace. No quoting support.
pub fn split_command(cmd: &str) -> Vec<String> {
    cmd.split_whitespace().map(str::to_owned).collect()
}
