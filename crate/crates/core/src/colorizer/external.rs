//! Line-delimited JSON protocol for colorizers running as child processes.
//!
//! ```text
//! engine   -> provider  {"type":"hello","version":1,"workdir":"/abs/dir"}
//! provider -> engine    {"type":"ready","name":"..."}
//! engine   -> provider  {"type":"colorize","frame":t,"luma":"<gray png>","masks":"<16-bit png>"|null,"prompt":"..."}
//! provider -> engine    {"type":"result","frame":t,"ab":"<16-bit png, A stacked above B>"}
//!                     | {"type":"error","frame":t,"message":"..."}
//! engine   -> provider  {"type":"shutdown"}        (provider exits 0)
//! ```
//!
//! Frames travel as files in the shared work directory. Unknown message
//! fields are ignored.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{ColorizeRequest, ColorizeResponse, Colorizer};
use crate::error::{Error, ProviderError, Result};
use crate::frames::{read_ab_png, write_label_png, write_luma_png};

pub const PROTOCOL_VERSION: u32 = 1;
pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(300);

/// How to launch an external provider.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalSpec {
    pub program: PathBuf,
    pub args: Vec<String>,
    /// Per-frame reply deadline; also bounds the handshake.
    pub timeout: Duration,
    /// Directory for exchanged files; a temporary one is created when unset.
    pub workdir: Option<PathBuf>,
}

impl ExternalSpec {
    pub fn new(program: impl Into<PathBuf>) -> Self {
        ExternalSpec {
            program: program.into(),
            args: Vec::new(),
            timeout: DEFAULT_TIMEOUT,
            workdir: None,
        }
    }

    pub fn arg(mut self, arg: impl Into<String>) -> Self {
        self.args.push(arg.into());
        self
    }

    pub fn timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

#[derive(Debug, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Outgoing<'a> {
    Hello {
        version: u32,
        workdir: &'a str,
    },
    Colorize {
        frame: usize,
        luma: &'a str,
        masks: Option<&'a str>,
        prompt: &'a str,
    },
    Shutdown,
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
enum Incoming {
    Ready {
        name: String,
    },
    Result {
        frame: usize,
        ab: PathBuf,
    },
    Error {
        #[serde(default)]
        frame: Option<usize>,
        #[serde(default)]
        message: String,
    },
}

enum Workdir {
    Owned(tempfile::TempDir),
    Given(PathBuf),
}

impl Workdir {
    fn path(&self) -> &Path {
        match self {
            Workdir::Owned(t) => t.path(),
            Workdir::Given(p) => p,
        }
    }
}

pub struct ExternalColorizer {
    name: String,
    child: Child,
    stdin: Option<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    timeout: Duration,
    workdir: Workdir,
    dead: bool,
}

impl std::fmt::Debug for ExternalColorizer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ExternalColorizer")
            .field("name", &self.name)
            .field("pid", &self.child.id())
            .field("workdir", &self.workdir.path())
            .finish()
    }
}

impl ExternalColorizer {
    /// Spawn the provider and complete the hello/ready handshake.
    pub fn launch(spec: &ExternalSpec) -> Result<Self> {
        let launch_err = |m: String| Error::provider(0, ProviderError::Launch(m));
        let workdir = match &spec.workdir {
            Some(dir) => {
                std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
                let abs = dir.canonicalize().map_err(|e| Error::io(dir, e))?;
                Workdir::Given(abs)
            }
            None => Workdir::Owned(
                tempfile::Builder::new()
                    .prefix("vcolor-provider-")
                    .tempdir()
                    .map_err(|e| launch_err(format!("cannot create work directory: {e}")))?,
            ),
        };

        let mut child = Command::new(&spec.program)
            .args(&spec.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| launch_err(format!("{}: {e}", spec.program.display())))?;

        let stdin = child.stdin.take();
        let stdout = child.stdout.take().expect("stdout piped");
        let (tx, rx) = mpsc::channel();
        thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });

        let mut provider = ExternalColorizer {
            name: String::new(),
            child,
            stdin,
            lines: rx,
            timeout: spec.timeout,
            workdir,
            dead: false,
        };
        provider.handshake()?;
        Ok(provider)
    }

    fn handshake(&mut self) -> Result<()> {
        let workdir = self.workdir.path().to_string_lossy().into_owned();
        let hs = |m: String| Error::provider(0, ProviderError::Handshake(m));
        self.send(
            0,
            &Outgoing::Hello {
                version: PROTOCOL_VERSION,
                workdir: &workdir,
            },
        )
        .map_err(|e| hs(e.to_string()))?;
        match self.receive(0) {
            Ok(Incoming::Ready { name }) => {
                self.name = name;
                Ok(())
            }
            Ok(_) => {
                self.kill();
                Err(hs("expected a ready message".into()))
            }
            Err(Error::Provider { kind, .. }) => {
                self.kill();
                Err(hs(kind.to_string()))
            }
            Err(e) => Err(e),
        }
    }

    pub fn workdir(&self) -> &Path {
        self.workdir.path()
    }

    fn kill(&mut self) {
        self.dead = true;
        self.stdin = None;
        let _ = self.child.kill();
        let _ = self.child.wait();
    }

    fn send(&mut self, frame: usize, msg: &Outgoing<'_>) -> Result<()> {
        let mut line = serde_json::to_string(msg).expect("protocol messages serialize");
        line.push('\n');
        let stdin = match self.stdin.as_mut() {
            Some(s) => s,
            None => return Err(Error::provider(frame, ProviderError::Other("provider stdin closed".into()))),
        };
        if let Err(e) = stdin.write_all(line.as_bytes()).and_then(|_| stdin.flush()) {
            let status = self.exit_status();
            self.kill();
            return Err(Error::provider(
                frame,
                status.unwrap_or_else(|| ProviderError::Other(format!("write failed: {e}"))),
            ));
        }
        Ok(())
    }

    fn exit_status(&mut self) -> Option<ProviderError> {
        // Give a crashing child a moment to be reaped.
        for _ in 0..50 {
            if let Ok(Some(status)) = self.child.try_wait() {
                return Some(ProviderError::Exited(status.to_string()));
            }
            thread::sleep(Duration::from_millis(10));
        }
        None
    }

    fn receive(&mut self, frame: usize) -> Result<Incoming> {
        let line = match self.lines.recv_timeout(self.timeout) {
            Ok(Ok(line)) => line,
            Ok(Err(e)) => {
                self.kill();
                return Err(Error::provider(frame, ProviderError::Malformed(format!("unreadable output: {e}"))));
            }
            Err(RecvTimeoutError::Timeout) => {
                self.kill();
                return Err(Error::provider(frame, ProviderError::Timeout(self.timeout)));
            }
            Err(RecvTimeoutError::Disconnected) => {
                let kind = self
                    .exit_status()
                    .unwrap_or_else(|| ProviderError::Exited("closed stdout".into()));
                self.kill();
                return Err(Error::provider(frame, kind));
            }
        };
        serde_json::from_str::<Incoming>(line.trim()).map_err(|e| {
            self.kill();
            Error::provider(frame, ProviderError::Malformed(format!("{e}: {line}")))
        })
    }
}

impl Colorizer for ExternalColorizer {
    fn name(&self) -> &str {
        &self.name
    }

    fn colorize(&mut self, request: &ColorizeRequest) -> Result<ColorizeResponse> {
        let frame = request.frame_index;
        if self.dead {
            return Err(Error::provider(frame, ProviderError::Other("provider is no longer running".into())));
        }
        let luma_path = self.workdir.path().join(format!("luma_{frame:06}.png"));
        write_luma_png(&request.luma, &luma_path)?;
        let masks_path = match &request.masks {
            Some(m) => {
                let p = self.workdir.path().join(format!("masks_{frame:06}.png"));
                write_label_png(m, &p)?;
                Some(p.to_string_lossy().into_owned())
            }
            None => None,
        };
        let luma = luma_path.to_string_lossy().into_owned();
        self.send(
            frame,
            &Outgoing::Colorize {
                frame,
                luma: &luma,
                masks: masks_path.as_deref(),
                prompt: &request.prompt.text,
            },
        )?;

        match self.receive(frame)? {
            Incoming::Result { frame: got, ab } => {
                if got != frame {
                    self.kill();
                    return Err(Error::provider(
                        frame,
                        ProviderError::Malformed(format!("reply for frame {got}")),
                    ));
                }
                let ab = if ab.is_absolute() { ab } else { self.workdir.path().join(ab) };
                let (a, b) = read_ab_png(&ab).map_err(|e| Error::provider(frame, ProviderError::Malformed(e.to_string())))?;
                if a.dims() != request.luma.dims() {
                    return Err(Error::provider(
                        frame,
                        ProviderError::DimensionMismatch {
                            expected_width: request.luma.width(),
                            expected_height: request.luma.height(),
                            actual_width: a.width(),
                            actual_height: a.height(),
                        },
                    ));
                }
                Ok(ColorizeResponse { frame_index: frame, a, b })
            }
            Incoming::Error { frame: Some(got), .. } if got != frame => {
                self.kill();
                Err(Error::provider(frame, ProviderError::Malformed(format!("error for frame {got}"))))
            }
            Incoming::Error { message, .. } => Err(Error::provider(frame, ProviderError::Reported(message))),
            Incoming::Ready { .. } => {
                self.kill();
                Err(Error::provider(frame, ProviderError::Malformed("unexpected ready message".into())))
            }
        }
    }

    fn shutdown(&mut self) -> Result<()> {
        if self.dead {
            return Ok(());
        }
        self.send(0, &Outgoing::Shutdown)?;
        self.stdin = None;
        self.dead = true;
        let deadline = std::time::Instant::now() + self.timeout.min(Duration::from_secs(10));
        loop {
            match self.child.try_wait() {
                Ok(Some(status)) if status.success() => return Ok(()),
                Ok(Some(status)) => {
                    return Err(Error::provider(0, ProviderError::Exited(status.to_string())));
                }
                Ok(None) if std::time::Instant::now() < deadline => thread::sleep(Duration::from_millis(10)),
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return Err(Error::provider(0, ProviderError::Timeout(self.timeout)));
                }
            }
        }
    }
}

impl Drop for ExternalColorizer {
    fn drop(&mut self) {
        if !self.dead {
            let _ = self.shutdown();
        }
        if let Ok(None) = self.child.try_wait() {
            let _ = self.child.kill();
            let _ = self.child.wait();
        }
    }
}
