//! Child process execution with a wall-clock limit and a stdout cap.

use std::io::{Read, Write};
use std::os::unix::process::{CommandExt, ExitStatusExt};
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};
use wait_timeout::ChildExt;

const STDERR_CAP: usize = 64 * 1024;

#[derive(Debug)]
pub struct RunOutcome {
    pub status: Option<ExitStatus>,
    pub timed_out: bool,
    pub output_exceeded: bool,
    pub stdout: Vec<u8>,
    pub stderr: Vec<u8>,
    pub elapsed: Duration,
}

impl RunOutcome {
    pub fn success(&self) -> bool {
        !self.timed_out && !self.output_exceeded && self.status.is_some_and(|s| s.success())
    }

    pub fn describe_status(&self) -> String {
        match self.status {
            Some(s) => match (s.code(), s.signal()) {
                (Some(code), _) => format!("exit status {code}"),
                (None, Some(sig)) => format!("killed by signal {sig}"),
                _ => "abnormal termination".into(),
            },
            None => "no exit status".into(),
        }
    }
}

fn kill_group(pid: u32) {
    // SAFETY: plain kill(2) on a process group we created; ESRCH is fine.
    unsafe {
        libc::kill(-(pid as libc::pid_t), libc::SIGKILL);
    }
}

/// Runs `argv` in `dir` as the leader of a fresh process group, feeding
/// `stdin`. The whole group is killed when the time limit or stdout cap is hit.
pub fn run_limited(
    argv: &[String],
    dir: &Path,
    stdin: &[u8],
    timeout: Duration,
    max_stdout: usize,
) -> std::io::Result<RunOutcome> {
    let (program, args) = argv
        .split_first()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "empty command"))?;
    let start = Instant::now();
    let mut child = Command::new(program)
        .args(args)
        .current_dir(dir)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .process_group(0)
        .spawn()?;
    let pid = child.id();

    let mut child_stdin = child.stdin.take().expect("piped stdin");
    let input = stdin.to_vec();
    let writer = thread::spawn(move || {
        // the program may exit without reading its input
        let _ = child_stdin.write_all(&input);
    });

    let exceeded = Arc::new(AtomicBool::new(false));
    let mut child_stdout = child.stdout.take().expect("piped stdout");
    let flag = Arc::clone(&exceeded);
    let out_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match child_stdout.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    if buf.len() + n > max_stdout {
                        let room = max_stdout - buf.len();
                        buf.extend_from_slice(&chunk[..room]);
                        flag.store(true, Ordering::SeqCst);
                        kill_group(pid);
                        break;
                    }
                    buf.extend_from_slice(&chunk[..n]);
                }
            }
        }
        buf
    });

    let mut child_stderr = child.stderr.take().expect("piped stderr");
    let err_reader = thread::spawn(move || {
        let mut buf = Vec::new();
        let mut chunk = [0u8; 8192];
        loop {
            match child_stderr.read(&mut chunk) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = STDERR_CAP.saturating_sub(buf.len());
                    buf.extend_from_slice(&chunk[..n.min(room)]);
                }
            }
        }
        buf
    });

    let (status, timed_out) = match child.wait_timeout(timeout)? {
        Some(status) => (Some(status), false),
        None => {
            kill_group(pid);
            (child.wait().ok(), true)
        }
    };
    let elapsed = start.elapsed();
    // reap stragglers that inherited the pipes
    kill_group(pid);

    let _ = writer.join();
    let stdout = out_reader.join().unwrap_or_default();
    let stderr = err_reader.join().unwrap_or_default();
    Ok(RunOutcome {
        status,
        timed_out,
        output_exceeded: exceeded.load(Ordering::SeqCst),
        stdout,
        stderr,
        elapsed,
    })
}
