//! Child processes in their own process group with wall-clock limits.

use std::collections::BTreeMap;
use std::fs::File;
use std::os::unix::process::CommandExt;
use std::path::Path;
use std::process::{Command, ExitStatus, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    /// Wall-clock budget before termination starts.
    pub budget: Duration,
    /// Time between SIGTERM and SIGKILL.
    pub grace: Duration,
    /// How often the deadline is checked.
    pub poll: Duration,
}

#[derive(Debug)]
pub struct Finished {
    /// `None` when the process was killed after the budget ran out.
    pub status: Option<ExitStatus>,
    /// Time from spawn to exit, or to SIGTERM if the budget ran out.
    pub elapsed: Duration,
    /// Time from spawn until the process was actually reaped.
    pub reaped_after: Duration,
}

impl Finished {
    pub fn timed_out(&self) -> bool {
        self.status.is_none()
    }
}

fn signal_group(pgid: i32, sig: i32) {
    // ESRCH once the group is gone is expected and ignored.
    unsafe {
        libc::killpg(pgid, sig);
    }
}

/// Runs `sh -c command` in a new process group. On budget expiry the whole
/// group gets SIGTERM, then SIGKILL after the grace period. Stray group
/// members are killed once the shell exits. Standard output and error go
/// to `log` when given and are discarded otherwise.
pub fn run_shell(
    command: &str,
    env: &BTreeMap<String, String>,
    limits: Limits,
    log: Option<&Path>,
) -> std::io::Result<Finished> {
    let (stdout, stderr) = match log {
        Some(path) => {
            let file = File::create(path)?;
            (Stdio::from(file.try_clone()?), Stdio::from(file))
        }
        None => (Stdio::null(), Stdio::null()),
    };
    let mut cmd = Command::new("sh");
    cmd.arg("-c").arg(command).envs(env).stdin(Stdio::null()).stdout(stdout).stderr(stderr).process_group(0);
    let start = Instant::now();
    let mut child = cmd.spawn()?;
    let pgid = child.id() as i32;

    let (tx, rx) = mpsc::channel();
    let waiter = thread::spawn(move || {
        let status = child.wait();
        let _ = tx.send((status, Instant::now()));
    });

    let deadline = start + limits.budget;
    let mut terminated_at = None;
    let (status, exit_at) = loop {
        let now = Instant::now();
        let wait = match terminated_at {
            None if now >= deadline => {
                signal_group(pgid, libc::SIGTERM);
                terminated_at = Some(now);
                continue;
            }
            None => (deadline - now).min(limits.poll),
            Some(t) if now >= t + limits.grace => {
                signal_group(pgid, libc::SIGKILL);
                limits.poll
            }
            Some(t) => (t + limits.grace - now).min(limits.poll),
        };
        match rx.recv_timeout(wait) {
            Ok(done) => break done,
            Err(mpsc::RecvTimeoutError::Timeout) => {}
            Err(mpsc::RecvTimeoutError::Disconnected) => {
                return Err(std::io::Error::other("waiter thread exited without a status"));
            }
        }
    };
    let _ = waiter.join();
    signal_group(pgid, libc::SIGKILL);
    let status = status?;

    Ok(match terminated_at {
        Some(t) => Finished { status: None, elapsed: t - start, reaped_after: exit_at - start },
        None => Finished { status: Some(status), elapsed: exit_at - start, reaped_after: exit_at - start },
    })
}
