use std::io::Read;
use std::process::{Command, Stdio};
use std::sync::mpsc;
use std::thread;
use std::time::{Duration, Instant};

use wait_timeout::ChildExt;

use super::BackendError;

/// How long to wait for pipe readers after the child is gone.
const DRAIN_GRACE: Duration = Duration::from_millis(250);

#[derive(Debug, Clone)]
pub struct ProcessOutput {
    pub exit_code: Option<i32>,
    /// stdout followed by stderr, lossily decoded.
    pub output: String,
    pub wall: Duration,
    pub timed_out: bool,
}

fn spawn_reader<R: Read + Send + 'static>(mut r: R) -> mpsc::Receiver<Vec<u8>> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = r.read_to_end(&mut buf);
        let _ = tx.send(buf);
    });
    rx
}

#[cfg(unix)]
fn isolate(cmd: &mut Command) {
    use std::os::unix::process::CommandExt;
    cmd.process_group(0);
}

#[cfg(not(unix))]
fn isolate(_cmd: &mut Command) {}

#[cfg(unix)]
fn kill_tree(child: &mut std::process::Child) {
    // the child leads its own process group; take down anything it forked
    let pgid = child.id() as libc::pid_t;
    unsafe {
        libc::kill(-pgid, libc::SIGKILL);
    }
    let _ = child.kill();
}

#[cfg(not(unix))]
fn kill_tree(child: &mut std::process::Child) {
    let _ = child.kill();
}

/// Runs `cmd` to completion or until `timeout`, killing the process group on
/// overrun. Returns within `timeout` plus a short drain grace period.
pub fn run_with_timeout(mut cmd: Command, timeout: Duration) -> Result<ProcessOutput, BackendError> {
    let program = cmd.get_program().to_string_lossy().into_owned();
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    isolate(&mut cmd);

    let start = Instant::now();
    let mut child = cmd.spawn().map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound | std::io::ErrorKind::PermissionDenied => {
            BackendError::ToolMissing(format!("{program}: {e}"))
        }
        _ => BackendError::Io(format!("spawning {program}: {e}")),
    })?;
    let out_rx = spawn_reader(child.stdout.take().expect("stdout piped"));
    let err_rx = spawn_reader(child.stderr.take().expect("stderr piped"));

    let status = child
        .wait_timeout(timeout)
        .map_err(|e| BackendError::Io(format!("waiting on {program}: {e}")))?;
    let (exit_code, timed_out) = match status {
        Some(st) => (st.code(), false),
        None => {
            kill_tree(&mut child);
            let _ = child.wait();
            (None, true)
        }
    };
    let wall = start.elapsed();

    let mut output = Vec::new();
    for rx in [out_rx, err_rx] {
        if let Ok(bytes) = rx.recv_timeout(DRAIN_GRACE) {
            output.extend_from_slice(&bytes);
        }
    }
    Ok(ProcessOutput {
        exit_code,
        output: String::from_utf8_lossy(&output).into_owned(),
        wall,
        timed_out,
    })
}

#[cfg(all(test, unix))]
mod tests {
    use super::*;

    #[test]
    fn captures_output_and_status() {
        let mut cmd = Command::new("sh");
        cmd.args(["-c", "echo out; echo err >&2; exit 3"]);
        let r = run_with_timeout(cmd, Duration::from_secs(5)).unwrap();
        assert_eq!(r.exit_code, Some(3));
        assert!(r.output.contains("out") && r.output.contains("err"));
        assert!(!r.timed_out);
    }

    #[test]
    fn kills_grandchildren_on_timeout() {
        let mut cmd = Command::new("sh");
        cmd.args(["-c", "sleep 30; echo never"]);
        let t0 = Instant::now();
        let r = run_with_timeout(cmd, Duration::from_millis(300)).unwrap();
        assert!(r.timed_out);
        assert!(t0.elapsed() < Duration::from_millis(300) + Duration::from_secs(1));
    }

    #[test]
    fn missing_program_is_tool_missing() {
        let cmd = Command::new("/nonexistent/veriforge-tool");
        assert!(matches!(
            run_with_timeout(cmd, Duration::from_secs(1)),
            Err(BackendError::ToolMissing(_))
        ));
    }
}
