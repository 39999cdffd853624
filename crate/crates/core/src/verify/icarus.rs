use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use super::process::run_with_timeout;
use super::{BackendError, CompileOutcome, CompileUnit, CompiledUnit, SimOutcome, SimulatorBackend};

pub const IVERILOG_ENV: &str = "VERIFORGE_IVERILOG";
pub const VVP_ENV: &str = "VERIFORGE_VVP";

/// Icarus Verilog: `iverilog -o <out> <sources...>` then `vvp <out>`.
#[derive(Debug, Clone)]
pub struct IcarusBackend {
    iverilog: PathBuf,
    vvp: PathBuf,
    compile_timeout: Duration,
    scratch: Option<PathBuf>,
}

fn resolve(var: &str, default: &str) -> PathBuf {
    std::env::var_os(var)
        .filter(|v| !v.is_empty())
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(default))
}

/// Looks `program` up on `PATH` unless it already names a file.
pub fn find_executable(program: &Path) -> Option<PathBuf> {
    if program.components().count() > 1 {
        return program.is_file().then(|| program.to_path_buf());
    }
    let path = std::env::var_os("PATH").unwrap_or_default();
    std::env::split_paths(&path)
        .map(|dir| dir.join(program))
        .find(|p| p.is_file())
}

impl Default for IcarusBackend {
    fn default() -> Self {
        Self::from_env()
    }
}

impl IcarusBackend {
    /// Executables from `VERIFORGE_IVERILOG` / `VERIFORGE_VVP`, else `iverilog`
    /// and `vvp` on `PATH`.
    pub fn from_env() -> Self {
        IcarusBackend::new(resolve(IVERILOG_ENV, "iverilog"), resolve(VVP_ENV, "vvp"))
    }

    pub fn new(iverilog: impl Into<PathBuf>, vvp: impl Into<PathBuf>) -> Self {
        IcarusBackend {
            iverilog: iverilog.into(),
            vvp: vvp.into(),
            compile_timeout: Duration::from_secs(60),
            scratch: None,
        }
    }

    /// Parent directory for per-sample build directories (system temp dir
    /// by default).
    pub fn with_scratch_dir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.scratch = Some(dir.into());
        self
    }

    pub fn with_compile_timeout(mut self, t: Duration) -> Self {
        self.compile_timeout = t;
        self
    }

    /// True when both executables can be found.
    pub fn is_available(&self) -> bool {
        find_executable(&self.iverilog).is_some() && find_executable(&self.vvp).is_some()
    }

    fn tool(&self, p: &Path) -> Result<PathBuf, BackendError> {
        find_executable(p).ok_or_else(|| BackendError::ToolMissing(format!("{} not found", p.display())))
    }
}

fn sanitize(id: &str) -> String {
    id.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '-' || c == '_' {
                c
            } else {
                '_'
            }
        })
        .take(48)
        .collect()
}

struct Artifact(PathBuf);

impl SimulatorBackend for IcarusBackend {
    fn name(&self) -> &str {
        "iverilog"
    }

    fn compile(&self, unit: &CompileUnit) -> Result<CompileOutcome, BackendError> {
        let iverilog = self.tool(&self.iverilog)?;
        let start = Instant::now();
        let mut builder = tempfile::Builder::new();
        let prefix = format!("veriforge-{}-", sanitize(&unit.sample_id));
        builder.prefix(&prefix);
        let dir = match &self.scratch {
            Some(s) => builder.tempdir_in(s),
            None => builder.tempdir(),
        }
        .map_err(|e| BackendError::Io(format!("creating build dir: {e}")))?;

        let mut paths = Vec::new();
        for src in &unit.sources {
            let p = dir.path().join(&src.name);
            std::fs::write(&p, &src.text).map_err(|e| BackendError::Io(format!("{}: {e}", p.display())))?;
            paths.push(p);
        }
        let out = dir.path().join("sim.vvp");
        let mut cmd = Command::new(iverilog);
        cmd.current_dir(dir.path()).arg("-o").arg(&out).args(&paths);
        let r = run_with_timeout(cmd, self.compile_timeout)?;
        let elapsed = start.elapsed();

        if r.timed_out || r.exit_code != Some(0) || !out.is_file() {
            let log = if r.timed_out {
                format!("compile timed out after {:?}\n{}", self.compile_timeout, r.output)
            } else {
                r.output
            };
            return Ok(CompileOutcome::Failed {
                log,
                elapsed,
                workdir: Some(dir),
            });
        }
        Ok(CompileOutcome::Compiled(CompiledUnit {
            sample_id: unit.sample_id.clone(),
            elapsed,
            workdir: Some(dir),
            payload: Box::new(Artifact(out)),
        }))
    }

    fn simulate(&self, compiled: &CompiledUnit, timeout: Duration) -> Result<SimOutcome, BackendError> {
        let vvp = self.tool(&self.vvp)?;
        let Some(Artifact(out)) = compiled.payload.downcast_ref::<Artifact>() else {
            return Err(BackendError::Io(
                "compiled unit was not produced by this backend".into(),
            ));
        };
        let mut cmd = Command::new(vvp);
        if let Some(d) = &compiled.workdir {
            cmd.current_dir(d.path());
        }
        cmd.arg(out);
        let r = run_with_timeout(cmd, timeout)?;
        Ok(SimOutcome {
            exit_code: r.exit_code,
            output: r.output,
            wall: r.wall,
            timed_out: r.timed_out,
        })
    }
}
