use std::collections::HashMap;
use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::{BackendError, CompileOutcome, CompileUnit, CompiledUnit, SimOutcome, SimulatorBackend, TESTBENCH_FILE};
use crate::error::{Error, Result};
use crate::quality::tokenize;

/// Scripted result for one sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MockOutcome {
    Pass,
    CompileFail,
    SimFail,
    Timeout,
    ToolMissing,
}

/// What to do for samples absent from the script.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MockFallback {
    /// Everything passes.
    Pass,
    /// Compile succeeds when every source holds at least one module and each
    /// `module` has a matching `endmodule`;
    /// simulation obeys `// mock: fail` / `// mock: timeout` directives in
    /// the testbench and passes otherwise.
    #[default]
    Structural,
}

/// A simulator stand-in with outcomes keyed by sample id. It never touches
/// the filesystem and reports zero wall time except for scripted timeouts,
/// which report the full timeout without sleeping.
#[derive(Debug, Clone, Default)]
pub struct MockBackend {
    script: HashMap<String, MockOutcome>,
    fallback: MockFallback,
}

impl MockBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn scripted(script: impl IntoIterator<Item = (String, MockOutcome)>) -> Self {
        MockBackend {
            script: script.into_iter().collect(),
            fallback: MockFallback::Structural,
        }
    }

    pub fn with_fallback(mut self, fallback: MockFallback) -> Self {
        self.fallback = fallback;
        self
    }

    pub fn set(&mut self, id: impl Into<String>, outcome: MockOutcome) {
        self.script.insert(id.into(), outcome);
    }

    /// Loads a JSON object mapping sample id to outcome name.
    pub fn load_script(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let script: HashMap<String, MockOutcome> =
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Ok(MockBackend::scripted(script))
    }

    fn structural_compile(unit: &CompileUnit) -> bool {
        unit.sources.iter().all(|src| {
            let mut depth = 0i64;
            let mut modules = 0;
            for t in tokenize(&src.text) {
                if t.is_kw("module") || t.is_kw("macromodule") {
                    depth += 1;
                    modules += 1;
                    if depth > 1 {
                        return false;
                    }
                } else if t.is_kw("endmodule") {
                    depth -= 1;
                    if depth < 0 {
                        return false;
                    }
                }
            }
            modules > 0 && depth == 0
        })
    }

    fn structural_sim(unit: &CompileUnit) -> MockOutcome {
        let tb = unit.sources.iter().find(|s| s.name == TESTBENCH_FILE);
        match tb {
            Some(tb) if tb.text.contains("// mock: timeout") => MockOutcome::Timeout,
            Some(tb) if tb.text.contains("// mock: fail") => MockOutcome::SimFail,
            _ => MockOutcome::Pass,
        }
    }
}

impl SimulatorBackend for MockBackend {
    fn name(&self) -> &str {
        "mock"
    }

    fn compile(&self, unit: &CompileUnit) -> Result<CompileOutcome, BackendError> {
        let outcome = match self.script.get(&unit.sample_id) {
            Some(o) => *o,
            None => match self.fallback {
                MockFallback::Pass => MockOutcome::Pass,
                MockFallback::Structural if !Self::structural_compile(unit) => MockOutcome::CompileFail,
                MockFallback::Structural => Self::structural_sim(unit),
            },
        };
        match outcome {
            MockOutcome::ToolMissing => Err(BackendError::ToolMissing("mock: scripted tool_missing".into())),
            MockOutcome::CompileFail => Ok(CompileOutcome::Failed {
                log: format!("mock: {}: syntax error", unit.sample_id),
                elapsed: Duration::ZERO,
                workdir: None,
            }),
            other => Ok(CompileOutcome::Compiled(CompiledUnit {
                sample_id: unit.sample_id.clone(),
                elapsed: Duration::ZERO,
                workdir: None,
                payload: Box::new(other),
            })),
        }
    }

    fn simulate(&self, compiled: &CompiledUnit, timeout: Duration) -> Result<SimOutcome, BackendError> {
        let outcome = compiled
            .payload
            .downcast_ref::<MockOutcome>()
            .copied()
            .ok_or_else(|| BackendError::Io("compiled unit was not produced by the mock backend".into()))?;
        Ok(match outcome {
            MockOutcome::Timeout => SimOutcome {
                exit_code: None,
                output: String::new(),
                wall: timeout,
                timed_out: true,
            },
            MockOutcome::SimFail => SimOutcome {
                exit_code: Some(0),
                output: format!("MISMATCH: {} output differs from expected\n", compiled.sample_id),
                wall: Duration::ZERO,
                timed_out: false,
            },
            _ => SimOutcome {
                exit_code: Some(0),
                output: "all tests passed\n".into(),
                wall: Duration::ZERO,
                timed_out: false,
            },
        })
    }
}
