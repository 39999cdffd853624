use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::lint::StyleVerdict;
use crate::corpus::Sample;
use crate::error::Result;
use crate::http::JsonEndpoint;

pub const JUDGE_URL_ENV: &str = "VERIFORGE_JUDGE_URL";

/// An external style/quality assessor. Implementations must return within a
/// bounded time, either with a verdict or with a transport error.
pub trait JudgeClient: Sync {
    fn assess(&self, sample: &Sample) -> Result<StyleVerdict>;
}

/// Accepts everything.
#[derive(Debug, Clone, Copy, Default)]
pub struct StubJudge;

impl JudgeClient for StubJudge {
    fn assess(&self, _sample: &Sample) -> Result<StyleVerdict> {
        Ok(StyleVerdict::pass())
    }
}

#[derive(Serialize)]
struct JudgeRequest<'a> {
    id: &'a str,
    problem: &'a str,
    description: &'a str,
    solution: &'a str,
}

/// POSTs `{id, problem, description, solution}` and expects a
/// `StyleVerdict`-shaped JSON reply (`{"passed": bool, "violations": [...]}`).
#[derive(Debug, Clone)]
pub struct HttpJudge {
    endpoint: JsonEndpoint,
}

impl HttpJudge {
    pub fn new(url: impl Into<String>, timeout: Duration) -> Self {
        HttpJudge {
            endpoint: JsonEndpoint::new(url, timeout),
        }
    }

    pub fn from_env(timeout: Duration) -> Result<Self> {
        Ok(HttpJudge {
            endpoint: JsonEndpoint::from_env(JUDGE_URL_ENV, timeout)?,
        })
    }
}

#[derive(Deserialize)]
struct JudgeReply {
    passed: bool,
    #[serde(default)]
    violations: Vec<super::lint::Violation>,
}

impl JudgeClient for HttpJudge {
    fn assess(&self, sample: &Sample) -> Result<StyleVerdict> {
        let reply: JudgeReply = self.endpoint.post(&JudgeRequest {
            id: &sample.id,
            problem: &sample.problem,
            description: &sample.description,
            solution: &sample.solution,
        })?;
        // a reply that says "failed" with no reasons still fails
        let mut verdict = StyleVerdict::from_violations(reply.violations);
        verdict.passed = reply.passed && verdict.violations.is_empty();
        Ok(verdict)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::http::testserver::serve;

    #[test]
    fn http_judge_round_trip() {
        let srv = serve(
            vec![
                r#"{"passed":true,"violations":[]}"#.into(),
                r#"{"passed":false,"violations":[{"rule":"R1","line":3,"message":"bad name"}]}"#.into(),
                r#"{"passed":false}"#.into(),
            ],
            Duration::ZERO,
        );
        let judge = HttpJudge::new(&srv.url, Duration::from_secs(5));
        let s = Sample::new("s1", "p", "module m; endmodule");
        assert!(judge.assess(&s).unwrap().passed);
        let req = srv.requests.recv().unwrap();
        assert!(req.contains(r#""id":"s1""#));
        let v = judge.assess(&s).unwrap();
        assert!(!v.passed);
        assert_eq!(v.violations[0].line, 3);
        assert!(!judge.assess(&s).unwrap().passed);
    }

    #[test]
    fn http_judge_times_out() {
        let srv = serve(vec!["{}".into()], Duration::from_secs(3));
        let judge = HttpJudge::new(&srv.url, Duration::from_millis(300));
        let t0 = std::time::Instant::now();
        let r = judge.assess(&Sample::new("s", "p", "x"));
        assert!(matches!(r, Err(Error::Transport(_))), "{r:?}");
        assert!(t0.elapsed() < Duration::from_secs(2));
    }

    #[test]
    fn refused_connection_is_transport_error() {
        let judge = HttpJudge::new("http://127.0.0.1:1/", Duration::from_millis(500));
        assert!(matches!(
            judge.assess(&Sample::new("s", "p", "x")),
            Err(Error::Transport(_))
        ));
    }
}
