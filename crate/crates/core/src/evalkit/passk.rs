use std::collections::BTreeMap;

use num_bigint::BigUint;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Unbiased pass@k for one problem with `c` correct among `n` samples:
/// `1 - C(n-c, k) / C(n, k)`.
///
/// The binomial ratio is evaluated as the product
/// `prod_{i<k} (n-c-i) / (n-i)` over big integers, so there is no overflow
/// for any `n` and the only rounding is the final conversion to `f64`.
pub fn pass_at_k(n: u64, c: u64, k: u64) -> Result<f64> {
    if k == 0 {
        return Err(Error::argument("k must be at least 1"));
    }
    if k > n {
        return Err(Error::argument(format!("k = {k} exceeds n = {n}")));
    }
    if c > n {
        return Err(Error::argument(format!("c = {c} exceeds n = {n}")));
    }
    if n - c < k {
        return Ok(1.0);
    }
    Ok(pass_at_k_exact(n, c, k)
        .to_f64()
        .expect("a ratio in [0, 1] converts to f64"))
}

/// Exact rational value of [`pass_at_k`]; arguments must already be valid.
pub(crate) fn pass_at_k_exact(n: u64, c: u64, k: u64) -> BigRational {
    if n - c < k {
        return BigRational::one();
    }
    let mut num = BigUint::one();
    let mut den = BigUint::one();
    for i in 0..k {
        num *= n - c - i;
        den *= n - i;
    }
    BigRational::one() - BigRational::new(num.into(), den.into())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemCount {
    pub problem_id: String,
    pub n: u64,
    pub c: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PassAtKReport {
    pub per_problem: Vec<ProblemCount>,
    /// Mean over problems of per-problem pass@k.
    pub pass_at: BTreeMap<u64, f64>,
}

impl PassAtKReport {
    pub fn from_counts(per_problem: Vec<ProblemCount>, ks: &[u64]) -> Result<Self> {
        let mut pass_at = BTreeMap::new();
        for &k in ks {
            let mut sum = BigRational::from_integer(0.into());
            for p in &per_problem {
                pass_at_k(p.n, p.c, k)?;
                sum += pass_at_k_exact(p.n, p.c, k);
            }
            let mean = if per_problem.is_empty() {
                0.0
            } else {
                (sum / BigRational::from_integer(per_problem.len().into()))
                    .to_f64()
                    .unwrap_or(0.0)
            };
            pass_at.insert(k, mean);
        }
        Ok(PassAtKReport { per_problem, pass_at })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::from("k      pass@k\n");
        for (k, v) in &self.pass_at {
            out.push_str(&format!("{k:<6} {:.4}\n", v));
        }
        out
    }
}
