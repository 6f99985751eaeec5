use serde::{Deserialize, Serialize};

use super::{timed, Report, Table, Verdict};
use crate::error::{Error, Result};
use crate::spectral::pairwise_sum;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaProdParams {
    #[serde(rename = "N")]
    pub n_list: Vec<usize>,
    /// Entries up to this size are also enumerated in `O(N²)`.
    #[serde(default = "default_oracle_max")]
    pub oracle_max: usize,
    #[serde(default = "default_oracle_tol")]
    pub oracle_tolerance: f64,
    /// Allowed `(max - min)/min` of `S(N)·N/ln N` over entries `>= band_from`.
    #[serde(default = "default_band")]
    pub band: f64,
    #[serde(default = "default_band_from")]
    pub band_from: usize,
}

fn default_oracle_max() -> usize {
    64
}
fn default_oracle_tol() -> f64 {
    1e-12
}
fn default_band() -> f64 {
    0.5
}
fn default_band_from() -> usize {
    64
}

impl Default for LemmaProdParams {
    fn default() -> Self {
        LemmaProdParams {
            n_list: (6..=12).map(|p| 1usize << p).collect(),
            oracle_max: default_oracle_max(),
            oracle_tolerance: default_oracle_tol(),
            band: default_band(),
            band_from: default_band_from(),
        }
    }
}

/// `S(N) = Σ 1/n² · 1/|m|` over `0 < |n|, |m| <= N`, `|n + m| > N`, as
/// `2 Σ_{n=1}^N n^{-2} Σ_{m=N-n+1}^N 1/m`.
pub fn lemma_sum(n: usize) -> f64 {
    // tail[i] = Σ_{m=i}^N 1/m, accumulated from the small end
    let mut tail = vec![0.0; n + 2];
    for m in (1..=n).rev() {
        tail[m] = tail[m + 1] + 1.0 / m as f64;
    }
    let terms: Vec<f64> = (1..=n).map(|k| tail[n - k + 1] / (k * k) as f64).collect();
    2.0 * pairwise_sum(&terms)
}

pub fn lemma_sum_brute_force(n: usize) -> f64 {
    let n = n as i64;
    let mut terms = Vec::new();
    for a in -n..=n {
        for b in -n..=n {
            if a != 0 && b != 0 && (a + b).abs() > n {
                terms.push(1.0 / (a * a) as f64 / b.abs() as f64);
            }
        }
    }
    pairwise_sum(&terms)
}

pub fn check_lemma_prod(params: &LemmaProdParams) -> Result<Report> {
    if params.n_list.is_empty() || params.n_list.windows(2).any(|w| w[1] <= w[0]) || params.n_list[0] == 0 {
        return Err(Error::InvalidArgument("N list must be nonempty, positive and ascending".into()));
    }
    timed("lemma-prod", params, |r| {
        let mut t = Table::new("lemma_sum", &["N", "S", "ratio"]);
        for &n in &params.n_list {
            let s = lemma_sum(n);
            let ratio = if n > 1 { s * n as f64 / (n as f64).ln() } else { f64::MAX };
            t.push(vec![n as f64, s, ratio]);
        }
        r.verdicts.push(Verdict::at_most(5, "S(2) = 1.75", (lemma_sum(2) - 1.75).abs(), 0.0));
        let mut worst: f64 = 0.0;
        let mut oracle = Table::new("oracle", &["N", "fast", "brute_force", "relative"]);
        for n in 1..=params.oracle_max {
            let (f, b) = (lemma_sum(n), lemma_sum_brute_force(n));
            let rel = (f - b).abs() / b.abs();
            worst = worst.max(rel);
            oracle.push(vec![n as f64, f, b, rel]);
        }
        r.verdicts.push(Verdict::at_most(
            5,
            format!("fast sum equals enumeration for N <= {}", params.oracle_max),
            worst,
            params.oracle_tolerance,
        ));
        let band: Vec<f64> = t
            .rows
            .iter()
            .filter(|row| row[0] as usize >= params.band_from)
            .map(|row| row[2])
            .collect();
        if band.len() >= 2 {
            let lo = band.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = band.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            r.verdicts.push(Verdict::at_most(
                5,
                format!("S(N)·N/ln N band over N >= {}", params.band_from),
                (hi - lo) / lo,
                params.band,
            ));
        }
        r.tables.push(t);
        r.tables.push(oracle);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sums() {
        assert_eq!(lemma_sum(2), 1.75);
        assert_eq!(lemma_sum_brute_force(2), 1.75);
        assert_eq!(lemma_sum(1), 2.0);
    }
}
