//! Maximum-likelihood and erasure (Forney) decoding over a set of candidate
//! codewords, both driven by Hamming distances to the observation.
//!
//! For an assumed crossover `p < 1/2` the likelihood `p^d (1-p)^(N-d)` is
//! strictly decreasing in the distance `d`, so ML decoding is minimum
//! distance decoding.

use crate::coding::Codebook;
use crate::error::{Error, Result};
use crate::geometry::TrajectoryTable;

/// Outcome of minimum-distance decoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Decision {
    /// Winning candidate; the lowest index among equally distant ones.
    pub index: usize,
    pub distance: u32,
    /// Second-best distance minus best distance; `None` with one candidate.
    pub margin: Option<u32>,
    /// Another candidate shares the best distance.
    pub tie: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ForneyOutcome {
    Declared(Decision),
    /// The likelihood ratio test failed; the ML candidate is kept so a capped
    /// search can still fall back on it.
    Erasure(Decision),
}

impl ForneyOutcome {
    pub fn decision(&self) -> Decision {
        match *self {
            ForneyOutcome::Declared(d) | ForneyOutcome::Erasure(d) => d,
        }
    }

    pub fn is_declared(&self) -> bool {
        matches!(self, ForneyOutcome::Declared(_))
    }
}

/// Minimum-distance decision over precomputed distances.
pub fn ml_decide(distances: &[u32]) -> Result<Decision> {
    let (mut best, mut best_d) = (usize::MAX, u32::MAX);
    let mut second = u32::MAX;
    for (k, &d) in distances.iter().enumerate() {
        if d < best_d {
            second = best_d;
            best_d = d;
            best = k;
        } else if d < second {
            second = d;
        }
    }
    if best == usize::MAX {
        return Err(Error::EmptyTable);
    }
    Ok(Decision {
        index: best,
        distance: best_d,
        margin: (second != u32::MAX).then(|| second - best_d),
        tie: second == best_d,
    })
}

/// `log2 P(y | x)` for a codeword at Hamming distance `d` over `n` uses of a
/// BSC with crossover `p`.
pub fn log2_likelihood(d: u32, n: usize, p: f64) -> f64 {
    let agree = (n as u32 - d) as f64;
    let mut l = 0.0;
    if d > 0 {
        l += d as f64 * p.log2();
    }
    if agree > 0.0 {
        l += agree * (1.0 - p).log2();
    }
    l
}

/// Forney's erasure rule: declare the ML candidate `k` iff
/// `P(y|x_k) / sum_{k' != k} P(y|x_k') >= 2^(N T)`.
///
/// The sum is taken in the log domain over the distance histogram, so it is
/// stable for any number of candidates. A tie for the best distance is never
/// declared.
pub fn forney_decide(distances: &[u32], n: usize, p_assumed: f64, threshold: f64) -> Result<ForneyOutcome> {
    if threshold < 0.0 {
        return Err(Error::param("T", "threshold must be non-negative"));
    }
    let best = ml_decide(distances)?;
    match forney_log_ratio(distances, n, p_assumed)? {
        Some(r) if r >= n as f64 * threshold => Ok(ForneyOutcome::Declared(best)),
        _ => Ok(ForneyOutcome::Erasure(best)),
    }
}

/// `log2` of the ML candidate's likelihood over the summed likelihood of all
/// other candidates; `None` when the best distance is tied. A lone candidate
/// has ratio `+inf`.
pub fn forney_log_ratio(distances: &[u32], n: usize, p_assumed: f64) -> Result<Option<f64>> {
    check_p(p_assumed)?;
    let best = ml_decide(distances)?;
    if best.tie {
        return Ok(None);
    }
    let mut hist = vec![0u64; n + 1];
    for &d in distances {
        hist[d as usize] += 1;
    }
    hist[best.distance as usize] -= 1;
    let terms: Vec<(f64, f64)> = hist
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(d, &c)| (c as f64, log2_likelihood(d as u32, n, p_assumed)))
        .collect();
    let top = terms.iter().map(|t| t.1).fold(f64::NEG_INFINITY, f64::max);
    let others = if top == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        top + terms.iter().map(|&(c, l)| c * (l - top).exp2()).sum::<f64>().log2()
    };
    Ok(Some(log2_likelihood(best.distance, n, p_assumed) - others))
}

fn check_p(p: f64) -> Result<()> {
    if !(0.0..0.5).contains(&p) {
        return Err(Error::Domain {
            what: "p_assumed",
            value: p,
            domain: "[0, 1/2)",
        });
    }
    Ok(())
}

/// Packs bits into 64-bit words, bit `n` at position `n % 64` of word `n / 64`.
pub fn pack_bits(bits: &[bool]) -> Vec<u64> {
    let mut out = vec![0u64; bits.len().div_ceil(64)];
    for (i, &b) in bits.iter().enumerate() {
        if b {
            out[i / 64] |= 1 << (i % 64);
        }
    }
    out
}

/// Distances from `y` to every codebook row.
pub fn row_distances(cb: &Codebook, y: &[bool]) -> Vec<u32> {
    let yw = pack_bits(y);
    (0..cb.rows())
        .map(|r| {
            cb.row_words(r)
                .iter()
                .zip(&yw)
                .map(|(a, b)| (a ^ b).count_ones())
                .sum()
        })
        .collect()
}

/// Distances from `y` to every trajectory codeword of `table` under `cb`.
pub fn table_distances(table: &TrajectoryTable, cb: &Codebook, y: &[bool]) -> Result<Vec<u32>> {
    let (n, m) = (table.n(), table.m());
    if cb.rows() != m || cb.cols() != n || y.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "table {m}x{n}, codebook {}x{}, observation of length {}",
            cb.rows(),
            cb.cols(),
            y.len()
        )));
    }
    // mismatch[t * m + row] = x[row, t] xor y[t]
    let mut mismatch = vec![0u8; n * m];
    for t in 0..n {
        for row in 0..m {
            mismatch[t * m + row] = u8::from(cb.get(row, t) != y[t]);
        }
    }
    Ok(table
        .flat_bins()
        .chunks_exact(n)
        .map(|seq| {
            seq.iter()
                .enumerate()
                .map(|(t, &b)| u32::from(mismatch[t * m + b as usize]))
                .sum()
        })
        .collect())
}

/// ML decoding of `y` against the trajectory codewords of `table`.
///
/// `p_assumed` must be below 1/2; in that range its value does not change
/// the decision.
pub fn ml_decode(table: &TrajectoryTable, cb: &Codebook, y: &[bool], p_assumed: f64) -> Result<Decision> {
    check_p(p_assumed)?;
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    ml_decide(&table_distances(table, cb, y)?)
}

/// Forney erasure decoding of `y` against the trajectory codewords of `table`.
pub fn forney_decode(
    table: &TrajectoryTable,
    cb: &Codebook,
    y: &[bool],
    p_assumed: f64,
    threshold: f64,
) -> Result<ForneyOutcome> {
    if table.is_empty() {
        return Err(Error::EmptyTable);
    }
    forney_decide(&table_distances(table, cb, y)?, table.n(), p_assumed, threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_match_wins_with_margin() {
        let d = ml_decide(&[3, 0, 2, 5]).unwrap();
        assert_eq!(d.index, 1);
        assert_eq!(d.margin, Some(2));
        assert!(!d.tie);
    }

    #[test]
    fn single_candidate() {
        let d = ml_decide(&[4]).unwrap();
        assert_eq!((d.index, d.margin, d.tie), (0, None, false));
        assert!(matches!(forney_decide(&[4], 6, 0.1, 0.5).unwrap(), ForneyOutcome::Declared(_)));
    }

    #[test]
    fn ties_go_to_lowest_index_and_are_flagged() {
        let d = ml_decide(&[2, 1, 1]).unwrap();
        assert_eq!((d.index, d.tie, d.margin), (1, true, Some(0)));
        assert!(matches!(forney_decide(&[2, 1, 1], 4, 0.1, 0.0).unwrap(), ForneyOutcome::Erasure(_)));
        assert!(matches!(forney_decide(&[3, 3], 6, 0.1, 0.0).unwrap(), ForneyOutcome::Erasure(_)));
    }

    #[test]
    fn empty_is_an_error() {
        assert_eq!(ml_decide(&[]), Err(Error::EmptyTable));
    }

    #[test]
    fn dominant_codeword_is_declared() {
        let n = 40;
        let mut d = vec![n as u32; 1000];
        d[17] = 0;
        match forney_decide(&d, n, 0.1, 0.0).unwrap() {
            ForneyOutcome::Declared(dec) => assert_eq!(dec.index, 17),
            e => panic!("{e:?}"),
        }
        // The ratio is (0.9/0.1)^40 / 999, about 2^116.8.
        assert!(forney_decide(&d, n, 0.1, 2.0).unwrap().is_declared());
        assert!(!forney_decide(&d, n, 0.1, 3.0).unwrap().is_declared());
    }

    #[test]
    fn log_domain_matches_direct_ratio() {
        let d = [3u32, 1, 4, 4, 2, 6];
        let (n, p) = (8usize, 0.2f64);
        let lik = |x: u32| p.powi(x as i32) * (1.0 - p).powi((n as u32 - x) as i32);
        let ratio = lik(1) / d.iter().enumerate().filter(|(k, _)| *k != 1).map(|(_, &x)| lik(x)).sum::<f64>();
        let t_pass = ratio.log2() / n as f64 - 1e-9;
        assert!(forney_decide(&d, n, p, t_pass).unwrap().is_declared());
        assert!(!forney_decide(&d, n, p, t_pass + 2e-9).unwrap().is_declared());
    }

    #[test]
    fn clean_assumed_channel() {
        assert!(forney_decide(&[0, 1, 2], 4, 0.0, 5.0).unwrap().is_declared());
        assert_eq!(log2_likelihood(0, 4, 0.0), 0.0);
        assert_eq!(log2_likelihood(1, 4, 0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn rejects_bad_channel() {
        assert!(forney_decide(&[0, 1], 2, 0.5, 0.0).is_err());
        assert!(forney_decide(&[0, 1], 2, 0.1, -1.0).is_err());
    }

    #[test]
    fn row_and_table_distances_agree() {
        let cb = Codebook::draw(9, 70, 0.4, 1).unwrap();
        let y: Vec<bool> = (0..70).map(|i| i % 3 == 0).collect();
        let table = TrajectoryTable::rows(70, 9).unwrap();
        assert_eq!(row_distances(&cb, &y), table_distances(&table, &cb, &y).unwrap());
        let short = TrajectoryTable::rows(5, 9).unwrap();
        assert!(table_distances(&short, &cb, &y).is_err());
    }
}
