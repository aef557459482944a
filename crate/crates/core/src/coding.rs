//! Random codebooks and the query sets they induce.
//!
//! A codebook is an `M x N` array of i.i.d. `Bern(q)` bits. Column `n`
//! selects the bins whose row carries a one; rotated by the dither
//! `A + B n`, that union of bins is the query set probed at time `n`.

use rand::{Rng, RngCore, SeedableRng};

use crate::error::{Error, Result};
use crate::geometry::{CirclePoint, Trajectory};
use crate::seed::StreamRng;

/// Largest codebook (in bits) we agree to materialise.
pub const CODEBOOK_BIT_CAP: u64 = 1 << 32;

const MAGIC: &[u8; 4] = b"CBK1";

/// `M` rows of `N` bits, packed row-major into 64-bit words.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    m: usize,
    n: usize,
    q: f64,
    seed: u64,
    stride: usize,
    words: Vec<u64>,
}

impl Codebook {
    /// Draws every bit i.i.d. `Bern(q)` from a generator seeded with `seed`.
    pub fn draw(m: usize, n: usize, q: f64, seed: u64) -> Result<Self> {
        if m == 0 || n == 0 {
            return Err(Error::param("codebook", "M and N must be positive"));
        }
        if !(q > 0.0 && q <= 0.5) {
            return Err(Error::Domain {
                what: "q",
                value: q,
                domain: "(0, 1/2]",
            });
        }
        Self::check_size(m, n)?;
        let mut rng = StreamRng::seed_from_u64(seed);
        let mut cb = Codebook::zeros(m, n, q, seed);
        let level = (q * 2f64.powi(64)) as u64;
        let tail = match n % 64 {
            0 => !0u64,
            r => (1u64 << r) - 1,
        };
        let stride = cb.stride;
        for (i, w) in cb.words.iter_mut().enumerate() {
            *w = bernoulli_word(&mut rng, level);
            if i % stride == stride - 1 {
                *w &= tail;
            }
        }
        Ok(cb)
    }

    /// Ones per column, in one pass over the rows.
    pub fn column_weights(&self) -> Vec<usize> {
        let mut out = vec![0; self.n];
        for row in self.words.chunks_exact(self.stride) {
            for (k, &w) in row.iter().enumerate() {
                let mut w = w;
                while w != 0 {
                    out[k * 64 + w.trailing_zeros() as usize] += 1;
                    w &= w - 1;
                }
            }
        }
        out
    }

    /// Rejects dimensions above [`CODEBOOK_BIT_CAP`].
    pub fn check_size(m: usize, n: usize) -> Result<()> {
        if (m as u64).saturating_mul(n as u64) > CODEBOOK_BIT_CAP {
            return Err(Error::CodebookTooLarge {
                rows: m,
                cols: n,
                cap: CODEBOOK_BIT_CAP,
            });
        }
        Ok(())
    }

    /// All-zero codebook; `q` and `seed` are recorded but unused.
    pub fn zeros(m: usize, n: usize, q: f64, seed: u64) -> Self {
        let stride = n.div_ceil(64);
        Codebook {
            m,
            n,
            q,
            seed,
            stride,
            words: vec![0; m * stride],
        }
    }

    /// Builds a codebook from explicit rows, mostly for tests and fixtures.
    pub fn from_rows(rows: &[Vec<bool>]) -> Result<Self> {
        let m = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        if m == 0 || n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("rows must be non-empty and equal length".into()));
        }
        let mut cb = Codebook::zeros(m, n, 0.5, 0);
        for (i, r) in rows.iter().enumerate() {
            for (j, &b) in r.iter().enumerate() {
                cb.set(i, j, b);
            }
        }
        Ok(cb)
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        (self.words[row * self.stride + col / 64] >> (col % 64)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, bit: bool) {
        let w = &mut self.words[row * self.stride + col / 64];
        let mask = 1u64 << (col % 64);
        if bit {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    /// Packed words of one row; bit `n` of the row is bit `n % 64` of word `n / 64`.
    pub fn row_words(&self, row: usize) -> &[u64] {
        &self.words[row * self.stride..(row + 1) * self.stride]
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Number of ones in column `col`.
    pub fn column_weight(&self, col: usize) -> usize {
        (0..self.m).filter(|&r| self.get(r, col)).count()
    }

    /// Serialises as: magic `CBK1`, `M` and `N` as little-endian `u64`, `q` as
    /// little-endian `f64`, `seed` as little-endian `u64`, then the `M * N`
    /// bits in row-major order packed least-significant-bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let total = self.m * self.n;
        let mut out = Vec::with_capacity(36 + total.div_ceil(8));
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&(self.m as u64).to_le_bytes());
        out.extend_from_slice(&(self.n as u64).to_le_bytes());
        out.extend_from_slice(&self.q.to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        let mut packed = vec![0u8; total.div_ceil(8)];
        for row in 0..self.m {
            for col in 0..self.n {
                if self.get(row, col) {
                    let i = row * self.n + col;
                    packed[i / 8] |= 1 << (i % 8);
                }
            }
        }
        out.extend_from_slice(&packed);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 36 || &bytes[..4] != MAGIC {
            return Err(Error::Format("missing CBK1 header".into()));
        }
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let m = u64_at(4) as usize;
        let n = u64_at(12) as usize;
        let q = f64::from_bits(u64_at(20));
        let seed = u64_at(28);
        let total = m
            .checked_mul(n)
            .ok_or_else(|| Error::Format("dimensions overflow".into()))?;
        let body = &bytes[36..];
        if m == 0 || n == 0 || body.len() != total.div_ceil(8) {
            return Err(Error::Format(format!(
                "expected {} payload bytes for {m}x{n}, found {}",
                total.div_ceil(8),
                body.len()
            )));
        }
        let mut cb = Codebook::zeros(m, n, q, seed);
        for i in 0..total {
            if (body[i / 8] >> (i % 8)) & 1 == 1 {
                cb.set(i / n, i % n, true);
            }
        }
        Ok(cb)
    }
}

/// 64 independent bits, each one with probability `level / 2^64`.
///
/// Every lane compares a uniform binary fraction, revealed one bit per word
/// from the most significant end, against `level`; a lane stops as soon as
/// its fraction differs from `level`, so about `log2(64) + 2` words are used.
fn bernoulli_word<R: RngCore + ?Sized>(rng: &mut R, level: u64) -> u64 {
    let mut open = !0u64;
    let mut ones = 0u64;
    for j in (0..64).rev() {
        if open == 0 {
            break;
        }
        let r = rng.next_u64();
        if (level >> j) & 1 == 1 {
            ones |= open & !r;
            open &= r;
        } else {
            open &= !r;
        }
    }
    ones
}

/// Uniform random rotation `A + B n` applied to every query set.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dither {
    pub a: CirclePoint,
    pub b: CirclePoint,
}

impl Dither {
    pub fn draw<R: Rng + ?Sized>(rng: &mut R) -> Self {
        Dither {
            a: CirclePoint::new(rng.random()),
            b: CirclePoint::new(rng.random()),
        }
    }

    pub fn none() -> Self {
        Dither::default()
    }

    /// Rotation applied at time `n`.
    pub fn offset(&self, n: u64) -> f64 {
        CirclePoint::new(self.a.value() + self.b.value() * n as f64).value()
    }
}

/// A finite union of disjoint half-open arcs on the circle.
///
/// Stored canonically as sorted, pairwise disjoint, non-adjacent pieces
/// `[a, b)` with `0 <= a < b <= 1`. An arc that wraps through 0 is the pair
/// `[a, 1)` and `[0, b)`; [`ArcSet::arcs`] reports it as the single arc
/// `(a, b)` with `a > b`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ArcSet {
    pieces: Vec<(f64, f64)>,
}

impl ArcSet {
    pub fn empty() -> Self {
        ArcSet { pieces: Vec::new() }
    }

    pub fn full() -> Self {
        ArcSet {
            pieces: vec![(0.0, 1.0)],
        }
    }

    /// Union of arcs given as `(start, end)`, where `start > end` wraps
    /// through 0 and `start == end` is empty. Endpoints are reduced mod 1.
    pub fn from_arcs<I: IntoIterator<Item = (f64, f64)>>(arcs: I) -> Self {
        let mut pieces = Vec::new();
        for (s, e) in arcs {
            if (e - s).abs() >= 1.0 {
                return ArcSet::full();
            }
            let (s, e) = (CirclePoint::new(s).value(), CirclePoint::new(e).value());
            if s < e {
                pieces.push((s, e));
            } else if s > e {
                pieces.push((s, 1.0));
                if e > 0.0 {
                    pieces.push((0.0, e));
                }
            }
        }
        Self::canonical(pieces)
    }

    fn canonical(mut pieces: Vec<(f64, f64)>) -> Self {
        pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
        ArcSet {
            pieces: merge_sorted(pieces),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn pieces(&self) -> &[(f64, f64)] {
        &self.pieces
    }

    /// Maximal arcs, with a wrapping arc reported as `(start, end)`, `start > end`.
    pub fn arcs(&self) -> Vec<(f64, f64)> {
        let p = &self.pieces;
        if p.len() >= 2 && p[0].0 == 0.0 && p[p.len() - 1].1 == 1.0 {
            let mut out = vec![(p[p.len() - 1].0, p[0].1)];
            out.extend_from_slice(&p[1..p.len() - 1]);
            out.sort_by(|x, y| x.0.total_cmp(&y.0));
            return out;
        }
        p.clone()
    }

    /// Total length.
    pub fn measure(&self) -> f64 {
        self.pieces.iter().map(|(a, b)| b - a).sum()
    }

    /// Half-open membership.
    pub fn contains(&self, w: CirclePoint) -> bool {
        let x = w.value();
        // Last piece starting at or before x.
        let i = self.pieces.partition_point(|&(a, _)| a <= x);
        i > 0 && x < self.pieces[i - 1].1
    }

    pub fn complement(&self) -> Self {
        let mut out = Vec::with_capacity(self.pieces.len() + 1);
        let mut cursor = 0.0;
        for &(a, b) in &self.pieces {
            if a > cursor {
                out.push((cursor, a));
            }
            cursor = b;
        }
        if cursor < 1.0 {
            out.push((cursor, 1.0));
        }
        ArcSet { pieces: out }
    }

    /// Rotation by `offset`.
    pub fn rotate(&self, offset: f64) -> Self {
        let off = CirclePoint::new(offset).value();
        if off == 0.0 || self.is_empty() {
            return self.clone();
        }
        let mut wrapped = Vec::new();
        let mut stay = Vec::with_capacity(self.pieces.len());
        for &(a, b) in &self.pieces {
            let (a2, b2) = (a + off, b + off);
            if a2 >= 1.0 {
                wrapped.push((a2 - 1.0, b2 - 1.0));
            } else if b2 > 1.0 {
                stay.push((a2, 1.0));
                wrapped.push((0.0, b2 - 1.0));
            } else {
                stay.push((a2, b2));
            }
        }
        wrapped.extend(stay);
        ArcSet {
            pieces: merge_sorted(wrapped),
        }
    }

    /// Image under the map `x -> start + width * x` (mod 1), for
    /// `0 < width <= 1`. Used to shrink a query set into a zoom window.
    pub fn map_into(&self, start: f64, width: f64) -> Self {
        Self::from_arcs(
            self.pieces
                .iter()
                .map(|&(a, b)| (start + width * a, start + width * b))
                .filter(|(a, b)| b > a),
        )
    }
}

fn merge_sorted(pieces: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(pieces.len());
    for (a, b) in pieces {
        if b <= a {
            continue;
        }
        match out.last_mut() {
            Some(last) if a <= last.1 => last.1 = last.1.max(b),
            _ => out.push((a, b)),
        }
    }
    out
}

/// The query set at time `n` (1-based): bins whose column-`n` bit is one,
/// rotated by `A + B n`.
pub fn query_set(cb: &Codebook, dither: &Dither, n: usize) -> ArcSet {
    assert!(n >= 1 && n <= cb.cols(), "time index {n} outside 1..={}", cb.cols());
    let col = n - 1;
    let m = cb.rows();
    let width = 1.0 / m as f64;
    let mut runs = Vec::new();
    let mut row = 0;
    while row < m {
        if cb.get(row, col) {
            let start = row;
            while row < m && cb.get(row, col) {
                row += 1;
            }
            let end = if row == m { 1.0 } else { row as f64 * width };
            runs.push((start as f64 * width, end));
        } else {
            row += 1;
        }
    }
    ArcSet { pieces: runs }.rotate(dither.offset(n as u64))
}

pub fn measure(s: &ArcSet) -> f64 {
    s.measure()
}

pub fn contains(s: &ArcSet, w: CirclePoint) -> bool {
    s.contains(w)
}

/// Replaces a set of measure above 1/2 by its complement and reports the flip.
///
/// Measures within `1e-12` of 1/2 count as 1/2, so that rounding in the
/// piece sum does not flip a set of exactly half the circle.
pub fn normalize_halfplus(s: ArcSet) -> (ArcSet, bool) {
    if s.measure() <= 0.5 + 1e-12 {
        (s, false)
    } else {
        (s.complement(), true)
    }
}

/// Codebook bits read along a trajectory: bit `n` is `x[bins[n], n]`.
pub fn trajectory_codeword(cb: &Codebook, t: &Trajectory) -> Result<Vec<bool>> {
    if t.m != cb.rows() || t.bins.len() != cb.cols() {
        return Err(Error::DimensionMismatch(format!(
            "trajectory over {} bins x {} steps vs codebook {}x{}",
            t.m,
            t.bins.len(),
            cb.rows(),
            cb.cols()
        )));
    }
    Ok(t.bins.iter().enumerate().map(|(n, &m)| cb.get(m, n)).collect())
}
