//! Fuzzy entropy (FuzzyEn) of a univariate series.
//!
//! Templates of length `m` are baseline-removed (their own mean is
//! subtracted) and compared with the Chebyshev distance `d`. Similarity is
//! the exponential membership `exp(-(d / r)^n)`. With `L = N - m` templates,
//!
//! ```text
//! phi_m = 1 / (L (L - 1)) * sum_{i != j} exp(-(d_ij^m / r)^n)
//! FuzzyEn(m) = ln phi_m - ln phi_{m+1}
//! ```
//!
//! where `phi_{m+1}` uses the same `L` start indices with templates one
//! sample longer.
//!
//! [`fuzzy_entropy_profile`] evaluates every dimension `1..=max_m` in a single
//! sweep over template pairs. For a pair `(i, j)` the baseline-removed distance
//! at dimension `d` is
//!
//! ```text
//! max_k |(x[i+k] - x[j+k]) - (mean_i - mean_j)|  =  max(hi - delta, delta - lo)
//! ```
//!
//! with `hi`/`lo` the running max/min of the raw differences over `k < d`, so
//! all dimensions share one pass over the samples.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Similarity tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tolerance {
    /// `r = factor * std(segment)`; makes the entropy amplitude invariant.
    StdRelative(f64),
    Absolute(f64),
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::StdRelative(0.2)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FuzzyEnParams {
    pub m: usize,
    pub r: Tolerance,
    /// Fuzziness exponent of the membership function.
    pub n: f64,
}

impl FuzzyEnParams {
    pub fn new(m: usize) -> Self {
        FuzzyEnParams {
            m,
            r: Tolerance::default(),
            n: 2.0,
        }
    }
}

/// Population standard deviation.
pub(crate) fn std_dev(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n).sqrt()
}

/// Resolves the tolerance against `xs`. `None` means the std-relative
/// tolerance collapsed to zero on a constant series.
pub(crate) fn resolve_tolerance(xs: &[f64], r: Tolerance) -> Result<Option<f64>> {
    match r {
        Tolerance::StdRelative(f) => {
            if !(f.is_finite() && f > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance factor must be positive, got {f}"
                )));
            }
            let sd = std_dev(xs);
            Ok(if sd == 0.0 { None } else { Some(f * sd) })
        }
        Tolerance::Absolute(r) => {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "tolerance must be positive, got {r}"
                )));
            }
            Ok(Some(r))
        }
    }
}

/// FuzzyEn at a single embedding dimension.
pub fn fuzzy_entropy(xs: &[f64], params: &FuzzyEnParams) -> Result<f64> {
    if params.m == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
    }
    Ok(fuzzy_entropy_profile(xs, params.m, params.r, params.n)?[params.m - 1])
}

/// FuzzyEn for every embedding dimension `1..=max_m`, in order.
///
/// A constant series under a std-relative tolerance is perfectly regular and
/// yields zeros.
pub fn fuzzy_entropy_profile(xs: &[f64], max_m: usize, r: Tolerance, n: f64) -> Result<Vec<f64>> {
    let len = xs.len();
    if max_m == 0 {
        return Err(Error::InvalidParameter("embedding dimension must be >= 1".into()));
    }
    if len < max_m + 2 {
        return Err(Error::SegmentTooShort {
            len,
            m: max_m,
            required: max_m + 2,
        });
    }
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "fuzziness exponent must be positive, got {n}"
        )));
    }
    let Some(r) = resolve_tolerance(xs, r)? else {
        return Ok(vec![0.0; max_m]);
    };

    let rows = row_sums(xs, max_m + 1, r, n);
    let mut out = Vec::with_capacity(max_m);
    for m in 1..=max_m {
        let l = len - m;
        let phi = |d: usize| {
            // rows[j][d-1] holds sum_{i<j} mu_d(i, j); pairs with j < l.
            let s: f64 = rows[..l].iter().map(|r| r[d - 1]).sum();
            2.0 * s / (l as f64 * (l - 1) as f64)
        };
        out.push(phi(m).ln() - phi(m + 1).ln());
    }
    Ok(out)
}

/// Maximum embedding dimension handled by the kernel (`max_m + 1`).
const MAX_DIMS: usize = 16;
const LANES: usize = 16;

type RowKernel = fn(&[f64], &[Vec<f64>], usize, f64, usize) -> [f64; MAX_DIMS];

/// Row `j` holds, for each dimension `d` (index `d - 1`), the membership sum
/// over all earlier templates `i < j`. Entries for dimensions whose template
/// at `j` would run past the end are zero.
fn row_sums(xs: &[f64], dims: usize, r: f64, n: f64) -> Vec<[f64; MAX_DIMS]> {
    assert!(dims <= MAX_DIMS, "at most {} dimensions supported", MAX_DIMS - 1);
    let means = template_means(xs, dims);
    let inv_r = 1.0 / r;
    if n == 2.0 {
        let kernel = select_square_kernel();
        (0..xs.len())
            .into_par_iter()
            .map(|j| kernel(xs, &means, dims, inv_r, j))
            .collect()
    } else {
        (0..xs.len())
            .into_par_iter()
            .map(|j| row_general(xs, &means, dims, inv_r, n, j))
            .collect()
    }
}

/// Picks the widest vector unit available. Every variant performs the same
/// IEEE operations in the same order, so results are bit-identical.
fn select_square_kernel() -> RowKernel {
    #[cfg(target_arch = "x86_64")]
    {
        if std::arch::is_x86_feature_detected!("avx512f") {
            return |xs, means, dims, inv_r, j| unsafe { row_square_avx512(xs, means, dims, inv_r, j) };
        }
        if std::arch::is_x86_feature_detected!("avx2") {
            return |xs, means, dims, inv_r, j| unsafe { row_square_avx2(xs, means, dims, inv_r, j) };
        }
    }
    row_square
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx512f")]
unsafe fn row_square_avx512(xs: &[f64], means: &[Vec<f64>], dims: usize, inv_r: f64, j: usize) -> [f64; MAX_DIMS] {
    row_square_body(xs, means, dims, inv_r, j)
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "avx2")]
unsafe fn row_square_avx2(xs: &[f64], means: &[Vec<f64>], dims: usize, inv_r: f64, j: usize) -> [f64; MAX_DIMS] {
    row_square_body(xs, means, dims, inv_r, j)
}

fn row_square(xs: &[f64], means: &[Vec<f64>], dims: usize, inv_r: f64, j: usize) -> [f64; MAX_DIMS] {
    row_square_body(xs, means, dims, inv_r, j)
}

#[inline(always)]
fn square_term(hi: f64, lo: f64, mi: f64, mj: f64, inv_r: f64) -> f64 {
    let delta = mi - mj;
    let a = hi - delta;
    let b = delta - lo;
    let dist = if a > b { a } else { b } * inv_r;
    exp_neg(dist * dist)
}

/// Membership sums for row `j` with `n = 2`. Templates `i < j` are processed
/// in blocks of [`LANES`]; each block carries its running max/min of raw
/// differences through all dimensions in registers. Per-dimension sums are
/// accumulated lane-wise, then reduced in a fixed order.
#[inline(always)]
fn row_square_body(xs: &[f64], means: &[Vec<f64>], dims: usize, inv_r: f64, j: usize) -> [f64; MAX_DIMS] {
    let dmax = dims.min(xs.len() - j);
    let mut lanes = [[0.0f64; LANES]; MAX_DIMS];
    let blocks = j / LANES;
    for b in 0..blocks {
        let i0 = b * LANES;
        let mut hi = [f64::NEG_INFINITY; LANES];
        let mut lo = [f64::INFINITY; LANES];
        for k in 0..dmax {
            let xj = xs[j + k];
            let mj = means[k][j];
            let xi: &[f64; LANES] = xs[i0 + k..i0 + k + LANES].try_into().unwrap();
            let mi: &[f64; LANES] = means[k][i0..i0 + LANES].try_into().unwrap();
            let acc = &mut lanes[k];
            for l in 0..LANES {
                let diff = xi[l] - xj;
                if diff > hi[l] {
                    hi[l] = diff;
                }
                if diff < lo[l] {
                    lo[l] = diff;
                }
                acc[l] += square_term(hi[l], lo[l], mi[l], mj, inv_r);
            }
        }
    }
    let mut out = [0.0f64; MAX_DIMS];
    for (o, acc) in out.iter_mut().zip(&lanes) {
        *o = acc.iter().sum();
    }
    for i in blocks * LANES..j {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for k in 0..dmax {
            let diff = xs[i + k] - xs[j + k];
            hi = if diff > hi { diff } else { hi };
            lo = if diff < lo { diff } else { lo };
            out[k] += square_term(hi, lo, means[k][i], means[k][j], inv_r);
        }
    }
    out
}

/// Arbitrary fuzziness exponent; scalar.
fn row_general(xs: &[f64], means: &[Vec<f64>], dims: usize, inv_r: f64, n: f64, j: usize) -> [f64; MAX_DIMS] {
    let dmax = dims.min(xs.len() - j);
    let mut out = [0.0f64; MAX_DIMS];
    for i in 0..j {
        let mut hi = f64::NEG_INFINITY;
        let mut lo = f64::INFINITY;
        for k in 0..dmax {
            let diff = xs[i + k] - xs[j + k];
            hi = hi.max(diff);
            lo = lo.min(diff);
            let delta = means[k][i] - means[k][j];
            let dist = (hi - delta).max(delta - lo);
            out[k] += (-(dist * inv_r).powf(n)).exp();
        }
    }
    out
}

/// `exp(-a)` for `a >= 0`, branch-free so it vectorizes. Accurate to a few
/// ulp; flushes to zero below `exp(-708)`.
#[inline(always)]
fn exp_neg(a: f64) -> f64 {
    const LOG2E: f64 = std::f64::consts::LOG2_E;
    const LN2_HI: f64 = 6.931_471_803_691_238_2e-1;
    const LN2_LO: f64 = 1.908_214_929_270_587_7e-10;
    const ROUND: f64 = 6_755_399_441_055_744.0; // 1.5 * 2^52
    let x = if a < 708.0 { -a } else { -708.0 };
    // k = round(x / ln 2), recovered from the low mantissa bits of t
    let t = x * LOG2E + ROUND;
    let k = t - ROUND;
    let r = (x - k * LN2_HI) - k * LN2_LO;
    // exp(r) on |r| <= ln2 / 2: Taylor to degree 13, Estrin's scheme
    const C: [f64; 14] = [
        1.0,
        1.0,
        0.5,
        1.0 / 6.0,
        1.0 / 24.0,
        1.0 / 120.0,
        1.0 / 720.0,
        1.0 / 5040.0,
        1.0 / 40320.0,
        1.0 / 362_880.0,
        1.0 / 3_628_800.0,
        1.0 / 39_916_800.0,
        1.0 / 479_001_600.0,
        1.0 / 6_227_020_800.0,
    ];
    let r2 = r * r;
    let r4 = r2 * r2;
    let r8 = r4 * r4;
    let a0 = C[0] + C[1] * r;
    let a1 = C[2] + C[3] * r;
    let a2 = C[4] + C[5] * r;
    let a3 = C[6] + C[7] * r;
    let a4 = C[8] + C[9] * r;
    let a5 = C[10] + C[11] * r;
    let a6 = C[12] + C[13] * r;
    let b0 = a0 + a1 * r2;
    let b1 = a2 + a3 * r2;
    let b2 = a4 + a5 * r2;
    let lo = b0 + b1 * r4;
    let hi = b2 + a6 * r4;
    let p = lo + hi * r8;
    let ki = t.to_bits().wrapping_sub(ROUND.to_bits()) as i64;
    // k lies in -1022..=0, so the biased exponent is in range
    let scale = f64::from_bits((ki.wrapping_add(1023) as u64) << 52);
    let v = p * scale;
    if a > 708.0 {
        0.0
    } else {
        v
    }
}

/// `means[d-1][i]` = mean of `xs[i..i+d]`, computed directly per window.
fn template_means(xs: &[f64], dims: usize) -> Vec<Vec<f64>> {
    let len = xs.len();
    (1..=dims)
        .map(|d| {
            (0..=len - d)
                .map(|i| xs[i..i + d].iter().sum::<f64>() / d as f64)
                .collect()
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod oracle {
    //! Direct transcription of the definition: explicit templates, explicit
    //! baseline removal, every ordered pair `i != j`.

    pub fn fuzzy_entropy_reference(xs: &[f64], m: usize, r: f64, n: f64) -> f64 {
        let l = xs.len() - m;
        let phi = |dim: usize| {
            let templates: Vec<Vec<f64>> = (0..l)
                .map(|i| {
                    let w = &xs[i..i + dim];
                    let mean = w.iter().sum::<f64>() / dim as f64;
                    w.iter().map(|v| v - mean).collect()
                })
                .collect();
            let mut total = 0.0;
            for i in 0..l {
                let mut row = 0.0;
                for j in 0..l {
                    if i == j {
                        continue;
                    }
                    let d = templates[i]
                        .iter()
                        .zip(&templates[j])
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    row += (-(d / r).powf(n)).exp();
                }
                total += row / (l - 1) as f64;
            }
            total / l as f64
        };
        phi(m).ln() - phi(m + 1).ln()
    }
}
