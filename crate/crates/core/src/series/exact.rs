//! Extended-precision evaluation of the expansion coefficients.
//!
//! The closed form for 𝒞_K is an alternating double sum whose terms exceed
//! the result by many orders of magnitude (about 10¹² at κt = 0.5 and far
//! more as ζ → 1), and weighted sums over K for large photon numbers cancel a
//! further e^{O(√N)}. Everything is therefore evaluated in MPFR at a working
//! precision chosen from a priori magnitude bounds, and only the final value
//! is rounded to f64.

use std::sync::OnceLock;

use rug::float::Round;
use rug::ops::MulAssignRound;
use rug::Float;

use crate::error::{Error, Result};

/// γ̃ values within this distance of 1, 3, 5, … are evaluated as the mean of
/// the two neighbours at ±`SINGULAR_OFFSET`. The representation has a
/// removable singularity there (2/ν or a vanishing Pochhammer factor).
const SINGULAR_GUARD: f64 = 2e-8;
const SINGULAR_OFFSET: f64 = 1e-7;

/// Exponents closer than this to zero go through expm1 instead of the
/// difference of powers.
const SMALL_EXPONENT: f64 = 1e-4;
const INV_CAP: f64 = 1e4;

const MIN_LEVEL: usize = 2;
const MAX_LEVEL: usize = 96;
const LIMB: u32 = 64;

/// γ̃ values at which the representation is evaluated (one, or two
/// straddling a singular order).
pub(crate) fn evaluation_points(gamma_tilde: f64) -> Vec<f64> {
    let n = ((gamma_tilde - 1.0) / 2.0).round().max(0.0);
    let singular = 1.0 + 2.0 * n;
    if (gamma_tilde - singular).abs() < SINGULAR_GUARD {
        vec![gamma_tilde - SINGULAR_OFFSET, gamma_tilde + SINGULAR_OFFSET]
    } else {
        vec![gamma_tilde]
    }
}

fn log2_abs(x: &Float) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let (m, e) = x.to_f64_exp();
    m.abs().log2() + e as f64
}

fn log_sum_exp(xs: impl IntoIterator<Item = f64>) -> f64 {
    let xs: Vec<f64> = xs.into_iter().collect();
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

/// f64 facts about the double sum at one γ̃ that do not need precision.
#[derive(Debug, Clone)]
struct Shape {
    gamma_tilde: f64,
    kmax: usize,
    m_star: Option<usize>,
    q_star: Option<usize>,
    /// ln of Σ_q |u_q v_{K−1−q}|(|1/a₁| + |1/a₂|) · 2 · 2/ν, per K (index K).
    ln_abs: Vec<f64>,
}

impl Shape {
    fn new(gamma_tilde: f64, kmax: usize) -> Self {
        let p = 0.5 * (1.0 + 3.0 * gamma_tilde);
        let nu = 0.5 * (gamma_tilde - 1.0).abs();
        let (pp, pm) = (p + nu, p - nu);
        let m_star = (1..=kmax).find(|&m| (pp - 2.0 * m as f64).abs() < SMALL_EXPONENT);
        let q_star = (0..kmax).find(|&q| (pm - 2.0 * q as f64 - 2.0).abs() < SMALL_EXPONENT);

        let mut lnu = vec![0.0; kmax + 1];
        let mut lnv = vec![0.0; kmax + 1];
        for i in 1..=kmax {
            let x = i as f64;
            lnu[i] = lnu[i - 1] - (x * (x + nu)).ln();
            lnv[i] = lnv[i - 1] - (x * (x - nu).abs()).ln();
        }
        let cap = |a: f64| (1.0 / a.abs()).min(INV_CAP);
        let mut ln_abs = vec![f64::NEG_INFINITY; kmax + 1];
        for k in 1..=kmax {
            let lse = log_sum_exp((0..k).map(|q| {
                let m = k - q;
                let a1 = pp - 2.0 * m as f64;
                let a2 = pm - 2.0 * q as f64 - 2.0;
                lnu[q] + lnv[k - 1 - q] + (cap(a1) + cap(a2)).ln()
            }));
            ln_abs[k] = lse + (4.0 / nu).ln();
        }
        Self { gamma_tilde, kmax, m_star, q_star, ln_abs }
    }
}

/// ζ-independent ingredients at a given precision.
struct Ingredients {
    prec: u32,
    pp: Float,
    pm: Float,
    two_over_nu: Float,
    u: Vec<Float>,
    v: Vec<Float>,
    /// 1/a₁ indexed by m = K − q (entry 0 unused, m* zeroed).
    ia1: Vec<Float>,
    /// 1/a₂ indexed by q (q* zeroed).
    ia2: Vec<Float>,
    a1_star: Option<Float>,
    a2_star: Option<Float>,
}

impl Ingredients {
    fn new(shape: &Shape, prec: u32) -> Self {
        let kmax = shape.kmax;
        let g = Float::with_val(prec, shape.gamma_tilde);
        let p = (Float::with_val(prec, &g * 3u32) + 1u32) / 2u32;
        let nu = Float::with_val(prec, &g - 1u32).abs() / 2u32;
        let pp = Float::with_val(prec, &p + &nu);
        let pm = Float::with_val(prec, &p - &nu);
        let two_over_nu = Float::with_val(prec, 2u32) / &nu;

        let mut u = Vec::with_capacity(kmax + 1);
        let mut v = Vec::with_capacity(kmax + 1);
        u.push(Float::with_val(prec, 1u32));
        v.push(Float::with_val(prec, 1u32));
        for i in 1..=kmax {
            let up = Float::with_val(prec, &nu + i as u32) * i as u32;
            u.push(Float::with_val(prec, &u[i - 1] / &up));
            let vp = (Float::with_val(prec, i as u32) - &nu) * i as u32;
            v.push(Float::with_val(prec, &v[i - 1] / &vp));
        }

        let zero = Float::new(prec);
        let mut ia1 = vec![zero.clone(); kmax + 1];
        let mut a1_star = None;
        for (m, slot) in ia1.iter_mut().enumerate().skip(1) {
            let a = Float::with_val(prec, &pp - 2 * m as u32);
            if Some(m) == shape.m_star {
                a1_star = Some(a);
            } else {
                *slot = Float::with_val(prec, 1u32) / a;
            }
        }
        let mut ia2 = vec![zero; kmax];
        let mut a2_star = None;
        for (q, slot) in ia2.iter_mut().enumerate() {
            let a = Float::with_val(prec, &pm - (2 * q as u32 + 2));
            if Some(q) == shape.q_star {
                a2_star = Some(a);
            } else {
                *slot = Float::with_val(prec, 1u32) / a;
            }
        }
        Self { prec, pp, pm, two_over_nu, u, v, ia1, ia2, a1_star, a2_star }
    }
}

/// Powers of ζ needed by both evaluators.
struct ZetaPowers {
    z2: Float,
    zpn: Float,
    zmn: Float,
    phi1: Float,
    phi2: Float,
}

fn phi(a: &Option<Float>, l: &Float, prec: u32) -> Float {
    match a {
        None => Float::new(prec),
        Some(a) if a.is_zero() => l.clone(),
        Some(a) => Float::with_val(prec, a * l).exp_m1() / a,
    }
}

impl ZetaPowers {
    fn new(ing: &Ingredients, zeta: f64) -> Self {
        let prec = ing.prec;
        let z = Float::with_val(prec, zeta);
        let l = Float::with_val(prec, z.ln_ref());
        let z2 = Float::with_val(prec, z.square_ref());
        let zpn = Float::with_val(prec, &ing.pp * &l).exp();
        let zmn = Float::with_val(prec, &ing.pm * &l).exp();
        let phi1 = phi(&ing.a1_star, &l, prec);
        let phi2 = phi(&ing.a2_star, &l, prec);
        Self { z2, zpn, zmn, phi1, phi2 }
    }
}

fn fma_dot<'a>(prec: u32, pairs: impl Iterator<Item = (&'a Float, &'a Float)>) -> Float {
    let mut acc = Float::new(prec);
    for (a, b) in pairs {
        acc += a * b;
    }
    acc
}

/// Per-K rows of the double sum, used for tabulating individual 𝒞_K.
struct ColumnRows {
    ing: Ingredients,
    /// alpha[K][q] = u_q v_{K−1−q}/a₁, beta[K][q] = u_q v_{K−1−q}/a₂.
    alpha: Vec<Vec<Float>>,
    beta: Vec<Vec<Float>>,
    /// Σ_q (beta − alpha) + the expm1 families folded in at evaluation.
    dsum: Vec<Float>,
    fam1: Vec<Float>,
    fam2: Vec<Float>,
}

impl ColumnRows {
    fn new(shape: &Shape, prec: u32) -> Self {
        let ing = Ingredients::new(shape, prec);
        let kmax = shape.kmax;
        let mut alpha = vec![Vec::new()];
        let mut beta = vec![Vec::new()];
        let mut dsum = vec![Float::new(prec)];
        let mut fam1 = vec![Float::new(prec)];
        let mut fam2 = vec![Float::new(prec)];
        for k in 1..=kmax {
            let mut ra = Vec::with_capacity(k);
            let mut rb = Vec::with_capacity(k);
            for q in 0..k {
                let uv = Float::with_val(prec, &ing.u[q] * &ing.v[k - 1 - q]);
                ra.push(Float::with_val(prec, &uv * &ing.ia1[k - q]));
                rb.push(Float::with_val(prec, &uv * &ing.ia2[q]));
            }
            let d = Float::with_val(prec, Float::sum(rb.iter())) - Float::with_val(prec, Float::sum(ra.iter()));
            dsum.push(d);
            fam1.push(match shape.m_star {
                Some(m) if k >= m => Float::with_val(prec, &ing.u[k - m] * &ing.v[m - 1]),
                _ => Float::new(prec),
            });
            fam2.push(match shape.q_star {
                Some(q) if k > q => Float::with_val(prec, &ing.u[q] * &ing.v[k - 1 - q]),
                _ => Float::new(prec),
            });
            alpha.push(ra);
            beta.push(rb);
        }
        Self { ing, alpha, beta, dsum, fam1, fam2 }
    }

    fn eval(&self, zeta: f64, ks: &[usize]) -> Vec<Float> {
        let prec = self.ing.prec;
        let zp = ZetaPowers::new(&self.ing, zeta);
        let kmax = ks.iter().copied().max().unwrap_or(0);
        let mut z2pow = Vec::with_capacity(kmax + 1);
        z2pow.push(Float::with_val(prec, 1u32));
        for i in 1..=kmax {
            z2pow.push(Float::with_val(prec, &z2pow[i - 1] * &zp.z2));
        }
        ks.iter()
            .map(|&k| {
                let sa = fma_dot(prec, self.alpha[k].iter().zip(z2pow[..k].iter()));
                let sb = fma_dot(prec, self.beta[k].iter().zip(z2pow[..k].iter().rev()));
                let mut tail = Float::with_val(prec, &self.dsum[k]);
                tail += Float::with_val(prec, &zp.phi1 * &self.fam1[k]);
                tail -= Float::with_val(prec, &zp.phi2 * &self.fam2[k]);
                tail *= &z2pow[k];
                let mut c = Float::with_val(prec, &zp.zpn * &sa);
                c -= Float::with_val(prec, &zp.zmn * &sb);
                c += tail;
                c *= &self.ing.two_over_nu;
                if k % 2 == 0 {
                    c = -c;
                }
                c
            })
            .collect()
    }
}

struct ColumnPart {
    shape: Shape,
    levels: Vec<OnceLock<ColumnRows>>,
}

impl ColumnPart {
    fn rows(&self, level: usize) -> &ColumnRows {
        self.levels[level].get_or_init(|| ColumnRows::new(&self.shape, level as u32 * LIMB))
    }

    /// Precision level needed for 𝒞_K given its computed magnitude.
    fn needed_level(&self, k: usize, value: &Float) -> usize {
        let bound = self.shape.ln_abs[k] / std::f64::consts::LN_2 + ((2 * k + 8) as f64).log2();
        let target = (log2_abs(value) - 56.0).max(-997.0);
        let bits = (bound - target).max(0.0);
        ((bits / LIMB as f64).ceil() as usize).max(MIN_LEVEL)
    }

    /// `hint[k]` is the starting precision level for 𝒞_k and is updated to
    /// the level that sufficed. Neighbouring ζ need nearly the same levels,
    /// so sweeping a grid in order with a shared hint avoids most retries.
    fn column(&self, zeta: f64, hint: &mut [usize]) -> Result<Vec<f64>> {
        let kmax = self.shape.kmax;
        let mut out = vec![0.0; kmax];
        let mut pending: Vec<(usize, usize)> = (1..=kmax).map(|k| (k, hint[k].max(MIN_LEVEL))).collect();
        while !pending.is_empty() {
            pending.sort_by_key(|&(_, l)| l);
            let level = pending[0].1;
            if level > MAX_LEVEL {
                return Err(Error::Convergence {
                    what: "expansion coefficient (precision cap)",
                    estimate: f64::INFINITY,
                });
            }
            let split = pending.partition_point(|&(_, l)| l == level);
            let ks: Vec<usize> = pending[..split].iter().map(|&(k, _)| k).collect();
            let values = self.rows(level).eval(zeta, &ks);
            let mut rest = pending.split_off(split);
            for (&k, c) in ks.iter().zip(&values) {
                if !c.is_finite() {
                    return Err(Error::Overflow { k, q: 0 });
                }
                let need = self.needed_level(k, c);
                if need <= level {
                    out[k - 1] = c.to_f64();
                    hint[k] = need;
                } else {
                    rest.push((k, need.max(level + 1)));
                }
            }
            pending = rest;
        }
        Ok(out)
    }
}

/// Evaluates 𝒞_1..𝒞_kmax at arbitrary ζ, sharing precomputed rows across
/// calls. Thread-safe.
pub(crate) struct ColumnEvaluator {
    parts: Vec<ColumnPart>,
}

impl ColumnEvaluator {
    pub(crate) fn new(gamma_tilde: f64, kmax: usize) -> Self {
        let parts = evaluation_points(gamma_tilde)
            .into_iter()
            .map(|g| ColumnPart {
                shape: Shape::new(g, kmax),
                levels: (0..=MAX_LEVEL).map(|_| OnceLock::new()).collect(),
            })
            .collect();
        Self { parts }
    }

    pub(crate) fn column(&self, zeta: f64) -> Result<Vec<f64>> {
        self.sweep(&[zeta]).map(|mut cols| cols.pop().unwrap())
    }

    /// Columns for a sequence of ζ, evaluated in order.
    pub(crate) fn sweep(&self, zetas: &[f64]) -> Result<Vec<Vec<f64>>> {
        let kmax = self.parts[0].shape.kmax;
        let mut hints = vec![vec![MIN_LEVEL; kmax + 1]; self.parts.len()];
        zetas.iter().map(|&z| self.column_hinted(z, &mut hints)).collect()
    }

    fn column_hinted(&self, zeta: f64, hints: &mut [Vec<usize>]) -> Result<Vec<f64>> {
        let kmax = self.parts[0].shape.kmax;
        if zeta == 1.0 {
            return Ok(vec![0.0; kmax]);
        }
        let mut acc = vec![0.0; kmax];
        for (part, hint) in self.parts.iter().zip(hints.iter_mut()) {
            for (a, c) in acc.iter_mut().zip(part.column(zeta, hint)?) {
                *a += c;
            }
        }
        let n = self.parts.len() as f64;
        Ok(acc.into_iter().map(|a| a / n).collect())
    }
}

/// Σ_K w_K 𝒞_K(ζ) for a fixed weight sequence, reorganized into a handful of
/// polynomials in ζ² so that each ζ costs O(kmax) extended-precision
/// operations.
pub(crate) struct WeightedKernel {
    parts: Vec<KernelPart>,
}

struct KernelPart {
    prec: u32,
    pp: Float,
    pm: Float,
    a1_star: Option<Float>,
    a2_star: Option<Float>,
    a: Vec<Float>,
    b: Vec<Float>,
    d: Vec<Float>,
    f1: Vec<Float>,
    f2: Vec<Float>,
    error: f64,
}

fn horner(coeffs: &[Float], x: &Float, prec: u32) -> Float {
    let mut acc = Float::new(prec);
    for c in coeffs.iter().rev() {
        acc.mul_assign_round(x, Round::Nearest);
        acc += c;
    }
    acc
}

/// Target absolute accuracy of the kernel before rounding to f64.
const KERNEL_TARGET_LOG2: f64 = -72.0;

impl WeightedKernel {
    /// `weights(gamma_tilde, prec)` returns w_1..w_kmax (index 0 ignored) for
    /// the problem at `gamma_tilde`; it is called once at low precision to
    /// size the working precision and once more at that precision.
    pub(crate) fn new<W>(gamma_tilde: f64, kmax: usize, weights: W) -> Result<Self>
    where
        W: Fn(f64, u32) -> Vec<Float>,
    {
        if kmax == 0 {
            return Err(Error::InvalidInput("kernel needs kmax >= 1".into()));
        }
        let parts = evaluation_points(gamma_tilde)
            .into_iter()
            .map(|g| KernelPart::new(g, kmax, &weights))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { parts })
    }

    pub(crate) fn eval(&self, zeta: f64) -> f64 {
        if zeta == 1.0 {
            return 0.0;
        }
        let n = self.parts.len() as f64;
        self.parts.iter().map(|p| p.eval(zeta)).sum::<f64>() / n
    }

    /// Absolute error bound of `eval` before the final rounding.
    pub(crate) fn error_bound(&self) -> f64 {
        self.parts.iter().map(|p| p.error).fold(0.0, f64::max)
    }
}

impl KernelPart {
    fn new<W: Fn(f64, u32) -> Vec<Float>>(gamma_tilde: f64, kmax: usize, weights: &W) -> Result<Self> {
        let shape = Shape::new(gamma_tilde, kmax);
        let w0 = weights(gamma_tilde, 64);
        if w0.len() != kmax + 1 {
            return Err(Error::InvalidInput("weight vector has the wrong length".into()));
        }
        let total_log2 = log_sum_exp(
            (1..=kmax).map(|k| log2_abs(&w0[k]) * std::f64::consts::LN_2 + shape.ln_abs[k]),
        ) / std::f64::consts::LN_2;
        if !total_log2.is_finite() && total_log2 > 0.0 {
            return Err(Error::Overflow { k: kmax, q: 0 });
        }
        let growth = ((kmax + 4) as f64 * 64.0).log2();
        let bits = (total_log2.max(0.0) + growth - KERNEL_TARGET_LOG2).ceil() as u32;
        let prec = bits.div_ceil(LIMB).max(MIN_LEVEL as u32) * LIMB;
        let error = (total_log2 + growth - prec as f64).exp2();

        let ing = Ingredients::new(&shape, prec);
        let w = weights(gamma_tilde, prec);
        let s: Vec<Float> = (0..=kmax)
            .map(|k| {
                let mut x = Float::with_val(prec, &w[k] * &ing.two_over_nu);
                if k % 2 == 0 {
                    x = -x;
                }
                x
            })
            .collect();
        // r1[m] = v_{m−1}/a₁(m), r2[q] = u_q/a₂(q)
        let mut r1 = vec![Float::new(prec)];
        for m in 1..=kmax {
            r1.push(Float::with_val(prec, &ing.v[m - 1] * &ing.ia1[m]));
        }
        let r2: Vec<Float> = (0..kmax).map(|q| Float::with_val(prec, &ing.u[q] * &ing.ia2[q])).collect();

        let a: Vec<Float> = (0..kmax)
            .map(|q| {
                let d = fma_dot(prec, s[q + 1..].iter().zip(r1[1..].iter()));
                d * &ing.u[q]
            })
            .collect();
        let b: Vec<Float> = (0..kmax)
            .map(|j| {
                let d = fma_dot(prec, s[j + 1..].iter().zip(r2.iter()));
                -(d * &ing.v[j])
            })
            .collect();
        let mut d = vec![Float::new(prec)];
        for k in 1..=kmax {
            let x = fma_dot(prec, r2[..k].iter().zip(ing.v[..k].iter().rev()));
            let y = fma_dot(prec, ing.u[..k].iter().zip(r1[1..=k].iter().rev()));
            d.push((x - y) * &s[k]);
        }
        let mut f1 = vec![Float::new(prec); kmax + 1];
        if let Some(m) = shape.m_star {
            for k in m..=kmax {
                f1[k] = Float::with_val(prec, &ing.u[k - m] * &ing.v[m - 1]) * &s[k];
            }
        }
        let mut f2 = vec![Float::new(prec); kmax + 1];
        if let Some(q) = shape.q_star {
            for k in q + 1..=kmax {
                f2[k] = -(Float::with_val(prec, &ing.u[q] * &ing.v[k - 1 - q]) * &s[k]);
            }
        }
        for (k, x) in a.iter().chain(&b).chain(&d).enumerate() {
            if !x.is_finite() {
                return Err(Error::Overflow { k: k % (kmax + 1), q: 0 });
            }
        }
        Ok(Self {
            prec,
            pp: ing.pp,
            pm: ing.pm,
            a1_star: ing.a1_star,
            a2_star: ing.a2_star,
            a,
            b,
            d,
            f1,
            f2,
            error,
        })
    }

    fn eval(&self, zeta: f64) -> f64 {
        let prec = self.prec;
        let z = Float::with_val(prec, zeta);
        let l = Float::with_val(prec, z.ln_ref());
        let z2 = Float::with_val(prec, z.square_ref());
        let zpn = Float::with_val(prec, &self.pp * &l).exp();
        let zmn = Float::with_val(prec, &self.pm * &l).exp();
        let mut total = horner(&self.a, &z2, prec) * zpn;
        total += horner(&self.b, &z2, prec) * zmn;
        total += horner(&self.d, &z2, prec);
        if self.a1_star.is_some() {
            total += horner(&self.f1, &z2, prec) * phi(&self.a1_star, &l, prec);
        }
        if self.a2_star.is_some() {
            total += horner(&self.f2, &z2, prec) * phi(&self.a2_star, &l, prec);
        }
        total.to_f64()
    }
}
