//! The generating potential `f`: a real trigonometric polynomial of period 1,
//! its critical points, local inversion coefficients, and the one-dimensional
//! integrals consumed by the connection-coefficient assembly.
//!
//! Near a nondegenerate critical point `q_ℓ` the substitution `u = -f'(q)` is
//! a local coordinate.  Two families of Taylor coefficients are attached to
//! each critical point:
//!
//! * `a_j`, defined by `-(q - q_ℓ) = Σ_j a_j [f'(q)]^{j+1}/(j+1)`, equivalently
//!   `-1/f''(q) = Σ_j a_j [f'(q)]^j`;
//! * `b_j`, defined by `-f''(q) = Σ_j b_j u^j`.
//!
//! Both are produced by power-series reversion of the Taylor series of `f'`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::quad::{integrate_real, integrate_segment};

/// Errors from potential analysis.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TrigPolyError {
    #[error("f'(0) = 0; shift the argument of the input, e.g. q → q + {suggested_shift}")]
    ShiftRequired { suggested_shift: f64 },
    #[error("degenerate critical point at q = {q}: |f''| = {curvature_abs} < 1e-8")]
    DegenerateCritical { q: f64, curvature_abs: f64 },
    #[error("critical point kinds do not alternate (a root of f' was probably missed)")]
    NonAlternating,
    #[error("derivative order {0} not supported")]
    UnsupportedOrder(usize),
    #[error("series and quadrature evaluations disagree by {mismatch:.3e}: ε outside the convergence disk")]
    ConvergenceRadius { mismatch: f64 },
    #[error("integration path passes too close to a zero of f' (|f'| = {min_abs:.3e})")]
    PathThroughZero { min_abs: f64 },
    #[error("unsupported case k = {k} for special integral kind {kind}")]
    UnsupportedCase { kind: &'static str, k: i32 },
    #[error("invalid input: {0}")]
    BadInput(String),
}

/// A real trigonometric polynomial `f(q) = c₀ + Σ_k (c_k cos 2πkq + s_k sin 2πkq)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrigPoly {
    /// Constant term `c₀`.
    #[serde(rename = "constant")]
    pub constant: f64,
    /// Cosine coefficients, 1-based: `cos[k-1]` multiplies `cos 2πkq`.
    #[serde(rename = "cos")]
    pub cos_coeffs: Vec<f64>,
    /// Sine coefficients, 1-based: `sin[k-1]` multiplies `sin 2πkq`.
    #[serde(rename = "sin")]
    pub sin_coeffs: Vec<f64>,
}

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

impl TrigPoly {
    pub fn new(constant: f64, cos_coeffs: Vec<f64>, sin_coeffs: Vec<f64>) -> Self {
        TrigPoly { constant, cos_coeffs, sin_coeffs }
    }

    /// Largest harmonic index with a nonzero coefficient.
    pub fn degree(&self) -> usize {
        let deg_of = |v: &[f64]| v.iter().rposition(|c| *c != 0.0).map_or(0, |i| i + 1);
        deg_of(&self.cos_coeffs).max(deg_of(&self.sin_coeffs))
    }

    /// `f^{(order)}(q)` at complex `q`, computed termwise from the Fourier
    /// data; exact up to rounding.
    pub fn eval(&self, q: Complex64, order: usize) -> Result<Complex64, TrigPolyError> {
        if order > 16 {
            return Err(TrigPolyError::UnsupportedOrder(order));
        }
        let mut acc = if order == 0 {
            Complex64::new(self.constant, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        };
        let kmax = self.cos_coeffs.len().max(self.sin_coeffs.len());
        for k in 1..=kmax {
            let ck = self.cos_coeffs.get(k - 1).copied().unwrap_or(0.0);
            let sk = self.sin_coeffs.get(k - 1).copied().unwrap_or(0.0);
            if ck == 0.0 && sk == 0.0 {
                continue;
            }
            let w = TWO_PI * k as f64;
            // d^n/dq^n cos(wq) = w^n cos(wq + nπ/2), likewise for sin.
            let phase = w * q + order as f64 * std::f64::consts::FRAC_PI_2;
            let wn = w.powi(order as i32);
            acc += wn * (ck * phase.cos() + sk * phase.sin());
        }
        Ok(acc)
    }

    /// Real-argument evaluation shortcut.
    pub fn eval_real(&self, q: f64, order: usize) -> f64 {
        self.eval(Complex64::new(q, 0.0), order)
            .expect("order within supported range")
            .re
    }

    /// Locates all critical points in one period, Newton-refined, classified,
    /// and cyclically rotated so the list starts with a minimum.
    pub fn critical_data(&self) -> Result<CriticalData, TrigPolyError> {
        const ROOT_TOL: f64 = 1e-13;
        let fp = |q: f64| self.eval_real(q, 1);
        let fpp = |q: f64| self.eval_real(q, 2);
        if fp(0.0).abs() < 1e-10 {
            return Err(TrigPolyError::ShiftRequired { suggested_shift: 0.125 });
        }
        let grid = (64 * self.degree().max(1)).max(256);
        let mut roots: Vec<f64> = Vec::new();
        for i in 0..grid {
            let x0 = i as f64 / grid as f64;
            let x1 = (i + 1) as f64 / grid as f64;
            let (y0, y1) = (fp(x0), fp(x1));
            if y0 == 0.0 {
                roots.push(x0);
                continue;
            }
            if y0 * y1 < 0.0 {
                // Bisection bracket + Newton polish.
                let (mut lo, mut hi) = (x0, x1);
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if fp(lo) * fp(mid) <= 0.0 {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
                let mut q = 0.5 * (lo + hi);
                for _ in 0..8 {
                    let d = fpp(q);
                    if d == 0.0 {
                        break;
                    }
                    q -= fp(q) / d;
                }
                if fp(q).abs() < ROOT_TOL {
                    roots.push(q.rem_euclid(1.0));
                }
            }
        }
        roots.sort_by(f64::total_cmp);
        roots.dedup_by(|a, b| (*a - *b).abs() < 1e-9);
        let mut points: Vec<CriticalPoint> = Vec::new();
        for (i, &q) in roots.iter().enumerate() {
            let curv = fpp(q);
            if curv.abs() < 1e-8 {
                return Err(TrigPolyError::DegenerateCritical { q, curvature_abs: curv.abs() });
            }
            let kind = if curv > 0.0 { CriticalKind::Minimum } else { CriticalKind::Maximum };
            let (a, b) = self.inversion_coeffs_at(q, DEFAULT_INVERSION_ORDER)?;
            points.push(CriticalPoint {
                index: i + 1,
                q,
                value: self.eval_real(q, 0),
                curvature: curv,
                kind,
                a_coeffs: a,
                b_coeffs: b,
            });
        }
        if points.len() < 2 || points.len() % 2 != 0 {
            return Err(TrigPolyError::NonAlternating);
        }
        for w in points.windows(2) {
            if w[0].kind == w[1].kind {
                return Err(TrigPolyError::NonAlternating);
            }
        }
        // Rotate so the cycle starts with a minimum; a wrapped point keeps its
        // position shifted by one full period so the q remain increasing.
        if points[0].kind == CriticalKind::Maximum {
            let mut first = points.remove(0);
            first.q += 1.0;
            points.push(first);
        }
        for (i, p) in points.iter_mut().enumerate() {
            p.index = i + 1;
        }
        let n = points.len() / 2;
        Ok(CriticalData { points, n, source: DataSource::Derived })
    }

    /// Inversion coefficients `(a_0..a_J, b_0..b_J)` at the critical point `q_ℓ`.
    pub fn inversion_coeffs_at(
        &self,
        q_l: f64,
        j_max: usize,
    ) -> Result<(Vec<f64>, Vec<f64>), TrigPolyError> {
        let nn = j_max + 2;
        let curv = self.eval_real(q_l, 2);
        if curv.abs() < 1e-8 {
            return Err(TrigPolyError::DegenerateCritical { q: q_l, curvature_abs: curv.abs() });
        }
        // Taylor coefficients of u(x) = -f'(q_ℓ + x) and of -f''(q_ℓ + x).
        let mut u = vec![0.0; nn + 1];
        let mut neg_fpp = vec![0.0; nn + 1];
        let mut fact = 1.0;
        for p in 0..=nn {
            if p > 0 {
                fact *= p as f64;
            }
            u[p] = -self.eval_real(q_l, p + 1) / fact;
            neg_fpp[p] = -self.eval_real(q_l, p + 2) / fact;
        }
        u[0] = 0.0; // f'(q_ℓ) = 0 by assumption
        let x_of_u = pseries::revert(&u, nn)?;
        // b_j: -f''(q(u)) as a series in u.
        let b_full = pseries::compose(&neg_fpp, &x_of_u, nn);
        // a_j: -1/f''(q(u)) = Σ a_j (-u)^j.
        let inv = pseries::recip(&b_full.iter().map(|v| -v).collect::<Vec<_>>(), nn)?;
        let neg_inv: Vec<f64> = inv.iter().map(|v| -v).collect();
        let a: Vec<f64> = (0..=j_max)
            .map(|j| neg_inv[j] * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        let b: Vec<f64> = b_full[..=j_max].to_vec();
        Ok((a, b))
    }

    /// The sum `Σ_{j≥1} a_j (-1)^j A^j / j` (`which = First`) or
    /// `Σ_{j≥3} a_j (-1)^j A^{j-2} / (j-2)` (`which = Second`), with
    /// `A = -f'(q_ℓ - ε)`, evaluated by the quadrature identity
    ///
    /// ```text
    /// Σ_{j≥1} a_j (-1)^j A^j / j = ∫_{q_ℓ}^{q_ℓ-ε} ( -1/f' - a₀ f''/f' ) dq,
    /// ```
    ///
    /// (and the analogous three-subtraction identity for the second kind).
    /// The result is cross-checked against the truncated series; disagreement
    /// beyond 1e-9 reports `ConvergenceRadius`.
    pub fn sum_a_series(
        &self,
        cp: &CriticalPoint,
        eps: Complex64,
        which: SumKind,
    ) -> Result<Complex64, TrigPolyError> {
        let q_l = Complex64::new(cp.q, 0.0);
        let a = &cp.a_coeffs;
        if a.len() < 3 {
            return Err(TrigPolyError::BadInput("need a_0..a_2 for the subtracted integrand".into()));
        }
        let (a0, a1, a2) = (a[0], a[1], a[2]);
        let integrand = |q: Complex64| -> Complex64 {
            let fp = self.eval(q, 1).expect("order ok");
            let fpp = self.eval(q, 2).expect("order ok");
            match which {
                SumKind::First => -1.0 / fp - a0 * fpp / fp,
                SumKind::Second => {
                    -1.0 / (fp * fp * fp)
                        - a0 * fpp / (fp * fp * fp)
                        - a1 * fpp / (fp * fp)
                        - a2 * fpp / fp
                }
            }
        };
        // The integrand has a removable singularity at q_ℓ built from large
        // cancellations; evaluate the innermost stretch by the (rapidly
        // convergent) series instead and quadrature only the outer part.
        let truncated_series = |eps_eff: Complex64| -> Complex64 {
            let big_a = -self.eval(q_l - eps_eff, 1).expect("order ok");
            let mut s = Complex64::new(0.0, 0.0);
            for (j, aj) in a.iter().enumerate().skip(if which == SumKind::First { 1 } else { 3 }) {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                s += match which {
                    SumKind::First => sign * aj * big_a.powi(j as i32) / j as f64,
                    SumKind::Second => sign * aj * big_a.powi(j as i32 - 2) / (j as f64 - 2.0),
                };
            }
            s
        };
        let q_mid = q_l - eps / 8.0;
        let inner = truncated_series(eps / 8.0);
        let outer = integrate_segment(integrand, q_mid, q_l - eps, 1e-12);
        let val = inner + outer;
        // Cross-check against the series evaluated over the full displacement.
        let series = truncated_series(eps);
        let big_a = -self.eval(q_l - eps, 1).expect("order ok");
        let mismatch = (val - series).norm();
        // The truncated series itself has an O(A^{J+1}) tail; only flag when
        // the disagreement is far beyond that tail's natural size.
        let tail = big_a.norm().powi(a.len() as i32) * 10.0 + 1e-9;
        if mismatch > tail.max(1e-9 * (1.0 + val.norm())) {
            return Err(TrigPolyError::ConvergenceRadius { mismatch });
        }
        Ok(val)
    }

    /// `∫ dq/f'` from `q_a` to `q_b` along a three-segment path raised to
    /// height `iδ`, avoiding the real-axis zeros of `f'`.  For a closed loop
    /// pass `q_b = q_a + 1`.
    pub fn path_integral_inv_fprime(
        &self,
        q_a: Complex64,
        q_b: Complex64,
        delta: f64,
    ) -> Result<Complex64, TrigPolyError> {
        let top = delta.max(q_a.im + delta).max(q_b.im + delta);
        let c1 = Complex64::new(q_a.re, top);
        let c2 = Complex64::new(q_b.re, top);
        // Safety check: |f'| must stay above a floor on the whole path.
        let mut min_abs = f64::INFINITY;
        for seg in [(q_a, c1), (c1, c2), (c2, q_b)] {
            for t in 0..=256 {
                let z = seg.0 + (seg.1 - seg.0) * (t as f64 / 256.0);
                min_abs = min_abs.min(self.eval(z, 1).expect("order ok").norm());
            }
        }
        if min_abs < 1e-6 {
            return Err(TrigPolyError::PathThroughZero { min_abs });
        }
        let g = |z: Complex64| 1.0 / self.eval(z, 1).expect("order ok");
        let mut total = Complex64::new(0.0, 0.0);
        for seg in [(q_a, c1), (c1, c2), (c2, q_b)] {
            if (seg.1 - seg.0).norm() > 0.0 {
                total += integrate_segment(g, seg.0, seg.1, 1e-13);
            }
        }
        Ok(total)
    }
}

/// Which of the two subtracted `a_j` sums to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SumKind {
    /// `Σ_{j≥1} a_j (-1)^j A^j / j`.
    First,
    /// `Σ_{j≥3} a_j (-1)^j A^{j-2} / (j-2)`.
    Second,
}

/// Default truncation order of the inversion coefficient lists.
pub const DEFAULT_INVERSION_ORDER: usize = 12;

/// Minimum or maximum of the potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CriticalKind {
    Minimum,
    Maximum,
}

/// A nondegenerate critical point of `f` together with its local inversion data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalPoint {
    /// 1-based position in the cyclic order (odd = minimum, even = maximum).
    pub index: usize,
    /// Location in one period (the last point may carry `+1` after rotation).
    pub q: f64,
    /// `f(q_j)`.
    pub value: f64,
    /// `f''(q_j)` (signed).
    pub curvature: f64,
    pub kind: CriticalKind,
    /// `a_0..a_J` (empty beyond `a_0` in abstract mode).
    pub a_coeffs: Vec<f64>,
    /// `b_0..b_J`.
    pub b_coeffs: Vec<f64>,
}

impl CriticalPoint {
    /// `|f''(q_j)|`.
    pub fn curv_abs(&self) -> f64 {
        self.curvature.abs()
    }
}

/// Where the critical data came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataSource {
    /// Computed from a concrete trigonometric polynomial.
    Derived,
    /// Supplied directly (critical values and curvatures only); consumers
    /// requiring ε-dependent constants or global integrals must degrade
    /// explicitly instead of silently using zeros.
    Abstract,
}

/// The global critical-point configuration: `2n` points alternating
/// minimum/maximum, starting with a minimum.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalData {
    pub points: Vec<CriticalPoint>,
    /// Number of minima.
    pub n: usize,
    pub source: DataSource,
}

/// JSON shape for abstract critical data.
#[derive(Clone, Debug, Serialize, Deserialize)]
struct AbstractPointJson {
    q: f64,
    value: f64,
    curvature: f64,
    #[serde(default)]
    a: Vec<f64>,
    #[serde(default)]
    b: Vec<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct AbstractDataJson {
    points: Vec<AbstractPointJson>,
}

impl CriticalData {
    /// The critical point `q_j`, 1-based and cyclic: `point(2n+1) = point(1)`.
    pub fn point(&self, j: usize) -> &CriticalPoint {
        let m = self.points.len();
        &self.points[(j - 1) % m]
    }

    /// Validates alternation and ordering.
    pub fn validate(&self) -> Result<(), TrigPolyError> {
        if self.points.len() != 2 * self.n || self.n == 0 {
            return Err(TrigPolyError::NonAlternating);
        }
        for (i, p) in self.points.iter().enumerate() {
            let want = if i % 2 == 0 { CriticalKind::Minimum } else { CriticalKind::Maximum };
            if p.kind != want {
                return Err(TrigPolyError::NonAlternating);
            }
        }
        for w in self.points.windows(2) {
            if w[0].q >= w[1].q {
                return Err(TrigPolyError::BadInput("critical points must be increasing".into()));
            }
        }
        Ok(())
    }

    /// Parses abstract critical data from JSON
    /// `{"points":[{"q":..,"value":..,"curvature":..,"a":[..],"b":[..]},...]}`.
    pub fn from_abstract_json(json: &str) -> Result<Self, TrigPolyError> {
        let parsed: AbstractDataJson =
            serde_json::from_str(json).map_err(|e| TrigPolyError::BadInput(e.to_string()))?;
        let mut points = Vec::new();
        for (i, p) in parsed.points.iter().enumerate() {
            if p.curvature == 0.0 {
                return Err(TrigPolyError::DegenerateCritical { q: p.q, curvature_abs: 0.0 });
            }
            let kind = if p.curvature > 0.0 { CriticalKind::Minimum } else { CriticalKind::Maximum };
            let a = if p.a.is_empty() { vec![-1.0 / p.curvature] } else { p.a.clone() };
            let b = if p.b.is_empty() { vec![-p.curvature] } else { p.b.clone() };
            points.push(CriticalPoint {
                index: i + 1,
                q: p.q,
                value: p.value,
                curvature: p.curvature,
                kind,
                a_coeffs: a,
                b_coeffs: b,
            });
        }
        let n = points.len() / 2;
        let data = CriticalData { points, n, source: DataSource::Abstract };
        data.validate()?;
        Ok(data)
    }

    /// Largest `|2(f(q_j) - f(q_{j+1}))|` over the cycle — the action-gap
    /// scale used to size truncation windows.
    pub fn max_action_gap(&self) -> f64 {
        let m = self.points.len();
        (0..m)
            .map(|i| {
                let v0 = self.points[i].value;
                let v1 = self.points[(i + 1) % m].value;
                2.0 * (v0 - v1).abs()
            })
            .fold(0.0, f64::max)
    }
}

// ───────────────────────────────────────────────────────────────────────────
// Truncated real power series helpers (dense, index = power).
// ───────────────────────────────────────────────────────────────────────────
mod pseries {
    use super::TrigPolyError;

    /// Product truncated at order `n`.
    pub fn mul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n + 1];
        for (i, ai) in a.iter().enumerate().take(n + 1) {
            if *ai == 0.0 {
                continue;
            }
            for (j, bj) in b.iter().enumerate().take(n + 1 - i) {
                out[i + j] += ai * bj;
            }
        }
        out
    }

    /// Reciprocal of a series with nonzero constant term.
    pub fn recip(a: &[f64], n: usize) -> Result<Vec<f64>, TrigPolyError> {
        if a.is_empty() || a[0] == 0.0 {
            return Err(TrigPolyError::BadInput("series reciprocal needs a nonzero constant".into()));
        }
        let mut out = vec![0.0; n + 1];
        out[0] = 1.0 / a[0];
        for k in 1..=n {
            let mut s = 0.0;
            for j in 1..=k {
                s += a.get(j).copied().unwrap_or(0.0) * out[k - j];
            }
            out[k] = -s / a[0];
        }
        Ok(out)
    }

    /// Composition `a(b(x))` truncated at order `n`; requires `b[0] = 0`.
    pub fn compose(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
        debug_assert!(b.first().map_or(true, |v| *v == 0.0));
        let mut out = vec![0.0; n + 1];
        let mut bpow = vec![0.0; n + 1];
        bpow[0] = 1.0;
        for (i, ai) in a.iter().enumerate().take(n + 1) {
            if i > 0 {
                bpow = mul(&bpow, b, n);
            }
            if *ai != 0.0 {
                for (k, bp) in bpow.iter().enumerate() {
                    out[k] += ai * bp;
                }
            }
        }
        out
    }

    /// Reversion: given `u(x) = Σ_{p≥1} u_p x^p` with `u_1 ≠ 0`, returns the
    /// series `x(u)` with `x(u(x)) = x`, by fixed-point iteration
    /// `x ← (u - Σ_{p≥2} u_p x^p)/u_1` gaining one order per pass.
    pub fn revert(u: &[f64], n: usize) -> Result<Vec<f64>, TrigPolyError> {
        if u.len() < 2 || u[1] == 0.0 {
            return Err(TrigPolyError::BadInput("series reversion needs a nonzero linear term".into()));
        }
        if u[0] != 0.0 {
            return Err(TrigPolyError::BadInput("series reversion needs zero constant term".into()));
        }
        let u1 = u[1];
        let tail: Vec<f64> = u.iter().copied().skip(2).collect(); // u_2, u_3, ...
        let mut x = vec![0.0; n + 1];
        x[1] = 1.0 / u1;
        for _ in 0..n {
            // Σ_{p≥2} u_p x(u)^p
            let mut corr = vec![0.0; n + 1];
            let mut xp = mul(&x, &x, n); // x²
            for (idx, up) in tail.iter().enumerate() {
                if idx > 0 {
                    xp = mul(&xp, &x, n);
                }
                if *up != 0.0 {
                    for (k, v) in xp.iter().enumerate() {
                        corr[k] += up * v;
                    }
                }
                if idx + 2 >= n {
                    break;
                }
            }
            let mut next = vec![0.0; n + 1];
            next[1] = 1.0 / u1;
            for k in 0..=n {
                next[k] -= corr[k] / u1;
            }
            x = next;
        }
        Ok(x)
    }
}

// ───────────────────────────────────────────────────────────────────────────
// Special one-dimensional integrals (hyperbolic substitutions and
// square-root reductions) with their small-E expansions.
// ───────────────────────────────────────────────────────────────────────────

/// A small-`E` expansion of one of the tabulated auxiliary integrals:
/// `value(E) = Σ coeff · E^pow + arccosh_mult · arccosh(A/√E)`, with an error
/// of order `o(E^order)`.
#[derive(Clone, Debug)]
pub struct SpecialExpansion {
    pub kind: &'static str,
    pub a: f64,
    /// Pairs `(power of E, coefficient)`, with the `A`-dependence folded in.
    pub terms: Vec<(f64, f64)>,
    /// Multiplier of `arccosh(A/√E)`.
    pub arccosh_mult: f64,
    /// The expansion error is `o(E^order)`.
    pub order: f64,
    k_param: i32,
}

impl SpecialExpansion {
    /// Value of the expansion at `E`.
    pub fn value(&self, e: f64) -> f64 {
        if self.kind == "arccosh_asym" {
            // Ln 2A - ½ Ln E + (power terms)
            let mut v = (2.0 * self.a).ln() - 0.5 * e.ln();
            for (p, c) in &self.terms {
                v += c * e.powf(*p);
            }
            return v;
        }
        let mut v = 0.0;
        for (p, c) in &self.terms {
            v += c * e.powf(*p);
        }
        if self.arccosh_mult != 0.0 {
            v += self.arccosh_mult * (self.a / e.sqrt()).acosh();
        }
        v
    }

    /// Direct numerical value of the underlying integral at `E` (for tests).
    pub fn quadrature(&self, e: f64) -> f64 {
        let t_max = (self.a / e.sqrt()).acosh();
        match self.kind {
            "arccosh_asym" => t_max,
            "cosh_power" => {
                let k = self.k_param;
                -integrate_real(|t| t.cosh().powi(k), 0.0, t_max, 1e-13)
            }
            "sinh2_cosh_power" => {
                let k = self.k_param;
                -integrate_real(|t| t.sinh().powi(2) * t.cosh().powi(k), 0.0, t_max, 1e-13)
            }
            other => panic!("no quadrature for kind {other}"),
        }
    }

    fn with_k(mut self, k: i32) -> Self {
        self.k_param = k;
        self
    }
}

// Hidden parameter storage for the quadrature closure.
impl SpecialExpansion {
    fn base(kind: &'static str, a: f64) -> Self {
        SpecialExpansion { kind, a, terms: Vec::new(), arccosh_mult: 0.0, order: 0.0, k_param: 0 }
    }
}

impl SpecialExpansion {
    /// `arccosh(A/√E) = Ln 2A - ½ Ln E - E/(4A²) + o(E)`.
    ///
    /// Encoded with `arccosh_mult = 0` and the logarithmic part evaluated
    /// through `terms` is impossible, so this kind stores the closed form in
    /// [`SpecialExpansion::value`] via the dedicated branch below.
    pub fn arccosh_asym(a: f64) -> Self {
        let mut s = Self::base("arccosh_asym", a);
        s.terms = vec![(1.0, -1.0 / (4.0 * a * a))];
        s.order = 1.0;
        s
    }

    /// `∫_{arccosh(A/√E)}^0 cosh^k t dt`.
    pub fn cosh_power(k: i32, a: f64) -> Result<Self, TrigPolyError> {
        let mut s = Self::base("cosh_power", a);
        match k {
            0 => {
                s.arccosh_mult = -1.0;
                s.order = f64::INFINITY;
            }
            2 => {
                s.terms = vec![
                    (-1.0, -a * a / 2.0),
                    (0.0, 0.25),
                    (1.0, 1.0 / (16.0 * a * a)),
                ];
                s.arccosh_mult = -0.5;
                s.order = 1.0;
            }
            4 => {
                s.terms = vec![
                    (-2.0, -a.powi(4) / 4.0),
                    (-1.0, -a * a / 4.0),
                    (0.0, 7.0 / 32.0),
                ];
                s.arccosh_mult = -3.0 / 8.0;
                s.order = 0.0;
            }
            k if k == 1 || k == 3 || k >= 5 => {
                let kf = k as f64;
                s.terms = vec![
                    (-kf / 2.0, -a.powi(k) / kf),
                    (1.0 - kf / 2.0, -a.powi(k - 2) / (2.0 * (kf - 2.0))),
                    (2.0 - kf / 2.0, -3.0 * a.powi(k - 4) / (8.0 * (kf - 4.0))),
                ];
                s.order = 2.0 - kf / 2.0;
            }
            _ => return Err(TrigPolyError::UnsupportedCase { kind: "cosh_power", k }),
        }
        Ok(s.with_k(k))
    }

    /// `∫_{arccosh(A/√E)}^0 sinh²t cosh^k t dt`.
    pub fn sinh2_cosh_power(k: i32, a: f64) -> Result<Self, TrigPolyError> {
        let mut s = Self::base("sinh2_cosh_power", a);
        match k {
            0 => {
                s.terms = vec![
                    (-1.0, -a * a / 2.0),
                    (0.0, 0.25),
                    (1.0, 1.0 / (16.0 * a * a)),
                ];
                s.arccosh_mult = 0.5;
                s.order = 1.0;
            }
            2 => {
                s.terms = vec![
                    (-2.0, -a.powi(4) / 4.0),
                    (-1.0, a * a / 4.0),
                    (0.0, -1.0 / 32.0),
                ];
                s.arccosh_mult = 1.0 / 8.0;
                s.order = 0.0;
            }
            k if k >= 1 => {
                let kf = k as f64;
                s.terms = vec![
                    (-1.0 - kf / 2.0, -a.powi(k + 2) / (kf + 2.0)),
                    (-kf / 2.0, a.powi(k) / (2.0 * kf)),
                    (1.0 - kf / 2.0, a.powi(k - 2) / (8.0 * (kf - 2.0))),
                ];
                s.order = 1.0 - kf / 2.0;
            }
            _ => return Err(TrigPolyError::UnsupportedCase { kind: "sinh2_cosh_power", k }),
        }
        Ok(s.with_k(k))
    }
}

/// Antiderivative `F(u)` of `u^k/(u²-E)^{p/2}` for `p ∈ {1,3,5}` on `u > √E`,
/// via the integration-by-parts reductions.
pub fn sqrt_reduction_antiderivative(p: u32, k: u32, e: f64, u: f64) -> Result<f64, TrigPolyError> {
    let s = (u * u - e).sqrt();
    match p {
        1 => Ok(match k {
            0 => (u + s).ln(),
            1 => s,
            _ => {
                // ∫u^k/√ = u^{k-1}√/k + (k-1)E/k ∫u^{k-2}/√
                let prev = sqrt_reduction_antiderivative(1, k - 2, e, u)?;
                u.powi(k as i32 - 1) * s / k as f64 + (k - 1) as f64 * e / k as f64 * prev
            }
        }),
        3 => Ok(match k {
            0 => -u / (e * s),
            1 => -1.0 / s,
            _ => {
                let prev = sqrt_reduction_antiderivative(1, k - 2, e, u)?;
                -u.powi(k as i32 - 1) / s + (k - 1) as f64 * prev
            }
        }),
        5 => Ok(match k {
            0 => u / (e * e * s) - u.powi(3) / (3.0 * e * e * s.powi(3)),
            1 => -1.0 / (3.0 * s.powi(3)),
            _ => {
                let prev = sqrt_reduction_antiderivative(3, k - 2, e, u)?;
                -u.powi(k as i32 - 1) / (3.0 * s.powi(3)) + (k - 1) as f64 / 3.0 * prev
            }
        }),
        _ => Err(TrigPolyError::UnsupportedCase { kind: "sqrt_reduction", k: p as i32 }),
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    /// The double-well sample potential
    /// `f(q) = (1/2π)[sin 2π(q+1/8) + cos 4π(q+1/8)]`.
    pub fn sample_f() -> TrigPoly {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let c = 1.0 / (2.0 * std::f64::consts::PI);
        // sin 2π(q+1/8) = (√2/2)(sin 2πq + cos 2πq); cos 4π(q+1/8) = -sin 4πq.
        TrigPoly::new(0.0, vec![c * s, 0.0], vec![c * s, -c])
    }

    #[test]
    fn eval_known_values() {
        let f = sample_f();
        let pi = std::f64::consts::PI;
        assert_relative_eq!(f.eval_real(0.125, 2), 6.0 * pi, max_relative = 1e-12);
        assert_relative_eq!(f.eval_real(0.625, 0), -1.0 / pi, max_relative = 1e-12);
        assert!(f.eval(Complex64::new(0.3, 0.0), 0).unwrap().im.abs() < 1e-14);
    }

    #[test]
    fn critical_points_of_sample() {
        let f = sample_f();
        let data = f.critical_data().unwrap();
        let pi = std::f64::consts::PI;
        assert_eq!(data.n, 2);
        let q = |j: usize| data.point(j).q;
        let shift = (0.25f64).asin() / (2.0 * pi);
        assert_relative_eq!(q(1), 0.125, epsilon = 1e-12);
        assert_relative_eq!(q(2), 0.375 - shift, epsilon = 1e-12);
        assert_relative_eq!(q(3), 0.625, epsilon = 1e-12);
        assert_relative_eq!(q(4), 0.875 + shift, epsilon = 1e-12);
        let v = |j: usize| data.point(j).value;
        assert_relative_eq!(v(1), 0.0, epsilon = 1e-12);
        assert_relative_eq!(v(2), 9.0 / (16.0 * pi), epsilon = 1e-12);
        assert_relative_eq!(v(3), -1.0 / pi, epsilon = 1e-12);
        assert_relative_eq!(v(4), 9.0 / (16.0 * pi), epsilon = 1e-12);
        let c = |j: usize| data.point(j).curvature;
        assert_relative_eq!(c(1), 6.0 * pi, epsilon = 1e-10);
        assert_relative_eq!(c(2), -7.5 * pi, epsilon = 1e-10);
        assert_relative_eq!(c(3), 10.0 * pi, epsilon = 1e-10);
        assert_relative_eq!(c(4), -7.5 * pi, epsilon = 1e-10);
        data.validate().unwrap();
    }

    #[test]
    fn inversion_coeffs_closed_forms() {
        let f = sample_f();
        let data = f.critical_data().unwrap();
        for p in &data.points {
            let d2 = p.curvature;
            let d3 = f.eval_real(p.q, 3);
            let d4 = f.eval_real(p.q, 4);
            assert_relative_eq!(p.a_coeffs[0], -1.0 / d2, max_relative = 1e-10);
            assert_relative_eq!(p.a_coeffs[1], d3 / d2.powi(3), max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(
                p.a_coeffs[2],
                d4 / (2.0 * d2.powi(4)) - 3.0 * d3 * d3 / (2.0 * d2.powi(5)),
                max_relative = 1e-9,
                epsilon = 1e-12
            );
            assert_relative_eq!(p.b_coeffs[0], -d2, max_relative = 1e-10);
            assert_relative_eq!(p.b_coeffs[1], d3 / d2, max_relative = 1e-9, epsilon = 1e-12);
            assert_relative_eq!(
                p.b_coeffs[2],
                (d3 * d3 - d2 * d4) / (2.0 * d2.powi(3)),
                max_relative = 1e-9,
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn a_series_reconstructs_displacement() {
        let f = sample_f();
        let data = f.critical_data().unwrap();
        let p1 = data.point(1);
        // At J = 12 the series tail is ~A^{J+2}; ε = 0.02 keeps it below 1e-10.
        let eps = 0.02;
        let q = p1.q - eps;
        let fp = f.eval_real(q, 1);
        // -(q - q1) = Σ a_j f'^{j+1}/(j+1)
        let mut rhs = 0.0;
        for (j, aj) in p1.a_coeffs.iter().enumerate() {
            rhs += aj * fp.powi(j as i32 + 1) / (j as f64 + 1.0);
        }
        assert_relative_eq!(-(q - p1.q), rhs, epsilon = 1e-10);
    }

    #[test]
    fn b_series_reconstructs_curvature() {
        let f = sample_f();
        let data = f.critical_data().unwrap();
        for p in &data.points {
            let delta = 0.01;
            let q = p.q + delta;
            let u = -f.eval_real(q, 1);
            let mut rhs = 0.0;
            for (j, bj) in p.b_coeffs.iter().enumerate() {
                rhs += bj * u.powi(j as i32);
            }
            assert_relative_eq!(-f.eval_real(q, 2), rhs, max_relative = 1e-9);
        }
    }

    #[test]
    fn random_potentials_reversion_property() {
        // Deterministic pseudo-random degree-3 potentials.
        let mut seed = 0x9e3779b97f4a7c15u64;
        let mut next = move || {
            seed ^= seed << 13;
            seed ^= seed >> 7;
            seed ^= seed << 17;
            (seed >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for _ in 0..10 {
            let f = TrigPoly::new(
                0.0,
                vec![next(), 0.3 * next(), 0.1 * next()],
                vec![next(), 0.3 * next(), 0.1 * next()],
            );
            let data = match f.critical_data() {
                Ok(d) => d,
                Err(_) => continue, // degenerate sample; skip
            };
            // dense-grid sign-change count oracle
            let grid = 64 * f.degree().max(1);
            let mut signs = 0;
            for i in 0..grid {
                let y0 = f.eval_real(i as f64 / grid as f64, 1);
                let y1 = f.eval_real((i + 1) as f64 / grid as f64, 1);
                if y0 * y1 < 0.0 {
                    signs += 1;
                }
            }
            assert_eq!(signs, data.points.len());
            for p in &data.points {
                assert!(f.eval_real(p.q.rem_euclid(1.0), 1).abs() < 1e-12);
                // nearest-neighbor distance bound for the test displacement
                let dmin = data
                    .points
                    .iter()
                    .filter(|o| o.index != p.index)
                    .map(|o| {
                        let d = (o.q - p.q).rem_euclid(1.0);
                        d.min(1.0 - d)
                    })
                    .fold(1.0, f64::min);
                // Start at 0.2·dmin and halve until the estimated series tail
                // |a_J|·A^{J+1} says we are well inside the convergence disk
                // of the reverted series (random samples can have a much
                // smaller disk than the neighbor distance suggests).
                let mut delta = 0.2 * dmin;
                let j_last = p.a_coeffs.len() - 1;
                let mut tail = f64::INFINITY;
                for _ in 0..12 {
                    let a = f.eval_real(p.q + delta, 1).abs();
                    tail = p.a_coeffs[j_last].abs() * a.powi(j_last as i32 + 1);
                    if tail < 1e-11 {
                        break;
                    }
                    delta *= 0.5;
                }
                let q = p.q + delta;
                let fp = f.eval_real(q, 1);
                let mut rhs = 0.0;
                for (j, aj) in p.a_coeffs.iter().enumerate() {
                    rhs += aj * fp.powi(j as i32 + 1) / (j as f64 + 1.0);
                }
                let tol = 1e-9_f64.max(10.0 * tail);
                assert_relative_eq!(-delta, rhs, epsilon = tol, max_relative = 1e-6);
            }
        }
    }

    #[test]
    fn shift_required_detection() {
        let c = 1.0 / (2.0 * std::f64::consts::PI);
        let f = TrigPoly::new(0.0, vec![c], vec![]);
        assert!(matches!(f.critical_data(), Err(TrigPolyError::ShiftRequired { .. })));
        // shifted by 1/8: f(q+1/8) = c·cos(2πq + π/4)
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let g = TrigPoly::new(0.0, vec![c * s], vec![-c * s]);
        let data = g.critical_data().unwrap();
        assert_eq!(data.points.len(), 2);
    }

    #[test]
    fn sum_a_series_matches_quadrature() {
        let f = sample_f();
        let data = f.critical_data().unwrap();
        let p1 = data.point(1);
        let eps = Complex64::new(0.02, 0.0);
        // The op itself errors if the two evaluations disagree beyond the tail.
        let v1 = f.sum_a_series(p1, eps, SumKind::First).unwrap();
        let v2 = f.sum_a_series(p1, eps, SumKind::Second).unwrap();
        // ε → 0 limit: both vanish
        let tiny = Complex64::new(1e-6, 0.0);
        assert!(f.sum_a_series(p1, tiny, SumKind::First).unwrap().norm() < 1e-4);
        assert!(v1.norm() > 0.0 && v2.norm() > 0.0);
    }

    #[test]
    fn path_integral_offset_invariance() {
        let f = sample_f();
        let a = Complex64::new(0.1, 0.0);
        let b = Complex64::new(1.1, 0.0);
        let i1 = f.path_integral_inv_fprime(a, b, 0.10).unwrap();
        let i2 = f.path_integral_inv_fprime(a, b, 0.15).unwrap();
        assert!((i1 - i2).norm() < 1e-9 * (1.0 + i1.norm()), "{i1} vs {i2}");
        // empty path
        let z = f.path_integral_inv_fprime(a, a, 0.1).unwrap();
        assert!(z.norm() < 1e-12);
    }

    #[test]
    fn arccosh_expansion_error_order() {
        let a = 1.0;
        let s = SpecialExpansion::arccosh_asym(a);
        for e in [1e-3, 1e-4] {
            let exact = (a / f64::sqrt(e)).acosh();
            let approx = (2.0 * a).ln() - 0.5 * e.ln() + s.terms[0].1 * e;
            let err = (exact - approx).abs();
            assert!(err < e * e * 10.0, "e={e} err={err}");
        }
    }

    /// The expansion error is o(E^order): the normalized error
    /// err(E)/E^order must decay over a decade of E.
    fn assert_order_decay(s: &SpecialExpansion, label: &str) {
        if s.order.is_infinite() {
            let err = (s.value(1e-3) - s.quadrature(1e-3)).abs();
            assert!(err < 1e-10, "{label}: exact case err={err}");
            return;
        }
        // Error beyond the float-noise floor of the (possibly E^{-k/2}-large)
        // integral, normalized by the claimed remainder order.
        let r = |e: f64| {
            let q = s.quadrature(e);
            let err = ((s.value(e) - q).abs() - 1e-12 * q.abs()).max(0.0);
            err / e.powf(s.order)
        };
        let (r1, r2) = (r(1e-3), r(1e-4));
        assert!(r2 < 0.9 * r1 + 1e-11, "{label}: normalized error not decaying: {r1} -> {r2}");
    }

    #[test]
    fn cosh_power_expansions_vs_quadrature() {
        let a = 0.8;
        for k in [0, 1, 2, 3, 4, 5] {
            let s = SpecialExpansion::cosh_power(k, a).unwrap();
            assert_order_decay(&s, &format!("cosh_power k={k}"));
        }
    }

    #[test]
    fn sinh2_cosh_power_expansions_vs_quadrature() {
        let a = 0.8;
        for k in [0, 1, 2, 3, 5] {
            let s = SpecialExpansion::sinh2_cosh_power(k, a).unwrap();
            assert_order_decay(&s, &format!("sinh2_cosh_power k={k}"));
        }
    }

    #[test]
    fn sqrt_reduction_vs_quadrature() {
        use crate::quad::integrate_real;
        let e = 0.09;
        for p in [1u32, 3, 5] {
            for k in [0u32, 1, 2, 3, 4] {
                let g = |u: f64| u.powi(k as i32) / (u * u - e).powf(p as f64 / 2.0);
                let (u0, u1) = (0.7, 1.9);
                let direct = integrate_real(g, u0, u1, 1e-12);
                let by_parts = sqrt_reduction_antiderivative(p, k, e, u1).unwrap()
                    - sqrt_reduction_antiderivative(p, k, e, u0).unwrap();
                assert_relative_eq!(direct, by_parts, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn abstract_json_parse() {
        let json = r#"{"points":[
            {"q":0.1,"value":0.0,"curvature":6.0},
            {"q":0.35,"value":0.25,"curvature":-7.0},
            {"q":0.6,"value":0.15,"curvature":9.0},
            {"q":0.85,"value":0.2,"curvature":-8.0}
        ]}"#;
        let data = CriticalData::from_abstract_json(json).unwrap();
        assert_eq!(data.n, 2);
        assert_eq!(data.source, DataSource::Abstract);
        assert_relative_eq!(data.point(1).a_coeffs[0], -1.0 / 6.0);
        assert_relative_eq!(data.point(2).b_coeffs[0], 7.0);
        // cyclic access
        assert_eq!(data.point(5).index, 1);
    }

    #[test]
    fn trigpoly_json_round_trip() {
        let f = sample_f();
        let json = serde_json::to_string(&f).unwrap();
        assert!(json.contains("\"constant\""));
        let g: TrigPoly = serde_json::from_str(&json).unwrap();
        assert_relative_eq!(f.eval_real(0.3, 0), g.eval_real(0.3, 0));
    }
}
