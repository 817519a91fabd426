//! Quantization-condition ingredients: the per-critical-point connection
//! factors `μ_j`, the per-interval factors `τ_j`, the loop factor `κ`, the
//! connection coefficients `c'_j` (minima) and `c_j` (maxima), and the
//! interval monodromies `M_j`, `M'_j`, all as [`TransSeries`] in the graded
//! scales `e^{c/h}`, `E_r`, `h^{1/2}`, `ln h`.
//!
//! Two independent routes to `τ_j` are provided: the closed-form product
//! display and the assembly `τ_odd = c'_j c_{j+1} M_j⁻¹ M'_j`,
//! `τ_even = c_j c'_{j+1} M_j (M'_j)⁻¹`; their agreement on every retained
//! monomial is a strong end-to-end check of branch and sign conventions.
//!
//! The module also exposes the scalar monodromy-exponent machinery used for
//! analyticity diagnostics: `ω_γ`, the σ-contour pieces `ΔS`, `Δy₀`, `Δy₁`,
//! and the reduced-coefficient pieces `Θ_{-1}`, `Θ_0`, `Θ_1`, whose
//! finiteness as `E → 0` (cancellation of `ln E` and `1/E` between the
//! contour integrals and the Stirling factors) is verified numerically in the
//! test suite.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::transseries::{Key, TransSeries, TransseriesError, TruncationPolicy};
use crate::trigpoly::{
    CriticalData, CriticalKind, CriticalPoint, DataSource, SumKind, TrigPoly, TrigPolyError,
};

/// Euler–Mascheroni constant `γ̲`.
pub const EULER_GAMMA: f64 = 0.57721566490153286061;

/// Default imaginary offset of the first/second-sheet integration paths.
pub const DEFAULT_PATH_DELTA: f64 = 0.05;

type C64 = Complex64;

/// Errors from ingredient assembly.
#[derive(Debug, Clone, thiserror::Error)]
pub enum IngredientsError {
    /// The requested quantity needs ε-dependent data that abstract critical
    /// data (critical values and curvatures only) cannot provide.
    #[error("abstract critical data lacks {what}; supply a concrete potential")]
    AbstractDataInsufficient { what: &'static str },
    /// `|E|` outside the disk where the split-turning-point expansions apply.
    #[error("|E| = {e_abs:.3e} too large for the expansion disk A² = {a_sq:.3e}")]
    ExpansionDomain { e_abs: f64, a_sq: f64 },
    #[error(transparent)]
    Potential(#[from] TrigPolyError),
    #[error(transparent)]
    Series(#[from] TransseriesError),
}

// ---------------------------------------------------------------------------
// γ-contour monodromy exponents
// ---------------------------------------------------------------------------

/// The action `ω_γ(E) = e₁E + e₂E² + o(E²)` around a split double turning
/// point, together with the constant `Ω⁰ = -2πi`.
#[derive(Clone, Copy, Debug)]
pub struct MonodromyExponent {
    /// Coefficient of `E`: `-π/f''(q_k)`.
    pub e1: f64,
    /// Coefficient of `E²`: `π a₂(q_k)/4`.
    pub e2: f64,
}

impl MonodromyExponent {
    /// `Ω⁰_γ = -2πi`, independent of the critical point.
    pub const OMEGA0: C64 = C64::new(0.0, -2.0 * PI);

    /// `ω_γ(E)` through second order.
    pub fn omega(&self, e: f64) -> f64 {
        self.e1 * e + self.e2 * e * e
    }

    /// Complex version of [`Self::omega`].
    pub fn omega_c(&self, e: C64) -> C64 {
        self.e1 * e + self.e2 * e * e
    }

    /// `s_γ(E, h) = ω_γ(E)/(2πh) - 1 + O(h)` (from `2πi s_γ = iω/h + Ω⁰ + ...`).
    pub fn s_gamma(&self, e: f64, h: f64) -> f64 {
        self.omega(e) / (2.0 * PI * h) - 1.0
    }

    /// `s_γ'` via `s_γ + s_γ' = -1`.
    pub fn s_gamma_prime(&self, e: f64, h: f64) -> f64 {
        -1.0 - self.s_gamma(e, h)
    }
}

/// The γ-contour exponent data at a critical point.
pub fn gamma_exponent(cp: &CriticalPoint) -> Result<MonodromyExponent, IngredientsError> {
    let a2 = *cp
        .a_coeffs
        .get(2)
        .ok_or(IngredientsError::AbstractDataInsufficient { what: "the a₂ Taylor coefficient" })?;
    Ok(MonodromyExponent { e1: -PI / cp.curvature, e2: PI * a2 / 4.0 })
}

/// Quadrature oracle for `ω_γ(E)`: integrates `√(E - f'²)` between the two
/// turning points that the double point `q_k` splits into, oriented so the
/// result matches `-πE/f'' + ...`.
pub fn omega_quadrature(
    f: &TrigPoly,
    cp: &CriticalPoint,
    e: f64,
) -> Result<f64, IngredientsError> {
    let w = cp.curvature;
    let half_width = (e / w.abs()).sqrt();
    // Turning points solve f'(q)² = E on either side of q_k.
    let solve = |mut q: f64| -> f64 {
        for _ in 0..60 {
            let g = f.eval_real(q, 1).powi(2) - e;
            let dg = 2.0 * f.eval_real(q, 1) * f.eval_real(q, 2);
            let step = g / dg;
            q -= step;
            if step.abs() < 1e-15 {
                break;
            }
        }
        q
    };
    let ql = solve(cp.q - 1.2 * half_width);
    let qr = solve(cp.q + 1.2 * half_width);
    let n = 400usize;
    // Integrand vanishes like a square root at both ends; substitute
    // q = mid + half·sin θ to remove the endpoint singularity.
    let mid = 0.5 * (ql + qr);
    let half = 0.5 * (qr - ql);
    let mut acc = 0.0;
    for i in 0..n {
        let th = -0.5 * PI + PI * (i as f64 + 0.5) / n as f64;
        let q = mid + half * th.sin();
        let val = (e - f.eval_real(q, 1).powi(2)).max(0.0).sqrt();
        acc += val * half * th.cos() * PI / n as f64;
    }
    Ok(-w.signum() * 2.0 * acc)
}

// ---------------------------------------------------------------------------
// σ-contour pieces and the reduced-coefficient Θ functions
// ---------------------------------------------------------------------------

/// Values of the three σ-contour pieces at a given small `E`.
#[derive(Clone, Copy, Debug)]
pub struct SigmaValues {
    pub delta_s: C64,
    pub delta_y0: C64,
    pub delta_y1: C64,
}

/// Scalar snapshot at one critical point (at matching offset ε) from which
/// the σ-pieces and the reduced coefficients `Θ_j(E)` are evaluated.
#[derive(Clone, Debug)]
pub struct ReducedConnectionData {
    pub kind: CriticalKind,
    /// `f''(q_k)` (signed).
    pub w: f64,
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
    pub b0: f64,
    pub b2: f64,
    /// `A = -f'(q_k - ε)` (positive at minima, negative at maxima).
    pub a_big: f64,
    /// `f'(q_k - ε)`.
    pub fp_eps: f64,
    /// `f''(q_k - ε)`.
    pub fpp_eps: f64,
    /// `2[f(q_k) - f(q_k - ε)]`.
    pub two_df: f64,
    /// `Σ_{j≥1} a_j (-1)^j A^j / j`.
    pub sum1: f64,
    /// `Σ_{j≥3} a_j (-1)^j A^{j-2} / (j-2)`.
    pub sum2: f64,
    pub gamma: MonodromyExponent,
    pub epsilon: f64,
}

/// Builds the per-point snapshot consumed by [`sigma_exponent`] and the Θ
/// evaluators (derived mode only).
pub fn theta(
    f: &TrigPoly,
    cp: &CriticalPoint,
    epsilon: f64,
) -> Result<ReducedConnectionData, IngredientsError> {
    if cp.a_coeffs.len() < 3 || cp.b_coeffs.len() < 3 {
        return Err(IngredientsError::AbstractDataInsufficient {
            what: "the a/b Taylor coefficients beyond leading order",
        });
    }
    let qe = cp.q - epsilon;
    let eps_c = C64::new(epsilon, 0.0);
    Ok(ReducedConnectionData {
        kind: cp.kind,
        w: cp.curvature,
        a0: cp.a_coeffs[0],
        a1: cp.a_coeffs[1],
        a2: cp.a_coeffs[2],
        b0: cp.b_coeffs[0],
        b2: cp.b_coeffs[2],
        a_big: -f.eval_real(qe, 1),
        fp_eps: f.eval_real(qe, 1),
        fpp_eps: f.eval_real(qe, 2),
        two_df: 2.0 * (cp.value - f.eval_real(qe, 0)),
        sum1: f.sum_a_series(cp, eps_c, SumKind::First)?.re,
        sum2: f.sum_a_series(cp, eps_c, SumKind::Second)?.re,
        gamma: gamma_exponent(cp)?,
        epsilon,
    })
}

/// Evaluates `(ΔS, Δy₀, Δy₁)` at small complex `E`.
pub fn sigma_exponent(
    f: &TrigPoly,
    cp: &CriticalPoint,
    epsilon: f64,
    e: C64,
) -> Result<SigmaValues, IngredientsError> {
    theta(f, cp, epsilon)?.sigma(e)
}

impl ReducedConnectionData {
    fn check_domain(&self, e: C64) -> Result<(), IngredientsError> {
        let a_sq = self.a_big * self.a_big;
        if e.norm() > 1e-2 * a_sq {
            return Err(IngredientsError::ExpansionDomain { e_abs: e.norm(), a_sq });
        }
        Ok(())
    }

    /// `(ΔS, Δy₀, Δy₁)` at `E = e`.
    pub fn sigma(&self, e: C64) -> Result<SigmaValues, IngredientsError> {
        self.check_domain(e)?;
        let a = self.a_big;
        let (a0, a1, a2) = (self.a0, self.a1, self.a2);
        let e2 = e * e;
        match self.kind {
            CriticalKind::Minimum => {
                let ln2a = (2.0 * a / e.sqrt()).ln();
                // The a₂ group enters with an overall minus: that sign follows
                // from the closed antiderivative of u²√(u²-E) and is the one
                // for which the E²ln E terms cancel in Θ₋₁.
                let delta_s = self.two_df
                    + a0 * (-e / 2.0 - e * ln2a + e2 / (8.0 * a * a))
                    - a2 * (a * a * e / 2.0 - e2 / 16.0 + e2 / 4.0 * ln2a)
                    - e * (self.sum1 - a2 * a * a / 2.0)
                    - e2 / 4.0 * (self.sum2 + a1 / a);
                let delta_y0 =
                    (C64::new(a, 0.0) / e.sqrt()).acosh() - C64::new(0.0, PI / 2.0);
                let delta_y1 = -self.b2 / 12.0 + self.b0 / (6.0 * e)
                    - self.fpp_eps / (2.0 * self.fp_eps * self.fp_eps);
                Ok(SigmaValues { delta_s, delta_y0, delta_y1 })
            }
            CriticalKind::Maximum => {
                // Here A < 0 and f'(q_k - ε) = -A > 0.
                let ln2a = (-2.0 * a / e.sqrt()).ln();
                // As in the minimum case, the a₂ group's sign is fixed by the
                // E²ln E cancellation in Θ₋₁ (here it comes out positive).
                let delta_s = -self.two_df
                    + a0 * (e / 2.0 + e2 / (8.0 * a * a) + e * (ln2a - e / (2.0 * a * a)))
                    + a2 * (a * a * e / 2.0 - e2 / 16.0 + e2 / 4.0 * ln2a)
                    - e / 2.0 * (self.sum1 - a2 * a * a / 2.0)
                    - e2 / 8.0 * (self.sum2 + a1 / a);
                let delta_y0 =
                    -(C64::new(-a, 0.0) / e.sqrt()).acosh() - C64::new(0.0, PI / 2.0);
                let delta_y1 = self.b2 / 12.0 - self.b0 / (6.0 * e)
                    + self.fpp_eps / (2.0 * self.fp_eps * self.fp_eps);
                Ok(SigmaValues { delta_s, delta_y0, delta_y1 })
            }
        }
    }

    /// `Θ_{-1}(E)`: the `1/h` piece of the reduced connection coefficient.
    pub fn theta_minus1(&self, e: C64) -> Result<C64, IngredientsError> {
        let sv = self.sigma(e)?;
        let w2p = self.gamma.omega_c(e) / (2.0 * PI);
        Ok(match self.kind {
            CriticalKind::Minimum => sv.delta_s + w2p - w2p * (-w2p).ln(),
            CriticalKind::Maximum => sv.delta_s - w2p + w2p * w2p.ln(),
        })
    }

    /// `Θ_0(E)`: the `h⁰` piece.
    pub fn theta_0(&self, e: C64) -> Result<C64, IngredientsError> {
        let sv = self.sigma(e)?;
        let w2p = self.gamma.omega_c(e) / (2.0 * PI);
        Ok(match self.kind {
            CriticalKind::Minimum => sv.delta_y0 + 0.5 * (-w2p).ln(),
            CriticalKind::Maximum => sv.delta_y0 - 0.5 * w2p.ln(),
        })
    }

    /// `Θ_1(E)`: the `h¹` piece; the `1/E` poles of `Δy₁` and `π/(6ω_γ)`
    /// cancel, leaving a finite limit.
    pub fn theta_1(&self, e: C64) -> Result<C64, IngredientsError> {
        let sv = self.sigma(e)?;
        let om = self.gamma.omega_c(e);
        Ok(match self.kind {
            CriticalKind::Minimum => sv.delta_y1 - PI / (6.0 * om),
            CriticalKind::Maximum => sv.delta_y1 + PI / (6.0 * om),
        })
    }
}

/// Quadrature oracle for the minimum-case `ΔS(E)`:
/// `2 ∫_{q₁-ε}^{q₁⁻} [-√(f'² - E)] dq`, with `q₁⁻` the left turning point.
pub fn delta_s_quadrature(
    f: &TrigPoly,
    cp: &CriticalPoint,
    epsilon: f64,
    e: f64,
) -> Result<f64, IngredientsError> {
    assert!(matches!(cp.kind, CriticalKind::Minimum));
    let sqrt_e = e.sqrt();
    // Left turning point: -f'(q) = √E, i.e. f'(q) = -√E, between q₁-ε and q₁.
    let mut q = cp.q - sqrt_e / cp.curvature;
    for _ in 0..60 {
        let g = f.eval_real(q, 1) + sqrt_e;
        let step = g / f.eval_real(q, 2);
        q -= step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    // √(f'²-E) vanishes like a square root at the turning point; substitute
    // q = q_t - s² to regularize.
    let span = (q - (cp.q - epsilon)).sqrt();
    let n = 20000usize;
    let mut acc = 0.0;
    for i in 0..n {
        let s = span * (i as f64 + 0.5) / n as f64;
        let qq = q - s * s;
        let val = (f.eval_real(qq, 1).powi(2) - e).max(0.0).sqrt();
        acc += val * 2.0 * s * span / n as f64;
    }
    Ok(-2.0 * acc)
}

// ---------------------------------------------------------------------------
// Interval exponents and the ingredient set
// ---------------------------------------------------------------------------

/// The displayed exponent data of `M_j` and `M'_j` for one interval
/// `(q_j - ε, q_{j+1} - ε)`, evaluated at `E = hE_r`.
#[derive(Clone, Debug)]
pub struct IntervalExponents {
    /// `f(q_{j+1}-ε) - f(q_j-ε)`; the `E=0` value of `𝕄^{(-1)}_j`
    /// (`𝕄̃^{(-1)}_j = -𝕄^{(-1)}_j`).
    pub df: f64,
    /// `∫ dq/f'` along the first-sheet path (raised by `+iδ`); the
    /// second-sheet path gives the conjugate.
    pub path_first: C64,
    /// `E=0` value of `𝕄⁰_j`: `(-1)^{j-1}πi + ln|f'(q_j-ε)/f'(q_{j+1}-ε)|`.
    pub m0_const: C64,
    /// `E`-linear coefficient in `𝕄⁰_j`.
    pub m0_e: f64,
    /// `E=0` value of `𝕄¹_j` (endpoint `f''/(2f'²)` difference).
    pub m1: f64,
    /// `E`-linear coefficient in `𝕄̃⁰_j` (`𝕄̃⁰_j(0) = 0`, `𝕄̃¹_j = O(E)`).
    pub mt0_e: f64,
}

impl IntervalExponents {
    /// `𝕄^{(-1)}_j(E)` including the `-(E/2)∫dq/f'` correction.
    pub fn m_minus1(&self, e: f64) -> C64 {
        C64::new(self.df, 0.0) - 0.5 * e * self.path_first
    }

    /// `𝕄̃^{(-1)}_j(E)` on the second sheet.
    pub fn m_tilde_minus1(&self, e: f64) -> C64 {
        -C64::new(self.df, 0.0) + 0.5 * e * self.path_first.conj()
    }
}

/// Per-critical-point scalar inputs of the connection coefficients.
#[derive(Clone, Debug)]
struct PointScalars {
    kind: CriticalKind,
    /// `f''(q_j)` signed and absolute.
    w: f64,
    aw: f64,
    a2: f64,
    b2: f64,
    /// `L_j`: `ln(2(-f'(q_j-ε))/√(2f''))` at minima,
    /// `ln(2f'(q_j-ε)/√(-2f''))` at maxima.
    big_l: f64,
    /// `Σ_{j≥1} a_j [f'(q-ε)]^j / j`.
    sval: f64,
    /// `2[f(q_j) - f(q_j-ε)]` at minima, `2[f(q_j-ε) - f(q_j)]` at maxima.
    rate: f64,
    /// The `h¹` constant of `c'_j` / `c_j`.
    hconst: f64,
}

/// The full ingredient collection for one potential: `2n` each of `μ_j`,
/// `τ_j`, `M_j`, `M'_j`, the connection coefficients at minima (`c'`) and
/// maxima (`c`), and the loop factor `1 + E_rκ = Π M'_j`.
///
/// Vectors are indexed by `j-1` for the 1-based cyclic point index `j`
/// (odd `j` = minima).  In abstract mode every ε-dependent scalar is set to
/// its model value (displacement factors to unity), which keeps the two τ
/// routes algebraically consistent but carries no quantitative meaning;
/// [`Self::require_concrete`] guards consumers that need real constants.
#[derive(Clone, Debug)]
pub struct IngredientSet {
    pub source: DataSource,
    pub n: usize,
    pub epsilon: f64,
    pub path_delta: f64,
    pub policy: TruncationPolicy,
    pub mu: Vec<TransSeries>,
    pub tau: Vec<TransSeries>,
    pub cprime: Vec<Option<TransSeries>>,
    pub c: Vec<Option<TransSeries>>,
    pub m_big: Vec<TransSeries>,
    pub m_prime: Vec<TransSeries>,
    pub exponents: Vec<IntervalExponents>,
    /// `1 + E_rκ = M'_1 ⋯ M'_{2n}`.
    pub one_plus_er_kappa: TransSeries,
    /// `κ` itself.
    pub kappa: TransSeries,
}

/// `μ_j` from the displayed minimum/maximum formulas.  The `hE_r` correction
/// needs `a₂` and is omitted when the point is abstract.
pub fn mu(cp: &CriticalPoint) -> TransSeries {
    let aw = cp.curv_abs();
    let lead = C64::new(0.0, PI / aw);
    let mut s = TransSeries::zero();
    s.insert_add(Key::new(0.0, 1, 0, 0), lead);
    s.insert_add(Key::new(0.0, 2, 0, 0), lead * C64::new(0.0, -PI / (2.0 * aw)));
    if let Some(&a2) = cp.a_coeffs.get(2) {
        let sign = match cp.kind {
            CriticalKind::Minimum => -1.0,
            CriticalKind::Maximum => 1.0,
        };
        s.insert_add(Key::new(0.0, 2, 2, 0), lead * (sign * a2 * aw / 4.0));
    }
    s
}

/// Builds a small exponent series from `(c, m, k2, l, coeff)` tuples and
/// exponentiates it.
fn exp_of(
    terms: &[(f64, i32, i32, i32, C64)],
    policy: &TruncationPolicy,
) -> Result<TransSeries, TransseriesError> {
    let mut s = TransSeries::zero();
    for &(c, m, k2, l, v) in terms {
        if v.norm() > 0.0 {
            s.insert_add(Key::new(c, m, k2, l), v);
        }
    }
    if s.is_zero() {
        return Ok(TransSeries::one());
    }
    s.exp_small(policy)
}

impl IngredientSet {
    /// Full derived-mode construction from a concrete potential.
    pub fn derive(
        f: &TrigPoly,
        data: &CriticalData,
        epsilon: f64,
        policy: &TruncationPolicy,
    ) -> Result<Self, IngredientsError> {
        Self::build(Some(f), data, epsilon, DEFAULT_PATH_DELTA, policy)
    }

    /// Abstract-mode construction from critical values and curvatures only.
    pub fn abstract_model(
        data: &CriticalData,
        policy: &TruncationPolicy,
    ) -> Result<Self, IngredientsError> {
        Self::build(None, data, 0.0, DEFAULT_PATH_DELTA, policy)
    }

    fn build(
        f: Option<&TrigPoly>,
        data: &CriticalData,
        epsilon: f64,
        path_delta: f64,
        policy: &TruncationPolicy,
    ) -> Result<Self, IngredientsError> {
        data.validate()?;
        let two_n = data.points.len();
        let source = if f.is_some() { DataSource::Derived } else { DataSource::Abstract };

        // Per-point scalars.
        let mut ps = Vec::with_capacity(two_n);
        for p in &data.points {
            let scal = match f {
                Some(f) => {
                    let qe = p.q - epsilon;
                    let fp_eps = f.eval_real(qe, 1);
                    let fv_eps = f.eval_real(qe, 0);
                    let (a2, b2) = (p.a_coeffs[2], p.b_coeffs[2]);
                    let w = p.curvature;
                    let fpp_eps = f.eval_real(qe, 2);
                    let (big_l, rate, hconst) = match p.kind {
                        CriticalKind::Minimum => (
                            (2.0 * (-fp_eps) / (2.0 * w).sqrt()).ln(),
                            2.0 * (p.value - fv_eps),
                            -b2 / 12.0 - fpp_eps / (2.0 * fp_eps * fp_eps) + a2 * w * w / 24.0,
                        ),
                        CriticalKind::Maximum => (
                            (2.0 * fp_eps / (-2.0 * w).sqrt()).ln(),
                            2.0 * (fv_eps - p.value),
                            b2 / 12.0 + fpp_eps / (2.0 * fp_eps * fp_eps) - a2 * w * w / 24.0,
                        ),
                    };
                    PointScalars {
                        kind: p.kind,
                        w,
                        aw: w.abs(),
                        a2,
                        b2,
                        big_l,
                        sval: f.sum_a_series(p, C64::new(epsilon, 0.0), SumKind::First)?.re,
                        rate,
                        hconst,
                    }
                }
                // Abstract model: displacement magnitudes |f'(q-ε)| → 1,
                // curvature factors kept, ε-dependent constants → 0.
                None => PointScalars {
                    kind: p.kind,
                    w: p.curvature,
                    aw: p.curv_abs(),
                    a2: 0.0,
                    b2: 0.0,
                    big_l: (2.0 / (2.0 * p.curv_abs()).sqrt()).ln(),
                    sval: 0.0,
                    rate: 0.0,
                    hconst: 0.0,
                },
            };
            ps.push(scal);
        }

        // Per-interval exponents.
        let mut exponents = Vec::with_capacity(two_n);
        for j in 1..=two_n {
            let p = data.point(j);
            let np = data.point(j + 1);
            let q_next = if j == two_n { np.q + 1.0 } else { np.q };
            let ex = match f {
                Some(f) => {
                    let (qa, qb) = (p.q - epsilon, q_next - epsilon);
                    let (fpa, fpb) = (f.eval_real(qa, 1), f.eval_real(qb, 1));
                    IntervalExponents {
                        df: f.eval_real(qb, 0) - f.eval_real(qa, 0),
                        path_first: f.path_integral_inv_fprime(
                            C64::new(qa, 0.0),
                            C64::new(qb, 0.0),
                            path_delta,
                        )?,
                        m0_const: C64::new(
                            (fpa / fpb).abs().ln(),
                            if j % 2 == 1 { PI } else { -PI },
                        ),
                        m0_e: 3.0 / 8.0 * (1.0 / (fpb * fpb) - 1.0 / (fpa * fpa)),
                        m1: f.eval_real(qb, 2) / (2.0 * fpb * fpb)
                            - f.eval_real(qa, 2) / (2.0 * fpa * fpa),
                        mt0_e: 1.0 / 8.0 * (1.0 / (fpb * fpb) - 1.0 / (fpa * fpa)),
                    }
                }
                None => IntervalExponents {
                    df: np.value - p.value,
                    path_first: C64::new(0.0, 0.0),
                    m0_const: C64::new(0.0, if j % 2 == 1 { PI } else { -PI }),
                    m0_e: 0.0,
                    m1: 0.0,
                    mt0_e: 0.0,
                },
            };
            exponents.push(ex);
        }

        // μ_j.
        let mu_v: Vec<TransSeries> = data.points.iter().map(mu).collect();

        // c'_j at minima, c_j at maxima.
        let minus_i_sqrt_2pi = C64::new(0.0, -1.0) * (2.0 * PI).sqrt();
        let mut cprime: Vec<Option<TransSeries>> = vec![None; two_n];
        let mut c_v: Vec<Option<TransSeries>> = vec![None; two_n];
        for (idx, s) in ps.iter().enumerate() {
            match s.kind {
                CriticalKind::Minimum => {
                    let coeff = minus_i_sqrt_2pi * s.big_l.exp();
                    let head = TransSeries::monomial(Key::new(s.rate, 0, -1, 0), coeff);
                    let mut gam = TransSeries::one();
                    gam.insert_add(
                        Key::new(0.0, 1, 0, 0),
                        C64::new(EULER_GAMMA / (2.0 * s.w), 0.0),
                    );
                    let exp = exp_of(
                        &[
                            (0.0, 1, 0, 0, C64::new(s.big_l / s.w - s.sval, 0.0)),
                            (0.0, 1, 0, 1, C64::new(-1.0 / (2.0 * s.w), 0.0)),
                            (0.0, 0, 2, 0, C64::new(s.hconst, 0.0)),
                        ],
                        policy,
                    )?;
                    cprime[idx] = Some(head.mul(&gam, policy).mul(&exp, policy));
                }
                CriticalKind::Maximum => {
                    let coeff = minus_i_sqrt_2pi * (-s.big_l).exp();
                    let head = TransSeries::monomial(Key::new(s.rate, 0, 1, 0), coeff);
                    let mut er_fac = TransSeries::zero();
                    er_fac.insert_add(Key::new(0.0, 1, 0, 0), C64::new(-1.0 / (2.0 * s.w), 0.0));
                    er_fac.insert_add(
                        Key::new(0.0, 2, 0, 0),
                        C64::new(EULER_GAMMA / (4.0 * s.w * s.w), 0.0),
                    );
                    let exp = exp_of(
                        &[
                            (0.0, 1, 0, 0, C64::new(-s.big_l / s.w + s.sval, 0.0)),
                            (0.0, 1, 0, 1, C64::new(1.0 / (2.0 * s.w), 0.0)),
                            (0.0, 0, 2, 0, C64::new(s.hconst, 0.0)),
                        ],
                        policy,
                    )?;
                    c_v[idx] = Some(head.mul(&er_fac, policy).mul(&exp, policy));
                }
            }
        }

        // M_j and M'_j.
        let mut m_big = Vec::with_capacity(two_n);
        let mut m_prime = Vec::with_capacity(two_n);
        for ex in &exponents {
            let head = TransSeries::monomial(Key::new(ex.df, 0, 0, 0), ex.m0_const.exp());
            let exp = exp_of(
                &[
                    (0.0, 1, 0, 0, -0.5 * ex.path_first),
                    (0.0, 1, 2, 0, C64::new(ex.m0_e, 0.0)),
                    (0.0, 0, 2, 0, C64::new(ex.m1, 0.0)),
                ],
                policy,
            )?;
            m_big.push(head.mul(&exp, policy));

            let head_p = TransSeries::monomial(Key::new(-ex.df, 0, 0, 0), C64::new(1.0, 0.0));
            let exp_p = exp_of(
                &[
                    (0.0, 1, 0, 0, 0.5 * ex.path_first.conj()),
                    (0.0, 1, 2, 0, C64::new(ex.mt0_e, 0.0)),
                ],
                policy,
            )?;
            m_prime.push(head_p.mul(&exp_p, policy));
        }

        // τ_j: closed-form route.
        let mut tau = Vec::with_capacity(two_n);
        for j in 1..=two_n {
            let p = &ps[j - 1];
            let np = &ps[j % two_n];
            let sgn = if j % 2 == 1 { 1.0 } else { -1.0 };
            let (lo, hi) = if j % 2 == 1 { (j - 1, j % two_n) } else { (j % two_n, j - 1) };
            let rate = 2.0 * (data.point(lo + 1).value - data.point(hi + 1).value);
            let pref = PI / (p.aw * np.aw).sqrt();
            let lambda = sgn * (-1.0 / (2.0 * p.w) + 1.0 / (2.0 * np.w));
            let path_combo = if f.is_some() {
                exponents[j - 1].path_first + C64::new(0.0, PI / p.w)
            } else {
                C64::new(0.0, 0.0)
            };
            let x = sgn
                * (C64::new(
                    p.big_l / p.w - p.sval - np.big_l / np.w + np.sval,
                    0.0,
                ) + path_combo);
            let hcoef = sgn
                * (-p.b2 / 12.0 + p.a2 * p.w * p.w / 24.0 + np.b2 / 12.0
                    - np.a2 * np.w * np.w / 24.0);
            let head = TransSeries::monomial(Key::new(rate, 1, 0, 0), C64::new(pref, 0.0));
            let mut gam = TransSeries::one();
            gam.insert_add(
                Key::new(0.0, 1, 0, 0),
                C64::new(EULER_GAMMA / (2.0 * p.aw) + EULER_GAMMA / (2.0 * np.aw), 0.0),
            );
            let exp = exp_of(
                &[
                    (0.0, 1, 0, 1, C64::new(lambda, 0.0)),
                    (0.0, 1, 0, 0, x),
                    (0.0, 0, 2, 0, C64::new(hcoef, 0.0)),
                ],
                policy,
            )?;
            tau.push(head.mul(&gam, policy).mul(&exp, policy));
        }

        // 1 + E_rκ = Π M'_j and κ.
        let mut one_plus = TransSeries::one();
        for mp in &m_prime {
            one_plus = one_plus.mul(mp, policy);
        }
        one_plus.prune(1e-14 * one_plus.max_coeff());
        let kappa = one_plus
            .sub(&TransSeries::one())
            .mul_mono(Key::new(0.0, -1, 0, 0), C64::new(1.0, 0.0));

        Ok(IngredientSet {
            source,
            n: two_n / 2,
            epsilon,
            path_delta,
            policy: *policy,
            mu: mu_v,
            tau,
            cprime,
            c: c_v,
            m_big,
            m_prime,
            exponents,
            one_plus_er_kappa: one_plus,
            kappa,
        })
    }

    /// `τ_j` reassembled from the connection coefficients and interval
    /// monodromies: `c'_j c_{j+1} M_j⁻¹ M'_j` (odd) /
    /// `c_j c'_{j+1} M_j (M'_j)⁻¹` (even).  Agreement with [`Self::tau`]
    /// validates branch and sign conventions end to end.
    pub fn assembled_tau(&self, j: usize) -> Result<TransSeries, IngredientsError> {
        let two_n = 2 * self.n;
        assert!(j >= 1 && j <= two_n);
        let next = j % two_n; // 0-based index of point j+1
        let p = &self.policy;
        let t = if j % 2 == 1 {
            let cp = self.cprime[j - 1].as_ref().expect("odd j is a minimum");
            let cc = self.c[next].as_ref().expect("even j+1 is a maximum");
            cp.mul(cc, p).mul(&self.m_big[j - 1].invert(p)?, p).mul(&self.m_prime[j - 1], p)
        } else {
            let cc = self.c[j - 1].as_ref().expect("even j is a maximum");
            let cp = self.cprime[next].as_ref().expect("odd j+1 is a minimum");
            cc.mul(cp, p).mul(&self.m_big[j - 1], p).mul(&self.m_prime[j - 1].invert(p)?, p)
        };
        Ok(t)
    }

    /// Errors out when quantitative (ε-dependent) constants were requested
    /// from abstract critical data.
    pub fn require_concrete(&self) -> Result<(), IngredientsError> {
        match self.source {
            DataSource::Derived => Ok(()),
            DataSource::Abstract => Err(IngredientsError::AbstractDataInsufficient {
                what: "ε-dependent connection constants",
            }),
        }
    }

    /// Diagnostic JSON dump of the quantization-condition inputs.
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "source": self.source,
            "n": self.n,
            "epsilon": self.epsilon,
            "mu": self.mu,
            "tau": self.tau,
            "kappa": self.kappa,
            "one_plus_er_kappa": self.one_plus_er_kappa,
        })
    }
}
