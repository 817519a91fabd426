//! Transfer-matrix data, the quantization condition, its Newton polygon, and
//! the iterative solve for the exponentially small eigenvalue branches.
//!
//! The scalar condition is
//!
//! ```text
//!     𝓕(E_r, h) = -(1 + E_rκ)⁻¹ + Tr G₀ - (1 + E_rκ)·det G₀ = 0,
//! ```
//!
//! where `G₀` is the ordered product of per-well 2×2 factors in `τ_j`, `μ_j`.
//! `E_r = 0` is always a root (the exact zero eigenvalue of the Witten
//! Laplacian); its complete cancellation at grading `m = 0` is used as a
//! correctness canary.  The remaining exponentially small roots are read off
//! the north-west edges of the Newton polygon over `(m, c)` — `m` the `E_r`
//! power, `c` the exponential rate — and refined layer by layer: each layer
//! substitutes `E_r → e^{-t/h}(r + E')` with `r` the edge root and
//! re-polygonizes for the next, exponentially smaller unknown `E'`.

use num_complex::Complex64;

use crate::ingredients::{IngredientSet, IngredientsError};
use crate::transseries::{Key, TransSeries, TransseriesError, TruncationPolicy};

type C64 = Complex64;

/// Rates within this tolerance are treated as the same polygon abscissa.
const RATE_TOL: f64 = 1e-7;
/// Relative floor below which a cancelled coefficient is treated as zero.
const NOISE_REL: f64 = 1e-9;
/// Hard cap on refinement layers per branch.
const MAX_LAYERS: usize = 12;

/// Errors from quantization-condition assembly and solving.
#[derive(Debug, Clone, thiserror::Error)]
pub enum QuantizeError {
    /// The `E_r = 0` root fails to cancel at grading `m = 0` — upstream
    /// ingredient data is inconsistent.
    #[error("condition not degenerate at E_r = 0: residual {residual:.3e} vs scale {scale:.3e}")]
    ZeroRootMissing { residual: f64, scale: f64 },
    /// A polygon edge carries a repeated (or higher-degree unresolved) root.
    #[error("polygon edge of degree {degree} has no simple-root resolution")]
    MultipleRootUnresolved { degree: usize },
    #[error(transparent)]
    Series(#[from] TransseriesError),
    #[error(transparent)]
    Ingredients(#[from] IngredientsError),
}

// ---------------------------------------------------------------------------
// Transfer-matrix data
// ---------------------------------------------------------------------------

/// `G₀` together with its trace and determinant.
#[derive(Clone, Debug)]
pub struct TransferMatrixData {
    pub n: usize,
    pub g0: [[TransSeries; 2]; 2],
    pub trace: TransSeries,
    pub det: TransSeries,
}

fn mat_mul(
    a: &[[TransSeries; 2]; 2],
    b: &[[TransSeries; 2]; 2],
    p: &TruncationPolicy,
) -> [[TransSeries; 2]; 2] {
    let e = |i: usize, j: usize| -> TransSeries {
        a[i][0].mul(&b[0][j], p).add(&a[i][1].mul(&b[1][j], p))
    };
    [[e(0, 0), e(0, 1)], [e(1, 0), e(1, 1)]]
}

/// Builds `G₀ = Π_{k=n..1} diag(τ_{2k}, 1) · [[τ_{2k-1}⁻¹+1, μ_{2k-1}τ_{2k-1}⁻¹+1],
/// [μ_{2k}τ_{2k-1}⁻¹+1, μ_{2k-1}μ_{2k}τ_{2k-1}⁻¹+1]]` (factors ordered
/// left-to-right by decreasing `k`).  The determinant is accumulated through
/// the factorized form `Π τ_{2k}τ_{2k-1}⁻¹(1-μ_{2k-1})(1-μ_{2k})`, which
/// avoids the catastrophic cancellations of the entry-wise 2×2 determinant.
pub fn build_g0(ing: &IngredientSet) -> Result<TransferMatrixData, QuantizeError> {
    let p = &ing.policy;
    let one = TransSeries::one();
    let mut g = [[one.clone(), TransSeries::zero()], [TransSeries::zero(), one.clone()]];
    let mut det = TransSeries::one();
    for k in 1..=ing.n {
        let tau_odd_inv = ing.tau[2 * k - 2].invert(p)?;
        let tau_even = &ing.tau[2 * k - 1];
        let mu_odd = &ing.mu[2 * k - 2];
        let mu_even = &ing.mu[2 * k - 1];
        let f00 = tau_odd_inv.add(&one);
        let f01 = mu_odd.mul(&tau_odd_inv, p).add(&one);
        let f10 = mu_even.mul(&tau_odd_inv, p).add(&one);
        let f11 = mu_odd.mul(mu_even, p).mul(&tau_odd_inv, p).add(&one);
        let factor = [
            [tau_even.mul(&f00, p), tau_even.mul(&f01, p)],
            [f10, f11],
        ];
        // g accumulates factors so that higher k stands on the left.
        g = mat_mul(&factor, &g, p);
        det = det
            .mul(tau_even, p)
            .mul(&tau_odd_inv, p)
            .mul(&one.sub(mu_odd), p)
            .mul(&one.sub(mu_even), p);
    }
    let trace = g[0][0].add(&g[1][1]);
    Ok(TransferMatrixData { n: ing.n, g0: g, trace, det })
}

/// The assembled scalar quantization condition with the `m = 0` cancellation
/// already performed and measured.
#[derive(Clone, Debug)]
pub struct QuantizationCondition {
    /// `𝓕(E_r, h)` with the (cancelled) `m = 0` part removed.
    pub series: TransSeries,
    /// Largest `m = 0` coefficient magnitude before removal, relative to the
    /// condition's overall scale — the zero-eigenvalue canary.
    pub er0_residual: f64,
}

/// Assembles `𝓕 = -(1+E_rκ)⁻¹ + Tr G₀ - (1+E_rκ)det G₀`, verifies that the
/// `m = 0` part cancels (the known zero eigenvalue), and strips it.
pub fn build_condition(
    tm: &TransferMatrixData,
    one_plus_er_kappa: &TransSeries,
    policy: &TruncationPolicy,
) -> Result<QuantizationCondition, QuantizeError> {
    let inv = one_plus_er_kappa.invert(policy)?;
    let full = tm
        .trace
        .sub(&inv)
        .sub(&one_plus_er_kappa.mul(&tm.det, policy));
    let scale = full.max_coeff();
    let mut residual = 0.0f64;
    let mut series = TransSeries::zero();
    for (k, v) in full.iter() {
        if k.m == 0 {
            residual = residual.max(v.norm());
        } else {
            series.insert_add(*k, *v);
        }
    }
    if residual > 1e-6 * scale {
        return Err(QuantizeError::ZeroRootMissing { residual, scale });
    }
    Ok(QuantizationCondition { series, er0_residual: residual / scale })
}

// ---------------------------------------------------------------------------
// Newton polygon
// ---------------------------------------------------------------------------

/// One polygon point: all condition monomials with `E_r` power `m` and
/// exponential rate `c`, with their `(h, ln h)` coefficient series.
#[derive(Clone, Debug)]
pub struct PolygonPoint {
    pub m: i32,
    pub c: f64,
    /// Coefficient series, stored with `c = 0`, `m = 0` keys.
    pub coeff: TransSeries,
}

/// A north-west hull edge: positive slope `t` means candidate solutions of
/// exponential type `e^{-t/h}`.
#[derive(Clone, Debug)]
pub struct Edge {
    pub slope: f64,
    /// Indices into `points` lying on the edge line, ascending in `m`.
    pub on_edge: Vec<usize>,
}

/// Newton polygon of a condition series over `(m, c)`.
#[derive(Clone, Debug)]
pub struct NewtonPolygon {
    pub points: Vec<PolygonPoint>,
    /// North-west edges, by decreasing slope.
    pub nw_edges: Vec<Edge>,
}

impl NewtonPolygon {
    /// Leftmost `m` attaining the maximal rate — for the Witten condition
    /// this equals the number of minima `n`.
    pub fn peak_m(&self) -> Option<i32> {
        let cmax = self
            .points
            .iter()
            .map(|p| p.c)
            .fold(f64::NEG_INFINITY, f64::max);
        self.points
            .iter()
            .filter(|p| (p.c - cmax).abs() < RATE_TOL)
            .map(|p| p.m)
            .min()
    }
}

/// Groups monomials into polygon points, dropping points whose coefficient
/// series has cancelled below `NOISE_REL` of the overall scale.
fn group_points(cond: &TransSeries) -> Vec<PolygonPoint> {
    let scale = cond.max_coeff();
    let mut points: Vec<PolygonPoint> = Vec::new();
    for (k, v) in cond.iter() {
        let slot = points
            .iter_mut()
            .find(|p| p.m == k.m && (p.c - k.c).abs() < RATE_TOL);
        let coeff_key = Key::new(0.0, 0, k.k2, k.l);
        match slot {
            Some(p) => p.coeff.insert_add(coeff_key, *v),
            None => {
                let mut coeff = TransSeries::zero();
                coeff.insert_add(coeff_key, *v);
                points.push(PolygonPoint { m: k.m, c: k.c, coeff });
            }
        }
    }
    // Drop cancellation noise inside each coefficient series (a stray 1e-16
    // ln h remnant must not masquerade as the series' leading term), then
    // drop points that cancelled entirely.
    let cutoff = NOISE_REL * scale;
    for p in points.iter_mut() {
        let mut clean = TransSeries::zero();
        for (k, v) in p.coeff.iter() {
            if v.norm() > cutoff {
                clean.insert_add(*k, *v);
            }
        }
        p.coeff = clean;
    }
    points.retain(|p| !p.coeff.is_zero());
    points.sort_by(|a, b| (a.m, a.c.partial_cmp(&b.c).unwrap()).partial_cmp(&(b.m, std::cmp::Ordering::Equal)).unwrap());
    points
}

/// Builds the polygon and its north-west hull edges.
pub fn newton_polygon(cond: &TransSeries) -> NewtonPolygon {
    let points = group_points(cond);
    // Max rate per m.
    let mut verts: Vec<(i32, f64, usize)> = Vec::new();
    for (i, p) in points.iter().enumerate() {
        match verts.iter_mut().find(|(m, _, _)| *m == p.m) {
            Some(v) if p.c > v.1 => {
                v.1 = p.c;
                v.2 = i;
            }
            Some(_) => {}
            None => verts.push((p.m, p.c, i)),
        }
    }
    verts.sort_by_key(|v| v.0);
    // Upper convex hull (monotone chain over (m, cmax)).
    let mut hull: Vec<(i32, f64, usize)> = Vec::new();
    for v in &verts {
        while hull.len() >= 2 {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            // Keep only right turns (concave from above).
            let cross = (b.0 - a.0) as f64 * (v.1 - a.1) - (v.0 - a.0) as f64 * (b.1 - a.1);
            if cross >= -1e-12 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(*v);
    }
    // North-west edges: hull segments with positive slope.
    let mut nw_edges = Vec::new();
    for w in hull.windows(2) {
        let (a, b) = (w[0], w[1]);
        let slope = (b.1 - a.1) / (b.0 - a.0) as f64;
        if slope <= RATE_TOL {
            continue;
        }
        // Collect every max-rate vertex lying on this edge line.
        let on_edge: Vec<usize> = verts
            .iter()
            .filter(|v| {
                v.0 >= a.0
                    && v.0 <= b.0
                    && (v.1 - (a.1 + slope * (v.0 - a.0) as f64)).abs() < RATE_TOL
            })
            .map(|v| v.2)
            .collect();
        nw_edges.push(Edge { slope, on_edge });
    }
    nw_edges.sort_by(|a, b| b.slope.partial_cmp(&a.slope).unwrap());
    NewtonPolygon { points, nw_edges }
}

// ---------------------------------------------------------------------------
// Iterative solve
// ---------------------------------------------------------------------------

/// One refinement layer: the slope taken and the solved root series.
#[derive(Clone, Debug)]
pub struct BranchStep {
    pub slope: f64,
    pub root: TransSeries,
}

/// A solved eigenvalue branch.
#[derive(Clone, Debug)]
pub struct EigenvalueSolution {
    /// `E_r(h)` as a transseries free of the `E_r` symbol.
    pub er: TransSeries,
    /// Condition evaluated at the solution.
    pub residual: TransSeries,
    pub branch: Vec<BranchStep>,
}

impl EigenvalueSolution {
    pub fn is_zero_branch(&self) -> bool {
        self.er.is_zero()
    }
}

/// Roots of one polygon edge.  A two-point edge of span one is solved by a
/// full transseries division; wider edges fall back to the scalar
/// `h⁰ ln⁰h` polynomial (quadratics only), whose `h`-dependent corrections
/// are then recovered by the subsequent refinement layers.
fn edge_roots(
    points: &[PolygonPoint],
    edge: &Edge,
    policy: &TruncationPolicy,
) -> Result<Vec<TransSeries>, QuantizeError> {
    let idx = &edge.on_edge;
    let m_lo = points[idx[0]].m;
    let m_hi = points[*idx.last().unwrap()].m;
    let span = (m_hi - m_lo) as usize;
    if span == 1 {
        let lo = &points[idx[0]].coeff;
        let hi = &points[idx[1]].coeff;
        // The divisor must not be ln h-led: 1/(ln h + …) leaves the graded
        // fragment.  (A pure h-power leading factor is harmless — it divides
        // out — which keeps the solve covariant under monomial rescalings of
        // the whole condition.)
        match hi.leading() {
            Some((k, _)) if k.l == 0 => {}
            _ => {
                return Err(QuantizeError::Series(TransseriesError::LogLeading(
                    "edge divisor does not start with a constant h⁰ ln⁰h term".into(),
                )))
            }
        }
        return Ok(vec![lo.neg().mul(&hi.invert(policy)?, policy)]);
    }
    if span == 2 {
        // Quadratic in r from the scalar h⁰ ln⁰h coefficients.
        let coeff_of = |m: i32| -> C64 {
            idx.iter()
                .find(|&&i| points[i].m == m)
                .map(|&i| points[i].coeff.coeff(0.0, 0, 0, 0))
                .unwrap_or(C64::new(0.0, 0.0))
        };
        let (a, b, c) = (coeff_of(m_hi), coeff_of(m_lo + 1), coeff_of(m_lo));
        let disc = b * b - 4.0 * a * c;
        if disc.norm() < 1e-12 * (b.norm() * b.norm() + a.norm() * c.norm()) {
            return Err(QuantizeError::MultipleRootUnresolved { degree: 2 });
        }
        let s = disc.sqrt();
        return Ok(vec![
            TransSeries::constant((-b + s) / (2.0 * a)),
            TransSeries::constant((-b - s) / (2.0 * a)),
        ]);
    }
    Err(QuantizeError::MultipleRootUnresolved { degree: span })
}

fn descend(
    f: &TransSeries,
    acc: f64,
    er_acc: TransSeries,
    steps: Vec<BranchStep>,
    depth: f64,
    policy: &TruncationPolicy,
    out: &mut Vec<(TransSeries, Vec<BranchStep>)>,
) -> Result<(), QuantizeError> {
    if acc >= depth - RATE_TOL || steps.len() >= MAX_LAYERS {
        out.push((er_acc, steps));
        return Ok(());
    }
    let points = group_points(f);
    // The current unknown's constant balance lives at m = 0.
    let p0 = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.m == 0)
        .max_by(|a, b| a.1.c.partial_cmp(&b.1.c).unwrap());
    let Some((i0, p0)) = p0 else {
        // Condition already satisfied to the retained depth.
        out.push((er_acc, steps));
        return Ok(());
    };
    // Steepest admissible balance against higher powers.
    let best = points
        .iter()
        .enumerate()
        .filter(|(_, p)| p.m >= 1)
        .map(|(i, p)| (i, (p.c - p0.c) / p.m as f64))
        .max_by(|a, b| a.1.partial_cmp(&b.1).unwrap());
    let Some((_, t)) = best else {
        out.push((er_acc, steps));
        return Ok(());
    };
    if t <= RATE_TOL {
        out.push((er_acc, steps));
        return Ok(());
    }
    let on_edge: Vec<usize> = points
        .iter()
        .enumerate()
        .filter(|(_, p)| (p.c - (p0.c + t * (p.m - p0.m) as f64)).abs() < RATE_TOL)
        .map(|(i, _)| i)
        .collect();
    debug_assert!(on_edge.contains(&i0));
    let edge = Edge { slope: t, on_edge };
    for r in edge_roots(&points, &edge, policy)? {
        let f1 = f.substitute_er_shifted(-t, &r, policy)?;
        let er1 = er_acc.add(&r.shift_rate(-(acc + t)));
        let mut steps1 = steps.clone();
        steps1.push(BranchStep { slope: t, root: r });
        descend(&f1, acc + t, er1, steps1, depth, policy, out)?;
    }
    Ok(())
}

/// Solves the condition for every exponentially small branch (including the
/// exact `E_r = 0`), refining each branch until the undetermined correction
/// has exponential type below `depth` (absolute rate budget; pass
/// `3 × first slope` for the default).
pub fn solve_condition(
    cond: &QuantizationCondition,
    depth: f64,
    policy: &TruncationPolicy,
) -> Result<Vec<EigenvalueSolution>, QuantizeError> {
    let mut out = vec![EigenvalueSolution {
        er: TransSeries::zero(),
        residual: TransSeries::zero(),
        branch: Vec::new(),
    }];
    if cond.series.is_zero() {
        return Ok(out);
    }
    let poly = newton_polygon(&cond.series);
    let mut branches = Vec::new();
    for edge in &poly.nw_edges {
        for r in edge_roots(&poly.points, edge, policy)? {
            let f1 = cond.series.substitute_er_shifted(-edge.slope, &r, policy)?;
            descend(
                &f1,
                edge.slope,
                r.shift_rate(-edge.slope),
                vec![BranchStep { slope: edge.slope, root: r }],
                depth,
                policy,
                &mut branches,
            )?;
        }
    }
    for (er, branch) in branches {
        let residual = cond.series.substitute_er(&er, policy)?;
        out.push(EigenvalueSolution { er, residual, branch });
    }
    Ok(out)
}

/// Default refinement budget: three times the leading slope.
pub fn default_depth(poly: &NewtonPolygon) -> f64 {
    poly.nw_edges.first().map(|e| 3.0 * e.slope).unwrap_or(0.0)
}
