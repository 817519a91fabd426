//! Independent spectral verification of the asymptotic pipeline.
//!
//! The operator `P = -h² d²/dq² + f'(q)² - h f''(q)` on ℝ/ℤ is discretized in
//! the Fourier basis `e^{2πikq}`, `k = -K..K`.  Because `f` is a trigonometric
//! polynomial, the Fourier data of the potential `(f')² - h f''` is *exact*
//! (finite coefficient convolutions, no sampling error), so the only
//! discretization parameter is the mode cutoff `K` and the matrix is the
//! orthogonal projection of `P` itself.
//!
//! The resulting Hermitian matrix is diagonalized densely; its low-lying
//! eigenvalues at finite `h` are compared against the transseries
//! prediction — both pointwise (ratio at fixed `h`) and through a regression
//! of `ln(E₂/h)` against `1/h`, which recovers the exponential rate.
//!
//! For very small `h` the nonzero low-lying eigenvalue sinks below the
//! binary64 noise floor of the eigensolver; an extended-precision path
//! (double-double arithmetic, cyclic Jacobi iteration) is provided for that
//! regime.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;
use twofloat::TwoFloat;

use crate::quantize::EigenvalueSolution;
use crate::transseries::TransSeries;
use crate::trigpoly::TrigPoly;

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Errors from the spectral oracle.
#[derive(Debug, Error)]
pub enum OracleError {
    /// The trailing Fourier mode's kinetic energy does not dominate the
    /// potential's total Fourier weight; the projection would not be
    /// spectrally reliable.
    #[error("mode cutoff {k_cut} too small; need at least {required} for h = {h}")]
    CutoffTooSmall { k_cut: usize, required: usize, h: f64 },
    /// Doubling the cutoff moved a reported eigenvalue by more than the
    /// tolerance.
    #[error("eigenvalue {index} not converged in the cutoff: relative change {rel_change:e}")]
    NotConverged { index: usize, rel_change: f64 },
    /// The requested eigenvalue is below the binary64 eigensolver floor;
    /// extended precision is required.
    #[error("eigenvalue {value:e} at h = {h} is below the double-precision floor {floor:e}")]
    FloatingUnderflow { h: f64, value: f64, floor: f64 },
    /// The regression needs at least five grid points.
    #[error("h grid has {0} points; at least 5 are required for the fit")]
    GridTooSmall(usize),
    /// The prediction series has no terms.
    #[error("prediction transseries is empty")]
    EmptyPrediction,
}

/// Exact complex-exponential Fourier coefficients of a real trigonometric
/// polynomial expression; `coeffs[d + m]` multiplies `e^{2πimq}`,
/// `m = -d..d`.
#[derive(Debug, Clone)]
struct ExpSeries {
    d: usize,
    coeffs: Vec<Complex64>,
}

impl ExpSeries {
    fn from_trigpoly(f: &TrigPoly) -> Self {
        let d = f.degree();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
        coeffs[d] = Complex64::new(f.constant, 0.0);
        for k in 1..=d {
            let a = f.cos_coeffs.get(k - 1).copied().unwrap_or(0.0);
            let b = f.sin_coeffs.get(k - 1).copied().unwrap_or(0.0);
            // a cos + b sin = ((a - ib)/2) e^{+i·} + ((a + ib)/2) e^{-i·}
            coeffs[d + k] = Complex64::new(a / 2.0, -b / 2.0);
            coeffs[d - k] = Complex64::new(a / 2.0, b / 2.0);
        }
        ExpSeries { d, coeffs }
    }

    /// Termwise derivative: mode `m` picks up `2πim`.
    fn derivative(&self) -> Self {
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let m = i as i64 - self.d as i64;
            *c *= Complex64::new(0.0, TWO_PI * m as f64);
        }
        out
    }

    /// Exact product by coefficient convolution (degree adds).
    fn mul(&self, other: &ExpSeries) -> Self {
        let d = self.d + other.d;
        let mut coeffs = vec![Complex64::new(0.0, 0.0); 2 * d + 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        ExpSeries { d, coeffs }
    }

    /// Coefficient of `e^{2πimq}` (zero outside the stored band).
    fn get(&self, m: i64) -> Complex64 {
        let i = m + self.d as i64;
        if i < 0 || i as usize >= self.coeffs.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.coeffs[i as usize]
        }
    }

    fn total_weight(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).sum()
    }
}

/// Fourier-collocation discretization of the Witten Laplacian at fixed `h`.
#[derive(Debug, Clone)]
pub struct SpectralProblem {
    pub f: TrigPoly,
    pub h: f64,
    /// Modes `-k_cut ..= k_cut` are retained.
    pub k_cut: usize,
    /// The Hermitian `(2k_cut+1)²` matrix of `P` in the Fourier basis.
    pub matrix: DMatrix<Complex64>,
    /// Sign of the `h f''` term: `-1` for `P`, `+1` for the supersymmetric
    /// partner operator.
    fpp_sign: f64,
}

fn potential_fourier(f: &TrigPoly) -> (ExpSeries, ExpSeries) {
    let fp = ExpSeries::from_trigpoly(f).derivative();
    let ghat = fp.mul(&fp);
    let fpp = fp.derivative();
    (ghat, fpp)
}

fn assemble_signed(
    f: &TrigPoly,
    h: f64,
    k_cut: usize,
    fpp_sign: f64,
) -> Result<SpectralProblem, OracleError> {
    let (ghat, fpp) = potential_fourier(f);
    // Trailing-mode diagonal dominance: the last retained kinetic entry must
    // dominate the potential's total Fourier weight, otherwise truncation
    // couples the edge of the basis to the low-lying part of the spectrum.
    let weight = ghat.total_weight() + h * fpp.total_weight();
    let required = (2.0 * weight).sqrt() / (TWO_PI * h);
    if (TWO_PI * k_cut as f64 * h).powi(2) < 2.0 * weight {
        return Err(OracleError::CutoffTooSmall {
            k_cut,
            required: required.ceil() as usize,
            h,
        });
    }
    let n = 2 * k_cut + 1;
    let mut matrix = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    for i in 0..n {
        let k = i as i64 - k_cut as i64;
        for j in 0..n {
            let kp = j as i64 - k_cut as i64;
            let mut v = ghat.get(k - kp) + fpp_sign * h * fpp.get(k - kp);
            if i == j {
                v += (TWO_PI * k as f64 * h).powi(2);
            }
            matrix[(i, j)] = v;
        }
    }
    Ok(SpectralProblem { f: f.clone(), h, k_cut, matrix, fpp_sign })
}

/// Discretizes `P = -h²∂² + (f')² - h f''` with modes `-k_cut ..= k_cut`.
pub fn assemble(f: &TrigPoly, h: f64, k_cut: usize) -> Result<SpectralProblem, OracleError> {
    assemble_signed(f, h, k_cut, -1.0)
}

/// Discretizes the supersymmetric partner `-h²∂² + (f')² + h f''`, whose
/// spectrum coincides with that of `P` away from the zero mode.
pub fn assemble_partner(
    f: &TrigPoly,
    h: f64,
    k_cut: usize,
) -> Result<SpectralProblem, OracleError> {
    assemble_signed(f, h, k_cut, 1.0)
}

impl SpectralProblem {
    /// A convenient size scale: the largest diagonal entry.
    pub fn scale(&self) -> f64 {
        (0..self.matrix.nrows())
            .map(|i| self.matrix[(i, i)].norm())
            .fold(0.0, f64::max)
    }

    fn eigenvalues_ascending(&self) -> Vec<f64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut ev: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
        ev
    }

    /// The numerically computed eigenvector of the smallest eigenvalue, as
    /// Fourier coefficients over modes `-k_cut ..= k_cut`.
    ///
    /// The eigensolver's eigenvalue list is not reliably aligned with its
    /// eigenvector columns, so each column is paired with its own Rayleigh
    /// quotient before picking the minimum.
    pub fn ground_vector(&self) -> DVector<Complex64> {
        let eig = self.matrix.clone().symmetric_eigen();
        let mut best = f64::INFINITY;
        let mut out = None;
        for i in 0..eig.eigenvectors.ncols() {
            let col = eig.eigenvectors.column(i).into_owned();
            let mc = &self.matrix * &col;
            let rq: Complex64 = col.iter().zip(mc.iter()).map(|(a, b)| a.conj() * b).sum();
            let rq = rq.re / col.norm_squared();
            if rq < best {
                best = rq;
                out = Some(col);
            }
        }
        out.expect("matrix is nonempty")
    }
}

/// The `count` smallest eigenvalues of the discretized operator, ascending,
/// with a cutoff-doubling convergence check: each reported value must move by
/// less than `1e-3` relative (or `1e-16·scale` absolute) when `k_cut` is
/// doubled.
pub fn low_spectrum(sp: &SpectralProblem, count: usize) -> Result<Vec<f64>, OracleError> {
    let count = count.min(sp.matrix.nrows());
    let coarse = sp.eigenvalues_ascending();
    let fine_problem = assemble_signed(&sp.f, sp.h, 2 * sp.k_cut, sp.fpp_sign)?;
    let fine = fine_problem.eigenvalues_ascending();
    // The eigensolver's own noise on the tiny eigenvalues is ~1e-15 x the
    // matrix scale (and grows with the cutoff), so the absolute floor of the
    // comparison must sit above it.
    let floor = 1e-14 * fine_problem.scale();
    for i in 0..count {
        let delta = (coarse[i] - fine[i]).abs();
        if delta > floor {
            let rel = delta / coarse[i].abs().max(floor);
            if rel > 1e-3 {
                return Err(OracleError::NotConverged { index: i, rel_change: rel });
            }
        }
    }
    // Report the requested discretization's values (the doubled cutoff only
    // serves as the convergence reference; its larger scale carries more
    // float noise on the exponentially small entries).
    Ok(coarse[..count].to_vec())
}

/// Fourier coefficients (modes `-k_cut ..= k_cut`) of the exact zero mode
/// `e^{-f/h}`, by trapezoid quadrature (spectrally accurate on the torus).
pub fn zero_mode_coefficients(f: &TrigPoly, h: f64, k_cut: usize) -> DVector<Complex64> {
    let n_samp = (8 * k_cut).max(1024);
    let mut out = DVector::from_element(2 * k_cut + 1, Complex64::new(0.0, 0.0));
    for j in 0..n_samp {
        let q = j as f64 / n_samp as f64;
        let w = (-f.eval_real(q, 0) / h).exp();
        for (i, o) in out.iter_mut().enumerate() {
            let m = i as f64 - k_cut as f64;
            let phase = -TWO_PI * m * q;
            *o += w * Complex64::new(phase.cos(), phase.sin());
        }
    }
    out /= Complex64::new(n_samp as f64, 0.0);
    out
}

/// `|⟨u,v⟩| / (‖u‖‖v‖)`.
pub fn cosine_similarity(u: &DVector<Complex64>, v: &DVector<Complex64>) -> f64 {
    let dot: Complex64 = u.iter().zip(v.iter()).map(|(a, b)| a.conj() * b).sum();
    dot.norm() / (u.norm() * v.norm())
}

/// Heuristic default cutoff: enough modes to resolve `e^{-f/h}` and to push
/// the kinetic edge far above the potential.
pub fn default_cutoff(f: &TrigPoly, h: f64) -> usize {
    let d = f.degree().max(1) as f64;
    ((8.0 * d / h.sqrt()).ceil() as usize).max(64)
}

/// Numerically evaluates the physical eigenvalue prediction `E(h) = h·E_r(h)`
/// from the transseries `E_r`, keeping the real parts of the coefficients.
pub fn eval_prediction(er: &TransSeries, h: f64) -> f64 {
    let lnh = h.ln();
    let mut total = 0.0;
    for (k, v) in er.iter() {
        total += v.re * (k.c / h).exp() * h.powf(k.k2 as f64 / 2.0) * lnh.powi(k.l);
    }
    h * total
}

/// One row of the oracle comparison table.
#[derive(Debug, Clone)]
pub struct OracleRow {
    pub h: f64,
    pub e1: f64,
    pub e2: f64,
    pub predicted: f64,
    pub ratio: f64,
}

/// Result of regressing the oracle eigenvalues against the prediction.
#[derive(Debug, Clone)]
pub struct FitResult {
    /// Fitted exponential rate `c` in `E ≈ C·h^p·e^{-c/h}`.
    pub rate: f64,
    /// Standard error of the fitted rate.
    pub rate_stderr: f64,
    /// Fitted prefactor `C`.
    pub prefactor: f64,
    /// The h-power `p`, fixed to the predicted leading power (free
    /// three-parameter fits are unstable on five points).
    pub power: f64,
    /// Regression residuals per grid point.
    pub residuals: Vec<f64>,
    /// The h grid used, ascending.
    pub h_grid: Vec<f64>,
    /// Per-h comparison rows (same order as `h_grid`).
    pub rows: Vec<OracleRow>,
    /// The predicted rate (from the transseries leading monomial).
    pub predicted_rate: f64,
    /// The predicted leading prefactor.
    pub predicted_prefactor: f64,
    /// `E₂(oracle)/E(prediction)` at the smallest grid h.
    pub ratio_at_smallest_h: f64,
}

/// Numerical precision of the eigensolves used by [`fit_and_compare`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Precision {
    /// Plain binary64 dense Hermitian eigensolve.
    Double,
    /// Double-double (~32 significant digits) cyclic Jacobi, for h small
    /// enough that `E₂` drowns in the binary64 eigensolver noise.
    Extended,
}

/// Computes the two smallest eigenvalues over the grid, compares them with
/// the transseries prediction, and regresses `ln(E₂/h^p)` against `1/h`.
pub fn fit_and_compare(
    f: &TrigPoly,
    prediction: &EigenvalueSolution,
    h_grid: &[f64],
    precision: Precision,
) -> Result<FitResult, OracleError> {
    if h_grid.len() < 5 {
        return Err(OracleError::GridTooSmall(h_grid.len()));
    }
    let (lead_key, lead_coeff) =
        prediction.er.leading().ok_or(OracleError::EmptyPrediction)?;
    let predicted_rate = -lead_key.c;
    let predicted_prefactor = lead_coeff.re;
    let power = 1.0 + lead_key.k2 as f64 / 2.0;

    let mut grid: Vec<f64> = h_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut rows = Vec::with_capacity(grid.len());
    for &h in &grid {
        let k_cut = default_cutoff(f, h);
        let sp = assemble(f, h, k_cut)?;
        let floor = 1e-15 * sp.scale();
        let (e1, e2) = match precision {
            Precision::Double => {
                let ev = low_spectrum(&sp, 2)?;
                if ev[1] < floor {
                    return Err(OracleError::FloatingUnderflow { h, value: ev[1], floor });
                }
                (ev[0], ev[1])
            }
            Precision::Extended => {
                let ev = low_spectrum_extended(&sp, 2)?;
                (ev[0], ev[1])
            }
        };
        let predicted = eval_prediction(&prediction.er, h);
        rows.push(OracleRow { h, e1, e2, predicted, ratio: e2 / predicted });
    }

    // Least squares on y = ln(E₂ / h^p) against x = 1/h; slope = -rate.
    let xs: Vec<f64> = grid.iter().map(|h| 1.0 / h).collect();
    let ys: Vec<f64> = rows.iter().map(|r| (r.e2 / r.h.powf(power)).ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    let slope = sxy / sxx;
    let intercept = ybar - slope * xbar;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (slope * x + intercept))
        .collect();
    let dof = (xs.len() as f64 - 2.0).max(1.0);
    let s2 = residuals.iter().map(|r| r * r).sum::<f64>() / dof;
    let rate_stderr = (s2 / sxx).sqrt();

    let ratio_at_smallest_h = rows[0].ratio;
    Ok(FitResult {
        rate: -slope,
        rate_stderr,
        prefactor: intercept.exp(),
        power,
        residuals,
        h_grid: grid,
        rows,
        predicted_rate,
        predicted_prefactor,
        ratio_at_smallest_h,
    })
}

// ---------------------------------------------------------------------------
// Extended precision path: double-double assembly + cyclic Jacobi.
// ---------------------------------------------------------------------------

/// Complex double-double value.
#[derive(Debug, Clone, Copy)]
struct DdComplex {
    re: TwoFloat,
    im: TwoFloat,
}

impl DdComplex {
    fn zero() -> Self {
        DdComplex { re: TwoFloat::from(0.0), im: TwoFloat::from(0.0) }
    }
}

/// Exact double-double Fourier data of `(f')²` and `f''`: the trig
/// coefficients of `f` are binary64-exact inputs, so the convolutions are
/// carried out losslessly in double-double arithmetic.
fn potential_fourier_dd(f: &TrigPoly) -> (Vec<DdComplex>, Vec<DdComplex>, usize) {
    let d = f.degree();
    let two_pi = twofloat::consts::TAU;
    // f' in exponential form, modes -d..d.
    let mut fp = vec![DdComplex::zero(); 2 * d + 1];
    for k in 1..=d {
        let a = f.cos_coeffs.get(k - 1).copied().unwrap_or(0.0);
        let b = f.sin_coeffs.get(k - 1).copied().unwrap_or(0.0);
        let w = two_pi * TwoFloat::from(k as f64);
        // d/dq of ((a∓ib)/2) e^{±2πikq} is (±2πik)((a∓ib)/2) e^{±2πikq}.
        fp[d + k] = DdComplex {
            re: w * TwoFloat::from(b / 2.0),
            im: w * TwoFloat::from(a / 2.0),
        };
        fp[d - k] = DdComplex {
            re: w * TwoFloat::from(b / 2.0),
            im: -(w * TwoFloat::from(a / 2.0)),
        };
    }
    // (f')² by convolution, modes -2d..2d.
    let mut ghat = vec![DdComplex::zero(); 4 * d + 1];
    for (i, x) in fp.iter().enumerate() {
        for (j, y) in fp.iter().enumerate() {
            let t = &mut ghat[i + j];
            t.re = t.re + x.re * y.re - x.im * y.im;
            t.im = t.im + x.re * y.im + x.im * y.re;
        }
    }
    // f'' = (f')' termwise.
    let mut fpp = vec![DdComplex::zero(); 2 * d + 1];
    for (i, x) in fp.iter().enumerate() {
        let m = i as i64 - d as i64;
        let w = two_pi * TwoFloat::from(m as f64);
        fpp[i] = DdComplex { re: -(w * x.im), im: w * x.re };
    }
    (ghat, fpp, d)
}

/// The `count` smallest eigenvalues in double-double precision.  The complex
/// Hermitian matrix `X + iY` is embedded as the real symmetric matrix
/// `[[X, -Y], [Y, X]]` (each eigenvalue appears twice) and diagonalized with
/// a thresholded cyclic Jacobi iteration.
pub fn low_spectrum_extended(
    sp: &SpectralProblem,
    count: usize,
) -> Result<Vec<f64>, OracleError> {
    let (ghat, fpp, d) = potential_fourier_dd(&sp.f);
    let k_cut = sp.k_cut;
    let n = 2 * k_cut + 1;
    let two_pi = twofloat::consts::TAU;
    let h = TwoFloat::from(sp.h);
    let get = |band: &[DdComplex], deg: usize, m: i64| -> DdComplex {
        let i = m + deg as i64;
        if i < 0 || i as usize >= band.len() {
            DdComplex::zero()
        } else {
            band[i as usize]
        }
    };
    // Assemble the doubled real symmetric matrix.
    let nn = 2 * n;
    let mut a = vec![TwoFloat::from(0.0); nn * nn];
    for i in 0..n {
        let k = i as i64 - k_cut as i64;
        for j in 0..n {
            let kp = j as i64 - k_cut as i64;
            let g = get(&ghat, 2 * d, k - kp);
            let p = get(&fpp, d, k - kp);
            let sign = TwoFloat::from(sp.fpp_sign);
            let mut re = g.re + sign * h * p.re;
            let im = g.im + sign * h * p.im;
            if i == j {
                let w = two_pi * TwoFloat::from(k as f64) * h;
                re = re + w * w;
            }
            a[i * nn + j] = re;
            a[(i + n) * nn + (j + n)] = re;
            a[i * nn + (j + n)] = -im;
            a[(i + n) * nn + j] = im;
        }
    }
    let ev = jacobi_eigenvalues(&mut a, nn);
    // Eigenvalues are doubled by the embedding; take every other one.
    let mut out = Vec::with_capacity(count);
    for (i, v) in ev.iter().enumerate() {
        if i % 2 == 0 {
            out.push(f64::from(*v));
        }
        if out.len() == count {
            break;
        }
    }
    Ok(out)
}

/// Accurate double-double reciprocal.  The library's `Div` rounds at binary64
/// precision, which would cap the Jacobi rotations' orthogonality at ~1e-17;
/// two Newton steps on the (fully accurate) multiplication restore the full
/// double-double accuracy.
fn dd_recip(x: TwoFloat) -> TwoFloat {
    let two = TwoFloat::from(2.0);
    let y0 = TwoFloat::from(1.0 / x.hi());
    let y1 = y0 * (two - x * y0);
    y1 * (two - x * y1)
}

fn dd_div(a: TwoFloat, b: TwoFloat) -> TwoFloat {
    a * dd_recip(b)
}

/// Thresholded cyclic Jacobi for a dense symmetric matrix in double-double
/// arithmetic.  Destroys `a`; returns ascending eigenvalues.
fn jacobi_eigenvalues(a: &mut [TwoFloat], n: usize) -> Vec<TwoFloat> {
    let zero = TwoFloat::from(0.0);
    let one = TwoFloat::from(1.0);
    let off = |a: &[TwoFloat]| -> TwoFloat {
        let mut s = TwoFloat::from(0.0);
        for p in 0..n {
            for q in (p + 1)..n {
                s = s + a[p * n + q] * a[p * n + q];
            }
        }
        s
    };
    let scale: f64 = (0..n).map(|i| f64::from(a[i * n + i].abs())).fold(0.0, f64::max);
    let tol = TwoFloat::from((scale * 1e-34).max(f64::MIN_POSITIVE));
    let negligible = (scale * 1e-38).max(f64::MIN_POSITIVE);
    for _sweep in 0..60 {
        if f64::from(off(a).sqrt()) <= f64::from(tol) {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if f64::from(apq.abs()) <= negligible {
                    a[p * n + q] = zero;
                    a[q * n + p] = zero;
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = dd_div(aqq - app, TwoFloat::from(2.0) * apq);
                // t = sign(θ)/(|θ| + sqrt(θ²+1)), the smaller-angle root;
                // for huge θ fall back to the first-order root 1/(2θ) to keep
                // the double-double arithmetic away from infinities.
                let t = if f64::from(theta.abs()) > 1e12 {
                    dd_div(TwoFloat::from(0.5), theta)
                } else {
                    let denom = theta.abs() + (theta * theta + one).sqrt();
                    let mag = dd_recip(denom);
                    if f64::from(theta) < 0.0 {
                        -mag
                    } else {
                        mag
                    }
                };
                let c = dd_recip((t * t + one).sqrt());
                let s = t * c;
                // Update rows/columns p and q.
                for r in 0..n {
                    if r == p || r == q {
                        continue;
                    }
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    let new_rp = c * arp - s * arq;
                    let new_rq = s * arp + c * arq;
                    a[r * n + p] = new_rp;
                    a[p * n + r] = new_rp;
                    a[r * n + q] = new_rq;
                    a[q * n + r] = new_rq;
                }
                let tapq = t * apq;
                a[p * n + p] = app - tapq;
                a[q * n + q] = aqq + tapq;
                a[p * n + q] = zero;
                a[q * n + p] = zero;
            }
        }
    }
    let mut ev: Vec<TwoFloat> = (0..n).map(|i| a[i * n + i]).collect();
    ev.sort_by(|x, y| f64::from(*x).partial_cmp(&f64::from(*y)).unwrap());
    ev
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantize::{build_condition, build_g0, default_depth, newton_polygon, solve_condition};
    use crate::transseries::TruncationPolicy;
    use crate::trigpoly::tests::sample_f;
    use approx::assert_relative_eq;

    const U: f64 = 1.0 / (8.0 * std::f64::consts::PI);

    fn example1_prediction() -> EigenvalueSolution {
        let f = sample_f();
        let data = f.critical_data().unwrap();
        let policy = TruncationPolicy::for_action_gap(data.max_action_gap());
        let ing =
            crate::ingredients::IngredientSet::derive(&f, &data, 0.02, &policy).unwrap();
        let tm = build_g0(&ing).unwrap();
        let cond = build_condition(&tm, &ing.one_plus_er_kappa, &policy).unwrap();
        let poly = newton_polygon(&cond.series);
        let depth = default_depth(&poly);
        solve_condition(&cond, depth, &policy)
            .unwrap()
            .into_iter()
            .find(|s| !s.is_zero_branch())
            .unwrap()
    }

    #[test]
    fn free_operator_is_diagonal() {
        let f = TrigPoly::new(0.3, vec![], vec![]);
        let sp = assemble(&f, 0.1, 8).unwrap();
        for i in 0..sp.matrix.nrows() {
            for j in 0..sp.matrix.ncols() {
                if i != j {
                    assert_eq!(sp.matrix[(i, j)], Complex64::new(0.0, 0.0));
                }
            }
        }
        let ev = sp.eigenvalues_ascending();
        let mut expect: Vec<f64> =
            (-8i64..=8).map(|k| (TWO_PI * k as f64 * 0.1).powi(2)).collect();
        expect.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for (got, want) in ev.iter().zip(&expect) {
            assert_relative_eq!(got, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn hermitian_nonnegative_cluster_of_two() {
        let f = sample_f();
        let sp = assemble(&f, 0.1, 96).unwrap();
        let adj = sp.matrix.adjoint();
        let dev = (&sp.matrix - &adj).norm();
        assert!(dev < 1e-12, "hermiticity deviation {dev:e}");
        let ev = sp.eigenvalues_ascending();
        let scale = sp.scale();
        assert!(ev[0] > -1e-10 * scale);
        // Exactly two eigenvalues in the exponentially small cluster.
        let threshold = (-0.05 / 0.1_f64).exp();
        let below = ev.iter().filter(|e| **e < threshold).count();
        assert_eq!(below, 2);
        // The rest sits an O(h) distance up.
        assert!(ev[2] > 0.1);
    }

    #[test]
    fn zero_mode_is_resolved() {
        let f = sample_f();
        for h in [0.1, 0.08] {
            let sp = assemble(&f, h, default_cutoff(&f, h)).unwrap();
            let ev = low_spectrum(&sp, 2).unwrap();
            assert!(ev[0].abs() < 1e-12, "E1 = {:e} at h = {h}", ev[0]);
            let sim =
                cosine_similarity(&sp.ground_vector(), &zero_mode_coefficients(&f, h, sp.k_cut));
            assert!(sim > 1.0 - 1e-8, "cosine similarity {sim} at h = {h}");
        }
    }

    #[test]
    fn nonzero_eigenvalue_tracks_prediction_at_fixed_h() {
        let f = sample_f();
        let h = 0.08;
        let sp = assemble(&f, h, default_cutoff(&f, h)).unwrap();
        let ev = low_spectrum(&sp, 2).unwrap();
        let lead = 6.0 * 5.0_f64.sqrt() * h * (-9.0 * U / h).exp();
        assert!(ev[1] > 0.0);
        assert!(ev[1] < 30.0 * lead, "E2 = {:e} vs envelope {:e}", ev[1], 30.0 * lead);
        // Against the full transseries prediction the agreement is tight.
        let pred = eval_prediction(&example1_prediction().er, h);
        let ratio = ev[1] / pred;
        assert!((0.8..1.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn rate_and_prefactor_fit() {
        let f = sample_f();
        let prediction = example1_prediction();
        let grid = [0.12, 0.10, 0.09, 0.08, 0.07];
        let fit = fit_and_compare(&f, &prediction, &grid, Precision::Double).unwrap();
        let target = 9.0 * U;
        assert!(
            (fit.rate - target).abs() < 0.05 * target,
            "fitted rate {} vs {target}",
            fit.rate
        );
        assert_relative_eq!(fit.predicted_rate, target, epsilon = 1e-9);
        // Pointwise prefactor check at the smallest h, against the *leading*
        // monomial only (the h ln h correction bounds the deviation).
        let h = fit.h_grid[0];
        let lead = fit.predicted_prefactor * h.powf(fit.power) * (-target / h).exp();
        let ratio = fit.rows[0].e2 / lead;
        assert!((0.7..1.3).contains(&ratio), "prefactor ratio {ratio}");
        // Full-transseries ratio is tighter than the leading-term envelope.
        assert!((0.9..1.1).contains(&fit.ratio_at_smallest_h));
        assert_eq!(fit.residuals.len(), 5);
    }

    #[test]
    fn partner_spectrum_contains_nonzero_eigenvalue() {
        let f = sample_f();
        let h = 0.1;
        let k = default_cutoff(&f, h);
        let ev = low_spectrum(&assemble(&f, h, k).unwrap(), 3).unwrap();
        let partner = low_spectrum(&assemble_partner(&f, h, k).unwrap(), 3).unwrap();
        // Every nonzero low eigenvalue of P appears in the partner's lows.
        for e in ev.iter().filter(|e| **e > 1e-12) {
            let best = partner
                .iter()
                .map(|p| ((p - e) / e).abs())
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-8, "eigenvalue {e:e} missing from partner, best {best:e}");
        }
    }

    #[test]
    fn cutoff_too_small_is_detected() {
        let f = sample_f();
        match assemble(&f, 0.05, 2) {
            Err(OracleError::CutoffTooSmall { required, .. }) => assert!(required > 2),
            other => panic!("expected CutoffTooSmall, got {other:?}"),
        }
    }

    #[test]
    fn extended_precision_resolves_below_double_floor() {
        let f = sample_f();
        let h = 0.1;
        let sp = assemble(&f, h, 32).unwrap();
        let dd = low_spectrum_extended(&sp, 2).unwrap();
        let ev = sp.eigenvalues_ascending();
        // The nonzero eigenvalue agrees with the binary64 eigensolve...
        assert_relative_eq!(dd[1], ev[1], max_relative = 1e-10);
        // ...while the zero mode comes out *positive* (the projected operator
        // is positive semidefinite) and equal to the Fourier-tail energy of
        // e^{-f/h} beyond the cutoff -- orders of magnitude below anything
        // the binary64 eigensolve can resolve.
        assert!(dd[0] > 0.0, "dd zero mode {:e}", dd[0]);
        assert!(dd[0] < 1e-25, "dd zero mode {:e}", dd[0]);
        assert!(ev[0].abs() < 1e-12);
        // At a smaller cutoff the tail is larger but still resolved.
        let sp24 = assemble(&f, h, 24).unwrap();
        let dd24 = low_spectrum_extended(&sp24, 2).unwrap();
        assert!(dd24[0] > 0.0 && dd24[0] < 1e-17, "dd zero mode {:e}", dd24[0]);
    }

}
