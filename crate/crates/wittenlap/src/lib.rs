//! Exponential asymptotics for the low-lying spectrum of the one-dimensional
//! periodic Witten Laplacian
//!
//! ```text
//!     P = -h² d²/dq² + f'(q)² - h f''(q),      q ∈ ℝ/ℤ,
//! ```
//!
//! where `f` is a trigonometric polynomial with nondegenerate critical points.
//! The nonzero low-lying eigenvalues of `P` are exponentially small in the
//! semiclassical parameter `h`; this crate computes their asymptotic
//! expansions as transseries in the three scales `e^{c/h}`, `h` (half-integer
//! powers) and `ln h`, together with the per-interval WKB coefficients of the
//! associated eigenfunctions.
//!
//! The pipeline is
//!
//! 1. [`trigpoly`] — the potential, its critical points, and local inversion
//!    data (Taylor coefficients of the inverse of `f'` near each critical
//!    point, auxiliary one-dimensional integrals);
//! 2. [`transseries`] — the graded arithmetic the whole computation runs in;
//! 3. [`ingredients`] — monodromy/connection data per critical point and
//!    interval: the factors `μ_j`, `τ_j`, `κ`, `c'_j`, `c_j`, `M_j`, `M'_j`;
//! 4. [`quantize`] — the transfer-matrix quantization condition, its Newton
//!    polygon, and the iterative solve for the exponentially small eigenvalue
//!    branches;
//! 5. [`eigenfun`] — the recursion for the per-interval eigenfunction
//!    coefficients and its consistency (closure) checks;
//! 6. [`oracle`] — an independent Fourier-collocation eigensolver used to
//!    validate the asymptotic output at finite `h`.

pub mod eigenfun;
mod quad;
pub mod ingredients;
pub mod oracle;
pub mod quantize;
pub mod transseries;
pub mod trigpoly;

pub use transseries::{Key, TransSeries, TransseriesError, TruncationPolicy};
