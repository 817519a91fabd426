//! Truncated transseries arithmetic over the scales `e^{c/h}`, `E_r`, `h`, `ln h`.
//!
//! A [`TransSeries`] is a finite complex linear combination of monomials
//!
//! ```text
//!     e^{c/h} · E_r^m · h^k · ln^ℓ h,
//! ```
//!
//! where `c` is real, `m` is an integer (negative powers arise in intermediate
//! inverses), `k` is a half-integer, and `ℓ ≥ 0`.  `E_r` is the *formal*
//! rescaled eigenvalue symbol: it is carried as a separate grading until a
//! concrete expansion is substituted for it with [`TransSeries::substitute_er`].
//!
//! Monomials are kept in **dominance order** for `h → 0⁺`:
//!
//! * larger `c` strictly dominates (exponential scale first); at equal `c`
//!   a lower power of the formal symbol `E_r` dominates, since `E_r` stands
//!   for a quantity that is itself exponentially small;
//! * then smaller `k` dominates (`h^{-1/2}` before `h^0` before `h^{1/2}`);
//! * at equal `k`, higher powers of `ln h` dominate (`h ln h` ≻ `h`, and
//!   `ln h` ≻ `1`, while `h ln^ℓ h` ≺ `1` for every `ℓ`).
//!
//! All operations truncate through a [`TruncationPolicy`]: an exponential
//! window below the leading `c`, caps on `|m|`, `k`, `ℓ`, and a relative
//! coefficient tolerance that also absorbs the near-exact cancellations the
//! pipeline relies on.

use std::collections::BTreeMap;
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Complex coefficient type used throughout the crate.
pub type C64 = Complex64;

/// Absolute tolerance under which two exponential rates `c` are identified.
const C_TOL: f64 = 1e-9;

/// Hard cap on the number of terms of a geometric/exponential expansion.
const SERIES_CAP: usize = 64;

/// Errors from transseries arithmetic.
#[derive(Debug, Clone, thiserror::Error)]
pub enum TransseriesError {
    /// An operation that needs a leading monomial received an empty series.
    #[error("operation requires a nonempty series")]
    Empty,
    /// Inversion would leave the graded fragment: after factoring out the
    /// leading monomial, a pure `ln h` term remains at order `h^0`.
    #[error("inversion leaves the graded ring: ln h survives at order h^0 in {0}")]
    LogLeading(String),
    /// An argument that must be infinitesimal (for `exp` or a geometric
    /// expansion) contains a term that is not.
    #[error("argument is not infinitesimal: offending term {0}")]
    NotSmall(String),
    /// A value substituted for `E_r` still contains the formal symbol.
    #[error("substitution value must be free of the formal eigenvalue symbol")]
    SubstitutionNotConcrete,
    /// An expansion failed to terminate within the internal cap.
    #[error("expansion did not stabilize after {0} terms")]
    NoConvergence(usize),
    /// A serialized exponent could not be parsed as a half-integer rational.
    #[error("invalid exponent {0:?}: expected integer or half-integer p/2")]
    BadExponent(String),
}

/// Grading key of a monomial `e^{c/h} E_r^m h^{k2/2} ln^ℓ h`.
#[derive(Clone, Copy, Debug)]
pub struct Key {
    /// Exponential rate: the monomial carries `e^{c/h}`.
    pub c: f64,
    /// Power of the formal eigenvalue symbol `E_r`.
    pub m: i32,
    /// Twice the power of `h` (so `k2 = -1` means `h^{-1/2}`).
    pub k2: i32,
    /// Power of `ln h` (always ≥ 0).
    pub l: i32,
}

impl Key {
    pub const ONE: Key = Key { c: 0.0, m: 0, k2: 0, l: 0 };

    pub fn new(c: f64, m: i32, k2: i32, l: i32) -> Self {
        Key { c, m, k2, l }
    }

    /// The power of `h` as a float.
    pub fn k(&self) -> f64 {
        self.k2 as f64 / 2.0
    }

    /// Key of the product of two monomials.
    pub fn product(&self, other: &Key) -> Key {
        Key {
            c: self.c + other.c,
            m: self.m + other.m,
            k2: self.k2 + other.k2,
            l: self.l + other.l,
        }
    }

    /// Key of the reciprocal monomial.
    pub fn recip(&self) -> Key {
        Key { c: -self.c, m: -self.m, k2: -self.k2, l: -self.l }
    }

    /// Dominance comparison: `Less` means *more dominant* as `h → 0⁺`, so that
    /// ascending map order lists the leading monomial first.
    fn dominance(&self, other: &Key) -> std::cmp::Ordering {
        other
            .c
            .total_cmp(&self.c)
            .then(self.m.cmp(&other.m))
            .then(self.k2.cmp(&other.k2))
            .then(other.l.cmp(&self.l))
    }
}

impl PartialEq for Key {
    fn eq(&self, other: &Self) -> bool {
        self.dominance(other) == std::cmp::Ordering::Equal
    }
}
impl Eq for Key {}
impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.dominance(other))
    }
}
impl Ord for Key {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.dominance(other)
    }
}

impl fmt::Display for Key {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = Vec::new();
        if self.c != 0.0 {
            parts.push(format!("e^{{{:.6}/h}}", self.c));
        }
        if self.m != 0 {
            parts.push(if self.m == 1 { "Er".into() } else { format!("Er^{}", self.m) });
        }
        if self.k2 != 0 {
            parts.push(format!("h^{}", fmt_k2(self.k2)));
        }
        if self.l != 0 {
            parts.push(if self.l == 1 { "ln h".into() } else { format!("ln^{} h", self.l) });
        }
        if parts.is_empty() {
            write!(f, "1")
        } else {
            write!(f, "{}", parts.join(" "))
        }
    }
}

/// Formats `k2/2` as a reduced rational string: `"2"`, `"-1/2"`, `"3/2"`.
pub fn fmt_k2(k2: i32) -> String {
    if k2 % 2 == 0 {
        format!("{}", k2 / 2)
    } else {
        format!("{}/2", k2)
    }
}

/// Parses an exponent string produced by [`fmt_k2`] back into `k2`.
pub fn parse_k2(s: &str) -> Result<i32, TransseriesError> {
    let bad = || TransseriesError::BadExponent(s.to_string());
    match s.split_once('/') {
        None => s.trim().parse::<i32>().map(|k| 2 * k).map_err(|_| bad()),
        Some((p, q)) => {
            let p: i32 = p.trim().parse().map_err(|_| bad())?;
            let q: i32 = q.trim().parse().map_err(|_| bad())?;
            match q {
                1 => Ok(2 * p),
                2 => Ok(p),
                _ => Err(bad()),
            }
        }
    }
}

/// Truncation policy applied by every arithmetic operation.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TruncationPolicy {
    /// Monomials with `c < c_leading - window` are dropped.
    pub window: f64,
    /// Monomials with `|m| > max_m` are dropped.
    pub max_m: i32,
    /// Monomials with `k2/2 > max_k` are dropped (`k2 > 2·max_k`).
    pub max_k2: i32,
    /// Monomials with `ℓ > max_l` are dropped.
    pub max_l: i32,
    /// Coefficients below `coeff_tol · max|coefficient|` are pruned.
    pub coeff_tol: f64,
}

impl TruncationPolicy {
    /// Policy sized to a problem whose largest action gap (largest `|c|`
    /// carried by a single transfer-matrix factor) is `max_gap`: the
    /// exponential window is four times that gap.
    pub fn for_action_gap(max_gap: f64) -> Self {
        TruncationPolicy { window: 4.0 * max_gap, ..Default::default() }
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        TruncationPolicy { window: 8.0, max_m: 4, max_k2: 4, max_l: 2, coeff_tol: 1e-12 }
    }
}

/// Serialized form of a single monomial.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TermRecord {
    /// Exponential rate `c` of `e^{c/h}`.
    pub c: f64,
    /// Power of the formal symbol `E_r`.
    pub m: i32,
    /// Power of `h` as a rational string with denominator 1 or 2.
    pub k: String,
    /// Power of `ln h`.
    pub l: i32,
    /// Real part of the coefficient.
    pub re: f64,
    /// Imaginary part of the coefficient.
    pub im: f64,
}

/// A truncated transseries: a finite sum of graded monomials in dominance order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TransSeries {
    terms: BTreeMap<Key, C64>,
}

impl TransSeries {
    /// The zero series.
    pub fn zero() -> Self {
        TransSeries::default()
    }

    /// The constant series `1`.
    pub fn one() -> Self {
        TransSeries::constant(C64::new(1.0, 0.0))
    }

    /// A constant series.
    pub fn constant(v: C64) -> Self {
        TransSeries::monomial(Key::ONE, v)
    }

    /// A real constant series.
    pub fn real(v: f64) -> Self {
        TransSeries::constant(C64::new(v, 0.0))
    }

    /// A single monomial `coeff · e^{c/h} E_r^m h^{k2/2} ln^ℓ h`.
    pub fn monomial(key: Key, coeff: C64) -> Self {
        let mut t = TransSeries::default();
        if coeff != C64::new(0.0, 0.0) {
            t.terms.insert(key, coeff);
        }
        t
    }

    /// The formal symbol `E_r`.
    pub fn er() -> Self {
        TransSeries::monomial(Key::new(0.0, 1, 0, 0), C64::new(1.0, 0.0))
    }

    /// The monomial `h^{k2/2}`.
    pub fn h_pow(k2: i32) -> Self {
        TransSeries::monomial(Key::new(0.0, 0, k2, 0), C64::new(1.0, 0.0))
    }

    /// The monomial `ln h`.
    pub fn ln_h() -> Self {
        TransSeries::monomial(Key::new(0.0, 0, 0, 1), C64::new(1.0, 0.0))
    }

    /// The monomial `e^{c/h}`.
    pub fn exp_rate(c: f64) -> Self {
        TransSeries::monomial(Key::new(c, 0, 0, 0), C64::new(1.0, 0.0))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Iterates monomials in dominance order (leading first).
    pub fn iter(&self) -> impl Iterator<Item = (&Key, &C64)> {
        self.terms.iter()
    }

    /// The leading (most dominant) monomial, if any.
    pub fn leading(&self) -> Option<(Key, C64)> {
        self.terms.iter().next().map(|(k, v)| (*k, *v))
    }

    /// The exponential type: the `c` of the leading monomial.
    pub fn exponential_type(&self) -> Option<f64> {
        self.leading().map(|(k, _)| k.c)
    }

    /// Adds `coeff` onto the monomial `key`, merging exponential rates that
    /// agree within an absolute tolerance (the first-seen rate is kept).
    pub fn insert_add(&mut self, key: Key, coeff: C64) {
        if coeff == C64::new(0.0, 0.0) {
            return;
        }
        let lo = Key { c: key.c + C_TOL, m: i32::MAX, k2: i32::MIN, l: i32::MAX };
        let hi = Key { c: key.c - C_TOL, m: i32::MIN, k2: i32::MAX, l: i32::MIN };
        let mut found: Option<Key> = None;
        for (k, _) in self.terms.range(lo..=hi) {
            if k.m == key.m && k.k2 == key.k2 && k.l == key.l {
                found = Some(*k);
                break;
            }
        }
        match found {
            Some(k) => {
                let entry = self.terms.get_mut(&k).expect("key just located");
                *entry += coeff;
                if entry.norm() == 0.0 {
                    self.terms.remove(&k);
                }
            }
            None => {
                self.terms.insert(key, coeff);
            }
        }
    }

    /// Coefficient of the monomial with the given grading (rate matched within
    /// tolerance); zero if absent.
    pub fn coeff(&self, c: f64, m: i32, k2: i32, l: i32) -> C64 {
        let lo = Key { c: c + C_TOL, m: i32::MAX, k2: i32::MIN, l: i32::MAX };
        let hi = Key { c: c - C_TOL, m: i32::MIN, k2: i32::MAX, l: i32::MIN };
        for (k, v) in self.terms.range(lo..=hi) {
            if k.m == m && k.k2 == k2 && k.l == l {
                return *v;
            }
        }
        C64::new(0.0, 0.0)
    }

    /// Largest coefficient magnitude.
    pub fn max_coeff(&self) -> f64 {
        self.terms.values().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Removes coefficients below `tol · max|coefficient|`.
    pub fn prune(&mut self, tol: f64) {
        let cutoff = self.max_coeff() * tol;
        self.terms.retain(|_, v| v.norm() > cutoff && v.is_finite());
    }

    /// Applies the truncation policy in place, with the exponential window
    /// measured from this series' own leading rate.
    pub fn truncate(&mut self, policy: &TruncationPolicy) {
        if let Some(c_lead) = self.exponential_type() {
            self.truncate_floor(policy, c_lead - policy.window);
        } else {
            self.prune(policy.coeff_tol);
        }
    }

    /// Applies the policy caps with an explicit absolute floor on the rate.
    /// Used inside geometric/exponential expansions, where each power must be
    /// truncated relative to the rate of the *result*, not its own.
    pub fn truncate_floor(&mut self, policy: &TruncationPolicy, floor: f64) {
        self.terms.retain(|k, _| {
            k.c >= floor - C_TOL
                && k.m.abs() <= policy.max_m
                && k.k2 <= policy.max_k2
                && k.l <= policy.max_l
        });
        self.prune(policy.coeff_tol);
    }

    /// Returns a truncated copy.
    pub fn truncated(&self, policy: &TruncationPolicy) -> Self {
        let mut t = self.clone();
        t.truncate(policy);
        t
    }

    pub fn add(&self, other: &TransSeries) -> TransSeries {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.insert_add(*k, *v);
        }
        out
    }

    pub fn sub(&self, other: &TransSeries) -> TransSeries {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.insert_add(*k, -*v);
        }
        out
    }

    pub fn neg(&self) -> TransSeries {
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v = -*v;
        }
        out
    }

    pub fn scale(&self, s: C64) -> TransSeries {
        if s == C64::new(0.0, 0.0) {
            return TransSeries::zero();
        }
        let mut out = self.clone();
        for v in out.terms.values_mut() {
            *v *= s;
        }
        out
    }

    pub fn scale_real(&self, s: f64) -> TransSeries {
        self.scale(C64::new(s, 0.0))
    }

    /// Multiplies by a single monomial (no truncation needed).
    pub fn mul_mono(&self, key: Key, coeff: C64) -> TransSeries {
        let mut out = TransSeries::default();
        for (k, v) in self.iter() {
            out.insert_add(k.product(&key), *v * coeff);
        }
        out
    }

    pub fn mul(&self, other: &TransSeries, policy: &TruncationPolicy) -> TransSeries {
        let mut out = TransSeries::default();
        for (ka, va) in self.iter() {
            for (kb, vb) in other.iter() {
                out.insert_add(ka.product(kb), va * vb);
            }
        }
        out.truncate(policy);
        out
    }

    /// Integer power (`n ≥ 0`); use [`TransSeries::invert`] first for negative powers.
    pub fn pow_u(&self, n: u32, policy: &TruncationPolicy) -> TransSeries {
        let mut out = TransSeries::one();
        for _ in 0..n {
            out = out.mul(self, policy);
        }
        out
    }

    /// Checks whether a monomial is infinitesimal in the graded sense used for
    /// geometric and exponential expansions: strictly negative rate, or at
    /// rate zero a positive power of the formal symbol `E_r` (with `k ≥ 0`) or
    /// a positive power of `h`.
    fn is_small(key: &Key) -> bool {
        if key.l < 0 {
            return false;
        }
        if key.c < -C_TOL {
            return true;
        }
        if key.c.abs() <= C_TOL {
            (key.m > 0 && key.k2 >= 0) || (key.m == 0 && key.k2 > 0)
        } else {
            false
        }
    }

    fn ensure_small(&self) -> Result<(), TransseriesError> {
        for (k, _) in self.iter() {
            if !Self::is_small(k) {
                // A negative ln-power can only come from dividing through a
                // leading monomial that carried ln h: the inverse would need
                // rational functions of ln h.
                if k.l < 0 || (k.m == 0 && k.c.abs() <= C_TOL && k.k2 == 0 && k.l > 0) {
                    return Err(TransseriesError::LogLeading(k.to_string()));
                }
                return Err(TransseriesError::NotSmall(k.to_string()));
            }
        }
        Ok(())
    }

    /// Multiplicative inverse.  Factors out the leading monomial `L·key` and
    /// expands `1/(1+r)` geometrically; fails with [`TransseriesError::LogLeading`]
    /// if the remainder keeps a pure `ln h` term at order `h^0`, i.e. if the
    /// inverse does not live in the graded fragment.
    pub fn invert(&self, policy: &TruncationPolicy) -> Result<TransSeries, TransseriesError> {
        let (lk, lv) = self.leading().ok_or(TransseriesError::Empty)?;
        // r = self / (lv·lk) - 1
        let mut r = self.mul_mono(lk.recip(), C64::new(1.0, 0.0) / lv);
        r.insert_add(Key::ONE, C64::new(-1.0, 0.0));
        // The remainder is normalized (leading divided out), so an absolute
        // threshold is appropriate: a lone 1e-16 roundoff residue must not be
        // kept as the remainder's "largest" term.
        r.terms.retain(|_, v| v.norm() > policy.coeff_tol && v.is_finite());
        r.ensure_small()?;
        // 1/(1+r) = Σ (-r)^n
        let neg_r = r.neg();
        let floor = -policy.window;
        let mut sum = TransSeries::one();
        let mut pow = TransSeries::one();
        for n in 0..SERIES_CAP {
            pow = pow.mul(&neg_r, policy);
            pow.truncate_floor(policy, floor);
            if pow.is_zero() {
                break;
            }
            sum = sum.add(&pow);
            if n + 1 == SERIES_CAP {
                return Err(TransseriesError::NoConvergence(SERIES_CAP));
            }
        }
        sum.truncate(policy);
        Ok(sum.mul_mono(lk.recip(), C64::new(1.0, 0.0) / lv))
    }

    /// `exp` of an infinitesimal series.
    pub fn exp_small(&self, policy: &TruncationPolicy) -> Result<TransSeries, TransseriesError> {
        self.ensure_small()?;
        let floor = -policy.window;
        let mut sum = TransSeries::one();
        let mut pow = TransSeries::one();
        let mut factorial = 1.0;
        for n in 0..SERIES_CAP {
            pow = pow.mul(self, policy);
            pow.truncate_floor(policy, floor);
            if pow.is_zero() {
                break;
            }
            factorial *= (n + 1) as f64;
            sum = sum.add(&pow.scale_real(1.0 / factorial));
            if n + 1 == SERIES_CAP {
                return Err(TransseriesError::NoConvergence(SERIES_CAP));
            }
        }
        sum.truncate(policy);
        Ok(sum)
    }

    /// True if the series contains the formal symbol `E_r` (some `m ≠ 0`).
    pub fn contains_er(&self) -> bool {
        self.terms.keys().any(|k| k.m != 0)
    }

    /// Substitutes a concrete expansion `v` (free of `E_r`) for the formal
    /// symbol: `E_r^m → v^m`.  Negative powers require `v` to be invertible.
    pub fn substitute_er(
        &self,
        v: &TransSeries,
        policy: &TruncationPolicy,
    ) -> Result<TransSeries, TransseriesError> {
        if v.contains_er() {
            return Err(TransseriesError::SubstitutionNotConcrete);
        }
        let mut by_m: BTreeMap<i32, TransSeries> = BTreeMap::new();
        for (k, c) in self.iter() {
            by_m
                .entry(k.m)
                .or_default()
                .insert_add(Key { m: 0, ..*k }, *c);
        }
        let needs_inverse = by_m.keys().any(|m| *m < 0);
        let v_inv = if needs_inverse { Some(v.invert(policy)?) } else { None };
        let mut out = TransSeries::zero();
        for (m, part) in by_m {
            let factor = if m >= 0 {
                v.pow_u(m as u32, policy)
            } else {
                v_inv
                    .as_ref()
                    .expect("inverse computed when negative powers present")
                    .pow_u((-m) as u32, policy)
            };
            out = out.add(&part.mul(&factor, policy));
        }
        out.truncate(policy);
        Ok(out)
    }

    /// Substitutes `E_r → e^{t/h} (r0 + E_r)` where `r0` is free of `E_r` and
    /// the surviving symbol `E_r` names the next, smaller unknown correction.
    /// Used by the Newton-polygon recursion.  Only nonnegative powers of the
    /// symbol may be present.
    pub fn substitute_er_shifted(
        &self,
        t: f64,
        r0: &TransSeries,
        policy: &TruncationPolicy,
    ) -> Result<TransSeries, TransseriesError> {
        if r0.contains_er() {
            return Err(TransseriesError::SubstitutionNotConcrete);
        }
        let mut by_m: BTreeMap<i32, TransSeries> = BTreeMap::new();
        let mut m_max = 0;
        for (k, c) in self.iter() {
            if k.m < 0 {
                return Err(TransseriesError::NotSmall(k.to_string()));
            }
            m_max = m_max.max(k.m);
            by_m
                .entry(k.m)
                .or_default()
                .insert_add(Key { m: 0, ..*k }, *c);
        }
        // Powers of r0.
        let mut r0_pows = vec![TransSeries::one()];
        for p in 1..=m_max as usize {
            let next = r0_pows[p - 1].mul(r0, policy);
            r0_pows.push(next);
        }
        let mut out = TransSeries::zero();
        for (m, part) in by_m {
            // (r0 + E_r)^m e^{mt/h} = Σ_j C(m,j) r0^{m-j} E_r^j e^{mt/h}
            let mut binom = 1.0f64;
            for j in 0..=m {
                if j > 0 {
                    binom *= (m - j + 1) as f64 / j as f64;
                }
                let key = Key::new(m as f64 * t, j, 0, 0);
                let factor = r0_pows[(m - j) as usize]
                    .mul_mono(key, C64::new(binom, 0.0));
                out = out.add(&part.mul(&factor, policy));
            }
        }
        out.truncate(policy);
        Ok(out)
    }

    /// Multiplies every monomial's rate by shifting: `e^{c/h} → e^{(c+dc)/h}`.
    pub fn shift_rate(&self, dc: f64) -> TransSeries {
        self.mul_mono(Key::new(dc, 0, 0, 0), C64::new(1.0, 0.0))
    }

    /// Serializes to monomial records in dominance order.
    pub fn to_records(&self) -> Vec<TermRecord> {
        self.iter()
            .map(|(k, v)| TermRecord {
                c: k.c,
                m: k.m,
                k: fmt_k2(k.k2),
                l: k.l,
                re: v.re,
                im: v.im,
            })
            .collect()
    }

    /// Deserializes from monomial records.
    pub fn from_records(records: &[TermRecord]) -> Result<Self, TransseriesError> {
        let mut out = TransSeries::zero();
        for r in records {
            let k2 = parse_k2(&r.k)?;
            out.insert_add(Key::new(r.c, r.m, k2, r.l), C64::new(r.re, r.im));
        }
        Ok(out)
    }
}

impl Serialize for TransSeries {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_records().serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for TransSeries {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let records = Vec::<TermRecord>::deserialize(deserializer)?;
        TransSeries::from_records(&records).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for TransSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (k, v) in self.iter() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            if v.im == 0.0 {
                write!(f, "({:.9})", v.re)?;
            } else {
                write!(f, "({:.9}{:+.9}i)", v.re, v.im)?;
            }
            if *k != Key::ONE {
                write!(f, "·{}", k)?;
            }
        }
        Ok(())
    }
}
