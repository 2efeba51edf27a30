//! Exact rational arithmetic for the averaged right shift on `ℓ²` and for
//! rational rotations.
//!
//! Starting from `x₀ = e₁`, the iterates of `T = ½(Id + R)` are
//! `x_n = 2⁻ⁿ Σ_k C(n,k) e_{k+1}`, so every quantity of interest is a ratio of
//! binomial coefficients and can be checked with zero tolerance.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExactError {
    #[error("cos θ vanishes for θ = 2π·{k}/{l}; the averaged rotation collapses to zero")]
    DegenerateTheta { k: i64, l: i64 },
    #[error("invalid argument: {0}")]
    Invalid(String),
}

/// Sparse vector over `ℚ` indexed by basis position `k ≥ 1`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct QVector {
    entries: BTreeMap<usize, BigRational>,
}

impl QVector {
    pub fn zero() -> Self {
        Self::default()
    }

    /// `e_k`, with `k ≥ 1`.
    pub fn basis(k: usize) -> Self {
        assert!(k >= 1, "basis indices start at 1");
        let mut v = Self::zero();
        v.set(k, BigRational::one());
        v
    }

    pub fn set(&mut self, k: usize, value: BigRational) {
        if value.is_zero() {
            self.entries.remove(&k);
        } else {
            self.entries.insert(k, value);
        }
    }

    pub fn get(&self, k: usize) -> BigRational {
        self.entries.get(&k).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn support_len(&self) -> usize {
        self.entries.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &BigRational)> {
        self.entries.iter().map(|(&k, v)| (k, v))
    }

    pub fn dot(&self, other: &Self) -> BigRational {
        let (small, large) = if self.support_len() <= other.support_len() {
            (self, other)
        } else {
            (other, self)
        };
        small
            .iter()
            .filter_map(|(k, a)| large.entries.get(&k).map(|b| a * b))
            .fold(BigRational::zero(), |acc, t| acc + t)
    }

    pub fn norm_sq(&self) -> BigRational {
        self.dot(self)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (k, b) in other.iter() {
            let v = out.get(k) - b;
            out.set(k, v);
        }
        out
    }

    pub fn scale(&self, factor: &BigRational) -> Self {
        let mut out = Self::zero();
        for (k, a) in self.iter() {
            out.set(k, a * factor);
        }
        out
    }

    /// `(ξ₁, ξ₂, …) ↦ (0, ξ₁, ξ₂, …)`.
    pub fn right_shift(&self) -> Self {
        Self {
            entries: self.iter().map(|(k, a)| (k + 1, a.clone())).collect(),
        }
    }

    /// Dense `f64` coordinates `ξ₁ … ξ_dim`.
    pub fn to_f64_dense(&self, dim: usize) -> Vec<f64> {
        (1..=dim).map(|k| ratio_to_f64(&self.get(k))).collect()
    }
}

/// One application of `½(Id + R)`.
pub fn shift_apply_exact(x: &QVector) -> QVector {
    let half = BigRational::new(1.into(), 2.into());
    let shifted = x.right_shift();
    let mut out = x.scale(&half);
    for (k, a) in shifted.iter() {
        let v = out.get(k) + a * &half;
        out.set(k, v);
    }
    out
}

pub fn ratio_to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}

/// `"num/den"` in lowest terms, `"num"` when the denominator is 1.
pub fn format_ratio(q: &BigRational) -> String {
    if q.denom().is_one() {
        q.numer().to_string()
    } else {
        format!("{}/{}", q.numer(), q.denom())
    }
}

/// `C(n, k)`, zero outside `0 ≤ k ≤ n`.
pub fn binomial(n: u64, k: i64) -> BigInt {
    if k < 0 || k as u64 > n {
        return BigInt::zero();
    }
    let k = (k as u64).min(n - k as u64);
    let mut acc = BigInt::one();
    for i in 0..k {
        // C(n, i+1) = C(n, i)·(n−i)/(i+1), exact at every step
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

fn pow2(e: u64) -> BigInt {
    BigInt::one() << e
}

fn ratio(num: BigInt, den: BigInt) -> BigRational {
    BigRational::new(num, den)
}

/// `C(m+n, r) = Σ_{k=0}^{r} C(m,k)·C(n,r−k)`.
pub fn vandermonde_check(m: u64, n: u64, r: u64) -> bool {
    let rhs = (0..=r as i64).fold(BigInt::zero(), |acc, k| {
        acc + binomial(m, k) * binomial(n, r as i64 - k)
    });
    binomial(m + n, r as i64) == rhs
}

/// Pascal table rows `0..=max`.
fn pascal(max: usize) -> Vec<Vec<BigInt>> {
    let mut rows: Vec<Vec<BigInt>> = vec![vec![BigInt::one()]];
    for n in 1..=max {
        let prev = &rows[n - 1];
        let mut row = vec![BigInt::one(); n + 1];
        for k in 1..n {
            row[k] = &prev[k - 1] + &prev[k];
        }
        rows.push(row);
    }
    rows
}

/// Checks the identity for every `0 ≤ m, n, r ≤ max`; returns the first
/// failing triple, if any.
pub fn vandermonde_sweep(max: u64) -> Option<(u64, u64, u64)> {
    let table = pascal(2 * max as usize);
    let c = |n: u64, k: i64| -> BigInt {
        if k < 0 || k as u64 > n {
            BigInt::zero()
        } else {
            table[n as usize][k as usize].clone()
        }
    };
    for m in 0..=max {
        for n in 0..=max {
            for r in 0..=max {
                let rhs = (0..=r as i64).fold(BigInt::zero(), |acc, k| acc + c(m, k) * c(n, r as i64 - k));
                if c(m + n, r as i64) != rhs {
                    return Some((m, n, r));
                }
            }
        }
    }
    None
}

/// `x_n = 2⁻ⁿ Σ_{k=0}^{n} C(n,k) e_{k+1}`.
pub fn shift_iterate_exact(n: u64) -> QVector {
    let den = pow2(n);
    let mut x = QVector::zero();
    for k in 0..=n {
        x.set(k as usize + 1, ratio(binomial(n, k as i64), den.clone()));
    }
    x
}

/// `‖x_n‖² = C(2n,n)/4ⁿ`.
pub fn shift_norm_sq_exact(n: u64) -> BigRational {
    ratio(binomial(2 * n, n as i64), pow2(2 * n))
}

/// `⟨x_n, x_{n+1}⟩ = C(2n+1,n)/(2·4ⁿ)`.
pub fn shift_inner_exact(n: u64) -> BigRational {
    ratio(binomial(2 * n + 1, n as i64), pow2(2 * n + 1))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffNormSq {
    pub expansion: BigRational,
    pub closed_form: BigRational,
}

impl DiffNormSq {
    pub fn agree(&self) -> bool {
        self.expansion == self.closed_form
    }
}

/// `‖x_n − x_{n+1}‖²` by expanding the square and by `‖x_n‖²/(2(n+1))`.
pub fn shift_diff_norm_sq_exact(n: u64) -> DiffNormSq {
    let two = BigRational::from_integer(2.into());
    let expansion = shift_norm_sq_exact(n) + shift_norm_sq_exact(n + 1) - two * shift_inner_exact(n);
    let closed_form = shift_norm_sq_exact(n) / BigRational::from_integer(BigInt::from(2 * (n + 1)));
    DiffNormSq { expansion, closed_form }
}

/// `⟨x_{n+1}, x_n − x_{n+1}⟩`, computed on the exact iterates.
pub fn shift_orthogonality_exact(n: u64) -> BigRational {
    let x = shift_iterate_exact(n);
    let y = shift_iterate_exact(n + 1);
    y.dot(&x.sub(&y))
}

/// Square of coordinate `k ≥ 1` of `x_n/‖x_n‖`: `C(n,k−1)²/C(2n,n)`.
pub fn normalized_iterate_coord_sq(n: u64, k: u64) -> BigRational {
    assert!(k >= 1, "coordinates start at 1");
    let c = binomial(n, k as i64 - 1);
    ratio(&c * &c, binomial(2 * n, n as i64))
}

/// Square of coordinate `k ≥ 1` of `(x_n − x_{n+1})/‖x_n − x_{n+1}‖`:
/// `(C(n,k−1) − C(n,k−2))²·(n+1)/(2·C(2n,n))`.
pub fn normalized_diff_coord_sq(n: u64, k: u64) -> BigRational {
    assert!(k >= 1, "coordinates start at 1");
    let d = binomial(n, k as i64 - 1) - binomial(n, k as i64 - 2);
    ratio(
        &d * &d * BigInt::from(n + 1),
        BigInt::from(2) * binomial(2 * n, n as i64),
    )
}

/// Coordinate `k` of `x_n/‖x_n‖`, i.e. `C(n,k−1)/√C(2n,n)`.
pub fn shift_coordinate_proxy(n: u64, k: u64) -> f64 {
    ratio_to_f64(&normalized_iterate_coord_sq(n, k)).sqrt()
}

/// `true` iff `√q < bound` where `bound = 10^(−exp10)`, decided exactly.
pub fn sqrt_below_pow10(q: &BigRational, exp10: u32) -> bool {
    let scale = BigInt::from(10).pow(2 * exp10);
    q.numer() * scale < *q.denom()
}

/// `√(πn)·C(2n,n)/4ⁿ` through `ln C(2n,n) = Σ_{i=1}^{n} ln(1 + n/i)`.
pub fn stirling_ratio(n: u64) -> f64 {
    assert!(n >= 1, "stirling_ratio needs n ≥ 1");
    let nf = n as f64;
    let ln_central: f64 = (1..=n).map(|i| (nf / i as f64).ln_1p()).sum();
    (ln_central - nf * 4f64.ln() + 0.5 * (std::f64::consts::PI * nf).ln()).exp()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RotationClusters {
    pub count: usize,
    /// Distinct direction angles as reduced fractions of a full turn in `[0, 1)`.
    pub angles: Vec<Ratio<i64>>,
    pub cos_negative: bool,
}

/// Distinct directions of `sign(cos θ)ⁿ·R_{nθ}x₀` for `θ = 2π·k/l`.
pub fn rational_rotation_cluster_count(k: i64, l: i64) -> Result<RotationClusters, ExactError> {
    if l <= 0 {
        return Err(ExactError::Invalid(format!("l must be positive, got {l}")));
    }
    let one = Ratio::from_integer(1);
    let q = {
        let r = Ratio::new(k, l);
        r - r.floor()
    };
    let quarter = Ratio::new(1, 4);
    let three_quarters = Ratio::new(3, 4);
    if q == quarter || q == three_quarters {
        return Err(ExactError::DegenerateTheta { k, l });
    }
    let cos_negative = q > quarter && q < three_quarters;
    let half = Ratio::new(1, 2);
    // (sign, nθ mod 2π) repeats with period dividing 2l
    let mut angles = BTreeSet::new();
    for n in 0..2 * l {
        let mut a = q * n;
        if cos_negative && n % 2 == 1 {
            a += half;
        }
        a -= a.floor();
        debug_assert!(a < one);
        angles.insert(a);
    }
    Ok(RotationClusters {
        count: angles.len(),
        angles: angles.into_iter().collect(),
        cos_negative,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdentityResult {
    pub name: String,
    pub max_n: u64,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub first_failure: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub identities: Vec<IdentityResult>,
    pub pass: bool,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for id in &self.identities {
            let status = if id.pass { "PASS" } else { "FAIL" };
            write!(f, "{status}  {:<28} max_n={}", id.name, id.max_n)?;
            if let Some(s) = &id.first_failure {
                write!(f, "  first failure: {s}")?;
            }
            writeln!(f)?;
        }
        write!(f, "overall: {}", if self.pass { "PASS" } else { "FAIL" })
    }
}

fn identity(name: &str, max_n: u64, failure: Option<String>, sample: Option<String>) -> IdentityResult {
    IdentityResult {
        name: name.into(),
        max_n,
        pass: failure.is_none(),
        first_failure: failure,
        sample,
    }
}

/// The five shift identities for `n = 0..=max_n`, each checked against the
/// exact iterates.
pub fn shift_identities(max_n: u64) -> Vec<IdentityResult> {
    let iterates: Vec<QVector> = (0..=max_n + 1).map(shift_iterate_exact).collect();
    let mut norm = None;
    let mut inner = None;
    let mut diff = None;
    let mut orth = None;
    let mut decrease = None;
    for n in 0..=max_n {
        let (x, y) = (&iterates[n as usize], &iterates[n as usize + 1]);
        let i = n as usize;
        if norm.is_none() && shift_norm_sq_exact(n) != x.norm_sq() {
            norm = Some(format!("n={i}"));
        }
        if inner.is_none() && shift_inner_exact(n) != x.dot(y) {
            inner = Some(format!("n={i}"));
        }
        let d = shift_diff_norm_sq_exact(n);
        if diff.is_none() && (!d.agree() || d.closed_form != x.sub(y).norm_sq()) {
            diff = Some(format!("n={i}"));
        }
        if orth.is_none() && !y.dot(&x.sub(y)).is_zero() {
            orth = Some(format!("n={i}"));
        }
        if decrease.is_none() && (shift_norm_sq_exact(n + 1) >= shift_norm_sq_exact(n) || x == y) {
            decrease = Some(format!("n={i}"));
        }
    }
    vec![
        identity("norm_sq", max_n, norm, Some(format_ratio(&shift_norm_sq_exact(max_n)))),
        identity("inner", max_n, inner, Some(format_ratio(&shift_inner_exact(max_n)))),
        identity(
            "diff_norm_sq",
            max_n,
            diff,
            Some(format_ratio(&shift_diff_norm_sq_exact(max_n).closed_form)),
        ),
        identity("orthogonality", max_n, orth, Some("0".into())),
        identity("strict_norm_decrease", max_n, decrease, None),
    ]
}

/// Coordinates `1..=5` of both normalized sequences are below `1e−6` at
/// `n = horizon`, while each normalized vector has squared norm exactly 1.
pub fn weak_proxy_identity(horizon: u64) -> IdentityResult {
    let mut failure = None;
    for k in 1..=5 {
        if !sqrt_below_pow10(&normalized_iterate_coord_sq(horizon, k), 6) {
            failure.get_or_insert(format!("iterate coordinate k={k}"));
        }
        if !sqrt_below_pow10(&normalized_diff_coord_sq(horizon, k), 6) {
            failure.get_or_insert(format!("difference coordinate k={k}"));
        }
    }
    let iterate_sum = (1..=horizon + 1).fold(BigRational::zero(), |acc, k| {
        acc + normalized_iterate_coord_sq(horizon, k)
    });
    let diff_sum = (1..=horizon + 2).fold(BigRational::zero(), |acc, k| acc + normalized_diff_coord_sq(horizon, k));
    if !iterate_sum.is_one() {
        failure.get_or_insert("normalized iterate norm ≠ 1".into());
    }
    if !diff_sum.is_one() {
        failure.get_or_insert("normalized difference norm ≠ 1".into());
    }
    let sample = format!("{:e}", shift_coordinate_proxy(horizon, 1));
    identity("weak_proxy", horizon, failure, Some(sample))
}

pub fn stirling_identity() -> IdentityResult {
    let r100 = stirling_ratio(100);
    let r10k = stirling_ratio(10_000);
    let mut failure = None;
    if (r100 - 1.0).abs() > 2e-3 {
        failure = Some(format!("n=100 ratio {r100}"));
    } else if (r10k - 1.0).abs() > 2e-5 {
        failure = Some(format!("n=10000 ratio {r10k}"));
    }
    identity("stirling_ratio", 10_000, failure, Some(format!("{r100} {r10k}")))
}

/// Cluster counts respect `≤ 2l`, and `≤ l` when `cos θ > 0`, over
/// `1 ≤ l ≤ max_l`, `0 ≤ k < l`.
pub fn rotation_bound_identity(max_l: i64) -> IdentityResult {
    let mut failure = None;
    'outer: for l in 1..=max_l {
        for k in 0..l {
            match rational_rotation_cluster_count(k, l) {
                Ok(c) => {
                    let bound = if c.cos_negative { 2 * l } else { l } as usize;
                    if c.count > bound {
                        failure = Some(format!("k={k}, l={l}: {} > {bound}", c.count));
                        break 'outer;
                    }
                }
                Err(ExactError::DegenerateTheta { .. }) => {}
                Err(e) => {
                    failure = Some(e.to_string());
                    break 'outer;
                }
            }
        }
    }
    identity("rotation_cluster_bound", max_l as u64, failure, None)
}

/// Every identity, with the shift identities checked up to `max_n`.
pub fn oracle_report(max_n: u64) -> OracleReport {
    let mut identities = shift_identities(max_n);
    let vm = vandermonde_sweep(50);
    identities.push(identity(
        "vandermonde",
        50,
        vm.map(|(m, n, r)| format!("m={m}, n={n}, r={r}")),
        None,
    ));
    identities.push(stirling_identity());
    identities.push(weak_proxy_identity(1000));
    identities.push(rotation_bound_identity(24));
    let pass = identities.iter().all(|i| i.pass);
    OracleReport { identities, pass }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fejer::iterate;
    use crate::operators::OperatorSpec;
    use crate::vectorspace::Vector;
    use proptest::prelude::*;

    fn q(num: i64, den: i64) -> BigRational {
        BigRational::new(num.into(), den.into())
    }

    fn factorial(n: u64) -> BigInt {
        (1..=n).fold(BigInt::one(), |acc, i| acc * BigInt::from(i))
    }

    fn factorial_binomial(n: u64, k: u64) -> BigInt {
        factorial(n) / (factorial(k) * factorial(n - k))
    }

    #[test]
    fn binomial_examples() {
        assert_eq!(binomial(5, 2), BigInt::from(10));
        assert_eq!(binomial(7, 0), BigInt::one());
        assert_eq!(binomial(3, 4), BigInt::zero());
        assert_eq!(binomial(3, -1), BigInt::zero());
        let c = binomial(200, 100);
        assert_eq!(c.to_string().len(), 59);
        assert_eq!(c, factorial_binomial(200, 100));
    }

    #[test]
    fn binomial_matches_pascal() {
        let table = pascal(60);
        for n in 0..=60u64 {
            for k in 0..=n {
                assert_eq!(binomial(n, k as i64), table[n as usize][k as usize]);
            }
        }
    }

    #[test]
    fn vandermonde_examples() {
        assert!(vandermonde_check(2, 2, 2));
        assert!(vandermonde_check(3, 4, 2));
        assert!(vandermonde_check(5, 9, 0));
        assert!(vandermonde_check(3, 2, 7));
    }

    #[test]
    fn frozen_first_factor_is_not_an_identity() {
        // Σ_k C(m,r)·C(n,r−k) with the first factor frozen at r
        let frozen = |m: u64, n: u64, r: u64| {
            (0..=r as i64).fold(BigInt::zero(), |acc, k| {
                acc + binomial(m, r as i64) * binomial(n, r as i64 - k)
            })
        };
        assert_ne!(frozen(2, 2, 2), binomial(4, 2));
        assert_eq!(vandermonde_sweep(12), None);
    }

    #[test]
    fn shift_iterate_examples() {
        let x0 = shift_iterate_exact(0);
        assert_eq!(x0, QVector::basis(1));
        let x1 = shift_iterate_exact(1);
        assert_eq!((x1.get(1), x1.get(2)), (q(1, 2), q(1, 2)));
        let x2 = shift_iterate_exact(2);
        assert_eq!((x2.get(1), x2.get(2), x2.get(3)), (q(1, 4), q(1, 2), q(1, 4)));
        assert_eq!(shift_iterate_exact(17).support_len(), 18);
    }

    #[test]
    fn closed_form_iterates_match_repeated_application() {
        let mut x = QVector::basis(1);
        for n in 0..=40 {
            assert_eq!(x, shift_iterate_exact(n));
            x = shift_apply_exact(&x);
        }
    }

    #[test]
    fn norm_inner_diff_examples() {
        assert_eq!(shift_norm_sq_exact(0), q(1, 1));
        assert_eq!(shift_norm_sq_exact(1), q(1, 2));
        assert_eq!(shift_norm_sq_exact(2), q(3, 8));
        assert_eq!(shift_inner_exact(0), q(1, 2));
        assert_eq!(shift_inner_exact(1), q(3, 8));
        assert_eq!(shift_inner_exact(2), q(5, 16));
        for (n, want) in [(0, q(1, 2)), (1, q(1, 8)), (2, q(1, 16))] {
            let d = shift_diff_norm_sq_exact(n);
            assert!(d.agree());
            assert_eq!(d.closed_form, want);
        }
    }

    #[test]
    fn orthogonality_examples() {
        for n in [0, 1, 10] {
            assert!(shift_orthogonality_exact(n).is_zero());
        }
    }

    #[test]
    fn shift_identities_hold_to_200() {
        let ids = shift_identities(200);
        assert_eq!(ids.len(), 5);
        for id in ids {
            assert!(id.pass, "{id:?}");
        }
    }

    #[test]
    fn float_trace_matches_exact_iterates() {
        let op = OperatorSpec::<f64>::right_shift(64).unwrap();
        let trace = iterate(&op, &Vector::basis(64, 0), 60, 0.0).unwrap();
        for (n, x) in trace.points().iter().enumerate() {
            let exact = shift_iterate_exact(n as u64).to_f64_dense(64);
            let dev = x
                .coords()
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            assert!(dev <= 1e-12, "n={n} dev={dev}");
        }
    }

    #[test]
    fn coordinate_proxy_examples() {
        assert_eq!(shift_coordinate_proxy(0, 1), 1.0);
        assert!((shift_coordinate_proxy(2, 1) - 1.0 / 6f64.sqrt()).abs() < 1e-15);
        assert!(shift_coordinate_proxy(50, 1) < 1e-14);
    }

    #[test]
    fn normalized_coordinates_sum_to_one() {
        for n in [0u64, 1, 2, 7, 30] {
            let it: BigRational = (1..=n + 1).map(|k| normalized_iterate_coord_sq(n, k)).sum();
            let df: BigRational = (1..=n + 2).map(|k| normalized_diff_coord_sq(n, k)).sum();
            assert!(it.is_one() && df.is_one(), "n={n}");
        }
    }

    #[test]
    fn normalized_difference_matches_vectors() {
        for n in [0u64, 3, 9] {
            let d = shift_iterate_exact(n).sub(&shift_iterate_exact(n + 1));
            let nsq = d.norm_sq();
            for k in 1..=n as usize + 2 {
                let c = d.get(k);
                assert_eq!(&c * &c / &nsq, normalized_diff_coord_sq(n, k as u64));
            }
        }
    }

    #[test]
    fn exact_threshold_comparison() {
        assert!(sqrt_below_pow10(&q(1, 1_000_000_000_001), 6));
        assert!(!sqrt_below_pow10(&q(1, 1_000_000_000_000), 6));
        assert!(weak_proxy_identity(1000).pass);
    }

    #[test]
    fn stirling_examples() {
        assert!((stirling_ratio(1) - std::f64::consts::PI.sqrt() / 2.0).abs() < 1e-12);
        assert!((stirling_ratio(100) - 1.0).abs() < 2e-3);
        assert!((stirling_ratio(10_000) - 1.0).abs() < 2e-5);
        // classical correction 1 − 1/(8n)
        assert!((stirling_ratio(100) - (1.0 - 1.0 / 800.0)).abs() < 1e-5);
    }

    #[test]
    fn stirling_matches_exact_ratio() {
        for n in [1u64, 5, 40, 300] {
            let exact = ratio_to_f64(&shift_norm_sq_exact(n)) * (std::f64::consts::PI * n as f64).sqrt();
            assert!((stirling_ratio(n) - exact).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn rotation_cluster_examples() {
        let count = |k, l| rational_rotation_cluster_count(k, l).unwrap().count;
        assert_eq!(count(1, 5), 5);
        assert_eq!(count(1, 12), 12);
        assert_eq!(count(1, 3), 6);
        assert_eq!(count(2, 6), 6);
        assert_eq!(
            rational_rotation_cluster_count(1, 4),
            Err(ExactError::DegenerateTheta { k: 1, l: 4 })
        );
        assert_eq!(
            rational_rotation_cluster_count(3, 4),
            Err(ExactError::DegenerateTheta { k: 3, l: 4 })
        );
        assert!(rational_rotation_cluster_count(1, 0).is_err());
    }

    #[test]
    fn k_equal_two_does_not_always_give_l() {
        // the count depends on the reduced fraction and the sign of cos θ
        assert_eq!(rational_rotation_cluster_count(2, 5).unwrap().count, 10);
        assert_eq!(rational_rotation_cluster_count(2, 4).unwrap().count, 1);
        assert_eq!(rational_rotation_cluster_count(2, 7).unwrap().count, 14);
        assert_eq!(rational_rotation_cluster_count(2, 12).unwrap().count, 6);
    }

    #[test]
    fn rotation_angles_are_distinct_reduced_fractions() {
        let c = rational_rotation_cluster_count(1, 3).unwrap();
        let want: Vec<Ratio<i64>> = (0..6).map(|i| Ratio::new(i, 6)).collect();
        assert_eq!(c.angles, want);
        assert!(c.cos_negative);
    }

    #[test]
    fn oracle_report_passes() {
        let r = oracle_report(60);
        assert!(r.pass, "{r}");
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"vandermonde\""));
    }

    #[test]
    fn ratio_formatting() {
        assert_eq!(format_ratio(&q(6, 16)), "3/8");
        assert_eq!(format_ratio(&q(4, 2)), "2");
        assert_eq!(format_ratio(&q(-1, 3)), "-1/3");
    }

    proptest! {
        #[test]
        fn vandermonde_random(m in 0u64..120, n in 0u64..120, r in 0u64..240) {
            prop_assert!(vandermonde_check(m, n, r));
        }

        #[test]
        fn binomial_symmetry_and_recurrence(n in 1u64..150, k in 0i64..150) {
            prop_assert_eq!(binomial(n, k), binomial(n, n as i64 - k));
            prop_assert_eq!(binomial(n, k), binomial(n - 1, k - 1) + binomial(n - 1, k));
        }

        #[test]
        fn rotation_counts_respect_bounds(k in -40i64..40, l in 1i64..40) {
            if let Ok(c) = rational_rotation_cluster_count(k, l) {
                let bound = if c.cos_negative { 2 * l } else { l } as usize;
                prop_assert!(c.count <= bound);
                prop_assert_eq!(c.count, c.angles.len());
            }
        }
    }
}
