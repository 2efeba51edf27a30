//! Iteration engine and Fejér-monotonicity certification.
//!
//! A sequence `(x_n)` is Fejér monotone with respect to `z` when
//! `‖x_{n+1} − z‖ ≤ ‖x_n − z‖` for every `n`. Squaring and expanding shows the
//! set of all such `z` is the intersection of the halfspaces
//! `2⟨x_n − x_{n+1}, z⟩ ≤ ‖x_n‖² − ‖x_{n+1}‖²`, one per consecutive pair,
//! which is what [`largest_fejer_halfspaces`] materializes for a finite trace.

use std::io::Write;

use thiserror::Error;

use crate::operators::{OperatorError, OperatorSpec};
use crate::scalar::{half, two, Scalar};
use crate::vectorspace::{Vector, VectorError};

pub const DEFAULT_STOP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FejerError {
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("index out of range: n = {n}, m = {m}, trace length {len}")]
    IndexOutOfRange { n: usize, m: usize, len: usize },
    #[error("candidate is not a Fejér point (violation {violation:e})")]
    NotAFejerPoint { violation: f64 },
    #[error("invalid iteration request: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    MaxSteps,
    StepBelowTol,
}

impl StopReason {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::MaxSteps => "max_steps",
            Self::StepBelowTol => "step_below_tol",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace<T> {
    points: Vec<Vector<T>>,
    step_norms: Vec<T>,
    operator: Option<OperatorSpec<T>>,
    stop_reason: StopReason,
}

impl<T: Scalar> IterationTrace<T> {
    /// Wraps an explicit sequence that was not produced by [`iterate`].
    pub fn from_points(points: Vec<Vector<T>>) -> Result<Self, FejerError> {
        let Some(first) = points.first() else {
            return Err(FejerError::Invalid("trace needs at least one point".into()));
        };
        for p in &points {
            first.check_dim(p)?;
        }
        let step_norms = points.windows(2).map(|w| (&w[0] - &w[1]).norm()).collect();
        Ok(Self {
            points,
            step_norms,
            operator: None,
            stop_reason: StopReason::MaxSteps,
        })
    }

    pub fn points(&self) -> &[Vector<T>] {
        &self.points
    }

    pub fn step_norms(&self) -> &[T] {
        &self.step_norms
    }

    pub fn operator(&self) -> Option<&OperatorSpec<T>> {
        self.operator.as_ref()
    }

    pub fn stop_reason(&self) -> StopReason {
        self.stop_reason
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.points[0].dim()
    }

    pub fn last(&self) -> &Vector<T> {
        self.points.last().expect("trace is never empty")
    }

    /// The subsequence at the given (increasing) indices.
    pub fn subsequence(&self, indices: &[usize]) -> Result<Self, FejerError> {
        if indices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FejerError::Invalid("subsequence indices must increase".into()));
        }
        let pts = indices
            .iter()
            .map(|&i| {
                self.points.get(i).cloned().ok_or(FejerError::IndexOutOfRange {
                    n: i,
                    m: i,
                    len: self.len(),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::from_points(pts)
    }

    /// Writes `n, x_0 … x_{d−1}, norm, step_norm`; the final row has an empty
    /// step norm. Floats use the shortest round-trip representation.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let mut header = vec!["n".to_string()];
        header.extend((0..self.dim()).map(|i| format!("x_{i}")));
        header.push("norm".into());
        header.push("step_norm".into());
        writeln!(out, "{}", header.join(","))?;
        for (n, p) in self.points.iter().enumerate() {
            let mut row = vec![n.to_string()];
            row.extend(p.coords().iter().map(|c| c.to_string()));
            row.push(p.norm().to_string());
            row.push(self.step_norms.get(n).map(|s| s.to_string()).unwrap_or_default());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

/// Runs `x_{n+1} = T x_n` for at most `max_steps` steps, stopping early once
/// `‖x_n − x_{n+1}‖ < stop_tol` (the step that triggers the stop is kept).
pub fn iterate<T: Scalar>(
    op: &OperatorSpec<T>,
    x0: &Vector<T>,
    max_steps: usize,
    stop_tol: T,
) -> Result<IterationTrace<T>, FejerError> {
    if max_steps == 0 {
        return Err(FejerError::Invalid("max_steps must be at least 1".into()));
    }
    if !x0.is_finite() {
        return Err(FejerError::Invalid("x0 must be finite".into()));
    }
    let mut points = Vec::with_capacity(max_steps + 1);
    let mut step_norms = Vec::with_capacity(max_steps);
    points.push(x0.clone());
    let mut stop_reason = StopReason::MaxSteps;
    for _ in 0..max_steps {
        let x = points.last().expect("non-empty");
        let y = op.apply(x)?;
        let step = (x - &y).norm();
        points.push(y);
        step_norms.push(step);
        if step < stop_tol {
            stop_reason = StopReason::StepBelowTol;
            break;
        }
    }
    Ok(IterationTrace {
        points,
        step_norms,
        operator: Some(op.clone()),
        stop_reason,
    })
}

/// `{z : ⟨a, z⟩ ≤ b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace<T> {
    pub a: Vector<T>,
    pub b: T,
}

impl<T: Scalar> Halfspace<T> {
    /// `⟨a, z⟩ − b`; positive means outside.
    pub fn excess(&self, z: &Vector<T>) -> T {
        self.a.dot_unchecked(z) - self.b
    }
}

/// One halfspace `2⟨x_n − x_{n+1}, z⟩ ≤ ‖x_n‖² − ‖x_{n+1}‖²` per consecutive
/// pair whose step is at least `min_step`.
pub fn largest_fejer_halfspaces<T: Scalar>(trace: &IterationTrace<T>, min_step: T) -> Vec<Halfspace<T>> {
    trace
        .points
        .windows(2)
        .zip(&trace.step_norms)
        .filter(|(_, &s)| s >= min_step && s > T::zero())
        .map(|(w, _)| Halfspace {
            a: (&w[0] - &w[1]).scale(two()),
            b: w[0].norm_sq() - w[1].norm_sq(),
        })
        .collect()
}

/// Whether `z` lies in every halfspace up to `slack`.
pub fn satisfies_halfspaces<T: Scalar>(halfspaces: &[Halfspace<T>], z: &Vector<T>, slack: T) -> bool {
    halfspaces.iter().all(|h| h.excess(z) <= slack)
}

/// `max_n (‖x_{n+1} − z‖ − ‖x_n − z‖)`; at most a tolerance means `z` is a
/// Fejér point of the trace. A single-point trace gives `−∞`.
pub fn fejer_violation<T: Scalar>(trace: &IterationTrace<T>, z: &Vector<T>) -> Result<T, FejerError> {
    trace.points[0].check_dim(z)?;
    let dists: Vec<T> = trace.points.iter().map(|p| (p - z).norm()).collect();
    Ok(dists.windows(2).map(|w| w[1] - w[0]).fold(T::neg_infinity(), T::max))
}

/// Default certification tolerance `1e−12·(1 + ‖x₀‖)`.
pub fn default_fejer_tol<T: Scalar>(trace: &IterationTrace<T>) -> T {
    T::lit(1e-12) * (T::one() + trace.points[0].norm())
}

/// Right side minus left side of each inequality in the chain bounding
/// `⟨x_n − x_{n+1}, z − z̄⟩` and of the telescoped bound on `⟨x_n − x_m, z − z̄⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuditSlacks<T> {
    /// `½(‖x_n − z̄‖² − ‖x_{n+1} − z̄‖²) − ⟨x_n − x_{n+1}, z − z̄⟩`, must be ≥ 0.
    pub consecutive: T,
    /// The identity `½(‖x_n−z̄‖² − ‖x_{n+1}−z̄‖²) = ⟨x_{n+1}−z̄, x_n−x_{n+1}⟩ + ½‖x_n−x_{n+1}‖²`,
    /// reported as right side minus left side; must vanish.
    pub expansion_residual: T,
    /// Cauchy–Schwarz step: `‖x_{n+1}−z̄‖‖x_n−x_{n+1}‖ − ⟨x_{n+1}−z̄, x_n−x_{n+1}⟩`, must be ≥ 0.
    pub cauchy_schwarz: T,
    /// `½(‖x_n − z̄‖² − ‖x_m − z̄‖²) − ⟨x_n − x_m, z − z̄⟩`, must be ≥ 0.
    pub telescoped: T,
}

impl<T: Scalar> AuditSlacks<T> {
    pub fn holds(&self, tol: T) -> bool {
        self.consecutive >= -tol
            && self.cauchy_schwarz >= -tol
            && self.telescoped >= -tol
            && self.expansion_residual.abs() <= tol
    }
}

/// Audits the inequalities that a Fejér point `z` and an arbitrary reference
/// `z̄` must satisfy at indices `n < m`.
pub fn audit_fejer_inequalities<T: Scalar>(
    trace: &IterationTrace<T>,
    z: &Vector<T>,
    zbar: &Vector<T>,
    n: usize,
    m: usize,
    fejer_tol: T,
) -> Result<AuditSlacks<T>, FejerError> {
    let len = trace.len();
    if m <= n || m >= len {
        return Err(FejerError::IndexOutOfRange { n, m, len });
    }
    trace.points[0].check_dim(zbar)?;
    let violation = fejer_violation(trace, z)?;
    if violation > fejer_tol {
        return Err(FejerError::NotAFejerPoint {
            violation: violation.to_f64().unwrap_or(f64::NAN),
        });
    }
    let h = half::<T>();
    let (xn, xn1, xm) = (&trace.points[n], &trace.points[n + 1], &trace.points[m]);
    let zz = z - zbar;
    let step = xn - xn1;
    let to_n = xn - zbar;
    let to_n1 = xn1 - zbar;
    let to_m = xm - zbar;
    let lhs = step.dot_unchecked(&zz);
    let half_drop = h * (to_n.norm_sq() - to_n1.norm_sq());
    let cross = to_n1.dot_unchecked(&step);
    let expanded = cross + h * step.norm_sq();
    let bound = to_n1.norm() * step.norm() + h * step.norm_sq();
    Ok(AuditSlacks {
        consecutive: half_drop - lhs,
        expansion_residual: expanded - half_drop,
        cauchy_schwarz: bound - expanded,
        telescoped: h * (to_n.norm_sq() - to_m.norm_sq()) - (xn - xm).dot_unchecked(&zz),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Theta;
    use crate::sets::ConvexSetSpec;
    use crate::vectorspace::Matrix;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(c: &[f64]) -> Vector<f64> {
        Vector::from_f64s(c).unwrap()
    }

    fn halving() -> IterationTrace<f64> {
        IterationTrace::from_points(vec![v(&[1.0, 0.0]), v(&[0.5, 0.0]), v(&[0.25, 0.0])]).unwrap()
    }

    fn skew_op() -> OperatorSpec<f64> {
        OperatorSpec::skew_resolvent(Matrix::from_rows(vec![vec![0.0, 1.0], vec![-1.0, 0.0]]).unwrap()).unwrap()
    }

    #[test]
    fn rotation_norms_halve() {
        let op = OperatorSpec::rotation(Theta::Radians(PI / 3.0));
        let t = iterate(&op, &v(&[1.0, 0.0]), 5, 1e-14).unwrap();
        assert_eq!(t.len(), 6);
        assert_eq!(t.stop_reason(), StopReason::MaxSteps);
        for (n, p) in t.points().iter().enumerate() {
            assert!((p.norm() - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn projection_onto_point_stops_after_second_step() {
        let op = OperatorSpec::projection(ConvexSetSpec::singleton(v(&[0.0, 0.0])));
        let t = iterate(&op, &v(&[3.0, -2.0]), 10, 1e-14).unwrap();
        assert_eq!(t.points(), &[v(&[3.0, -2.0]), v(&[0.0, 0.0]), v(&[0.0, 0.0])]);
        assert_eq!(t.stop_reason(), StopReason::StepBelowTol);
        assert_eq!(t.step_norms().len(), 2);
    }

    #[test]
    fn skew_resolvent_norms() {
        let t = iterate(&skew_op(), &v(&[1.0, 0.0]), 20, 0.0).unwrap();
        for (n, p) in t.points().iter().enumerate() {
            assert!((p.norm() - 0.5f64.sqrt().powi(n as i32)).abs() < 1e-15);
        }
    }

    #[test]
    fn iterate_rejects_zero_steps_and_propagates_errors() {
        assert!(iterate(&skew_op(), &v(&[1.0, 0.0]), 0, 0.0).is_err());
        let shift = OperatorSpec::right_shift(2).unwrap();
        let err = iterate(&shift, &v(&[1.0, 0.0]), 5, 0.0).unwrap_err();
        assert_eq!(
            err,
            FejerError::Operator(OperatorError::TruncationOverflow { trunc: 2 })
        );
    }

    #[test]
    fn trace_reconstructs_from_operator() {
        let t = iterate(&skew_op(), &v(&[0.3, 2.0]), 30, 0.0).unwrap();
        for (n, w) in t.points().windows(2).enumerate() {
            let op = t.operator().unwrap();
            assert!(op.apply(&w[0]).unwrap().max_abs_diff(&w[1]) <= 1e-12);
            assert!(((&w[0] - &w[1]).norm() - t.step_norms()[n]).abs() <= 1e-14);
        }
    }

    #[test]
    fn halfspace_examples() {
        let hs = largest_fejer_halfspaces(&halving(), 1e-14);
        assert_eq!(hs.len(), 2);
        // normalize to z₁ ≤ bound
        assert!((hs[0].b / hs[0].a.coords()[0] - 0.75).abs() < 1e-15);
        assert!((hs[1].b / hs[1].a.coords()[0] - 0.375).abs() < 1e-15);
        let constant = IterationTrace::from_points(vec![v(&[1.0, 1.0]), v(&[1.0, 1.0])]).unwrap();
        assert!(largest_fejer_halfspaces(&constant, 1e-14).is_empty());
        let swap = IterationTrace::from_points(vec![v(&[1.0, 0.0]), v(&[0.0, 1.0])]).unwrap();
        let hs = largest_fejer_halfspaces(&swap, 1e-14);
        assert_eq!(
            hs,
            vec![Halfspace {
                a: v(&[2.0, -2.0]),
                b: 0.0
            }]
        );
    }

    #[test]
    fn violation_examples() {
        assert!(fejer_violation(&halving(), &v(&[0.0, 0.0])).unwrap() <= 0.0);
        assert_eq!(fejer_violation(&halving(), &v(&[1.0, 0.0])).unwrap(), 0.5);
        let settle = IterationTrace::from_points(vec![v(&[2.0, 2.0]), v(&[1.0, 1.0]), v(&[1.0, 1.0])]).unwrap();
        assert!(fejer_violation(&settle, &v(&[1.0, 1.0])).unwrap() <= 0.0);
    }

    #[test]
    fn audit_examples() {
        let bx = ConvexSetSpec::boxed(v(&[-1.0, -1.0]), v(&[1.0, 1.0])).unwrap();
        let t = iterate(&OperatorSpec::projection(bx), &v(&[3.0, 3.0]), 10, 1e-14).unwrap();
        let corner = v(&[1.0, 1.0]);
        for n in 0..t.len() - 1 {
            for m in n + 1..t.len() {
                let s = audit_fejer_inequalities(&t, &corner, &corner, n, m, 1e-12).unwrap();
                assert!(s.holds(1e-10), "{s:?}");
            }
        }

        let constant = IterationTrace::from_points(vec![v(&[1.0, 1.0]); 3]).unwrap();
        let s = audit_fejer_inequalities(&constant, &v(&[1.0, 1.0]), &v(&[1.0, 1.0]), 0, 2, 1e-12).unwrap();
        assert_eq!(
            s,
            AuditSlacks {
                consecutive: 0.0,
                expansion_residual: 0.0,
                cauchy_schwarz: 0.0,
                telescoped: 0.0
            }
        );

        let t = iterate(&skew_op(), &v(&[1.0, 0.0]), 10, 0.0).unwrap();
        let o = v(&[0.0, 0.0]);
        let s = audit_fejer_inequalities(&t, &o, &o, 0, 5, 1e-12).unwrap();
        let expected = 0.5 * (t.points()[0].norm_sq() - t.points()[5].norm_sq());
        assert!((s.telescoped - expected).abs() < 1e-15);
    }

    #[test]
    fn audit_errors() {
        let t = halving();
        let o = v(&[0.0, 0.0]);
        assert!(matches!(
            audit_fejer_inequalities(&t, &o, &o, 1, 1, 1e-12),
            Err(FejerError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            audit_fejer_inequalities(&t, &o, &o, 0, 3, 1e-12),
            Err(FejerError::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            audit_fejer_inequalities(&t, &v(&[1.0, 0.0]), &o, 0, 1, 1e-12),
            Err(FejerError::NotAFejerPoint { .. })
        ));
    }

    #[test]
    fn csv_export_round_trips() {
        let t = iterate(&skew_op(), &v(&[1.0, 0.0]), 3, 0.0).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "n,x_0,x_1,norm,step_norm");
        assert_eq!(lines.len(), 5);
        for (line, p) in lines[1..].iter().zip(t.points()) {
            let fields: Vec<&str> = line.split(',').collect();
            assert_eq!(fields[1].parse::<f64>().unwrap(), p.coords()[0]);
            assert_eq!(fields[2].parse::<f64>().unwrap(), p.coords()[1]);
        }
        assert!(lines[4].ends_with(','));
    }

    /// A random trace together with a point of its operator's fixed-point
    /// set, which every such trace is Fejér monotone with respect to.
    fn random_trace() -> impl Strategy<Value = (IterationTrace<f64>, Vector<f64>)> {
        (2usize..5, 0usize..3).prop_flat_map(|(dim, kind)| {
            (
                prop::collection::vec(-4.0f64..4.0, dim),
                prop::collection::vec(-1.0f64..1.0, dim),
                prop::collection::vec(-0.2f64..0.2, dim),
                0.05f64..1.0,
                0.1f64..3.0,
            )
                .prop_map(move |(x0, c, jitter, lambda, theta)| {
                    let x0 = Vector::new(x0).unwrap();
                    let center = Vector::new(c.clone()).unwrap();
                    let inside = center.axpy(1.0 / (dim as f64).sqrt(), &Vector::new(jitter).unwrap());
                    let (op, x0, fixed) = match kind {
                        0 => (
                            OperatorSpec::projection(ConvexSetSpec::ball(center, 0.5).unwrap()),
                            x0,
                            inside,
                        ),
                        1 => (
                            OperatorSpec::km(
                                OperatorSpec::projection(
                                    ConvexSetSpec::boxed(
                                        Vector::new(c.iter().map(|v| v - 0.5).collect()).unwrap(),
                                        Vector::new(c.iter().map(|v| v + 0.5).collect()).unwrap(),
                                    )
                                    .unwrap(),
                                ),
                                lambda,
                            )
                            .unwrap(),
                            x0,
                            inside,
                        ),
                        _ => (
                            OperatorSpec::rotation(Theta::Radians(theta)),
                            v(&x0.coords()[..2]),
                            v(&[0.0, 0.0]),
                        ),
                    };
                    (iterate(&op, &x0, 40, 1e-14).unwrap(), fixed)
                })
        })
    }

    proptest! {
        #[test]
        fn halfspaces_characterize_fejer_points(
            (trace, _) in random_trace(),
            z in prop::collection::vec(-5.0f64..5.0, 5),
        ) {
            let z = v(&z[..trace.dim()]);
            let hs = largest_fejer_halfspaces(&trace, 1e-14);
            let member = satisfies_halfspaces(&hs, &z, 1e-12);
            let fejer = fejer_violation(&trace, &z).unwrap() <= 1e-12;
            prop_assert_eq!(member, fejer);
        }

        #[test]
        fn fejer_points_form_convex_set(
            (trace, fixed) in random_trace(),
            b in prop::collection::vec(-5.0f64..5.0, 5),
            lambda in 0.0f64..=1.0,
        ) {
            let b = v(&b[..trace.dim()]);
            prop_assume!(fejer_violation(&trace, &b).unwrap() <= 0.0);
            prop_assert!(fejer_violation(&trace, &fixed).unwrap() <= 1e-12);
            let mix = fixed.scale(1.0 - lambda).axpy(lambda, &b);
            prop_assert!(fejer_violation(&trace, &mix).unwrap() <= 1e-10);
        }

        #[test]
        fn fejer_sets_closed_under_union(
            (trace, fixed) in random_trace(),
            samples in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 5), 1..12),
        ) {
            let dim = trace.dim();
            // C1: fixed points of the operator; C2: points admitted by the halfspaces
            let hs = largest_fejer_halfspaces(&trace, 1e-14);
            let c1 = [fixed];
            let c2: Vec<Vector<f64>> = samples
                .iter()
                .map(|p| v(&p[..dim]))
                .filter(|p| satisfies_halfspaces(&hs, p, 0.0))
                .collect();
            for p in c1.iter().chain(&c2) {
                prop_assert!(fejer_violation(&trace, p).unwrap() <= 1e-12);
            }
        }

        #[test]
        fn subsequences_inherit_fejer_points(
            (trace, fixed) in random_trace(),
            mask in prop::collection::vec(any::<bool>(), 41),
        ) {
            let idx: Vec<usize> = (0..trace.len()).filter(|&i| mask[i] || i == 0).collect();
            let sub = trace.subsequence(&idx).unwrap();
            let full = fejer_violation(&trace, &fixed).unwrap();
            prop_assert!(full <= 1e-12);
            prop_assert!(fejer_violation(&sub, &fixed).unwrap() <= full.max(0.0) + 1e-12);
        }
    }
}
