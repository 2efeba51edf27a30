//! Directional asymptotics of a trace converging to `z̄`.
//!
//! Two unit-direction sequences are tracked: the step directions
//! `(x_n − x_{n+1})/‖x_n − x_{n+1}‖` and the approach directions
//! `(x_n − z̄)/‖x_n − z̄‖`. For a trace that is Fejér monotone with respect to
//! `Z`, every cluster point of either lies in the polar cone of `Z − z̄`, which
//! is the normal cone `N_Z(z̄)` when `z̄ ∈ Z`. The residual
//! `σ_{Z−z̄}(d) = σ_Z(d) − ⟨z̄, d⟩` measures how far a direction is from that
//! cone: it is `≤ 0` exactly on the cone.

use std::io::Write;

use thiserror::Error;

use crate::fejer::IterationTrace;
use crate::scalar::Scalar;
use crate::sets::{Constraint, ConvexSetSpec, SetError};
use crate::solvers::nnls;
use crate::vectorspace::{angle_deg, unit_direction, UnitVector, Vector, VectorError};

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;
pub const DEFAULT_EPSILON: f64 = 1e-2;
pub const DEFAULT_ACTIVE_TOL: f64 = 1e-8;
/// Grid points per generator pair when the cone projection of a direction
/// vanishes.
pub const PAIR_GRID: usize = 64;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AsymptoticsError {
    #[error(transparent)]
    Set(#[from] SetError),
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("every index is degenerate; no direction can be formed")]
    AllDegenerate,
    #[error("tail selection is empty")]
    EmptyTail,
    #[error("invalid analysis parameter: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DirectionKind {
    StepDiff,
    ToLimit,
}

impl DirectionKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::StepDiff => "step_diff",
            Self::ToLimit => "to_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionRecord<T> {
    pub index: usize,
    pub kind: DirectionKind,
    pub dir: UnitVector<T>,
    pub polar_residual: T,
    /// Distance to `𝕊 ∩ N_Z(z̄)`; absent when `Z` has no inequality
    /// description or `z̄ ∉ Z`, `+∞` when the normal cone is `{0}`.
    pub ncone_dist: Option<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionSet<T> {
    pub records: Vec<DirectionRecord<T>>,
    pub skipped_step: usize,
    pub skipped_limit: usize,
}

impl<T: Scalar> DirectionSet<T> {
    pub fn of_kind(&self, kind: DirectionKind) -> Vec<DirectionRecord<T>> {
        self.records.iter().filter(|r| r.kind == kind).cloned().collect()
    }

    /// Writes `n, kind, d_0 … d_{k−1}, polar_residual, ncone_dist`.
    pub fn write_csv<W: Write>(&self, mut out: W, dim: usize) -> std::io::Result<()> {
        let mut header = vec!["n".to_string(), "kind".to_string()];
        header.extend((0..dim).map(|i| format!("d_{i}")));
        header.push("polar_residual".into());
        header.push("ncone_dist".into());
        writeln!(out, "{}", header.join(","))?;
        for r in &self.records {
            let mut row = vec![r.index.to_string(), r.kind.as_str().to_string()];
            row.extend(r.dir.coords().iter().map(|c| c.to_string()));
            row.push(r.polar_residual.to_string());
            row.push(r.ncone_dist.map(|d| d.to_string()).unwrap_or_default());
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionOptions<T> {
    /// Steps and offsets shorter than this are skipped as degenerate.
    pub stop_tol: T,
    pub active_tol: T,
}

/// Builds both direction sequences of `trace` relative to `zbar` and
/// annotates each with its polar residual against `z_set` and, where
/// available, its distance to the unit normal cone.
pub fn direction_sequences<T: Scalar>(
    trace: &IterationTrace<T>,
    zbar: &Vector<T>,
    z_set: &ConvexSetSpec<T>,
    opts: &DirectionOptions<T>,
) -> Result<DirectionSet<T>, AsymptoticsError> {
    trace.points()[0].check_dim(zbar)?;
    if z_set.dim() != zbar.dim() {
        return Err(VectorError::DimensionMismatch {
            left: z_set.dim(),
            right: zbar.dim(),
        }
        .into());
    }
    let cone = match NormalCone::at(z_set, zbar, opts.active_tol) {
        Ok(c) => Some(c),
        Err(SetError::ZbarNotInSet { .. }) | Err(SetError::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let mut records = Vec::new();
    let (mut skipped_step, mut skipped_limit) = (0, 0);
    let points = trace.points();
    let mut annotate = |index, kind, v: Vector<T>, skipped: &mut usize| -> Result<(), AsymptoticsError> {
        if v.norm() < opts.stop_tol {
            *skipped += 1;
            return Ok(());
        }
        let Ok(dir) = unit_direction(&v) else {
            *skipped += 1;
            return Ok(());
        };
        let polar_residual = polar_residual(z_set, zbar, &dir)?;
        let ncone_dist = cone.as_ref().map(|c| c.distance(&dir));
        records.push(DirectionRecord {
            index,
            kind,
            dir,
            polar_residual,
            ncone_dist,
        });
        Ok(())
    };
    for (n, x) in points.iter().enumerate() {
        if let Some(next) = points.get(n + 1) {
            annotate(n, DirectionKind::StepDiff, x - next, &mut skipped_step)?;
        }
        annotate(n, DirectionKind::ToLimit, x - zbar, &mut skipped_limit)?;
    }
    if records.is_empty() {
        return Err(AsymptoticsError::AllDegenerate);
    }
    Ok(DirectionSet {
        records,
        skipped_step,
        skipped_limit,
    })
}

/// `σ_Z(d) − ⟨z̄, d⟩ = σ_{Z−z̄}(d)`; `+∞` propagates.
pub fn polar_residual<T: Scalar>(z_set: &ConvexSetSpec<T>, zbar: &Vector<T>, d: &UnitVector<T>) -> Result<T, SetError> {
    let sigma = z_set.support_function(d.as_vector())?;
    if sigma == T::infinity() {
        return Ok(sigma);
    }
    Ok(sigma - zbar.dot(d.as_vector())?)
}

/// Normal cone of a box or polyhedron at a point, as the cone generated by
/// the unit normals of the active constraints.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalCone<T> {
    generators: Vec<Vector<T>>,
}

impl<T: Scalar> NormalCone<T> {
    pub fn at(z_set: &ConvexSetSpec<T>, zbar: &Vector<T>, active_tol: T) -> Result<Self, SetError> {
        let rows = z_set.constraints().ok_or(SetError::Unsupported(z_set.kind()))?;
        if rows[0].a.dim() != zbar.dim() {
            return Err(VectorError::DimensionMismatch {
                left: rows[0].a.dim(),
                right: zbar.dim(),
            }
            .into());
        }
        Ok(Self {
            generators: active_normals(&rows, zbar, active_tol)?,
        })
    }

    pub fn generators(&self) -> &[Vector<T>] {
        &self.generators
    }

    /// `N_Z(z̄) = {0}`.
    pub fn is_trivial(&self) -> bool {
        self.generators.is_empty()
    }

    /// Distance from a unit direction to `𝕊 ∩ N_Z(z̄)`; `+∞` for a trivial cone.
    pub fn distance(&self, d: &UnitVector<T>) -> T {
        if self.is_trivial() {
            return T::infinity();
        }
        let d = d.as_vector();
        let cols: Vec<Vec<T>> = self.generators.iter().map(|g| g.coords().to_vec()).collect();
        let weights = nnls(&cols, d.coords());
        let p = self
            .generators
            .iter()
            .zip(&weights)
            .fold(Vector::zeros(d.dim()), |acc, (g, &w)| acc.axpy(w, g));
        if let Ok(u) = unit_direction(&p) {
            if p.norm() > T::epsilon().sqrt() * T::lit(1e-4) {
                return (d - u.as_vector()).norm();
            }
        }
        // d lies in the polar of the cone: best unit generator or pairwise mix
        let mut best = T::neg_infinity();
        let mut consider = |v: &Vector<T>| {
            if let Ok(u) = unit_direction(v) {
                best = best.max(u.as_vector().dot_unchecked(d));
            }
        };
        for (i, gi) in self.generators.iter().enumerate() {
            consider(gi);
            for gj in &self.generators[i + 1..] {
                for k in 1..PAIR_GRID - 1 {
                    let t = T::lit(k as f64 / (PAIR_GRID - 1) as f64);
                    consider(&gi.scale(T::one() - t).axpy(t, gj));
                }
            }
        }
        // ‖d − u‖² = 2 − 2⟨d, u⟩ for unit d, u
        (T::lit(2.0) - T::lit(2.0) * best).max(T::zero()).sqrt()
    }
}

fn active_normals<T: Scalar>(
    rows: &[Constraint<T>],
    zbar: &Vector<T>,
    active_tol: T,
) -> Result<Vec<Vector<T>>, SetError> {
    let mut generators = Vec::new();
    for row in rows {
        let norm = row.a.norm();
        let excess = (row.a.dot_unchecked(zbar) - row.b) / norm;
        if excess > active_tol {
            return Err(SetError::ZbarNotInSet {
                violation: excess.to_f64().unwrap_or(f64::NAN),
            });
        }
        if excess >= -active_tol {
            generators.push(row.a.scale(T::one() / norm));
        }
    }
    Ok(generators)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalConeDistance<T> {
    pub distance: T,
    /// Set when `N_Z(z̄) = {0}` (no active constraint); the distance is `+∞`.
    pub trivial: bool,
}

/// Distance from `d` to the unit sphere intersected with `N_Z(z̄)` for a box
/// or polyhedron `Z`.
pub fn normal_cone_distance<T: Scalar>(
    z_set: &ConvexSetSpec<T>,
    zbar: &Vector<T>,
    d: &UnitVector<T>,
    active_tol: T,
) -> Result<NormalConeDistance<T>, SetError> {
    let cone = NormalCone::at(z_set, zbar, active_tol)?;
    Ok(NormalConeDistance {
        distance: cone.distance(d),
        trivial: cone.is_trivial(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterEstimate<T> {
    pub representatives: Vec<UnitVector<T>>,
    pub counts: Vec<usize>,
    pub epsilon: T,
}

impl<T> ClusterEstimate<T> {
    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

fn tail<T>(records: &[T], tail_fraction: f64) -> Result<&[T], AsymptoticsError> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(AsymptoticsError::Invalid("tail_fraction must lie in (0, 1]".into()));
    }
    let take = ((tail_fraction * records.len() as f64).ceil() as usize).min(records.len());
    if take == 0 {
        return Err(AsymptoticsError::EmptyTail);
    }
    Ok(&records[records.len() - take..])
}

/// Greedy chordal `epsilon`-clustering of the last `⌈tail_fraction·N⌉`
/// directions, in index order.
pub fn cluster_directions<T: Scalar>(
    records: &[DirectionRecord<T>],
    tail_fraction: f64,
    epsilon: T,
) -> Result<ClusterEstimate<T>, AsymptoticsError> {
    if !(epsilon > T::zero()) {
        return Err(AsymptoticsError::Invalid("epsilon must be positive".into()));
    }
    let tail = tail(records, tail_fraction)?;
    let mut seeds: Vec<&UnitVector<T>> = Vec::new();
    let mut sums: Vec<Vector<T>> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    for r in tail {
        match seeds.iter().position(|s| s.chordal_distance(&r.dir) <= epsilon) {
            Some(k) => {
                sums[k] = &sums[k] + r.dir.as_vector();
                counts[k] += 1;
            }
            None => {
                seeds.push(&r.dir);
                sums.push(r.dir.as_vector().clone());
                counts.push(1);
            }
        }
    }
    let representatives = sums
        .iter()
        .zip(&seeds)
        .map(|(s, seed)| unit_direction(s).unwrap_or_else(|_| (*seed).clone()))
        .collect();
    Ok(ClusterEstimate {
        representatives,
        counts,
        epsilon,
    })
}

/// Largest circular gap, in degrees, between the sorted polar angles of the
/// tail directions. A single direction leaves a full 360° gap.
pub fn max_angular_gap<T: Scalar>(records: &[DirectionRecord<T>], tail_fraction: f64) -> Result<T, AsymptoticsError> {
    let tail = tail(records, tail_fraction)?;
    let mut angles = tail
        .iter()
        .map(|r| angle_deg(r.dir.as_vector()))
        .collect::<Result<Vec<T>, _>>()?;
    angles.sort_by(|a, b| a.partial_cmp(b).expect("angles are finite"));
    let full = T::lit(360.0);
    let wrap = angles[0] + full - angles[angles.len() - 1];
    Ok(angles.windows(2).map(|w| w[1] - w[0]).fold(wrap, T::max))
}

/// Largest `polar_residual` over the tail of each direction kind.
pub fn tail_polar_residual<T: Scalar>(set: &DirectionSet<T>, tail_fraction: f64) -> Result<T, AsymptoticsError> {
    let mut worst = T::neg_infinity();
    for kind in [DirectionKind::StepDiff, DirectionKind::ToLimit] {
        let recs = set.of_kind(kind);
        if recs.is_empty() {
            continue;
        }
        for r in tail(&recs, tail_fraction)? {
            worst = worst.max(r.polar_residual);
        }
    }
    if worst == T::neg_infinity() {
        return Err(AsymptoticsError::EmptyTail);
    }
    Ok(worst)
}

/// Mean of the finite normal-cone distances over the tail of each kind;
/// `None` when no record carries one.
pub fn tail_ncone_mean<T: Scalar>(set: &DirectionSet<T>, tail_fraction: f64) -> Result<Option<T>, AsymptoticsError> {
    let mut sum = T::zero();
    let mut count = 0usize;
    for kind in [DirectionKind::StepDiff, DirectionKind::ToLimit] {
        let recs = set.of_kind(kind);
        if recs.is_empty() {
            continue;
        }
        for d in tail(&recs, tail_fraction)?.iter().filter_map(|r| r.ncone_dist) {
            sum += d;
            count += 1;
        }
    }
    Ok((count > 0).then(|| sum / T::lit(count as f64)))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NoZigzagReport<T> {
    pub limit_dir: UnitVector<T>,
    pub max_dev_stepdiff: T,
    pub max_dev_tolimit: T,
    pub final_dev_stepdiff: T,
    pub final_dev_tolimit: T,
}

/// The unique unit generator of `N_Z(z̄)` when that cone is a ray.
pub fn ray_generator<T: Scalar>(
    z_set: &ConvexSetSpec<T>,
    zbar: &Vector<T>,
    active_tol: T,
) -> Result<UnitVector<T>, SetError> {
    match z_set {
        ConvexSetSpec::Singleton(c) => Err(SetError::NotARay { active: 2 * c.dim() }),
        ConvexSetSpec::Ball { center, radius } => {
            let offset = zbar - center;
            let excess = offset.norm() - *radius;
            if excess > active_tol {
                return Err(SetError::ZbarNotInSet {
                    violation: excess.to_f64().unwrap_or(f64::NAN),
                });
            }
            if excess < -active_tol || *radius == T::zero() {
                let active = if *radius == T::zero() { 2 * center.dim() } else { 0 };
                return Err(SetError::NotARay { active });
            }
            Ok(unit_direction(&offset)?)
        }
        ConvexSetSpec::Box { .. } | ConvexSetSpec::Polyhedron(_) => {
            let cone = NormalCone::at(z_set, zbar, active_tol)?;
            match cone.generators() {
                [g] => Ok(unit_direction(g)?),
                gens => Err(SetError::NotARay { active: gens.len() }),
            }
        }
        ConvexSetSpec::PointCloudHull(_) => Err(SetError::Unsupported(z_set.kind())),
    }
}

/// Deviation of both direction sequences from the ray generating `N_Z(z̄)`.
pub fn no_zigzag_check<T: Scalar>(
    trace: &IterationTrace<T>,
    zbar: &Vector<T>,
    z_set: &ConvexSetSpec<T>,
    opts: &DirectionOptions<T>,
    tail_fraction: f64,
) -> Result<NoZigzagReport<T>, AsymptoticsError> {
    let limit_dir = ray_generator(z_set, zbar, opts.active_tol)?;
    let set = direction_sequences(trace, zbar, z_set, opts)?;
    let deviations = |kind| -> Result<(T, T), AsymptoticsError> {
        let recs = set.of_kind(kind);
        let tail = tail(&recs, tail_fraction)?;
        let devs: Vec<T> = tail.iter().map(|r| r.dir.chordal_distance(&limit_dir)).collect();
        Ok((
            devs.iter().copied().fold(T::zero(), T::max),
            *devs.last().expect("tail non-empty"),
        ))
    };
    let (max_dev_stepdiff, final_dev_stepdiff) = deviations(DirectionKind::StepDiff)?;
    let (max_dev_tolimit, final_dev_tolimit) = deviations(DirectionKind::ToLimit)?;
    Ok(NoZigzagReport {
        limit_dir,
        max_dev_stepdiff,
        max_dev_tolimit,
        final_dev_stepdiff,
        final_dev_tolimit,
    })
}
