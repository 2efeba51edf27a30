//! Closed convex sets used as Fejér sets, projection targets, and normal-cone
//! sources.

use thiserror::Error;

use crate::scalar::Scalar;
use crate::solvers::{ldp, min_norm_point, simplex_min, LpOutcome};
use crate::vectorspace::{Vector, VectorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SetError {
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error("invalid set: {0}")]
    Invalid(String),
    #[error("polyhedron is empty")]
    EmptySet,
    #[error("reference point violates the set constraints by {violation:e}")]
    ZbarNotInSet { violation: f64 },
    #[error("normal cone is not a ray: {active} active constraints")]
    NotARay { active: usize },
    #[error("operation not supported for {0} sets")]
    Unsupported(&'static str),
}

/// One linear inequality `⟨a, z⟩ ≤ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<T> {
    pub a: Vector<T>,
    pub b: T,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConvexSetSpec<T> {
    Singleton(Vector<T>),
    Ball { center: Vector<T>, radius: T },
    Box { lo: Vector<T>, hi: Vector<T> },
    Polyhedron(Vec<Constraint<T>>),
    PointCloudHull(Vec<Vector<T>>),
}

impl<T: Scalar> ConvexSetSpec<T> {
    pub fn singleton(c: Vector<T>) -> Self {
        Self::Singleton(c)
    }

    pub fn ball(center: Vector<T>, radius: T) -> Result<Self, SetError> {
        if !(radius >= T::zero()) || !radius.is_finite() {
            return Err(SetError::Invalid(
                "ball radius must be a finite non-negative number".into(),
            ));
        }
        Ok(Self::Ball { center, radius })
    }

    pub fn boxed(lo: Vector<T>, hi: Vector<T>) -> Result<Self, SetError> {
        lo.check_dim(&hi)?;
        if lo.coords().iter().zip(hi.coords()).any(|(l, h)| l > h) {
            return Err(SetError::Invalid("box requires lo <= hi componentwise".into()));
        }
        Ok(Self::Box { lo, hi })
    }

    pub fn polyhedron(rows: Vec<Constraint<T>>) -> Result<Self, SetError> {
        let Some(first) = rows.first() else {
            return Err(SetError::Invalid("polyhedron needs at least one constraint".into()));
        };
        let dim = first.a.dim();
        for (i, row) in rows.iter().enumerate() {
            if row.a.dim() != dim {
                return Err(VectorError::DimensionMismatch {
                    left: dim,
                    right: row.a.dim(),
                }
                .into());
            }
            if row.a.norm() == T::zero() {
                return Err(SetError::Invalid(format!("constraint {i} has a zero normal")));
            }
            if !row.b.is_finite() {
                return Err(SetError::Invalid(format!("constraint {i} has a non-finite bound")));
            }
        }
        Ok(Self::Polyhedron(rows))
    }

    /// The halfspace `{z : ⟨a, z⟩ ≤ b}`.
    pub fn halfspace(a: Vector<T>, b: T) -> Result<Self, SetError> {
        Self::polyhedron(vec![Constraint { a, b }])
    }

    pub fn hull(vertices: Vec<Vector<T>>) -> Result<Self, SetError> {
        let Some(first) = vertices.first() else {
            return Err(SetError::Invalid("point cloud hull needs at least one vertex".into()));
        };
        for v in &vertices {
            first.check_dim(v)?;
        }
        Ok(Self::PointCloudHull(vertices))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Singleton(_) => "singleton",
            Self::Ball { .. } => "ball",
            Self::Box { .. } => "box",
            Self::Polyhedron(_) => "polyhedron",
            Self::PointCloudHull(_) => "point_cloud_hull",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Self::Singleton(c) => c.dim(),
            Self::Ball { center, .. } => center.dim(),
            Self::Box { lo, .. } => lo.dim(),
            Self::Polyhedron(rows) => rows[0].a.dim(),
            Self::PointCloudHull(v) => v[0].dim(),
        }
    }

    fn check(&self, x: &Vector<T>) -> Result<(), SetError> {
        if x.dim() != self.dim() {
            return Err(VectorError::DimensionMismatch {
                left: self.dim(),
                right: x.dim(),
            }
            .into());
        }
        Ok(())
    }

    /// Inequality description, available for boxes and polyhedra.
    pub fn constraints(&self) -> Option<Vec<Constraint<T>>> {
        match self {
            Self::Polyhedron(rows) => Some(rows.clone()),
            Self::Box { lo, hi } => {
                let n = lo.dim();
                let mut rows = Vec::with_capacity(2 * n);
                for i in 0..n {
                    rows.push(Constraint {
                        a: Vector::basis(n, i),
                        b: hi.coords()[i],
                    });
                    rows.push(Constraint {
                        a: -&Vector::basis(n, i),
                        b: -lo.coords()[i],
                    });
                }
                Some(rows)
            }
            _ => None,
        }
    }

    /// `σ(d) = sup over the set of ⟨z, d⟩`; `+∞` when unbounded, `−∞` for an
    /// empty polyhedron.
    pub fn support_function(&self, d: &Vector<T>) -> Result<T, SetError> {
        self.check(d)?;
        Ok(match self {
            Self::Singleton(c) => c.dot_unchecked(d),
            Self::Ball { center, radius } => center.dot_unchecked(d) + *radius * d.norm(),
            Self::Box { lo, hi } => lo
                .coords()
                .iter()
                .zip(hi.coords())
                .zip(d.coords())
                .fold(T::zero(), |acc, ((&l, &h), &di)| acc + (l * di).max(h * di)),
            Self::PointCloudHull(vs) => vs.iter().map(|v| v.dot_unchecked(d)).fold(T::neg_infinity(), T::max),
            Self::Polyhedron(rows) => polyhedron_support(rows, d)?,
        })
    }

    /// Nearest point of the set.
    pub fn project(&self, x: &Vector<T>) -> Result<Vector<T>, SetError> {
        self.check(x)?;
        Ok(match self {
            Self::Singleton(c) => c.clone(),
            Self::Ball { center, radius } => {
                let offset = x - center;
                let dist = offset.norm();
                if dist <= *radius {
                    x.clone()
                } else {
                    center.axpy(*radius / dist, &offset)
                }
            }
            Self::Box { lo, hi } => Vector::from_raw(
                x.coords()
                    .iter()
                    .zip(lo.coords().iter().zip(hi.coords()))
                    .map(|(&v, (&l, &h))| v.max(l).min(h))
                    .collect(),
            ),
            Self::Polyhedron(rows) => {
                let violated = rows.iter().any(|r| r.a.dot_unchecked(x) > r.b);
                if !violated {
                    return Ok(x.clone());
                }
                // min ‖w‖ s.t. −⟨a_i, w⟩ ≥ ⟨a_i, x⟩ − b_i
                let g: Vec<Vec<T>> = rows.iter().map(|r| (-&r.a).into_coords()).collect();
                let h: Vec<T> = rows.iter().map(|r| r.a.dot_unchecked(x) - r.b).collect();
                let w = ldp(&g, &h, x.dim()).ok_or(SetError::EmptySet)?;
                x + &Vector::from_raw(w)
            }
            Self::PointCloudHull(vs) => {
                let shifted: Vec<Vector<T>> = vs.iter().map(|v| v - x).collect();
                x + &min_norm_point(&shifted)
            }
        })
    }

    pub fn distance(&self, x: &Vector<T>) -> Result<T, SetError> {
        Ok((x - &self.project(x)?).norm())
    }

    /// Membership up to an absolute tolerance on the distance.
    pub fn contains(&self, x: &Vector<T>, tol: T) -> Result<bool, SetError> {
        Ok(self.distance(x)? <= tol)
    }
}

fn polyhedron_support<T: Scalar>(rows: &[Constraint<T>], d: &Vector<T>) -> Result<T, SetError> {
    let dim = d.dim();
    // primal feasibility: project the origin
    let g: Vec<Vec<T>> = rows.iter().map(|r| (-&r.a).into_coords()).collect();
    let h: Vec<T> = rows.iter().map(|r| -r.b).collect();
    if ldp(&g, &h, dim).is_none() {
        return Ok(T::neg_infinity());
    }
    // dual: min bᵀy s.t. Aᵀy = d, y ≥ 0; infeasible dual means unbounded primal
    let costs: Vec<T> = rows.iter().map(|r| r.b).collect();
    let eq_rows: Vec<Vec<T>> = (0..dim)
        .map(|k| rows.iter().map(|r| r.a.coords()[k]).collect())
        .collect();
    Ok(match simplex_min(&costs, &eq_rows, d.coords()) {
        LpOutcome::Optimal(v) => v,
        LpOutcome::Infeasible => T::infinity(),
        LpOutcome::Unbounded => T::neg_infinity(),
    })
}
