//! Operator gallery: averaged planar rotations, skew resolvents, the averaged
//! right shift, linear resolvents, projections, and Krasnoselskii–Mann
//! averaging of any of them.

use std::f64::consts::TAU;

use num_rational::Ratio;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::scalar::{half, Scalar};
use crate::sets::{ConvexSetSpec, SetError};
use crate::vectorspace::{Matrix, Vector, VectorError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OperatorError {
    #[error(transparent)]
    Vector(#[from] VectorError),
    #[error(transparent)]
    Set(#[from] SetError),
    #[error("right shift would push mass past truncation dimension {trunc}")]
    TruncationOverflow { trunc: usize },
    #[error("(I + M) is numerically singular")]
    SingularSystem,
    #[error("invalid operator: {0}")]
    Invalid(String),
    #[error("{0} is not of the form ½Id ± ½(isometry)")]
    Unsupported(&'static str),
}

/// Rotation angle, kept either as an exact fraction of a full turn or as a
/// radian value. The two regimes are never inferred from one another.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Theta<T> {
    Turns(Ratio<i64>),
    Radians(T),
}

impl<T: Scalar> Theta<T> {
    pub fn turns(num: i64, den: i64) -> Result<Self, OperatorError> {
        if den == 0 {
            return Err(OperatorError::Invalid("turn denominator must be nonzero".into()));
        }
        Ok(Self::Turns(Ratio::new(num, den)))
    }

    pub fn radians(&self) -> T {
        match *self {
            Self::Turns(r) => T::lit(TAU * reduced_turn(r)),
            Self::Radians(v) => v,
        }
    }

    /// Radian value of a multiple of the angle, reducing exact turns modulo
    /// one first so large multiples keep full precision.
    pub fn multiple_radians(&self, k: i64) -> T {
        match *self {
            Self::Turns(r) => T::lit(TAU * reduced_turn(r * Ratio::from_integer(k))),
            Self::Radians(v) => v * T::lit(k as f64),
        }
    }
}

fn reduced_turn(r: Ratio<i64>) -> f64 {
    let frac = r - r.floor();
    *frac.numer() as f64 / *frac.denom() as f64
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorSpec<T> {
    /// `½Id + ½R_{2θ} = cos(θ)R_θ` on the plane.
    PlanarRotationAveraged {
        theta: Theta<T>,
    },
    /// `J_A = (Id + A)⁻¹ = ½Id − ½A` for `Aᵀ = A⁻¹ = −A`.
    SkewResolvent {
        a: Matrix<T>,
    },
    /// `½Id + ½R` with `R` the right shift, truncated to `trunc` coordinates.
    RightShiftAveraged {
        trunc: usize,
    },
    /// `(Id + M)⁻¹` for a monotone linear `M`.
    LinearResolvent {
        m: Matrix<T>,
    },
    Projection {
        set: ConvexSetSpec<T>,
    },
    /// `(1 − λ)Id + λ·base`.
    KMAveraged {
        base: Box<OperatorSpec<T>>,
        lambda: T,
    },
}

const STRUCTURE_TOL: f64 = 1e-12;
const MONOTONE_SAMPLES: usize = 256;
const MONOTONE_SEED: u64 = 0x6d6f_6e6f;

impl<T: Scalar> OperatorSpec<T> {
    pub fn rotation(theta: Theta<T>) -> Self {
        Self::PlanarRotationAveraged { theta }
    }

    /// Validates `Aᵀ = −A` and `AᵀA = I` entrywise within `1e-12`.
    pub fn skew_resolvent(a: Matrix<T>) -> Result<Self, OperatorError> {
        let tol = T::lit(STRUCTURE_TOL);
        let at = a.transpose();
        if at.add_scaled(T::one(), &a).max_abs_entry() > tol {
            return Err(OperatorError::Invalid("skew resolvent requires A^T = -A".into()));
        }
        let gram = at.mul_mat(&a);
        if gram.add_scaled(-T::one(), &Matrix::identity(a.dim())).max_abs_entry() > tol {
            return Err(OperatorError::Invalid("skew resolvent requires A^T A = I".into()));
        }
        Ok(Self::SkewResolvent { a })
    }

    pub fn right_shift(trunc: usize) -> Result<Self, OperatorError> {
        if trunc == 0 {
            return Err(OperatorError::Invalid("truncation dimension must be positive".into()));
        }
        Ok(Self::RightShiftAveraged { trunc })
    }

    /// Validates monotonicity `⟨Mx, x⟩ ≥ −1e−12‖x‖²` on basis vectors and a
    /// fixed-seed sample of directions.
    pub fn linear_resolvent(m: Matrix<T>) -> Result<Self, OperatorError> {
        let n = m.dim();
        let tol = T::lit(STRUCTURE_TOL);
        let mut rng = ChaCha8Rng::seed_from_u64(MONOTONE_SEED);
        let samples = (0..n).map(|i| Vector::basis(n, i)).chain(
            (0..MONOTONE_SAMPLES).map(|_| Vector::from_raw((0..n).map(|_| T::lit(rng.gen_range(-1.0..1.0))).collect())),
        );
        for x in samples {
            let mx = m.mul_vec(&x)?;
            if mx.dot_unchecked(&x) < -tol * x.norm_sq() {
                return Err(OperatorError::Invalid("linear resolvent requires a monotone M".into()));
            }
        }
        Ok(Self::LinearResolvent { m })
    }

    pub fn projection(set: ConvexSetSpec<T>) -> Self {
        Self::Projection { set }
    }

    pub fn km(base: OperatorSpec<T>, lambda: T) -> Result<Self, OperatorError> {
        if !(lambda > T::zero() && lambda <= T::one()) {
            return Err(OperatorError::Invalid("KM relaxation must lie in (0, 1]".into()));
        }
        Ok(Self::KMAveraged {
            base: Box::new(base),
            lambda,
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::PlanarRotationAveraged { .. } => "planar_rotation_averaged",
            Self::SkewResolvent { .. } => "skew_resolvent",
            Self::RightShiftAveraged { .. } => "right_shift_averaged",
            Self::LinearResolvent { .. } => "linear_resolvent",
            Self::Projection { .. } => "projection",
            Self::KMAveraged { .. } => "km_averaged",
        }
    }

    /// Dimension the operator acts on, when it fixes one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Self::PlanarRotationAveraged { .. } => Some(2),
            Self::SkewResolvent { a } => Some(a.dim()),
            Self::RightShiftAveraged { trunc } => Some(*trunc),
            Self::LinearResolvent { m } => Some(m.dim()),
            Self::Projection { set } => Some(set.dim()),
            Self::KMAveraged { base, .. } => base.dim(),
        }
    }

    fn check_dim(&self, x: &Vector<T>) -> Result<(), OperatorError> {
        match self.dim() {
            Some(d) if d != x.dim() => Err(VectorError::DimensionMismatch {
                left: d,
                right: x.dim(),
            }
            .into()),
            _ => Ok(()),
        }
    }

    pub fn apply(&self, x: &Vector<T>) -> Result<Vector<T>, OperatorError> {
        self.check_dim(x)?;
        let h = half::<T>();
        match self {
            Self::PlanarRotationAveraged { theta } => {
                let r2x = rotate(x, theta.multiple_radians(2));
                Ok(x.scale(h).axpy(h, &r2x))
            }
            Self::SkewResolvent { a } => Ok(x.scale(h).axpy(-h, &a.mul_vec(x)?)),
            Self::RightShiftAveraged { trunc } => {
                if x.coords()[trunc - 1] != T::zero() {
                    return Err(OperatorError::TruncationOverflow { trunc: *trunc });
                }
                Ok(x.scale(h).axpy(h, &shift_right(x)))
            }
            Self::LinearResolvent { m } => {
                let system = Matrix::identity(m.dim()).add_scaled(T::one(), m);
                system.solve(x).map_err(|e| match e {
                    VectorError::SingularSystem => OperatorError::SingularSystem,
                    other => other.into(),
                })
            }
            Self::Projection { set } => Ok(set.project(x)?),
            Self::KMAveraged { base, lambda } => {
                let tx = base.apply(x)?;
                Ok(x.scale(T::one() - *lambda).axpy(*lambda, &tx))
            }
        }
    }
}

/// Counterclockwise planar rotation.
pub fn rotate<T: Scalar>(x: &Vector<T>, radians: T) -> Vector<T> {
    let (s, c) = radians.sin_cos();
    let p = x.coords();
    Vector::from_raw(vec![c * p[0] - s * p[1], s * p[0] + c * p[1]])
}

fn shift_right<T: Scalar>(x: &Vector<T>) -> Vector<T> {
    let mut out = Vec::with_capacity(x.dim());
    out.push(T::zero());
    out.extend_from_slice(&x.coords()[..x.dim() - 1]);
    Vector::from_raw(out)
}

/// `‖(I+A)⁻¹x − (½x − ½Ax)‖`: the two routes to a skew resolvent.
pub fn resolvent_formula_check<T: Scalar>(a: &Matrix<T>, x: &Vector<T>) -> Result<T, OperatorError> {
    OperatorSpec::skew_resolvent(a.clone())?;
    let solved = OperatorSpec::LinearResolvent { m: a.clone() }.apply(x)?;
    let closed = OperatorSpec::SkewResolvent { a: a.clone() }.apply(x)?;
    Ok((&solved - &closed).norm())
}

/// `|⟨Tx, x − Tx⟩|` for the operators of the form `½Id ± ½(isometry)`.
pub fn orthogonality_defect<T: Scalar>(op: &OperatorSpec<T>, x: &Vector<T>) -> Result<T, OperatorError> {
    match op {
        OperatorSpec::PlanarRotationAveraged { .. }
        | OperatorSpec::SkewResolvent { .. }
        | OperatorSpec::RightShiftAveraged { .. } => {
            let tx = op.apply(x)?;
            Ok(tx.dot_unchecked(&(x - &tx)).abs())
        }
        other => Err(OperatorError::Unsupported(other.name())),
    }
}
