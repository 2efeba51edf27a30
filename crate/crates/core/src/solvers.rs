//! Small dense solvers backing the convex-set geometry: non-negative least
//! squares, least-distance programming, a two-phase simplex, and Wolfe's
//! minimum-norm-point method. Sizes are desk scale (dims ≤ 64, a few dozen
//! constraints), so everything is dense and allocation-happy.

use crate::scalar::Scalar;
use crate::vectorspace::{least_squares, Matrix, Vector};

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Lawson–Hanson active-set NNLS: `min ‖A λ − b‖` subject to `λ ≥ 0`, with
/// `A` given as columns. Returns `λ`.
pub(crate) fn nnls<T: Scalar>(cols: &[Vec<T>], b: &[T]) -> Vec<T> {
    let n = cols.len();
    let m = b.len();
    let mut x = vec![T::zero(); n];
    if n == 0 {
        return x;
    }
    let a_scale = cols
        .iter()
        .flat_map(|c| c.iter())
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    let b_scale = b.iter().fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tol = T::lit(10.0) * T::epsilon() * a_scale * b_scale.max(T::one()) * T::lit(m.max(n) as f64);
    let mut passive = vec![false; n];
    let residual = |x: &[T]| -> Vec<T> {
        let mut r = b.to_vec();
        for (col, &xi) in cols.iter().zip(x) {
            if xi != T::zero() {
                for (ri, &c) in r.iter_mut().zip(col) {
                    *ri -= c * xi;
                }
            }
        }
        r
    };
    let max_outer = 3 * n + 10;
    for _ in 0..max_outer {
        let r = residual(&x);
        let w: Vec<T> = cols.iter().map(|c| dot(c, &r)).collect();
        let candidate = (0..n)
            .filter(|&j| !passive[j])
            .fold(None, |best: Option<usize>, j| match best {
                Some(bj) if w[bj] >= w[j] => Some(bj),
                _ => Some(j),
            });
        let Some(j) = candidate else { break };
        if !(w[j] > tol) {
            break;
        }
        passive[j] = true;
        let mut stalled = false;
        for _ in 0..=n {
            let idx: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let sub: Vec<Vec<T>> = idx.iter().map(|&i| cols[i].clone()).collect();
            let s_sub = least_squares(&sub, b);
            let mut s = vec![T::zero(); n];
            for (&i, &v) in idx.iter().zip(&s_sub) {
                s[i] = v;
            }
            if idx.iter().all(|&i| s[i] > T::zero()) {
                x = s;
                break;
            }
            let mut alpha = T::one();
            let mut blocking = None;
            for &i in &idx {
                if s[i] <= T::zero() {
                    let denom = x[i] - s[i];
                    let ratio = if denom > T::zero() { x[i] / denom } else { T::zero() };
                    if blocking.is_none() || ratio < alpha {
                        alpha = ratio;
                        blocking = Some(i);
                    }
                }
            }
            for &i in &idx {
                x[i] = x[i] + alpha * (s[i] - x[i]);
                if Some(i) == blocking || x[i] <= T::zero() {
                    x[i] = T::zero();
                    passive[i] = false;
                }
            }
            if alpha == T::zero() && !passive[j] {
                // the newly added column could not enter; avoid cycling on it
                stalled = true;
                break;
            }
        }
        if stalled {
            break;
        }
    }
    x
}

/// Least-distance programming: `min ‖w‖` subject to `G w ≥ h`, rows of `G`
/// given explicitly. `None` when the constraints are inconsistent.
pub(crate) fn ldp<T: Scalar>(g_rows: &[Vec<T>], h: &[T], dim: usize) -> Option<Vec<T>> {
    if h.iter().all(|&v| v <= T::zero()) {
        return Some(vec![T::zero(); dim]);
    }
    // E = [Gᵀ; hᵀ], f = e_{dim+1}
    let cols: Vec<Vec<T>> = g_rows
        .iter()
        .zip(h)
        .map(|(row, &hi)| {
            let mut c = row.clone();
            c.push(hi);
            c
        })
        .collect();
    let mut f = vec![T::zero(); dim + 1];
    f[dim] = T::one();
    let u = nnls(&cols, &f);
    let mut r: Vec<T> = f.iter().map(|&v| -v).collect();
    for (col, &ui) in cols.iter().zip(&u) {
        for (ri, &c) in r.iter_mut().zip(col) {
            *ri += c * ui;
        }
    }
    let last = r[dim];
    if !(last.abs() > T::epsilon() * T::lit(100.0)) {
        return None;
    }
    Some(r[..dim].iter().map(|&v| -v / last).collect())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LpOutcome<T> {
    Optimal(T),
    Infeasible,
    Unbounded,
}

/// Two-phase tableau simplex with Bland's rule for the standard-form program
/// `min cᵀy` subject to `A y = b`, `y ≥ 0`. `a_rows` has one entry per
/// equality row.
pub(crate) fn simplex_min<T: Scalar>(c: &[T], a_rows: &[Vec<T>], b: &[T]) -> LpOutcome<T> {
    let rows = a_rows.len();
    let nvars = c.len();
    let width = nvars + rows + 1;
    let scale = a_rows
        .iter()
        .flat_map(|r| r.iter())
        .chain(b.iter())
        .fold(T::one(), |acc, v| acc.max(v.abs()));
    let tol = T::epsilon() * T::lit(1e3) * scale;

    let mut tab: Vec<Vec<T>> = Vec::with_capacity(rows);
    for (i, (row, &bi)) in a_rows.iter().zip(b).enumerate() {
        let sign = if bi < T::zero() { -T::one() } else { T::one() };
        let mut t = vec![T::zero(); width];
        for (j, &v) in row.iter().enumerate() {
            t[j] = sign * v;
        }
        t[nvars + i] = T::one();
        t[width - 1] = sign * bi;
        tab.push(t);
    }
    let mut basis: Vec<usize> = (nvars..nvars + rows).collect();

    // phase 1: minimize the sum of artificials
    let mut cost1 = vec![T::zero(); width];
    for c in &mut cost1[nvars..nvars + rows] {
        *c = T::one();
    }
    let allowed1: Vec<bool> = vec![true; width - 1];
    if run_simplex(&mut tab, &mut basis, &cost1, &allowed1, tol).is_none() {
        return LpOutcome::Infeasible;
    }
    let phase1: T = basis
        .iter()
        .zip(&tab)
        .filter(|(&bj, _)| bj >= nvars)
        .fold(T::zero(), |acc, (_, row)| acc + row[width - 1]);
    if phase1 > tol * T::lit(10.0) {
        return LpOutcome::Infeasible;
    }
    // drive remaining artificials out of the basis, dropping redundant rows
    let mut r = 0;
    while r < tab.len() {
        if basis[r] >= nvars {
            if let Some(col) = (0..nvars).find(|&j| tab[r][j].abs() > tol) {
                pivot(&mut tab, &mut basis, r, col);
                r += 1;
            } else {
                tab.remove(r);
                basis.remove(r);
            }
        } else {
            r += 1;
        }
    }

    let mut cost2 = vec![T::zero(); width];
    cost2[..nvars].copy_from_slice(c);
    let mut allowed2 = vec![true; width - 1];
    for a in allowed2.iter_mut().skip(nvars) {
        *a = false;
    }
    match run_simplex(&mut tab, &mut basis, &cost2, &allowed2, tol) {
        None => LpOutcome::Unbounded,
        Some(()) => {
            let value = basis
                .iter()
                .zip(&tab)
                .fold(T::zero(), |acc, (&bj, row)| acc + cost2[bj] * row[width - 1]);
            LpOutcome::Optimal(value)
        }
    }
}

fn pivot<T: Scalar>(tab: &mut [Vec<T>], basis: &mut [usize], r: usize, col: usize) {
    let p = tab[r][col];
    for v in tab[r].iter_mut() {
        *v /= p;
    }
    let prow = tab[r].clone();
    for (i, row) in tab.iter_mut().enumerate() {
        if i == r {
            continue;
        }
        let f = row[col];
        if f != T::zero() {
            for (v, &pv) in row.iter_mut().zip(&prow) {
                *v -= f * pv;
            }
        }
    }
    basis[r] = col;
}

/// Runs primal simplex iterations; `None` signals unboundedness.
fn run_simplex<T: Scalar>(tab: &mut [Vec<T>], basis: &mut [usize], cost: &[T], allowed: &[bool], tol: T) -> Option<()> {
    let width = cost.len();
    let max_iter = 50 * (width + tab.len()) + 100;
    for _ in 0..max_iter {
        // reduced costs: c_j − c_Bᵀ B⁻¹ A_j
        let entering = (0..width - 1).filter(|&j| allowed[j]).find(|&j| {
            let z = basis
                .iter()
                .zip(tab.iter())
                .fold(T::zero(), |acc, (&bj, row)| acc + cost[bj] * row[j]);
            cost[j] - z < -tol
        });
        let Some(col) = entering else { return Some(()) };
        let mut leave: Option<(usize, T)> = None;
        for (i, row) in tab.iter().enumerate() {
            if row[col] > tol {
                let ratio = row[width - 1] / row[col];
                leave = match leave {
                    Some((li, lr)) if lr < ratio || (lr == ratio && basis[li] < basis[i]) => Some((li, lr)),
                    _ => Some((i, ratio)),
                };
            }
        }
        let (r, _) = leave?;
        pivot(tab, basis, r, col);
    }
    Some(())
}

/// Wolfe's minimum-norm-point algorithm over the convex hull of `points`.
/// Returns the point of the hull closest to the origin.
pub(crate) fn min_norm_point<T: Scalar>(points: &[Vector<T>]) -> Vector<T> {
    let dim = points[0].dim();
    let max_sq = points.iter().fold(T::zero(), |m, p| m.max(p.norm_sq()));
    let tol = T::epsilon() * T::lit(1e3) * max_sq.max(T::min_positive_value());
    let start = (0..points.len())
        .min_by(|&a, &b| {
            points[a]
                .norm_sq()
                .partial_cmp(&points[b].norm_sq())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
        .unwrap_or(0);
    let mut set = vec![start];
    let mut weights = vec![T::one()];
    let combine = |set: &[usize], w: &[T]| -> Vector<T> {
        set.iter()
            .zip(w)
            .fold(Vector::zeros(dim), |acc, (&i, &wi)| acc.axpy(wi, &points[i]))
    };
    let mut y = points[start].clone();
    for _ in 0..(10 * points.len() + 50) {
        let yy = y.norm_sq();
        let (j, best) = (0..points.len())
            .map(|i| (i, y.dot_unchecked(&points[i])))
            .fold((0, T::infinity()), |acc, cur| if cur.1 < acc.1 { cur } else { acc });
        if best >= yy - tol || set.contains(&j) {
            break;
        }
        set.push(j);
        weights.push(T::zero());
        loop {
            let alpha = affine_min_norm(points, &set);
            let Some(alpha) = alpha else {
                // affinely dependent support; drop the newcomer
                set.pop();
                weights.pop();
                return combine(&set, &weights);
            };
            if alpha.iter().all(|&a| a > T::zero()) {
                weights = alpha;
                break;
            }
            let mut theta = T::one();
            for (&a, &w) in alpha.iter().zip(&weights) {
                if a <= T::zero() && w - a > T::zero() {
                    theta = theta.min(w / (w - a));
                }
            }
            for (w, &a) in weights.iter_mut().zip(&alpha) {
                *w = *w + theta * (a - *w);
            }
            let mut k = 0;
            while k < set.len() {
                if weights[k] <= T::epsilon() {
                    set.remove(k);
                    weights.remove(k);
                } else {
                    k += 1;
                }
            }
            let total = weights.iter().fold(T::zero(), |a, &b| a + b);
            for w in weights.iter_mut() {
                *w /= total;
            }
        }
        y = combine(&set, &weights);
    }
    y
}

/// Affine weights (summing to one) of the min-norm point in the affine hull
/// of the selected points.
fn affine_min_norm<T: Scalar>(points: &[Vector<T>], set: &[usize]) -> Option<Vec<T>> {
    let k = set.len();
    let mut rows = vec![vec![T::zero(); k + 1]; k + 1];
    for (a, &i) in set.iter().enumerate() {
        for (b, &j) in set.iter().enumerate() {
            rows[a][b] = points[i].dot_unchecked(&points[j]);
        }
        rows[a][k] = T::one();
        rows[k][a] = T::one();
    }
    let mut rhs = vec![T::zero(); k + 1];
    rhs[k] = T::one();
    let m = Matrix::from_rows(rows).ok()?;
    let sol = m.solve(&Vector::new(rhs).ok()?).ok()?;
    Some(sol.coords()[..k].to_vec())
}
