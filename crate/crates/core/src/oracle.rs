//! Exact answers for desk-scale instances.
//!
//! [`solve_exact`] enumerates every column basis and keeps the nonnegative
//! basic solutions. [`solve_flow_kkt`] computes the minimum-energy flow from
//! the saddle-point system directly, independently of the Laplacian route
//! used by the dynamics.

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::LpInstance;

pub const MAX_VARIABLES: usize = 20;
pub const MAX_BASES: u128 = 1_000_000;
/// Cost ties and vertex residuals are compared at this tolerance.
pub const TIE_TOLERANCE: f64 = 1e-9;
/// A basis is singular when its smallest LU pivot is below this fraction of the largest.
const BASIS_PIVOT_RATIO: f64 = 1e-12;

pub const LEXICOGRAPHIC_MIN: &str = "lexicographic-min";

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub opt: f64,
    pub x_star: DVector<f64>,
    pub all_optimal_vertices: Vec<DVector<f64>>,
    pub chosen_rule: String,
}

impl OracleSolution {
    /// `ξ*_j = c_j x*_j / opt`.
    pub fn xi_star(&self, instance: &LpInstance) -> Result<DVector<f64>> {
        crate::diagnostics::xi(instance, &self.x_star)
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Lexicographic order on coordinates with the tie tolerance.
fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for (x, y) in a.iter().zip(b.iter()) {
        if (x - y).abs() > TIE_TOLERANCE {
            return x < y;
        }
    }
    false
}

fn same_vertex(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() <= TIE_TOLERANCE)
}

/// Solves the basis subsystem; `None` if it is singular.
fn basic_solution(instance: &LpInstance, basis: &[usize]) -> Option<DVector<f64>> {
    let a = &instance.constraint_matrix;
    let m = a.nrows();
    let b_mat = DMatrix::from_fn(m, m, |i, k| a[(i, basis[k])]);
    let lu = b_mat.full_piv_lu();
    let diag = lu.u().diagonal();
    let largest = diag.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    let smallest = diag.iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if largest == 0.0 || smallest <= BASIS_PIVOT_RATIO * largest {
        return None;
    }
    let xb = lu.solve(&instance.rhs)?;
    let mut x = DVector::zeros(a.ncols());
    for (k, &j) in basis.iter().enumerate() {
        x[j] = xb[k];
    }
    Some(x)
}

/// All distinct vertices (nonnegative basic solutions) of `{A x = b, x ≥ 0}`.
pub fn enumerate_vertices(instance: &LpInstance) -> Result<Vec<DVector<f64>>> {
    let (m, n) = instance.constraint_matrix.shape();
    if m == 0 || n == 0 {
        return Err(Error::EmptyInstance);
    }
    if m > n {
        return Err(Error::RankDeficient { rank: n, rows: m });
    }
    let bases = binomial(n, m);
    if n > MAX_VARIABLES || bases > MAX_BASES {
        return Err(Error::TooLarge { variables: n, bases });
    }
    let scale = instance.rhs.amax().max(1.0);
    let mut vertices: Vec<DVector<f64>> = Vec::new();
    for basis in (0..n).combinations(m) {
        let Some(mut x) = basic_solution(instance, &basis) else { continue };
        if x.iter().any(|&v| v < -TIE_TOLERANCE * scale) {
            continue;
        }
        x.iter_mut().for_each(|v| *v = v.max(0.0));
        let residual = (&instance.constraint_matrix * &x - &instance.rhs).amax();
        if residual > TIE_TOLERANCE * scale {
            continue;
        }
        if !vertices.iter().any(|w| same_vertex(w, &x)) {
            vertices.push(x);
        }
    }
    Ok(vertices)
}

/// Optimal value and the lexicographically smallest optimal vertex.
pub fn solve_exact(instance: &LpInstance) -> Result<OracleSolution> {
    let vertices = enumerate_vertices(instance)?;
    let opt = vertices.iter().map(|v| instance.costs.dot(v)).fold(f64::INFINITY, f64::min);
    if !opt.is_finite() {
        return Err(Error::Infeasible);
    }
    let tie = TIE_TOLERANCE * opt.abs().max(1.0);
    let mut optimal: Vec<DVector<f64>> = vertices.into_iter().filter(|v| instance.costs.dot(v) <= opt + tie).collect();
    optimal.sort_by(|a, b| {
        if lex_less(a, b) {
            std::cmp::Ordering::Less
        } else if lex_less(b, a) {
            std::cmp::Ordering::Greater
        } else {
            std::cmp::Ordering::Equal
        }
    });
    let x_star = optimal[0].clone();
    Ok(OracleSolution {
        opt: instance.costs.dot(&x_star),
        x_star,
        all_optimal_vertices: optimal,
        chosen_rule: LEXICOGRAPHIC_MIN.to_string(),
    })
}

/// The minimizer of `fᵀ R f` over `A f = b` together with its multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct KktFlow {
    pub flow: DVector<f64>,
    /// `λ` with `R f = Aᵀ λ`; coincides with the node potentials.
    pub multipliers: DVector<f64>,
}

/// Solves `[R −Aᵀ; A 0] [f; λ] = [0; b]` by dense LU.
pub fn solve_flow_kkt(instance: &LpInstance, resistances: &DVector<f64>) -> Result<KktFlow> {
    let (m, n) = instance.constraint_matrix.shape();
    if resistances.len() != n {
        return Err(Error::DimensionMismatch { context: "resistances length", expected: n, found: resistances.len() });
    }
    if let Some((index, &value)) = resistances.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
        return Err(Error::NonPositiveState { index, value });
    }
    let a = &instance.constraint_matrix;
    let mut k = DMatrix::<f64>::zeros(n + m, n + m);
    for j in 0..n {
        k[(j, j)] = resistances[j];
    }
    for i in 0..m {
        for j in 0..n {
            k[(j, n + i)] = -a[(i, j)];
            k[(n + i, j)] = a[(i, j)];
        }
    }
    let mut rhs = DVector::<f64>::zeros(n + m);
    rhs.rows_mut(n, m).copy_from(&instance.rhs);
    let lu = k.full_piv_lu();
    if !lu.is_invertible() {
        return Err(Error::SingularSystem);
    }
    let sol = lu.solve(&rhs).ok_or(Error::SingularSystem)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem);
    }
    Ok(KktFlow { flow: sol.rows(0, n).into_owned(), multipliers: sol.rows(n, m).into_owned() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simplex_two_vertices() {
        let lp = LpInstance::simplex(&[1.0, 2.0]);
        assert_eq!(enumerate_vertices(&lp).unwrap().len(), 2);
        let sol = solve_exact(&lp).unwrap();
        assert_eq!(sol.opt, 1.0);
        assert_eq!(sol.x_star.as_slice(), &[1.0, 0.0]);
        assert_eq!(sol.all_optimal_vertices.len(), 1);
        assert_eq!(sol.chosen_rule, "lexicographic-min");
    }

    #[test]
    fn scalar() {
        let lp = LpInstance::from_rows(&[vec![1.0]], &[1.0], &[5.0]).unwrap();
        let sol = solve_exact(&lp).unwrap();
        assert_eq!(sol.opt, 5.0);
        assert_eq!(sol.x_star.as_slice(), &[1.0]);
    }

    fn triangle(c: [f64; 3]) -> LpInstance {
        LpInstance::from_rows(&[vec![1.0, 0.0, 1.0], vec![-1.0, 1.0, 0.0]], &[1.0, 0.0], &c).unwrap()
    }

    #[test]
    fn triangle_picks_cheaper_path() {
        let direct = solve_exact(&triangle([1.0, 1.0, 3.0])).unwrap();
        assert_eq!(direct.opt, 2.0);
        assert_eq!(direct.x_star.as_slice(), &[1.0, 1.0, 0.0]);
        let detour = solve_exact(&triangle([2.0, 2.0, 3.0])).unwrap();
        assert_eq!(detour.opt, 3.0);
        assert_eq!(detour.x_star.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn triangle_tie_lists_both_paths() {
        let sol = solve_exact(&triangle([1.0, 2.0, 3.0])).unwrap();
        assert_eq!(sol.opt, 3.0);
        assert_eq!(sol.all_optimal_vertices.len(), 2);
        // lexicographic: (0,0,1) < (1,1,0)
        assert_eq!(sol.x_star.as_slice(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn infeasible_and_too_large() {
        // x1 + x2 = -1 has no nonnegative solution
        let lp = LpInstance::from_rows(&[vec![1.0, 1.0]], &[-1.0], &[1.0, 1.0]).unwrap();
        assert_eq!(solve_exact(&lp).unwrap_err(), Error::Infeasible);
        let big = LpInstance::simplex(&[1.0; 21]);
        assert!(matches!(solve_exact(&big), Err(Error::TooLarge { variables: 21, .. })));
        assert_eq!(binomial(20, 10), 184_756);
    }

    #[test]
    fn kkt_hand_examples() {
        let lp = LpInstance::simplex(&[1.0, 2.0]);
        let f = solve_flow_kkt(&lp, &DVector::from_vec(vec![1.0, 2.0])).unwrap();
        assert_relative_eq!(f.flow[0], 2.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(f.flow[1], 1.0 / 3.0, epsilon = 1e-15);
        for k in [0.1, 1.0, 17.0] {
            let f = solve_flow_kkt(&lp, &DVector::from_vec(vec![k, k])).unwrap();
            assert_relative_eq!(f.flow[0], 0.5, epsilon = 1e-14);
            assert_relative_eq!(f.flow[1], 0.5, epsilon = 1e-14);
        }
    }

    #[test]
    fn kkt_singular_when_rank_deficient() {
        let lp = LpInstance::from_rows(&[vec![1.0, 1.0], vec![2.0, 2.0]], &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        assert_eq!(solve_flow_kkt(&lp, &DVector::from_vec(vec![1.0, 1.0])).unwrap_err(), Error::SingularSystem);
    }
}
