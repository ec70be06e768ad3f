//! Direct sparse linear solves for the Newton corrections, backed by a
//! sparse LU factorization. Parallelism is pinned to sequential so
//! repeated runs are bitwise identical.

use super::SolverError;
use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use std::sync::Once;

static INIT: Once = Once::new();

fn force_sequential() {
    INIT.call_once(|| {
        faer::set_global_parallelism(faer::Par::Seq);
    });
}

/// Solve `A x = b` for a square sparse `A` given in triplet form.
pub(crate) fn solve_sparse(
    n: usize,
    triplets: &[(usize, usize, f64)],
    rhs: &[f64],
) -> Result<Vec<f64>, SolverError> {
    force_sequential();
    let trips: Vec<Triplet<usize, usize, f64>> = triplets
        .iter()
        .map(|&(r, c, v)| Triplet::new(r, c, v))
        .collect();
    let a = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
        .map_err(|e| SolverError::LinearSolve { detail: format!("{e:?}") })?;
    let lu = a
        .sp_lu()
        .map_err(|e| SolverError::LinearSolve { detail: format!("{e:?}") })?;
    let mut b = Mat::<f64>::zeros(n, 1);
    for (i, &v) in rhs.iter().enumerate() {
        b[(i, 0)] = v;
    }
    let x = lu.solve(&b);
    Ok((0..n).map(|i| x[(i, 0)]).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[2,1],[1,3]] x = [3,4] -> x = [1,1]
        let trips = vec![(0, 0, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)];
        let x = solve_sparse(2, &trips, &[3.0, 4.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn duplicate_triplets_accumulate() {
        let trips = vec![(0, 0, 1.0), (0, 0, 1.0), (1, 1, 2.0)];
        let x = solve_sparse(2, &trips, &[4.0, 4.0]).unwrap();
        assert!((x[0] - 2.0).abs() < 1e-14);
        assert!((x[1] - 2.0).abs() < 1e-14);
    }
}
