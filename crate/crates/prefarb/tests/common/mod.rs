//! Shared helpers for the integration suite: an independent brute-force
//! reference for the utility solver, kept deliberately naive so it shares no
//! code path with the production implementation.

use nalgebra::{DMatrix, DVector};
use prefarb::PreferenceMatrix;

/// Reference solution of the ranking problem by explicit linear algebra.
///
/// Build the pair incidence matrix `B` (one row per unordered pair `(i, j)`
/// with `i < j`: `+1` in column `i`, `-1` in column `j`) and the stacked pair
/// vector `rho`, then solve the zero-sum-constrained least squares
///
/// ```text
/// min ||B u - rho||^2   subject to   sum(u) = 0
/// ```
///
/// via the augmented normal equations `(B^T B + 1 1^T) u = B^T rho`. Adding
/// the rank-one `1 1^T` term pins the all-ones null direction of `B^T B`:
/// because every row of `B` sums to zero, `B^T rho` is orthogonal to the ones
/// vector, so the unique solution of the augmented system automatically
/// satisfies `sum(u) = 0` and agrees with the constrained minimizer.
pub fn dense_least_squares_utilities(prefs: &PreferenceMatrix) -> Vec<f64> {
    let n = prefs.n();
    let n_pairs = n * (n - 1) / 2;
    let mut incidence = DMatrix::<f64>::zeros(n_pairs, n);
    let mut rho = DVector::<f64>::zeros(n_pairs);
    let mut row = 0;
    for i in 0..n {
        for j in (i + 1)..n {
            incidence[(row, i)] = 1.0;
            incidence[(row, j)] = -1.0;
            rho[row] = prefs.value(i, j);
            row += 1;
        }
    }
    let normal = incidence.transpose() * &incidence + DMatrix::<f64>::from_element(n, n, 1.0);
    let rhs = incidence.transpose() * rho;
    let solution = normal
        .lu()
        .solve(&rhs)
        .expect("augmented normal equations are nonsingular");
    solution.iter().copied().collect()
}
