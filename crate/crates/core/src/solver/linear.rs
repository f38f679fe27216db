//! Minimal deterministic sparse linear algebra: CSR storage, ILU(0)
//! factorisation, and preconditioned BiCGStab. Single-threaded by design so
//! results are bit-reproducible across runs and worker counts.

use crate::error::{Error, Result};

/// Compressed sparse row matrix with sorted column indices per row.
#[derive(Debug, Clone)]
pub struct Csr {
    pub n: usize,
    pub row_ptr: Vec<usize>,
    pub cols: Vec<usize>,
    pub vals: Vec<f64>,
}

impl Csr {
    /// Builds a CSR matrix from (row, col, value) triplets, summing
    /// duplicates. Triplet order does not affect the result.
    pub fn from_triplets(n: usize, triplets: &mut Vec<(usize, usize, f64)>) -> Csr {
        triplets.sort_unstable_by_key(|t| (t.0, t.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for &(r, c, v) in triplets.iter() {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Csr {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.cols[k]];
            }
            y[r] = acc;
        }
    }

    /// Index of the diagonal entry of each row.
    fn diagonal_indices(&self) -> Result<Vec<usize>> {
        let mut diag = vec![usize::MAX; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.cols[k] == r {
                    diag[r] = k;
                }
            }
            if diag[r] == usize::MAX {
                return Err(Error::Geometry(format!(
                    "linear system row {r} has no diagonal entry"
                )));
            }
        }
        Ok(diag)
    }
}

/// Zero-fill incomplete LU factorisation sharing the CSR sparsity pattern.
pub struct Ilu0 {
    lu: Csr,
    diag: Vec<usize>,
}

impl Ilu0 {
    pub fn new(a: &Csr) -> Result<Ilu0> {
        let mut lu = a.clone();
        let diag = lu.diagonal_indices()?;
        // IKJ-ordered factorisation restricted to the existing pattern.
        for i in 0..lu.n {
            let (row_start, row_end) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for kk in row_start..row_end {
                let k = lu.cols[kk];
                if k >= i {
                    break;
                }
                let pivot = lu.vals[diag[k]];
                if pivot == 0.0 {
                    return Err(Error::Geometry(format!(
                        "ILU(0) breakdown: zero pivot at row {k}"
                    )));
                }
                let factor = lu.vals[kk] / pivot;
                lu.vals[kk] = factor;
                // Subtract factor * U(k, j) for j > k within row i's pattern.
                let mut jj = kk + 1;
                for uk in diag[k] + 1..lu.row_ptr[k + 1] {
                    let col = lu.cols[uk];
                    while jj < row_end && lu.cols[jj] < col {
                        jj += 1;
                    }
                    if jj == row_end {
                        break;
                    }
                    if lu.cols[jj] == col {
                        lu.vals[jj] -= factor * lu.vals[uk];
                    }
                }
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    /// Solves (LU) z = r in place of z.
    pub fn apply(&self, r: &[f64], z: &mut [f64]) {
        let lu = &self.lu;
        // Forward: L z = r (unit diagonal).
        for i in 0..lu.n {
            let mut acc = r[i];
            for k in lu.row_ptr[i]..self.diag[i] {
                acc -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = acc;
        }
        // Backward: U z = z.
        for i in (0..lu.n).rev() {
            let mut acc = z[i];
            for k in self.diag[i] + 1..lu.row_ptr[i + 1] {
                acc -= lu.vals[k] * z[lu.cols[k]];
            }
            z[i] = acc / lu.vals[self.diag[i]];
        }
    }
}

/// Componentwise backward error max_i |r_i| / ((|A||x|)_i + |b_i|). This is
/// the right convergence measure for device equations whose row scales span
/// many orders of magnitude: a normwise residual target can sit below the
/// f64 rounding floor of the largest rows while small rows are still wrong.
fn backward_error(a: &Csr, x: &[f64], b: &[f64], r: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    for row in 0..a.n {
        let mut scale = b[row].abs();
        for k in a.row_ptr[row]..a.row_ptr[row + 1] {
            scale += (a.vals[k] * x[a.cols[k]]).abs();
        }
        if scale > 0.0 {
            worst = worst.max(r[row].abs() / scale);
        } else if r[row] != 0.0 {
            worst = f64::INFINITY;
        }
    }
    worst
}

/// A few steps of iterative refinement through the ILU factors.  Accepted
/// solutions can still sit orders of magnitude above the f64 floor; polishing
/// is cheap (one matrix-vector product and one triangular sweep per pass) and
/// matters when terminal currents are extracted from near-cancelling fluxes.
/// The solution is never made worse: a pass that fails to reduce the
/// componentwise backward error is rolled back.
fn polish(a: &Csr, pre: &Ilu0, b: &[f64], x: &mut [f64]) {
    let n = a.n;
    let mut r = vec![0.0; n];
    let mut d = vec![0.0; n];
    let residual = |x: &[f64], r: &mut [f64]| {
        a.mul_vec(x, r);
        for i in 0..n {
            r[i] = b[i] - r[i];
        }
    };
    residual(x, &mut r);
    let mut best_err = backward_error(a, x, b, &r);
    let mut best = x.to_vec();
    for _ in 0..4 {
        if best_err <= 4.0 * f64::EPSILON {
            break;
        }
        pre.apply(&r, &mut d);
        for i in 0..n {
            x[i] += d[i];
        }
        residual(x, &mut r);
        let err = backward_error(a, x, b, &r);
        if err < best_err {
            best_err = err;
            best.copy_from_slice(x);
        } else {
            x.copy_from_slice(&best);
            break;
        }
    }
}

/// Solves A x = b with ILU(0)-preconditioned BiCGStab until either the
/// normwise relative residual or the componentwise backward error drops
/// below `rel_tol`; `x` carries the initial guess in and the solution out.
/// Accepted solutions are polished by iterative refinement.
pub fn solve_ilu_bicgstab(a: &Csr, b: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
    let pre = Ilu0::new(a)?;
    let its = bicgstab_loop(a, &pre, b, x, rel_tol)?;
    polish(a, &pre, b, x);
    Ok(its)
}

fn bicgstab_loop(a: &Csr, pre: &Ilu0, b: &[f64], x: &mut [f64], rel_tol: f64) -> Result<usize> {
    let n = a.n;
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(0);
    }
    let mut r = vec![0.0; n];
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let r0 = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];
    let tol = rel_tol * b_norm;

    let dot = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let norm = |a: &[f64]| -> f64 { a.iter().map(|v| v * v).sum::<f64>().sqrt() };

    if norm(&r) <= tol || backward_error(a, x, b, &r) <= rel_tol {
        return Ok(0);
    }
    let max_iters = 4 * n + 200;
    for it in 1..=max_iters {
        let rho_new = dot(&r0, &r);
        if rho_new.abs() < 1e-300 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        pre.apply(&p, &mut y);
        a.mul_vec(&y, &mut v);
        let denom = dot(&r0, &v);
        if denom.abs() < 1e-300 {
            break;
        }
        alpha = rho / denom;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(it);
        }
        pre.apply(&s, &mut z);
        a.mul_vec(&z, &mut t);
        let tt = dot(&t, &t);
        if tt == 0.0 {
            break;
        }
        omega = dot(&t, &s) / tt;
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        if norm(&r) <= tol || backward_error(a, x, b, &r) <= rel_tol {
            return Ok(it);
        }
        if omega.abs() < 1e-300 {
            break;
        }
    }
    // Breakdown or iteration cap: accept if the true residual already
    // meets the componentwise criterion, otherwise report failure.
    a.mul_vec(x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if backward_error(a, x, b, &r) <= rel_tol {
        return Ok(max_iters);
    }
    Err(Error::Geometry(format!(
        "iterative linear solve stalled (backward error {:.3e})",
        backward_error(a, x, b, &r)
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> Csr {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, &mut t)
    }

    #[test]
    fn csr_assembly_sums_duplicate_triplets() {
        let mut t = vec![(0, 0, 1.0), (0, 0, 2.0), (1, 1, 4.0), (0, 1, -1.0)];
        let a = Csr::from_triplets(2, &mut t);
        let mut y = vec![0.0; 2];
        a.mul_vec(&[1.0, 1.0], &mut y);
        assert_eq!(y, vec![2.0, 4.0]);
    }

    #[test]
    fn bicgstab_solves_poisson_chain_to_tolerance() {
        let n = 500;
        let a = laplacian_1d(n);
        let x_true: Vec<f64> = (0..n).map(|i| ((i * 7919) % 100) as f64 / 100.0).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        solve_ilu_bicgstab(&a, &b, &mut x, 1e-12).unwrap();
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn bicgstab_handles_unsymmetric_advection_like_rows() {
        // Upwinded advection-diffusion: strongly non-symmetric M-matrix.
        let n = 400;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 3.5));
            if i > 0 {
                t.push((i, i - 1, -3.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -0.4));
            }
        }
        let a = Csr::from_triplets(n, &mut t);
        let x_true: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
        let mut b = vec![0.0; n];
        a.mul_vec(&x_true, &mut b);
        let mut x = vec![0.0; n];
        solve_ilu_bicgstab(&a, &b, &mut x, 1e-12).unwrap();
        let err = x
            .iter()
            .zip(&x_true)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-8, "max error {err}");
    }

    #[test]
    fn identity_guess_short_circuits() {
        let a = laplacian_1d(10);
        let b = vec![0.0; 10];
        let mut x = vec![0.0; 10];
        let iters = solve_ilu_bicgstab(&a, &b, &mut x, 1e-12).unwrap();
        assert_eq!(iters, 0);
        assert!(x.iter().all(|v| *v == 0.0));
    }
}
