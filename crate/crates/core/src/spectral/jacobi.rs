//! One-sided (Hestenes) Jacobi SVD for the small square factors of
//! separable operators.

use nalgebra::{DMatrix, DVector};

const MAX_SWEEPS: usize = 60;

pub(crate) struct JacobiSvd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

/// SVD of a tall or square matrix `a` (rows ≥ cols). Returns `None` if the
/// rotations fail to converge. Singular values are sorted nonincreasing and
/// `u` is completed to an orthonormal `rows × cols` block even where `s = 0`.
pub(crate) fn jacobi_svd(a: &DMatrix<f64>) -> Option<JacobiSvd> {
    let (m, n) = a.shape();
    assert!(m >= n, "jacobi_svd expects rows >= cols");
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let eps = f64::EPSILON;
    let mut sweeps = 0;
    loop {
        if sweeps == MAX_SWEEPS {
            return None;
        }
        sweeps += 1;
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let (alpha, beta, gamma) = {
                    let cp = w.column(p);
                    let cq = w.column(q);
                    (cp.norm_squared(), cq.norm_squared(), cp.dot(&cq))
                };
                if gamma == 0.0 || gamma.abs() <= eps * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, p, q, c, s);
                rotate(&mut v, p, q, c, s);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut s: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| s[j].total_cmp(&s[i]));
    let s_max = s.iter().cloned().fold(0.0, f64::max);
    let mut u = DMatrix::<f64>::zeros(m, n);
    let mut v_sorted = DMatrix::<f64>::zeros(n, n);
    let mut filled = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        v_sorted.set_column(dst, &v.column(src));
        if s[src] > s_max * 1e-300 && s[src] > 0.0 {
            let col = w.column(src) / s[src];
            u.set_column(dst, &col);
            filled.push(dst);
        }
    }
    s = order.iter().map(|&i| s[i]).collect();
    complete_basis(&mut u, &filled);
    Some(JacobiSvd { u, s, v: v_sorted })
}

fn rotate(mat: &mut DMatrix<f64>, p: usize, q: usize, c: f64, s: f64) {
    for r in 0..mat.nrows() {
        let a = mat[(r, p)];
        let b = mat[(r, q)];
        mat[(r, p)] = c * a - s * b;
        mat[(r, q)] = s * a + c * b;
    }
}

/// Fill the columns of `u` not listed in `filled` with unit vectors
/// orthogonal to everything already present (modified Gram–Schmidt against
/// the canonical basis).
pub(crate) fn complete_basis(u: &mut DMatrix<f64>, filled: &[usize]) {
    let (m, n) = u.shape();
    let mut have: Vec<usize> = filled.to_vec();
    let missing: Vec<usize> = (0..n).filter(|j| !filled.contains(j)).collect();
    let mut candidate = 0usize;
    for col in missing {
        while candidate < m {
            let mut x = DVector::<f64>::zeros(m);
            x[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for &h in &have {
                    let proj = u.column(h).dot(&x);
                    x -= u.column(h) * proj;
                }
            }
            let norm = x.norm();
            if norm > 1e-8 {
                u.set_column(col, &(x / norm));
                have.push(col);
                break;
            }
        }
    }
}
