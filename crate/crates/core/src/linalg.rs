//! Small dense complex-matrix helpers for the capacity computation.
//!
//! Matrices here are at most 8x8 (antenna counts), stored row-major as
//! `&[Complex64]`. Two routes to the same quantity are provided on purpose:
//! `ln_det_identity_plus_scaled` (Cholesky) for single-SNR evaluation and
//! `hermitian_eigenvalues` (cyclic Jacobi) when one channel draw is reused
//! across many SNR values.

use num_complex::Complex64;

/// Gram matrix G = H H^dagger of an m x n matrix, written into `out` (m x m).
pub(crate) fn gram_into(h: &[Complex64], m: usize, n: usize, out: &mut [Complex64]) {
    debug_assert_eq!(h.len(), m * n);
    debug_assert_eq!(out.len(), m * m);
    for i in 0..m {
        for j in 0..=i {
            let mut acc = Complex64::new(0.0, 0.0);
            for k in 0..n {
                acc += h[i * n + k] * h[j * n + k].conj();
            }
            out[i * m + j] = acc;
            out[j * m + i] = acc.conj();
        }
    }
}

/// ln det(I + c G) for Hermitian positive semidefinite G via Cholesky.
///
/// I + cG has all eigenvalues >= 1, so every pivot stays >= 1 and no
/// pivoting is needed. `scratch` must hold m*m entries.
pub(crate) fn ln_det_identity_plus_scaled(
    g: &[Complex64],
    m: usize,
    c: f64,
    scratch: &mut [Complex64],
) -> f64 {
    debug_assert_eq!(g.len(), m * m);
    debug_assert_eq!(scratch.len(), m * m);
    for i in 0..m {
        for j in 0..m {
            let mut v = g[i * m + j] * c;
            if i == j {
                v += 1.0;
            }
            scratch[i * m + j] = v;
        }
    }
    let mut ln_det = 0.0;
    for j in 0..m {
        let mut d = scratch[j * m + j].re;
        for k in 0..j {
            d -= scratch[j * m + k].norm_sqr();
        }
        debug_assert!(d > 0.0, "pivot {d} not positive");
        ln_det += d.ln();
        let inv = 1.0 / d.sqrt();
        scratch[j * m + j] = Complex64::new(d.sqrt(), 0.0);
        for i in (j + 1)..m {
            let mut v = scratch[i * m + j];
            for k in 0..j {
                v -= scratch[i * m + k] * scratch[j * m + k].conj();
            }
            scratch[i * m + j] = v * inv;
        }
    }
    ln_det
}

/// Eigenvalues of a Hermitian matrix by cyclic Jacobi rotations.
///
/// `a` is destroyed. Results are written to `out` in no particular order.
/// Each pivot a_pq is first made real by a unilateral phase rotation of
/// row/column q, then annihilated with a classic real Jacobi rotation.
pub(crate) fn hermitian_eigenvalues(a: &mut [Complex64], m: usize, out: &mut [f64]) {
    debug_assert_eq!(a.len(), m * m);
    debug_assert!(out.len() >= m);
    if m == 1 {
        out[0] = a[0].re;
        return;
    }
    let scale: f64 = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt().max(1.0);
    let tol = 1e-15 * scale;
    for _sweep in 0..60 {
        let mut off = 0.0;
        for p in 0..m {
            for q in (p + 1)..m {
                off += a[p * m + q].norm_sqr();
            }
        }
        if off.sqrt() <= tol {
            break;
        }
        for p in 0..m {
            for q in (p + 1)..m {
                let b = a[p * m + q];
                let abs_b = b.norm();
                if abs_b <= tol * 1e-2 {
                    continue;
                }
                // Phase rotation: column q *= e^{-i phi}, row q *= e^{i phi},
                // which makes a_pq real positive.
                let phase = b / abs_b;
                let phase_conj = phase.conj();
                for r in 0..m {
                    a[r * m + q] *= phase_conj;
                }
                for r in 0..m {
                    a[q * m + r] *= phase;
                }
                // Real Jacobi rotation zeroing the (p, q) entry.
                let app = a[p * m + p].re;
                let aqq = a[q * m + q].re;
                let theta = (aqq - app) / (2.0 * abs_b);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..m {
                    let arp = a[r * m + p];
                    let arq = a[r * m + q];
                    a[r * m + p] = arp * c - arq * s;
                    a[r * m + q] = arp * s + arq * c;
                }
                for r in 0..m {
                    let apr = a[p * m + r];
                    let aqr = a[q * m + r];
                    a[p * m + r] = apr * c - aqr * s;
                    a[q * m + r] = apr * s + aqr * c;
                }
                // Clean up rounding drift on the annihilated pair.
                a[p * m + q] = Complex64::new(0.0, 0.0);
                a[q * m + p] = Complex64::new(0.0, 0.0);
            }
        }
    }
    for i in 0..m {
        out[i] = a[i * m + i].re;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, m: usize, n: usize) -> Vec<Complex64> {
        (0..m * n)
            .map(|_| Complex64::new(rng.gen::<f64>() * 2.0 - 1.0, rng.gen::<f64>() * 2.0 - 1.0))
            .collect()
    }

    #[test]
    fn gram_of_identity() {
        let h = vec![
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 0.0),
        ];
        let mut g = vec![Complex64::new(0.0, 0.0); 4];
        gram_into(&h, 2, 2, &mut g);
        assert_eq!(g[0], Complex64::new(1.0, 0.0));
        assert_eq!(g[3], Complex64::new(1.0, 0.0));
        assert_eq!(g[1], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn gram_is_hermitian_with_trace_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (m, n) = (3, 4);
        let h = random_matrix(&mut rng, m, n);
        let mut g = vec![Complex64::new(0.0, 0.0); m * m];
        gram_into(&h, m, n, &mut g);
        for i in 0..m {
            for j in 0..m {
                let d = g[i * m + j] - g[j * m + i].conj();
                assert!(d.norm() < 1e-14);
            }
        }
        let trace: f64 = (0..m).map(|i| g[i * m + i].re).sum();
        let frob: f64 = h.iter().map(|z| z.norm_sqr()).sum();
        assert!((trace - frob).abs() < 1e-12);
    }

    #[test]
    fn logdet_diagonal_case() {
        // G = diag(2, 5): ln det(I + 0.5 G) = ln 2 + ln 3.5
        let g = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(5.0, 0.0),
        ];
        let mut scratch = vec![Complex64::new(0.0, 0.0); 4];
        let v = ln_det_identity_plus_scaled(&g, 2, 0.5, &mut scratch);
        assert!((v - (2.0f64.ln() + 3.5f64.ln())).abs() < 1e-14);
    }

    #[test]
    fn eigenvalues_of_diagonal_matrix() {
        let mut a = vec![Complex64::new(0.0, 0.0); 9];
        a[0] = Complex64::new(3.0, 0.0);
        a[4] = Complex64::new(-1.0, 0.0);
        a[8] = Complex64::new(0.5, 0.0);
        let mut ev = vec![0.0; 3];
        hermitian_eigenvalues(&mut a, 3, &mut ev);
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((ev[0] + 1.0).abs() < 1e-12);
        assert!((ev[1] - 0.5).abs() < 1e-12);
        assert!((ev[2] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn eigenvalues_known_2x2_complex() {
        // [[2, i], [-i, 2]] has eigenvalues 1 and 3.
        let mut a = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let mut ev = vec![0.0; 2];
        hermitian_eigenvalues(&mut a, 2, &mut ev);
        ev.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    /// The two routes must agree: sum of log(1 + c lambda_i) over Jacobi
    /// eigenvalues equals the Cholesky ln det(I + cG).
    #[test]
    fn eigen_and_cholesky_routes_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for &(m, n) in &[(1usize, 1usize), (2, 2), (3, 3), (4, 4), (3, 5), (4, 2)] {
            for _ in 0..25 {
                let h = random_matrix(&mut rng, m, n);
                let mut g = vec![Complex64::new(0.0, 0.0); m * m];
                gram_into(&h, m, n, &mut g);
                let mut scratch = vec![Complex64::new(0.0, 0.0); m * m];
                let c = 0.7;
                let chol = ln_det_identity_plus_scaled(&g, m, c, &mut scratch);
                let mut a = g.clone();
                let mut ev = vec![0.0; m];
                hermitian_eigenvalues(&mut a, m, &mut ev);
                let eig: f64 = ev.iter().map(|&l| (1.0 + c * l.max(0.0)).ln()).sum();
                assert!(
                    (chol - eig).abs() <= 1e-10 * (1.0 + chol.abs()),
                    "{m}x{n}: chol {chol} eig {eig}"
                );
                // eigenvalue sum matches the trace
                let trace: f64 = (0..m).map(|i| g[i * m + i].re).sum();
                let sum: f64 = ev.iter().sum();
                assert!((trace - sum).abs() < 1e-10 * trace.max(1.0));
            }
        }
    }
}
