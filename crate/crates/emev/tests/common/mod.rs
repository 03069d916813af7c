//! Shared helpers for the integration suites: random matrices, SVD validity
//! checks, and an independent singular-value oracle built from the
//! characteristic polynomial of M M^H (Faddeev–LeVerrier), so the SVD under
//! test is never checked against itself.

#![allow(dead_code)]

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use emev::eigen::{CMat, SvdResult};

pub fn random_cmat(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> CMat {
    let data: Vec<Complex64> = (0..rows * cols)
        .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
        .collect();
    CMat::from_rows(rows, cols, data).unwrap()
}

pub fn frob_norm(m: &CMat) -> f64 {
    let mut acc = 0.0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            acc += m.at(i, j).norm_sqr();
        }
    }
    acc.sqrt()
}

fn matmul(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.cols, b.rows);
    let mut out = CMat::zeros(a.rows, b.cols);
    for i in 0..a.rows {
        for k in 0..a.cols {
            let aik = a.at(i, k);
            for j in 0..b.cols {
                out.set(i, j, out.at(i, j) + aik * b.at(k, j));
            }
        }
    }
    out
}

fn max_abs_diff(a: &CMat, b: &CMat) -> f64 {
    let mut worst: f64 = 0.0;
    for i in 0..a.rows {
        for j in 0..a.cols {
            worst = worst.max((a.at(i, j) - b.at(i, j)).norm());
        }
    }
    worst
}

fn unitarity_defect(m: &CMat) -> f64 {
    let gram = matmul(&m.adjoint(), m);
    max_abs_diff(&gram, &CMat::identity(m.cols))
}

/// Structural SVD checks: reconstruction, unitarity of both factors, and
/// descending non-negative singular values.
pub fn assert_svd_valid(m: &CMat, svd: &SvdResult, tol: f64) {
    let scale = frob_norm(m).max(1.0);
    let rec = svd.reconstruct();
    assert!(
        max_abs_diff(&rec, m) / scale <= tol,
        "reconstruction defect {} above {tol}",
        max_abs_diff(&rec, m) / scale
    );
    assert!(unitarity_defect(&svd.u) <= tol, "U unitarity defect {}", unitarity_defect(&svd.u));
    assert!(unitarity_defect(&svd.v) <= tol, "V unitarity defect {}", unitarity_defect(&svd.v));
    for (k, w) in svd.s.windows(2).enumerate() {
        assert!(w[0] >= w[1] - 1e-15, "singular values not descending at {k}: {:?}", svd.s);
    }
    assert!(svd.s.iter().all(|&s| s >= 0.0), "negative singular value in {:?}", svd.s);
}

/// Monic characteristic polynomial coefficients of a square matrix via
/// Faddeev–LeVerrier: p(x) = x^n + c[n-1] x^(n-1) + ... + c[0].
pub fn charpoly(a: &CMat) -> Vec<Complex64> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
    let mut m = CMat::zeros(n, n); // M_0 = 0
    let mut c_prev = Complex64::new(1.0, 0.0); // c_n = 1
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut am = matmul(a, &m);
        for i in 0..n {
            am.set(i, i, am.at(i, i) + c_prev);
        }
        m = am;
        // c_{n-k} = -tr(A M_k) / k
        let prod = matmul(a, &m);
        let mut trace = Complex64::new(0.0, 0.0);
        for i in 0..n {
            trace += prod.at(i, i);
        }
        c_prev = -trace / k as f64;
        coeffs[n - k] = c_prev;
    }
    coeffs
}

fn poly_eval(coeffs: &[Complex64], x: Complex64) -> (Complex64, Complex64) {
    // Horner for p(x) and p'(x); leading coefficient is 1.
    let mut p = Complex64::new(1.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for &c in coeffs.iter().rev() {
        dp = dp * x + p;
        p = p * x + c;
    }
    (p, dp)
}

/// Independent oracle: every claimed singular value squared must be a root
/// of charpoly(M M^H), verified by a tiny Newton correction; the set must
/// also satisfy the Frobenius (sum) and determinant (product) identities.
pub fn assert_singular_values_against_oracle(m: &CMat, s: &[f64], tol: f64) {
    let gram = if m.rows <= m.cols {
        matmul(m, &m.adjoint())
    } else {
        matmul(&m.adjoint(), m)
    };
    let coeffs = charpoly(&gram);
    let scale = s.iter().map(|x| x * x).fold(1e-300, f64::max);
    for &sv in s {
        let x = Complex64::new(sv * sv, 0.0);
        let (p, dp) = poly_eval(&coeffs, x);
        let correction = if dp.norm() > 0.0 { (p / dp).norm() } else { p.norm() };
        assert!(
            correction <= tol * scale,
            "sigma^2 = {} is not a charpoly root (Newton step {correction:e})",
            sv * sv
        );
    }
    // Sum of sigma^2 equals ||M||_F^2.
    let sum: f64 = s.iter().map(|x| x * x).sum();
    let f2 = frob_norm(m).powi(2);
    assert!((sum - f2).abs() <= 1e-10 * f2.max(1.0), "sum sigma^2 {sum} vs ||M||_F^2 {f2}");
    // Product of sigma^2 equals det(gram) = (-1)^n c_0.
    let det = coeffs[0] * if gram.rows % 2 == 1 { -1.0 } else { 1.0 };
    let prod: f64 = s.iter().map(|x| x * x).product();
    assert!(
        (prod - det.re).abs() <= 1e-8 * prod.max(det.re).max(1e-30) && det.im.abs() < 1e-8,
        "product sigma^2 {prod} vs det {det}"
    );
}
