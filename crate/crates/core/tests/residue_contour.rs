//! Residues at infinity against trapezoidal quadrature on a large circle.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spincm_core::residue::{resolvent_residue_pair, resolvent_residue_single};

const NODES: usize = 128;

fn random_matrix(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0))
}

fn complexify(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn resolvent(z: Complex64, a: &DMatrix<f64>) -> DMatrix<Complex64> {
    let n = a.nrows();
    (DMatrix::identity(n, n) * z - complexify(a)).try_inverse().expect("z off the spectrum")
}

/// `(1 / 2 pi i) \oint f(z) dz` on `|z| = r` counterclockwise, which is the
/// residue at infinity with `res z^{-1} = 1`.
fn contour<F: Fn(Complex64) -> DMatrix<Complex64>>(r: f64, f: F) -> DMatrix<Complex64> {
    let mut acc: Option<DMatrix<Complex64>> = None;
    for k in 0..NODES {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / NODES as f64;
        let z = Complex64::from_polar(r, theta);
        let term = f(z) * z;
        acc = Some(match acc {
            Some(a) => a + term,
            None => term,
        });
    }
    acc.unwrap() / Complex64::new(NODES as f64, 0.0)
}

fn radius(ms: &[&DMatrix<f64>]) -> f64 {
    2.0 * ms.iter().map(|m| m.norm()).fold(1.0, f64::max)
}

#[test]
fn single_resolvent_cubic_residue_is_the_cube() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let a = random_matrix(&mut rng, 3);
    let quad = contour(radius(&[&a]), |z| resolvent(z, &a) * z.powu(3));
    let exact = resolvent_residue_single(3, &a);
    assert!((&a * &a * &a - &exact).amax() < 1e-14);
    let diff = (quad - complexify(&exact)).map(|c| c.norm()).max();
    assert!(diff < 1e-12, "quadrature mismatch {diff}");
}

#[test]
fn single_resolvent_all_low_orders() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in 1..=4 {
        let a = random_matrix(&mut rng, n);
        for m in 0..=5 {
            let quad = contour(radius(&[&a]), |z| resolvent(z, &a) * z.powu(m as u32));
            let diff = (quad - complexify(&resolvent_residue_single(m, &a))).map(|c| c.norm()).max();
            assert!(diff < 1e-11, "n={n} m={m}: {diff}");
        }
    }
}

#[test]
fn pair_residue_matches_quadrature() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in [2, 3] {
        let (x, a, y, b) = (
            random_matrix(&mut rng, n),
            random_matrix(&mut rng, n),
            random_matrix(&mut rng, n),
            random_matrix(&mut rng, n),
        );
        for m in 0..=4 {
            let quad = contour(radius(&[&a, &b]), |z| {
                let inner = complexify(&x) * resolvent(z, &a) * complexify(&y) * resolvent(z, &b);
                DMatrix::from_element(1, 1, inner.trace() * z.powu(m as u32))
            });
            let exact = resolvent_residue_pair(m, &x, &a, &y, &b).unwrap();
            assert!((quad[(0, 0)].re - exact).abs() < 1e-11, "n={n} m={m}");
            assert!(quad[(0, 0)].im.abs() < 1e-11);
        }
    }
}

#[test]
fn pair_residue_m2_closed_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (x, a, y, b) = (
        random_matrix(&mut rng, 2),
        random_matrix(&mut rng, 2),
        random_matrix(&mut rng, 2),
        random_matrix(&mut rng, 2),
    );
    let expected = (&x * &a * &y).trace() + (&x * &y * &b).trace();
    assert!((resolvent_residue_pair(2, &x, &a, &y, &b).unwrap() - expected).abs() < 1e-14);
}
