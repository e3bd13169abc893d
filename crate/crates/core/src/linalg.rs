//! Small dense-matrix helpers shared by the modules.

use nalgebra::{Complex, DMatrix};

use crate::scalar::Real;

/// Induced infinity norm (maximum absolute row sum).
pub fn inf_norm<T: Real>(m: &DMatrix<T>) -> T {
    m.row_iter()
        .map(|row| row.iter().fold(T::zero(), |acc, v| acc + v.abs()))
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
}

/// Largest absolute entry.
pub fn max_abs<'a, T: Real, I: IntoIterator<Item = &'a T>>(values: I) -> T {
    values
        .into_iter()
        .fold(T::zero(), |acc, v| if v.abs() > acc { v.abs() } else { acc })
}

pub fn commutator<T: Real>(a: &DMatrix<T>, b: &DMatrix<T>) -> DMatrix<T> {
    a * b - b * a
}

/// `[I, A, A^2, ..., A^n]`.
pub fn powers<T: Real>(a: &DMatrix<T>, n: usize) -> Vec<DMatrix<T>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(DMatrix::identity(a.nrows(), a.ncols()));
    for k in 1..=n {
        let next = &out[k - 1] * a;
        out.push(next);
    }
    out
}

pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, j| acc * (n - j) as u128 / (j + 1) as u128)
}

/// Eigenvalues of a general real matrix.
pub fn eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    m.clone().complex_eigenvalues().iter().copied().collect()
}

/// Eigenvalues ordered by real part, then imaginary part.
pub fn sorted_eigenvalues<T: Real>(m: &DMatrix<T>) -> Vec<Complex<T>> {
    let mut ev = eigenvalues(m);
    ev.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    ev
}

fn modulus<T: Real>(c: Complex<T>) -> T {
    c.re.hypot(c.im)
}

/// Distance between two spectra: greedy nearest matching, maximum modulus of
/// the matched differences. Robust to the ordering ambiguity of near-equal
/// real parts.
pub fn spectral_distance<T: Real>(a: &[Complex<T>], b: &[Complex<T>]) -> T {
    if a.len() != b.len() {
        return T::max_value().unwrap_or_else(T::one);
    }
    let mut used = vec![false; b.len()];
    let mut worst = T::zero();
    for ea in a {
        let mut best: Option<(usize, T)> = None;
        for (j, eb) in b.iter().enumerate() {
            if used[j] {
                continue;
            }
            let d = modulus(*ea - *eb);
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, d)) = best {
            used[j] = true;
            if d > worst {
                worst = d;
            }
        }
    }
    worst
}

/// Smallest modulus `|z - lambda|` over the spectrum of `m`.
pub fn spectral_clearance<T: Real>(m: &DMatrix<T>, z: T) -> T {
    eigenvalues(m)
        .into_iter()
        .map(|ev| modulus(ev - Complex::new(z, T::zero())))
        .fold(T::max_value().unwrap_or_else(T::one), |acc, d| if d < acc { d } else { acc })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inf_norm_is_max_row_sum() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, -2.0, 0.5, 0.25]);
        assert_eq!(inf_norm(&m), 3.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(5, 2), 10);
        assert_eq!(binomial(9, 0), 1);
        assert_eq!(binomial(3, 4), 0);
        assert_eq!(binomial(20, 10), 184756);
    }

    #[test]
    fn spectral_distance_ignores_order() {
        let a = vec![Complex::new(1.0, 0.0), Complex::new(-2.0, 0.5)];
        let b = vec![Complex::new(-2.0, 0.5), Complex::new(1.0, 1e-12)];
        assert!(spectral_distance(&a, &b) < 1e-11);
    }

    #[test]
    fn eigenvalues_of_rotation_generator() {
        let m = DMatrix::from_row_slice(2, 2, &[0.0f64, -1.0, 1.0, 0.0]);
        let ev = sorted_eigenvalues(&m);
        assert!((ev[0].im + 1.0).abs() < 1e-12);
        assert!((ev[1].im - 1.0).abs() < 1e-12);
    }
}
