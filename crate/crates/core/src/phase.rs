//! Phase space of the spin Calogero-Moser (Gibbons-Hermsen) system and the
//! matrices built from it.
//!
//! A state carries `n` poles `x_i` with momenta `p_i` and, per pole, a pair of
//! `N`-component spin vectors `a_i`, `b_i` (rows of the `a`/`b` matrices)
//! subject to `b_i . a_i = 1`. Exponentiated coordinates are `w_i = exp(2 gamma x_i)`.
//!
//! Every matrix here has two closed forms, one in hyperbolic functions of
//! `gamma (x_j - x_k)` and one rational in the `w_i`. The hyperbolic form is
//! the production path (it never overflows before the state does); the
//! exponential form is kept as an independent cross-check.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{commutator, inf_norm};
use crate::scalar::Real;

/// Minimum pole separation accepted by default.
pub const DEFAULT_SEP_MIN: f64 = 1e-6;
/// Tolerance on `|b_i . a_i - 1|` accepted by default.
pub const DEFAULT_CONSTRAINT_TOL: f64 = 1e-10;

/// Acceptance thresholds applied when building a [`SpinState`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Validation {
    pub sep_min: f64,
    /// `None` skips the `b_i . a_i = 1` check (negative controls, tampered inputs).
    pub constraint_tol: Option<f64>,
}

impl Default for Validation {
    fn default() -> Self {
        Self {
            sep_min: DEFAULT_SEP_MIN,
            constraint_tol: Some(DEFAULT_CONSTRAINT_TOL),
        }
    }
}

impl Validation {
    pub fn unconstrained() -> Self {
        Self {
            constraint_tol: None,
            ..Self::default()
        }
    }
}

/// A point of the continuous phase space.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinState<T: Real> {
    gamma: T,
    x: DVector<T>,
    p: DVector<T>,
    a: DMatrix<T>,
    b: DMatrix<T>,
}

impl<T: Real> SpinState<T> {
    /// Builds a state and checks it with [`Validation::default`].
    pub fn new(gamma: T, x: DVector<T>, p: DVector<T>, a: DMatrix<T>, b: DMatrix<T>) -> Result<Self> {
        Self::with_validation(gamma, x, p, a, b, &Validation::default())
    }

    /// Builds a state without enforcing `b_i . a_i = 1`; every other invariant
    /// is still checked.
    pub fn new_unconstrained(
        gamma: T,
        x: DVector<T>,
        p: DVector<T>,
        a: DMatrix<T>,
        b: DMatrix<T>,
    ) -> Result<Self> {
        Self::with_validation(gamma, x, p, a, b, &Validation::unconstrained())
    }

    pub fn with_validation(
        gamma: T,
        x: DVector<T>,
        p: DVector<T>,
        a: DMatrix<T>,
        b: DMatrix<T>,
        validation: &Validation,
    ) -> Result<Self> {
        let state = Self { gamma, x, p, a, b };
        state.check_shape()?;
        state.check_finite()?;
        state.check_separation(T::lit(validation.sep_min))?;
        state.check_range()?;
        if let Some(tol) = validation.constraint_tol {
            state.check_constraint(T::lit(tol))?;
        }
        Ok(state)
    }

    /// Trusted constructor for states produced by the integrators; callers
    /// re-check whatever invariant they need.
    pub(crate) fn from_parts(gamma: T, x: DVector<T>, p: DVector<T>, a: DMatrix<T>, b: DMatrix<T>) -> Self {
        Self { gamma, x, p, a, b }
    }

    fn check_shape(&self) -> Result<()> {
        let n = self.x.len();
        if n == 0 {
            return Err(Error::Dimension("at least one particle is required".into()));
        }
        if self.p.len() != n {
            return Err(Error::Dimension(format!("p has length {}, expected {n}", self.p.len())));
        }
        if self.a.ncols() == 0 {
            return Err(Error::Dimension("at least one color is required".into()));
        }
        if self.a.shape() != (n, self.a.ncols()) || self.b.shape() != self.a.shape() {
            return Err(Error::Dimension(format!(
                "a is {:?} and b is {:?}, expected both {n} x N",
                self.a.shape(),
                self.b.shape()
            )));
        }
        if self.gamma == T::zero() {
            return Err(Error::InvalidParameter("gamma must be nonzero".into()));
        }
        Ok(())
    }

    fn check_finite(&self) -> Result<()> {
        let finite = |v: &T| v.is_finite();
        if !self.gamma.is_finite() {
            return Err(Error::NonFinite("gamma"));
        }
        if !self.x.iter().all(finite) {
            return Err(Error::NonFinite("x"));
        }
        if !self.p.iter().all(finite) {
            return Err(Error::NonFinite("p"));
        }
        if !self.a.iter().all(finite) {
            return Err(Error::NonFinite("a"));
        }
        if !self.b.iter().all(finite) {
            return Err(Error::NonFinite("b"));
        }
        Ok(())
    }

    pub(crate) fn check_separation(&self, sep_min: T) -> Result<()> {
        check_separation(&self.x, sep_min)
    }

    fn check_range(&self) -> Result<()> {
        let limit = T::max_value().map(|m| m.ln()).unwrap_or_else(|| T::lit(700.0));
        for (i, xi) in self.x.iter().enumerate() {
            let e = (T::lit(2.0) * self.gamma * *xi).abs();
            if e > limit {
                return Err(Error::Overflow { i, exponent: e.as_f64() });
            }
        }
        Ok(())
    }

    pub(crate) fn check_constraint(&self, tol: T) -> Result<()> {
        for (i, d) in self.constraint_defects().iter().enumerate() {
            if d.abs() > tol {
                return Err(Error::ConstraintViolation {
                    i,
                    value: (*d + T::one()).as_f64(),
                });
            }
        }
        Ok(())
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn n_particles(&self) -> usize {
        self.x.len()
    }

    pub fn n_colors(&self) -> usize {
        self.a.ncols()
    }

    pub fn x(&self) -> &DVector<T> {
        &self.x
    }

    pub fn p(&self) -> &DVector<T> {
        &self.p
    }

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    /// `b_i . a_i - 1` per particle.
    pub fn constraint_defects(&self) -> DVector<T> {
        DVector::from_iterator(
            self.n_particles(),
            (0..self.n_particles()).map(|i| self.b.row(i).dot(&self.a.row(i)) - T::one()),
        )
    }

    pub fn min_separation(&self) -> T {
        min_separation(&self.x)
    }

    /// Spin bilinear sum `S_{alpha beta} = sum_i a_i^alpha b_i^beta`.
    pub fn spin_moment(&self) -> DMatrix<T> {
        self.a.transpose() * &self.b
    }

    /// Copy of the state with new momenta.
    pub fn with_momenta(&self, p: DVector<T>) -> Result<Self> {
        Self::with_validation(
            self.gamma,
            self.x.clone(),
            p,
            self.a.clone(),
            self.b.clone(),
            &Validation::unconstrained(),
        )
    }

    pub fn into_parts(self) -> (T, DVector<T>, DVector<T>, DMatrix<T>, DMatrix<T>) {
        (self.gamma, self.x, self.p, self.a, self.b)
    }
}

pub(crate) fn min_separation<T: Real>(x: &DVector<T>) -> T {
    let mut best = T::max_value().unwrap_or_else(T::one);
    for i in 0..x.len() {
        for k in (i + 1)..x.len() {
            let d = (x[i] - x[k]).abs();
            if d < best {
                best = d;
            }
        }
    }
    best
}

pub(crate) fn check_separation<T: Real>(x: &DVector<T>, sep_min: T) -> Result<()> {
    for i in 0..x.len() {
        for k in (i + 1)..x.len() {
            let d = (x[i] - x[k]).abs();
            if !(d >= sep_min) {
                return Err(Error::SingularConfiguration {
                    i,
                    j: k,
                    separation: d.as_f64(),
                });
            }
        }
    }
    Ok(())
}

/// The Lax matrix together with its companion.
#[derive(Debug, Clone, PartialEq)]
pub struct LaxPair<T: Real> {
    pub l: DMatrix<T>,
    pub m: DMatrix<T>,
}

impl<T: Real> LaxPair<T> {
    pub fn of(state: &SpinState<T>) -> Self {
        Self {
            l: lax_matrix(state),
            m: m_matrix(state),
        }
    }
}

/// `W = diag(exp(2 gamma x_i))`.
pub fn exp_coords<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    DMatrix::from_diagonal(&exp_coords_vector(state))
}

pub(crate) fn exp_coords_vector<T: Real>(state: &SpinState<T>) -> DVector<T> {
    state.x.map(|xi| (T::lit(2.0) * state.gamma * xi).exp())
}

/// `R_ik = b_i . a_k`.
pub fn overlap_matrix<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    &state.b * state.a.transpose()
}

/// `L_jk = -p_j delta_jk - (1 - delta_jk) gamma R_jk / sinh(gamma (x_j - x_k))`.
pub fn lax_matrix<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    lax_from_parts(state.gamma, &state.x, &state.p, &state.a, &state.b)
}

/// Lax matrix from raw coordinates; `p` fills the diagonal with `-p_j`.
pub(crate) fn lax_from_parts<T: Real>(
    gamma: T,
    x: &DVector<T>,
    p: &DVector<T>,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
) -> DMatrix<T> {
    let n = x.len();
    let r = b * a.transpose();
    DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            -p[j]
        } else {
            -gamma * r[(j, k)] / (gamma * (x[j] - x[k])).sinh()
        }
    })
}

/// Same matrix in exponentiated coordinates:
/// `L_jk = -p_j delta_jk - 2 gamma sqrt(w_j w_k) R_jk / (w_j - w_k)`.
pub fn lax_matrix_exp_form<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    let w = exp_coords_vector(state);
    let r = overlap_matrix(state);
    let two = T::lit(2.0);
    let n = state.n_particles();
    DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            -state.p[j]
        } else {
            -two * state.gamma * (w[j] * w[k]).sqrt() * r[(j, k)] / (w[j] - w[k])
        }
    })
}

/// Rational (`gamma -> 0`) Lax matrix on the same phase point:
/// `L_jk = -p_j delta_jk - (1 - delta_jk) R_jk / (x_j - x_k)`.
pub fn lax_matrix_rational<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    let r = overlap_matrix(state);
    let n = state.n_particles();
    DMatrix::from_fn(n, n, |j, k| {
        if j == k {
            -state.p[j]
        } else {
            -r[(j, k)] / (state.x[j] - state.x[k])
        }
    })
}

/// Companion matrix of the `t_2` flow, gauge `Lambda_i = 0`, with
/// `xdot_i = 2 p_i`:
/// `M_ik = 2 gamma p_i delta_ik + 2 gamma^2 R_ik exp(d) / sinh(d)^2`,
/// `d = gamma (x_i - x_k)`.
pub fn m_matrix<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    let g = state.gamma;
    let two = T::lit(2.0);
    let r = overlap_matrix(state);
    let n = state.n_particles();
    DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            two * g * state.p[i]
        } else {
            let d = g * (state.x[i] - state.x[k]);
            let s = d.sinh();
            two * g * g * r[(i, k)] * d.exp() / (s * s)
        }
    })
}

/// Exponentiated-coordinate form
/// `M_ik = gamma xdot_i delta_ik + 8 gamma^2 w_i^{3/2} w_k^{1/2} R_ik / (w_i - w_k)^2`.
pub fn m_matrix_exp_form<T: Real>(state: &SpinState<T>) -> DMatrix<T> {
    let g = state.gamma;
    let w = exp_coords_vector(state);
    let r = overlap_matrix(state);
    let n = state.n_particles();
    DMatrix::from_fn(n, n, |i, k| {
        if i == k {
            g * T::lit(2.0) * state.p[i]
        } else {
            let dw = w[i] - w[k];
            T::lit(8.0) * g * g * w[i] * (w[i] * w[k]).sqrt() * r[(i, k)] / (dw * dw)
        }
    })
}

/// `|| [L, W] - 2 gamma (W^{1/2} R W^{1/2} - W) ||_inf`.
///
/// Vanishes up to round-off when every `b_i . a_i = 1`; the diagonal of the
/// bracket is `2 gamma w_i (b_i . a_i - 1)` otherwise.
pub fn commutation_identity_residual<T: Real>(state: &SpinState<T>) -> T {
    let l = lax_matrix(state);
    let w = exp_coords(state);
    let sqrt_w = w.map(|v| v.sqrt());
    let r = overlap_matrix(state);
    let rhs = (&sqrt_w * r * &sqrt_w - &w) * (T::lit(2.0) * state.gamma);
    inf_norm(&(commutator(&l, &w) - rhs))
}

/// Scale `1 + ||L|| ||W||` that makes [`commutation_identity_residual`]
/// dimensionless.
pub fn commutation_identity_scale<T: Real>(state: &SpinState<T>) -> T {
    T::one() + inf_norm(&lax_matrix(state)) * inf_norm(&exp_coords(state))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_state, RandomStateConfig};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn single(gamma: f64, x: f64, p: f64) -> SpinState<f64> {
        SpinState::new(gamma, dv(&[x]), dv(&[p]), DMatrix::from_element(1, 1, 1.0), DMatrix::from_element(1, 1, 1.0))
            .unwrap()
    }

    #[test]
    fn exp_coords_examples() {
        let s = single(1.0, 0.0, 0.0);
        assert_eq!(exp_coords(&s)[(0, 0)], 1.0);

        let a = DMatrix::from_element(2, 1, 1.0);
        let s = SpinState::new(0.5, dv(&[0.0, 4f64.ln()]), dv(&[0.0, 0.0]), a.clone(), a).unwrap();
        let w = exp_coords(&s);
        assert!((w[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((w[(1, 1)] - 4.0).abs() < 1e-14);
        assert_eq!(w[(0, 1)], 0.0);
    }

    #[test]
    fn colliding_poles_are_rejected() {
        let a = DMatrix::from_element(2, 1, 1.0);
        let err = SpinState::new(1.0, dv(&[0.0, 0.0]), dv(&[0.0, 0.0]), a.clone(), a).unwrap_err();
        assert!(matches!(err, Error::SingularConfiguration { i: 0, j: 1, .. }));
    }

    #[test]
    fn overflowing_coordinates_are_rejected() {
        let err = SpinState::new(
            1.0,
            dv(&[400.0]),
            dv(&[0.0]),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::from_element(1, 1, 1.0),
        )
        .unwrap_err();
        assert!(matches!(err, Error::Overflow { i: 0, .. }));
    }

    #[test]
    fn constraint_and_shape_errors() {
        let a = DMatrix::from_element(1, 2, 1.0);
        let err = SpinState::new(1.0, dv(&[0.0]), dv(&[0.0]), a.clone(), a.clone()).unwrap_err();
        assert!(matches!(err, Error::ConstraintViolation { i: 0, .. }));
        assert!(SpinState::new_unconstrained(1.0, dv(&[0.0]), dv(&[0.0]), a.clone(), a.clone()).is_ok());

        let err = SpinState::new(0.0, dv(&[0.0]), dv(&[0.0]), a.clone(), a.clone()).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter(_)));
        let err = SpinState::new(1.0, dv(&[0.0]), dv(&[0.0, 1.0]), a.clone(), a).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
    }

    #[test]
    fn single_particle_lax_matrix() {
        let s = single(1.0, 0.3, 0.5);
        assert_eq!(lax_matrix(&s), DMatrix::from_element(1, 1, -0.5));
        assert_eq!(m_matrix(&s), DMatrix::from_element(1, 1, 1.0));
        assert!(commutation_identity_residual(&s) < 1e-15);
    }

    #[test]
    fn overlap_matrix_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]);
        let b = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let s = SpinState::new(1.0, dv(&[0.0, 1.0]), dv(&[0.0, 0.0]), a, b).unwrap();
        assert_eq!(overlap_matrix(&s), DMatrix::from_element(2, 2, 1.0));

        let ones = DMatrix::from_element(3, 1, 1.0);
        let s = SpinState::new(0.7, dv(&[0.0, 1.0, 2.5]), dv(&[0.1, 0.2, 0.3]), ones.clone(), ones).unwrap();
        assert_eq!(overlap_matrix(&s), DMatrix::from_element(3, 3, 1.0));
    }

    #[test]
    fn lax_forms_agree_on_two_particles() {
        let cfg = RandomStateConfig::new(2, 2);
        for seed in 0..50 {
            let s: SpinState<f64> = random_state(&cfg, seed).unwrap();
            let diff = (lax_matrix(&s) - lax_matrix_exp_form(&s)).amax();
            assert!(diff <= 1e-12 * (1.0 + inf_norm(&lax_matrix(&s))), "seed {seed}: {diff}");
        }
    }

    #[test]
    fn m_forms_agree() {
        let cfg = RandomStateConfig::new(3, 2);
        for seed in 0..50 {
            let s: SpinState<f64> = random_state(&cfg, seed).unwrap();
            let m = m_matrix(&s);
            let diff = (&m - m_matrix_exp_form(&s)).amax();
            assert!(diff <= 1e-12 * (1.0 + m.amax()), "seed {seed}: {diff}");
        }
    }

    #[test]
    fn overlap_diagonal_is_one_on_valid_states() {
        let cfg = RandomStateConfig::new(4, 3);
        for seed in 0..20 {
            let s: SpinState<f64> = random_state(&cfg, seed).unwrap();
            let r = overlap_matrix(&s);
            for i in 0..4 {
                assert!((r[(i, i)] - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn commutation_identity_negative_control() {
        let cfg = RandomStateConfig::new(3, 2);
        let s: SpinState<f64> = random_state(&cfg, 7).unwrap();
        let (g, x, p, a, mut b) = s.into_parts();
        let eps = 1e-3;
        let scale = 1.0 + eps;
        for v in b.row_mut(1).iter_mut() {
            *v *= scale;
        }
        let broken = SpinState::new_unconstrained(g, x.clone(), p, a, b).unwrap();
        let w1 = (2.0 * g * x[1]).exp();
        let res = commutation_identity_residual(&broken);
        // only the diagonal entry of row 1 changes at first order
        assert!((res - 2.0 * g * w1 * eps).abs() < 1e-9 * (1.0 + w1), "{res}");
    }
}
