//! Higher Hamiltonians of the hierarchy, their gradients, the equations of
//! motion of the flows `t_m`, and a fixed-step integrator.
//!
//! The Hamiltonian of the `t_m` flow is
//! `H_m = tr((L + gamma I)^{m+1} - (L - gamma I)^{m+1}) / (2 (m + 1) gamma)`,
//! with canonical brackets `{x_i, p_k} = delta_ik` and
//! `{a_i^alpha, b_k^beta} = delta_ik delta_alpha beta`. Spin flows are taken
//! in the gauge where the per-site rescaling term vanishes.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{binomial, max_abs, powers};
use crate::phase::{
    exp_coords_vector, lax_matrix, overlap_matrix, SpinState, DEFAULT_SEP_MIN,
};
use crate::report::{Check, VerificationReport};
use crate::residue::resolvent_pair_kernel;
use crate::scalar::Real;

/// Default largest flow index accepted by [`FlowSpec::validate`].
pub const DEFAULT_M_MAX: usize = 8;
/// Largest `|b_i . a_i - 1|` tolerated on recorded samples.
pub const CONSTRAINT_DRIFT_TOL: f64 = 1e-6;

/// A vector in the phase space, laid out like the state: either a tangent
/// `(xdot, pdot, adot, bdot)` or a gradient `(dH/dx, dH/dp, dH/da, dH/db)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseVector<T: Real> {
    pub x: DVector<T>,
    pub p: DVector<T>,
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
}

impl<T: Real> PhaseVector<T> {
    pub fn zeros(n_particles: usize, n_colors: usize) -> Self {
        Self {
            x: DVector::zeros(n_particles),
            p: DVector::zeros(n_particles),
            a: DMatrix::zeros(n_particles, n_colors),
            b: DMatrix::zeros(n_particles, n_colors),
        }
    }

    /// Largest absolute component.
    pub fn max_abs(&self) -> T {
        [
            max_abs(self.x.iter()),
            max_abs(self.p.iter()),
            max_abs(self.a.iter()),
            max_abs(self.b.iter()),
        ]
        .into_iter()
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc })
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            x: &self.x - &other.x,
            p: &self.p - &other.p,
            a: &self.a - &other.a,
            b: &self.b - &other.b,
        }
    }

    fn add_scaled(&mut self, other: &Self, s: T) {
        self.x.axpy(s, &other.x, T::one());
        self.p.axpy(s, &other.p, T::one());
        self.a += &other.a * s;
        self.b += &other.b * s;
    }

    /// `d/dt (b_i . a_i)` along this tangent at `state`.
    pub fn constraint_rate(&self, state: &SpinState<T>) -> DVector<T> {
        DVector::from_iterator(
            state.n_particles(),
            (0..state.n_particles())
                .map(|i| state.b().row(i).dot(&self.a.row(i)) + state.a().row(i).dot(&self.b.row(i))),
        )
    }
}

/// Displacement between two states, as a phase vector.
pub fn state_difference<T: Real>(lhs: &SpinState<T>, rhs: &SpinState<T>) -> PhaseVector<T> {
    PhaseVector {
        x: lhs.x() - rhs.x(),
        p: lhs.p() - rhs.p(),
        a: lhs.a() - rhs.a(),
        b: lhs.b() - rhs.b(),
    }
}

fn displaced<T: Real>(state: &SpinState<T>, v: &PhaseVector<T>, h: T) -> SpinState<T> {
    SpinState::from_parts(
        state.gamma(),
        state.x() + &v.x * h,
        state.p() + &v.p * h,
        state.a() + &v.a * h,
        state.b() + &v.b * h,
    )
}

/// `H_k = tr L^k`.
pub fn power_trace<T: Real>(state: &SpinState<T>, k: usize) -> T {
    powers(&lax_matrix(state), k)[k].trace()
}

/// `tr L^k` for `k = 1..=k_max`.
pub fn power_traces<T: Real>(state: &SpinState<T>, k_max: usize) -> Vec<T> {
    powers(&lax_matrix(state), k_max)
        .iter()
        .skip(1)
        .map(|m| m.trace())
        .collect()
}

/// `((L + gamma)^m - (L - gamma)^m) / (2 gamma)`, expanded in odd powers of
/// gamma so the `gamma -> 0` limit does not cancel catastrophically.
pub fn hamiltonian_kernel<T: Real>(l: &DMatrix<T>, gamma: T, m: usize) -> DMatrix<T> {
    let pw = powers(l, m);
    let mut out = DMatrix::zeros(l.nrows(), l.ncols());
    let g2 = gamma * gamma;
    let mut gpow = T::one();
    for j in (1..=m).step_by(2) {
        out += &pw[m - j] * (T::lit(binomial(m, j) as f64) * gpow);
        gpow *= g2;
    }
    out
}

/// The higher Hamiltonian `H_m`.
pub fn hamiltonian<T: Real>(state: &SpinState<T>, m: usize) -> T {
    let l = lax_matrix(state);
    let pw = powers(&l, m + 1);
    let g2 = state.gamma() * state.gamma();
    let mut gpow = T::one();
    let mut acc = T::zero();
    for j in (1..=m + 1).step_by(2) {
        acc += pw[m + 1 - j].trace() * T::lit(binomial(m + 1, j) as f64) * gpow;
        gpow *= g2;
    }
    acc / T::from_usize_lossy(m + 1)
}

/// Analytic gradient of `H_m`, by the chain rule
/// `dH_m/dtheta = tr(dL/dtheta * kernel_m)`.
pub fn hamiltonian_gradient<T: Real>(state: &SpinState<T>, m: usize) -> PhaseVector<T> {
    let (n, nc) = (state.n_particles(), state.n_colors());
    let g = state.gamma();
    let l = lax_matrix(state);
    let q = hamiltonian_kernel(&l, g, m);
    let r = overlap_matrix(state);
    let x = state.x();

    // inv_sinh[(j,k)] = 1/sinh(g (x_j - x_k)); dlx[(j,k)] = dL_jk/dx_j
    let mut inv_sinh = DMatrix::zeros(n, n);
    let mut dlx = DMatrix::zeros(n, n);
    for j in 0..n {
        for k in 0..n {
            if j != k {
                let d = g * (x[j] - x[k]);
                let s = d.sinh();
                inv_sinh[(j, k)] = T::one() / s;
                dlx[(j, k)] = g * g * r[(j, k)] * d.cosh() / (s * s);
            }
        }
    }

    let mut grad = PhaseVector::zeros(n, nc);
    for i in 0..n {
        grad.p[i] = -q[(i, i)];
        let mut dx = T::zero();
        for k in 0..n {
            if k != i {
                dx += dlx[(i, k)] * q[(k, i)] - dlx[(k, i)] * q[(i, k)];
            }
        }
        grad.x[i] = dx;
        for alpha in 0..nc {
            let mut db = T::zero();
            let mut da = T::zero();
            for k in 0..n {
                if k != i {
                    db -= g * state.a()[(k, alpha)] * inv_sinh[(i, k)] * q[(k, i)];
                    da -= g * state.b()[(k, alpha)] * inv_sinh[(k, i)] * q[(i, k)];
                }
            }
            grad.b[(i, alpha)] = db;
            grad.a[(i, alpha)] = da;
        }
    }
    grad
}

/// Hamiltonian vector field of `H_m`:
/// `xdot = dH/dp, pdot = -dH/dx, adot = dH/db, bdot = -dH/da`.
pub fn flow_rhs<T: Real>(state: &SpinState<T>, m: usize) -> PhaseVector<T> {
    let grad = hamiltonian_gradient(state, m);
    PhaseVector {
        x: grad.p,
        p: -grad.x,
        a: grad.b,
        b: -grad.a,
    }
}

/// Closed-form equations of motion of the `t_2` flow (hyperbolic spin
/// Calogero-Moser), written out pair by pair without going through `L`.
pub fn eom_t2_rhs<T: Real>(state: &SpinState<T>) -> PhaseVector<T> {
    let (n, nc) = (state.n_particles(), state.n_colors());
    let g = state.gamma();
    let (x, a, b) = (state.x(), state.a(), state.b());
    let two = T::lit(2.0);
    let mut out = PhaseVector::zeros(n, nc);
    for i in 0..n {
        out.x[i] = two * state.p()[i];
        let mut force = T::zero();
        for k in 0..n {
            if k == i {
                continue;
            }
            let d = g * (x[i] - x[k]);
            let s = d.sinh();
            let s2 = s * s;
            let bi_ak = b.row(i).dot(&a.row(k));
            let bk_ai = b.row(k).dot(&a.row(i));
            // xddot_i = -8 g^3 sum cosh/sinh^3 (b_i.a_k)(b_k.a_i), pdot = xddot / 2
            force -= T::lit(4.0) * g * g * g * d.cosh() / (s2 * s) * bi_ak * bk_ai;
            for alpha in 0..nc {
                out.a[(i, alpha)] -= two * g * g * a[(k, alpha)] * bk_ai / s2;
                out.b[(i, alpha)] += two * g * g * bi_ak * b[(k, alpha)] / s2;
            }
        }
        out.p[i] = force;
    }
    out
}

/// Equations of motion of the rational spin Calogero-Moser system
/// (`gamma -> 0` limit of [`eom_t2_rhs`]) evaluated on the same phase point.
pub fn rational_eom_t2_rhs<T: Real>(state: &SpinState<T>) -> PhaseVector<T> {
    let (n, nc) = (state.n_particles(), state.n_colors());
    let (x, a, b) = (state.x(), state.a(), state.b());
    let two = T::lit(2.0);
    let mut out = PhaseVector::zeros(n, nc);
    for i in 0..n {
        out.x[i] = two * state.p()[i];
        for k in 0..n {
            if k == i {
                continue;
            }
            let d = x[i] - x[k];
            let d2 = d * d;
            let bi_ak = b.row(i).dot(&a.row(k));
            let bk_ai = b.row(k).dot(&a.row(i));
            out.p[i] -= T::lit(4.0) / (d2 * d) * bi_ak * bk_ai;
            for alpha in 0..nc {
                out.a[(i, alpha)] -= two * a[(k, alpha)] * bk_ai / d2;
                out.b[(i, alpha)] += two * bi_ak * b[(k, alpha)] / d2;
            }
        }
    }
    out
}

/// Velocity of pole `i` along `t_m`, from the residue formula
/// `dx_i/dt_m = -res z^m tr(W^{1/2} R W^{1/2} (z - L + gamma)^{-1} W^{-1} E_i (z - L - gamma)^{-1})`.
///
/// Independent of [`hamiltonian_gradient`]; the two agree exactly when every
/// `b_i . a_i = 1`.
pub fn pole_velocity_residue<T: Real>(state: &SpinState<T>, m: usize, i: usize) -> T {
    let n = state.n_particles();
    assert!(i < n, "particle index {i} out of range");
    let g = state.gamma();
    let l = lax_matrix(state);
    let id = DMatrix::<T>::identity(n, n);
    let w = exp_coords_vector(state);
    let sqrt_w = DMatrix::from_diagonal(&w.map(|v| v.sqrt()));
    let x_mat = &sqrt_w * overlap_matrix(state) * &sqrt_w;
    let mut y_mat = DMatrix::zeros(n, n);
    y_mat[(i, i)] = T::one() / w[i];
    let lower = &l - &id * g;
    let upper = &l + &id * g;
    -(x_mat * resolvent_pair_kernel(m, &lower, &y_mat, &upper)).trace()
}

/// Which flow to run and how.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowSpec<T: Real> {
    pub m: usize,
    pub t_end: T,
    pub dt: T,
    pub record_every: usize,
}

impl<T: Real> FlowSpec<T> {
    pub fn new(m: usize, t_end: T, dt: T) -> Self {
        Self {
            m,
            t_end,
            dt,
            record_every: 1,
        }
    }

    pub fn with_record_every(mut self, k: usize) -> Self {
        self.record_every = k;
        self
    }

    pub fn validate(&self, m_max: usize) -> Result<()> {
        if self.m == 0 || self.m > m_max {
            return Err(Error::InvalidParameter(format!("flow index {} outside 1..={m_max}", self.m)));
        }
        if !(self.dt > T::zero()) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter("dt must be positive".into()));
        }
        if !(self.t_end >= self.dt) || !self.t_end.is_finite() {
            return Err(Error::InvalidParameter("t_end must be at least dt".into()));
        }
        if self.record_every == 0 {
            return Err(Error::InvalidParameter("record_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of RK4 steps; the step is `t_end / steps <= dt`.
    pub fn steps(&self) -> usize {
        step_count(self.t_end, self.dt)
    }
}

fn step_count<T: Real>(duration: T, dt: T) -> usize {
    let ratio = (duration / dt).abs().as_f64();
    (ratio - 1e-9).ceil().max(1.0) as usize
}

/// Sampled path of a flow.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory<T: Real> {
    pub samples: Vec<(T, SpinState<T>)>,
    pub flow: FlowSpec<T>,
}

impl<T: Real> Trajectory<T> {
    pub fn last(&self) -> &SpinState<T> {
        &self.samples.last().expect("trajectory is never empty").1
    }
}

// Poles cannot pass through each other along a regular flow, so a change in
// their ordering means a step jumped over a collision.
fn check_stage<T: Real>(start: &SpinState<T>, stage: &SpinState<T>) -> Result<()> {
    stage.check_separation(T::lit(DEFAULT_SEP_MIN))?;
    let (x0, x1) = (start.x(), stage.x());
    for i in 0..x0.len() {
        for j in i + 1..x0.len() {
            if (x0[i] - x0[j]) * (x1[i] - x1[j]) <= T::zero() {
                return Err(Error::SingularConfiguration {
                    i,
                    j,
                    separation: 0.0,
                });
            }
        }
    }
    Ok(())
}

/// One classical RK4 step of the `t_m` flow. Stage states are checked
/// against the minimum separation and for poles crossing.
pub fn rk4_step<T: Real>(state: &SpinState<T>, m: usize, h: T) -> Result<SpinState<T>> {
    let half = h / T::lit(2.0);
    let k1 = flow_rhs(state, m);
    let s2 = displaced(state, &k1, half);
    check_stage(state, &s2)?;
    let k2 = flow_rhs(&s2, m);
    let s3 = displaced(state, &k2, half);
    check_stage(state, &s3)?;
    let k3 = flow_rhs(&s3, m);
    let s4 = displaced(state, &k3, h);
    check_stage(state, &s4)?;
    let k4 = flow_rhs(&s4, m);

    let mut incr = k1;
    incr.add_scaled(&k2, T::lit(2.0));
    incr.add_scaled(&k3, T::lit(2.0));
    incr.add_scaled(&k4, T::one());
    let next = displaced(state, &incr, h / T::lit(6.0));
    check_stage(state, &next)?;
    Ok(next)
}

/// Runs the `t_m` flow for a signed `duration` with steps no longer than `dt`.
pub fn evolve<T: Real>(state: &SpinState<T>, m: usize, duration: T, dt: T) -> Result<SpinState<T>> {
    if !(dt > T::zero()) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    if duration == T::zero() {
        return Ok(state.clone());
    }
    let n = step_count(duration, dt);
    let h = duration / T::from_usize_lossy(n);
    let mut s = state.clone();
    for _ in 0..n {
        s = rk4_step(&s, m, h)?;
    }
    Ok(s)
}

/// Integrates with fixed-step RK4, recording every `record_every` steps and
/// the final point. Recorded samples are re-validated.
pub fn integrate<T: Real>(state: &SpinState<T>, spec: &FlowSpec<T>) -> Result<Trajectory<T>> {
    spec.validate(DEFAULT_M_MAX.max(spec.m.min(64)))?;
    let n = spec.steps();
    let h = spec.t_end / T::from_usize_lossy(n);
    let drift_tol = T::lit(CONSTRAINT_DRIFT_TOL);
    let mut samples = Vec::with_capacity(n / spec.record_every + 2);
    samples.push((T::zero(), state.clone()));
    let mut s = state.clone();
    for step in 1..=n {
        s = rk4_step(&s, spec.m, h)?;
        if step % spec.record_every == 0 || step == n {
            let t = h * T::from_usize_lossy(step);
            for (i, d) in s.constraint_defects().iter().enumerate() {
                if d.abs() > drift_tol || !d.is_finite() {
                    return Err(Error::ConstraintDrift {
                        i,
                        t: t.as_f64(),
                        drift: d.abs().as_f64(),
                    });
                }
            }
            samples.push((t, s.clone()));
        }
    }
    Ok(Trajectory {
        samples,
        flow: *spec,
    })
}

/// Quantities conserved by every flow, in a fixed order: `tr L^k` for
/// `k = 1..=k_max`, then every `b_i . a_i`, then every `S_{alpha beta}`.
pub fn conserved_quantities<T: Real>(state: &SpinState<T>, k_max: usize) -> Vec<(String, T)> {
    let mut out = Vec::new();
    for (k, h) in power_traces(state, k_max).into_iter().enumerate() {
        out.push((format!("H_{}", k + 1), h));
    }
    for (i, d) in state.constraint_defects().iter().enumerate() {
        out.push((format!("b_{0}.a_{0}", i + 1), *d + T::one()));
    }
    let s = state.spin_moment();
    for alpha in 0..s.nrows() {
        for beta in 0..s.ncols() {
            out.push((format!("S_{}{}", alpha + 1, beta + 1), s[(alpha, beta)]));
        }
    }
    out
}

/// Largest drift of each conserved quantity over the trajectory, relative to
/// its initial value with a unit floor: `|q(t) - q(0)| / max(1, |q(0)|)`.
pub fn conservation_report<T: Real>(traj: &Trajectory<T>, k_max: usize, tolerance: f64) -> VerificationReport {
    let mut report = VerificationReport::new();
    let Some((_, first)) = traj.samples.first() else {
        report.push(Check::failed("non-empty trajectory", tolerance));
        return report;
    };
    let reference = conserved_quantities(first, k_max);
    let mut worst = vec![0.0f64; reference.len()];
    for (_, s) in &traj.samples {
        for (slot, ((_, q0), (_, q))) in worst
            .iter_mut()
            .zip(reference.iter().zip(conserved_quantities(s, k_max)))
        {
            let q0 = q0.as_f64();
            let drift = (q.as_f64() - q0).abs() / q0.abs().max(1.0);
            if !(drift <= *slot) {
                *slot = drift;
            }
        }
    }
    for ((name, _), drift) in reference.into_iter().zip(worst) {
        report.push(Check::new(format!("drift {name}"), drift, tolerance));
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_state, RandomStateConfig};

    fn dv(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    #[test]
    fn first_hamiltonian_is_minus_total_momentum() {
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2), 1).unwrap();
        let total: f64 = s.p().iter().sum();
        assert!((power_trace(&s, 1) + total).abs() < 1e-14);
        assert!((hamiltonian(&s, 1) + total).abs() < 1e-14);
        let g = hamiltonian_gradient(&s, 1);
        assert!(g.p.iter().all(|v| (*v + 1.0).abs() < 1e-15));
        assert_eq!(g.x.amax(), 0.0);
        assert_eq!(g.a.amax(), 0.0);
        assert_eq!(g.b.amax(), 0.0);
    }

    #[test]
    fn second_hamiltonian_shift() {
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2).with_gamma(0.8), 2).unwrap();
        let shift = 3.0 * 0.8 * 0.8 / 3.0;
        assert!((hamiltonian(&s, 2) - power_trace(&s, 2) - shift).abs() < 1e-12);
    }

    #[test]
    fn two_particle_h2_closed_form() {
        let a = DMatrix::from_row_slice(2, 2, &[0.8, 0.6, 0.3, 1.1]);
        let mut b = DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.4, 0.9]);
        for i in 0..2 {
            let d = b.row(i).dot(&a.row(i));
            b.row_mut(i).unscale_mut(d);
        }
        let g = 0.7;
        let s = SpinState::new(g, dv(&[-0.4, 0.9]), dv(&[0.3, -1.2]), a.clone(), b.clone()).unwrap();
        let r12 = b.row(0).dot(&a.row(1));
        let r21 = b.row(1).dot(&a.row(0));
        let sh = (g * (-0.4f64 - 0.9)).sinh();
        let expected = 0.3f64.powi(2) + 1.2f64.powi(2) - g * g * 2.0 * r12 * r21 / (sh * sh);
        assert!((power_trace(&s, 2) - expected).abs() < 1e-12);
    }

    #[test]
    fn free_particle_dynamics() {
        let s = SpinState::new(
            1.0,
            dv(&[0.2]),
            dv(&[0.7]),
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
            DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
        )
        .unwrap();
        let rhs = eom_t2_rhs(&s);
        assert_eq!(rhs.p[0], 0.0);
        assert_eq!(rhs.a.amax(), 0.0);
        assert_eq!(rhs.b.amax(), 0.0);
        assert!((rhs.x[0] - 1.4).abs() < 1e-15);
        // one pole, m = 2: dx/dt_2 = 2p from the residue formula
        assert!((pole_velocity_residue(&s, 2, 0) - 1.4).abs() < 1e-14);
    }

    #[test]
    fn spinless_force() {
        let one = DMatrix::from_element(2, 1, 1.0);
        let g = 0.9;
        let s = SpinState::new(g, dv(&[0.0, 1.3]), dv(&[0.0, 0.0]), one.clone(), one).unwrap();
        let rhs = eom_t2_rhs(&s);
        let d = g * (0.0 - 1.3);
        let xddot = -8.0 * g.powi(3) * d.cosh() / d.sinh().powi(3);
        assert!((2.0 * rhs.p[0] - xddot).abs() < 1e-12);
        assert!((rhs.p[0] + rhs.p[1]).abs() < 1e-12);
    }

    #[test]
    fn m1_flow_rhs_is_uniform_drift() {
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(4, 3), 5).unwrap();
        let v = flow_rhs(&s, 1);
        assert!(v.x.iter().all(|x| (*x + 1.0).abs() < 1e-15));
        assert_eq!(v.p.amax(), 0.0);
        assert_eq!(v.a.amax(), 0.0);
        assert_eq!(v.b.amax(), 0.0);
        for i in 0..4 {
            assert!((pole_velocity_residue(&s, 1, i) + 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn m2_gradient_matches_hand_coded_h2_gradient() {
        // gradient of sum p^2 - g^2 sum_{i != k} R_ik R_ki / sinh^2, written directly
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2).with_gamma(1.3), 8).unwrap();
        let g = s.gamma();
        let (x, a, b) = (s.x(), s.a(), s.b());
        let n = 3;
        let grad = hamiltonian_gradient(&s, 2);
        for i in 0..n {
            assert!((grad.p[i] - 2.0 * s.p()[i]).abs() < 1e-12);
            let mut dx = 0.0;
            for k in 0..n {
                if k == i {
                    continue;
                }
                let d = g * (x[i] - x[k]);
                let rr = b.row(i).dot(&a.row(k)) * b.row(k).dot(&a.row(i));
                dx += 4.0 * g.powi(3) * rr * d.cosh() / d.sinh().powi(3);
            }
            assert!((grad.x[i] - dx).abs() < 1e-12 * (1.0 + dx.abs()));
            for alpha in 0..2 {
                let mut db = 0.0;
                let mut da = 0.0;
                for k in 0..n {
                    if k == i {
                        continue;
                    }
                    let s2 = (g * (x[i] - x[k])).sinh().powi(2);
                    db -= 2.0 * g * g * a[(k, alpha)] * b.row(k).dot(&a.row(i)) / s2;
                    da -= 2.0 * g * g * b[(k, alpha)] * b.row(i).dot(&a.row(k)) / s2;
                }
                assert!((grad.b[(i, alpha)] - db).abs() < 1e-12 * (1.0 + db.abs()));
                assert!((grad.a[(i, alpha)] - da).abs() < 1e-12 * (1.0 + da.abs()));
            }
        }
    }

    #[test]
    fn flow_preserves_constraint_at_rhs_level() {
        let cfg = RandomStateConfig::new(4, 3);
        for seed in 0..10 {
            let s: SpinState<f64> = random_state(&cfg, seed).unwrap();
            for m in 1..=5 {
                let v = flow_rhs(&s, m);
                let rate = v.constraint_rate(&s);
                let scale = 1.0 + v.max_abs();
                assert!(rate.amax() <= 1e-12 * scale, "seed {seed} m {m}: {}", rate.amax());
            }
        }
    }

    #[test]
    fn flow_spec_validation() {
        assert!(FlowSpec::new(0, 1.0, 0.1).validate(8).is_err());
        assert!(FlowSpec::new(9, 1.0, 0.1).validate(8).is_err());
        assert!(FlowSpec::new(2, 0.01, 0.1).validate(8).is_err());
        assert!(FlowSpec::new(2, 1.0, -0.1).validate(8).is_err());
        assert!(FlowSpec::new(2, 1.0, 0.1).with_record_every(0).validate(8).is_err());
        assert!(FlowSpec::new(2, 1.0, 0.1).validate(8).is_ok());
        assert_eq!(FlowSpec::new(2, 1.0, 0.1).steps(), 10);
        assert_eq!(FlowSpec::new(2, 1.0, 0.3).steps(), 4);
    }

    #[test]
    fn m1_integration_is_exact_translation() {
        let s: SpinState<f64> = random_state(&RandomStateConfig::new(3, 2), 3).unwrap();
        let traj = integrate(&s, &FlowSpec::new(1, 0.75, 0.05)).unwrap();
        let end = traj.last();
        for i in 0..3 {
            assert!((end.x()[i] - (s.x()[i] - 0.75)).abs() < 1e-12);
        }
        assert!((end.p() - s.p()).amax() < 1e-15);
        assert!((end.a() - s.a()).amax() < 1e-15);
        assert!((end.b() - s.b()).amax() < 1e-15);
        assert_eq!(traj.samples.len(), 16);
    }

    #[test]
    fn collision_is_reported() {
        // two spinless poles with strong inward momenta
        let one = DMatrix::from_element(2, 1, 1.0);
        let s = SpinState::new(1.0, dv(&[0.0, 0.4]), dv(&[3.0, -3.0]), one.clone(), one).unwrap();
        let err = evolve(&s, 2, 1.0, 1e-2).unwrap_err();
        assert!(matches!(err, Error::SingularConfiguration { .. }), "{err:?}");
    }

    #[test]
    fn single_particle_run_conserves_everything_exactly() {
        let s = SpinState::new(
            0.5,
            dv(&[0.1]),
            dv(&[0.4]),
            DMatrix::from_row_slice(1, 2, &[0.5, 1.5]),
            DMatrix::from_row_slice(1, 2, &[0.5, 0.5]),
        )
        .unwrap();
        let traj = integrate(&s, &FlowSpec::new(3, 1.0, 0.01).with_record_every(10)).unwrap();
        let report = conservation_report(&traj, 4, 1e-15);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn f32_instantiation_runs() {
        let s: SpinState<f32> = random_state(&RandomStateConfig::new(3, 2), 4).unwrap();
        let v = flow_rhs(&s, 2);
        let e = eom_t2_rhs(&s);
        assert!(v.sub(&e).max_abs() < 1e-3 * (1.0 + e.max_abs()));
    }
}
