//! Trigonometric solutions of the matrix KP hierarchy built from a spin
//! Calogero-Moser state: tau function, wave functions with simple poles in
//! `w = exp(2 gamma x)`, the potential, and residual checks of the linear
//! problems and of the bilinear residue relation.
//!
//! The wave function is `Psi = exp(x z + t2 z^2) F(w)` with
//! `F = C + sum_i 2 gamma w_i^{1/2} a_i c_i^T / (w - w_i)`, and the adjoint is
//! `Psi^+ = exp(-x z - t2 z^2) G(w)` with
//! `G = C^{-1} + sum_i 2 gamma w_i^{1/2} c*_i b_i^T / (w - w_i)`.
//! The exponentials are factored out analytically in every residual.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::flows::{evolve, flow_rhs};
use crate::linalg::{commutator, eigenvalues, spectral_clearance};
use crate::phase::{exp_coords_vector, lax_matrix, m_matrix, overlap_matrix, SpinState};
use crate::residue::{resolvent_pair_kernel, resolvent_residue_single};
use crate::scalar::Real;

/// Smallest accepted distance between `z` and the spectra of `L +- gamma I`.
pub const SPECTRAL_MARGIN: f64 = 1e-6;
/// Smallest accepted distance between an evaluation point and a pole.
pub const POLE_MARGIN: f64 = 1e-6;
/// Largest accepted condition number of `C`.
pub const MAX_CONDITION: f64 = 1e6;

/// The time-independent constants `C` (normalization of `Psi`) and `S`
/// (constant part of `w^(1)`).
#[derive(Debug, Clone, PartialEq)]
pub struct KpConstants<T: Real> {
    c: DMatrix<T>,
    c_inv: DMatrix<T>,
    s: DMatrix<T>,
}

impl<T: Real> KpConstants<T> {
    /// `C = I`, `S = 0`.
    pub fn identity(n_colors: usize) -> Self {
        Self {
            c: DMatrix::identity(n_colors, n_colors),
            c_inv: DMatrix::identity(n_colors, n_colors),
            s: DMatrix::zeros(n_colors, n_colors),
        }
    }

    pub fn new(c: DMatrix<T>, s: DMatrix<T>) -> Result<Self> {
        let n = c.nrows();
        if !c.is_square() || s.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "C {:?} and S {:?} must be equal square matrices",
                c.shape(),
                s.shape()
            )));
        }
        if c.iter().chain(s.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("KP constants"));
        }
        let sv = c.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smin > T::zero()) || (smax / smin).as_f64() > MAX_CONDITION {
            return Err(Error::InvalidParameter(format!(
                "C is too ill-conditioned (condition number {:e})",
                (smax / smin).as_f64()
            )));
        }
        let c_inv = c.clone().try_inverse().ok_or_else(|| Error::InvalidParameter("C is singular".into()))?;
        Ok(Self { c, c_inv, s })
    }

    pub fn c(&self) -> &DMatrix<T> {
        &self.c
    }

    pub fn c_inv(&self) -> &DMatrix<T> {
        &self.c_inv
    }

    pub fn s(&self) -> &DMatrix<T> {
        &self.s
    }

    fn check_colors(&self, n_colors: usize) -> Result<()> {
        if self.c.nrows() != n_colors {
            return Err(Error::Dimension(format!(
                "constants are {0}x{0} but the state has {n_colors} colors",
                self.c.nrows()
            )));
        }
        Ok(())
    }
}

/// Residue vectors of the wave functions at a spectral parameter `z`:
/// row `i` of `c` is `c_i`, row `i` of `c_star` is `c*_i`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveVectors<T: Real> {
    pub c: DMatrix<T>,
    pub c_star: DMatrix<T>,
    pub z: T,
}

/// A spectral parameter safely to the right of the spectra of `L +- gamma I`.
pub fn default_spectral_parameter<T: Real>(state: &SpinState<T>) -> T {
    spectral_parameter_for(&lax_matrix(state), state.gamma())
}

fn spectral_parameter_for<T: Real>(l: &DMatrix<T>, gamma: T) -> T {
    let radius = eigenvalues(l)
        .into_iter()
        .map(|ev| ev.re.hypot(ev.im))
        .fold(T::zero(), |acc, v| if v > acc { v } else { acc });
    radius + gamma.abs() + T::one()
}

/// Solves `(zI - (L + gamma I)) c = -W^{1/2} b C` and
/// `c*^T (zI - (L - gamma I)) = (C^{-1} a^T) W^{1/2}` for the given level data.
pub(crate) fn wave_vectors_from_parts<T: Real>(
    gamma: T,
    l: &DMatrix<T>,
    w: &DVector<T>,
    a: &DMatrix<T>,
    b: &DMatrix<T>,
    z: T,
    consts: &KpConstants<T>,
) -> Result<WaveVectors<T>> {
    consts.check_colors(a.ncols())?;
    let n = l.nrows();
    let id = DMatrix::<T>::identity(n, n);
    let shifted_up = l + &id * gamma;
    let shifted_down = l - &id * gamma;
    let clearance = {
        let up = spectral_clearance(&shifted_up, z);
        let down = spectral_clearance(&shifted_down, z);
        if up < down { up } else { down }
    };
    if !(clearance >= T::lit(SPECTRAL_MARGIN)) {
        return Err(Error::SpectralMargin {
            z: z.as_f64(),
            distance: clearance.as_f64(),
            suggested: spectral_parameter_for(l, gamma).as_f64(),
        });
    }
    let sqrt_w = DMatrix::from_diagonal(&w.map(|v| v.sqrt()));
    let b_tilde = b * consts.c();
    let a_tilde = a * consts.c_inv().transpose();

    let lu_up = (&id * z - shifted_up).lu();
    let c = lu_up
        .solve(&(-(&sqrt_w * b_tilde)))
        .ok_or(Error::SpectralMargin {
            z: z.as_f64(),
            distance: 0.0,
            suggested: spectral_parameter_for(l, gamma).as_f64(),
        })?;
    let lu_down_t = (&id * z - shifted_down).transpose().lu();
    let c_star = lu_down_t
        .solve(&(&sqrt_w * a_tilde))
        .ok_or(Error::SpectralMargin {
            z: z.as_f64(),
            distance: 0.0,
            suggested: spectral_parameter_for(l, gamma).as_f64(),
        })?;
    if c.iter().chain(c_star.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("wave vectors"));
    }
    Ok(WaveVectors { c, c_star, z })
}

pub fn wave_vectors<T: Real>(state: &SpinState<T>, z: T, consts: &KpConstants<T>) -> Result<WaveVectors<T>> {
    wave_vectors_from_parts(
        state.gamma(),
        &lax_matrix(state),
        &exp_coords_vector(state),
        state.a(),
        state.b(),
        z,
        consts,
    )
}

/// Sum of simple poles in `w` with matrix residues:
/// `constant + sum_i residues[i] / (w - poles[i])`, with `x`-derivatives
/// taken through `d/dx = 2 gamma w d/dw` at fixed poles.
#[derive(Debug, Clone)]
pub(crate) struct PoleSum<T: Real> {
    gamma: T,
    poles: DVector<T>,
    residues: Vec<DMatrix<T>>,
    constant: DMatrix<T>,
}

impl<T: Real> PoleSum<T> {
    /// `C + sum_i 2 gamma w_i^{1/2} a_i c_i^T / (w - w_i)`.
    pub(crate) fn wave(gamma: T, w: &DVector<T>, a: &DMatrix<T>, c: &DMatrix<T>, constant: &DMatrix<T>) -> Self {
        let two_g = T::lit(2.0) * gamma;
        let residues = (0..w.len())
            .map(|i| a.row(i).transpose() * c.row(i) * (two_g * w[i].sqrt()))
            .collect();
        Self {
            gamma,
            poles: w.clone(),
            residues,
            constant: constant.clone(),
        }
    }

    /// `C^{-1} + sum_i 2 gamma w_i^{1/2} c*_i b_i^T / (w - w_i)`.
    pub(crate) fn adjoint(gamma: T, w: &DVector<T>, c_star: &DMatrix<T>, b: &DMatrix<T>, constant: &DMatrix<T>) -> Self {
        Self::wave(gamma, w, c_star, b, constant)
    }

    pub(crate) fn value(&self, w: T) -> DMatrix<T> {
        let mut out = self.constant.clone();
        for (k, wi) in self.residues.iter().zip(self.poles.iter()) {
            out += k / (w - *wi);
        }
        out
    }

    pub(crate) fn dx(&self, w: T) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.constant.nrows(), self.constant.ncols());
        let f = -T::lit(2.0) * self.gamma * w;
        for (k, wi) in self.residues.iter().zip(self.poles.iter()) {
            let d = w - *wi;
            out += k * (f / (d * d));
        }
        out
    }

    pub(crate) fn dxx(&self, w: T) -> DMatrix<T> {
        let mut out = DMatrix::zeros(self.constant.nrows(), self.constant.ncols());
        let f = T::lit(4.0) * self.gamma * self.gamma * w;
        for (k, wi) in self.residues.iter().zip(self.poles.iter()) {
            let d = w - *wi;
            out += k * (f * (w + *wi) / (d * d * d));
        }
        out
    }
}

fn check_x_point<T: Real>(state: &SpinState<T>, x_point: T) -> Result<T> {
    let exponent = T::lit(2.0) * state.gamma() * x_point;
    if !exponent.is_finite() || exponent.abs() > T::max_value().unwrap_or_else(T::one).ln() {
        return Err(Error::InvalidParameter(format!(
            "evaluation point {} overflows exp(2 gamma x)",
            x_point.as_f64()
        )));
    }
    for (i, xi) in state.x().iter().enumerate() {
        let d = (x_point - *xi).abs();
        if !(d >= T::lit(POLE_MARGIN)) {
            return Err(Error::PoleProximity {
                i,
                x: x_point.as_f64(),
                distance: d.as_f64(),
            });
        }
    }
    Ok(exponent.exp())
}

fn check_w_sample<T: Real>(w_poles: &DVector<T>, w: T) -> Result<()> {
    for (i, wi) in w_poles.iter().enumerate() {
        let d = (w - *wi).abs();
        let scale = if wi.abs() > T::one() { wi.abs() } else { T::one() };
        if !(d >= T::lit(POLE_MARGIN) * scale) {
            return Err(Error::SampleNearPole {
                i,
                w: w.as_f64(),
                distance: d.as_f64(),
            });
        }
    }
    Ok(())
}

/// `tau = prefactor * prod_i (exp(2 gamma x_point) - exp(2 gamma x_i))`.
pub fn tau_eval<T: Real>(state: &SpinState<T>, x_point: T, prefactor: T) -> Result<T> {
    let exponent = T::lit(2.0) * state.gamma() * x_point;
    if !exponent.is_finite() || exponent.abs() > T::max_value().unwrap_or_else(T::one).ln() {
        return Err(Error::InvalidParameter(format!(
            "evaluation point {} overflows exp(2 gamma x)",
            x_point.as_f64()
        )));
    }
    let w = exponent.exp();
    Ok(exp_coords_vector(state)
        .iter()
        .fold(prefactor, |acc, wi| acc * (w - *wi)))
}

/// `d^2/dx^2 log tau = -4 gamma^2 sum_i w w_i / (w - w_i)^2`.
pub fn d2_log_tau<T: Real>(state: &SpinState<T>, x_point: T) -> Result<T> {
    let w = check_x_point(state, x_point)?;
    let g = state.gamma();
    Ok(exp_coords_vector(state).iter().fold(T::zero(), |acc, wi| {
        let d = w - *wi;
        acc - T::lit(4.0) * g * g * w * *wi / (d * d)
    }))
}

/// `(Psi, Psi^+)` at `x = x_point`, `t_2 = t2` (other times zero).
pub fn psi_eval<T: Real>(
    state: &SpinState<T>,
    z: T,
    x_point: T,
    t2: T,
    consts: &KpConstants<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    let w = check_x_point(state, x_point)?;
    let wv = wave_vectors(state, z, consts)?;
    let poles = exp_coords_vector(state);
    let g = state.gamma();
    let f = PoleSum::wave(g, &poles, state.a(), &wv.c, consts.c()).value(w);
    let gg = PoleSum::adjoint(g, &poles, &wv.c_star, state.b(), consts.c_inv()).value(w);
    let e = (x_point * z + t2 * z * z).exp();
    Ok((f * e, gg / e))
}

fn potential_at<T: Real>(gamma: T, poles: &DVector<T>, a: &DMatrix<T>, b: &DMatrix<T>, w: T) -> DMatrix<T> {
    let nc = a.ncols();
    let mut v = DMatrix::zeros(nc, nc);
    for i in 0..poles.len() {
        let d = w - poles[i];
        v -= a.row(i).transpose() * b.row(i) * (T::lit(8.0) * gamma * gamma * w * poles[i] / (d * d));
    }
    v
}

/// `(w^(1), V)` with `w^(1) = S - sum_i 2 gamma w_i a_i b_i^T / (w - w_i)` and
/// `V = -8 gamma^2 sum_i w w_i a_i b_i^T / (w - w_i)^2`.
pub fn w1_v_eval<T: Real>(
    state: &SpinState<T>,
    x_point: T,
    consts: &KpConstants<T>,
) -> Result<(DMatrix<T>, DMatrix<T>)> {
    consts.check_colors(state.n_colors())?;
    let w = check_x_point(state, x_point)?;
    let g = state.gamma();
    let poles = exp_coords_vector(state);
    let mut w1 = consts.s().clone();
    for i in 0..poles.len() {
        w1 -= state.a().row(i).transpose() * state.b().row(i) * (T::lit(2.0) * g * poles[i] / (w - poles[i]));
    }
    Ok((w1, potential_at(g, &poles, state.a(), state.b(), w)))
}

/// `V` as `-2 d/dx w^(1)`, differentiating each pole term with
/// `d/dx = 2 gamma w d/dw`.
pub fn potential_from_w1<T: Real>(state: &SpinState<T>, x_point: T) -> Result<DMatrix<T>> {
    let w = check_x_point(state, x_point)?;
    let g = state.gamma();
    let poles = exp_coords_vector(state);
    let nc = state.n_colors();
    let mut dw1_dw = DMatrix::zeros(nc, nc);
    for i in 0..poles.len() {
        let d = w - poles[i];
        // d/dw of -2 gamma w_i / (w - w_i)
        dw1_dw += state.a().row(i).transpose() * state.b().row(i) * (T::lit(2.0) * g * poles[i] / (d * d));
    }
    Ok(dw1_dw * (-T::lit(2.0) * T::lit(2.0) * g * w))
}

/// How the residue vectors `c` move along the stencil of a finite-difference
/// check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Transport {
    /// Recomputed from the evolved state (the correct dynamics).
    Evolved,
    /// Held at their initial values (negative control).
    Frozen,
}

/// Residuals of the direct and adjoint Schrodinger problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchrodingerResidual<T: Real> {
    pub direct: T,
    pub adjoint: T,
}

impl<T: Real> SchrodingerResidual<T> {
    pub fn max(&self) -> T {
        if self.direct > self.adjoint { self.direct } else { self.adjoint }
    }
}

/// `max |d_t2 Psi - d_x^2 Psi - V Psi|` and the adjoint
/// `max |-d_t2 Psi^+ - d_x^2 Psi^+ - Psi^+ V|` over the sample points, with
/// `d_t2` a central difference along the `t_2` flow.
pub fn schrodinger_residual<T: Real>(state: &SpinState<T>, z: T, x_points: &[T], delta_t: T) -> Result<T> {
    let consts = KpConstants::identity(state.n_colors());
    Ok(schrodinger_residuals(state, z, x_points, delta_t, &consts, Transport::Evolved)?.max())
}

pub fn schrodinger_residuals<T: Real>(
    state: &SpinState<T>,
    z: T,
    x_points: &[T],
    delta_t: T,
    consts: &KpConstants<T>,
    transport: Transport,
) -> Result<SchrodingerResidual<T>> {
    if !(delta_t > T::zero()) {
        return Err(Error::InvalidParameter("delta_t must be positive".into()));
    }
    let fwd = evolve(state, 2, delta_t, delta_t)?;
    let bwd = evolve(state, 2, -delta_t, delta_t)?;
    let g = state.gamma();
    let wv0 = wave_vectors(state, z, consts)?;
    let build = |s: &SpinState<T>| -> Result<(PoleSum<T>, PoleSum<T>)> {
        let wv = match transport {
            Transport::Evolved => wave_vectors(s, z, consts)?,
            Transport::Frozen => wv0.clone(),
        };
        let poles = exp_coords_vector(s);
        Ok((
            PoleSum::wave(g, &poles, s.a(), &wv.c, consts.c()),
            PoleSum::adjoint(g, &poles, &wv.c_star, s.b(), consts.c_inv()),
        ))
    };
    let (f0, g0) = build(state)?;
    let (fp, gp) = build(&fwd)?;
    let (fm, gm) = build(&bwd)?;
    let poles = exp_coords_vector(state);
    let two = T::lit(2.0);
    let mut out = SchrodingerResidual {
        direct: T::zero(),
        adjoint: T::zero(),
    };
    for &xp in x_points {
        let w = check_x_point(state, xp)?;
        check_x_point(&fwd, xp)?;
        check_x_point(&bwd, xp)?;
        let v = potential_at(g, &poles, state.a(), state.b(), w);
        let f = f0.value(w);
        let f_t = (fp.value(w) - fm.value(w)) / (two * delta_t);
        let direct = f_t - f0.dx(w) * (two * z) - f0.dxx(w) - &v * &f;
        let gg = g0.value(w);
        let g_t = (gp.value(w) - gm.value(w)) / (two * delta_t);
        let adjoint = -g_t + g0.dx(w) * (two * z) - g0.dxx(w) - &gg * &v;
        let (rd, ra) = (direct.amax(), adjoint.amax());
        if !(rd <= out.direct) {
            out.direct = rd;
        }
        if !(ra <= out.adjoint) {
            out.adjoint = ra;
        }
    }
    Ok(out)
}

/// Both sides of the residue relation
/// `res z^m F(w) G(w) = 2 gamma sum_i d(w_i a_i b_i^T)/(w - w_i) + 4 gamma^2 sum_i xdot_i w_i^2 a_i b_i^T / (w - w_i)^2`
/// at each sample `w`, with the time derivatives on the right taken along
/// flow `rhs_flow` (equal to `m` for the true identity).
pub fn bilinear_identity_sides<T: Real>(
    state: &SpinState<T>,
    m: usize,
    rhs_flow: usize,
    w_samples: &[T],
    consts: &KpConstants<T>,
) -> Result<Vec<(DMatrix<T>, DMatrix<T>)>> {
    consts.check_colors(state.n_colors())?;
    let n = state.n_particles();
    let g = state.gamma();
    let two_g = T::lit(2.0) * g;
    let (a, b) = (state.a(), state.b());
    let w = exp_coords_vector(state);
    let sqrt_w = w.map(|v| v.sqrt());
    let l = lax_matrix(state);
    let id = DMatrix::<T>::identity(n, n);
    let up = &l + &id * g;
    let down = &l - &id * g;
    let up_m = resolvent_residue_single(m, &up);
    let down_m = resolvent_residue_single(m, &down);
    let sw = DMatrix::from_diagonal(&sqrt_w);
    let x_mat = &sw * overlap_matrix(state) * &sw;
    let pair = resolvent_pair_kernel(m, &up, &x_mat, &down);

    // res z^m c_i = -sum_k [(L+g)^m]_ik sqrt(w_k) b_k C ; times C^{-1} gives b
    let c_res = -(&up_m * &sw * b);
    // res z^m C c*_k = sum_l a_l sqrt(w_l) [(L-g)^m]_lk
    let cs_res = down_m.transpose() * &sw * a;

    let tangent = flow_rhs(state, rhs_flow);
    let mut out = Vec::with_capacity(w_samples.len());
    for &ws in w_samples {
        check_w_sample(&w, ws)?;
        let nc = state.n_colors();
        let mut lhs = DMatrix::zeros(nc, nc);
        let mut rhs = DMatrix::zeros(nc, nc);
        for i in 0..n {
            let di = ws - w[i];
            lhs += a.row(i).transpose() * c_res.row(i) * (two_g * sqrt_w[i] / di);
            lhs += cs_res.row(i).transpose() * b.row(i) * (two_g * sqrt_w[i] / di);
            for k in 0..n {
                let dk = ws - w[k];
                lhs -= a.row(i).transpose() * b.row(k) * (two_g * two_g * sqrt_w[i] * sqrt_w[k] * pair[(i, k)] / (di * dk));
            }
            let ab = a.row(i).transpose() * b.row(i);
            let d_ab = a.row(i).transpose() * tangent.b.row(i) + tangent.a.row(i).transpose() * b.row(i);
            let xdot = tangent.x[i];
            rhs += (&ab * (two_g * xdot) + d_ab) * (two_g * w[i] / di);
            rhs += ab * (two_g * two_g * xdot * w[i] * w[i] / (di * di));
        }
        out.push((lhs, rhs));
    }
    Ok(out)
}

/// `max |LHS - RHS| / (1 + max(|LHS|, |RHS|))` of the residue relation for
/// flow `m` over the samples and matrix entries.
pub fn bilinear_identity_residual<T: Real>(
    state: &SpinState<T>,
    m: usize,
    w_samples: &[T],
    consts: &KpConstants<T>,
) -> Result<T> {
    bilinear_identity_residual_with_flow(state, m, m, w_samples, consts)
}

pub fn bilinear_identity_residual_with_flow<T: Real>(
    state: &SpinState<T>,
    m: usize,
    rhs_flow: usize,
    w_samples: &[T],
    consts: &KpConstants<T>,
) -> Result<T> {
    let mut worst = T::zero();
    for (lhs, rhs) in bilinear_identity_sides(state, m, rhs_flow, w_samples, consts)? {
        let scale = T::one() + if lhs.amax() > rhs.amax() { lhs.amax() } else { rhs.amax() };
        let r = (lhs - rhs).amax() / scale;
        if !(r <= worst) {
            worst = r;
        }
    }
    Ok(worst)
}

/// Residuals of the `t_2` evolution of the residue vectors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CEvolutionResidual<T: Real> {
    /// `max |dc/dt - M c|`, `dc/dt` by central differences.
    pub c_dot: T,
    /// `max |(dL/dt + [L, M]) c|`, `dL/dt` by central differences.
    pub compatibility: T,
}

pub fn c_evolution_residual<T: Real>(state: &SpinState<T>, z: T, delta_t: T) -> Result<CEvolutionResidual<T>> {
    if !(delta_t > T::zero()) {
        return Err(Error::InvalidParameter("delta_t must be positive".into()));
    }
    let consts = KpConstants::identity(state.n_colors());
    let fwd = evolve(state, 2, delta_t, delta_t)?;
    let bwd = evolve(state, 2, -delta_t, delta_t)?;
    let two_dt = T::lit(2.0) * delta_t;
    let c0 = wave_vectors(state, z, &consts)?.c;
    let c_dot = (wave_vectors(&fwd, z, &consts)?.c - wave_vectors(&bwd, z, &consts)?.c) / two_dt;
    let l = lax_matrix(state);
    let m = m_matrix(state);
    let l_dot = (lax_matrix(&fwd) - lax_matrix(&bwd)) / two_dt;
    Ok(CEvolutionResidual {
        c_dot: (c_dot - &m * &c0).amax(),
        compatibility: ((l_dot + commutator(&l, &m)) * &c0).amax(),
    })
}

/// `count` sample points in `w`: geometric midpoints between consecutive
/// poles first, then points alternately beyond the largest and below the
/// smallest pole.
pub fn default_w_samples<T: Real>(state: &SpinState<T>, count: usize) -> Vec<T> {
    let mut w: Vec<T> = exp_coords_vector(state).iter().copied().collect();
    w.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut out: Vec<T> = w.windows(2).map(|p| (p[0] * p[1]).sqrt()).take(count).collect();
    let step = (state.gamma().abs() * T::lit(0.75)).exp();
    let (mut hi, mut lo) = (w[w.len() - 1], w[0]);
    let mut upper = true;
    while out.len() < count {
        if upper {
            hi *= step;
            out.push(hi);
        } else {
            lo /= step;
            out.push(lo);
        }
        upper = !upper;
    }
    out
}
