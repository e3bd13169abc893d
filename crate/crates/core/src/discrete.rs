//! Integrable discrete-time version of the hyperbolic spin Calogero-Moser
//! system.
//!
//! A level `p` carries poles `x(p)`, spins `a(p)`, `b(p)` and velocities
//! `xdot(p)`. One step solves, for the next level,
//!
//! * (i) `g sum_k coth(g(x_k' - x_i)) a_k' (b_k' . a_i) = g sum_{k!=i} coth(g(x_k - x_i)) a_k (b_k . a_i) + (xdot_i/2 + mu) a_i`,
//! * (ii) `g sum_k coth(g(x_i' - x_k)) b_k (b_i' . a_k) = g sum_{k!=i} coth(g(x_i' - x_k')) b_k' (b_i' . a_k') + (xdot_i'/2 + mu) b_i'`,
//! * (iii) `b_i' . a_i' = 1`,
//! * (iv) `|a_i'|^2 = |a_i|^2` (fixes the per-site rescaling freedom),
//!
//! a square system of `n (2N + 2)` equations, by damped Newton iteration.
//! The step intertwines the Lax matrices, `L(p+1) M(p) = M(p) L(p)`, and
//! approaches a shift of the continuous flows as `mu -> infinity`; the poles
//! then move by `1/mu - xdot/(2 mu^2) + O(mu^-3)` per step.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kp::{wave_vectors_from_parts, KpConstants, PoleSum};
use crate::linalg::inf_norm;
use crate::phase::{lax_from_parts, SpinState, DEFAULT_SEP_MIN};
use crate::scalar::Real;

/// One discrete-time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLevel<T: Real> {
    gamma: T,
    x: DVector<T>,
    a: DMatrix<T>,
    b: DMatrix<T>,
    xdot: DVector<T>,
}

impl<T: Real> DiscreteLevel<T> {
    /// Validated like a [`SpinState`] with momenta `xdot / 2`.
    pub fn new(gamma: T, x: DVector<T>, a: DMatrix<T>, b: DMatrix<T>, xdot: DVector<T>) -> Result<Self> {
        let state = SpinState::new(gamma, x, &xdot / T::lit(2.0), a, b)?;
        Ok(Self::from_state(&state))
    }

    /// Same poles and spins, `xdot = 2 p`.
    pub fn from_state(state: &SpinState<T>) -> Self {
        Self {
            gamma: state.gamma(),
            x: state.x().clone(),
            a: state.a().clone(),
            b: state.b().clone(),
            xdot: state.p() * T::lit(2.0),
        }
    }

    /// The continuous state with `p = xdot / 2`.
    pub fn to_state(&self) -> Result<SpinState<T>> {
        SpinState::new(self.gamma, self.x.clone(), &self.xdot / T::lit(2.0), self.a.clone(), self.b.clone())
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

    pub fn a(&self) -> &DMatrix<T> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<T> {
        &self.b
    }

    pub fn xdot(&self) -> &DVector<T> {
        &self.xdot
    }

    /// Lax matrix of the level, diagonal `-xdot_i / 2`.
    pub fn lax_matrix(&self) -> DMatrix<T> {
        lax_from_parts(self.gamma, &self.x, &(&self.xdot / T::lit(2.0)), &self.a, &self.b)
    }

    fn exp_coords(&self) -> DVector<T> {
        self.x.map(|xi| (T::lit(2.0) * self.gamma * xi).exp())
    }
}

/// Step parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiscreteSpec<T: Real> {
    pub mu: T,
    /// Newton stops once blocks (i)-(ii) are below `newton_tol * (1 + |mu|)`
    /// and blocks (iii)-(iv) below `newton_tol`.
    pub newton_tol: T,
    pub newton_max_iter: usize,
    pub mu_min: T,
}

impl<T: Real> DiscreteSpec<T> {
    pub fn new(mu: T) -> Self {
        Self {
            mu,
            newton_tol: T::lit(1e-12),
            newton_max_iter: 50,
            mu_min: T::one(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mu.is_finite() || self.mu.abs() < self.mu_min {
            return Err(Error::InvalidParameter(format!(
                "|mu| = {} is below mu_min = {}",
                self.mu.abs().as_f64(),
                self.mu_min.as_f64()
            )));
        }
        if !(self.newton_tol > T::zero()) || self.newton_max_iter == 0 {
            return Err(Error::InvalidParameter("newton_tol and newton_max_iter must be positive".into()));
        }
        Ok(())
    }
}

/// Solver diagnostics of one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub iterations: usize,
    /// Final scaled residual (see [`DiscreteSpec::newton_tol`]).
    pub residual: f64,
    /// Whether the step needed continuation from larger `mu`.
    pub continuation: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteTrajectory<T: Real> {
    pub levels: Vec<DiscreteLevel<T>>,
    pub spec: DiscreteSpec<T>,
    pub stats: Vec<StepStats>,
}

fn sep_error<T: Real>(i: usize, j: usize, d: T) -> Error {
    Error::SingularConfiguration {
        i,
        j,
        separation: d.abs().as_f64(),
    }
}

/// `M_ij(p) = gamma (b_i(p+1) . a_j(p)) / sinh(gamma (x_i(p+1) - x_j(p)))`.
pub fn discrete_m_matrix<T: Real>(next: &DiscreteLevel<T>, cur: &DiscreteLevel<T>) -> Result<DMatrix<T>> {
    let n = cur.n_particles();
    let g = cur.gamma;
    let r = &next.b * cur.a.transpose();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = next.x[i] - cur.x[j];
            if !(d.abs() >= T::lit(DEFAULT_SEP_MIN)) {
                return Err(sep_error(i, j, d));
            }
            m[(i, j)] = g * r[(i, j)] / (g * d).sinh();
        }
    }
    Ok(m)
}

/// `M_ij(p) = 2 gamma sqrt(w_i(p+1) w_j(p)) (b_i(p+1) . a_j(p)) / (w_i(p+1) - w_j(p))`.
pub fn discrete_m_matrix_exp_form<T: Real>(next: &DiscreteLevel<T>, cur: &DiscreteLevel<T>) -> Result<DMatrix<T>> {
    let n = cur.n_particles();
    let g = cur.gamma;
    let (w1, w0) = (next.exp_coords(), cur.exp_coords());
    let r = &next.b * cur.a.transpose();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let d = next.x[i] - cur.x[j];
            if !(d.abs() >= T::lit(DEFAULT_SEP_MIN)) {
                return Err(sep_error(i, j, d));
            }
            m[(i, j)] = T::lit(2.0) * g * (w1[i] * w0[j]).sqrt() * r[(i, j)] / (w1[i] - w0[j]);
        }
    }
    Ok(m)
}

// Unknown vector layout: [delta (n), a' (n N, row-major), b' (n N), xdot' (n)],
// with delta = x(p+1) - x(p) so that near-coincident differences keep full
// precision.
struct Unknowns<T: Real> {
    delta: DVector<T>,
    a: DMatrix<T>,
    b: DMatrix<T>,
    xdot: DVector<T>,
}

impl<T: Real> Unknowns<T> {
    fn unpack(u: &DVector<T>, n: usize, nc: usize) -> Self {
        let nn = n * nc;
        Self {
            delta: u.rows(0, n).into_owned(),
            a: DMatrix::from_row_slice(n, nc, u.rows(n, nn).as_slice()),
            b: DMatrix::from_row_slice(n, nc, u.rows(n + nn, nn).as_slice()),
            xdot: u.rows(n + 2 * nn, n).into_owned(),
        }
    }

    fn pack(delta: &DVector<T>, a: &DMatrix<T>, b: &DMatrix<T>, xdot: &DVector<T>) -> DVector<T> {
        let mut out = Vec::with_capacity(2 * delta.len() + 2 * a.len());
        out.extend(delta.iter().copied());
        for m in [a, b] {
            for row in m.row_iter() {
                out.extend(row.iter().copied());
            }
        }
        out.extend(xdot.iter().copied());
        DVector::from_vec(out)
    }
}

fn coth<T: Real>(v: T) -> T {
    T::one() / v.tanh()
}

fn residual_core<T: Real>(cur: &DiscreteLevel<T>, nx: &Unknowns<T>, mu: T) -> Result<DVector<T>> {
    let (n, nc) = (cur.n_particles(), cur.n_colors());
    let g = cur.gamma;
    let half = T::lit(0.5);
    let sep = T::lit(DEFAULT_SEP_MIN);
    let (x, a, b) = (&cur.x, &cur.a, &cur.b);
    let (a1, b1) = (&nx.a, &nx.b);

    // cross[(k, i)] = x_k(p+1) - x_i(p), same1[(i, k)] = x_i(p+1) - x_k(p+1)
    let mut cross = DMatrix::zeros(n, n);
    let mut same1 = DMatrix::zeros(n, n);
    for k in 0..n {
        for i in 0..n {
            let d = (x[k] - x[i]) + nx.delta[k];
            if !(d.abs() >= sep) {
                return Err(sep_error(k, i, d));
            }
            cross[(k, i)] = d;
            if k != i {
                let d1 = (x[k] - x[i]) + (nx.delta[k] - nx.delta[i]);
                if !(d1.abs() >= sep) {
                    return Err(sep_error(k, i, d1));
                }
                same1[(k, i)] = d1;
            }
        }
    }
    let r10 = b1 * a.transpose(); // b_k(p+1) . a_i(p)
    let r00 = b * a.transpose();
    let r11 = b1 * a1.transpose();

    let nn = n * nc;
    let mut f = DVector::zeros(2 * nn + 2 * n);
    for i in 0..n {
        for alpha in 0..nc {
            let mut lhs = T::zero();
            let mut rhs = (cur.xdot[i] * half + mu) * a[(i, alpha)];
            for k in 0..n {
                lhs += g * coth(g * cross[(k, i)]) * a1[(k, alpha)] * r10[(k, i)];
                if k != i {
                    rhs += g * coth(g * (x[k] - x[i])) * a[(k, alpha)] * r00[(k, i)];
                }
            }
            f[i * nc + alpha] = lhs - rhs;

            let mut lhs = T::zero();
            let mut rhs = (nx.xdot[i] * half + mu) * b1[(i, alpha)];
            for k in 0..n {
                lhs += g * coth(g * cross[(i, k)]) * b[(k, alpha)] * r10[(i, k)];
                if k != i {
                    rhs += g * coth(g * same1[(i, k)]) * b1[(k, alpha)] * r11[(i, k)];
                }
            }
            f[nn + i * nc + alpha] = lhs - rhs;
        }
        f[2 * nn + i] = r11[(i, i)] - T::one();
        f[2 * nn + n + i] = a1.row(i).norm_squared() - a.row(i).norm_squared();
    }
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("discrete residual"));
    }
    Ok(f)
}

/// Stacked residual of blocks (i)-(iv), length `n (2N + 2)`.
pub fn discrete_residual<T: Real>(
    cur: &DiscreteLevel<T>,
    next: &DiscreteLevel<T>,
    spec: &DiscreteSpec<T>,
) -> Result<DVector<T>> {
    check_pair(cur, next)?;
    let nx = Unknowns {
        delta: &next.x - &cur.x,
        a: next.a.clone(),
        b: next.b.clone(),
        xdot: next.xdot.clone(),
    };
    residual_core(cur, &nx, spec.mu)
}

fn check_pair<T: Real>(cur: &DiscreteLevel<T>, next: &DiscreteLevel<T>) -> Result<()> {
    if cur.x.len() != next.x.len() || cur.a.ncols() != next.a.ncols() || cur.gamma != next.gamma {
        return Err(Error::Dimension("levels differ in size or gamma".into()));
    }
    Ok(())
}

fn scaled_norm<T: Real>(f: &DVector<T>, n: usize, nc: usize, mu: T) -> T {
    let nn = n * nc;
    let dyn_part = f.rows(0, 2 * nn).amax() / (T::one() + mu.abs());
    let alg_part = f.rows(2 * nn, 2 * n).amax();
    if dyn_part > alg_part { dyn_part } else { alg_part }
}

fn predictor<T: Real>(cur: &DiscreteLevel<T>, mu: T) -> DVector<T> {
    let g = cur.gamma;
    let delta = cur.xdot.map(|xd| {
        // exact one-pole shift: g coth(g delta) = mu + xdot / 2
        let y = (mu + xd * T::lit(0.5)) / g;
        if y.abs() > T::one() {
            T::lit(0.5) * ((y + T::one()) / (y - T::one())).ln() / g
        } else {
            T::one() / mu
        }
    });
    Unknowns::pack(&delta, &cur.a, &cur.b, &cur.xdot)
}

fn fd_jacobian<T: Real>(cur: &DiscreteLevel<T>, u: &DVector<T>, mu: T) -> Result<DMatrix<T>> {
    let (n, nc) = (cur.n_particles(), cur.n_colors());
    let dim = u.len();
    let mut jac = DMatrix::zeros(dim, dim);
    let rel = T::lit(1e-6);
    for j in 0..dim {
        let floor = if j < n { T::one() / mu.abs() } else { T::one() };
        let h = rel * if u[j].abs() > floor { u[j].abs() } else { floor };
        let mut up = u.clone();
        up[j] += h;
        let mut dn = u.clone();
        dn[j] -= h;
        let fp = residual_core(cur, &Unknowns::unpack(&up, n, nc), mu)?;
        let fm = residual_core(cur, &Unknowns::unpack(&dn, n, nc), mu)?;
        jac.set_column(j, &((fp - fm) / (T::lit(2.0) * h)));
    }
    Ok(jac)
}

fn newton<T: Real>(cur: &DiscreteLevel<T>, spec: &DiscreteSpec<T>, mu: T, mut u: DVector<T>) -> Result<(DVector<T>, StepStats)> {
    let (n, nc) = (cur.n_particles(), cur.n_colors());
    let eval = |u: &DVector<T>| residual_core(cur, &Unknowns::unpack(u, n, nc), mu);
    let mut f = eval(&u)?;
    let mut r = scaled_norm(&f, n, nc, mu);
    let mut converged_at = None;
    for it in 0..spec.newton_max_iter {
        if r <= spec.newton_tol && converged_at.is_none() {
            converged_at = Some(it);
        }
        // a couple of polishing iterations after convergence push the
        // residual to round-off
        if let Some(c) = converged_at {
            if it >= c + 2 {
                break;
            }
        }
        let jac = fd_jacobian(cur, &u, mu)?;
        let lu = jac.lu();
        let diag = lu.u().diagonal();
        let (dmax, dmin) = (diag.amax(), diag.iter().fold(T::max_value().unwrap_or_else(T::one), |acc, v| {
            if v.abs() < acc { v.abs() } else { acc }
        }));
        if !(dmin > T::lit(1e-14) * dmax) {
            return Err(Error::RankDeficient { iteration: it });
        }
        let step = lu.solve(&(-&f)).ok_or(Error::RankDeficient { iteration: it })?;
        let mut lambda = T::one();
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &u + &step * lambda;
            if let Ok(ft) = eval(&trial) {
                let rt = scaled_norm(&ft, n, nc, mu);
                if rt < r || (converged_at.is_some() && rt <= r) {
                    u = trial;
                    f = ft;
                    r = rt;
                    accepted = true;
                    break;
                }
            }
            lambda *= T::lit(0.5);
        }
        if !accepted {
            if converged_at.is_some() {
                break;
            }
            return Err(Error::NewtonDivergence {
                iterations: it + 1,
                residual: r.as_f64(),
            });
        }
    }
    if r <= spec.newton_tol {
        let iterations = converged_at.unwrap_or(spec.newton_max_iter);
        return Ok((
            u,
            StepStats {
                iterations,
                residual: r.as_f64(),
                continuation: false,
            },
        ));
    }
    Err(Error::NewtonDivergence {
        iterations: spec.newton_max_iter,
        residual: r.as_f64(),
    })
}

fn level_from_unknowns<T: Real>(cur: &DiscreteLevel<T>, u: &DVector<T>) -> Result<DiscreteLevel<T>> {
    let nx = Unknowns::unpack(u, cur.n_particles(), cur.n_colors());
    DiscreteLevel::new(cur.gamma, &cur.x + &nx.delta, nx.a, nx.b, nx.xdot)
}

/// Advances one level; see [`discrete_step_with_stats`].
pub fn discrete_step<T: Real>(cur: &DiscreteLevel<T>, spec: &DiscreteSpec<T>) -> Result<DiscreteLevel<T>> {
    Ok(discrete_step_with_stats(cur, spec)?.0)
}

/// Newton solve of blocks (i)-(iv) from the one-pole predictor. If that
/// fails, the step is re-solved at `4 mu`, `2 mu`, `mu`, each stage seeded
/// with the previous solution (shifts rescaled by the ratio of the `mu`s).
pub fn discrete_step_with_stats<T: Real>(
    cur: &DiscreteLevel<T>,
    spec: &DiscreteSpec<T>,
) -> Result<(DiscreteLevel<T>, StepStats)> {
    spec.validate()?;
    let n = cur.n_particles();
    let direct = newton(cur, spec, spec.mu, predictor(cur, spec.mu));
    let (u, stats) = match direct {
        Ok(ok) => ok,
        Err(first_err @ (Error::NewtonDivergence { .. } | Error::RankDeficient { .. } | Error::SingularConfiguration { .. })) => {
            let mut guess: Option<(DVector<T>, T)> = None;
            let mut total = 0;
            let mut result = Err(first_err);
            for factor in [4.0, 2.0, 1.0] {
                let mu_k = spec.mu * T::lit(factor);
                let start = match &guess {
                    None => predictor(cur, mu_k),
                    Some((prev, mu_prev)) => {
                        let mut s = prev.clone();
                        let ratio = *mu_prev / mu_k;
                        for i in 0..n {
                            s[i] *= ratio;
                        }
                        s
                    }
                };
                match newton(cur, spec, mu_k, start) {
                    Ok((u_k, st)) => {
                        total += st.iterations;
                        guess = Some((u_k.clone(), mu_k));
                        if factor == 1.0 {
                            result = Ok((
                                u_k,
                                StepStats {
                                    iterations: total,
                                    residual: st.residual,
                                    continuation: true,
                                },
                            ));
                        }
                    }
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            result?
        }
        Err(e) => return Err(e),
    };
    Ok((level_from_unknowns(cur, &u)?, stats))
}

/// `steps` consecutive discrete steps from `initial`.
pub fn discrete_trajectory<T: Real>(
    initial: &DiscreteLevel<T>,
    spec: &DiscreteSpec<T>,
    steps: usize,
) -> Result<DiscreteTrajectory<T>> {
    let mut levels = vec![initial.clone()];
    let mut stats = Vec::with_capacity(steps);
    for _ in 0..steps {
        let (next, st) = discrete_step_with_stats(levels.last().expect("non-empty"), spec)?;
        levels.push(next);
        stats.push(st);
    }
    Ok(DiscreteTrajectory {
        levels,
        spec: *spec,
        stats,
    })
}

/// `|| L(p+1) M(p) - M(p) L(p) ||_inf`.
pub fn discrete_lax_residual<T: Real>(cur: &DiscreteLevel<T>, next: &DiscreteLevel<T>) -> Result<T> {
    check_pair(cur, next)?;
    let m = discrete_m_matrix(next, cur)?;
    Ok(inf_norm(&(next.lax_matrix() * &m - &m * cur.lax_matrix())))
}

/// Scale `||L(p+1)|| ||M|| + ||M|| ||L(p)||` of the terms in
/// [`discrete_lax_residual`].
pub fn discrete_lax_scale<T: Real>(cur: &DiscreteLevel<T>, next: &DiscreteLevel<T>) -> Result<T> {
    let m = inf_norm(&discrete_m_matrix(next, cur)?);
    Ok(m * (inf_norm(&next.lax_matrix()) + inf_norm(&cur.lax_matrix())))
}

/// Three-level equations of motion, one entry per pole:
/// `sum_j coth(g(x_i - x_j')) (b_i . a_j')(b_j' . a_i) + sum_j coth(g(x_i - x_j'')) (b_i . a_j'')(b_j'' . a_i)
///  - 2 sum_{j!=i} coth(g(x_i - x_j)) (b_i . a_j)(b_j . a_i)`
/// with `'` the next and `''` the previous level.
pub fn discrete_eom_residual<T: Real>(
    prev: &DiscreteLevel<T>,
    cur: &DiscreteLevel<T>,
    next: &DiscreteLevel<T>,
) -> Result<DVector<T>> {
    check_pair(prev, cur)?;
    check_pair(cur, next)?;
    let n = cur.n_particles();
    let g = cur.gamma;
    let sep = T::lit(DEFAULT_SEP_MIN);
    let mut out = DVector::zeros(n);
    for i in 0..n {
        let mut acc = T::zero();
        for other in [next, prev] {
            for j in 0..n {
                let d = cur.x[i] - other.x[j];
                if !(d.abs() >= sep) {
                    return Err(sep_error(i, j, d));
                }
                acc += coth(g * d) * cur.b.row(i).dot(&other.a.row(j)) * other.b.row(j).dot(&cur.a.row(i));
            }
        }
        for j in 0..n {
            if j != i {
                let d = cur.x[i] - cur.x[j];
                acc -= T::lit(2.0) * coth(g * d) * cur.b.row(i).dot(&cur.a.row(j)) * cur.b.row(j).dot(&cur.a.row(i));
            }
        }
        out[i] = acc;
    }
    Ok(out)
}

fn relative<T: Real>(residual: &DMatrix<T>, terms: &[&DMatrix<T>]) -> T {
    let scale = terms.iter().fold(T::one(), |acc, t| acc + t.amax());
    residual.amax() / scale
}

/// Largest relative residual of the discrete linear problems between two
/// levels, with `C = I`:
///
/// * `(z - mu) c(p+1) = -W(p+1)^{1/2} b(p+1) - M(p) c(p)`,
/// * `(z - mu) c*(p) = W(p)^{1/2} a(p) - M(p)^T c*(p+1)` (row-vector form transposed),
/// * the direct and adjoint problems for the pole-ansatz wave functions at
///   every sample `w`, exponential prefactors divided out.
pub fn discrete_linear_problem_residual<T: Real>(
    cur: &DiscreteLevel<T>,
    next: &DiscreteLevel<T>,
    z: T,
    w_samples: &[T],
    spec: &DiscreteSpec<T>,
) -> Result<T> {
    check_pair(cur, next)?;
    let g = cur.gamma;
    let mu = spec.mu;
    let nc = cur.n_colors();
    let consts = KpConstants::identity(nc);
    let (w0, w1) = (cur.exp_coords(), next.exp_coords());
    let wv0 = wave_vectors_from_parts(g, &cur.lax_matrix(), &w0, &cur.a, &cur.b, z, &consts)?;
    let wv1 = wave_vectors_from_parts(g, &next.lax_matrix(), &w1, &next.a, &next.b, z, &consts)?;
    let m = discrete_m_matrix(next, cur)?;
    let sw0 = DMatrix::from_diagonal(&w0.map(|v| v.sqrt()));
    let sw1 = DMatrix::from_diagonal(&w1.map(|v| v.sqrt()));

    let t1 = &wv1.c * (z - mu);
    let t2 = &sw1 * &next.b;
    let t3 = &m * &wv0.c;
    let mut worst = relative(&(&t1 + &t2 + &t3), &[&t1, &t2, &t3]);

    let s1 = &wv0.c_star * (z - mu);
    let s2 = &sw0 * &cur.a;
    let s3 = m.transpose() * &wv1.c_star;
    let r = relative(&(&s1 - &s2 + &s3), &[&s1, &s2, &s3]);
    if r > worst {
        worst = r;
    }

    let id = DMatrix::<T>::identity(nc, nc);
    let f0 = PoleSum::wave(g, &w0, &cur.a, &wv0.c, &id);
    let f1 = PoleSum::wave(g, &w1, &next.a, &wv1.c, &id);
    let g0 = PoleSum::adjoint(g, &w0, &wv0.c_star, &cur.b, &id);
    let g1 = PoleSum::adjoint(g, &w1, &wv1.c_star, &next.b, &id);
    let two_g = T::lit(2.0) * g;
    for &w in w_samples {
        for (i, (p0, p1)) in w0.iter().zip(w1.iter()).enumerate() {
            for wi in [*p0, *p1] {
                let d = (w - wi).abs();
                let scale = if wi.abs() > T::one() { wi.abs() } else { T::one() };
                if !(d >= T::lit(1e-6) * scale) {
                    return Err(Error::SampleNearPole {
                        i,
                        w: w.as_f64(),
                        distance: d.as_f64(),
                    });
                }
            }
        }
        // w1(p+1) - w1(p); the constant S cancels
        let mut dw1 = DMatrix::zeros(nc, nc);
        for i in 0..cur.n_particles() {
            dw1 -= next.a.row(i).transpose() * next.b.row(i) * (two_g * w1[i] / (w - w1[i]));
            dw1 += cur.a.row(i).transpose() * cur.b.row(i) * (two_g * w0[i] / (w - w0[i]));
        }
        let (fa, fb) = (f0.value(w), f1.value(w));
        let lhs = (&fa - &fb) * (mu - z);
        let dx = f0.dx(w);
        let pot = &dw1 * &fa;
        let r = relative(&(&lhs - &dx - &pot), &[&lhs, &dx, &pot]);
        if r > worst {
            worst = r;
        }

        let (ga, gb) = (g0.value(w), g1.value(w));
        let lhs = (&gb - &ga) * (mu - z);
        let dx = g1.dx(w);
        let pot = &gb * &dw1;
        let r = relative(&(&lhs + &dx - &pot), &[&lhs, &dx, &pot]);
        if r > worst {
            worst = r;
        }
    }
    Ok(worst)
}
