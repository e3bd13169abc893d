use std::fs;
use std::path::{Path, PathBuf};

use spincm_core::discrete::{
    discrete_eom_residual, discrete_lax_residual, discrete_step_with_stats, DiscreteLevel, DiscreteSpec,
};
use spincm_core::flows::{conservation_report, integrate, power_traces, FlowSpec};
use spincm_core::kp::{wave_vectors, KpConstants};
use spincm_core::linalg::{sorted_eigenvalues, spectral_distance};
use spincm_core::phase::SpinState;
use spincm_core::random::{random_regular_state, random_state, RandomStateConfig};
use spincm_core::verify::{
    kp_check, run_suite, Suite, CONSERVATION_TOL, DISCRETE_EOM_TOL, DISCRETE_LAX_TOL, DISCRETE_SPECTRUM_TOL,
};
use spincm_core::{Check, VerificationReport};

use crate::exit::{io_failure, Failure, OK, USAGE, VERIFICATION_FAILED};
use crate::output::{
    csv_writer, fmt_float, matrix_columns, report_json, sha256_hex, sidecar_path, vector_columns, write_file,
};
use crate::state_file::StateFile;

/// Number of power traces `tr L^k` written to CSV files.
pub const TRACE_COLUMNS: usize = 4;

pub struct Loaded {
    pub file: StateFile,
    pub state: SpinState<f64>,
}

pub fn load_state(path: &Path, constrained: bool) -> Result<Loaded, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let file = StateFile::parse(&text).map_err(|e| Failure::from(e).in_file(path))?;
    let state = file.to_state(constrained).map_err(|e| Failure::from(e).in_file(path))?;
    Ok(Loaded { file, state })
}

impl Failure {
    fn in_file(self, path: &Path) -> Self {
        Self::new(self.code, format!("{}: {}", path.display(), self.message))
    }
}

fn config_digest(file: &StateFile, args: &str) -> String {
    sha256_hex(format!("{}{args}\n", file.render()).as_bytes())
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Failure + '_ {
    move |e| io_failure(path, e)
}

fn state_row(row: &mut Vec<String>, x: &[f64], v: &[f64], a: &nalgebra::DMatrix<f64>, b: &nalgebra::DMatrix<f64>) {
    row.extend(x.iter().chain(v).map(|&z| fmt_float(z)));
    for m in [a, b] {
        for i in 0..m.nrows() {
            row.extend(m.row(i).iter().map(|&z| fmt_float(z)));
        }
    }
}

fn state_header(header: &mut Vec<String>, velocity: &str, n: usize, nc: usize) {
    header.extend(vector_columns("x", n));
    header.extend(vector_columns(velocity, n));
    header.extend(matrix_columns("a", n, nc));
    header.extend(matrix_columns("b", n, nc));
}

pub struct SimulateArgs {
    pub state: PathBuf,
    pub flow: usize,
    pub t_end: f64,
    pub dt: f64,
    pub record_every: usize,
    pub out: PathBuf,
}

pub fn simulate(args: &SimulateArgs) -> Result<u8, Failure> {
    let loaded = load_state(&args.state, true)?;
    let spec = FlowSpec::new(args.flow, args.t_end, args.dt).with_record_every(args.record_every);
    spec.validate(usize::MAX).map_err(|e| Failure::new(USAGE, e.to_string()))?;
    let traj = integrate(&loaded.state, &spec)?;

    let (n, nc) = (loaded.state.n_particles(), loaded.state.n_colors());
    let mut w = csv_writer(&args.out)?;
    let mut header = vec!["t".to_string()];
    state_header(&mut header, "p", n, nc);
    header.extend(vector_columns("H", TRACE_COLUMNS));
    w.write_record(&header).map_err(csv_err(&args.out))?;
    for (t, s) in &traj.samples {
        let mut row = vec![fmt_float(*t)];
        state_row(&mut row, s.x().as_slice(), s.p().as_slice(), s.a(), s.b());
        row.extend(power_traces(s, TRACE_COLUMNS).into_iter().map(fmt_float));
        w.write_record(&row).map_err(csv_err(&args.out))?;
    }
    w.flush().map_err(|e| io_failure(&args.out, e))?;

    let report = conservation_report(&traj, TRACE_COLUMNS, CONSERVATION_TOL);
    let cfg = format!(
        "simulate flow={} t_end={:e} dt={:e} record_every={}",
        args.flow, args.t_end, args.dt, args.record_every
    );
    write_file(
        &crate::output::sidecar_path(&args.out),
        &report_json("simulate", &config_digest(&loaded.file, &cfg), &report),
    )?;
    Ok(OK)
}

pub struct DiscreteArgs {
    pub state: PathBuf,
    pub mu: f64,
    pub steps: usize,
    pub out: PathBuf,
}

pub fn discrete(args: &DiscreteArgs) -> Result<u8, Failure> {
    let loaded = load_state(&args.state, true)?;
    let spec = DiscreteSpec::new(args.mu);
    spec.validate().map_err(|e| Failure::new(USAGE, e.to_string()))?;
    let (n, nc) = (loaded.state.n_particles(), loaded.state.n_colors());

    let mut w = csv_writer(&args.out)?;
    let mut header = vec!["step".to_string()];
    state_header(&mut header, "xdot", n, nc);
    header.extend(["newton_iterations", "newton_residual", "lax_residual"].map(String::from));
    header.extend(vector_columns("trL", TRACE_COLUMNS));
    w.write_record(&header).map_err(csv_err(&args.out))?;

    let traces = |level: &DiscreteLevel<f64>| -> Result<Vec<f64>, Failure> {
        Ok(power_traces(&level.to_state()?, TRACE_COLUMNS))
    };
    let write_level = |w: &mut csv::Writer<fs::File>,
                       step: usize,
                       level: &DiscreteLevel<f64>,
                       solve: [String; 3]|
     -> Result<(), Failure> {
        let mut row = vec![step.to_string()];
        state_row(&mut row, level.x().as_slice(), level.xdot().as_slice(), level.a(), level.b());
        row.extend(solve);
        row.extend(traces(level)?.into_iter().map(fmt_float));
        w.write_record(&row).map_err(csv_err(&args.out))
    };

    let mut levels = vec![DiscreteLevel::from_state(&loaded.state)];
    write_level(&mut w, 0, &levels[0], [String::new(), String::new(), String::new()])?;
    let ev0 = sorted_eigenvalues(&levels[0].lax_matrix());
    let (mut newton, mut lax, mut spectrum, mut eom) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for step in 1..=args.steps {
        let cur = levels.last().expect("non-empty");
        let (next, stats) = discrete_step_with_stats(cur, &spec)?;
        let lax_k = discrete_lax_residual(cur, &next)?;
        let tr = traces(&next)?;
        eprintln!(
            "step {step}: newton iterations {} residual {:.3e}{}, lax residual {lax_k:.3e}, tr L^k {}",
            stats.iterations,
            stats.residual,
            if stats.continuation { " (continuation)" } else { "" },
            tr.iter().map(|v| format!("{v:.12e}")).collect::<Vec<_>>().join(" ")
        );
        write_level(
            &mut w,
            step,
            &next,
            [stats.iterations.to_string(), fmt_float(stats.residual), fmt_float(lax_k)],
        )?;
        newton = newton.max(stats.residual);
        lax = lax.max(lax_k);
        spectrum = spectrum.max(spectral_distance(&ev0, &sorted_eigenvalues(&next.lax_matrix())));
        if levels.len() >= 2 {
            let prev = &levels[levels.len() - 2];
            eom = eom.max(discrete_eom_residual(prev, cur, &next)?.amax());
        }
        levels.push(next);
    }
    w.flush().map_err(|e| io_failure(&args.out, e))?;

    let mut report = VerificationReport::new();
    report.push(Check::new("discrete Newton residual", newton, spec.newton_tol));
    report.push(Check::new("discrete Lax equation", lax, DISCRETE_LAX_TOL));
    report.push(Check::new("discrete spectrum of L", spectrum, DISCRETE_SPECTRUM_TOL));
    if args.steps >= 2 {
        report.push(Check::new("discrete three-level equations", eom, DISCRETE_EOM_TOL));
    }
    let cfg = format!("discrete mu={:e} steps={}", args.mu, args.steps);
    write_file(
        &sidecar_path(&args.out),
        &report_json("discrete", &config_digest(&loaded.file, &cfg), &report),
    )?;
    Ok(OK)
}

fn write_report(out: &Path, command: &str, loaded: &Loaded, cfg: &str, report: &VerificationReport) -> Result<u8, Failure> {
    write_file(out, &report_json(command, &config_digest(&loaded.file, cfg), report))?;
    for c in report.failures() {
        eprintln!("FAILED {}: residual {:e} tolerance {:e}", c.name, c.residual, c.tolerance);
    }
    for (k, v) in report.metadata.iter().filter(|(k, _)| k.starts_with("error: ")) {
        eprintln!("{k}: {v}");
    }
    Ok(if report.passed { OK } else { VERIFICATION_FAILED })
}

pub fn verify(state: &Path, suite: Suite, out: &Path) -> Result<u8, Failure> {
    // the constraint is one of the checked invariants, so it is not enforced on load
    let loaded = load_state(state, false)?;
    let report = run_suite(&loaded.state, suite);
    write_report(out, "verify", &loaded, &format!("verify suite={suite}"), &report)
}

pub struct KpArgs {
    pub state: PathBuf,
    pub z: f64,
    pub m: usize,
    pub samples: usize,
    pub out: PathBuf,
}

pub fn kp(args: &KpArgs) -> Result<u8, Failure> {
    let loaded = load_state(&args.state, true)?;
    wave_vectors(&loaded.state, args.z, &KpConstants::identity(loaded.state.n_colors()))?;
    let report = kp_check(&loaded.state, args.z, args.m, args.samples);
    let cfg = format!("kp-check z={:e} m={} samples={}", args.z, args.m, args.samples);
    write_report(&args.out, "kp-check", &loaded, &cfg, &report)
}

pub struct GenerateArgs {
    pub particles: usize,
    pub colors: usize,
    pub seed: u64,
    pub gamma: f64,
    pub momentum_scale: f64,
    pub regular_until: Option<f64>,
    pub out: PathBuf,
}

/// Flows a regular state must survive, step and minimum pole gap.
const REGULAR_FLOWS: [usize; 2] = [2, 3];
const REGULAR_DT: f64 = 1e-3;
const REGULAR_MIN_GAP: f64 = 0.5;

pub fn generate(args: &GenerateArgs) -> Result<u8, Failure> {
    let cfg = RandomStateConfig::new(args.particles, args.colors)
        .with_gamma(args.gamma)
        .with_momentum_scale(args.momentum_scale);
    let (state, seed) = match args.regular_until {
        None => (random_state::<f64>(&cfg, args.seed)?, args.seed),
        Some(t) => random_regular_state(&cfg, args.seed, &REGULAR_FLOWS, t, REGULAR_DT, REGULAR_MIN_GAP)?,
    };
    if seed != args.seed {
        eprintln!("seed {} gave an irregular state; using seed {seed}", args.seed);
    }
    write_file(&args.out, &StateFile::from_state(&state, Some(seed)).render())?;
    Ok(OK)
}
