//! Command-line driver: dataset simulation, reconstruction, gradient checks
//! and overlap inspection.
//!
//! Exit codes: 0 success, 1 check or numerical failure, 2 validation or
//! configuration error, 3 I/O error.

use std::fmt::{self, Write as _};
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use crate::error::Error;
use crate::fft::ifft2;
use crate::field::Field2D;
use crate::io;
use crate::objective::{gradient, overlap_map, MeasurementSet};
use crate::optics::make_ideal_pupil;
use crate::phantom::{make_phantom, simulate, smooth_image, DatasetManifest, NoiseModel};
use crate::rng::Rng;
use crate::solver::{init_constant, run as run_solver, Algorithm, SolverConfig};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const TRUTH_FILE: &str = "s_true.fpmc";

pub fn measurement_file(k: usize) -> String {
    format!("y_{k:03}.fpmr")
}

#[derive(Debug, Parser)]
#[command(
    name = "fpm",
    about = "Multiplexed Fourier ptychography simulation and reconstruction"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate amplitude measurements of a sample.
    Simulate(SimulateArgs),
    /// Reconstruct the sample spectrum with WF or AWF.
    Reconstruct(ReconstructArgs),
    /// Compare the analytical gradient with central finite differences.
    CheckGrad(CheckGradArgs),
    /// Write the pupil overlap map and report the step size.
    Overlap(OverlapArgs),
    /// Write smooth random amplitude and phase images for `simulate`.
    Phantom(PhantomArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// FPMR amplitude image.
    #[arg(long)]
    pub amplitude: PathBuf,
    /// FPMR phase image; its range is mapped onto [-π/2, π/2].
    #[arg(long)]
    pub phase: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    /// Overrides the manifest seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Standard deviation of additive Gaussian intensity noise.
    #[arg(long = "noise-sigma")]
    pub noise_sigma: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Wf,
    Awf,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Wf => Algorithm::Wf,
            AlgorithmArg::Awf => Algorithm::Awf,
        }
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, value_enum, default_value = "awf")]
    pub algorithm: AlgorithmArg,
    #[arg(long, default_value_t = 500)]
    pub iters: usize,
    /// Manual step size; defaults to 1 / (peak pupil overlap).
    #[arg(long)]
    pub step: Option<f64>,
    #[arg(long = "grad-tol", default_value_t = 0.0)]
    pub grad_tol: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CheckGradArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1e-6)]
    pub h: f64,
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 64)]
    pub rows: usize,
    #[arg(long, default_value_t = 64)]
    pub cols: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Highest spatial frequency, in cycles per field of view.
    #[arg(long = "max-freq", default_value_t = 2)]
    pub max_freq: i64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io { .. } => 3,
            Error::NumericalFailure { .. } => 1,
            _ => 2,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError {
        code: 2,
        message: msg.into(),
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Runs one invocation; the returned text goes to standard output.
pub fn execute(cli: Cli) -> CliResult<String> {
    match cli.command {
        Command::Simulate(a) => cmd_simulate(&a).map(|s| s.to_string()),
        Command::Reconstruct(a) => cmd_reconstruct(&a).map(|s| s.to_string()),
        Command::CheckGrad(a) => cmd_check_grad(&a),
        Command::Overlap(a) => {
            cmd_overlap(&a).map(|(max, mu)| format!("max_overlap={max} step_size={mu:.17e}\n"))
        }
        Command::Phantom(a) => cmd_phantom(&a).map(|_| String::new()),
        Command::Version => Ok(format!("fpm {}\n", env!("CARGO_PKG_VERSION"))),
    }
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateSummary {
    pub measurements: usize,
    pub leds: usize,
    pub seed: u64,
    pub noise: NoiseModel,
}

impl fmt::Display for SimulateSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "measurements={} leds={} seed={} noise={:?}",
            self.measurements, self.leds, self.seed, self.noise
        )
    }
}

pub fn cmd_simulate(args: &SimulateArgs) -> CliResult<SimulateSummary> {
    let mut doc = io::read_manifest_doc(&args.manifest)?;
    if let Some(seed) = args.seed {
        doc.seed = seed;
    }
    if let Some(sigma) = args.noise_sigma {
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(usage(format!(
                "--noise-sigma must be non-negative, got {sigma}"
            )));
        }
        doc.noise = if sigma == 0.0 {
            NoiseModel::None
        } else {
            NoiseModel::Gaussian { sigma }
        };
    }
    let manifest = doc.resolve()?;
    let amplitude = io::read_image(&args.amplitude)?;
    let phase = io::read_image(&args.phase)?;
    let phantom = make_phantom(&amplitude, &phase, manifest.grid.n1, manifest.grid.n2)?;
    let meas = simulate(&phantom, &manifest)?;

    create_dir(&args.out)?;
    for (k, img) in meas.images().iter().enumerate() {
        io::write_image(args.out.join(measurement_file(k)), img)?;
    }
    io::write_manifest(args.out.join(MANIFEST_FILE), &manifest)?;
    io::write_field(args.out.join(TRUTH_FILE), &phantom.s_true)?;
    Ok(SimulateSummary {
        measurements: meas.len(),
        leds: manifest.plan.total_leds(),
        seed: manifest.seed,
        noise: manifest.noise,
    })
}

/// Loads `manifest.toml` and `y_###.fpmr` from a dataset directory.
pub fn load_dataset(dir: &Path) -> CliResult<(DatasetManifest, MeasurementSet)> {
    let manifest = io::read_manifest(dir.join(MANIFEST_FILE))?;
    let images = (0..manifest.plan.len())
        .map(|k| io::read_measurement(dir.join(measurement_file(k))))
        .collect::<Result<Vec<_>, _>>()?;
    let g = manifest.grid;
    let pupil = make_ideal_pupil(g.m1, g.m2, &manifest.geometry)?;
    let meas = MeasurementSet::new(images, manifest.plan.clone(), pupil, (g.n1, g.n2))?;
    Ok((manifest, meas))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReconstructSummary {
    pub algorithm: Algorithm,
    pub iterations: usize,
    pub step_size: f64,
    pub step_is_analytical: bool,
    pub final_cost: f64,
    pub final_grad_norm: f64,
}

impl fmt::Display for ReconstructSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "algorithm={} iterations={} step_size={:.17e} ({}) init=constant(amplitude={}, phase={}) final_cost={:.17e} final_grad_norm={:.17e}",
            self.algorithm,
            self.iterations,
            self.step_size,
            if self.step_is_analytical { "1/max_overlap" } else { "manual" },
            INIT_AMPLITUDE,
            INIT_PHASE,
            self.final_cost,
            self.final_grad_norm
        )
    }
}

/// Constant initial image used by `reconstruct`.
pub const INIT_AMPLITUDE: f64 = 1.0;
pub const INIT_PHASE: f64 = 0.0;

pub fn cmd_reconstruct(args: &ReconstructArgs) -> CliResult<ReconstructSummary> {
    if let Some(mu) = args.step {
        if !(mu.is_finite() && mu > 0.0) {
            return Err(usage(format!("--step must be positive, got {mu}")));
        }
    }
    let cfg = SolverConfig {
        max_iters: args.iters,
        step_override: args.step,
        grad_tol: args.grad_tol,
        record_trace: true,
        algorithm: args.algorithm.into(),
    };
    cfg.validate()?;
    let (manifest, meas) = load_dataset(&args.dataset)?;
    let s0 = init_constant(
        manifest.grid.n1,
        manifest.grid.n2,
        INIT_AMPLITUDE,
        INIT_PHASE,
    );
    let (s_hat, trace) = run_solver(&meas, &cfg, s0)?;

    create_dir(&args.out)?;
    let image = ifft2(&s_hat);
    io::write_field(args.out.join("s_hat.fpmc"), &s_hat)?;
    io::write_image(args.out.join("amplitude.fpmr"), &image.abs())?;
    io::write_image(args.out.join("phase.fpmr"), &image.arg())?;
    io::write_trace_csv(args.out.join("trace.csv"), &trace)?;
    Ok(ReconstructSummary {
        algorithm: cfg.algorithm,
        iterations: trace.iterations_run,
        step_size: trace.step_size_used,
        step_is_analytical: args.step.is_none(),
        final_cost: trace.final_cost,
        final_grad_norm: trace.final_grad_norm,
    })
}

/// Relative error threshold for `check-grad`.
pub const GRAD_CHECK_TOL: f64 = 1e-5;
pub const GRAD_CHECK_COORDS: usize = 64;
const GRAD_SCALE_FRACTION: f64 = 1e-3;

/// One real coordinate of the complex unknown.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Coordinate {
    pub index: usize,
    pub imaginary: bool,
}

impl fmt::Display for Coordinate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}[{}]",
            if self.imaginary { "im" } else { "re" },
            self.index
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub worst: Coordinate,
    pub grad_norm: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        self.max_rel_error <= GRAD_CHECK_TOL
    }
}

/// Checks `grad` against central differences of `cost` on `coords`.
///
/// With `s = x + j·y`, the analytical gradient must equal
/// `(∂J/∂x + j·∂J/∂y) / 2`. Each coordinate's error is
/// `|fd − an| / max(|fd|, |an|, floor, 1e-3·‖an‖∞)`: entries far below the
/// gradient's own scale, or below the absolute `floor`, are judged against
/// that scale instead of their own size.
pub fn gradient_check(
    meas: &MeasurementSet,
    point: &Field2D,
    coords: &[Coordinate],
    h: f64,
    floor: f64,
    grad: &dyn Fn(&Field2D) -> crate::error::Result<Field2D>,
) -> crate::error::Result<GradCheckReport> {
    let analytical = grad(point)?;
    let floor = analytical
        .data()
        .iter()
        .map(|z| z.re.abs().max(z.im.abs()))
        .fold(floor, |acc, v| acc.max(GRAD_SCALE_FRACTION * v));
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: coords.first().copied().unwrap_or(Coordinate {
            index: 0,
            imaginary: false,
        }),
        grad_norm: analytical.norm(),
        checked: coords.len(),
    };
    for &coord in coords {
        let dir = if coord.imaginary {
            Complex64::new(0.0, h)
        } else {
            Complex64::new(h, 0.0)
        };
        let mut plus = point.clone();
        plus.data_mut()[coord.index] += dir;
        let mut minus = point.clone();
        minus.data_mut()[coord.index] -= dir;
        let fd = cost_difference(&plus, &minus, meas)? / (2.0 * h) / 2.0;
        let an = analytical.data()[coord.index];
        let an = if coord.imaginary { an.im } else { an.re };
        let err = (fd - an).abs() / fd.abs().max(an.abs()).max(floor);
        if err > report.max_rel_error || err.is_nan() {
            report.max_rel_error = err;
            report.worst = coord;
        }
    }
    Ok(report)
}

/// `J(a) − J(b)`, summed pixel by pixel as `(g_b − g_a)(2y − g_a − g_b)` so
/// the result does not cancel against the size of `J`.
pub fn cost_difference(
    a: &Field2D,
    b: &Field2D,
    meas: &MeasurementSet,
) -> crate::error::Result<f64> {
    let (ga, gb) = (meas.model_amplitudes(a)?, meas.model_amplitudes(b)?);
    let mut total = 0.0;
    for ((ia, ib), y) in ga.iter().zip(&gb).zip(meas.images()) {
        for ((pa, pb), py) in ia.data().iter().zip(ib.data()).zip(y.data()) {
            total += (pb - pa) * (2.0 * py - pa - pb);
        }
    }
    Ok(total)
}

/// Random coordinates inside the covered Fourier band.
pub fn covered_coordinates(
    meas: &MeasurementSet,
    count: usize,
    rng: &mut Rng,
) -> crate::error::Result<Vec<Coordinate>> {
    let (n1, n2) = meas.grid();
    let map = overlap_map(meas.pupil(), meas.plan(), n1, n2)?;
    let covered: Vec<usize> = map
        .values
        .data()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, _)| i)
        .collect();
    if covered.is_empty() {
        return Err(Error::config(
            "no Fourier sample is observed by any measurement",
        ));
    }
    Ok((0..count)
        .map(|_| Coordinate {
            index: covered[rng.index(covered.len())],
            imaginary: rng.index(2) == 1,
        })
        .collect())
}

/// Random complex point whose predicted amplitudes match the data energy.
pub fn random_point(meas: &MeasurementSet, rng: &mut Rng) -> Field2D {
    let (n1, n2) = meas.grid();
    let pupil_energy = meas.pupil().values().norm_sqr() * meas.plan().total_leds() as f64;
    let sigma = (meas.energy() / pupil_energy.max(f64::MIN_POSITIVE))
        .sqrt()
        .max(1e-3);
    Field2D::from_fn(n1, n2, |_, _| {
        Complex64::new(rng.normal(), rng.normal()) * (sigma / 2f64.sqrt())
    })
}

/// Absolute gradient floor for [`gradient_check`] on this dataset.
pub fn gradient_floor(meas: &MeasurementSet) -> crate::error::Result<f64> {
    let (n1, n2) = meas.grid();
    let max_overlap = overlap_map(meas.pupil(), meas.plan(), n1, n2)?.max_value;
    Ok(1e-6 * (max_overlap * meas.energy() / (n1 * n2) as f64).sqrt())
}

pub fn cmd_check_grad(args: &CheckGradArgs) -> CliResult<String> {
    if !(args.h.is_finite() && args.h > 0.0) {
        return Err(usage(format!("--h must be positive, got {}", args.h)));
    }
    let (_, meas) = load_dataset(&args.dataset)?;
    let mut rng = Rng::new(args.seed);
    let point = random_point(&meas, &mut rng);
    let coords = covered_coordinates(&meas, GRAD_CHECK_COORDS, &mut rng)?;
    let floor = gradient_floor(&meas)?;
    let report = gradient_check(&meas, &point, &coords, args.h, floor, &|s| {
        gradient(s, &meas)
    })?;
    let mut out = String::new();
    writeln!(
        out,
        "coordinates={} grad_norm={:.6e} max_rel_error={:.6e} worst={}",
        report.checked, report.grad_norm, report.max_rel_error, report.worst
    )
    .unwrap();
    if report.passed() {
        out.push_str("PASS\n");
        Ok(out)
    } else {
        Err(CliError {
            code: 1,
            message: format!(
                "{out}FAIL: relative error {:.6e} at coordinate {} exceeds {GRAD_CHECK_TOL:e}",
                report.max_rel_error, report.worst
            ),
        })
    }
}

pub fn cmd_overlap(args: &OverlapArgs) -> CliResult<(f64, f64)> {
    let (manifest, meas) = load_dataset(&args.dataset)?;
    let map = overlap_map(
        meas.pupil(),
        meas.plan(),
        manifest.grid.n1,
        manifest.grid.n2,
    )?;
    if !(map.max_value > 0.0) {
        return Err(usage("pupil is identically zero; step size undefined"));
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    io::write_image(&args.out, &map.values)?;
    Ok((map.max_value, 1.0 / map.max_value))
}

pub fn cmd_phantom(args: &PhantomArgs) -> CliResult<()> {
    if args.rows == 0 || args.cols == 0 {
        return Err(usage("phantom dimensions must be positive"));
    }
    let mut rng = Rng::new(args.seed);
    let amplitude = smooth_image(args.rows, args.cols, args.max_freq, 4, 0.3, 1.0, &mut rng);
    let phase = smooth_image(args.rows, args.cols, args.max_freq, 4, 0.0, 1.0, &mut rng);
    create_dir(&args.out)?;
    io::write_image(args.out.join("amplitude.fpmr"), &amplitude)?;
    io::write_image(args.out.join("phase.fpmr"), &phase)?;
    Ok(())
}
