//! Command-line front end: configure a surface model, run the kernel
//! contract battery, build partition atom tables, and run the
//! three-condition sequence audit, emitting machine-readable reports.
//!
//! Three subcommands share one JSON config (first positional argument,
//! optional — defaults apply) and the overrides `--tol`, `--window`,
//! `--seed`, `--out`:
//!
//! * `kernel-check`    — kernel invariance, projection normalization, mass
//!   identity, reproducing property, and exponential mass bounds on the
//!   configured group; writes `report.json`.
//! * `partition-build` — builds every window atom with its decay
//!   certificate, audits partition sums against the window projection, and
//!   writes `atoms.csv`, `model.json`, `report.json`.
//! * `reich-audit`     — loads the built atoms, fits the audit constants on
//!   a small window, runs the three-condition audit, and writes
//!   `report.json`, `constants.json`, `condition2.csv`, `condition3.csv`.
//!
//! Exit codes are a stable contract: 0 all checks pass, 1 a numerical
//! contract failed (including non-certified quadrature), 2 configuration
//! error, 3 I/O error. Identical config and seed produce byte-identical
//! reports: no timestamps, no absolute paths, fixed field order, shortest
//! round-trip float formatting.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bergman::{self, MeasurableQD};
use crate::fuchsian::FuchsianGroup;
use crate::geom::MobiusMap;
use crate::lattice::{self, IntRect, Quasilattice};
use crate::partition::{
    self, ModelKind, SurfaceModel, DEFAULT_EPS_PUNCT, DEFAULT_MARGIN, DEFAULT_QUOTIENT_DEPTH,
    DEFAULT_R0,
};
use crate::quadrature::{Region, DEFAULT_BUDGET};
use crate::reich;
use crate::{Error, Result, SCHEMA_VERSION};

/// Exit code when every check passes.
pub const EXIT_PASS: i32 = 0;
/// Exit code when a numerical contract fails or cannot be certified.
pub const EXIT_CONTRACT: i32 = 1;
/// Exit code for configuration errors (bad flags, bad JSON, bad values,
/// missing prerequisite artifacts).
pub const EXIT_CONFIG: i32 = 2;
/// Exit code for I/O errors while writing outputs.
pub const EXIT_IO: i32 = 3;

/// Default window side for `partition-build` (and thus for the default
/// end-to-end pipeline): an 8 x 8 block of 64 cells.
pub const DEFAULT_WINDOW_SIDE: i64 = 8;
/// Default side of the small window on which the audit constants are
/// fitted before being frozen for the full audit.
pub const DEFAULT_FIT_WINDOW_SIDE: i64 = 8;

/// One run configuration, shared by all subcommands. Every field has a
/// default, so `{}` is a valid config; unknown fields are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Surface model: `disk`, `cyclic-quotient`, `gamma2-quotient`, or
    /// `punctured-window`.
    pub model: ModelKind,
    /// Carrier embedding margin (> 1); the window maps into the disk of
    /// radius 1/margin.
    pub margin: f64,
    /// Translation length of the cyclic-quotient group.
    pub cyclic_length: f64,
    /// Word-enumeration depth for quotient kernels.
    pub depth: usize,
    /// Seed for generated quasilattices and for the check battery's
    /// sampling; part of the determinism contract.
    pub seed: u64,
    /// Quasilattice offset bound (<= 1/8).
    pub delta: f64,
    /// Window side; `null` means the per-command default
    /// ([`DEFAULT_WINDOW_SIDE`] for `partition-build`, the built window
    /// for `reich-audit`).
    pub window: Option<i64>,
    /// Side of the small window on which audit constants are fitted.
    pub fit_window: i64,
    /// Certified quadrature / series tolerance.
    pub tol: f64,
    /// Quadrature budget (cell evaluations per integral) for the
    /// kernel-check battery.
    pub budget: usize,
    /// Sequence indices n for the audit.
    pub n_list: Vec<u32>,
    /// Exceedance thresholds K (each >= 100) for condition 3.
    pub k_list: Vec<f64>,
    /// Truncation radius for partition-sum audits.
    pub sum_radius: f64,
    /// Covering radius parameter fixing the density floor of punctured
    /// models.
    pub r0: f64,
    /// Puncture regularization radius of punctured models.
    pub eps_punct: f64,
    /// Output directory for reports and tables.
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::PuncturedWindow,
            margin: DEFAULT_MARGIN,
            cyclic_length: 2.0,
            depth: DEFAULT_QUOTIENT_DEPTH,
            seed: 7,
            delta: 0.0625,
            window: None,
            fit_window: DEFAULT_FIT_WINDOW_SIDE,
            tol: 1e-6,
            budget: DEFAULT_BUDGET,
            n_list: reich::default_n_list(),
            k_list: reich::default_k_list(),
            sum_radius: 1.0,
            r0: DEFAULT_R0,
            eps_punct: DEFAULT_EPS_PUNCT,
            out_dir: PathBuf::from("reichlab-out"),
        }
    }
}

impl RunConfig {
    /// Field-level validation shared by all subcommands; list-specific
    /// requirements (e.g. K >= 100) are checked where the list is used.
    pub fn validate(&self) -> Result<()> {
        if !(self.margin > 1.0 && self.margin <= 10.0) {
            return Err(Error::OutOfRange {
                name: "margin",
                value: self.margin,
                range: "(1, 10]",
            });
        }
        if !(self.tol > 0.0 && self.tol <= 0.1) {
            return Err(Error::OutOfRange {
                name: "tol",
                value: self.tol,
                range: "(0, 0.1]",
            });
        }
        if self.budget == 0 {
            return Err(Error::NonPositive {
                name: "budget",
                value: 0.0,
            });
        }
        if !(0.0..=lattice::MAX_OFFSET).contains(&self.delta) {
            return Err(Error::DeltaTooLarge { delta: self.delta });
        }
        if let Some(side) = self.window {
            if side < 1 {
                return Err(Error::NonPositive {
                    name: "window",
                    value: side as f64,
                });
            }
        }
        if self.fit_window < 1 {
            return Err(Error::NonPositive {
                name: "fit_window",
                value: self.fit_window as f64,
            });
        }
        if self.n_list.is_empty() {
            return Err(Error::Config("n_list must not be empty".into()));
        }
        if self.n_list.contains(&0) {
            return Err(Error::OutOfRange {
                name: "n_list entry",
                value: 0.0,
                range: "n >= 1",
            });
        }
        if !(self.sum_radius >= 0.0) {
            return Err(Error::NonPositive {
                name: "sum_radius",
                value: self.sum_radius,
            });
        }
        if !(self.cyclic_length > 0.0) {
            return Err(Error::NonPositive {
                name: "cyclic_length",
                value: self.cyclic_length,
            });
        }
        if self.depth > 16 {
            return Err(Error::OutOfRange {
                name: "depth",
                value: self.depth as f64,
                range: "0..=16",
            });
        }
        Ok(())
    }
}

#[derive(Parser)]
#[command(
    name = "reichlab",
    version,
    about = "Weight-4 Bergman kernels, meromorphic partitions of unity, and three-condition sequence audits on plane windows",
    disable_help_subcommand = true
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the kernel contract battery on the configured group
    KernelCheck(CommonArgs),
    /// Build all window atoms with decay certificates and sum audits
    PartitionBuild(CommonArgs),
    /// Run the three-condition audit on previously built atoms
    ReichAudit(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// JSON config file; omitted fields take defaults
    config: Option<PathBuf>,
    /// Override the quadrature/series tolerance
    #[arg(long)]
    tol: Option<f64>,
    /// Override the window side
    #[arg(long)]
    window: Option<i64>,
    /// Override the seed
    #[arg(long)]
    seed: Option<u64>,
    /// Override the output directory
    #[arg(long)]
    out: Option<PathBuf>,
}

/// A classified command failure: a message for stderr plus the process
/// exit code it maps to.
struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn config(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    fn io(message: impl Into<String>) -> Self {
        Failure {
            code: EXIT_IO,
            message: message.into(),
        }
    }

    /// A failure after configuration was accepted: I/O errors keep their
    /// own exit code, everything else is a contract failure.
    fn run(err: Error) -> Self {
        let code = match err {
            Error::Io(_) => EXIT_IO,
            _ => EXIT_CONTRACT,
        };
        Failure {
            code,
            message: err.to_string(),
        }
    }
}

type CmdResult<T> = std::result::Result<T, Failure>;

/// Entry point; returns a process exit code.
pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            // Help and version requests print to stdout and exit 0; real
            // parse errors are configuration errors.
            let code = if err.use_stderr() { EXIT_CONFIG } else { EXIT_PASS };
            let _ = err.print();
            return code;
        }
    };
    let (args, run): (&CommonArgs, fn(RunConfig) -> CmdResult<i32>) = match &cli.command {
        Cmd::KernelCheck(args) => (args, cmd_kernel_check),
        Cmd::PartitionBuild(args) => (args, cmd_partition_build),
        Cmd::ReichAudit(args) => (args, cmd_reich_audit),
    };
    let config = match load_config(args) {
        Ok(config) => config,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            return failure.code;
        }
    };
    match run(config) {
        Ok(code) => code,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            failure.code
        }
    }
}

/// Reads the config file (if given), applies flag overrides, validates.
fn load_config(args: &CommonArgs) -> CmdResult<RunConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|err| {
                Failure::config(format!("cannot read config {}: {err}", path.display()))
            })?;
            serde_json::from_str::<RunConfig>(&text).map_err(|err| {
                Failure::config(format!("invalid config {}: {err}", path.display()))
            })?
        }
        None => RunConfig::default(),
    };
    if let Some(tol) = args.tol {
        config.tol = tol;
    }
    if let Some(side) = args.window {
        config.window = Some(side);
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    config
        .validate()
        .map_err(|err| Failure::config(err.to_string()))?;
    Ok(config)
}

fn ensure_out_dir(dir: &Path) -> CmdResult<()> {
    fs::create_dir_all(dir)
        .map_err(|err| Failure::io(format!("cannot create output directory {}: {err}", dir.display())))
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> CmdResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|err| Failure::run(Error::Json(err)))?;
    text.push('\n');
    fs::write(dir.join(name), text)
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", dir.join(name).display())))
}

/// The group the kernel battery runs on, per the configured model kind.
fn battery_group(config: &RunConfig) -> Result<FuchsianGroup> {
    match config.model {
        ModelKind::CyclicQuotient => FuchsianGroup::cyclic(config.cyclic_length),
        ModelKind::Gamma2Quotient => Ok(FuchsianGroup::gamma2()),
        ModelKind::Disk | ModelKind::PuncturedWindow => Ok(FuchsianGroup::trivial()),
    }
}

// ---------------------------------------------------------------------------
// kernel-check
// ---------------------------------------------------------------------------

/// One row of the kernel battery: a measured quantity against its bound.
/// `certified` is false when quadrature gave up (budget exhausted) before
/// reaching the requested tolerance; a non-certified row never passes.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub measured: f64,
    pub bound: f64,
    pub pass: bool,
    pub certified: bool,
    pub note: String,
}

impl CheckRow {
    fn certified(name: &str, measured: f64, bound: f64, note: String) -> Self {
        CheckRow {
            name: name.into(),
            measured,
            bound,
            pass: measured <= bound,
            certified: true,
            note,
        }
    }

    fn failed(name: &str, err: &Error) -> Self {
        let certified = !matches!(
            err,
            Error::BudgetExceeded { .. } | Error::DepthExhausted { .. }
        );
        CheckRow {
            name: name.into(),
            measured: f64::NAN,
            bound: f64::NAN,
            pass: false,
            // Budget/depth exhaustion means "result not certified at this
            // tolerance"; any other error is a hard check failure.
            certified,
            note: err.to_string(),
        }
    }
}

/// Kernel battery report: all scalar contract checks on one group.
#[derive(Debug, Clone, Serialize)]
pub struct KernelCheckReport {
    pub schema_version: String,
    pub command: String,
    pub group: String,
    pub seed: u64,
    pub tol: f64,
    pub budget: usize,
    pub depth: usize,
    pub checks: Vec<CheckRow>,
    /// Every row reached its tolerance.
    pub certified: bool,
    /// Every row passed (implies `certified`).
    pub pass: bool,
}

fn sample_disk(rng: &mut ChaCha8Rng, rmax: f64) -> Complex64 {
    let r = rmax * rng.random::<f64>().sqrt();
    let t = rng.random_range(0.0..std::f64::consts::TAU);
    Complex64::from_polar(r, t)
}

/// Runs the kernel contract battery and writes `report.json`.
fn cmd_kernel_check(config: RunConfig) -> CmdResult<i32> {
    let group = battery_group(&config).map_err(|err| Failure::config(err.to_string()))?;
    let depth = config.depth.min(12);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut checks = Vec::new();

    // Kernel invariance under disk automorphisms: closed-form, certified.
    {
        let mut max_residual = 0.0f64;
        for _ in 0..200 {
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            let a = MobiusMap::new(Complex64::from_polar(1.0, phi), sample_disk(&mut rng, 0.8))
                .expect("|center| < 1");
            let z = sample_disk(&mut rng, 0.9);
            let w = sample_disk(&mut rng, 0.9);
            max_residual = max_residual.max(bergman::invariance_residual(&a, z, w));
        }
        checks.push(CheckRow::certified(
            "kernel-invariance",
            max_residual,
            1e-10,
            "max |K(Az,Aw) A'(z)^2 conj(A'(w))^2 - K(z,w)| over 200 random (A,z,w)".into(),
        ));
    }

    // Projection normalization: the calibrated constant reproduces
    // constants exactly; the half convention reproduces 1/2.
    match bergman::normalization_report() {
        Ok(report) => {
            let note = format!(
                "calibrated {:.12} vs analytic {:.12}; half convention reproduces {:.6}",
                report.calibrated, report.analytic, report.constant_reproduced_half_convention
            );
            checks.push(CheckRow::certified(
                "projection-normalization",
                (report.constant_reproduced_calibrated - 1.0).abs(),
                1e-6,
                note,
            ));
        }
        Err(err) => checks.push(CheckRow::failed("projection-normalization", &err)),
    }

    // Mass identity: kernel mass over a region equals the density-weighted
    // area of its Möbius image.
    {
        let mut max_rel = 0.0f64;
        let mut row_err = None;
        let mut configs = 0usize;
        while configs < 3 && row_err.is_none() {
            let center = sample_disk(&mut rng, 0.55);
            let radius = 0.1 + 0.2 * rng.random::<f64>();
            if center.norm() + radius > 0.9 {
                continue;
            }
            let w = sample_disk(&mut rng, 0.6);
            let region = Region::Disk { center, radius };
            match bergman::mass_identity_check_with_budget(&region, w, config.tol, config.budget) {
                Ok(m) => max_rel = max_rel.max(m.residual / (1.0 + m.rhs.abs())),
                Err(err) => row_err = Some(err),
            }
            configs += 1;
        }
        checks.push(match row_err {
            Some(err) => CheckRow::failed("mass-identity", &err),
            None => CheckRow::certified(
                "mass-identity",
                max_rel,
                50.0 * config.tol,
                "max relative residual over 3 random (region, w) configurations".into(),
            ),
        });
    }

    // Reproducing property on the disk: projecting w^k returns z^k with
    // the calibrated constant.
    {
        let trivial = FuchsianGroup::trivial();
        let points = [Complex64::new(0.3, 0.2), Complex64::new(-0.4, 0.1)];
        let mut max_err = 0.0f64;
        let mut row_err = None;
        'outer: for k in [1i32, 3] {
            for &z in &points {
                let f = MeasurableQD::from_fn(move |w: Complex64| w.powi(k));
                match bergman::project(&f, &trivial, z, config.tol) {
                    Ok(value) => max_err = max_err.max((value - z.powi(k)).norm()),
                    Err(err) => {
                        row_err = Some(err);
                        break 'outer;
                    }
                }
            }
        }
        checks.push(match row_err {
            Some(err) => CheckRow::failed("reproducing-monomials", &err),
            None => CheckRow::certified(
                "reproducing-monomials",
                max_err,
                (50.0 * config.tol).max(1e-7),
                "max |project(w^k)(z) - z^k| for k in {1,3} at 2 points (disk normalization)"
                    .into(),
            ),
        });
    }

    // Exponential mass bound, shell anchor (trivial kernel only: the
    // orbit of nontrivial groups meets the shell).
    if group.rank() == 0 {
        let shell = Region::AnnulusSector {
            center: Complex64::default(),
            r_inner: 0.9,
            r_outer: 1.0,
            t0: 0.0,
            t1: std::f64::consts::TAU,
        };
        match bergman::kernel_mass_bound(&group, &shell, Complex64::default(), config.tol, depth) {
            Ok(m) => checks.push(CheckRow::certified(
                "kernel-mass-shell",
                m.measured_upper,
                m.bound,
                format!(
                    "shell 0.9 <= |z| < 1 at p = 0: measured {:.6} (0.19 pi = {:.6}), distance {:.6}",
                    m.measured,
                    0.19 * std::f64::consts::PI,
                    m.distance
                ),
            )),
            Err(err) => checks.push(CheckRow::failed("kernel-mass-shell", &err)),
        }
    }

    // Exponential mass bound on random small disks; configurations whose
    // region meets the orbit of p are skipped (the bound needs positive
    // distance), mirroring how the bound is stated.
    {
        let mut worst_margin = f64::NEG_INFINITY;
        let mut bound_at_worst = 0.0f64;
        let mut row_err = None;
        let mut checked = 0usize;
        let mut attempts = 0usize;
        while checked < 3 && row_err.is_none() && attempts < 200 {
            attempts += 1;
            let p = sample_disk(&mut rng, 0.4);
            let center = sample_disk(&mut rng, 0.55);
            let region = Region::Disk {
                center,
                radius: 0.04,
            };
            match bergman::kernel_mass_bound(&group, &region, p, config.tol, depth) {
                Ok(m) => {
                    if m.measured_upper - m.bound > worst_margin {
                        worst_margin = m.measured_upper - m.bound;
                        bound_at_worst = m.bound;
                    }
                    checked += 1;
                }
                Err(Error::RegionTouchesBasePoint { .. }) => continue,
                Err(err) => row_err = Some(err),
            }
        }
        checks.push(match row_err {
            Some(err) => CheckRow::failed("kernel-mass-random", &err),
            None => CheckRow::certified(
                "kernel-mass-random",
                worst_margin + bound_at_worst,
                bound_at_worst,
                format!(
                    "worst measured vs bound over {checked} random (disk, p) configurations at depth {depth}"
                ),
            ),
        });
    }

    let certified = checks.iter().all(|c| c.certified);
    let pass = certified && checks.iter().all(|c| c.pass);
    let report = KernelCheckReport {
        schema_version: SCHEMA_VERSION.to_string(),
        command: "kernel-check".into(),
        group: group.label().to_string(),
        seed: config.seed,
        tol: config.tol,
        budget: config.budget,
        depth,
        checks,
        certified,
        pass,
    };

    ensure_out_dir(&config.out_dir)?;
    write_json(&config.out_dir, "report.json", &report)?;
    for check in &report.checks {
        println!(
            "check {}: {} (measured {:.6e}, bound {:.6e}){}",
            check.name,
            if check.pass { "pass" } else { "FAIL" },
            check.measured,
            check.bound,
            if check.certified { "" } else { " [not certified]" },
        );
    }
    println!(
        "kernel-check on group {}: {}",
        report.group,
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { EXIT_PASS } else { EXIT_CONTRACT })
}

// ---------------------------------------------------------------------------
// partition-build
// ---------------------------------------------------------------------------

/// Everything needed to rebuild the model that produced an atom table.
/// Written as `model.json` next to `atoms.csv` and required by
/// `reich-audit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelRecord {
    pub schema_version: String,
    pub kind: ModelKind,
    pub window: IntRect,
    pub margin: f64,
    pub cyclic_length: f64,
    pub depth: usize,
    pub eps_punct: f64,
    pub r0: f64,
    pub seed: u64,
    pub delta: f64,
    /// Present exactly for punctured-window models.
    pub lattice: Option<Quasilattice>,
}

impl ModelRecord {
    fn new(config: &RunConfig, window: IntRect, lattice: Option<Quasilattice>) -> Self {
        ModelRecord {
            schema_version: SCHEMA_VERSION.to_string(),
            kind: config.model,
            window,
            margin: config.margin,
            cyclic_length: config.cyclic_length,
            depth: config.depth,
            eps_punct: config.eps_punct,
            r0: config.r0,
            seed: config.seed,
            delta: config.delta,
            lattice,
        }
    }

    fn build(&self) -> Result<SurfaceModel> {
        match self.kind {
            ModelKind::Disk => SurfaceModel::disk(self.window, self.margin),
            ModelKind::CyclicQuotient => SurfaceModel::cyclic_quotient(
                self.window,
                self.margin,
                self.cyclic_length,
                self.depth,
            ),
            ModelKind::Gamma2Quotient => {
                SurfaceModel::gamma2_quotient(self.window, self.margin, self.depth)
            }
            ModelKind::PuncturedWindow => {
                let lattice = self.lattice.as_ref().ok_or_else(|| {
                    Error::Config("model.json: punctured-window record without a lattice".into())
                })?;
                SurfaceModel::punctured_window(lattice, self.margin, self.eps_punct, self.r0)
            }
        }
    }

    /// Rebuilds the same model kind on a different (smaller) window, for
    /// fitting audit constants.
    fn build_on(&self, window: IntRect) -> Result<SurfaceModel> {
        match self.kind {
            ModelKind::PuncturedWindow => {
                let lattice = Quasilattice::generate(self.seed, self.delta, window)?;
                SurfaceModel::punctured_window(&lattice, self.margin, self.eps_punct, self.r0)
            }
            _ => {
                let mut on = self.clone();
                on.window = window;
                on.build()
            }
        }
    }
}

/// Summary of the built atom: its decay certificate and its audit against
/// the certificate at the sampled grid points.
#[derive(Debug, Clone, Serialize)]
pub struct AtomRow {
    pub k: i64,
    pub l: i64,
    pub decay_c: f64,
    pub reference_c: f64,
    pub center_abs: f64,
    pub moment_count: usize,
    pub envelope_violations: usize,
    pub pass: bool,
}

/// A cell whose atom could not be built; the run continues without it.
#[derive(Debug, Clone, Serialize)]
pub struct BuildFailure {
    pub k: i64,
    pub l: i64,
    pub error: String,
}

/// One partition-sum audit point: the truncated atom sum against the
/// window-indicator projection, with the allowed discrepancy
/// tail_bound + 2 tol.
#[derive(Debug, Clone, Serialize)]
pub struct SumAuditRow {
    pub re: f64,
    pub im: f64,
    pub sum_re: f64,
    pub sum_im: f64,
    pub projection_re: f64,
    pub projection_im: f64,
    pub difference: f64,
    pub allowed: f64,
    pub pass: bool,
}

/// Model facts echoed into reports.
#[derive(Debug, Clone, Serialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub window: IntRect,
    pub cells: usize,
    pub margin: f64,
    pub seed: u64,
    pub delta: f64,
    pub series_degree: usize,
    pub series_tail: f64,
    pub s0: f64,
}

impl ModelSummary {
    fn new(config: &RunConfig, model: &SurfaceModel) -> Self {
        ModelSummary {
            kind: model.kind(),
            window: model.window(),
            cells: model.window().count(),
            margin: model.margin(),
            seed: config.seed,
            delta: config.delta,
            series_degree: model.series_degree(),
            series_tail: model.series_tail(),
            s0: model.s0(),
        }
    }
}

/// Partition build report: per-atom certificates, build failures, and the
/// partition-sum audit.
#[derive(Debug, Clone, Serialize)]
pub struct PartitionReport {
    pub schema_version: String,
    pub command: String,
    pub model: ModelSummary,
    pub tol: f64,
    pub sum_radius: f64,
    pub atoms: Vec<AtomRow>,
    pub build_failures: Vec<BuildFailure>,
    pub sum_audit: Vec<SumAuditRow>,
    pub pass: bool,
}

/// Deterministic subsample of exactly `max` evenly spaced points (all of
/// them when there are fewer).
fn subsample(points: &[Complex64], max: usize) -> Vec<Complex64> {
    if points.len() <= max || max == 0 {
        return points.to_vec();
    }
    (0..max).map(|i| points[i * points.len() / max]).collect()
}

/// Audit points for partition sums: grid points around the window center
/// whose truncation disk stays inside the window (so the sum's cell set is
/// complete).
fn sum_audit_points(window: IntRect, radius: f64, max: usize) -> Vec<Complex64> {
    let interior = |z: Complex64| {
        let reach = radius + lattice::MAX_OFFSET + 1e-9;
        let k_lo = (z.re - reach).floor() as i64;
        let k_hi = (z.re + reach).ceil() as i64;
        let l_lo = (z.im - reach).floor() as i64;
        let l_hi = (z.im + reach).ceil() as i64;
        for k in k_lo..=k_hi {
            for l in l_lo..=l_hi {
                let near = (lattice::lattice_point(k, l) - z).norm() <= reach;
                if near && !window.contains(k, l) {
                    return false;
                }
            }
        }
        true
    };
    let central: Vec<Complex64> = partition::omega_grid(window, 1)
        .into_iter()
        .filter(|z| z.re.abs() <= 2.5 && z.im.abs() <= 2.5 && interior(*z))
        .collect();
    subsample(&central, max)
}

/// Builds all window atoms, audits them, and writes the table.
fn cmd_partition_build(config: RunConfig) -> CmdResult<i32> {
    let side = config.window.unwrap_or(DEFAULT_WINDOW_SIDE);
    let window =
        IntRect::floor_centered(side).map_err(|err| Failure::config(err.to_string()))?;
    let lattice = match config.model {
        ModelKind::PuncturedWindow => Some(
            Quasilattice::generate(config.seed, config.delta, window)
                .map_err(|err| Failure::config(err.to_string()))?,
        ),
        _ => None,
    };
    let record = ModelRecord::new(&config, window, lattice);
    let model = record.build().map_err(|err| Failure::config(err.to_string()))?;

    // Build per cell so one quadrature failure does not abort the run.
    let mut atoms = Vec::new();
    let mut build_failures = Vec::new();
    for (k, l) in window.indices() {
        match partition::build_atom(&model, k, l, config.tol) {
            Ok(atom) => atoms.push(atom),
            Err(err) => build_failures.push(BuildFailure {
                k,
                l,
                error: err.to_string(),
            }),
        }
    }

    // Decay certificate audit at a deterministic grid subsample.
    let decay_samples = subsample(&partition::omega_grid(window, 1), 32);
    let mut atom_rows = Vec::with_capacity(atoms.len());
    for atom in &atoms {
        match partition::pestimate_audit(&model, atom, &decay_samples) {
            Ok(report) => atom_rows.push(AtomRow {
                k: report.k,
                l: report.l,
                decay_c: report.fitted_c,
                reference_c: report.reference_c,
                center_abs: atom.center_abs,
                moment_count: atom.moments().len(),
                envelope_violations: report.violations,
                pass: report.pass,
            }),
            Err(err) => build_failures.push(BuildFailure {
                k: atom.k,
                l: atom.l,
                error: format!("decay audit: {err}"),
            }),
        }
    }

    // Partition sums against the window projection, where the truncation
    // disk is covered by built atoms.
    let mut sum_audit = Vec::new();
    if build_failures.is_empty() {
        for z in sum_audit_points(window, config.sum_radius, 25) {
            let row = partition::partition_sum(&model, &atoms, z, config.sum_radius).and_then(
                |sum| {
                    let projection = model.window_projection(z, config.tol)?;
                    Ok((sum, projection))
                },
            );
            match row {
                Ok((sum, projection)) => {
                    let difference = (sum.value - projection).norm();
                    let allowed = sum.tail_bound + 2.0 * config.tol;
                    sum_audit.push(SumAuditRow {
                        re: z.re,
                        im: z.im,
                        sum_re: sum.value.re,
                        sum_im: sum.value.im,
                        projection_re: projection.re,
                        projection_im: projection.im,
                        difference,
                        allowed,
                        pass: difference <= allowed,
                    });
                }
                Err(err) => build_failures.push(BuildFailure {
                    k: z.re.round() as i64,
                    l: z.im.round() as i64,
                    error: format!("sum audit at ({}, {}): {err}", z.re, z.im),
                }),
            }
        }
    }

    let pass = build_failures.is_empty()
        && atom_rows.iter().all(|row| row.pass)
        && sum_audit.iter().all(|row| row.pass);
    let report = PartitionReport {
        schema_version: SCHEMA_VERSION.to_string(),
        command: "partition-build".into(),
        model: ModelSummary::new(&config, &model),
        tol: config.tol,
        sum_radius: config.sum_radius,
        atoms: atom_rows,
        build_failures,
        sum_audit,
        pass,
    };

    ensure_out_dir(&config.out_dir)?;
    let atoms_path = config.out_dir.join("atoms.csv");
    let file = fs::File::create(&atoms_path)
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", atoms_path.display())))?;
    partition::write_atoms_csv(&atoms, file).map_err(Failure::run)?;
    write_json(&config.out_dir, "model.json", &record)?;
    write_json(&config.out_dir, "report.json", &report)?;

    println!(
        "partition-build: {} atoms on {} cells, {} build failures, {} sum-audit points",
        report.atoms.len(),
        report.model.cells,
        report.build_failures.len(),
        report.sum_audit.len()
    );
    println!(
        "partition-build: {}",
        if report.pass { "pass" } else { "FAIL" }
    );
    Ok(if report.pass { EXIT_PASS } else { EXIT_CONTRACT })
}

// ---------------------------------------------------------------------------
// reich-audit
// ---------------------------------------------------------------------------

fn window_side(window: IntRect) -> i64 {
    window.k_max - window.k_min + 1
}

/// Loads atoms and model record, fits constants on a small window, runs the
/// audit, and writes the report and condition tables.
fn cmd_reich_audit(config: RunConfig) -> CmdResult<i32> {
    for &k in &config.k_list {
        if !(k >= 100.0) {
            return Err(Failure::config(format!(
                "k_list entry {k} below 100; condition-3 certificates need K >= 100"
            )));
        }
    }

    let dir = &config.out_dir;
    let model_path = dir.join("model.json");
    let atoms_path = dir.join("atoms.csv");
    if !model_path.exists() || !atoms_path.exists() {
        return Err(Failure::config(format!(
            "no atom table in {}: run partition-build first",
            dir.display()
        )));
    }

    let record: ModelRecord = serde_json::from_str(
        &fs::read_to_string(&model_path)
            .map_err(|err| Failure::io(format!("cannot read {}: {err}", model_path.display())))?,
    )
    .map_err(|err| {
        Failure::config(format!(
            "invalid {}: {err}; re-run partition-build",
            model_path.display()
        ))
    })?;
    if record.schema_version != SCHEMA_VERSION {
        return Err(Failure::config(format!(
            "{} has schema {} but this build expects {}; re-run partition-build",
            model_path.display(),
            record.schema_version,
            SCHEMA_VERSION
        )));
    }

    // The record describes what was built; the config must not silently
    // contradict it.
    let mut mismatches = Vec::new();
    if record.kind != config.model {
        mismatches.push(format!("model {:?} vs {:?}", config.model, record.kind));
    }
    if record.margin != config.margin {
        mismatches.push(format!("margin {} vs {}", config.margin, record.margin));
    }
    if record.seed != config.seed {
        mismatches.push(format!("seed {} vs {}", config.seed, record.seed));
    }
    if record.delta != config.delta {
        mismatches.push(format!("delta {} vs {}", config.delta, record.delta));
    }
    if let Some(side) = config.window {
        if side != window_side(record.window) {
            mismatches.push(format!(
                "window {side} vs built {}",
                window_side(record.window)
            ));
        }
    }
    if !mismatches.is_empty() {
        return Err(Failure::config(format!(
            "config disagrees with the built atoms ({}); re-run partition-build",
            mismatches.join(", ")
        )));
    }

    let model = record.build().map_err(Failure::run)?;
    let file = fs::File::open(&atoms_path)
        .map_err(|err| Failure::io(format!("cannot read {}: {err}", atoms_path.display())))?;
    let atoms = partition::read_atoms_csv(file).map_err(|err| {
        Failure::config(format!(
            "unreadable {}: {err}; re-run partition-build",
            atoms_path.display()
        ))
    })?;
    if atoms.len() != model.window().count() {
        return Err(Failure::config(format!(
            "atom table covers {} of {} window cells; re-run partition-build",
            atoms.len(),
            model.window().count()
        )));
    }

    // Fit the audit constants on a small window of the same model family,
    // then freeze them for the full audit.
    let fit_side = config.fit_window.min(window_side(record.window));
    let fit_rect = IntRect::floor_centered(fit_side).map_err(Failure::run)?;
    let constants = if fit_rect == model.window() {
        reich::fit_constants(&model, &atoms, &config.n_list, config.tol).map_err(Failure::run)?
    } else {
        let fit_model = record.build_on(fit_rect).map_err(Failure::run)?;
        let fit_atoms = partition::build_atoms(&fit_model, config.tol).map_err(Failure::run)?;
        reich::fit_constants(&fit_model, &fit_atoms, &config.n_list, config.tol)
            .map_err(Failure::run)?
    };

    let report = reich::reich_audit(
        &model,
        &atoms,
        &constants,
        &config.n_list,
        &config.k_list,
        config.tol,
    )
    .map_err(Failure::run)?;

    ensure_out_dir(dir)?;
    write_json(dir, "constants.json", &constants)?;
    write_json(dir, "report.json", &report)?;
    let c2_path = dir.join("condition2.csv");
    let file = fs::File::create(&c2_path)
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", c2_path.display())))?;
    reich::write_condition2_csv(&report.condition2_rows, file).map_err(Failure::run)?;
    let c3_path = dir.join("condition3.csv");
    let file = fs::File::create(&c3_path)
        .map_err(|err| Failure::io(format!("cannot write {}: {err}", c3_path.display())))?;
    reich::write_condition3_csv(&report.condition3, file).map_err(Failure::run)?;

    println!(
        "constants: c1 {:.6}, c2 {:.6}, d2 {:.6e}, n threshold {:.3}",
        constants.c1, constants.c2, constants.d2, constants.n_threshold
    );
    println!(
        "condition 1 (pointwise convergence): max deviation nonincreasing = {}",
        report.condition1_nonincreasing
    );
    match (report.condition2_log_slope, report.condition2_raw_log_slope) {
        (Some(weighted), Some(raw)) => println!(
            "condition 2 (gap integrals): weight-normalized slope {weighted:.3} (raw {raw:.3}), all cells bounded = {}",
            report.condition2_all_bounded
        ),
        _ => println!(
            "condition 2 (gap integrals): slope undefined, all cells bounded = {}",
            report.condition2_all_bounded
        ),
    }
    println!(
        "condition 3 (exceedance): nonincreasing = {}, all empty on grid = {}",
        report.condition3_nonincreasing, report.condition3_all_empty
    );
    for warning in &report.warnings {
        println!("warning: {warning}");
    }
    println!("reich-audit: {}", if report.pass() { "pass" } else { "FAIL" });
    Ok(if report.pass() { EXIT_PASS } else { EXIT_CONTRACT })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid_and_round_trips() {
        let config = RunConfig::default();
        config.validate().unwrap();
        let text = serde_json::to_string(&config).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, config);
    }

    #[test]
    fn empty_json_object_is_the_default_config() {
        let config: RunConfig = serde_json::from_str("{}").unwrap();
        assert_eq!(config, RunConfig::default());
    }

    #[test]
    fn unknown_config_fields_are_rejected() {
        let err = serde_json::from_str::<RunConfig>(r#"{"tolerance": 1e-6}"#).unwrap_err();
        assert!(err.to_string().contains("unknown field"));
    }

    #[test]
    fn validation_rejects_bad_values() {
        let bad = [
            RunConfig {
                margin: 1.0,
                ..RunConfig::default()
            },
            RunConfig {
                delta: 0.2,
                ..RunConfig::default()
            },
            RunConfig {
                n_list: vec![],
                ..RunConfig::default()
            },
            RunConfig {
                n_list: vec![0],
                ..RunConfig::default()
            },
            RunConfig {
                window: Some(0),
                ..RunConfig::default()
            },
            RunConfig {
                tol: 0.0,
                ..RunConfig::default()
            },
        ];
        for config in bad {
            assert!(config.validate().is_err());
        }
    }

    #[test]
    fn sum_audit_points_stay_clear_of_the_window_edge() {
        let window = IntRect::floor_centered(8).unwrap();
        let points = sum_audit_points(window, 1.0, 25);
        assert!(!points.is_empty());
        assert!(points.len() <= 25);
        for z in points {
            // Every cell within the truncation reach must be a window cell.
            for k in -6..=6i64 {
                for l in -6..=6i64 {
                    let d = (lattice::lattice_point(k, l) - z).norm();
                    if d <= 1.0 + lattice::MAX_OFFSET {
                        assert!(window.contains(k, l), "cell ({k},{l}) near {z}");
                    }
                }
            }
        }
    }

    #[test]
    fn sum_audit_points_for_tiny_windows_are_empty() {
        let window = IntRect::floor_centered(1).unwrap();
        assert!(sum_audit_points(window, 1.0, 25).is_empty());
    }

    #[test]
    fn subsample_is_deterministic_and_bounded() {
        let points: Vec<Complex64> = (0..100)
            .map(|i| Complex64::new(i as f64, 0.0))
            .collect();
        let a = subsample(&points, 25);
        let b = subsample(&points, 25);
        assert_eq!(a.len(), b.len());
        assert!(a.len() <= 25);
        assert_eq!(a, b);
        assert_eq!(subsample(&points, 200).len(), 100);
    }

    #[test]
    fn model_record_round_trips_and_rebuilds() {
        let config = RunConfig::default();
        let window = IntRect::floor_centered(3).unwrap();
        let lattice = Quasilattice::generate(config.seed, config.delta, window).unwrap();
        let record = ModelRecord::new(&config, window, Some(lattice));
        let text = serde_json::to_string(&record).unwrap();
        let back: ModelRecord = serde_json::from_str(&text).unwrap();
        let a = record.build().unwrap();
        let b = back.build().unwrap();
        assert_eq!(a.window(), b.window());
        assert_eq!(a.punctures(), b.punctures());
    }
}
