use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use equiquench::analytic2::{delta_critical, equidistant_existence, gamma_prefactor, TwoLevelParams};
use equiquench::distances::{distance, kl_coherence_split, DistanceError, Measure};
use equiquench::lindblad::LindbladError;
use equiquench::phasemap::{parse_grid, sweep, Axis, Boundary, Pairing, PhaseMapError, SweepSpec};
use equiquench::quench::{
    classify_with, coherence_locus, find_equidistant_pair, regime_report, run_quench_with, time_unit_rate, QuenchError,
    Relaxation, DEFAULT_SYM_TOL, DEFAULT_T_EVAL,
};
use equiquench::system::{coherent_state, thermal_state, CoherentInitialSpec, LevelSystem, SystemError};
use equiquench::validate::{run_all, DEFAULT_SEED};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Validation(String),
    #[error("{0}")]
    Numerical(String),
    #[error("{0}")]
    Io(String),
    #[error("one or more suites failed")]
    SuiteFailure(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::SuiteFailure(_) => 1,
        }
    }
}

impl From<SystemError> for CliError {
    fn from(e: SystemError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<LindbladError> for CliError {
    fn from(e: LindbladError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<DistanceError> for CliError {
    fn from(e: DistanceError) -> Self {
        match e {
            DistanceError::DimensionMismatch(..) => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<QuenchError> for CliError {
    fn from(e: QuenchError) -> Self {
        match e {
            QuenchError::NotBracketed(_) | QuenchError::Distance(_) | QuenchError::Lindblad(_) => {
                CliError::Numerical(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

impl From<PhaseMapError> for CliError {
    fn from(e: PhaseMapError) -> Self {
        match e {
            PhaseMapError::Pool(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Validation(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "equiquench", version, about = "Equidistant thermal quenches of few-level open quantum systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distance-to-equilibrium time series for one initial state.
    Evolve(EvolveArgs),
    /// Thermal equidistant pair (and coherent locus for two levels).
    Equidistant(EquidistantArgs),
    /// Classify uphill vs downhill relaxation; two-level systems also get the dephasing regime report.
    QuenchCompare(CompareArgs),
    /// Three-level phase diagram over Γ02/Γ01 and Γ12/Γ01.
    PhaseDiagram(PhaseArgs),
    /// Run the seeded oracle and invariant suites.
    Validate(ValidateArgs),
    /// Print levels, rates, spectrum and two-level closed-form quantities.
    Inspect(InspectArgs),
    /// Run the reference fixtures and print a pass/fail table.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub beta0: f64,
    #[arg(long, default_value_t = 0.0)]
    pub r: f64,
    #[arg(long, default_value_t = 0.0)]
    pub phi: f64,
    #[arg(long, default_value = "kl")]
    pub measure: String,
    /// Final time in units of 1/Γ01.
    #[arg(long, default_value_t = DEFAULT_T_EVAL)]
    pub tmax: f64,
    #[arg(long, default_value_t = 200)]
    pub samples: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EquidistantArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long, default_value = "kl")]
    pub measure: String,
    #[arg(long)]
    pub distance: f64,
    /// Number of β0 samples for the coherent locus.
    #[arg(long, default_value_t = 201)]
    pub locus_points: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    #[arg(long)]
    pub system: PathBuf,
    #[arg(long)]
    pub distance: f64,
    #[arg(long, default_value = "kl,trace")]
    pub measure: String,
    /// Evaluation time in units of 1/Γ01.
    #[arg(long, default_value_t = DEFAULT_T_EVAL)]
    pub t_eval: f64,
    #[arg(long, default_value = "per-measure")]
    pub pairing: String,
}

#[derive(Debug, Args)]
pub struct PhaseArgs {
    /// Three-level file supplying levels and β; its rates are ignored.
    #[arg(long)]
    pub system: Option<PathBuf>,
    #[arg(long, default_value = "kl,trace,revkl,symkl")]
    pub measure: String,
    #[arg(long, default_value_t = 0.1)]
    pub distance: f64,
    #[arg(long, default_value = "0:3:61,0:3:61")]
    pub grid: String,
    #[arg(long, default_value = "per-measure")]
    pub pairing: String,
    #[arg(long, default_value_t = DEFAULT_T_EVAL)]
    pub t_eval: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Skip boundary extraction.
    #[arg(long)]
    pub no_boundaries: bool,
    #[arg(long)]
    pub svg: bool,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    #[arg(long)]
    pub system: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long, default_value = "fixtures/reference.json")]
    pub fixtures: PathBuf,
    /// Run only the fixture with this name.
    #[arg(long)]
    pub only: Option<String>,
}

pub fn dispatch(cmd: &Command) -> Result<String, CliError> {
    match cmd {
        Command::Evolve(a) => evolve(a),
        Command::Equidistant(a) => equidistant(a),
        Command::QuenchCompare(a) => quench_compare(a),
        Command::PhaseDiagram(a) => phase_diagram(a),
        Command::Validate(a) => validate(a),
        Command::Inspect(a) => inspect(a),
        Command::Reproduce(a) => crate::repro::reproduce(&a.fixtures, a.only.as_deref()),
    }
}

fn load_system(path: &Path) -> Result<LevelSystem, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    Ok(LevelSystem::from_json_str(&text)?)
}

fn measures(list: &str) -> Result<Vec<Measure>, CliError> {
    let m = Measure::parse_list(list).map_err(CliError::Validation)?;
    if m.is_empty() {
        return Err(CliError::Validation("--measure needs at least one measure".into()));
    }
    Ok(m)
}

fn positive(name: &str, x: f64) -> Result<f64, CliError> {
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(CliError::Validation(format!("{name} must be positive and finite, got {x}")))
    }
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn evolve(a: &EvolveArgs) -> Result<String, CliError> {
    let sys = load_system(&a.system)?;
    let ms = measures(&a.measure)?;
    positive("--tmax", a.tmax)?;
    if a.samples < 2 {
        return Err(CliError::Validation(format!("--samples must be at least 2, got {}", a.samples)));
    }
    if a.beta0.is_nan() {
        return Err(CliError::Validation("--beta0 is NaN".into()));
    }
    let rho0 = if a.r == 0.0 && a.phi == 0.0 {
        thermal_state(&sys, a.beta0)
    } else {
        coherent_state(&sys, CoherentInitialSpec { beta0: a.beta0, r: a.r, phi: a.phi })?
    };
    ensure_dir(&a.out)?;
    let relax = Relaxation::new(&sys)?;
    let t_max = a.tmax / time_unit_rate(&sys);
    let mut out = String::new();
    for m in ms {
        let rec = run_quench_with(&relax, &rho0, m, t_max, a.samples, &format!("beta0={}", a.beta0))?;
        let path = a.out.join(format!("evolve_{m}.csv"));
        write_file(&path, &rec.to_csv())?;
        writeln!(out, "first_distance.{m}={:.12}", rec.distances[0]).unwrap();
        writeln!(out, "final_distance.{m}={:.6e}", rec.distances[rec.distances.len() - 1]).unwrap();
        writeln!(out, "file.{m}={}", path.display()).unwrap();
        if m == Measure::Kl {
            let (coh, diag) = kl_coherence_split(&rho0, relax.equilibrium())?;
            writeln!(out, "kl_split.coherence={coh:.12}").unwrap();
            writeln!(out, "kl_split.diagonal={diag:.12}").unwrap();
        }
    }
    Ok(out)
}

fn equidistant(a: &EquidistantArgs) -> Result<String, CliError> {
    let sys = load_system(&a.system)?;
    let ms = measures(&a.measure)?;
    let mut out = String::new();
    for m in ms {
        let pair = find_equidistant_pair(&sys, m, a.distance)?;
        writeln!(out, "beta0_hot.{m}={:.12}", pair.beta0_hot).unwrap();
        writeln!(out, "beta0_cold.{m}={:.12}", pair.beta0_cold).unwrap();
        if sys.level_count() == 2 && a.distance > 0.0 {
            let r_at_beta = coherence_locus(&sys, m, a.distance, &[sys.beta()])?;
            if let Some(p) = r_at_beta.first() {
                writeln!(out, "r_at_beta.{m}={:.12}", p.r).unwrap();
            }
            if a.locus_points >= 2 {
                let n = a.locus_points;
                let grid: Vec<f64> = (0..n)
                    .map(|k| pair.beta0_hot + (pair.beta0_cold - pair.beta0_hot) * k as f64 / (n - 1) as f64)
                    .collect();
                let locus = coherence_locus(&sys, m, a.distance, &grid)?;
                let mut csv = String::from("beta0,r\n");
                for p in &locus {
                    writeln!(csv, "{:.16e},{:.16e}", p.beta0, p.r).unwrap();
                }
                ensure_dir(&a.out)?;
                let path = a.out.join(format!("locus_{m}.csv"));
                write_file(&path, &csv)?;
                writeln!(out, "locus.{m}={}", path.display()).unwrap();
            }
        }
    }
    Ok(out)
}

fn quench_compare(a: &CompareArgs) -> Result<String, CliError> {
    let sys = load_system(&a.system)?;
    let ms = measures(&a.measure)?;
    let pairing: Pairing = a.pairing.parse()?;
    positive("--t-eval", a.t_eval)?;
    let relax = Relaxation::new(&sys)?;
    let t_star = a.t_eval / time_unit_rate(&sys);
    let mut out = String::new();
    for &m in &ms {
        let pm = match pairing {
            Pairing::PerMeasure => m,
            Pairing::FixedPair(p) => p,
        };
        let pair = find_equidistant_pair(&sys, pm, a.distance)?;
        let v = classify_with(&relax, &pair, m, t_star, DEFAULT_SYM_TOL)?;
        writeln!(out, "pair.{m}={:.12},{:.12}", pair.beta0_hot, pair.beta0_cold).unwrap();
        writeln!(out, "verdict.{m}={}", v.kind.name()).unwrap();
        writeln!(out, "gap.{m}={:.6e}", v.gap).unwrap();
    }
    if sys.level_count() == 2 {
        let p = TwoLevelParams {
            omega0: sys.omega0(),
            beta: sys.beta(),
            beta0: sys.beta(),
            r: 0.0,
            phi: 0.0,
            gamma01: sys.gamma01(),
            dephasing: sys.dephasing(),
        };
        let kl_pair = find_equidistant_pair(&sys, Measure::Kl, a.distance)?;
        if let (Ok(gh), Ok(gc)) = (
            gamma_prefactor(kl_pair.beta0_hot, p.beta, p.omega0),
            gamma_prefactor(kl_pair.beta0_cold, p.beta, p.omega0),
        ) {
            writeln!(out, "gamma.hot={gh:.12}").unwrap();
            writeln!(out, "gamma.cold={gc:.12}").unwrap();
            writeln!(out, "gamma.decrease={:.12}", gh - gc).unwrap();
        }
        let rep = regime_report(&p, a.distance, a.t_eval)?;
        writeln!(out, "delta_c={:.12}", rep.delta_c).unwrap();
        writeln!(out, "regime={:?}", rep.regime).unwrap();
        for mr in &rep.measures {
            let m = mr.measure;
            writeln!(out, "fastest.{m}={:?}", mr.predicted).unwrap();
            writeln!(out, "confirmed.{m}={}", mr.confirmed).unwrap();
            for o in &mr.outcomes {
                writeln!(out, "distance.{m}.{:?}={:.6e}", o.candidate, o.distance).unwrap();
            }
        }
    }
    Ok(out)
}

fn phase_diagram(a: &PhaseArgs) -> Result<String, CliError> {
    let (x, y): (Axis, Axis) = parse_grid(&a.grid)?;
    let pairing: Pairing = a.pairing.parse()?;
    positive("--t-eval", a.t_eval)?;
    positive("--distance", a.distance)?;
    if a.jobs == 0 {
        return Err(CliError::Validation("--jobs must be at least 1".into()));
    }
    let (energies, beta) = match &a.system {
        Some(p) => {
            let sys = load_system(p)?;
            let e = sys.energies();
            if e.len() != 3 {
                return Err(CliError::Validation(format!("phase diagrams need a three-level system, got {} levels", e.len())));
            }
            ([e[0], e[1], e[2]], sys.beta())
        }
        None => ([0.0, 1.0, 2.0], 1.0),
    };
    let spec = SweepSpec { energies, beta, x, y, target: a.distance, measures: measures(&a.measure)?, pairing, t_eval: a.t_eval, sym_tol: DEFAULT_SYM_TOL };
    let mut diagram = sweep(&spec, a.jobs)?;
    if !a.no_boundaries {
        diagram = diagram.with_boundaries(a.jobs)?;
    }
    ensure_dir(&a.out)?;
    let tag = pairing.name();
    let grid_path = a.out.join(format!("phase_{tag}.csv"));
    write_file(&grid_path, &diagram.to_csv())?;
    let mut out = String::new();
    writeln!(out, "cells={}", diagram.cells.len()).unwrap();
    writeln!(out, "error_cells={}", diagram.error_cells()).unwrap();
    writeln!(out, "unanimity={:.6}", diagram.unanimity()).unwrap();
    if diagram.cells.len() == 1 {
        for (m, v) in spec.measures.iter().zip(&diagram.cells[0].verdicts) {
            let name = v.as_ref().map(|v| v.kind.name()).unwrap_or("Error");
            writeln!(out, "verdict.{m}={name}").unwrap();
        }
    }
    writeln!(out, "grid={}", grid_path.display()).unwrap();
    if !a.no_boundaries {
        let path = a.out.join(format!("boundaries_{tag}.csv"));
        write_file(&path, &diagram.boundaries_csv())?;
        for b in &diagram.boundaries {
            writeln!(out, "boundary_points.{}={}", b.measure, b.points.len()).unwrap();
        }
        if let Some((max, mean)) = boundary_spread(&diagram.boundaries) {
            writeln!(out, "boundary_spread.max={max:.6}").unwrap();
            writeln!(out, "boundary_spread.mean={mean:.6}").unwrap();
        }
        writeln!(out, "boundaries={}", path.display()).unwrap();
    }
    if a.svg {
        let path = a.out.join(format!("phase_{tag}.svg"));
        write_file(&path, &diagram.to_svg())?;
        writeln!(out, "svg={}", path.display()).unwrap();
    }
    Ok(out)
}

/// Largest and mean spread in x between measure boundaries, over rows where
/// every measure has exactly one boundary point.
fn boundary_spread(bs: &[Boundary]) -> Option<(f64, f64)> {
    if bs.len() < 2 {
        return None;
    }
    let ys: Vec<f64> = bs[0].points.iter().map(|p| p.y).collect();
    let mut spreads = Vec::new();
    for y in ys {
        let xs: Vec<f64> = bs
            .iter()
            .filter_map(|b| {
                let row: Vec<f64> = b.points.iter().filter(|p| p.y == y).map(|p| p.x).collect();
                (row.len() == 1).then(|| row[0])
            })
            .collect();
        if xs.len() == bs.len() {
            let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
            let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            spreads.push(hi - lo);
        }
    }
    if spreads.is_empty() {
        return None;
    }
    let max = spreads.iter().copied().fold(0.0, f64::max);
    Some((max, spreads.iter().sum::<f64>() / spreads.len() as f64))
}

fn validate(a: &ValidateArgs) -> Result<String, CliError> {
    let results = run_all(a.seed);
    let mut out = String::new();
    for s in &results {
        writeln!(
            out,
            "{} {:<58} worst={:.3e} tol={:.0e} cases={} {}",
            if s.passed { "PASS" } else { "FAIL" },
            s.name,
            s.worst,
            s.tolerance,
            s.cases,
            if s.passed { "" } else { &s.detail }
        )
        .unwrap();
    }
    let failed = results.iter().filter(|s| !s.passed).count();
    writeln!(out, "suites={}", results.len()).unwrap();
    writeln!(out, "suites_failed={failed}").unwrap();
    if failed == 0 {
        Ok(out)
    } else {
        Err(CliError::SuiteFailure(out))
    }
}

fn inspect(a: &InspectArgs) -> Result<String, CliError> {
    let sys = load_system(&a.system)?;
    let mut out = String::new();
    let eq = thermal_state(&sys, sys.beta());
    for (i, (e, p)) in sys.energies().iter().zip(eq.populations()).enumerate() {
        writeln!(out, "level.{i}={e}").unwrap();
        writeln!(out, "population.{i}={p:.12}").unwrap();
    }
    let n = sys.level_count();
    for i in 0..n {
        for j in 0..n {
            if i != j && sys.rate(i, j) > 0.0 {
                writeln!(out, "rate.{j}->{i}={:.12}", sys.rate(i, j)).unwrap();
            }
        }
    }
    let relax = Relaxation::new(&sys)?;
    for (k, z) in relax.decomposition().eigenvalues().iter().enumerate() {
        writeln!(out, "eigenvalue.{k}={:.12}{:+.12}i", z.re, z.im).unwrap();
    }
    if n == 2 {
        let p = TwoLevelParams { omega0: sys.omega0(), beta: sys.beta(), gamma01: sys.gamma01(), dephasing: sys.dephasing(), ..Default::default() };
        let lim = equidistant_existence(sys.beta(), sys.omega0());
        writeln!(out, "omega0={}", sys.omega0()).unwrap();
        writeln!(out, "rate_ratio={:.12}", sys.rate(1, 0) / sys.rate(0, 1)).unwrap();
        writeln!(out, "delta_c={:.12}", delta_critical(&p)).unwrap();
        writeln!(out, "limit_hot={:.12}", lim.limit_hot).unwrap();
        writeln!(out, "limit_cold={:.12}", lim.limit_cold).unwrap();
        writeln!(out, "limit_gap={:.3e}", lim.limit_cold - lim.limit_hot).unwrap();
        writeln!(out, "pair_guaranteed_up_to={:.12}", lim.pair_guaranteed_up_to).unwrap();
        writeln!(out, "cold_limit_binds={}", lim.cold_limit_binds).unwrap();
        let hot = distance(&thermal_state(&sys, 0.0), &eq, Measure::Kl)?;
        writeln!(out, "kl_at_beta0_zero={hot:.12}").unwrap();
    }
    Ok(out)
}
