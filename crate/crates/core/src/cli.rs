//! Command-line front end. Exit codes: 0 success, 1 check failure or solver
//! failure, 2 usage or configuration error.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::diagnostics::{
    format_significant, reduced_model, run_experiment, run_table1, train, DecayReport, Table1, Table1Row,
    TrainingOptions,
};
use crate::error::{Error, Result};
use crate::galerkin::checks::NORM_EQUIVALENCE_BOUNDS;
use crate::galerkin::{build_space, certify_norm_equivalence, check_compatibility, Discretization, GalerkinSystem, Operators};
use crate::mor::{check_reduced_compatibility, reduce_quadrature, save_basis};
use crate::solvers::{endpoint_pressures, solve_stationary, Forcing};

#[derive(Debug, Parser)]
#[command(name = "pipewave", version, about = "Damped wave propagation on pipe networks")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(short, long)]
    pub config: Option<PathBuf>,
    /// Dotted-path override, e.g. `--set discretization.h=0.05`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    /// Output file; overrides the config's `output`.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compatibility, norm-equivalence and damping checks.
    Check(Common),
    /// Stationary solution sampled along every edge.
    Steady(Common),
    /// Transient run, energies at the sample times.
    Run(Common),
    /// Decay table over all configured methods.
    Table1(Common),
    /// POD training and reduced model construction.
    Reduce {
        #[command(flatten)]
        common: Common,
        /// Also simulate the reduced model and append its row to the table file.
        #[arg(long)]
        evaluate: bool,
        /// Table file for `--evaluate`.
        #[arg(long, default_value = "table1.csv")]
        table: PathBuf,
    },
}

/// Exit status for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::Json(_)
        | Error::Parse(_)
        | Error::Io { .. }
        | Error::InvalidOptions(_)
        | Error::InvalidDamping(_)
        | Error::InvalidDiscretization(_)
        | Error::Network(_) => 2,
        _ => 1,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Check(c) => load(c).and_then(|cfg| cmd_check(&cfg)),
        Command::Steady(c) => load(c).and_then(|cfg| cmd_steady(&cfg)),
        Command::Run(c) => load(c).and_then(|cfg| cmd_run(&cfg)),
        Command::Table1(c) => load(c).and_then(|cfg| cmd_table1(&cfg, threads_from_env())),
        Command::Reduce { common, evaluate, table } => load(common).and_then(|cfg| cmd_reduce(&cfg, *evaluate, table)),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load(common: &Common) -> Result<RunConfig> {
    let mut cfg = RunConfig::load(common.config.as_deref(), &common.overrides)?;
    if let Some(o) = &common.output {
        cfg.output = Some(o.clone());
    }
    Ok(cfg)
}

/// `PIPEWAVE_THREADS`, if set to a positive integer.
pub fn threads_from_env() -> Option<usize> {
    std::env::var("PIPEWAVE_THREADS").ok()?.trim().parse().ok().filter(|&n| n > 0)
}

fn write_output(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn output_path(cfg: &RunConfig, default: &str) -> PathBuf {
    cfg.output.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn assemble(cfg: &RunConfig) -> Result<Operators> {
    Operators::assemble(&build_space(&cfg.network()?, cfg.discretization)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Status {
    Pass,
    Warn,
    Fail,
}

impl Status {
    fn label(self) -> &'static str {
        match self {
            Status::Pass => "PASS",
            Status::Warn => "WARN",
            Status::Fail => "FAIL",
        }
    }
}

/// Check report lines and the overall status.
pub fn check_report(cfg: &RunConfig) -> Result<(Vec<(Status, String, String)>, Status)> {
    let ops = assemble(cfg)?;
    let mut lines = Vec::new();
    let compat = check_compatibility(&ops);
    lines.push((
        if compat.passed() { Status::Pass } else { Status::Fail },
        "compatibility".to_string(),
        format!(
            "d/dx V = Q: {} (projection residual {:.1e}, rank {}/{}); constants in V: {} (kernel dim {}, residual {:.1e})",
            compat.derivative_image_equals_q,
            compat.projection_residual,
            compat.divergence_rank,
            compat.pressure_dim,
            compat.kernel_contained,
            compat.kernel_dim,
            compat.kernel_residual
        ),
    ));
    let (lo, hi) = NORM_EQUIVALENCE_BOUNDS;
    match certify_norm_equivalence(&ops) {
        Ok(r) => {
            let status = if r.satisfied {
                Status::Pass
            } else if r.lambda_min > 0.0 && r.lambda_max.is_finite() {
                Status::Warn
            } else {
                Status::Fail
            };
            let note = if status == Status::Warn { "; the norms are equivalent with these constants" } else { "" };
            lines.push((
                status,
                "norm equivalence".into(),
                format!("lambda in [{:.4}, {:.4}], required [{lo}, {hi}]{note}", r.lambda_min, r.lambda_max),
            ));
        }
        Err(e) => lines.push((Status::Fail, "norm equivalence".into(), e.to_string())),
    }
    let a1 = cfg.damping.check_assumption1(1.0);
    let status = if a1.holds() { Status::Pass } else { Status::Warn };
    lines.push((
        status,
        "damping".into(),
        format!(
            "d0 = {}, d1 = {}, d2 = {}, exponent {}{}",
            a1.d0,
            a1.d1,
            a1.d2,
            a1.growth_exponent,
            if a1.satisfies_d0_positive { "" } else { "; d0 = 0, uniform decay estimates do not apply" }
        ),
    ));
    let overall = lines.iter().map(|l| l.0).max().unwrap_or(Status::Pass);
    Ok((lines, overall))
}

pub fn cmd_check(cfg: &RunConfig) -> Result<i32> {
    let (lines, overall) = check_report(cfg)?;
    for (status, name, detail) in &lines {
        println!("{:<5} {name:<17} {detail}", status.label());
    }
    let warnings = lines.iter().filter(|l| l.0 == Status::Warn).count();
    println!("result: {} ({warnings} warnings)", overall.label().to_lowercase());
    Ok(if overall == Status::Fail { 1 } else { 0 })
}

/// Stationary state for the final boundary data as `edge,x,p,m` rows.
pub fn steady_csv(cfg: &RunConfig) -> Result<String> {
    let ops = assemble(cfg)?;
    let net = ops.space().network();
    let h = net.final_boundary_values();
    let (state, _) = solve_stationary(&ops, &cfg.damping, &Forcing::zero(&ops), &h, &cfg.newton)?;
    let traces = endpoint_pressures(&ops, &cfg.damping, &state, None);
    let space = ops.space();
    let local = space.expand_flux(&state.m);
    let mut out = String::from("edge,x,p,m\n");
    for (e, (el, edge)) in space.elements().iter().zip(net.edges()).enumerate() {
        let coeffs = space.edge_flux(&local, e);
        let pc = space.edge_pressure(&state.p, e);
        let nodes = el.nodes();
        let mut samples = vec![(0.0, traces[e].0)];
        for w in nodes.windows(2) {
            let s = 0.5 * (w[0] + w[1]);
            samples.push((s, el.eval_pressure(pc, s)));
        }
        samples.push((1.0, traces[e].1));
        for (s, p) in samples {
            let _ = writeln!(
                out,
                "{},{},{},{}",
                edge.id,
                format_significant(s * edge.length, 10),
                format_significant(p, 10),
                format_significant(el.eval_flux(coeffs, s), 10)
            );
        }
    }
    Ok(out)
}

pub fn cmd_steady(cfg: &RunConfig) -> Result<i32> {
    let csv = steady_csv(cfg)?;
    let path = output_path(cfg, "steady.csv");
    write_output(&path, &csv)?;
    println!("wrote {}", path.display());
    Ok(0)
}

/// `t,E_state,E_deriv` at the configured sample times.
pub fn run_csv(cfg: &RunConfig) -> Result<(String, DecayReport)> {
    let ops = assemble(cfg)?;
    let ramps = ops.space().network().ramps();
    let exp = run_experiment(&ops, &cfg.damping, &ramps, &cfg.solver_options(), cfg.table1.fit_window, cfg.energy_norm)?;
    let mut out = String::from("t,E_state,E_deriv\n");
    let r = &exp.report;
    for k in 0..r.sample_times.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            format_significant(r.sample_times[k], 10),
            format_significant(r.energies_state[k], 10),
            format_significant(r.energies_derivative[k], 10)
        );
    }
    Ok((out, exp.report))
}

pub fn cmd_run(cfg: &RunConfig) -> Result<i32> {
    let (csv, report) = run_csv(cfg)?;
    let path = output_path(cfg, "energy.csv");
    write_output(&path, &csv)?;
    match report.gamma {
        Some(g) => println!("gamma = {} over {:?}", format_significant(g, 5), report.fit_window),
        None => println!("gamma: not enough positive samples in {:?}", report.fit_window),
    }
    println!("wrote {}", path.display());
    Ok(0)
}

fn print_table(table: &Table1) {
    for row in &table.rows {
        let es: Vec<String> = row.energies.iter().map(|e| format_significant(*e, 5)).collect();
        println!(
            "{:<9} {:<6} {}  gamma {}  ({:.1} s)",
            row.method,
            row.param,
            es.join(" "),
            row.gamma.map_or("-".into(), |g| format_significant(g, 3)),
            row.wall_seconds
        );
    }
}

pub fn cmd_table1(cfg: &RunConfig, threads: Option<usize>) -> Result<i32> {
    let table = run_table1(&cfg.table1_config(threads)?)?;
    print_table(&table);
    let path = output_path(cfg, "table1.csv");
    write_output(&path, &table.to_csv())?;
    println!("wrote {}", path.display());
    Ok(0)
}

pub fn cmd_reduce(cfg: &RunConfig, evaluate: bool, table_path: &Path) -> Result<i32> {
    let mor = cfg.mor.clone().ok_or_else(|| Error::Config("`reduce` needs a `mor` fragment".into()))?;
    let net = cfg.network()?;
    let options = cfg.solver_options();
    let training_options =
        TrainingOptions { discretization: Discretization::Fem { h: mor.training_h }, samples: mor.training_samples };
    let training = train(&net, &cfg.damping, &options, &training_options)?;
    let mut model = reduced_model(&training, mor.n_sv)?;
    let compat = check_reduced_compatibility(&model);
    println!(
        "reduced pair: dim Q_H = {}, dim V_H = {}, compatible: {}",
        model.pressure_dim(),
        model.flux_dim(),
        compat.passed()
    );
    if mor.reduced_quadrature {
        let nv = model.flux_dim();
        let target = mor.quadrature_points.unwrap_or(nv * (nv + 1) / 2);
        let rule = reduce_quadrature(&model, target)?;
        let c = rule.certificate.clone();
        let n = rule.nodes.len();
        match model.install_quadrature(rule) {
            Ok(()) => println!("reduced quadrature: {n} points, lambda in [{:.4}, {:.4}]", c.lambda_min, c.lambda_max),
            Err(e) => println!("reduced quadrature rejected: {e}"),
        }
    }
    let basis_path = cfg.output.clone().or(mor.basis_file.clone()).unwrap_or_else(|| PathBuf::from("basis.csv"));
    let meta = format!("fem h={} samples={} t_end={}", mor.training_h, mor.training_samples, cfg.time.t_end);
    save_basis(&model, &basis_path, &meta)?;
    println!("wrote {}", basis_path.display());
    if !compat.passed() {
        return Ok(1);
    }
    if evaluate {
        let start = std::time::Instant::now();
        let exp = run_experiment(&model, &cfg.damping, &net.ramps(), &options, cfg.table1.fit_window, cfg.energy_norm)?;
        let row = Table1Row {
            method: "pod".into(),
            param: mor.n_sv.to_string(),
            times: exp.report.sample_times.clone(),
            energies: exp.report.energies_state.clone(),
            gamma: exp.report.gamma,
            gamma_derivative: exp.report.gamma_derivative,
            wall_seconds: start.elapsed().as_secs_f64(),
        };
        let table = Table1 { rows: vec![row] };
        print_table(&table);
        let csv = table.to_csv();
        let exists = table_path.exists();
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(table_path)
            .map_err(|source| Error::Io { path: table_path.display().to_string(), source })?;
        let text = if exists { csv.lines().skip(1).map(|l| format!("{l}\n")).collect() } else { csv };
        file.write_all(text.as_bytes()).map_err(|source| Error::Io { path: table_path.display().to_string(), source })?;
        println!("appended to {}", table_path.display());
    }
    Ok(0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config("x".into())), 2);
        assert_eq!(exit_code(&Error::InvalidDamping("x".into())), 2);
        assert_eq!(exit_code(&Error::RankExceeded { requested: 3, rank: 2 }), 1);
        assert_eq!(exit_code(&Error::NewtonDivergence { iterations: 5, residual: 1.0 }), 1);
    }

    #[test]
    fn check_statuses() {
        let (lines, overall) = check_report(&RunConfig::default()).unwrap();
        assert_eq!(overall, Status::Warn);
        assert_eq!(lines.iter().map(|l| l.0).collect::<Vec<_>>(), vec![Status::Pass, Status::Warn, Status::Warn]);
        let cfg = RunConfig {
            discretization: Discretization::Spectral { order: 5 },
            damping: crate::DampingModel::affine_power(1.0, 1.0, 1.0),
            ..RunConfig::default()
        };
        assert_eq!(check_report(&cfg).unwrap().1, Status::Pass);
    }

    #[test]
    fn steady_rows_cover_both_endpoints() {
        let csv = steady_csv(&RunConfig { discretization: Discretization::Fem { h: 0.5 }, ..RunConfig::default() }).unwrap();
        let e1: Vec<&str> = csv.lines().filter(|l| l.starts_with("e1,")).collect();
        assert_eq!(e1.len(), 4);
        assert!(e1[0].starts_with("e1,0,"));
        assert!(e1[3].starts_with("e1,1.000000000,"));
    }

    #[test]
    fn parse_errors_are_usage_errors() {
        assert_eq!(run(["pipewave", "nonsense"]), 2);
        assert_eq!(run(["pipewave", "--help"]), 0);
    }

    #[test]
    fn thread_variable() {
        std::env::set_var("PIPEWAVE_THREADS", "3");
        assert_eq!(threads_from_env(), Some(3));
        std::env::set_var("PIPEWAVE_THREADS", "zero");
        assert_eq!(threads_from_env(), None);
        std::env::remove_var("PIPEWAVE_THREADS");
    }
}
