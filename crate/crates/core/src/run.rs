//! Subcommand orchestration: builds the problem, runs the checks, writes
//! CSV/SVG artifacts and a plain-text report.

use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::certificate::{
    one_sided_lipschitz, verify_certificate, verify_cubic_lower_bound, verify_growth, Lattice,
};
use crate::config::RunConfig;
use crate::dynamics::{packed_energy, ModalState};
use crate::eigenbasis::compute_eigenbasis;
use crate::error::{BidomainError, Result};
use crate::estimates::{energy_dissipation_check, gronwall_bound_with, uniform_bound_check};
use crate::integrator::{uniform_samples, Trajectory};
use crate::ionic::ModelVariant;
use crate::output::{line_plot, read_csv, read_modal_state, write_modal_state, Cell, CsvTable, Series};
use crate::periodic::{ball_invariance_test, sample_ball, solve_periodic, PeriodicSolveReport};
use crate::problem::{stream_seed, Problem, Stream};
use crate::verification::{
    convergence_study, energy_budget, energy_identity_order, select_t0, standard_windows, uniqueness_test,
    weak_residual,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Subcommand {
    Assemble,
    Eigens,
    CheckAssumptions,
    SolveIvp,
    SolvePeriodic,
    VerifyEnergy,
    VerifyUniqueness,
    Convergence,
    EmitPlots,
}

impl Subcommand {
    pub const ALL: [Subcommand; 9] = [
        Subcommand::Assemble,
        Subcommand::Eigens,
        Subcommand::CheckAssumptions,
        Subcommand::SolveIvp,
        Subcommand::SolvePeriodic,
        Subcommand::VerifyEnergy,
        Subcommand::VerifyUniqueness,
        Subcommand::Convergence,
        Subcommand::EmitPlots,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Subcommand::Assemble => "assemble",
            Subcommand::Eigens => "eigens",
            Subcommand::CheckAssumptions => "check-assumptions",
            Subcommand::SolveIvp => "solve-ivp",
            Subcommand::SolvePeriodic => "solve-periodic",
            Subcommand::VerifyEnergy => "verify-energy",
            Subcommand::VerifyUniqueness => "verify-uniqueness",
            Subcommand::Convergence => "convergence",
            Subcommand::EmitPlots => "emit-plots",
        }
    }
}

impl fmt::Display for Subcommand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Subcommand {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Subcommand::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| format!("unknown subcommand `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    /// Reported-only checks never affect the exit code.
    pub asserted: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub subcommand: Subcommand,
    pub version: String,
    pub seed: u64,
    pub config_echo: String,
    pub timings: Vec<(String, f64)>,
    pub checks: Vec<Check>,
    pub artifacts: Vec<PathBuf>,
}

const ECHO_BEGIN: &str = "----- config -----";
const ECHO_END: &str = "----- end config -----";

impl RunReport {
    fn new(subcommand: Subcommand, config: &RunConfig, seed: u64) -> Self {
        RunReport {
            subcommand,
            version: VERSION.to_string(),
            seed,
            config_echo: config.to_ini(),
            timings: Vec::new(),
            checks: Vec::new(),
            artifacts: Vec::new(),
        }
    }

    fn check(&mut self, name: &str, pass: bool, asserted: bool, detail: String) {
        debug_assert!(self.checks.iter().all(|c| c.name != name), "duplicate check {name}");
        self.checks.push(Check {
            name: name.to_string(),
            pass,
            asserted,
            detail,
        });
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass || !c.asserted)
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "bidomain {} report", self.subcommand);
        let _ = writeln!(s, "version = {}", self.version);
        let _ = writeln!(s, "seed = {} (ChaCha8, one stream per consumer)", self.seed);
        let _ = writeln!(s, "{ECHO_BEGIN}\n{}{ECHO_END}", self.config_echo);
        s.push_str("timings (s):\n");
        for (name, t) in &self.timings {
            let _ = writeln!(s, "  {name:<24} {t:.3}");
        }
        s.push_str("checks:\n");
        for c in &self.checks {
            let status = match (c.pass, c.asserted) {
                (true, _) => "PASS",
                (false, true) => "FAIL",
                (false, false) => "NOTE",
            };
            let kind = if c.asserted { "asserted" } else { "reported" };
            let _ = writeln!(s, "  [{status}] {} ({kind}): {}", c.name, c.detail);
        }
        s.push_str("artifacts:\n");
        for a in &self.artifacts {
            let _ = writeln!(s, "  {}", a.display());
        }
        let _ = writeln!(s, "result = {}", if self.passed() { "pass" } else { "fail" });
        s
    }
}

/// The config block of a rendered report.
pub fn extract_config_echo(report: &str) -> Option<&str> {
    let start = report.find(ECHO_BEGIN)? + ECHO_BEGIN.len() + 1;
    let end = report[start..].find(ECHO_END)? + start;
    Some(&report[start..end])
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Overrides `output.directory`.
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub quiet: bool,
}

struct Ctx<'a> {
    out: PathBuf,
    report: &'a mut RunReport,
    plots: bool,
}

impl Ctx<'_> {
    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write(&mut self, name: &str, table: &CsvTable) -> Result<()> {
        let p = self.path(name);
        table.write(&p)?;
        self.report.artifacts.push(p);
        Ok(())
    }

    fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let p = self.path(name);
        std::fs::write(&p, text)?;
        self.report.artifacts.push(p);
        Ok(())
    }

    fn phase<T>(&mut self, name: &str, f: impl FnOnce(&mut Self) -> Result<T>) -> Result<T> {
        let start = Instant::now();
        let out = f(self)?;
        self.report.timings.push((name.to_string(), start.elapsed().as_secs_f64()));
        Ok(out)
    }
}

pub fn run(sub: Subcommand, config: RunConfig, opts: &RunOptions) -> Result<RunReport> {
    let out = opts.out.clone().unwrap_or_else(|| config.output.directory.clone());
    std::fs::create_dir_all(&out).map_err(|e| BidomainError::from(e).within("output"))?;
    let mut report = RunReport::new(sub, &config, opts.seed);
    let plots = config.output.plots;
    let mut ctx = Ctx {
        out,
        report: &mut report,
        plots,
    };
    if sub == Subcommand::EmitPlots {
        ctx.phase("emit-plots", emit_plots)?;
    } else {
        let problem = match sub {
            Subcommand::Convergence => {
                let k = config.solver.convergence_orders.iter().copied().max().unwrap_or(config.solver.order);
                Problem::build_with_order(config, opts.seed, Some(k.max(1)))?
            }
            _ => Problem::build(config, opts.seed)?,
        };
        ctx.report.timings.extend(problem.timings.iter().cloned());
        match sub {
            Subcommand::Assemble => ctx.phase("assemble", |c| assemble(c, &problem)),
            Subcommand::Eigens => ctx.phase("eigens", |c| eigens(c, &problem)),
            Subcommand::CheckAssumptions => ctx.phase("check-assumptions", |c| check_assumptions(c, &problem)),
            Subcommand::SolveIvp => ctx.phase("solve-ivp", |c| solve_ivp(c, &problem)),
            Subcommand::SolvePeriodic => ctx.phase("solve-periodic", |c| solve_periodic_cmd(c, &problem)),
            Subcommand::VerifyEnergy => ctx.phase("verify-energy", |c| verify_energy(c, &problem)),
            Subcommand::VerifyUniqueness => ctx.phase("verify-uniqueness", |c| verify_uniqueness(c, &problem)),
            Subcommand::Convergence => ctx.phase("convergence", |c| convergence(c, &problem)),
            Subcommand::EmitPlots => unreachable!(),
        }?;
    }
    let path = ctx.path(&format!("report-{sub}.txt"));
    report.artifacts.push(path.clone());
    std::fs::write(&path, report.render())?;
    if !opts.quiet {
        for c in &report.checks {
            let status = if c.pass { "ok" } else if c.asserted { "FAILED" } else { "note" };
            println!("{status:>6}  {}: {}", c.name, c.detail);
        }
        println!("report written to {}", path.display());
    }
    Ok(report)
}

fn e(x: f64) -> String {
    format!("{x:.3e}")
}

fn assemble(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let n = p.grid.len();
    let b = p.op.dense_form();
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    let asym = (&b - b.transpose()).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let kernel = p.op.form_apply(&vec![1.0; n]).iter().fold(0.0f64, |m, v| m.max(v.abs()));
    ctx.report.check(
        "bidomain form symmetric",
        asym <= 1e-10 * scale,
        true,
        format!("max |B - B^T| = {}, max |B| = {}", e(asym), e(scale)),
    );
    ctx.report.check(
        "constants in kernel",
        kernel <= 1e-10 * scale,
        true,
        format!("max |B 1| = {}", e(kernel)),
    );
    let dropped: f64 = p.forcing.dropped_means().iter().fold(0.0, |m, v| m.max(v.abs()));
    ctx.report.check(
        "current conservation",
        dropped <= 1e-12,
        false,
        format!("largest mean of s_i + s_e dropped before the solve: {}", e(dropped)),
    );

    let mut t = CsvTable::new("nodes", &["node", "x", "y", "mass", "sigma_i_11", "sigma_i_12", "sigma_i_22", "sigma_e_11", "sigma_e_12", "sigma_e_22", "source_mode_0"]);
    let src = p.forcing.components().first().map(|c| p.op.modified_source(&c.s_i, &c.s_e).s);
    for i in 0..n {
        let c = p.grid.coords(i);
        let (si, se) = (p.field.sigma_i[i], p.field.sigma_e[i]);
        t.push(vec![
            i.into(),
            c[0].into(),
            c[1].into(),
            p.op.mass()[i].into(),
            si.s11.into(),
            si.s12.into(),
            si.s22.into(),
            se.s11.into(),
            se.s12.into(),
            se.s22.into(),
            src.as_ref().map_or(0.0, |s| s[i]).into(),
        ]);
    }
    ctx.write("nodes.csv", &t)?;

    let mut t = CsvTable::new("operator", &["row", "col", "value"]);
    for i in 0..n {
        for j in 0..n {
            if b[(i, j)] != 0.0 {
                t.push(vec![i.into(), j.into(), b[(i, j)].into()]);
            }
        }
    }
    ctx.write("operator.csv", &t)
}

fn eigens(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let basis = &p.basis;
    let res = basis.residuals(&p.op);
    let mut t = CsvTable::new("eigenvalues", &["j", "lambda", "residual"]);
    for (j, (&l, &r)) in basis.eigenvalues.iter().zip(&res).enumerate() {
        t.push(vec![j.into(), l.into(), r.into()]);
    }
    ctx.write("eigenvalues.csv", &t)?;
    if p.config.output.eigenvectors {
        let mut header = vec!["node".to_string(), "x".into(), "y".into()];
        header.extend((0..basis.modes()).map(|j| format!("psi_{j}")));
        let mut t = CsvTable::with_header("eigenvectors", header);
        for i in 0..basis.nodes() {
            let c = p.grid.coords(i);
            let mut row: Vec<Cell> = vec![i.into(), c[0].into(), c[1].into()];
            row.extend((0..basis.modes()).map(|j| Cell::F(basis.vectors[(i, j)])));
            t.push(row);
        }
        ctx.write("eigenvectors.csv", &t)?;
    }
    let mut t = CsvTable::new("coercivity", &["quantity", "value"]);
    let co = &p.coercivity;
    for (k, v) in [
        ("alpha_probe", co.alpha),
        ("alpha_max_probe", co.alpha_max),
        ("continuity_probe", co.continuity),
        ("probes", co.probes as f64),
        ("alpha_span", p.alpha_span),
        ("alpha_used", p.alpha),
    ] {
        t.push(vec![k.into(), v.into()]);
    }
    ctx.write("coercivity.csv", &t)?;

    let defect = basis.orthonormality_defect();
    ctx.report.check("mass orthonormality", defect <= 1e-8, true, format!("max |Psi^T M Psi - I| = {}", e(defect)));
    let worst = res
        .iter()
        .zip(&basis.eigenvalues)
        .map(|(r, l)| r / (1.0 + l.abs()))
        .fold(0.0, f64::max);
    ctx.report.check(
        "eigen residuals",
        worst <= 1e-7,
        true,
        format!("max residual / (1 + lambda) = {}", e(worst)),
    );
    let l0 = basis.eigenvalues[0];
    ctx.report.check("kernel eigenvalue", l0.abs() <= 1e-8, true, format!("lambda_0 = {}", e(l0)));
    ctx.report.check(
        "coercivity (probe bound)",
        co.alpha > 0.0,
        false,
        format!(
            "alpha over {} probes = {}, continuity over probes = {}, exact on span = {}",
            co.probes,
            e(co.alpha),
            e(co.continuity),
            e(p.alpha_span)
        ),
    );
    Ok(())
}

fn check_assumptions(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let cert = &p.certificate;
    let lattice = Lattice::square(p.config.solver.lattice_half_width, p.config.solver.lattice_step);
    let mut t = CsvTable::new("certificate", &["name", "value"]);
    for (k, v) in [
        ("r", cert.r),
        ("p", cert.p as f64),
        ("c0", cert.c0),
        ("c1", cert.c1),
        ("c2", cert.c2),
        ("c3", cert.c3),
        ("c4", cert.c4),
        ("c5", cert.c5),
        ("c6", cert.c6),
        ("c7", cert.c7),
    ] {
        t.push(vec![k.into(), v.into()]);
    }
    for (k, v) in &cert.derivation {
        t.push(vec![format!("derivation.{k}").into(), (*v).into()]);
    }
    let c = &p.constants;
    for (k, v) in [("alpha", p.alpha), ("c21", c.c21), ("c22", c.c22), ("c23", c.c23), ("radius", p.radius)] {
        t.push(vec![format!("energy.{k}").into(), v.into()]);
    }
    ctx.write("certificate.csv", &t)?;

    let rep = verify_certificate(&p.model, cert, &lattice);
    let growth = verify_growth(&p.model, cert, &lattice);
    let lower = verify_cubic_lower_bound(&p.model, cert, &lattice);
    let mut t = CsvTable::new("assumption_checks", &["check", "value", "pass"]);
    t.push(vec!["lattice_min_margin".into(), rep.lattice_min.into(), rep.pass.into()]);
    t.push(vec!["exact_min_margin".into(), rep.exact_min.into(), rep.pass.into()]);
    t.push(vec!["origin_margin".into(), rep.origin_margin.into(), (rep.origin_margin >= 0.0).into()]);
    for (k, v, analytic) in [
        ("c3_lattice", growth.c3_lattice, cert.c3),
        ("c4_lattice", growth.c4_lattice, cert.c4),
        ("c5_lattice", growth.c5_lattice, cert.c5),
        ("c6_lattice", growth.c6_lattice, cert.c6),
        ("c7_lattice", growth.c7_lattice, cert.c7),
    ] {
        t.push(vec![k.into(), v.into(), (analytic >= v * (1.0 - 1e-12)).into()]);
    }
    t.push(vec!["cubic_lower_bound_min_margin".into(), lower.min_margin.into(), lower.pass.into()]);
    t.push(vec!["achieved_c1".into(), lower.achieved_c1.into(), (lower.achieved_c1 > 1.0).into()]);
    ctx.report.check(
        "dissipativity certificate",
        rep.pass,
        true,
        format!(
            "lattice min = {} at {:?}, exact min = {} at ({:.4}, {:.4})",
            e(rep.lattice_min),
            rep.lattice_argmin,
            e(rep.exact_min),
            rep.exact_argmin.0,
            rep.exact_argmin.1
        ),
    );
    ctx.report.check(
        "growth bounds",
        growth.pass,
        true,
        format!(
            "lattice C3..C7 = {}, {}, {}, {}, {}",
            e(growth.c3_lattice),
            e(growth.c4_lattice),
            e(growth.c5_lattice),
            e(growth.c6_lattice),
            e(growth.c7_lattice)
        ),
    );
    ctx.report.check(
        "cubic lower bound",
        lower.pass,
        true,
        format!("min margin = {}, achieved C1 = {}", e(lower.min_margin), lower.achieved_c1),
    );
    ctx.report.check(
        "C1 > 1",
        lower.achieved_c1 > 1.0,
        false,
        format!("achieved C1 = {} (the derivable coefficient)", lower.achieved_c1),
    );
    if p.model.variant == ModelVariant::FitzHughNagumo {
        let lip = one_sided_lipschitz(&p.model, &lattice)?;
        t.push(vec!["lambda_f".into(), lip.lambda_f.into(), true.into()]);
        t.push(vec![
            "lattice_min_slope".into(),
            lip.lattice_min_slope.into(),
            (-lip.lattice_min_slope <= lip.lambda_f * (1.0 + 1e-12)).into(),
        ]);
        ctx.report.check(
            "one-sided Lipschitz",
            -lip.lattice_min_slope <= lip.lambda_f + 1e-12,
            true,
            format!("lambda_f = {}, lattice min f' = {}", lip.lambda_f, lip.lattice_min_slope),
        );
    }
    ctx.write("assumption_checks.csv", &t)
}

fn modal_header(m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..m).map(|j| format!("alpha_{j}")));
    h.extend((0..m).map(|j| format!("beta_{j}")));
    h
}

fn modal_row(t: f64, y: &[f64]) -> Vec<Cell> {
    let mut row = vec![Cell::F(t)];
    row.extend(y.iter().map(|&v| Cell::F(v)));
    row
}

/// Nodes at which `u(t)` is plotted: both ends and the middle (1D), or the
/// corners and the centre (2D).
pub fn probe_nodes(p: &Problem) -> Vec<usize> {
    let c = p.grid.counts();
    if p.grid.dimension() == 1 {
        vec![0, c[0] / 2, c[0] - 1]
    } else {
        vec![
            p.grid.index(0, 0),
            p.grid.index(c[0] / 2, c[1] / 2),
            p.grid.index(c[0] - 1, c[1] - 1),
        ]
    }
}

fn write_probes(ctx: &mut Ctx<'_>, p: &Problem, traj: &Trajectory, name: &str) -> Result<()> {
    let nodes = probe_nodes(p);
    let m = p.basis.modes();
    let mut header = vec!["t".to_string()];
    for &i in &nodes {
        let c = p.grid.coords(i);
        header.push(if p.grid.dimension() == 1 {
            format!("u(x={:.4})", c[0])
        } else {
            format!("u(x={:.4};y={:.4})", c[0], c[1])
        });
    }
    let mut t = CsvTable::with_header("probes", header);
    for (tt, y) in traj.times.iter().zip(&traj.states) {
        let u = p.basis.reconstruct(&y[..m]);
        let mut row = vec![Cell::F(*tt)];
        row.extend(nodes.iter().map(|&i| Cell::F(u[i])));
        t.push(row);
    }
    ctx.write(name, &t)
}

fn solve_ivp(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let sys = p.system();
    let x0 = p.initial_state()?;
    let period = p.forcing.period();
    let t1 = p.config.solver.t1.unwrap_or(x0.time + period);
    if t1 <= x0.time {
        return Err(BidomainError::invalid("solver.t1", "must exceed the initial time"));
    }
    let count = ((t1 - x0.time) / period * p.config.solver.samples as f64).ceil().max(1.0) as usize;
    let times = uniform_samples(x0.time, t1, count);
    let traj = sys.integrate(&x0, &times, p.config.solver.tol)?;
    let r = p.constants.r;
    let e0 = packed_energy(&traj.states[0], r);
    let t0 = x0.time;
    let mut header = modal_header(p.basis.modes());
    header.extend(["E".to_string(), "bound".into(), "slack".into()]);
    let mut t = CsvTable::with_header("trajectory", header);
    let mut worst = f64::INFINITY;
    for (&tt, y) in traj.times.iter().zip(&traj.states) {
        let en = packed_energy(y, r);
        let bound = gronwall_bound_with(e0, |tau| p.forcing.dual_norm_sq(tau + t0), period, &p.constants, tt - t0)?;
        let slack = bound - en;
        worst = worst.min(slack / (1.0 + bound));
        let mut row = modal_row(tt, y);
        row.extend([Cell::F(en), Cell::F(bound), Cell::F(slack)]);
        t.push(row);
    }
    ctx.write("trajectory.csv", &t)?;
    write_probes(ctx, p, &traj, "trajectory_probes.csv")?;
    write_modal_state(&ctx.path("final_state.csv"), &ModalState::from_packed(traj.last(), t1))?;
    ctx.report.artifacts.push(ctx.path("final_state.csv"));
    ctx.report.check(
        "Gronwall envelope",
        worst >= -1e-9,
        true,
        format!(
            "min (bound - E)/(1 + bound) = {} over {} samples; {} steps, {} rejected",
            e(worst),
            traj.len(),
            traj.stats.steps,
            traj.stats.rejected
        ),
    );
    if ctx.plots {
        plot_energy(ctx, "trajectory.csv", "energy_vs_bound.svg")?;
        plot_probes(ctx, "trajectory_probes.csv", "u_probes_ivp.svg")?;
    }
    Ok(())
}

fn periodicity_defect(p: &Problem, rep: &PeriodicSolveReport) -> Result<f64> {
    let sys = p.system();
    let x = &rep.fixed_point;
    let period = p.forcing.period();
    let traj = sys.integrate(x, &[0.0, period, 2.0 * period], p.config.solver.tol)?;
    let y0 = x.packed();
    let scale = 1.0 + y0.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let defect = traj.states[1..]
        .iter()
        .map(|y| y.iter().zip(&y0).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())))
        .fold(0.0, f64::max);
    Ok(defect / scale)
}

fn solve_periodic_cmd(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let sys = p.system();
    let opts = p.periodic_options();
    let x0 = p.initial_state()?;
    let rep = solve_periodic(&sys, &x0, &opts).map_err(|e| e.within("periodic solve"))?;
    let r = p.constants.r;

    let mut t = CsvTable::new("periodic_history", &["iteration", "residual", "norm"]);
    for (i, (res, nrm)) in rep.residual_history.iter().zip(&rep.in_ball_history).enumerate() {
        t.push(vec![(i + 1).into(), (*res).into(), (*nrm).into()]);
    }
    ctx.write("periodic_history.csv", &t)?;
    write_modal_state(&ctx.path("fixed_point.csv"), &rep.fixed_point)?;
    ctx.report.artifacts.push(ctx.path("fixed_point.csv"));
    let mut header = modal_header(p.basis.modes());
    header.push("E".into());
    let mut t = CsvTable::with_header("orbit", header);
    for (&tt, y) in rep.trajectory.times.iter().zip(&rep.trajectory.states) {
        let mut row = modal_row(tt, y);
        row.push(Cell::F(packed_energy(y, r)));
        t.push(row);
    }
    ctx.write("orbit.csv", &t)?;
    write_probes(ctx, p, &rep.trajectory, "orbit_probes.csv")?;

    ctx.report.check(
        "periodic solve converged",
        rep.converged,
        true,
        format!(
            "residual {} after {} iterations (tol {}), damping {}",
            e(rep.residual),
            rep.iterations,
            e(opts.tol),
            rep.damping
        ),
    );
    let norm = rep.fixed_point.weighted_norm(r);
    ctx.report.check(
        "fixed point in B_R",
        norm <= p.radius,
        true,
        format!("|x*| = {}, R = {}", e(norm), e(p.radius)),
    );
    let defect = periodicity_defect(p, &rep)?;
    ctx.report.check(
        "periodicity defect",
        defect <= 1e-7,
        true,
        format!("max |y(T) - y(0)|, |y(2T) - y(0)| relative = {}", e(defect)),
    );

    let n = p.config.solver.ball_samples;
    if n > 0 {
        let ball = ball_invariance_test(
            &sys,
            p.radius,
            r,
            n,
            p.config.solver.tol.max(1e-9),
            p.config.solver.samples,
            stream_seed(p.seed, Stream::Ball),
            1e-3,
        )?;
        let mut t = CsvTable::new("ball_invariance", &["sample", "norm", "image_norm"]);
        for (i, (a, b)) in ball.samples.iter().enumerate() {
            t.push(vec![i.into(), (*a).into(), (*b).into()]);
        }
        ctx.write("ball_invariance.csv", &t)?;
        ctx.report.check(
            "ball invariance",
            ball.pass,
            true,
            format!(
                "max |S(x)| = {} over {} samples, R(1 + 1e-3) = {}",
                e(ball.max_image_norm),
                n,
                e(p.radius * (1.0 + 1e-3))
            ),
        );
    }
    if ctx.plots {
        plot_residuals(ctx)?;
        plot_probes(ctx, "orbit_probes.csv", "u_probes.svg")?;
    }
    Ok(())
}

fn load_or_solve(ctx: &Ctx<'_>, p: &Problem) -> Result<ModalState> {
    let path = ctx.path("fixed_point.csv");
    if path.exists() {
        let x = read_modal_state(&path)?;
        if x.modes() == p.basis.modes() {
            return Ok(x);
        }
    }
    let rep = solve_periodic(&p.system(), &p.initial_state()?, &p.periodic_options())?;
    if !rep.converged {
        return Err(BidomainError::Context {
            context: "periodic solve".into(),
            message: format!("stopped at residual {:e}", rep.residual),
        });
    }
    Ok(rep.fixed_point)
}

fn verify_energy(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let sys = p.system();
    let x = load_or_solve(ctx, p)?;
    let period = p.forcing.period();
    let samples = p.config.solver.samples;
    let times = uniform_samples(x.time, x.time + period, samples);
    let traj = sys.integrate(&x, &times, p.config.solver.tol)?;
    let c = &p.constants;

    let diss = energy_dissipation_check(&traj, &p.basis, &p.forcing, &p.norms, c);
    let e0 = packed_energy(&traj.states[0], c.r);
    let t0 = x.time;
    let mut t = CsvTable::new("energy", &["t", "E", "bound", "radius_sq", "dissipation_slack"]);
    for (i, (&tt, y)) in traj.times.iter().zip(&traj.states).enumerate() {
        let bound = gronwall_bound_with(e0, |tau| p.forcing.dual_norm_sq(tau + t0), period, c, tt - t0)?;
        let slack = if i == 0 || i + 1 == traj.len() { f64::NAN } else { diss.slack[i - 1] };
        t.push(vec![
            tt.into(),
            packed_energy(y, c.r).into(),
            bound.into(),
            (p.radius * p.radius).into(),
            slack.into(),
        ]);
    }
    ctx.write("energy.csv", &t)?;
    ctx.report.check(
        "dissipation inequality",
        diss.worst_slack >= 0.0,
        true,
        format!("worst slack {} at t = {:.4}", e(diss.worst_slack), diss.worst_time),
    );

    let start = select_t0(&traj, &sys, &p.norms);
    let budget = energy_budget(&traj, &sys, start)?;
    let storage = traj.states.iter().map(|y| packed_energy(y, 1.0)).fold(0.0, f64::max);
    let allowed = 1e-6 * (1.0 + storage);
    let mut t = CsvTable::new("energy_budget", &["t", "slack"]);
    for (&tt, &s) in budget.times.iter().zip(&budget.slack) {
        t.push(vec![tt.into(), s.into()]);
    }
    ctx.write("energy_budget.csv", &t)?;
    ctx.report.check(
        "energy identity",
        budget.max_abs_slack <= allowed,
        true,
        format!(
            "max |slack| from t0 = {:.4}: {} (budget {})",
            budget.t0,
            e(budget.max_abs_slack),
            e(allowed)
        ),
    );

    let study = energy_identity_order(&sys, &x, x.time + period, &p.config.solver.energy_steps)?;
    let mut t = CsvTable::new("energy_order", &["h", "max_abs_slack"]);
    for (h, err) in study.steps.iter().zip(&study.errors) {
        t.push(vec![(*h).into(), (*err).into()]);
    }
    ctx.write("energy_order.csv", &t)?;
    ctx.report.check(
        "energy identity order",
        (study.slope - 4.0).abs() <= 0.5,
        true,
        format!("log-log slope {:.3} (integrator order 4)", study.slope),
    );

    let (lhs, rhs) = uniform_bound_check(&traj, &sys, &p.norms, c);
    ctx.report.check(
        "uniform bound over one period",
        lhs <= rhs,
        true,
        format!("integral = {}, bound = {}", e(lhs), e(rhs)),
    );

    let extra = (p.basis.order() + 8).min(p.grid.len() - 1);
    let test_basis = compute_eigenbasis(&p.op, extra)?;
    let windows = standard_windows(&traj.times, 4);
    let wr = weak_residual(&traj, &sys, &test_basis, test_basis.modes(), &windows)?;
    let mut t = CsvTable::new("weak_residual", &["mode", "window", "u", "w", "in_span"]);
    let mut worst_in = 0.0f64;
    let mut worst_out = 0.0f64;
    for w in &wr {
        let in_span = w.mode < p.basis.modes();
        if in_span {
            worst_in = worst_in.max(w.u.max(w.w));
        } else {
            worst_out = worst_out.max(w.u.max(w.w));
        }
        t.push(vec![w.mode.into(), w.window.into(), w.u.into(), w.w.into(), in_span.into()]);
    }
    ctx.write("weak_residual.csv", &t)?;
    ctx.report.check(
        "weak residual",
        worst_in <= allowed,
        false,
        format!(
            "max over test modes in span = {}, beyond span (truncation) = {}",
            e(worst_in),
            e(worst_out)
        ),
    );
    if ctx.plots {
        plot_energy(ctx, "energy.csv", "energy_vs_bound.svg")?;
    }
    Ok(())
}

fn verify_uniqueness(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let sys = p.system();
    let (ta, tb) = p.config.solver.uniqueness_tols;
    let horizon = p.config.solver.t1.unwrap_or(p.forcing.period());
    let samples = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(p.seed, Stream::Uniqueness));
    let m = p.basis.modes();
    let mut detail = CsvTable::new("uniqueness", &["state", "t", "d", "d_refined"]);
    let mut summary = CsvTable::new(
        "uniqueness_summary",
        &["state", "rate", "rate_bound", "envelope_constant", "envelope_limit", "tolerance_ratio", "pass"],
    );
    let mut all_pass = true;
    let mut ratios = Vec::new();
    for s in 0..p.config.solver.uniqueness_states {
        let x0 = ModalState::from_packed(&sample_ball(&mut rng, m, p.constants.r, p.radius, false), 0.0);
        let a = uniqueness_test(&sys, &p.model, &x0, ta, tb, horizon, samples)?;
        let b = uniqueness_test(&sys, &p.model, &x0, ta / 10.0, tb / 10.0, horizon, samples)?;
        let max_a = a.difference_norms.iter().copied().fold(0.0, f64::max);
        let max_b = b.difference_norms.iter().copied().fold(0.0, f64::max);
        let ratio = max_a / max_b;
        ratios.push(ratio);
        all_pass &= a.pass && b.pass;
        for ((t, da), db) in a.times.iter().zip(&a.difference_norms).zip(&b.difference_norms) {
            detail.push(vec![s.into(), (*t).into(), (*da).into(), (*db).into()]);
        }
        summary.push(vec![
            s.into(),
            a.gronwall_rate.into(),
            a.rate_bound.into(),
            a.envelope_constant.into(),
            a.envelope_limit.into(),
            ratio.into(),
            (a.pass && b.pass).into(),
        ]);
    }
    ctx.write("uniqueness.csv", &detail)?;
    ctx.write("uniqueness_summary.csv", &summary)?;
    ctx.report.check(
        "uniqueness envelope",
        all_pass,
        true,
        format!(
            "{} random states in B_R, tolerances ({}, {}) and a decade tighter",
            p.config.solver.uniqueness_states,
            e(ta),
            e(tb)
        ),
    );
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    ctx.report.check(
        "quadratic tolerance scaling",
        lo >= 30.0 && hi <= 300.0,
        true,
        format!("difference ratio for a 10x tolerance change in [{lo:.1}, {hi:.1}], expected within [30, 300]"),
    );
    Ok(())
}

fn convergence(ctx: &mut Ctx<'_>, p: &Problem) -> Result<()> {
    let orders = &p.config.solver.convergence_orders;
    let rep = convergence_study(
        &p.op,
        &p.norms,
        &p.basis,
        &p.model,
        p.forcing.period(),
        &p.components,
        orders,
        &p.periodic_options(),
    )?;
    let mut t = CsvTable::new("convergence", &["k", "iterations", "residual", "increment"]);
    for (i, (k, s)) in rep.orders.iter().zip(&rep.solves).enumerate() {
        let inc = if i == 0 { f64::NAN } else { rep.increments[i - 1] };
        t.push(vec![(*k).into(), s.iterations.into(), s.residual.into(), inc.into()]);
    }
    ctx.write("convergence.csv", &t)?;
    if let Some(f) = &rep.failure {
        ctx.report.check("convergence study completed", false, true, f.clone());
    }
    let decreasing = rep.increments.len() + 1 == orders.len() && rep.increments.windows(2).all(|w| w[1] < w[0]);
    let incs: Vec<String> = rep.increments.iter().map(|v| e(*v)).collect();
    ctx.report.check(
        "increments decrease",
        decreasing,
        true,
        format!("L2(0,T;V) increments [{}]", incs.join(", ")),
    );
    let halving = rep.increments.windows(2).all(|w| w[1] <= 0.5 * w[0]);
    ctx.report.check(
        "increments halve per doubling",
        halving,
        false,
        format!("orders {orders:?}"),
    );
    Ok(())
}

fn emit_plots(ctx: &mut Ctx<'_>) -> Result<()> {
    let mut made = 0;
    if ctx.path("periodic_history.csv").exists() {
        plot_residuals(ctx)?;
        made += 1;
    }
    if ctx.path("orbit_probes.csv").exists() {
        plot_probes(ctx, "orbit_probes.csv", "u_probes.svg")?;
        made += 1;
    }
    if ctx.path("trajectory_probes.csv").exists() {
        plot_probes(ctx, "trajectory_probes.csv", "u_probes_ivp.svg")?;
        made += 1;
    }
    for src in ["energy.csv", "trajectory.csv"] {
        if ctx.path(src).exists() {
            plot_energy(ctx, src, "energy_vs_bound.svg")?;
            made += 1;
            break;
        }
    }
    if made == 0 {
        return Err(BidomainError::Context {
            context: "emit-plots".into(),
            message: format!(
                "no plottable CSVs in {} (run solve-periodic, solve-ivp or verify-energy first)",
                ctx.out.display()
            ),
        });
    }
    ctx.report.check("plots written", true, false, format!("{made} SVG files"));
    Ok(())
}

fn plot_residuals(ctx: &mut Ctx<'_>) -> Result<()> {
    let path = ctx.path("periodic_history.csv");
    let d = read_csv(&path)?;
    let it = d.f64_column("iteration", &path)?;
    let res = d.f64_column("residual", &path)?;
    let svg = line_plot("Fixed-point residual", "iteration", "residual", &[Series::new("residual", &it, &res)], true);
    ctx.write_text("residual_history.svg", &svg)
}

fn plot_probes(ctx: &mut Ctx<'_>, src: &str, name: &str) -> Result<()> {
    let path = ctx.path(src);
    let d = read_csv(&path)?;
    let t = d.f64_column("t", &path)?;
    let series = d.header[1..]
        .iter()
        .map(|h| Ok(Series::new(h, &t, &d.f64_column(h, &path)?)))
        .collect::<Result<Vec<_>>>()?;
    let svg = line_plot("Transmembrane potential at probe nodes", "t", "u", &series, false);
    ctx.write_text(name, &svg)
}

fn plot_energy(ctx: &mut Ctx<'_>, src: &str, name: &str) -> Result<()> {
    let path = ctx.path(src);
    let d = read_csv(&path)?;
    let t = d.f64_column("t", &path)?;
    let series = vec![
        Series::new("E(t)", &t, &d.f64_column("E", &path)?),
        Series::new("Gronwall bound", &t, &d.f64_column("bound", &path)?),
    ];
    let svg = line_plot("Energy and a-priori bound", "t", "E", &series, true);
    ctx.write_text(name, &svg)
}

/// Convenience for callers that already hold a config file path.
pub fn run_file(sub: Subcommand, config: &Path, opts: &RunOptions) -> Result<RunReport> {
    let cfg = crate::config::parse_config(config)?;
    run(sub, cfg, opts)
}
