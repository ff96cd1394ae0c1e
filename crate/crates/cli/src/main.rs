use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use constructa::geom::{Point2, RigidTransform2, SymMat3};
use constructa::global::{critical_lines_2p2, critical_lines_next_point, emit_locus_1p1p1, CriticalLineSet, Distribution};
use constructa::local::{
    build_gramian_with, numerical_gramian, singular_direction_report, GramianOptions, GramianReport, SingularDirection,
};
use constructa::report::build_report;
use constructa::scenario::{load_scenario, scenario_to_json, synthesize_measurements, Scenario, SynthesisInfo};
use constructa::solver::{oracle_grid, solution_sets_agree, LocalizerRegistry, SolutionSet, SolverConfig, MULTISTART, ORACLE};

/// Global and local constructibility analysis for range-only localization.
#[derive(Debug, Parser)]
#[command(name = "constructa", version)]
struct Cli {
    /// Acceptance threshold on residuals (m).
    #[arg(long, global = true)]
    tol_accept: Option<f64>,
    /// Relative eigenvalue / singular-value rank threshold.
    #[arg(long, global = true)]
    tol_rank: Option<f64>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Half-width of the (dx, dy) search box (m).
    #[arg(long, global = true)]
    grid_extent: Option<f64>,
    /// Grid spacing in dx and dy (m).
    #[arg(long, global = true)]
    grid_cell: Option<f64>,
    /// Number of heading cells.
    #[arg(long, global = true)]
    phi_cells: Option<usize>,
    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Localizer used to find solutions (multistart, oracle, closed-form).
    #[arg(long, global = true, default_value = MULTISTART)]
    solver: String,
    /// Worker threads; 0 picks the number of cores.
    #[arg(long, global = true, env = "CONSTRUCTA_THREADS", default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Taxonomy, closed-form solutions, degenerate flags, critical lines and
    /// the Gramian at every solution.
    Analyze { scenario: PathBuf },
    /// Find every consistent roto-translation numerically.
    Localize {
        scenario: PathBuf,
        /// Also run the grid oracle and report agreement.
        #[arg(long)]
        oracle: bool,
    },
    /// Constructibility Gramian at a transform.
    Gramian {
        scenario: PathBuf,
        /// Transform as `dx,dy,phi`; found with the selected solver when omitted.
        #[arg(long, value_parser = parse_transform, allow_hyphen_values = true)]
        transform: Option<RigidTransform2>,
        /// Final point `x,y` in the world frame.
        #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
        final_point: Option<Point2>,
        /// Cross-check against the integrated unicycle sensitivity.
        #[arg(long)]
        numerical: bool,
    },
    /// Geometry as CSV for external plotting.
    Plotdata {
        scenario: PathBuf,
        what: PlotKind,
        /// Heading samples for the locus.
        #[arg(long, default_value_t = 720)]
        samples: usize,
        /// Prefix length for the critical lines of the next point.
        #[arg(long)]
        prefix: Option<usize>,
    },
    /// Fill in points and ranges of a scenario given by controls.
    Simulate {
        scenario: PathBuf,
        /// Truth transform `dx,dy,phi`; defaults to the scenario's truth.
        #[arg(long, value_parser = parse_transform, allow_hyphen_values = true)]
        truth: Option<RigidTransform2>,
        /// Standard deviation of gaussian range noise (m).
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Locus,
    CriticalLines,
    Solutions,
    ClusterMap,
}

fn parse_numbers<const N: usize>(text: &str) -> Result<[f64; N], String> {
    let v: Vec<f64> = text
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|e| format!("`{x}`: {e}")))
        .collect::<Result<_, _>>()?;
    v.try_into().map_err(|_| format!("expected {N} comma-separated numbers"))
}

fn parse_transform(text: &str) -> Result<RigidTransform2, String> {
    let [dx, dy, phi] = parse_numbers::<3>(text)?;
    Ok(RigidTransform2::new(dx, dy, phi))
}

fn parse_point(text: &str) -> Result<Point2, String> {
    let [x, y] = parse_numbers::<2>(text)?;
    Ok(Point2::new(x, y))
}

impl Cli {
    fn load(&self, path: &Path) -> Result<Scenario> {
        let mut s = load_scenario(path)?;
        if let Some(t) = self.tol_accept {
            s.tolerances.accept = t;
        }
        if let Some(t) = self.tol_rank {
            s.tolerances.rank = t;
        }
        Ok(s)
    }

    fn config(&self, s: &Scenario) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::from_tolerances(&s.tolerances);
        cfg.seed = self.seed;
        cfg.grid.extent = self.grid_extent.or(cfg.grid.extent);
        cfg.grid.cell = self.grid_cell.or(cfg.grid.cell);
        if let Some(n) = self.phi_cells {
            cfg.grid.phi_cells = n;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn localize(&self, s: &Scenario, cfg: &SolverConfig) -> Result<SolutionSet> {
        Ok(LocalizerRegistry::builtin().get(&self.solver)?.solve(s, cfg)?)
    }

    fn emit(&self, text: &str) -> Result<()> {
        match &self.out {
            Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
            None => {
                io::stdout().write_all(text.as_bytes())?;
                Ok(())
            }
        }
    }

    fn emit_json<T: Serialize>(&self, v: &T) -> Result<()> {
        self.emit(&(serde_json::to_string_pretty(v)? + "\n"))
    }
}

#[derive(Serialize)]
struct LocalizeOutput {
    solver: String,
    solutions: SolutionSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<SolutionSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    agree: Option<bool>,
}

#[derive(Serialize)]
struct NumericalCheck {
    gramian: SymMat3,
    max_abs_diff: f64,
    /// Difference relative to the largest closed-form eigenvalue.
    max_rel_diff: f64,
}

#[derive(Serialize)]
struct GramianOutput {
    transform: RigidTransform2,
    report: GramianReport,
    singular_directions: Vec<SingularDirection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    numerical: Option<NumericalCheck>,
}

fn run(cli: &Cli) -> Result<u8> {
    if cli.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("configuring worker threads")?;
    }
    match &cli.command {
        Command::Analyze { scenario } => {
            let s = cli.load(scenario)?;
            let report = build_report(&s, &cli.config(&s)?)?;
            cli.emit_json(&report)?;
            Ok(report.exit_code() as u8)
        }
        Command::Localize { scenario, oracle } => {
            let s = cli.load(scenario)?;
            let cfg = cli.config(&s)?;
            let solutions = cli.localize(&s, &cfg)?;
            let (oracle, agree) = if *oracle {
                let o = LocalizerRegistry::builtin().get(ORACLE)?.solve(&s, &cfg)?;
                let agree = solution_sets_agree(&solutions, &o, &cfg);
                (Some(o), Some(agree))
            } else {
                (None, None)
            };
            let unique = solutions.ind.is_unique();
            cli.emit_json(&LocalizeOutput {
                solver: cli.solver.clone(),
                solutions,
                oracle,
                agree,
            })?;
            Ok(if unique && agree != Some(false) { 0 } else { 2 })
        }
        Command::Gramian {
            scenario,
            transform,
            final_point,
            numerical,
        } => {
            let s = cli.load(scenario)?;
            let t = match transform {
                Some(t) => *t,
                None => {
                    let cfg = cli.config(&s)?;
                    cli.localize(&s, &cfg)?
                        .solutions
                        .first()
                        .map(|x| x.transform)
                        .ok_or_else(|| anyhow!("no transform found"))?
                }
            };
            let opts = GramianOptions {
                final_point: *final_point,
                ..Default::default()
            };
            let report = build_gramian_with(&s, t, &opts)?;
            let numerical = if *numerical {
                let ci = s
                    .controls
                    .as_ref()
                    .ok_or_else(|| anyhow!("--numerical needs `controls` and `sample_times` in the scenario"))?;
                let g = numerical_gramian(&ci.controls, &s, t)?;
                let diff = (0..3)
                    .flat_map(|i| (0..3).map(move |j| (i, j)))
                    .map(|(i, j)| (g.get(i, j) - report.gramian.get(i, j)).abs())
                    .fold(0.0, f64::max);
                Some(NumericalCheck {
                    gramian: g,
                    max_abs_diff: diff,
                    max_rel_diff: diff / report.eigenvalues[2].max(f64::MIN_POSITIVE),
                })
            } else {
                None
            };
            let code = if report.rank == 3 { 0 } else { 2 };
            cli.emit_json(&GramianOutput {
                transform: t,
                singular_directions: singular_direction_report(&report, &s, t),
                report,
                numerical,
            })?;
            Ok(code)
        }
        Command::Plotdata {
            scenario,
            what,
            samples,
            prefix,
        } => {
            let s = cli.load(scenario)?;
            let csv = plotdata(cli, &s, *what, *samples, *prefix)?;
            cli.emit(&csv)?;
            Ok(0)
        }
        Command::Simulate { scenario, truth, noise } => {
            let mut s = cli.load(scenario)?;
            if !(*noise >= 0.0 && noise.is_finite()) {
                bail!("--noise must be a finite value >= 0");
            }
            let t = truth
                .or(s.truth)
                .ok_or_else(|| anyhow!("no truth transform: pass --truth or set `truth` in the scenario"))?;
            s.measurements = Some(synthesize_measurements(&s, t, *noise, cli.seed));
            s.truth = Some(t);
            s.synthesis = Some(SynthesisInfo {
                noise_std: *noise,
                seed: cli.seed,
            });
            cli.emit(&(scenario_to_json(&s) + "\n"))?;
            Ok(0)
        }
    }
}

fn critical_lines(s: &Scenario, prefix: Option<usize>) -> Result<CriticalLineSet> {
    if let Some(k) = prefix {
        return Ok(critical_lines_next_point(s, k)?);
    }
    let n = s.n_measurements();
    if n >= 3 && Distribution::of(&s.prefix(3)).0 == [2, 1] {
        return Ok(critical_lines_2p2(s)?);
    }
    if n < 2 {
        bail!("critical lines need at least two measurements");
    }
    Ok(critical_lines_next_point(s, n - 1)?)
}

fn plotdata(cli: &Cli, s: &Scenario, what: PlotKind, samples: usize, prefix: Option<usize>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    match what {
        PlotKind::Locus => {
            let locus = emit_locus_1p1p1(s, samples)?;
            w.write_record(["piece", "branch", "phi", "x", "y"])?;
            for (i, piece) in locus.pieces.iter().enumerate() {
                for (branch, pts) in [("a", &piece.branch_a), ("b", &piece.branch_b)] {
                    for q in pts {
                        w.serialize((i, branch, q.phi, q.p2.x, q.p2.y))?;
                    }
                }
            }
        }
        PlotKind::CriticalLines => {
            let set = critical_lines(s, prefix)?;
            w.write_record(["line", "provenance", "solution_i", "solution_j", "px", "py", "ux", "uy"])?;
            for (i, l) in set.lines.iter().enumerate() {
                w.serialize((
                    i,
                    format!("{:?}", l.provenance),
                    l.pair.0,
                    l.pair.1,
                    l.line.point.x,
                    l.line.point.y,
                    l.line.direction.x,
                    l.line.direction.y,
                ))?;
            }
        }
        PlotKind::Solutions => {
            let cfg = cli.config(s)?;
            let set = cli.localize(s, &cfg)?;
            w.write_record(["index", "dx", "dy", "phi", "residual_norm", "jacobian_rank", "isolated"])?;
            for (i, x) in set.solutions.iter().enumerate() {
                let t = x.transform;
                w.serialize((i, t.dx, t.dy, t.phi, x.residual_norm, x.jacobian_rank, x.isolated))?;
            }
        }
        PlotKind::ClusterMap => {
            let grid = oracle_grid(s, &cli.config(s)?)?;
            w.write_record(["ix", "iy", "iphi", "dx", "dy", "phi", "max_residual", "component"])?;
            for c in &grid.cells {
                let t = grid.node(c.ix, c.iy, c.iphi);
                w.serialize((c.ix, c.iy, c.iphi, t.dx, t.dy, t.phi, c.max_residual, c.component))?;
            }
        }
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        // exit code 2 is reserved for ambiguous results
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
