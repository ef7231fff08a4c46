use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use redsim_core::designs::{bibd_order, find_planar_difference_set, Design};
use redsim_core::indicators::{analytic_indicators, table1_row, IndicatorSet};
use redsim_core::policies::PolicyKind;
use redsim_core::simqueue::{run_sim, sweep, Preset, SimConfig, SimMetrics};
use redsim_core::urnball::{
    analytic_lbf, empirical_indicators, occupancy_curves, run_experiment1, CurveRow,
};
use redsim_core::{Error, Rational};

use crate::args::{
    Command, DesignArgs, FigureArgs, Format, Grid, IndicatorArgs, OutputArgs, QueueArgs, RunConfig,
    SimulateArgs, SweepArgs, UrnArgs,
};
use crate::output::{Cell, Table};
use crate::CliError;

pub const INDICATOR_COLUMNS: [&str; 9] =
    ["policy", "n", "r", "T", "lbf", "rof", "rdf", "ex", "ex2"];

pub const URN_COLUMNS: [&str; 14] = [
    "policy",
    "n",
    "r",
    "T",
    "reps",
    "seed",
    "mean_min",
    "mean_max",
    "lbf_emp",
    "rof_emp",
    "rdf_emp",
    "lbf_analytic",
    "rof_analytic",
    "rdf_analytic",
];

pub const SIM_COLUMNS: [&str; 13] = [
    "policy",
    "n",
    "r",
    "mu1",
    "q",
    "p",
    "lambda",
    "rho",
    "mean_wq",
    "ci95",
    "mean_sojourn",
    "little_residual",
    "seed",
];

pub const FIG2_COLUMNS: [&str; 8] = [
    "n", "r", "T", "reps", "seed", "mean_min", "mean_max", "error",
];
pub const FIG3_COLUMNS: [&str; 8] = [
    "n",
    "r",
    "T",
    "reps",
    "seed",
    "lbf_emp",
    "lbf_analytic",
    "error",
];
pub const FIG4_COLUMNS: [&str; 11] = [
    "r",
    "n",
    "lbf_random",
    "lbf_rr",
    "lbf_bibd",
    "rof_random",
    "rof_rr",
    "rof_bibd",
    "rdf_random",
    "rdf_rr",
    "rdf_bibd",
];

pub fn dispatch(cfg: RunConfig, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    match cfg.command {
        Command::Design(a) => design(a, out),
        Command::Indicators(a) => indicators(a, out),
        Command::Urns(a) => urns(a, out),
        Command::Simulate(a) => simulate(a, out, err),
        Command::Sweep(a) => sweep_cmd(a, out, err),
        Command::Figures(a) => figures(a, out, err),
    }
}

fn write_to(
    path: &Path,
    f: impl FnOnce(&mut dyn Write) -> std::io::Result<()>,
) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut w = BufWriter::new(file);
    f(&mut w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::io(path, e))
}

fn emit(table: &Table, args: &OutputArgs, out: &mut dyn Write) -> Result<(), CliError> {
    match args.path() {
        Some(path) => write_to(path, |w| table.render(args.format(), w)),
        None => table
            .render(args.format(), out)
            .map_err(|e| CliError::Io(e.to_string())),
    }
}

fn design(a: DesignArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let ds = find_planar_difference_set(a.r)?;
    let design = Design::for_block_size(a.r)?;
    match a.out.format() {
        Format::Jsonl => {
            let doc = serde_json::json!({
                "n": design.n,
                "r": design.r,
                "lambda": 1,
                "difference_set": ds.residues(),
                "blocks": design.blocks,
            });
            let text = format!("{doc}\n");
            match a.out.path() {
                Some(p) => write_to(p, |w| w.write_all(text.as_bytes())),
                None => out
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(e.to_string())),
            }
        }
        Format::Csv => {
            let mut header = vec!["block".to_string()];
            header.extend((1..=a.r).map(|j| format!("point_{j}")));
            let mut t = Table {
                header,
                ..Table::default()
            };
            t.set("n", design.n);
            t.set("r", design.r);
            t.set("difference_set", join(ds.residues()));
            for (i, b) in design.blocks.iter().enumerate() {
                let mut row = vec![Cell::from(i)];
                row.extend(b.iter().map(|&p| Cell::from(p)));
                t.push(row);
            }
            emit(&t, &a.out, out)
        }
        Format::Table => {
            let text: String = design.blocks.iter().map(|b| join(b) + "\n").collect();
            match a.out.path() {
                Some(p) => write_to(p, |w| w.write_all(text.as_bytes())),
                None => out
                    .write_all(text.as_bytes())
                    .map_err(|e| CliError::Io(e.to_string())),
            }
        }
    }
}

fn join(xs: &[usize]) -> String {
    xs.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

fn default_n(n: Option<usize>, r: usize) -> Result<usize, CliError> {
    match n {
        Some(n) => Ok(n),
        None => Ok(bibd_order(r)?),
    }
}

fn indicator_cells(set: Option<&IndicatorSet<f64>>) -> Vec<Cell> {
    match set {
        Some(s) => vec![
            s.lbf.into(),
            s.rof.into(),
            s.rdf.into(),
            s.ex.into(),
            s.ex2.into(),
        ],
        None => vec![Cell::Empty; 5],
    }
}

fn indicators(a: IndicatorArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let n = default_n(a.n, a.r)?;
    let mut t = Table::new(&INDICATOR_COLUMNS);
    t.set("command", "indicators");
    t.set("n", n);
    t.set("r", a.r);
    t.set("T", a.t.map_or("inf".to_string(), |v| v.to_string()));
    let single = a.policy.0.len() == 1;
    for &policy in &a.policy.0 {
        let mut row = vec![
            policy.name().into(),
            n.into(),
            a.r.into(),
            a.t.map_or(Cell::Empty, Cell::Int),
        ];
        match analytic_indicators(policy, n, a.r, a.t) {
            Ok(set) => row.extend(indicator_cells(Some(&set))),
            Err(e) if !single => {
                t.notes.push(format!("{policy}: {e}"));
                row.extend(indicator_cells(None));
            }
            Err(e) => return Err(e.into()),
        }
        t.push(row);
    }
    if a.policy.0.contains(&PolicyKind::Random) {
        t.notes.push(match a.t {
            Some(_) => "random lbf is the large-T approximation with max{0, .} applied".to_string(),
            None => "random lbf is its T -> infinity limit".to_string(),
        });
    }
    emit(&t, &a.out, out)
}

/// Analytic ROF/RDF at `t` rounds, or the limit when the finite-T form
/// does not apply.
fn analytic_overlap(
    policy: PolicyKind,
    n: usize,
    r: usize,
    t: u64,
) -> (Option<IndicatorSet<f64>>, Option<String>) {
    match analytic_indicators(policy, n, r, Some(t)) {
        Ok(s) => (Some(s), None),
        Err(_) => match analytic_indicators(policy, n, r, None) {
            Ok(s) => (
                Some(s),
                Some(format!(
                    "{policy}: analytic rof/rdf are T -> infinity limits"
                )),
            ),
            Err(e) => (None, Some(format!("{policy}: no analytic values: {e}"))),
        },
    }
}

fn urns(a: UrnArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let n = default_n(a.n, a.r)?;
    let mut t = Table::new(&URN_COLUMNS);
    t.set("command", "urns");
    t.set("n", n);
    t.set("r", a.r);
    t.set("T", a.t);
    t.set("reps", a.reps);
    t.set("seed", a.seed);
    let single = a.policy.0.len() == 1;
    for &policy in &a.policy.0 {
        let mut row: Vec<Cell> = vec![
            policy.name().into(),
            n.into(),
            a.r.into(),
            a.t.into(),
            a.reps.into(),
            a.seed.into(),
        ];
        let measured = run_experiment1(policy, n, a.r, a.t, a.reps, a.seed)
            .and_then(|(occ, ov)| empirical_indicators(&occ, &ov).map(|ind| (occ, ind)));
        match measured {
            Ok((occ, ind)) => row.extend([
                occ.mean_min.into(),
                occ.mean_max.into(),
                ind.lbf.into(),
                ind.rof.into(),
                ind.rdf.into(),
            ]),
            Err(e) if !single => {
                t.notes.push(format!("{policy}: {e}"));
                t.push(
                    row.into_iter()
                        .chain(std::iter::repeat(Cell::Empty))
                        .take(URN_COLUMNS.len())
                        .collect(),
                );
                continue;
            }
            Err(e) => return Err(e.into()),
        }
        let (set, note) = analytic_overlap(policy, n, a.r, a.t);
        t.notes.extend(note);
        row.push(Cell::opt(analytic_lbf(policy, n, a.r, a.t)));
        row.push(Cell::opt(set.as_ref().map(|s| s.rof)));
        row.push(Cell::opt(set.as_ref().map(|s| s.rdf)));
        t.push(row);
    }
    emit(&t, &a.out, out)
}

fn need<T>(v: Option<T>, name: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Usage(format!("--{name} is required without --preset")))
}

fn base_config(q: &QueueArgs, policy: PolicyKind) -> Result<SimConfig, CliError> {
    let (pn, pr, pmu, pq, pp) = match q.preset {
        Some(p) => {
            let (n, r, mu1, q, p) = p.tuple();
            (Some(n), Some(r), Some(mu1), Some(q), Some(p))
        }
        None => (None, None, None, Some(1.0), Some(0.0)),
    };
    let cfg = SimConfig {
        seed: q.seed,
        warmup_jobs: q.warmup,
        measured_jobs: q.jobs,
        replications: q.reps,
        horizon: q.horizon,
        ..SimConfig::new(
            policy,
            need(q.n.or(pn), "n")?,
            need(q.r.or(pr), "r")?,
            need(q.mu1.or(pmu), "mu1")?,
            q.q.or(pq).unwrap_or(1.0),
            q.p_long.or(pp).unwrap_or(0.0),
            1.0,
        )
    };
    Ok(cfg)
}

fn echo_queue(t: &mut Table, command: &str, cfg: &SimConfig, preset: Option<Preset>) {
    t.set("command", command);
    if let Some(p) = preset {
        t.set("preset", p);
    }
    t.set("n", cfg.n);
    t.set("r", cfg.r);
    t.set("mu1", cfg.mu1);
    t.set("q", cfg.q);
    t.set("p", cfg.p);
    t.set("seed", cfg.seed);
    t.set("warmup", cfg.warmup_jobs);
    t.set("jobs", cfg.measured_jobs);
    t.set("reps", cfg.replications);
    if let Some(h) = cfg.horizon {
        t.set("horizon", h);
    }
}

fn sim_row(policy: PolicyKind, cfg: &SimConfig, m: Option<&SimMetrics>) -> Vec<Cell> {
    let mut row: Vec<Cell> = vec![
        policy.name().into(),
        cfg.n.into(),
        cfg.r.into(),
        cfg.mu1.into(),
        cfg.q.into(),
        cfg.p.into(),
        cfg.lambda.into(),
        cfg.rho().into(),
    ];
    match m {
        Some(m) => row.extend([
            m.mean_queuing_time.into(),
            m.ci_halfwidth.into(),
            m.mean_sojourn_time.into(),
            m.little_residual.into(),
        ]),
        None => row.extend(vec![Cell::Empty; 4]),
    }
    row.push(cfg.seed.into());
    row
}

fn warn_unstable(cfg: &SimConfig, err: &mut dyn Write) {
    if cfg.rho() >= 1.0 {
        let _ = writeln!(
            err,
            "warning: rho = {:.4} >= 1 at lambda = {}; the queue is unstable",
            cfg.rho(),
            cfg.lambda
        );
    }
}

fn simulate(a: SimulateArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let mut t = Table::new(&SIM_COLUMNS);
    for (i, &policy) in a.policy.0.iter().enumerate() {
        let mut cfg = base_config(&a.queue, policy)?;
        cfg.lambda = match (a.lambda, a.rho) {
            (Some(l), _) => l,
            (None, Some(rho)) => cfg.lambda_for_rho(rho),
            (None, None) => {
                return Err(CliError::Usage(
                    "one of --lambda or --rho is required".into(),
                ))
            }
        };
        if i == 0 {
            echo_queue(&mut t, "simulate", &cfg, a.queue.preset);
            t.set("lambda", cfg.lambda);
            warn_unstable(&cfg, err);
        }
        let m = run_sim(&cfg)?;
        t.push(sim_row(policy, &cfg, Some(&m)));
    }
    emit(&t, &a.out, out)
}

/// Runs a sweep into `t`, returning the first cell failure.
fn sweep_into(
    t: &mut Table,
    cfg: &SimConfig,
    policies: &[PolicyKind],
    lambdas: &[f64],
    err: &mut dyn Write,
) -> Option<Error> {
    for &l in lambdas {
        warn_unstable(
            &SimConfig {
                lambda: l,
                ..cfg.clone()
            },
            err,
        );
    }
    let mut first = None;
    for row in sweep(cfg, policies, lambdas) {
        let cell = SimConfig {
            policy: row.policy,
            lambda: row.lambda,
            ..cfg.clone()
        };
        match &row.result {
            Ok(m) => t.push(sim_row(row.policy, &cell, Some(m))),
            Err(e) => {
                t.notes
                    .push(format!("{} at lambda = {}: {e}", row.policy, row.lambda));
                t.push(sim_row(row.policy, &cell, None));
                first.get_or_insert(e.clone());
            }
        }
    }
    first
}

fn sweep_cmd(a: SweepArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let cfg = base_config(&a.queue, PolicyKind::Random)?;
    let lambdas = match &a.lambdas {
        Some(l) => l.clone(),
        None => {
            let (low, high) = Preset::lambda_grids(&cfg);
            match a.grid {
                Grid::Low => low,
                Grid::High => high,
                Grid::Both => low.into_iter().chain(high).collect(),
            }
        }
    };
    let mut t = Table::new(&SIM_COLUMNS);
    echo_queue(&mut t, "sweep", &cfg, a.queue.preset);
    t.set(
        "policies",
        a.policy
            .0
            .iter()
            .map(|p| p.name())
            .collect::<Vec<_>>()
            .join(","),
    );
    t.set(
        "lambdas",
        lambdas
            .iter()
            .map(|l| l.to_string())
            .collect::<Vec<_>>()
            .join(","),
    );
    let failure = sweep_into(&mut t, &cfg, &a.policy.0, &lambdas, err);
    emit(&t, &a.out, out)?;
    failure.map_or(Ok(()), |e| Err(e.into()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Figure {
    Occupancy,
    Balance,
    Indicators,
    Queue(Preset),
}

fn parse_figures(s: &str) -> Result<Vec<(u8, Figure)>, CliError> {
    let all = ["fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8"];
    let names: Vec<String> = if s.eq_ignore_ascii_case("all") {
        all.iter().map(|s| s.to_string()).collect()
    } else {
        s.split(',')
            .map(|p| p.trim().to_ascii_lowercase())
            .collect()
    };
    names
        .iter()
        .map(|name| {
            let fig = match name.as_str() {
                "fig2" => Figure::Occupancy,
                "fig3" => Figure::Balance,
                "fig4" => Figure::Indicators,
                other => Figure::Queue(other.parse().map_err(|_| {
                    CliError::Usage(format!(
                        "unknown figure {other:?} (expected fig2 ... fig8 or all)"
                    ))
                })?),
            };
            Ok((name[3..].parse().expect("figure number"), fig))
        })
        .collect()
}

fn figures(a: FigureArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError> {
    let figs = parse_figures(&a.preset)?;
    std::fs::create_dir_all(&a.out_dir).map_err(|e| CliError::io(&a.out_dir, e))?;
    let csv = OutputArgs {
        format: Some(Format::Csv),
        ..OutputArgs::default()
    };
    let mut curves: Option<Vec<CurveRow>> = None;
    let mut failure = None;
    for (num, fig) in figs {
        let mut written = Vec::new();
        match fig {
            Figure::Occupancy | Figure::Balance => {
                let rows = curves.get_or_insert_with(|| {
                    let n_max = a.n_list.iter().copied().max().unwrap_or(1);
                    occupancy_curves(
                        PolicyKind::Random,
                        &a.n_list,
                        1..=n_max,
                        a.t,
                        a.urn_reps,
                        a.seed,
                    )
                });
                let header: &[&str] = if fig == Figure::Occupancy {
                    &FIG2_COLUMNS
                } else {
                    &FIG3_COLUMNS
                };
                let mut t = Table::new(header);
                t.set("figure", format!("fig{num}"));
                t.set("policy", "random");
                t.set(
                    "n_list",
                    a.n_list
                        .iter()
                        .map(|n| n.to_string())
                        .collect::<Vec<_>>()
                        .join(","),
                );
                t.set("T", a.t);
                t.set("reps", a.urn_reps);
                t.set("seed", a.seed);
                for row in rows.iter() {
                    let mut cells: Vec<Cell> = vec![
                        row.n.into(),
                        row.r.into(),
                        a.t.into(),
                        a.urn_reps.into(),
                        a.seed.into(),
                    ];
                    if fig == Figure::Occupancy {
                        cells.extend([Cell::opt(row.mean_min), Cell::opt(row.mean_max)]);
                    } else {
                        cells.extend([Cell::opt(row.lbf_emp), Cell::opt(row.lbf_analytic)]);
                    }
                    cells.push(row.error.clone().map_or(Cell::Empty, Cell::Text));
                    t.push(cells);
                }
                written.push((format!("fig{num}.csv"), t));
            }
            Figure::Indicators => {
                let mut t = Table::new(&FIG4_COLUMNS);
                t.set("figure", "fig4");
                t.set("T", a.t);
                t.notes
                    .push("n = r(r-1)+1; lbf_random uses the large-T approximation at T".into());
                for r in 2..=a.r_max.max(2) {
                    let rows: Vec<IndicatorSet<f64>> =
                        [PolicyKind::Random, PolicyKind::RoundRobin, PolicyKind::Bibd]
                            .into_iter()
                            .map(|p| table1_row::<Rational>(p, r, Some(a.t)).map(|s| s.to_f64()))
                            .collect::<Result<_, _>>()?;
                    let mut cells: Vec<Cell> = vec![r.into(), bibd_order(r)?.into()];
                    cells.extend(rows.iter().map(|s| Cell::from(s.lbf)));
                    cells.extend(rows.iter().map(|s| Cell::from(s.rof)));
                    cells.extend(rows.iter().map(|s| Cell::from(s.rdf)));
                    t.push(cells);
                }
                written.push(("fig4.csv".to_string(), t));
            }
            Figure::Queue(preset) => {
                let mut cfg = SimConfig {
                    seed: a.seed,
                    warmup_jobs: a.warmup,
                    measured_jobs: a.jobs,
                    replications: a.reps,
                    ..preset.config(PolicyKind::Random)
                };
                if let Some(q) = a.q {
                    cfg.q = q;
                }
                let (low, high) = Preset::lambda_grids(&cfg);
                for (panel, grid) in [("low", low), ("high", high)] {
                    let mut t = Table::new(&SIM_COLUMNS);
                    t.set("figure", format!("fig{num}"));
                    t.set("panel", panel);
                    echo_queue(&mut t, "figures", &cfg, Some(preset));
                    if let Some(e) = sweep_into(&mut t, &cfg, &PolicyKind::ALL, &grid, err) {
                        failure.get_or_insert(e);
                    }
                    written.push((format!("fig{num}_{panel}.csv"), t));
                }
            }
        }
        for (name, t) in written {
            let path = a.out_dir.join(name);
            let args = OutputArgs {
                output: Some(path.clone()),
                ..csv.clone()
            };
            emit(&t, &args, out)?;
            writeln!(out, "{}", path.display()).map_err(|e| CliError::Io(e.to_string()))?;
        }
    }
    failure.map_or(Ok(()), |e| Err(e.into()))
}
