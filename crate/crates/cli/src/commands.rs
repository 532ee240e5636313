//! The three subcommands. Each resolves flags against an optional config
//! file (flags win), runs the library pipeline inside the requested thread
//! pool, and renders text/CSV/JSON. Estimator infeasibility on real data is
//! a *reported* outcome with exit code 0; only broken inputs or a failed
//! computation exit nonzero.

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use manycov::design::{
    annihilator, prune_collinear, AnnihilatorRep, PruneReport, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL,
};
use manycov::inference::{bootstrap_ci, gaussian_interval, t_statistic, CiMethod};
use manycov::montecarlo::{run_monte_carlo, DgpSpec, MonteCarloConfig, SimulationReport};
use manycov::normal::normal_cdf;
use manycov::regression::fit_pipeline;
use manycov::variance::{compute_meat, sandwich, EstimatorKind};
use manycov::Error;

use crate::args::{CommonArgs, DiagnoseArgs, InputArgs, RegressArgs, SimulateArgs};
use crate::config_file::{pick, pick_list, pick_opt, FileConfig};
use crate::ingest::{ingest, Roles};
use crate::render::{
    csv_text, deliver, full, opt_sig6, quantile, sig6, table, to_json, Envelope, OutputFormat,
    SCHEMA_VERSION,
};
use crate::{numerical, Failure};

const REGRESS_KEYS: &[&str] = &[
    "input", "y", "x", "w", "factor", "interact", "estimators", "level", "bootstrap-b", "seed",
    "format", "out", "memory-cap", "threads",
];
const DIAGNOSE_KEYS: &[&str] = &[
    "input", "y", "x", "w", "factor", "interact", "format", "out", "memory-cap", "threads",
];
const SIMULATE_KEYS: &[&str] = &[
    "model", "n", "k", "units", "periods", "dim-z", "degree", "g", "beta", "hetero",
    "fixed-design", "s", "seed", "estimators", "methods", "level", "bootstrap-b", "format", "out",
    "threads",
];

// ---------------------------------------------------------------- shared

fn merge_common(args: &CommonArgs, cfg: &FileConfig) -> Result<(OutputFormat, Option<PathBuf>, Option<usize>), Failure> {
    let format_raw = pick_opt(args.format.clone(), cfg.get::<String>("format")?);
    let format = match format_raw {
        None => OutputFormat::Text,
        Some(s) => s.parse::<OutputFormat>().map_err(Failure::Usage)?,
    };
    let out = pick_opt(args.out.clone(), cfg.get::<PathBuf>("out")?);
    let threads = pick_opt(args.threads, cfg.get::<usize>("threads")?);
    Ok((format, out, threads))
}

fn merge_input(args: &InputArgs, cfg: &FileConfig) -> Result<(PathBuf, Roles, usize), Failure> {
    let input = pick_opt(args.input.clone(), cfg.get::<PathBuf>("input")?)
        .ok_or_else(|| Failure::Usage("--input is required".into()))?;
    let roles = Roles {
        y: pick_opt(args.y.clone(), cfg.get::<String>("y")?),
        x: pick_list(args.x.clone(), cfg.get_list("x")),
        w: pick_list(args.w.clone(), cfg.get_list("w")),
        factor: pick_list(args.factor.clone(), cfg.get_list("factor")),
        interact: pick_list(args.interact.clone(), cfg.get_list("interact")),
    };
    let memory_cap = pick(args.memory_cap, cfg.get::<usize>("memory-cap")?, DEFAULT_MAX_N);
    Ok((input, roles, memory_cap))
}

fn parse_estimators(names: &[String], default: &[EstimatorKind]) -> Result<Vec<EstimatorKind>, Failure> {
    if names.is_empty() {
        return Ok(default.to_vec());
    }
    let mut out: Vec<EstimatorKind> = Vec::with_capacity(names.len());
    for name in names {
        let kind: EstimatorKind = name.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        if out.contains(&kind) {
            return Err(Failure::Usage(format!("estimator '{kind}' listed more than once")));
        }
        out.push(kind);
    }
    Ok(out)
}

fn parse_methods(names: &[String]) -> Result<Vec<CiMethod>, Failure> {
    let mut out: Vec<CiMethod> = Vec::with_capacity(names.len());
    for name in names {
        let m: CiMethod = name.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
        if out.contains(&m) {
            return Err(Failure::Usage(format!("method '{m}' listed more than once")));
        }
        out.push(m);
    }
    Ok(out)
}

fn check_level(level: f64) -> Result<(), Failure> {
    if level.is_finite() && 0.0 < level && level < 1.0 {
        Ok(())
    } else {
        Err(Failure::Usage(format!("--level must lie strictly in (0,1), got {level}")))
    }
}

/// Run `body` inside a dedicated pool when `--threads` was given.
fn run_in_pool<T: Send>(
    threads: Option<usize>,
    body: impl FnOnce() -> Result<T, Failure> + Send,
) -> Result<T, Failure> {
    match threads {
        None => body(),
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Failure::Usage(format!("cannot build a {t}-thread pool: {e}")))?
            .install(body),
    }
}

// ------------------------------------------------------------ regress

#[derive(Debug, Serialize, Deserialize)]
pub struct RegressEcho {
    pub input: String,
    pub y: String,
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub factor: Vec<String>,
    pub interact: Vec<String>,
    pub estimators: Vec<EstimatorKind>,
    pub level: f64,
    pub bootstrap_b: Option<usize>,
    pub seed: u64,
    pub memory_cap: usize,
}

/// One estimator × coordinate line of the coefficient table. `None` fields
/// render as JSON null / empty CSV cells / "-" in text.
#[derive(Debug, Serialize, Deserialize)]
pub struct EstimateRow {
    pub estimator: EstimatorKind,
    pub coord: usize,
    pub x: String,
    pub beta_hat: f64,
    pub se: Option<f64>,
    pub t: Option<f64>,
    pub p: Option<f64>,
    pub method: CiMethod,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    pub feasible: bool,
    pub note: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RegressResults {
    pub beta_hat: Vec<f64>,
    pub rows: Vec<EstimateRow>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct LeverageSummary {
    pub min: f64,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
    pub max: f64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnosticsBlock {
    pub n: usize,
    pub d: usize,
    pub k_input: usize,
    pub k_effective: usize,
    pub k_over_n: f64,
    /// Max leverage 1 − min_i M_ii; the feasibility statistic.
    pub mcal: f64,
    /// Conditioning bound for the weight system; absent when infeasible.
    pub varah_bound: Option<f64>,
    pub hck_feasible: bool,
    pub leverage: LeverageSummary,
    pub dropped_columns: Vec<String>,
    pub rows_dropped: usize,
}

fn diagnostics_block(
    rep: &AnnihilatorRep,
    prune: &PruneReport,
    w_names: &[String],
    rows_dropped: usize,
    d: usize,
) -> DiagnosticsBlock {
    let mut lev: Vec<f64> = rep.m_diag().iter().map(|m| 1.0 - m).collect();
    lev.sort_by(f64::total_cmp);
    let varah = rep.varah_bound();
    DiagnosticsBlock {
        n: rep.n,
        d,
        k_input: prune.k_input,
        k_effective: prune.k_effective,
        k_over_n: prune.k_effective as f64 / rep.n as f64,
        mcal: rep.mcal,
        varah_bound: varah.is_finite().then_some(varah),
        hck_feasible: rep.hck_feasible(),
        leverage: LeverageSummary {
            min: lev[0],
            q25: quantile(&lev, 0.25),
            median: quantile(&lev, 0.5),
            q75: quantile(&lev, 0.75),
            max: lev[lev.len() - 1],
        },
        dropped_columns: prune.dropped.iter().map(|&j| w_names[j].clone()).collect(),
        rows_dropped,
    }
}

fn infeasibility_note(e: &Error, mcal: f64) -> String {
    match e {
        Error::HckInfeasible { .. } | Error::SingularFactor { .. } => {
            format!("infeasible (𝓜ₙ = {})", sig6(mcal))
        }
        other => format!("infeasible: {other}"),
    }
}

pub fn regress(args: RegressArgs) -> Result<(), Failure> {
    let cfg = FileConfig::load(args.common.config.as_deref(), REGRESS_KEYS)?;
    let (input, roles, memory_cap) = merge_input(&args.input, &cfg)?;
    let estimators = parse_estimators(
        &pick_list(args.estimators, cfg.get_list("estimators")),
        &EstimatorKind::ALL,
    )?;
    let level = pick(args.level, cfg.get::<f64>("level")?, 0.95);
    check_level(level)?;
    let bootstrap_b = pick_opt(args.bootstrap_b, cfg.get::<usize>("bootstrap-b")?);
    if bootstrap_b == Some(0) {
        return Err(Failure::Usage("--bootstrap-b must be positive".into()));
    }
    let seed = pick(args.seed, cfg.get::<u64>("seed")?, 0);
    let (format, out, threads) = merge_common(&args.common, &cfg)?;
    if roles.y.is_none() {
        return Err(Failure::Usage("regress requires --y".into()));
    }
    if roles.x.is_empty() {
        return Err(Failure::Usage("regress requires at least one --x column".into()));
    }

    let parsed = ingest(&input, &roles)?;
    let rows_dropped = parsed.rows_dropped;
    let (data, x_names, w_names) = parsed.into_regression_data()?;

    let echo = RegressEcho {
        input: input.display().to_string(),
        y: roles.y.clone().unwrap(),
        x: roles.x.clone(),
        w: roles.w.clone(),
        factor: roles.factor.clone(),
        interact: roles.interact.clone(),
        estimators: estimators.clone(),
        level,
        bootstrap_b,
        seed,
        memory_cap,
    };

    run_in_pool(threads, move || {
        let (fit, prune) = fit_pipeline(&data, memory_cap, DEFAULT_PIVOT_RTOL).map_err(numerical)?;
        let rep = Arc::clone(&fit.annihilator);
        let n = fit.n;
        let d = fit.d;

        let mut rows: Vec<EstimateRow> = Vec::with_capacity(estimators.len() * d);
        for &kind in &estimators {
            match compute_meat(&fit, kind) {
                Ok(meat) => {
                    let sw = sandwich(&fit, &meat);
                    for j in 0..d {
                        let beta_j = fit.beta_hat[j];
                        let omega_jj = sw.omega[(j, j)];
                        let (se, t, p) = match t_statistic(beta_j, 0.0, omega_jj, n) {
                            Ok(t) => {
                                let se = (omega_jj / n as f64).sqrt();
                                (Some(se), Some(t), Some(2.0 * normal_cdf(-t.abs())))
                            }
                            Err(_) => (None, None, None),
                        };
                        let ci = match bootstrap_b {
                            Some(b) => bootstrap_ci(&data, kind, level, b, seed, j)
                                .map_err(numerical)?,
                            None => gaussian_interval(beta_j, omega_jj, n, level, kind)
                                .map_err(numerical)?,
                        };
                        let finite = |v: f64| v.is_finite().then_some(v);
                        rows.push(EstimateRow {
                            estimator: kind,
                            coord: j,
                            x: x_names[j].clone(),
                            beta_hat: beta_j,
                            se,
                            t,
                            p,
                            method: ci.method,
                            lower: finite(ci.lower),
                            upper: finite(ci.upper),
                            feasible: se.is_some(),
                            note: ci.reason,
                        });
                    }
                }
                Err(e) if e.is_infeasibility() => {
                    let note = infeasibility_note(&e, rep.mcal);
                    for j in 0..d {
                        rows.push(EstimateRow {
                            estimator: kind,
                            coord: j,
                            x: x_names[j].clone(),
                            beta_hat: fit.beta_hat[j],
                            se: None,
                            t: None,
                            p: None,
                            method: if bootstrap_b.is_some() {
                                CiMethod::Bootstrap
                            } else {
                                CiMethod::Gaussian
                            },
                            lower: None,
                            upper: None,
                            feasible: false,
                            note: Some(note.clone()),
                        });
                    }
                }
                Err(e) => return Err(numerical(e)),
            }
        }

        let diag = diagnostics_block(&rep, &prune, &w_names, rows_dropped, d);
        let results = RegressResults { beta_hat: fit.beta_hat.to_vec(), rows };
        let text = match format {
            OutputFormat::Json => to_json(&Envelope {
                version: SCHEMA_VERSION,
                command: "regress",
                config_echo: &echo,
                results: &results,
                diagnostics: &diag,
            })?,
            OutputFormat::Text => regress_text(&results, &diag, level),
            OutputFormat::Csv => regress_csv(&results)?,
        };
        deliver(&text, out.as_deref())
    })
}

fn feasibility_line(diag: &DiagnosticsBlock) -> String {
    if diag.hck_feasible {
        format!(
            "HCK feasible: 𝓜ₙ = {} < 1/2 (Varah bound {})",
            sig6(diag.mcal),
            opt_sig6(diag.varah_bound)
        )
    } else {
        format!("HCK infeasible: 𝓜ₙ = {} ≥ 1/2", sig6(diag.mcal))
    }
}

fn diagnostics_text(diag: &DiagnosticsBlock) -> String {
    let mut s = String::new();
    s.push_str(&format!(
        "design: n = {}, d = {}, K = {} (of {} before pruning), K/n = {}\n",
        diag.n,
        diag.d,
        diag.k_effective,
        diag.k_input,
        sig6(diag.k_over_n)
    ));
    s.push_str(&format!("{}\n", feasibility_line(diag)));
    s.push_str(&format!(
        "leverage: min {} / q25 {} / median {} / q75 {} / max {}\n",
        sig6(diag.leverage.min),
        sig6(diag.leverage.q25),
        sig6(diag.leverage.median),
        sig6(diag.leverage.q75),
        sig6(diag.leverage.max)
    ));
    if diag.rows_dropped > 0 {
        s.push_str(&format!("rows dropped for missing values: {}\n", diag.rows_dropped));
    }
    if !diag.dropped_columns.is_empty() {
        s.push_str(&format!(
            "columns pruned as collinear: {}\n",
            diag.dropped_columns.join(", ")
        ));
    }
    s
}

fn regress_text(results: &RegressResults, diag: &DiagnosticsBlock, level: f64) -> String {
    let header = ["x", "estimator", "beta", "se", "t", "p", "lower", "upper", "note"];
    let rows: Vec<Vec<String>> = results
        .rows
        .iter()
        .map(|r| {
            vec![
                r.x.clone(),
                r.estimator.to_string(),
                sig6(r.beta_hat),
                opt_sig6(r.se),
                opt_sig6(r.t),
                opt_sig6(r.p),
                opt_sig6(r.lower),
                opt_sig6(r.upper),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect();
    let method = results
        .rows
        .first()
        .map(|r| r.method.to_string())
        .unwrap_or_else(|| "gaussian".into());
    format!(
        "{}\ncoefficients ({}% {} intervals)\n{}",
        diagnostics_text(diag),
        level * 100.0,
        method,
        table(&header, &rows)
    )
}

fn regress_csv(results: &RegressResults) -> Result<String, Failure> {
    let header = [
        "coord", "x", "estimator", "method", "beta_hat", "se", "t", "p", "lower", "upper",
        "feasible", "note",
    ];
    let rows: Vec<Vec<String>> = results
        .rows
        .iter()
        .map(|r| {
            vec![
                r.coord.to_string(),
                r.x.clone(),
                r.estimator.to_string(),
                r.method.to_string(),
                full(Some(r.beta_hat)),
                full(r.se),
                full(r.t),
                full(r.p),
                full(r.lower),
                full(r.upper),
                r.feasible.to_string(),
                r.note.clone().unwrap_or_default(),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

// ------------------------------------------------------------ diagnose

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnoseEcho {
    pub input: String,
    pub y: Option<String>,
    pub x: Vec<String>,
    pub w: Vec<String>,
    pub factor: Vec<String>,
    pub interact: Vec<String>,
    pub memory_cap: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct DiagnoseResults {
    pub hck_feasible: bool,
    pub verdict: String,
}

pub fn diagnose(args: DiagnoseArgs) -> Result<(), Failure> {
    let cfg = FileConfig::load(args.common.config.as_deref(), DIAGNOSE_KEYS)?;
    let (input, roles, memory_cap) = merge_input(&args.input, &cfg)?;
    let (format, out, threads) = merge_common(&args.common, &cfg)?;

    let parsed = ingest(&input, &roles)?;
    let echo = DiagnoseEcho {
        input: input.display().to_string(),
        y: roles.y.clone(),
        x: roles.x.clone(),
        w: roles.w.clone(),
        factor: roles.factor.clone(),
        interact: roles.interact.clone(),
        memory_cap,
    };

    run_in_pool(threads, move || {
        let (pruned, prune) =
            prune_collinear(parsed.w.view(), DEFAULT_PIVOT_RTOL).map_err(numerical)?;
        let rep = annihilator(pruned.view(), memory_cap).map_err(numerical)?;
        let diag = diagnostics_block(
            &rep,
            &prune,
            &parsed.w_names,
            parsed.rows_dropped,
            parsed.x.ncols(),
        );
        let results = DiagnoseResults {
            hck_feasible: diag.hck_feasible,
            verdict: feasibility_line(&diag),
        };
        let text = match format {
            OutputFormat::Json => to_json(&Envelope {
                version: SCHEMA_VERSION,
                command: "diagnose",
                config_echo: &echo,
                results: &results,
                diagnostics: &diag,
            })?,
            OutputFormat::Text => diagnostics_text(&diag),
            OutputFormat::Csv => diagnose_csv(&diag)?,
        };
        deliver(&text, out.as_deref())
    })
}

fn diagnose_csv(diag: &DiagnosticsBlock) -> Result<String, Failure> {
    let rows = vec![
        vec!["n".to_string(), diag.n.to_string()],
        vec!["d".to_string(), diag.d.to_string()],
        vec!["k_input".to_string(), diag.k_input.to_string()],
        vec!["k_effective".to_string(), diag.k_effective.to_string()],
        vec!["k_over_n".to_string(), full(Some(diag.k_over_n))],
        vec!["mcal".to_string(), full(Some(diag.mcal))],
        vec!["varah_bound".to_string(), full(diag.varah_bound)],
        vec!["hck_feasible".to_string(), diag.hck_feasible.to_string()],
        vec!["leverage_min".to_string(), full(Some(diag.leverage.min))],
        vec!["leverage_q25".to_string(), full(Some(diag.leverage.q25))],
        vec!["leverage_median".to_string(), full(Some(diag.leverage.median))],
        vec!["leverage_q75".to_string(), full(Some(diag.leverage.q75))],
        vec!["leverage_max".to_string(), full(Some(diag.leverage.max))],
        vec!["dropped_columns".to_string(), diag.dropped_columns.join(";")],
        vec!["rows_dropped".to_string(), diag.rows_dropped.to_string()],
    ];
    csv_text(&["key", "value"], &rows)
}

// ------------------------------------------------------------ simulate

#[derive(Debug, Serialize)]
struct SimulateDiagnostics {
    n: usize,
    k_nuisance: usize,
    elapsed_secs: f64,
}

pub fn simulate(args: SimulateArgs) -> Result<(), Failure> {
    let cfg = FileConfig::load(args.common.config.as_deref(), SIMULATE_KEYS)?;
    let model = pick_opt(args.model, cfg.get::<String>("model")?)
        .ok_or_else(|| Failure::Usage("--model is required (model1, panel, or plm)".into()))?;
    let seed = pick(args.seed, cfg.get::<u64>("seed")?, 1);
    let reps = pick_opt(args.s, cfg.get::<usize>("s")?)
        .ok_or_else(|| Failure::Usage("--s (number of replications) is required".into()))?;
    let beta = pick_opt(args.beta, cfg.get::<f64>("beta")?);
    let hetero = args.hetero || cfg.get_flag("hetero")?;
    let fixed_design = args.fixed_design || cfg.get_flag("fixed-design")?;
    let level = pick(args.level, cfg.get::<f64>("level")?, 0.95);
    check_level(level)?;
    let (format, out, threads) = merge_common(&args.common, &cfg)?;

    let need = |v: Option<usize>, what: &str| {
        v.ok_or_else(|| Failure::Usage(format!("model '{model}' needs --{what}")))
    };
    let dgp = match model.as_str() {
        "model1" => {
            let n = need(pick_opt(args.n, cfg.get("n")?), "n")?;
            let k = pick(args.k, cfg.get::<usize>("k")?, 0);
            let mut spec = manycov::dgp::Model1Spec::baseline(n, k, hetero, seed);
            if let Some(b) = beta {
                spec.beta = b;
            }
            DgpSpec::Model1(spec)
        }
        "panel" => {
            let units = need(pick_opt(args.units, cfg.get("units")?), "units")?;
            let periods = need(pick_opt(args.periods, cfg.get("periods")?), "periods")?;
            let mut spec = manycov::dgp::PanelSpec::baseline(units, periods, hetero, seed);
            if let Some(b) = beta {
                spec.beta = b;
            }
            DgpSpec::Panel(spec)
        }
        "plm" => {
            let n = need(pick_opt(args.n, cfg.get("n")?), "n")?;
            let dim_z = pick(args.dim_z, cfg.get::<usize>("dim-z")?, 10);
            let degree = pick(args.degree, cfg.get::<usize>("degree")?, 3);
            let mut spec = manycov::dgp::PlmSpec::baseline(n, dim_z, degree, seed);
            if let Some(b) = beta {
                spec.beta = b;
            }
            if let Some(g) = pick_opt(args.g, cfg.get::<String>("g")?) {
                spec.g = g.parse().map_err(|e: Error| Failure::Usage(e.to_string()))?;
            }
            DgpSpec::Plm(spec)
        }
        other => {
            return Err(Failure::Usage(format!(
                "unknown model '{other}' (expected model1, panel, or plm)"
            )))
        }
    };

    let mut mc = MonteCarloConfig::new(dgp, reps, seed);
    let estimators =
        parse_estimators(&pick_list(args.estimators, cfg.get_list("estimators")), &mc.estimators)?;
    mc.estimators = estimators;
    let methods = parse_methods(&pick_list(args.methods, cfg.get_list("methods")))?;
    if !methods.is_empty() {
        mc.methods = methods;
    }
    mc.level = level;
    mc.bootstrap_b = pick(args.bootstrap_b, cfg.get::<usize>("bootstrap-b")?, mc.bootstrap_b);
    mc.fixed_design = fixed_design;
    mc.validate().map_err(|e| Failure::Usage(e.to_string()))?;

    run_in_pool(threads, move || {
        let report = run_monte_carlo(&mc).map_err(numerical)?;
        let diag = SimulateDiagnostics {
            n: mc.dgp.n(),
            k_nuisance: match &mc.dgp {
                DgpSpec::Model1(s) => s.k,
                DgpSpec::Panel(s) => s.n_units,
                DgpSpec::Plm(s) => s.basis_dim(),
            },
            elapsed_secs: report.elapsed_secs,
        };
        let text = match format {
            OutputFormat::Json => to_json(&Envelope {
                version: SCHEMA_VERSION,
                command: "simulate",
                config_echo: &mc,
                results: &report,
                diagnostics: &diag,
            })?,
            OutputFormat::Text => simulate_text(&mc, &report),
            OutputFormat::Csv => simulate_csv(&report)?,
        };
        deliver(&text, out.as_deref())
    })
}

fn simulate_text(mc: &MonteCarloConfig, report: &SimulationReport) -> String {
    let mut s = format!(
        "simulate: n = {}, reps = {}, seed = {}, level = {}{}\n\n",
        mc.dgp.n(),
        report.reps,
        report.seed,
        sig6(report.level),
        if mc.fixed_design { ", fixed design" } else { "" }
    );

    let mut headers: Vec<&str> = vec!["estimator"];
    let method_names: Vec<String> = mc.methods.iter().map(|m| m.to_string()).collect();
    headers.extend(method_names.iter().map(String::as_str));

    for (title, pick_cell) in [
        ("coverage", true),
        ("average length", false),
    ] {
        let rows: Vec<Vec<String>> = mc
            .estimators
            .iter()
            .map(|&kind| {
                let mut row = vec![kind.to_string()];
                for &m in &mc.methods {
                    let cell = report.cell(kind, m);
                    let value = cell.map(|c| if pick_cell { c.coverage } else { c.avg_length });
                    row.push(match value {
                        Some(v) if v.is_finite() => sig6(v),
                        _ => "n/a".into(),
                    });
                }
                row
            })
            .collect();
        s.push_str(&format!("{title}\n{}\n", table(&headers, &rows)));
    }

    let mut failure_lines: Vec<String> = Vec::new();
    for cell in &report.cells {
        if cell.failures > 0 {
            let detail: Vec<String> = cell
                .failure_reasons
                .iter()
                .map(|(k, v)| format!("{k}: {v}"))
                .collect();
            failure_lines.push(format!(
                "{} × {}: {}/{} replications failed ({})",
                cell.estimator,
                cell.method,
                cell.failures,
                report.reps,
                detail.join("; ")
            ));
        }
    }
    if !failure_lines.is_empty() {
        s.push_str("failures\n");
        for line in failure_lines {
            s.push_str(&line);
            s.push('\n');
        }
    }
    s
}

fn simulate_csv(report: &SimulationReport) -> Result<String, Failure> {
    let header = [
        "estimator", "method", "successes", "failures", "covered", "coverage", "avg_length",
        "failure_reasons",
    ];
    let rows: Vec<Vec<String>> = report
        .cells
        .iter()
        .map(|c| {
            let reasons: Vec<String> =
                c.failure_reasons.iter().map(|(k, v)| format!("{k}:{v}")).collect();
            vec![
                c.estimator.to_string(),
                c.method.to_string(),
                c.successes.to_string(),
                c.failures.to_string(),
                c.covered.to_string(),
                full(Some(c.coverage)),
                full(Some(c.avg_length)),
                reasons.join(";"),
            ]
        })
        .collect();
    csv_text(&header, &rows)
}

// ------------------------------------------------------------------ tests

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimator_lists_parse_and_reject_duplicates() {
        let names = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let got = parse_estimators(&names(&["hck", "hc3", "hc0"]), &EstimatorKind::ALL).unwrap();
        assert_eq!(got, vec![EstimatorKind::Hck, EstimatorKind::Hc3, EstimatorKind::Hc0]);
        assert_eq!(parse_estimators(&[], &EstimatorKind::ALL).unwrap().len(), 8);
        assert_eq!(parse_estimators(&names(&["hck", "HCK"]), &[]).unwrap_err().code(), 2);
        assert_eq!(parse_estimators(&names(&["hc9"]), &[]).unwrap_err().code(), 2);
    }

    #[test]
    fn level_gate() {
        assert!(check_level(0.95).is_ok());
        assert_eq!(check_level(0.0).unwrap_err().code(), 2);
        assert_eq!(check_level(1.0).unwrap_err().code(), 2);
        assert_eq!(check_level(f64::NAN).unwrap_err().code(), 2);
    }

    #[test]
    fn p_value_matches_two_sided_tail() {
        let z = 1.959963984540054;
        let p = 2.0 * normal_cdf(-z);
        assert!((p - 0.05).abs() < 1e-12, "{p}");
    }

    #[test]
    fn infeasibility_notes() {
        let e = Error::HckInfeasible { mcal: 0.5 };
        assert_eq!(infeasibility_note(&e, 0.5), "infeasible (𝓜ₙ = 0.500000)");
        let e = Error::UnitLeverage { indices: vec![3] };
        assert!(infeasibility_note(&e, 1.0).starts_with("infeasible: unit leverage"));
    }

    #[test]
    fn varah_bound_absent_when_infinite() {
        let w = manycov::design::unit_dummies(4, 2);
        let rep = annihilator(w.view(), DEFAULT_MAX_N).unwrap();
        let prune = PruneReport {
            kept: (0..4).collect(),
            dropped: vec![],
            pivot_ratios: vec![1.0; 4],
            k_input: 4,
            k_effective: 4,
        };
        let names: Vec<String> = (0..4).map(|i| format!("u{i}")).collect();
        let diag = diagnostics_block(&rep, &prune, &names, 0, 1);
        assert!(!diag.hck_feasible);
        assert!(diag.varah_bound.is_none());
        assert!(feasibility_line(&diag).contains("infeasible"));
    }
}
