//! Monte Carlo driver: replicate a data-generating process, run the
//! requested estimator × interval-method grid on each replication, and
//! aggregate coverage, length, and failures.
//!
//! Replications run in parallel but every replication owns a counter-derived
//! RNG stream keyed by its index, and aggregation walks replications in
//! order, so a report is byte-identical for a given config regardless of
//! thread count. Per-replication estimator failures are first-class results
//! (counted, with reasons) — they never abort a run.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::design::{annihilator, prune_collinear, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL};
use crate::dgp::{
    default_calibration, draw_model1_design, draw_panel_design, draw_plm_design, DesignDraw,
    Model1Spec, PanelSpec, PlmSpec, VarianceConstants,
};
use crate::inference::{bootstrap_ci, gaussian_ci, CiMethod};
use crate::regression::{fit_partialled, fit_pipeline};
use crate::rng::CounterRng;
use crate::variance::{compute_meat, sandwich, EstimatorKind};
use crate::{Error, Result};

/// Which process to replicate.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "model", rename_all = "kebab-case")]
pub enum DgpSpec {
    Model1(Model1Spec),
    Panel(PanelSpec),
    Plm(PlmSpec),
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DgpSpec::Model1(s) => s.validate(),
            DgpSpec::Panel(s) => s.validate(),
            DgpSpec::Plm(s) => s.validate(),
        }
    }

    pub fn n(&self) -> usize {
        match self {
            DgpSpec::Model1(s) => s.n,
            DgpSpec::Panel(s) => s.n(),
            DgpSpec::Plm(s) => s.n,
        }
    }

    /// (K, threshold) when the process needs calibrated variance constants.
    fn calibration_request(&self) -> Option<(usize, f64)> {
        match self {
            DgpSpec::Model1(s) if s.hetero => Some((s.k, s.dummy_threshold)),
            _ => None,
        }
    }

    fn draw(
        &self,
        constants: Option<&VarianceConstants>,
        rng: &mut CounterRng,
    ) -> Result<DesignDraw> {
        match self {
            DgpSpec::Model1(s) => draw_model1_design(s, constants, rng),
            DgpSpec::Panel(s) => draw_panel_design(s, rng),
            DgpSpec::Plm(s) => draw_plm_design(s, rng),
        }
    }
}

/// Full description of one simulation run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonteCarloConfig {
    pub dgp: DgpSpec,
    pub estimators: Vec<EstimatorKind>,
    pub methods: Vec<CiMethod>,
    pub level: f64,
    pub reps: usize,
    pub seed: u64,
    /// Resamples per bootstrap interval (used only when `methods` includes
    /// the bootstrap).
    pub bootstrap_b: usize,
    /// Draw the design once and hold it fixed, redrawing only the errors.
    pub fixed_design: bool,
}

impl MonteCarloConfig {
    pub fn new(dgp: DgpSpec, reps: usize, seed: u64) -> Self {
        MonteCarloConfig {
            dgp,
            estimators: vec![EstimatorKind::Ho1, EstimatorKind::Hck],
            methods: vec![CiMethod::Gaussian],
            level: 0.95,
            reps,
            seed,
            bootstrap_b: 999,
            fixed_design: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.reps == 0 {
            return Err(Error::Config("need at least one replication".into()));
        }
        if self.estimators.is_empty() {
            return Err(Error::Config("need at least one estimator".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("need at least one interval method".into()));
        }
        for (i, e) in self.estimators.iter().enumerate() {
            if self.estimators[..i].contains(e) {
                return Err(Error::Config(format!("estimator {e} listed twice")));
            }
        }
        for (i, m) in self.methods.iter().enumerate() {
            if self.methods[..i].contains(m) {
                return Err(Error::Config(format!("interval method {m} listed twice")));
            }
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::Config(format!(
                "confidence level must be in (0,1), got {}",
                self.level
            )));
        }
        if self.methods.contains(&CiMethod::Bootstrap) && self.bootstrap_b == 0 {
            return Err(Error::Config("bootstrap selected but bootstrap_b = 0".into()));
        }
        Ok(())
    }
}

/// JSON has no NaN; it goes out as null and must come back as NaN so a
/// report survives a serialization round trip.
fn nan_from_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Aggregate for one estimator × method cell.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct CellReport {
    pub estimator: EstimatorKind,
    pub method: CiMethod,
    /// Replications that produced an interval.
    pub successes: usize,
    pub failures: usize,
    /// How many successful intervals covered the true coefficient.
    pub covered: usize,
    /// covered / successes; NaN (JSON null) when nothing succeeded.
    #[serde(deserialize_with = "nan_from_null")]
    pub coverage: f64,
    /// Mean interval length over successes; NaN (JSON null) when none.
    #[serde(deserialize_with = "nan_from_null")]
    pub avg_length: f64,
    pub failure_reasons: BTreeMap<String, usize>,
}

/// Everything a simulation run produced. Byte-identical for a given config
/// regardless of parallelism once `elapsed_secs` is set aside (see
/// [`SimulationReport::canonical_json`]).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimulationReport {
    pub dgp: DgpSpec,
    pub level: f64,
    pub reps: usize,
    pub seed: u64,
    pub bootstrap_b: usize,
    pub fixed_design: bool,
    pub cells: Vec<CellReport>,
    /// Wall-clock time; excluded from determinism comparisons.
    pub elapsed_secs: f64,
}

impl SimulationReport {
    /// Deterministic serialization: the report with `elapsed_secs` zeroed.
    pub fn canonical_json(&self) -> String {
        let mut clone = self.clone();
        clone.elapsed_secs = 0.0;
        serde_json::to_string(&clone).expect("report serializes")
    }

    pub fn cell(&self, estimator: EstimatorKind, method: CiMethod) -> Option<&CellReport> {
        self.cells.iter().find(|c| c.estimator == estimator && c.method == method)
    }
}

enum CellOutcome {
    Success { covered: bool, length: f64 },
    Failure(&'static str),
}

struct SharedDesign {
    draw: DesignDraw,
    rep: Arc<crate::design::AnnihilatorRep>,
}

/// Run the full grid. See the module docs for the determinism contract.
pub fn run_monte_carlo(config: &MonteCarloConfig) -> Result<SimulationReport> {
    config.validate()?;
    let t0 = Instant::now();

    let constants = match config.dgp.calibration_request() {
        Some((k, threshold)) => Some(default_calibration(k, threshold)?),
        None => None,
    };

    let shared = if config.fixed_design {
        let mut design_rng = CounterRng::stream(config.seed, 0);
        let draw = config.dgp.draw(constants.as_ref(), &mut design_rng)?;
        let (w_pruned, _) = prune_collinear(draw.w.view(), DEFAULT_PIVOT_RTOL)?;
        let rep = Arc::new(annihilator(w_pruned.view(), DEFAULT_MAX_N)?);
        if config.estimators.contains(&EstimatorKind::Hck) && rep.hck_feasible() {
            let _ = rep.hadamard_cholesky(); // build the factor once, up front
        }
        Some(SharedDesign { draw, rep })
    } else {
        None
    };

    let outcomes: Vec<Vec<CellOutcome>> = (0..config.reps)
        .into_par_iter()
        .map(|r| replicate(config, constants.as_ref(), shared.as_ref(), r))
        .collect();

    let mut cells = Vec::with_capacity(config.estimators.len() * config.methods.len());
    for (ei, &estimator) in config.estimators.iter().enumerate() {
        for (mi, &method) in config.methods.iter().enumerate() {
            let idx = ei * config.methods.len() + mi;
            let mut successes = 0usize;
            let mut covered = 0usize;
            let mut length_sum = 0.0f64;
            let mut failures = 0usize;
            let mut failure_reasons: BTreeMap<String, usize> = BTreeMap::new();
            for rep_outcomes in &outcomes {
                match &rep_outcomes[idx] {
                    CellOutcome::Success { covered: c, length } => {
                        successes += 1;
                        if *c {
                            covered += 1;
                        }
                        length_sum += length;
                    }
                    CellOutcome::Failure(key) => {
                        failures += 1;
                        *failure_reasons.entry((*key).to_string()).or_insert(0) += 1;
                    }
                }
            }
            let coverage =
                if successes > 0 { covered as f64 / successes as f64 } else { f64::NAN };
            let avg_length =
                if successes > 0 { length_sum / successes as f64 } else { f64::NAN };
            cells.push(CellReport {
                estimator,
                method,
                successes,
                failures,
                covered,
                coverage,
                avg_length,
                failure_reasons,
            });
        }
    }

    Ok(SimulationReport {
        dgp: config.dgp.clone(),
        level: config.level,
        reps: config.reps,
        seed: config.seed,
        bootstrap_b: config.bootstrap_b,
        fixed_design: config.fixed_design,
        cells,
        elapsed_secs: t0.elapsed().as_secs_f64(),
    })
}

/// One replication: realize data, fit once, then fill every estimator ×
/// method cell.
fn replicate(
    config: &MonteCarloConfig,
    constants: Option<&VarianceConstants>,
    shared: Option<&SharedDesign>,
    r: usize,
) -> Vec<CellOutcome> {
    let n_cells = config.estimators.len() * config.methods.len();
    let mut rep_rng = CounterRng::stream(config.seed, 1 + r as u64);

    let (true_beta, data, fit_result) = match shared {
        Some(sh) => {
            let data = sh.draw.realize(&mut rep_rng);
            let fit = fit_partialled(&data, &sh.rep);
            (sh.draw.true_beta, data, fit)
        }
        None => {
            let mut design_rng = rep_rng.substream(0);
            let draw = match config.dgp.draw(constants, &mut design_rng) {
                Ok(d) => d,
                Err(e) => return vec_failure(n_cells, e.kind_key()),
            };
            let mut noise_rng = rep_rng.substream(1);
            let data = draw.realize(&mut noise_rng);
            let fit =
                fit_pipeline(&data, DEFAULT_MAX_N, DEFAULT_PIVOT_RTOL).map(|(f, _)| f);
            (draw.true_beta, data, fit)
        }
    };

    let fit = match fit_result {
        Ok(f) => f,
        Err(e) => return vec_failure(n_cells, e.kind_key()),
    };
    let bootstrap_seed = rep_rng.substream(2).next_u64();

    let mut out = Vec::with_capacity(n_cells);
    for &estimator in &config.estimators {
        let meat = compute_meat(&fit, estimator);
        for &method in &config.methods {
            let outcome = match method {
                CiMethod::Gaussian => match &meat {
                    Ok(m) => {
                        let sw = sandwich(&fit, m);
                        match gaussian_ci(&fit, &sw, config.level, 0) {
                            Ok(ci) if !ci.failed => CellOutcome::Success {
                                covered: ci.covers(true_beta),
                                length: ci.length(),
                            },
                            Ok(_) => CellOutcome::Failure("negative-variance"),
                            Err(e) => CellOutcome::Failure(e.kind_key()),
                        }
                    }
                    Err(e) => CellOutcome::Failure(e.kind_key()),
                },
                CiMethod::Bootstrap => match bootstrap_ci(
                    &data,
                    estimator,
                    config.level,
                    config.bootstrap_b,
                    bootstrap_seed,
                    0,
                ) {
                    Ok(ci) if !ci.failed => CellOutcome::Success {
                        covered: ci.covers(true_beta),
                        length: ci.length(),
                    },
                    Ok(_) => CellOutcome::Failure("bootstrap-failed"),
                    Err(e) => CellOutcome::Failure(e.kind_key()),
                },
            };
            out.push(outcome);
        }
    }
    out
}

fn vec_failure(n: usize, key: &'static str) -> Vec<CellOutcome> {
    (0..n).map(|_| CellOutcome::Failure(key)).collect()
}
