//! Monte Carlo harness: one frame per trial shared by every estimator,
//! parallel SNR sweeps, ambiguity-function cuts, and per-step operation and
//! transmission accounting.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{observe, synthesize_channel, ChannelRealization, Observations, Steering};
use crate::equalize::{
    dd_equalize_counted, estimate_channel_lmmse_counted, genie_equalize_counted, hard_decision_counted,
    mean_absolute_error, pilot_equalize_counted, soft_data_estimate_counted, symbol_error_rates, DemodMode, Slicer,
    SymbolEstimates,
};
use crate::error::{Error, Result};
use crate::estimators::{
    CorrelationObjective, MmlObjective, MmlOptimalObjective, MmlVariant, Objective, ENUMERATION_CAP,
};
use crate::model::{build_resource_grid, build_scene, Point, ResourceGrid, Scene, SystemConfig};
use crate::ops::{OpCounts, Step};
use crate::search::{grid_search_counted, make_grid, nelder_mead_refine_counted, RefineOptions, SearchGrid};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Estimator {
    #[serde(rename = "P")]
    Pilot,
    #[serde(rename = "PD")]
    Genie,
    #[serde(rename = "HDD-centr")]
    HddCentr,
    #[serde(rename = "HDD-distr")]
    HddDistr,
    #[serde(rename = "SDD-centr")]
    SddCentr,
    #[serde(rename = "SDD-distr")]
    SddDistr,
    #[serde(rename = "MML-fast")]
    MmlFast,
    #[serde(rename = "MML-approx")]
    MmlApprox,
    #[serde(rename = "MML-opt")]
    MmlOpt,
}

impl Estimator {
    pub const ALL: [Estimator; 9] = [
        Estimator::Pilot,
        Estimator::Genie,
        Estimator::HddCentr,
        Estimator::HddDistr,
        Estimator::SddCentr,
        Estimator::SddDistr,
        Estimator::MmlFast,
        Estimator::MmlApprox,
        Estimator::MmlOpt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Estimator::Pilot => "P",
            Estimator::Genie => "PD",
            Estimator::HddCentr => "HDD-centr",
            Estimator::HddDistr => "HDD-distr",
            Estimator::SddCentr => "SDD-centr",
            Estimator::SddDistr => "SDD-distr",
            Estimator::MmlFast => "MML-fast",
            Estimator::MmlApprox => "MML-approx",
            Estimator::MmlOpt => "MML-opt",
        }
    }

    /// Everything except the pilot-only estimator touches the data block.
    pub fn uses_data(self) -> bool {
        self != Estimator::Pilot
    }

    /// Decision-directed variant: demodulation mode and whether decisions are hard.
    pub fn decision_directed(self) -> Option<(DemodMode, bool)> {
        match self {
            Estimator::HddCentr => Some((DemodMode::Centralized, true)),
            Estimator::HddDistr => Some((DemodMode::Distributed, true)),
            Estimator::SddCentr => Some((DemodMode::Centralized, false)),
            Estimator::SddDistr => Some((DemodMode::Distributed, false)),
            _ => None,
        }
    }

    fn is_distributed(self) -> bool {
        matches!(self, Estimator::HddDistr | Estimator::SddDistr)
    }
}

impl fmt::Display for Estimator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Estimator {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Estimator::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::UnknownEstimator(s.to_string()))
    }
}

/// Parses a comma-separated list, keeping the given order and dropping repeats.
pub fn parse_estimators(list: &str) -> Result<Vec<Estimator>> {
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let e: Estimator = name.parse()?;
        if !out.contains(&e) {
            out.push(e);
        }
    }
    if out.is_empty() {
        return Err(Error::UnknownEstimator(list.to_string()));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Transmission accounting

/// Per-node forwarding cost: real scalars of the correlation grid plus
/// complex data observations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TransmissionTally {
    pub grid_scalars: usize,
    pub data_coefficients: usize,
}

impl TransmissionTally {
    /// Complex coefficients count as two real scalars.
    pub fn real_scalars(&self) -> usize {
        self.grid_scalars + 2 * self.data_coefficients
    }
}

/// Pilot-only, genie and distributed decision-directed nodes forward their
/// `N_grid` correlation values; MML and centralized decision-directed nodes
/// also forward all `Q D` data observations.
pub fn account_transmission(cfg: &SystemConfig, estimator: Estimator) -> TransmissionTally {
    let grid_scalars = cfg.n_grid();
    let data_coefficients = match estimator {
        Estimator::MmlFast | Estimator::MmlApprox | Estimator::MmlOpt | Estimator::HddCentr | Estimator::SddCentr => {
            cfg.q * cfg.d
        }
        _ => 0,
    };
    TransmissionTally {
        grid_scalars,
        data_coefficients,
    }
}

// ---------------------------------------------------------------------------
// Single trial

const STREAM_SCENE: u64 = 1;
const STREAM_CHANNEL: u64 = 2;
const STREAM_FRAME: u64 = 3;
const STREAM_NOISE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One simulated frame. Each component draws from its own stream of the
/// trial seed, so changing e.g. the constellation leaves scene, channel and
/// noise untouched.
#[derive(Debug, Clone)]
pub struct Realization {
    pub scene: Scene,
    pub channel: ChannelRealization,
    pub frame: ResourceGrid,
    pub obs: Observations,
}

pub fn realize(cfg: &SystemConfig, sigma2: f64, seed: u64) -> Result<Realization> {
    let scene = build_scene(cfg, &mut stream(seed, STREAM_SCENE));
    let channel = synthesize_channel(&scene, cfg, &mut stream(seed, STREAM_CHANNEL))?;
    let frame = build_resource_grid(cfg, &mut stream(seed, STREAM_FRAME))?;
    let obs = observe(&channel, &frame, sigma2, &mut stream(seed, STREAM_NOISE));
    Ok(Realization {
        scene,
        channel,
        frame,
        obs,
    })
}

/// Noise variance for an SNR point; `+inf` dB means noise-free.
pub fn sigma2_for(cfg: &SystemConfig, snr_db: f64) -> f64 {
    if snr_db == f64::INFINITY {
        0.0
    } else {
        cfg.sigma2(snr_db)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorOutcome {
    pub estimator: Estimator,
    pub estimate: Point,
    pub grid_estimate: Point,
    pub sq_error: f64,
    pub ops: OpCounts,
    pub tx: TransmissionTally,
}

/// Demodulation quality of the frame's data block.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CommMetrics {
    pub ser_centr: f64,
    /// Mean of the per-node rates.
    pub ser_distr: f64,
    pub ser_distr_per_node: Vec<f64>,
    pub mae_centr: f64,
    pub mae_distr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialResult {
    pub seed: u64,
    pub snr_db: f64,
    pub sigma2: f64,
    pub ue: Point,
    pub outcomes: Vec<EstimatorOutcome>,
    /// Present iff `D > 0` and some requested estimator consumes data.
    pub comm: Option<CommMetrics>,
}

impl TrialResult {
    pub fn outcome(&self, e: Estimator) -> Option<&EstimatorOutcome> {
        self.outcomes.iter().find(|o| o.estimator == e)
    }
}

/// Grid and refinement settings shared by every estimator of a run.
#[derive(Debug, Clone)]
pub struct SearchPlan {
    pub grid: SearchGrid,
    /// `None` disables refinement.
    pub refine: Option<RefineOptions>,
}

impl SearchPlan {
    pub fn new(cfg: &SystemConfig) -> Self {
        let grid = make_grid(cfg);
        let refine = Some(RefineOptions::for_grid(&grid));
        SearchPlan { grid, refine }
    }

    pub fn grid_only(cfg: &SystemConfig) -> Self {
        SearchPlan {
            grid: make_grid(cfg),
            refine: None,
        }
    }
}

fn locate<O: Objective + ?Sized>(objective: &O, plan: &SearchPlan, ops: &mut OpCounts) -> Result<(Point, Point)> {
    let coarse = grid_search_counted(objective, &plan.grid, ops)?;
    let fine = match plan.refine {
        Some(opts) => nelder_mead_refine_counted(objective, coarse.point, opts, ops).0,
        None => coarse.point,
    };
    Ok((fine, coarse.point))
}

/// Runs every requested estimator on one realization drawn from `seed`.
pub fn run_trial(cfg: &SystemConfig, snr_db: f64, estimators: &[Estimator], seed: u64) -> Result<TrialResult> {
    run_trial_with(cfg, &SearchPlan::new(cfg), snr_db, estimators, seed)
}

pub fn run_trial_with(
    cfg: &SystemConfig,
    plan: &SearchPlan,
    snr_db: f64,
    estimators: &[Estimator],
    seed: u64,
) -> Result<TrialResult> {
    let sigma2 = sigma2_for(cfg, snr_db);
    let gamma = cfg.gamma();
    let real = realize(cfg, sigma2, seed)?;
    let Realization { scene, frame, obs, .. } = &real;
    let steering = Steering::new(&scene.nodes, cfg);
    let has_data = cfg.d > 0;

    let mut eq_ops = OpCounts::default();
    let yp_eq = pilot_equalize_counted(&obs.y_p, &frame.pilots, &mut eq_ops);

    // demodulation, shared by the decision-directed estimators and the SER/MAE report
    let want_comm = has_data && estimators.iter().any(|e| e.uses_data());
    let want_dd = estimators.iter().any(|e| e.decision_directed().is_some());
    let demod = if want_comm || want_dd {
        Some(Demodulation::run(&obs.y_p, &obs.y_d, frame, sigma2, gamma))
    } else {
        None
    };
    let comm = match (&demod, want_comm) {
        (Some(d), true) => Some(d.metrics(&frame.data)),
        _ => None,
    };

    let mut outcomes = Vec::with_capacity(estimators.len());
    for &e in estimators {
        let mut ops = eq_ops;
        let (estimate, grid_estimate) = match e {
            Estimator::Pilot => {
                let obj = CorrelationObjective::new(&steering, yp_eq.clone())?;
                locate(&obj, plan, &mut ops)?
            }
            Estimator::Genie => {
                let eq = genie_equalize_counted(&yp_eq, &obs.y_d, &frame.data, &mut ops);
                locate(&CorrelationObjective::new(&steering, eq)?, plan, &mut ops)?
            }
            Estimator::HddCentr | Estimator::HddDistr | Estimator::SddCentr | Estimator::SddDistr => {
                let d = demod.as_ref().expect("demodulated above");
                let (mode, hard) = e.decision_directed().unwrap();
                ops += d.ops_for(mode, hard);
                let s_hat = d.estimates(mode, hard);
                let eq = dd_equalize_counted(&yp_eq, &obs.y_d, s_hat, &mut ops);
                locate(&CorrelationObjective::new(&steering, eq)?, plan, &mut ops)?
            }
            Estimator::MmlFast | Estimator::MmlApprox => {
                let variant = if e == Estimator::MmlFast { MmlVariant::Fast } else { MmlVariant::Approx };
                let obj = MmlObjective::new(
                    &steering,
                    yp_eq.clone(),
                    &obs.y_d,
                    frame.pilot_energy,
                    sigma2,
                    gamma,
                    &frame.map,
                    variant,
                )?;
                locate(&obj, plan, &mut ops)?
            }
            Estimator::MmlOpt => {
                let obj = MmlOptimalObjective::new(
                    &steering,
                    obs.full_frame(),
                    frame.pilots.clone(),
                    frame.map.clone(),
                    sigma2,
                    gamma,
                    ENUMERATION_CAP,
                )?;
                locate(&obj, plan, &mut ops)?
            }
        };
        outcomes.push(EstimatorOutcome {
            estimator: e,
            estimate,
            grid_estimate,
            sq_error: (estimate - scene.ue).norm().powi(2),
            ops,
            tx: account_transmission(cfg, e),
        });
    }
    Ok(TrialResult {
        seed,
        snr_db,
        sigma2,
        ue: scene.ue,
        outcomes,
        comm,
    })
}

/// LMMSE channel estimate, soft and hard symbol estimates in both modes, with
/// the operation counts of each step kept apart for attribution.
struct Demodulation {
    soft_centr: SymbolEstimates,
    soft_distr: SymbolEstimates,
    hard_centr: SymbolEstimates,
    hard_distr: SymbolEstimates,
    chan_ops: OpCounts,
    soft_ops: OpCounts,
    hard_centr_ops: OpCounts,
    hard_distr_ops: OpCounts,
}

impl Demodulation {
    fn run(y_p: &Array3<C64>, y_d: &Array3<C64>, frame: &ResourceGrid, sigma2: f64, gamma: f64) -> Self {
        let mut chan_ops = OpCounts::default();
        let h_hat = estimate_channel_lmmse_counted(y_p, &frame.pilots, sigma2, gamma, &mut chan_ops);
        let mut soft_ops = OpCounts::default();
        let soft_centr = soft_data_estimate_counted(&h_hat, y_d, sigma2, DemodMode::Centralized, &mut soft_ops);
        let mut discard = OpCounts::default();
        let soft_distr = soft_data_estimate_counted(&h_hat, y_d, sigma2, DemodMode::Distributed, &mut discard);
        let mut hard_centr_ops = OpCounts::default();
        let hard_centr = hard_decision_counted(&soft_centr, &frame.map, Slicer::Exhaustive, &mut hard_centr_ops);
        let mut hard_distr_ops = OpCounts::default();
        let hard_distr = hard_decision_counted(&soft_distr, &frame.map, Slicer::Exhaustive, &mut hard_distr_ops);
        Demodulation {
            soft_centr,
            soft_distr,
            hard_centr,
            hard_distr,
            chan_ops,
            soft_ops,
            hard_centr_ops,
            hard_distr_ops,
        }
    }

    fn estimates(&self, mode: DemodMode, hard: bool) -> &SymbolEstimates {
        match (mode, hard) {
            (DemodMode::Centralized, true) => &self.hard_centr,
            (DemodMode::Centralized, false) => &self.soft_centr,
            (DemodMode::Distributed, true) => &self.hard_distr,
            (DemodMode::Distributed, false) => &self.soft_distr,
        }
    }

    fn ops_for(&self, mode: DemodMode, hard: bool) -> OpCounts {
        let mut ops = self.chan_ops;
        ops += self.soft_ops;
        if hard {
            ops += match mode {
                DemodMode::Centralized => self.hard_centr_ops,
                DemodMode::Distributed => self.hard_distr_ops,
            };
        }
        ops
    }

    fn metrics(&self, truth: &Array2<C64>) -> CommMetrics {
        let ser_centr = symbol_error_rates(&self.hard_centr, truth)[0];
        let per_node = symbol_error_rates(&self.hard_distr, truth);
        CommMetrics {
            ser_centr,
            ser_distr: per_node.iter().sum::<f64>() / per_node.len() as f64,
            ser_distr_per_node: per_node,
            mae_centr: mean_absolute_error(&self.soft_centr, truth),
            mae_distr: mean_absolute_error(&self.soft_distr, truth),
        }
    }
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub estimator: Estimator,
    pub snr_db: f64,
    pub rmse_m: f64,
    pub rmse_lambda: f64,
    /// Distributed estimators report the node-averaged distributed rate,
    /// the others the centralized one; absent for the pilot-only estimator
    /// and for data-free frames.
    pub ser: Option<f64>,
    pub mae: Option<f64>,
    pub ser_distr_per_node: Option<Vec<f64>>,
    pub n_trials: usize,
    pub mean_ops: f64,
    pub total_ops: OpCounts,
    pub tx_scalars_per_node: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepResult {
    pub config: SystemConfig,
    pub estimators: Vec<Estimator>,
    /// Estimator-major, SNR ascending in configuration order.
    pub rows: Vec<SweepRow>,
    /// Squared errors per row, trial order; kept for paired comparisons.
    #[serde(skip)]
    pub sq_errors: Vec<Vec<f64>>,
}

impl SweepResult {
    pub fn row(&self, e: Estimator, snr_db: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.estimator == e && r.snr_db == snr_db)
    }

    pub fn rmse(&self, e: Estimator) -> Vec<f64> {
        self.rows.iter().filter(|r| r.estimator == e).map(|r| r.rmse_m).collect()
    }

    pub fn squared_errors(&self, e: Estimator, snr_db: f64) -> Option<&[f64]> {
        self.rows
            .iter()
            .position(|r| r.estimator == e && r.snr_db == snr_db)
            .map(|i| self.sq_errors[i].as_slice())
    }
}

/// `n_mc` trials per SNR point with seeds `base_seed + t` (the same seeds at
/// every SNR), evaluated in parallel and reduced in a fixed order.
pub fn run_sweep(cfg: &SystemConfig, estimators: &[Estimator]) -> Result<SweepResult> {
    cfg.validate()?;
    let plan = SearchPlan::new(cfg);
    let jobs: Vec<(usize, u64)> = (0..cfg.snr_db.len())
        .flat_map(|s| (0..cfg.n_mc as u64).map(move |t| (s, t)))
        .collect();
    let trials: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(s, t)| run_trial_with(cfg, &plan, cfg.snr_db[s], estimators, cfg.base_seed.wrapping_add(t)))
        .collect::<Result<_>>()?;

    let lambda = cfg.lambda_c();
    let mut rows = Vec::new();
    let mut sq_errors = Vec::new();
    for (k, &e) in estimators.iter().enumerate() {
        for (s, &snr_db) in cfg.snr_db.iter().enumerate() {
            let chunk = &trials[s * cfg.n_mc..(s + 1) * cfg.n_mc];
            let errs: Vec<f64> = chunk.iter().map(|t| t.outcomes[k].sq_error).collect();
            let rmse_m = (errs.iter().sum::<f64>() / errs.len() as f64).sqrt();
            let mut total_ops = OpCounts::default();
            for t in chunk {
                total_ops += t.outcomes[k].ops;
            }
            let comm: Vec<&CommMetrics> = chunk.iter().filter_map(|t| t.comm.as_ref()).collect();
            let reported = e.uses_data() && comm.len() == chunk.len() && !comm.is_empty();
            let mean = |f: &dyn Fn(&CommMetrics) -> f64| comm.iter().map(|c| f(c)).sum::<f64>() / comm.len() as f64;
            let (ser, mae, per_node) = if reported {
                if e.is_distributed() {
                    let n = comm[0].ser_distr_per_node.len();
                    let per_node = (0..n).map(|i| mean(&|c| c.ser_distr_per_node[i])).collect();
                    (Some(mean(&|c| c.ser_distr)), Some(mean(&|c| c.mae_distr)), Some(per_node))
                } else {
                    (Some(mean(&|c| c.ser_centr)), Some(mean(&|c| c.mae_centr)), None)
                }
            } else {
                (None, None, None)
            };
            rows.push(SweepRow {
                estimator: e,
                snr_db,
                rmse_m,
                rmse_lambda: rmse_m / lambda,
                ser,
                mae,
                ser_distr_per_node: per_node,
                n_trials: chunk.len(),
                mean_ops: total_ops.total() as f64 / chunk.len() as f64,
                total_ops,
                tx_scalars_per_node: account_transmission(cfg, e).real_scalars(),
            });
            sq_errors.push(errs);
        }
    }
    Ok(SweepResult {
        config: cfg.clone(),
        estimators: estimators.to_vec(),
        rows,
        sq_errors,
    })
}

// ---------------------------------------------------------------------------
// Ambiguity function

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutAxis {
    X,
    Y,
}

impl FromStr for CutAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "x" => Ok(CutAxis::X),
            "y" => Ok(CutAxis::Y),
            _ => Err(Error::config("cut_axis", format!("expected x or y, got {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AfSample {
    /// Coordinate along the cut axis, m.
    pub coord: f64,
    pub point: Point,
    pub af_coh: f64,
    pub af_noncoh: f64,
}

impl AfSample {
    /// Normalized by the noise-free peaks `N Q` and `N Q^2`.
    pub fn normalized(&self, n: usize, q: usize) -> (f64, f64) {
        let (n, q) = (n as f64, q as f64);
        (self.af_coh / (n * q), self.af_noncoh / (n * q * q))
    }
}

/// `|AF_coh(p, p~)| = |sum_n sum_q A(p)[n,q] conj(A(p~)[n,q])|` and
/// `AF_noncoh(p, p~) = sum_n |sum_q A(p)[n,q] conj(A(p~)[n,q])|^2`.
pub fn ambiguity_at(steering: &Steering, p: Point, p_tilde: Point) -> (f64, f64) {
    let a = steering.matrix(p);
    let b = steering.matrix(p_tilde);
    let mut coh = C64::new(0.0, 0.0);
    let mut noncoh = 0.0;
    for (ra, rb) in a.rows().into_iter().zip(b.rows()) {
        let inner: C64 = ra.iter().zip(rb.iter()).map(|(x, y)| x * y.conj()).sum();
        coh += inner;
        noncoh += inner.norm_sqr();
    }
    (coh.norm(), noncoh)
}

/// Samples both ambiguity functions along a line through `p_true` parallel
/// to `axis`, `samples` points evenly spread over `p_true +- half_span`.
/// Odd sample counts include `p_true` itself at the center.
pub fn ambiguity_function(
    nodes: &[Point],
    cfg: &SystemConfig,
    p_true: Point,
    axis: CutAxis,
    samples: usize,
    half_span: f64,
) -> Result<Vec<AfSample>> {
    if samples < 2 {
        return Err(Error::config("samples", format!("need at least 2 samples, got {samples}")));
    }
    let steering = Steering::new(nodes, cfg);
    let out = (0..samples)
        .into_par_iter()
        .map(|k| {
            let offset = -half_span + 2.0 * half_span * k as f64 / (samples - 1) as f64;
            let (point, coord) = match axis {
                CutAxis::X => (Point::new(p_true.x + offset, p_true.y), p_true.x + offset),
                CutAxis::Y => (Point::new(p_true.x, p_true.y + offset), p_true.y + offset),
            };
            let (af_coh, af_noncoh) = ambiguity_at(&steering, p_true, point);
            AfSample {
                coord,
                point,
                af_coh,
                af_noncoh,
            }
        })
        .collect();
    Ok(out)
}

/// Width of the contiguous region around the maximum of `values` where
/// `values >= peak / sqrt(2)`, with linear interpolation at both edges.
/// `None` if the region reaches either end of the cut.
pub fn main_lobe_width_3db(coords: &[f64], values: &[f64]) -> Option<f64> {
    let (peak_i, &peak) = values.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1))?;
    let level = peak / 2f64.sqrt();
    let crossing = |inside: usize, outside: usize| {
        let (v0, v1) = (values[inside], values[outside]);
        let t = (v0 - level) / (v0 - v1);
        coords[inside] + t * (coords[outside] - coords[inside])
    };
    let mut lo = peak_i;
    while values[lo] >= level {
        if lo == 0 {
            return None;
        }
        lo -= 1;
    }
    let mut hi = peak_i;
    while values[hi] >= level {
        hi += 1;
        if hi == values.len() {
            return None;
        }
    }
    Some(crossing(hi - 1, hi) - crossing(lo + 1, lo))
}

// ---------------------------------------------------------------------------
// Complexity accounting

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityRow {
    pub estimator: Estimator,
    pub step: Step,
    pub measured_ops: u64,
    pub asymptotic_formula: String,
    pub instantiated_value: f64,
}

/// Measured operation counts of one grid-only pipeline pass (first SNR point,
/// `base_seed`), next to the asymptotic per-step costs evaluated at `cfg`.
/// Only the steps an estimator actually performs are listed.
pub fn account_complexity(cfg: &SystemConfig, estimator: Estimator) -> Result<Vec<ComplexityRow>> {
    cfg.validate()?;
    if estimator == Estimator::MmlOpt {
        return Err(Error::config(
            "estimator",
            "the exhaustive estimator has no per-step accounting; its cost is M^(QD) likelihood evaluations per candidate",
        ));
    }
    let plan = SearchPlan::grid_only(cfg);
    let trial = run_trial_with(cfg, &plan, cfg.snr_db[0], &[estimator], cfg.base_seed)?;
    let ops = trial.outcomes[0].ops;

    let (n, q, p, d) = (cfg.n as f64, cfg.q as f64, cfg.p as f64, cfg.d as f64);
    let n_grid = plan.grid.len() as f64;
    let m = cfg.constellations()?.max_order() as f64;
    let mut steps: Vec<(Step, &str, f64)> = Vec::new();
    if let Some((mode, hard)) = estimator.decision_directed() {
        steps.push((Step::ChannelEstimation, "O(N Q P)", n * q * p));
        steps.push((Step::SoftDataEstimation, "O(N Q D)", n * q * d));
        if hard {
            steps.push(match mode {
                DemodMode::Centralized => (Step::HardDataDecision, "O(M Q D)", m * q * d),
                DemodMode::Distributed => (Step::HardDataDecision, "O(N M Q D)", n * m * q * d),
            });
        }
    }
    let full_eq = matches!(
        estimator,
        Estimator::Genie | Estimator::HddCentr | Estimator::HddDistr | Estimator::SddCentr | Estimator::SddDistr
    );
    steps.push(if full_eq {
        (Step::SymbolEqualization, "O(N Q (P + D))", n * q * (p + d))
    } else {
        (Step::SymbolEqualization, "O(N Q P)", n * q * p)
    });
    steps.push((Step::LocalizationPilot, "O(N_grid N Q)", n_grid * n * q));
    match estimator {
        Estimator::MmlFast => {
            steps.push((Step::LocalizationDataCombining, "O(N_grid Q D N)", n_grid * q * d * n));
            steps.push((Step::LocalizationDataConstellation, "O(N_grid Q D sqrt(M))", n_grid * q * d * m.sqrt()));
        }
        Estimator::MmlApprox => {
            steps.push((Step::LocalizationDataCombining, "O(N_grid Q D N)", n_grid * q * d * n));
            steps.push((Step::LocalizationDataConstellation, "O(N_grid Q D M)", n_grid * q * d * m));
        }
        _ => {}
    }
    Ok(steps
        .into_iter()
        .map(|(step, formula, value)| ComplexityRow {
            estimator,
            step,
            measured_ops: ops.get(step),
            asymptotic_formula: formula.to_string(),
            instantiated_value: value,
        })
        .collect())
}
