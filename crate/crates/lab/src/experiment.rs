//! Experiment specs, scenario dispatch and reports.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use ironmask_core::aux::rotation::{rotation_attack_detailed, structured_sketch};
use ironmask_core::aux::{tmto_attack, TmtoConfig};
use ironmask_core::ironmask::sketch;
use ironmask_core::plra::{run_attack, AttackConfig, SolverKind};
use ironmask_core::sphere::random_unit;
use ironmask_core::{CodeParams, Error, RandomStream, Result, Template};
use serde::{Deserialize, Serialize};

use crate::challenger::challenger_sample;
use crate::defense::{defense_sweep, nearest_codeword_angle, recovery_rate, DefenseRow, DefenseSweepConfig};
use crate::embeddings::load_embeddings;
use crate::parallel::{par_map, trial_stream};
use crate::rates::{estimate_rates, unsigned_angle, RatesConfig};
use crate::stats::{mean_estimate, wilson, MeanEstimate, Proportion};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Noiseless,
    Noisy,
    Defense,
    Tmto,
    Rotation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DefenseSpec {
    /// Enrollment noise for the single-point estimate, radians.
    pub theta_a: f64,
    /// Query noise for the single-point estimate, radians.
    pub theta_i: f64,
    pub p_r_target: f64,
    /// `θ_i` values of the sweep, radians. Empty skips the sweep.
    pub theta_grid: Vec<f64>,
    pub theta_r_trials: usize,
}

impl Default for DefenseSpec {
    fn default() -> Self {
        Self {
            theta_a: 0.0,
            theta_i: 0.0,
            p_r_target: 0.9,
            theta_grid: Vec::new(),
            theta_r_trials: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub scenario: Scenario,
    pub n: usize,
    pub alpha: usize,
    pub num_sketches: usize,
    /// Pairwise angle between challenger readings, radians.
    pub pairwise_noise_theta: f64,
    pub attack: AttackConfig,
    pub trials: usize,
    pub seed: u64,
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default)]
    pub output_path: Option<PathBuf>,
    /// Template file; the first row is the secret. A random template per trial otherwise.
    #[serde(default)]
    pub template_path: Option<PathBuf>,
    /// Noiseless/noisy: run full attacks on fresh sketches instead of planted rate estimation.
    #[serde(default)]
    pub end_to_end: bool,
    /// Extra timed solves for `t_k` beyond the planted trials.
    #[serde(default)]
    pub timing_solves: usize,
    #[serde(default)]
    pub bernoulli_trials: u64,
    #[serde(default)]
    pub defense: DefenseSpec,
    #[serde(default)]
    pub tmto: TmtoConfig,
    /// Largest sub-block size for the rotation attack.
    #[serde(default = "eight")]
    pub rotation_m: usize,
}

fn one() -> usize {
    1
}

fn eight() -> usize {
    8
}

impl ExperimentSpec {
    pub fn new(scenario: Scenario, n: usize, alpha: usize, attack: AttackConfig) -> Self {
        Self {
            scenario,
            n,
            alpha,
            num_sketches: 2,
            pairwise_noise_theta: 0.0,
            attack,
            trials: 1,
            seed: 0,
            workers: 1,
            output_path: None,
            template_path: None,
            end_to_end: false,
            timing_solves: 0,
            bernoulli_trials: 0,
            defense: DefenseSpec::default(),
            tmto: TmtoConfig::default(),
            rotation_m: 8,
        }
    }

    pub fn params(&self) -> Result<CodeParams> {
        CodeParams::new(self.n, self.alpha)
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        if self.trials == 0 {
            return Err(Error::InvalidConfig("trials must be at least 1".into()));
        }
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&self.pairwise_noise_theta) {
            return Err(Error::AngleOutOfRange(self.pairwise_noise_theta));
        }
        if self.scenario == Scenario::Noiseless && self.pairwise_noise_theta != 0.0 {
            return Err(Error::InvalidConfig("noiseless scenario with non-zero noise".into()));
        }
        if matches!(self.scenario, Scenario::Noiseless | Scenario::Noisy) {
            self.attack.validate(self.n, self.num_sketches)?;
        }
        Ok(())
    }
}

/// One trial as written to the deterministic trials CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    /// Planted system index for rate runs, otherwise equal to `trial`.
    pub group: usize,
    pub accepted: bool,
    /// Ground truth: the output is within `θ_t` of `±w` (or contains the true codeword).
    pub success: bool,
    pub angle_deg: Option<f64>,
    /// Outer iterations, candidate count or null dimension, depending on the scenario.
    pub count: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatesSummary {
    pub solver: SolverKind,
    pub num_sketches: usize,
    pub k: usize,
    pub theta_prime_deg: f64,
    pub theta_t_deg: f64,
    pub log2_r_k: f64,
    pub log2_r_k_lower_bound: f64,
    pub simulated_log2_r_k: Option<f64>,
    pub r_k: f64,
    pub t_k: MeanEstimate,
    pub p_k: Proportion,
    pub p_f: Proportion,
    pub p_joint: Proportion,
    pub d: Option<f64>,
    pub t_all: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndToEndSummary {
    pub success: Proportion,
    pub accepted: Proportion,
    pub mean_outer_iterations: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DefenseSummary {
    pub theta_a_deg: f64,
    pub theta_i_deg: f64,
    pub p_r: Proportion,
    pub theta_r_deg: MeanEstimate,
    pub sweep: Vec<DefenseRow>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TmtoSummary {
    pub found: Proportion,
    pub mean_candidates: f64,
    pub mean_rounds: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RotationSummary {
    pub success: Proportion,
    /// Trials that returned a vector, right or wrong.
    pub returned: Proportion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Summary {
    Rates(RatesSummary),
    EndToEnd(EndToEndSummary),
    Defense(DefenseSummary),
    Tmto(TmtoSummary),
    Rotation(RotationSummary),
}

/// Wall-clock data; outside the determinism contract.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct Metadata {
    pub wall_clock_seconds: f64,
    /// Per-trial seconds, in trial order, where the scenario times trials.
    pub trial_seconds: Vec<f64>,
    pub median_trial_seconds: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub code_version: String,
    pub spec: ExperimentSpec,
    pub summary: Summary,
    pub records: Vec<TrialRow>,
    pub metadata: Metadata,
}

impl Report {
    /// Relative gap between the stored `t_all` and `r_k·t_k/(p_k·p_f)` recomputed from the
    /// stored fields; zero for scenarios without a rate model.
    pub fn t_all_gap(&self) -> f64 {
        let Summary::Rates(r) = &self.summary else {
            return 0.0;
        };
        let p_k = if r.p_k.zero_successes { r.p_k.upper } else { r.p_k.estimate };
        let p_f = if r.p_f.estimate > 0.0 { r.p_f.estimate } else { r.p_f.upper.max(f64::MIN_POSITIVE) };
        let recomputed = r.r_k * r.t_k.mean / (p_k * p_f);
        if recomputed == r.t_all {
            return 0.0;
        }
        ((recomputed - r.t_all) / r.t_all).abs()
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec_pretty(self)?)?;
        Ok(())
    }

    pub fn read_json(path: &Path) -> Result<Self> {
        let report: Report = serde_json::from_slice(&fs::read(path)?)?;
        if report.schema_version != SCHEMA_VERSION {
            return Err(Error::Format(format!(
                "report schema {} is not supported (expected {SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    /// Per-trial rows. Deterministic for a given spec.
    pub fn trials_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).map_err(csv_err)?;
        }
        finish(w)
    }

    /// The summary in the column layout of the matching results table.
    pub fn table_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        match &self.summary {
            Summary::Rates(r) => {
                w.write_record([
                    "noise_deg", "algorithm", "sketches", "k", "log2_r_k", "t_k_ms", "p_k", "p_f", "p_k_p_f",
                    "theta_t_deg", "t_all_days",
                ])
                .map_err(csv_err)?;
                let algorithm = match r.solver {
                    SolverKind::Svd => "SVD",
                    SolverKind::Lsa => "LSA",
                };
                w.write_record([
                    fmt(r.theta_prime_deg),
                    algorithm.to_string(),
                    r.num_sketches.to_string(),
                    r.k.to_string(),
                    fmt(r.log2_r_k),
                    fmt(r.t_k.mean * 1e3),
                    fmt(r.p_k.estimate),
                    fmt(r.p_f.estimate),
                    fmt(r.p_joint.estimate),
                    fmt(r.theta_t_deg),
                    fmt(r.t_all / 86_400.0),
                ])
                .map_err(csv_err)?;
            }
            Summary::EndToEnd(e) => {
                w.write_record(["runs", "accepted", "success", "success_lower", "success_upper", "mean_outer_iterations"])
                    .map_err(csv_err)?;
                w.write_record([
                    e.success.trials.to_string(),
                    e.accepted.successes.to_string(),
                    e.success.successes.to_string(),
                    fmt(e.success.lower),
                    fmt(e.success.upper),
                    fmt(e.mean_outer_iterations),
                ])
                .map_err(csv_err)?;
            }
            Summary::Defense(d) => {
                w.write_record(["alpha", "theta_i_deg", "theta_a_deg", "p_r", "theta_r_deg", "log2_code_size", "solved"])
                    .map_err(csv_err)?;
                w.write_record([
                    self.spec.alpha.to_string(),
                    fmt(d.theta_i_deg),
                    fmt(d.theta_a_deg),
                    fmt(d.p_r.estimate),
                    fmt(d.theta_r_deg.mean),
                    fmt(self.spec.params().map(|p| p.code_size_bits()).unwrap_or(f64::NAN)),
                    "false".into(),
                ])
                .map_err(csv_err)?;
                for r in &d.sweep {
                    w.write_record([
                        r.alpha.to_string(),
                        fmt(r.theta_i_deg),
                        fmt(r.theta_a_deg),
                        fmt(r.p_r),
                        fmt(r.theta_r_deg),
                        fmt(r.bits),
                        r.solved.to_string(),
                    ])
                    .map_err(csv_err)?;
                }
            }
            Summary::Tmto(t) => {
                w.write_record(["runs", "found", "mean_candidates", "mean_rounds"]).map_err(csv_err)?;
                w.write_record([
                    t.found.trials.to_string(),
                    t.found.successes.to_string(),
                    fmt(t.mean_candidates),
                    fmt(t.mean_rounds),
                ])
                .map_err(csv_err)?;
            }
            Summary::Rotation(r) => {
                w.write_record(["runs", "returned", "success", "success_rate"]).map_err(csv_err)?;
                w.write_record([
                    r.success.trials.to_string(),
                    r.returned.successes.to_string(),
                    r.success.successes.to_string(),
                    fmt(r.success.estimate),
                ])
                .map_err(csv_err)?;
            }
        }
        finish(w)
    }

    /// Writes `report.json`, `trials.csv` and `table.csv` into `dir`.
    pub fn write_all(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        self.write_json(&dir.join("report.json"))?;
        fs::write(dir.join("trials.csv"), self.trials_csv()?)?;
        fs::write(dir.join("table.csv"), self.table_csv()?)?;
        Ok(())
    }
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Format(e.to_string())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Format(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Format(e.to_string()))
}

fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}

fn secret(spec: &ExperimentSpec, fixed: &Option<Template>, rng: &mut RandomStream) -> Result<Template> {
    match fixed {
        Some(w) => Ok(w.clone()),
        None => random_unit(spec.n, rng),
    }
}

pub fn run_experiment(spec: &ExperimentSpec) -> Result<Report> {
    spec.validate()?;
    let params = spec.params()?;
    let fixed = match &spec.template_path {
        Some(p) => Some(load_embeddings(p, spec.n)?.swap_remove(0)),
        None => None,
    };
    let started = Instant::now();
    let mut trial_seconds = Vec::new();
    let (summary, records) = match spec.scenario {
        Scenario::Noiseless | Scenario::Noisy if !spec.end_to_end => rates(spec, params)?,
        Scenario::Noiseless | Scenario::Noisy => end_to_end(spec, params, &fixed, &mut trial_seconds)?,
        Scenario::Defense => defense(spec, params)?,
        Scenario::Tmto => tmto(spec, params, &fixed, &mut trial_seconds)?,
        Scenario::Rotation => rotation(spec, params, &fixed, &mut trial_seconds)?,
    };
    let report = Report {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        spec: spec.clone(),
        summary,
        records,
        metadata: Metadata {
            wall_clock_seconds: started.elapsed().as_secs_f64(),
            median_trial_seconds: median(&trial_seconds),
            trial_seconds,
        },
    };
    if let Some(dir) = &spec.output_path {
        report.write_all(dir)?;
    }
    Ok(report)
}

fn rates(spec: &ExperimentSpec, params: CodeParams) -> Result<(Summary, Vec<TrialRow>)> {
    let mut cfg = RatesConfig::new(params, spec.num_sketches, spec.attack.solver, spec.attack.k, spec.attack.theta_t);
    cfg.theta_prime = spec.pairwise_noise_theta;
    cfg.systems = spec.trials;
    cfg.restarts_per_system = match spec.attack.solver {
        SolverKind::Svd => 1,
        SolverKind::Lsa => spec.attack.t_th,
    };
    cfg.timing_solves = spec.timing_solves;
    cfg.bernoulli_trials = spec.bernoulli_trials;
    cfg.d = spec.attack.d;
    cfg.seed = spec.seed;
    cfg.workers = spec.workers;
    let est = estimate_rates(&cfg)?;
    let records = est
        .records
        .iter()
        .map(|r| TrialRow {
            trial: r.trial,
            group: r.system,
            accepted: r.accepted,
            success: r.correct,
            angle_deg: r.threshold_angle_deg,
            count: None,
        })
        .collect();
    let summary = RatesSummary {
        solver: spec.attack.solver,
        num_sketches: spec.num_sketches,
        k: spec.attack.k,
        theta_prime_deg: spec.pairwise_noise_theta.to_degrees(),
        theta_t_deg: spec.attack.theta_t.to_degrees(),
        log2_r_k: -est.odds.log2_p,
        log2_r_k_lower_bound: -est.odds.log2_lower_bound,
        simulated_log2_r_k: est.simulated_log2_p.map(|x| -x),
        r_k: est.model.r_k,
        t_k: est.t_k,
        p_k: est.p_k,
        p_f: est.p_f,
        p_joint: est.p_joint,
        d: est.d,
        t_all: est.t_all,
    };
    Ok((Summary::Rates(summary), records))
}

fn end_to_end(
    spec: &ExperimentSpec,
    params: CodeParams,
    fixed: &Option<Template>,
    seconds: &mut Vec<f64>,
) -> Result<(Summary, Vec<TrialRow>)> {
    let runs = par_map(spec.trials, spec.workers, |i| -> Result<(TrialRow, f64)> {
        let stream = trial_stream(spec.seed, i);
        let mut rng = RandomStream::new(spec.seed, stream);
        let w = secret(spec, fixed, &mut rng)?;
        let readings = challenger_sample(&w, spec.num_sketches, spec.pairwise_noise_theta, &mut rng)?;
        let sketches = readings
            .iter()
            .map(|r| sketch(r, &params, &mut rng).map(|(s, _)| s))
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = spec.attack.clone();
        cfg.seed = spec.seed;
        cfg.stream_id = stream ^ (1 << 48);
        let started = Instant::now();
        let out = run_attack(&sketches, &cfg)?;
        let elapsed = started.elapsed().as_secs_f64();
        let angle = out.recovered.as_ref().map(|v| unsigned_angle(v, &w));
        Ok((
            TrialRow {
                trial: i,
                group: i,
                accepted: out.accepted,
                success: angle.is_some_and(|a| a <= spec.attack.theta_t),
                angle_deg: angle.map(f64::to_degrees),
                count: Some(out.outer_iterations),
            },
            elapsed,
        ))
    });
    let mut records = Vec::with_capacity(spec.trials);
    for r in runs {
        let (row, t) = r?;
        records.push(row);
        seconds.push(t);
    }
    let n = records.len() as u64;
    let iters: Vec<f64> = records.iter().map(|r| r.count.unwrap_or(0) as f64).collect();
    let summary = EndToEndSummary {
        success: wilson(records.iter().filter(|r| r.success).count() as u64, n),
        accepted: wilson(records.iter().filter(|r| r.accepted).count() as u64, n),
        mean_outer_iterations: mean_estimate(&iters).mean,
    };
    Ok((Summary::EndToEnd(summary), records))
}

fn defense(spec: &ExperimentSpec, params: CodeParams) -> Result<(Summary, Vec<TrialRow>)> {
    let d = &spec.defense;
    let p_r = recovery_rate(&params, d.theta_a, d.theta_i, spec.trials, spec.seed, spec.workers)?;
    let theta_r = nearest_codeword_angle(&params, d.theta_r_trials.max(1), spec.seed ^ 0x5eed, spec.workers)?;
    let sweep = if d.theta_grid.is_empty() {
        Vec::new()
    } else {
        let cfg = DefenseSweepConfig {
            trials: spec.trials,
            theta_r_trials: d.theta_r_trials.max(1),
            seed: spec.seed,
            workers: spec.workers,
            ..Default::default()
        };
        defense_sweep(&params, d.p_r_target, &d.theta_grid, &cfg)?
    };
    let summary = DefenseSummary {
        theta_a_deg: d.theta_a.to_degrees(),
        theta_i_deg: d.theta_i.to_degrees(),
        p_r,
        theta_r_deg: MeanEstimate {
            mean: theta_r.mean.to_degrees(),
            std_error: theta_r.std_error.to_degrees(),
            count: theta_r.count,
        },
        sweep,
    };
    Ok((Summary::Defense(summary), Vec::new()))
}

fn tmto(
    spec: &ExperimentSpec,
    params: CodeParams,
    fixed: &Option<Template>,
    seconds: &mut Vec<f64>,
) -> Result<(Summary, Vec<TrialRow>)> {
    let runs = par_map(spec.trials, spec.workers, |i| -> Result<(TrialRow, u64, f64)> {
        let mut rng = RandomStream::new(spec.seed, trial_stream(spec.seed, i));
        let w = secret(spec, fixed, &mut rng)?;
        let readings = challenger_sample(&w, 2, spec.pairwise_noise_theta, &mut rng)?;
        let (m1, c1) = sketch(&readings[0], &params, &mut rng)?;
        let (m2, _) = sketch(&readings[1], &params, &mut rng)?;
        let started = Instant::now();
        let out = tmto_attack(&m1, &m2, &spec.tmto, &mut rng)?;
        let elapsed = started.elapsed().as_secs_f64();
        let neg = c1.negated();
        let found = out.candidates.iter().any(|c| *c == c1 || *c == neg);
        Ok((
            TrialRow {
                trial: i,
                group: i,
                accepted: !out.candidates.is_empty(),
                success: found,
                angle_deg: None,
                count: Some(out.candidates.len() as u64),
            },
            out.rounds as u64,
            elapsed,
        ))
    });
    let mut records = Vec::with_capacity(spec.trials);
    let mut rounds = Vec::new();
    for r in runs {
        let (row, k, t) = r?;
        records.push(row);
        rounds.push(k as f64);
        seconds.push(t);
    }
    let counts: Vec<f64> = records.iter().map(|r| r.count.unwrap_or(0) as f64).collect();
    let summary = TmtoSummary {
        found: wilson(records.iter().filter(|r| r.success).count() as u64, records.len() as u64),
        mean_candidates: mean_estimate(&counts).mean,
        mean_rounds: mean_estimate(&rounds).mean,
    };
    Ok((Summary::Tmto(summary), records))
}

fn rotation(
    spec: &ExperimentSpec,
    params: CodeParams,
    fixed: &Option<Template>,
    seconds: &mut Vec<f64>,
) -> Result<(Summary, Vec<TrialRow>)> {
    let theta_t = spec.attack.theta_t;
    let runs = par_map(spec.trials, spec.workers, |i| -> Result<(TrialRow, f64)> {
        let mut rng = RandomStream::new(spec.seed, trial_stream(spec.seed, i));
        let w = secret(spec, fixed, &mut rng)?;
        let s = structured_sketch(&w, &params, &mut rng)?;
        let started = Instant::now();
        let out = rotation_attack_detailed(&s.matrix, &params, spec.rotation_m, theta_t, &mut rng)?;
        let elapsed = started.elapsed().as_secs_f64();
        let angle = out.recovered.as_ref().map(|v| unsigned_angle(v, &w));
        Ok((
            TrialRow {
                trial: i,
                group: i,
                accepted: out.recovered.is_some(),
                success: angle.is_some_and(|a| a < theta_t),
                angle_deg: angle.map(f64::to_degrees),
                count: Some(out.null_dim as u64),
            },
            elapsed,
        ))
    });
    let mut records = Vec::with_capacity(spec.trials);
    for r in runs {
        let (row, t) = r?;
        records.push(row);
        seconds.push(t);
    }
    let n = records.len() as u64;
    let summary = RotationSummary {
        success: wilson(records.iter().filter(|r| r.success).count() as u64, n),
        returned: wilson(records.iter().filter(|r| r.accepted).count() as u64, n),
    };
    Ok((Summary::Rotation(summary), records))
}
