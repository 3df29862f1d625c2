use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ironmask_core::ironmask::{authenticate_detailed, enroll, DefenseParams, ProtectedRecord};
use ironmask_core::plra::{run_attack_parallel, AttackConfig, SolverKind};
use ironmask_core::{CodeParams, Error, RandomStream, Result};
use ironmask_lab::challenger::challenger_sample;
use ironmask_lab::embeddings::load_embeddings;
use ironmask_lab::experiment::{run_experiment, ExperimentSpec, Report, Scenario};

#[derive(Parser)]
#[command(name = "ironmask-lab", version, about = "Sketching, attacks and rate experiments on IronMask")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Solver {
    Svd,
    Lsa,
}

impl From<Solver> for SolverKind {
    fn from(s: Solver) -> Self {
        match s {
            Solver::Svd => SolverKind::Svd,
            Solver::Lsa => SolverKind::Lsa,
        }
    }
}

/// Flags shared by the experiment subcommands. Angles are in degrees.
#[derive(Args, Clone)]
struct Common {
    #[arg(long, default_value_t = 512)]
    n: usize,
    #[arg(long, default_value_t = 16)]
    alpha: usize,
    #[arg(long, default_value_t = 3)]
    sketches: usize,
    #[arg(long, default_value_t = 280)]
    k: usize,
    #[arg(long, value_enum, default_value = "lsa")]
    solver: Solver,
    #[arg(long, default_value_t = 30.0)]
    theta_t: f64,
    /// Pairwise angle between readings.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Output directory for report.json, trials.csv and table.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON experiment spec; replaces every other flag except --out.
    #[arg(long)]
    config: Option<PathBuf>,
}

impl Common {
    fn spec(&self, scenario: Scenario) -> ExperimentSpec {
        let mut attack = AttackConfig::new(self.solver.into(), self.k, self.theta_t.to_radians());
        attack.seed = self.seed;
        let mut spec = ExperimentSpec::new(scenario, self.n, self.alpha, attack);
        spec.num_sketches = self.sketches;
        spec.pairwise_noise_theta = self.noise.to_radians();
        spec.trials = self.trials;
        spec.seed = self.seed;
        spec.workers = self.workers;
        spec.output_path = self.out.clone();
        spec
    }
}

#[derive(Subcommand)]
enum Command {
    /// Enroll templates into protected records, or authenticate against one.
    #[command(subcommand)]
    Sketch(SketchCommand),
    /// Run the linear regression attack on record files.
    Attack(AttackArgs),
    /// Estimate r_k, t_k, p_k and p_f on planted systems, or run full attacks with --end-to-end.
    Rates(RatesArgs),
    /// Recovery rate under extra enrollment noise, with an optional sweep over query noise.
    Defense(DefenseArgs),
    /// Time-memory trade-off attack on planted pairs of sketches.
    Tmto(TmtoArgs),
    /// Attack on structured sketches built from a plane rotation.
    Rotation(RotationArgs),
    /// Re-render the CSV files of a saved report.
    Report(ReportArgs),
    /// Run an experiment spec file.
    Run(RunArgs),
}

#[derive(Subcommand)]
enum SketchCommand {
    /// Writes record_NNN.json (+ .bin) per reading into --out.
    Enroll {
        #[arg(long)]
        template: PathBuf,
        /// Row of the template file to enroll.
        #[arg(long, default_value_t = 0)]
        row: usize,
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 16)]
        alpha: usize,
        /// Number of records, one per noisy reading.
        #[arg(long, default_value_t = 1)]
        count: usize,
        /// Pairwise angle between readings, degrees.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Extra enrollment noise, degrees.
        #[arg(long, default_value_t = 0.0)]
        theta_a: f64,
        #[arg(long, default_value_t = 0)]
        n_fake: usize,
        #[arg(long, default_value_t = 1)]
        hash_cost: u32,
        /// Commit to the codeword together with the matrix.
        #[arg(long)]
        commit_matrix: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Authenticates a query template against a record.
    Auth {
        #[arg(long)]
        record: PathBuf,
        #[arg(long)]
        query: PathBuf,
        #[arg(long, default_value_t = 0)]
        row: usize,
    },
}

#[derive(Args)]
struct AttackArgs {
    /// Record files; each must hold a single matrix.
    #[arg(long, num_args = 2.., required = true)]
    records: Vec<PathBuf>,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "lsa")]
    solver: Solver,
    #[arg(long, default_value_t = 30.0)]
    theta_t: f64,
    /// Residual bound for local search.
    #[arg(long)]
    d: Option<f64>,
    /// Local-search restarts per sampled system.
    #[arg(long, default_value_t = 1)]
    t_th: usize,
    #[arg(long, default_value_t = 1_000_000)]
    max_iterations: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    workers: usize,
    /// Where to write the recovered template (little-endian f64).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RatesArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    end_to_end: bool,
    /// Local-search restarts per planted system.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long)]
    d: Option<f64>,
    #[arg(long, default_value_t = 0)]
    timing_solves: usize,
    #[arg(long, default_value_t = 0)]
    bernoulli_trials: u64,
    #[arg(long)]
    template: Option<PathBuf>,
}

#[derive(Args)]
struct DefenseArgs {
    #[command(flatten)]
    common: Common,
    /// Extra enrollment noise, degrees.
    #[arg(long, default_value_t = 0.0)]
    theta_a: f64,
    /// Query noise, degrees.
    #[arg(long, default_value_t = 0.0)]
    theta_i: f64,
    /// Comma-separated query noise grid, degrees.
    #[arg(long, value_delimiter = ',')]
    grid: Vec<f64>,
    #[arg(long, default_value_t = 0.9)]
    target: f64,
}

#[derive(Args)]
struct TmtoArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 4)]
    m_rows: usize,
    /// Quantization bucket width as log2 (bucket = 2^-bits).
    #[arg(long, default_value_t = 20)]
    bucket_bits: i32,
    #[arg(long, default_value_t = 8)]
    max_rounds: usize,
}

#[derive(Args)]
struct RotationArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long, default_value_t = 8)]
    m: usize,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn load_spec(path: &Path, out: &Option<PathBuf>) -> Result<ExperimentSpec> {
    let mut spec: ExperimentSpec = serde_json::from_slice(&fs::read(path)?)?;
    if out.is_some() {
        spec.output_path = out.clone();
    }
    Ok(spec)
}

fn template_row(path: &Path, n: usize, row: usize) -> Result<ironmask_core::Template> {
    let mut rows = load_embeddings(path, n)?;
    if row >= rows.len() {
        return Err(Error::InvalidConfig(format!("row {row} out of range ({} rows)", rows.len())));
    }
    Ok(rows.swap_remove(row))
}

fn experiment(spec: ExperimentSpec) -> Result<()> {
    let report = run_experiment(&spec)?;
    println!("{}", serde_json::to_string_pretty(&report.summary)?);
    if let Some(s) = report.metadata.median_trial_seconds {
        println!("median trial time: {s:.3} s");
    }
    println!("wall clock: {:.3} s", report.metadata.wall_clock_seconds);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Sketch(SketchCommand::Enroll {
            template,
            row,
            n,
            alpha,
            count,
            noise,
            theta_a,
            n_fake,
            hash_cost,
            commit_matrix,
            seed,
            out,
        }) => {
            let params = CodeParams::new(n, alpha)?;
            let w = template_row(&template, n, row)?;
            let mut rng = RandomStream::new(seed, 0);
            let readings = challenger_sample(&w, count, noise.to_radians(), &mut rng)?;
            let defense = DefenseParams {
                theta_a: theta_a.to_radians(),
                n_fake,
                commit_binds_matrix: commit_matrix,
            };
            fs::create_dir_all(&out)?;
            for (i, r) in readings.iter().enumerate() {
                let record = enroll(r, &params, &defense, hash_cost, &mut rng)?;
                let path = out.join(format!("record_{i:03}.json"));
                record.save(&path)?;
                println!("{}", path.display());
            }
        }
        Command::Sketch(SketchCommand::Auth { record, query, row }) => {
            let record = ProtectedRecord::load(&record)?;
            let q = template_row(&query, record.params().n(), row)?;
            let out = authenticate_detailed(&q, &record)?;
            println!(
                "{} (matrix {}, {} decodes)",
                if out.accepted { "accepted" } else { "rejected" },
                out.chosen_index,
                out.decode_calls
            );
        }
        Command::Attack(a) => {
            let mut sketches = Vec::with_capacity(a.records.len());
            for path in &a.records {
                let record = ProtectedRecord::load(path)?;
                if record.n_fake() > 0 {
                    return Err(Error::InvalidConfig(format!("{} holds decoy matrices", path.display())));
                }
                sketches.extend(record.sketches());
            }
            let mut cfg = AttackConfig::new(a.solver.into(), a.k, a.theta_t.to_radians());
            cfg.d = a.d;
            cfg.t_th = a.t_th;
            cfg.max_outer_iterations = a.max_iterations;
            cfg.seed = a.seed;
            let out = run_attack_parallel(&sketches, &cfg, a.workers)?;
            println!(
                "accepted: {}, outer iterations: {}, solver time: {:.3} s",
                out.accepted, out.outer_iterations, out.solver_time_total
            );
            if let (Some(w), Some(path)) = (&out.recovered, &a.out) {
                ironmask_lab::embeddings::save_embeddings(path, std::slice::from_ref(w))?;
                println!("template written to {}", path.display());
            }
        }
        Command::Rates(r) => {
            let spec = match &r.common.config {
                Some(path) => load_spec(path, &r.common.out)?,
                None => {
                    let scenario = if r.common.noise > 0.0 { Scenario::Noisy } else { Scenario::Noiseless };
                    let mut spec = r.common.spec(scenario);
                    spec.end_to_end = r.end_to_end;
                    spec.attack.t_th = r.restarts;
                    spec.attack.d = r.d;
                    spec.timing_solves = r.timing_solves;
                    spec.bernoulli_trials = r.bernoulli_trials;
                    spec.template_path = r.template.clone();
                    spec
                }
            };
            experiment(spec)?;
        }
        Command::Defense(d) => {
            let spec = match &d.common.config {
                Some(path) => load_spec(path, &d.common.out)?,
                None => {
                    let mut spec = d.common.spec(Scenario::Defense);
                    spec.defense.theta_a = d.theta_a.to_radians();
                    spec.defense.theta_i = d.theta_i.to_radians();
                    spec.defense.theta_grid = d.grid.iter().map(|x| x.to_radians()).collect();
                    spec.defense.p_r_target = d.target;
                    spec
                }
            };
            experiment(spec)?;
        }
        Command::Tmto(t) => {
            let spec = match &t.common.config {
                Some(path) => load_spec(path, &t.common.out)?,
                None => {
                    let mut spec = t.common.spec(Scenario::Tmto);
                    spec.tmto.m_rows = t.m_rows;
                    spec.tmto.bucket = (-(t.bucket_bits as f64)).exp2();
                    spec.tmto.max_rounds = t.max_rounds;
                    spec
                }
            };
            experiment(spec)?;
        }
        Command::Rotation(r) => {
            let spec = match &r.common.config {
                Some(path) => load_spec(path, &r.common.out)?,
                None => {
                    let mut spec = r.common.spec(Scenario::Rotation);
                    spec.rotation_m = r.m;
                    spec
                }
            };
            experiment(spec)?;
        }
        Command::Report(r) => {
            let report = Report::read_json(&r.input)?;
            report.write_all(&r.out)?;
            let gap = report.t_all_gap();
            if gap > 1e-9 {
                return Err(Error::Format(format!("stored t_all disagrees with its inputs (relative gap {gap:e})")));
            }
            println!("wrote {}", r.out.display());
        }
        Command::Run(r) => experiment(load_spec(&r.config, &r.out)?)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
