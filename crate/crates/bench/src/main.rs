use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use rt2pl::pipeline::{estimate_three_view_pose, EstimatorConfig, PoseEstimate, SolverVariant};
use rt2pl::scene::{generate_scene, ScenarioConfig, SceneMode};
use rt2pl::trackfile::{format_scene, read_tracks, IngestOptions};
use rt2pl::translation::LigtVariant;
use rt2pl_bench::experiments::{pose_errors, solve_scene};
use rt2pl_bench::record::{gnuplot_blocks, write_csv, write_summary_csv};
use rt2pl_bench::spec::{ExperimentKind, ExperimentSpec, InitMode};
use rt2pl_bench::{run_experiment, summarize};
use serde_json::json;

#[derive(Parser)]
#[command(name = "rt2pl", version, about = "Three-view relative pose from points and lines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate one synthetic scene, solve it and print the errors as JSON.
    Synth {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(long, default_value = "rt2pl")]
        variant: SolverVariant,
        /// Start near the truth instead of running RANSAC from the identity.
        #[arg(long)]
        near_truth: bool,
    },
    /// Accuracy against pixel noise, per variant and scene mode.
    SweepNoise(ExperimentArgs),
    /// Accuracy, outlier classification and timing against outlier fraction.
    SweepOutliers(ExperimentArgs),
    /// Success rate against initial deviation; optionally exports the cost landscape.
    Convergence {
        #[command(flatten)]
        exp: ExperimentArgs,
        /// Write the cost landscape (CSV) here.
        #[arg(long)]
        landscape: Option<PathBuf>,
    },
    /// Translation accuracy against rotation perturbation and noise.
    Ligt(ExperimentArgs),
    /// Estimate the pose of a track file and print it as JSON.
    Estimate {
        trackfile: PathBuf,
        #[arg(long, default_value = "rt2pl")]
        variant: SolverVariant,
        /// Treat malformed records as errors.
        #[arg(long)]
        strict: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a synthetic scene as a track file.
    ExportScene {
        #[command(flatten)]
        scene: SceneArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write the ground truth as JSON.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
}

#[derive(Args, Clone)]
struct SceneArgs {
    #[arg(long, default_value_t = 15)]
    points: usize,
    #[arg(long, default_value_t = 15)]
    lines: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    outliers: f64,
    #[arg(long, default_value = "general")]
    mode: SceneMode,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SceneArgs {
    fn config(&self) -> ScenarioConfig {
        ScenarioConfig {
            n_points: self.points,
            n_lines: self.lines,
            noise_std: self.noise,
            outlier_fraction: self.outliers,
            mode: self.mode,
            rng_seed: self.seed,
            ..ScenarioConfig::default()
        }
    }
}

#[derive(Args, Clone)]
struct ExperimentArgs {
    /// TOML file overriding the experiment defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<SolverVariant>>,
    #[arg(long, value_delimiter = ',')]
    modes: Option<Vec<SceneMode>>,
    #[arg(long, value_delimiter = ',')]
    noise: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    outliers: Option<Vec<f64>>,
    /// Degrees.
    #[arg(long, value_delimiter = ',')]
    deviations: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    ligt_variants: Option<Vec<LigtVariant>>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long)]
    lines: Option<usize>,
    /// `near-truth` or `ransac`.
    #[arg(long, value_parser = parse_init)]
    init: Option<InitMode>,
    #[arg(long)]
    threads: Option<usize>,
    /// Per-trial CSV.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Per-node summary CSV; printed to stdout when no output is given.
    #[arg(long)]
    summary: Option<PathBuf>,
    /// Plot-ready whitespace table.
    #[arg(long)]
    gnuplot: Option<PathBuf>,
}

fn parse_init(s: &str) -> std::result::Result<InitMode, String> {
    match s {
        "near-truth" | "near_truth" => Ok(InitMode::NearTruth),
        "ransac" => Ok(InitMode::Ransac),
        _ => Err(format!("unknown initialization `{s}`")),
    }
}

impl ExperimentArgs {
    fn spec(&self, kind: ExperimentKind) -> Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => ExperimentSpec::load(path, kind).with_context(|| format!("reading {}", path.display()))?,
            None => ExperimentSpec::for_kind(kind),
        };
        if let Some(v) = self.trials {
            spec.trials = v;
        }
        if let Some(v) = self.seed {
            spec.seed = v;
        }
        if let Some(v) = &self.variants {
            spec.variants = v.clone();
        }
        if let Some(v) = &self.modes {
            spec.modes = v.clone();
        }
        if let Some(v) = &self.noise {
            spec.noise_levels = v.clone();
        }
        if let Some(v) = &self.outliers {
            spec.outlier_fractions = v.clone();
        }
        if let Some(v) = &self.deviations {
            spec.deviations_deg = v.clone();
        }
        if let Some(v) = &self.ligt_variants {
            spec.ligt_variants = v.clone();
        }
        if let Some(v) = self.points {
            spec.scene.n_points = v;
        }
        if let Some(v) = self.lines {
            spec.scene.n_lines = v;
        }
        if let Some(v) = self.init {
            spec.init = v;
        }
        if let Some(v) = self.threads {
            spec.threads = Some(v);
        }
        if let Some(v) = &self.output {
            spec.output = Some(v.clone());
        }
        spec.validate()?;
        Ok(spec)
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn run_sweep(args: &ExperimentArgs, kind: ExperimentKind, x: fn(&rt2pl_bench::SummaryRow) -> f64) -> Result<()> {
    let spec = args.spec(kind)?;
    let out = run_experiment(&spec)?;
    let summary = summarize(&out.records);
    if let Some(path) = &spec.output {
        write_csv(create(path)?, &out.records)?;
    }
    match &args.summary {
        Some(path) => write_summary_csv(create(path)?, &summary)?,
        None if spec.output.is_none() => write_summary_csv(std::io::stdout().lock(), &summary)?,
        None => {}
    }
    if let Some(path) = &args.gnuplot {
        create(path)?.write_all(gnuplot_blocks(&summary, x).as_bytes())?;
    }
    let failures: usize = summary.iter().map(|r| r.failures).sum();
    eprintln!("{} trials, {} flagged", out.records.len(), failures);
    Ok(())
}

fn pose_json(pose: &PoseEstimate) -> serde_json::Value {
    let translations = pose.relative_translations().map(|(a, b)| [a, b]);
    json!({
        "variant": pose.variant,
        "r10": pose.rotations.r10(),
        "r12": pose.rotations.r12(),
        "cayley10": pose.rotations.c10,
        "cayley12": pose.rotations.c12,
        "pure_rotation": pose.pure_rotation(),
        "t01": translations.map(|t| t[0]),
        "t12": translations.map(|t| t[1]),
        "point_inliers": pose.point_inliers.iter().filter(|&&b| b).count(),
        "line_inliers": pose.line_inliers.iter().filter(|&&b| b).count(),
        "diagnostics": pose.diagnostics,
    })
}

/// Outcome of a subcommand that runs the solver directly.
enum Solved {
    Ok,
    SolverFailed(String),
}

fn run(cli: Cli) -> Result<Solved> {
    match cli.command {
        Command::Synth {
            scene,
            variant,
            near_truth,
        } => {
            let cfg = scene.config();
            let s = generate_scene(&cfg)?;
            let spec = ExperimentSpec {
                init: if near_truth { InitMode::NearTruth } else { InitMode::Ransac },
                ..ExperimentSpec::default()
            };
            let pose = match solve_scene(&spec, &s, variant, 0.0, cfg.rng_seed) {
                Ok(p) => p,
                Err(e) => return Ok(Solved::SolverFailed(e.to_string())),
            };
            let (e_rot, e_t) = pose_errors(&s, &pose);
            let mut value = pose_json(&pose);
            value["e_rot_deg"] = json!(e_rot);
            value["e_t_deg"] = json!(if e_t.is_finite() { Some(e_t) } else { None });
            value["scene"] = json!(cfg);
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::SweepNoise(args) => run_sweep(&args, ExperimentKind::NoiseSweep, |r| r.noise_std)?,
        Command::SweepOutliers(args) => run_sweep(&args, ExperimentKind::OutlierSweep, |r| r.outlier_fraction)?,
        Command::Ligt(args) => run_sweep(&args, ExperimentKind::LigtResilience, |r| {
            if r.deviation_deg > 0.0 {
                r.deviation_deg
            } else {
                r.noise_std
            }
        })?,
        Command::Convergence { exp, landscape } => {
            run_sweep(&exp, ExperimentKind::Convergence, |r| r.deviation_deg)?;
            if let Some(path) = landscape {
                let mut spec = exp.spec(ExperimentKind::CostLandscape)?;
                if exp.config.is_none() {
                    spec = ExperimentSpec {
                        seed: spec.seed,
                        ..ExperimentSpec::for_kind(ExperimentKind::CostLandscape)
                    };
                }
                spec.kind = ExperimentKind::CostLandscape;
                let out = run_experiment(&spec)?;
                let mut w = csv::Writer::from_writer(create(&path)?);
                for s in &out.landscape {
                    w.serialize(s)?;
                }
                w.flush()?;
            }
        }
        Command::Estimate {
            trackfile,
            variant,
            strict,
            seed,
        } => {
            let file = File::open(&trackfile).with_context(|| format!("opening {}", trackfile.display()))?;
            let opts = IngestOptions {
                strict,
                ..IngestOptions::default()
            };
            let tracks = read_tracks(BufReader::new(file), &opts)?;
            for w in &tracks.warnings {
                eprintln!("{}:{}: {}", trackfile.display(), w.line, w.message);
            }
            let mut cfg = EstimatorConfig::for_variant(variant);
            cfg.ransac.rng_seed = seed;
            let pose = match estimate_three_view_pose(&tracks.points, &tracks.lines, &cfg) {
                Ok(p) => p,
                Err(e) => return Ok(Solved::SolverFailed(e.to_string())),
            };
            let mut value = pose_json(&pose);
            value["warnings"] = json!(tracks.warnings.len());
            println!("{}", serde_json::to_string_pretty(&value)?);
        }
        Command::ExportScene { scene, output, truth } => {
            let cfg = scene.config();
            let s = generate_scene(&cfg)?;
            let text = format_scene(&s);
            match output {
                Some(path) => create(&path)?.write_all(text.as_bytes())?,
                None => print!("{text}"),
            }
            if let Some(path) = truth {
                let (t01, t12) = s.gt_relative_translations();
                let value = json!({
                    "scene": cfg,
                    "r10": s.gt_r10,
                    "r12": s.gt_r12,
                    "t01": t01,
                    "t12": t12,
                    "point_outliers": s.point_outliers,
                    "line_outliers": s.line_outliers,
                });
                create(&path)?.write_all(serde_json::to_string_pretty(&value)?.as_bytes())?;
            }
        }
    }
    Ok(Solved::Ok)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(Solved::Ok) => ExitCode::SUCCESS,
        Ok(Solved::SolverFailed(msg)) => {
            eprintln!("error: solver failed: {msg}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
