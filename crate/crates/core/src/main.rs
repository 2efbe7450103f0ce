use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use semnbv::clustering::{extract_clusters, write_clusters};
use semnbv::evaluation::{write_score_header, write_score_rows, GroundTruth};
use semnbv::harness::{
    parse_config, prepare_scene, run_episode_full, run_sweep, summarize, write_plot_csv, write_results_csv,
    ExperimentConfig, SweepResults,
};
use semnbv::planner::PlannerKind;
use semnbv::scene_sim::{read_scene, write_ground_truth, write_scene};
use semnbv::semantic_map::SemanticVoxelMap;
use semnbv::Result;

#[derive(Parser)]
#[command(name = "semnbv", version, about = "Semantic next-best-view planning on simulated tomato plants")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat `key = value` experiment file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed, overrides the config.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => parse_config(BufReader::new(File::open(p)?))?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = self.seed {
            c.seed = s;
        }
        Ok(c)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Writes one procedural plant placed in the workspace.
    GeneratePlant {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        scene: usize,
        #[arg(long, default_value_t = 0)]
        rotation: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write the object list as `class x y z` lines.
        #[arg(long)]
        ground_truth: Option<PathBuf>,
    },
    /// Runs one episode and writes its per-action rows.
    Run {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "semantic")]
        planner: PlannerKind,
        #[arg(long, default_value_t = 0)]
        scene: usize,
        #[arg(long, default_value_t = 0)]
        rotation: usize,
        /// Results CSV; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Per-object scores of every action.
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        dump_clusters: Option<PathBuf>,
        #[arg(long)]
        dump_map: Option<PathBuf>,
    },
    /// Runs every scene x rotation x planner episode.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Restricts the sweep to one planner.
        #[arg(long)]
        planner: Option<PlannerKind>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Mean PCO with confidence interval per planner and action.
        #[arg(long)]
        plot: Option<PathBuf>,
    },
    /// Scores an exported map against a scene file.
    Score {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        map: PathBuf,
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(create(p)?),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn print_summary(res: &SweepResults) {
    eprintln!("{:<18} {:>6} {:>6} {:>9} {:>9}", "planner", "action", "n", "mean_pco", "ci95");
    for s in summarize(res) {
        eprintln!(
            "{:<18} {:>6} {:>6} {:>9.2} {:>9.2}",
            s.planner.name(),
            s.action,
            s.n,
            s.mean_pco,
            s.ci_half_width
        );
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GeneratePlant {
            common,
            scene,
            rotation,
            out,
            ground_truth,
        } => {
            let c = common.load()?;
            let s = prepare_scene(&c, scene, rotation)?;
            let mut w = create(&out)?;
            write_scene(&s.scene, &mut w)?;
            w.flush()?;
            if let Some(p) = ground_truth {
                let mut w = create(&p)?;
                write_ground_truth(&s.scene, &mut w)?;
                w.flush()?;
            }
        }
        Command::Run {
            common,
            planner,
            scene,
            rotation,
            out,
            scores,
            dump_clusters,
            dump_map,
        } => {
            let mut c = common.load()?;
            c.planners = vec![planner];
            let s = prepare_scene(&c, scene, rotation)?;
            let outcome = run_episode_full(&s, &c, planner)?;
            let res = SweepResults {
                a_max: c.planner.a_max,
                planners: vec![planner],
                episodes: vec![outcome.record.clone()],
            };
            let mut w = output(out.as_deref().or(c.output.as_deref()))?;
            write_results_csv(&res, &mut w)?;
            w.flush()?;
            if let Some(p) = scores {
                let mut w = create(&p)?;
                write_score_header(&mut w)?;
                for a in &outcome.record.actions {
                    write_score_rows(a.action, &a.score, &mut w)?;
                }
                w.flush()?;
            }
            if let Some(p) = dump_clusters {
                let mut w = create(&p)?;
                write_clusters(&outcome.clusters, &mut w)?;
                w.flush()?;
            }
            if let Some(p) = dump_map {
                let mut w = create(&p)?;
                outcome.map.write_export(&mut w)?;
                w.flush()?;
            }
            let total: f64 = outcome.record.wall_times.iter().map(|d| d.as_secs_f64()).sum();
            eprintln!(
                "final pco {:.1} after {} actions ({:.2} s)",
                outcome.record.final_pco(),
                outcome.record.actions.len(),
                total
            );
        }
        Command::Sweep {
            common,
            planner,
            out,
            plot,
        } => {
            let mut c = common.load()?;
            if let Some(k) = planner {
                c.planners = vec![k];
            }
            let res = run_sweep(&c)?;
            let mut w = output(out.as_deref().or(c.output.as_deref()))?;
            write_results_csv(&res, &mut w)?;
            w.flush()?;
            if let Some(p) = plot {
                let mut w = create(&p)?;
                write_plot_csv(&summarize(&res), &mut w)?;
                w.flush()?;
            }
            print_summary(&res);
        }
        Command::Score {
            common,
            map,
            scene,
            out,
        } => {
            let c = common.load()?;
            let scene = read_scene(BufReader::new(File::open(scene)?))?;
            let map = SemanticVoxelMap::read_export(BufReader::new(File::open(map)?), c.map_resolution, c.bounds()?)?;
            let clusters = extract_clusters(&map, &c.clustering);
            let score = GroundTruth::new(&scene, &c.eval)?.score(&map, &clusters);
            let mut w = output(out.as_deref())?;
            write_score_header(&mut w)?;
            write_score_rows(0, &score, &mut w)?;
            w.flush()?;
            eprintln!("pco {:.1} ({} of {})", score.pco, score.detected(), score.scores.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut src = std::error::Error::source(&e);
            while let Some(s) = src {
                eprintln!("  caused by: {s}");
                src = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
