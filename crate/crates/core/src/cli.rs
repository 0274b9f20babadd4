//! Batch command-line interface.
//!
//! Every subcommand exits 0 on success. Failures print one line,
//! `error: <message>`, to stderr and exit 1.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::autodiff::SlotSelection;
use crate::error::{Error, Result};
use crate::geometry::{geodesic_patches, normalize, Point3};
use crate::io::{self, RunConfig, SampleMode};
use crate::metrics::MetricReport;
use crate::training::{gradcheck_config, load_checkpoint, network_grad_check, save_checkpoint, Trainer};

#[derive(Debug, Parser)]
#[command(name = "spunet", version, about = "Self-supervised point cloud upsampling")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample a point cloud from a triangle mesh (.obj or .ply).
    SampleMesh {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(short, long, default_value_t = 2048)]
        n: usize,
        /// `poisson-disk` or `area-weighted`.
        #[arg(long, default_value = "poisson-disk")]
        mode: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Crop normalized geodesic patches from a cloud; writes one .xyz per
    /// patch and a manifest.json with each patch's center and scale.
    MakePatches {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
        /// Patch size, patch count and graph k come from this config.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Train from the dataset directory named in the config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Continue from the configured checkpoint if it exists.
        #[arg(long)]
        resume: bool,
    },
    /// Upsample a cloud with a trained checkpoint.
    Upsample {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare a prediction with ground truth; prints values x1e3 and
    /// writes report.txt and report.json at full precision.
    Eval {
        #[arg(long)]
        pred: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Surface for the point-to-surface distance.
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Sparse input, only counted for the report.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.004, 0.006, 0.008, 0.010, 0.012])]
        p: Vec<f64>,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
    },
    /// Finite-difference check of the network and joint loss.
    Gradcheck {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 1e-4)]
        threshold: f64,
        /// Check at most this many entries per parameter; 0 checks all.
        #[arg(long, default_value_t = 0)]
        per_param: usize,
    },
}

/// Parse arguments, run, and return the process exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.to_string().replace('\n', " "));
            1
        }
    }
}

fn load_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        Some(p) => RunConfig::load(p),
        None => RunConfig::preset("desk"),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => create_dir(p),
        _ => Ok(()),
    }
}

#[derive(Serialize)]
struct ManifestEntry {
    file: String,
    center: Point3,
    scale: f64,
    used_fallback: bool,
    source_indices: Vec<usize>,
}

pub fn run(command: Command) -> Result<i32> {
    match command {
        Command::SampleMesh {
            mesh,
            out,
            n,
            mode,
            seed,
        } => {
            let mode: SampleMode = mode.parse()?;
            let cloud = io::sample_mesh(&io::read_mesh(&mesh)?, n, mode, seed)?;
            ensure_parent(&out)?;
            io::write_xyz(&out, cloud.points())?;
            println!("wrote {} points to {}", cloud.len(), out.display());
        }
        Command::MakePatches { input, out_dir, config } => {
            let cfg = load_config(config.as_deref())?;
            let cloud = io::read_points(&input)?;
            let n = cfg.patches_per_model.min(cloud.len());
            let patches = geodesic_patches(&cloud, n, cfg.patch_size, cfg.graph_k)?;
            create_dir(&out_dir)?;
            let mut manifest = Vec::with_capacity(patches.len());
            for (i, patch) in patches.into_iter().enumerate() {
                let file = format!("patch_{i:04}.xyz");
                io::write_xyz(&out_dir.join(&file), &patch.points)?;
                manifest.push(ManifestEntry {
                    file,
                    center: patch.center,
                    scale: patch.scale,
                    used_fallback: patch.used_fallback,
                    source_indices: patch.source_indices,
                });
            }
            let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
            io::write_atomic(&out_dir.join("manifest.json"), json.as_bytes())?;
            println!("wrote {} patches to {}", manifest.len(), out_dir.display());
        }
        Command::Train { config, resume } => train(&RunConfig::load(&config)?, resume)?,
        Command::Upsample {
            checkpoint,
            input,
            out,
        } => {
            let trainer = load_checkpoint(&checkpoint)?;
            let cloud = io::read_points(&input)?;
            let dense = trainer.upsample(&cloud)?;
            ensure_parent(&out)?;
            io::write_xyz(&out, dense.points())?;
            println!("wrote {} points to {}", dense.len(), out.display());
        }
        Command::Eval {
            pred,
            gt,
            mesh,
            input,
            p,
            out_dir,
        } => {
            let pred = io::read_points(&pred)?;
            let gt = io::read_points(&gt)?;
            let mesh = mesh.map(|m| io::read_mesh(&m)).transpose()?;
            let input_count = input.map(|i| io::read_points(&i).map(|c| c.len())).transpose()?;
            let report = MetricReport::evaluate(pred.points(), gt.points(), mesh.as_ref(), &p, input_count)?;
            create_dir(&out_dir)?;
            io::write_atomic(&out_dir.join("report.txt"), report.to_text().as_bytes())?;
            io::write_atomic(&out_dir.join("report.json"), report.to_json().as_bytes())?;
            println!("# metric value (distances and uniformity x1e3)");
            for (name, value) in report.entries() {
                if name.starts_with("n_") {
                    println!("{name} {value}");
                } else {
                    println!("{name} {}", value * 1e3);
                }
            }
        }
        Command::Gradcheck {
            config,
            threshold,
            per_param,
        } => {
            let run_cfg = load_config(config.as_deref())?;
            let base = run_cfg.train_config()?;
            let cfg = gradcheck_config(&base, run_cfg.gradcheck_patch);
            let patch = gradcheck_patch(cfg.patch_size, cfg.seed)?;
            let slots = if per_param == 0 {
                SlotSelection::All
            } else {
                SlotSelection::Sample {
                    per_param,
                    seed: cfg.seed,
                }
            };
            let report = network_grad_check(&cfg, &patch, run_cfg.gradcheck_eps, slots)?;
            let verdict = if report.max_relative_error < threshold { "PASS" } else { "FAIL" };
            println!(
                "{verdict} max_relative_error={:e} worst={} analytic={:e} numeric={:e} slots={}",
                report.max_relative_error, report.worst_slot, report.analytic, report.numeric, report.slots_checked
            );
            if verdict == "FAIL" {
                return Ok(1);
            }
        }
    }
    Ok(0)
}

/// A small normalized sphere patch used by the gradient check.
pub fn gradcheck_patch(n: usize, seed: u64) -> Result<Vec<Point3>> {
    let mesh = crate::geometry::primitives::icosphere(1.0, 2);
    let cloud = io::sample_mesh(&mesh, 4 * n, SampleMode::PoissonDisk, seed)?;
    let patch = geodesic_patches(&cloud, 1, n, 5)?;
    Ok(normalize(&patch[0].points)?.points)
}

fn train(cfg: &RunConfig, resume: bool) -> Result<()> {
    let train_cfg = cfg.train_config()?;
    let mut trainer = if resume && cfg.checkpoint.exists() {
        let t = load_checkpoint(&cfg.checkpoint)?;
        if t.config != train_cfg {
            return Err(Error::Config(format!(
                "checkpoint {} was trained with a different configuration",
                cfg.checkpoint.display()
            )));
        }
        t
    } else {
        Trainer::new(train_cfg)?
    };
    let data = io::load_dataset(&cfg.dataset_dir, cfg.mesh_points, cfg.seed)?;
    let clouds: Vec<_> = data.into_iter().map(|(_, c)| c).collect();
    let patches = trainer.make_patches(&clouds)?;
    let until = if cfg.max_steps > 0 {
        cfg.max_steps
    } else {
        trainer.total_steps(patches.len())
    };
    create_dir(&cfg.output_dir)?;
    ensure_parent(&cfg.checkpoint)?;
    let log_path = cfg.output_dir.join("train.log");
    let mut log_file = OpenOptions::new()
        .create(true)
        .append(true)
        .open(&log_path)
        .map_err(|e| Error::io(&log_path, e))?;
    log::info!(
        "training on {} patches from {} clouds, steps {}..{until}",
        patches.len(),
        clouds.len(),
        trainer.step
    );
    trainer.fit(&patches, until, |t, stats| {
        writeln!(log_file, "{stats}").map_err(|e| Error::io(&log_path, e))?;
        if cfg.checkpoint_every > 0 && t.step % cfg.checkpoint_every == 0 {
            save_checkpoint(t, &cfg.checkpoint)?;
        }
        if t.step % 100 == 0 {
            log::info!("{stats}");
        }
        Ok(())
    })?;
    save_checkpoint(&trainer, &cfg.checkpoint)?;
    println!("trained to step {}; checkpoint {}", trainer.step, cfg.checkpoint.display());
    Ok(())
}
