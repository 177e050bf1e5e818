//! vesselflow command line: phantom generation, network tracking,
//! evaluation, parameter sweeps and SWC export.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure.

mod config;

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use vesselflow::io::{load_volume, save_volume, ScalarType};
use vesselflow::metrics;
use vesselflow::network::{export_swc, export_topology, parse_topology, rasterize_mask};
use vesselflow::synth::{generate, write_centerline};
use vesselflow::tracker::track;
use vesselflow::{TrackerConfig64, Volume64};

use config::{load_grid, load_phantom_spec, load_tracker_config, parse_triple, ResolvedTracker};

#[derive(Parser)]
#[command(
    name = "vesselflow",
    version,
    about = "Track vessel-like networks in 3D volumes from a single seed point"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic phantom: volume, ground-truth mask, centerline.
    Generate {
        /// Phantom description (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Output prefix; writes <out>.vvol, <out>_mask.vvol, <out>_centerline.txt.
        #[arg(long)]
        out: PathBuf,
    },
    /// Track a vascular network and export topology, SWC and mask.
    Track {
        /// Input volume (.vvol or .nrrd/.nhdr).
        #[arg(long)]
        volume: PathBuf,
        /// Tracker configuration (TOML).
        #[arg(long)]
        config: PathBuf,
        /// Seed position "x,y,z" in mm (overrides the config).
        #[arg(long)]
        seed: Option<String>,
        /// Initial direction "dx,dy,dz" (overrides the config).
        #[arg(long)]
        direction: Option<String>,
        /// Output prefix; writes <out>_topology.txt, <out>.swc, <out>_mask.vvol.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare two binary masks (Dice, RMS and Hausdorff surface distances).
    Evaluate {
        #[arg(long = "mask-a")]
        mask_a: PathBuf,
        #[arg(long = "mask-b")]
        mask_b: PathBuf,
    },
    /// Run a parameter grid of track+evaluate and emit a CSV table.
    Sweep {
        #[arg(long)]
        volume: PathBuf,
        /// Reference mask for the Dice column.
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        config: PathBuf,
        /// Grid file (TOML) listing values for d_radius, d_max, alpha, s.
        #[arg(long)]
        grid: PathBuf,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert a topology export to SWC.
    ExportSwc {
        #[arg(long)]
        topology: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Usage problems exit 1, runtime failures exit 2.
enum CliError {
    Usage(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Generate { config, out } => cmd_generate(&config, &out)?,
        Command::Track {
            volume,
            config,
            seed,
            direction,
            out,
        } => {
            let cfg = resolve_track_config(&config, seed.as_deref(), direction.as_deref())?;
            cmd_track(&volume, &cfg, &out)?;
        }
        Command::Evaluate { mask_a, mask_b } => cmd_evaluate(&mask_a, &mask_b)?,
        Command::Sweep {
            volume,
            mask,
            config,
            grid,
            out,
        } => cmd_sweep(&volume, &mask, &config, &grid, out.as_deref())?,
        Command::ExportSwc { topology, out } => cmd_export_swc(&topology, &out)?,
    }
    Ok(())
}

fn cmd_generate(config: &Path, out: &Path) -> Result<()> {
    let spec = load_phantom_spec(config)?;
    let phantom = generate(&spec).context("generating phantom")?;

    let vol_path = out.with_extension("vvol");
    save_volume(&phantom.volume, &vol_path, ScalarType::F64).context("writing volume")?;
    let mask_path = suffixed(out, "_mask").with_extension("vvol");
    save_volume(&phantom.mask, &mask_path, ScalarType::U8).context("writing mask")?;
    let cl_path = suffixed(out, "_centerline").with_extension("txt");
    let mut w = BufWriter::new(File::create(&cl_path).context("creating centerline file")?);
    write_centerline(&phantom.centerline, &mut w).context("writing centerline")?;
    w.flush().ok();

    println!("wrote {}", vol_path.display());
    println!("wrote {}", mask_path.display());
    println!("wrote {}", cl_path.display());
    Ok(())
}

fn resolve_track_config(
    config: &Path,
    seed: Option<&str>,
    direction: Option<&str>,
) -> Result<TrackerConfig64, CliError> {
    let ResolvedTracker { mut cfg, has_seed, .. } = load_tracker_config(config)?;
    match seed {
        Some(s) => cfg.initial_seed = parse_triple(s).map_err(CliError::Usage)?,
        None if !has_seed => {
            return Err(CliError::Usage(anyhow!(
                "no seed given: add a [seed] section to the config or pass --seed \"x,y,z\""
            )))
        }
        None => {}
    }
    if let Some(d) = direction {
        cfg.initial_direction = Some(parse_triple(d).map_err(CliError::Usage)?);
    }
    Ok(cfg)
}

fn cmd_track(volume: &Path, cfg: &TrackerConfig64, out: &Path) -> Result<()> {
    let vol: Volume64 = load_volume(volume).context("loading volume")?;
    let net = track(&vol, cfg).context("tracking")?;

    let topo_path = suffixed(out, "_topology").with_extension("txt");
    let mut w = BufWriter::new(File::create(&topo_path).context("creating topology file")?);
    export_topology(&net, &mut w).context("writing topology")?;
    w.flush().ok();

    let swc_path = out.with_extension("swc");
    let mut w = BufWriter::new(File::create(&swc_path).context("creating SWC file")?);
    export_swc(&net.to_topology(), &mut w).context("writing SWC")?;
    w.flush().ok();

    let mask = rasterize_mask(&net, &vol);
    let mask_path = suffixed(out, "_mask").with_extension("vvol");
    save_volume(&mask, &mask_path, ScalarType::U8).context("writing mask")?;

    println!(
        "tracked {} branches ({} detections)",
        net.branches.len(),
        net.total_detections()
    );
    println!("wrote {}", topo_path.display());
    println!("wrote {}", swc_path.display());
    println!("wrote {}", mask_path.display());
    Ok(())
}

fn cmd_evaluate(mask_a: &Path, mask_b: &Path) -> Result<()> {
    let a: Volume64 = load_volume(mask_a).context("loading mask A")?;
    let b: Volume64 = load_volume(mask_b).context("loading mask B")?;
    let report = evaluate_report(&a, &b)?;
    print!("{report}");
    Ok(())
}

/// The `evaluate` report: `metric value unit` per line.
fn evaluate_report(a: &Volume64, b: &Volume64) -> Result<String> {
    let dice = metrics::dice(a, b).context("dice")?;
    let rms = metrics::surface_rms(a, b).context("surface rms")?;
    let hd = metrics::hausdorff(a, b).context("hausdorff")?;
    Ok(format!(
        "dice {dice} ratio\nsurface_rms {rms} mm\nhausdorff {hd} mm\n"
    ))
}

fn cmd_sweep(
    volume: &Path,
    mask: &Path,
    config: &Path,
    grid: &Path,
    out: Option<&Path>,
) -> Result<()> {
    let vol: Volume64 = load_volume(volume).context("loading volume")?;
    let reference: Volume64 = load_volume(mask).context("loading reference mask")?;
    let resolved = load_tracker_config(config)?;
    if !resolved.has_seed {
        return Err(anyhow!("sweep needs a [seed] section in the config"));
    }
    let grid = load_grid(grid)?;

    let base = &resolved.cfg;
    let axis = |values: &[f64], fallback: f64| -> Vec<f64> {
        if values.is_empty() {
            vec![fallback]
        } else {
            values.to_vec()
        }
    };
    let d_radius_values = axis(&grid.d_radius, base.graph.d_radius);
    let d_max_values = axis(&grid.d_max, base.graph.d_max);
    let alpha_values = axis(&grid.alpha, base.cone.alpha);
    let s_values = axis(&grid.s, base.cone.s);

    let mut table = String::from("d_radius,d_max,alpha,s,dice,note\n");
    for &d_radius in &d_radius_values {
        for &d_max in &d_max_values {
            for &alpha in &alpha_values {
                for &s in &s_values {
                    let mut cfg = resolved.cfg;
                    cfg.graph.d_radius = d_radius;
                    cfg.graph.d_max = d_max;
                    cfg.cone.alpha = alpha;
                    cfg.cone.s = s;
                    if resolved.search_radius_tied_to_s {
                        cfg.de.search_radius = s;
                    }
                    let (dice, note) = match track(&vol, &cfg) {
                        Ok(net) => {
                            let got = rasterize_mask(&net, &vol);
                            match metrics::dice(&got, &reference) {
                                Ok(d) => (d, String::from("ok")),
                                Err(e) => (0.0, e.to_string().replace(',', ";")),
                            }
                        }
                        Err(e) => (0.0, e.to_string().replace(',', ";")),
                    };
                    table.push_str(&format!("{d_radius},{d_max},{alpha},{s},{dice},{note}\n"));
                }
            }
        }
    }

    match out {
        Some(path) => std::fs::write(path, &table).context("writing sweep table")?,
        None => print!("{table}"),
    }
    Ok(())
}

fn cmd_export_swc(topology: &Path, out: &Path) -> Result<()> {
    let file = File::open(topology).context("opening topology file")?;
    let branches = parse_topology::<f64, _>(BufReader::new(file)).context("parsing topology")?;
    let mut w = BufWriter::new(File::create(out).context("creating SWC file")?);
    export_swc(&branches, &mut w).context("writing SWC")?;
    w.flush().ok();
    println!("wrote {}", out.display());
    Ok(())
}

/// `prefix` + suffix, preserving the directory part.
fn suffixed(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    name.push_str(suffix);
    prefix.with_file_name(name)
}
