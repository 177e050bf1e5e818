//! TOML configuration files.
//!
//! Tracker config (`key = value`, one section per subsystem; every key is
//! optional and falls back to the library default, except the seed which
//! may come from the command line instead):
//!
//! ```toml
//! [cone]
//! alpha = 1.0        # aperture angle, radians
//! s = 1.5            # sampling distance, mm
//! layers = 4
//!
//! [graph]
//! d_max = 3.0        # transition cutoff, mm
//! d_radius = 4.0     # toll radius, mm
//! k_toll = 5.0
//!
//! [de]
//! population = 30
//! generations = 60
//! weight = 0.7
//! crossover = 0.9
//! search_radius = 1.5   # defaults to cone.s
//! rng_seed = 7
//!
//! [selection]
//! sensitivity = 0.5
//!
//! [validation]
//! beta_dup = 1.0
//! beta_loop = 1.5
//!
//! [tracker]
//! max_iterations = 500
//!
//! [seed]
//! position = [64.0, 64.0, 32.0]   # mm
//! direction = [0.0, 0.0, 1.0]     # optional
//! ```
//!
//! Phantom config: a single `[phantom]` table matching
//! [`vesselflow::synth::PhantomSpec`] (`kind` selects the shape and its
//! parameters). Sweep grids: a `[grid]` table with value lists for any of
//! `d_radius`, `d_max`, `alpha`, `s`.

use std::path::Path;

use anyhow::{anyhow, Context, Result};
use serde::Deserialize;

use vesselflow::synth::PhantomSpec;
use vesselflow::vec3::Vec3;
use vesselflow::{TrackerConfig64, Vec3f};

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrackerFile {
    cone: ConeSection,
    graph: GraphSection,
    de: DeSection,
    selection: SelectionSection,
    validation: ValidationSection,
    tracker: TrackerSection,
    seed: Option<SeedSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ConeSection {
    alpha: Option<f64>,
    s: Option<f64>,
    layers: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GraphSection {
    d_max: Option<f64>,
    d_radius: Option<f64>,
    k_toll: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DeSection {
    population: Option<usize>,
    generations: Option<usize>,
    weight: Option<f64>,
    crossover: Option<f64>,
    search_radius: Option<f64>,
    rng_seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct SelectionSection {
    sensitivity: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ValidationSection {
    beta_dup: Option<f64>,
    beta_loop: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrackerSection {
    max_iterations: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SeedSection {
    position: [f64; 3],
    direction: Option<[f64; 3]>,
}

/// Tracker configuration resolved against the library defaults.
#[derive(Debug, Clone)]
pub struct ResolvedTracker {
    pub cfg: TrackerConfig64,
    /// Whether the seed position was present in the file (the CLI flag can
    /// supply it otherwise).
    pub has_seed: bool,
    /// When the file did not pin `de.search_radius`, it follows the cone
    /// sampling distance — also while sweeping over `s`.
    pub search_radius_tied_to_s: bool,
}

pub fn load_tracker_config(path: &Path) -> Result<ResolvedTracker> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let file: TrackerFile = toml::from_str(&text)
        .with_context(|| format!("parsing config {}", path.display()))?;

    let mut cfg = TrackerConfig64::default();
    if let Some(v) = file.cone.alpha {
        cfg.cone.alpha = v;
    }
    if let Some(v) = file.cone.s {
        cfg.cone.s = v;
    }
    if let Some(v) = file.cone.layers {
        cfg.cone.layers = v;
    }
    if let Some(v) = file.graph.d_max {
        cfg.graph.d_max = v;
    }
    if let Some(v) = file.graph.d_radius {
        cfg.graph.d_radius = v;
    }
    if let Some(v) = file.graph.k_toll {
        cfg.graph.k_toll = v;
    }
    if let Some(v) = file.de.population {
        cfg.de.population = v;
    }
    if let Some(v) = file.de.generations {
        cfg.de.generations = v;
    }
    if let Some(v) = file.de.weight {
        cfg.de.weight = v;
    }
    if let Some(v) = file.de.crossover {
        cfg.de.crossover = v;
    }
    if let Some(v) = file.de.rng_seed {
        cfg.de.rng_seed = v;
    }
    let tied = file.de.search_radius.is_none();
    cfg.de.search_radius = file.de.search_radius.unwrap_or(cfg.cone.s);
    if let Some(v) = file.selection.sensitivity {
        cfg.sensitivity = v;
    }
    if let Some(v) = file.validation.beta_dup {
        cfg.beta_dup = v;
    }
    if let Some(v) = file.validation.beta_loop {
        cfg.beta_loop = v;
    }
    if let Some(v) = file.tracker.max_iterations {
        cfg.max_iterations = v;
    }

    let mut has_seed = false;
    if let Some(seed) = file.seed {
        has_seed = true;
        cfg.initial_seed = Vec3::of(seed.position[0], seed.position[1], seed.position[2]);
        if let Some(d) = seed.direction {
            cfg.initial_direction = Some(Vec3::of(d[0], d[1], d[2]));
        }
    }

    Ok(ResolvedTracker {
        cfg,
        has_seed,
        search_radius_tied_to_s: tied,
    })
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct PhantomFile {
    phantom: PhantomSpec<f64>,
}

pub fn load_phantom_spec(path: &Path) -> Result<PhantomSpec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading phantom config {}", path.display()))?;
    let file: PhantomFile = toml::from_str(&text)
        .with_context(|| format!("parsing phantom config {}", path.display()))?;
    Ok(file.phantom)
}

/// Parameter grid for `sweep`; omitted axes keep the config value.
#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub d_radius: Vec<f64>,
    pub d_max: Vec<f64>,
    pub alpha: Vec<f64>,
    pub s: Vec<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct GridFile {
    grid: GridSection,
}

pub fn load_grid(path: &Path) -> Result<GridSection> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading grid {}", path.display()))?;
    let file: GridFile = toml::from_str(&text)
        .with_context(|| format!("parsing grid {}", path.display()))?;
    Ok(file.grid)
}

/// Parse an `x,y,z` command-line triple.
pub fn parse_triple(arg: &str) -> Result<Vec3f> {
    let parts: Vec<&str> = arg.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(anyhow!("expected three comma-separated values, got `{arg}`"));
    }
    let mut vals = [0.0f64; 3];
    for (i, p) in parts.iter().enumerate() {
        vals[i] = p
            .parse::<f64>()
            .map_err(|_| anyhow!("bad number `{p}` in `{arg}`"))?;
    }
    Ok(Vec3::of(vals[0], vals[1], vals[2]))
}
