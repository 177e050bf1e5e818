//! Acceptance suite: one test per release criterion, each printing a
//! PASS line (visible with `--nocapture`; the test result line itself is
//! the per-criterion verdict).

use std::collections::HashSet;
use std::io::Write as _;
use std::path::Path;
use std::process::Command;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use vesselflow::flowgraph::{
    apply_toll, build_graph, extract_branches, min_cost_path, BranchPath, FlowGraph, GraphParams,
};
use vesselflow::io::{save_volume, ScalarType};
use vesselflow::metrics::{dice, hausdorff, surface_rms};
use vesselflow::network::{parse_topology, rasterize_mask, validate_branches, Branch, VesselNetwork};
use vesselflow::sampling::{canonical_cloud, place_cloud, rotation_to, ConeParams, SampleIndex};
use vesselflow::synth::{generate, PhantomKind, PhantomSpec};
use vesselflow::tracker::{track, TrackerConfig};
use vesselflow::vec3::{Mat3, Vec3};
use vesselflow::vesselness::{fit_cylinder, CylinderModel, DEParams, Detection};
use vesselflow::{Vec3f, Volume64};

fn pass(criterion: u32, detail: &str) {
    println!("[acceptance] criterion {criterion}: PASS ({detail})");
}

// ---------------------------------------------------------------- suite --

/// The nine tree phantoms: 128^3 voxels at 1 mm, depth <= 4, root radii
/// 3..6 mm, contrast 100 over noise sigma <= 25 (CNR >= 4).
fn tree_suite() -> Vec<PhantomSpec<f64>> {
    let params: [(u32, f64, f64, u64); 9] = [
        (3, 4.0, 10.0, 1),
        (3, 5.0, 15.0, 2),
        (3, 6.0, 20.0, 3),
        (4, 3.0, 10.0, 4),
        (4, 4.0, 15.0, 5),
        (4, 5.0, 10.0, 6),
        (4, 6.0, 15.0, 7),
        (4, 4.0, 25.0, 8),
        (4, 5.0, 20.0, 9),
    ];
    params
        .into_iter()
        .map(|(depth, root_radius, noise_sigma, rng_seed)| PhantomSpec {
            kind: PhantomKind::Tree {
                depth,
                angle_min: 0.3,
                angle_max: 0.55,
                length_decay: 0.72,
                radius_decay: 0.78,
                root_radius,
                root_length: 30.0,
            },
            dims: [128, 128, 128],
            spacing: Vec3::of(1.0, 1.0, 1.0),
            vessel_intensity: 100.0,
            background_intensity: 0.0,
            noise_sigma,
            rng_seed,
        })
        .collect()
}

/// Tracking configuration tuned for the tree suite.
fn tuned_config(seed: Vec3f) -> TrackerConfig<f64> {
    TrackerConfig {
        cone: ConeParams {
            alpha: 1.0,
            s: 2.5,
            layers: 6,
        },
        graph: GraphParams {
            d_max: 5.0,
            d_radius: 3.0,
            k_toll: 5.0,
        },
        de: DEParams {
            population: 12,
            generations: 16,
            search_radius: 1.5,
            rng_seed: 2024,
            ..DEParams::default()
        },
        sensitivity: 0.35,
        beta_dup: 0.3,
        beta_loop: 1.2,
        max_iterations: 250,
        initial_seed: seed,
        initial_direction: Some(Vec3::of(0.0, 0.0, 1.0)),
    }
}

/// Seed inside the root segment of every suite tree.
fn suite_seed() -> Vec3f {
    Vec3::of(63.0, 63.0, 18.0)
}

fn tracked_dice(spec: &PhantomSpec<f64>, cfg: &TrackerConfig<f64>) -> f64 {
    let ph = generate(spec).expect("suite phantom generates");
    let net = track(&ph.volume, cfg).expect("tracking succeeds on suite phantom");
    let mask = rasterize_mask(&net, &ph.mask);
    dice(&mask, &ph.mask).expect("same dims")
}

/// Criterion 1: median Dice over the tree suite with a well-tuned config.
/// The bar is 0.90 (the published 98-100% refers to a different external
/// phantom generator).
#[test]
fn criterion_1_tree_suite_median_dice() {
    let cfg = tuned_config(suite_seed());
    let mut dices: Vec<f64> = tree_suite()
        .iter()
        .enumerate()
        .map(|(i, spec)| {
            let start = std::time::Instant::now();
            let d = tracked_dice(spec, &cfg);
            println!(
                "[acceptance] criterion 1: phantom {i} dice {d:.4} ({:.1}s)",
                start.elapsed().as_secs_f64()
            );
            d
        })
        .collect();
    dices.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let median = dices[dices.len() / 2];
    assert!(
        median >= 0.90,
        "median Dice {median:.4} below 0.90 (all: {dices:?})"
    );
    pass(1, &format!("median Dice {median:.4} over 9 tree phantoms"));
}

/// Criterion 2: `cmd_sweep` over d_radius on the tree suite peaks within
/// 3..5 mm and is strictly lower at 10 mm.
#[test]
fn criterion_2_d_radius_sensitivity_trend() {
    let d_radius_values = [2.0, 3.0, 4.0, 5.0, 7.0, 10.0];
    let bin = env!("CARGO_BIN_EXE_vesselflow");
    let dir = tempfile::tempdir().unwrap();

    // Shared tracker config and grid for every phantom.
    let cfg_path = dir.path().join("tracker.toml");
    std::fs::write(
        &cfg_path,
        "[cone]\nalpha = 1.0\ns = 2.5\nlayers = 5\n\
         [graph]\nd_max = 5.0\nd_radius = 4.0\nk_toll = 5.0\n\
         [de]\npopulation = 12\ngenerations = 16\nrng_seed = 2024\n\
         [selection]\nsensitivity = 0.35\n\
         [validation]\nbeta_dup = 0.3\nbeta_loop = 1.5\n\
         [tracker]\nmax_iterations = 250\n\
         [seed]\nposition = [63.0, 63.0, 18.0]\ndirection = [0.0, 0.0, 1.0]\n",
    )
    .unwrap();
    let grid_path = dir.path().join("grid.toml");
    std::fs::write(&grid_path, "[grid]\nd_radius = [2.0, 3.0, 4.0, 5.0, 7.0, 10.0]\n").unwrap();

    let mut sums = vec![0.0f64; d_radius_values.len()];
    for (i, spec) in tree_suite().iter().enumerate() {
        let ph = generate(spec).unwrap();
        let vol_path = dir.path().join(format!("tree{i}.vvol"));
        save_volume(&ph.volume, &vol_path, ScalarType::F64).unwrap();
        let mask_path = dir.path().join(format!("tree{i}_mask.vvol"));
        save_volume(&ph.mask, &mask_path, ScalarType::U8).unwrap();
        let table_path = dir.path().join(format!("sweep{i}.csv"));

        let status = Command::new(bin)
            .args(["sweep", "--volume"])
            .arg(&vol_path)
            .arg("--mask")
            .arg(&mask_path)
            .arg("--config")
            .arg(&cfg_path)
            .arg("--grid")
            .arg(&grid_path)
            .arg("--out")
            .arg(&table_path)
            .status()
            .expect("sweep runs");
        assert!(status.success(), "sweep exited with {status:?}");

        let table = std::fs::read_to_string(&table_path).unwrap();
        let mut rows = 0;
        for line in table.lines().skip(1) {
            let cols: Vec<&str> = line.split(',').collect();
            let d_radius: f64 = cols[0].parse().unwrap();
            let d: f64 = cols[4].parse().unwrap();
            let k = d_radius_values
                .iter()
                .position(|v| (v - d_radius).abs() < 1e-9)
                .expect("row matches a grid value");
            sums[k] += d;
            rows += 1;
        }
        assert_eq!(rows, d_radius_values.len());
        println!("[acceptance] criterion 2: phantom {i} swept");
    }

    let means: Vec<f64> = sums.iter().map(|s| s / 9.0).collect();
    println!("[acceptance] criterion 2: mean Dice per d_radius {means:?}");
    let best = means
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .unwrap()
        .0;
    let best_value = d_radius_values[best];
    assert!(
        (3.0..=5.0).contains(&best_value),
        "Dice peak at d_radius {best_value}, means {means:?}"
    );
    assert!(
        means[5] < means[best],
        "Dice at 10 mm ({}) not strictly below the maximum ({})",
        means[5],
        means[best]
    );
    pass(2, &format!("peak at d_radius {best_value} mm, 10 mm strictly lower"));
}

/// Criterion 3: sampling geometry over 100 random configurations.
#[test]
fn criterion_3_sampling_geometry() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5a3);
    for case in 0..100 {
        let alpha = rng.random_range(0.2..std::f64::consts::FRAC_PI_2);
        let s = rng.random_range(0.4..3.0);
        let layers = rng.random_range(1..7u32);
        let axis = loop {
            let v = Vec3::<f64>::of(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            if v.norm() > 0.2 {
                break v.normalized().unwrap();
            }
        };
        let params = ConeParams::new(alpha, s, layers).unwrap();

        // Rotation orthonormality.
        let rot = rotation_to(axis).unwrap();
        assert!(
            rot.mul_mat(&rot.transpose()).max_abs_diff(&Mat3::identity()) < 1e-9,
            "case {case}: rotation not orthonormal"
        );

        let canonical = canonical_cloud(&params);
        for (idx, p) in &canonical {
            let shell = idx.l as f64 * s;
            assert!(
                (p.norm() - shell).abs() / shell <= 1e-9,
                "case {case}: point off its calotte"
            );
        }
        // Arc spacing per circumference.
        for l in 1..=layers {
            for m in 1..vesselflow::sampling::circ_count(l, alpha) {
                let r = vesselflow::sampling::circ_radius(m, l, s);
                let n = vesselflow::sampling::point_count(m, l, s) as f64;
                assert!(
                    std::f64::consts::TAU * r / n <= s * (1.0 + 1e-9),
                    "case {case}: arc spacing exceeds s"
                );
            }
        }

        // Rigid placement preserves pairwise distances.
        let seed = Vec3::of(
            rng.random_range(-40.0..40.0),
            rng.random_range(-40.0..40.0),
            rng.random_range(-40.0..40.0),
        );
        let placed = place_cloud(&params, seed, axis).unwrap();
        assert_eq!(canonical.len(), placed.points.len());
        let step = (canonical.len() / 40).max(1);
        for i in (0..canonical.len()).step_by(step) {
            for j in (i + 1..canonical.len()).step_by(step + 1) {
                let before = canonical[i].1.distance(canonical[j].1);
                let after = placed.points[i].1.distance(placed.points[j].1);
                assert!(
                    (before - after).abs() < 1e-9,
                    "case {case}: placement not rigid"
                );
            }
        }
    }
    pass(3, "100 random cone configurations");
}

// ------------------------------------------------- flow graph utilities --

fn det(layer: u32, pos: [f64; 3], p_det: f64) -> Detection<f64> {
    let model = CylinderModel::new(Vec3::of(pos[0], pos[1], pos[2]), Vec3::of(0.0, 0.0, 1.0), 1.0).unwrap();
    Detection {
        model,
        w: 1.0 / p_det - 1.0,
        fitness: p_det,
        p_det,
        layer,
        origin: SampleIndex::new(layer, 0, 0),
    }
}

/// Independent oracle: exhaustively enumerate S->T chains with the same
/// wiring (entrance at sources, transitions between adjacent layers,
/// detection edges on interior nodes, exit from the last node).
fn enumerate_min(g: &FlowGraph<f64>) -> Option<(Vec<usize>, f64)> {
    fn extend(
        g: &FlowGraph<f64>,
        chain: &mut Vec<usize>,
        cost_so_far: f64,
        best: &mut Option<(Vec<usize>, f64)>,
    ) {
        let cur = *chain.last().unwrap();
        for &(j, c) in g.transitions(cur) {
            if g.is_claimed(j) {
                continue;
            }
            let total = cost_so_far + c + g.exit_cost(j);
            chain.push(j);
            if best.as_ref().map_or(true, |(_, b)| total < *b - 1e-12) {
                *best = Some((chain.clone(), total));
            }
            extend(g, chain, cost_so_far + c + g.detection_cost(j), best);
            chain.pop();
        }
    }
    let mut best = None;
    for i in 0..g.detections().len() {
        if g.is_source(i) {
            extend(g, &mut vec![i], 1.0, &mut best);
        }
    }
    best
}

/// Flow conservation, structurally: the full visited chain must step one
/// layer at a time (one in-transition and one out-transition per interior
/// detection, entrance at the front, exit at the back).
fn assert_flow_conservation(g: &FlowGraph<f64>, path: &BranchPath<f64>) {
    let seq: Vec<usize> = if path.detections.first() == Some(&path.entry_detection) {
        path.detections.clone()
    } else {
        std::iter::once(path.entry_detection)
            .chain(path.detections.iter().copied())
            .collect()
    };
    assert!(seq.len() >= 2, "paths traverse at least one transition");
    for w in seq.windows(2) {
        assert_eq!(
            g.detections()[w[1]].layer,
            g.detections()[w[0]].layer + 1,
            "interior node with unbalanced in/out flow"
        );
        assert!(
            g.transitions(w[0]).iter().any(|(j, _)| *j == w[1]),
            "path uses a non-existent transition edge"
        );
    }
}

/// Criterion 4: exact solver vs exhaustive enumeration on 200 random small
/// graphs, plus flow conservation on every extracted path.
#[test]
fn criterion_4_flow_solver_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xf10e);
    let gp = GraphParams {
        d_max: 4.0,
        d_radius: 2.0,
        k_toll: 5.0,
    };
    for case in 0..200 {
        let apex = det(0, [0.0, 0.0, 0.0], rng.random_range(0.3..0.99));
        let layers = rng.random_range(2..5u32);
        let mut dets = Vec::new();
        for l in 1..=layers {
            for _ in 0..rng.random_range(1..4usize) {
                if dets.len() >= 11 {
                    break;
                }
                dets.push(det(
                    l,
                    [
                        rng.random_range(-2.0..2.0),
                        rng.random_range(-2.0..2.0),
                        l as f64 * rng.random_range(0.7..1.5),
                    ],
                    rng.random_range(0.3..0.99),
                ));
            }
        }
        dets.sort_by_key(|d| d.layer);

        let g = build_graph(&dets, &apex, &gp).unwrap();
        match (min_cost_path(&g), enumerate_min(&g)) {
            (None, None) => {}
            (Some(p), Some((_, want))) => {
                assert!(
                    (p.total_cost - want).abs() < 1e-9,
                    "case {case}: solver {} vs oracle {want}",
                    p.total_cost
                );
                assert_flow_conservation(&g, &p);
            }
            (got, want) => panic!("case {case}: existence disagreement {got:?} vs {want:?}"),
        }

        // Conservation along the full iterative extraction as well.
        let gfull = build_graph(&dets, &apex, &gp).unwrap();
        for path in extract_branches(&dets, &apex, &gp).unwrap() {
            assert_flow_conservation(&gfull, &path);
        }
    }
    pass(4, "200 random graphs match exhaustive enumeration");
}

/// Criterion 5: Y-phantom detections bifurcate into exactly two branches
/// and tolls never cheapen a re-solved path below its pre-toll value.
#[test]
fn criterion_5_toll_and_bifurcation() {
    let apex = det(0, [0.0, 0.0, 0.0], 0.95);
    let dets = vec![
        det(1, [0.0, 0.0, 1.5], 0.95),
        det(2, [-1.0, 0.0, 3.0], 0.93),
        det(2, [1.0, 0.0, 3.0], 0.92),
        det(3, [-2.0, 0.0, 4.5], 0.93),
        det(3, [2.0, 0.0, 4.5], 0.92),
        det(4, [-3.0, 0.0, 6.0], 0.93),
        det(4, [3.0, 0.0, 6.0], 0.92),
    ];
    let gp = GraphParams {
        d_max: 4.0,
        d_radius: 1.5,
        k_toll: 5.0,
    };

    let branches = extract_branches(&dets, &apex, &gp).unwrap();
    assert_eq!(branches.len(), 2, "Y detections must yield exactly two branches");
    assert!(
        branches[0].detections.contains(&branches[1].entry_detection),
        "second branch must enter at a stem detection of the first"
    );
    let mut seen = HashSet::new();
    for b in &branches {
        for &d in &b.detections {
            assert!(seen.insert(d), "branches overlap at detection {d}");
        }
    }

    // Toll monotonicity: re-solve after charging the first path and price
    // the returned path under the pre-toll graph.
    let pre = build_graph(&dets, &apex, &gp).unwrap();
    let mut g = build_graph(&dets, &apex, &gp).unwrap();
    let first = min_cost_path(&g).unwrap();
    apply_toll(&mut g, &first, &gp);
    let second = min_cost_path(&g).unwrap();
    let pre_toll_value = {
        let seq: Vec<usize> = std::iter::once(second.entry_detection)
            .chain(second.detections.iter().copied())
            .collect();
        let mut total = 1.0;
        for w in seq.windows(2) {
            let c = pre
                .transitions(w[0])
                .iter()
                .find(|(j, _)| *j == w[1])
                .unwrap()
                .1;
            total += c;
            if w[1] == *seq.last().unwrap() {
                total += pre.exit_cost(w[1]);
            } else {
                total += pre.detection_cost(w[1]);
            }
        }
        total
    };
    assert!(
        second.total_cost >= pre_toll_value - 1e-9,
        "re-solved path {} cheaper than its pre-toll value {pre_toll_value}",
        second.total_cost
    );
    pass(5, "2 branches, bifurcation at the stem, tolls monotone");
}

/// Criterion 6: duplicate suppression keeps one branch; loop phantom
/// tracking yields a forest with no reconnection, checked on the exported
/// topology.
#[test]
fn criterion_6_validation_rules() {
    // Duplicate phantom: two nearly identical branches.
    let mk = |id: usize, x: f64, cost: f64| -> Branch<f64> {
        let detections = (0..6)
            .map(|k| {
                let mut d = det(k as u32, [x, 0.0, k as f64 * 2.0], 0.9);
                d.model.r_in = 1.5;
                d
            })
            .collect();
        Branch {
            id,
            detections,
            parent: None,
            parent_index: None,
            source_seed: 0,
            total_cost: cost,
        }
    };
    let out = validate_branches(&VesselNetwork::new(), vec![mk(0, 0.0, -5.0), mk(1, 0.2, -4.0)], 0.3, 1.5);
    assert_eq!(out.len(), 1, "duplicate pair must keep exactly one branch");
    assert_eq!(out[0].id, 0, "the cheaper branch survives");

    // Loop phantom: track it end to end and verify the export structurally.
    let ph = generate(&PhantomSpec {
        kind: PhantomKind::LoopTube { radius: 2.5 },
        dims: [80, 80, 80],
        spacing: Vec3::of(1.0, 1.0, 1.0),
        vessel_intensity: 100.0,
        background_intensity: 0.0,
        noise_sigma: 5.0,
        rng_seed: 5,
    })
    .unwrap();
    let mut cfg = tuned_config(Vec3::of(39.0, 39.0, 10.0));
    cfg.max_iterations = 200;
    let net = track(&ph.volume, &cfg).unwrap();
    assert!(!net.branches.is_empty());

    let mut buf = Vec::new();
    vesselflow::network::export_topology(&net, &mut buf).unwrap();
    let parsed = parse_topology::<f64, _>(&buf[..]).unwrap();

    // Forest: parents precede children and exist.
    let ids: HashSet<usize> = parsed.iter().map(|b| b.id).collect();
    for b in &parsed {
        if let Some(p) = b.parent {
            assert!(p < b.id && ids.contains(&p), "broken parent link {p} -> {}", b.id);
        }
    }

    // No reconnection: tail detections (beyond the attachment zone) keep
    // beta_loop * (r_a + r_b) clearance from branches of earlier sessions,
    // excluding points near this branch's own entry.
    let beta_loop = cfg.beta_loop;
    let mean_r = |b: &vesselflow::network::TopologyBranch<f64>| -> f64 {
        b.points.iter().map(|(_, r, _)| *r).sum::<f64>() / b.points.len() as f64
    };
    for b in &parsed {
        if b.points.len() <= 3 {
            continue;
        }
        let attach = b.points[0].0;
        for existing in &parsed {
            if existing.source_seed >= b.source_seed {
                continue;
            }
            let threshold = beta_loop * (mean_r(b) + mean_r(existing));
            for (q, _, _) in &existing.points {
                if q.distance(attach) <= threshold {
                    continue;
                }
                for (d, _, _) in b.points.iter().skip(3) {
                    assert!(
                        d.distance(*q) >= threshold,
                        "branch {} reconnects to branch {} ({} mm < {threshold})",
                        b.id,
                        existing.id,
                        d.distance(*q)
                    );
                }
            }
        }
    }
    pass(6, "duplicate suppressed; loop phantom export is a forest without reconnection");
}

/// Criterion 7: cylinder fit recovers a 3 mm planted cylinder within 10%
/// radius and 5 degrees direction for at least 9 of 10 RNG seeds.
#[test]
fn criterion_7_vesselness_recovery() {
    // Noiseless planted cylinder along +z.
    let dims = [41, 41, 41];
    let mut data = Vec::with_capacity(41 * 41 * 41);
    for _z in 0..41 {
        for y in 0..41 {
            for x in 0..41 {
                let d2 = (x as f64 - 20.0).powi(2) + (y as f64 - 20.0).powi(2);
                data.push(if d2.sqrt() <= 3.0 { 100.0 } else { 0.0 });
            }
        }
    }
    let vol = Volume64::new(dims, Vec3::of(1.0, 1.0, 1.0), Vec3::zero(), data).unwrap();

    let mut successes = 0;
    for seed in 1..=10u64 {
        let de = DEParams {
            population: 16,
            generations: 30,
            search_radius: 2.0,
            rng_seed: seed,
            ..DEParams::default()
        };
        let start = Vec3::of(20.6, 19.5, 20.0);
        let Ok(detection) = fit_cylinder(&vol, start, Vec3::of(0.0, 0.0, 1.0), 2.0, &de) else {
            continue;
        };
        let radius_ok = (detection.model.r_in - 3.0).abs() / 3.0 <= 0.10;
        let angle = detection
            .model
            .direction
            .dot(Vec3::of(0.0, 0.0, 1.0))
            .clamp(-1.0, 1.0)
            .acos()
            .to_degrees();
        if radius_ok && angle <= 5.0 {
            successes += 1;
        } else {
            println!(
                "[acceptance] criterion 7: seed {seed} missed (r={:.3}, angle={angle:.2})",
                detection.model.r_in
            );
        }
    }
    assert!(successes >= 9, "only {successes}/10 fits recovered the cylinder");
    pass(7, &format!("{successes}/10 seeds within 10% radius and 5 degrees"));
}

/// Criterion 8: metric identities on 50 random mask pairs.
#[test]
fn criterion_8_metric_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x3e7);
    let blob = |rng: &mut ChaCha8Rng| -> Volume64 {
        let dims = [12, 12, 12];
        let mut data = vec![0.0; 12 * 12 * 12];
        for _ in 0..rng.random_range(4..40) {
            let (x, y, z) = (
                rng.random_range(0..12),
                rng.random_range(0..12),
                rng.random_range(0..12),
            );
            data[x + 12 * (y + 12 * z)] = 1.0;
        }
        Volume64::new(dims, Vec3::of(1.0, 1.0, 1.0), Vec3::zero(), data).unwrap()
    };
    for case in 0..50 {
        let a = blob(&mut rng);
        let b = blob(&mut rng);
        assert_eq!(dice(&a, &a).unwrap(), 1.0, "case {case}");
        assert_eq!(hausdorff(&a, &a).unwrap(), 0.0, "case {case}");
        let rms_ab = surface_rms(&a, &b).unwrap();
        let rms_ba = surface_rms(&b, &a).unwrap();
        assert!((rms_ab - rms_ba).abs() < 1e-12, "case {case}: RMS not symmetric");
        let h = hausdorff(&a, &b).unwrap();
        assert!(h >= rms_ab - 1e-12, "case {case}: hausdorff {h} < rms {rms_ab}");
    }
    pass(8, "identities hold on 50 random mask pairs");
}

/// Criterion 9: two identical `track` CLI runs produce byte-identical
/// topology exports.
#[test]
fn criterion_9_cli_determinism() {
    let bin = env!("CARGO_BIN_EXE_vesselflow");
    let dir = tempfile::tempdir().unwrap();

    let ph = generate(&PhantomSpec {
        kind: PhantomKind::StraightTube { radius: 3.0 },
        dims: [40, 40, 64],
        spacing: Vec3::of(1.0, 1.0, 1.0),
        vessel_intensity: 100.0,
        background_intensity: 0.0,
        noise_sigma: 5.0,
        rng_seed: 3,
    })
    .unwrap();
    let vol_path = dir.path().join("tube.vvol");
    save_volume(&ph.volume, &vol_path, ScalarType::F64).unwrap();

    let cfg_path = dir.path().join("cfg.toml");
    let mut f = std::fs::File::create(&cfg_path).unwrap();
    writeln!(
        f,
        "[cone]\nalpha = 0.9\ns = 2.5\nlayers = 4\n\
         [graph]\nd_max = 5.0\nd_radius = 4.0\n\
         [de]\npopulation = 12\ngenerations = 16\nrng_seed = 99\n\
         [selection]\nsensitivity = 0.4\n\
         [validation]\nbeta_dup = 0.3\n\
         [seed]\nposition = [19.0, 19.0, 32.0]\ndirection = [0.0, 0.0, 1.0]"
    )
    .unwrap();

    let run = |out: &Path| {
        let status = Command::new(bin)
            .args(["track", "--volume"])
            .arg(&vol_path)
            .arg("--config")
            .arg(&cfg_path)
            .arg("--out")
            .arg(out)
            .status()
            .expect("track runs");
        assert!(status.success(), "track exited with {status:?}");
        std::fs::read(format!("{}_topology.txt", out.display())).unwrap()
    };
    let a = run(&dir.path().join("a"));
    let b = run(&dir.path().join("b"));
    assert!(!a.is_empty());
    assert_eq!(a, b, "topology exports differ between identical runs");
    pass(9, "byte-identical topology exports");
}

/// Calibration helper, not part of the suite: tracks one suite phantom.
#[test]
#[ignore]
fn calibrate_one_phantom() {
    let idx: usize = std::env::var("VF_CAL_IDX").ok().and_then(|s| s.parse().ok()).unwrap_or(6);
    let spec = tree_suite().remove(idx);
    let cfg = tuned_config(suite_seed());
    let t0 = std::time::Instant::now();
    let ph = generate(&spec).unwrap();
    println!("[cal] phantom {idx} generated in {:.1}s", t0.elapsed().as_secs_f64());
    let t1 = std::time::Instant::now();
    let net = track(&ph.volume, &cfg).unwrap();
    let track_s = t1.elapsed().as_secs_f64();
    let mask = rasterize_mask(&net, &ph.mask);
    let d = dice(&mask, &ph.mask).unwrap();
    let (mut tp, mut got, mut truth) = (0usize, 0usize, 0usize);
    for (a, b) in mask.data().iter().zip(ph.mask.data().iter()) {
        let (fa, fb) = (*a > 0.5, *b > 0.5);
        tp += (fa && fb) as usize;
        got += fa as usize;
        truth += fb as usize;
    }
    println!(
        "[cal] phantom {idx}: dice {d:.4} precision {:.3} recall {:.3}, {} branches, {} cones, track {track_s:.1}s",
        tp as f64 / got as f64,
        tp as f64 / truth as f64,
        net.branches.len(),
        net.seeds_used.len(),
    );
}
