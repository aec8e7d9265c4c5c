//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails. Scene-based criteria read `salinasA_cube.npy`,
//! `salinasA_gt.npy`, `salinas_cube.npy` and `salinas_gt.npy` from the
//! directory named by `HYPERSEG_DATA`.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use hyperseg::meanshift::{mean_shift, Points};
use hyperseg::metrics::{ari, nmi, undersegmentation_error, unsupervised_f1};
use hyperseg::noise::{add_gaussian, add_impulsive, add_poisson, PoissonMode};
use hyperseg::npy::{load_cube, load_labels, save_cube, save_labels};
use hyperseg::regionseg::{prepare, FeatureSet, KChoice};
use hyperseg::regions::label_components;
use hyperseg::superpixel::{build_augmented_image, slic, slic_traced, SlicParams};
use hyperseg::{normalize, segment_oracle, HyperCube, LabelMap, SegmentationConfig};
use hyperseg_cli::render::{colorize, encode_png};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

const DATA_ENV: &str = "HYPERSEG_DATA";

fn main() {
    let criteria: [(&str, fn() -> Outcome); 10] = [
        ("metric-oracle equivalence", metric_oracles),
        ("metric identities", metric_identities),
        ("superpixel invariants", superpixel_invariants),
        ("cluster-weight benefit on SalinasA", cluster_weight_benefit),
        ("SalinasA end-to-end", salinas_a_end_to_end),
        ("Salinas end-to-end", salinas_end_to_end),
        ("feature-combination superiority", combination_superiority),
        ("noise robustness", noise_robustness),
        ("mean-shift suite", mean_shift_suite),
        ("I/O round trips and PNG stability", io_and_png),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{secs:.1}s]", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {detail} [{secs:.1}s]", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let took = start.elapsed();
    ensure(took < limit, format!("took {took:.1?}, limit {limit:?}"))
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn strip(labels: &[u32]) -> LabelMap {
    LabelMap::new(1, labels.len(), labels.to_vec()).unwrap()
}

// 1

fn brute_force_ari(pred: &[u32], gt: &[u32]) -> f64 {
    let fg: Vec<(u32, u32)> = pred.iter().zip(gt).filter(|(_, &g)| g != 0).map(|(&p, &g)| (p, g)).collect();
    let (mut a, mut b, mut c, mut d) = (0f64, 0f64, 0f64, 0f64);
    for i in 0..fg.len() {
        for j in i + 1..fg.len() {
            match (fg[i].0 == fg[j].0, fg[i].1 == fg[j].1) {
                (true, true) => a += 1.0,
                (true, false) => b += 1.0,
                (false, true) => c += 1.0,
                (false, false) => d += 1.0,
            }
        }
    }
    let den = (a + b) * (b + d) + (a + c) * (c + d);
    if den == 0.0 {
        1.0
    } else {
        2.0 * (a * d - b * c) / den
    }
}

fn direct_nmi(pred: &[u32], gt: &[u32]) -> f64 {
    let fg: Vec<(u32, u32)> = pred.iter().zip(gt).filter(|(_, &g)| g != 0).map(|(&p, &g)| (p, g)).collect();
    let n = fg.len() as f64;
    let mut joint: HashMap<(u32, u32), f64> = HashMap::new();
    let mut pm: HashMap<u32, f64> = HashMap::new();
    let mut gm: HashMap<u32, f64> = HashMap::new();
    for &(a, b) in &fg {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *pm.entry(a).or_default() += 1.0 / n;
        *gm.entry(b).or_default() += 1.0 / n;
    }
    if pm.len() == 1 || gm.len() == 1 {
        return if pm.len() == 1 && gm.len() == 1 { 1.0 } else { 0.0 };
    }
    let h = |m: &HashMap<u32, f64>| -> f64 { m.values().map(|&q| -q * q.ln()).sum() };
    let mi: f64 = joint.iter().map(|(&(a, b), &q)| q * (q / (pm[&a] * gm[&b])).ln()).sum();
    mi / (h(&pm) * h(&gm)).sqrt()
}

fn metric_oracles() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (mut worst_ari, mut worst_nmi) = (0f64, 0f64);
    let mut pairs = 0;
    while pairs < 1000 {
        let n = rng.random_range(1..=25);
        let pred: Vec<u32> = (0..n).map(|_| rng.random_range(0..6)).collect();
        let gt: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
        if gt.iter().all(|&g| g == 0) {
            continue;
        }
        pairs += 1;
        let (p, g) = (strip(&pred), strip(&gt));
        worst_ari = worst_ari.max((ari(&p, &g).map_err(err)? - brute_force_ari(&pred, &gt)).abs());
        worst_nmi = worst_nmi.max((nmi(&p, &g).map_err(err)? - direct_nmi(&pred, &gt)).abs());
    }
    ensure(worst_ari <= 1e-12, format!("ARI deviates by {worst_ari:e}"))?;
    ensure(worst_nmi <= 1e-12, format!("NMI deviates by {worst_nmi:e}"))?;
    within(start, Duration::from_secs(10))?;
    Ok(format!("{pairs} pairs, max |dARI| {worst_ari:.1e}, max |dNMI| {worst_nmi:.1e}"))
}

// 2

fn metric_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for trial in 0..100 {
        let n = rng.random_range(2..60);
        let labels: Vec<u32> = (0..n).map(|_| rng.random_range(1..8)).collect();
        let m = strip(&labels);
        let (v_nmi, v_ari) = (nmi(&m, &m).map_err(err)?, ari(&m, &m).map_err(err)?);
        let (_, _, f1) = unsupervised_f1(&m, &m).map_err(err)?;
        ensure(v_nmi == 1.0 && v_ari == 1.0 && f1 == 1.0, format!(
            "trial {trial}: identical maps give NMI {v_nmi}, ARI {v_ari}, F1 {f1}"
        ))?;

        let singletons: Vec<u32> = (1..=n as u32).collect();
        let v = ari(&strip(&vec![1; n]), &strip(&singletons)).map_err(err)?;
        ensure(v == 0.0, format!("one cluster vs {n} singletons gives ARI {v}"))?;

        let gt: Vec<u32> = (0..n).map(|_| rng.random_range(0..5)).collect();
        let mut perm: Vec<u32> = (100..108).collect();
        for i in (1..perm.len()).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        let relabeled: Vec<u32> = labels.iter().map(|&l| perm[l as usize]).collect();
        let (a, b, g) = (strip(&labels), strip(&relabeled), strip(&gt));
        if gt.iter().any(|&x| x != 0) {
            let same = nmi(&a, &g).map_err(err)? == nmi(&b, &g).map_err(err)?
                && ari(&a, &g).map_err(err)? == ari(&b, &g).map_err(err)?
                && unsupervised_f1(&a, &g).map_err(err)? == unsupervised_f1(&b, &g).map_err(err)?;
            ensure(same, format!("trial {trial}: relabeling changed a score"))?;
        }
    }
    Ok("identities exact, 100 permutations invariant".into())
}

// 3

fn superpixel_invariants() -> Outcome {
    let (h, w, l) = (64, 64, 8);
    let mut runs = 0;
    let mut rises = Vec::new();
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..h * w * l).map(|_| rng.random::<f32>()).collect();
        let cube = HyperCube::new_normalized(h, w, l, data).map_err(err)?;
        for pre_bw in [0.1, 0.5] {
            let points = Points::new(cube.data().iter().map(|&v| f64::from(v)).collect(), l).map_err(err)?;
            let pre = mean_shift(&points, pre_bw, seed).map_err(err)?;
            let aug = build_augmented_image(&cube, &pre).map_err(err)?;
            for k in [64, 300] {
                let defaults = SlicParams::default();
                let params = SlicParams::new(k, defaults.m, defaults.m_clust);
                let (sp, trace) = slic_traced(&aug, params).map_err(err)?;
                let mut seen = vec![0u8; h * w];
                for s in sp.superpixels() {
                    for &p in &s.members {
                        seen[p] += 1;
                    }
                }
                ensure(seen.iter().all(|&c| c == 1), format!("seed {seed}, K {k}: not a partition"))?;
                ensure(
                    label_components(sp.assignment(), w, h).len() == sp.len(),
                    format!("seed {seed}, K {k}: a superpixel is not 4-connected"),
                )?;
                if trace.objective.windows(2).any(|p| p[1] > p[0]) {
                    rises.push(format!("seed {seed} K {k}: {:?}", trace.objective));
                }
                runs += 1;
            }
        }
    }
    ensure(rises.is_empty(), format!("objective rose: {}", rises.join("; ")))?;
    for (side, k) in [(40, 16), (60, 36), (64, 64)] {
        let cube = HyperCube::new_normalized(side, side, 4, vec![0.3; side * side * 4]).map_err(err)?;
        let points = Points::new(vec![0.3; side * side * 4], 4).map_err(err)?;
        let pre = mean_shift(&points, 0.1, 0).map_err(err)?;
        let sp = slic(&build_augmented_image(&cube, &pre).map_err(err)?, SlicParams::new(k, 0.4, 0.8))
            .map_err(err)?;
        let g = (k as f64).sqrt() as usize;
        let tile = side / g;
        let exact = sp.len() == k
            && sp.assignment().iter().enumerate().all(|(p, &lab)| {
                lab as usize == (p / side / tile) * g + (p % side) / tile
            });
        ensure(exact, format!("{side}x{side} constant cube, K {k}: tiles are not exact squares"))?;
    }
    Ok(format!("{runs} random runs partitioned, connected, monotone; constant cubes tile exactly"))
}

// scene-based criteria

struct SceneData {
    cube: HyperCube,
    gt: LabelMap,
}

fn data_dir() -> Result<PathBuf, String> {
    std::env::var_os(DATA_ENV)
        .map(PathBuf::from)
        .ok_or_else(|| format!("dataset not found: {DATA_ENV} is not set"))
}

fn load_scene(name: &str) -> Result<SceneData, String> {
    let dir = data_dir()?;
    let cube_path = dir.join(format!("{name}_cube.npy"));
    let gt_path = dir.join(format!("{name}_gt.npy"));
    for p in [&cube_path, &gt_path] {
        if !p.is_file() {
            return Err(format!("dataset not found: {}", p.display()));
        }
    }
    let cube = normalize(&load_cube(&cube_path).map_err(err)?).map_err(err)?;
    let gt = load_labels(&gt_path).map_err(err)?;
    ensure(gt.matches_cube(&cube), "ground truth does not match the cube")?;
    Ok(SceneData { cube, gt })
}

fn scene_config(k: usize, seed: u64) -> SegmentationConfig {
    SegmentationConfig {
        k: KChoice::Fixed(k),
        m: 0.4,
        m_clust: 0.8,
        pre_bandwidth: 0.1,
        seed,
        ..SegmentationConfig::default()
    }
}

// 4

fn cluster_weight_benefit() -> Outcome {
    let scene = load_scene("salinasA")?;
    let start = Instant::now();
    let cube = &scene.cube;
    let points = Points::new(cube.data().iter().map(|&v| f64::from(v)).collect(), cube.bands()).map_err(err)?;
    let seeds = 0..5u64;
    let (mut with, mut without) = (0.0, 0.0);
    for seed in seeds.clone() {
        let pre = mean_shift(&points, 0.1, seed).map_err(err)?;
        let aug = build_augmented_image(cube, &pre).map_err(err)?;
        for (m_clust, acc) in [(0.8, &mut with), (0.0, &mut without)] {
            let sp = slic(&aug, SlicParams::new(500, 0.2, m_clust)).map_err(err)?;
            *acc += undersegmentation_error(&sp.label_map(), &scene.gt, 0.15).map_err(err)?;
        }
    }
    let n = seeds.count() as f64;
    let (with, without) = (with / n, without / n);
    let detail = format!("UE {with:.4} with cluster term vs {without:.4} without");
    ensure(with < without, format!("{detail}: no benefit"))?;
    ensure((with - 0.203).abs() <= 0.015, format!("{detail}: outside 0.203 +/- 0.015"))?;
    within(start, Duration::from_secs(300))?;
    Ok(detail)
}

// 5

fn salinas_a_end_to_end() -> Outcome {
    let scene = load_scene("salinasA")?;
    let start = Instant::now();
    let (seg, _) = segment_oracle(&scene.cube, &scene_config(300, 0), &scene.gt, None).map_err(err)?;
    let v_nmi = nmi(&seg.labels, &scene.gt).map_err(err)?;
    let v_ari = ari(&seg.labels, &scene.gt).map_err(err)?;
    let (_, _, f1) = unsupervised_f1(&seg.labels, &scene.gt).map_err(err)?;
    let detail = format!("NMI {v_nmi:.4}, ARI {v_ari:.4}, F1 {f1:.4}");
    ensure(v_nmi >= 0.90 && v_ari >= 0.83 && f1 >= 0.90, format!("{detail}: below 0.90/0.83/0.90"))?;
    within(start, Duration::from_secs(300))?;
    Ok(detail)
}

// 6

fn salinas_end_to_end() -> Outcome {
    let scene = load_scene("salinas")?;
    let start = Instant::now();
    let (seg, _) = segment_oracle(&scene.cube, &scene_config(800, 0), &scene.gt, None).map_err(err)?;
    let v_nmi = nmi(&seg.labels, &scene.gt).map_err(err)?;
    let v_ari = ari(&seg.labels, &scene.gt).map_err(err)?;
    let detail = format!("NMI {v_nmi:.4}, ARI {v_ari:.4}");
    ensure(v_nmi >= 0.86 && v_ari >= 0.78, format!("{detail}: below 0.86/0.78"))?;
    within(start, Duration::from_secs(1800))?;
    Ok(detail)
}

// 7

fn combination_superiority() -> Outcome {
    let scene = load_scene("salinasA")?;
    let combined = scene_config(300, 0);
    let anchor = prepare(&scene.cube, &combined)
        .and_then(|p| p.resolve_bandwidth(&combined))
        .map_err(err)?;
    let ladder = hyperseg::regionseg::bandwidth_ladder(anchor);
    let best = |config: &SegmentationConfig| -> Result<f64, String> {
        let (_, points) = segment_oracle(&scene.cube, config, &scene.gt, Some(&ladder)).map_err(err)?;
        Ok(points.iter().map(|p| p.nmi).fold(f64::NEG_INFINITY, f64::max))
    };
    let with = best(&combined)?;
    let spectral = best(&SegmentationConfig {
        features: FeatureSet::Spectral,
        ..combined.clone()
    })?;
    let detail = format!("best NMI {with:.4} combined vs {spectral:.4} spectral-only");
    ensure(with > spectral, format!("{detail}: not strictly better"))?;
    Ok(detail)
}

// 8

fn noise_robustness() -> Outcome {
    let scene = load_scene("salinasA")?;
    let score = |cube: &HyperCube| -> Result<f64, String> {
        let (seg, _) = segment_oracle(cube, &scene_config(300, 0), &scene.gt, None).map_err(err)?;
        nmi(&seg.labels, &scene.gt).map_err(err)
    };
    let clean = score(&scene.cube)?;
    let seeds = [1u64, 2, 3];
    let mean_nmi = |f: &dyn Fn(u64) -> hyperseg::Result<HyperCube>| -> Result<f64, String> {
        let mut total = 0.0;
        for &s in &seeds {
            total += score(&f(s).map_err(err)?)?;
        }
        Ok(total / seeds.len() as f64)
    };
    let poisson = mean_nmi(&|s| add_poisson(&scene.cube, 5.5, PoissonMode::Scaled, s))?;
    let impulsive = mean_nmi(&|s| add_impulsive(&scene.cube, 0.1, s))?;
    let weak = mean_nmi(&|s| add_gaussian(&scene.cube, 0.01, 0.1, s))?;
    let strong = mean_nmi(&|s| add_gaussian(&scene.cube, 0.5, 0.1, s))?;
    let detail = format!(
        "clean {clean:.4}, poisson {poisson:.4}, impulsive {impulsive:.4}, gaussian 0.01 {weak:.4}, gaussian 0.5 {strong:.4}"
    );
    ensure(clean - poisson <= 0.03, format!("{detail}: poisson drop above 0.03"))?;
    ensure((clean - impulsive).abs() <= 0.05, format!("{detail}: impulsive off by more than 0.05"))?;
    ensure(clean - strong > clean - weak, format!("{detail}: sigma 0.5 does not degrade more"))?;
    Ok(detail)
}

// 9

fn mean_shift_suite() -> Outcome {
    let points = Points::new(vec![0.0, 0.01, 1.0, 1.01], 1).map_err(err)?;
    let model = mean_shift(&points, 0.1, 0).map_err(err)?;
    let mut centers: Vec<f64> = model.centers().iter().map(|c| c[0]).collect();
    centers.sort_by(f64::total_cmp);
    ensure(
        centers.len() == 2 && (centers[0] - 0.005).abs() <= 1e-3 && (centers[1] - 1.005).abs() <= 1e-3,
        format!("1-D two-mode example gave centers {centers:?}"),
    )?;

    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let data: Vec<f64> = (0..400 * 3).map(|_| rng.random::<f64>()).collect();
    let shift = [5.5, -2.25, 0.75];
    let moved: Vec<f64> = data.iter().enumerate().map(|(i, v)| v + shift[i % 3]).collect();
    let a = mean_shift(&Points::new(data.clone(), 3).map_err(err)?, 0.25, 4).map_err(err)?;
    let b = mean_shift(&Points::new(moved, 3).map_err(err)?, 0.25, 4).map_err(err)?;
    ensure(a.assignment() == b.assignment(), "translation changed the assignment")?;
    let worst = a
        .centers()
        .iter()
        .zip(b.centers())
        .flat_map(|(ca, cb)| (0..3).map(move |d| (ca[d] + shift[d] - cb[d]).abs()))
        .fold(0.0, f64::max);
    ensure(worst <= 1e-9, format!("translated centers off by {worst:e}"))?;

    let big = Points::new((0..5000 * 4).map(|_| rng.random::<f64>()).collect(), 4).map_err(err)?;
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(err)?
            .install(|| mean_shift(&big, 0.3, 7).map_err(err))
    };
    let one = run(1)?;
    for t in [2, 4, 8] {
        ensure(run(t)? == one, format!("{t} threads differ from 1 thread"))?;
    }
    Ok(format!(
        "two modes found, translation error {worst:.1e}, identical across 1/2/4/8 threads"
    ))
}

// 10

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn io_and_png() -> Outcome {
    let dir = tempfile::tempdir().map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let (h, w, l) = (17, 23, 11);
    let mut data: Vec<f32> = (0..h * w * l).map(|_| rng.random::<f32>() * 5000.0).collect();
    data[0] = f32::MIN_POSITIVE;
    data[1] = -0.0;
    data[2] = f32::MAX;
    let cube = HyperCube::new(h, w, l, data).map_err(err)?;
    let labels = LabelMap::new(h, w, (0..h * w).map(|_| rng.random_range(0..40)).collect()).map_err(err)?;
    save_cube(dir.path().join("c.npy"), &cube).map_err(err)?;
    save_labels(dir.path().join("l.npy"), &labels).map_err(err)?;
    let cube_back = load_cube(dir.path().join("c.npy")).map_err(err)?;
    let bits_equal = cube_back.shape() == cube.shape()
        && cube_back.data().iter().zip(cube.data()).all(|(a, b)| a.to_bits() == b.to_bits());
    ensure(bits_equal, "cube round trip is not bit-exact")?;
    ensure(load_labels(dir.path().join("l.npy")).map_err(err)? == labels, "label round trip differs")?;

    let map = LabelMap::new(4, 6, vec![0, 1, 1, 2, 2, 3, 0, 1, 1, 2, 2, 3, 4, 4, 5, 5, 6, 6, 4, 4, 5, 5, 6, 0])
        .map_err(err)?;
    let first = encode_png(6, 4, &colorize(&map)).map_err(err)?;
    let second = encode_png(6, 4, &colorize(&map)).map_err(err)?;
    ensure(first == second, "two encodings of the same map differ")?;
    let golden = std::fs::read(fixture("colormap_4x6.png")).map_err(err)?;
    ensure(first == golden, "PNG bytes differ from the stored rendering")?;
    Ok(format!("{} cube values and {} labels bit-exact; PNG matches stored bytes", h * w * l, h * w))
}
