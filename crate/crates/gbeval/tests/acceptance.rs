//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

#[path = "../../core/tests/support/reference.rs"]
mod reference;

use std::path::Path;
use std::time::{Duration, Instant};

use gbeval::commands::{cmd_prep, AugmentationArg, PrepArgs};
use gbeval::pngio::{write_mask, write_probability};
use gbeval_core::chac::{detect_grains, ChacConfig};
use gbeval_core::cm2::{cm2_census, render_cm2, Cm2Palette};
use gbeval_core::dataprep::DatasetManifest;
use gbeval_core::metrics::{
    abundance, bce, certainty, confidence_from_histogram, confusion, histogram, ConfidenceConfig,
    ConfusionCounts, MetricBundle,
};
use gbeval_core::raster::SampleDepth;
use gbeval_core::synth::{degrade_annotation, grid_grains, soften, voronoi_grains, SynthSpec};
use gbeval_core::toynet::{train, AdamParams, LayerId, ToyNet, TrainConfig};
use gbeval_core::xval::{aggregate, relative_improvement, KeyField, Metric, RunRecord};
use gbeval_core::{BinaryMask, Grid, ProbabilityMap};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || format!("took {t:.2?}, limit {limit:?}"))
}

fn random_mask(rng: &mut ChaCha8Rng, w: usize, h: usize, p: f64) -> BinaryMask {
    Grid::from_vec(w, h, (0..w * h).map(|_| rng.gen_bool(p)).collect()).unwrap()
}

// 1
fn metric_oracle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for i in 0..200 {
        let (dp, dg) = (rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0));
        let pred = random_mask(&mut rng, 16, 16, dp);
        let gt = random_mask(&mut rng, 16, 16, dg);
        let (mut tp, mut fp, mut fn_, mut tn) = (0u64, 0u64, 0u64, 0u64);
        for r in 0..16 {
            for c in 0..16 {
                match (*pred.get(r, c), *gt.get(r, c)) {
                    (true, true) => tp += 1,
                    (true, false) => fp += 1,
                    (false, true) => fn_ += 1,
                    (false, false) => tn += 1,
                }
            }
        }
        let got = confusion(&pred, &gt).unwrap();
        ensure(got == ConfusionCounts { tp, fp, fn_, tn }, || {
            format!("pair {i}: counts {got:?}")
        })?;
        let p = (tp + fp > 0).then(|| tp as f64 / (tp + fp) as f64);
        let r = (tp + fn_ > 0).then(|| tp as f64 / (tp + fn_) as f64);
        let f = match (p, r) {
            (Some(p), Some(r)) if p + r > 0.0 => Some(2.0 * p * r / (p + r)),
            _ => None,
        };
        ensure(
            got.precision() == p && got.recall() == r && got.f1() == f,
            || format!("pair {i}: metrics differ from oracle"),
        )?;
    }
    within(start, Duration::from_secs(1))?;
    Ok("200 pairs, counts and P/R/F1 identical".into())
}

// 2
fn confidence_closed_forms() -> Outcome {
    let start = Instant::now();
    let cfg = ConfidenceConfig::new(0.15).unwrap();
    for seed in 0..3u64 {
        // 1600 pixels, 420 positive: f·P and f·N are integers for every f below.
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut cells: Vec<bool> = (0..1600).map(|i| i < 420).collect();
        for i in (1..cells.len()).rev() {
            cells.swap(i, rng.gen_range(0..=i));
        }
        let mask = Grid::from_vec(40, 40, cells).unwrap();
        let pos_frac = 420.0 / 1600.0;
        for f in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let map = soften(&mask, f, 0.15, seed).unwrap();
            let c = certainty(&map, &cfg);
            let a = abundance(&map, &cfg);
            ensure(c == f, || format!("seed {seed} f {f}: certainty {c}"))?;
            if f > 0.0 {
                ensure(a == Some(pos_frac), || {
                    format!("seed {seed} f {f}: abundance {a:?}")
                })?;
            }
            let via_hist = confidence_from_histogram(&histogram(&map, 20).unwrap(), &cfg).unwrap();
            ensure(via_hist == (c, a), || {
                format!("seed {seed} f {f}: histogram {via_hist:?} vs {:?}", (c, a))
            })?;
        }
    }
    within(start, Duration::from_secs(1))?;
    Ok("certainty = f, abundance = 0.2625, histogram path identical".into())
}

// 3
fn chac_recovery() -> Outcome {
    let start = Instant::now();
    let cfg = ChacConfig::default();
    let grid = grid_grains(120, 3, 5).unwrap();
    let n = detect_grains("grid", &grid.annotation, &cfg)
        .unwrap()
        .count();
    ensure(n == 9, || format!("3x3 grid gave {n} grains"))?;
    let mut worst = usize::MAX;
    let mut min_solidity = f64::INFINITY;
    for seed in 0..20 {
        let truth = voronoi_grains(&SynthSpec::new(512, 512, 30, seed)).unwrap();
        let set = detect_grains("v", &truth.annotation, &cfg).unwrap();
        worst = worst.min(set.count());
        for g in &set.grains {
            min_solidity = min_solidity.min(g.solidity);
        }
        ensure(set.count() >= 27, || {
            format!("seed {seed}: {} of 30 cells", set.count())
        })?;
    }
    ensure(min_solidity >= 0.90, || format!("solidity {min_solidity}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!(
        "grid 9/9; Voronoi worst {worst}/30 over 20 seeds; min solidity {min_solidity:.3}"
    ))
}

// 4
fn annotation_error_monotonicity() -> Outcome {
    let start = Instant::now();
    let drops = [0.0, 0.25, 0.5, 0.75, 1.0];
    let cfg = ChacConfig::default();
    let conf = ConfidenceConfig::new(0.15).unwrap();
    let seeds = 10u64;
    let mut counts = [0.0; 5];
    let mut f1s = [0.0; 5];
    for seed in 0..seeds {
        let truth = voronoi_grains(&SynthSpec::new(512, 512, 30, seed)).unwrap();
        let reference = certainty(&soften(&truth.annotation, 0.75, 0.15, seed).unwrap(), &conf);
        for (i, &d) in drops.iter().enumerate() {
            let degraded = degrade_annotation(&truth, d, seed ^ 0xd0).unwrap();
            counts[i] += detect_grains("d", &degraded, &cfg).unwrap().count() as f64 / seeds as f64;
            f1s[i] += confusion(&degraded, &truth.annotation)
                .unwrap()
                .f1()
                .unwrap_or(0.0)
                / seeds as f64;
            let map = soften(&degraded, 0.75, 0.15, seed).unwrap();
            let c = certainty(&map, &conf);
            ensure(c == reference, || {
                format!("seed {seed} drop {d}: certainty {c} vs {reference}")
            })?;
            let bin = degraded.map(|&b| if b { 1.0 } else { 0.0 });
            let c = certainty(&ProbabilityMap::from_grid(bin).unwrap(), &conf);
            ensure(c == 1.0, || {
                format!("seed {seed} drop {d}: binary map certainty {c}")
            })?;
        }
    }
    for i in 1..drops.len() {
        ensure(counts[i] <= counts[i - 1], || {
            format!("grain counts {counts:?}")
        })?;
        ensure(f1s[i] < f1s[i - 1], || format!("F1 {f1s:?}"))?;
    }
    within(start, Duration::from_secs(60))?;
    Ok(format!(
        "mean grains {:?}; mean F1 {:?}; certainty fixed",
        counts.map(|c| (c * 10.0).round() / 10.0),
        f1s.map(|f| (f * 1000.0).round() / 1000.0)
    ))
}

// 5
fn cm2_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let palette = Cm2Palette::default();
    for i in 0..100 {
        let (w, h) = (rng.gen_range(1..40), rng.gen_range(1..40));
        let pred = random_mask(&mut rng, w, h, 0.4);
        let gt = random_mask(&mut rng, w, h, 0.4);
        let img = render_cm2(&pred, &gt, &palette).unwrap();
        let back = cm2_census(&img, &palette).unwrap();
        let want = confusion(&pred, &gt).unwrap();
        ensure(back == want, || format!("pair {i}: {back:?} vs {want:?}"))?;
    }
    Ok("100 pairs identical".into())
}

// 6
fn gradient_check() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for seed in 0..5 {
        let net = ToyNet::random(100 + seed);
        let (img, gt) = reference::fixture(seed, 8);
        let c = reference::gradient_check(&net, &img, &gt, 1e-3);
        ensure(c.checked == net.parameter_count(), || {
            format!("seed {seed}: checked {}", c.checked)
        })?;
        worst = worst.max(c.max_rel);
    }
    ensure(worst <= 1e-4, || format!("max relative error {worst:e}"))?;
    within(start, Duration::from_secs(30))?;
    Ok(format!("max relative error {worst:.2e} over 5 seeds"))
}

fn mean_bce(net: &ToyNet, data: &[(ProbabilityMap, BinaryMask)]) -> f64 {
    data.iter()
        .map(|(x, y)| bce(&net.forward(x).unwrap(), y).unwrap())
        .sum::<f64>()
        / data.len() as f64
}

// 7
fn lambda_mechanics() -> Outcome {
    let start = Instant::now();
    let data = gbeval::checkpoint::toy_fixture(8, 16, 0).unwrap();
    let net0 = ToyNet::random(0);
    let mut norms = Vec::new();
    let mut bce_zero = (0.0, 0.0);
    for lambda in [0.0, 1e-4, 5e-4, 1e-3] {
        let cfg = TrainConfig {
            batch_size: 4,
            lambda,
            steps: 500,
            rng_seed: 0,
            adam: AdamParams::default(),
        };
        let out = train(net0.clone(), None, &data, &cfg).unwrap();
        norms.push(out.net.weight_norm_sq());
        if lambda == 0.0 {
            bce_zero = (mean_bce(&net0, &data), mean_bce(&out.net, &data));
        }
    }
    for i in 1..norms.len() {
        ensure(norms[i] < norms[i - 1], || {
            format!("final sum of squares {norms:?}")
        })?;
    }
    ensure(bce_zero.1 < bce_zero.0, || {
        format!("BCE {} -> {}", bce_zero.0, bce_zero.1)
    })?;
    within(start, Duration::from_secs(120))?;
    Ok(format!(
        "sum w^2 {:?}; BCE at lambda=0 {:.4} -> {:.4}",
        norms.iter().map(|n| format!("{n:.6}")).collect::<Vec<_>>(),
        bce_zero.0,
        bce_zero.1
    ))
}

// 8
fn freezing_contract() -> Outcome {
    let data = gbeval::checkpoint::toy_fixture(4, 16, 8).unwrap();
    let mut net = ToyNet::random(8);
    net.set_trainable(LayerId::Enc1, false);
    net.set_trainable(LayerId::Enc2, false);
    let cfg = TrainConfig {
        steps: 50,
        lambda: 1e-3,
        adam: AdamParams {
            learning_rate: 1e-2,
            ..AdamParams::default()
        },
        ..TrainConfig::default()
    };
    let out = train(net.clone(), None, &data, &cfg).unwrap();
    for id in [LayerId::Enc1, LayerId::Enc2] {
        let (a, b) = (net.layer(id), out.net.layer(id));
        let same = a
            .kernel()
            .iter()
            .zip(b.kernel())
            .all(|(x, y)| x.to_bits() == y.to_bits())
            && a.bias()
                .iter()
                .zip(b.bias())
                .all(|(x, y)| x.to_bits() == y.to_bits());
        ensure(same, || format!("{} changed while frozen", id.name()))?;
    }
    for id in [LayerId::Dec1, LayerId::Head] {
        ensure(net.layer(id).kernel() != out.net.layer(id).kernel(), || {
            format!("{} did not train", id.name())
        })?;
    }

    let (img, gt) = &data[0];
    let frozen = net.backward(img, gt, 1e-3).unwrap();
    let mut unfrozen = net.clone();
    unfrozen.set_trainable(LayerId::Enc2, true);
    let grown = unfrozen.backward(img, gt, 1e-3).unwrap();
    let (a, b) = (frozen.support(), grown.support());
    ensure(
        a.iter().all(|id| b.contains(id)) && b.len() > a.len(),
        || format!("support {a:?} -> {b:?}"),
    )?;
    ensure(grown.entry_count() > frozen.entry_count(), || {
        "entry count did not grow".into()
    })?;
    Ok(format!(
        "enc1/enc2 bit-identical after 50 steps; support {} -> {} layers",
        a.len(),
        b.len()
    ))
}

fn write_dataset(dir: &Path) {
    for i in 0..14u64 {
        let spec = SynthSpec::new(1024, 1024, 60, 900 + i);
        let truth = voronoi_grains(&spec).unwrap();
        let img = soften(&truth.annotation, 0.5, 0.15, i).unwrap();
        write_probability(
            &dir.join(format!("images/tem_{i:02}.png")),
            &img,
            SampleDepth::Eight,
        )
        .unwrap();
        write_mask(
            &dir.join(format!("annotations/tem_{i:02}.png")),
            &truth.annotation,
        )
        .unwrap();
    }
}

fn tree_bytes(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap().display().to_string();
                out.push((rel, std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

// 9
fn pipeline_determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let root = tmp.path();
    write_dataset(root);
    let run = |name: &str| {
        cmd_prep(
            &PrepArgs {
                images: root.join("images"),
                annotations: root.join("annotations"),
                k: 5,
                out: root.join(name).join("manifest.json"),
                augmentation: AugmentationArg::D4,
                lenient: false,
            },
            2024,
        )
        .map_err(|e| e.to_string())
    };
    run("a")?;
    run("b")?;
    let m: DatasetManifest =
        serde_json::from_str(&std::fs::read_to_string(root.join("a/manifest.json")).unwrap())
            .unwrap();
    let mut m = m;
    m.validate().map_err(|e| e.to_string())?;
    ensure(m.pairs.len() == 56, || {
        format!("{} quarters", m.pairs.len())
    })?;
    let sizes: Vec<usize> = m.folds.iter().map(|f| f.validation_ids.len()).collect();
    ensure(sizes == [12, 11, 11, 11, 11], || {
        format!("fold sizes {sizes:?}")
    })?;
    for (i, &s) in sizes.iter().enumerate() {
        let want = (56 - s) * 8;
        ensure(m.training_image_count(i) == want, || {
            format!("fold {i}: {}", m.training_image_count(i))
        })?;
        if s == 11 {
            ensure(want == 360, || "arithmetic".into())?;
        }
    }
    let (a, b) = (tree_bytes(&root.join("a")), tree_bytes(&root.join("b")));
    ensure(a.len() == 1 + 2 * 56, || {
        format!("{} files written", a.len())
    })?;
    ensure(a == b, || "re-run differs".into())?;
    Ok("56 quarters, folds [12, 11, 11, 11, 11], 360 training images per 11-fold, re-run byte-identical".into())
}

fn record(lambda: f64, fold: usize, f1: f64, grains: u64) -> RunRecord {
    RunRecord {
        architecture: "unet".into(),
        lambda,
        finetune_level: "all".into(),
        fold_index: fold,
        metrics: MetricBundle {
            f1: Some(f1),
            grain_count: Some(grains),
            ..MetricBundle::default()
        },
        grain_count: None,
    }
}

// 10
fn aggregation_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let lambdas = [0.0, 1e-4, 5e-4, 1e-3];
    let mut records = Vec::new();
    for &l in &lambdas {
        for fold in 0..5 {
            records.push(record(
                l,
                fold,
                rng.gen_range(0.4..0.8),
                rng.gen_range(2000..6000),
            ));
        }
    }
    let groups = aggregate(&records, &[KeyField::Lambda]).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for g in &groups {
        let l = g.key.lambda.unwrap();
        for m in [Metric::F1, Metric::GrainCount] {
            let xs: Vec<f64> = records
                .iter()
                .filter(|r| r.lambda == l)
                .map(|r| r.metric(m).unwrap())
                .collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let sd = (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt();
            let s = g.get(m).unwrap();
            let err = ((s.mean - mean).abs() / mean.abs().max(1.0))
                .max((s.std.unwrap() - sd).abs() / sd.max(1.0));
            worst = worst.max(err);
        }
    }
    ensure(worst <= 1e-12, || format!("deviation {worst:e}"))?;

    // Baseline 3000 grains per image against 4710 with the regularized model.
    let base = [2950, 3050, 3000, 2980, 3020].map(|g| record(0.0, 0, 0.5, g));
    let reg = [4700, 4720, 4690, 4730, 4710].map(|g| record(1e-3, 0, 0.5, g));
    let mut all = base.to_vec();
    all.extend(reg);
    for (i, r) in all.iter_mut().enumerate() {
        r.fold_index = i % 5;
    }
    let groups = aggregate(&all, &[KeyField::Lambda]).map_err(|e| e.to_string())?;
    let a = groups[0].get(Metric::GrainCount).unwrap().mean;
    let b = groups[1].get(Metric::GrainCount).unwrap().mean;
    let ri = relative_improvement(a, b).unwrap();
    ensure(a == 3000.0 && b == 4710.0, || format!("means {a} {b}"))?;
    ensure(ri == (4710.0 - 3000.0) / 3000.0, || {
        format!("improvement {ri}")
    })?;
    ensure((100.0 * ri).round() == 57.0, || format!("improvement {ri}"))?;
    Ok(format!(
        "max deviation {worst:.1e}; improvement (4710-3000)/3000 = {:.1}%",
        100.0 * ri
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("metric oracle equivalence", metric_oracle),
        ("confidence metric closed forms", confidence_closed_forms),
        ("CHAC synthetic recovery", chac_recovery),
        (
            "annotation-error monotonicity",
            annotation_error_monotonicity,
        ),
        ("CM2 round-trip", cm2_round_trip),
        ("toynet gradient check", gradient_check),
        ("lambda mechanics", lambda_mechanics),
        ("freezing contract", freezing_contract),
        ("pipeline determinism", pipeline_determinism),
        ("aggregation oracle", aggregation_oracle),
    ];
    let only: Option<usize> = std::env::args().skip(1).find_map(|a| a.parse().ok());
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if only.is_some_and(|n| n != i + 1) {
            continue;
        }
        let t = Instant::now();
        let res = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match res {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.2}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.2}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
