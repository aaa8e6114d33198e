use gbeval_core::cm2::{cm2_census, render_cm2, Cm2Palette};
use gbeval_core::dataprep::{augment_d4, build_folds, quarter, reassemble, D4};
use gbeval_core::metrics::{
    abundance, certainty, confidence_from_histogram, confusion, histogram, ConfidenceConfig,
    ConfusionCounts,
};
use gbeval_core::xval::{aggregate, KeyField, Metric, RunRecord};
use gbeval_core::{BinaryMask, Grid, ProbabilityMap};
use proptest::prelude::*;

fn mask_pair(max: usize) -> impl Strategy<Value = (BinaryMask, BinaryMask)> {
    (1..=max, 1..=max).prop_flat_map(|(w, h)| {
        (
            proptest::collection::vec(any::<bool>(), w * h),
            proptest::collection::vec(any::<bool>(), w * h),
        )
            .prop_map(move |(a, b)| {
                (
                    Grid::from_vec(w, h, a).unwrap(),
                    Grid::from_vec(w, h, b).unwrap(),
                )
            })
    })
}

fn prob_map(max: usize) -> impl Strategy<Value = ProbabilityMap> {
    let value = prop_oneof![
        8 => 0.0..=1.0f64,
        1 => Just(0.0),
        1 => Just(1.0),
        1 => Just(0.85),
        1 => Just(0.5),
    ];
    (1..=max, 1..=max).prop_flat_map(move |(w, h)| {
        proptest::collection::vec(value.clone(), w * h)
            .prop_map(move |v| ProbabilityMap::new(w, h, v).unwrap())
    })
}

fn oracle_confusion(p: &BinaryMask, g: &BinaryMask) -> ConfusionCounts {
    let mut c = ConfusionCounts::default();
    for r in 0..p.height() {
        for col in 0..p.width() {
            match (*p.get(r, col), *g.get(r, col)) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    c
}

proptest! {
    #[test]
    fn confusion_matches_double_loop((p, g) in mask_pair(24)) {
        let c = confusion(&p, &g).unwrap();
        prop_assert_eq!(c, oracle_confusion(&p, &g));
        prop_assert_eq!(c.total() as usize, p.len());
    }

    #[test]
    fn f1_identity((p, g) in mask_pair(16)) {
        let c = confusion(&p, &g).unwrap();
        if let Some(f1) = c.f1() {
            let direct = 2.0 * c.tp as f64 / (2 * c.tp + c.fp + c.fn_) as f64;
            prop_assert!((f1 - direct).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&f1));
        }
    }

    #[test]
    fn confusion_is_permutation_invariant((p, g) in mask_pair(12), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffle = |m: &BinaryMask| {
            Grid::from_vec(m.len(), 1, idx.iter().map(|&i| m.as_slice()[i]).collect()).unwrap()
        };
        prop_assert_eq!(confusion(&p, &g).unwrap(), confusion(&shuffle(&p), &shuffle(&g)).unwrap());
    }

    #[test]
    fn certainty_monotone_in_t(map in prob_map(16), a in 0.01..0.49f64, b in 0.01..0.49f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let c_lo = certainty(&map, &ConfidenceConfig::new(lo).unwrap());
        let c_hi = certainty(&map, &ConfidenceConfig::new(hi).unwrap());
        prop_assert!(c_lo <= c_hi);
    }

    #[test]
    fn histogram_path_matches_direct(map in prob_map(20)) {
        let cfg = ConfidenceConfig::new(0.15).unwrap();
        let h = histogram(&map, 20).unwrap();
        prop_assert_eq!(h.total() as usize, map.len());
        let (c, a) = confidence_from_histogram(&h, &cfg).unwrap();
        prop_assert_eq!(c, certainty(&map, &cfg));
        prop_assert_eq!(a, abundance(&map, &cfg));
    }

    #[test]
    fn d4_is_closed_under_composition(
        v in proptest::collection::vec(any::<u8>(), 64),
        i in 0..8usize,
        j in 0..8usize,
    ) {
        let img = Grid::from_vec(8, 8, v).unwrap();
        let all = augment_d4(&img).unwrap();
        let twice = D4::ALL[j].apply(&D4::ALL[i].apply(&img).unwrap()).unwrap();
        prop_assert!(all.contains(&twice));
    }

    #[test]
    fn quarter_then_reassemble(
        (w, h) in (1..=12usize, 1..=12usize),
        seed in any::<u64>(),
    ) {
        let img = Grid::from_fn(2 * w, 2 * h, |r, c| (r as u64 * 131 + c as u64) ^ seed);
        let tiles = quarter(&img).unwrap();
        prop_assert!(tiles.iter().all(|t| (t.width(), t.height()) == (w, h)));
        prop_assert_eq!(reassemble(&tiles).unwrap(), img);
    }

    #[test]
    fn cm2_round_trip((p, g) in mask_pair(20)) {
        let pal = Cm2Palette::default();
        let img = render_cm2(&p, &g, &pal).unwrap();
        prop_assert_eq!(cm2_census(&img, &pal).unwrap(), confusion(&p, &g).unwrap());
    }

    #[test]
    fn folds_partition_pairs(n in 2..200usize, k in 2..10usize, seed in any::<u64>()) {
        prop_assume!(n >= k);
        let folds = build_folds(n, k, seed).unwrap();
        let mut seen: Vec<usize> = folds.iter().flat_map(|f| f.validation_ids.clone()).collect();
        seen.sort_unstable();
        prop_assert_eq!(seen, (0..n).collect::<Vec<_>>());
        let sizes: Vec<usize> = folds.iter().map(|f| f.validation_ids.len()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for f in &folds {
            prop_assert_eq!(f.training_ids.len() + f.validation_ids.len(), n);
        }
    }
}

fn record(arch: u8, lambda: u8, f1: Option<f64>, grains: Option<u64>) -> RunRecord {
    let mut r = RunRecord {
        architecture: format!("arch{arch}"),
        lambda: [0.0, 1e-4, 5e-4, 1e-3][lambda as usize % 4],
        finetune_level: "all".into(),
        fold_index: 0,
        metrics: Default::default(),
        grain_count: grains,
    };
    r.metrics.f1 = f1;
    r
}

fn records() -> impl Strategy<Value = Vec<RunRecord>> {
    proptest::collection::vec(
        (
            0..3u8,
            0..4u8,
            proptest::option::of(0.0..1.0f64),
            proptest::option::of(0..5000u64),
        )
            .prop_map(|(a, l, f, g)| record(a, l, f, g)),
        1..40,
    )
}

proptest! {
    #[test]
    fn aggregate_is_permutation_invariant(rs in records(), seed in any::<u64>()) {
        use rand::{seq::SliceRandom, SeedableRng};
        let mut shuffled = rs.clone();
        shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(
            aggregate(&rs, &KeyField::ALL).unwrap(),
            aggregate(&shuffled, &KeyField::ALL).unwrap()
        );
    }

    #[test]
    fn aggregate_of_concatenation(a in records(), b in records()) {
        let joined: Vec<_> = a.iter().chain(&b).cloned().collect();
        let flipped: Vec<_> = b.iter().chain(&a).cloned().collect();
        prop_assert_eq!(
            aggregate(&joined, &KeyField::ALL).unwrap(),
            aggregate(&flipped, &KeyField::ALL).unwrap()
        );
    }

    #[test]
    fn aggregate_matches_two_pass_oracle(rs in records()) {
        let groups = aggregate(&rs, &KeyField::ALL).unwrap();
        for g in &groups {
            let members: Vec<&RunRecord> = rs
                .iter()
                .filter(|r| Some(r.architecture.as_str()) == g.key.architecture.as_deref()
                    && Some(r.lambda) == g.key.lambda)
                .collect();
            prop_assert_eq!(members.len(), g.n);
            for m in [Metric::F1, Metric::GrainCount] {
                let vals: Vec<f64> = members.iter().filter_map(|r| r.metric(m)).collect();
                match g.get(m) {
                    None => prop_assert!(vals.is_empty()),
                    Some(s) => {
                        prop_assert_eq!(s.n, vals.len());
                        let n = vals.len() as f64;
                        let mean = vals.iter().sum::<f64>() / n;
                        let scale = mean.abs().max(1.0);
                        prop_assert!((s.mean - mean).abs() <= 1e-12 * scale);
                        if vals.len() > 1 {
                            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
                            prop_assert!((s.std.unwrap() - var.sqrt()).abs() <= 1e-12 * scale);
                        } else {
                            prop_assert!(s.std.is_none());
                        }
                    }
                }
            }
        }
    }
}
