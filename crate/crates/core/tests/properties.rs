use std::collections::{BTreeMap, BTreeSet};

use proptest::prelude::*;

use sedfuse::decode::{binarize, median_smooth, BinaryGrid, PostProcessConfig};
use sedfuse::formats::*;
use sedfuse::fusion::{classwise_weights, combine_pair, fuse_classwise, ClassF1Table, FusionMode};
use sedfuse::metrics::{event_f1, psds, psds_from_detections, CollarConfig, PsdsConfig};
use sedfuse::spl::{active_classes, assign_pseudo_label, select, RejectReason, Verdict};
use sedfuse::synth::{gen_truth, simulate_separation, sources_per_mixture, ModelSkill, ScenarioConfig};
use sedfuse::{ClassVocabulary, Event, EventList, FrameGrid, SeparationManifest, TagPrediction, WeakLabelSet};

fn vocab(n: usize) -> ClassVocabulary {
    ClassVocabulary::new((0..n).map(|i| format!("class_{i}"))).unwrap()
}

/// Up to `n` events over `clips` clips of 10 s and `classes` classes,
/// with times on a 1 ms grid.
fn events(clips: usize, classes: usize, n: usize) -> impl Strategy<Value = Vec<Event>> {
    prop::collection::vec((0..clips, 0u32..9000, 1u32..1000, 0..classes), 0..n).prop_map(move |raw| {
        raw.into_iter()
            .map(|(k, on, dur, c)| {
                let onset = on as f64 / 1000.0;
                Event::new(format!("clip_{k}"), onset, onset + dur as f64 / 1000.0, format!("class_{c}"))
            })
            .collect()
    })
}

fn sorted(list: &EventList) -> Vec<(String, u64, u64, String)> {
    let mut v: Vec<_> = list
        .iter()
        .map(|e| (e.clip_id.clone(), e.onset.to_bits(), e.offset.to_bits(), e.class.clone()))
        .collect();
    v.sort();
    v
}

fn grid_strategy(frames: usize, classes: usize) -> impl Strategy<Value = FrameGrid> {
    prop::collection::vec(0.0f64..=1.0, frames * classes)
        .prop_map(move |v| FrameGrid::new("clip", 0.02, classes, v).unwrap())
}

fn f1_table(m: usize, c: usize, f1: Vec<f64>) -> ClassF1Table {
    ClassF1Table::new(
        (0..m).map(|i| format!("m{i}")).collect(),
        vocab(c).classes().to_vec(),
        f1.chunks(c).map(<[f64]>::to_vec).collect(),
    )
    .unwrap()
}

fn tag(id: &str, mix: &str, target: Vec<f64>, v: &ClassVocabulary) -> TagPrediction {
    TagPrediction::new(id, mix, target, 0.1, v).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn events_round_trip(raw in events(3, 4, 30)) {
        let v = vocab(4);
        let list = EventList::new(raw, &v).unwrap();
        let back = parse_events_str(&events_to_string(&list), &v, "events.tsv").unwrap();
        prop_assert_eq!(sorted(&back), sorted(&list));
    }

    #[test]
    fn grids_round_trip_and_reorder(values in prop::collection::vec(0.0f64..=1.0, 12), perm_seed in 0usize..6) {
        let v = vocab(3);
        let g = FrameGrid::new("clip", 0.064, 3, values).unwrap();
        let text = framegrids_to_string(std::slice::from_ref(&g), &v).unwrap();
        prop_assert_eq!(&parse_framegrids_str(&text, &v, "g").unwrap()[0], &g);

        // written under a permuted vocabulary, read back under the original
        let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let order = orders[perm_seed];
        let pv = ClassVocabulary::new(order.iter().map(|&i| v.name(i).to_string())).unwrap();
        let pg = g.permute_columns(&order).unwrap();
        let text = framegrids_to_string(&[pg], &pv).unwrap();
        prop_assert_eq!(&parse_framegrids_str(&text, &v, "g").unwrap()[0], &g);
    }

    #[test]
    fn weak_labels_round_trip(sets in prop::collection::vec(prop::collection::btree_set(0usize..5, 1..5), 1..6)) {
        let v = vocab(5);
        let map: BTreeMap<String, BTreeSet<String>> = sets
            .iter()
            .enumerate()
            .map(|(k, s)| (format!("clip_{k}"), s.iter().map(|&c| v.name(c).to_string()).collect()))
            .collect();
        let weak = WeakLabelSet::new(map, &v).unwrap();
        let back = parse_weak_labels_str(&weak_labels_to_string(&weak, &v), &v, "weak.tsv").unwrap();
        prop_assert_eq!(back, weak);
    }

    #[test]
    fn tags_and_manifest_round_trip(probs in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 3), 1..8), n in 1usize..4) {
        let v = vocab(3);
        let tags: Vec<TagPrediction> = probs
            .iter()
            .enumerate()
            .map(|(i, p)| TagPrediction::new(format!("s{i}"), format!("mix{}", i / n), p.clone(), p[0] * 0.5, &v).unwrap())
            .collect();
        let back = parse_tags_str(&tags_to_string(&tags, &v), &v, "tags.jsonl").unwrap();
        prop_assert_eq!(back, tags);

        let entries: Vec<(String, Vec<String>)> = (0..probs.len())
            .map(|k| (format!("mix{k}"), (0..n).map(|j| format!("mix{k}_src{j}")).collect()))
            .collect();
        let manifest = SeparationManifest::new(entries).unwrap();
        let back = parse_manifest_str(&manifest_to_string(&manifest), "sep_manifest.jsonl").unwrap();
        prop_assert_eq!(back, manifest);
    }

    #[test]
    fn selection_respects_weak_labels_and_order(
        probs in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 6), 1..7),
        weak_mask in prop::collection::vec(any::<bool>(), 6),
        tau in 0.05f64..0.95,
        rot in 0usize..7,
    ) {
        let v = vocab(6);
        let tags: Vec<TagPrediction> =
            probs.iter().enumerate().map(|(i, p)| tag(&format!("s{i}"), "mix", p.clone(), &v)).collect();
        let weak: BTreeSet<String> =
            (0..6).filter(|&c| weak_mask[c]).map(|c| v.name(c).to_string()).collect();
        let result = select("mix", &tags, &weak, &v, tau).unwrap();
        for s in &result.selected {
            prop_assert!(weak.contains(&s.class));
        }
        for r in &result.rejected {
            let t = tags.iter().find(|t| t.source_id == r.source_id).unwrap();
            if let Verdict::SingleEvent(class) = assign_pseudo_label(t, &v, tau).unwrap().verdict {
                prop_assert_eq!(&r.reason, &RejectReason::NotInWeakLabels);
                prop_assert!(!weak.contains(&class));
            }
        }

        let mut rotated = tags.clone();
        rotated.rotate_left(rot % tags.len());
        let again = select("mix", &rotated, &weak, &v, tau).unwrap();
        let key = |r: &sedfuse::spl::SelectionResult| {
            r.selected.iter().map(|s| (s.source_id.clone(), s.class.clone())).collect::<BTreeSet<_>>()
        };
        prop_assert_eq!(key(&again), key(&result));
    }

    #[test]
    fn higher_tau_shrinks_active_set(p in prop::collection::vec(0.0f64..=1.0, 8), t1 in 0.05f64..0.95, dt in 0.0f64..0.5) {
        let v = vocab(8);
        let t = tag("s", "mix", p, &v);
        let t2 = (t1 + dt).min(0.99);
        let low: BTreeSet<usize> = active_classes(&t, t1).into_iter().collect();
        let high: BTreeSet<usize> = active_classes(&t, t2).into_iter().collect();
        prop_assert!(high.is_subset(&low));
    }

    #[test]
    fn weights_normalize_and_shift(
        (m, c, f1) in (1usize..5, 1usize..6).prop_flat_map(|(m, c)| (Just(m), Just(c), prop::collection::vec(0.0f64..=1.0, m * c))),
        beta in -20.0f64..20.0,
        shift in -0.5f64..0.5,
    ) {
        let w = classwise_weights(&f1_table(m, c, f1.clone()), beta, FusionMode::Normalized).unwrap();
        for j in 0..c {
            let sum: f64 = (0..m).map(|i| w.weights[i][j]).sum();
            prop_assert!((sum - 1.0).abs() <= 1e-12, "column {} sums to {}", j, sum);
        }
        // shift column 0 of every model; keep values inside [0, 1]
        let lo = (0..m).map(|i| f1[i * c]).fold(f64::INFINITY, f64::min);
        let hi = (0..m).map(|i| f1[i * c]).fold(f64::NEG_INFINITY, f64::max);
        let s = shift.clamp(-lo, 1.0 - hi);
        let shifted: Vec<f64> = f1.iter().enumerate().map(|(k, x)| if k % c == 0 { x + s } else { *x }).collect();
        let w2 = classwise_weights(&f1_table(m, c, shifted), beta, FusionMode::Normalized).unwrap();
        for i in 0..m {
            prop_assert!((w.weights[i][0] - w2.weights[i][0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn fused_values_are_bounded_and_modes_agree_on_decisions(
        grids in prop::collection::vec(grid_strategy(4, 3), 1..5),
        f1 in prop::collection::vec(0.0f64..=1.0, 12),
        beta in 0.0f64..10.0,
        t in 0.05f64..0.95,
    ) {
        let m = grids.len();
        let refs: Vec<&FrameGrid> = grids.iter().collect();
        let table = f1_table(m, 3, f1[..m * 3].to_vec());
        let norm = fuse_classwise(&refs, &classwise_weights(&table, beta, FusionMode::Normalized).unwrap()).unwrap();
        let faith = fuse_classwise(&refs, &classwise_weights(&table, beta, FusionMode::Faithful).unwrap()).unwrap();
        let mf = m as f64;
        for f in 0..4 {
            for j in 0..3 {
                let lo = grids.iter().map(|g| g.get(f, j)).fold(f64::INFINITY, f64::min);
                let hi = grids.iter().map(|g| g.get(f, j)).fold(f64::NEG_INFINITY, f64::max);
                let (n, a) = (norm.get(f, j), faith.get(f, j));
                prop_assert!(n >= lo - 1e-12 && n <= hi + 1e-12);
                prop_assert!(a >= lo / mf - 1e-12 && a <= hi / mf + 1e-12);
                // decisions may only differ inside the rounding band around t
                if (n - t).abs() > 1e-12 {
                    prop_assert_eq!(a >= t / mf, n >= t);
                }
            }
        }
    }

    #[test]
    fn sharper_beta_concentrates_on_the_best_model(
        (m, col) in (2usize..6).prop_flat_map(|m| (Just(m), prop::collection::vec(0.0f64..=1.0, m))),
        b1 in 0.0f64..20.0,
        db in 0.1f64..20.0,
    ) {
        let best = (0..m).max_by(|&a, &b| col[a].total_cmp(&col[b])).unwrap();
        prop_assume!((0..m).all(|i| i == best || col[best] - col[i] > 1e-3));
        let table = f1_table(m, 1, col);
        let w1 = classwise_weights(&table, b1, FusionMode::Normalized).unwrap().weights[best][0];
        let w2 = classwise_weights(&table, b1 + db, FusionMode::Normalized).unwrap().weights[best][0];
        prop_assert!(w2 > w1 || w1 == 1.0, "{} then {}", w1, w2);
    }

    #[test]
    fn pair_of_equal_grids_is_identity(g in grid_strategy(5, 3), alpha in 0.0f64..=1.0) {
        prop_assert_eq!(combine_pair(&g, &g, alpha).unwrap(), g);
    }

    #[test]
    fn median_commutes_with_column_permutation(cells in prop::collection::vec(any::<bool>(), 40 * 3), half in 0usize..6) {
        let b = BinaryGrid::new("clip", 0.02, 3, cells.clone()).unwrap();
        let order = [2usize, 0, 1];
        let permuted: Vec<bool> = (0..40).flat_map(|f| order.iter().map(move |&j| (f, j))).map(|(f, j)| cells[f * 3 + j]).collect();
        let pb = BinaryGrid::new("clip", 0.02, 3, permuted).unwrap();
        let cfg = PostProcessConfig::uniform(3, 0.5, 2 * half + 1).unwrap();
        let s = median_smooth(&b, &cfg).unwrap();
        let ps = median_smooth(&pb, &cfg).unwrap();
        for f in 0..40 {
            for (k, &j) in order.iter().enumerate() {
                prop_assert_eq!(ps.get(f, k), s.get(f, j));
            }
        }
    }

    #[test]
    fn raising_threshold_never_adds_frames(g in grid_strategy(30, 2), t1 in 0.01f64..0.99, dt in 0.0f64..0.5) {
        let low = binarize(&g, &PostProcessConfig::uniform(2, t1, 1).unwrap()).unwrap();
        let high = binarize(&g, &PostProcessConfig::uniform(2, (t1 + dt).min(0.99), 1).unwrap()).unwrap();
        for (h, l) in high.cells().iter().zip(low.cells()) {
            prop_assert!(!h || *l);
        }
    }

    #[test]
    fn f1_ignores_order_and_swapping_swaps_precision_recall(
        r in events(3, 3, 15),
        e in events(3, 3, 15),
        seed in any::<u64>(),
    ) {
        let v = vocab(3);
        let cfg = CollarConfig::default();
        // durations below 1 s keep the offset collar at its 0.2 s floor, so
        // the collar test is symmetric in its two arguments
        let short = |xs: Vec<Event>| -> Vec<Event> { xs.into_iter().filter(|x| x.duration() < 1.0).collect() };
        let (r, e) = (short(r), short(e));
        let base = event_f1(&EventList::new(r.clone(), &v).unwrap(), &EventList::new(e.clone(), &v).unwrap(), &v, &cfg).unwrap();

        let mut rs = r.clone();
        let mut es = e.clone();
        let mut rng = sedfuse::rng::SplitMix64::new(seed);
        rng.shuffle(&mut rs);
        rng.shuffle(&mut es);
        let shuffled = event_f1(&EventList::new(rs, &v).unwrap(), &EventList::new(es, &v).unwrap(), &v, &cfg).unwrap();
        prop_assert_eq!(&shuffled, &base);

        let swapped = event_f1(&EventList::new(e, &v).unwrap(), &EventList::new(r, &v).unwrap(), &v, &cfg).unwrap();
        for (a, b) in base.classes.iter().zip(&swapped.classes) {
            prop_assert_eq!(a.precision, b.recall);
            prop_assert_eq!(a.recall, b.precision);
            prop_assert_eq!(a.f1, b.f1);
        }
        prop_assert_eq!(base.macro_f1, swapped.macro_f1);
    }
}

fn psds_fixture(seed: u64) -> (ScenarioConfig, EventList, ClassVocabulary) {
    let cfg = ScenarioConfig {
        seed,
        n_clips: 6,
        n_classes: 3,
        frames_per_clip: 250,
        models: vec![ModelSkill::uniform("m", 0.2, 0.001, 2.0, 4.0)],
        ..ScenarioConfig::default()
    };
    let (truth, _) = gen_truth(&cfg).unwrap();
    let v = cfg.vocabulary().unwrap();
    (cfg, truth, v)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn psds_is_bounded_and_monotone_transform_invariant(seed in 0u64..1000, gseed in any::<u64>()) {
        let (cfg, truth, v) = psds_fixture(seed);
        let mut rng = sedfuse::rng::SplitMix64::new(gseed);
        let grids: Vec<FrameGrid> = cfg
            .clip_ids()
            .iter()
            .map(|id| FrameGrid::from_fn(id.as_str(), cfg.hop_seconds(), cfg.frames_per_clip, 3, |_, _| rng.next_f64().powi(3)).unwrap())
            .collect();
        let decode = PostProcessConfig::defaults(3);
        for pc in [PsdsConfig::psds1(), PsdsConfig::psds2()] {
            let s = psds(&grids, &truth, &v, &decode, &pc).unwrap().psds;
            prop_assert!((0.0..=1.0).contains(&s));

            // halving is exact in binary floating point, so every decision is kept
            let halved: Vec<FrameGrid> = grids.iter().map(|g| g.map(|_, _, x| x / 2.0).unwrap()).collect();
            let mut hc = pc.clone();
            hc.operating_points = pc.operating_points.iter().map(|t| t / 2.0).collect();
            let h = psds(&halved, &truth, &v, &decode, &hc).unwrap().psds;
            prop_assert_eq!(h.to_bits(), s.to_bits());
        }
    }

    #[test]
    fn covering_a_missed_event_never_lowers_tpr(seed in 0u64..1000, pick in any::<prop::sample::Index>()) {
        let (cfg, truth, v) = psds_fixture(seed);
        let all: Vec<Event> = truth.iter().cloned().collect();
        prop_assume!(all.len() >= 2);
        let missed = pick.index(all.len());
        // detections: every other true event exactly, except the missed one
        let base: Vec<Event> = all.iter().enumerate().filter(|(i, _)| i % 2 == 0 && *i != missed).map(|(_, e)| e.clone()).collect();
        let mut more = base.clone();
        more.push(all[missed].clone());
        let seconds = cfg.n_clips as f64 * cfg.clip_seconds;
        for pc in [PsdsConfig::psds1(), PsdsConfig::psds2()] {
            let mut one = pc.clone();
            one.operating_points = vec![0.5];
            let a = psds_from_detections(&[EventList::new(base.clone(), &v).unwrap()], &truth, &v, seconds, &one).unwrap();
            let b = psds_from_detections(&[EventList::new(more.clone(), &v).unwrap()], &truth, &v, seconds, &one).unwrap();
            for (ca, cb) in a.class_roc.iter().zip(&b.class_roc) {
                prop_assert!(cb.points[0].1 >= ca.points[0].1);
            }
            prop_assert!(b.operating_points[0].tpr_mean >= a.operating_points[0].tpr_mean);
        }
    }

    #[test]
    fn generator_is_pure_and_weak_labels_project_strong(seed in any::<u64>()) {
        let cfg = ScenarioConfig { seed, n_clips: 20, ..ScenarioConfig::default() };
        let (t1, w1) = gen_truth(&cfg).unwrap();
        let (t2, w2) = gen_truth(&cfg).unwrap();
        prop_assert_eq!(&t1, &t2);
        prop_assert_eq!(&w1, &w2);
        prop_assert_eq!(&w1, &WeakLabelSet::from_events(&t1));
    }

    #[test]
    fn separation_conserves_events(seed in any::<u64>()) {
        let cfg = ScenarioConfig { seed, n_clips: 20, ..ScenarioConfig::default() };
        let v = cfg.vocabulary().unwrap();
        let (truth, _) = gen_truth(&cfg).unwrap();
        let ids = cfg.clip_ids();
        let n = sources_per_mixture(&truth, &ids);
        let out = simulate_separation(&truth, &ids, &v, &cfg.separation, n, seed).unwrap();
        let again = simulate_separation(&truth, &ids, &v, &cfg.separation, n, seed).unwrap();
        prop_assert_eq!(&out.tags, &again.tags);
        let mut placed: Vec<(String, u64, u64, String)> = out
            .sources
            .iter()
            .flat_map(|s| s.events.iter().map(|e| (e.clip_id.clone(), e.onset.to_bits(), e.offset.to_bits(), e.class.clone())))
            .collect();
        placed.sort();
        prop_assert_eq!(placed, sorted(&truth));
        prop_assert_eq!(out.manifest.sources_per_mixture(), Some(n));
    }
}
