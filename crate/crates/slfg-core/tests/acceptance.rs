//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (visible with `cargo test --test acceptance -- --nocapture`) and enforcing
//! its runtime bound.

use std::collections::HashSet;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::prelude::*;
use slfg_core::eval::run_eval;
use slfg_core::fixture::{build_fixture, GROUP_COUNT};
use slfg_core::gateway::mock::trigram_embedding;
use slfg_core::indexing::{load_or_build_index, SceneIndex, SceneSummary};
use slfg_core::inference::{ask, Choice};
use slfg_core::localization::{cosine, normalize_score, score_all, GroupScore, QueryScene};
use slfg_core::reorg::{
    allocate_budget, plan_selection, select_groups, GroupSpan, SelectionConfig, SelectionStrategy,
    ThresholdMode,
};
use slfg_core::sampling::{group_frames, sample_timestamps, Frame, ImageRef, SamplingConfig};
use slfg_core::{EmbeddingVector, MockGateway, ModelGateway, ModelIds, PromptSet};

fn criterion(number: u32, name: &str, limit: Duration, body: impl FnOnce()) {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body));
    let elapsed = start.elapsed();
    match outcome {
        Ok(()) if elapsed <= limit => {
            println!("ACCEPTANCE {number} PASS {name} ({elapsed:.2?})");
        }
        Ok(()) => {
            println!("ACCEPTANCE {number} FAIL {name}: exceeded {limit:?} ({elapsed:.2?})");
            panic!("criterion {number} exceeded its runtime bound");
        }
        Err(cause) => {
            println!("ACCEPTANCE {number} FAIL {name} ({elapsed:.2?})");
            resume_unwind(cause);
        }
    }
}

fn synthetic_frames(timestamps: &[u64]) -> Vec<Frame> {
    timestamps
        .iter()
        .enumerate()
        .map(|(index, &t)| Frame {
            index,
            timestamp_ms: t,
            image_ref: ImageRef::new(format!("frame_{t:08}.jpg")),
        })
        .collect()
}

#[test]
fn c1_sampling_and_grouping_laws() {
    criterion(1, "sampling/grouping suite", Duration::from_secs(1), || {
        let mut rng = StdRng::seed_from_u64(101);
        for _ in 0..1000 {
            let interval = rng.gen_range(1..=60_000u64);
            let origin = rng.gen_range(0..=30_000u64);
            let duration = rng.gen_range(1..=4_000_000u64);
            let group_size = rng.gen_range(1..=32usize);
            let cfg = SamplingConfig::new(interval, origin).unwrap();

            let timestamps = sample_timestamps(duration, &cfg).unwrap();
            let expected = if origin <= duration {
                ((duration - origin) / interval + 1) as usize
            } else {
                0
            };
            assert_eq!(timestamps.len(), expected, "count formula");
            assert_eq!(timestamps.first().copied(), (expected > 0).then_some(origin));
            for pair in timestamps.windows(2) {
                assert_eq!(pair[1] - pair[0], interval, "exact spacing");
            }
            if timestamps.is_empty() {
                continue;
            }

            let frames = synthetic_frames(&timestamps);
            let groups = group_frames(frames.clone(), group_size, &cfg).unwrap();
            let flattened: Vec<Frame> = groups.iter().flat_map(|g| g.frames.clone()).collect();
            assert_eq!(flattened, frames, "round-trip flattening");
            for g in &groups[..groups.len().saturating_sub(1)] {
                assert_eq!(g.frame_count(), group_size);
            }
            for pair in groups.windows(2) {
                assert_eq!(pair[0].end_ms, pair[1].start_ms, "window tiling");
            }
        }
    });
}

/// Independent allocator: hand the spare budget out one frame at a time to
/// the group with the fewest extras so far, largest time span, earliest
/// start, in that precedence.
fn oracle_allocate(spans: &[GroupSpan], max_frames: usize, interval_ms: u64) -> (Vec<usize>, bool) {
    let total: usize = spans.iter().map(|s| s.frame_count).sum();
    if total > max_frames {
        return (vec![0; spans.len()], true);
    }
    let mut extra = vec![0usize; spans.len()];
    for _ in 0..(max_frames - total) {
        let pick = (0..spans.len())
            .min_by_key(|&i| {
                let span = spans[i].frame_count as u64 * interval_ms;
                (extra[i], std::cmp::Reverse(span), spans[i].start_ms)
            })
            .unwrap();
        extra[pick] += 1;
    }
    (extra, false)
}

#[test]
fn c2_budget_allocation_oracle_equivalence() {
    criterion(2, "budget allocation oracle", Duration::from_secs(10), || {
        let interval_ms = 10_000;
        for n in 1..=5usize {
            for frame_count in 1..=16usize {
                for max_frames in 8..=80usize {
                    let spans: Vec<GroupSpan> = (0..n)
                        .map(|i| GroupSpan {
                            group_index: i,
                            frame_count,
                            start_ms: (i * frame_count) as u64 * interval_ms,
                        })
                        .collect();
                    let got = allocate_budget(&spans, max_frames, interval_ms).unwrap();
                    let (expect, over) = oracle_allocate(&spans, max_frames, interval_ms);
                    assert_eq!(got.over_budget, over, "n={n} F={frame_count} T={max_frames}");
                    assert_eq!(got.per_group, expect, "n={n} F={frame_count} T={max_frames}");
                }
            }
        }
    });
}

/// Independent trace of the keep/discard walk: count how many ranks survive.
fn oracle_dynamic_kept(scores: &[f64], theta: f64) -> usize {
    let mut kept = 1;
    while kept < scores.len() {
        let hi = scores[kept - 1];
        let lo = scores[kept];
        let discard = hi > 0.0 && lo / hi <= 1.0 - theta;
        if discard {
            break;
        }
        kept += 1;
    }
    kept
}

fn descending_lists(values: &[f64], max_len: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<f64>, usize)> = (0..values.len())
        .map(|i| (vec![values[i]], i))
        .collect();
    while let Some((list, min_idx)) = stack.pop() {
        out.push(list.clone());
        if list.len() < max_len {
            // only values at or below min_idx keep the list descending
            for (i, &value) in values.iter().enumerate().take(min_idx + 1) {
                let mut next = list.clone();
                next.push(value);
                stack.push((next, i));
            }
        }
    }
    out
}

fn as_scores(values: &[f64]) -> Vec<GroupScore> {
    values
        .iter()
        .enumerate()
        .map(|(i, &score)| GroupScore {
            group_index: i,
            score,
            raw_cosine: 0.0,
            best_scene_index: 0,
        })
        .collect()
}

#[test]
fn c3_selection_oracle_and_scale_invariance() {
    criterion(3, "selection rule oracle + scale invariance", Duration::from_secs(30), || {
        let grid: Vec<f64> = (1..=20).map(|i| i as f64 / 20.0).collect();
        let lists = descending_lists(&grid, 5);
        assert_eq!(lists.len(), 53_129); // multisets of size 1..=5 over 20 values
        let thetas = [0.05, 0.10, 0.20];
        let scales = [0.5, 2.0, 10.0];

        for list in &lists {
            for &theta in &thetas {
                let config = SelectionConfig {
                    strategy: SelectionStrategy::Dynamic,
                    threshold: theta,
                    ..SelectionConfig::default()
                };
                let kept = select_groups(&as_scores(list), &config).unwrap();
                assert_eq!(kept.len(), oracle_dynamic_kept(list, theta), "oracle trace {list:?} theta={theta}");
                assert_eq!(kept, (0..kept.len()).collect::<Vec<_>>(), "kept set is a rank prefix");

                for &c in &scales {
                    let scaled: Vec<f64> = list.iter().map(|s| s * c).collect();
                    let kept_scaled = select_groups(&as_scores(&scaled), &config).unwrap();
                    assert_eq!(
                        kept, kept_scaled,
                        "scale invariance broke for {list:?} theta={theta} c={c}"
                    );
                }
            }
        }
    });
}

/// A synthetic embedded index over a uniform grid, no model calls involved.
fn synthetic_index(duration_ms: u64, group_size: usize, seed: u64) -> SceneIndex {
    let sampling = SamplingConfig::new(10_000, 0).unwrap();
    let timestamps = sample_timestamps(duration_ms, &sampling).unwrap();
    let groups = group_frames(synthetic_frames(&timestamps), group_size, &sampling).unwrap();
    let scenes: Vec<SceneSummary> = groups
        .iter()
        .map(|g| SceneSummary {
            group_index: g.group_index,
            scene_index: 0,
            text: format!("scene {} of video {seed}", g.group_index),
            embedding: Some(trigram_embedding(&format!("text {seed} {}", g.group_index))),
        })
        .collect();
    let descriptions = groups
        .iter()
        .map(|g| slfg_core::indexing::GroupDescription {
            group_index: g.group_index,
            text: format!("description {}", g.group_index),
        })
        .collect();
    SceneIndex {
        video_id: format!("synthetic-{seed}"),
        sampling,
        group_size,
        duration_ms,
        describer_id: "d".into(),
        abstractor_id: "a".into(),
        embedder_id: "e".into(),
        groups,
        descriptions,
        scenes,
        created_at: String::new(),
    }
}

#[test]
fn c4_budget_safety_randomized() {
    criterion(4, "budget safety", Duration::from_secs(10), || {
        let mut rng = StdRng::seed_from_u64(404);
        let indexes: Vec<SceneIndex> = (0..32)
            .map(|i| {
                let duration_ms = rng.gen_range(50_000..=3_000_000u64);
                let group_size = rng.gen_range(1..=24usize);
                synthetic_index(duration_ms, group_size, i)
            })
            .collect();

        for case in 0..10_000 {
            let index = &indexes[rng.gen_range(0..indexes.len())];
            let n = index.groups.len();
            // random descending scores over a random group permutation
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut rng);
            let mut values: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
            values.sort_by(|a, b| b.partial_cmp(a).unwrap());
            let scores: Vec<GroupScore> = order
                .iter()
                .zip(&values)
                .map(|(&group_index, &score)| GroupScore {
                    group_index,
                    score,
                    raw_cosine: score * 2.0 - 1.0,
                    best_scene_index: 0,
                })
                .collect();

            let config = SelectionConfig {
                strategy: match case % 3 {
                    0 => SelectionStrategy::Top1,
                    1 => SelectionStrategy::TopN,
                    _ => SelectionStrategy::Dynamic,
                },
                threshold: rng.gen_range(0.01..0.9),
                threshold_mode: if case % 2 == 0 {
                    ThresholdMode::Relative
                } else {
                    ThresholdMode::Absolute
                },
                max_frames: rng.gen_range(1..=96usize),
                topn_n: rng.gen_range(1..=8usize),
            };

            let plan = plan_selection(index, &scores, &config).unwrap();
            assert!(
                plan.final_frames.len() <= config.max_frames,
                "budget exceeded: {} > {} (case {case})",
                plan.final_frames.len(),
                config.max_frames
            );
            for pair in plan.final_frames.windows(2) {
                assert!(pair[0].timestamp_ms < pair[1].timestamp_ms, "sorted, no duplicates");
            }
            if !plan.over_budget {
                let finals: HashSet<u64> =
                    plan.final_frames.iter().map(|f| f.timestamp_ms).collect();
                for &g in &plan.selected {
                    for t in index.groups[g].timestamps() {
                        assert!(finals.contains(&t), "base frame lost without over-budget flag");
                    }
                }
            }

            // top1's choice is always inside the dynamic selection
            if config.strategy == SelectionStrategy::Dynamic && !plan.selected.is_empty() {
                let top1 = select_groups(
                    &scores,
                    &SelectionConfig {
                        strategy: SelectionStrategy::Top1,
                        ..config.clone()
                    },
                )
                .unwrap();
                assert!(plan.selected.contains(&top1[0]), "strategy nesting");
            }
        }
    });
}

#[test]
fn c5_end_to_end_localization_accuracy() {
    criterion(5, "end-to-end localization", Duration::from_secs(5), || {
        let tmp = tempfile::tempdir().unwrap();
        let fixture = build_fixture(&tmp.path().join("frames"), "acceptance-e2e").unwrap();
        let config = fixture.pipeline_config(&tmp.path().join("index"));
        assert_eq!(config.selection.strategy, SelectionStrategy::Dynamic);
        assert_eq!(config.selection.threshold, 0.10);
        assert_eq!(config.selection.max_frames, 64);
        let gateway = fixture.gateway();
        let prompts = PromptSet::builtin();

        let mut correct = 0;
        for q in &fixture.questions {
            let answer = ask(
                &q.record.video_id,
                &q.record.question,
                &q.record.options,
                &config,
                &gateway,
                &prompts,
            )
            .unwrap();
            assert!(
                answer.selected_groups.contains(&q.expected_group),
                "selected {:?} misses planted group {} for {:?}",
                answer.selected_groups,
                q.expected_group,
                q.record.question
            );
            if answer.choice == Choice::Letter(q.record.answer) {
                correct += 1;
            }
        }
        assert_eq!(correct, fixture.questions.len(), "accuracy must be 1.00");
    });
}

#[test]
fn c6_strategy_ablation_ordering() {
    criterion(6, "strategy ablation ordering", Duration::from_secs(5), || {
        let tmp = tempfile::tempdir().unwrap();
        let fixture = build_fixture(&tmp.path().join("frames"), "ablation").unwrap();
        let gateway = fixture.gateway();
        let prompts = PromptSet::builtin();
        let records = fixture.records();
        assert_eq!(
            fixture.questions.iter().filter(|q| q.split_evidence).count(),
            8,
            "8 of 20 questions need two adjacent groups"
        );

        let accuracy_for = |strategy: SelectionStrategy, topn_n: usize| {
            let mut config = fixture.pipeline_config(&tmp.path().join("index"));
            config.selection.strategy = strategy;
            config.selection.topn_n = topn_n;
            run_eval(&records, &config, &gateway, &prompts)
                .unwrap()
                .accuracy
        };

        let dynamic = accuracy_for(SelectionStrategy::Dynamic, 3);
        let top1 = accuracy_for(SelectionStrategy::Top1, 1);
        let topn1 = accuracy_for(SelectionStrategy::TopN, 1);

        println!("  dynamic={dynamic:.3} top1={top1:.3} topn(1)={topn1:.3}");
        assert!(dynamic > top1, "dynamic ({dynamic}) must beat top1 ({top1})");
        assert!(dynamic >= topn1, "dynamic ({dynamic}) must not lose to topn(1) ({topn1})");
    });
}

#[test]
fn c7_amortization_of_index_cost() {
    criterion(7, "per-question cost amortization", Duration::from_secs(5), || {
        let tmp = tempfile::tempdir().unwrap();
        let fixture = build_fixture(&tmp.path().join("frames"), "amortize").unwrap();
        let prompts = PromptSet::builtin();

        let mut averages = Vec::new();
        for (i, q_count) in [1usize, 2, 5, 10].into_iter().enumerate() {
            let config = fixture.pipeline_config(&tmp.path().join(format!("index-{i}")));
            let gateway = fixture.gateway();
            for q in &fixture.questions[..q_count] {
                ask(
                    &q.record.video_id,
                    &q.record.question,
                    &q.record.options,
                    &config,
                    &gateway,
                    &prompts,
                )
                .unwrap();
            }
            let counts = gateway.ledger().counts();
            assert_eq!(counts.describe_calls, GROUP_COUNT, "describe count constant in q");
            assert_eq!(counts.abstract_calls, GROUP_COUNT, "abstract count constant in q");
            assert_eq!(counts.embed_calls, 1 + q_count, "index batch + one per query");
            assert_eq!(counts.extract_calls, q_count);
            assert_eq!(counts.answer_calls, q_count);
            averages.push(counts.total() as f64 / q_count as f64);
        }
        for pair in averages.windows(2) {
            assert!(
                pair[1] < pair[0],
                "avg calls per question must strictly decrease: {averages:?}"
            );
        }
    });
}

#[test]
fn c8_cache_key_contract() {
    criterion(8, "index cache contract", Duration::from_secs(2), || {
        let tmp = tempfile::tempdir().unwrap();
        let frames_root = tmp.path().join("frames");
        let index_root = tmp.path().join("index");
        let fixture = build_fixture(&frames_root, "cache-a").unwrap();
        let other = build_fixture(&frames_root, "cache-b").unwrap();
        let prompts = PromptSet::builtin();
        let sampling = fixture.sampling;

        let gateway = fixture.gateway();
        let build = |gateway: &dyn ModelGateway,
                     video_id: &str,
                     sampling: &SamplingConfig,
                     group_size: usize| {
            load_or_build_index(
                &frames_root, video_id, sampling, group_size, gateway, &prompts, &index_root,
            )
            .unwrap()
        };

        let (_, hit) = build(&gateway, &fixture.video_id, &sampling, 16);
        assert!(!hit);
        let baseline = gateway.ledger().counts();

        // identical key: zero new model calls
        let (_, hit) = build(&gateway, &fixture.video_id, &sampling, 16);
        assert!(hit);
        assert_eq!(gateway.ledger().counts(), baseline);

        // each single key-field change forces a full rebuild
        let expect_rebuild = |gateway: &MockGateway, video_id: &str, sampling: &SamplingConfig, group_size: usize| {
            let before = gateway.ledger().counts();
            let (index, hit) = build(gateway, video_id, sampling, group_size);
            assert!(!hit);
            let delta = gateway.ledger().counts().since(&before);
            assert_eq!(delta.describe_calls, index.groups.len(), "full rebuild");
        };

        expect_rebuild(&gateway, &other.video_id, &sampling, 16); // video_id
        expect_rebuild(&gateway, &fixture.video_id, &SamplingConfig::new(20_000, 0).unwrap(), 16); // interval
        expect_rebuild(&gateway, &fixture.video_id, &sampling, 8); // group size

        for (field, ids) in [
            ("describer", ModelIds {
                describer: "other-describer".into(),
                abstractor: "mock-abstractor".into(),
                embedder: "mock-embedder-trigram".into(),
                answerer: "mock-answerer".into(),
            }),
            ("abstractor", ModelIds {
                describer: "mock-describer".into(),
                abstractor: "other-abstractor".into(),
                embedder: "mock-embedder-trigram".into(),
                answerer: "mock-answerer".into(),
            }),
            ("embedder", ModelIds {
                describer: "mock-describer".into(),
                abstractor: "mock-abstractor".into(),
                embedder: "other-embedder".into(),
                answerer: "mock-answerer".into(),
            }),
        ] {
            let renamed = slfg_core::MockGateway::with_fixture(fixture.mock.clone()).with_ids(ids);
            let before = renamed.ledger().counts();
            let (index, hit) = build(&renamed, &fixture.video_id, &sampling, 16);
            assert!(!hit, "{field} change must miss the cache");
            assert_eq!(
                renamed.ledger().counts().since(&before).describe_calls,
                index.groups.len()
            );
        }
    });
}

/// Pairwise oracle: rank groups by their best scene cosine, computed with
/// local dot/norm arithmetic rather than the library path.
fn oracle_ranking(index: &SceneIndex, query: &QueryScene) -> Vec<usize> {
    let dot = |u: &EmbeddingVector, v: &EmbeddingVector| -> f64 {
        u.values().iter().zip(v.values()).map(|(a, b)| a * b).sum()
    };
    let norm = |u: &EmbeddingVector| -> f64 { dot(u, u).sqrt() };
    let mut best: Vec<(usize, f64)> = Vec::new();
    for group in &index.groups {
        let mut top = f64::NEG_INFINITY;
        for scene in index.scenes.iter().filter(|s| s.group_index == group.group_index) {
            let e = scene.embedding.as_ref().unwrap();
            let c = (dot(e, &query.embedding) / (norm(e) * norm(&query.embedding)))
                .clamp(-1.0, 1.0);
            top = top.max(c);
        }
        best.push((group.group_index, normalize_score(top)));
    }
    best.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    best.into_iter().map(|(g, _)| g).collect()
}

#[test]
fn c9_cosine_and_ranking_oracle() {
    criterion(9, "cosine correctness + ranking oracle", Duration::from_secs(1), || {
        // analytic cases
        let v = EmbeddingVector::new(vec![0.2, -0.4, 0.9]).unwrap();
        assert!((cosine(&v, &v).unwrap() - 1.0).abs() < 1e-8);
        let x = EmbeddingVector::new(vec![1.0, 0.0]).unwrap();
        let y = EmbeddingVector::new(vec![0.0, 1.0]).unwrap();
        assert!(cosine(&x, &y).unwrap().abs() < 1e-8);
        let xy = EmbeddingVector::new(vec![1.0, 1.0]).unwrap();
        assert!((cosine(&xy, &x).unwrap() - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-8);

        // ranking equals the brute-force pairwise oracle on fixture indexes
        let queries = [
            "a gardener prunes climbing roses along a brick wall",
            "rowers pull a long shell beneath a low iron bridge",
            "a question about nothing planted in particular",
        ];
        for (i, index) in [synthetic_index(1_795_000, 16, 1), synthetic_index(40_000, 16, 2)]
            .iter()
            .chain(std::iter::once(&fixture_index()))
            .enumerate()
        {
            for q_text in &queries {
                let query = QueryScene {
                    question: q_text.to_string(),
                    text: q_text.to_string(),
                    embedding: trigram_embedding(q_text),
                };
                let ranked: Vec<usize> = score_all(index, &query)
                    .unwrap()
                    .iter()
                    .map(|s| s.group_index)
                    .collect();
                assert_eq!(ranked, oracle_ranking(index, &query), "index {i} query {q_text:?}");
            }
        }
    });
}

fn fixture_index() -> SceneIndex {
    let tmp = tempfile::tempdir().unwrap();
    let fixture = build_fixture(&tmp.path().join("frames"), "rank").unwrap();
    let config = fixture.pipeline_config(&tmp.path().join("index"));
    let gateway = fixture.gateway();
    let (index, _) = load_or_build_index(
        &config.frames_root,
        &fixture.video_id,
        &config.sampling,
        config.group_size,
        &gateway,
        &PromptSet::builtin(),
        &config.index_root,
    )
    .unwrap();
    index
}
