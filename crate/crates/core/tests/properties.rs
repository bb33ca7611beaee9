use std::collections::BTreeSet;

use crossfield_core::analysis::{ccdf_series, descriptive_stats};
use crossfield_core::indicator::{byline_weights, fss, percentile_rank, PositionalWeights};
use crossfield_core::ingest::compute_baselines;
use crossfield_core::scaling::{pooled_ranking, standardize, top_share};
use crossfield_core::synth::{generate_population, FieldSpec};
use crossfield_core::{
    AcademicRank, AuthorRef, Authorship, BylineConvention, CitationBaseline, Publication, Researcher,
    ScalingFactorKind, ScoreEntry, ScoreKind, ScoreSet,
};
use proptest::prelude::*;

fn arb_publication(id: usize) -> impl Strategy<Value = Publication> {
    (
        proptest::collection::vec(0u8..4, 1..9),
        any::<bool>(),
        2004i32..2009,
        proptest::collection::btree_set("[A-D]", 1..3),
        0u64..50,
    )
        .prop_map(move |(institutions, alphabetical, year, cats, citations)| Publication {
            id: format!("p{id}"),
            year,
            subject_categories: cats,
            citations,
            byline: institutions
                .iter()
                .enumerate()
                .map(|(i, inst)| Authorship {
                    author_ref: AuthorRef::Researcher(format!("r{i}")),
                    position: i + 1,
                    institution_id: format!("I{inst}"),
                })
                .collect(),
            convention: if alphabetical { BylineConvention::Alphabetical } else { BylineConvention::Positional },
        })
}

fn researcher(id: &str, years: f64) -> Researcher {
    Researcher {
        id: id.into(),
        field_id: "F".into(),
        uda_id: "U".into(),
        rank: AcademicRank::AssistantProbationary,
        years_active: years,
        institution_id: "I0".into(),
    }
}

fn full_baselines(value: f64) -> CitationBaseline {
    let mut b = CitationBaseline::new();
    for year in 2004..2009 {
        for c in ["A", "B", "C", "D"] {
            b.insert(year, c, value).unwrap();
        }
    }
    b
}

fn arb_scores() -> impl Strategy<Value = Vec<f64>> {
    proptest::collection::vec(prop_oneof![1 => Just(0.0), 3 => 0.0f64..100.0], 2..80)
}

fn set_of(scores: &[f64]) -> ScoreSet {
    ScoreSet::from_scores("F", scores, ScoreKind::FssStar).unwrap()
}

proptest! {
    #[test]
    fn weights_close_to_one(p in arb_publication(0)) {
        let w = byline_weights(&p, &PositionalWeights::default());
        prop_assert_eq!(w.len(), p.byline.len());
        prop_assert!(w.iter().all(|x| *x > 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn first_and_last_dominate_positional_bylines(p in arb_publication(0)) {
        let w = byline_weights(&p, &PositionalWeights::default());
        let n = w.len();
        if p.convention == BylineConvention::Positional && n >= 3 {
            for inner in &w[1..n - 1] {
                prop_assert!(w[0] > *inner && w[n - 1] > *inner);
            }
        }
    }

    #[test]
    fn fss_is_linear_in_citations_and_inverse_in_time(
        pubs in proptest::collection::vec(arb_publication(0), 1..5),
        factor in 1u64..5,
        years in 1.0f64..20.0,
        stretch in 1.0f64..4.0,
    ) {
        let pubs: Vec<Publication> =
            pubs.into_iter().enumerate().map(|(i, p)| Publication { id: format!("p{i}"), ..p }).collect();
        let scaled: Vec<Publication> =
            pubs.iter().map(|p| Publication { citations: p.citations * factor, ..p.clone() }).collect();
        let base = full_baselines(3.0);
        let r = researcher("r0", years);
        let refs: Vec<&Publication> = pubs.iter().collect();
        let scaled_refs: Vec<&Publication> = scaled.iter().collect();
        let a = fss(&r, &refs, &base).unwrap();
        let b = fss(&r, &scaled_refs, &base).unwrap();
        prop_assert!((b - factor as f64 * a).abs() <= 1e-9 * b.max(1.0));
        let longer = fss(&researcher("r0", years * stretch), &refs, &base).unwrap();
        prop_assert!((longer * stretch - a).abs() <= 1e-9 * a.max(1.0));
        // scaling baselines by the same factor as citations leaves FSS unchanged
        let c = fss(&r, &scaled_refs, &full_baselines(3.0 * factor as f64)).unwrap();
        prop_assert!((c - a).abs() <= 1e-9 * a.max(1.0));
    }

    #[test]
    fn baselines_ignore_publication_order(
        mut pubs in proptest::collection::vec(arb_publication(0), 0..20),
        seed in any::<u64>(),
    ) {
        let forward = compute_baselines(&pubs);
        // deterministic shuffle
        let mut s = seed;
        for i in (1..pubs.len()).rev() {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            pubs.swap(i, (s >> 33) as usize % (i + 1));
        }
        let shuffled = compute_baselines(&pubs);
        let a: Vec<_> = forward.iter().map(|(y, c, m)| (y, c.to_string(), m)).collect();
        let b: Vec<_> = shuffled.iter().map(|(y, c, m)| (y, c.to_string(), m)).collect();
        prop_assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(&b) {
            prop_assert_eq!((x.0, &x.1), (y.0, &y.1));
            prop_assert!((x.2 - y.2).abs() <= 1e-12 * x.2);
        }
    }

    #[test]
    fn percentile_rank_survives_monotone_transforms(scores in arb_scores(), a in 0.1f64..10.0, b in 0.0f64..5.0) {
        let set = set_of(&scores);
        let moved: Vec<f64> = scores.iter().map(|x| a * x * x + b).collect();
        let moved = set_of(&moved);
        for e in set.entries() {
            prop_assert_eq!(percentile_rank(&set, &e.researcher).unwrap(), percentile_rank(&moved, &e.researcher).unwrap());
        }
    }

    #[test]
    fn percentile_rank_counts_strictly_better(scores in arb_scores()) {
        let set = set_of(&scores);
        let n = scores.len() as f64;
        for (e, x) in set.entries().iter().zip(&scores) {
            let better = scores.iter().filter(|y| *y > x).count() as f64;
            prop_assert_eq!(percentile_rank(&set, &e.researcher).unwrap(), 100.0 * (n - better - 1.0) / n);
        }
    }

    #[test]
    fn standardize_preserves_order_and_ratios(scores in arb_scores()) {
        let set = set_of(&scores);
        for kind in ScalingFactorKind::ALL {
            let Ok(std) = standardize(&set, kind) else { continue };
            let out = std.scores();
            let ratio = scores.iter().zip(&out).find(|(x, _)| **x > 0.0).map(|(x, y)| y / x);
            for (x, y) in scores.iter().zip(&out) {
                if let Some(r) = ratio {
                    prop_assert!((y - r * x).abs() <= 1e-9 * y.max(1.0));
                }
            }
            for i in 0..scores.len() {
                for j in 0..scores.len() {
                    prop_assert_eq!(scores[i] < scores[j], out[i] < out[j]);
                }
            }
        }
    }

    #[test]
    fn descriptive_matches_sort_oracle(scores in arb_scores()) {
        let d = descriptive_stats(&set_of(&scores)).unwrap();
        let mut sorted = scores.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 { sorted[n / 2] } else { (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0 };
        let mean = sorted.iter().sum::<f64>() / n as f64;
        let zeros = sorted.iter().filter(|x| **x == 0.0).count();
        prop_assert_eq!(d.n, n);
        prop_assert!((d.median - median).abs() <= 1e-12 * median.max(1.0));
        prop_assert!((d.mean - mean).abs() <= 1e-9 * mean.max(1.0));
        prop_assert!((d.pct_zero - 100.0 * zeros as f64 / n as f64).abs() < 1e-12);
        prop_assert!(d.iqr >= 0.0 && d.iqr <= sorted[n - 1] - sorted[0] + 1e-12);
    }

    #[test]
    fn ccdf_is_a_step_survival_curve(scores in arb_scores(), offset in 0.001f64..1.0) {
        let series = ccdf_series(&scores, offset);
        let distinct: BTreeSet<u64> = scores.iter().map(|x| x.to_bits()).collect();
        prop_assert_eq!(series.len(), distinct.len());
        prop_assert_eq!(series[0].y, 1.0);
        let max = scores.iter().copied().fold(f64::MIN, f64::max);
        let maxima = scores.iter().filter(|x| **x == max).count();
        prop_assert_eq!(series.last().unwrap().y, maxima as f64 / scores.len() as f64);
        for w in series.windows(2) {
            prop_assert!(w[0].x < w[1].x && w[0].y > w[1].y && w[1].y > 0.0);
        }
        for p in &series {
            let at_least = scores.iter().filter(|x| **x + offset >= p.x - 1e-12).count();
            prop_assert!((p.y - at_least as f64 / scores.len() as f64).abs() < 1e-12);
        }
    }
}

/// Fields drawn from one distribution land in the global top set in
/// proportion to their size.
#[test]
fn null_population_shares_are_unbiased() {
    const P: f64 = 0.05;
    const SEEDS: u64 = 20;
    let specs: Vec<FieldSpec> = (0..4)
        .map(|i| FieldSpec {
            field_id: format!("F{i}"),
            // distinct sizes give each field its own stream
            n: 400 + i,
            zero_share: 0.15,
            k: 0.35,
            sigma: 0.12,
            mu: 0.0,
            rank_mix: [(AcademicRank::AssistantProbationary, 1.0)].into(),
        })
        .collect();
    let mut mean_share = vec![0.0; specs.len()];
    for seed in 0..SEEDS {
        let sets: Vec<ScoreSet> = generate_population(&specs, seed)
            .unwrap()
            .into_iter()
            .map(|f| standardize(&f.scores, ScalingFactorKind::MeanNonzero).unwrap())
            .collect();
        let report = top_share(&pooled_ranking(&sets).unwrap(), P, crossfield_core::BandMode::PerField).unwrap();
        for (acc, f) in mean_share.iter_mut().zip(&report.fields) {
            *acc += f.share / SEEDS as f64;
        }
    }
    for (spec, share) in specs.iter().zip(&mean_share) {
        let bound = 2.0 * (P * (1.0 - P) / spec.n as f64).sqrt();
        assert!((share - P).abs() < bound, "{}: mean share {share:.4}, bound {bound:.4}", spec.field_id);
    }
}

#[test]
fn score_set_rejects_negative_and_duplicate_entries() {
    let entry = |id: &str, score| ScoreEntry { researcher: id.into(), score };
    assert!(ScoreSet::new("F", vec![entry("a", -1.0)], ScoreKind::FssStar).is_err());
    assert!(ScoreSet::new("F", vec![entry("a", 1.0), entry("a", 2.0)], ScoreKind::FssStar).is_err());
}
