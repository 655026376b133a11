mod common;

use std::collections::{BTreeMap, BTreeSet};

use cryptolint::report::{aggregate_corpus, emit_corpus, CorpusStats, OutputFormat, ProjectReport};
use cryptolint::rules::{RuleId, Severity};
use proptest::prelude::*;
use rand::seq::SliceRandom;

fn reports(seed: u64, n: usize) -> Vec<ProjectReport> {
    let mut rng = common::rng(seed);
    (0..n).map(|i| common::synthetic_report(&mut rng, i)).collect()
}

fn fold(reports: &[ProjectReport]) -> CorpusStats {
    reports
        .iter()
        .map(CorpusStats::from_report)
        .fold(CorpusStats::default(), |acc, s| acc.merge(&s))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permutation_invariant(seed in any::<u64>(), n in 0usize..60) {
        let original = reports(seed, n);
        let mut shuffled = original.clone();
        shuffled.shuffle(&mut common::rng(seed ^ 0xfeed));
        prop_assert_eq!(aggregate_corpus(&original).unwrap(), aggregate_corpus(&shuffled).unwrap());
    }

    #[test]
    fn merge_is_associative(seed in any::<u64>(), n in 3usize..60, cut in any::<(u8, u8)>()) {
        let all = reports(seed, n);
        let i = 1 + cut.0 as usize % (n - 2);
        let j = i + 1 + cut.1 as usize % (n - i - 1);
        let (a, b, c) = (fold(&all[..i]), fold(&all[i..j]), fold(&all[j..]));
        let left = a.clone().merge(&b).merge(&c);
        let right = a.merge(&b.merge(&c));
        prop_assert_eq!(&left, &right);
        prop_assert_eq!(left, aggregate_corpus(&all).unwrap());
    }

    #[test]
    fn counts_match_direct_tally(seed in any::<u64>(), n in 0usize..80) {
        let all = reports(seed, n);
        let stats = aggregate_corpus(&all).unwrap();
        let crypto = all.iter().filter(|r| r.crypto_enabled).count();
        let misuse = all.iter().filter(|r| r.misuse).count();
        prop_assert_eq!(stats.total_projects, n);
        prop_assert_eq!(stats.crypto_enabled_count, crypto);
        prop_assert_eq!(stats.misuse_count, misuse);

        let mut by_rule: BTreeMap<RuleId, usize> = BTreeMap::new();
        for r in &all {
            let distinct: BTreeSet<RuleId> =
                r.findings.iter().filter(|f| f.severity == Severity::Misuse).map(|f| f.rule_id).collect();
            for rule in distinct {
                *by_rule.entry(rule).or_default() += 1;
            }
        }
        prop_assert_eq!(&stats.by_rule, &by_rule);
        prop_assert!(stats.by_rule.values().sum::<usize>() >= stats.misuse_count);

        for table in [&stats.by_language, &stats.by_category, &stats.by_market] {
            prop_assert_eq!(table.values().map(|c| c.total()).sum::<usize>(), n);
            for cell in table.values() {
                prop_assert_eq!(cell.misuse_yes + cell.misuse_no, cell.total());
            }
        }
    }

    #[test]
    fn json_round_trips(seed in any::<u64>(), n in 0usize..30) {
        let all = reports(seed, n);
        let stats = aggregate_corpus(&all).unwrap();
        let text = serde_json::to_string(&stats).unwrap();
        prop_assert_eq!(serde_json::from_str::<CorpusStats>(&text).unwrap(), stats.clone());
        prop_assert_eq!(emit_corpus(&all, &stats, OutputFormat::Json), emit_corpus(&all, &stats, OutputFormat::Json));
        let doc: serde_json::Value = serde_json::from_str(&emit_corpus(&all, &stats, OutputFormat::Json)).unwrap();
        let back: Vec<ProjectReport> = serde_json::from_value(doc["projects"].clone()).unwrap();
        prop_assert_eq!(back.len(), all.len());
        for (a, b) in back.iter().zip(&all) {
            prop_assert_eq!(&a.project_id, &b.project_id);
            prop_assert_eq!(a.findings.len(), b.findings.len());
        }
    }
}

#[test]
fn chunked_parallel_fold_equals_sequential() {
    let all = reports(99, 500);
    let chunks: Vec<&[ProjectReport]> = all.chunks(37).collect();
    let partials = cryptolint::pipeline::map_ordered(&chunks, 4, |c| fold(c));
    let merged = partials.iter().fold(CorpusStats::default(), |acc, s| acc.merge(s));
    assert_eq!(merged, aggregate_corpus(&all).unwrap());
}
