mod common;

use std::collections::BTreeSet;

use cryptolint::ingest::{ProjectMetadata, SourceFile};
use cryptolint::pipeline::{analyze_files, PipelineOptions};
use cryptolint::rules::{Confidence, Finding, RuleId, Severity};
use cryptolint::taint::Sensitivity;
use proptest::prelude::*;

const FIXTURES: &[(&str, &str)] = &[
    ("config.py", include_str!("../fixtures/gemini_config/config.py")),
    ("extract.py", include_str!("../fixtures/gemini_client/extract.py")),
    ("crypto.ts", include_str!("../fixtures/des_ecb/crypto.ts")),
    ("client.ts", include_str!("../fixtures/auth_headers/client.ts")),
    ("checksum.py", include_str!("../fixtures/md5_checksum/checksum.py")),
    ("store.py", include_str!("../fixtures/md5_password/store.py")),
    ("tool.py", include_str!("../fixtures/key_derivation/tool.py")),
    ("kdf.py", include_str!("../fixtures/salt_only/kdf.py")),
    ("digest.ts", include_str!("../fixtures/md5_wrapper/digest.ts")),
];

/// Rule-dense snippets beyond the fixtures so every rule fires somewhere.
const EXTRA: &[(&str, &str)] = &[
    (
        "misc.py",
        "import random\nfrom Crypto.Cipher import AES, ARC4\nimport hashlib\n\
         random.seed(1234)\niv = b'0000000000000000'\n\
         c = AES.new(b'sixteen byte key', AES.MODE_CBC, iv)\n\
         r = ARC4.new(key)\nd = hashlib.pbkdf2_hmac('sha256', pw, b'salt', 100)\n",
    ),
    (
        "node.js",
        "const crypto = require('crypto');\n\
         const c = crypto.createCipheriv('aes-128-ecb', key, null);\n\
         const h = crypto.createHash('sha1').update(password).digest('hex');\n",
    ),
];

fn corpus() -> Vec<Vec<SourceFile>> {
    let mut projects: Vec<Vec<SourceFile>> = FIXTURES
        .iter()
        .chain(EXTRA)
        .map(|(p, t)| vec![SourceFile::from_text(p, t)])
        .collect();
    let mut rng = common::rng(11);
    for i in 0..4 {
        projects.push(vec![SourceFile::from_text(&format!("g{i}.py"), &common::synthetic_python(&mut rng, 3))]);
    }
    projects
}

fn run(files: &[SourceFile], rules: BTreeSet<RuleId>) -> Vec<Finding> {
    let opts = PipelineOptions {
        rules,
        ..PipelineOptions::default()
    };
    analyze_files("p", &ProjectMetadata::default(), files, &opts).report.findings
}

#[test]
fn every_rule_fires_on_the_corpus() {
    let fired: BTreeSet<RuleId> = corpus().iter().flat_map(|f| run(f, RuleId::all())).map(|f| f.rule_id).collect();
    assert_eq!(fired, RuleId::all());
}

#[test]
fn disabling_one_rule_removes_exactly_its_findings() {
    for files in corpus() {
        let all = run(&files, RuleId::all());
        for rule in RuleId::ALL {
            let mut enabled = RuleId::all();
            enabled.remove(&rule);
            let expected: Vec<Finding> = all.iter().filter(|f| f.rule_id != rule).cloned().collect();
            assert_eq!(run(&files, enabled), expected, "{} without {rule}", files[0].rel_path);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn any_rule_subset_is_a_filter(mask in 1u8..=255) {
        let enabled: BTreeSet<RuleId> =
            RuleId::ALL.into_iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, r)| r).collect();
        for files in corpus() {
            let all = run(&files, RuleId::all());
            let expected: Vec<Finding> = all.into_iter().filter(|f| enabled.contains(&f.rule_id)).collect();
            prop_assert_eq!(run(&files, enabled.clone()), expected);
        }
    }
}

#[test]
fn findings_are_sorted_unique_and_stable() {
    for files in corpus() {
        let a = run(&files, RuleId::all());
        let b = run(&files, RuleId::all());
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        let keys: Vec<_> = a.iter().map(|f| (&f.file, f.line, f.rule_id, &f.message)).collect();
        let mut sorted = keys.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(keys, sorted);
    }
}

#[test]
fn misuse_needs_definite_or_credential_evidence() {
    let context_free = [RuleId::R2, RuleId::R5, RuleId::R6, RuleId::R8];
    for files in corpus() {
        for f in run(&files, RuleId::all()).iter().filter(|f| f.severity == Severity::Misuse) {
            let credential = f.evidence.as_ref().is_some_and(|c| c.sensitivity == Sensitivity::Credential);
            assert!(
                context_free.contains(&f.rule_id) || f.confidence == Confidence::Definite || credential,
                "{f:?}"
            );
        }
    }
}

#[test]
fn informational_findings_do_not_set_misuse() {
    let files = [SourceFile::from_text("checksum.py", FIXTURES[4].1)];
    let report = analyze_files("p", &ProjectMetadata::default(), &files, &PipelineOptions::default()).report;
    assert!(!report.findings.is_empty());
    assert!(report.findings.iter().all(|f| f.severity == Severity::Informational));
    assert!(!report.misuse);
}
