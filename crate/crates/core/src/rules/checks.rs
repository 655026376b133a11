use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{Confidence, Finding, RuleContext, RuleId, Severity};
use crate::catalog::{CryptoApiSpec, ParamRole, Role, SemanticCategory};
use crate::dependency::EdgeKind;
use crate::ir::{ArgPosition, ArgTag, Argument, IrUnit, ValueKind};
use crate::taint::{consumes_credential, is_credential_name, OriginValue, Sensitivity, TaintChain};

const DEPRECATED_ALGORITHMS: [&str; 5] = ["des", "3des-1key", "rc4", "rc2", "blowfish-64"];
const AUTHENTICATED_MODES: [&str; 7] = ["gcm", "ccm", "ocb", "eax", "siv", "poly1305", "fernet"];
const MODE_TOKENS: [&str; 13] = [
    "gcm", "ccm", "ocb", "eax", "siv", "poly1305", "ecb", "cbc", "ctr", "cfb", "ofb", "xts", "pcbc",
];
const CIPHER_SUFFIXES: [&str; 7] = ["-ecb", "-cbc", "-cfb", "-cfb1", "-cfb8", "-ofb", "-ctr"];

fn crypto_spec<'a>(ctx: &RuleContext<'a>, unit: &IrUnit) -> Option<&'a CryptoApiSpec> {
    ctx.spec(unit).filter(|s| s.role.is_crypto())
}

fn with_origin(mut f: Finding, arg: &Argument, origin: OriginValue) -> Finding {
    f.resolved_origins.push((arg.position.clone(), origin));
    f
}

fn with_evidence(ctx: &RuleContext<'_>, mut f: Finding, chain: &TaintChain, trigger: &IrUnit) -> Finding {
    f.confidence = ctx.confidence(Some(chain), trigger);
    f.evidence = Some(chain.clone());
    f
}

/// Text of an argument after origin resolution: the literal when one is
/// found, the raw argument text otherwise.
fn resolved_text(ctx: &RuleContext<'_>, unit: &IrUnit, arg: &Argument) -> String {
    let origin = ctx.taint.resolve_to_origin(unit, arg);
    origin.literal_text.unwrap_or_else(|| arg.value.clone())
}

/// Mode-bearing texts of a cipher call: the mode parameter, a `mode` entry
/// of an options object, and the algorithm string (e.g. "aes-128-ecb").
fn mode_texts(ctx: &RuleContext<'_>, unit: &IrUnit, spec: &CryptoApiSpec) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(arg) = spec.param(unit, ParamRole::Mode) {
        out.push(resolved_text(ctx, unit, arg));
    }
    if let Some(arg) = spec.param(unit, ParamRole::Options) {
        out.extend(
            arg.dict_entries()
                .into_iter()
                .filter(|(k, _)| k.eq_ignore_ascii_case("mode"))
                .map(|(_, v)| v),
        );
    }
    if let Some(arg) = spec.algorithm(unit) {
        out.push(resolved_text(ctx, unit, arg));
    }
    out
}

fn mode_token(texts: &[String]) -> Option<&'static str> {
    texts.iter().find_map(|t| {
        let lower = t.to_lowercase();
        MODE_TOKENS.into_iter().find(|m| lower.contains(m))
    })
}

/// Maps an algorithm string onto the deprecated list, stripping module
/// prefixes and OpenSSL-style mode suffixes.
fn deprecated_algorithm(text: &str) -> Option<&'static str> {
    let lower = text.trim().to_lowercase();
    let mut name = lower.rsplit('.').next().unwrap_or(&lower);
    for suffix in CIPHER_SUFFIXES {
        if let Some(stripped) = name.strip_suffix(suffix) {
            name = stripped;
            break;
        }
    }
    let canonical = match name {
        "arc4" | "arcfour" => "rc4",
        "arc2" => "rc2",
        "bf" | "blowfish" => "blowfish-64",
        other => other,
    };
    DEPRECATED_ALGORITHMS.into_iter().find(|d| *d == canonical)
}

fn normalize_hash(name: &str) -> String {
    name.to_lowercase().replace(['-', '_'], "")
}

fn insert_once(by_line: &mut BTreeMap<(String, usize), Finding>, f: Finding) {
    by_line.entry((f.file.clone(), f.line)).or_insert(f);
}

/// R1: a literal key reaching a cipher, KDF or MAC, or a secret-looking
/// constant that reaches a sink or sits under a credential name.
pub fn check_fixed_secret(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let catalog = ctx.catalog();
    let secrets = ctx.thresholds.secrets;
    let mut by_line = BTreeMap::new();
    for unit in &ctx.graph().nodes {
        let keyed = ctx
            .spec(unit)
            .filter(|s| matches!(s.role, Role::SymmetricCipher | Role::Kdf | Role::Mac));
        if let Some(arg) = keyed.and_then(|s| s.param(unit, ParamRole::Key)) {
            let origin = ctx.taint.resolve_to_origin(unit, arg);
            if origin.is_literal() {
                let f = ctx.finding(
                    RuleId::R1,
                    Severity::Misuse,
                    &unit.file,
                    unit.line,
                    format!("hard-coded key passed to {}", unit.call_name),
                );
                insert_once(&mut by_line, with_origin(f, arg, origin));
            }
        }
        let reaching = ctx.chains_from(&unit.unit_id).first().copied();
        for arg in &unit.arguments {
            let mut candidates: Vec<(Option<String>, String)> = Vec::new();
            match arg.tag {
                ArgTag::Constant => {
                    let label = match &arg.position {
                        ArgPosition::Keyword(k) => Some(k.clone()),
                        ArgPosition::Index(_) => None,
                    };
                    candidates.push((label, arg.value.clone()));
                }
                ArgTag::DictLiteral => {
                    candidates.extend(arg.dict_entries().into_iter().map(|(k, v)| (Some(k), v)))
                }
                ArgTag::Variable => {
                    if let Some(b) = ctx.taint.binding_for(unit, &arg.value) {
                        if b.kind == ValueKind::Literal
                            && !is_credential_name(&b.name)
                            && secrets.matches(&b.value, catalog)
                        {
                            if let Some(chain) = reaching {
                                let f = ctx.finding(
                                    RuleId::R1,
                                    Severity::Misuse,
                                    &b.file,
                                    b.line,
                                    format!("hard-coded secret {} reaches {}", b.name, unit.call_name),
                                );
                                insert_once(&mut by_line, with_evidence(ctx, f, chain, unit));
                            }
                        }
                    }
                }
                _ => {}
            }
            for (label, value) in candidates {
                if !secrets.matches(&value, catalog) {
                    continue;
                }
                let named = label.as_deref().is_some_and(is_credential_name);
                if !named && reaching.is_none() {
                    continue;
                }
                let f = ctx.finding(
                    RuleId::R1,
                    Severity::Misuse,
                    &unit.file,
                    unit.line,
                    format!("hard-coded secret passed to {}", unit.call_name),
                );
                let f = match reaching {
                    Some(chain) => with_evidence(ctx, f, chain, unit),
                    None => f,
                };
                insert_once(&mut by_line, f);
            }
        }
    }
    for b in ctx.taint.values {
        if b.kind == ValueKind::Literal
            && is_credential_name(&b.name)
            && secrets.matches(&b.value, catalog)
        {
            let f = ctx.finding(
                RuleId::R1,
                Severity::Misuse,
                &b.file,
                b.line,
                format!("hard-coded secret assigned to {}", b.name),
            );
            insert_once(&mut by_line, f);
        }
    }
    by_line.into_values().collect()
}

/// R2: IV, nonce or salt parameters that resolve to a literal.
pub fn check_fixed_iv_salt(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for unit in &ctx.graph().nodes {
        let Some(spec) = crypto_spec(ctx, unit) else {
            continue;
        };
        for (role, label) in [(ParamRole::Iv, "IV"), (ParamRole::Salt, "salt")] {
            let Some(arg) = spec.param(unit, role) else {
                continue;
            };
            let origin = ctx.taint.resolve_to_origin(unit, arg);
            if origin.is_literal() {
                let f = ctx.finding(
                    RuleId::R2,
                    Severity::Misuse,
                    &unit.file,
                    unit.line,
                    format!("constant {label} passed to {}", unit.call_name),
                );
                out.push(with_origin(f, arg, origin));
            }
        }
    }
    out
}

/// Weak algorithm instantiated by a hash unit, if any.
fn weak_hash(ctx: &RuleContext<'_>, unit: &IrUnit, spec: &CryptoApiSpec) -> Option<String> {
    if spec.weak_algorithms.is_empty() {
        return None;
    }
    match spec.algorithm(unit) {
        None if spec.algorithm_param.is_none() => Some(spec.weak_algorithms[0].clone()),
        None => None,
        Some(arg) => {
            let origin = ctx.taint.resolve_to_origin(unit, arg);
            let text = normalize_hash(origin.literal_text.as_deref()?);
            spec.weak_algorithms
                .iter()
                .find(|w| normalize_hash(w) == text)
                .cloned()
        }
    }
}

/// R3: weak hash constructors. Misuse when credential data reaches the hash
/// or its output is credential-named or transmitted; informational otherwise.
pub fn check_weak_hash(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let graph = ctx.graph();
    let mut by_site: BTreeMap<(&str, usize, usize), Vec<&IrUnit>> = BTreeMap::new();
    for u in &graph.nodes {
        by_site.entry((&u.file, u.line, u.column)).or_default().push(u);
    }
    let mut out = Vec::new();
    for unit in &graph.nodes {
        let Some(spec) = ctx.spec(unit).filter(|s| s.role == Role::Hash) else {
            continue;
        };
        let Some(algorithm) = weak_hash(ctx, unit, spec) else {
            continue;
        };
        let prefix = format!("{}().", unit.call_name);
        let mut members: Vec<&IrUnit> = vec![unit];
        members.extend(
            by_site[&(unit.file.as_str(), unit.line, unit.column)]
                .iter()
                .filter(|m| m.call_name.starts_with(&prefix)),
        );
        let credential_chain = members.iter().find_map(|m| {
            ctx.chains_into(&m.unit_id)
                .iter()
                .find(|c| c.sensitivity == Sensitivity::Credential)
                .map(|c| (*c, *m))
        });
        let credential_input = members.iter().any(|m| consumes_credential(m));
        let credential_output = members
            .iter()
            .any(|m| m.produced_as.as_deref().is_some_and(is_credential_name));
        let transmitted = flows_to_transmit(ctx, &members);
        let misuse = credential_chain.is_some() || credential_input || credential_output || transmitted;
        let (severity, message) = if misuse {
            (
                Severity::Misuse,
                format!("weak hash {algorithm} used on credential or authentication data"),
            )
        } else {
            (
                Severity::Informational,
                format!("weak hash {algorithm} used outside a security context"),
            )
        };
        let f = ctx.finding(RuleId::R3, severity, &unit.file, unit.line, message);
        out.push(match credential_chain {
            Some((chain, trigger)) => with_evidence(ctx, f, chain, trigger),
            None => f,
        });
    }
    out
}

/// True when a must-edge path from any of `start` reaches a transmit call.
fn flows_to_transmit(ctx: &RuleContext<'_>, start: &[&IrUnit]) -> bool {
    let graph = ctx.graph();
    let mut seen: BTreeSet<&str> = start.iter().map(|u| u.unit_id.as_str()).collect();
    let mut queue: VecDeque<&str> = seen.iter().copied().collect();
    while let Some(id) = queue.pop_front() {
        for e in graph.outgoing(id).filter(|e| e.kind == EdgeKind::Must) {
            if !seen.insert(&e.to_unit) {
                continue;
            }
            if let Some(next) = graph.node(&e.to_unit) {
                if ctx.catalog().semantic_category(next) == SemanticCategory::Transmit {
                    return true;
                }
            }
            queue.push_back(&e.to_unit);
        }
    }
    false
}

/// R4: low KDF iteration counts, and credential data reaching a cipher key
/// without passing through any KDF.
pub fn check_kdf_config(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let graph = ctx.graph();
    let min = ctx.thresholds.r4_min_iterations;
    let mut out = Vec::new();
    for unit in &graph.nodes {
        let Some(spec) = ctx.spec(unit) else {
            continue;
        };
        match spec.role {
            Role::Kdf => {
                let mut counts: Vec<(&Argument, String)> = Vec::new();
                if let Some(arg) = spec.param(unit, ParamRole::Iterations) {
                    if let Some(text) = ctx.taint.resolve_to_origin(unit, arg).literal_text {
                        counts.push((arg, text));
                    }
                }
                if let Some(arg) = spec.param(unit, ParamRole::Options) {
                    counts.extend(
                        arg.dict_entries()
                            .into_iter()
                            .filter(|(k, _)| {
                                ParamRole::Iterations.keywords().iter().any(|w| k.eq_ignore_ascii_case(w))
                            })
                            .map(|(_, v)| (arg, v)),
                    );
                }
                for (arg, text) in counts {
                    let Ok(n) = text.trim().replace('_', "").parse::<u64>() else {
                        continue;
                    };
                    if n < min {
                        let f = ctx.finding(
                            RuleId::R4,
                            Severity::Misuse,
                            &unit.file,
                            unit.line,
                            format!("{} uses {n} iterations, below {min}", unit.call_name),
                        );
                        out.push(with_origin(f, arg, ctx.taint.resolve_to_origin(unit, arg)));
                        break;
                    }
                }
            }
            Role::SymmetricCipher => {
                let Some(key) = spec.param(unit, ParamRole::Key) else {
                    continue;
                };
                let key_names = key.referenced_names();
                let chain = ctx.chains_into(&unit.unit_id).iter().copied().find(|c| {
                    c.sensitivity == Sensitivity::Credential
                        && match c.hops.last() {
                            Some(h) => key_names.contains(&h.witness.as_str()),
                            None => key_names.iter().any(|n| is_credential_name(n)),
                        }
                        && !c.units().iter().any(|id| {
                            graph.node(id).is_some_and(|u| ctx.catalog().role(u) == Role::Kdf)
                        })
                });
                if let Some(chain) = chain {
                    let f = ctx.finding(
                        RuleId::R4,
                        Severity::Misuse,
                        &unit.file,
                        unit.line,
                        format!("credential used as {} key without key derivation", unit.call_name),
                    );
                    out.push(with_evidence(ctx, f, chain, unit));
                }
            }
            _ => {}
        }
    }
    out
}

/// R5: PRNG seeded with a literal.
pub fn check_static_seed(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for unit in &ctx.graph().nodes {
        let Some(arg) = crypto_spec(ctx, unit).and_then(|s| s.param(unit, ParamRole::Seed)) else {
            continue;
        };
        let origin = ctx.taint.resolve_to_origin(unit, arg);
        if origin.is_literal() {
            let f = ctx.finding(
                RuleId::R5,
                Severity::Misuse,
                &unit.file,
                unit.line,
                format!("{} seeded with a constant", unit.call_name),
            );
            out.push(with_origin(f, arg, origin));
        }
    }
    out
}

/// R6: cipher calls whose mode resolves to ECB.
pub fn check_ecb_mode(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for unit in &ctx.graph().nodes {
        let Some(spec) = ctx.spec(unit).filter(|s| s.role == Role::SymmetricCipher) else {
            continue;
        };
        if mode_texts(ctx, unit, spec)
            .iter()
            .any(|t| t.to_lowercase().contains("ecb"))
        {
            out.push(ctx.finding(
                RuleId::R6,
                Severity::Misuse,
                &unit.file,
                unit.line,
                format!("{} uses ECB mode", unit.call_name),
            ));
        }
    }
    out
}

fn is_deprecated_use(ctx: &RuleContext<'_>, unit: &IrUnit, spec: &CryptoApiSpec) -> bool {
    spec.deprecated
        || spec
            .algorithm(unit)
            .is_some_and(|a| deprecated_algorithm(&resolved_text(ctx, unit, a)).is_some())
}

/// R7: unauthenticated symmetric encryption. Ciphers are grouped by lexical
/// scope; a MAC or auth-tag call in that scope, or any edge between the group
/// and a MAC unit, suppresses the group. ECB and deprecated ciphers are left
/// to R6 and R8.
pub fn check_missing_integrity(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let graph = ctx.graph();
    let catalog = ctx.catalog();
    let macs: Vec<&IrUnit> = graph
        .nodes
        .iter()
        .filter(|u| catalog.role(u) == Role::Mac)
        .collect();
    let mac_ids: BTreeSet<&str> = macs.iter().map(|u| u.unit_id.as_str()).collect();
    let mut groups: BTreeMap<(&str, &str), Vec<(&IrUnit, &CryptoApiSpec)>> = BTreeMap::new();
    for unit in &graph.nodes {
        if let Some(spec) = ctx.spec(unit).filter(|s| s.role == Role::SymmetricCipher) {
            groups.entry((&unit.file, &unit.scope)).or_default().push((unit, spec));
        }
    }
    let mut out = Vec::new();
    for ((file, scope), mut members) in groups {
        members.sort_by_key(|(u, _)| u.source_key());
        if macs.iter().any(|m| m.file == file && m.scope == scope) {
            continue;
        }
        let linked = members.iter().any(|(u, _)| {
            graph
                .outgoing(&u.unit_id)
                .map(|e| e.to_unit.as_str())
                .chain(graph.incoming(&u.unit_id).map(|e| e.from_unit.as_str()))
                .any(|other| mac_ids.contains(other))
        });
        if linked {
            continue;
        }
        let mut known: Option<(&IrUnit, &str)> = None;
        let mut implicit: Option<&IrUnit> = None;
        let mut authenticated = false;
        let mut excluded = false;
        for (unit, spec) in &members {
            let lower_name = unit.call_name.to_lowercase();
            let token = mode_token(&mode_texts(ctx, unit, spec));
            if AUTHENTICATED_MODES
                .iter()
                .any(|m| lower_name.contains(m) || token == Some(*m))
            {
                authenticated = true;
                break;
            }
            if token == Some("ecb") || is_deprecated_use(ctx, unit, spec) {
                excluded = true;
                continue;
            }
            match token {
                Some(t) => {
                    known.get_or_insert((unit, t));
                }
                None => {
                    let cryptojs_encrypt =
                        unit.call_name.starts_with("CryptoJS.") && unit.final_segment() == "encrypt";
                    if cryptojs_encrypt || unit.final_segment() == "final" {
                        implicit.get_or_insert(unit);
                    }
                }
            }
        }
        if authenticated {
            continue;
        }
        let trigger = match (known, implicit) {
            (Some((unit, mode)), _) => Some((unit, mode.to_uppercase())),
            (None, Some(unit)) if !excluded => Some((unit, "default".to_string())),
            _ => None,
        };
        let Some((unit, mode)) = trigger else {
            continue;
        };
        let mut f = ctx.finding(
            RuleId::R7,
            Severity::Misuse,
            &unit.file,
            unit.line,
            format!("{} encrypts in {mode} mode without authentication", unit.call_name),
        );
        if !macs.is_empty() {
            f.confidence = Confidence::Potential;
        }
        out.push(f);
    }
    out
}

/// R8: deprecated APIs and algorithms.
pub fn check_deprecated_primitive(ctx: &RuleContext<'_>) -> Vec<Finding> {
    let mut out = Vec::new();
    for unit in &ctx.graph().nodes {
        let Some(spec) = crypto_spec(ctx, unit) else {
            continue;
        };
        let algorithm = spec
            .algorithm(unit)
            .and_then(|a| deprecated_algorithm(&resolved_text(ctx, unit, a)));
        let message = match (spec.deprecated, algorithm) {
            (_, Some(alg)) => format!("deprecated algorithm {alg} in {}", unit.call_name),
            (true, None) => format!("deprecated primitive {}", unit.call_name),
            (false, None) => continue,
        };
        out.push(ctx.finding(RuleId::R8, Severity::Misuse, &unit.file, unit.line, message));
    }
    out
}
