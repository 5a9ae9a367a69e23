//! Runs the analyses of a scenario and assembles the reports.

use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;
use std::sync::Arc;

use ebm_core::analysis::{
    check_nonexpansive, check_subadditive, construct_erasing_couple, construct_strong_erasing_couple,
    evaluate_split, find_consistency_violation, strong_couple_report, verify_erasing_couple, AnalysisError,
    CoupleStrength, Construction, ErasingCouple, Piece, PreferenceSet,
};
use ebm_core::engine::{self, MatchingTrace};
use ebm_core::loynes::{
    backward_coupling, biinfinite_matching, check_recursion, check_renovation, construction_points,
    forward_coupling_check, overloaded_per_period, ForwardCoupling, PeriodicSample,
};
use ebm_core::model::check_bi_separable;
use ebm_core::stability::{
    check_biseparable_cond, check_ncond, check_scond, check_scondmonotone, estimate_tau1, h2_advisor,
    ArrivalDistribution, ConditionReport, StabilityError,
};
use ebm_core::state::l1_distance;
use ebm_core::{ArrivalQuadruple, BufferDetail, Customer, Policy, PreferenceMode, PreferenceProfile, Server, Word};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use thiserror::Error;

use crate::scenario::{render_scenario, Analysis, PreferenceChoice, Scenario};

pub const EXIT_CLEAN: i32 = 0;
pub const EXIT_VIOLATION: i32 = 10;
pub const EXIT_BUDGET: i32 = 20;
pub const EXIT_ERROR: i32 = 1;

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{analysis}: {message}")]
    Analysis { analysis: Analysis, message: String },
    #[error("writing reports: {0}")]
    Io(#[from] io::Error),
}

fn fail(analysis: Analysis, message: impl ToString) -> RunError {
    RunError::Analysis {
        analysis,
        message: message.to_string(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Outcome {
    Clean,
    /// Budget or search limits were hit before a verdict.
    Budget,
    /// The property under check fails.
    Violation,
}

impl Outcome {
    pub fn name(self) -> &'static str {
        match self {
            Outcome::Clean => "clean",
            Outcome::Budget => "budget-exhausted",
            Outcome::Violation => "counterexample-found",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Outcome::Clean => EXIT_CLEAN,
            Outcome::Budget => EXIT_BUDGET,
            Outcome::Violation => EXIT_VIOLATION,
        }
    }
}

/// A scenario file reproducing a finding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Replay {
    pub file_name: String,
    pub contents: String,
}

#[derive(Clone, Debug)]
pub struct Section {
    pub analysis: Analysis,
    pub outcome: Outcome,
    pub text: String,
    pub data: Value,
    pub replay: Option<Replay>,
}

#[derive(Clone, Debug)]
pub struct Report {
    pub scenario: String,
    pub policy: String,
    pub seed: u64,
    pub sections: Vec<Section>,
}

impl Report {
    /// Violations outrank exhausted budgets.
    pub fn outcome(&self) -> Outcome {
        self.sections.iter().map(|s| s.outcome).max().unwrap_or(Outcome::Clean)
    }

    pub fn exit_code(&self) -> i32 {
        self.outcome().exit_code()
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.scenario);
        let _ = writeln!(out, "policy: {}", self.policy);
        let _ = writeln!(out, "seed: {}", self.seed);
        for s in &self.sections {
            let _ = writeln!(out, "\n== {} ==", s.analysis);
            out += &s.text;
            if !s.text.is_empty() && !s.text.ends_with('\n') {
                out.push('\n');
            }
            if let Some(r) = &s.replay {
                let _ = writeln!(out, "replay: {}", r.file_name);
            }
            let _ = writeln!(out, "outcome: {}", s.outcome.name());
        }
        let _ = writeln!(out, "\nresult: {} (exit {})", self.outcome().name(), self.exit_code());
        out
    }

    pub fn json(&self) -> Value {
        let sections: Vec<Value> = self
            .sections
            .iter()
            .map(|s| {
                json!({
                    "analysis": s.analysis.name(),
                    "outcome": s.outcome.name(),
                    "data": s.data,
                    "replay": s.replay.as_ref().map(|r| r.file_name.clone()),
                })
            })
            .collect();
        json!({
            "scenario": self.scenario,
            "policy": self.policy,
            "seed": self.seed,
            "sections": sections,
            "outcome": self.outcome().name(),
            "exit_code": self.exit_code(),
        })
    }

    /// Writes `report.txt`, `report.json` and every replay scenario into `dir`.
    pub fn write_to(&self, dir: &Path) -> io::Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.txt"), self.text())?;
        let mut json = serde_json::to_string_pretty(&self.json()).map_err(io::Error::other)?;
        json.push('\n');
        fs::write(dir.join("report.json"), json)?;
        for r in self.sections.iter().filter_map(|s| s.replay.as_ref()) {
            fs::write(dir.join(&r.file_name), &r.contents)?;
        }
        Ok(())
    }
}

fn preference_set(s: &Scenario) -> PreferenceSet {
    match s.preferences {
        PreferenceChoice::Fixed => PreferenceSet::Fixed(s.profile.clone()),
        PreferenceChoice::Uniform => PreferenceSet::All,
    }
}

fn policy_label(s: &Scenario) -> String {
    let prefs = match s.preferences {
        PreferenceChoice::Fixed => "fixed",
        PreferenceChoice::Uniform => "uniform",
    };
    format!("{} ({prefs} preferences)", s.policy)
}

/// Runs the requested analyses in order.
pub fn run_scenario(s: &Scenario) -> Result<Report, RunError> {
    let mut sections = Vec::with_capacity(s.analyses.len());
    for &a in &s.analyses {
        sections.push(run_analysis(s, a)?);
    }
    Ok(Report {
        scenario: s.name.clone(),
        policy: policy_label(s),
        seed: s.seed,
        sections,
    })
}

fn run_analysis(s: &Scenario, a: Analysis) -> Result<Section, RunError> {
    match a {
        Analysis::Simulate => simulate(s),
        Analysis::EvaluateSplit => evaluate_split_section(s),
        Analysis::VerifySubadd => verify_subadd(s),
        Analysis::VerifyNonexp => verify_nonexp(s),
        Analysis::EvaluateNonexp => evaluate_nonexp(s),
        Analysis::CheckConsistency => check_consistency(s),
        Analysis::FindErasing => find_erasing(s),
        Analysis::VerifyErasing => verify_erasing(s),
        Analysis::CheckStability => check_stability(s),
        Analysis::EstimateTau1 => tau1(s),
        Analysis::Loynes => loynes(s),
    }
}

fn section(analysis: Analysis, outcome: Outcome, text: String, data: Value) -> Section {
    Section {
        analysis,
        outcome,
        text,
        data,
        replay: None,
    }
}

fn replay_of(s: &Scenario, analysis: Analysis, prefix: &str, mut replay: Scenario) -> Replay {
    replay.name = format!("{} {prefix} ({analysis})", s.name);
    Replay {
        file_name: format!("{prefix}-{analysis}.scn"),
        contents: render_scenario(&replay),
    }
}

/// The budget-style analysis errors become an outcome; the rest are fatal.
fn budget_or_fail(a: Analysis, e: AnalysisError) -> Result<Section, RunError> {
    match e {
        AnalysisError::BudgetExceeded { .. } | AnalysisError::SearchExhausted { .. } | AnalysisError::TooLarge { .. } => {
            Ok(section(a, Outcome::Budget, format!("{e}\n"), json!({ "budget": e.to_string() })))
        }
        other => Err(fail(a, other)),
    }
}

fn require<T: Clone>(a: Analysis, value: &Option<T>, key: &str) -> Result<T, RunError> {
    value
        .clone()
        .ok_or_else(|| fail(a, format!("[input] must give `{key}`")))
}

/// Per-step profiles for `n` steps: pinned ones, or uniform draws from the seed.
fn step_profiles(s: &Scenario, n: usize) -> Vec<Arc<PreferenceProfile>> {
    match s.preferences {
        PreferenceChoice::Fixed => (0..n).map(|k| s.profile_at(k)).collect(),
        PreferenceChoice::Uniform => {
            let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
            (0..n)
                .map(|_| Arc::new(PreferenceProfile::random(&s.structure, &mut rng)))
                .collect()
        }
    }
}

fn trace_data(trace: &MatchingTrace) -> Value {
    let matches: Vec<Value> = trace
        .matches
        .iter()
        .map(|m| {
            json!({
                "step": m.step,
                "customer": m.customer.id(),
                "customer_index": m.customer_index,
                "server": m.server.id(),
                "server_index": m.server_index,
            })
        })
        .collect();
    let buffers: Vec<String> = trace.steps.iter().map(|st| st.buffer.to_string()).collect();
    json!({
        "initial": trace.initial.to_string(),
        "matches": matches,
        "buffers": buffers,
        "final": trace.final_buffer().to_string(),
        "perfect": trace.is_perfect(),
        "buffer_first_overrides": trace.buffer_first_overrides(),
    })
}

fn simulate(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::Simulate;
    let customers = require(a, &s.input.customers, "customers")?;
    let servers = require(a, &s.input.servers, "servers")?;
    let initial = s.input.initial.clone().unwrap_or_default();
    let steps = customers.len().max(servers.len());
    let profiles = step_profiles(s, steps);
    let trace = if customers.len() == servers.len() {
        let input: Vec<ArrivalQuadruple> = customers
            .letters()
            .iter()
            .zip(servers.letters())
            .zip(&profiles)
            .map(|((&c, &z), p)| ArrivalQuadruple::new(c, z, p.clone()))
            .collect();
        engine::run(&s.structure, s.policy, &initial, &input)
    } else {
        engine::match_words_from(&s.structure, s.policy, &initial, &customers, &servers, &profiles)
    }
    .map_err(|e| fail(a, e))?;
    let final_buffer = trace.final_buffer();
    let mut text = trace.export_text();
    let (nc, ns) = final_buffer.sizes();
    let _ = writeln!(text, "residual: {final_buffer} (|C| = {nc}, |S| = {ns})");
    Ok(section(a, Outcome::Clean, text, trace_data(&trace)))
}

fn piece(s: &Scenario, a: Analysis, from: usize, to: usize) -> Result<Piece, RunError> {
    let customers = require(a, &s.input.customers, "customers")?;
    let servers = require(a, &s.input.servers, "servers")?;
    if customers.len() != servers.len() {
        return Err(fail(a, "`customers` and `servers` must have equal lengths"));
    }
    let profiles = step_profiles(s, customers.len());
    Ok(Piece::new(
        Word::new(customers.letters()[from..to].to_vec()),
        Word::new(servers.letters()[from..to].to_vec()),
        profiles[from..to].iter().map(|p| (**p).clone()).collect(),
    ))
}

fn evaluate_split_section(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::EvaluateSplit;
    let len = require(a, &s.input.customers, "customers")?.len();
    let split = require(a, &s.input.split, "split")?;
    if split > len {
        return Err(fail(a, format!("split {split} exceeds the input length {len}")));
    }
    let first = piece(s, a, 0, split)?;
    let second = piece(s, a, split, len)?;
    let e = evaluate_split(&s.structure, s.policy, &first, &second).map_err(|e| fail(a, e))?;
    let violated = e.violated_side();
    let text = format!(
        "first {first}: |C| = {}, |S| = {}\nsecond {second}: |C| = {}, |S| = {}\ncombined: |C| = {}, |S| = {}\nsub-additive: {}\n",
        e.first.0,
        e.first.1,
        e.second.0,
        e.second.1,
        e.combined.0,
        e.combined.1,
        if violated.is_some() { "no" } else { "yes" }
    );
    let data = json!({
        "first": [e.first.0, e.first.1],
        "second": [e.second.0, e.second.1],
        "combined": [e.combined.0, e.combined.1],
        "violated_side": violated.map(|v| format!("{v:?}")),
    });
    let outcome = if violated.is_some() { Outcome::Violation } else { Outcome::Clean };
    Ok(section(a, outcome, text, data))
}

/// Pins the pieces' profiles as per-step overrides of a fixed scenario.
fn pinned_input(s: &Scenario, piece: &Piece) -> Scenario {
    let mut r = s.clone();
    r.preferences = PreferenceChoice::Fixed;
    r.input.customers = Some(piece.customers.clone());
    r.input.servers = Some(piece.servers.clone());
    r.step_profiles = piece
        .profiles
        .iter()
        .enumerate()
        .filter(|(_, p)| **p != *r.profile)
        .map(|(k, p)| (k + 1, p.clone()))
        .collect();
    r
}

fn verify_subadd(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::VerifySubadd;
    let prefs = preference_set(s);
    let max_len = s.budgets.max_len;
    let found = match check_subadditive(&s.structure, s.policy, max_len, &prefs, s.budgets.steps) {
        Ok(v) => v,
        Err(e) => return budget_or_fail(a, e),
    };
    let Some(v) = found else {
        let text = format!("no violation with pieces of length at most {max_len} (preferences: {prefs})\n");
        return Ok(section(a, Outcome::Clean, text, json!({ "max_len": max_len, "violation": null })));
    };
    let e = &v.evaluation;
    let text = format!(
        "violation: {v}\nfirst {}: |C| = {}, |S| = {}\nsecond {}: |C| = {}, |S| = {}\ncombined: |C| = {}, |S| = {}\n",
        v.first, e.first.0, e.first.1, v.second, e.second.0, e.second.1, e.combined.0, e.combined.1
    );
    let data = json!({
        "max_len": max_len,
        "violation": {
            "first": v.first.to_string(),
            "second": v.second.to_string(),
            "side": format!("{:?}", v.side),
            "first_sizes": [e.first.0, e.first.1],
            "second_sizes": [e.second.0, e.second.1],
            "combined_sizes": [e.combined.0, e.combined.1],
        },
    });
    let mut r = pinned_input(s, &v.first.concat(&v.second));
    r.input.split = Some(v.first.len());
    r.input.initial = None;
    r.analyses = vec![Analysis::EvaluateSplit];
    let mut out = section(a, Outcome::Violation, text, data);
    out.replay = Some(replay_of(s, a, "counterexample", r));
    Ok(out)
}

fn verify_nonexp(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::VerifyNonexp;
    let prefs = preference_set(s);
    let max_count = s.budgets.max_count;
    let found = match check_nonexpansive(&s.structure, s.policy, max_count, &prefs, s.budgets.steps) {
        Ok(v) => v,
        Err(AnalysisError::NotClassAdmissible(k)) => {
            return Err(fail(a, format!("{k} is not class-admissible")));
        }
        Err(e) => return budget_or_fail(a, e),
    };
    let Some(v) = found else {
        let text = format!("no violation with queue counts at most {max_count} (preferences: {prefs})\n");
        return Ok(section(a, Outcome::Clean, text, json!({ "max_count": max_count, "violation": null })));
    };
    let text = format!(
        "violation: details {} and {}, arrival ({}, {}): distance {} -> {}\n",
        v.first, v.second, v.customer, v.server, v.distance_before, v.distance_after
    );
    let data = json!({
        "max_count": max_count,
        "violation": {
            "first": v.first.to_string(),
            "second": v.second.to_string(),
            "customer": v.customer.id(),
            "server": v.server.id(),
            "profile": v.profile.to_string(),
            "distance_before": v.distance_before,
            "distance_after": v.distance_after,
        },
    });
    let p = Piece::with_profile(Word::new(vec![v.customer]), Word::new(vec![v.server]), &v.profile);
    let mut r = pinned_input(s, &p);
    r.input.detail_a = Some(v.first.clone());
    r.input.detail_b = Some(v.second.clone());
    r.analyses = vec![Analysis::EvaluateNonexp];
    let mut out = section(a, Outcome::Violation, text, data);
    out.replay = Some(replay_of(s, a, "counterexample", r));
    Ok(out)
}

/// Feeds the input to the canonical buffers of two class details and compares
/// their distance before and after.
fn evaluate_nonexp(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::EvaluateNonexp;
    if !s.policy.is_class_admissible() {
        return Err(fail(a, format!("{} is not class-admissible", s.policy)));
    }
    let da = require(a, &s.input.detail_a, "detail_a")?;
    let db = require(a, &s.input.detail_b, "detail_b")?;
    let len = require(a, &s.input.customers, "customers")?.len();
    let input = piece(s, a, 0, len)?.inputs();
    let after = |d: &ebm_core::ClassDetail| -> Result<ebm_core::ClassDetail, RunError> {
        let trace = engine::run(&s.structure, s.policy, &d.canonical_buffer(), &input).map_err(|e| fail(a, e))?;
        Ok(trace.final_buffer().class_detail(&s.structure))
    };
    let (xa, xb) = (after(&da)?, after(&db)?);
    let before = l1_distance(&da, &db).map_err(|e| fail(a, e))?;
    let dist = l1_distance(&xa, &xb).map_err(|e| fail(a, e))?;
    let text = format!("{da} -> {xa}\n{db} -> {xb}\ndistance {before} -> {dist}\n");
    let outcome = if dist > before { Outcome::Violation } else { Outcome::Clean };
    let data = json!({
        "before": [da.to_string(), db.to_string()],
        "after": [xa.to_string(), xb.to_string()],
        "distance_before": before,
        "distance_after": dist,
    });
    Ok(section(a, outcome, text, data))
}

fn check_consistency(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::CheckConsistency;
    let rule = s
        .policy
        .class_rule()
        .ok_or_else(|| fail(a, format!("{} is not class-admissible", s.policy)))?;
    let max_count = s.budgets.max_count;
    match find_consistency_violation(&s.structure, rule, max_count, &preference_set(s)) {
        None => Ok(section(
            a,
            Outcome::Clean,
            format!("consistent on all queue vectors with entries at most {max_count}\n"),
            json!({ "max_count": max_count, "violation": null }),
        )),
        Some(v) => {
            let text = format!(
                "entering {}: queues {:?} choose {}, queues {:?} choose {} (profile {})\n",
                v.entering, v.first, v.chosen_first, v.second, v.chosen_second, v.profile
            );
            let data = json!({
                "max_count": max_count,
                "violation": {
                    "entering": v.entering.to_string(),
                    "first": v.first,
                    "second": v.second,
                    "chosen_first": v.chosen_first.to_string(),
                    "chosen_second": v.chosen_second.to_string(),
                    "profile": v.profile.to_string(),
                },
            });
            // The search is deterministic, so the scenario itself reproduces it.
            let mut r = s.clone();
            r.analyses = vec![a];
            let mut out = section(a, Outcome::Violation, text, data);
            out.replay = Some(replay_of(s, a, "counterexample", r));
            Ok(out)
        }
    }
}

fn couple_data(c: &ErasingCouple) -> Value {
    json!({
        "customers": c.customers.to_string(),
        "servers": c.servers.to_string(),
        "construction": format!("{:?}", c.construction),
        "verified": c.verified,
    })
}

fn find_erasing(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::FindErasing;
    let prefs = preference_set(s);
    let limits = s.budgets.limits();
    let found = match &s.input.target {
        Some(t) => construct_erasing_couple(&s.structure, s.policy, t, &prefs, &limits).map(Some),
        None => construct_strong_erasing_couple(&s.structure, &[s.policy], &prefs, &limits),
    };
    let couple = match found {
        Ok(Some(c)) => c,
        Ok(None) => {
            return Ok(section(
                a,
                Outcome::Budget,
                "no strong erasing couple found by the constructions\n".into(),
                json!({ "couple": null }),
            ))
        }
        Err(e) => return budget_or_fail(a, e),
    };
    let kind = match &couple.strength {
        CoupleStrength::Strong => "strong erasing couple".to_string(),
        CoupleStrength::Erasing(t) => format!("erasing couple of {t}"),
    };
    let text = format!("{kind}: {couple} via {:?}\n", couple.construction);
    let mut r = s.clone();
    r.input.couple = Some((couple.customers.clone(), couple.servers.clone()));
    r.analyses = vec![Analysis::VerifyErasing];
    let mut out = section(a, Outcome::Clean, text, couple_data(&couple));
    out.replay = Some(replay_of(s, a, "witness", r));
    Ok(out)
}

fn verify_erasing(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::VerifyErasing;
    let (c, z) = require(a, &s.input.couple, "couple")?;
    let prefs = preference_set(s);
    if let Some(t) = &s.input.target {
        let ok = verify_erasing_couple(&s.structure, s.policy, t, &c, &z, &prefs).map_err(|e| fail(a, e))?;
        let text = format!("({c}, {z}) erases {t}: {}\n", if ok { "yes" } else { "no" });
        let outcome = if ok { Outcome::Clean } else { Outcome::Violation };
        return Ok(section(a, outcome, text, json!({ "target": t.to_string(), "erasing": ok })));
    }
    let report = strong_couple_report(&s.structure, s.policy, &c, &z, &prefs).map_err(|e| fail(a, e))?;
    let mut text = format!("({c}, {z}) is a strong erasing couple: {}\n", if report.holds() { "yes" } else { "no" });
    if !report.failing_suffixes.is_empty() {
        let _ = writeln!(text, "suffix lengths not perfectly matched: {:?}", report.failing_suffixes);
    }
    let prefixes: Vec<String> = report
        .failing_prefixes
        .iter()
        .map(|(i, j)| format!("({i}, {j})"))
        .collect();
    if !prefixes.is_empty() {
        let _ = writeln!(text, "incompatible pairs not erased: {}", prefixes.join(" "));
    }
    let outcome = if report.holds() { Outcome::Clean } else { Outcome::Violation };
    let data = json!({
        "strong": report.holds(),
        "failing_suffixes": report.failing_suffixes,
        "failing_prefixes": prefixes,
    });
    Ok(section(a, outcome, text, data))
}

/// The declared `[mu]`, or else the empirical law of the periodic input.
fn distribution(s: &Scenario, a: Analysis) -> Result<ArrivalDistribution, RunError> {
    if let Some(mu) = &s.mu {
        return Ok(mu.clone());
    }
    let pairs = s
        .input
        .periodic
        .as_ref()
        .ok_or_else(|| fail(a, "needs [mu] or a periodic input"))?;
    let pairs: Vec<(Customer, Server)> = pairs
        .iter()
        .map(|&(c, z)| (Customer::from_id(c), Server::from_id(z)))
        .collect();
    ArrivalDistribution::empirical(&s.structure, &pairs).map_err(|e| fail(a, e))
}

fn condition_cell(r: &ConditionReport) -> (String, String) {
    let verdict = if r.holds { "holds" } else { "fails" };
    let witness = r.witness().map(ToString::to_string).unwrap_or_else(|| "-".into());
    (verdict.into(), witness)
}

fn condition_json(r: &ConditionReport) -> Value {
    json!({
        "holds": r.holds,
        "violations": r.violation_count,
        "witnesses": r.witnesses.iter().map(ToString::to_string).collect::<Vec<_>>(),
    })
}

fn check_stability(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::CheckStability;
    let mu = distribution(s, a)?;
    let too_large = |e: StabilityError| -> Result<Section, RunError> {
        match e {
            StabilityError::TooLarge { .. } => Ok(section(a, Outcome::Budget, format!("{e}\n"), json!({ "budget": e.to_string() }))),
            other => Err(fail(a, other)),
        }
    };
    let ncond = match check_ncond(&s.structure, &mu) {
        Ok(r) => r,
        Err(e) => return too_large(e),
    };
    let scond = match check_scond(&s.structure, &mu) {
        Ok(r) => r,
        Err(e) => return too_large(e),
    };
    let partition = check_bi_separable(&s.structure);
    let bisep = partition.as_ref().map(|p| check_biseparable_cond(p, &mu));
    let monotone = partition.as_ref().map(|p| check_scondmonotone(&s.structure, p, &mu));
    let h2 = h2_advisor(&s.structure, s.policy, &mu);

    let mut rows: Vec<(String, String, String)> = Vec::new();
    let (v, w) = condition_cell(&ncond);
    rows.push(("Ncond".into(), v, w));
    let (v, w) = condition_cell(&scond);
    rows.push(("Scond".into(), v, w));
    match &bisep {
        Some(r) => {
            let (v, w) = condition_cell(r);
            rows.push(("bi-separable-cond".into(), v, w));
        }
        None => rows.push(("bi-separable-cond".into(), "n/a".into(), "not bi-separable".into())),
    }
    if let Some(r) = &monotone {
        let (v, w) = condition_cell(r);
        rows.push(("scondmonotone".into(), v, w));
    }
    let h2_cell = match h2.certificate() {
        Some(n) => ("certified".to_string(), format!("case {n}")),
        None => ("inconclusive".to_string(), "-".to_string()),
    };
    rows.push(("H2-certificate".into(), h2_cell.0, h2_cell.1));

    let mut text = format!("mu: {mu}\n");
    let _ = writeln!(text, "{:<18} {:<13} witness", "condition", "verdict");
    for (name, verdict, witness) in &rows {
        let _ = writeln!(text, "{name:<18} {verdict:<13} {witness}");
    }
    let data = json!({
        "mu": mu.to_string(),
        "ncond": condition_json(&ncond),
        "scond": condition_json(&scond),
        "biseparable_cond": bisep.as_ref().map(condition_json),
        "scondmonotone": monotone.as_ref().map(condition_json),
        "h2": {
            "certificate": h2.certificate(),
            "strongly_connected": h2.strongly_connected,
            "bi_separable": h2.bi_separable,
            "cases": h2.cases.iter().map(|c| json!({
                "case": c.number,
                "description": c.description,
                "holds": c.holds,
            })).collect::<Vec<_>>(),
        },
    });
    let outcome = if ncond.holds { Outcome::Clean } else { Outcome::Violation };
    Ok(section(a, outcome, text, data))
}

fn tau1(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::EstimateTau1;
    let mu = distribution(s, a)?;
    let policy = Policy::new(
        s.policy,
        match s.preferences {
            PreferenceChoice::Fixed => PreferenceMode::Deterministic(s.profile.clone()),
            PreferenceChoice::Uniform => PreferenceMode::Uniform,
        },
    );
    let initial = s.input.initial.clone().unwrap_or_default();
    let b = &s.budgets;
    let est = estimate_tau1(&s.structure, &policy, &mu, &initial, b.runs, b.horizon, s.seed).map_err(|e| fail(a, e))?;
    let opt = |v: Option<u64>| v.map_or("censored".to_string(), |x| x.to_string());
    let mut text = format!(
        "runs: {}, horizon: {}\ncompleted: {}, censored: {} ({:.4})\n",
        est.runs, est.horizon, est.completed, est.censored, est.censored_fraction
    );
    match est.mean_completed {
        Some(m) => {
            let _ = writeln!(text, "mean over completed runs: {m:.4}");
        }
        None => text += "mean over completed runs: -\n",
    }
    let _ = writeln!(text, "mean lower bound: {:.4}", est.mean_lower_bound);
    let _ = writeln!(
        text,
        "median: {}, p90: {}, p99: {}",
        opt(est.median),
        opt(est.p90),
        opt(est.p99)
    );
    let data = json!({
        "runs": est.runs,
        "horizon": est.horizon,
        "completed": est.completed,
        "censored": est.censored,
        "censored_fraction": est.censored_fraction,
        "mean_completed": est.mean_completed,
        "mean_lower_bound": est.mean_lower_bound,
        "median": est.median,
        "p90": est.p90,
        "p99": est.p99,
        "max_completed": est.max_completed,
    });
    Ok(section(a, Outcome::Clean, text, data))
}

fn loynes(s: &Scenario) -> Result<Section, RunError> {
    let a = Analysis::Loynes;
    let pairs = require(a, &s.input.periodic, "periodic")?;
    let events: Vec<ArrivalQuadruple> = pairs
        .iter()
        .enumerate()
        .map(|(k, &(c, z))| ArrivalQuadruple::new(Customer::from_id(c), Server::from_id(z), s.profile_at(k)))
        .collect();
    let sample = PeriodicSample::new(&s.structure, events, s.input.origin).map_err(|e| fail(a, e))?;
    let p = sample.period();
    let max_back = s.budgets.max_backsteps;
    let solution = backward_coupling(&s.structure, s.policy, &sample, max_back).map_err(|e| fail(a, e))?;
    let Some(solution) = solution else {
        let overloaded = overloaded_per_period(&s.structure, &sample);
        let (outcome, why) = if overloaded {
            (Outcome::Violation, "some class set receives more arrivals per period than its partners")
        } else {
            (Outcome::Budget, "no coupling within the backward budget")
        };
        let text = format!("no stationary solution: {why} (max_backsteps = {max_back})\n");
        return Ok(section(a, outcome, text, json!({ "solution": null, "overloaded": overloaded })));
    };
    check_recursion(&s.structure, s.policy, &sample, &solution).map_err(|e| fail(a, e))?;
    let points = construction_points(&solution).map_err(|e| fail(a, e))?;
    let matching = biinfinite_matching(&s.structure, s.policy, &sample, &solution).map_err(|e| fail(a, e))?;
    let in_e = matching.matches.iter().all(|m| s.structure.is_matchable(m.customer, m.server));

    let mut text = format!("period: {p}, origin: {}\n", sample.origin());
    text += "shift  buffer\n";
    for (k, v) in solution.values.iter().enumerate() {
        let _ = writeln!(text, "{k:>5}  {v}");
    }
    let _ = writeln!(text, "construction points: {points:?}");
    text += "periodic matching:\n";
    for line in matching.lines() {
        let _ = writeln!(text, "  {line}");
    }
    let _ = writeln!(text, "coupling depth: {} periods", solution.coupling_depth);
    let _ = writeln!(text, "recursion verified: yes");
    let _ = writeln!(text, "perfect matching: {}", if matching.is_partition() { "yes" } else { "no" });
    let _ = writeln!(text, "all edges in E: {}", if in_e { "yes" } else { "no" });

    let initial = s.input.initial.clone().unwrap_or_else(BufferDetail::empty);
    let forward = forward_coupling_check(&s.structure, s.policy, &sample, &solution, &initial, s.budgets.max_steps)
        .map_err(|e| fail(a, e))?;
    let forward_text = match forward {
        ForwardCoupling::Coupled(t) => format!("couples at step {t}"),
        ForwardCoupling::Censored => format!("no coupling within {} steps", s.budgets.max_steps),
    };
    let _ = writeln!(text, "forward run from {initial}: {forward_text}");

    let renovation = s.input.couple.as_ref().map(|(c, z)| {
        let couple = ErasingCouple {
            customers: c.clone(),
            servers: z.clone(),
            strength: CoupleStrength::Strong,
            construction: Construction::Supplied,
            verified: false,
        };
        check_renovation(&s.structure, s.policy, &sample, &[couple], s.budgets.window)
    });
    if let Some(r) = renovation {
        let _ = writeln!(
            text,
            "renovation within {} steps: {}",
            s.budgets.window,
            if r { "yes" } else { "no" }
        );
    }
    let data = json!({
        "period": p,
        "origin": sample.origin(),
        "values": solution.values.iter().map(ToString::to_string).collect::<Vec<_>>(),
        "construction_points": points,
        "matching": matching.lines(),
        "coupling_depth": solution.coupling_depth,
        "perfect": matching.is_partition(),
        "edges_in_e": in_e,
        "forward_coupling": match forward {
            ForwardCoupling::Coupled(t) => json!(t),
            ForwardCoupling::Censored => Value::Null,
        },
        "renovation": renovation,
    });
    let outcome = if matching.is_partition() && in_e { Outcome::Clean } else { Outcome::Violation };
    Ok(section(a, outcome, text, data))
}
