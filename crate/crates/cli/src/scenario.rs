//! The scenario file format.
//!
//! ```text
//! # comment
//! [classes]
//! customers = 3
//! servers = 3
//! [E]
//! 1 s1, 1 s2, 2 s2, 2 s3, 3 s3
//! [F]
//! all
//! [policy]
//! kind = ms
//! preferences = fixed
//! customer 1 = s2 s1
//! [input]
//! customers = 333312
//! servers = s1s1s1s2s3s1
//! [analyses]
//! simulate
//! ```
//!
//! A general matching model replaces `[classes]`, `[E]` and `[F]` by a
//! `[gm]` section with `vertices = n` and `edges = 1 2, 2 3`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ebm_core::analysis::{SearchLimits, DEFAULT_STEP_BUDGET};
use ebm_core::loynes::DEFAULT_MAX_BACKSTEPS;
use ebm_core::stability::{parse_rational, ArrivalDistribution};
use ebm_core::{
    BufferDetail, ClassDetail, Customer, CustomerWord, MatchingStructure, PolicyKind, PreferenceProfile, Server,
    ServerWord,
};
use num_rational::BigRational;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum ScenarioError {
    #[error("line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("invalid scenario: {0}")]
    Validation(String),
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> ScenarioError {
    ScenarioError::Parse {
        line,
        column,
        message: message.into(),
    }
}

/// One requested analysis; the names double as CLI subcommands.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Analysis {
    Simulate,
    EvaluateSplit,
    VerifySubadd,
    VerifyNonexp,
    EvaluateNonexp,
    CheckConsistency,
    FindErasing,
    VerifyErasing,
    CheckStability,
    EstimateTau1,
    Loynes,
}

impl Analysis {
    pub const ALL: [Analysis; 11] = [
        Analysis::Simulate,
        Analysis::EvaluateSplit,
        Analysis::VerifySubadd,
        Analysis::VerifyNonexp,
        Analysis::EvaluateNonexp,
        Analysis::CheckConsistency,
        Analysis::FindErasing,
        Analysis::VerifyErasing,
        Analysis::CheckStability,
        Analysis::EstimateTau1,
        Analysis::Loynes,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Analysis::Simulate => "simulate",
            Analysis::EvaluateSplit => "evaluate-split",
            Analysis::VerifySubadd => "verify-subadd",
            Analysis::VerifyNonexp => "verify-nonexp",
            Analysis::EvaluateNonexp => "evaluate-nonexp",
            Analysis::CheckConsistency => "check-consistency",
            Analysis::FindErasing => "find-erasing",
            Analysis::VerifyErasing => "verify-erasing",
            Analysis::CheckStability => "check-stability",
            Analysis::EstimateTau1 => "estimate-tau1",
            Analysis::Loynes => "loynes",
        }
    }
}

impl fmt::Display for Analysis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Analysis {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Analysis::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| format!("unknown analysis {s:?}"))
    }
}

/// How the structure was declared, kept so that it can be written back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum StructureSpec {
    Explicit {
        customers: usize,
        servers: usize,
        matching: Vec<(usize, usize)>,
        arrival: Vec<(usize, usize)>,
    },
    General { vertices: usize, edges: Vec<(usize, usize)> },
}

/// `fixed` keeps one profile for every arrival; `uniform` draws them
/// uniformly in simulations and quantifies over all of them in checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PreferenceChoice {
    Fixed,
    Uniform,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Input {
    pub customers: Option<CustomerWord>,
    pub servers: Option<ServerWord>,
    /// Length of the first piece for `evaluate-split`.
    pub split: Option<usize>,
    pub initial: Option<BufferDetail>,
    pub target: Option<BufferDetail>,
    pub couple: Option<(CustomerWord, ServerWord)>,
    pub periodic: Option<Vec<(usize, usize)>>,
    pub origin: usize,
    pub detail_a: Option<ClassDetail>,
    pub detail_b: Option<ClassDetail>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Budgets {
    pub max_len: usize,
    pub max_count: u32,
    pub steps: u64,
    pub max_backsteps: usize,
    pub max_steps: usize,
    pub window: usize,
    pub runs: usize,
    pub horizon: u64,
    pub class_cap: usize,
    pub node_budget: u64,
    pub max_depth: usize,
}

impl Default for Budgets {
    fn default() -> Self {
        let limits = SearchLimits::default();
        Budgets {
            max_len: 3,
            max_count: 2,
            steps: DEFAULT_STEP_BUDGET,
            max_backsteps: DEFAULT_MAX_BACKSTEPS,
            max_steps: 10_000,
            window: 64,
            runs: 1_000,
            horizon: 10_000,
            class_cap: limits.class_cap,
            node_budget: limits.node_budget,
            max_depth: limits.max_depth,
        }
    }
}

impl Budgets {
    pub fn limits(&self) -> SearchLimits {
        SearchLimits {
            class_cap: self.class_cap,
            node_budget: self.node_budget,
            max_depth: self.max_depth,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub name: String,
    pub spec: StructureSpec,
    pub structure: MatchingStructure,
    pub policy: PolicyKind,
    pub preferences: PreferenceChoice,
    pub profile: Arc<PreferenceProfile>,
    /// Per-step profiles (1-based) replacing `profile` for that arrival.
    pub step_profiles: BTreeMap<usize, PreferenceProfile>,
    pub mu: Option<ArrivalDistribution>,
    pub mu_weights: Vec<((usize, usize), BigRational)>,
    pub input: Input,
    pub analyses: Vec<Analysis>,
    pub budgets: Budgets,
    pub seed: u64,
}

impl Scenario {
    /// The profile of arrival `step` (0-based).
    pub fn profile_at(&self, step: usize) -> Arc<PreferenceProfile> {
        match self.step_profiles.get(&(step + 1)) {
            Some(p) => Arc::new(p.clone()),
            None => self.profile.clone(),
        }
    }
}

struct Line<'a> {
    number: usize,
    text: &'a str,
    /// Byte offset of `text` in the raw line.
    offset: usize,
}

impl Line<'_> {
    fn column_of(&self, part: &str) -> usize {
        let start = part.as_ptr() as usize - self.text.as_ptr() as usize;
        self.offset + start + 1
    }

    fn err(&self, part: &str, message: impl Into<String>) -> ScenarioError {
        parse_err(self.number, self.column_of(part), message)
    }

    fn key_value(&self) -> Result<(&str, &str), ScenarioError> {
        match self.text.split_once('=') {
            Some((k, v)) => Ok((k.trim(), v.trim())),
            None => Err(self.err(self.text, "expected `key = value`")),
        }
    }
}

fn parse_number<T: FromStr>(line: &Line, part: &str) -> Result<T, ScenarioError> {
    part.parse()
        .map_err(|_| line.err(part, format!("expected a non-negative integer, found {part:?}")))
}

fn parse_server_id(line: &Line, token: &str) -> Result<usize, ScenarioError> {
    let digits = token.strip_prefix('s').unwrap_or(token);
    parse_number(line, digits)
}

/// `1 s2, 2 s1, …`: comma-separated customer/server id pairs.
fn parse_pairs(line: &Line, part: &str) -> Result<Vec<(usize, usize)>, ScenarioError> {
    let mut out = Vec::new();
    for item in part.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = item.split_whitespace().collect();
        if tokens.len() != 2 {
            return Err(line.err(item, format!("expected `customer server`, found {item:?}")));
        }
        out.push((parse_number(line, tokens[0])?, parse_server_id(line, tokens[1])?));
    }
    Ok(out)
}

fn parse_counts(line: &Line, part: &str) -> Result<Vec<u32>, ScenarioError> {
    part.split_whitespace().map(|t| parse_number(line, t)).collect()
}

fn parse_detail(line: &Line, part: &str) -> Result<ClassDetail, ScenarioError> {
    let (x, y) = part
        .split_once('|')
        .ok_or_else(|| line.err(part, "expected `x1 x2 … | y1 y2 …`"))?;
    Ok(ClassDetail {
        customers: parse_counts(line, x)?,
        servers: parse_counts(line, y)?,
    })
}

fn parse_buffer(line: &Line, part: &str) -> Result<BufferDetail, ScenarioError> {
    BufferDetail::parse(part).map_err(|e| line.err(part, format!("bad buffer {part:?}: {e}")))
}

fn parse_customers(line: &Line, part: &str) -> Result<CustomerWord, ScenarioError> {
    part.parse()
        .map_err(|e| line.err(part, format!("bad customer word {part:?}: {e}")))
}

fn parse_servers(line: &Line, part: &str) -> Result<ServerWord, ScenarioError> {
    part.parse()
        .map_err(|e| line.err(part, format!("bad server word {part:?}: {e}")))
}

#[derive(Default)]
struct Raw {
    customers: Option<usize>,
    servers: Option<usize>,
    matching: Vec<(usize, usize)>,
    arrival: Vec<(usize, usize)>,
    arrival_all: bool,
    gm_vertices: Option<usize>,
    gm_edges: Vec<(usize, usize)>,
    policy: Option<PolicyKind>,
    preferences: Option<PreferenceChoice>,
    customer_orders: Vec<(usize, Vec<usize>)>,
    server_orders: Vec<(usize, Vec<usize>)>,
    step_customer_orders: Vec<(usize, usize, Vec<usize>)>,
    step_server_orders: Vec<(usize, usize, Vec<usize>)>,
    mu: Vec<((usize, usize), BigRational)>,
    input: Input,
    analyses: Vec<Analysis>,
    budgets: Budgets,
    seed: u64,
}

/// `customer 1 = s2 s1`, `server 3 = 3 2`, optionally prefixed by `step K`.
fn parse_order(line: &Line, raw: &mut Raw) -> Result<(), ScenarioError> {
    let (key, value) = line.key_value()?;
    let tokens: Vec<&str> = key.split_whitespace().collect();
    let (step, rest) = match tokens.as_slice() {
        ["step", k, rest @ ..] => (Some(parse_number::<usize>(line, k)?), rest),
        rest => (None, rest),
    };
    let [side, id] = rest else {
        return Err(line.err(key, format!("unknown policy key {key:?}")));
    };
    let id: usize = if *side == "server" {
        parse_server_id(line, id)?
    } else {
        parse_number(line, id)?
    };
    match *side {
        "customer" => {
            let list = value
                .split_whitespace()
                .map(|t| parse_server_id(line, t))
                .collect::<Result<Vec<_>, _>>()?;
            match step {
                Some(k) => raw.step_customer_orders.push((k, id, list)),
                None => raw.customer_orders.push((id, list)),
            }
        }
        "server" => {
            let list = value
                .split_whitespace()
                .map(|t| parse_number(line, t))
                .collect::<Result<Vec<_>, _>>()?;
            match step {
                Some(k) => raw.step_server_orders.push((k, id, list)),
                None => raw.server_orders.push((id, list)),
            }
        }
        _ => return Err(line.err(side, format!("expected `customer` or `server`, found {side:?}"))),
    }
    Ok(())
}

fn parse_line(section: &str, line: &Line, raw: &mut Raw) -> Result<(), ScenarioError> {
    match section {
        "classes" => {
            let (k, v) = line.key_value()?;
            match k {
                "customers" => raw.customers = Some(parse_number(line, v)?),
                "servers" => raw.servers = Some(parse_number(line, v)?),
                _ => return Err(line.err(k, format!("unknown key {k:?} in [classes]"))),
            }
        }
        "E" => raw.matching.extend(parse_pairs(line, line.text)?),
        "F" => {
            if line.text == "all" {
                raw.arrival_all = true;
            } else {
                raw.arrival.extend(parse_pairs(line, line.text)?);
            }
        }
        "gm" => {
            let (k, v) = line.key_value()?;
            match k {
                "vertices" => raw.gm_vertices = Some(parse_number(line, v)?),
                "edges" => raw.gm_edges.extend(parse_pairs(line, v)?),
                _ => return Err(line.err(k, format!("unknown key {k:?} in [gm]"))),
            }
        }
        "policy" => {
            let (k, v) = line.key_value()?;
            match k {
                "kind" => raw.policy = Some(v.parse().map_err(|_| line.err(v, format!("unknown policy {v:?}")))?),
                "preferences" => {
                    raw.preferences = Some(match v {
                        "fixed" | "natural" => PreferenceChoice::Fixed,
                        "uniform" => PreferenceChoice::Uniform,
                        _ => return Err(line.err(v, format!("expected `fixed` or `uniform`, found {v:?}"))),
                    })
                }
                _ => parse_order(line, raw)?,
            }
        }
        "mu" => {
            let (k, v) = line.key_value()?;
            let pair = parse_pairs(line, k)?;
            let [pair] = pair.as_slice() else {
                return Err(line.err(k, "expected a single `customer server` pair"));
            };
            let w = parse_rational(v).map_err(|e| line.err(v, e.to_string()))?;
            raw.mu.push((*pair, w));
        }
        "input" => {
            let (k, v) = line.key_value()?;
            let input = &mut raw.input;
            match k {
                "customers" => input.customers = Some(parse_customers(line, v)?),
                "servers" => input.servers = Some(parse_servers(line, v)?),
                "split" => input.split = Some(parse_number(line, v)?),
                "initial" => input.initial = Some(parse_buffer(line, v)?),
                "target" => input.target = Some(parse_buffer(line, v)?),
                "couple" => {
                    let (c, s) = v
                        .split_once('|')
                        .ok_or_else(|| line.err(v, "expected `customers | servers`"))?;
                    input.couple = Some((parse_customers(line, c.trim())?, parse_servers(line, s.trim())?));
                }
                "periodic" => input.periodic.get_or_insert_with(Vec::new).extend(parse_pairs(line, v)?),
                "origin" => input.origin = parse_number(line, v)?,
                "detail_a" => input.detail_a = Some(parse_detail(line, v)?),
                "detail_b" => input.detail_b = Some(parse_detail(line, v)?),
                _ => return Err(line.err(k, format!("unknown key {k:?} in [input]"))),
            }
        }
        "analyses" => {
            for name in line.text.split(',').map(str::trim).filter(|s| !s.is_empty()) {
                raw.analyses.push(name.parse().map_err(|e: String| line.err(name, e))?);
            }
        }
        "budgets" => {
            let (k, v) = line.key_value()?;
            let b = &mut raw.budgets;
            match k {
                "max_len" => b.max_len = parse_number(line, v)?,
                "max_count" => b.max_count = parse_number(line, v)?,
                "steps" => b.steps = parse_number(line, v)?,
                "max_backsteps" => b.max_backsteps = parse_number(line, v)?,
                "max_steps" => b.max_steps = parse_number(line, v)?,
                "window" => b.window = parse_number(line, v)?,
                "runs" => b.runs = parse_number(line, v)?,
                "horizon" => b.horizon = parse_number(line, v)?,
                "class_cap" => b.class_cap = parse_number(line, v)?,
                "node_budget" => b.node_budget = parse_number(line, v)?,
                "max_depth" => b.max_depth = parse_number(line, v)?,
                _ => return Err(line.err(k, format!("unknown key {k:?} in [budgets]"))),
            }
        }
        "run" => {
            let (k, v) = line.key_value()?;
            match k {
                "seed" => raw.seed = parse_number(line, v)?,
                _ => return Err(line.err(k, format!("unknown key {k:?} in [run]"))),
            }
        }
        _ => unreachable!("section names are checked on entry"),
    }
    Ok(())
}

const SECTIONS: [&str; 10] = ["classes", "E", "F", "gm", "policy", "mu", "input", "analyses", "budgets", "run"];

fn validation(message: impl Into<String>) -> ScenarioError {
    ScenarioError::Validation(message.into())
}

fn build_profile(
    structure: &MatchingStructure,
    base: &PreferenceProfile,
    customers: &[(usize, Vec<usize>)],
    servers: &[(usize, Vec<usize>)],
) -> Result<PreferenceProfile, ScenarioError> {
    let mut sigma: Vec<Vec<Server>> = structure.customers().map(|c| base.customer_order(c).to_vec()).collect();
    let mut gamma: Vec<Vec<Customer>> = structure.servers().map(|s| base.server_order(s).to_vec()).collect();
    for (c, list) in customers {
        let slot = sigma
            .get_mut(c.wrapping_sub(1))
            .ok_or_else(|| validation(format!("no customer class {c}")))?;
        *slot = list.iter().map(|&s| Server::from_id(s)).collect();
    }
    for (s, list) in servers {
        let slot = gamma
            .get_mut(s.wrapping_sub(1))
            .ok_or_else(|| validation(format!("no server class s{s}")))?;
        *slot = list.iter().map(|&c| Customer::from_id(c)).collect();
    }
    PreferenceProfile::new(structure, sigma, gamma).map_err(|e| validation(e.to_string()))
}

pub fn parse_scenario(name: &str, text: &str) -> Result<Scenario, ScenarioError> {
    let mut raw = Raw::default();
    let mut section: Option<String> = None;
    for (i, full) in text.lines().enumerate() {
        let number = i + 1;
        let content = full.split('#').next().unwrap_or("");
        let trimmed = content.trim();
        if trimmed.is_empty() {
            continue;
        }
        let offset = content.len() - content.trim_start().len();
        let line = Line {
            number,
            text: trimmed,
            offset,
        };
        if let Some(rest) = trimmed.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| line.err(trimmed, "unterminated section header"))?
                .trim();
            if !SECTIONS.contains(&name) {
                return Err(line.err(trimmed, format!("unknown section [{name}]")));
            }
            section = Some(name.to_string());
            continue;
        }
        let Some(current) = section.as_deref() else {
            return Err(line.err(trimmed, "content before the first section header"));
        };
        parse_line(current, &line, &mut raw)?;
    }
    finish(name, raw)
}

fn finish(name: &str, raw: Raw) -> Result<Scenario, ScenarioError> {
    let (spec, structure) = match raw.gm_vertices {
        Some(n) => {
            if raw.customers.is_some() || !raw.matching.is_empty() {
                return Err(validation("[gm] cannot be combined with [classes] or [E]"));
            }
            let s = MatchingStructure::general_matching(n, &raw.gm_edges).map_err(|e| validation(e.to_string()))?;
            (
                StructureSpec::General {
                    vertices: n,
                    edges: raw.gm_edges.clone(),
                },
                s,
            )
        }
        None => {
            let nc = raw.customers.ok_or_else(|| validation("[classes] must give `customers`"))?;
            let ns = raw.servers.ok_or_else(|| validation("[classes] must give `servers`"))?;
            let arrival = if raw.arrival_all {
                (1..=nc).flat_map(|c| (1..=ns).map(move |s| (c, s))).collect()
            } else {
                raw.arrival.clone()
            };
            let s = MatchingStructure::new(nc, ns, &raw.matching, &arrival).map_err(|e| validation(e.to_string()))?;
            (
                StructureSpec::Explicit {
                    customers: nc,
                    servers: ns,
                    matching: raw.matching.clone(),
                    arrival,
                },
                s,
            )
        }
    };
    let natural = PreferenceProfile::natural(&structure);
    let profile = build_profile(&structure, &natural, &raw.customer_orders, &raw.server_orders)?;
    let mut step_profiles = BTreeMap::new();
    let mut steps: Vec<usize> = raw
        .step_customer_orders
        .iter()
        .map(|x| x.0)
        .chain(raw.step_server_orders.iter().map(|x| x.0))
        .collect();
    steps.sort_unstable();
    steps.dedup();
    for k in steps {
        if k == 0 {
            return Err(validation("steps are numbered from 1"));
        }
        let cs: Vec<(usize, Vec<usize>)> = raw
            .step_customer_orders
            .iter()
            .filter(|x| x.0 == k)
            .map(|x| (x.1, x.2.clone()))
            .collect();
        let ss: Vec<(usize, Vec<usize>)> = raw
            .step_server_orders
            .iter()
            .filter(|x| x.0 == k)
            .map(|x| (x.1, x.2.clone()))
            .collect();
        step_profiles.insert(k, build_profile(&structure, &profile, &cs, &ss)?);
    }
    let mu = if raw.mu.is_empty() {
        None
    } else {
        let weights = raw
            .mu
            .iter()
            .map(|&((c, s), ref w)| {
                if c == 0 || s == 0 || c > structure.customer_count() || s > structure.server_count() {
                    Err(validation(format!("[mu] pair ({c}, s{s}) is out of range")))
                } else {
                    Ok(((Customer::from_id(c), Server::from_id(s)), w.clone()))
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        Some(ArrivalDistribution::new(&structure, weights).map_err(|e| validation(e.to_string()))?)
    };
    validate_input(&structure, &raw.input)?;
    Ok(Scenario {
        name: name.to_string(),
        spec,
        structure,
        policy: raw.policy.ok_or_else(|| validation("[policy] must give `kind`"))?,
        preferences: raw.preferences.unwrap_or(PreferenceChoice::Fixed),
        profile: Arc::new(profile),
        step_profiles,
        mu,
        mu_weights: raw.mu,
        input: raw.input,
        analyses: raw.analyses,
        budgets: raw.budgets,
        seed: raw.seed,
    })
}

fn validate_input(structure: &MatchingStructure, input: &Input) -> Result<(), ScenarioError> {
    let (nc, ns) = (structure.customer_count(), structure.server_count());
    let check_c = |w: &CustomerWord, what: &str| {
        if w.max_index().is_some_and(|m| m >= nc) {
            Err(validation(format!("{what} uses a customer class beyond {nc}")))
        } else {
            Ok(())
        }
    };
    let check_s = |w: &ServerWord, what: &str| {
        if w.max_index().is_some_and(|m| m >= ns) {
            Err(validation(format!("{what} uses a server class beyond s{ns}")))
        } else {
            Ok(())
        }
    };
    if let Some(c) = &input.customers {
        check_c(c, "`customers`")?;
    }
    if let Some(s) = &input.servers {
        check_s(s, "`servers`")?;
    }
    for (what, b) in [("`initial`", &input.initial), ("`target`", &input.target)] {
        if let Some(b) = b {
            check_c(&b.customers, what)?;
            check_s(&b.servers, what)?;
            ebm_core::state::validate_buffer(structure, b.customers.clone(), b.servers.clone())
                .map_err(|e| validation(format!("{what}: {e}")))?;
        }
    }
    if let Some((c, s)) = &input.couple {
        check_c(c, "`couple`")?;
        check_s(s, "`couple`")?;
    }
    if let Some(pairs) = &input.periodic {
        for &(c, s) in pairs {
            if c == 0 || s == 0 || c > nc || s > ns || !structure.is_arrival(Customer::from_id(c), Server::from_id(s)) {
                return Err(validation(format!("periodic pair ({c}, s{s}) is not in F")));
            }
        }
        if input.origin >= pairs.len().max(1) {
            return Err(validation(format!("origin {} is outside the period", input.origin)));
        }
    }
    for d in [&input.detail_a, &input.detail_b].into_iter().flatten() {
        if d.customers.len() != nc || d.servers.len() != ns {
            return Err(validation(format!("class detail {d} must have {nc} customer and {ns} server counts")));
        }
        if !d.is_admissible(structure) {
            return Err(validation(format!("class detail {d} holds a compatible pair")));
        }
    }
    Ok(())
}

fn pairs_text(pairs: &[(usize, usize)]) -> String {
    pairs
        .iter()
        .map(|(c, s)| format!("{c} s{s}"))
        .collect::<Vec<_>>()
        .join(", ")
}

fn order_lines(structure: &MatchingStructure, profile: &PreferenceProfile, base: &PreferenceProfile, prefix: &str) -> String {
    let mut out = String::new();
    for c in structure.customers() {
        if profile.customer_order(c) != base.customer_order(c) {
            let list: Vec<String> = profile.customer_order(c).iter().map(ToString::to_string).collect();
            out += &format!("{prefix}customer {} = {}\n", c.id(), list.join(" "));
        }
    }
    for s in structure.servers() {
        if profile.server_order(s) != base.server_order(s) {
            let list: Vec<String> = profile.server_order(s).iter().map(|c| c.id().to_string()).collect();
            out += &format!("{prefix}server {} = {}\n", s.id(), list.join(" "));
        }
    }
    out
}

fn detail_text(d: &ClassDetail) -> String {
    let x: Vec<String> = d.customers.iter().map(ToString::to_string).collect();
    let y: Vec<String> = d.servers.iter().map(ToString::to_string).collect();
    format!("{} | {}", x.join(" "), y.join(" "))
}

/// Writes a scenario back in the file format; `parse_scenario` reads it
/// into an equal scenario.
pub fn render_scenario(s: &Scenario) -> String {
    let mut out = format!("# {}\n", s.name);
    match &s.spec {
        StructureSpec::Explicit {
            customers,
            servers,
            matching,
            arrival,
        } => {
            out += &format!("[classes]\ncustomers = {customers}\nservers = {servers}\n");
            out += &format!("[E]\n{}\n[F]\n{}\n", pairs_text(matching), pairs_text(arrival));
        }
        StructureSpec::General { vertices, edges } => {
            let e: Vec<String> = edges.iter().map(|(a, b)| format!("{a} {b}")).collect();
            out += &format!("[gm]\nvertices = {vertices}\nedges = {}\n", e.join(", "));
        }
    }
    out += &format!("[policy]\nkind = {}\n", s.policy.to_string().to_lowercase());
    out += match s.preferences {
        PreferenceChoice::Fixed => "preferences = fixed\n",
        PreferenceChoice::Uniform => "preferences = uniform\n",
    };
    let natural = PreferenceProfile::natural(&s.structure);
    out += &order_lines(&s.structure, &s.profile, &natural, "");
    for (k, p) in &s.step_profiles {
        out += &order_lines(&s.structure, p, &s.profile, &format!("step {k} "));
    }
    if !s.mu_weights.is_empty() {
        out += "[mu]\n";
        for ((c, t), w) in &s.mu_weights {
            out += &format!("{c} s{t} = {w}\n");
        }
    }
    let i = &s.input;
    out += "[input]\n";
    if let Some(c) = &i.customers {
        out += &format!("customers = {c}\n");
    }
    if let Some(z) = &i.servers {
        out += &format!("servers = {z}\n");
    }
    if let Some(k) = i.split {
        out += &format!("split = {k}\n");
    }
    if let Some(b) = &i.initial {
        out += &format!("initial = {b}\n");
    }
    if let Some(b) = &i.target {
        out += &format!("target = {b}\n");
    }
    if let Some((c, z)) = &i.couple {
        out += &format!("couple = {c} | {z}\n");
    }
    if let Some(p) = &i.periodic {
        out += &format!("periodic = {}\norigin = {}\n", pairs_text(p), i.origin);
    }
    if let Some(d) = &i.detail_a {
        out += &format!("detail_a = {}\n", detail_text(d));
    }
    if let Some(d) = &i.detail_b {
        out += &format!("detail_b = {}\n", detail_text(d));
    }
    out += "[analyses]\n";
    for a in &s.analyses {
        out += &format!("{a}\n");
    }
    let b = &s.budgets;
    out += &format!(
        "[budgets]\nmax_len = {}\nmax_count = {}\nsteps = {}\nmax_backsteps = {}\nmax_steps = {}\nwindow = {}\nruns = {}\nhorizon = {}\nclass_cap = {}\nnode_budget = {}\nmax_depth = {}\n",
        b.max_len, b.max_count, b.steps, b.max_backsteps, b.max_steps, b.window, b.runs, b.horizon, b.class_cap, b.node_budget, b.max_depth
    );
    out += &format!("[run]\nseed = {}\n", s.seed);
    out
}
