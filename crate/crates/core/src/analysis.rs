//! Bounded exhaustive checks of sub-additivity, non-expansiveness and the
//! consistency property, plus verifiers and constructors for erasing couples.
//!
//! Quantifiers over preference words are evaluated by propagating the set of
//! reachable buffers step by step, which is exact and avoids enumerating the
//! product of all preference draws.

use std::collections::{BTreeSet, HashSet, VecDeque};
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::engine::{self, EngineError};
use crate::model::{check_bi_separable, detect_model_kind, Customer, MatchingStructure, ModelKind, Server, Vertex};
use crate::policy::{apply_pair, select_match, step_class, ClassRule, PolicyKind};
use crate::state::{validate_buffer, ArrivalQuadruple, BufferDetail, ClassDetail, CustomerWord, PreferenceProfile, ServerWord, Word};

/// Default number of elementary steps an exhaustive check may take.
pub const DEFAULT_STEP_BUDGET: u64 = 200_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("budget exhausted after {explored} of at least {required} units ({:.1}% covered)", coverage * 100.0)]
    BudgetExceeded { explored: u64, required: u64, coverage: f64 },
    #[error("input pair {position} ({customer}, {server}) is not an arrival edge")]
    NotAdmissibleInput { position: usize, customer: Customer, server: Server },
    #[error("customer and server words have lengths {0} and {1}")]
    UnequalLengths(usize, usize),
    #[error("{0} is not class-admissible")]
    NotClassAdmissible(PolicyKind),
    #[error("target {0} is not an admissible buffer with as many customers as servers")]
    NotInTargetSpace(String),
    #[error("no erasing couple found up to depth {depth}")]
    SearchExhausted { depth: usize },
    #[error("{classes} classes exceed the search cap of {cap}")]
    TooLarge { classes: usize, cap: usize },
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// Which preference draws a check quantifies over.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PreferenceSet {
    /// One profile for every arrival.
    Fixed(Arc<PreferenceProfile>),
    /// Every permutation of the lists an arrival consults, independently per
    /// arrival.
    All,
}

impl PreferenceSet {
    pub fn natural(structure: &MatchingStructure) -> Self {
        PreferenceSet::Fixed(Arc::new(PreferenceProfile::natural(structure)))
    }

    pub fn is_exhaustive(&self) -> bool {
        matches!(self, PreferenceSet::All)
    }
}

impl fmt::Display for PreferenceSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PreferenceSet::Fixed(p) => write!(f, "fixed {p}"),
            PreferenceSet::All => f.write_str("all"),
        }
    }
}

/// Profiles to try for each `(c, s)`.
pub(crate) struct Choices {
    servers: usize,
    table: Vec<Vec<Arc<PreferenceProfile>>>,
}

impl Choices {
    pub(crate) fn new(structure: &MatchingStructure, kind: PolicyKind, prefs: &PreferenceSet) -> Self {
        let natural = Arc::new(PreferenceProfile::natural(structure));
        let mut table = Vec::with_capacity(structure.customer_count() * structure.server_count());
        for c in structure.customers() {
            for s in structure.servers() {
                let list = match prefs {
                    PreferenceSet::Fixed(p) => vec![p.clone()],
                    PreferenceSet::All if !kind.uses_preferences() => vec![natural.clone()],
                    PreferenceSet::All => natural
                        .effective_variants(Some(c), Some(s))
                        .into_iter()
                        .map(Arc::new)
                        .collect(),
                };
                table.push(list);
            }
        }
        Choices {
            servers: structure.server_count(),
            table,
        }
    }

    pub(crate) fn get(&self, c: Customer, s: Server) -> &[Arc<PreferenceProfile>] {
        &self.table[c.index() * self.servers + s.index()]
    }
}

#[inline]
pub(crate) fn step(
    structure: &MatchingStructure,
    kind: PolicyKind,
    buffer: &BufferDetail,
    c: Customer,
    s: Server,
    profile: &PreferenceProfile,
) -> BufferDetail {
    let mut w = buffer.customers.letters().to_vec();
    let mut z = buffer.servers.letters().to_vec();
    apply_pair(structure, kind, &mut w, &mut z, c, s, profile);
    BufferDetail {
        customers: Word::new(w),
        servers: Word::new(z),
    }
}

/// All buffers reachable from `start` on the pairs `(cs[k], ss[k])`, over
/// every admissible preference draw.
pub(crate) fn reachable(
    structure: &MatchingStructure,
    kind: PolicyKind,
    choices: &Choices,
    start: &BufferDetail,
    cs: &[Customer],
    ss: &[Server],
) -> BTreeSet<BufferDetail> {
    let mut states = BTreeSet::from([start.clone()]);
    for (&c, &s) in cs.iter().zip(ss) {
        let mut next = BTreeSet::new();
        for b in &states {
            for p in choices.get(c, s) {
                next.insert(step(structure, kind, b, c, s, p));
            }
        }
        states = next;
    }
    states
}

fn perfectly_matched(
    structure: &MatchingStructure,
    kind: PolicyKind,
    choices: &Choices,
    start: &BufferDetail,
    cs: &[Customer],
    ss: &[Server],
) -> bool {
    reachable(structure, kind, choices, start, cs, ss)
        .iter()
        .all(BufferDetail::is_empty)
}

fn check_admissible_input(
    structure: &MatchingStructure,
    customers: &CustomerWord,
    servers: &ServerWord,
) -> Result<(), AnalysisError> {
    if customers.len() != servers.len() {
        return Err(AnalysisError::UnequalLengths(customers.len(), servers.len()));
    }
    for (position, (&c, &s)) in customers.letters().iter().zip(servers.letters()).enumerate() {
        if !structure.contains_customer(c) || !structure.contains_server(s) || !structure.is_arrival(c, s) {
            return Err(AnalysisError::NotAdmissibleInput {
                position: position + 1,
                customer: c,
                server: s,
            });
        }
    }
    Ok(())
}

/// A finite input with one profile per pair.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Piece {
    pub customers: CustomerWord,
    pub servers: ServerWord,
    pub profiles: Vec<PreferenceProfile>,
}

impl Piece {
    pub fn new(customers: CustomerWord, servers: ServerWord, profiles: Vec<PreferenceProfile>) -> Self {
        Piece {
            customers,
            servers,
            profiles,
        }
    }

    /// All pairs share `profile`.
    pub fn with_profile(customers: CustomerWord, servers: ServerWord, profile: &PreferenceProfile) -> Self {
        let profiles = vec![profile.clone(); customers.len()];
        Piece::new(customers, servers, profiles)
    }

    pub fn len(&self) -> usize {
        self.customers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty()
    }

    pub fn inputs(&self) -> Vec<ArrivalQuadruple> {
        self.customers
            .letters()
            .iter()
            .zip(self.servers.letters())
            .zip(&self.profiles)
            .map(|((&c, &s), p)| ArrivalQuadruple::new(c, s, Arc::new(p.clone())))
            .collect()
    }

    pub fn concat(&self, other: &Piece) -> Piece {
        let mut profiles = self.profiles.clone();
        profiles.extend(other.profiles.iter().cloned());
        Piece::new(
            self.customers.concat(&other.customers),
            self.servers.concat(&other.servers),
            profiles,
        )
    }

    fn from_path(alphabet: &[ArrivalQuadruple], path: &[u32]) -> Piece {
        let mut customers = Vec::new();
        let mut servers = Vec::new();
        let mut profiles = Vec::new();
        for &k in path {
            let a = &alphabet[k as usize];
            customers.push(a.customer);
            servers.push(a.server);
            profiles.push((*a.profile).clone());
        }
        Piece::new(Word::new(customers), Word::new(servers), profiles)
    }
}

impl fmt::Display for Piece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.customers, self.servers)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Side {
    Customers,
    Servers,
}

/// Residual sizes of two pieces run separately and concatenated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SplitEvaluation {
    pub first: (usize, usize),
    pub second: (usize, usize),
    pub combined: (usize, usize),
}

impl SplitEvaluation {
    /// The side on which `|Q(combined)| > |Q(first)| + |Q(second)|`, if any.
    pub fn violated_side(&self) -> Option<Side> {
        if self.combined.0 > self.first.0 + self.second.0 {
            Some(Side::Customers)
        } else if self.combined.1 > self.first.1 + self.second.1 {
            Some(Side::Servers)
        } else {
            None
        }
    }
}

/// Runs both pieces from the empty buffer, alone and concatenated.
pub fn evaluate_split(
    structure: &MatchingStructure,
    kind: PolicyKind,
    first: &Piece,
    second: &Piece,
) -> Result<SplitEvaluation, AnalysisError> {
    check_admissible_input(structure, &first.customers, &first.servers)?;
    check_admissible_input(structure, &second.customers, &second.servers)?;
    let empty = BufferDetail::empty();
    let a = engine::residual(structure, kind, &empty, &first.inputs())?;
    let b = engine::residual(structure, kind, &empty, &second.inputs())?;
    let ab = engine::residual(structure, kind, &empty, &first.concat(second).inputs())?;
    Ok(SplitEvaluation {
        first: a.sizes(),
        second: b.sizes(),
        combined: ab.sizes(),
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SubadditivityViolation {
    pub first: Piece,
    pub second: Piece,
    pub evaluation: SplitEvaluation,
    pub side: Side,
}

impl SubadditivityViolation {
    /// Re-runs the pieces through the engine; true iff the violation reproduces.
    pub fn replay(&self, structure: &MatchingStructure, kind: PolicyKind) -> Result<bool, AnalysisError> {
        let e = evaluate_split(structure, kind, &self.first, &self.second)?;
        Ok(e == self.evaluation && e.violated_side() == Some(self.side))
    }
}

impl fmt::Display for SubadditivityViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (lhs, a, b) = match self.side {
            Side::Customers => (self.evaluation.combined.0, self.evaluation.first.0, self.evaluation.second.0),
            Side::Servers => (self.evaluation.combined.1, self.evaluation.first.1, self.evaluation.second.1),
        };
        write!(
            f,
            "{:?} side: {} then {} leaves {} > {} + {}",
            self.side, self.first, self.second, lhs, a, b
        )
    }
}

fn arrival_alphabet(structure: &MatchingStructure, choices: &Choices) -> Vec<ArrivalQuadruple> {
    let mut out = Vec::new();
    for (c, s) in structure.arrival_edges() {
        for p in choices.get(c, s) {
            out.push(ArrivalQuadruple::new(c, s, p.clone()));
        }
    }
    out
}

/// Groups of first pieces processed between budget checks.
const GROUP_CHUNK: usize = 64;

/// Checks sub-additivity on every pair of admissible pieces of length at most
/// `max_len`, uniformly over the preference set. Returns the first violation
/// in the order (first-piece buffer discovery, second piece shortlex).
pub fn check_subadditive(
    structure: &MatchingStructure,
    kind: PolicyKind,
    max_len: usize,
    prefs: &PreferenceSet,
    budget: u64,
) -> Result<Option<SubadditivityViolation>, AnalysisError> {
    let choices = Choices::new(structure, kind, prefs);
    let alphabet = arrival_alphabet(structure, &choices);

    // Distinct buffers left by a first piece; a representative path each.
    let mut groups: Vec<(BufferDetail, Vec<u32>)> = vec![(BufferDetail::empty(), Vec::new())];
    let mut seen: HashSet<BufferDetail> = HashSet::from([BufferDetail::empty()]);
    let mut frontier = 0..1;
    let mut spent: u64 = 0;
    for _ in 0..max_len {
        let end = groups.len();
        for g in frontier.clone() {
            for (k, a) in alphabet.iter().enumerate() {
                let (b, path) = &groups[g];
                let next = step(structure, kind, b, a.customer, a.server, &a.profile);
                spent += 1;
                if seen.insert(next.clone()) {
                    let mut p = path.clone();
                    p.push(k as u32);
                    groups.push((next, p));
                }
            }
        }
        frontier = end..groups.len();
    }
    if spent > budget {
        return Err(AnalysisError::BudgetExceeded {
            explored: 0,
            required: spent,
            coverage: 0.0,
        });
    }

    let total = groups.len();
    let mut done = 0usize;
    for chunk in groups.chunks(GROUP_CHUNK) {
        let results: Vec<(Option<SubadditivityViolation>, u64)> = chunk
            .par_iter()
            .map(|(b, path)| second_piece_search(structure, kind, &alphabet, max_len, b, path))
            .collect();
        for (found, cost) in results {
            spent += cost;
            if let Some(v) = found {
                return Ok(Some(v));
            }
        }
        done += chunk.len();
        if spent > budget && done < total {
            log::warn!("sub-additivity check stopped after {done}/{total} first-piece classes");
            return Err(AnalysisError::BudgetExceeded {
                explored: done as u64,
                required: total as u64,
                coverage: done as f64 / total as f64,
            });
        }
    }
    Ok(None)
}

fn second_piece_search(
    structure: &MatchingStructure,
    kind: PolicyKind,
    alphabet: &[ArrivalQuadruple],
    max_len: usize,
    start: &BufferDetail,
    first_path: &[u32],
) -> (Option<SubadditivityViolation>, u64) {
    let (base_c, base_s) = start.sizes();
    let mut cost = 0u64;
    let mut seen: HashSet<(BufferDetail, BufferDetail)> = HashSet::new();
    seen.insert((BufferDetail::empty(), start.clone()));
    let mut level: Vec<(BufferDetail, BufferDetail, Vec<u32>)> =
        vec![(BufferDetail::empty(), start.clone(), Vec::new())];
    for _ in 0..max_len {
        let mut next_level = Vec::new();
        for (solo, comb, path) in &level {
            for (k, a) in alphabet.iter().enumerate() {
                let solo2 = step(structure, kind, solo, a.customer, a.server, &a.profile);
                let comb2 = step(structure, kind, comb, a.customer, a.server, &a.profile);
                cost += 2;
                let key = (solo2, comb2);
                if seen.contains(&key) {
                    continue;
                }
                let (solo2, comb2) = key.clone();
                seen.insert(key);
                let mut p = path.clone();
                p.push(k as u32);
                let evaluation = SplitEvaluation {
                    first: (base_c, base_s),
                    second: solo2.sizes(),
                    combined: comb2.sizes(),
                };
                if let Some(side) = evaluation.violated_side() {
                    let v = SubadditivityViolation {
                        first: Piece::from_path(alphabet, first_path),
                        second: Piece::from_path(alphabet, &p),
                        evaluation,
                        side,
                    };
                    return (Some(v), cost);
                }
                next_level.push((solo2, comb2, p));
            }
        }
        level = next_level;
    }
    (None, cost)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct NonExpansiveViolation {
    pub first: ClassDetail,
    pub second: ClassDetail,
    pub customer: Customer,
    pub server: Server,
    pub profile: PreferenceProfile,
    pub distance_before: u64,
    pub distance_after: u64,
}

impl NonExpansiveViolation {
    pub fn replay(&self, structure: &MatchingStructure, kind: PolicyKind) -> Result<bool, AnalysisError> {
        let a = ArrivalQuadruple::new(self.customer, self.server, Arc::new(self.profile.clone()));
        let x = step_class(structure, kind, &self.first, &a).map_err(EngineError::from)?;
        let y = step_class(structure, kind, &self.second, &a).map_err(EngineError::from)?;
        let after = crate::state::l1_distance(&x, &y).expect("same alphabet");
        Ok(after == self.distance_after && after > self.distance_before)
    }
}

impl fmt::Display for NonExpansiveViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "details {} and {} with arrival ({}, {}): distance {} -> {}",
            self.first, self.second, self.customer, self.server, self.distance_before, self.distance_after
        )
    }
}

/// Every admissible class detail with all entries at most `max_count`, in
/// lexicographic order of `(x, y)`.
pub fn enumerate_class_details(structure: &MatchingStructure, max_count: u32) -> Vec<ClassDetail> {
    fn vectors(len: usize, max: u32) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new()];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (0..=max).map(move |k| {
                        let mut w = v.clone();
                        w.push(k);
                        w
                    })
                })
                .collect();
        }
        out
    }
    let xs = vectors(structure.customer_count(), max_count);
    let ys = vectors(structure.server_count(), max_count);
    let mut out = Vec::new();
    for x in &xs {
        for y in &ys {
            let d = ClassDetail {
                customers: x.clone(),
                servers: y.clone(),
            };
            if d.is_admissible(structure) {
                out.push(d);
            }
        }
    }
    out
}

/// Checks `‖d'⊙a − d⊙a‖ ≤ ‖d' − d‖` on all detail pairs with entries at most
/// `max_count`, all arrivals in `F` and the given preferences.
pub fn check_nonexpansive(
    structure: &MatchingStructure,
    kind: PolicyKind,
    max_count: u32,
    prefs: &PreferenceSet,
    budget: u64,
) -> Result<Option<NonExpansiveViolation>, AnalysisError> {
    if !kind.is_class_admissible() {
        return Err(AnalysisError::NotClassAdmissible(kind));
    }
    let choices = Choices::new(structure, kind, prefs);
    let alphabet = arrival_alphabet(structure, &choices);
    let details = enumerate_class_details(structure, max_count);
    let n = details.len();
    let required = (n as u64) * (n as u64 + 1) / 2 * alphabet.len() as u64;
    let after: Vec<Vec<ClassDetail>> = details
        .par_iter()
        .map(|d| {
            alphabet
                .iter()
                .map(|a| step_class(structure, kind, d, a).expect("enumerated details are admissible"))
                .collect()
        })
        .collect();
    let rows: usize = if required <= budget {
        n
    } else {
        // rows i cost (n - i) * |A|; take as many leading rows as fit
        let mut acc = 0u64;
        let mut r = 0;
        while r < n {
            let cost = (n - r) as u64 * alphabet.len() as u64;
            if acc + cost > budget {
                break;
            }
            acc += cost;
            r += 1;
        }
        r
    };
    let found = (0..rows).into_par_iter().find_map_first(|i| {
        for j in i..n {
            let before = crate::state::l1_distance(&details[i], &details[j]).expect("same alphabet");
            for (k, a) in alphabet.iter().enumerate() {
                let d = crate::state::l1_distance(&after[i][k], &after[j][k]).expect("same alphabet");
                if d > before {
                    return Some(NonExpansiveViolation {
                        first: details[i].clone(),
                        second: details[j].clone(),
                        customer: a.customer,
                        server: a.server,
                        profile: (*a.profile).clone(),
                        distance_before: before,
                        distance_after: d,
                    });
                }
            }
        }
        None
    });
    if found.is_some() {
        return Ok(found);
    }
    if rows < n {
        let explored: u64 = (0..rows).map(|r| (n - r) as u64 * alphabet.len() as u64).sum();
        return Err(AnalysisError::BudgetExceeded {
            explored,
            required,
            coverage: explored as f64 / required as f64,
        });
    }
    Ok(None)
}

/// Two queue vectors for which the selector of an entering item picks
/// different classes although both classes are available in both.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConsistencyViolation {
    pub entering: Vertex,
    pub first: Vec<u32>,
    pub second: Vec<u32>,
    pub profile: PreferenceProfile,
    pub chosen_first: Vertex,
    pub chosen_second: Vertex,
}

type DetailOf<'a> = Box<dyn Fn(&Vec<u32>) -> ClassDetail + 'a>;

pub fn find_consistency_violation(
    structure: &MatchingStructure,
    rule: ClassRule,
    max_count: u32,
    prefs: &PreferenceSet,
) -> Option<ConsistencyViolation> {
    let natural = PreferenceProfile::natural(structure);
    let profiles = |entering: Vertex| -> Vec<PreferenceProfile> {
        match (prefs, entering) {
            (PreferenceSet::Fixed(p), _) => vec![(**p).clone()],
            (PreferenceSet::All, Vertex::Customer(c)) => natural.effective_variants(Some(c), None),
            (PreferenceSet::All, Vertex::Server(s)) => natural.effective_variants(None, Some(s)),
        }
    };
    let details = enumerate_class_details(structure, max_count);
    let mut server_vectors: Vec<Vec<u32>> = details.iter().map(|d| d.servers.clone()).collect();
    server_vectors.sort();
    server_vectors.dedup();
    let mut customer_vectors: Vec<Vec<u32>> = details.iter().map(|d| d.customers.clone()).collect();
    customer_vectors.sort();
    customer_vectors.dedup();

    let entering: Vec<Vertex> = structure
        .customers()
        .map(Vertex::Customer)
        .chain(structure.servers().map(Vertex::Server))
        .collect();
    for e in entering {
        let (vectors, as_detail): (&Vec<Vec<u32>>, DetailOf) = match e {
            Vertex::Customer(_) => (
                &server_vectors,
                Box::new(|v: &Vec<u32>| ClassDetail {
                    customers: vec![0; structure.customer_count()],
                    servers: v.clone(),
                }),
            ),
            Vertex::Server(_) => (
                &customer_vectors,
                Box::new(|v: &Vec<u32>| ClassDetail {
                    customers: v.clone(),
                    servers: vec![0; structure.server_count()],
                }),
            ),
        };
        let available = |v: &Vec<u32>, t: Vertex| match t {
            Vertex::Customer(c) => v[c.index()] > 0,
            Vertex::Server(s) => v[s.index()] > 0,
        };
        for p in profiles(e) {
            for a in vectors {
                let Some(pa) = select_match(structure, rule, &as_detail(a), e, &p) else {
                    continue;
                };
                for b in vectors {
                    let Some(pb) = select_match(structure, rule, &as_detail(b), e, &p) else {
                        continue;
                    };
                    if pa != pb && available(a, pb) && available(b, pa) {
                        return Some(ConsistencyViolation {
                            entering: e,
                            first: a.clone(),
                            second: b.clone(),
                            profile: p.clone(),
                            chosen_first: pa,
                            chosen_second: pb,
                        });
                    }
                }
            }
        }
    }
    None
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum CoupleStrength {
    /// Erasing couple of the given buffer.
    Erasing(BufferDetail),
    Strong,
}

/// How a couple was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Construction {
    /// Spanning alternating path on a complete bipartite subgraph.
    CompleteSubgraph,
    /// Spanning path with forward `F` links, read forwards.
    ForwardChain,
    /// Spanning path with forward `F` links, read backwards.
    ReverseChain,
    /// Three maximal parts of a bi-separable graph.
    BiSeparable,
    /// Alternating path joining the two letters of a single-letter target.
    AlternatingPath,
    /// Breadth-first search over admissible inputs.
    Search,
    /// Concatenation of per-round couples.
    Rounds,
    Supplied,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ErasingCouple {
    pub customers: CustomerWord,
    pub servers: ServerWord,
    pub strength: CoupleStrength,
    pub construction: Construction,
    /// The defining conditions were checked over the declared preference set.
    pub verified: bool,
}

impl fmt::Display for ErasingCouple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.customers, self.servers)
    }
}

fn check_target(structure: &MatchingStructure, target: &BufferDetail) -> Result<(), AnalysisError> {
    if target.customers.len() != target.servers.len()
        || validate_buffer(structure, target.customers.clone(), target.servers.clone()).is_err()
    {
        return Err(AnalysisError::NotInTargetSpace(target.to_string()));
    }
    Ok(())
}

/// True iff `(c, s)` is completely matched alone and after `target`, for every
/// preference draw in the set.
pub fn verify_erasing_couple(
    structure: &MatchingStructure,
    kind: PolicyKind,
    target: &BufferDetail,
    customers: &CustomerWord,
    servers: &ServerWord,
    prefs: &PreferenceSet,
) -> Result<bool, AnalysisError> {
    check_admissible_input(structure, customers, servers)?;
    check_target(structure, target)?;
    let choices = Choices::new(structure, kind, prefs);
    let (cs, ss) = (customers.letters(), servers.letters());
    Ok(perfectly_matched(structure, kind, &choices, &BufferDetail::empty(), cs, ss)
        && perfectly_matched(structure, kind, &choices, target, cs, ss))
}

/// Which defining conditions of a strong erasing couple fail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StrongCoupleReport {
    /// Lengths of suffixes that are not always perfectly matched.
    pub failing_suffixes: Vec<usize>,
    /// Incompatible single pairs `(i, j)` that are not always erased.
    pub failing_prefixes: Vec<(Customer, Server)>,
}

impl StrongCoupleReport {
    pub fn holds(&self) -> bool {
        self.failing_suffixes.is_empty() && self.failing_prefixes.is_empty()
    }
}

pub fn strong_couple_report(
    structure: &MatchingStructure,
    kind: PolicyKind,
    customers: &CustomerWord,
    servers: &ServerWord,
    prefs: &PreferenceSet,
) -> Result<StrongCoupleReport, AnalysisError> {
    check_admissible_input(structure, customers, servers)?;
    let choices = Choices::new(structure, kind, prefs);
    let (cs, ss) = (customers.letters(), servers.letters());
    let n = cs.len();
    let failing_suffixes = (1..=n)
        .filter(|&len| !perfectly_matched(structure, kind, &choices, &BufferDetail::empty(), &cs[n - len..], &ss[n - len..]))
        .collect();
    let failing_prefixes = structure
        .non_matching_pairs()
        .into_iter()
        .filter(|&(i, j)| {
            let start = BufferDetail {
                customers: Word::new(vec![i]),
                servers: Word::new(vec![j]),
            };
            !perfectly_matched(structure, kind, &choices, &start, cs, ss)
        })
        .collect();
    Ok(StrongCoupleReport {
        failing_suffixes,
        failing_prefixes,
    })
}

pub fn verify_strong_erasing_couple(
    structure: &MatchingStructure,
    kind: PolicyKind,
    customers: &CustomerWord,
    servers: &ServerWord,
    prefs: &PreferenceSet,
) -> Result<bool, AnalysisError> {
    Ok(strong_couple_report(structure, kind, customers, servers, prefs)?.holds())
}

/// Limits for the constructive searches.
#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    /// Cap on `|C| + |S|` for subset enumeration.
    pub class_cap: usize,
    /// Nodes visited by path and input searches.
    pub node_budget: u64,
    /// Depth of the breadth-first fallback.
    pub max_depth: usize,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            class_cap: 16,
            node_budget: 2_000_000,
            max_depth: 12,
        }
    }
}

fn mask_members(mask: u64, n: usize) -> Vec<usize> {
    (0..n).filter(|k| mask >> k & 1 == 1).collect()
}

/// Candidate couples from the bi-separable construction, in deterministic order.
fn bi_separable_candidates(structure: &MatchingStructure) -> Vec<(CustomerWord, ServerWord)> {
    let Some(partition) = check_bi_separable(structure) else {
        return Vec::new();
    };
    let maximal: Vec<_> = partition
        .parts
        .iter()
        .filter(|p| p.is_maximal() && !p.is_one_sided())
        .collect();
    let mut out = Vec::new();
    for (a, p1) in maximal.iter().enumerate() {
        for (b, p2) in maximal.iter().enumerate() {
            for (c, p3) in maximal.iter().enumerate() {
                if a == b || b == c || a == c {
                    continue;
                }
                for &k1 in &p1.customers {
                    for &l1 in &p1.servers {
                        for &k2 in &p2.customers {
                            for &l2 in &p2.servers {
                                for &k3 in &p3.customers {
                                    for &l3 in &p3.servers {
                                        if structure.is_arrival(k1, l2)
                                            && structure.is_arrival(k2, l3)
                                            && structure.is_arrival(k3, l1)
                                        {
                                            out.push((Word::new(vec![k1, k2, k3]), Word::new(vec![l2, l3, l1])));
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out
}

struct PathSearch<'a> {
    structure: &'a MatchingStructure,
    customers: Vec<Customer>,
    servers: Vec<Server>,
    max_pairs: usize,
    nodes: u64,
    node_budget: u64,
    found: Vec<(Vec<Customer>, Vec<Server>)>,
}

impl PathSearch<'_> {
    fn spans(&self, is: &[Customer], js: &[Server]) -> bool {
        self.customers.iter().all(|c| is.contains(c)) && self.servers.iter().all(|s| js.contains(s))
    }

    /// Extends `i_1 j_1 ... i_k j_k` with pairs `(i, j) ∈ E ∩ F` joined by `E` links.
    fn extend(&mut self, is: &mut Vec<Customer>, js: &mut Vec<Server>) {
        if self.nodes >= self.node_budget {
            return;
        }
        self.nodes += 1;
        if !is.is_empty() && self.spans(is, js) {
            self.found.push((is.clone(), js.clone()));
        }
        if is.len() == self.max_pairs {
            return;
        }
        let candidates: Vec<Customer> = match js.last() {
            None => self.customers.clone(),
            Some(&j) => self
                .customers
                .iter()
                .copied()
                .filter(|&i| self.structure.is_matchable(i, j))
                .collect(),
        };
        for i in candidates {
            let partners: Vec<Server> = self
                .servers
                .iter()
                .copied()
                .filter(|&j| self.structure.is_matchable(i, j) && self.structure.is_arrival(i, j))
                .collect();
            for j in partners {
                is.push(i);
                js.push(j);
                self.extend(is, js);
                is.pop();
                js.pop();
            }
        }
    }
}

/// Candidate couples from spanning alternating paths on subsets `Č ∪ Š` with
/// `S(Č) = S` and `C(Š) = C`.
fn path_candidates(
    structure: &MatchingStructure,
    limits: &SearchLimits,
) -> Result<Vec<(CustomerWord, ServerWord, Construction)>, AnalysisError> {
    if structure.class_count() > limits.class_cap {
        return Err(AnalysisError::TooLarge {
            classes: structure.class_count(),
            cap: limits.class_cap,
        });
    }
    let nc = structure.customer_count();
    let ns = structure.server_count();
    let all_s = (1u64 << ns) - 1;
    let all_c = (1u64 << nc) - 1;
    let mut out = Vec::new();
    let mut nodes = 0u64;
    for cm in 1u64..=all_c {
        if structure.customer_mask_servers(cm) != all_s {
            continue;
        }
        for sm in 1u64..=all_s {
            if structure.server_mask_customers(sm) != all_c {
                continue;
            }
            let customers: Vec<Customer> = mask_members(cm, nc).into_iter().map(Customer::from_index).collect();
            let servers: Vec<Server> = mask_members(sm, ns).into_iter().map(Server::from_index).collect();
            let mut search = PathSearch {
                structure,
                max_pairs: customers.len() + servers.len(),
                customers: customers.clone(),
                servers: servers.clone(),
                nodes: 0,
                node_budget: limits.node_budget.saturating_sub(nodes),
                found: Vec::new(),
            };
            search.extend(&mut Vec::new(), &mut Vec::new());
            nodes += search.nodes;
            for (is, js) in search.found {
                let q = is.len();
                let complete = customers
                    .iter()
                    .all(|&c| servers.iter().all(|&s| structure.is_matchable(c, s)));
                if complete {
                    out.push((Word::new(is.clone()), Word::new(js.clone()), Construction::CompleteSubgraph));
                }
                let back_links = (1..q).all(|l| structure.is_arrival(is[l], js[l - 1]));
                if !back_links {
                    continue;
                }
                let last_alone = customers
                    .iter()
                    .filter(|&&c| structure.is_matchable(c, js[q - 1]))
                    .eq(std::iter::once(&is[q - 1]));
                if last_alone {
                    let mut c = is.clone();
                    c.extend_from_slice(&is[1..]);
                    let mut s = js.clone();
                    s.extend_from_slice(&js[..q - 1]);
                    out.push((Word::new(c), Word::new(s), Construction::ForwardChain));
                }
                let first_alone = servers
                    .iter()
                    .filter(|&&s| structure.is_matchable(is[0], s))
                    .eq(std::iter::once(&js[0]));
                if first_alone {
                    let mut c: Vec<Customer> = is.iter().rev().copied().collect();
                    c.extend(is[1..].iter().rev());
                    let mut s: Vec<Server> = js.iter().rev().copied().collect();
                    s.extend(js[..q - 1].iter().rev());
                    out.push((Word::new(c), Word::new(s), Construction::ReverseChain));
                }
            }
            if nodes >= limits.node_budget {
                return Err(AnalysisError::BudgetExceeded {
                    explored: nodes,
                    required: nodes + 1,
                    coverage: 0.0,
                });
            }
        }
    }
    Ok(out)
}

/// Searches the constructive sufficient conditions for a strong erasing couple
/// and returns the first candidate that verifies for every policy in
/// `policies`.
pub fn construct_strong_erasing_couple(
    structure: &MatchingStructure,
    policies: &[PolicyKind],
    prefs: &PreferenceSet,
    limits: &SearchLimits,
) -> Result<Option<ErasingCouple>, AnalysisError> {
    let mut candidates: Vec<(CustomerWord, ServerWord, Construction)> = bi_separable_candidates(structure)
        .into_iter()
        .map(|(c, s)| (c, s, Construction::BiSeparable))
        .collect();
    candidates.extend(path_candidates(structure, limits)?);
    let mut tried = HashSet::new();
    for (c, s, how) in candidates {
        if !tried.insert((c.clone(), s.clone())) {
            continue;
        }
        let mut ok = true;
        for &kind in policies {
            if !verify_strong_erasing_couple(structure, kind, &c, &s, prefs)? {
                log::debug!("candidate ({c}, {s}) from {how:?} fails for {kind}");
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(Some(ErasingCouple {
                customers: c,
                servers: s,
                strength: CoupleStrength::Strong,
                construction: how,
                verified: true,
            }));
        }
    }
    Ok(None)
}

/// For a single incompatible pair `(i, j)`, the couple `(i_1..i_p, j_1..j_p)`
/// read off a shortest alternating path `i - j_1 - i_1 - ... - i_p - j`. Needs
/// every pair of the couple to be an arrival edge.
pub fn alternating_path_couple(
    structure: &MatchingStructure,
    i: Customer,
    j: Server,
) -> Option<(CustomerWord, ServerWord)> {
    let nc = structure.customer_count();
    let n = structure.class_count();
    let mut prev = vec![usize::MAX; n];
    let start = i.index();
    let goal = nc + j.index();
    prev[start] = start;
    let mut queue = VecDeque::from([start]);
    while let Some(v) = queue.pop_front() {
        if v == goal {
            break;
        }
        let next: Vec<usize> = if v < nc {
            structure
                .servers_of(Customer::from_index(v))
                .iter()
                .map(|s| nc + s.index())
                .collect()
        } else {
            structure
                .customers_of(Server::from_index(v - nc))
                .iter()
                .map(|c| c.index())
                .collect()
        };
        for u in next {
            if prev[u] == usize::MAX {
                prev[u] = v;
                queue.push_back(u);
            }
        }
    }
    if prev[goal] == usize::MAX {
        return None;
    }
    let mut path = vec![goal];
    while *path.last().expect("non-empty") != start {
        path.push(prev[*path.last().expect("non-empty")]);
    }
    path.reverse();
    // path = i, j_1, i_1, ..., j_p, i_p, j
    let inner = &path[1..path.len() - 1];
    let servers: Vec<Server> = inner.iter().step_by(2).map(|&v| Server::from_index(v - nc)).collect();
    let customers: Vec<Customer> = inner.iter().skip(1).step_by(2).map(|&v| Customer::from_index(v)).collect();
    if customers
        .iter()
        .zip(&servers)
        .any(|(&c, &s)| !structure.is_arrival(c, s))
    {
        return None;
    }
    Some((Word::new(customers), Word::new(servers)))
}

/// Shortest admissible input that is an erasing couple of `target`, by
/// breadth-first search over the sets of reachable buffers.
pub fn search_erasing_couple(
    structure: &MatchingStructure,
    kind: PolicyKind,
    target: &BufferDetail,
    prefs: &PreferenceSet,
    limits: &SearchLimits,
) -> Result<Option<(CustomerWord, ServerWord)>, AnalysisError> {
    check_target(structure, target)?;
    let choices = Choices::new(structure, kind, prefs);
    let edges = structure.arrival_edges();
    type Sets = (BTreeSet<BufferDetail>, BTreeSet<BufferDetail>);
    let start: Sets = (BTreeSet::from([BufferDetail::empty()]), BTreeSet::from([target.clone()]));
    let done = |s: &Sets| s.0.iter().all(BufferDetail::is_empty) && s.1.iter().all(BufferDetail::is_empty);
    if done(&start) {
        return Ok(Some((Word::empty(), Word::empty())));
    }
    let mut seen: HashSet<Sets> = HashSet::from([start.clone()]);
    let mut level: Vec<(Sets, Vec<usize>)> = vec![(start, Vec::new())];
    let mut nodes = 0u64;
    for _ in 0..limits.max_depth {
        let mut next = Vec::new();
        for (sets, path) in &level {
            for (k, &(c, s)) in edges.iter().enumerate() {
                nodes += 1;
                let advance = |set: &BTreeSet<BufferDetail>| -> BTreeSet<BufferDetail> {
                    let mut out = BTreeSet::new();
                    for b in set {
                        for p in choices.get(c, s) {
                            out.insert(step(structure, kind, b, c, s, p));
                        }
                    }
                    out
                };
                let moved = (advance(&sets.0), advance(&sets.1));
                if !seen.insert(moved.clone()) {
                    continue;
                }
                let mut p = path.clone();
                p.push(k);
                if done(&moved) {
                    let cs = p.iter().map(|&k| edges[k].0).collect();
                    let ss = p.iter().map(|&k| edges[k].1).collect();
                    return Ok(Some((Word::new(cs), Word::new(ss))));
                }
                next.push((moved, p));
            }
            if nodes > limits.node_budget {
                return Ok(None);
            }
        }
        level = next;
    }
    Ok(None)
}

/// Builds an erasing couple of `target` by successive rounds on the last
/// unmatched pair, each round strictly shrinking the residual.
pub fn construct_erasing_couple(
    structure: &MatchingStructure,
    kind: PolicyKind,
    target: &BufferDetail,
    prefs: &PreferenceSet,
    limits: &SearchLimits,
) -> Result<ErasingCouple, AnalysisError> {
    check_target(structure, target)?;
    let strength = CoupleStrength::Erasing(target.clone());
    if target.is_empty() {
        return Ok(ErasingCouple {
            customers: Word::empty(),
            servers: Word::empty(),
            strength,
            construction: Construction::Rounds,
            verified: true,
        });
    }
    let probe = match prefs {
        PreferenceSet::Fixed(p) => p.clone(),
        PreferenceSet::All => Arc::new(PreferenceProfile::natural(structure)),
    };
    let is_bm = detect_model_kind(structure) == ModelKind::Bm;
    let strong = match construct_strong_erasing_couple(structure, &[kind], prefs, limits) {
        Ok(found) => found,
        Err(AnalysisError::TooLarge { .. }) | Err(AnalysisError::BudgetExceeded { .. }) => None,
        Err(e) => return Err(e),
    };

    let mut couple_c = CustomerWord::empty();
    let mut couple_s = ServerWord::empty();
    let mut residual = target.clone();
    let mut rounds_ok = true;
    for _ in 0..target.customers.len() {
        if residual.is_empty() {
            break;
        }
        let i = *residual.customers.letters().last().expect("balanced residual");
        let j = *residual.servers.letters().last().expect("balanced residual");
        let single = BufferDetail {
            customers: Word::new(vec![i]),
            servers: Word::new(vec![j]),
        };
        let mut piece = None;
        if let Some(sc) = &strong {
            piece = Some((sc.customers.clone(), sc.servers.clone()));
        }
        if piece.is_none() && is_bm {
            if let Some((c, s)) = alternating_path_couple(structure, i, j) {
                if verify_erasing_couple(structure, kind, &single, &c, &s, prefs)? {
                    piece = Some((c, s));
                }
            }
        }
        if piece.is_none() {
            piece = search_erasing_couple(structure, kind, &single, prefs, limits)?;
        }
        let Some((c, s)) = piece else {
            rounds_ok = false;
            break;
        };
        let before = residual.customers.len() + residual.servers.len();
        couple_c = couple_c.concat(&c);
        couple_s = couple_s.concat(&s);
        let inputs = engine::pairs_with_profile(&couple_c, &couple_s, probe.clone());
        residual = engine::residual(structure, kind, target, &inputs)?;
        let after = residual.customers.len() + residual.servers.len();
        if after >= before {
            log::warn!("round did not shrink the residual ({before} -> {after}); policy may not be sub-additive");
            rounds_ok = false;
            break;
        }
    }
    if rounds_ok
        && residual.is_empty()
        && verify_erasing_couple(structure, kind, target, &couple_c, &couple_s, prefs)?
    {
        return Ok(ErasingCouple {
            customers: couple_c,
            servers: couple_s,
            strength,
            construction: Construction::Rounds,
            verified: true,
        });
    }
    match search_erasing_couple(structure, kind, target, prefs, limits)? {
        Some((c, s)) => Ok(ErasingCouple {
            customers: c,
            servers: s,
            strength,
            construction: Construction::Search,
            verified: true,
        }),
        None => Err(AnalysisError::SearchExhausted {
            depth: limits.max_depth,
        }),
    }
}
