//! One-step transitions at buffer level and at class level.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Customer, MatchingStructure, Server, Vertex};
use crate::state::{check_letters, ArrivalQuadruple, BufferDetail, ClassDetail, ClassId, PreferenceProfile, StateError, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PolicyError {
    #[error("arrival ({0}, {1}) is not an edge of F")]
    ArrivalNotInF(Customer, Server),
    #[error("{0} is not class-admissible; step the buffer and project instead")]
    NotClassAdmissible(PolicyKind),
    #[error("class detail {0} is not admissible")]
    InadmissibleDetail(String),
    #[error(transparent)]
    State(#[from] StateError),
    #[error("unknown policy {0:?}")]
    UnknownPolicy(String),
}

#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub enum PolicyKind {
    Fcfs,
    Lcfs,
    /// Random or strict priorities, depending on how profiles are drawn.
    Rand,
    /// Match the longest compatible queue.
    Ml,
    /// Match the shortest non-empty compatible queue.
    Ms,
}

/// The class-level selector of a class-admissible policy.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub enum ClassRule {
    Rand,
    Ml,
    Ms,
}

impl PolicyKind {
    pub const ALL: [PolicyKind; 5] = [
        PolicyKind::Fcfs,
        PolicyKind::Lcfs,
        PolicyKind::Rand,
        PolicyKind::Ml,
        PolicyKind::Ms,
    ];

    pub fn class_rule(self) -> Option<ClassRule> {
        match self {
            PolicyKind::Fcfs | PolicyKind::Lcfs => None,
            PolicyKind::Rand => Some(ClassRule::Rand),
            PolicyKind::Ml => Some(ClassRule::Ml),
            PolicyKind::Ms => Some(ClassRule::Ms),
        }
    }

    pub fn is_class_admissible(self) -> bool {
        self.class_rule().is_some()
    }

    /// Whether preference lists influence transitions.
    pub fn uses_preferences(self) -> bool {
        self.is_class_admissible()
    }
}

impl fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PolicyKind::Fcfs => "FCFS",
            PolicyKind::Lcfs => "LCFS",
            PolicyKind::Rand => "RAND",
            PolicyKind::Ml => "ML",
            PolicyKind::Ms => "MS",
        })
    }
}

impl FromStr for PolicyKind {
    type Err = PolicyError;

    fn from_str(s: &str) -> Result<Self, PolicyError> {
        match s.trim().to_ascii_lowercase().as_str() {
            "fcfs" => Ok(PolicyKind::Fcfs),
            "lcfs" => Ok(PolicyKind::Lcfs),
            "rand" | "random" | "priority" => Ok(PolicyKind::Rand),
            "ml" => Ok(PolicyKind::Ml),
            "ms" => Ok(PolicyKind::Ms),
            other => Err(PolicyError::UnknownPolicy(other.to_string())),
        }
    }
}

/// How each arrival's preference profile is obtained.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PreferenceMode {
    /// The same profile for every arrival; with `Rand` this is a strict priority.
    Deterministic(Arc<PreferenceProfile>),
    /// Independent uniform permutations per arrival.
    Uniform,
    /// Profiles come with the input.
    Supplied,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Policy {
    pub kind: PolicyKind,
    pub preferences: PreferenceMode,
}

impl Policy {
    pub fn new(kind: PolicyKind, preferences: PreferenceMode) -> Self {
        Policy { kind, preferences }
    }

    /// `kind` with the natural (ascending) profile held fixed.
    pub fn fixed(structure: &MatchingStructure, kind: PolicyKind) -> Self {
        Policy {
            kind,
            preferences: PreferenceMode::Deterministic(Arc::new(PreferenceProfile::natural(structure))),
        }
    }

    /// The profile for the next arrival, or `None` when it must be supplied.
    pub fn draw_profile<R: Rng + ?Sized>(
        &self,
        structure: &MatchingStructure,
        rng: &mut R,
    ) -> Option<Arc<PreferenceProfile>> {
        match &self.preferences {
            PreferenceMode::Deterministic(p) => Some(p.clone()),
            PreferenceMode::Uniform => Some(Arc::new(PreferenceProfile::random(structure, rng))),
            PreferenceMode::Supplied => None,
        }
    }
}

/// A buffered item; either a bare class or a class tagged with its arrival index.
pub trait Queued<T: ClassId>: Clone {
    fn class(&self) -> T;
}

impl Queued<Customer> for Customer {
    fn class(&self) -> Customer {
        *self
    }
}

impl Queued<Server> for Server {
    fn class(&self) -> Server {
        *self
    }
}

/// A buffered item with its absolute arrival index.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct Tagged<T> {
    pub class: T,
    pub index: usize,
}

impl<T: ClassId> Queued<T> for Tagged<T> {
    fn class(&self) -> T {
        self.class
    }
}

/// `p_φ` / `q_φ`: picks a class among `order` from queue lengths.
pub fn select_class<T: Copy>(rule: ClassRule, order: &[T], count: impl Fn(T) -> u32) -> Option<T> {
    match rule {
        ClassRule::Rand => order.iter().copied().find(|&t| count(t) > 0),
        ClassRule::Ml | ClassRule::Ms => {
            let mut best: Option<(T, u32)> = None;
            for &t in order {
                let n = count(t);
                if n == 0 {
                    continue;
                }
                let better = match best {
                    None => true,
                    Some((_, b)) if rule == ClassRule::Ml => n > b,
                    Some((_, b)) => n < b,
                };
                if better {
                    best = Some((t, n));
                }
            }
            best.map(|(t, _)| t)
        }
    }
}

/// Class of the buffered partner an entering item would take under `rule`,
/// given the class detail before the arrival.
pub fn select_match(
    structure: &MatchingStructure,
    rule: ClassRule,
    detail: &ClassDetail,
    entering: Vertex,
    profile: &PreferenceProfile,
) -> Option<Vertex> {
    match entering {
        Vertex::Customer(c) => {
            debug_assert!(profile.customer_order(c).iter().all(|&s| structure.is_matchable(c, s)));
            select_class(rule, profile.customer_order(c), |s| detail.servers[s.index()]).map(Vertex::Server)
        }
        Vertex::Server(s) => {
            select_class(rule, profile.server_order(s), |c| detail.customers[c.index()]).map(Vertex::Customer)
        }
    }
}

/// Position in `z` of the server an incoming customer `c` takes.
pub fn pick_server<Z: Queued<Server>>(
    structure: &MatchingStructure,
    kind: PolicyKind,
    z: &[Z],
    c: Customer,
    profile: &PreferenceProfile,
) -> Option<usize> {
    match kind.class_rule() {
        None => {
            let compatible = |it: &Z| structure.is_matchable(c, it.class());
            if kind == PolicyKind::Fcfs {
                z.iter().position(compatible)
            } else {
                z.iter().rposition(compatible)
            }
        }
        Some(rule) => {
            let chosen = select_class(rule, profile.customer_order(c), |s| {
                z.iter().filter(|it| it.class() == s).count() as u32
            })?;
            z.iter().position(|it| it.class() == chosen)
        }
    }
}

/// Position in `w` of the customer an incoming server `s` takes.
pub fn pick_customer<W: Queued<Customer>>(
    structure: &MatchingStructure,
    kind: PolicyKind,
    w: &[W],
    s: Server,
    profile: &PreferenceProfile,
) -> Option<usize> {
    match kind.class_rule() {
        None => {
            let compatible = |it: &W| structure.is_matchable(it.class(), s);
            if kind == PolicyKind::Fcfs {
                w.iter().position(compatible)
            } else {
                w.iter().rposition(compatible)
            }
        }
        Some(rule) => {
            let chosen = select_class(rule, profile.server_order(s), |c| {
                w.iter().filter(|it| it.class() == c).count() as u32
            })?;
            w.iter().position(|it| it.class() == chosen)
        }
    }
}

/// What happened to an incoming pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairOutcome<W, Z> {
    /// Buffered server matched with the incoming customer.
    pub customer_partner: Option<Z>,
    /// Buffered customer matched with the incoming server.
    pub server_partner: Option<W>,
    /// The incoming customer and server were matched with each other.
    pub together: bool,
    /// `(c, s) ∈ E` but a buffered partner was found first.
    pub buffer_first_override: bool,
}

/// Applies an arrival pair in place. Both searches use the buffer as it was
/// before the arrival.
pub fn apply_pair<W: Queued<Customer>, Z: Queued<Server>>(
    structure: &MatchingStructure,
    kind: PolicyKind,
    w: &mut Vec<W>,
    z: &mut Vec<Z>,
    customer: W,
    server: Z,
    profile: &PreferenceProfile,
) -> PairOutcome<W, Z> {
    let (c, s) = (customer.class(), server.class());
    let i = pick_server(structure, kind, z, c, profile);
    let j = pick_customer(structure, kind, w, s, profile);
    let compatible = structure.is_matchable(c, s);
    let customer_partner = i.map(|i| z.remove(i));
    let server_partner = j.map(|j| w.remove(j));
    let together = compatible && customer_partner.is_none() && server_partner.is_none();
    if customer_partner.is_none() && !together {
        w.push(customer);
    }
    if server_partner.is_none() && !together {
        z.push(server);
    }
    PairOutcome {
        buffer_first_override: compatible && !together,
        customer_partner,
        server_partner,
        together,
    }
}

/// A customer entering without a server. Returns the matched buffered server.
pub fn apply_customer_alone<W: Queued<Customer>, Z: Queued<Server>>(
    structure: &MatchingStructure,
    kind: PolicyKind,
    w: &mut Vec<W>,
    z: &mut Vec<Z>,
    customer: W,
    profile: &PreferenceProfile,
) -> Option<Z> {
    match pick_server(structure, kind, z, customer.class(), profile) {
        Some(i) => Some(z.remove(i)),
        None => {
            w.push(customer);
            None
        }
    }
}

/// A server entering without a customer. Returns the matched buffered customer.
pub fn apply_server_alone<W: Queued<Customer>, Z: Queued<Server>>(
    structure: &MatchingStructure,
    kind: PolicyKind,
    w: &mut Vec<W>,
    z: &mut Vec<Z>,
    server: Z,
    profile: &PreferenceProfile,
) -> Option<W> {
    match pick_customer(structure, kind, w, server.class(), profile) {
        Some(j) => Some(w.remove(j)),
        None => {
            z.push(server);
            None
        }
    }
}

/// `U ⊙_φ (c, s, σ, γ)` on a buffer detail.
pub fn step_buffer(
    structure: &MatchingStructure,
    kind: PolicyKind,
    buffer: &BufferDetail,
    arrival: &ArrivalQuadruple,
) -> Result<BufferDetail, PolicyError> {
    check_arrival(structure, arrival)?;
    check_letters(structure, &buffer.customers, &buffer.servers)?;
    let mut w = buffer.customers.letters().to_vec();
    let mut z = buffer.servers.letters().to_vec();
    apply_pair(structure, kind, &mut w, &mut z, arrival.customer, arrival.server, &arrival.profile);
    Ok(BufferDetail {
        customers: Word::new(w),
        servers: Word::new(z),
    })
}

/// `(x, y) ⊙ (c, s, σ, γ)` for a class-admissible policy.
pub fn step_class(
    structure: &MatchingStructure,
    kind: PolicyKind,
    detail: &ClassDetail,
    arrival: &ArrivalQuadruple,
) -> Result<ClassDetail, PolicyError> {
    let rule = kind.class_rule().ok_or(PolicyError::NotClassAdmissible(kind))?;
    check_arrival(structure, arrival)?;
    if !detail.is_admissible(structure) {
        return Err(PolicyError::InadmissibleDetail(detail.to_string()));
    }
    let (c, s) = (arrival.customer, arrival.server);
    let p = select_match(structure, rule, detail, Vertex::Customer(c), &arrival.profile);
    let q = select_match(structure, rule, detail, Vertex::Server(s), &arrival.profile);
    let mut next = detail.clone();
    match p {
        Some(Vertex::Server(t)) => next.servers[t.index()] -= 1,
        _ => {
            if q.is_some() || !structure.is_matchable(c, s) {
                next.customers[c.index()] += 1;
            }
        }
    }
    match q {
        Some(Vertex::Customer(d)) => next.customers[d.index()] -= 1,
        _ => {
            if p.is_some() || !structure.is_matchable(c, s) {
                next.servers[s.index()] += 1;
            }
        }
    }
    Ok(next)
}

pub(crate) fn check_arrival(structure: &MatchingStructure, arrival: &ArrivalQuadruple) -> Result<(), PolicyError> {
    let (c, s) = (arrival.customer, arrival.server);
    if !structure.contains_customer(c) || !structure.contains_server(s) || !structure.is_arrival(c, s) {
        return Err(PolicyError::ArrivalNotInF(c, s));
    }
    Ok(())
}
