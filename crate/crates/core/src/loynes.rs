//! Backward coupling on periodic sample spaces: stationary buffer details,
//! renovation checks and the bi-infinite matching built between
//! construction points.

use std::collections::HashSet;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::analysis::ErasingCouple;
use crate::engine::{run, EngineError};
use crate::model::{Customer, MatchingStructure, Server};
use crate::policy::{apply_pair, check_arrival, PolicyError, PolicyKind};
use crate::state::{validate_buffer, ArrivalQuadruple, BufferDetail, PreferenceProfile, StateError, Word};

/// Default limit on backward periods.
pub const DEFAULT_MAX_BACKSTEPS: usize = 10_000;

/// Classes per side beyond which the per-period overload test is skipped.
const OVERLOAD_CAP: usize = 20;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum LoynesError {
    #[error("a periodic sample needs at least one event")]
    EmptySample,
    #[error("origin {origin} is outside a period of length {period}")]
    BadOrigin { origin: usize, period: usize },
    #[error("event {index}: {source}")]
    Event { index: usize, source: PolicyError },
    #[error("stationary values fail the recursion at shift {shift}: expected {expected}, found {found}")]
    StationarityViolation {
        shift: usize,
        expected: String,
        found: String,
    },
    #[error("the stationary solution never empties")]
    NoConstructionPoints,
    #[error("segment [{start}, {end}) does not end empty")]
    ImperfectSegment { start: usize, end: usize },
    #[error("solution has period {got}, sample has {expected}")]
    PeriodMismatch { got: usize, expected: usize },
    #[error("invalid initial buffer: {0}")]
    InitialBuffer(#[from] StateError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

/// One period of a periodic input. Time `t` (relative to the origin) carries
/// `events[(origin + t) mod p]`; the shift advances the origin by one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PeriodicSample {
    events: Vec<ArrivalQuadruple>,
    origin: usize,
}

impl PeriodicSample {
    pub fn new(
        structure: &MatchingStructure,
        events: Vec<ArrivalQuadruple>,
        origin: usize,
    ) -> Result<Self, LoynesError> {
        if events.is_empty() {
            return Err(LoynesError::EmptySample);
        }
        if origin >= events.len() {
            return Err(LoynesError::BadOrigin {
                origin,
                period: events.len(),
            });
        }
        for (index, e) in events.iter().enumerate() {
            check_arrival(structure, e).map_err(|source| LoynesError::Event { index, source })?;
        }
        Ok(PeriodicSample { events, origin })
    }

    /// Pairs `(c, s)` (1-based ids) sharing one profile.
    pub fn from_pairs(
        structure: &MatchingStructure,
        pairs: &[(usize, usize)],
        profile: Arc<PreferenceProfile>,
        origin: usize,
    ) -> Result<Self, LoynesError> {
        let events = pairs
            .iter()
            .map(|&(c, s)| ArrivalQuadruple::new(Customer::from_id(c), Server::from_id(s), profile.clone()))
            .collect();
        Self::new(structure, events, origin)
    }

    pub fn period(&self) -> usize {
        self.events.len()
    }

    pub fn origin(&self) -> usize {
        self.origin
    }

    /// The events in storage order, independent of the origin.
    pub fn events(&self) -> &[ArrivalQuadruple] {
        &self.events
    }

    /// The arrival at time `t`.
    pub fn event(&self, t: i64) -> &ArrivalQuadruple {
        let p = self.events.len() as i64;
        &self.events[(self.origin as i64 + t).rem_euclid(p) as usize]
    }

    /// Arrivals at times `from, from + 1, …, from + len - 1`.
    pub fn window(&self, from: i64, len: usize) -> Vec<ArrivalQuadruple> {
        (0..len as i64).map(|k| self.event(from + k).clone()).collect()
    }

    /// `θⁿ` applied to the sample.
    pub fn shifted(&self, n: i64) -> Self {
        let p = self.events.len() as i64;
        PeriodicSample {
            events: self.events.clone(),
            origin: (self.origin as i64 + n).rem_euclid(p) as usize,
        }
    }

    /// The `(c, s)` pairs of one period starting at time 0.
    pub fn pairs(&self) -> Vec<(Customer, Server)> {
        (0..self.period() as i64)
            .map(|t| {
                let e = self.event(t);
                (e.customer, e.server)
            })
            .collect()
    }
}

/// `U(θᵏω)` for `k` in one period.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StationarySolution {
    /// `values[k]` is the buffer just before the arrival at time `k`.
    pub values: Vec<BufferDetail>,
    /// Backward periods after which every start time gives these values.
    pub coupling_depth: usize,
}

impl StationarySolution {
    pub fn period(&self) -> usize {
        self.values.len()
    }

    pub fn at(&self, t: i64) -> &BufferDetail {
        &self.values[t.rem_euclid(self.values.len() as i64) as usize]
    }
}

struct Buffer {
    w: Vec<Customer>,
    z: Vec<Server>,
}

impl Buffer {
    fn from_detail(b: &BufferDetail) -> Self {
        Buffer {
            w: b.customers.letters().to_vec(),
            z: b.servers.letters().to_vec(),
        }
    }

    fn detail(&self) -> BufferDetail {
        BufferDetail {
            customers: Word::new(self.w.clone()),
            servers: Word::new(self.z.clone()),
        }
    }

    fn is_empty(&self) -> bool {
        self.w.is_empty() && self.z.is_empty()
    }

    fn feed(&mut self, structure: &MatchingStructure, kind: PolicyKind, e: &ArrivalQuadruple) {
        apply_pair(structure, kind, &mut self.w, &mut self.z, e.customer, e.server, &e.profile);
    }
}

fn advance(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    from: i64,
    len: usize,
    start: &BufferDetail,
) -> BufferDetail {
    let mut b = Buffer::from_detail(start);
    for t in from..from + len as i64 {
        b.feed(structure, kind, sample.event(t));
    }
    b.detail()
}

/// Whether some class set receives strictly more arrivals per period than
/// its compatible partners; the backward sequence then grows every period.
pub fn overloaded_per_period(structure: &MatchingStructure, sample: &PeriodicSample) -> bool {
    let (nc, ns) = (structure.customer_count(), structure.server_count());
    if nc > OVERLOAD_CAP || ns > OVERLOAD_CAP {
        return false;
    }
    let mut cc = vec![0usize; nc];
    let mut sc = vec![0usize; ns];
    for (c, s) in sample.pairs() {
        cc[c.index()] += 1;
        sc[s.index()] += 1;
    }
    let customers_over = (1u64..1 << nc).any(|mask| {
        let a: Vec<Customer> = (0..nc).filter(|i| mask >> i & 1 == 1).map(Customer::from_index).collect();
        let arriving: usize = a.iter().map(|c| cc[c.index()]).sum();
        let partners: usize = structure.servers_of_set(&a).iter().map(|s| sc[s.index()]).sum();
        arriving > partners
    });
    customers_over
        || (1u64..1 << ns).any(|mask| {
            let b: Vec<Server> = (0..ns).filter(|i| mask >> i & 1 == 1).map(Server::from_index).collect();
            let arriving: usize = b.iter().map(|s| sc[s.index()]).sum();
            let partners: usize = structure.customers_of_set(&b).iter().map(|c| cc[c.index()]).sum();
            arriving > partners
        })
}

enum Chain {
    /// Fixed point of the period map and the first start depth giving it.
    Fixed(BufferDetail, usize),
    Cycle,
    Unresolved,
}

/// Iterates the period map ending at time `k` from the buffer obtained by
/// starting empty `rem` steps back.
fn backward_chain(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    k: i64,
    rem: usize,
    max_periods: usize,
) -> Chain {
    let p = sample.period();
    let mut x = advance(structure, kind, sample, k - rem as i64, rem, &BufferDetail::empty());
    let mut seen = HashSet::new();
    for n in 0..=max_periods {
        let next = advance(structure, kind, sample, k, p, &x);
        if next == x {
            return Chain::Fixed(x, rem + n * p);
        }
        if !seen.insert(x) {
            return Chain::Cycle;
        }
        x = next;
    }
    Chain::Unresolved
}

/// Loynes' scheme on a periodic sample. For each shift `k` and each start
/// time `k - m`, the buffer at `k` started empty at `k - m` must settle on a
/// single value for all large `m`. Returns `None` when that fails within
/// `max_backsteps` periods.
pub fn backward_coupling(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    max_backsteps: usize,
) -> Result<Option<StationarySolution>, LoynesError> {
    if overloaded_per_period(structure, sample) {
        return Ok(None);
    }
    let p = sample.period();
    let per_shift: Vec<Option<(BufferDetail, usize)>> = (0..p)
        .into_par_iter()
        .map(|k| {
            let mut value: Option<BufferDetail> = None;
            let mut depth = 0;
            for rem in 0..p {
                match backward_chain(structure, kind, sample, k as i64, rem, max_backsteps) {
                    Chain::Fixed(x, m) => {
                        if value.get_or_insert_with(|| x.clone()) != &x {
                            return None;
                        }
                        depth = depth.max(m);
                    }
                    Chain::Cycle | Chain::Unresolved => return None,
                }
            }
            value.map(|v| (v, depth))
        })
        .collect();
    let mut values = Vec::with_capacity(p);
    let mut depth = 0;
    for entry in per_shift {
        match entry {
            Some((v, m)) => {
                values.push(v);
                depth = depth.max(m);
            }
            None => return Ok(None),
        }
    }
    let solution = StationarySolution {
        values,
        coupling_depth: depth.div_ceil(p),
    };
    check_recursion(structure, kind, sample, &solution)?;
    Ok(Some(solution))
}

/// `U(θᵏ⁺¹ω) = U(θᵏω) ⊙ (event at k)` at every shift.
pub fn check_recursion(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    solution: &StationarySolution,
) -> Result<(), LoynesError> {
    let p = sample.period();
    if solution.period() != p {
        return Err(LoynesError::PeriodMismatch {
            got: solution.period(),
            expected: p,
        });
    }
    for k in 0..p {
        let next = advance(structure, kind, sample, k as i64, 1, &solution.values[k]);
        let expected = &solution.values[(k + 1) % p];
        if &next != expected {
            return Err(LoynesError::StationarityViolation {
                shift: (k + 1) % p,
                expected: next.to_string(),
                found: expected.to_string(),
            });
        }
    }
    Ok(())
}

/// Shifts at which the stationary buffer is empty.
pub fn construction_points(solution: &StationarySolution) -> Result<Vec<usize>, LoynesError> {
    let points: Vec<usize> = (0..solution.period())
        .filter(|&k| solution.values[k].is_empty())
        .collect();
    if points.is_empty() {
        Err(LoynesError::NoConstructionPoints)
    } else {
        Ok(points)
    }
}

/// Buffers at time `j` reached from an empty start at `j - m`, over all
/// `m ≥ 0`. `None` once one of them exceeds `limit` letters per side.
fn reachable_starts(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    j: i64,
    limit: usize,
) -> Option<HashSet<BufferDetail>> {
    let p = sample.period();
    let mut all = HashSet::new();
    for rem in 0..p {
        let mut x = advance(structure, kind, sample, j - rem as i64, rem, &BufferDetail::empty());
        loop {
            if x.customers.len() > limit || x.servers.len() > limit {
                return None;
            }
            if !all.insert(x.clone()) {
                break;
            }
            x = advance(structure, kind, sample, j, p, &x);
        }
    }
    Some(all)
}

/// Exact evaluation of the renovation event on the finite sample space: at
/// every shift, for every backward start, some `l ≤ window` (in steps) must
/// empty both the run started at the shift and the run started earlier, and
/// be followed by the concatenated erasing block.
pub fn check_renovation(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    erasing: &[ErasingCouple],
    window: usize,
) -> bool {
    let block_c: Vec<Customer> = erasing.iter().flat_map(|e| e.customers.letters().to_vec()).collect();
    let block_s: Vec<Server> = erasing.iter().flat_map(|e| e.servers.letters().to_vec()).collect();
    if block_c.len() != block_s.len() {
        return false;
    }
    let block_at = |t: i64| {
        block_c.iter().zip(&block_s).enumerate().all(|(i, (&c, &s))| {
            let e = sample.event(t + i as i64);
            e.customer == c && e.server == s
        })
    };
    (0..sample.period() as i64).into_par_iter().all(|j| {
        let Some(starts) = reachable_starts(structure, kind, sample, j, window) else {
            return false;
        };
        let fresh = empty_times(structure, kind, sample, j, &BufferDetail::empty(), window);
        starts.iter().all(|x| {
            let other = empty_times(structure, kind, sample, j, x, window);
            (0..=window).any(|l| fresh[l] && other[l] && block_at(j + l as i64))
        })
    })
}

fn empty_times(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    from: i64,
    start: &BufferDetail,
    window: usize,
) -> Vec<bool> {
    let mut b = Buffer::from_detail(start);
    let mut out = Vec::with_capacity(window + 1);
    out.push(b.is_empty());
    for l in 0..window as i64 {
        b.feed(structure, kind, sample.event(from + l));
        out.push(b.is_empty());
    }
    out
}

/// A matched couple of the bi-infinite matching, by arrival time.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct TimedMatch {
    pub customer_time: i64,
    pub customer: Customer,
    pub server_time: i64,
    pub server: Server,
}

impl fmt::Display for TimedMatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}) -- ({}, {})",
            self.customer_time, self.customer, self.server_time, self.server
        )
    }
}

/// One period of a periodic matching; translates by the period give the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct PeriodicMatching {
    pub period: usize,
    pub matches: Vec<TimedMatch>,
}

impl PeriodicMatching {
    /// The representatives whose customer arrived in `[start, start + p)`,
    /// sorted by customer time.
    pub fn in_window(&self, start: i64) -> Vec<TimedMatch> {
        let p = self.period as i64;
        let mut out: Vec<TimedMatch> = self
            .matches
            .iter()
            .map(|m| {
                let shift = (m.customer_time - start).div_euclid(p) * p;
                TimedMatch {
                    customer_time: m.customer_time - shift,
                    server_time: m.server_time - shift,
                    ..*m
                }
            })
            .collect();
        out.sort();
        out
    }

    /// Every residue mod `p` appears exactly once as a customer time and once
    /// as a server time.
    pub fn is_partition(&self) -> bool {
        let p = self.period as i64;
        let mut cs = vec![0usize; self.period];
        let mut ss = vec![0usize; self.period];
        for m in &self.matches {
            cs[m.customer_time.rem_euclid(p) as usize] += 1;
            ss[m.server_time.rem_euclid(p) as usize] += 1;
        }
        cs.iter().chain(&ss).all(|&n| n == 1)
    }

    pub fn lines(&self) -> Vec<String> {
        self.matches.iter().map(ToString::to_string).collect()
    }
}

/// Runs the engine from empty between consecutive construction points,
/// wrapping once around the period.
pub fn biinfinite_matching(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    solution: &StationarySolution,
) -> Result<PeriodicMatching, LoynesError> {
    let p = sample.period();
    if solution.period() != p {
        return Err(LoynesError::PeriodMismatch {
            got: solution.period(),
            expected: p,
        });
    }
    let points = construction_points(solution)?;
    let mut matches = Vec::with_capacity(p);
    for (i, &start) in points.iter().enumerate() {
        let end = points.get(i + 1).copied().unwrap_or(points[0] + p);
        let input = sample.window(start as i64, end - start);
        let trace = run(structure, kind, &BufferDetail::empty(), &input)?;
        if !trace.is_perfect() {
            return Err(LoynesError::ImperfectSegment { start, end });
        }
        matches.extend(trace.matches.iter().map(|m| TimedMatch {
            customer_time: (start + m.customer_index) as i64,
            customer: m.customer,
            server_time: (start + m.server_index) as i64,
            server: m.server,
        }));
    }
    matches.sort();
    Ok(PeriodicMatching { period: p, matches })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ForwardCoupling {
    /// First time the trajectory equals the stationary one.
    Coupled(usize),
    Censored,
}

/// Runs forward from `initial` at time 0 and reports when the trajectory
/// meets the stationary values, confirmed over one further period.
pub fn forward_coupling_check(
    structure: &MatchingStructure,
    kind: PolicyKind,
    sample: &PeriodicSample,
    solution: &StationarySolution,
    initial: &BufferDetail,
    max_steps: usize,
) -> Result<ForwardCoupling, LoynesError> {
    let initial = validate_buffer(structure, initial.customers.clone(), initial.servers.clone())?;
    let p = sample.period();
    if solution.period() != p {
        return Err(LoynesError::PeriodMismatch {
            got: solution.period(),
            expected: p,
        });
    }
    let mut x = initial;
    for t in 0..=max_steps {
        if &x == solution.at(t as i64) {
            let mut y = x.clone();
            let stays = (t..t + p).all(|u| {
                y = advance(structure, kind, sample, u as i64, 1, &y);
                &y == solution.at(u as i64 + 1)
            });
            if stays {
                return Ok(ForwardCoupling::Coupled(t));
            }
        }
        x = advance(structure, kind, sample, t as i64, 1, &x);
    }
    Ok(ForwardCoupling::Censored)
}
