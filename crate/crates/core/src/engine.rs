//! Batch matching of finite inputs with full traces.
//!
//! Arrival indices are zero-based and absolute: items of the initial buffer
//! come first, in buffer order, then the input in arrival order. Customers and
//! servers are indexed separately.

use std::fmt::Write as _;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::model::{Customer, MatchingStructure, Server};
use crate::policy::{
    apply_customer_alone, apply_pair, apply_server_alone, check_arrival, PolicyError, PolicyKind, Tagged,
};
use crate::state::{validate_buffer, ArrivalQuadruple, BufferDetail, CustomerWord, PreferenceProfile, ServerWord, StateError, Word};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("invalid initial buffer: {0}")]
    InitialBuffer(#[from] StateError),
    #[error("{got} preference profiles supplied, {expected} needed")]
    ProfileLengthMismatch { got: usize, expected: usize },
}

/// One matched couple, by class and absolute arrival index.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Match {
    pub customer: Customer,
    pub customer_index: usize,
    pub server: Server,
    pub server_index: usize,
    /// Step at which the match happened.
    pub step: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum StepKind {
    Pair,
    CustomerAlone,
    ServerAlone,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct StepRecord {
    pub kind: StepKind,
    /// Buffer after the step.
    pub buffer: BufferDetail,
    pub together: bool,
    pub buffer_first_override: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct MatchingTrace {
    pub policy: PolicyKind,
    pub initial: BufferDetail,
    pub matches: Vec<Match>,
    pub final_customers: Vec<Tagged<Customer>>,
    pub final_servers: Vec<Tagged<Server>>,
    pub steps: Vec<StepRecord>,
}

impl MatchingTrace {
    fn new(policy: PolicyKind, initial: BufferDetail) -> Self {
        MatchingTrace {
            policy,
            initial,
            matches: Vec::new(),
            final_customers: Vec::new(),
            final_servers: Vec::new(),
            steps: Vec::new(),
        }
    }

    /// `Q_φ = (C_φ, S_φ)`.
    pub fn final_buffer(&self) -> BufferDetail {
        BufferDetail {
            customers: Word::new(self.final_customers.iter().map(|t| t.class).collect()),
            servers: Word::new(self.final_servers.iter().map(|t| t.class).collect()),
        }
    }

    pub fn unmatched_customers(&self) -> CustomerWord {
        self.final_buffer().customers
    }

    pub fn unmatched_servers(&self) -> ServerWord {
        self.final_buffer().servers
    }

    pub fn is_perfect(&self) -> bool {
        self.final_customers.is_empty() && self.final_servers.is_empty()
    }

    /// Number of steps where a compatible incoming pair was split up because
    /// a buffered partner was found.
    pub fn buffer_first_overrides(&self) -> usize {
        self.steps.iter().filter(|s| s.buffer_first_override).count()
    }

    /// Line-oriented export: one `match` line per couple formed at a step,
    /// then the buffer after that step.
    pub fn export_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "t- buffer {}", self.initial);
        let mut k = 0;
        for (idx, step) in self.steps.iter().enumerate() {
            while k < self.matches.len() && self.matches[k].step == idx {
                let m = &self.matches[k];
                let _ = writeln!(
                    out,
                    "t{idx} match {}@{} {}@{}",
                    m.customer, m.customer_index, m.server, m.server_index
                );
                k += 1;
            }
            let _ = writeln!(out, "t{idx} buffer {}", step.buffer);
        }
        out
    }
}

pub fn is_perfect(trace: &MatchingTrace) -> bool {
    trace.is_perfect()
}

struct Runner<'a> {
    structure: &'a MatchingStructure,
    kind: PolicyKind,
    w: Vec<Tagged<Customer>>,
    z: Vec<Tagged<Server>>,
    next_customer: usize,
    next_server: usize,
    trace: MatchingTrace,
}

impl<'a> Runner<'a> {
    fn start(structure: &'a MatchingStructure, kind: PolicyKind, initial: &BufferDetail) -> Result<Self, EngineError> {
        let initial = validate_buffer(structure, initial.customers.clone(), initial.servers.clone())?;
        let w: Vec<_> = initial
            .customers
            .letters()
            .iter()
            .enumerate()
            .map(|(index, &class)| Tagged { class, index })
            .collect();
        let z: Vec<_> = initial
            .servers
            .letters()
            .iter()
            .enumerate()
            .map(|(index, &class)| Tagged { class, index })
            .collect();
        Ok(Runner {
            structure,
            kind,
            next_customer: w.len(),
            next_server: z.len(),
            w,
            z,
            trace: MatchingTrace::new(kind, initial),
        })
    }

    fn customer(&mut self, class: Customer) -> Tagged<Customer> {
        self.next_customer += 1;
        Tagged {
            class,
            index: self.next_customer - 1,
        }
    }

    fn server(&mut self, class: Server) -> Tagged<Server> {
        self.next_server += 1;
        Tagged {
            class,
            index: self.next_server - 1,
        }
    }

    fn record(&mut self, c: Tagged<Customer>, s: Tagged<Server>) {
        debug_assert!(self.structure.is_matchable(c.class, s.class));
        self.trace.matches.push(Match {
            customer: c.class,
            customer_index: c.index,
            server: s.class,
            server_index: s.index,
            step: self.trace.steps.len(),
        });
    }

    fn snapshot(&self, kind: StepKind, together: bool, buffer_first_override: bool) -> StepRecord {
        StepRecord {
            kind,
            buffer: BufferDetail {
                customers: Word::new(self.w.iter().map(|t| t.class).collect()),
                servers: Word::new(self.z.iter().map(|t| t.class).collect()),
            },
            together,
            buffer_first_override,
        }
    }

    fn pair(&mut self, c: Customer, s: Server, profile: &PreferenceProfile) {
        let (tc, ts) = (self.customer(c), self.server(s));
        let out = apply_pair(self.structure, self.kind, &mut self.w, &mut self.z, tc, ts, profile);
        if let Some(partner) = out.customer_partner {
            self.record(tc, partner);
        }
        if let Some(partner) = out.server_partner {
            self.record(partner, ts);
        }
        if out.together {
            self.record(tc, ts);
        }
        let snap = self.snapshot(StepKind::Pair, out.together, out.buffer_first_override);
        self.trace.steps.push(snap);
    }

    fn lone_customer(&mut self, c: Customer, profile: &PreferenceProfile) {
        let tc = self.customer(c);
        if let Some(partner) = apply_customer_alone(self.structure, self.kind, &mut self.w, &mut self.z, tc, profile) {
            self.record(tc, partner);
        }
        let snap = self.snapshot(StepKind::CustomerAlone, false, false);
        self.trace.steps.push(snap);
    }

    fn lone_server(&mut self, s: Server, profile: &PreferenceProfile) {
        let ts = self.server(s);
        if let Some(partner) = apply_server_alone(self.structure, self.kind, &mut self.w, &mut self.z, ts, profile) {
            self.record(partner, ts);
        }
        let snap = self.snapshot(StepKind::ServerAlone, false, false);
        self.trace.steps.push(snap);
    }

    fn finish(mut self) -> MatchingTrace {
        self.trace.final_customers = self.w;
        self.trace.final_servers = self.z;
        self.trace
    }
}

/// Folds the one-step map over `input`, starting from `initial`.
pub fn run(
    structure: &MatchingStructure,
    kind: PolicyKind,
    initial: &BufferDetail,
    input: &[ArrivalQuadruple],
) -> Result<MatchingTrace, EngineError> {
    let mut runner = Runner::start(structure, kind, initial)?;
    for a in input {
        check_arrival(structure, a)?;
        runner.pair(a.customer, a.server, &a.profile);
    }
    Ok(runner.finish())
}

/// Matches the word pair `(c, s)` from an empty buffer. The surplus letters of
/// the longer word enter alone first, then the rest arrive as pairs. Pairs
/// need not lie in `F`. `profiles` has one entry per step (the longer length),
/// or a single entry used for every step.
pub fn match_words(
    structure: &MatchingStructure,
    kind: PolicyKind,
    customers: &CustomerWord,
    servers: &ServerWord,
    profiles: &[Arc<PreferenceProfile>],
) -> Result<MatchingTrace, EngineError> {
    match_words_from(structure, kind, &BufferDetail::empty(), customers, servers, profiles)
}

/// As [`match_words`], starting from a buffer.
pub fn match_words_from(
    structure: &MatchingStructure,
    kind: PolicyKind,
    initial: &BufferDetail,
    customers: &CustomerWord,
    servers: &ServerWord,
    profiles: &[Arc<PreferenceProfile>],
) -> Result<MatchingTrace, EngineError> {
    crate::state::check_letters(structure, customers, servers)?;
    let steps = customers.len().max(servers.len());
    if profiles.len() != steps && profiles.len() != 1 && steps > 0 {
        return Err(EngineError::ProfileLengthMismatch {
            got: profiles.len(),
            expected: steps,
        });
    }
    let profile = |k: usize| if profiles.len() == 1 { &profiles[0] } else { &profiles[k] };
    let mut runner = Runner::start(structure, kind, initial)?;
    let (cs, ss) = (customers.letters(), servers.letters());
    let extra_c = cs.len().saturating_sub(ss.len());
    let extra_s = ss.len().saturating_sub(cs.len());
    for (k, &c) in cs[..extra_c].iter().enumerate() {
        runner.lone_customer(c, profile(k));
    }
    for (k, &s) in ss[..extra_s].iter().enumerate() {
        runner.lone_server(s, profile(k));
    }
    let offset = extra_c + extra_s;
    for (k, (&c, &s)) in cs[extra_c..].iter().zip(&ss[extra_s..]).enumerate() {
        runner.pair(c, s, profile(offset + k));
    }
    Ok(runner.finish())
}

/// Final buffer only, without recording a trace.
pub fn residual(
    structure: &MatchingStructure,
    kind: PolicyKind,
    initial: &BufferDetail,
    input: &[ArrivalQuadruple],
) -> Result<BufferDetail, EngineError> {
    let mut w = initial.customers.letters().to_vec();
    let mut z = initial.servers.letters().to_vec();
    for a in input {
        check_arrival(structure, a)?;
        apply_pair(structure, kind, &mut w, &mut z, a.customer, a.server, &a.profile);
    }
    Ok(BufferDetail {
        customers: Word::new(w),
        servers: Word::new(z),
    })
}

/// Pairs `(c_k, s_k)` with one shared profile.
pub fn pairs_with_profile(
    customers: &CustomerWord,
    servers: &ServerWord,
    profile: Arc<PreferenceProfile>,
) -> Vec<ArrivalQuadruple> {
    customers
        .letters()
        .iter()
        .zip(servers.letters())
        .map(|(&c, &s)| ArrivalQuadruple::new(c, s, profile.clone()))
        .collect()
}
