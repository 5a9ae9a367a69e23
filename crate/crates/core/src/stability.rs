//! Arrival distributions, the load conditions `Ncond` and `Scond`, the
//! bi-separable conditions, and Monte-Carlo estimates of the first return
//! time to the empty state under IID input.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::model::{
    associated_digraph, check_bi_separable, detect_model_kind, enumerate_independent_sets, is_strongly_connected,
    BiSeparablePartition, Customer, IndependentSet, MatchingStructure, ModelError, ModelKind, Server,
};
use crate::policy::{apply_pair, Policy, PolicyKind, PreferenceMode};
use crate::state::{check_letters, BufferDetail};

/// Classes per side beyond which subset enumeration is refused.
pub const SUBSET_CAP: usize = 24;

/// Witnesses kept per report; the total count is always exact.
const KEPT_WITNESSES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StabilityError {
    #[error("weights must sum to 1 (they sum to {0})")]
    NotNormalized(String),
    #[error("weight on ({0}, {1}) which is not in F")]
    NotInF(Customer, Server),
    #[error("no weight on the F-edge ({0}, {1})")]
    MissingSupport(Customer, Server),
    #[error("weight {2} on ({0}, {1}) is not positive")]
    NonPositive(Customer, Server, String),
    #[error("duplicate weight on ({0}, {1})")]
    Duplicate(Customer, Server),
    #[error("decimal weight {0:?}; write it as a fraction p/q")]
    DecimalWeight(String),
    #[error("cannot parse {0:?} as a rational number")]
    BadRational(String),
    #[error("{classes} classes on one side exceed the enumeration cap {cap}")]
    TooLarge { classes: usize, cap: usize },
    #[error("weights need a common denominator larger than 2^64")]
    WeightOverflow,
    #[error("IID simulation cannot use supplied preference profiles")]
    SuppliedPreferences,
    #[error("initial buffer {0} has unequal numbers of customers and servers")]
    Unbalanced(String),
    #[error(transparent)]
    InitialBuffer(#[from] crate::state::StateError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Parses `p/q` or an integer; decimals are rejected.
pub fn parse_rational(text: &str) -> Result<BigRational, StabilityError> {
    let t = text.trim();
    if t.contains(['.', 'e', 'E']) {
        return Err(StabilityError::DecimalWeight(t.to_string()));
    }
    let bad = || StabilityError::BadRational(t.to_string());
    let (n, d) = match t.split_once('/') {
        Some((n, d)) => (n.trim(), d.trim()),
        None => (t, "1"),
    };
    let n: BigInt = n.parse().map_err(|_| bad())?;
    let d: BigInt = d.parse().map_err(|_| bad())?;
    if d.is_zero() {
        return Err(bad());
    }
    Ok(BigRational::new(n, d))
}

/// `μ`: a probability on `F` with full support, in exact rationals.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArrivalDistribution {
    weights: BTreeMap<(Customer, Server), BigRational>,
    customer_marginal: Vec<BigRational>,
    server_marginal: Vec<BigRational>,
}

impl ArrivalDistribution {
    pub fn new(
        structure: &MatchingStructure,
        weights: impl IntoIterator<Item = ((Customer, Server), BigRational)>,
    ) -> Result<Self, StabilityError> {
        let mut map = BTreeMap::new();
        for ((c, s), w) in weights {
            if !structure.contains_customer(c) || !structure.contains_server(s) || !structure.is_arrival(c, s) {
                return Err(StabilityError::NotInF(c, s));
            }
            if !w.is_positive() {
                return Err(StabilityError::NonPositive(c, s, w.to_string()));
            }
            if map.insert((c, s), w).is_some() {
                return Err(StabilityError::Duplicate(c, s));
            }
        }
        if let Some((c, s)) = structure.arrival_edges().into_iter().find(|e| !map.contains_key(e)) {
            return Err(StabilityError::MissingSupport(c, s));
        }
        let total: BigRational = map.values().sum();
        if !total.is_one() {
            return Err(StabilityError::NotNormalized(total.to_string()));
        }
        let mut customer_marginal = vec![BigRational::zero(); structure.customer_count()];
        let mut server_marginal = vec![BigRational::zero(); structure.server_count()];
        for (&(c, s), w) in &map {
            customer_marginal[c.index()] += w;
            server_marginal[s.index()] += w;
        }
        Ok(ArrivalDistribution {
            weights: map,
            customer_marginal,
            server_marginal,
        })
    }

    /// Equal mass on every edge of `F`.
    pub fn uniform(structure: &MatchingStructure) -> Self {
        let edges = structure.arrival_edges();
        let w = BigRational::new(BigInt::one(), BigInt::from(edges.len()));
        Self::new(structure, edges.into_iter().map(|e| (e, w.clone()))).expect("uniform weights are valid")
    }

    /// Relative frequencies of the pairs in a finite (periodic) sample.
    pub fn empirical(structure: &MatchingStructure, pairs: &[(Customer, Server)]) -> Result<Self, StabilityError> {
        let mut counts: BTreeMap<(Customer, Server), usize> = BTreeMap::new();
        for &e in pairs {
            *counts.entry(e).or_default() += 1;
        }
        let n = BigInt::from(pairs.len().max(1));
        Self::new(
            structure,
            counts
                .into_iter()
                .map(|(e, k)| (e, BigRational::new(BigInt::from(k), n.clone()))),
        )
    }

    /// `μ(c, s)`, zero off `F`.
    pub fn weight(&self, c: Customer, s: Server) -> BigRational {
        self.weights.get(&(c, s)).cloned().unwrap_or_else(BigRational::zero)
    }

    pub fn weights(&self) -> impl Iterator<Item = (&(Customer, Server), &BigRational)> {
        self.weights.iter()
    }

    pub fn customer_marginal(&self) -> &[BigRational] {
        &self.customer_marginal
    }

    pub fn server_marginal(&self) -> &[BigRational] {
        &self.server_marginal
    }

    /// `μ_C(A)`.
    pub fn customer_mass(&self, set: &[Customer]) -> BigRational {
        set.iter().map(|c| &self.customer_marginal[c.index()]).sum()
    }

    /// `μ_S(B)`.
    pub fn server_mass(&self, set: &[Server]) -> BigRational {
        set.iter().map(|s| &self.server_marginal[s.index()]).sum()
    }

    /// `μ(A × B)`.
    pub fn rectangle_mass(&self, a: &[Customer], b: &[Server]) -> BigRational {
        self.weights
            .iter()
            .filter(|((c, s), _)| a.contains(c) && b.contains(s))
            .map(|(_, w)| w)
            .sum()
    }
}

impl fmt::Display for ArrivalDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .weights
            .iter()
            .map(|((c, s), w)| format!("({c},{s})={w}"))
            .collect();
        f.write_str(&parts.join(" "))
    }
}

/// What made a condition fail.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum Witness {
    Customers(Vec<Customer>),
    Servers(Vec<Server>),
    IndependentSet(IndependentSet),
    /// A part of a bi-separable partition, by 1-based position.
    Part { index: usize, set: IndependentSet },
}

impl fmt::Display for Witness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn list<T: fmt::Display>(items: &[T]) -> String {
            items.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
        }
        match self {
            Witness::Customers(a) => write!(f, "A={{{}}}", list(a)),
            Witness::Servers(b) => write!(f, "B={{{}}}", list(b)),
            Witness::IndependentSet(i) => write!(f, "I={i}"),
            Witness::Part { index, set } => write!(f, "part {index} {set}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ConditionReport {
    pub holds: bool,
    pub violation_count: usize,
    /// The first violations in enumeration order.
    pub witnesses: Vec<Witness>,
}

impl ConditionReport {
    fn from_violations(count: usize, witnesses: Vec<Witness>) -> Self {
        ConditionReport {
            holds: count == 0,
            violation_count: count,
            witnesses,
        }
    }

    pub fn witness(&self) -> Option<&Witness> {
        self.witnesses.first()
    }
}

fn members<T>(mask: u64, make: impl Fn(usize) -> T, n: usize) -> Vec<T> {
    (0..n).filter(|i| mask >> i & 1 == 1).map(make).collect()
}

/// `μ_C(A) < μ_S(S(A))` for all proper non-empty `A`, and the same for servers.
pub fn check_ncond(structure: &MatchingStructure, mu: &ArrivalDistribution) -> Result<ConditionReport, StabilityError> {
    let (nc, ns) = (structure.customer_count(), structure.server_count());
    for n in [nc, ns] {
        if n > SUBSET_CAP {
            return Err(StabilityError::TooLarge {
                classes: n,
                cap: SUBSET_CAP,
            });
        }
    }
    let mut count = 0;
    let mut witnesses = Vec::new();
    for mask in 1..(1u64 << nc) - 1 {
        let a = members(mask, Customer::from_index, nc);
        if mu.customer_mass(&a) >= mu.server_mass(&structure.servers_of_set(&a)) {
            count += 1;
            if witnesses.len() < KEPT_WITNESSES {
                witnesses.push(Witness::Customers(a));
            }
        }
    }
    for mask in 1..(1u64 << ns) - 1 {
        let b = members(mask, Server::from_index, ns);
        if mu.server_mass(&b) >= mu.customer_mass(&structure.customers_of_set(&b)) {
            count += 1;
            if witnesses.len() < KEPT_WITNESSES {
                witnesses.push(Witness::Servers(b));
            }
        }
    }
    Ok(ConditionReport::from_violations(count, witnesses))
}

/// Whether `I` satisfies the `Scond` inequality.
pub fn scond_holds_for(structure: &MatchingStructure, mu: &ArrivalDistribution, set: &IndependentSet) -> bool {
    let lhs = mu.customer_mass(&structure.customers_of_set(&set.servers))
        + mu.server_mass(&structure.servers_of_set(&set.customers));
    let inner: BigRational = mu
        .weights()
        .filter(|((c, s), _)| {
            structure.is_matchable(*c, *s)
                && set.unreached_customers.contains(c)
                && set.unreached_servers.contains(s)
        })
        .map(|(_, w)| w)
        .sum();
    lhs > BigRational::one() - inner
}

/// `Scond` over every independent set with `A` and `B` both non-empty; all
/// violators are counted. A one-sided set always gives equality (both sides
/// equal 1), so it is not a meaningful constraint.
pub fn check_scond(structure: &MatchingStructure, mu: &ArrivalDistribution) -> Result<ConditionReport, StabilityError> {
    let sets = enumerate_independent_sets(structure)?;
    let failing: Vec<IndependentSet> = sets
        .into_iter()
        .filter(|i| !i.is_one_sided() && !scond_holds_for(structure, mu, i))
        .collect();
    let count = failing.len();
    Ok(ConditionReport::from_violations(
        count,
        failing
            .into_iter()
            .take(KEPT_WITNESSES)
            .map(Witness::IndependentSet)
            .collect(),
    ))
}

fn per_part(
    partition: &BiSeparablePartition,
    fails: impl Fn(&IndependentSet) -> bool,
) -> ConditionReport {
    let failing: Vec<Witness> = partition
        .parts
        .iter()
        .enumerate()
        .filter(|(_, part)| fails(part))
        .map(|(i, part)| Witness::Part {
            index: i + 1,
            set: part.clone(),
        })
        .collect();
    ConditionReport::from_violations(failing.len(), failing)
}

/// `μ(A_i × B_i) < 1/2` for every part.
pub fn check_biseparable_cond(partition: &BiSeparablePartition, mu: &ArrivalDistribution) -> ConditionReport {
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    per_part(partition, |p| mu.rectangle_mass(&p.customers, &p.servers) >= half)
}

/// `μ(A_i × B_i) < μ(C(B_i) × S(A_i))` for every two-sided part; one-sided
/// parts satisfy it trivially.
pub fn check_scondmonotone(
    structure: &MatchingStructure,
    partition: &BiSeparablePartition,
    mu: &ArrivalDistribution,
) -> ConditionReport {
    per_part(partition, |p| {
        !p.is_one_sided()
            && mu.rectangle_mass(&p.customers, &p.servers)
            >= mu.rectangle_mass(
                &structure.customers_of_set(&p.servers),
                &structure.servers_of_set(&p.customers),
            )
    })
}

/// Monte-Carlo summary of `τ₁`, the first time `n ≥ 1` the buffer is empty.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Tau1Estimate {
    pub runs: usize,
    pub horizon: u64,
    pub completed: usize,
    pub censored: usize,
    pub censored_fraction: f64,
    /// Mean over completed runs.
    pub mean_completed: Option<f64>,
    /// Mean with censored runs counted as `horizon`.
    pub mean_lower_bound: f64,
    /// Quantiles over all runs; `None` when they fall among censored runs.
    pub median: Option<u64>,
    pub p90: Option<u64>,
    pub p99: Option<u64>,
    pub max_completed: Option<u64>,
    /// Per-run results in run order.
    pub samples: Vec<Option<u64>>,
}

struct Sampler {
    edges: Vec<(Customer, Server)>,
    index: WeightedIndex<u64>,
}

impl Sampler {
    fn new(mu: &ArrivalDistribution) -> Result<Self, StabilityError> {
        let lcm = mu
            .weights()
            .fold(BigInt::one(), |acc, (_, w)| num_integer_lcm(&acc, w.denom()));
        let mut edges = Vec::new();
        let mut ints = Vec::new();
        for (&e, w) in mu.weights() {
            let scaled = w.numer() * (&lcm / w.denom());
            ints.push(scaled.to_u64().ok_or(StabilityError::WeightOverflow)?);
            edges.push(e);
        }
        let index = WeightedIndex::new(ints).map_err(|_| StabilityError::WeightOverflow)?;
        Ok(Sampler { edges, index })
    }
}

fn num_integer_lcm(a: &BigInt, b: &BigInt) -> BigInt {
    let g = gcd(a.clone(), b.clone());
    a / &g * b
}

fn gcd(mut a: BigInt, mut b: BigInt) -> BigInt {
    while !b.is_zero() {
        let r = &a % &b;
        a = b;
        b = r;
    }
    a.abs()
}

/// Simulates `runs` IID trajectories from `initial`. Run `r` uses the
/// ChaCha8 stream `r` of `seed`, so results do not depend on scheduling.
pub fn estimate_tau1(
    structure: &MatchingStructure,
    policy: &Policy,
    mu: &ArrivalDistribution,
    initial: &BufferDetail,
    runs: usize,
    horizon: u64,
    seed: u64,
) -> Result<Tau1Estimate, StabilityError> {
    if policy.preferences == PreferenceMode::Supplied {
        return Err(StabilityError::SuppliedPreferences);
    }
    check_letters(structure, &initial.customers, &initial.servers)?;
    if initial.customers.len() != initial.servers.len() {
        return Err(StabilityError::Unbalanced(initial.to_string()));
    }
    let sampler = Sampler::new(mu)?;
    let samples: Vec<Option<u64>> = (0..runs)
        .into_par_iter()
        .map(|run| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(run as u64);
            let mut w = initial.customers.letters().to_vec();
            let mut z = initial.servers.letters().to_vec();
            for n in 1..=horizon {
                let (c, s) = sampler.edges[sampler.index.sample(&mut rng)];
                let profile = policy.draw_profile(structure, &mut rng).expect("profiles are drawn");
                apply_pair(structure, policy.kind, &mut w, &mut z, c, s, &profile);
                if w.is_empty() && z.is_empty() {
                    return Some(n);
                }
            }
            None
        })
        .collect();
    Ok(summarize(samples, horizon))
}

fn summarize(samples: Vec<Option<u64>>, horizon: u64) -> Tau1Estimate {
    let runs = samples.len();
    let mut done: Vec<u64> = samples.iter().flatten().copied().collect();
    done.sort_unstable();
    let completed = done.len();
    let censored = runs - completed;
    let quantile = |q: f64| -> Option<u64> {
        if runs == 0 {
            return None;
        }
        let rank = ((q * runs as f64).ceil() as usize).clamp(1, runs);
        done.get(rank - 1).copied()
    };
    let total: f64 = done.iter().map(|&x| x as f64).sum();
    Tau1Estimate {
        runs,
        horizon,
        completed,
        censored,
        censored_fraction: if runs == 0 { 0.0 } else { censored as f64 / runs as f64 },
        mean_completed: (completed > 0).then(|| total / completed as f64),
        mean_lower_bound: if runs == 0 {
            0.0
        } else {
            (total + censored as f64 * horizon as f64) / runs as f64
        },
        median: quantile(0.5),
        p90: quantile(0.9),
        p99: quantile(0.99),
        max_completed: done.last().copied(),
        samples,
    }
}

/// One sufficient case for integrability of `τ₁`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct H2Case {
    pub number: u8,
    pub description: &'static str,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct H2Report {
    pub policy: PolicyKind,
    pub model_kind: ModelKind,
    pub strongly_connected: bool,
    pub bi_separable: bool,
    /// `None` when the structure is too large to enumerate.
    pub ncond: Option<bool>,
    pub scond: Option<bool>,
    pub scondmonotone: Option<bool>,
    pub cases: Vec<H2Case>,
}

impl H2Report {
    /// The first case that holds.
    pub fn certificate(&self) -> Option<u8> {
        self.cases.iter().find(|c| c.holds).map(|c| c.number)
    }
}

impl fmt::Display for H2Report {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.certificate() {
            Some(n) => write!(f, "certified via case {n}"),
            None => f.write_str("inconclusive"),
        }
    }
}

/// Evaluates the six sufficient cases. Cases 4 to 6 come from results that
/// assume `Ncond`, so it is required there as well.
pub fn h2_advisor(structure: &MatchingStructure, kind: PolicyKind, mu: &ArrivalDistribution) -> H2Report {
    let strongly_connected = is_strongly_connected(&associated_digraph(structure));
    let partition = check_bi_separable(structure);
    let ncond = check_ncond(structure, mu).ok().map(|r| r.holds);
    let scond = check_scond(structure, mu).ok().map(|r| r.holds);
    let scondmonotone = partition
        .as_ref()
        .map(|p| check_scondmonotone(structure, p, mu).holds);
    let model_kind = detect_model_kind(structure);
    let n = ncond == Some(true);
    let case = |number, description, holds| H2Case {
        number,
        description,
        holds,
    };
    let cases = vec![
        case(1, "strongly connected and Scond", strongly_connected && scond == Some(true)),
        case(2, "strongly connected, Ncond and ML", strongly_connected && n && kind == PolicyKind::Ml),
        case(
            3,
            "strongly connected, bi-separable and scondmonotone",
            strongly_connected && scondmonotone == Some(true),
        ),
        case(4, "BM model under FCFS (with Ncond)", model_kind == ModelKind::Bm && kind == PolicyKind::Fcfs && n),
        case(5, "GM model under FCFS (with Ncond)", model_kind == ModelKind::Gm && kind == PolicyKind::Fcfs && n),
        case(6, "GM model under ML (with Ncond)", model_kind == ModelKind::Gm && kind == PolicyKind::Ml && n),
    ];
    H2Report {
        policy: kind,
        model_kind,
        strongly_connected,
        bi_separable: partition.is_some(),
        ncond,
        scond,
        scondmonotone,
        cases,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(BigInt::from(n), BigInt::from(d))
    }

    fn e(c: usize, s: usize) -> (Customer, Server) {
        (Customer::from_id(c), Server::from_id(s))
    }

    fn nn() -> MatchingStructure {
        let e = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)];
        let f: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=3).map(move |s| (c, s))).collect();
        MatchingStructure::new(3, 3, &e, &f).unwrap()
    }

    fn nnbis() -> MatchingStructure {
        let e = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)];
        let f = [(1, 2), (2, 1), (2, 3), (3, 2), (3, 1)];
        MatchingStructure::new(3, 3, &e, &f).unwrap()
    }

    fn nnbis_mu(s: &MatchingStructure) -> ArrivalDistribution {
        ArrivalDistribution::new(
            s,
            [
                (e(1, 2), q(1, 3)),
                (e(2, 3), q(1, 3)),
                (e(2, 1), q(1, 9)),
                (e(3, 1), q(1, 9)),
                (e(3, 2), q(1, 9)),
            ],
        )
        .unwrap()
    }

    fn full(nc: usize, ns: usize, edges: &[(usize, usize)]) -> MatchingStructure {
        let f: Vec<(usize, usize)> = (1..=nc).flat_map(|c| (1..=ns).map(move |s| (c, s))).collect();
        MatchingStructure::new(nc, ns, edges, &f).unwrap()
    }

    fn biseparable_corpus() -> Vec<MatchingStructure> {
        let all = |n: usize| (1..=n).flat_map(move |c| (1..=n).map(move |s| (c, s)));
        let third = [
            (1, 4), (1, 3), (2, 4), (2, 3), (3, 1), (3, 2), (3, 3), (3, 4), (4, 2), (4, 1), (5, 2), (5, 1),
        ];
        vec![
            full(3, 2, &[(1, 2), (2, 1), (2, 2), (3, 1)]),
            full(3, 3, &all(3).filter(|(c, s)| c != s).collect::<Vec<_>>()),
            full(5, 4, &third),
            full(4, 4, &all(4).filter(|(c, s)| c != s).collect::<Vec<_>>()),
            full(3, 3, &all(3).filter(|&(c, s)| (c, s) != (1, 1) && (c, s) != (2, 2)).collect::<Vec<_>>()),
        ]
    }

    #[test]
    fn parses_rationals_and_rejects_decimals() {
        assert_eq!(parse_rational(" 2/6 ").unwrap(), q(1, 3));
        assert_eq!(parse_rational("1").unwrap(), q(1, 1));
        assert!(matches!(parse_rational("0.5"), Err(StabilityError::DecimalWeight(_))));
        assert!(matches!(parse_rational("1/0"), Err(StabilityError::BadRational(_))));
        assert!(matches!(parse_rational("x"), Err(StabilityError::BadRational(_))));
    }

    #[test]
    fn distribution_validation() {
        let s = nnbis();
        let m = nnbis_mu(&s);
        assert_eq!(m.customer_marginal(), &[q(1, 3), q(4, 9), q(2, 9)]);
        assert_eq!(m.server_marginal(), &[q(2, 9), q(4, 9), q(1, 3)]);
        let bad = ArrivalDistribution::new(&s, [(e(1, 1), q(1, 1))]);
        assert_eq!(bad, Err(StabilityError::NotInF(Customer::from_id(1), Server::from_id(1))));
        let short = ArrivalDistribution::new(&s, [(e(1, 2), q(1, 1))]);
        assert!(matches!(short, Err(StabilityError::MissingSupport(..))));
        let unnormalized = ArrivalDistribution::new(&s, s.arrival_edges().into_iter().map(|x| (x, q(1, 4))));
        assert_eq!(unnormalized, Err(StabilityError::NotNormalized("5/4".into())));
        let dup = ArrivalDistribution::new(&s, [(e(1, 2), q(1, 2)), (e(1, 2), q(1, 2))]);
        assert!(matches!(dup, Err(StabilityError::Duplicate(..))));
    }

    #[test]
    fn nnbis_satisfies_ncond_but_not_scond() {
        let s = nnbis();
        let m = nnbis_mu(&s);
        assert!(check_ncond(&s, &m).unwrap().holds);
        let scond = check_scond(&s, &m).unwrap();
        assert!(!scond.holds);
        let target = IndependentSet::new(&s, &[Customer::from_id(3)], &[Server::from_id(1)]).unwrap();
        assert!(scond.witnesses.contains(&Witness::IndependentSet(target)));
    }

    #[test]
    fn point_mass_breaks_ncond() {
        let s = MatchingStructure::new(2, 2, &[(1, 1), (2, 1), (2, 2)], &[(1, 1), (1, 2), (2, 2)]).unwrap();
        // μ_C({1}) = 1 is not below μ_S(S(1)) = μ_S({1}) = 1/2
        let m = ArrivalDistribution::new(&s, [(e(1, 1), q(1, 2)), (e(1, 2), q(1, 4)), (e(2, 2), q(1, 4))]).unwrap();
        let r = check_ncond(&s, &m).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witness(), Some(&Witness::Customers(vec![Customer::from_id(1)])));
    }

    #[test]
    fn single_edge_is_vacuous() {
        let s = MatchingStructure::new(1, 1, &[(1, 1)], &[(1, 1)]).unwrap();
        let m = ArrivalDistribution::uniform(&s);
        assert!(check_ncond(&s, &m).unwrap().holds);
    }

    #[test]
    fn complete_graph_satisfies_scond() {
        let all: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=2).map(move |s| (c, s))).collect();
        let s = full(3, 2, &all);
        assert!(check_scond(&s, &ArrivalDistribution::uniform(&s)).unwrap().holds);
    }

    #[test]
    fn separable_graphs_uniform_parts() {
        let s = &biseparable_corpus()[0];
        let p = check_bi_separable(s).unwrap();
        let m = ArrivalDistribution::uniform(s);
        let two_sided: Vec<BigRational> = p
            .parts
            .iter()
            .filter(|x| !x.is_one_sided())
            .map(|x| m.rectangle_mass(&x.customers, &x.servers))
            .collect();
        assert_eq!(two_sided, vec![q(1, 6), q(1, 6)]);
        assert!(check_biseparable_cond(&p, &m).holds);
        assert!(check_scond(s, &m).unwrap().holds);
    }

    #[test]
    fn concentrated_part_fails() {
        let s = &biseparable_corpus()[0];
        let p = check_bi_separable(s).unwrap();
        let (i, part) = p.parts.iter().enumerate().find(|(_, x)| !x.is_one_sided()).unwrap();
        let heavy = (part.customers[0], part.servers[0]);
        let rest = s.arrival_edges().into_iter().filter(|&x| x != heavy).collect::<Vec<_>>();
        let w = q(2, 5) / BigRational::from_integer(BigInt::from(rest.len()));
        let m = ArrivalDistribution::new(s, std::iter::once((heavy, q(3, 5))).chain(rest.into_iter().map(|x| (x, w.clone())))).unwrap();
        let r = check_biseparable_cond(&p, &m);
        assert!(!r.holds);
        assert!(matches!(r.witness(), Some(Witness::Part { index, .. }) if *index == i + 1));
    }

    fn random_mu(s: &MatchingStructure, raw: &[u32]) -> ArrivalDistribution {
        let edges = s.arrival_edges();
        let total: u32 = raw[..edges.len()].iter().sum();
        ArrivalDistribution::new(
            s,
            edges
                .into_iter()
                .zip(raw)
                .map(|(x, &k)| (x, q(k as i64, total as i64))),
        )
        .unwrap()
    }

    #[test]
    fn ncond_scond_and_monotone_agree_on_biseparable_graphs() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut disagreements = 0;
        let mut seen = [0usize; 2];
        for s in biseparable_corpus() {
            let p = check_bi_separable(&s).unwrap();
            for _ in 0..150 {
                let raw: Vec<u32> = (0..24).map(|_| rand::Rng::gen_range(&mut rng, 1..=12)).collect();
                let m = random_mu(&s, &raw);
                let n = check_ncond(&s, &m).unwrap().holds;
                let sc = check_scond(&s, &m).unwrap().holds;
                let mono = check_scondmonotone(&s, &p, &m).holds;
                if !(n == sc && sc == mono) {
                    disagreements += 1;
                }
                seen[n as usize] += 1;
            }
        }
        assert_eq!(disagreements, 0);
        assert!(seen[0] > 0 && seen[1] > 0, "both outcomes exercised: {seen:?}");
    }

    #[test]
    fn half_bound_is_weaker_than_ncond() {
        // both parts carry less than 1/2, yet μ_C(3) = 15/34 exceeds μ_S(S(3)) = μ_S(1̄) = 9/34
        let s = &biseparable_corpus()[0];
        let p = check_bi_separable(s).unwrap();
        let m = ArrivalDistribution::new(
            s,
            [
                (e(1, 1), q(1, 17)),
                (e(1, 2), q(2, 17)),
                (e(2, 1), q(3, 34)),
                (e(2, 2), q(5, 17)),
                (e(3, 1), q(2, 17)),
                (e(3, 2), q(11, 34)),
            ],
        )
        .unwrap();
        assert!(check_biseparable_cond(&p, &m).holds);
        let n = check_ncond(s, &m).unwrap();
        assert!(!n.holds);
        assert!(n.witnesses.contains(&Witness::Customers(vec![Customer::from_id(3)])));
        assert!(!check_scond(s, &m).unwrap().holds);
        assert!(!check_scondmonotone(s, &p, &m).holds);
    }

    proptest! {
        #[test]
        fn scond_implies_ncond(
            edges in proptest::collection::btree_set((1usize..=3, 1usize..=3), 4..=9),
            raw in proptest::collection::vec(1u32..=9, 9),
        ) {
            let edges: Vec<_> = edges.into_iter().collect();
            let all: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=3).map(move |s| (c, s))).collect();
            if let Ok(s) = MatchingStructure::new(3, 3, &edges, &all) {
                let m = random_mu(&s, &raw);
                if check_scond(&s, &m).unwrap().holds {
                    prop_assert!(check_ncond(&s, &m).unwrap().holds);
                }
            }
        }

        #[test]
        fn marginals_sum_to_one(raw in proptest::collection::vec(1u32..=50, 9)) {
            let s = nn();
            let m = random_mu(&s, &raw);
            let c: BigRational = m.customer_marginal().iter().sum();
            let d: BigRational = m.server_marginal().iter().sum();
            prop_assert!(c.is_one() && d.is_one());
        }
    }

    #[test]
    fn self_matching_returns_immediately() {
        let s = full(2, 2, &[(1, 1), (1, 2), (2, 1), (2, 2)]);
        let m = ArrivalDistribution::uniform(&s);
        let est = estimate_tau1(&s, &Policy::fixed(&s, PolicyKind::Fcfs), &m, &BufferDetail::empty(), 50, 100, 1).unwrap();
        assert!(est.samples.iter().all(|x| *x == Some(1)));
        assert_eq!(est.mean_completed, Some(1.0));
    }

    #[test]
    fn tau1_is_reproducible_and_finite_for_nnbis() {
        let s = nnbis();
        let m = nnbis_mu(&s);
        let p = Policy::fixed(&s, PolicyKind::Fcfs);
        let a = estimate_tau1(&s, &p, &m, &BufferDetail::empty(), 400, 10_000, 42).unwrap();
        let b = estimate_tau1(&s, &p, &m, &BufferDetail::empty(), 400, 10_000, 42).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.censored, 0);
        assert!(a.mean_completed.unwrap() < 100.0);
        let uniform = Policy::new(PolicyKind::Ml, PreferenceMode::Uniform);
        assert!(estimate_tau1(&s, &uniform, &m, &BufferDetail::empty(), 50, 10_000, 3).unwrap().censored == 0);
    }

    #[test]
    fn censoring_grows_without_ncond() {
        // customers of class 2 can only be served by s2, which never arrives often enough
        let s = MatchingStructure::new(2, 2, &[(1, 1), (1, 2), (2, 2)], &[(1, 1), (2, 1), (1, 2)]).unwrap();
        let m = ArrivalDistribution::new(&s, [(e(1, 1), q(1, 4)), (e(2, 1), q(1, 2)), (e(1, 2), q(1, 4))]).unwrap();
        assert!(!check_ncond(&s, &m).unwrap().holds);
        let p = Policy::fixed(&s, PolicyKind::Fcfs);
        let short = estimate_tau1(&s, &p, &m, &BufferDetail::empty(), 200, 1_000, 5).unwrap();
        let long = estimate_tau1(&s, &p, &m, &BufferDetail::empty(), 200, 10_000, 5).unwrap();
        assert!(short.censored_fraction > 0.0);
        assert!(long.censored_fraction >= short.censored_fraction);
        assert!(long.mean_lower_bound > short.mean_lower_bound);
    }

    #[test]
    fn supplied_profiles_are_rejected() {
        let s = nnbis();
        let p = Policy::new(PolicyKind::Rand, PreferenceMode::Supplied);
        let r = estimate_tau1(&s, &p, &nnbis_mu(&s), &BufferDetail::empty(), 1, 1, 0);
        assert_eq!(r, Err(StabilityError::SuppliedPreferences));
    }

    // μ_C = (3/8, 1/4, 3/8), μ_S = (1/4, 1/4, 1/2), independent
    fn nn_product(s: &MatchingStructure) -> ArrivalDistribution {
        let mc = [q(3, 8), q(1, 4), q(3, 8)];
        let ms = [q(1, 4), q(1, 4), q(1, 2)];
        ArrivalDistribution::new(
            s,
            s.arrival_edges()
                .into_iter()
                .map(|(c, t)| ((c, t), &mc[c.index()] * &ms[t.index()])),
        )
        .unwrap()
    }

    #[test]
    fn uniform_nn_fails_ncond_at_the_end_classes() {
        let s = nn();
        let r = check_ncond(&s, &ArrivalDistribution::uniform(&s)).unwrap();
        assert!(!r.holds);
        assert_eq!(r.witness(), Some(&Witness::Customers(vec![Customer::from_id(3)])));
    }

    #[test]
    fn advisor_cases() {
        let s = nn();
        let r = h2_advisor(&s, PolicyKind::Fcfs, &nn_product(&s));
        assert_eq!(r.model_kind, ModelKind::Bm);
        assert!(r.cases[3].holds);
        let s = nnbis();
        let r = h2_advisor(&s, PolicyKind::Fcfs, &nnbis_mu(&s));
        assert_eq!(r.certificate(), None);
        assert_eq!(r.to_string(), "inconclusive");
        assert!(r.cases.iter().all(|c| !c.holds));
    }

    #[test]
    fn advisor_case_one_on_strongly_connected_structure() {
        let all: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=2).map(move |s| (c, s))).collect();
        let s = full(3, 2, &all);
        let m = ArrivalDistribution::uniform(&s);
        assert!(check_scond(&s, &m).unwrap().holds);
        let r = h2_advisor(&s, PolicyKind::Lcfs, &m);
        assert!(r.strongly_connected);
        assert_eq!(r.certificate(), Some(1));
    }

    #[test]
    fn gm_cases() {
        let s = MatchingStructure::general_matching(3, &[(1, 2), (2, 3), (1, 3)]).unwrap();
        let m = ArrivalDistribution::uniform(&s);
        let r = h2_advisor(&s, PolicyKind::Ml, &m);
        assert_eq!(r.model_kind, ModelKind::Gm);
        assert!(r.cases[5].holds);
    }
}
