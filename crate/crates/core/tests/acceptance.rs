//! Acceptance criteria. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::{HashSet, VecDeque};
use std::panic::{self, AssertUnwindSafe};
use std::sync::Arc;
use std::time::{Duration, Instant};

use ebm_core::analysis::{
    check_nonexpansive, check_subadditive, evaluate_split, find_consistency_violation, strong_couple_report,
    verify_strong_erasing_couple, Piece, PreferenceSet, Side, DEFAULT_STEP_BUDGET,
};
use ebm_core::engine;
use ebm_core::loynes::{
    backward_coupling, biinfinite_matching, construction_points, forward_coupling_check, ForwardCoupling,
    PeriodicSample, DEFAULT_MAX_BACKSTEPS,
};
use ebm_core::model::{associated_digraph, check_bi_separable, is_strongly_connected, IndependentSet};
use ebm_core::policy::ClassRule;
use ebm_core::stability::{check_biseparable_cond, check_ncond, check_scond, ArrivalDistribution, Witness};
use ebm_core::state::validate_buffer;
use ebm_core::{
    ArrivalQuadruple, BufferDetail, Customer, CustomerWord, MatchingStructure, PolicyKind, PreferenceProfile, Server,
    ServerWord, Word,
};
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Wall-clock limits per criterion.
const LIMIT_EXAMPLE: Duration = Duration::from_secs(1);
const LIMIT_SUBADDITIVE: Duration = Duration::from_secs(300);
const LIMIT_EQUIVALENCE: Duration = Duration::from_secs(60);
const LIMIT_CONNECTIVITY: Duration = Duration::from_secs(10);

// Random instances.
const EQUIVALENCE_SEED: u64 = 61;
const EQUIVALENCE_INSTANCES: usize = 100;
const MAX_RAW_WEIGHT: u32 = 20;
const CONNECTIVITY_SEED: u64 = 21;
const CONNECTIVITY_INSTANCES: usize = 50;

/// Largest first coupling time over the initial-condition sweep, in steps.
const MAX_FORWARD_COUPLING: usize = 15;

type Criterion = (u8, &'static str, fn() -> Verdict);

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn within(limit: Duration, start: Instant) -> (bool, String) {
    let t = start.elapsed();
    (t < limit, format!("{:.3}s (limit {}s)", t.as_secs_f64(), limit.as_secs()))
}

fn w(text: &str) -> CustomerWord {
    text.parse().unwrap()
}

fn z(text: &str) -> ServerWord {
    text.parse().unwrap()
}

fn buffer(text: &str) -> BufferDetail {
    BufferDetail::parse(text).unwrap()
}

fn all_pairs(nc: usize, ns: usize) -> Vec<(usize, usize)> {
    (1..=nc).flat_map(|c| (1..=ns).map(move |s| (c, s))).collect()
}

const NN_E: [(usize, usize); 5] = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)];

fn nn() -> MatchingStructure {
    MatchingStructure::new(3, 3, &NN_E, &all_pairs(3, 3)).unwrap()
}

fn nnbis() -> MatchingStructure {
    MatchingStructure::new(3, 3, &NN_E, &[(1, 2), (2, 1), (2, 3), (3, 2), (3, 1)]).unwrap()
}

const OMEGA: [(usize, usize); 9] = [(1, 2), (2, 1), (1, 2), (2, 3), (1, 2), (2, 3), (2, 3), (3, 1), (3, 2)];

fn omega(s: &MatchingStructure) -> PeriodicSample {
    PeriodicSample::from_pairs(s, &OMEGA, Arc::new(PreferenceProfile::natural(s)), 0).unwrap()
}

const FCFS_TABLE: [&str; 9] = ["33|s1s2", "33|s2s2", "33|s2s1", "33|s1s2", "3|s1", "3|s2", "-|-", "-|-", "3|s1"];
const LCFS_TABLE: [&str; 9] = ["33|s1s2", "33|s1s2", "33|s1s1", "33|s1s2", "3|s1", "3|s2", "-|-", "-|-", "3|s1"];

fn table(kind: PolicyKind) -> Vec<BufferDetail> {
    let t = if kind == PolicyKind::Fcfs { FCFS_TABLE } else { LCFS_TABLE };
    t.iter().map(|x| buffer(x)).collect()
}

const FCFS_COUPLE: (&str, &str) = ("331212122", "s1s2s2s1s2s3s2s3s3");

fn strong_couples() -> Vec<(PolicyKind, CustomerWord, ServerWord)> {
    let (c, s) = (w(FCFS_COUPLE.0), z(FCFS_COUPLE.1));
    vec![
        (PolicyKind::Fcfs, c.clone(), s.clone()),
        (PolicyKind::Lcfs, c.concat(&c), s.concat(&s)),
    ]
}

/// Admissible buffers with `1 ≤ |w| = |z| ≤ max_len`.
fn balanced_buffers(s: &MatchingStructure, max_len: usize) -> Vec<BufferDetail> {
    fn words(alphabet: usize, len: usize) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for _ in 0..len {
            out = out
                .into_iter()
                .flat_map(|v| {
                    (1..=alphabet).map(move |a| {
                        let mut v = v.clone();
                        v.push(a);
                        v
                    })
                })
                .collect();
        }
        out
    }
    let mut out = Vec::new();
    for len in 1..=max_len {
        for cw in words(s.customer_count(), len) {
            for sw in words(s.server_count(), len) {
                if let Ok(b) = validate_buffer(s, Word::from_ids(&cw), Word::from_ids(&sw)) {
                    out.push(b);
                }
            }
        }
    }
    out
}

fn size(b: &BufferDetail) -> usize {
    b.customers.len() + b.servers.len()
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let s = nn();
    let profile = PreferenceProfile::natural(&s);
    let first = Piece::with_profile(w("33"), z("s1s1"), &profile);
    let second = Piece::with_profile(w("3312"), z("s1s2s3s1"), &profile);
    let e = evaluate_split(&s, PolicyKind::Ms, &first, &second).unwrap();
    let exact = e.combined == (4, 4) && e.first == (2, 2) && e.second == (1, 1);
    let violated = e.violated_side() == Some(Side::Customers);
    let prefs = PreferenceSet::Fixed(Arc::new(profile));
    let found = check_subadditive(&s, PolicyKind::Ms, 4, &prefs, DEFAULT_STEP_BUDGET).unwrap();
    let replays = found.as_ref().is_some_and(|v| v.replay(&s, PolicyKind::Ms).unwrap());
    let (fast, time) = within(LIMIT_EXAMPLE, start);
    let search = found.map_or("none".to_string(), |v| v.to_string());
    verdict(
        exact && violated && replays && fast,
        format!(
            "combined |C|,|S| = {:?}, split first {:?} second {:?}; search reports {search}; {time}",
            e.combined, e.first, e.second
        ),
    )
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut checked = 0;
    let mut failures = Vec::new();
    let natural = |s: &MatchingStructure| PreferenceSet::Fixed(Arc::new(PreferenceProfile::natural(s)));
    for (name, s) in [("NN", nn()), ("NNbis", nnbis())] {
        let cases = [
            (PolicyKind::Fcfs, PreferenceSet::All),
            (PolicyKind::Lcfs, PreferenceSet::All),
            (PolicyKind::Rand, natural(&s)),
            (PolicyKind::Rand, PreferenceSet::All),
            (PolicyKind::Ml, PreferenceSet::All),
        ];
        for (kind, prefs) in cases {
            checked += 1;
            match check_subadditive(&s, kind, 3, &prefs, DEFAULT_STEP_BUDGET) {
                Ok(None) => {}
                Ok(Some(v)) => failures.push(format!("{name}/{kind}/{prefs}: {v}")),
                Err(e) => failures.push(format!("{name}/{kind}/{prefs}: {e}")),
            }
        }
    }
    let (fast, time) = within(LIMIT_SUBADDITIVE, start);
    verdict(
        failures.is_empty() && fast,
        format!("{checked} exhaustive checks, violations: {failures:?}; {time}"),
    )
}

fn criterion_3() -> Verdict {
    let mut failures = Vec::new();
    for (name, s) in [("NN", nn()), ("NNbis", nnbis())] {
        for kind in [PolicyKind::Rand, PolicyKind::Ml] {
            match check_nonexpansive(&s, kind, 2, &PreferenceSet::All, DEFAULT_STEP_BUDGET) {
                Ok(None) => {}
                Ok(Some(v)) => failures.push(format!("{name}/{kind}: {} vs {}", v.first, v.second)),
                Err(e) => failures.push(format!("{name}/{kind}: {e}")),
            }
        }
    }
    let ml = find_consistency_violation(&nn(), ClassRule::Ml, 2, &PreferenceSet::All);
    let witness = ml.as_ref().map_or("none".to_string(), |v| {
        format!("entering {}: {:?} -> {}, {:?} -> {}", v.entering, v.first, v.chosen_first, v.second, v.chosen_second)
    });
    verdict(
        failures.is_empty() && ml.is_some(),
        format!("non-expansive violations: {failures:?}; ML consistency witness: {witness}"),
    )
}

fn criterion_4() -> Verdict {
    let start = Instant::now();
    let s = nnbis();
    let mut ok = s.non_matching_pairs().len() == 4;
    let mut notes = Vec::new();
    for (kind, c, t) in strong_couples() {
        let strong = verify_strong_erasing_couple(&s, kind, &c, &t, &PreferenceSet::All).unwrap();
        let report = strong_couple_report(&s, kind, &c, &t, &PreferenceSet::All).unwrap();
        let clean = report.failing_suffixes.is_empty() && report.failing_prefixes.is_empty();
        ok &= strong && clean;
        notes.push(format!(
            "{kind} |c| = {}: strong = {strong}, failing suffixes {:?}, failing prefixes {:?}",
            c.len(),
            report.failing_suffixes,
            report.failing_prefixes
        ));
    }
    let (fast, time) = within(LIMIT_EXAMPLE, start);
    verdict(ok && fast, format!("{}; {time}", notes.join("; ")))
}

fn criterion_5() -> Verdict {
    let s = nnbis();
    let sample = omega(&s);
    let mut ok = true;
    let mut notes = Vec::new();
    let mut matchings = Vec::new();
    for kind in [PolicyKind::Fcfs, PolicyKind::Lcfs] {
        let Some(sol) = backward_coupling(&s, kind, &sample, DEFAULT_MAX_BACKSTEPS).unwrap() else {
            return verdict(false, format!("{kind}: no coupling"));
        };
        let expected = table(kind);
        let rotation = (0..9).find(|&r| (0..9).all(|k| sol.values[(k + r) % 9] == expected[k]));
        let points = construction_points(&sol).unwrap();
        let m = biinfinite_matching(&s, kind, &sample, &sol).unwrap();
        let in_e = m.matches.iter().all(|x| s.is_matchable(x.customer, x.server));
        let fine = rotation.is_some() && sol.coupling_depth <= 5 && points == [6, 7] && m.is_partition() && in_e;
        ok &= fine;
        notes.push(format!(
            "{kind}: rotation {rotation:?}, depth {}, points {points:?}, perfect {}, in E {in_e}",
            sol.coupling_depth,
            m.is_partition()
        ));
        matchings.push(m);
    }
    let differ = matchings[0] != matchings[1];
    verdict(ok && differ, format!("{}; matchings differ {differ}", notes.join("; ")))
}

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn criterion_6() -> Verdict {
    let s = nnbis();
    let pairs: Vec<(Customer, Server)> = OMEGA
        .iter()
        .map(|&(c, t)| (Customer::from_id(c), Server::from_id(t)))
        .collect();
    let mu = ArrivalDistribution::empirical(&s, &pairs).unwrap();
    let e = |c, t| (Customer::from_id(c), Server::from_id(t));
    let stated = ArrivalDistribution::new(
        &s,
        [
            (e(1, 2), q(1, 3)),
            (e(2, 3), q(1, 3)),
            (e(2, 1), q(1, 9)),
            (e(3, 1), q(1, 9)),
            (e(3, 2), q(1, 9)),
        ],
    )
    .unwrap();
    let ncond = check_ncond(&s, &mu).unwrap();
    let scond = check_scond(&s, &mu).unwrap();
    let target = IndependentSet::new(&s, &[Customer::from_id(3)], &[Server::from_id(1)]).unwrap();
    let named = scond.witnesses.contains(&Witness::IndependentSet(target));
    let oracle = ncond_oracle(&s, &mu);
    verdict(
        mu == stated && ncond.holds && oracle && !scond.holds && named,
        format!(
            "mu {mu}; Ncond {} (oracle {oracle}); Scond {} with {} violations, {{3}}+{{s1}} among witnesses: {named}",
            ncond.holds, scond.holds, scond.violation_count
        ),
    )
}

/// Direct subset enumeration of `mu_C(A) < mu_S(S(A))` and
/// `mu_S(B) < mu_C(C(B))` over proper non-empty subsets.
fn ncond_oracle(s: &MatchingStructure, mu: &ArrivalDistribution) -> bool {
    let (nc, ns) = (s.customer_count(), s.server_count());
    let mut pc = vec![BigRational::zero(); nc];
    let mut ps = vec![BigRational::zero(); ns];
    for c in 1..=nc {
        for t in 1..=ns {
            let x = mu.weight(Customer::from_id(c), Server::from_id(t));
            pc[c - 1] += &x;
            ps[t - 1] += &x;
        }
    }
    let side = |n: usize, m: usize, own: &[BigRational], other: &[BigRational], adj: &dyn Fn(usize, usize) -> bool| {
        (1..(1u32 << n) - 1).all(|mask| {
            let members: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
            let lhs: BigRational = members.iter().map(|&i| own[i].clone()).sum();
            let rhs: BigRational = (0..m)
                .filter(|&j| members.iter().any(|&i| adj(i, j)))
                .map(|j| other[j].clone())
                .sum();
            lhs < rhs
        })
    };
    let e = |c: usize, t: usize| s.is_matchable(Customer::from_index(c), Server::from_index(t));
    side(nc, ns, &pc, &ps, &e) && side(ns, nc, &ps, &pc, &|t, c| e(c, t))
}

fn separable_graphs() -> Vec<(&'static str, MatchingStructure)> {
    let full = |nc, ns, e: &[(usize, usize)]| MatchingStructure::new(nc, ns, e, &all_pairs(nc, ns)).unwrap();
    let g2: Vec<(usize, usize)> = all_pairs(3, 3).into_iter().filter(|(c, t)| c != t).collect();
    let g3 = [
        (1, 4), (1, 3), (2, 4), (2, 3), (3, 1), (3, 2), (3, 3), (3, 4), (4, 2), (4, 1), (5, 2), (5, 1),
    ];
    vec![
        ("G1", full(3, 2, &[(1, 2), (2, 1), (2, 2), (3, 1)])),
        ("G2", full(3, 3, &g2)),
        ("G3", full(5, 4, &g3)),
    ]
}

fn criterion_7() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(EQUIVALENCE_SEED);
    let mut disagreements = 0;
    let mut first = None;
    let mut per_graph = Vec::new();
    for (name, s) in separable_graphs() {
        let Some(partition) = check_bi_separable(&s) else {
            return verdict(false, format!("{name} is not detected as bi-separable"));
        };
        let edges = s.arrival_edges();
        let mut holding = 0;
        let mut local = 0;
        for _ in 0..EQUIVALENCE_INSTANCES {
            let raw: Vec<i64> = edges.iter().map(|_| rng.gen_range(1..=MAX_RAW_WEIGHT) as i64).collect();
            let total: i64 = raw.iter().sum();
            let mu = ArrivalDistribution::new(&s, edges.iter().zip(&raw).map(|(&x, &k)| (x, q(k, total)))).unwrap();
            let n = check_ncond(&s, &mu).unwrap().holds;
            let sc = check_scond(&s, &mu).unwrap().holds;
            let half = check_biseparable_cond(&partition, &mu).holds;
            holding += usize::from(n);
            if !(n == sc && sc == half) {
                local += 1;
                first.get_or_insert_with(|| format!("{name} mu {mu}: Ncond {n}, Scond {sc}, half bound {half}"));
            }
        }
        disagreements += local;
        per_graph.push(format!("{name} {local} disagreements, Ncond held {holding}/{EQUIVALENCE_INSTANCES}"));
    }
    let (fast, time) = within(LIMIT_EQUIVALENCE, start);
    let example = first.unwrap_or_else(|| "-".into());
    verdict(
        disagreements == 0 && fast,
        format!("{}; first disagreement: {example}; {time}", per_graph.join(", ")),
    )
}

/// Arcs `c -> s` for `E` and `s -> c` for `F`; vertices `0..nc` then `nc..nc+ns`.
fn strongly_connected_oracle(s: &MatchingStructure) -> bool {
    let (nc, ns) = (s.customer_count(), s.server_count());
    let n = nc + ns;
    let mut fwd = vec![Vec::new(); n];
    let mut back = vec![Vec::new(); n];
    for (c, t) in s.matching_edges() {
        fwd[c.index()].push(nc + t.index());
        back[nc + t.index()].push(c.index());
    }
    for (c, t) in s.arrival_edges() {
        fwd[nc + t.index()].push(c.index());
        back[c.index()].push(nc + t.index());
    }
    let reaches_all = |adj: &[Vec<usize>]| {
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        seen.iter().all(|&x| x)
    };
    reaches_all(&fwd) && reaches_all(&back)
}

fn connected(n: usize, edges: &[(usize, usize)]) -> bool {
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(v) = stack.pop() {
        for &(a, b) in edges {
            let u = if a == v { b } else if b == v { a } else { continue };
            if !seen[u] {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen.iter().all(|&x| x)
}

/// A random spanning tree on vertices `0..n` plus a few extra edges; the
/// tree can come out disconnected when `adjacent` forbids the attachment.
fn random_connected<R: Rng>(rng: &mut R, n: usize, adjacent: impl Fn(usize, usize) -> bool) -> Vec<(usize, usize)> {
    let mut edges = HashSet::new();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    // Attach each vertex to an earlier one it may be adjacent to.
    for i in 1..n {
        let candidates: Vec<usize> = order[..i].iter().copied().filter(|&u| adjacent(u, order[i])).collect();
        if let Some(&u) = candidates.get(rng.gen_range(0..candidates.len().max(1))) {
            edges.insert((u.min(order[i]), u.max(order[i])));
        }
    }
    let extra = rng.gen_range(0..=n);
    for _ in 0..extra {
        let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if a != b && adjacent(a, b) {
            edges.insert((a.min(b), a.max(b)));
        }
    }
    let mut out: Vec<(usize, usize)> = edges.into_iter().collect();
    out.sort_unstable();
    out
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(CONNECTIVITY_SEED);
    let (mut bm, mut gm, mut bad) = (0, 0, Vec::new());
    while bm < CONNECTIVITY_INSTANCES {
        let (nc, ns) = (rng.gen_range(1..=5), rng.gen_range(1..=5));
        let edges = random_connected(&mut rng, nc + ns, |a, b| (a < nc) != (b < nc));
        if !connected(nc + ns, &edges) {
            continue;
        }
        let e: Vec<(usize, usize)> = edges
            .iter()
            .map(|&(a, b)| if a < nc { (a + 1, b - nc + 1) } else { (b + 1, a - nc + 1) })
            .collect();
        let s = MatchingStructure::new(nc, ns, &e, &all_pairs(nc, ns)).unwrap();
        let lib = is_strongly_connected(&associated_digraph(&s));
        let oracle = strongly_connected_oracle(&s);
        if !(lib && oracle) {
            bad.push(format!("BM {nc}x{ns} {e:?}: library {lib}, oracle {oracle}"));
        }
        bm += 1;
    }
    while gm < CONNECTIVITY_INSTANCES {
        let n = rng.gen_range(2..=7);
        let edges: Vec<(usize, usize)> = random_connected(&mut rng, n, |a, b| a != b)
            .into_iter()
            .map(|(a, b)| (a + 1, b + 1))
            .collect();
        let s = MatchingStructure::general_matching(n, &edges).unwrap();
        let lib = is_strongly_connected(&associated_digraph(&s));
        let oracle = strongly_connected_oracle(&s);
        if !(lib && oracle) {
            bad.push(format!("GM {n} {edges:?}: library {lib}, oracle {oracle}"));
        }
        gm += 1;
    }
    let (fast, time) = within(LIMIT_CONNECTIVITY, start);
    verdict(
        bad.is_empty() && fast,
        format!("{bm} BM and {gm} GM structures, failures {bad:?}; {time}"),
    )
}

fn criterion_9() -> Verdict {
    let s = nnbis();
    let natural = [Arc::new(PreferenceProfile::natural(&s))];
    let buffers = balanced_buffers(&s, 3);
    let mut bad = Vec::new();
    let mut checked = 0;
    for (kind, c, t) in strong_couples() {
        for b in &buffers {
            let trace = engine::match_words_from(&s, kind, b, &c, &t, &natural).unwrap();
            let after = trace.final_buffer();
            checked += 1;
            if size(&after) >= size(b) {
                bad.push(format!("{kind} {b} -> {after}"));
            }
        }
    }
    verdict(
        bad.is_empty() && !buffers.is_empty(),
        format!("{} buffers x 2 couples = {checked} cases, no decrease in {bad:?}", buffers.len()),
    )
}

/// Steps the engine one arrival at a time and returns the first `t` from
/// which the trajectory follows the table for a full period.
fn forward_oracle(s: &MatchingStructure, initial: &BufferDetail, horizon: usize) -> Option<usize> {
    let profile = Arc::new(PreferenceProfile::natural(s));
    let expected = table(PolicyKind::Fcfs);
    let mut path = vec![initial.clone()];
    for t in 0..horizon + 9 {
        let (c, k) = OMEGA[t % 9];
        let a = ArrivalQuadruple::new(Customer::from_id(c), Server::from_id(k), profile.clone());
        let next = engine::run(s, PolicyKind::Fcfs, &path[t], &[a]).unwrap().final_buffer();
        path.push(next);
    }
    (0..=horizon).find(|&t| (t..=t + 9).all(|u| path[u] == expected[u % 9]))
}

fn criterion_10() -> Verdict {
    let s = nnbis();
    let sample = omega(&s);
    let sol = backward_coupling(&s, PolicyKind::Fcfs, &sample, DEFAULT_MAX_BACKSTEPS)
        .unwrap()
        .unwrap();
    let mut starts = vec![BufferDetail::empty()];
    starts.extend(balanced_buffers(&s, 3));
    let mut max_time = 0;
    let mut bad = Vec::new();
    for b in &starts {
        let got = forward_coupling_check(&s, PolicyKind::Fcfs, &sample, &sol, b, 1_000).unwrap();
        let oracle = forward_oracle(&s, b, 1_000);
        match (got, oracle) {
            (ForwardCoupling::Coupled(t), Some(u)) if t == u => max_time = max_time.max(t),
            _ => bad.push(format!("{b}: {got:?} vs oracle {oracle:?}")),
        }
    }
    verdict(
        bad.is_empty() && max_time == MAX_FORWARD_COUPLING,
        format!(
            "{} initial buffers, max coupling time {max_time} (pinned {MAX_FORWARD_COUPLING}), mismatches {bad:?}",
            starts.len()
        ),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        (1, "MS split counterexample on NN", criterion_1),
        (2, "sub-additivity of FCFS, LCFS, RAND, ML", criterion_2),
        (3, "non-expansiveness of RAND and ML, ML inconsistency", criterion_3),
        (4, "strong erasing couples on NNbis", criterion_4),
        (5, "stationary solutions of the periodic sample", criterion_5),
        (6, "Ncond and Scond on the NNbis law", criterion_6),
        (7, "Ncond, Scond and the half bound agree on bi-separable graphs", criterion_7),
        (8, "associated digraphs of connected models are strongly connected", criterion_8),
        (9, "strong erasing couples shrink every buffer", criterion_9),
        (10, "forward coupling from every small initial buffer", criterion_10),
    ];
    let mut failed = 0;
    for (n, title, run) in criteria {
        let start = Instant::now();
        let v = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            verdict(false, format!("panicked: {msg}"))
        });
        if !v.pass {
            failed += 1;
        }
        println!(
            "{} criterion {n:>2} ({title}): {} [{:.2}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
