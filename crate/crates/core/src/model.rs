//! Bipartite matching structures `(C, S, E, F)`, the associated digraph,
//! independent sets and bi-separability.
//!
//! Class identifiers are 1-based in every external representation (configs,
//! reports, `Display`) and 0-based internally. Servers render as `s<id>`.

use std::collections::VecDeque;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Default cap on `|C| + |S|` for exhaustive subset enumeration.
pub const DEFAULT_ENUMERATION_CAP: usize = 20;

/// A customer class (stored 0-based).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
#[serde(into = "usize")]
pub struct Customer(u16);

/// A server class (stored 0-based).
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
#[serde(into = "usize")]
pub struct Server(u16);

impl Customer {
    pub fn from_index(index: usize) -> Self {
        Customer(index as u16)
    }

    /// Builds a class from its 1-based identifier.
    pub fn from_id(id: usize) -> Self {
        assert!(id >= 1, "class ids are 1-based");
        Customer((id - 1) as u16)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn id(self) -> usize {
        self.0 as usize + 1
    }
}

impl Server {
    pub fn from_index(index: usize) -> Self {
        Server(index as u16)
    }

    pub fn from_id(id: usize) -> Self {
        assert!(id >= 1, "class ids are 1-based");
        Server((id - 1) as u16)
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn id(self) -> usize {
        self.0 as usize + 1
    }
}

impl From<Customer> for usize {
    fn from(c: Customer) -> usize {
        c.id()
    }
}

impl From<Server> for usize {
    fn from(s: Server) -> usize {
        s.id()
    }
}

impl fmt::Display for Customer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.id())
    }
}

/// `s<id>` by default; the alternate flag (`{:#}`) renders an overbar.
impl fmt::Display for Server {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            write!(f, "{}\u{0304}", self.id())
        } else {
            write!(f, "s{}", self.id())
        }
    }
}

/// A vertex of `C ∪ S`.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
pub enum Vertex {
    Customer(Customer),
    Server(Server),
}

impl fmt::Display for Vertex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Vertex::Customer(c) => write!(f, "{c}"),
            Vertex::Server(s) => write!(f, "{s}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("edge ({customer}, s{server}) is outside {customers} customer and {servers} server classes")]
    OutOfRangeEdge {
        customer: usize,
        server: usize,
        customers: usize,
        servers: usize,
    },
    #[error("a structure needs at least one customer and one server class")]
    NoClasses,
    #[error("the {0} edge set is empty")]
    EmptyEdgeSet(&'static str),
    #[error("the matching graph is not connected ({0} is unreachable)")]
    DisconnectedMatchingGraph(Vertex),
    #[error("vertex {0} has no arrival edge")]
    IsolatedArrivalVertex(Vertex),
    #[error("the reduced graph has a loop at {0}")]
    LoopInReducedGraph(usize),
    #[error("the reduced graph is not connected")]
    DisconnectedReducedGraph,
    #[error("{classes} classes exceed the enumeration cap of {cap}")]
    TooLarge { classes: usize, cap: usize },
}

/// The quadruple `(C, S, E, F)`: `E` holds the matchable pairs, `F` the pairs
/// that may arrive together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchingStructure {
    customers: usize,
    servers: usize,
    matching: Vec<bool>,
    arrival: Vec<bool>,
    servers_of: Vec<Vec<Server>>,
    customers_of: Vec<Vec<Customer>>,
}

/// Builds and validates a structure from 1-based edge lists.
pub fn build_structure(
    customers: usize,
    servers: usize,
    matching_edges: &[(usize, usize)],
    arrival_edges: &[(usize, usize)],
) -> Result<MatchingStructure, ModelError> {
    MatchingStructure::new(customers, servers, matching_edges, arrival_edges)
}

impl MatchingStructure {
    /// Validating constructor. Edges are `(customer id, server id)`, 1-based.
    pub fn new(
        customers: usize,
        servers: usize,
        matching_edges: &[(usize, usize)],
        arrival_edges: &[(usize, usize)],
    ) -> Result<Self, ModelError> {
        let structure = Self::unchecked(customers, servers, matching_edges, arrival_edges)?;
        structure.check_matching_connected()?;
        structure.check_arrival_cover()?;
        Ok(structure)
    }

    /// A general matching (GM) model on a reduced graph `(C, R)` with `n`
    /// vertices: servers are a copy of `C`, `F = {(c, c~)}` and `E` is the
    /// bipartite double cover of `R`.
    ///
    /// The double cover of a bipartite reduced graph is disconnected, so this
    /// constructor requires connectivity of `R` instead of `E`.
    pub fn general_matching(n: usize, reduced_edges: &[(usize, usize)]) -> Result<Self, ModelError> {
        let mut matching = Vec::with_capacity(2 * reduced_edges.len());
        for &(a, b) in reduced_edges {
            matching.push((a, b));
            matching.push((b, a));
        }
        let arrival: Vec<(usize, usize)> = (1..=n).map(|c| (c, c)).collect();
        let structure = Self::unchecked(n, n, &matching, &arrival)?;
        if let Some(&(a, _)) = reduced_edges.iter().find(|(a, b)| a == b) {
            return Err(ModelError::LoopInReducedGraph(a));
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            for &s in &structure.servers_of[v] {
                if !seen[s.index()] {
                    seen[s.index()] = true;
                    queue.push_back(s.index());
                }
            }
        }
        if seen.iter().any(|&x| !x) {
            return Err(ModelError::DisconnectedReducedGraph);
        }
        Ok(structure)
    }

    fn unchecked(
        customers: usize,
        servers: usize,
        matching_edges: &[(usize, usize)],
        arrival_edges: &[(usize, usize)],
    ) -> Result<Self, ModelError> {
        if customers == 0 || servers == 0 {
            return Err(ModelError::NoClasses);
        }
        if matching_edges.is_empty() {
            return Err(ModelError::EmptyEdgeSet("matching"));
        }
        if arrival_edges.is_empty() {
            return Err(ModelError::EmptyEdgeSet("arrival"));
        }
        let mut matching = vec![false; customers * servers];
        let mut arrival = vec![false; customers * servers];
        for (edges, table) in [(matching_edges, &mut matching), (arrival_edges, &mut arrival)] {
            for &(c, s) in edges {
                if c == 0 || s == 0 || c > customers || s > servers {
                    return Err(ModelError::OutOfRangeEdge {
                        customer: c,
                        server: s,
                        customers,
                        servers,
                    });
                }
                table[(c - 1) * servers + (s - 1)] = true;
            }
        }
        let servers_of = (0..customers)
            .map(|c| {
                (0..servers)
                    .filter(|&s| matching[c * servers + s])
                    .map(Server::from_index)
                    .collect()
            })
            .collect();
        let customers_of = (0..servers)
            .map(|s| {
                (0..customers)
                    .filter(|&c| matching[c * servers + s])
                    .map(Customer::from_index)
                    .collect()
            })
            .collect();
        Ok(MatchingStructure {
            customers,
            servers,
            matching,
            arrival,
            servers_of,
            customers_of,
        })
    }

    fn check_matching_connected(&self) -> Result<(), ModelError> {
        let n = self.customers + self.servers;
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0usize]);
        seen[0] = true;
        while let Some(v) = queue.pop_front() {
            let next: Vec<usize> = if v < self.customers {
                self.servers_of[v].iter().map(|s| self.customers + s.index()).collect()
            } else {
                self.customers_of[v - self.customers].iter().map(|c| c.index()).collect()
            };
            for u in next {
                if !seen[u] {
                    seen[u] = true;
                    queue.push_back(u);
                }
            }
        }
        match seen.iter().position(|&x| !x) {
            Some(v) => Err(ModelError::DisconnectedMatchingGraph(self.vertex(v))),
            None => Ok(()),
        }
    }

    fn check_arrival_cover(&self) -> Result<(), ModelError> {
        for c in self.customers() {
            if !self.servers().any(|s| self.is_arrival(c, s)) {
                return Err(ModelError::IsolatedArrivalVertex(Vertex::Customer(c)));
            }
        }
        for s in self.servers() {
            if !self.customers().any(|c| self.is_arrival(c, s)) {
                return Err(ModelError::IsolatedArrivalVertex(Vertex::Server(s)));
            }
        }
        Ok(())
    }

    /// Vertex numbering used by graph algorithms: customers first, then servers.
    pub fn vertex(&self, v: usize) -> Vertex {
        if v < self.customers {
            Vertex::Customer(Customer::from_index(v))
        } else {
            Vertex::Server(Server::from_index(v - self.customers))
        }
    }

    pub fn vertex_index(&self, v: Vertex) -> usize {
        match v {
            Vertex::Customer(c) => c.index(),
            Vertex::Server(s) => self.customers + s.index(),
        }
    }

    pub fn customer_count(&self) -> usize {
        self.customers
    }

    pub fn server_count(&self) -> usize {
        self.servers
    }

    pub fn class_count(&self) -> usize {
        self.customers + self.servers
    }

    pub fn customers(&self) -> impl Iterator<Item = Customer> + Clone {
        (0..self.customers).map(Customer::from_index)
    }

    pub fn servers(&self) -> impl Iterator<Item = Server> + Clone {
        (0..self.servers).map(Server::from_index)
    }

    pub fn contains_customer(&self, c: Customer) -> bool {
        c.index() < self.customers
    }

    pub fn contains_server(&self, s: Server) -> bool {
        s.index() < self.servers
    }

    /// `(c, s) ∈ E`.
    #[inline]
    pub fn is_matchable(&self, c: Customer, s: Server) -> bool {
        self.matching[c.index() * self.servers + s.index()]
    }

    /// `(c, s) ∈ F`.
    #[inline]
    pub fn is_arrival(&self, c: Customer, s: Server) -> bool {
        self.arrival[c.index() * self.servers + s.index()]
    }

    /// `S(c)`, ascending.
    pub fn servers_of(&self, c: Customer) -> &[Server] {
        &self.servers_of[c.index()]
    }

    /// `C(s)`, ascending.
    pub fn customers_of(&self, s: Server) -> &[Customer] {
        &self.customers_of[s.index()]
    }

    /// `S(A)`, ascending and deduplicated.
    pub fn servers_of_set(&self, customers: &[Customer]) -> Vec<Server> {
        self.servers()
            .filter(|&s| customers.iter().any(|&c| self.is_matchable(c, s)))
            .collect()
    }

    /// `C(B)`, ascending and deduplicated.
    pub fn customers_of_set(&self, servers: &[Server]) -> Vec<Customer> {
        self.customers()
            .filter(|&c| servers.iter().any(|&s| self.is_matchable(c, s)))
            .collect()
    }

    pub fn matching_edges(&self) -> Vec<(Customer, Server)> {
        self.pairs().filter(|&(c, s)| self.is_matchable(c, s)).collect()
    }

    pub fn arrival_edges(&self) -> Vec<(Customer, Server)> {
        self.pairs().filter(|&(c, s)| self.is_arrival(c, s)).collect()
    }

    /// `E^c = (C × S) \ E`.
    pub fn non_matching_pairs(&self) -> Vec<(Customer, Server)> {
        self.pairs().filter(|&(c, s)| !self.is_matchable(c, s)).collect()
    }

    fn pairs(&self) -> impl Iterator<Item = (Customer, Server)> + '_ {
        self.customers().flat_map(move |c| self.servers().map(move |s| (c, s)))
    }

    fn check_cap(&self, cap: usize) -> Result<(), ModelError> {
        if self.class_count() > cap || self.customers > 63 || self.servers > 63 {
            return Err(ModelError::TooLarge {
                classes: self.class_count(),
                cap,
            });
        }
        Ok(())
    }

    pub(crate) fn customer_mask_servers(&self, mask: u64) -> u64 {
        let mut out = 0u64;
        for c in 0..self.customers {
            if mask >> c & 1 == 1 {
                for s in &self.servers_of[c] {
                    out |= 1 << s.index();
                }
            }
        }
        out
    }

    pub(crate) fn server_mask_customers(&self, mask: u64) -> u64 {
        let mut out = 0u64;
        for s in 0..self.servers {
            if mask >> s & 1 == 1 {
                for c in &self.customers_of[s] {
                    out |= 1 << c.index();
                }
            }
        }
        out
    }
}

/// The directed graph on `C ∪ S` with `c → s` for `(c, s) ∈ E` and `s → c`
/// for `(c, s) ∈ F`.
#[derive(Clone, Debug)]
pub struct AssociatedDigraph {
    customers: usize,
    servers: usize,
    arcs: Vec<(Vertex, Vertex)>,
    adjacency: Vec<Vec<usize>>,
}

pub fn associated_digraph(structure: &MatchingStructure) -> AssociatedDigraph {
    let nc = structure.customer_count();
    let mut arcs = Vec::new();
    let mut adjacency = vec![Vec::new(); structure.class_count()];
    for (c, s) in structure.matching_edges() {
        arcs.push((Vertex::Customer(c), Vertex::Server(s)));
        adjacency[c.index()].push(nc + s.index());
    }
    for (c, s) in structure.arrival_edges() {
        arcs.push((Vertex::Server(s), Vertex::Customer(c)));
        adjacency[nc + s.index()].push(c.index());
    }
    AssociatedDigraph {
        customers: nc,
        servers: structure.server_count(),
        arcs,
        adjacency,
    }
}

impl AssociatedDigraph {
    /// A bare digraph over `n` vertices given as adjacency lists.
    pub fn from_adjacency(adjacency: Vec<Vec<usize>>) -> Self {
        let arcs = Vec::new();
        AssociatedDigraph {
            customers: adjacency.len(),
            servers: 0,
            arcs,
            adjacency,
        }
    }

    pub fn vertex_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn arcs(&self) -> &[(Vertex, Vertex)] {
        &self.arcs
    }

    pub fn arc_count(&self) -> usize {
        self.adjacency.iter().map(Vec::len).sum()
    }

    pub fn has_arc(&self, from: Vertex, to: Vertex) -> bool {
        let idx = |v: Vertex| match v {
            Vertex::Customer(c) => c.index(),
            Vertex::Server(s) => self.customers + s.index(),
        };
        let (a, b) = (idx(from), idx(to));
        a < self.adjacency.len() && self.adjacency[a].contains(&b)
    }

    pub fn server_count(&self) -> usize {
        self.servers
    }

    /// Tarjan's algorithm. Components come out in reverse topological order.
    pub fn strongly_connected_components(&self) -> Vec<Vec<usize>> {
        let mut tarjan = Tarjan {
            graph: &self.adjacency,
            counter: 0,
            index: vec![None; self.adjacency.len()],
            low: vec![0; self.adjacency.len()],
            on_stack: vec![false; self.adjacency.len()],
            stack: Vec::new(),
            components: Vec::new(),
        };
        for v in 0..self.adjacency.len() {
            if tarjan.index[v].is_none() {
                tarjan.visit(v);
            }
        }
        tarjan.components
    }
}

struct Tarjan<'a> {
    graph: &'a [Vec<usize>],
    counter: usize,
    index: Vec<Option<usize>>,
    low: Vec<usize>,
    on_stack: Vec<bool>,
    stack: Vec<usize>,
    components: Vec<Vec<usize>>,
}

impl Tarjan<'_> {
    fn visit(&mut self, v: usize) {
        self.index[v] = Some(self.counter);
        self.low[v] = self.counter;
        self.counter += 1;
        self.stack.push(v);
        self.on_stack[v] = true;
        for &w in &self.graph[v] {
            match self.index[w] {
                None => {
                    self.visit(w);
                    self.low[v] = self.low[v].min(self.low[w]);
                }
                Some(iw) if self.on_stack[w] => self.low[v] = self.low[v].min(iw),
                Some(_) => {}
            }
        }
        if Some(self.low[v]) == self.index[v] {
            let mut component = Vec::new();
            loop {
                let w = self.stack.pop().expect("tarjan stack underflow");
                self.on_stack[w] = false;
                component.push(w);
                if w == v {
                    break;
                }
            }
            self.components.push(component);
        }
    }
}

pub fn is_strongly_connected(digraph: &AssociatedDigraph) -> bool {
    digraph.vertex_count() == 0 || digraph.strongly_connected_components().len() == 1
}

/// A non-empty `A ∪ B` with `A × B ∩ E = ∅`, together with `C∘(I)` and `S∘(I)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct IndependentSet {
    pub customers: Vec<Customer>,
    pub servers: Vec<Server>,
    pub unreached_customers: Vec<Customer>,
    pub unreached_servers: Vec<Server>,
}

impl IndependentSet {
    /// Builds `I = A ∪ B`, or `None` when it is empty or not independent.
    pub fn new(structure: &MatchingStructure, customers: &[Customer], servers: &[Server]) -> Option<Self> {
        if customers.is_empty() && servers.is_empty() {
            return None;
        }
        if customers
            .iter()
            .any(|&c| servers.iter().any(|&s| structure.is_matchable(c, s)))
        {
            return None;
        }
        let mut a = customers.to_vec();
        let mut b = servers.to_vec();
        a.sort();
        a.dedup();
        b.sort();
        b.dedup();
        let reached_c = structure.customers_of_set(&b);
        let reached_s = structure.servers_of_set(&a);
        let unreached_customers = structure
            .customers()
            .filter(|c| !a.contains(c) && !reached_c.contains(c))
            .collect();
        let unreached_servers = structure
            .servers()
            .filter(|s| !b.contains(s) && !reached_s.contains(s))
            .collect();
        Some(IndependentSet {
            customers: a,
            servers: b,
            unreached_customers,
            unreached_servers,
        })
    }

    pub fn is_maximal(&self) -> bool {
        self.unreached_customers.is_empty() && self.unreached_servers.is_empty()
    }

    pub fn is_one_sided(&self) -> bool {
        self.customers.is_empty() || self.servers.is_empty()
    }
}

impl fmt::Display for IndependentSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts: Vec<String> = self.customers.iter().map(ToString::to_string).collect();
        parts.extend(self.servers.iter().map(ToString::to_string));
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// All independent sets, ordered by customer mask then server mask.
pub fn enumerate_independent_sets(structure: &MatchingStructure) -> Result<Vec<IndependentSet>, ModelError> {
    enumerate_independent_sets_capped(structure, DEFAULT_ENUMERATION_CAP)
}

pub fn enumerate_independent_sets_capped(
    structure: &MatchingStructure,
    cap: usize,
) -> Result<Vec<IndependentSet>, ModelError> {
    structure.check_cap(cap)?;
    let nc = structure.customer_count();
    let ns = structure.server_count();
    let all_servers = (1u64 << ns) - 1;
    let mut out = Vec::new();
    for a_mask in 0u64..(1 << nc) {
        let free = all_servers & !structure.customer_mask_servers(a_mask);
        // subsets of `free`, ascending
        let mut b_mask = 0u64;
        loop {
            if a_mask != 0 || b_mask != 0 {
                let a: Vec<Customer> = (0..nc).filter(|c| a_mask >> c & 1 == 1).map(Customer::from_index).collect();
                let b: Vec<Server> = (0..ns).filter(|s| b_mask >> s & 1 == 1).map(Server::from_index).collect();
                out.push(IndependentSet::new(structure, &a, &b).expect("mask construction is independent"));
            }
            if b_mask == free {
                break;
            }
            b_mask = (b_mask.wrapping_sub(free)) & free;
        }
    }
    Ok(out)
}

/// A partition of `C ∪ S` into independent sets, non-maximal parts one-sided.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct BiSeparablePartition {
    pub parts: Vec<IndependentSet>,
}

impl BiSeparablePartition {
    pub fn order(&self) -> usize {
        self.parts.len()
    }
}

/// Why a structure was not accepted as bi-separable.
#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum NotBiSeparable {
    #[error("the complement graph has only {0} component(s)")]
    TooFewComponents(usize),
    #[error("complement component {0} is not an independent set")]
    NotIndependent(String),
    #[error("component {0} is two-sided but not maximal")]
    NonMaximalTwoSided(String),
    #[error("maximal component {0} violates the neighbourhood identity")]
    NeighborhoodIdentity(String),
}

/// Connected components of the bipartite complement of `(C ∪ S, E)`, then an
/// explicit re-verification of the partition conditions.
pub fn bi_separable_partition(structure: &MatchingStructure) -> Result<BiSeparablePartition, NotBiSeparable> {
    let nc = structure.customer_count();
    let n = structure.class_count();
    let mut component = vec![usize::MAX; n];
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if component[start] != usize::MAX {
            continue;
        }
        let id = groups.len();
        let mut members = vec![start];
        component[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(v) = queue.pop_front() {
            let neighbours: Vec<usize> = if v < nc {
                let c = Customer::from_index(v);
                structure
                    .servers()
                    .filter(|&s| !structure.is_matchable(c, s))
                    .map(|s| nc + s.index())
                    .collect()
            } else {
                let s = Server::from_index(v - nc);
                structure
                    .customers()
                    .filter(|&c| !structure.is_matchable(c, s))
                    .map(|c| c.index())
                    .collect()
            };
            for u in neighbours {
                if component[u] == usize::MAX {
                    component[u] = id;
                    members.push(u);
                    queue.push_back(u);
                }
            }
        }
        members.sort();
        groups.push(members);
    }

    let mut parts = Vec::with_capacity(groups.len());
    for members in &groups {
        let a: Vec<Customer> = members.iter().filter(|&&v| v < nc).map(|&v| Customer::from_index(v)).collect();
        let b: Vec<Server> = members
            .iter()
            .filter(|&&v| v >= nc)
            .map(|&v| Server::from_index(v - nc))
            .collect();
        let label = || {
            let names: Vec<String> = members.iter().map(|&v| structure.vertex(v).to_string()).collect();
            format!("{{{}}}", names.join(","))
        };
        let part = IndependentSet::new(structure, &a, &b).ok_or_else(|| NotBiSeparable::NotIndependent(label()))?;
        if !part.is_maximal() && !part.is_one_sided() {
            return Err(NotBiSeparable::NonMaximalTwoSided(label()));
        }
        if part.is_maximal() {
            let servers_rest: Vec<Server> = structure.servers().filter(|s| !part.servers.contains(s)).collect();
            let customers_rest: Vec<Customer> = structure.customers().filter(|c| !part.customers.contains(c)).collect();
            let identity = part.customers.iter().all(|&c| structure.servers_of(c) == servers_rest.as_slice())
                && part.servers.iter().all(|&s| structure.customers_of(s) == customers_rest.as_slice());
            if !identity {
                return Err(NotBiSeparable::NeighborhoodIdentity(label()));
            }
        }
        parts.push(part);
    }
    if parts.len() < 2 {
        return Err(NotBiSeparable::TooFewComponents(parts.len()));
    }
    Ok(BiSeparablePartition { parts })
}

/// `Some(partition)` iff the structure's matching graph is bi-separable.
pub fn check_bi_separable(structure: &MatchingStructure) -> Option<BiSeparablePartition> {
    match bi_separable_partition(structure) {
        Ok(p) => Some(p),
        Err(reason) => {
            log::debug!("not bi-separable: {reason}");
            None
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ModelKind {
    /// `F = C × S`.
    Bm,
    /// `F` is a perfect matching `c ↦ c~` and `E` the double cover of a
    /// loop-free graph on `C`.
    Gm,
    Ebm,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Bm => "BM",
            ModelKind::Gm => "GM",
            ModelKind::Ebm => "EBM",
        })
    }
}

pub fn detect_model_kind(structure: &MatchingStructure) -> ModelKind {
    if structure.customers().all(|c| structure.servers().all(|s| structure.is_arrival(c, s))) {
        ModelKind::Bm
    } else if gm_copy_map(structure).is_some() {
        ModelKind::Gm
    } else {
        ModelKind::Ebm
    }
}

/// For a GM structure, the bijection `c ↦ c~` read off `F`.
pub fn gm_copy_map(structure: &MatchingStructure) -> Option<Vec<Server>> {
    let n = structure.customer_count();
    if n != structure.server_count() {
        return None;
    }
    let mut copy = Vec::with_capacity(n);
    for c in structure.customers() {
        let targets: Vec<Server> = structure.servers().filter(|&s| structure.is_arrival(c, s)).collect();
        if targets.len() != 1 {
            return None;
        }
        copy.push(targets[0]);
    }
    let mut hit = vec![false; n];
    for s in &copy {
        if std::mem::replace(&mut hit[s.index()], true) {
            return None;
        }
    }
    for c in structure.customers() {
        if structure.is_matchable(c, copy[c.index()]) {
            return None;
        }
        for d in structure.customers() {
            if structure.is_matchable(c, copy[d.index()]) != structure.is_matchable(d, copy[c.index()]) {
                return None;
            }
        }
    }
    Some(copy)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn nn() -> MatchingStructure {
        let e = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)];
        let f: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=3).map(move |s| (c, s))).collect();
        MatchingStructure::new(3, 3, &e, &f).unwrap()
    }

    fn nnbis() -> MatchingStructure {
        let e = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)];
        let f = [(1, 2), (2, 1), (2, 3), (3, 2), (3, 1)];
        MatchingStructure::new(3, 3, &e, &f).unwrap()
    }

    fn bi_separable_triangle() -> MatchingStructure {
        let e = [(1, 2), (2, 1), (2, 2), (3, 1)];
        let f: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=2).map(move |s| (c, s))).collect();
        MatchingStructure::new(3, 2, &e, &f).unwrap()
    }

    #[test]
    fn builds_reference_structures() {
        let s = nn();
        assert_eq!(s.servers_of(Customer::from_id(1)), &[Server::from_id(1), Server::from_id(2)]);
        assert_eq!(s.customers_of(Server::from_id(3)), &[Customer::from_id(2), Customer::from_id(3)]);
        assert_eq!(detect_model_kind(&s), ModelKind::Bm);
        assert_eq!(detect_model_kind(&nnbis()), ModelKind::Ebm);
    }

    #[test]
    fn rejects_disconnected_and_isolated() {
        let err = MatchingStructure::new(2, 1, &[(1, 1)], &[(1, 1), (2, 1)]).unwrap_err();
        assert_eq!(err, ModelError::DisconnectedMatchingGraph(Vertex::Customer(Customer::from_id(2))));
        let err = MatchingStructure::new(2, 1, &[(1, 1), (2, 1)], &[(1, 1)]).unwrap_err();
        assert_eq!(err, ModelError::IsolatedArrivalVertex(Vertex::Customer(Customer::from_id(2))));
        assert!(matches!(
            MatchingStructure::new(1, 1, &[(1, 2)], &[(1, 1)]),
            Err(ModelError::OutOfRangeEdge { .. })
        ));
        assert_eq!(MatchingStructure::new(1, 1, &[], &[(1, 1)]), Err(ModelError::EmptyEdgeSet("matching")));
    }

    #[test]
    fn digraph_of_nnbis() {
        let g = associated_digraph(&nnbis());
        assert_eq!(g.arc_count(), 10);
        let c = |i| Vertex::Customer(Customer::from_id(i));
        let s = |i| Vertex::Server(Server::from_id(i));
        for (a, b) in [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)] {
            assert!(g.has_arc(c(a), s(b)));
        }
        for (a, b) in [(2, 1), (1, 2), (3, 2), (2, 3), (1, 3)] {
            assert!(g.has_arc(s(a), c(b)), "s{a} -> {b}");
        }
        assert!(!g.has_arc(s(1), c(1)));
        // 3 -> s3 -> 2 -> s2 -> 1 -> s1 -> 2 ... and s1 -> 3, s2 -> 3
        assert!(is_strongly_connected(&g));
    }

    #[test]
    fn strong_connectivity_edge_cases() {
        assert!(is_strongly_connected(&AssociatedDigraph::from_adjacency(vec![vec![]])));
        assert!(!is_strongly_connected(&AssociatedDigraph::from_adjacency(vec![vec![1], vec![]])));
        assert!(is_strongly_connected(&associated_digraph(&nn())));
    }

    #[test]
    fn gm_on_a_path() {
        let gm = MatchingStructure::general_matching(2, &[(1, 2)]).unwrap();
        assert_eq!(detect_model_kind(&gm), ModelKind::Gm);
        assert!(is_strongly_connected(&associated_digraph(&gm)));
        let gm3 = MatchingStructure::general_matching(3, &[(1, 2), (2, 3)]).unwrap();
        assert_eq!(detect_model_kind(&gm3), ModelKind::Gm);
        assert_eq!(
            MatchingStructure::general_matching(3, &[(1, 2)]),
            Err(ModelError::DisconnectedReducedGraph)
        );
    }

    #[test]
    fn independent_sets_of_nn() {
        let s = nn();
        let sets = enumerate_independent_sets(&s).unwrap();
        let three_one = IndependentSet::new(&s, &[Customer::from_id(3)], &[Server::from_id(1)]).unwrap();
        assert!(sets.contains(&three_one));
        assert_eq!(three_one.unreached_customers, vec![Customer::from_id(2)]);
        assert_eq!(three_one.unreached_servers, vec![Server::from_id(2)]);
        // brute force over all (A, B) subset pairs
        let mut count = 0;
        for a in 0u32..8 {
            for b in 0u32..8 {
                if a == 0 && b == 0 {
                    continue;
                }
                let ok = (0..3).all(|c| {
                    (0..3).all(|t| {
                        !(a >> c & 1 == 1
                            && b >> t & 1 == 1
                            && s.is_matchable(Customer::from_index(c), Server::from_index(t)))
                    })
                });
                count += ok as usize;
            }
        }
        assert_eq!(sets.len(), count);
    }

    #[test]
    fn complete_graph_has_only_one_sided_sets() {
        let all: Vec<(usize, usize)> = (1..=2).flat_map(|c| (1..=3).map(move |s| (c, s))).collect();
        let s = MatchingStructure::new(2, 3, &all, &all).unwrap();
        let sets = enumerate_independent_sets(&s).unwrap();
        assert!(sets.iter().all(IndependentSet::is_one_sided));
        assert_eq!(sets.len(), 3 + 7);
        let p = check_bi_separable(&s).unwrap();
        assert_eq!(p.order(), 5);
    }

    #[test]
    fn bi_separable_triangle_graph_partition() {
        let p = check_bi_separable(&bi_separable_triangle()).unwrap();
        assert_eq!(p.order(), 3);
        let labels: Vec<String> = p.parts.iter().map(ToString::to_string).collect();
        assert!(labels.contains(&"{1,s1}".to_string()));
        assert!(labels.contains(&"{3,s2}".to_string()));
        assert!(labels.contains(&"{2}".to_string()));
    }

    #[test]
    fn nn_is_not_bi_separable() {
        let err = bi_separable_partition(&nn()).unwrap_err();
        assert!(matches!(err, NotBiSeparable::NotIndependent(_)), "{err}");
    }

    #[test]
    fn enumeration_cap() {
        let s = nn();
        assert!(matches!(
            enumerate_independent_sets_capped(&s, 5),
            Err(ModelError::TooLarge { classes: 6, cap: 5 })
        ));
    }

    #[test]
    fn server_display() {
        assert_eq!(Server::from_id(2).to_string(), "s2");
        assert_eq!(format!("{:#}", Server::from_id(2)), "2\u{0304}");
    }
}
