//! Words, buffer details, class details and preference profiles.
//!
//! Words are stored oldest-first: position 1 is the earliest arrival and a
//! suffix is made of the most recent letters.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::model::{Customer, MatchingStructure, Server};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StateError {
    #[error("customer {0} and server {1} are compatible but coexist in the buffer")]
    IncompatibleCoexistence(Customer, Server),
    #[error("position {position} is outside a word of length {len}")]
    PositionOutOfRange { position: usize, len: usize },
    #[error("alphabet sizes differ: {0:?} vs {1:?}")]
    AlphabetMismatch((usize, usize), (usize, usize)),
    #[error("class {0} is outside the alphabet")]
    ClassOutOfRange(String),
    #[error("cannot parse word {0:?}")]
    BadWord(String),
    #[error("preference list for {class} must be a permutation of {expected}")]
    NotAPermutation { class: String, expected: String },
    #[error("preference profile has {got} lists, expected {expected}")]
    ProfileShape { got: usize, expected: usize },
}

/// Implemented by class identifiers so words and counters can be generic.
pub trait ClassId: Copy + Eq + Ord + fmt::Display + fmt::Debug + Send + Sync + 'static {
    fn index(self) -> usize;
    fn from_index(index: usize) -> Self;
}

impl ClassId for Customer {
    fn index(self) -> usize {
        Customer::index(self)
    }
    fn from_index(index: usize) -> Self {
        Customer::from_index(index)
    }
}

impl ClassId for Server {
    fn index(self) -> usize {
        Server::index(self)
    }
    fn from_index(index: usize) -> Self {
        Server::from_index(index)
    }
}

/// A finite word over a class alphabet.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
#[serde(transparent)]
pub struct Word<T>(Vec<T>);

pub type CustomerWord = Word<Customer>;
pub type ServerWord = Word<Server>;

impl<T> Default for Word<T> {
    fn default() -> Self {
        Word(Vec::new())
    }
}

impl<T: ClassId> Word<T> {
    pub fn new(letters: Vec<T>) -> Self {
        Word(letters)
    }

    pub fn empty() -> Self {
        Word(Vec::new())
    }

    /// From 1-based identifiers.
    pub fn from_ids(ids: &[usize]) -> Self {
        Word(ids.iter().map(|&id| T::from_index(id - 1)).collect())
    }

    pub fn letters(&self) -> &[T] {
        &self.0
    }

    pub fn into_letters(self) -> Vec<T> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn push(&mut self, letter: T) {
        self.0.push(letter);
    }

    /// `|w|_B`: number of letters of `w` in `set`.
    pub fn count_in(&self, set: &[T]) -> usize {
        self.0.iter().filter(|l| set.contains(l)).count()
    }

    pub fn concat(&self, other: &Self) -> Self {
        let mut v = self.0.clone();
        v.extend_from_slice(&other.0);
        Word(v)
    }

    /// The `len` most recent letters.
    pub fn suffix(&self, len: usize) -> Self {
        Word(self.0[self.0.len() - len.min(self.0.len())..].to_vec())
    }

    /// Removes the letter at 1-based position `position`.
    pub fn delete_at(&self, position: usize) -> Result<Self, StateError> {
        if position == 0 || position > self.0.len() {
            return Err(StateError::PositionOutOfRange {
                position,
                len: self.0.len(),
            });
        }
        let mut v = self.0.clone();
        v.remove(position - 1);
        Ok(Word(v))
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.iter().map(|l| l.index()).max()
    }
}

pub fn delete_at<T: ClassId>(word: &Word<T>, position: usize) -> Result<Word<T>, StateError> {
    word.delete_at(position)
}

/// `[w]`: occurrence count of every letter of an alphabet of size `alphabet`.
pub fn commutative_image<T: ClassId>(word: &Word<T>, alphabet: usize) -> Vec<u32> {
    let mut counts = vec![0u32; alphabet];
    for l in &word.0 {
        counts[l.index()] += 1;
    }
    counts
}

impl fmt::Display for Word<Customer> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        if self.0.iter().all(|c| c.id() < 10) {
            for c in &self.0 {
                write!(f, "{c}")?;
            }
            Ok(())
        } else {
            let parts: Vec<String> = self.0.iter().map(ToString::to_string).collect();
            f.write_str(&parts.join(" "))
        }
    }
}

impl fmt::Display for Word<Server> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return f.write_str("-");
        }
        for s in &self.0 {
            if f.alternate() {
                write!(f, "{s:#}")?;
            } else {
                write!(f, "{s}")?;
            }
        }
        Ok(())
    }
}

/// Customer words: `3312`, `3 3 1 12` (space separated ids) or `-`.
impl FromStr for Word<Customer> {
    type Err = StateError;

    fn from_str(text: &str) -> Result<Self, StateError> {
        let t = text.trim();
        if t == "-" || t.is_empty() {
            return Ok(Word::empty());
        }
        let bad = || StateError::BadWord(text.to_string());
        let ids: Vec<usize> = if t.contains(char::is_whitespace) {
            t.split_whitespace()
                .map(|tok| tok.parse::<usize>().map_err(|_| bad()))
                .collect::<Result<_, _>>()?
        } else {
            t.chars()
                .map(|ch| ch.to_digit(10).map(|d| d as usize).ok_or_else(bad))
                .collect::<Result<_, _>>()?
        };
        if ids.contains(&0) {
            return Err(bad());
        }
        Ok(Word::from_ids(&ids))
    }
}

/// Server words: `s1s1s2`, `s1 s2` or `-`.
impl FromStr for Word<Server> {
    type Err = StateError;

    fn from_str(text: &str) -> Result<Self, StateError> {
        let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
        if t == "-" || t.is_empty() {
            return Ok(Word::empty());
        }
        let bad = || StateError::BadWord(text.to_string());
        let rest = t.strip_prefix('s').ok_or_else(bad)?;
        let ids: Vec<usize> = rest
            .split('s')
            .map(|tok| tok.parse::<usize>().ok().filter(|&v| v > 0).ok_or_else(bad))
            .collect::<Result<_, _>>()?;
        Ok(Word::from_ids(&ids))
    }
}

/// `(w, z)`: waiting customers and waiting servers, oldest first.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default, Serialize)]
pub struct BufferDetail {
    pub customers: CustomerWord,
    pub servers: ServerWord,
}

impl BufferDetail {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn is_empty(&self) -> bool {
        self.customers.is_empty() && self.servers.is_empty()
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.customers.len(), self.servers.len())
    }

    pub fn class_detail(&self, structure: &MatchingStructure) -> ClassDetail {
        ClassDetail {
            customers: commutative_image(&self.customers, structure.customer_count()),
            servers: commutative_image(&self.servers, structure.server_count()),
        }
    }

    /// Parses `w|z`, e.g. `33|s1s2`.
    pub fn parse(text: &str) -> Result<Self, StateError> {
        let (w, z) = text.split_once('|').ok_or_else(|| StateError::BadWord(text.to_string()))?;
        Ok(BufferDetail {
            customers: w.parse()?,
            servers: z.parse()?,
        })
    }
}

impl fmt::Display for BufferDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if f.alternate() {
            write!(f, "({}, {:#})", self.customers, self.servers)
        } else {
            write!(f, "{}|{}", self.customers, self.servers)
        }
    }
}

/// Checks letters are in range and that no `E`-compatible pair coexists.
pub fn validate_buffer(
    structure: &MatchingStructure,
    customers: CustomerWord,
    servers: ServerWord,
) -> Result<BufferDetail, StateError> {
    check_letters(structure, &customers, &servers)?;
    for &c in customers.letters() {
        for &s in servers.letters() {
            if structure.is_matchable(c, s) {
                return Err(StateError::IncompatibleCoexistence(c, s));
            }
        }
    }
    Ok(BufferDetail { customers, servers })
}

pub(crate) fn check_letters(
    structure: &MatchingStructure,
    customers: &CustomerWord,
    servers: &ServerWord,
) -> Result<(), StateError> {
    if let Some(c) = customers.letters().iter().find(|c| !structure.contains_customer(**c)) {
        return Err(StateError::ClassOutOfRange(c.to_string()));
    }
    if let Some(s) = servers.letters().iter().find(|s| !structure.contains_server(**s)) {
        return Err(StateError::ClassOutOfRange(s.to_string()));
    }
    Ok(())
}

/// `(x, y)`: per-class queue lengths.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Serialize)]
pub struct ClassDetail {
    pub customers: Vec<u32>,
    pub servers: Vec<u32>,
}

impl ClassDetail {
    pub fn zero(structure: &MatchingStructure) -> Self {
        ClassDetail {
            customers: vec![0; structure.customer_count()],
            servers: vec![0; structure.server_count()],
        }
    }

    pub fn customer_total(&self) -> u64 {
        self.customers.iter().map(|&v| v as u64).sum()
    }

    pub fn server_total(&self) -> u64 {
        self.servers.iter().map(|&v| v as u64).sum()
    }

    /// `x(i) y(j) = 0` for every `(i, j) ∈ E`.
    pub fn is_admissible(&self, structure: &MatchingStructure) -> bool {
        self.customers.len() == structure.customer_count()
            && self.servers.len() == structure.server_count()
            && structure
                .matching_edges()
                .iter()
                .all(|&(c, s)| self.customers[c.index()] == 0 || self.servers[s.index()] == 0)
    }

    /// The canonical buffer realizing this detail: classes in ascending order.
    pub fn canonical_buffer(&self) -> BufferDetail {
        let mut w = Vec::new();
        for (i, &n) in self.customers.iter().enumerate() {
            w.extend(std::iter::repeat_n(Customer::from_index(i), n as usize));
        }
        let mut z = Vec::new();
        for (j, &n) in self.servers.iter().enumerate() {
            z.extend(std::iter::repeat_n(Server::from_index(j), n as usize));
        }
        BufferDetail {
            customers: Word::new(w),
            servers: Word::new(z),
        }
    }
}

impl fmt::Display for ClassDetail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}|{:?}", self.customers, self.servers)
    }
}

pub fn l1_distance(a: &ClassDetail, b: &ClassDetail) -> Result<u64, StateError> {
    if a.customers.len() != b.customers.len() || a.servers.len() != b.servers.len() {
        return Err(StateError::AlphabetMismatch(
            (a.customers.len(), a.servers.len()),
            (b.customers.len(), b.servers.len()),
        ));
    }
    let d = |u: &[u32], v: &[u32]| u.iter().zip(v).map(|(&p, &q)| p.abs_diff(q) as u64).sum::<u64>();
    Ok(d(&a.customers, &b.customers) + d(&a.servers, &b.servers))
}

/// `σ(c)` is an ordering of `S(c)` for each customer class and `γ(s)` an
/// ordering of `C(s)` for each server class. Earlier means preferred.
#[derive(Clone, PartialEq, Eq, Hash, Debug, Serialize)]
pub struct PreferenceProfile {
    sigma: Vec<Vec<Server>>,
    gamma: Vec<Vec<Customer>>,
}

impl PreferenceProfile {
    /// Every list in ascending class order.
    pub fn natural(structure: &MatchingStructure) -> Self {
        PreferenceProfile {
            sigma: structure.customers().map(|c| structure.servers_of(c).to_vec()).collect(),
            gamma: structure.servers().map(|s| structure.customers_of(s).to_vec()).collect(),
        }
    }

    pub fn new(
        structure: &MatchingStructure,
        sigma: Vec<Vec<Server>>,
        gamma: Vec<Vec<Customer>>,
    ) -> Result<Self, StateError> {
        if sigma.len() != structure.customer_count() {
            return Err(StateError::ProfileShape {
                got: sigma.len(),
                expected: structure.customer_count(),
            });
        }
        if gamma.len() != structure.server_count() {
            return Err(StateError::ProfileShape {
                got: gamma.len(),
                expected: structure.server_count(),
            });
        }
        for (c, list) in structure.customers().zip(&sigma) {
            if !is_permutation_of(list, structure.servers_of(c)) {
                return Err(StateError::NotAPermutation {
                    class: c.to_string(),
                    expected: Word::new(structure.servers_of(c).to_vec()).to_string(),
                });
            }
        }
        for (s, list) in structure.servers().zip(&gamma) {
            if !is_permutation_of(list, structure.customers_of(s)) {
                return Err(StateError::NotAPermutation {
                    class: s.to_string(),
                    expected: Word::new(structure.customers_of(s).to_vec()).to_string(),
                });
            }
        }
        Ok(PreferenceProfile { sigma, gamma })
    }

    /// Independent uniform permutations of every neighbour list.
    pub fn random<R: Rng + ?Sized>(structure: &MatchingStructure, rng: &mut R) -> Self {
        let mut p = Self::natural(structure);
        for list in &mut p.sigma {
            list.shuffle(rng);
        }
        for list in &mut p.gamma {
            list.shuffle(rng);
        }
        p
    }

    pub fn customer_order(&self, c: Customer) -> &[Server] {
        &self.sigma[c.index()]
    }

    pub fn server_order(&self, s: Server) -> &[Customer] {
        &self.gamma[s.index()]
    }

    pub fn with_customer_order(mut self, c: Customer, order: Vec<Server>) -> Self {
        self.sigma[c.index()] = order;
        self
    }

    pub fn with_server_order(mut self, s: Server, order: Vec<Customer>) -> Self {
        self.gamma[s.index()] = order;
        self
    }

    /// Profiles that differ only in the two lists an arrival `(c, s)` can
    /// consult, one per pair of permutations of `S(c)` and `C(s)`.
    pub fn effective_variants(&self, c: Option<Customer>, s: Option<Server>) -> Vec<PreferenceProfile> {
        let sigmas = match c {
            Some(c) => permutations(self.customer_order(c)),
            None => vec![Vec::new()],
        };
        let gammas = match s {
            Some(s) => permutations(self.server_order(s)),
            None => vec![Vec::new()],
        };
        let mut out = Vec::with_capacity(sigmas.len() * gammas.len());
        for sig in &sigmas {
            for gam in &gammas {
                let mut p = self.clone();
                if let Some(c) = c {
                    p.sigma[c.index()] = sig.clone();
                }
                if let Some(s) = s {
                    p.gamma[s.index()] = gam.clone();
                }
                out.push(p);
            }
        }
        out
    }
}

impl fmt::Display for PreferenceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sig: Vec<String> = self.sigma.iter().map(|l| Word::new(l.clone()).to_string()).collect();
        let gam: Vec<String> = self.gamma.iter().map(|l| Word::new(l.clone()).to_string()).collect();
        write!(f, "sigma=[{}] gamma=[{}]", sig.join(","), gam.join(","))
    }
}

fn is_permutation_of<T: Copy + Ord>(list: &[T], set: &[T]) -> bool {
    let mut a = list.to_vec();
    let mut b = set.to_vec();
    a.sort();
    b.sort();
    a == b
}

/// All permutations in lexicographic order of positions in `items`.
pub fn permutations<T: Clone>(items: &[T]) -> Vec<Vec<T>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut tail in permutations(&rest) {
            tail.insert(0, head.clone());
            out.push(tail);
        }
    }
    out
}

/// One arrival `(c, s, σ, γ)`; the profile carries both `σ` and `γ`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct ArrivalQuadruple {
    pub customer: Customer,
    pub server: Server,
    pub profile: Arc<PreferenceProfile>,
}

impl ArrivalQuadruple {
    pub fn new(customer: Customer, server: Server, profile: Arc<PreferenceProfile>) -> Self {
        ArrivalQuadruple {
            customer,
            server,
            profile,
        }
    }
}

impl fmt::Display for ArrivalQuadruple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.customer, self.server)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nn() -> MatchingStructure {
        let e = [(1, 1), (1, 2), (2, 2), (2, 3), (3, 3)];
        let f: Vec<(usize, usize)> = (1..=3).flat_map(|c| (1..=3).map(move |s| (c, s))).collect();
        MatchingStructure::new(3, 3, &e, &f).unwrap()
    }

    #[test]
    fn image_of_residual_word() {
        let w: CustomerWord = "3332".parse().unwrap();
        assert_eq!(commutative_image(&w, 3), vec![0, 1, 3]);
        assert_eq!(commutative_image(&CustomerWord::empty(), 3), vec![0, 0, 0]);
    }

    #[test]
    fn buffer_validation() {
        let s = nn();
        let ok = validate_buffer(&s, "33".parse().unwrap(), "s1s2".parse().unwrap()).unwrap();
        assert_eq!(ok.to_string(), "33|s1s2");
        assert!(validate_buffer(&s, Word::empty(), Word::empty()).is_ok());
        assert_eq!(
            validate_buffer(&s, "1".parse().unwrap(), "s1".parse().unwrap()),
            Err(StateError::IncompatibleCoexistence(Customer::from_id(1), Server::from_id(1)))
        );
        assert!(matches!(
            validate_buffer(&s, "4".parse().unwrap(), Word::empty()),
            Err(StateError::ClassOutOfRange(_))
        ));
    }

    #[test]
    fn deletion() {
        let w: CustomerWord = "3332".parse().unwrap();
        assert_eq!(w.delete_at(4).unwrap().to_string(), "333");
        let abc: CustomerWord = "123".parse().unwrap();
        assert_eq!(delete_at(&abc, 2).unwrap().to_string(), "13");
        assert_eq!(
            abc.delete_at(0),
            Err(StateError::PositionOutOfRange { position: 0, len: 3 })
        );
        assert!(abc.delete_at(4).is_err());
    }

    #[test]
    fn distances() {
        let a = ClassDetail {
            customers: vec![1, 0],
            servers: vec![0, 0],
        };
        let b = ClassDetail {
            customers: vec![0, 0],
            servers: vec![0, 1],
        };
        assert_eq!(l1_distance(&a, &a).unwrap(), 0);
        assert_eq!(l1_distance(&a, &b).unwrap(), 2);
        let c = ClassDetail {
            customers: vec![0],
            servers: vec![0, 1],
        };
        assert!(matches!(l1_distance(&a, &c), Err(StateError::AlphabetMismatch(..))));
    }

    #[test]
    fn word_syntax_round_trips() {
        let z: ServerWord = "s1 s1s2".parse().unwrap();
        assert_eq!(z.to_string(), "s1s1s2");
        assert_eq!(format!("{z:#}"), "1\u{304}1\u{304}2\u{304}");
        let w: CustomerWord = "12 3".parse().unwrap();
        assert_eq!(w.to_string(), "12 3");
        assert_eq!(w.to_string().parse::<CustomerWord>().unwrap(), w);
        assert!("1x".parse::<CustomerWord>().is_err());
        assert!("1".parse::<ServerWord>().is_err());
        assert_eq!(BufferDetail::parse("-|-").unwrap(), BufferDetail::empty());
    }

    #[test]
    fn profiles() {
        let s = nn();
        let p = PreferenceProfile::natural(&s);
        assert_eq!(p.customer_order(Customer::from_id(2)), &[Server::from_id(2), Server::from_id(3)]);
        let bad = PreferenceProfile::new(&s, vec![vec![]; 3], vec![vec![]; 3]);
        assert!(matches!(bad, Err(StateError::NotAPermutation { .. })));
        // S(1) has 2 elements, C(s2) has 2
        assert_eq!(p.effective_variants(Some(Customer::from_id(1)), Some(Server::from_id(2))).len(), 4);
        assert_eq!(permutations(&[1, 2, 3]).len(), 6);
    }

    fn arb_word(alphabet: usize, max: usize) -> impl Strategy<Value = CustomerWord> {
        prop::collection::vec(0..alphabet, 0..max)
            .prop_map(|v| Word::new(v.into_iter().map(Customer::from_index).collect()))
    }

    proptest! {
        #[test]
        fn image_counts_match_tally(w in arb_word(4, 30)) {
            let img = commutative_image(&w, 4);
            for (k, &n) in img.iter().enumerate() {
                let tally = w.letters().iter().filter(|c| c.index() == k).count();
                prop_assert_eq!(n as usize, tally);
            }
            prop_assert_eq!(img.iter().sum::<u32>() as usize, w.len());
        }

        #[test]
        fn deletion_removes_one_letter(w in arb_word(4, 20), pick in 0usize..20) {
            prop_assume!(!w.is_empty());
            let i = pick % w.len() + 1;
            let d = w.delete_at(i).unwrap();
            let mut expected = commutative_image(&w, 4);
            expected[w.letters()[i - 1].index()] -= 1;
            prop_assert_eq!(commutative_image(&d, 4), expected);
        }

        #[test]
        fn validation_matches_class_detail(w in arb_word(3, 5), z in prop::collection::vec(0usize..3, 0..5)) {
            let s = nn();
            let z = Word::new(z.into_iter().map(Server::from_index).collect());
            let detail = ClassDetail {
                customers: commutative_image(&w, 3),
                servers: commutative_image(&z, 3),
            };
            prop_assert_eq!(validate_buffer(&s, w, z).is_ok(), detail.is_admissible(&s));
        }

        #[test]
        fn l1_is_elementwise(a in prop::collection::vec(0u32..5, 5), b in prop::collection::vec(0u32..5, 5)) {
            let da = ClassDetail { customers: a[..2].to_vec(), servers: a[2..].to_vec() };
            let db = ClassDetail { customers: b[..2].to_vec(), servers: b[2..].to_vec() };
            let mut total = 0u64;
            for k in 0..5 {
                total += (a[k] as i64 - b[k] as i64).unsigned_abs();
            }
            prop_assert_eq!(l1_distance(&da, &db).unwrap(), total);
        }
    }
}
