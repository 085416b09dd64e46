//! Built-in algorithms for the sequential simulator. Each one exposes the
//! sampling interface (`decide`), an exact decision distribution for the
//! probability-exact adversary, forking for Monte Carlo estimation, and the
//! state advance used to condition on a realized decision.

use crate::olocal::{Decision, EdgeDir, Token, View};
use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::HashMap;

fn ratio(num: u64, den: u64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

/// Deterministic 64-bit mix for seed-derived choices (FNV-1a over words).
fn mix(words: &[u64]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &w in words {
        for b in w.to_le_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        }
    }
    h
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgKind {
    /// always orients the given port outward (clamped to the degree), the
    /// rest inward; port 1 gives the classic oblivious strategy
    FixedPort(u8),
    /// orients one uniformly random port outward, the rest inward
    UniformSingleOut,
    /// agrees with forced edges, orients the lowest undecided port outward
    GreedyLowestFree,
    /// orients every edge inward; worst possible behavior
    AdversarialWorst,
    /// agrees with forced edges and donates: one outward edge chosen to avoid
    /// neighbors observed to be one edge away from becoming sinks, every
    /// other free edge inward (which hands the neighbor an outgoing edge)
    Cautious2Hop,
    /// seed-derived deterministic port preference per query
    PortPref,
}

impl AlgKind {
    pub fn is_deterministic(self) -> bool {
        self != AlgKind::UniformSingleOut
    }
}

/// What the algorithm remembers: every orientation it has fixed, keyed by the
/// token pair of the edge, plus the degrees it has observed.
#[derive(Debug, Clone, Default)]
struct Memory {
    /// (a, b) with a < b; true means a -> b
    decided: HashMap<(Token, Token), bool>,
    degree: HashMap<Token, u8>,
    steps: usize,
}

impl Memory {
    fn edge_dir(&self, from: Token, to: Token) -> Option<EdgeDir> {
        let key = (from.min(to), from.max(to));
        self.decided.get(&key).map(|&d| {
            if (from == key.0) == d {
                EdgeDir::Out
            } else {
                EdgeDir::In
            }
        })
    }

    fn record(&mut self, center: Token, view: &View, decision: &Decision) {
        for n in &view.nodes {
            self.degree.insert(n.token, n.degree);
        }
        for port in 1..=decision.dirs.len() as u8 {
            if let Some(nbr) = view.neighbor_at_port(port) {
                let key = (center.min(nbr), center.max(nbr));
                let out = decision.dir_at_port(port) == EdgeDir::Out;
                let dir = if center == key.0 { out } else { !out };
                self.decided.insert(key, dir);
            }
        }
        self.steps += 1;
    }

    /// Decided edges currently known to point into `x`, excluding the one to
    /// `via`.
    fn known_in(&self, x: Token, via: Token) -> usize {
        self.decided
            .keys()
            .filter(|&&(a, b)| {
                (a == x || b == x)
                    && !(a == via || b == via)
                    && self.edge_dir(x, if a == x { b } else { a }) == Some(EdgeDir::In)
            })
            .count()
    }

    /// Whether some decided edge already points out of `x`.
    fn known_out(&self, x: Token) -> bool {
        self.decided.keys().any(|&(a, b)| {
            (a == x || b == x) && self.edge_dir(x, if a == x { b } else { a }) == Some(EdgeDir::Out)
        })
    }
}

#[derive(Clone)]
pub struct Algorithm {
    pub kind: AlgKind,
    memory: Memory,
    rng: ChaCha8Rng,
    seed: u64,
    n: usize,
    locality: u32,
}

impl std::fmt::Debug for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Algorithm({:?}, seed={})", self.kind, self.seed)
    }
}

pub const BUILTIN_NAMES: &[&str] = &[
    "port1-det",
    "uniform-single-out",
    "greedy-lowest-free",
    "adversarial-worst",
    "cautious-2hop",
    "port-pref",
];

impl Algorithm {
    pub fn new(kind: AlgKind, n: usize, locality: u32, seed: u64) -> Self {
        Algorithm {
            kind,
            memory: Memory::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            seed,
            n,
            locality,
        }
    }

    pub fn by_name(name: &str, n: usize, locality: u32, seed: u64) -> Option<Self> {
        let kind = match name {
            "port1-det" => AlgKind::FixedPort(1),
            "uniform-single-out" => AlgKind::UniformSingleOut,
            "greedy-lowest-free" => AlgKind::GreedyLowestFree,
            "adversarial-worst" => AlgKind::AdversarialWorst,
            "cautious-2hop" => AlgKind::Cautious2Hop,
            "port-pref" => AlgKind::PortPref,
            _ => {
                let p: u8 = name.strip_prefix("port")?.strip_suffix("-det")?.parse().ok()?;
                AlgKind::FixedPort(p)
            }
        };
        Some(Algorithm::new(kind, n, locality, seed))
    }

    /// Independent clone with fresh downstream randomness.
    pub fn fork(&self, salt: u64) -> Algorithm {
        let mut out = self.clone();
        out.rng = ChaCha8Rng::seed_from_u64(mix(&[self.seed, salt, self.memory.steps as u64]));
        out
    }

    /// Exact distribution over decisions for the current query, given the
    /// transcript accumulated so far.
    pub fn distribution(&self, view: &View) -> Vec<(Decision, BigRational)> {
        let deg = view.center_degree() as usize;
        match self.kind {
            AlgKind::FixedPort(p) => {
                vec![(Decision::single_out(p.clamp(1, deg as u8), deg), ratio(1, 1))]
            }
            AlgKind::UniformSingleOut => (1..=deg as u8)
                .map(|p| (Decision::single_out(p, deg), ratio(1, deg as u64)))
                .collect(),
            AlgKind::AdversarialWorst => vec![(Decision::all_in(deg), ratio(1, 1))],
            AlgKind::GreedyLowestFree => {
                vec![(self.greedy_decision(view, deg), ratio(1, 1))]
            }
            AlgKind::Cautious2Hop => vec![(self.cautious_decision(view, deg), ratio(1, 1))],
            AlgKind::PortPref => {
                let shape_mix = {
                    let (c, nodes, edges) = view.shape();
                    let mut words = vec![self.seed, self.memory.steps as u64, c as u64];
                    for (t, d, dist) in nodes {
                        words.push((t as u64) << 32 | (d as u64) << 8 | dist as u64);
                    }
                    for (a, b, pa, pb) in edges {
                        words.push((a as u64) << 40 | (b as u64) << 16 | (pa as u64) << 8 | pb as u64);
                    }
                    mix(&words)
                };
                let p = (shape_mix % deg as u64) as u8 + 1;
                vec![(Decision::single_out(p, deg), ratio(1, 1))]
            }
        }
    }

    /// Samples a decision and advances the state.
    pub fn decide(&mut self, view: &View) -> Decision {
        let decision = match self.kind {
            AlgKind::UniformSingleOut => {
                let deg = view.center_degree() as usize;
                let p = self.rng.random_range(1..=deg as u8);
                Decision::single_out(p, deg)
            }
            _ => self.distribution(view)[0].0.clone(),
        };
        self.advance(view, &decision);
        decision
    }

    /// Conditions the state on a realized decision.
    pub fn advance(&mut self, view: &View, decision: &Decision) {
        self.memory.record(view.center, view, decision);
    }

    pub fn steps(&self) -> usize {
        self.memory.steps
    }

    pub fn params(&self) -> (usize, u32, u64) {
        (self.n, self.locality, self.seed)
    }

    fn forced_dirs(&self, view: &View, deg: usize) -> Vec<Option<EdgeDir>> {
        (1..=deg as u8)
            .map(|p| {
                view.neighbor_at_port(p)
                    .and_then(|nbr| self.memory.edge_dir(view.center, nbr))
            })
            .collect()
    }

    fn greedy_decision(&self, view: &View, deg: usize) -> Decision {
        let forced = self.forced_dirs(view, deg);
        let lowest_free = (1..=deg as u8).find(|&p| forced[p as usize - 1].is_none());
        Decision {
            dirs: (1..=deg as u8)
                .map(|p| match forced[p as usize - 1] {
                    Some(d) => d,
                    None => {
                        if Some(p) == lowest_free {
                            EdgeDir::Out
                        } else {
                            EdgeDir::In
                        }
                    }
                })
                .collect(),
        }
    }

    fn cautious_decision(&self, view: &View, deg: usize) -> Decision {
        let forced = self.forced_dirs(view, deg);
        // ranking for the single outward edge: never point at a neighbor that
        // would become a sink, prefer one that already secured an outgoing
        // edge, and lean away from low ports so repeated donations spread
        let rank = |p: u8| -> (bool, bool, i32) {
            let Some(nbr) = view.neighbor_at_port(p) else {
                return (false, false, -(p as i32));
            };
            let d = self.memory.degree.get(&nbr).copied().or(view.degree_of(nbr));
            let safe = self.memory.known_out(nbr);
            let endangered = !safe
                && d.map(|d| d >= 3 && self.memory.known_in(nbr, view.center) as u8 == d - 1)
                    .unwrap_or(false);
            (endangered, !safe, -(p as i32))
        };
        let free: Vec<u8> = (1..=deg as u8).filter(|&p| forced[p as usize - 1].is_none()).collect();
        let out_port = free.iter().copied().min_by_key(|&p| rank(p));
        Decision {
            dirs: (1..=deg as u8)
                .map(|p| match forced[p as usize - 1] {
                    Some(d) => d,
                    None => {
                        if Some(p) == out_port {
                            EdgeDir::Out
                        } else {
                            EdgeDir::In
                        }
                    }
                })
                .collect(),
        }
    }
}
