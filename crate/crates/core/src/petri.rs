//! Petri nets over named dishes: rule firing, bounded forward search and
//! backward coverability.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Marking = Vec<u64>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rule {
    pub u: Vec<u64>,
    pub v: Vec<u64>,
}

impl Rule {
    pub fn new(u: Vec<u64>, v: Vec<u64>) -> Rule {
        Rule { u, v }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Net {
    pub dishes: Vec<String>,
    pub rules: Vec<Rule>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PetriError {
    #[error("rule {0} is not enabled")]
    NotEnabled(usize),
    #[error("expected a vector of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub fn volume(m: &[u64]) -> u64 {
    m.iter().sum()
}

/// Componentwise `a >= b`.
pub fn dominates(a: &[u64], b: &[u64]) -> bool {
    a.iter().zip(b).all(|(x, y)| x >= y)
}

impl Net {
    /// Dishes named `d0`, `d1`, ...
    pub fn with_dims(n: usize, rules: Vec<Rule>) -> Net {
        Net { dishes: (0..n).map(|i| format!("d{i}")).collect(), rules }
    }

    pub fn dim(&self) -> usize {
        self.dishes.len()
    }

    pub fn dish(&self, name: &str) -> Option<usize> {
        self.dishes.iter().position(|d| d == name)
    }

    pub fn validate(&self) -> Result<(), PetriError> {
        for r in &self.rules {
            for x in [&r.u, &r.v] {
                if x.len() != self.dim() {
                    return Err(PetriError::Dimension { expected: self.dim(), got: x.len() });
                }
            }
        }
        Ok(())
    }

    pub fn enabled(&self, m: &[u64], rule: usize) -> bool {
        dominates(m, &self.rules[rule].u)
    }

    pub fn apply_rule(&self, m: &[u64], rule: usize) -> Result<Marking, PetriError> {
        if !self.enabled(m, rule) {
            return Err(PetriError::NotEnabled(rule));
        }
        let r = &self.rules[rule];
        Ok(m.iter().zip(&r.u).zip(&r.v).map(|((x, u), v)| x - u + v).collect())
    }

    /// Compact text form: an optional `dishes: a b c` line, then one rule per
    /// line as `u1 u2 ... -> v1 v2 ...`. `#` starts a comment.
    pub fn from_text(s: &str) -> Result<Net, PetriError> {
        let mut dishes: Option<Vec<String>> = None;
        let mut rules = Vec::new();
        for (n, raw) in s.lines().enumerate() {
            let line = n + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = |msg: &str| PetriError::Parse { line, msg: msg.to_string() };
            if let Some(rest) = text.strip_prefix("dishes:") {
                if dishes.is_some() || !rules.is_empty() {
                    return Err(err("dishes must be declared once, before any rule"));
                }
                dishes = Some(rest.split_whitespace().map(String::from).collect());
                continue;
            }
            let (l, r) = text.split_once("->").ok_or_else(|| err("expected `u.. -> v..`"))?;
            let vec = |side: &str| -> Result<Vec<u64>, PetriError> {
                side.split_whitespace().map(|w| w.parse().map_err(|_| err("bad count"))).collect()
            };
            let (u, v) = (vec(l)?, vec(r)?);
            let want = dishes.as_ref().map(Vec::len).unwrap_or(u.len());
            if u.len() != want || v.len() != want {
                return Err(err("rule width does not match the dish count"));
            }
            if dishes.is_none() && rules.first().is_some_and(|f: &Rule| f.u.len() != u.len()) {
                return Err(err("rule width differs from the first rule"));
            }
            rules.push(Rule::new(u, v));
        }
        let dishes = dishes.unwrap_or_else(|| {
            (0..rules.first().map_or(0, |r: &Rule| r.u.len())).map(|i| format!("d{i}")).collect()
        });
        Ok(Net { dishes, rules })
    }

    pub fn to_text(&self) -> String {
        self.to_string()
    }
}

impl fmt::Display for Net {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "dishes: {}", self.dishes.join(" "))?;
        let join = |x: &[u64]| x.iter().map(u64::to_string).collect::<Vec<_>>().join(" ");
        for r in &self.rules {
            writeln!(f, "{} -> {}", join(&r.u), join(&r.v))?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ForwardReach {
    pub markings: HashSet<Marking>,
    /// The closure finished without hitting the state cap.
    pub exhausted: bool,
}

/// Breadth-first closure from `start`, never keeping markings of volume above
/// `volume_cap` (the start itself is always kept). Stops once `state_cap`
/// markings are held. With `exhausted` set, the result is exactly the set of
/// markings reachable along paths whose every marking stays within the cap.
pub fn forward_reach(net: &Net, start: &[u64], volume_cap: u64, state_cap: usize) -> ForwardReach {
    let mut seen: HashSet<Marking> = HashSet::from([start.to_vec()]);
    let mut queue = VecDeque::from([start.to_vec()]);
    while let Some(m) = queue.pop_front() {
        for r in 0..net.rules.len() {
            let Ok(next) = net.apply_rule(&m, r) else { continue };
            if volume(&next) > volume_cap || seen.contains(&next) {
                continue;
            }
            if seen.len() >= state_cap {
                return ForwardReach { markings: seen, exhausted: false };
            }
            seen.insert(next.clone());
            queue.push_back(next);
        }
    }
    ForwardReach { markings: seen, exhausted: true }
}

/// Remove dominated elements, keeping one copy of each minimal marking.
pub fn minimize(basis: &mut Vec<Marking>) {
    basis.sort_by_key(|m| volume(m));
    basis.dedup();
    let mut out: Vec<Marking> = Vec::with_capacity(basis.len());
    for m in basis.drain(..) {
        if !out.iter().any(|b| dominates(&m, b)) {
            out.push(m);
        }
    }
    *basis = out;
}

/// Minimal basis of the markings from which `target` can be covered, computed
/// by saturating predecessors `max(m - v, 0) + u`. Every intermediate basis is
/// passed to `observe` in order.
pub fn backward_basis_with(net: &Net, target: &[u64], observe: impl FnMut(&[Marking])) -> Vec<Marking> {
    saturate(net, target, observe, |_| true, |_| false).expect("never stopped")
}

// Drops predecessors rejected by `keep`; stops with `None` as soon as `stop`
// accepts a new basis element.
fn saturate(
    net: &Net,
    target: &[u64],
    mut observe: impl FnMut(&[Marking]),
    keep: impl Fn(&[u64]) -> bool,
    mut stop: impl FnMut(&Marking) -> bool,
) -> Option<Vec<Marking>> {
    let mut basis = vec![target.to_vec()];
    let mut frontier = basis.clone();
    observe(&basis);
    while !frontier.is_empty() {
        let mut fresh = Vec::new();
        for m in &frontier {
            for r in &net.rules {
                let pred: Marking =
                    m.iter().zip(&r.u).zip(&r.v).map(|((x, u), v)| x.saturating_sub(*v) + u).collect();
                if keep(&pred) && !basis.iter().chain(&fresh).any(|b| dominates(&pred, b)) {
                    if stop(&pred) {
                        return None;
                    }
                    fresh.retain(|f| !dominates(f, &pred));
                    fresh.push(pred);
                }
            }
        }
        basis.retain(|b| !fresh.iter().any(|f| dominates(b, f)));
        basis.extend(fresh.iter().cloned());
        frontier = fresh;
        observe(&basis);
    }
    Some(basis)
}

pub fn backward_basis(net: &Net, target: &[u64]) -> Vec<Marking> {
    backward_basis_with(net, target, |_| {})
}

/// Whether some marking reachable from `start` dominates `target`.
pub fn coverable(net: &Net, start: &[u64], target: &[u64]) -> bool {
    coverable_pruned(net, start, target, |_| true)
}

/// [`coverable`] for callers that know an invariant of the reachable
/// markings: `admissible(b)` may be false only if no reachable marking
/// dominates `b`, and such markings are dropped from the basis.
pub fn coverable_pruned(net: &Net, start: &[u64], target: &[u64], admissible: impl Fn(&[u64]) -> bool) -> bool {
    dominates(start, target) || saturate(net, target, |_| {}, admissible, |b| dominates(start, b)).is_none()
}

/// Whether a token can ever appear in `dish`.
pub fn production(net: &Net, start: &[u64], dish: usize) -> bool {
    let mut unit = vec![0; net.dim()];
    unit[dish] = 1;
    coverable(net, start, &unit)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ExactReach {
    /// Rule indices that take the start to the target.
    Yes(Vec<usize>),
    NoWithinBounds,
}

pub fn reachable_exact(net: &Net, start: &[u64], target: &[u64], volume_cap: u64, state_cap: usize) -> ExactReach {
    let mut parent: HashMap<Marking, Option<(Marking, usize)>> = HashMap::from([(start.to_vec(), None)]);
    let mut queue = VecDeque::from([start.to_vec()]);
    let mut found = start == target;
    'search: while let Some(m) = queue.pop_front() {
        if found {
            break;
        }
        for r in 0..net.rules.len() {
            let Ok(next) = net.apply_rule(&m, r) else { continue };
            if volume(&next) > volume_cap || parent.contains_key(&next) || parent.len() >= state_cap {
                continue;
            }
            parent.insert(next.clone(), Some((m.clone(), r)));
            if next == target {
                found = true;
                break 'search;
            }
            queue.push_back(next);
        }
    }
    if !found {
        return ExactReach::NoWithinBounds;
    }
    let mut path = Vec::new();
    let mut cur = target.to_vec();
    while let Some(Some((prev, r))) = parent.get(&cur) {
        path.push(*r);
        cur = prev.clone();
    }
    path.reverse();
    ExactReach::Yes(path)
}

/// Replay a rule sequence from `start`.
pub fn replay(net: &Net, start: &[u64], path: &[usize]) -> Result<Marking, PetriError> {
    path.iter().try_fold(start.to_vec(), |m, &r| net.apply_rule(&m, r))
}

/// Adds a dish `T` and a rule `cover_target -> T`. Returns the new net, the
/// extended start and the index of `T`.
pub fn coverage_to_production(net: &Net, start: &[u64], cover_target: &[u64]) -> (Net, Marking, usize) {
    let mut out = net.clone();
    let t = out.dim();
    let mut name = "T".to_string();
    while out.dish(&name).is_some() {
        name.push('\'');
    }
    out.dishes.push(name);
    for r in &mut out.rules {
        r.u.push(0);
        r.v.push(0);
    }
    let mut u = cover_target.to_vec();
    u.push(0);
    let mut v = vec![0; t];
    v.push(1);
    out.rules.push(Rule::new(u, v));
    let mut s = start.to_vec();
    s.push(0);
    (out, s, t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn net(n: usize, rules: &[(&[u64], &[u64])]) -> Net {
        Net::with_dims(n, rules.iter().map(|(u, v)| Rule::new(u.to_vec(), v.to_vec())).collect())
    }

    #[test]
    fn apply_rule_examples() {
        let n = net(2, &[(&[1, 0], &[0, 2]), (&[0, 0], &[0, 0])]);
        assert_eq!(n.apply_rule(&[1, 0], 0), Ok(vec![0, 2]));
        assert_eq!(n.apply_rule(&[3, 1], 1), Ok(vec![3, 1]));
        assert_eq!(net(1, &[(&[2], &[0])]).apply_rule(&[1], 0), Err(PetriError::NotEnabled(0)));
    }

    #[test]
    fn forward_examples() {
        let empty = net(2, &[]);
        let r = forward_reach(&empty, &[1, 0], 10, 100);
        assert!(r.exhausted && r.markings == HashSet::from([vec![1, 0]]));
        let ab = net(2, &[(&[1, 0], &[0, 1])]);
        let r = forward_reach(&ab, &[1, 0], 10, 100);
        assert!(r.exhausted && r.markings == HashSet::from([vec![1, 0], vec![0, 1]]));
        let grow = net(1, &[(&[0], &[1])]);
        let r = forward_reach(&grow, &[0], 1000, 5);
        assert!(!r.exhausted && r.markings.len() == 5);
        assert_eq!(forward_reach(&grow, &[0], 3, 100).markings.len(), 4);
    }

    #[test]
    fn coverage_examples() {
        let dup = net(2, &[(&[1, 0], &[1, 1])]);
        assert!(coverable(&dup, &[1, 0], &[0, 1]));
        assert!(coverable(&dup, &[1, 0], &[0, 50]));
        assert!(!coverable(&dup, &[0, 0], &[0, 1]));
        assert!(!coverable(&net(2, &[]), &[1, 0], &[2, 0]));
        assert!(production(&dup, &[0, 1], 1));
        assert!(!production(&net(2, &[(&[0, 1], &[1, 0])]), &[1, 0], 1));
    }

    #[test]
    fn exact_examples() {
        let ab = net(2, &[(&[1, 0], &[0, 1])]);
        assert_eq!(reachable_exact(&ab, &[1, 0], &[1, 0], 5, 100), ExactReach::Yes(vec![]));
        assert_eq!(reachable_exact(&ab, &[1, 0], &[0, 1], 5, 100), ExactReach::Yes(vec![0]));
        let swap = net(2, &[(&[1, 0], &[0, 1]), (&[0, 1], &[1, 0])]);
        assert_eq!(reachable_exact(&swap, &[1, 0], &[2, 0], 5, 100), ExactReach::NoWithinBounds);
        assert_eq!(reachable_exact(&swap, &[3, 0], &[0, 3], 2, 100), ExactReach::NoWithinBounds);
    }

    #[test]
    fn coverage_to_production_examples() {
        let ab = net(2, &[(&[1, 0], &[0, 1])]);
        let (n2, s2, t) = coverage_to_production(&ab, &[0, 0], &[0, 0]);
        assert_eq!(n2.rules.len(), ab.rules.len() + 1);
        assert!(production(&n2, &s2, t));
        let (n2, s2, t) = coverage_to_production(&ab, &[1, 0], &[0, 2]);
        assert!(!production(&n2, &s2, t));
    }

    #[test]
    fn text_round_trip() {
        let n = net(3, &[(&[1, 0, 2], &[0, 1, 0]), (&[0, 0, 0], &[1, 1, 1])]);
        assert_eq!(Net::from_text(&n.to_text()), Ok(n));
        let bare = Net::from_text("1 0 -> 0 1\n# c\n\n0 1 -> 1 0").unwrap();
        assert_eq!(bare.dishes, vec!["d0", "d1"]);
        assert!(matches!(Net::from_text("1 0 -> 0"), Err(PetriError::Parse { line: 1, .. })));
        assert!(matches!(Net::from_text("1 -> 1\n1 0 -> 0 1"), Err(PetriError::Parse { line: 2, .. })));
    }

    fn random_net(rng: &mut ChaCha8Rng, dims: usize, conservative: bool) -> Net {
        let k = rng.gen_range(1..=4);
        let rules = (0..k)
            .map(|_| {
                let u: Vec<u64> = (0..dims).map(|_| rng.gen_range(0..=2)).collect();
                let mut v: Vec<u64> = (0..dims).map(|_| rng.gen_range(0..=2)).collect();
                while conservative && volume(&v) > volume(&u) {
                    let i = (0..dims).find(|&i| v[i] > 0).unwrap();
                    v[i] -= 1;
                }
                Rule::new(u, v)
            })
            .collect();
        Net::with_dims(dims, rules)
    }

    // On nets that never gain volume, the capped forward closure is exact.
    #[test]
    fn backward_agrees_with_forward_on_random_nets() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let mut positive = 0;
        for _ in 0..300 {
            let n = random_net(&mut rng, 3, true);
            let start: Marking = (0..3).map(|_| rng.gen_range(0..=3)).collect();
            let target: Marking = (0..3).map(|_| rng.gen_range(0..=2)).collect();
            let fw = forward_reach(&n, &start, 8, 1_000_000);
            assert!(fw.exhausted);
            let oracle = fw.markings.iter().any(|m| dominates(m, &target));
            assert_eq!(coverable(&n, &start, &target), oracle, "{n}{start:?} {target:?}");
            let (n2, s2, t) = coverage_to_production(&n, &start, &target);
            assert_eq!(production(&n2, &s2, t), oracle);
            positive += oracle as usize;
        }
        assert!(positive > 30 && positive < 270, "{positive}");
    }

    // With growth allowed, a covering marking found forward is always confirmed.
    #[test]
    fn backward_is_complete_for_forward_witnesses() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..150 {
            let n = random_net(&mut rng, 3, false);
            let start: Marking = (0..3).map(|_| rng.gen_range(0..=2)).collect();
            let target: Marking = (0..3).map(|_| rng.gen_range(0..=3)).collect();
            let fw = forward_reach(&n, &start, 8, 100_000);
            if fw.markings.iter().any(|m| dominates(m, &target)) {
                assert!(coverable(&n, &start, &target), "{n}{start:?} {target:?}");
            }
        }
    }

    #[test]
    fn basis_is_a_growing_antichain() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = random_net(&mut rng, 3, false);
            let target: Marking = (0..3).map(|_| rng.gen_range(0..=3)).collect();
            let mut prev: Option<Vec<Marking>> = None;
            backward_basis_with(&n, &target, |b| {
                for (i, x) in b.iter().enumerate() {
                    for (j, y) in b.iter().enumerate() {
                        assert!(i == j || !dominates(x, y), "{b:?}");
                    }
                }
                if let Some(p) = &prev {
                    assert!(p.iter().all(|old| b.iter().any(|new| dominates(old, new))));
                }
                prev = Some(b.to_vec());
            });
        }
    }

    #[test]
    fn minimize_keeps_minimal_elements() {
        let mut b = vec![vec![1, 1], vec![0, 2], vec![1, 2], vec![1, 1]];
        minimize(&mut b);
        assert_eq!(b, vec![vec![1, 1], vec![0, 2]]);
    }

    fn arb_case() -> impl Strategy<Value = (Net, Marking, Vec<usize>)> {
        let rule = (prop::collection::vec(0u64..3, 3), prop::collection::vec(0u64..3, 3))
            .prop_map(|(u, v)| Rule::new(u, v));
        (
            prop::collection::vec(rule, 1..4),
            prop::collection::vec(0u64..4, 3),
            prop::collection::vec(0usize..8, 0..12),
        )
            .prop_map(|(rules, start, picks)| (Net::with_dims(3, rules), start, picks))
    }

    proptest! {
        #[test]
        fn volume_identity_and_monotone_coverage((n, start, picks) in arb_case()) {
            let mut m = start.clone();
            for p in picks {
                let r = p % n.rules.len();
                if let Ok(next) = n.apply_rule(&m, r) {
                    let rule = &n.rules[r];
                    prop_assert_eq!(volume(&next) + volume(&rule.u), volume(&m) + volume(&rule.v));
                    m = next;
                }
            }
            let target = m.clone();
            prop_assert!(coverable(&n, &start, &target));
            let bigger: Marking = start.iter().map(|x| x + 1).collect();
            prop_assert!(coverable(&n, &bigger, &target));
        }

        #[test]
        fn witnesses_replay((n, start, picks) in arb_case()) {
            let mut m = start.clone();
            for p in picks {
                if let Ok(next) = n.apply_rule(&m, p % n.rules.len()) {
                    m = next;
                }
            }
            let cap = volume(&m).max(volume(&start)) + 6;
            if let ExactReach::Yes(path) = reachable_exact(&n, &start, &m, cap, 200_000) {
                prop_assert_eq!(replay(&n, &start, &path).unwrap(), m);
            }
        }
    }
}
