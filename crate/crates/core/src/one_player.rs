//! One player moving many robots: robot reachability through the Petri-net
//! bridge, targeted reconfiguration, and brute-force reach sets.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::gadget::{Configuration, GadgetError, Move, System};
use crate::petri::{coverable_pruned, reachable_exact, ExactReach};
use crate::translate::{gadgets_to_petri, gadgets_to_petri_counting_spawns, TranslateError};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum OneError {
    #[error("system has a destroyer")]
    HasDestroyer,
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Gadget(#[from] GadgetError),
}

/// Limits for exhaustive search.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Caps {
    /// Robots outside spawner classes.
    pub volume: u64,
    /// Robots in each spawner class.
    pub spawner: u64,
    /// Stored configurations.
    pub states: usize,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BruteReach {
    pub configs: HashSet<Configuration>,
    pub exhausted: bool,
}

fn within(system: &System, c: &Configuration, caps: &Caps) -> bool {
    let mut outside = 0;
    for (class, &n) in c.robots.iter().enumerate() {
        if system.is_spawner_class(class) {
            if n > caps.spawner {
                return false;
            }
        } else {
            outside += n;
        }
    }
    outside <= caps.volume
}

/// Every configuration reachable from `start` along paths that stay within
/// the caps. The start is always included.
pub fn brute_reach_set(system: &System, start: &Configuration, caps: Caps) -> BruteReach {
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(c) = queue.pop_front() {
        for mv in system.legal_moves(&c) {
            let next = system.apply_move(&c, &mv).expect("legal move");
            if !within(system, &next, &caps) || seen.contains(&next) {
                continue;
            }
            if seen.len() >= caps.states {
                return BruteReach { configs: seen, exhausted: false };
            }
            seen.insert(next.clone());
            queue.push_back(next);
        }
    }
    BruteReach { configs: seen, exhausted: true }
}

/// Can some robot ever stand in `class`?
pub fn robot_reachability(system: &System, start: &Configuration, class: usize) -> Result<bool, OneError> {
    let (net, map) = gadgets_to_petri(system)?;
    if start.robots[class] > 0 || system.is_spawner_class(class) {
        return Ok(true);
    }
    let m = map.config_to_marking(start);
    // each instance holds exactly one state token
    let admissible = |b: &[u64]| map.state_dish.iter().all(|ds| ds.iter().map(|&d| b[d]).sum::<u64>() <= 1);
    let coverable = |u: &[u64]| coverable_pruned(&net, &m, u, admissible);
    if system.is_destroyer_class(class) {
        // A robot reaches a sink exactly when some transition into it fires.
        return Ok(net.rules.iter().zip(&map.rule_move).any(|(r, mv)| match *mv {
            Move::Traverse { instance, transition } => {
                let tr = system.transition(instance, transition);
                system.class_of(system.instances()[instance].ports[tr.to]) == class && coverable(&r.u)
            }
            Move::Spawn { .. } => false,
        }));
    }
    let mut unit = vec![0; net.dim()];
    unit[map.robot_dish[class].expect("ordinary classes have a dish")] = 1;
    Ok(coverable(&unit))
}

/// Same question by bounded brute force. `None` if the caps cut the search short.
pub fn brute_robot_reachability(system: &System, start: &Configuration, class: usize, caps: Caps) -> Option<bool> {
    if start.robots[class] > 0 || system.is_spawner_class(class) {
        return Some(true);
    }
    let mut seen = HashSet::from([start.clone()]);
    let mut queue = VecDeque::from([start.clone()]);
    let mut cut = false;
    while let Some(c) = queue.pop_front() {
        for mv in system.legal_moves(&c) {
            if let Move::Traverse { instance, transition } = mv {
                let tr = system.transition(instance, transition);
                if system.class_of(system.instances()[instance].ports[tr.to]) == class {
                    return Some(true);
                }
            }
            let next = system.apply_move(&c, &mv).expect("legal move");
            if !within(system, &next, &caps) {
                cut = true;
                continue;
            }
            if seen.contains(&next) {
                continue;
            }
            if seen.len() >= caps.states {
                return None;
            }
            seen.insert(next.clone());
            queue.push_back(next);
        }
    }
    if cut {
        None
    } else {
        Some(false)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Plan {
    Yes(Vec<Move>),
    No,
    NoWithinBounds,
}

fn unwind(parent: &HashMap<Configuration, Option<(Configuration, Move)>>, target: &Configuration) -> Vec<Move> {
    let mut moves = Vec::new();
    let mut cur = target.clone();
    while let Some(Some((prev, mv))) = parent.get(&cur) {
        moves.push(*mv);
        cur = prev.clone();
    }
    moves.reverse();
    moves
}

/// Exact targeted reconfiguration without destroyers. Robots are never
/// removed, so configurations with more robots than the target are dropped
/// unexpanded, which keeps the search finite and complete. Every
/// configuration taken off the queue is passed to `expanded`.
pub fn reconfigure_no_destroyer_observed(
    system: &System,
    start: &Configuration,
    target: &Configuration,
    mut expanded: impl FnMut(&Configuration),
) -> Result<Plan, OneError> {
    if !system.destroyer_classes().is_empty() {
        return Err(OneError::HasDestroyer);
    }
    let limit = target.volume();
    if start.volume() > limit {
        return Ok(Plan::No);
    }
    let mut parent: HashMap<Configuration, Option<(Configuration, Move)>> = HashMap::from([(start.clone(), None)]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(c) = queue.pop_front() {
        if c == *target {
            return Ok(Plan::Yes(unwind(&parent, target)));
        }
        expanded(&c);
        for mv in system.legal_moves(&c) {
            let next = system.apply_move(&c, &mv)?;
            if next.volume() > limit || parent.contains_key(&next) {
                continue;
            }
            parent.insert(next.clone(), Some((c.clone(), mv)));
            queue.push_back(next);
        }
    }
    Ok(Plan::No)
}

pub fn reconfigure_no_destroyer(system: &System, start: &Configuration, target: &Configuration) -> Result<Plan, OneError> {
    reconfigure_no_destroyer_observed(system, start, target, |_| {})
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Bounds {
    /// Robots in the system, spawner classes included.
    pub volume: u64,
    pub states: usize,
}

/// Bounded targeted reconfiguration with spawners and destroyers, by direct search.
pub fn reconfigure_with_destroyer(system: &System, start: &Configuration, target: &Configuration, bounds: Bounds) -> Plan {
    if system.destroyer_classes().iter().any(|&c| target.robots[c] > 0) {
        return Plan::No;
    }
    let mut parent: HashMap<Configuration, Option<(Configuration, Move)>> = HashMap::from([(start.clone(), None)]);
    let mut queue = VecDeque::from([start.clone()]);
    while let Some(c) = queue.pop_front() {
        if c == *target {
            return Plan::Yes(unwind(&parent, target));
        }
        for mv in system.legal_moves(&c) {
            let next = system.apply_move(&c, &mv).expect("legal move");
            if next.volume() > bounds.volume || parent.contains_key(&next) || parent.len() >= bounds.states {
                continue;
            }
            parent.insert(next.clone(), Some((c.clone(), mv)));
            queue.push_back(next);
        }
    }
    Plan::NoWithinBounds
}

/// The same question answered by exact reachability on the translated net.
pub fn reconfigure_with_destroyer_via_petri(
    system: &System,
    start: &Configuration,
    target: &Configuration,
    bounds: Bounds,
) -> Result<Plan, OneError> {
    if system.destroyer_classes().iter().any(|&c| target.robots[c] > 0) {
        return Ok(Plan::No);
    }
    let (net, map) = gadgets_to_petri_counting_spawns(system)?;
    let cap = bounds.volume + system.instances().len() as u64;
    let (s, t) = (map.config_to_marking(start), map.config_to_marking(target));
    Ok(match reachable_exact(&net, &s, &t, cap, bounds.states) {
        ExactReach::Yes(path) => Plan::Yes(path.into_iter().map(|r| map.rule_move[r]).collect()),
        ExactReach::NoWithinBounds => Plan::NoWithinBounds,
    })
}

pub fn replay_moves(system: &System, start: &Configuration, moves: &[Move]) -> Result<Configuration, GadgetError> {
    moves.iter().try_fold(start.clone(), |c, mv| system.apply_move(&c, mv))
}
