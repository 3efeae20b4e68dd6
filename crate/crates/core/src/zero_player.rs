//! Deterministic round-robin simulation of directed systems with spawners.
//!
//! Each round every robot takes one turn in spawn order, then every spawner
//! adds one robot. A turn follows outgoing edges until the robot traverses
//! exactly one gadget or gets stuck. Later robots in a round observe the
//! gadget states left by earlier ones.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{Diagnostic, LocId, System};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SimError {
    #[error("robot {robot} loops through location {location} without traversing a gadget")]
    CycleWithoutGadget { robot: usize, location: LocId },
    #[error("no robot with id {0}")]
    NoSuchRobot(usize),
    #[error("trace does not replay: {0}")]
    BadTrace(String),
}

/// Gadget states, robot positions in spawn order, and the round counter.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct World {
    pub states: Vec<usize>,
    pub robots: Vec<LocId>,
    pub round: u64,
}

impl World {
    /// Declared instance states, no robots, round 0.
    pub fn initial(system: &System) -> World {
        World { states: system.instances().iter().map(|i| i.state).collect(), robots: Vec::new(), round: 0 }
    }

    /// FNV-1a digest of the full world, for cheap equality checks across runs.
    pub fn digest(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(self.round);
        eat(self.states.len() as u64);
        self.states.iter().for_each(|&s| eat(s as u64));
        eat(self.robots.len() as u64);
        self.robots.iter().for_each(|&r| eat(r as u64));
        h
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub robot: usize,
    /// Every location visited during the turn, starting position included.
    pub path: Vec<LocId>,
    /// `(instance, transition)` traversed, or `None` if the robot got stuck.
    pub traversal: Option<(usize, usize)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundEvents {
    pub round: u64,
    pub turns: Vec<TurnEvent>,
    /// `(new robot id, spawner location)` in spawning order.
    pub spawns: Vec<(usize, LocId)>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: World,
    pub rounds: Vec<RoundEvents>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reach {
    Reached(u64),
    NotWithinBudget,
}

/// Structural checks for directed-edge systems.
pub fn validate_directed(system: &System) -> Vec<Diagnostic> {
    let n = system.locations().len();
    let mut out = Vec::new();
    if !system.is_directed() {
        out.push(Diagnostic::new("connection graph must be directed", "system"));
    }
    let mut indeg = vec![0usize; n];
    let mut outdeg = vec![0usize; n];
    for &(a, b) in system.connections() {
        if a < n && b < n {
            outdeg[a] += 1;
            indeg[b] += 1;
        }
    }
    for loc in 0..n {
        let name = &system.locations()[loc];
        if system.owner(loc).is_some() {
            if outdeg[loc] > 0 && (indeg[loc] > 0 || outdeg[loc] > 1) {
                out.push(Diagnostic::new(
                    "gadget location needs only incoming edges, or one outgoing edge",
                    name.clone(),
                ));
            }
        } else if outdeg[loc] > 1 {
            out.push(Diagnostic::new("free node has more than one outgoing edge", name.clone()));
        }
    }
    for (i, inst) in system.instances().iter().enumerate() {
        if !system.type_of(i).is_deterministic() {
            out.push(Diagnostic::new("gadget type must be deterministic", inst.name.clone()));
        }
    }
    // With out-degree <= 1 every cycle of edges is a cycle with no gadget entrance.
    let succ = successors(system);
    let mut color = vec![0u8; n];
    for start in 0..n {
        let mut walk = Vec::new();
        let mut cur = Some(start);
        while let Some(v) = cur {
            match color[v] {
                0 => {
                    color[v] = 1;
                    walk.push(v);
                    cur = succ[v];
                }
                1 => {
                    out.push(Diagnostic::new(
                        "edge cycle without a gadget",
                        system.locations()[v].clone(),
                    ));
                    break;
                }
                _ => break,
            }
        }
        for v in walk {
            color[v] = 2;
        }
    }
    out
}

fn successors(system: &System) -> Vec<Option<LocId>> {
    let mut succ = vec![None; system.locations().len()];
    for &(a, b) in system.connections() {
        succ[a].get_or_insert(b);
    }
    succ
}

/// Round-robin simulator over a directed system.
pub struct Simulator<'a> {
    system: &'a System,
    succ: Vec<Option<LocId>>,
}

impl<'a> Simulator<'a> {
    pub fn new(system: &'a System) -> Self {
        Simulator { system, succ: successors(system) }
    }

    pub fn system(&self) -> &System {
        self.system
    }

    pub fn robot_turn(&self, world: &mut World, robot: usize) -> Result<TurnEvent, SimError> {
        let mut node = *world.robots.get(robot).ok_or(SimError::NoSuchRobot(robot))?;
        let mut path = vec![node];
        let mut seen = BTreeSet::from([node]);
        loop {
            if let Some(next) = self.succ[node] {
                if !seen.insert(next) {
                    return Err(SimError::CycleWithoutGadget { robot, location: next });
                }
                node = next;
                path.push(node);
                continue;
            }
            let mut traversal = None;
            if let Some((inst, port)) = self.system.owner(node) {
                let ty = self.system.type_of(inst);
                if let Some((t, tr)) = ty.open_from(world.states[inst], port) {
                    world.states[inst] = tr.next;
                    node = self.system.port(inst, tr.to);
                    path.push(node);
                    traversal = Some((inst, t));
                }
            }
            world.robots[robot] = node;
            return Ok(TurnEvent { robot, path, traversal });
        }
    }

    pub fn step_round(&self, world: &mut World) -> Result<RoundEvents, SimError> {
        let mut turns = Vec::with_capacity(world.robots.len());
        for robot in 0..world.robots.len() {
            turns.push(self.robot_turn(world, robot)?);
        }
        let mut spawns = Vec::with_capacity(self.system.spawners().len());
        for &loc in self.system.spawners() {
            spawns.push((world.robots.len(), loc));
            world.robots.push(loc);
        }
        world.round += 1;
        Ok(RoundEvents { round: world.round, turns, spawns })
    }

    /// Run `rounds` rounds, returning the final world and its trace.
    pub fn simulate(&self, world: &World, rounds: u64) -> Result<(World, Trace), SimError> {
        let mut w = world.clone();
        let mut trace = Trace { initial: world.clone(), rounds: Vec::new() };
        for _ in 0..rounds {
            trace.rounds.push(self.step_round(&mut w)?);
        }
        Ok((w, trace))
    }

    /// First round (counted by the world's round counter, at most `max_rounds`)
    /// in which some robot touches `target`, including passing through it.
    pub fn reach_within(&self, world: &World, target: LocId, max_rounds: u64) -> Result<Reach, SimError> {
        if world.robots.contains(&target) {
            return Ok(Reach::Reached(world.round));
        }
        let mut w = world.clone();
        while w.round < max_rounds {
            let ev = self.step_round(&mut w)?;
            if touches(&ev, target) {
                return Ok(Reach::Reached(ev.round));
            }
        }
        Ok(Reach::NotWithinBudget)
    }
}

pub fn touches(ev: &RoundEvents, target: LocId) -> bool {
    ev.turns.iter().any(|t| t.path.contains(&target)) || ev.spawns.iter().any(|&(_, l)| l == target)
}

/// Re-apply a trace's events to its initial world.
pub fn replay(system: &System, trace: &Trace) -> Result<World, SimError> {
    let mut w = trace.initial.clone();
    for ev in &trace.rounds {
        for t in &ev.turns {
            let pos = w.robots.get_mut(t.robot).ok_or(SimError::NoSuchRobot(t.robot))?;
            if t.path.first() != Some(pos) {
                return Err(SimError::BadTrace(format!("robot {} starts elsewhere in round {}", t.robot, ev.round)));
            }
            *pos = *t.path.last().expect("paths are nonempty");
            if let Some((inst, tr)) = t.traversal {
                let tr = system.transition(inst, tr);
                if w.states[inst] != tr.state {
                    return Err(SimError::BadTrace(format!("closed transition in round {}", ev.round)));
                }
                w.states[inst] = tr.next;
            }
        }
        for &(id, loc) in &ev.spawns {
            if id != w.robots.len() {
                return Err(SimError::BadTrace(format!("spawn id {id} out of order")));
            }
            w.robots.push(loc);
        }
        w.round = ev.round;
    }
    Ok(w)
}

/// Line-oriented rendering: `round robot a>b>c instance:transition|stuck`, and
/// `round robot spawn@loc` for spawns.
pub fn trace_to_text(system: &System, trace: &Trace) -> String {
    let name = |l: LocId| system.locations()[l].as_str();
    let mut s = String::new();
    for ev in &trace.rounds {
        for t in &ev.turns {
            let path: Vec<&str> = t.path.iter().map(|&l| name(l)).collect();
            let how = match t.traversal {
                Some((i, tr)) => format!("{}:{}", system.instances()[i].name, tr),
                None => "stuck".to_string(),
            };
            s.push_str(&format!("{} {} {} {}\n", ev.round, t.robot, path.join(">"), how));
        }
        for &(id, loc) in &ev.spawns {
            s.push_str(&format!("{} {} spawn@{}\n", ev.round, id, name(loc)));
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::SystemBuilder;
    use crate::library;

    /// spawn -> toggle.A ; toggle.B -> out
    fn toggle_line() -> (System, LocId) {
        let mut b = SystemBuilder::new().directed(true);
        let k = b.add_type(library::one_toggle());
        let g = b.add_instance("t", k, 0);
        let s = b.node("spawn");
        let out = b.node("out");
        let (a, bb) = (b.port(g, "A"), b.port(g, "B"));
        b.connect(s, a);
        b.connect(bb, out);
        b.spawner(s);
        (b.build(), out)
    }

    #[test]
    fn directed_validation() {
        let (sys, _) = toggle_line();
        assert!(validate_directed(&sys).is_empty());
        assert!(validate_directed(&SystemBuilder::new().directed(true).build()).is_empty());

        let mut b = SystemBuilder::new().directed(true);
        let k = b.add_type(library::one_toggle());
        let g = b.add_instance("t", k, 0);
        let (x, y) = (b.node("x"), b.node("y"));
        let exit = b.port(g, "B");
        b.connect(exit, x);
        b.connect(exit, y);
        let d = validate_directed(&b.build());
        assert_eq!(d.len(), 1);
        assert!(d[0].invariant.starts_with("gadget location"));

        let mut b = SystemBuilder::new().directed(true);
        let (x, y) = (b.node("x"), b.node("y"));
        b.connect(x, y);
        b.connect(y, x);
        assert!(validate_directed(&b.build()).iter().any(|d| d.invariant == "edge cycle without a gadget"));
    }

    #[test]
    fn turn_through_open_toggle() {
        let (sys, out) = toggle_line();
        let sim = Simulator::new(&sys);
        let mut w = World::initial(&sys);
        w.robots.push(sys.location("spawn").unwrap());
        let ev = sim.robot_turn(&mut w, 0).unwrap();
        assert_eq!(ev.traversal, Some((0, 0)));
        assert_eq!(w.robots[0], sys.port_named(0, "B").unwrap());
        assert_eq!(w.states[0], 1);
        // next turn walks to the dead end
        let ev = sim.robot_turn(&mut w, 0).unwrap();
        assert_eq!(ev.traversal, None);
        assert_eq!(w.robots[0], out);
    }

    #[test]
    fn closed_entrance_stays_put() {
        let (sys, _) = toggle_line();
        let sim = Simulator::new(&sys);
        let mut w = World::initial(&sys);
        w.states[0] = 1;
        let a = sys.port_named(0, "A").unwrap();
        w.robots.push(a);
        let ev = sim.robot_turn(&mut w, 0).unwrap();
        assert_eq!((ev.path, ev.traversal, w.robots[0]), (vec![a], None, a));
    }

    #[test]
    fn wire_chain_to_dead_end() {
        let mut b = SystemBuilder::new().directed(true);
        let n: Vec<_> = (0..4).map(|i| b.node(&format!("n{i}"))).collect();
        for w in n.windows(2) {
            b.connect(w[0], w[1]);
        }
        let sys = b.build();
        let sim = Simulator::new(&sys);
        let mut w = World::initial(&sys);
        w.robots.push(n[0]);
        let ev = sim.robot_turn(&mut w, 0).unwrap();
        assert_eq!(ev.path, n);
        assert_eq!(w.robots[0], n[3]);
    }

    #[test]
    fn cycle_is_an_error() {
        let mut b = SystemBuilder::new().directed(true);
        let (x, y) = (b.node("x"), b.node("y"));
        b.connect(x, y);
        b.connect(y, x);
        let sys = b.build();
        let mut w = World::initial(&sys);
        w.robots.push(x);
        assert!(matches!(Simulator::new(&sys).robot_turn(&mut w, 0), Err(SimError::CycleWithoutGadget { .. })));
    }

    #[test]
    fn spawning_arithmetic() {
        let mut b = SystemBuilder::new().directed(true);
        let s: Vec<_> = (0..3).map(|i| b.node(&format!("s{i}"))).collect();
        for &x in &s {
            b.spawner(x);
        }
        let sys = b.build();
        let sim = Simulator::new(&sys);
        let (w, _) = sim.simulate(&World::initial(&sys), 5).unwrap();
        assert_eq!(w.robots.len(), 15);
        assert_eq!(w.round, 5);

        let (sys1, _) = toggle_line();
        let (w, _) = Simulator::new(&sys1).simulate(&World::initial(&sys1), 1).unwrap();
        assert_eq!(w.robots.len(), 1);
    }

    #[test]
    fn reach_examples() {
        let (sys, out) = toggle_line();
        let sim = Simulator::new(&sys);
        let w = World::initial(&sys);
        let spawn = sys.location("spawn").unwrap();
        assert_eq!(sim.reach_within(&w, spawn, 5).unwrap(), Reach::Reached(1));
        // spawned round 1, toggle round 2, walk to out round 3
        assert_eq!(sim.reach_within(&w, out, 10).unwrap(), Reach::Reached(3));
        assert_eq!(sim.reach_within(&w, out, 2).unwrap(), Reach::NotWithinBudget);

        let mut b = SystemBuilder::from(&sys);
        let lonely = b.node("lonely");
        let sys2 = b.build();
        let sim2 = Simulator::new(&sys2);
        for budget in [0, 1, 10, 50] {
            assert_eq!(sim2.reach_within(&World::initial(&sys2), lonely, budget).unwrap(), Reach::NotWithinBudget);
        }
    }

    #[test]
    fn determinism_replay_and_monotone_budget() {
        let (sys, out) = toggle_line();
        let sim = Simulator::new(&sys);
        let w0 = World::initial(&sys);
        let (a, ta) = sim.simulate(&w0, 12).unwrap();
        let (b, tb) = sim.simulate(&w0, 12).unwrap();
        assert_eq!((a.digest(), &ta), (b.digest(), &tb));
        assert_eq!(replay(&sys, &ta).unwrap(), a);
        for ev in &ta.rounds {
            assert!(ev.turns.iter().all(|t| t.path.len() <= sys.locations().len() + 1));
        }
        for budget in 3..10 {
            assert_eq!(sim.reach_within(&w0, out, budget).unwrap(), Reach::Reached(3));
        }
        assert!(trace_to_text(&sys, &ta).contains("spawn@spawn"));
    }
}
