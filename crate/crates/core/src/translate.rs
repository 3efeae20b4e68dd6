//! Gadget systems to Petri nets, and Petri nets to systems of symmetric
//! self-closing doors.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{Configuration, LocId, Move, System, SystemBuilder};
use crate::library;
use crate::one_player::{brute_reach_set, Caps};
use crate::petri::{forward_reach, Marking, Net, Rule};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TranslateError {
    #[error("gadget type {0} is not deterministic")]
    NondeterministicGadget(String),
    #[error("state dishes of instance {0} do not hold exactly one token")]
    NotAConfigurationMarking(String),
    #[error("marking has length {got}, net has {expected} dishes")]
    Dimension { expected: usize, got: usize },
}

/// How a gadget system's pieces appear in its net.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GadgetNetMap {
    /// `state_dish[instance][state]`.
    pub state_dish: Vec<Vec<usize>>,
    /// Robot dish of each location class; `None` for sources and sinks.
    pub robot_dish: Vec<Option<usize>>,
    /// The move each rule performs.
    pub rule_move: Vec<Move>,
    pub instance_names: Vec<String>,
}

impl GadgetNetMap {
    pub fn config_to_marking(&self, config: &Configuration) -> Marking {
        let n = self.state_dish.iter().map(Vec::len).sum::<usize>() + self.robot_dish.iter().flatten().count();
        let mut m = vec![0; n];
        for (i, &s) in config.states.iter().enumerate() {
            m[self.state_dish[i][s]] = 1;
        }
        for (c, d) in self.robot_dish.iter().enumerate() {
            if let Some(d) = d {
                m[*d] = config.robots[c];
            }
        }
        m
    }

    /// Inverse of [`config_to_marking`](Self::config_to_marking); classes without a dish get 0 robots.
    pub fn marking_to_config(&self, m: &[u64]) -> Result<Configuration, TranslateError> {
        let n = self.state_dish.iter().map(Vec::len).sum::<usize>() + self.robot_dish.iter().flatten().count();
        if m.len() != n {
            return Err(TranslateError::Dimension { expected: n, got: m.len() });
        }
        let mut states = Vec::with_capacity(self.state_dish.len());
        for (i, dishes) in self.state_dish.iter().enumerate() {
            let total: u64 = dishes.iter().map(|&d| m[d]).sum();
            let held = dishes.iter().position(|&d| m[d] == 1);
            match (total, held) {
                (1, Some(s)) => states.push(s),
                _ => return Err(TranslateError::NotAConfigurationMarking(self.instance_names[i].clone())),
            }
        }
        let robots = self.robot_dish.iter().map(|d| d.map_or(0, |d| m[d])).collect();
        Ok(Configuration { states, robots })
    }
}

/// One state dish per (instance, state), one robot dish per ordinary class,
/// one rule per transition. Robots drawn from a spawner class or sent into a
/// spawner or destroyer class have no token. Transitions out of a destroyer
/// class can never fire and get no rule.
pub fn gadgets_to_petri(system: &System) -> Result<(Net, GadgetNetMap), TranslateError> {
    translate_system(system, false)
}

/// Like [`gadgets_to_petri`], but spawner classes keep a dish counting
/// spawned robots, fed by a token-creating rule per spawner. Reachable
/// markings then match configurations exactly, spawner counts included.
pub fn gadgets_to_petri_counting_spawns(system: &System) -> Result<(Net, GadgetNetMap), TranslateError> {
    translate_system(system, true)
}

fn translate_system(system: &System, count_spawns: bool) -> Result<(Net, GadgetNetMap), TranslateError> {
    for i in 0..system.instances().len() {
        if !system.type_of(i).is_deterministic() {
            return Err(TranslateError::NondeterministicGadget(system.type_of(i).name.clone()));
        }
    }
    let mut dishes = Vec::new();
    let mut state_dish = Vec::new();
    for (i, inst) in system.instances().iter().enumerate() {
        let ty = system.type_of(i);
        state_dish.push(
            ty.states
                .iter()
                .map(|s| {
                    dishes.push(format!("{}={}", inst.name, s));
                    dishes.len() - 1
                })
                .collect::<Vec<_>>(),
        );
    }
    let classes = system.classes();
    let mut robot_dish = vec![None; classes.len()];
    for (c, slot) in robot_dish.iter_mut().enumerate() {
        let keep = !system.is_destroyer_class(c) && (count_spawns || !system.is_spawner_class(c));
        if keep {
            let first = classes.members(c).next().expect("classes are nonempty");
            dishes.push(format!("@{}", system.locations()[first]));
            *slot = Some(dishes.len() - 1);
        }
    }
    let n = dishes.len();
    let mut rules = Vec::new();
    let mut rule_move = Vec::new();
    for (i, inst) in system.instances().iter().enumerate() {
        for (t, tr) in system.type_of(i).transitions.iter().enumerate() {
            let from = system.class_of(inst.ports[tr.from]);
            let to = system.class_of(inst.ports[tr.to]);
            if system.is_destroyer_class(from) {
                continue;
            }
            let (mut u, mut v) = (vec![0; n], vec![0; n]);
            u[state_dish[i][tr.state]] += 1;
            v[state_dish[i][tr.next]] += 1;
            if let Some(d) = robot_dish[from] {
                u[d] += 1;
            }
            if let Some(d) = robot_dish[to] {
                v[d] += 1;
            }
            rules.push(Rule::new(u, v));
            rule_move.push(Move::Traverse { instance: i, transition: t });
        }
    }
    if count_spawns {
        for &c in system.spawner_classes() {
            let mut v = vec![0; n];
            v[robot_dish[c].expect("spawner dish")] = 1;
            rules.push(Rule::new(vec![0; n], v));
            rule_move.push(Move::Spawn { class: c });
        }
    }
    let names = system.instances().iter().map(|i| i.name.clone()).collect();
    Ok((Net { dishes, rules }, GadgetNetMap { state_dish, robot_dish, rule_move, instance_names: names }))
}

/// Where each part of a net lives in its door system.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetGadgetMap {
    /// Location of each dish.
    pub dish: Vec<LocId>,
    /// Home of the control robot.
    pub control: LocId,
    pub spawner: Option<LocId>,
    /// Where surplus inputs of volume-decreasing rules end up.
    pub holding: Option<LocId>,
    /// Door instances of each rule, inputs first.
    pub doors: Vec<Vec<usize>>,
    /// Rule-private locations between an input door and its paired output door.
    pub intermediates: Vec<Vec<LocId>>,
}

impl NetGadgetMap {
    /// Clean configuration: doors closed on the control side, control robot
    /// home, `marking` on the dishes and `holding` robots in the holding class.
    pub fn config(&self, system: &System, marking: &[u64], holding: u64) -> Configuration {
        let mut c = system.initial_configuration();
        for (d, &loc) in self.dish.iter().enumerate() {
            c.robots[system.class_of(loc)] = marking[d];
        }
        c.robots[system.class_of(self.control)] = 1;
        if let Some(h) = self.holding {
            c.robots[system.class_of(h)] = holding;
        }
        c
    }

    /// Dish counts and holding count of a configuration in which no rule is
    /// part way through firing; `None` otherwise. Spawner robots are ignored.
    pub fn project(&self, system: &System, c: &Configuration) -> Option<(Marking, u64)> {
        if c.states.iter().any(|&s| s != 0) || c.robots[system.class_of(self.control)] != 1 {
            return None;
        }
        let mut allowed = vec![false; c.robots.len()];
        for &l in self.dish.iter().chain([self.control].iter()).chain(self.spawner.iter()).chain(self.holding.iter()) {
            allowed[system.class_of(l)] = true;
        }
        if c.robots.iter().zip(&allowed).any(|(&n, &ok)| n > 0 && !ok) {
            return None;
        }
        let m = self.dish.iter().map(|&l| c.robots[system.class_of(l)]).collect();
        let h = self.holding.map_or(0, |l| c.robots[system.class_of(l)]);
        Some((m, h))
    }
}

/// Expand a count vector into dish indices, ascending.
fn expand(x: &[u64]) -> Vec<usize> {
    x.iter().enumerate().flat_map(|(d, &k)| std::iter::repeat(d).take(k as usize)).collect()
}

/// Door system for a net: one class per dish, a control robot, and for each
/// rule `(u, v)` a serial control path through `|u|` input doors and `|v|`
/// output doors. Returns the system, its map and the start configuration.
pub fn petri_to_gadgets(net: &Net, start: &[u64]) -> (System, NetGadgetMap, Configuration) {
    let mut b = SystemBuilder::new();
    let door = b.add_type(library::self_closing_door());
    let dish: Vec<LocId> = net.dishes.iter().map(|d| b.node(&format!("dish.{d}"))).collect();
    let control = b.node("control");
    let grows = net.rules.iter().any(|r| r.v.iter().sum::<u64>() > r.u.iter().sum::<u64>());
    let shrinks = net.rules.iter().any(|r| r.u.iter().sum::<u64>() > r.v.iter().sum::<u64>());
    let spawner = grows.then(|| b.node("spawn"));
    let holding = shrinks.then(|| b.node("holding"));
    if let Some(s) = spawner {
        b.spawner(s);
    }
    let mut doors = Vec::new();
    let mut intermediates = Vec::new();
    let mut edges = Vec::new();
    for (ri, rule) in net.rules.iter().enumerate() {
        let (ins, outs) = (expand(&rule.u), expand(&rule.v));
        let mut mine = Vec::new();
        let mut mids = Vec::new();
        let mut prev = control;
        for (j, &d) in ins.iter().enumerate() {
            let g = b.add_instance(&format!("r{}.in{}", ri + 1, j + 1), door, 0);
            edges.push((dish[d], b.port(g, "A")));
            if j < outs.len() {
                mids.push(b.port(g, "B"));
            } else {
                edges.push((b.port(g, "B"), holding.expect("holding exists")));
            }
            edges.push((prev, b.port(g, "C")));
            prev = b.port(g, "D");
            mine.push(g);
        }
        for (k, &d) in outs.iter().enumerate() {
            let g = b.add_instance(&format!("r{}.out{}", ri + 1, k + 1), door, 0);
            edges.push((b.port(g, "D"), dish[d]));
            let feed = mids.get(k).copied().unwrap_or_else(|| spawner.expect("spawner exists"));
            edges.push((feed, b.port(g, "C")));
            edges.push((prev, b.port(g, "A")));
            prev = b.port(g, "B");
            mine.push(g);
        }
        if prev != control {
            edges.push((prev, control));
        }
        doors.push(mine);
        intermediates.push(mids);
    }
    for (x, y) in edges {
        b.connect(x, y);
    }
    let system = b.build();
    let map = NetGadgetMap { dish, control, spawner, holding, doors, intermediates };
    let cfg = map.config(&system, start, 0);
    (system, map, cfg)
}

/// The net with an extra last dish collecting the surplus inputs of every
/// volume-decreasing rule, mirroring the holding class of the door system.
pub fn with_holding_dish(net: &Net) -> Net {
    let mut out = net.clone();
    out.dishes.push("holding".into());
    for r in &mut out.rules {
        let (pu, pv) = (r.u.iter().sum::<u64>(), r.v.iter().sum::<u64>());
        r.u.push(0);
        r.v.push(pu.saturating_sub(pv));
    }
    out
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SimulationReport {
    /// Both reach sets were computed without hitting a state cap.
    pub exhaustive: bool,
    /// Projected gadget-side configurations missing on the net side.
    pub gadget_only: Vec<Marking>,
    /// Net markings missing on the gadget side.
    pub net_only: Vec<Marking>,
    pub compared: usize,
}

impl SimulationReport {
    pub fn holds(&self) -> bool {
        self.exhaustive && self.gadget_only.is_empty() && self.net_only.is_empty()
    }

    fn from_sets(exhaustive: bool, g: HashSet<Marking>, n: HashSet<Marking>) -> Self {
        let mut gadget_only: Vec<Marking> = g.difference(&n).cloned().collect();
        let mut net_only: Vec<Marking> = n.difference(&g).cloned().collect();
        gadget_only.sort();
        net_only.sort();
        SimulationReport { exhaustive, gadget_only, net_only, compared: g.len().max(n.len()) }
    }
}

/// Compares the brute-force reach set of `system` from `start`, with at most
/// `volume` robots outside spawners, against `forward_reach` on `net`.
pub fn compare_gadgets_and_net(
    system: &System,
    start: &Configuration,
    net: &Net,
    map: &GadgetNetMap,
    volume: u64,
    state_cap: usize,
) -> SimulationReport {
    let start_pool: u64 = system.spawner_classes().iter().map(|&c| start.robots[c]).sum();
    let caps = Caps { volume, spawner: volume + start_pool, states: state_cap };
    let g = brute_reach_set(system, start, caps);
    let f = forward_reach(net, &map.config_to_marking(start), volume + system.instances().len() as u64, state_cap);
    let gs = g.configs.iter().map(|c| map.config_to_marking(c)).collect();
    SimulationReport::from_sets(g.exhausted && f.exhausted, gs, f.markings)
}

pub fn verify_gadgets_to_petri(
    system: &System,
    start: &Configuration,
    volume: u64,
    state_cap: usize,
) -> Result<SimulationReport, TranslateError> {
    let (net, map) = gadgets_to_petri(system)?;
    Ok(compare_gadgets_and_net(system, start, &net, &map, volume, state_cap))
}

/// Compares clean configurations of the door system against the net with a
/// holding dish, both capped at `volume` tokens (control robot excluded).
pub fn compare_net_and_doors(
    net: &Net,
    start: &[u64],
    system: &System,
    map: &NetGadgetMap,
    volume: u64,
    state_cap: usize,
) -> SimulationReport {
    let aug = with_holding_dish(net);
    let mut s = start.to_vec();
    s.push(0);
    let f = forward_reach(&aug, &s, volume, state_cap);
    let caps = Caps { volume: volume + 1, spawner: 1, states: state_cap };
    let g = brute_reach_set(system, &map.config(system, start, 0), caps);
    let gs = g
        .configs
        .iter()
        .filter_map(|c| map.project(system, c))
        .map(|(mut m, h)| {
            m.push(h);
            m
        })
        .collect();
    SimulationReport::from_sets(g.exhausted && f.exhausted, gs, f.markings)
}

pub fn verify_petri_to_gadgets(net: &Net, start: &[u64], volume: u64, state_cap: usize) -> SimulationReport {
    let (system, map, _) = petri_to_gadgets(net, start);
    compare_net_and_doors(net, start, &system, &map, volume, state_cap)
}
