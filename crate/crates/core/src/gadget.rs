//! Gadgets, systems of gadgets, and multi-robot configurations.
//!
//! A gadget type is a finite transition graph over `(state, location)` pairs.
//! A [`System`] wires gadget instances together through a connection graph;
//! robots are tracked per *location class* (connected component of the
//! connection graph), since a robot moves freely inside its class.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Index of a location in a [`System`].
pub type LocId = usize;

/// One traversal `(state, from) -> (next, to)` of a gadget type.
///
/// All fields index into the owning [`GadgetType`]'s `states` / `locations`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Transition {
    pub state: usize,
    pub from: usize,
    pub to: usize,
    pub next: usize,
}

impl Transition {
    pub const fn new(state: usize, from: usize, to: usize, next: usize) -> Self {
        Transition { state, from, to, next }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GadgetType {
    pub name: String,
    pub states: Vec<String>,
    pub locations: Vec<String>,
    pub transitions: Vec<Transition>,
    /// Declared tunnel pairs, if the type is meant to be a k-tunnel gadget.
    pub tunnels: Option<Vec<(usize, usize)>>,
}

/// A violated well-formedness invariant.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Diagnostic {
    pub invariant: &'static str,
    pub subject: String,
}

impl Diagnostic {
    pub fn new(invariant: &'static str, subject: impl Into<String>) -> Self {
        Diagnostic { invariant, subject: subject.into() }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.invariant, self.subject)
    }
}

impl GadgetType {
    pub fn new(
        name: &str,
        states: &[&str],
        locations: &[&str],
        transitions: &[(&str, &str, &str, &str)],
    ) -> Self {
        let s = |n: &str| states.iter().position(|x| *x == n).expect("unknown state");
        let l = |n: &str| locations.iter().position(|x| *x == n).expect("unknown location");
        GadgetType {
            name: name.to_string(),
            states: states.iter().map(|s| s.to_string()).collect(),
            locations: locations.iter().map(|s| s.to_string()).collect(),
            transitions: transitions
                .iter()
                .map(|&(st, a, b, nx)| Transition::new(s(st), l(a), l(b), s(nx)))
                .collect(),
            tunnels: None,
        }
    }

    pub fn with_tunnels(mut self, pairs: &[(&str, &str)]) -> Self {
        let l = |n: &str| self.location(n).expect("unknown location");
        let tunnels = pairs.iter().map(|&(a, b)| (l(a), l(b))).collect();
        self.tunnels = Some(tunnels);
        self
    }

    pub fn state(&self, name: &str) -> Option<usize> {
        self.states.iter().position(|s| s == name)
    }

    pub fn location(&self, name: &str) -> Option<usize> {
        self.locations.iter().position(|s| s == name)
    }

    /// Transitions open in `state`.
    pub fn open_in(&self, state: usize) -> impl Iterator<Item = (usize, &Transition)> {
        self.transitions.iter().enumerate().filter(move |(_, t)| t.state == state)
    }

    /// The transition open in `state` that enters at `from`, if any.
    pub fn open_from(&self, state: usize, from: usize) -> Option<(usize, &Transition)> {
        self.open_in(state).find(|(_, t)| t.from == from)
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let (ns, nl) = (self.states.len(), self.locations.len());
        for (i, t) in self.transitions.iter().enumerate() {
            if t.state >= ns || t.next >= ns {
                out.push(Diagnostic::new(
                    "transition references undeclared state",
                    format!("{} transition #{i}", self.name),
                ));
            }
            if t.from >= nl || t.to >= nl {
                out.push(Diagnostic::new(
                    "transition references undeclared location",
                    format!("{} transition #{i}", self.name),
                ));
            }
        }
        let mut seen = BTreeSet::new();
        for (i, t) in self.transitions.iter().enumerate() {
            if !seen.insert(*t) {
                out.push(Diagnostic::new(
                    "duplicate transition",
                    format!("{} transition #{i}", self.name),
                ));
            }
        }
        if let Some(tunnels) = &self.tunnels {
            let mut used = BTreeSet::new();
            for &(a, b) in tunnels {
                if a >= nl || b >= nl || a == b || !used.insert(a) || !used.insert(b) {
                    out.push(Diagnostic::new(
                        "tunnels must pair distinct declared locations",
                        format!("{} tunnel ({a}, {b})", self.name),
                    ));
                }
            }
            for (i, t) in self.transitions.iter().enumerate() {
                let inside = tunnels.iter().any(|&(a, b)| {
                    (t.from == a || t.from == b) && (t.to == a || t.to == b)
                });
                if !inside {
                    out.push(Diagnostic::new(
                        "transition leaves its declared tunnel",
                        format!("{} transition #{i}", self.name),
                    ));
                }
            }
        }
        out
    }

    /// Every `(state, location)` has at most one outgoing transition.
    pub fn is_deterministic(&self) -> bool {
        let mut seen = BTreeSet::new();
        self.transitions.iter().all(|t| seen.insert((t.state, t.from)))
    }

    /// Every transition has its inverse.
    pub fn is_reversible(&self) -> bool {
        let set: BTreeSet<_> = self.transitions.iter().copied().collect();
        self.transitions
            .iter()
            .all(|t| set.contains(&Transition::new(t.next, t.to, t.from, t.state)))
    }

    /// Lexicographically smallest partition of the locations into pairs such
    /// that every transition stays within a pair, if one exists.
    pub fn k_tunnel_partition(&self) -> Option<Vec<(usize, usize)>> {
        let n = self.locations.len();
        if n % 2 == 1 {
            return None;
        }
        let mut partner: Vec<Option<usize>> = vec![None; n];
        for t in &self.transitions {
            if t.from == t.to {
                continue;
            }
            for (x, y) in [(t.from, t.to), (t.to, t.from)] {
                match partner[x] {
                    None => partner[x] = Some(y),
                    Some(p) if p == y => {}
                    Some(_) => return None,
                }
            }
        }
        let mut free: Vec<usize> = (0..n).filter(|&i| partner[i].is_none()).collect();
        free.reverse();
        let mut pairs = Vec::with_capacity(n / 2);
        let mut done = vec![false; n];
        for i in 0..n {
            if done[i] {
                continue;
            }
            let j = match partner[i] {
                Some(j) => j,
                None => {
                    // smallest remaining free location other than i
                    free.retain(|&f| f != i && !done[f]);
                    free.pop()?
                }
            };
            done[i] = true;
            done[j] = true;
            pairs.push((i.min(j), i.max(j)));
        }
        Some(pairs)
    }

    /// The state-transition graph (one edge per transition) is acyclic.
    /// Self-loops count as cycles.
    pub fn is_dag(&self) -> bool {
        let n = self.states.len();
        let mut indegree = vec![0usize; n];
        for t in &self.transitions {
            indegree[t.next] += 1;
        }
        let mut stack: Vec<usize> = (0..n).filter(|&s| indegree[s] == 0).collect();
        let mut removed = 0;
        while let Some(s) = stack.pop() {
            removed += 1;
            for t in self.transitions.iter().filter(|t| t.state == s) {
                indegree[t.next] -= 1;
                if indegree[t.next] == 0 {
                    stack.push(t.next);
                }
            }
        }
        removed == n
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    pub name: String,
    /// Index into [`System::types`].
    pub kind: usize,
    pub state: usize,
    /// Global location for each of the type's locations.
    pub ports: Vec<LocId>,
}

/// Location classes: connected components of the connection graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Classes {
    of: Vec<usize>,
    count: usize,
}

impl Classes {
    fn compute(n: usize, edges: &[(LocId, LocId)]) -> Self {
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut x: usize) -> usize {
            while p[x] != x {
                p[x] = p[p[x]];
                x = p[x];
            }
            x
        }
        for &(a, b) in edges {
            if a < n && b < n {
                let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
        let mut id = vec![usize::MAX; n];
        let mut of = vec![0; n];
        let mut count = 0;
        for loc in 0..n {
            let root = find(&mut parent, loc);
            if id[root] == usize::MAX {
                id[root] = count;
                count += 1;
            }
            of[loc] = id[root];
        }
        Classes { of, count }
    }

    pub fn of(&self, loc: LocId) -> usize {
        self.of[loc]
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn members(&self, class: usize) -> impl Iterator<Item = LocId> + '_ {
        self.of.iter().enumerate().filter(move |(_, c)| **c == class).map(|(l, _)| l)
    }
}

/// A system of gadgets. Immutable once built; see [`SystemBuilder`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct System {
    types: Vec<GadgetType>,
    locations: Vec<String>,
    instances: Vec<Instance>,
    connections: Vec<(LocId, LocId)>,
    spawners: Vec<LocId>,
    destroyers: Vec<LocId>,
    directed: bool,
    classes: Classes,
    spawner_classes: Vec<usize>,
    destroyer_classes: Vec<usize>,
    // location -> (instance, port index)
    owner: Vec<Option<(usize, usize)>>,
}

impl System {
    pub fn types(&self) -> &[GadgetType] {
        &self.types
    }
    pub fn locations(&self) -> &[String] {
        &self.locations
    }
    pub fn instances(&self) -> &[Instance] {
        &self.instances
    }
    pub fn connections(&self) -> &[(LocId, LocId)] {
        &self.connections
    }
    pub fn spawners(&self) -> &[LocId] {
        &self.spawners
    }
    pub fn destroyers(&self) -> &[LocId] {
        &self.destroyers
    }
    pub fn is_directed(&self) -> bool {
        self.directed
    }
    pub fn classes(&self) -> &Classes {
        &self.classes
    }
    pub fn class_of(&self, loc: LocId) -> usize {
        self.classes.of(loc)
    }
    pub fn spawner_classes(&self) -> &[usize] {
        &self.spawner_classes
    }
    pub fn destroyer_classes(&self) -> &[usize] {
        &self.destroyer_classes
    }
    pub fn is_spawner_class(&self, class: usize) -> bool {
        self.spawner_classes.contains(&class)
    }
    pub fn is_destroyer_class(&self, class: usize) -> bool {
        self.destroyer_classes.contains(&class)
    }
    pub fn location(&self, name: &str) -> Option<LocId> {
        self.locations.iter().position(|l| l == name)
    }
    pub fn instance(&self, name: &str) -> Option<usize> {
        self.instances.iter().position(|i| i.name == name)
    }
    pub fn type_of(&self, instance: usize) -> &GadgetType {
        &self.types[self.instances[instance].kind]
    }
    /// The instance and port index owning `loc`, or `None` for a free node.
    pub fn owner(&self, loc: LocId) -> Option<(usize, usize)> {
        self.owner[loc]
    }
    /// Global location of the `port`-th location of `instance`.
    pub fn port(&self, instance: usize, port: usize) -> LocId {
        self.instances[instance].ports[port]
    }
    /// Global location of `instance`'s location named `name`.
    pub fn port_named(&self, instance: usize, name: &str) -> Option<LocId> {
        let p = self.type_of(instance).location(name)?;
        Some(self.port(instance, p))
    }

    /// Initial configuration: declared instance states and no robots.
    pub fn initial_configuration(&self) -> Configuration {
        Configuration {
            states: self.instances.iter().map(|i| i.state).collect(),
            robots: vec![0; self.classes.len()],
        }
    }

    /// Rebuild with different instance states (used when exporting configurations).
    pub fn with_states(&self, states: &[usize]) -> System {
        let mut s = self.clone();
        for (inst, &st) in s.instances.iter_mut().zip(states) {
            inst.state = st;
        }
        s
    }

    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for ty in &self.types {
            out.extend(ty.validate());
        }
        let mut holder: Vec<Option<&str>> = vec![None; self.locations.len()];
        for inst in &self.instances {
            let Some(ty) = self.types.get(inst.kind) else {
                out.push(Diagnostic::new("instance references undeclared gadget type", &inst.name));
                continue;
            };
            if inst.state >= ty.states.len() {
                out.push(Diagnostic::new("instance state is not a declared state", &inst.name));
            }
            if inst.ports.len() != ty.locations.len() {
                out.push(Diagnostic::new(
                    "instance must map every type location",
                    &inst.name,
                ));
            }
            let mut local = BTreeSet::new();
            for &p in &inst.ports {
                if p >= self.locations.len() {
                    out.push(Diagnostic::new("port references undeclared location", &inst.name));
                    continue;
                }
                if !local.insert(p) {
                    out.push(Diagnostic::new(
                        "instance locations must be distinct",
                        format!("{} at {}", inst.name, self.locations[p]),
                    ));
                }
                match holder[p] {
                    Some(other) if other != inst.name => out.push(Diagnostic::new(
                        "location belongs to more than one instance",
                        format!("{} ({} and {})", self.locations[p], other, inst.name),
                    )),
                    _ => holder[p] = Some(&inst.name),
                }
            }
        }
        for &(a, b) in &self.connections {
            if a >= self.locations.len() || b >= self.locations.len() {
                out.push(Diagnostic::new("connection references undeclared location", format!("({a}, {b})")));
            }
        }
        for c in &self.spawner_classes {
            if self.destroyer_classes.contains(c) {
                let loc = self.classes.members(*c).next().unwrap_or(0);
                out.push(Diagnostic::new(
                    "spawner and destroyer classes must be disjoint",
                    format!("class of {}", self.locations[loc]),
                ));
            }
        }
        out
    }

    /// Total robots in a configuration.
    pub fn volume(config: &Configuration) -> u64 {
        config.robots.iter().sum()
    }

    pub fn legal_moves(&self, config: &Configuration) -> Vec<Move> {
        let mut moves = Vec::new();
        for (i, inst) in self.instances.iter().enumerate() {
            let ty = &self.types[inst.kind];
            for (t, tr) in ty.open_in(config.states[i]) {
                if config.robots[self.class_of(inst.ports[tr.from])] > 0 {
                    moves.push(Move::Traverse { instance: i, transition: t });
                }
            }
        }
        moves.extend(self.spawner_classes.iter().map(|&class| Move::Spawn { class }));
        moves
    }

    pub fn apply_move(&self, config: &Configuration, mv: &Move) -> Result<Configuration, GadgetError> {
        let mut next = config.clone();
        match *mv {
            Move::Spawn { class } => {
                if !self.is_spawner_class(class) {
                    return Err(GadgetError::IllegalMove(*mv));
                }
                next.robots[class] += 1;
            }
            Move::Traverse { instance, transition } => {
                let inst = self.instances.get(instance).ok_or(GadgetError::IllegalMove(*mv))?;
                let tr = self.types[inst.kind]
                    .transitions
                    .get(transition)
                    .ok_or(GadgetError::IllegalMove(*mv))?;
                let from = self.class_of(inst.ports[tr.from]);
                if tr.state != config.states[instance] || config.robots[from] == 0 {
                    return Err(GadgetError::IllegalMove(*mv));
                }
                next.robots[from] -= 1;
                let to = self.class_of(inst.ports[tr.to]);
                if !self.is_destroyer_class(to) {
                    next.robots[to] += 1;
                }
                next.states[instance] = tr.next;
            }
        }
        Ok(next)
    }

    /// The transition a traverse move uses.
    pub fn transition(&self, instance: usize, transition: usize) -> &Transition {
        &self.type_of(instance).transitions[transition]
    }
}

#[derive(Clone, Debug, Default)]
pub struct SystemBuilder {
    types: Vec<GadgetType>,
    locations: Vec<String>,
    instances: Vec<Instance>,
    connections: Vec<(LocId, LocId)>,
    spawners: Vec<LocId>,
    destroyers: Vec<LocId>,
    directed: bool,
}

impl SystemBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn directed(mut self, directed: bool) -> Self {
        self.directed = directed;
        self
    }

    pub fn set_directed(&mut self, directed: bool) {
        self.directed = directed;
    }

    /// Register a gadget type, reusing an existing one with the same name.
    pub fn add_type(&mut self, ty: GadgetType) -> usize {
        if let Some(i) = self.types.iter().position(|t| t.name == ty.name) {
            return i;
        }
        self.types.push(ty);
        self.types.len() - 1
    }

    /// Location by name, created if missing.
    pub fn node(&mut self, name: &str) -> LocId {
        if let Some(i) = self.locations.iter().position(|l| l == name) {
            return i;
        }
        self.locations.push(name.to_string());
        self.locations.len() - 1
    }

    pub fn lookup(&self, name: &str) -> Option<LocId> {
        self.locations.iter().position(|l| l == name)
    }

    pub fn type_index(&self, name: &str) -> Option<usize> {
        self.types.iter().position(|t| t.name == name)
    }

    /// Add an instance whose ports are fresh locations named `name.LOC`.
    pub fn add_instance(&mut self, name: &str, kind: usize, state: usize) -> usize {
        let locs = self.types[kind].locations.clone();
        let ports = locs.iter().map(|l| self.node(&format!("{name}.{l}"))).collect();
        self.add_instance_with_ports(name, kind, state, ports)
    }

    pub fn add_instance_with_ports(
        &mut self,
        name: &str,
        kind: usize,
        state: usize,
        ports: Vec<LocId>,
    ) -> usize {
        self.instances.push(Instance { name: name.to_string(), kind, state, ports });
        self.instances.len() - 1
    }

    /// Port `loc` (by type location name) of an already added instance.
    pub fn port(&self, instance: usize, loc: &str) -> LocId {
        let inst = &self.instances[instance];
        let p = self.types[inst.kind].location(loc).expect("unknown port name");
        inst.ports[p]
    }

    pub fn connect(&mut self, a: LocId, b: LocId) {
        self.connections.push((a, b));
    }

    pub fn spawner(&mut self, loc: LocId) {
        self.spawners.push(loc);
    }

    pub fn destroyer(&mut self, loc: LocId) {
        self.destroyers.push(loc);
    }

    pub fn instance_count(&self) -> usize {
        self.instances.len()
    }

    pub fn build(self) -> System {
        let n = self.locations.len();
        let classes = Classes::compute(n, &self.connections);
        let dedup = |locs: &[LocId]| {
            let mut v: Vec<usize> = Vec::new();
            for &l in locs {
                if l < n && !v.contains(&classes.of(l)) {
                    v.push(classes.of(l));
                }
            }
            v
        };
        let spawner_classes = dedup(&self.spawners);
        let destroyer_classes = dedup(&self.destroyers);
        let mut owner = vec![None; n];
        for (i, inst) in self.instances.iter().enumerate() {
            for (p, &loc) in inst.ports.iter().enumerate() {
                if loc < n && owner[loc].is_none() {
                    owner[loc] = Some((i, p));
                }
            }
        }
        System {
            types: self.types,
            locations: self.locations,
            instances: self.instances,
            connections: self.connections,
            spawners: self.spawners,
            destroyers: self.destroyers,
            directed: self.directed,
            classes,
            spawner_classes,
            destroyer_classes,
            owner,
        }
    }
}

impl From<&System> for SystemBuilder {
    fn from(s: &System) -> Self {
        SystemBuilder {
            types: s.types.clone(),
            locations: s.locations.clone(),
            instances: s.instances.clone(),
            connections: s.connections.clone(),
            spawners: s.spawners.clone(),
            destroyers: s.destroyers.clone(),
            directed: s.directed,
        }
    }
}

/// Gadget states plus a robot count per location class.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Configuration {
    pub states: Vec<usize>,
    pub robots: Vec<u64>,
}

impl Configuration {
    pub fn volume(&self) -> u64 {
        self.robots.iter().sum()
    }
}

/// A single player action. Destruction is implicit: a robot entering a
/// destroyer class disappears as part of its traverse move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Move {
    Traverse { instance: usize, transition: usize },
    Spawn { class: usize },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GadgetError {
    #[error("illegal move {0:?}")]
    IllegalMove(Move),
}
