//! JSON interchange files. Every file carries `"format": 1`; systems,
//! configurations and G4 instances refer to things by name.

use std::collections::BTreeMap;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{Configuration, GadgetType, Move, System, SystemBuilder, Transition};
use crate::library;
use crate::petri::{Marking, Net};
use crate::two_player::{G4Instance, G4Var, Literal};
use crate::zero_player::Trace;

pub const FORMAT: u32 = 1;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FormatError {
    #[error("line {line}, column {column}: {msg}")]
    Syntax { line: usize, column: usize, msg: String },
    #[error("{path}: {msg}")]
    Invalid { path: String, msg: String },
}

fn invalid<T>(path: impl Into<String>, msg: impl Into<String>) -> Result<T, FormatError> {
    Err(FormatError::Invalid { path: path.into(), msg: msg.into() })
}

fn parse_json<T: DeserializeOwned>(text: &str) -> Result<T, FormatError> {
    #[derive(Deserialize)]
    struct Header {
        format: Option<u32>,
    }
    let syntax = |e: serde_json::Error| {
        let msg = e.to_string();
        let msg = match msg.rfind(" at line ") {
            Some(i) => msg[..i].to_string(),
            None => msg,
        };
        FormatError::Syntax { line: e.line(), column: e.column(), msg }
    };
    let header: Header = serde_json::from_str(text).map_err(syntax)?;
    match header.format {
        Some(FORMAT) => {}
        Some(v) => return invalid("format", format!("unsupported version {v}")),
        None => return invalid("format", "missing version field"),
    }
    serde_json::from_str(text).map_err(syntax)
}

fn emit_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable");
    s.push('\n');
    s
}

// ---------------------------------------------------------------- systems

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TypeSpec {
    Library(String),
    Custom {
        name: String,
        states: Vec<String>,
        locations: Vec<String>,
        /// `[state, from, to, next]`
        transitions: Vec<[String; 4]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        tunnels: Option<Vec<[String; 2]>>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: String,
    pub state: String,
    /// Defaults to `name.LOC` for each location of the type.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ports: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemFile {
    pub format: u32,
    #[serde(default)]
    pub directed: bool,
    pub gadget_types: Vec<TypeSpec>,
    #[serde(default)]
    pub nodes: Vec<String>,
    pub instances: Vec<InstanceSpec>,
    #[serde(default)]
    pub connections: Vec<[String; 2]>,
    #[serde(default)]
    pub spawners: Vec<String>,
    #[serde(default)]
    pub destroyers: Vec<String>,
}

fn type_from_spec(spec: &TypeSpec, path: &str) -> Result<GadgetType, FormatError> {
    match spec {
        TypeSpec::Library(name) => match library::standard_library().remove(name) {
            Some(t) => Ok(t),
            None => invalid(path, format!("unknown library gadget {name:?}")),
        },
        TypeSpec::Custom { name, states, locations, transitions, tunnels } => {
            let st = |n: &str, p: String| states.iter().position(|s| s == n).ok_or(FormatError::Invalid { path: p, msg: format!("unknown state {n:?}") });
            let lo = |n: &str, p: String| locations.iter().position(|s| s == n).ok_or(FormatError::Invalid { path: p, msg: format!("unknown location {n:?}") });
            let mut trs = Vec::new();
            for (i, [s, f, t, n]) in transitions.iter().enumerate() {
                let p = || format!("{path}.transitions[{i}]");
                trs.push(Transition::new(st(s, p())?, lo(f, p())?, lo(t, p())?, st(n, p())?));
            }
            let tunnels = match tunnels {
                None => None,
                Some(ts) => Some(
                    ts.iter()
                        .enumerate()
                        .map(|(i, [a, b])| Ok((lo(a, format!("{path}.tunnels[{i}]"))?, lo(b, format!("{path}.tunnels[{i}]"))?)))
                        .collect::<Result<Vec<_>, FormatError>>()?,
                ),
            };
            Ok(GadgetType { name: name.clone(), states: states.clone(), locations: locations.clone(), transitions: trs, tunnels })
        }
    }
}

fn spec_from_type(ty: &GadgetType) -> TypeSpec {
    if library::standard_library().get(&ty.name) == Some(ty) {
        return TypeSpec::Library(ty.name.clone());
    }
    let s = |i: usize| ty.states[i].clone();
    let l = |i: usize| ty.locations[i].clone();
    TypeSpec::Custom {
        name: ty.name.clone(),
        states: ty.states.clone(),
        locations: ty.locations.clone(),
        transitions: ty.transitions.iter().map(|t| [s(t.state), l(t.from), l(t.to), s(t.next)]).collect(),
        tunnels: ty.tunnels.as_ref().map(|ts| ts.iter().map(|&(a, b)| [l(a), l(b)]).collect()),
    }
}

impl SystemFile {
    pub fn to_system(&self) -> Result<System, FormatError> {
        let mut b = SystemBuilder::new().directed(self.directed);
        for (i, spec) in self.gadget_types.iter().enumerate() {
            let ty = type_from_spec(spec, &format!("gadget_types[{i}]"))?;
            if b.type_index(&ty.name).is_some() {
                return invalid(format!("gadget_types[{i}]"), format!("duplicate type {:?}", ty.name));
            }
            b.add_type(ty);
        }
        for n in &self.nodes {
            b.node(n);
        }
        let types: Vec<GadgetType> = b.clone().build().types().to_vec();
        for (i, inst) in self.instances.iter().enumerate() {
            let path = format!("instances[{i}]");
            let Some(kind) = b.type_index(&inst.kind) else {
                return invalid(path, format!("unknown type {:?}", inst.kind));
            };
            let ty = &types[kind];
            let Some(state) = ty.state(&inst.state) else {
                return invalid(path, format!("unknown state {:?}", inst.state));
            };
            match &inst.ports {
                None => {
                    b.add_instance(&inst.name, kind, state);
                }
                Some(ports) if ports.len() == ty.locations.len() => {
                    let ids = ports.iter().map(|p| b.node(p)).collect();
                    b.add_instance_with_ports(&inst.name, kind, state, ids);
                }
                Some(ports) => {
                    return invalid(path, format!("{} ports for {} locations", ports.len(), ty.locations.len()));
                }
            }
        }
        let look = |b: &SystemBuilder, n: &str, path: String| {
            b.lookup(n).ok_or(FormatError::Invalid { path, msg: format!("unknown location {n:?}") })
        };
        for (i, [x, y]) in self.connections.iter().enumerate() {
            let (x, y) = (look(&b, x, format!("connections[{i}]"))?, look(&b, y, format!("connections[{i}]"))?);
            b.connect(x, y);
        }
        for (i, s) in self.spawners.iter().enumerate() {
            let l = look(&b, s, format!("spawners[{i}]"))?;
            b.spawner(l);
        }
        for (i, d) in self.destroyers.iter().enumerate() {
            let l = look(&b, d, format!("destroyers[{i}]"))?;
            b.destroyer(l);
        }
        Ok(b.build())
    }

    pub fn from_system(sys: &System) -> Self {
        let name = |l: usize| sys.locations()[l].clone();
        let instances = sys
            .instances()
            .iter()
            .map(|inst| {
                let ty = &sys.types()[inst.kind];
                let ports: Vec<String> = inst.ports.iter().map(|&p| name(p)).collect();
                let default = ports.iter().zip(&ty.locations).all(|(p, l)| *p == format!("{}.{l}", inst.name));
                InstanceSpec {
                    name: inst.name.clone(),
                    kind: ty.name.clone(),
                    state: ty.states[inst.state].clone(),
                    ports: (!default).then_some(ports),
                }
            })
            .collect();
        SystemFile {
            format: FORMAT,
            directed: sys.is_directed(),
            gadget_types: sys.types().iter().map(spec_from_type).collect(),
            nodes: sys.locations().to_vec(),
            instances,
            connections: sys.connections().iter().map(|&(x, y)| [name(x), name(y)]).collect(),
            spawners: sys.spawners().iter().map(|&l| name(l)).collect(),
            destroyers: sys.destroyers().iter().map(|&l| name(l)).collect(),
        }
    }
}

pub fn parse_system(text: &str) -> Result<System, FormatError> {
    parse_json::<SystemFile>(text)?.to_system()
}

pub fn emit_system(sys: &System) -> String {
    emit_json(&SystemFile::from_system(sys))
}

// ---------------------------------------------------------------- configurations

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfigFile {
    pub format: u32,
    /// Instance name to state name; missing instances keep their initial state.
    #[serde(default)]
    pub states: BTreeMap<String, String>,
    /// Any location of a class to the robot count of that class.
    #[serde(default)]
    pub robots: BTreeMap<String, u64>,
}

pub fn parse_config(text: &str, sys: &System) -> Result<Configuration, FormatError> {
    let file: ConfigFile = parse_json(text)?;
    let mut c = sys.initial_configuration();
    for (inst, state) in &file.states {
        let Some(i) = sys.instance(inst) else {
            return invalid(format!("states.{inst}"), "unknown instance");
        };
        let Some(s) = sys.type_of(i).state(state) else {
            return invalid(format!("states.{inst}"), format!("unknown state {state:?}"));
        };
        c.states[i] = s;
    }
    c.robots.iter_mut().for_each(|r| *r = 0);
    for (loc, &n) in &file.robots {
        let Some(l) = sys.location(loc) else {
            return invalid(format!("robots.{loc}"), "unknown location");
        };
        c.robots[sys.class_of(l)] += n;
    }
    Ok(c)
}

pub fn emit_config(c: &Configuration, sys: &System) -> String {
    let states = sys
        .instances()
        .iter()
        .enumerate()
        .map(|(i, inst)| (inst.name.clone(), sys.type_of(i).states[c.states[i]].clone()))
        .collect();
    let robots = c
        .robots
        .iter()
        .enumerate()
        .filter(|(_, &n)| n > 0)
        .map(|(k, &n)| (sys.locations()[sys.classes().members(k).next().expect("nonempty class")].clone(), n))
        .collect();
    emit_json(&ConfigFile { format: FORMAT, states, robots })
}

// ---------------------------------------------------------------- nets

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetFile {
    pub format: u32,
    #[serde(flatten)]
    pub net: Net,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<Marking>,
}

pub fn parse_net(text: &str) -> Result<(Net, Option<Marking>), FormatError> {
    let file: NetFile = parse_json(text)?;
    if let Err(e) = file.net.validate() {
        return invalid("rules", e.to_string());
    }
    if let Some(s) = &file.start {
        if s.len() != file.net.dim() {
            return invalid("start", format!("{} entries for {} dishes", s.len(), file.net.dim()));
        }
    }
    Ok((file.net, file.start))
}

pub fn emit_net(net: &Net, start: Option<&Marking>) -> String {
    emit_json(&NetFile { format: FORMAT, net: net.clone(), start: start.cloned() })
}

// ---------------------------------------------------------------- G4

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct G4File {
    pub format: u32,
    pub vars: Vec<G4Var>,
    /// Literals are variable names, negated with a leading `~`.
    pub clauses: Vec<Vec<String>>,
    pub width: usize,
}

pub fn parse_g4(text: &str) -> Result<G4Instance, FormatError> {
    let file: G4File = parse_json(text)?;
    let mut clauses = Vec::new();
    for (j, c) in file.clauses.iter().enumerate() {
        let mut lits = Vec::new();
        for (k, l) in c.iter().enumerate() {
            let (negated, name) = match l.strip_prefix('~') {
                Some(n) => (true, n),
                None => (false, l.as_str()),
            };
            let Some(var) = file.vars.iter().position(|v| v.name == name) else {
                return invalid(format!("clauses[{j}][{k}]"), format!("undeclared variable {name:?}"));
            };
            lits.push(Literal { var, negated });
        }
        clauses.push(lits);
    }
    let inst = G4Instance { vars: file.vars, clauses, width: file.width };
    if let Err(e) = inst.validate() {
        return invalid("clauses", e.to_string());
    }
    Ok(inst)
}

pub fn emit_g4(inst: &G4Instance) -> String {
    let clauses = inst
        .clauses
        .iter()
        .map(|c| c.iter().map(|l| format!("{}{}", if l.negated { "~" } else { "" }, inst.vars[l.var].name)).collect())
        .collect();
    emit_json(&G4File { format: FORMAT, vars: inst.vars.clone(), clauses, width: inst.width })
}

// ---------------------------------------------------------------- traces and witnesses

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFile {
    pub format: u32,
    pub trace: Trace,
    /// Digest of the final world, for replay checks.
    pub final_digest: u64,
}

pub fn parse_trace(text: &str) -> Result<TraceFile, FormatError> {
    parse_json(text)
}

pub fn emit_trace(trace: &Trace, final_digest: u64) -> String {
    emit_json(&TraceFile { format: FORMAT, trace: trace.clone(), final_digest })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WitnessFile {
    pub format: u32,
    pub moves: Vec<Move>,
}

pub fn parse_witness(text: &str) -> Result<Vec<Move>, FormatError> {
    Ok(parse_json::<WitnessFile>(text)?.moves)
}

pub fn emit_witness(moves: &[Move]) -> String {
    emit_json(&WitnessFile { format: FORMAT, moves: moves.to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counter::{compile, Program};
    use crate::zero_player::{replay, Simulator, World};

    #[test]
    fn library_types_round_trip() {
        for ty in library::standard_library().values() {
            let spec = spec_from_type(ty);
            assert_eq!(spec, TypeSpec::Library(ty.name.clone()));
            let mut custom = ty.clone();
            custom.name = format!("my-{}", ty.name);
            let spec = spec_from_type(&custom);
            assert!(matches!(spec, TypeSpec::Custom { .. }));
            assert_eq!(type_from_spec(&spec, "t").unwrap(), custom);
        }
    }

    #[test]
    fn systems_round_trip() {
        let mut b = SystemBuilder::new();
        let t = b.add_type(library::one_toggle());
        let g = b.add_instance("t", t, 1);
        let x = b.node("x");
        let shared = b.node("shared");
        let h = b.add_instance_with_ports("u", t, 0, vec![shared, x]);
        b.connect(b.port(g, "A"), x);
        b.spawner(x);
        b.destroyer(b.port(h, "A"));
        let sys = b.build();
        let text = emit_system(&sys);
        assert_eq!(parse_system(&text).unwrap(), sys);
        let counter = compile(&"1: INC 1\n2: JZ 1 4\n3: DEC 1\n4: HALT".parse::<Program>().unwrap()).unwrap();
        assert_eq!(parse_system(&emit_system(&counter.system)).unwrap(), counter.system);
    }

    #[test]
    fn configs_round_trip() {
        let mut b = SystemBuilder::new();
        let t = b.add_type(library::two_tunnel_toggle());
        let g = b.add_instance("t", t, 0);
        b.connect(b.port(g, "B"), b.port(g, "C"));
        let sys = b.build();
        let mut c = sys.initial_configuration();
        c.states[0] = 1;
        c.robots[sys.class_of(sys.port_named(g, "C").unwrap())] = 2;
        assert_eq!(parse_config(&emit_config(&c, &sys), &sys).unwrap(), c);
    }

    #[test]
    fn nets_and_g4_round_trip() {
        let net = Net::from_text("dishes: a b\n1 0 -> 1 1\n0 2 -> 1 0").unwrap();
        let start = vec![1, 0];
        assert_eq!(parse_net(&emit_net(&net, Some(&start))).unwrap(), (net.clone(), Some(start)));
        assert_eq!(parse_net(&emit_net(&net, None)).unwrap(), (net, None));
        let inst = G4Instance {
            vars: vec![G4Var { name: "x".into(), owner: 1, init: false }, G4Var { name: "y".into(), owner: 2, init: true }],
            clauses: vec![vec![Literal { var: 0, negated: false }, Literal { var: 1, negated: true }]],
            width: 2,
        };
        let text = emit_g4(&inst);
        assert!(text.contains("\"~y\""));
        assert_eq!(parse_g4(&text).unwrap(), inst);
    }

    #[test]
    fn traces_and_witnesses_round_trip() {
        let compiled = compile(&"1: INC 2\n2: HALT".parse::<Program>().unwrap()).unwrap();
        let sim = Simulator::new(&compiled.system);
        let (end, trace) = sim.simulate(&World::initial(&compiled.system), 6).unwrap();
        let file = parse_trace(&emit_trace(&trace, end.digest())).unwrap();
        assert_eq!(file.trace, trace);
        assert_eq!(replay(&compiled.system, &file.trace).unwrap().digest(), file.final_digest);
        let moves = vec![Move::Spawn { class: 2 }, Move::Traverse { instance: 0, transition: 1 }];
        assert_eq!(parse_witness(&emit_witness(&moves)).unwrap(), moves);
    }

    #[test]
    fn errors_are_positioned() {
        let text = emit_system(&sample_system());
        let cut = &text[..text.len() / 2];
        match parse_system(cut) {
            Err(FormatError::Syntax { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
        let bad = text.replacen("\"1-toggle\"", "\"2-toggle\"", 1);
        assert_eq!(
            parse_system(&bad),
            Err(FormatError::Invalid { path: "gadget_types[0]".into(), msg: "unknown library gadget \"2-toggle\"".into() })
        );
        assert!(matches!(parse_system("{\"format\": 2}"), Err(FormatError::Invalid { .. })));
        assert!(matches!(parse_system("{\"gadget_types\": []}"), Err(FormatError::Invalid { .. })));
        let g4 = "{\"format\":1,\"vars\":[],\"clauses\":[[\"z\"]],\"width\":1}";
        assert_eq!(
            parse_g4(g4),
            Err(FormatError::Invalid { path: "clauses[0][0]".into(), msg: "undeclared variable \"z\"".into() })
        );
    }

    fn sample_system() -> System {
        let mut b = SystemBuilder::new();
        let t = b.add_type(library::one_toggle());
        let g = b.add_instance("t", t, 0);
        let x = b.node("x");
        b.connect(b.port(g, "B"), x);
        b.build()
    }
}
