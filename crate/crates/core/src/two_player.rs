//! The impartial two-player game: both players steer one shared robot, each
//! turn traverses exactly one gadget, and the ko rule forbids traversing the
//! gadget the opponent just traversed. A player with no legal move loses.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gadget::{GadgetType, LocId, System, SystemBuilder};
use crate::library;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TwoError {
    #[error("more than {0} game states")]
    StateSpaceBudgetExceeded(usize),
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("certificate does not match the gadget: {0}")]
    CertificateMismatch(String),
}

/// Value of a position for the player about to move.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum GameValue {
    Win,
    Lose,
    Draw,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GameState {
    pub states: Vec<usize>,
    /// Location class of the robot.
    pub robot: usize,
    /// Instance traversed by the previous move.
    pub last: Option<usize>,
    /// 0 for Player 1, 1 for Player 2. Kept at 0 unless win classes are set.
    pub mover: u8,
}

/// `(instance, transition)`.
pub type GameMove = (usize, usize);

pub struct Game<'a> {
    system: &'a System,
    win_classes: Option<[Vec<usize>; 2]>,
    by_class: Vec<Vec<GameMove>>,
}

impl<'a> Game<'a> {
    pub fn new(system: &'a System) -> Self {
        let mut by_class = vec![Vec::new(); system.classes().len()];
        for (i, inst) in system.instances().iter().enumerate() {
            for (t, tr) in system.type_of(i).transitions.iter().enumerate() {
                by_class[system.class_of(inst.ports[tr.from])].push((i, t));
            }
        }
        Game { system, win_classes: None, by_class }
    }

    /// A move that lands the robot in the mover's win class wins at once.
    pub fn with_win_classes(mut self, player1: Vec<usize>, player2: Vec<usize>) -> Self {
        self.win_classes = Some([player1, player2]);
        self
    }

    pub fn system(&self) -> &System {
        self.system
    }

    pub fn initial(&self, robot: usize) -> GameState {
        GameState {
            states: self.system.instances().iter().map(|i| i.state).collect(),
            robot,
            last: None,
            mover: 0,
        }
    }

    pub fn moves(&self, s: &GameState) -> Vec<GameMove> {
        self.by_class[s.robot]
            .iter()
            .copied()
            .filter(|&(i, t)| Some(i) != s.last && self.system.transition(i, t).state == s.states[i])
            .collect()
    }

    pub fn play(&self, s: &GameState, (i, t): GameMove) -> GameState {
        let tr = self.system.transition(i, t);
        let mut states = s.states.clone();
        states[i] = tr.next;
        GameState {
            states,
            robot: self.system.class_of(self.system.instances()[i].ports[tr.to]),
            last: Some(i),
            mover: if self.win_classes.is_some() { 1 - s.mover } else { 0 },
        }
    }

    fn wins_now(&self, s: &GameState, (i, t): GameMove) -> bool {
        let Some(w) = &self.win_classes else { return false };
        let tr = self.system.transition(i, t);
        w[s.mover as usize].contains(&self.system.class_of(self.system.instances()[i].ports[tr.to]))
    }
}

pub fn game_moves(system: &System, s: &GameState) -> Vec<GameMove> {
    Game::new(system).moves(s)
}

/// Label every position of an explicit game graph. Positions with an
/// immediate win are WIN, positions without successors are LOSE.
pub fn retrograde(succ: &[Vec<usize>], immediate: &[bool]) -> Vec<GameValue> {
    let n = succ.len();
    let mut pred = vec![Vec::new(); n];
    for (s, out) in succ.iter().enumerate() {
        for &t in out {
            pred[t].push(s);
        }
    }
    let mut label = vec![GameValue::Draw; n];
    let mut open: Vec<usize> = succ.iter().map(Vec::len).collect();
    let mut queue = VecDeque::new();
    for s in 0..n {
        if immediate[s] {
            label[s] = GameValue::Win;
            queue.push_back(s);
        } else if succ[s].is_empty() {
            label[s] = GameValue::Lose;
            queue.push_back(s);
        }
    }
    while let Some(s) = queue.pop_front() {
        for &p in &pred[s] {
            if label[p] != GameValue::Draw {
                continue;
            }
            if label[s] == GameValue::Lose {
                label[p] = GameValue::Win;
                queue.push_back(p);
            } else {
                open[p] -= 1;
                if open[p] == 0 {
                    label[p] = GameValue::Lose;
                    queue.push_back(p);
                }
            }
        }
    }
    label
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Position 0 is the initial one.
    pub positions: Vec<GameState>,
    pub labels: Vec<GameValue>,
    pub succ: Vec<Vec<(GameMove, usize)>>,
    pub immediate: Vec<Option<GameMove>>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StrategyEntry {
    pub position: GameState,
    pub value: GameValue,
    pub recommended: Option<GameMove>,
}

impl Solution {
    pub fn value(&self) -> GameValue {
        self.labels[0]
    }

    /// A winning move where one exists, otherwise a drawing move, otherwise any move.
    pub fn strategy(&self) -> Vec<StrategyEntry> {
        (0..self.positions.len())
            .map(|s| {
                let pick = |want: GameValue| self.succ[s].iter().find(|(_, t)| self.labels[*t] == want).map(|(m, _)| *m);
                let recommended = self.immediate[s]
                    .or_else(|| pick(GameValue::Lose))
                    .or_else(|| pick(GameValue::Draw))
                    .or_else(|| self.succ[s].first().map(|(m, _)| *m));
                StrategyEntry { position: self.positions[s].clone(), value: self.labels[s], recommended }
            })
            .collect()
    }

    /// Checks the labelling is a fixed point of the game operator.
    pub fn check_fixed_point(&self) -> Result<(), String> {
        for s in 0..self.positions.len() {
            let kids: Vec<GameValue> = self.succ[s].iter().map(|(_, t)| self.labels[*t]).collect();
            let ok = match self.labels[s] {
                GameValue::Win => self.immediate[s].is_some() || kids.contains(&GameValue::Lose),
                GameValue::Lose => self.immediate[s].is_none() && kids.iter().all(|&v| v == GameValue::Win),
                GameValue::Draw => {
                    self.immediate[s].is_none()
                        && !kids.contains(&GameValue::Lose)
                        && kids.contains(&GameValue::Draw)
                }
            };
            if !ok {
                return Err(format!("position {s} labelled {:?} with successors {kids:?}", self.labels[s]));
            }
        }
        Ok(())
    }
}

/// Exact solve by retrograde analysis over all positions reachable from `initial`.
pub fn solve(game: &Game, initial: &GameState, budget: usize) -> Result<Solution, TwoError> {
    let mut index: HashMap<GameState, usize> = HashMap::from([(initial.clone(), 0)]);
    let mut positions = vec![initial.clone()];
    let mut succ = Vec::new();
    let mut immediate = Vec::new();
    let mut k = 0;
    while k < positions.len() {
        let s = positions[k].clone();
        let mut out = Vec::new();
        let mut win = None;
        for mv in game.moves(&s) {
            if game.wins_now(&s, mv) {
                win = Some(mv);
                break;
            }
            let next = game.play(&s, mv);
            let id = match index.get(&next) {
                Some(&id) => id,
                None => {
                    if positions.len() >= budget {
                        return Err(TwoError::StateSpaceBudgetExceeded(budget));
                    }
                    index.insert(next.clone(), positions.len());
                    positions.push(next);
                    positions.len() - 1
                }
            };
            out.push((mv, id));
        }
        if win.is_some() {
            out.clear();
        }
        succ.push(out);
        immediate.push(win);
        k += 1;
    }
    let plain: Vec<Vec<usize>> = succ.iter().map(|o| o.iter().map(|(_, t)| *t).collect()).collect();
    let flags: Vec<bool> = immediate.iter().map(Option::is_some).collect();
    let labels = retrograde(&plain, &flags);
    Ok(Solution { positions, labels, succ, immediate })
}

/// Independent oracle: depth-bounded negamax evaluated layer by layer over
/// every reachable position, up to depth twice the position count or until
/// the layer values stop changing.
pub fn negamax_oracle(
    game: &Game,
    initial: &GameState,
    budget: usize,
) -> Result<(GameValue, BTreeMap<GameState, GameValue>), TwoError> {
    let mut kids: BTreeMap<GameState, Option<Vec<GameState>>> = BTreeMap::new();
    let mut stack = vec![initial.clone()];
    while let Some(s) = stack.pop() {
        if kids.contains_key(&s) {
            continue;
        }
        if kids.len() >= budget {
            return Err(TwoError::StateSpaceBudgetExceeded(budget));
        }
        let moves = game.moves(&s);
        let entry = if moves.iter().any(|&m| game.wins_now(&s, m)) {
            None
        } else {
            let next: Vec<GameState> = moves.iter().map(|&m| game.play(&s, m)).collect();
            stack.extend(next.iter().filter(|n| !kids.contains_key(*n)).cloned());
            Some(next)
        };
        kids.insert(s, entry);
    }
    let mut val: BTreeMap<GameState, GameValue> = kids.keys().map(|s| (s.clone(), GameValue::Draw)).collect();
    for _ in 0..2 * kids.len() {
        let next: BTreeMap<GameState, GameValue> = kids
            .iter()
            .map(|(s, k)| {
                let v = match k {
                    None => GameValue::Win,
                    Some(k) if k.iter().any(|c| val[c] == GameValue::Lose) => GameValue::Win,
                    Some(k) if k.iter().all(|c| val[c] == GameValue::Win) => GameValue::Lose,
                    Some(_) => GameValue::Draw,
                };
                (s.clone(), v)
            })
            .collect();
        if next == val {
            break;
        }
        val = next;
    }
    Ok((val[initial], val))
}

// ---------------------------------------------------------------- G4

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct G4Var {
    pub name: String,
    /// 1 or 2.
    pub owner: u8,
    pub init: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

/// Players flip one of their own variables or pass; whoever makes the DNF
/// formula true wins.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct G4Instance {
    pub vars: Vec<G4Var>,
    pub clauses: Vec<Vec<Literal>>,
    pub width: usize,
}

impl G4Instance {
    pub fn validate(&self) -> Result<(), TwoError> {
        let bad = |m: String| Err(TwoError::InvalidInstance(m));
        if self.width == 0 {
            return bad("clause width must be at least 1".into());
        }
        if self.vars.len() > 63 {
            return bad("at most 63 variables".into());
        }
        for v in &self.vars {
            if v.owner != 1 && v.owner != 2 {
                return bad(format!("variable {} has owner {}", v.name, v.owner));
            }
        }
        for (j, c) in self.clauses.iter().enumerate() {
            if c.len() != self.width {
                return bad(format!("clause {} has {} literals, width is {}", j + 1, c.len(), self.width));
            }
            if let Some(l) = c.iter().find(|l| l.var >= self.vars.len()) {
                return bad(format!("clause {} uses undeclared variable {}", j + 1, l.var));
            }
        }
        if self.satisfied(self.initial_assignment()) {
            return bad("formula is satisfied initially".into());
        }
        Ok(())
    }

    pub fn initial_assignment(&self) -> u64 {
        self.vars.iter().enumerate().filter(|(_, v)| v.init).fold(0, |a, (i, _)| a | 1 << i)
    }

    pub fn satisfied(&self, assignment: u64) -> bool {
        self.clauses
            .iter()
            .any(|c| c.iter().all(|l| ((assignment >> l.var) & 1 == 1) != l.negated))
    }
}

/// Exact value of the G4 game for Player 1, over positions (assignment, mover).
pub fn g4_solve(inst: &G4Instance, budget: usize) -> Result<GameValue, TwoError> {
    inst.validate()?;
    let n = inst.vars.len();
    let positions = 2usize << n;
    if positions > budget {
        return Err(TwoError::StateSpaceBudgetExceeded(budget));
    }
    // position id = assignment * 2 + mover
    let mut succ = vec![Vec::new(); positions];
    let mut immediate = vec![false; positions];
    for a in 0..(1u64 << n) {
        for mover in 0..2u8 {
            let id = (a as usize) << 1 | mover as usize;
            if inst.satisfied(a) {
                continue;
            }
            let flips = (0..n).filter(|&v| inst.vars[v].owner == mover + 1).map(|v| a ^ (1 << v));
            for next in flips.chain([a]) {
                if inst.satisfied(next) {
                    immediate[id] = true;
                } else {
                    succ[id].push((next as usize) << 1 | (1 - mover) as usize);
                }
            }
        }
    }
    let labels = retrograde(&succ, &immediate);
    Ok(labels[(inst.initial_assignment() as usize) << 1])
}

const L2T_LEAF: usize = 0;
const L2T_NONLEAF: usize = 1;

/// Builds the locking-2-toggle game for a G4 instance: an alternator between
/// the two players' hubs, a doubled binary branching per player down to one
/// flipping loop per variable plus a pass loop, and a checker with one path
/// per clause ending at the finish line.
pub fn g4_to_gadgets(inst: &G4Instance) -> Result<(System, GameState), TwoError> {
    inst.validate()?;
    let mut b = SystemBuilder::new();
    let l2t = b.add_type(library::locking_2_toggle());
    let tog = b.add_type(library::one_toggle());
    let hubs = [b.node("hub1"), b.node("hub2")];
    let checker = b.node("checker");
    let merge = b.node("merge");
    let end = b.node("end");
    let mut edges: Vec<(LocId, LocId)> = Vec::new();

    let alt = b.add_instance("alternator", tog, 0);
    edges.push((hubs[0], b.port(alt, "A")));
    edges.push((hubs[1], b.port(alt, "B")));

    // literal occurrence -> its L2T instance
    let mut lit_gadget: HashMap<(usize, usize), usize> = HashMap::new();
    let assign = inst.initial_assignment();
    let mut leaf_nodes: Vec<Vec<LocId>> = vec![Vec::new(), Vec::new()];

    let mut leaves: Vec<(u8, Option<usize>)> = Vec::new();
    for (v, var) in inst.vars.iter().enumerate() {
        leaves.push((var.owner, Some(v)));
    }
    leaves.push((1, None));
    leaves.push((2, None));

    for (owner, var) in leaves {
        let tag = var.map_or(format!("pass{owner}"), |v| format!("var.{}", inst.vars[v].name));
        let e = b.node(&format!("{tag}.loop"));
        let occurrences: Vec<(usize, usize, bool)> = match var {
            Some(v) => inst
                .clauses
                .iter()
                .enumerate()
                .flat_map(|(j, c)| c.iter().enumerate().filter(|(_, l)| l.var == v).map(move |(k, l)| (j, k, l.negated)))
                .collect(),
            None => Vec::new(),
        };
        // loop: a chain of tunnels leaving and re-entering `e`
        let mut hops: Vec<(LocId, LocId)> = Vec::new();
        if occurrences.is_empty() {
            for k in 0..2 {
                let t = b.add_instance(&format!("{tag}.toggle{}", k + 1), tog, 0);
                hops.push((b.port(t, "A"), b.port(t, "B")));
            }
        } else {
            let value = (assign >> var.unwrap()) & 1 == 1;
            for (j, k, negated) in occurrences {
                let truth = value != negated;
                let state = if truth { L2T_NONLEAF } else { L2T_LEAF };
                for role in ["lit", "pad"] {
                    let g = b.add_instance(&format!("{tag}.c{}.{}.{role}", j + 1, k + 1), l2t, state);
                    let (a, bb) = (b.port(g, "A"), b.port(g, "B"));
                    hops.push(if negated { (bb, a) } else { (a, bb) });
                    if role == "lit" {
                        lit_gadget.insert((j, k), g);
                    }
                }
            }
        }
        let mut at = e;
        for &(i, o) in &hops {
            edges.push((at, i));
            at = o;
        }
        edges.push((at, e));
        // access to the checker
        let c1 = b.add_instance(&format!("{tag}.exit1"), tog, 0);
        let c2 = b.add_instance(&format!("{tag}.exit2"), tog, 0);
        edges.push((e, b.port(c1, "A")));
        edges.push((b.port(c1, "B"), b.port(c2, "A")));
        edges.push((b.port(c2, "B"), checker));
        leaf_nodes[owner as usize - 1].push(e);
    }

    for p in 0..2 {
        let mut counter = 0;
        branch(&mut b, &mut edges, l2t, &format!("p{}", p + 1), &mut counter, hubs[p], &leaf_nodes[p]);
    }

    for (j, clause) in inst.clauses.iter().enumerate() {
        let mut at = checker;
        for k in 0..clause.len() {
            let g = lit_gadget[&(j, k)];
            let t = b.add_instance(&format!("clause{}.toggle{}", j + 1, k + 1), tog, 0);
            edges.push((at, b.port(g, "C")));
            edges.push((b.port(g, "D"), b.port(t, "A")));
            at = b.port(t, "B");
        }
        edges.push((at, merge));
    }
    let finish = b.add_instance("finish", tog, 0);
    edges.push((merge, b.port(finish, "A")));
    edges.push((b.port(finish, "B"), end));

    for (x, y) in edges {
        b.connect(x, y);
    }
    let system = b.build();
    let start = GameState {
        states: system.instances().iter().map(|i| i.state).collect(),
        robot: system.class_of(hubs[0]),
        last: None,
        mover: 0,
    };
    Ok((system, start))
}

/// Binary branching below `node`: each split is guarded by two locking
/// 2-toggles in series, one tunnel per child.
fn branch(
    b: &mut SystemBuilder,
    edges: &mut Vec<(LocId, LocId)>,
    l2t: usize,
    tag: &str,
    counter: &mut usize,
    node: LocId,
    leaves: &[LocId],
) {
    *counter += 1;
    let id = *counter;
    let first = b.add_instance(&format!("{tag}.branch{id}.1"), l2t, L2T_NONLEAF);
    let second = b.add_instance(&format!("{tag}.branch{id}.2"), l2t, L2T_NONLEAF);
    let half = leaves.len().div_ceil(2);
    let groups = [&leaves[..half], &leaves[half..]];
    for (group, (i, o)) in groups.into_iter().zip([("A", "B"), ("C", "D")]) {
        if group.is_empty() {
            continue;
        }
        edges.push((node, b.port(first, i)));
        edges.push((b.port(first, o), b.port(second, i)));
        let below = b.port(second, o);
        if group.len() == 1 {
            edges.push((below, group[0]));
        } else {
            branch(b, edges, l2t, tag, counter, below, group);
        }
    }
}

// ---------------------------------------------------------------- boxes

/// Two tunnels of a reversible deterministic gadget: in state `s1` tunnel
/// `t1` is open from `t1.0` to `t1.1`, leading to `s2`; in `s2` tunnel `t2`
/// is open from `t2.0` to `t2.1`, leading to `s3`; in `s1` tunnel `t2` is
/// closed in that direction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TunnelCertificate {
    pub s1: usize,
    pub s2: usize,
    pub s3: usize,
    pub t1: (usize, usize),
    pub t2: (usize, usize),
}

impl TunnelCertificate {
    /// For the locking 2-toggle: from leaf state 1, B to A reaches the
    /// nonleaf state, where C to D reaches leaf state 3.
    pub fn locking_2_toggle() -> Self {
        TunnelCertificate { s1: 0, s2: 1, s3: 2, t1: (1, 0), t2: (2, 3) }
    }

    pub fn check(&self, base: &GadgetType) -> Result<(), TwoError> {
        let has = |s: usize, f: usize, t: usize, n: usize| {
            base.transitions.iter().any(|x| (x.state, x.from, x.to, x.next) == (s, f, t, n))
        };
        let open = |s: usize, f: usize, t: usize| base.transitions.iter().any(|x| (x.state, x.from, x.to) == (s, f, t));
        let (a, bb) = self.t1;
        let (c, d) = self.t2;
        let needs = [
            (has(self.s1, a, bb, self.s2), "first tunnel open in s1"),
            (has(self.s2, bb, a, self.s1), "first tunnel reversible"),
            (has(self.s2, c, d, self.s3), "second tunnel open in s2"),
            (has(self.s3, d, c, self.s2), "second tunnel reversible"),
            (!open(self.s1, c, d), "second tunnel closed in s1"),
            (!open(self.s2, a, bb), "first tunnel closed forward in s2"),
            (!open(self.s2, d, c), "second tunnel closed backward in s2"),
        ];
        match needs.iter().find(|(ok, _)| !ok) {
            Some((_, why)) => Err(TwoError::CertificateMismatch(why.to_string())),
            None => Ok(()),
        }
    }
}

/// A subsystem meant to behave like `target` in state `target_state`, seen
/// through `ports` (one per target location, in order).
#[derive(Clone, Debug)]
pub struct GadgetBox {
    pub system: System,
    pub ports: Vec<LocId>,
    pub target: GadgetType,
    pub target_state: usize,
}

pub fn identity_box(ty: &GadgetType, state: usize) -> GadgetBox {
    let mut b = SystemBuilder::new();
    let k = b.add_type(ty.clone());
    let g = b.add_instance("g", k, state);
    let ports = ty.locations.iter().map(|l| b.port(g, l)).collect();
    GadgetBox { system: b.build(), ports, target: ty.clone(), target_state: state }
}

fn loc(base: &GadgetType, i: usize) -> &str {
    &base.locations[i]
}

/// Two copies in series: `x` in `s1` crossed along `t1`, then `y` in `s2`
/// crossed along `t2`. Returns the outer ends.
fn directed_pair(
    b: &mut SystemBuilder,
    base: &GadgetType,
    kind: usize,
    cert: &TunnelCertificate,
    tag: &str,
) -> (LocId, LocId) {
    let x = b.add_instance(&format!("{tag}.x"), kind, cert.s1);
    let y = b.add_instance(&format!("{tag}.y"), kind, cert.s2);
    let mid = (b.port(x, loc(base, cert.t1.1)), b.port(y, loc(base, cert.t2.0)));
    b.connect(mid.0, mid.1);
    (b.port(x, loc(base, cert.t1.0)), b.port(y, loc(base, cert.t2.1)))
}

/// Simulates a 1-toggle whose open side starts at port A; each crossing takes
/// two traversals.
pub fn build_directed_tunnel_sim(base: &GadgetType, cert: &TunnelCertificate) -> Result<GadgetBox, TwoError> {
    cert.check(base)?;
    let mut b = SystemBuilder::new();
    let kind = b.add_type(base.clone());
    let (l, r) = directed_pair(&mut b, base, kind, cert, "d");
    Ok(GadgetBox { system: b.build(), ports: vec![l, r], target: library::one_toggle(), target_state: 0 })
}

/// Simulates a locking 2-toggle in its nonleaf state with three copies of the
/// base gadget and six directed pairs; each crossing takes nine traversals.
/// Ports in target order A, B, C, D are top-right, top-left, bottom-left and
/// bottom-right.
pub fn build_l2t_sim(base: &GadgetType, cert: &TunnelCertificate) -> Result<GadgetBox, TwoError> {
    build_l2t_sim_without_wire(base, cert, None)
}

/// As [`build_l2t_sim`], leaving out internal wire `skip` (0..10) when given.
pub fn build_l2t_sim_without_wire(
    base: &GadgetType,
    cert: &TunnelCertificate,
    skip: Option<usize>,
) -> Result<GadgetBox, TwoError> {
    cert.check(base)?;
    let mut b = SystemBuilder::new();
    let kind = b.add_type(base.clone());
    let left = b.add_instance("left", kind, cert.s2);
    let centre = b.add_instance("centre", kind, cert.s2);
    let right = b.add_instance("right", kind, cert.s2);
    let (a, bb, c, d) = (loc(base, cert.t1.0), loc(base, cert.t1.1), loc(base, cert.t2.0), loc(base, cert.t2.1));
    let mut pairs = Vec::new();
    for k in 1..=6 {
        pairs.push(directed_pair(&mut b, base, kind, cert, &format!("d{k}")));
    }
    let wires = [
        // top: right (c->d), d1, d2, centre (b->a), d3, left (b->a)
        (b.port(right, d), pairs[0].0),
        (pairs[0].1, pairs[1].0),
        (pairs[1].1, b.port(centre, bb)),
        (b.port(centre, a), pairs[2].0),
        (pairs[2].1, b.port(left, bb)),
        // bottom: left (c->d), d4, d5, centre (c->d), d6, right (b->a)
        (b.port(left, d), pairs[3].0),
        (pairs[3].1, pairs[4].0),
        (pairs[4].1, b.port(centre, c)),
        (b.port(centre, d), pairs[5].0),
        (pairs[5].1, b.port(right, bb)),
    ];
    for (k, (x, y)) in wires.into_iter().enumerate() {
        if Some(k) != skip {
            b.connect(x, y);
        }
    }
    let ports = vec![b.port(right, c), b.port(left, a), b.port(left, c), b.port(right, a)];
    Ok(GadgetBox { system: b.build(), ports, target: library::locking_2_toggle(), target_state: 1 })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Parity {
    /// Every crossing must take an odd number of traversals.
    pub odd_crossings: bool,
    /// Every blocked attempt must stall after an even number of traversals.
    pub even_stalls: bool,
}

impl Parity {
    pub const STRICT: Parity = Parity { odd_crossings: true, even_stalls: true };
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct BoxReport {
    pub violations: Vec<String>,
    pub crossing_lengths: BTreeSet<usize>,
    pub stall_lengths: BTreeSet<usize>,
    /// Internal configurations examined.
    pub configs: usize,
}

impl BoxReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

enum Attempt {
    Cross { port: usize, len: usize, states: Vec<usize>, last: usize },
    Stall(usize),
    Unforced(usize),
    Endless,
}

fn attempt(game: &Game, port_of: &HashMap<usize, usize>, start: GameState, limit: usize) -> Attempt {
    let mut s = start;
    let mut len = 1;
    loop {
        if let Some(&p) = port_of.get(&s.robot) {
            return Attempt::Cross { port: p, len, states: s.states, last: s.last.expect("moved") };
        }
        let moves = game.moves(&s);
        match moves.len() {
            0 => return Attempt::Stall(len),
            1 => s = game.play(&s, moves[0]),
            _ => return Attempt::Unforced(len),
        }
        len += 1;
        if len > limit {
            return Attempt::Endless;
        }
    }
}

/// Explores every internal configuration the box reaches through complete
/// crossings and checks it against the target gadget: open target
/// transitions need exactly one forced crossing to the right port, closed
/// ones only stalls, parities as requested, and on arrival every box move at
/// the exit port must use the gadget just traversed.
pub fn verify_box(bx: &GadgetBox, parity: Parity) -> BoxReport {
    let sys = &bx.system;
    let game = Game::new(sys);
    let mut report = BoxReport::default();
    let port_class: Vec<usize> = bx.ports.iter().map(|&p| sys.class_of(p)).collect();
    let port_of: HashMap<usize, usize> = port_class.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    if port_of.len() != bx.ports.len() || bx.ports.len() != bx.target.locations.len() {
        report.violations.push("ports must be distinct and match the target's locations".into());
        return report;
    }
    let limit = 4 * sys.instances().len() * sys.types().iter().map(|t| t.states.len()).max().unwrap_or(1) + 8;
    let initial: Vec<usize> = sys.instances().iter().map(|i| i.state).collect();
    let mut seen: HashMap<Vec<usize>, usize> = HashMap::from([(initial.clone(), bx.target_state)]);
    let mut queue = VecDeque::from([(initial, bx.target_state)]);
    let name = |p: usize| bx.target.locations[p].clone();
    while let Some((states, ts)) = queue.pop_front() {
        report.configs += 1;
        for (p, &class) in port_class.iter().enumerate() {
            let here = GameState { states: states.clone(), robot: class, last: None, mover: 0 };
            let want = bx.target.open_from(ts, p).map(|(_, tr)| (tr.to, tr.next));
            let firsts = game.moves(&here);
            if firsts.is_empty() {
                report.stall_lengths.insert(0);
            }
            let mut crossings = 0;
            for mv in firsts {
                let ctx = format!("target state {} from {}", bx.target.states[ts], name(p));
                match attempt(&game, &port_of, game.play(&here, mv), limit) {
                    Attempt::Cross { port, len, states: after, last } => {
                        report.crossing_lengths.insert(len);
                        match want {
                            Some((to, next)) if to == port => {
                                crossings += 1;
                                if parity.odd_crossings && len % 2 == 0 {
                                    report.violations.push(format!("{ctx}: crossing takes {len} traversals"));
                                }
                                let there = GameState { states: after.clone(), robot: port_class[port], last: None, mover: 0 };
                                if game.moves(&there).iter().any(|&(i, _)| i != last) {
                                    report.violations.push(format!("{ctx}: box can be re-entered at {} past the ko gadget", name(port)));
                                }
                                match seen.get(&after) {
                                    Some(&other) if other != next => report.violations.push(format!(
                                        "{ctx}: configuration stands for both {} and {}",
                                        bx.target.states[other], bx.target.states[next]
                                    )),
                                    Some(_) => {}
                                    None => {
                                        seen.insert(after.clone(), next);
                                        queue.push_back((after, next));
                                    }
                                }
                            }
                            _ => report.violations.push(format!("{ctx}: robot escapes to {} after {len}", name(port))),
                        }
                    }
                    Attempt::Stall(len) => {
                        report.stall_lengths.insert(len);
                        if parity.even_stalls && len % 2 == 1 {
                            report.violations.push(format!("{ctx}: attempt stalls after {len} traversals"));
                        }
                    }
                    Attempt::Unforced(len) => report.violations.push(format!("{ctx}: choice inside the box after {len}")),
                    Attempt::Endless => report.violations.push(format!("{ctx}: attempt does not end")),
                }
            }
            if want.is_some() && crossings != 1 {
                report.violations.push(format!(
                    "target state {} from {}: {crossings} crossings instead of 1",
                    bx.target.states[ts],
                    name(p)
                ));
            }
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const BUDGET: usize = 200_000;

    fn single_robot_game(sys: &System, at: LocId) -> GameState {
        Game::new(sys).initial(sys.class_of(at))
    }

    #[test]
    fn empty_system_loses() {
        let mut b = SystemBuilder::new();
        let x = b.node("x");
        let sys = b.build();
        let g = Game::new(&sys);
        let s = single_robot_game(&sys, x);
        assert!(g.moves(&s).is_empty());
        assert_eq!(solve(&g, &s, BUDGET).unwrap().value(), GameValue::Lose);
    }

    #[test]
    fn one_toggle_wins_by_ko() {
        let mut b = SystemBuilder::new();
        let k = b.add_type(library::one_toggle());
        let t = b.add_instance("t", k, 0);
        let sys = b.build();
        let g = Game::new(&sys);
        let s = single_robot_game(&sys, sys.port_named(t, "A").unwrap());
        let after = g.play(&s, g.moves(&s)[0]);
        assert!(g.moves(&after).is_empty());
        assert_eq!(solve(&g, &s, BUDGET).unwrap().value(), GameValue::Win);
    }

    #[test]
    fn ko_filters_parallel_toggle() {
        let mut b = SystemBuilder::new();
        let k = b.add_type(library::one_toggle());
        let t1 = b.add_instance("t1", k, 1);
        let t2 = b.add_instance("t2", k, 1);
        let (b1, b2) = (b.port(t1, "B"), b.port(t2, "B"));
        b.connect(b1, b2);
        let sys = b.build();
        let g = Game::new(&sys);
        let mut s = single_robot_game(&sys, b1);
        assert_eq!(g.moves(&s).len(), 2);
        s.last = Some(t1);
        assert_eq!(g.moves(&s), vec![(t2, 1)]);
    }

    #[test]
    fn win_classes_end_the_game() {
        let mut b = SystemBuilder::new();
        let k = b.add_type(library::one_toggle());
        let t = b.add_instance("t", k, 0);
        let sys = b.build();
        let (a, goal) = (sys.port_named(t, "A").unwrap(), sys.port_named(t, "B").unwrap());
        let g = Game::new(&sys).with_win_classes(vec![], vec![sys.class_of(goal)]);
        let s = g.initial(sys.class_of(a));
        // Player 1 must walk into Player 2's goal, which is an ordinary move for them
        assert_eq!(solve(&g, &s, BUDGET).unwrap().value(), GameValue::Win);
        let g = Game::new(&sys).with_win_classes(vec![sys.class_of(goal)], vec![]);
        let sol = solve(&g, &g.initial(sys.class_of(a)), BUDGET).unwrap();
        assert_eq!(sol.value(), GameValue::Win);
        assert_eq!(sol.immediate[0], Some((t, 0)));
    }

    #[test]
    fn retrograde_small_graphs() {
        // 0 -> 1 -> 2 (dead): 2 lose, 1 win, 0 lose
        assert_eq!(retrograde(&[vec![1], vec![2], vec![]], &[false; 3]), vec![GameValue::Lose, GameValue::Win, GameValue::Lose]);
        // two-cycle draws
        assert_eq!(retrograde(&[vec![1], vec![0]], &[false; 2]), vec![GameValue::Draw; 2]);
    }

    fn random_system(rng: &mut ChaCha8Rng) -> (System, GameState) {
        let lib = [library::one_toggle(), library::two_tunnel_toggle(), library::locking_2_toggle(), library::self_closing_door()];
        let mut b = SystemBuilder::new();
        let mut ports = Vec::new();
        for i in 0..rng.gen_range(1..=4) {
            let ty = lib[rng.gen_range(0..lib.len())].clone();
            let locs = ty.locations.clone();
            let ns = ty.states.len();
            let k = b.add_type(ty);
            let g = b.add_instance(&format!("g{i}"), k, rng.gen_range(0..ns));
            ports.extend(locs.iter().map(|l| b.port(g, l)));
        }
        for _ in 0..rng.gen_range(0..=ports.len()) {
            let (x, y) = (ports[rng.gen_range(0..ports.len())], ports[rng.gen_range(0..ports.len())]);
            b.connect(x, y);
        }
        let sys = b.build();
        let start = Game::new(&sys).initial(sys.class_of(ports[rng.gen_range(0..ports.len())]));
        (sys, start)
    }

    #[test]
    fn retrograde_matches_negamax_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut seen = BTreeSet::new();
        for _ in 0..200 {
            let (sys, start) = random_system(&mut rng);
            let g = Game::new(&sys);
            let sol = solve(&g, &start, 10_000).unwrap();
            sol.check_fixed_point().unwrap();
            let (v, all) = negamax_oracle(&g, &start, 10_000).unwrap();
            assert_eq!(v, sol.value());
            assert_eq!(all.len(), sol.positions.len());
            for (p, l) in sol.positions.iter().zip(&sol.labels) {
                assert_eq!(all[p], *l);
                if let Some(last) = p.last {
                    assert!(g.moves(p).iter().all(|&(i, _)| i != last));
                }
            }
            seen.insert(sol.value());
        }
        assert_eq!(seen.len(), 3, "corpus should produce every value");
    }

    fn lit(var: usize, negated: bool) -> Literal {
        Literal { var, negated }
    }

    fn var(name: &str, owner: u8, init: bool) -> G4Var {
        G4Var { name: name.into(), owner, init }
    }

    #[test]
    fn g4_examples() {
        let x = G4Instance { vars: vec![var("x", 1, false)], clauses: vec![vec![lit(0, false)]], width: 1 };
        assert_eq!(g4_solve(&x, BUDGET), Ok(GameValue::Win));
        let y = G4Instance { vars: vec![var("y", 2, false)], clauses: vec![vec![lit(0, false)]], width: 1 };
        assert_eq!(g4_solve(&y, BUDGET), Ok(GameValue::Lose));
        let none = G4Instance { vars: vec![var("x", 1, false)], clauses: vec![vec![lit(0, false), lit(0, true)]], width: 2 };
        assert_eq!(g4_solve(&none, BUDGET), Ok(GameValue::Draw));
        let sat = G4Instance { vars: vec![var("x", 1, true)], clauses: vec![vec![lit(0, false)]], width: 1 };
        assert!(matches!(g4_solve(&sat, BUDGET), Err(TwoError::InvalidInstance(_))));
        let ragged = G4Instance { vars: vec![var("x", 1, false)], clauses: vec![vec![lit(0, false)], vec![]], width: 1 };
        assert!(matches!(g4_solve(&ragged, BUDGET), Err(TwoError::InvalidInstance(_))));
    }

    #[test]
    fn g4_gadget_shape() {
        let inst = G4Instance {
            vars: vec![var("x", 1, true), var("y", 2, false)],
            clauses: vec![vec![lit(0, false), lit(1, false)], vec![lit(0, true), lit(1, false)]],
            width: 2,
        };
        let (sys, _) = g4_to_gadgets(&inst).unwrap();
        assert!(sys.validate().is_empty());
        let named = |p: &str| sys.instances().iter().filter(|i| i.name.starts_with(p)).count();
        assert_eq!(named("var.x.") - 2, 4, "one positive and one negative occurrence");
        assert_eq!(named("clause1."), 2);
        assert_eq!(named("finish"), 1);
        assert_eq!(named("alternator"), 1);
        assert_eq!(named("pass1.toggle"), 2);
    }

    #[test]
    fn g4_reduction_on_small_instances() {
        let cases = [
            G4Instance { vars: vec![var("x", 1, false)], clauses: vec![vec![lit(0, false)]], width: 1 },
            G4Instance { vars: vec![var("y", 2, false)], clauses: vec![vec![lit(0, false)]], width: 1 },
            G4Instance { vars: vec![var("x", 1, false)], clauses: vec![vec![lit(0, false), lit(0, true)]], width: 2 },
            G4Instance {
                vars: vec![var("x", 1, false), var("y", 2, true)],
                clauses: vec![vec![lit(0, false), lit(1, true)]],
                width: 2,
            },
            G4Instance {
                vars: vec![var("x", 1, false), var("y", 2, false)],
                clauses: vec![vec![lit(0, false), lit(1, false)]],
                width: 2,
            },
        ];
        for inst in &cases {
            let want = g4_solve(inst, BUDGET).unwrap();
            let (sys, start) = g4_to_gadgets(inst).unwrap();
            let got = solve(&Game::new(&sys), &start, 2_000_000).unwrap().value();
            assert_eq!(got, want, "{inst:?}: {got:?} vs {want:?}");
        }
    }

    #[test]
    fn certificates() {
        let l2t = library::locking_2_toggle();
        assert_eq!(TunnelCertificate::locking_2_toggle().check(&l2t), Ok(()));
        let closed = TunnelCertificate { s1: 0, s2: 1, s3: 2, t1: (0, 1), t2: (3, 2) };
        assert!(matches!(closed.check(&l2t), Err(TwoError::CertificateMismatch(_))));
        assert!(build_l2t_sim(&library::one_toggle(), &TunnelCertificate::locking_2_toggle()).is_err());
    }

    #[test]
    fn identity_boxes_pass() {
        for ty in library::standard_library().values() {
            for s in 0..ty.states.len() {
                let r = verify_box(&identity_box(ty, s), Parity::STRICT);
                assert!(r.passed(), "{} {s}: {:?}", ty.name, r.violations);
            }
        }
    }

    #[test]
    fn directed_sim_takes_two() {
        let bx = build_directed_tunnel_sim(&library::locking_2_toggle(), &TunnelCertificate::locking_2_toggle()).unwrap();
        let r = verify_box(&bx, Parity { odd_crossings: false, even_stalls: true });
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.crossing_lengths, BTreeSet::from([2]));
        assert!(!verify_box(&bx, Parity::STRICT).passed());
    }

    #[test]
    fn l2t_sim_takes_nine() {
        let bx = build_l2t_sim(&library::locking_2_toggle(), &TunnelCertificate::locking_2_toggle()).unwrap();
        let r = verify_box(&bx, Parity::STRICT);
        assert!(r.passed(), "{:?}", r.violations);
        assert_eq!(r.crossing_lengths, BTreeSet::from([9]));
        assert!(r.stall_lengths.iter().all(|l| l % 2 == 0));
        assert_eq!(r.configs, 3);
    }

    #[test]
    fn broken_box_fails() {
        let cert = TunnelCertificate::locking_2_toggle();
        for skip in 0..10 {
            let bx = build_l2t_sim_without_wire(&library::locking_2_toggle(), &cert, Some(skip)).unwrap();
            let r = verify_box(&bx, Parity::STRICT);
            assert!(!r.passed(), "wire {skip}");
        }
    }
}
