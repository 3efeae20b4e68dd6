//! Three-counter machines: an interpreter and a compiler to 0-player systems.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::gadget::{LocId, System, SystemBuilder};
use crate::library;
use crate::zero_player::{Reach, SimError, Simulator, World};

/// Multiplier in the round budget `C * (steps + 4) * (len + 4)`.
pub const ROUND_CONSTANT: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Instr {
    Inc(usize),
    Dec(usize),
    /// Register, 1-based jump target.
    Jz(usize, usize),
    Halt,
}

impl fmt::Display for Instr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instr::Inc(r) => write!(f, "INC {r}"),
            Instr::Dec(r) => write!(f, "DEC {r}"),
            Instr::Jz(r, z) => write!(f, "JZ {r} {z}"),
            Instr::Halt => write!(f, "HALT"),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CounterError {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("unsupported program: {0}")]
    UnsupportedProgram(String),
    #[error("DEC on zero register {register} at instruction {pc}")]
    NegativeRegister { pc: usize, register: usize },
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Program {
    pub instrs: Vec<Instr>,
}

impl Program {
    pub fn new(instrs: Vec<Instr>) -> Result<Program, CounterError> {
        let p = Program { instrs };
        p.validate()?;
        Ok(p)
    }

    pub fn len(&self) -> usize {
        self.instrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instrs.is_empty()
    }

    pub fn validate(&self) -> Result<(), CounterError> {
        if self.instrs.is_empty() {
            return Err(CounterError::UnsupportedProgram("no instructions".into()));
        }
        for (i, ins) in self.instrs.iter().enumerate() {
            let bad = |m: String| Err(CounterError::UnsupportedProgram(format!("instruction {}: {m}", i + 1)));
            match *ins {
                Instr::Inc(r) | Instr::Dec(r) if !(1..=3).contains(&r) => return bad(format!("register {r}")),
                Instr::Jz(r, _) if !(1..=3).contains(&r) => return bad(format!("register {r}")),
                Instr::Jz(_, z) if z == 0 || z > self.instrs.len() => return bad(format!("jump target {z}")),
                _ => {}
            }
        }
        Ok(())
    }

    /// 1-based indices of DEC instructions not directly preceded by a JZ on the same register.
    pub fn unguarded_decs(&self) -> Vec<usize> {
        (0..self.instrs.len())
            .filter(|&i| match self.instrs[i] {
                Instr::Dec(r) => !matches!(i.checked_sub(1).map(|j| self.instrs[j]), Some(Instr::Jz(q, _)) if q == r),
                _ => false,
            })
            .map(|i| i + 1)
            .collect()
    }
}

impl fmt::Display for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, ins) in self.instrs.iter().enumerate() {
            writeln!(f, "{}: {ins}", i + 1)?;
        }
        Ok(())
    }
}

impl FromStr for Program {
    type Err = CounterError;

    /// `i: INC r` / `i: DEC r` / `i: JZ r z` / `i: HALT`, one per line, numbered from 1.
    /// Blank lines and `#` comments are ignored.
    fn from_str(s: &str) -> Result<Program, CounterError> {
        let mut instrs = Vec::new();
        for (n, raw) in s.lines().enumerate() {
            let line = n + 1;
            let text = raw.split('#').next().unwrap_or("").trim();
            if text.is_empty() {
                continue;
            }
            let err = |msg: &str| CounterError::Parse { line, msg: msg.to_string() };
            let (num, body) = text.split_once(':').ok_or_else(|| err("expected `i: INSTR`"))?;
            let idx: usize = num.trim().parse().map_err(|_| err("bad instruction number"))?;
            if idx != instrs.len() + 1 {
                return Err(err(&format!("expected instruction number {}", instrs.len() + 1)));
            }
            let words: Vec<&str> = body.split_whitespace().collect();
            let arg = |k: usize| -> Result<usize, CounterError> {
                words.get(k).ok_or_else(|| err("missing operand"))?.parse().map_err(|_| err("bad operand"))
            };
            let (ins, arity) = match words.first().map(|w| w.to_ascii_uppercase()).as_deref() {
                Some("INC") => (Instr::Inc(arg(1)?), 2),
                Some("DEC") => (Instr::Dec(arg(1)?), 2),
                Some("JZ") => (Instr::Jz(arg(1)?, arg(2)?), 3),
                Some("HALT") => (Instr::Halt, 1),
                _ => return Err(err("unknown opcode")),
            };
            if words.len() != arity {
                return Err(err("wrong number of operands"));
            }
            instrs.push(ins);
        }
        Program::new(instrs)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct MachineState {
    /// 1-based program counter.
    pub pc: usize,
    pub regs: [u64; 3],
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    /// HALT executed as step `steps`.
    Halted { steps: u64, state: MachineState },
    /// Budget exhausted.
    Running(MachineState),
    /// Control fell past the last instruction after `steps` steps. Never halts.
    FellOff { steps: u64, state: MachineState },
}

impl Outcome {
    pub fn halted(&self) -> bool {
        matches!(self, Outcome::Halted { .. })
    }
}

pub fn step(program: &Program, st: &mut MachineState) -> Result<bool, CounterError> {
    match program.instrs[st.pc - 1] {
        Instr::Inc(r) => {
            st.regs[r - 1] += 1;
            st.pc += 1;
        }
        Instr::Dec(r) => {
            if st.regs[r - 1] == 0 {
                return Err(CounterError::NegativeRegister { pc: st.pc, register: r });
            }
            st.regs[r - 1] -= 1;
            st.pc += 1;
        }
        Instr::Jz(r, z) => st.pc = if st.regs[r - 1] == 0 { z } else { st.pc + 1 },
        Instr::Halt => return Ok(true),
    }
    Ok(false)
}

pub fn interpret(program: &Program, max_steps: u64) -> Result<Outcome, CounterError> {
    program.validate()?;
    let mut st = MachineState { pc: 1, regs: [0; 3] };
    for n in 1..=max_steps {
        if step(program, &mut st)? {
            return Ok(Outcome::Halted { steps: n, state: st });
        }
        if st.pc > program.len() {
            return Ok(Outcome::FellOff { steps: n, state: st });
        }
    }
    Ok(Outcome::Running(st))
}

/// A compiled program together with the indices needed to observe it.
#[derive(Clone, Debug)]
pub struct Compiled {
    pub system: System,
    pub win: LocId,
    pub us: usize,
    pub increment: usize,
    /// Register gadgets for registers 1..=3.
    pub registers: [usize; 3],
    /// One UPDSDS instance per instruction, in program order.
    pub instrs: Vec<usize>,
}

impl Compiled {
    /// Number of robots waiting at register `r`'s (1-based) processing entrance.
    pub fn register_value(&self, world: &World, r: usize) -> u64 {
        let proc_in = self.system.port_named(self.registers[r - 1], "proc_in").expect("register port");
        world.robots.iter().filter(|&&l| l == proc_in).count() as u64
    }
}

pub fn compile(program: &Program) -> Result<Compiled, CounterError> {
    program.validate()?;
    let n = program.len();
    let mut b = SystemBuilder::new().directed(true);
    let us_t = b.add_type(library::us_switch());
    let inc_t = b.add_type(library::increment());
    let reg_t = b.add_type(library::register());
    let ud_t = b.add_type(library::updsds());

    let spawn = b.node("spawn");
    let win = b.node("win");
    let dead = b.node("dead");
    let pass_head = b.node("pass_head");
    let jump_head = b.node("jump_head");

    let us = b.add_instance("us", us_t, 1);
    let inc = b.add_instance("inc", inc_t, 0);
    let regs = [1, 2, 3].map(|r| b.add_instance(&format!("reg{r}"), reg_t, 0));
    let instrs: Vec<usize> = (1..=n).map(|i| b.add_instance(&format!("instr{i}"), ud_t, 1)).collect();

    b.spawner(spawn);
    let p = |b: &SystemBuilder, i: usize, l: &str| b.port(i, l);
    let mut edges = Vec::new();

    let (us_in, us_up, us_down) = (p(&b, us, "I"), p(&b, us, "O_up"), p(&b, us, "O_down"));
    edges.push((spawn, us_in));
    edges.push((us_down, p(&b, instrs[0], "T_in")));
    edges.push((us_up, p(&b, inc, "lock_in")));
    edges.push((pass_head, p(&b, instrs[0], "S1_in")));
    edges.push((jump_head, p(&b, instrs[0], "S2_in")));

    for (k, ins) in program.instrs.iter().enumerate() {
        let g = instrs[k];
        let op = match *ins {
            Instr::Inc(r) => p(&b, inc, &format!("sel_in_{r}")),
            Instr::Dec(r) => p(&b, regs[r - 1], "dec_in"),
            Instr::Jz(r, _) => p(&b, regs[r - 1], "jz_in"),
            Instr::Halt => win,
        };
        edges.push((p(&b, g, "T_out"), op));
        let (t_next, s1_next, s2_next) = match instrs.get(k + 1) {
            Some(&h) => (p(&b, h, "T_in"), p(&b, h, "S1_in"), p(&b, h, "S2_in")),
            None => (dead, dead, dead),
        };
        edges.push((p(&b, g, "S1_up"), t_next));
        edges.push((p(&b, g, "S1_down"), s1_next));
        edges.push((p(&b, g, "S2_down"), s2_next));
        let jump = match *ins {
            Instr::Jz(_, z) => p(&b, instrs[z - 1], "T_in"),
            _ => dead,
        };
        edges.push((p(&b, g, "S2_up"), jump));
    }
    for (r, &g) in regs.iter().enumerate() {
        edges.push((p(&b, inc, &format!("sel_out_{}", r + 1)), pass_head));
        edges.push((p(&b, inc, &format!("lock_out_{}", r + 1)), p(&b, g, "proc_in")));
        edges.push((p(&b, g, "jz_out"), p(&b, g, "resp_in")));
        edges.push((p(&b, g, "dec_out"), pass_head));
        edges.push((p(&b, g, "resp_top_out"), pass_head));
        edges.push((p(&b, g, "resp_bot_out"), jump_head));
        edges.push((p(&b, g, "proc_top_out"), p(&b, g, "proc_in")));
        edges.push((p(&b, g, "proc_sink_out"), dead));
    }
    for (from, to) in edges {
        b.connect(from, to);
    }
    Ok(Compiled { system: b.build(), win, us, increment: inc, registers: regs, instrs })
}

pub fn round_budget(step_budget: u64, program_len: usize) -> u64 {
    ROUND_CONSTANT * (step_budget + 4) * (program_len as u64 + 4)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquivalenceReport {
    pub interpreter: Outcome,
    pub round_budget: u64,
    /// Round in which a robot first touched the win location, if within budget.
    pub win_round: Option<u64>,
}

impl EquivalenceReport {
    pub fn agree(&self) -> bool {
        self.interpreter.halted() == self.win_round.is_some()
    }
}

pub fn equivalence_check(program: &Program, step_budget: u64) -> Result<EquivalenceReport, CounterError> {
    let compiled = compile(program)?;
    let budget = round_budget(step_budget, program.len());
    let (interp, reach) = std::thread::scope(|s| {
        let h = s.spawn(|| interpret(program, step_budget));
        let sim = Simulator::new(&compiled.system);
        let reach = sim.reach_within(&World::initial(&compiled.system), compiled.win, budget);
        (h.join().expect("interpreter thread"), reach)
    });
    let win_round = match reach? {
        Reach::Reached(r) => Some(r),
        Reach::NotWithinBudget => None,
    };
    Ok(EquivalenceReport { interpreter: interp?, round_budget: budget, win_round })
}

/// Checks, for `rounds` rounds, that at every round where the executor enters an
/// instruction's tunnel the register gadgets hold the interpreter's values, and
/// that no robot but the executor drives an instruction, selector or register
/// control transition. Returns the number of instruction boundaries checked.
pub fn check_register_invariant(program: &Program, rounds: u64) -> Result<usize, String> {
    let c = compile(program).map_err(|e| e.to_string())?;
    let sys = &c.system;
    let sim = Simulator::new(sys);
    let mut world = World::initial(sys);
    let mut st = MachineState { pc: 1, regs: [0; 3] };
    let mut checked = 0;
    let is_instr = |i: usize| c.instrs.contains(&i);
    for _ in 0..rounds {
        let ev = sim.step_round(&mut world).map_err(|e| e.to_string())?;
        for t in &ev.turns {
            let Some((inst, tr)) = t.traversal else { continue };
            let from = &sys.type_of(inst).locations[sys.transition(inst, tr).from];
            let control = is_instr(inst)
                || (inst == c.increment && from.starts_with("sel_in"))
                || (c.registers.contains(&inst) && from != "proc_in");
            if control && t.robot != 0 {
                return Err(format!("robot {} drove {}.{from} in round {}", t.robot, sys.instances()[inst].name, ev.round));
            }
            if t.robot == 0 && is_instr(inst) && from == "T_in" {
                let k = c.instrs.iter().position(|&g| g == inst).expect("instruction") + 1;
                if k != st.pc {
                    return Err(format!("round {}: executor entered instruction {k}, interpreter at {}", ev.round, st.pc));
                }
                for r in 1..=3 {
                    let v = c.register_value(&world, r);
                    if v != st.regs[r - 1] {
                        return Err(format!("round {}: register {r} holds {v}, expected {}", ev.round, st.regs[r - 1]));
                    }
                }
                checked += 1;
                if step(program, &mut st).map_err(|e| e.to_string())? || st.pc > program.len() {
                    return Ok(checked);
                }
            }
        }
    }
    Ok(checked)
}
