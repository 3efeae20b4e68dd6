//! `gadgets` command-line front end.
//!
//! Exit status: 0 yes/pass, 1 no/fail, 2 inconclusive within the given
//! bounds, 3 input error. JSON results go to stdout, summaries to stderr.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use gadgets::counter::{compile, equivalence_check, Outcome, Program};
use gadgets::formats;
use gadgets::gadget::{Configuration, LocId, System};
use gadgets::library;
use gadgets::one_player::{
    reconfigure_no_destroyer, reconfigure_with_destroyer, replay_moves, robot_reachability, Bounds, Plan,
};
use gadgets::petri::{coverable, production, reachable_exact, ExactReach, Marking, Net};
use gadgets::translate::{gadgets_to_petri, petri_to_gadgets};
use gadgets::two_player::{
    build_directed_tunnel_sim, build_l2t_sim, g4_solve, g4_to_gadgets, identity_box, solve, verify_box, Game,
    GameValue, Parity, TunnelCertificate, TwoError,
};
use gadgets::zero_player::{replay, validate_directed, Reach, Simulator, World};

#[derive(Parser)]
#[command(name = "gadgets", version, about = "Motion planning through gadgets with many robots")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a system file for well-formedness.
    Check { system: PathBuf },
    /// Run the zero-player round-robin simulation.
    Sim0 {
        system: PathBuf,
        #[arg(long, default_value_t = 100)]
        rounds: u64,
        /// Stop as soon as a robot touches this location.
        #[arg(long)]
        target: Option<String>,
        /// Write the trace file here.
        #[arg(long)]
        trace: Option<PathBuf>,
    },
    /// Compile a counter program to a zero-player system file.
    CompileCounter { program: PathBuf },
    /// Run a counter program and its compiled system side by side.
    EquivCounter {
        program: PathBuf,
        #[arg(long, default_value_t = 1000)]
        steps: u64,
    },
    /// Can a robot ever reach the class of `target`?
    Solve1 {
        system: PathBuf,
        #[arg(long)]
        target: String,
        /// Start configuration; the system's initial one if absent.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Targeted reconfiguration.
    Reconfig {
        system: PathBuf,
        #[arg(long)]
        from: PathBuf,
        #[arg(long)]
        to: PathBuf,
        /// Robot bound, only used when the system has a destroyer.
        #[arg(long, default_value_t = 8)]
        volume: u64,
        #[arg(long, default_value_t = 1_000_000)]
        states: usize,
        /// Write the witness file here.
        #[arg(long)]
        witness: Option<PathBuf>,
    },
    /// Translate a system into a Petri net.
    ToPetri {
        system: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Translate a Petri net into a self-closing-door system.
    FromPetri {
        net: PathBuf,
        /// Write the start configuration here.
        #[arg(long)]
        config_out: Option<PathBuf>,
    },
    /// Coverability of a marking, e.g. `--target 0,1`.
    Cover {
        net: PathBuf,
        #[arg(long, value_delimiter = ',')]
        target: Vec<u64>,
    },
    /// Can a token ever appear in the named dish?
    Produce {
        net: PathBuf,
        #[arg(long)]
        dish: String,
    },
    /// Bounded exact reachability of a marking.
    ReachExact {
        net: PathBuf,
        #[arg(long, value_delimiter = ',')]
        target: Vec<u64>,
        #[arg(long, default_value_t = 16)]
        volume: u64,
        #[arg(long, default_value_t = 1_000_000)]
        states: usize,
    },
    /// Solve the two-player game with the robot starting at `at`.
    Solve2 {
        system: PathBuf,
        #[arg(long)]
        at: String,
        #[arg(long, default_value_t = 1_000_000)]
        budget: usize,
        /// Write the strategy table here.
        #[arg(long)]
        strategy: Option<PathBuf>,
    },
    /// Solve a G4 instance, optionally through its gadget reduction.
    G4 {
        instance: PathBuf,
        /// Also solve the locking-2-toggle game built from the instance.
        #[arg(long)]
        via_gadgets: bool,
        /// Print the reduction's system file instead of solving.
        #[arg(long)]
        emit_system: bool,
        #[arg(long, default_value_t = 5_000_000)]
        budget: usize,
    },
    /// Check a simulation box against its target gadget.
    VerifyBox {
        #[arg(value_enum)]
        sim: BoxKind,
        /// Library gadget for `identity`.
        #[arg(long, default_value = library::LOCKING_2_TOGGLE)]
        gadget: String,
        /// State name for `identity`.
        #[arg(long)]
        state: Option<String>,
    },
    /// Replay a sim0 trace, or a reconfiguration witness with `--from`.
    Replay {
        system: PathBuf,
        file: PathBuf,
        #[arg(long)]
        from: Option<PathBuf>,
        #[arg(long)]
        to: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BoxKind {
    L2t,
    Directed,
    Identity,
}

enum Verdict {
    Yes,
    No,
    Budget,
}

struct Report {
    verdict: Verdict,
    json: Value,
    summary: String,
}

fn report(verdict: Verdict, json: Value, summary: impl Into<String>) -> Report {
    Report { verdict, json, summary: summary.into() }
}

struct InputError(Vec<String>);

fn err(msg: impl Into<String>) -> InputError {
    InputError(vec![msg.into()])
}

fn read(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), InputError> {
    fs::write(path, text).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn load_system(path: &Path) -> Result<System, InputError> {
    formats::parse_system(&read(path)?).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn load_config(path: &Path, sys: &System) -> Result<Configuration, InputError> {
    formats::parse_config(&read(path)?, sys).map_err(|e| err(format!("{}: {e}", path.display())))
}

fn load_net(path: &Path) -> Result<(Net, Marking), InputError> {
    let (net, start) = formats::parse_net(&read(path)?).map_err(|e| err(format!("{}: {e}", path.display())))?;
    let start = start.unwrap_or_else(|| vec![0; net.dim()]);
    Ok((net, start))
}

fn load_program(path: &Path) -> Result<Program, InputError> {
    read(path)?.parse().map_err(|e| err(format!("{}: {e}", path.display())))
}

fn location(sys: &System, name: &str) -> Result<LocId, InputError> {
    sys.location(name).ok_or_else(|| err(format!("unknown location {name:?}")))
}

fn target_marking(net: &Net, target: &[u64]) -> Result<(), InputError> {
    if target.len() != net.dim() {
        return Err(err(format!("target has {} entries for {} dishes", target.len(), net.dim())));
    }
    Ok(())
}

fn parsed(text: String) -> Value {
    serde_json::from_str(&text).expect("emitted JSON")
}

fn value_name(v: GameValue) -> &'static str {
    match v {
        GameValue::Win => "win",
        GameValue::Lose => "lose",
        GameValue::Draw => "draw",
    }
}

fn outcome_json(o: &Outcome) -> Value {
    match o {
        Outcome::Halted { steps, state } => json!({"outcome": "halted", "steps": steps, "registers": state.regs}),
        Outcome::Running(state) => json!({"outcome": "running", "pc": state.pc, "registers": state.regs}),
        Outcome::FellOff { steps, state } => json!({"outcome": "fell-off", "steps": steps, "registers": state.regs}),
    }
}

fn plan_report(plan: Plan, witness: Option<&Path>) -> Result<Report, InputError> {
    Ok(match plan {
        Plan::Yes(moves) => {
            if let Some(p) = witness {
                write(p, &formats::emit_witness(&moves))?;
            }
            let n = moves.len();
            report(Verdict::Yes, json!({"result": "yes", "moves": parsed(formats::emit_witness(&moves))["moves"]}), format!("reachable in {n} moves"))
        }
        Plan::No => report(Verdict::No, json!({"result": "no"}), "unreachable"),
        Plan::NoWithinBounds => report(Verdict::Budget, json!({"result": "no-within-bounds"}), "not found within bounds"),
    })
}

fn run(cmd: Command) -> Result<Report, InputError> {
    match cmd {
        Command::Check { system } => {
            let sys = load_system(&system)?;
            let mut diags = sys.validate();
            if sys.is_directed() {
                diags.extend(validate_directed(&sys));
            }
            let list: Vec<String> = diags.iter().map(ToString::to_string).collect();
            let verdict = if list.is_empty() { Verdict::Yes } else { Verdict::No };
            let summary = format!("{} diagnostics", list.len());
            Ok(report(verdict, json!({"diagnostics": list}), summary))
        }
        Command::Sim0 { system, rounds, target, trace } => {
            let sys = load_system(&system)?;
            let diags = validate_directed(&sys);
            if !diags.is_empty() {
                return Err(InputError(diags.iter().map(ToString::to_string).collect()));
            }
            let sim = Simulator::new(&sys);
            let start = World::initial(&sys);
            let (end, tr) = sim.simulate(&start, rounds).map_err(|e| err(e.to_string()))?;
            if let Some(p) = &trace {
                write(p, &formats::emit_trace(&tr, end.digest()))?;
            }
            let mut out = json!({"rounds": end.round, "robots": end.robots.len(), "final_digest": end.digest()});
            let mut verdict = Verdict::Yes;
            let mut summary = format!("{} rounds, {} robots", end.round, end.robots.len());
            if let Some(t) = target {
                let loc = location(&sys, &t)?;
                let reach = sim.reach_within(&start, loc, rounds).map_err(|e| err(e.to_string()))?;
                match reach {
                    Reach::Reached(r) => {
                        out["reached"] = json!(r);
                        summary = format!("{t} reached in round {r}");
                    }
                    Reach::NotWithinBudget => {
                        out["reached"] = Value::Null;
                        verdict = Verdict::Budget;
                        summary = format!("{t} not reached within {rounds} rounds");
                    }
                }
            }
            Ok(report(verdict, out, summary))
        }
        Command::CompileCounter { program } => {
            let p = load_program(&program)?;
            let c = compile(&p).map_err(|e| err(e.to_string()))?;
            let win = c.system.locations()[c.win].clone();
            Ok(report(Verdict::Yes, parsed(formats::emit_system(&c.system)), format!("win location {win}")))
        }
        Command::EquivCounter { program, steps } => {
            let p = load_program(&program)?;
            let r = equivalence_check(&p, steps).map_err(|e| err(e.to_string()))?;
            let agree = r.agree();
            let out = json!({
                "interpreter": outcome_json(&r.interpreter),
                "round_budget": r.round_budget,
                "win_round": r.win_round,
                "report": if agree { "agree" } else { "disagree" },
            });
            let summary = if agree { "agree" } else { "disagree" };
            Ok(report(if agree { Verdict::Yes } else { Verdict::No }, out, summary))
        }
        Command::Solve1 { system, target, config } => {
            let sys = load_system(&system)?;
            let start = match &config {
                Some(p) => load_config(p, &sys)?,
                None => sys.initial_configuration(),
            };
            let class = sys.class_of(location(&sys, &target)?);
            let yes = robot_reachability(&sys, &start, class).map_err(|e| err(e.to_string()))?;
            Ok(report(
                if yes { Verdict::Yes } else { Verdict::No },
                json!({"reachable": yes}),
                if yes { format!("a robot can reach {target}") } else { format!("no robot can reach {target}") },
            ))
        }
        Command::Reconfig { system, from, to, volume, states, witness } => {
            let sys = load_system(&system)?;
            let (a, b) = (load_config(&from, &sys)?, load_config(&to, &sys)?);
            let plan = if sys.destroyer_classes().is_empty() {
                reconfigure_no_destroyer(&sys, &a, &b).map_err(|e| err(e.to_string()))?
            } else {
                reconfigure_with_destroyer(&sys, &a, &b, Bounds { volume, states })
            };
            plan_report(plan, witness.as_deref())
        }
        Command::ToPetri { system, config } => {
            let sys = load_system(&system)?;
            let (net, map) = gadgets_to_petri(&sys).map_err(|e| err(e.to_string()))?;
            let start = match &config {
                Some(p) => load_config(p, &sys)?,
                None => sys.initial_configuration(),
            };
            let m = map.config_to_marking(&start);
            let summary = format!("{} dishes, {} rules", net.dim(), net.rules.len());
            Ok(report(Verdict::Yes, parsed(formats::emit_net(&net, Some(&m))), summary))
        }
        Command::FromPetri { net, config_out } => {
            let (n, start) = load_net(&net)?;
            let (sys, map, cfg) = petri_to_gadgets(&n, &start);
            if let Some(p) = &config_out {
                write(p, &formats::emit_config(&cfg, &sys))?;
            }
            let control = sys.locations()[map.control].clone();
            let summary = format!("{} doors, control robot at {control}", sys.instances().len());
            Ok(report(Verdict::Yes, parsed(formats::emit_system(&sys)), summary))
        }
        Command::Cover { net, target } => {
            let (n, start) = load_net(&net)?;
            target_marking(&n, &target)?;
            let yes = coverable(&n, &start, &target);
            Ok(report(
                if yes { Verdict::Yes } else { Verdict::No },
                json!({"coverable": yes}),
                if yes { "coverable" } else { "not coverable" },
            ))
        }
        Command::Produce { net, dish } => {
            let (n, start) = load_net(&net)?;
            let d = n.dish(&dish).ok_or_else(|| err(format!("unknown dish {dish:?}")))?;
            let yes = production(&n, &start, d);
            Ok(report(
                if yes { Verdict::Yes } else { Verdict::No },
                json!({"producible": yes}),
                if yes { format!("{dish} can be produced") } else { format!("{dish} can never be produced") },
            ))
        }
        Command::ReachExact { net, target, volume, states } => {
            let (n, start) = load_net(&net)?;
            target_marking(&n, &target)?;
            Ok(match reachable_exact(&n, &start, &target, volume, states) {
                ExactReach::Yes(path) => {
                    let len = path.len();
                    report(Verdict::Yes, json!({"result": "yes", "rules": path}), format!("reachable in {len} firings"))
                }
                ExactReach::NoWithinBounds => {
                    report(Verdict::Budget, json!({"result": "no-within-bounds"}), "not found within bounds")
                }
            })
        }
        Command::Solve2 { system, at, budget, strategy } => {
            let sys = load_system(&system)?;
            let class = sys.class_of(location(&sys, &at)?);
            let game = Game::new(&sys);
            match solve(&game, &game.initial(class), budget) {
                Ok(sol) => {
                    if let Some(p) = &strategy {
                        let table = serde_json::to_string(&json!({"format": formats::FORMAT, "strategy": sol.strategy()}))
                            .expect("serializable");
                        write(p, &table)?;
                    }
                    let v = sol.value();
                    let out = json!({"value": value_name(v), "positions": sol.positions.len()});
                    let summary = format!("first player {} ({} positions)", value_name(v), sol.positions.len());
                    Ok(report(if v == GameValue::Win { Verdict::Yes } else { Verdict::No }, out, summary))
                }
                Err(TwoError::StateSpaceBudgetExceeded(n)) => {
                    Ok(report(Verdict::Budget, json!({"value": null, "budget": n}), format!("more than {n} positions")))
                }
                Err(e) => Err(err(e.to_string())),
            }
        }
        Command::G4 { instance, via_gadgets, emit_system, budget } => {
            let inst = formats::parse_g4(&read(&instance)?).map_err(|e| err(format!("{}: {e}", instance.display())))?;
            if emit_system {
                let (sys, _) = g4_to_gadgets(&inst).map_err(|e| err(e.to_string()))?;
                let summary = format!("{} gadgets; the robot starts at hub1", sys.instances().len());
                return Ok(report(Verdict::Yes, parsed(formats::emit_system(&sys)), summary));
            }
            let v = g4_solve(&inst, budget).map_err(|e| err(e.to_string()))?;
            let mut out = json!({"value": value_name(v)});
            let mut verdict = if v == GameValue::Win { Verdict::Yes } else { Verdict::No };
            let mut summary = format!("Player 1 {}", value_name(v));
            if via_gadgets {
                let (sys, start) = g4_to_gadgets(&inst).map_err(|e| err(e.to_string()))?;
                match solve(&Game::new(&sys), &start, budget) {
                    Ok(sol) => {
                        out["gadgets"] = json!({"value": value_name(sol.value()), "positions": sol.positions.len()});
                        out["agree"] = json!(sol.value() == v);
                        summary.push_str(&format!("; gadget game {}", value_name(sol.value())));
                        if sol.value() != v {
                            verdict = Verdict::No;
                        }
                    }
                    Err(TwoError::StateSpaceBudgetExceeded(n)) => {
                        out["gadgets"] = Value::Null;
                        verdict = Verdict::Budget;
                        summary.push_str(&format!("; gadget game over {n} positions"));
                    }
                    Err(e) => return Err(err(e.to_string())),
                }
            }
            Ok(report(verdict, out, summary))
        }
        Command::VerifyBox { sim, gadget, state } => {
            let l2t = library::locking_2_toggle();
            let cert = TunnelCertificate::locking_2_toggle();
            let (bx, parity) = match sim {
                BoxKind::L2t => (build_l2t_sim(&l2t, &cert).map_err(|e| err(e.to_string()))?, Parity::STRICT),
                BoxKind::Directed => (
                    build_directed_tunnel_sim(&l2t, &cert).map_err(|e| err(e.to_string()))?,
                    Parity { odd_crossings: false, even_stalls: true },
                ),
                BoxKind::Identity => {
                    let ty = library::standard_library()
                        .remove(&gadget)
                        .ok_or_else(|| err(format!("unknown library gadget {gadget:?}")))?;
                    let s = match &state {
                        Some(n) => ty.state(n).ok_or_else(|| err(format!("unknown state {n:?}")))?,
                        None => 0,
                    };
                    (identity_box(&ty, s), Parity::STRICT)
                }
            };
            let r = verify_box(&bx, parity);
            let out = json!({
                "passed": r.passed(),
                "crossing_lengths": r.crossing_lengths,
                "stall_lengths": r.stall_lengths,
                "configurations": r.configs,
                "violations": r.violations,
            });
            let summary = format!("crossings {:?}, stalls {:?}, {} violations", r.crossing_lengths, r.stall_lengths, r.violations.len());
            Ok(report(if r.passed() { Verdict::Yes } else { Verdict::No }, out, summary))
        }
        Command::Replay { system, file, from, to } => {
            let sys = load_system(&system)?;
            let text = read(&file)?;
            match from {
                None => {
                    let t = formats::parse_trace(&text).map_err(|e| err(format!("{}: {e}", file.display())))?;
                    let end = replay(&sys, &t.trace).map_err(|e| err(e.to_string()))?;
                    let ok = end.digest() == t.final_digest;
                    Ok(report(
                        if ok { Verdict::Yes } else { Verdict::No },
                        json!({"final_digest": end.digest(), "matches": ok}),
                        if ok { "trace replays to the recorded state" } else { "replay diverges from the recorded state" },
                    ))
                }
                Some(from) => {
                    let moves = formats::parse_witness(&text).map_err(|e| err(format!("{}: {e}", file.display())))?;
                    let start = load_config(&from, &sys)?;
                    let end = replay_moves(&sys, &start, &moves).map_err(|e| err(e.to_string()))?;
                    let ok = match &to {
                        Some(p) => end == load_config(p, &sys)?,
                        None => true,
                    };
                    Ok(report(
                        if ok { Verdict::Yes } else { Verdict::No },
                        json!({"final": parsed(formats::emit_config(&end, &sys)), "matches": ok}),
                        format!("{} moves replayed", moves.len()),
                    ))
                }
            }
        }
    }
}

// A closed stdout (e.g. piped into `head`) is not an error worth a panic.
fn emit(v: &Value) {
    let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(v).expect("serializable"));
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(r) => {
            emit(&r.json);
            eprintln!("{}", r.summary);
            ExitCode::from(match r.verdict {
                Verdict::Yes => 0,
                Verdict::No => 1,
                Verdict::Budget => 2,
            })
        }
        Err(InputError(diags)) => {
            emit(&json!({"errors": diags}));
            for d in &diags {
                eprintln!("error: {d}");
            }
            ExitCode::from(3)
        }
    }
}
