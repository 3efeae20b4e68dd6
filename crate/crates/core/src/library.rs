//! The standard gadget library.

use std::collections::BTreeMap;

use crate::gadget::GadgetType;

pub const ONE_TOGGLE: &str = "1-toggle";
pub const TWO_TUNNEL_TOGGLE: &str = "2-tunnel-toggle";
pub const LOCKING_2_TOGGLE: &str = "locking-2-toggle";
pub const SELF_CLOSING_DOOR: &str = "symmetric-self-closing-door";
pub const US_SWITCH: &str = "us-switch";
pub const UPDSDS: &str = "updsds";
pub const INCREMENT: &str = "increment";
pub const REGISTER: &str = "register";

pub fn one_toggle() -> GadgetType {
    GadgetType::new(ONE_TOGGLE, &["1", "2"], &["A", "B"], &[("1", "A", "B", "2"), ("2", "B", "A", "1")])
        .with_tunnels(&[("A", "B")])
}

pub fn two_tunnel_toggle() -> GadgetType {
    GadgetType::new(
        TWO_TUNNEL_TOGGLE,
        &["1", "2"],
        &["A", "B", "C", "D"],
        &[
            ("1", "A", "B", "2"),
            ("1", "C", "D", "2"),
            ("2", "B", "A", "1"),
            ("2", "D", "C", "1"),
        ],
    )
    .with_tunnels(&[("A", "B"), ("C", "D")])
}

/// States 1 and 3 are leaves, 2 is the nonleaf state where both tunnels are open.
pub fn locking_2_toggle() -> GadgetType {
    GadgetType::new(
        LOCKING_2_TOGGLE,
        &["1", "2", "3"],
        &["A", "B", "C", "D"],
        &[
            ("2", "A", "B", "1"),
            ("2", "C", "D", "3"),
            ("1", "B", "A", "2"),
            ("3", "D", "C", "2"),
        ],
    )
    .with_tunnels(&[("A", "B"), ("C", "D")])
}

pub fn self_closing_door() -> GadgetType {
    GadgetType::new(
        SELF_CLOSING_DOOR,
        &["1", "2"],
        &["A", "B", "C", "D"],
        &[("1", "A", "B", "2"), ("2", "C", "D", "1")],
    )
    .with_tunnels(&[("A", "B"), ("C", "D")])
}

/// Set-up switch: the first robot through takes the `O_down` exit, every later one `O_up`.
pub fn us_switch() -> GadgetType {
    GadgetType::new(
        US_SWITCH,
        &["up", "down"],
        &["I", "O_up", "O_down"],
        &[("up", "I", "O_up", "up"), ("down", "I", "O_down", "up")],
    )
}

/// A set-up tunnel plus two set-down switches sharing one up/down bit.
pub fn updsds() -> GadgetType {
    let mut tr = vec![("up", "T_in", "T_out", "up"), ("down", "T_in", "T_out", "up")];
    for (input, up, down) in [("S1_in", "S1_up", "S1_down"), ("S2_in", "S2_up", "S2_down")] {
        tr.push(("up", input, up, "down"));
        tr.push(("down", input, down, "down"));
    }
    GadgetType::new(
        UPDSDS,
        &["up", "down"],
        &["T_in", "T_out", "S1_in", "S1_up", "S1_down", "S2_in", "S2_up", "S2_down"],
        &tr,
    )
}

/// Three-path selector that arms one of three lock-branch exits.
pub fn increment() -> GadgetType {
    let states = ["0", "1", "2", "3"];
    let locs = [
        "sel_in_1", "sel_out_1", "sel_in_2", "sel_out_2", "sel_in_3", "sel_out_3", "lock_in",
        "lock_out_1", "lock_out_2", "lock_out_3",
    ];
    let names: Vec<[String; 4]> = (1..=3)
        .map(|i| [format!("sel_in_{i}"), format!("sel_out_{i}"), format!("lock_out_{i}"), i.to_string()])
        .collect();
    let mut tr = Vec::new();
    for [sin, sout, lout, s] in &names {
        tr.push(("0", sin.as_str(), sout.as_str(), s.as_str()));
        tr.push((s.as_str(), "lock_in", lout.as_str(), "0"));
    }
    GadgetType::new(INCREMENT, &states, &locs, &tr)
}

/// Register gadget with states O (idle), D (decrement armed), J (jump-zero armed).
pub fn register() -> GadgetType {
    GadgetType::new(
        REGISTER,
        &["O", "D", "J"],
        &[
            "dec_in", "dec_out", "jz_in", "jz_out", "proc_in", "proc_top_out", "proc_sink_out",
            "resp_in", "resp_top_out", "resp_bot_out",
        ],
        &[
            ("O", "dec_in", "dec_out", "D"),
            ("O", "jz_in", "jz_out", "J"),
            ("D", "proc_in", "proc_sink_out", "O"),
            ("J", "proc_in", "proc_top_out", "O"),
            ("J", "resp_in", "resp_bot_out", "O"),
            ("O", "resp_in", "resp_top_out", "O"),
        ],
    )
}

pub fn standard_library() -> BTreeMap<String, GadgetType> {
    [
        one_toggle(),
        two_tunnel_toggle(),
        locking_2_toggle(),
        self_closing_door(),
        us_switch(),
        updsds(),
        increment(),
        register(),
    ]
    .into_iter()
    .map(|g| (g.name.clone(), g))
    .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gadget::Transition;

    #[test]
    fn library_sizes() {
        let lib = standard_library();
        let size = |n: &str| (lib[n].states.len(), lib[n].locations.len());
        assert_eq!(size(INCREMENT), (4, 10));
        assert_eq!(size(REGISTER), (3, 10));
        assert_eq!(size(SELF_CLOSING_DOOR), (2, 4));
        assert_eq!(size(UPDSDS), (2, 8));
        assert_eq!(lib.len(), 8);
        for g in lib.values() {
            assert!(g.validate().is_empty(), "{}: {:?}", g.name, g.validate());
        }
    }

    // Exhaustive definitions, independent of the methods on GadgetType.
    fn brute_deterministic(g: &GadgetType) -> bool {
        g.transitions.iter().enumerate().all(|(i, a)| {
            g.transitions
                .iter()
                .enumerate()
                .all(|(j, b)| i == j || (a.state, a.from) != (b.state, b.from))
        })
    }

    fn brute_reversible(g: &GadgetType) -> bool {
        g.transitions.iter().all(|a| {
            g.transitions.iter().any(|b| *b == Transition::new(a.next, a.to, a.from, a.state))
        })
    }

    #[test]
    fn classification_matches_exhaustive_checks() {
        for g in standard_library().values() {
            assert_eq!(g.is_deterministic(), brute_deterministic(g), "{}", g.name);
            assert_eq!(g.is_reversible(), brute_reversible(g), "{}", g.name);
        }
        let l2t = locking_2_toggle();
        assert!(l2t.is_reversible() && l2t.is_deterministic());
        assert_eq!(l2t.k_tunnel_partition(), Some(vec![(0, 1), (2, 3)]));
        let door = self_closing_door();
        assert!(door.is_deterministic() && !door.is_reversible());
        assert_eq!(door.k_tunnel_partition(), Some(vec![(0, 1), (2, 3)]));
        for g in [increment(), register(), updsds()] {
            assert!(g.is_deterministic() && !g.is_reversible(), "{}", g.name);
        }
        assert!(one_toggle().is_reversible());
    }

    #[test]
    fn dag_checks() {
        assert!(!locking_2_toggle().is_dag());
        assert!(GadgetType::new("one", &["1"], &["A"], &[]).is_dag());
        assert!(GadgetType::new("once", &["1", "2"], &["A", "B"], &[("1", "A", "B", "2")]).is_dag());
        assert!(!GadgetType::new("loop", &["1"], &["A", "B"], &[("1", "A", "B", "1")]).is_dag());
    }

    #[test]
    fn determinism_and_reversibility_edge_cases() {
        let two_out = GadgetType::new(
            "fork",
            &["1", "2"],
            &["A", "B", "C"],
            &[("1", "A", "B", "2"), ("1", "A", "C", "2")],
        );
        assert!(!two_out.is_deterministic());
        assert!(GadgetType::new("empty", &["1"], &["A", "B"], &[]).is_reversible());
    }

    #[test]
    fn tunnel_partition_edge_cases() {
        let odd = GadgetType::new("odd", &["1"], &["A", "B", "C"], &[]);
        assert_eq!(odd.k_tunnel_partition(), None);
        // unconstrained locations pair lexicographically
        let free = GadgetType::new("free", &["1"], &["A", "B", "C", "D"], &[("1", "A", "D", "1")]);
        assert_eq!(free.k_tunnel_partition(), Some(vec![(0, 3), (1, 2)]));
        let star = GadgetType::new(
            "star",
            &["1"],
            &["A", "B", "C", "D"],
            &[("1", "A", "B", "1"), ("1", "A", "C", "1")],
        );
        assert_eq!(star.k_tunnel_partition(), None);
    }
}
