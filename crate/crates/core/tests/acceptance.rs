//! End-to-end acceptance suite. Each test prints one pass/fail line; the
//! stated runtime budgets are asserted where the criterion names one.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use sinkless_core::adversary::{attack, bound_report, AttackConfig, AttackMode, Magnitude};
use sinkless_core::algorithms::{AlgKind, Algorithm};
use sinkless_core::ctree::{build_t2, validate, CheckName, NodeKind};
use sinkless_core::ftree::{f_implicit, f_materialize, ImplicitFTree};
use sinkless_core::label::{clearing_witness, is_clearing, Label};
use sinkless_core::labelings::compute_labelings;
use sinkless_core::marked::{
    build_input_tree, canonical_sequence, check_distance_correct, check_symmetric_views,
    BuildOrder, DistanceMode,
};
use sinkless_core::olocal::INodeId;
use sinkless_core::tower::cmp_power_tower;
use std::collections::{BTreeSet, HashSet};
use std::time::Instant;

fn report(criterion: &str, result: Result<String, String>) {
    match &result {
        Ok(detail) => println!("{criterion}: PASS ({detail})"),
        Err(detail) => println!("{criterion}: FAIL ({detail})"),
    }
    assert!(result.is_ok(), "{criterion}: {}", result.unwrap_err());
}

#[test]
fn criterion_01_t2_validation() {
    let result = (|| {
        let start = Instant::now();
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let rep = validate(&t);
        if !rep.pass() {
            return Err(format!("validation failed:\n{rep}"));
        }
        if t.len() != 54 {
            return Err(format!("node count {}", t.len()));
        }
        let reflect = t.reflect_nodes().len();
        let split = t.split_nodes().len();
        if (reflect, split) != (14, 40) {
            return Err(format!("reflect {reflect}, split {split}"));
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs_f64() >= 1.0 {
            return Err(format!("took {elapsed:?}, budget 1 s"));
        }
        Ok(format!("54 nodes, 14 reflect, 40 split, {elapsed:?}"))
    })();
    report("criterion 01 (t2 validation)", result);
}

#[test]
fn criterion_02_clearing_oracle() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let labels: Vec<Label> = t.reflect_nodes().iter().map(|&v| t.label(v).clone()).collect();
        if labels.iter().map(|l| l.len()).max() != Some(4) {
            return Err("reflect label set should have length 4".into());
        }
        if !is_clearing(&labels, 3).map_err(|e| e.to_string())? {
            return Err("t2 reflect labels must clear".into());
        }
        let bad: Vec<Label> = ["1", "12", "122", "222", "322"]
            .iter()
            .map(|s| Label::parse(s, 3).unwrap())
            .collect();
        let witness = clearing_witness(&bad, 3)
            .map_err(|e| e.to_string())?
            .ok_or("five-label set must not clear")?;
        if witness.to_string() != "132" {
            return Err(format!("witness {witness}, expected 132"));
        }
        Ok("54 strings exhausted; witness 132".into())
    })();
    report("criterion 02 (clearing oracle)", result);
}

#[test]
fn criterion_03_f_solidity_at_scale() {
    let result = (|| {
        let start = Instant::now();
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let f = f_implicit(&t).map_err(|e| e.to_string())?;
        let expected = f.total_nodes();
        let big = f_materialize(&f, None, 1 << 27).map_err(|e| e.to_string())?;
        if BigUint::from(big.len()) != expected {
            return Err(format!("materialized {} nodes, counted {expected}", big.len()));
        }
        // bounds from the two node-count estimates, compared exactly
        use std::cmp::Ordering;
        if cmp_power_tower(&expected, 3, 1, 4) == Ordering::Less {
            return Err("count below the lower estimate".into());
        }
        if cmp_power_tower(&expected, 3, 3, 4) == Ordering::Greater {
            return Err("count above the upper estimate".into());
        }
        let rep = validate(&big);
        if !rep.pass() {
            let fails: Vec<String> = rep
                .failures()
                .iter()
                .map(|c| format!("{:?}: {:?}", c.name, c.witness))
                .collect();
            return Err(fails.join("; "));
        }
        // the clearing check above ran exhaustively at length 14
        if !rep.check(CheckName::ReflectClearing).map(|c| c.pass).unwrap_or(false) {
            return Err("clearing check missing".into());
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs() >= 600 {
            return Err(format!("took {elapsed:?}, budget 10 min"));
        }
        Ok(format!("{expected} nodes validated in {elapsed:?}"))
    })();
    report("criterion 03 (transformed tree solidity at scale)", result);
}

fn layer_offsets(f: &ImplicitFTree) -> Vec<u64> {
    use num_traits::ToPrimitive;
    let mut offsets = Vec::with_capacity(f.layer_count() + 1);
    let mut acc = 0u64;
    for l in &f.layers {
        offsets.push(acc);
        acc += l.size.to_u64().unwrap();
    }
    offsets.push(acc);
    offsets
}

fn address_to_id(f: &ImplicitFTree, offsets: &[u64], layer: usize, digits: &[u8]) -> u32 {
    let mut idx = 0u64;
    for (t, &d) in digits.iter().enumerate() {
        idx += (d as u64 - 1) * 3u64.pow(t as u32);
    }
    (offsets[layer - 1] + idx) as u32
}

#[test]
fn criterion_04_implicit_explicit_agreement() {
    let result = (|| {
        use rand::{Rng, SeedableRng};
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let f = f_implicit(&t).map_err(|e| e.to_string())?;
        let big = f_materialize(&f, None, 1 << 27).map_err(|e| e.to_string())?;
        let offsets = layer_offsets(&f);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
        let mut mismatches = 0usize;
        for _ in 0..10_000 {
            let layer = rng.random_range(1..=f.layer_count());
            let m = f.layers[layer - 1].free_positions.len();
            let digits: Vec<u8> = (0..m).map(|_| rng.random_range(1..=3u8)).collect();
            let node = f.implicit_node(layer, &digits).map_err(|e| e.to_string())?;
            let id = address_to_id(&f, &offsets, layer, &digits);
            if big.label(id) != &node.label {
                mismatches += 1;
                continue;
            }
            let parent_id = node.parent.as_ref().map(|(pl, pd)| address_to_id(&f, &offsets, *pl, pd));
            if big.parent(id) != parent_id {
                mismatches += 1;
                continue;
            }
            let child_ids: Vec<u32> = node
                .children
                .iter()
                .map(|(cl, cd)| address_to_id(&f, &offsets, *cl, cd))
                .collect();
            let mut actual = big.children(id).to_vec();
            let mut expected = child_ids;
            actual.sort_unstable();
            expected.sort_unstable();
            if actual != expected {
                mismatches += 1;
            }
        }
        if mismatches != 0 {
            return Err(format!("{mismatches} mismatching addresses"));
        }
        Ok("10000 addresses, zero mismatches".into())
    })();
    report("criterion 04 (implicit/explicit agreement)", result);
}

#[test]
fn criterion_05_component_oracle() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let labeling = compute_labelings(&t);
        let trace = build_input_tree(&t, BuildOrder::Layers, true).map_err(|e| e.to_string())?;
        if trace.steps.len() != 54 {
            return Err(format!("{} steps", trace.steps.len()));
        }
        // independent re-derivation against the edge labelings at every step
        let mut processed: HashSet<u32> = HashSet::new();
        let mut comps_checked = 0usize;
        for (i, step) in trace.steps.iter().enumerate() {
            processed.insert(step.t_node);
            let g = &trace.snapshots[i + 1];
            let crossing: Vec<u32> = t
                .node_ids()
                .filter(|&c| {
                    !processed.contains(&c)
                        && t.parent(c).map(|p| processed.contains(&p)).unwrap_or(false)
                })
                .collect();
            let comps = g.unmarked_components();
            if comps.len() != crossing.len() {
                return Err(format!(
                    "step {}: {} components vs {} crossing edges",
                    i + 1,
                    comps.len(),
                    crossing.len()
                ));
            }
            let mut used: HashSet<u32> = HashSet::new();
            for comp in &comps {
                let mut two_leaves = BTreeSet::new();
                let mut interior = BTreeSet::new();
                for &u in comp {
                    if g.is_two_leaf(u) {
                        two_leaves.insert(g.label(u).clone());
                    } else {
                        interior.insert(g.label(u).clone());
                    }
                }
                let matched = crossing.iter().copied().find(|&c| {
                    labeling.psi_of(c) == &two_leaves && labeling.pi_of(c) == &interior
                });
                match matched {
                    Some(c) if used.insert(c) => comps_checked += 1,
                    _ => return Err(format!("step {}: unmatched component", i + 1)),
                }
            }
        }
        Ok(format!("{comps_checked} component/edge matches, zero mismatches"))
    })();
    report("criterion 05 (component oracle)", result);
}

#[test]
fn criterion_06_well_definedness() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let a = build_input_tree(&t, BuildOrder::Layers, true).map_err(|e| e.to_string())?;
        let b = build_input_tree(&t, BuildOrder::DepthFirst, true).map_err(|e| e.to_string())?;
        if a.order == b.order {
            return Err("orders must differ".into());
        }
        if a.final_graph().canonical_by_label() != b.final_graph().canonical_by_label() {
            return Err("final graphs differ".into());
        }
        Ok("two orders, label-identical graphs, invariants hold at all 54 steps".into())
    })();
    report("criterion 06 (well-definedness)", result);
}

#[test]
fn criterion_07_neighbor_lemma() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let trace = build_input_tree(&t, BuildOrder::Layers, true).map_err(|e| e.to_string())?;
        let mut pairs = 0usize;
        for g in &trace.snapshots {
            let unmarked: Vec<u32> = g.node_ids().filter(|&v| !g.is_marked(v)).collect();
            for (ai, &a) in unmarked.iter().enumerate() {
                for &b in &unmarked[ai + 1..] {
                    pairs += 1;
                    let actual = g.neighbors(a).iter().any(|&(w, _)| w == b);
                    let predicted =
                        sinkless_core::marked::neighbor_oracle(g, a, b).map_err(|e| e.to_string())?;
                    if actual != predicted {
                        return Err(format!(
                            "{} vs {}: oracle {predicted}, adjacency {actual}",
                            g.label(a),
                            g.label(b)
                        ));
                    }
                }
            }
        }
        Ok(format!("{pairs} pairs, zero mismatches"))
    })();
    report("criterion 07 (neighbor lemma)", result);
}

#[test]
fn criterion_08_distance_correctness() {
    let result = (|| {
        let start = Instant::now();
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let full = check_distance_correct(&t, DistanceMode::Full, 1 << 22)
            .map_err(|e| e.to_string())?;
        if full.minimum != Some(2) {
            return Err(format!("t2 minimum {:?}", full.minimum));
        }
        let f = f_implicit(&t).map_err(|e| e.to_string())?;
        let big = f_materialize(&f, None, 1 << 27).map_err(|e| e.to_string())?;
        let path = check_distance_correct(&big, DistanceMode::PathOnly, 1 << 22)
            .map_err(|e| e.to_string())?;
        let Some(min) = path.minimum else {
            return Err("no distance observed on the transformed tree".into());
        };
        if min < 4 {
            return Err(format!("transformed minimum {min} < 4"));
        }
        let elapsed = start.elapsed();
        if elapsed.as_secs() >= 300 {
            return Err(format!("took {elapsed:?}, budget 5 min"));
        }
        Ok(format!(
            "t2 minimum 2; transformed path-only minimum {min} over {} splits, {elapsed:?}",
            path.splits_checked
        ))
    })();
    report("criterion 08 (distance correctness)", result);
}

#[test]
fn criterion_09_symmetric_views() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let trace = build_input_tree(&t, BuildOrder::Layers, true).map_err(|e| e.to_string())?;
        let seq = canonical_sequence(&t, &trace).map_err(|e| e.to_string())?;
        let comparisons = check_symmetric_views(&trace, &seq, 2).map_err(|e| e.to_string())?;
        // thirteen non-final entries with three incident edge pairs each
        if comparisons != 39 {
            return Err(format!("{comparisons} comparisons, expected 39"));
        }
        Ok("39 edge-pair isomorphisms verified".into())
    })();
    report("criterion 09 (symmetric views)", result);
}

#[test]
fn criterion_10_adversary_vs_deterministic() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let cfg =
            AttackConfig { locality: 1, n: 120, mode: AttackMode::Single, samples: 0, eps: 0.0 };
        let mut wins = 0usize;
        let mut runs = 0usize;
        let mut check = |alg: Algorithm| -> Result<(), String> {
            let start = Instant::now();
            let out = attack(&t, alg, &cfg).map_err(|e| e.to_string())?;
            let elapsed = start.elapsed();
            runs += 1;
            if elapsed.as_secs_f64() >= 1.0 {
                return Err(format!("run {runs} took {elapsed:?}, budget 1 s"));
            }
            if out.survived {
                return Err(format!("run {runs} survived"));
            }
            wins += 1;
            Ok(())
        };
        check(Algorithm::new(AlgKind::FixedPort(1), 120, 1, 0))?;
        for seed in 0..100u64 {
            check(Algorithm::new(AlgKind::PortPref, 120, 1, seed))?;
        }
        Ok(format!("{wins}/{runs} violations"))
    })();
    report("criterion 10 (adversary vs deterministic algorithms)", result);
}

#[test]
fn criterion_11_oracle_ledger() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let cfg =
            AttackConfig { locality: 1, n: 120, mode: AttackMode::Oracle, samples: 0, eps: 0.0 };
        let out = attack(&t, Algorithm::new(AlgKind::UniformSingleOut, 120, 1, 5), &cfg)
            .map_err(|e| e.to_string())?;
        if out.survived {
            return Err("oracle run made no failure claim".into());
        }
        let product = out.ledger_product.clone().ok_or("missing ledger product")?;
        let bound = BigRational::new(BigInt::from(1), BigInt::from(3).pow(14));
        if product < bound {
            return Err(format!("product {product} below 3^-14"));
        }
        if out.ledger_bound_ok != Some(true) {
            return Err("ledger bound flag not set".into());
        }
        Ok(format!("exact product {product} >= 3^-14"))
    })();
    report("criterion 11 (oracle probability ledger)", result);
}

#[test]
fn criterion_12_locality_boundary() {
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let cfg =
            AttackConfig { locality: 2, n: 120, mode: AttackMode::Single, samples: 0, eps: 0.0 };
        let out = attack(&t, Algorithm::new(AlgKind::Cautious2Hop, 120, 2, 0), &cfg)
            .map_err(|e| e.to_string())?;
        if out.strict {
            return Err("locality 2 must not be treated as the guaranteed regime".into());
        }
        if !out.survived {
            return Err(format!("false positive: {:?}", out.violation));
        }
        Ok(format!(
            "2-hop strategy survived all {} queries ({} rollbacks, no claims)",
            out.steps, out.rollbacks
        ))
    })();
    report("criterion 12 (locality boundary)", result);
}

#[test]
fn criterion_13_bound_reporter() {
    let result = (|| {
        // monotone over an increasing ladder of exact inputs
        let mut last = BigUint::from(0u32);
        for exp in [1u32, 80, 81, 82, 162] {
            let n = Magnitude::Exact(BigUint::from(3u32).pow(exp) + BigUint::from(1u32));
            let r = bound_report(&n, 3);
            if r.radius < last {
                return Err(format!("radius dropped at 3^{exp}+1"));
            }
            last = r.radius;
        }
        // symbolic thresholds hit the exact radius without materializing
        let start = Instant::now();
        for i in 2..=6u32 {
            let r = bound_report(&Magnitude::TowerPlusOne { index: i }, 4);
            if r.index != Some(i) {
                return Err(format!("tower:{i} gave index {:?}", r.index));
            }
            if r.radius != BigUint::from(1u32) << (i - 1) {
                return Err(format!("tower:{i} gave radius {}", r.radius));
            }
        }
        let elapsed = start.elapsed();
        if elapsed.as_micros() >= 5000 {
            return Err(format!("five symbolic reports took {elapsed:?}, budget 1 ms each"));
        }
        Ok(format!("monotone; symbolic radii 2..32 in {elapsed:?}"))
    })();
    report("criterion 13 (bound reporter)", result);
}

#[test]
fn primary_interfaces_for_later_stages() {
    // the file formats later components consume: tree JSON round-trip,
    // instance JSON round-trip, and the canonical sequence with labels
    let result = (|| {
        let t = build_t2(3).map_err(|e| e.to_string())?;
        let json = t.to_json();
        let back = sinkless_core::ctree::ConstructionTree::from_json(&json)?;
        if back.len() != t.len() {
            return Err("tree JSON round trip".into());
        }
        let trace = build_input_tree(&t, BuildOrder::Layers, false).map_err(|e| e.to_string())?;
        let inst =
            sinkless_core::adversary::pad_graph(trace.final_graph(), 120, Some(1))
                .map_err(|e| e.to_string())?;
        let round = sinkless_core::olocal::Instance::from_json(&inst.to_json())?;
        if round.n() != inst.n() {
            return Err("instance JSON round trip".into());
        }
        for v in 0..inst.n() as INodeId {
            if round.neighbors(v) != inst.neighbors(v) {
                return Err(format!("instance adjacency differs at {v}"));
            }
        }
        Ok("tree and instance JSON round-trip".into())
    })();
    report("interfaces (serialization round-trips)", result);
}
