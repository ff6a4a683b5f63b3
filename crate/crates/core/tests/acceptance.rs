//! Acceptance gate: every shipped guarantee checked in one place, one
//! verdict line per criterion. The test fails if any criterion fails, but
//! always runs the full list so a regression report is complete.

use std::collections::{BTreeSet, HashMap};
use std::panic::catch_unwind;
use std::time::{Duration, Instant};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use parmc::acir::{
    codec, eval_exact, extract, sz_canonicalize, DagStore, Evaluator, Interval, NodeId, NodeKind,
};
use parmc::corpus;
use parmc::elim::{self, Heuristic};
use parmc::modelio;
use parmc::oracle;
use parmc::pmc::{Pmc, RewardMap};
use parmc::Rational;

#[test]
fn acceptance() {
    let mut results: Vec<(String, bool)> = Vec::new();
    let mut check = |n: u32, what: &str, f: fn()| {
        let t = Instant::now();
        let entry = match catch_unwind(f) {
            Ok(()) => (
                format!("criterion {n} ({what}): PASS ({:.2}s)", t.elapsed().as_secs_f64()),
                true,
            ),
            Err(payload) => {
                let msg = payload
                    .downcast_ref::<String>()
                    .map(String::as_str)
                    .or_else(|| payload.downcast_ref::<&str>().copied())
                    .unwrap_or("panic");
                (format!("criterion {n} ({what}): FAIL ({msg})"), false)
            }
        };
        results.push(entry);
    };

    check(1, "dice reach circuit matches the hand-entered closed form", criterion_1);
    check(2, "dice outcome circuits sum to one", criterion_2);
    check(3, "reach circuits match the dense solver on random chains", criterion_3);
    check(4, "accumulated rewards match the dense solver", criterion_4);
    check(5, "long-run averages match the stationary reference", criterion_5);
    check(6, "elimination order does not change results", criterion_6);
    check(7, "interval grids enclose exact values tightly", criterion_7);
    check(8, "float evaluation scales linearly with circuit size", criterion_8);
    check(9, "circuit files round-trip bit for bit", criterion_9);
    check(10, "randomized merges are exact on fresh points", criterion_10);

    for (line, _) in &results {
        println!("{line}");
    }
    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, pass)| !pass)
        .map(|(line, _)| line.as_str())
        .collect();
    assert!(failed.is_empty(), "failed criteria:\n{}", failed.join("\n"));
}

fn q(s: &str) -> Rational {
    s.parse().unwrap()
}

fn random_unit_rational(rng: &mut ChaCha8Rng) -> Rational {
    let den = rng.gen_range(2u32..=29);
    let num = rng.gen_range(1..den);
    format!("{num}/{den}").parse().unwrap()
}

fn random_valuations(seed: u64, count: usize, arity: usize) -> Vec<Vec<Rational>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| (0..arity).map(|_| random_unit_rational(&mut rng)).collect())
        .collect()
}

fn heuristics(seed: u64) -> [Heuristic; 6] {
    [
        Heuristic::NumNew,
        Heuristic::MinProd,
        Heuristic::TargetBfs,
        Heuristic::Random(seed),
        Heuristic::Bfs,
        Heuristic::ReverseBfs,
    ]
}

/// Parses a model and eliminates for reach on the given label, returning
/// the surviving store and the result root.
fn reach_circuit(text: &str, label: &str, heuristic: Heuristic) -> (DagStore, NodeId) {
    let parsed = modelio::parse_model(text).unwrap();
    let mut pmc = parsed.pmc;
    let targets = pmc.label_states(label).unwrap().clone();
    let root = elim::reach_probability(&mut pmc, &targets, heuristic).unwrap();
    (pmc.into_store(), root)
}

/// Copies the sub-circuit under `root` into `dst`, assuming `dst` already
/// declares the source parameters at the same indices.
fn port(src: &DagStore, root: NodeId, dst: &mut DagStore) -> NodeId {
    let ev = Evaluator::new(src, &[root]);
    let mut map: HashMap<NodeId, NodeId> = HashMap::new();
    for &id in ev.order() {
        let new = match src.kind(id) {
            NodeKind::Const(c) => dst.mk_const(src.constant(c).clone()).unwrap(),
            NodeKind::Param(p) => dst.mk_param(&src.params()[p as usize]).unwrap(),
            NodeKind::Add(l, r) => dst.mk_add(map[&l], map[&r]).unwrap(),
            NodeKind::Mul(l, r) => dst.mk_mul(map[&l], map[&r]).unwrap(),
            NodeKind::Neg(c) => dst.mk_neg(map[&c]).unwrap(),
            NodeKind::Inv(c) => dst.mk_inv(map[&c]).unwrap(),
        };
        map.insert(id, new);
    }
    map[&root]
}

/// Random reach instance: trimmed chain plus targets remapped to the
/// surviving state indices.
fn reach_instance(seed: u64) -> (Pmc, BTreeSet<u32>) {
    let mut pmc = corpus::random_pmc(seed, 12);
    let raw = corpus::random_targets(seed, pmc.state_count());
    let remap = pmc.trim_unreachable();
    let targets = raw.iter().filter_map(|&t| remap.apply(t)).collect();
    (pmc, targets)
}

fn acc_instance(seed: u64) -> (Pmc, BTreeSet<u32>, RewardMap) {
    let (mut pmc, raw_targets, rewards) = corpus::random_acc_pmc(seed, 12);
    let remap = pmc.trim_unreachable();
    let targets = raw_targets.iter().filter_map(|&t| remap.apply(t)).collect();
    (pmc, targets, rewards.remap(&remap))
}

fn lra_instance(seed: u64) -> (Pmc, RewardMap, RewardMap) {
    let (mut pmc, upper, lower) = corpus::random_lra_pmc(seed, 12);
    let remap = pmc.trim_unreachable();
    (pmc, upper.remap(&remap), lower.remap(&remap))
}

fn criterion_1() {
    let t = Instant::now();
    let (mut store, root) = reach_circuit(corpus::DICE_MODEL, "six", Heuristic::TargetBfs);

    // (-x^2 + 2x - 1) / (x - 2), entered term by term.
    let x = store.mk_param("x").unwrap();
    let one = store.mk_const(q("1")).unwrap();
    let two = store.mk_const(q("2")).unwrap();
    let xx = store.mk_mul(x, x).unwrap();
    let two_x = store.mk_mul(two, x).unwrap();
    let numer_head = store.mk_sub(two_x, xx).unwrap();
    let numer = store.mk_sub(numer_head, one).unwrap();
    let denom = store.mk_sub(x, two).unwrap();
    let closed = store.mk_div(numer, denom).unwrap();

    let map = sz_canonicalize(&mut store, &[root, closed], 2, 11).unwrap();
    assert_eq!(map[&root], map[&closed], "signatures disagree with the closed form");

    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ce_0001);
    for _ in 0..9 {
        let v = vec![random_unit_rational(&mut rng)];
        let got = eval_exact(&store, root, &v).unwrap();
        let want = eval_exact(&store, closed, &v).unwrap();
        assert_eq!(got, want, "disagrees with the closed form at x = {}", v[0]);
    }
    assert_eq!(eval_exact(&store, root, &[q("1/2")]).unwrap(), q("1/6"));
    assert!(t.elapsed() < Duration::from_secs(1), "over budget: {:?}", t.elapsed());
}

fn criterion_2() {
    let t = Instant::now();
    let mut common = DagStore::new();
    common.register_param("x");
    let mut acc: Option<NodeId> = None;
    for label in ["one", "two", "three", "four", "five", "six"] {
        let (store, root) = reach_circuit(corpus::DICE_MODEL, label, Heuristic::TargetBfs);
        let ported = port(&store, root, &mut common);
        acc = Some(match acc {
            None => ported,
            Some(sum) => common.mk_add(sum, ported).unwrap(),
        });
    }
    let sum = acc.unwrap();

    let one = q("1");
    let mut rng = ChaCha8Rng::seed_from_u64(0xd1ce_0002);
    for _ in 0..9 {
        let v = vec![random_unit_rational(&mut rng)];
        assert_eq!(eval_exact(&common, sum, &v).unwrap(), one, "sum is not one at x = {}", v[0]);
    }
    let one_node = common.mk_const(q("1")).unwrap();
    let map = sz_canonicalize(&mut common, &[sum, one_node], 2, 12).unwrap();
    assert_eq!(map[&sum], map[&one_node], "sum signature is not the constant one");
    assert!(t.elapsed() < Duration::from_secs(1), "over budget: {:?}", t.elapsed());
}

fn criterion_3() {
    let t = Instant::now();
    for seed in 0..200u64 {
        let (reference, targets) = reach_instance(seed);
        let valuations = random_valuations(seed ^ 0xaaaa_5555, 5, 2);
        let expected: Vec<Rational> = valuations
            .iter()
            .map(|v| oracle::solve_reach(&reference, &targets, v).unwrap())
            .collect();
        for heuristic in heuristics(seed) {
            let (mut pmc, targets) = reach_instance(seed);
            let root = elim::reach_probability(&mut pmc, &targets, heuristic).unwrap();
            for (v, want) in valuations.iter().zip(&expected) {
                let got = eval_exact(pmc.store(), root, v).unwrap();
                assert_eq!(&got, want, "seed {seed}, {heuristic:?}, valuation {v:?}");
            }
        }
    }
    assert!(t.elapsed() < Duration::from_secs(60), "over budget: {:?}", t.elapsed());
}

fn criterion_4() {
    let t = Instant::now();
    let witness = [q("1/2"), q("1/2")];
    for seed in 0..100u64 {
        let heuristic = heuristics(seed)[(seed % 6) as usize];
        let (reference, ref_targets, ref_rewards) = acc_instance(seed);
        let (mut pmc, targets, rewards) = acc_instance(seed);
        let root =
            elim::accumulated_reward(&mut pmc, &rewards, &targets, heuristic, &witness).unwrap();
        for v in corpus::sample_valuations() {
            let want = oracle::solve_acc(&reference, &ref_rewards, &ref_targets, &v).unwrap();
            let got = eval_exact(pmc.store(), root, &v).unwrap();
            assert_eq!(got, want, "seed {seed}, {heuristic:?}, valuation {v:?}");
        }
    }
    assert!(t.elapsed() < Duration::from_secs(60), "over budget: {:?}", t.elapsed());
}

fn criterion_5() {
    let t = Instant::now();
    let witness = [q("1/2"), q("1/2")];
    for seed in 0..100u64 {
        let heuristic = heuristics(seed)[(seed % 6) as usize];
        let (reference, ref_upper, ref_lower) = lra_instance(seed);
        let (mut pmc, upper, lower) = lra_instance(seed);
        let root = elim::lra(&mut pmc, &upper, &lower, heuristic, &witness).unwrap();
        for v in corpus::sample_valuations() {
            let want = oracle::lra_reference(&reference, &ref_upper, &ref_lower, &v).unwrap();
            let got = eval_exact(pmc.store(), root, &v).unwrap();
            assert_eq!(got, want, "seed {seed}, {heuristic:?}, valuation {v:?}");
        }
    }
    assert!(t.elapsed() < Duration::from_secs(60), "over budget: {:?}", t.elapsed());
}

fn criterion_6() {
    // Reach on the bundled models under every heuristic.
    let single_param: Vec<Vec<Rational>> =
        ["1/2", "1/3", "2/7", "9/10", "3/5"].iter().map(|s| vec![q(s)]).collect();
    let two_param = corpus::sample_valuations();
    for (text, label, valuations) in [
        (corpus::DICE_MODEL.to_string(), "six", &single_param),
        (corpus::brp_model(16, 2), "ok", &two_param),
    ] {
        let mut circuits = Vec::new();
        for heuristic in heuristics(99) {
            circuits.push(reach_circuit(&text, label, heuristic));
        }
        for v in valuations {
            let baseline = eval_exact(&circuits[0].0, circuits[0].1, v).unwrap();
            for (store, root) in &circuits[1..] {
                assert_eq!(eval_exact(store, *root, v).unwrap(), baseline, "label {label} at {v:?}");
            }
        }
    }

    // The long-run average on the bundled two-state rotation.
    let witness = [q("1/2"), q("1/2")];
    let mut circuits = Vec::new();
    for heuristic in heuristics(99) {
        let parsed = modelio::parse_model(corpus::TWO_CYCLE_MODEL).unwrap();
        let mut pmc = parsed.pmc;
        let root =
            elim::lra(&mut pmc, &parsed.rewards["up"], &parsed.rewards["low"], heuristic, &witness)
                .unwrap();
        circuits.push((pmc.into_store(), root));
    }
    for v in corpus::sample_valuations() {
        let baseline = eval_exact(&circuits[0].0, circuits[0].1, &v).unwrap();
        for (store, root) in &circuits[1..] {
            assert_eq!(eval_exact(store, *root, &v).unwrap(), baseline, "two_cycle at {v:?}");
        }
    }

    // Random chains across all three properties.
    for seed in 0..40u64 {
        let valuations = random_valuations(seed ^ 0x6666_1111, 5, 2);
        let mut circuits = Vec::new();
        for heuristic in heuristics(seed) {
            let (mut pmc, targets) = reach_instance(seed);
            let root = elim::reach_probability(&mut pmc, &targets, heuristic).unwrap();
            circuits.push((pmc.into_store(), root));
        }
        for v in &valuations {
            let baseline = eval_exact(&circuits[0].0, circuits[0].1, v).unwrap();
            for (store, root) in &circuits[1..] {
                assert_eq!(eval_exact(store, *root, v).unwrap(), baseline, "reach seed {seed}");
            }
        }
    }
    for seed in 0..15u64 {
        let mut circuits = Vec::new();
        for heuristic in heuristics(seed) {
            let (mut pmc, targets, rewards) = acc_instance(seed);
            let root =
                elim::accumulated_reward(&mut pmc, &rewards, &targets, heuristic, &witness)
                    .unwrap();
            circuits.push((pmc.into_store(), root));
        }
        for v in corpus::sample_valuations() {
            let baseline = eval_exact(&circuits[0].0, circuits[0].1, &v).unwrap();
            for (store, root) in &circuits[1..] {
                assert_eq!(eval_exact(store, *root, &v).unwrap(), baseline, "acc seed {seed}");
            }
        }
    }
    for seed in 0..15u64 {
        let mut circuits = Vec::new();
        for heuristic in heuristics(seed) {
            let (mut pmc, upper, lower) = lra_instance(seed);
            let root = elim::lra(&mut pmc, &upper, &lower, heuristic, &witness).unwrap();
            circuits.push((pmc.into_store(), root));
        }
        for v in corpus::sample_valuations() {
            let baseline = eval_exact(&circuits[0].0, circuits[0].1, &v).unwrap();
            for (store, root) in &circuits[1..] {
                assert_eq!(eval_exact(store, *root, &v).unwrap(), baseline, "lra seed {seed}");
            }
        }
    }
}

fn interval_contains(value: Interval, exact: &Rational) -> bool {
    let lower_ok = match Rational::from_f64(value.lo()) {
        Some(bound) => &bound <= exact,
        None => value.lo() == f64::NEG_INFINITY,
    };
    let upper_ok = match Rational::from_f64(value.hi()) {
        Some(bound) => &bound >= exact,
        None => value.hi() == f64::INFINITY,
    };
    lower_ok && upper_ok
}

/// Success probability of the bounded-retransmission model with 256 chunks
/// and 5 tries per chunk: each try lands with probability pk * pl, so one
/// chunk survives with 1 - (1 - pk pl)^5 and the file needs all 256.
fn brp_exact(pk: &Rational, pl: &Rational) -> Rational {
    let one = q("1");
    let loss = &one - &(pk * pl);
    let mut missed = loss.clone();
    for _ in 0..4 {
        missed = &missed * &loss;
    }
    let mut chunk = &one - &missed;
    for _ in 0..8 {
        chunk = &chunk * &chunk;
    }
    chunk
}

fn criterion_7() {
    let t = Instant::now();
    let mut max_diameter = 0.0f64;

    let (store, root) = reach_circuit(corpus::DICE_MODEL, "six", Heuristic::TargetBfs);
    let ev = Evaluator::new(&store, &[root]);
    for i in 1..=99u32 {
        let x = q(&format!("{i}/100"));
        let value = ev.eval::<Interval>(&store, &[Interval::enclosing(&x)]).unwrap()[0];
        let exact = eval_exact(&store, root, &[x.clone()]).unwrap();
        assert!(interval_contains(value, &exact), "dice misses exact value at x = {x}");
        max_diameter = max_diameter.max(value.diameter());
    }

    let (store, root) = reach_circuit(&corpus::brp_model(256, 4), "ok", Heuristic::TargetBfs);
    let ev = Evaluator::new(&store, &[root]);
    for i in 1..=99u32 {
        let pk = q(&format!("{i}/100"));
        let pk_interval = Interval::enclosing(&pk);
        for j in 1..=99u32 {
            let pl = q(&format!("{j}/100"));
            let value = ev
                .eval::<Interval>(&store, &[pk_interval, Interval::enclosing(&pl)])
                .unwrap()[0];
            let exact = brp_exact(&pk, &pl);
            assert!(
                interval_contains(value, &exact),
                "brp misses exact value at pk = {pk}, pl = {pl}"
            );
            max_diameter = max_diameter.max(value.diameter());
        }
    }

    assert!(max_diameter <= 1e-9, "max interval diameter {max_diameter:e}");
    assert!(t.elapsed() < Duration::from_secs(120), "over budget: {:?}", t.elapsed());
}

/// Horner-style chain with pairwise distinct constants, so local rewrites
/// cannot shrink it: roughly `target` nodes, all reachable from the root.
fn horner_chain(target: usize) -> (DagStore, NodeId) {
    let mut store = DagStore::new();
    store.register_param("x");
    let x = store.mk_param("x").unwrap();
    let mut head = store.mk_const(q("2")).unwrap();
    let mut next = 3i64;
    while store.node_count() < target {
        let scaled = store.mk_mul(head, x).unwrap();
        let offset = store.mk_const(Rational::from_int(next)).unwrap();
        head = store.mk_add(scaled, offset).unwrap();
        next += 1;
    }
    (store, head)
}

fn ols(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    (sxy / sxx, (sxy * sxy) / (sxx * syy))
}

fn criterion_8() {
    let mut sizes = Vec::new();
    let mut per_point = Vec::new();
    for target in [1_000usize, 2_200, 4_600, 10_000, 22_000, 46_000, 100_000] {
        let (store, root) = horner_chain(target);
        let ev = Evaluator::new(&store, &[root]);
        let n = ev.node_count();
        let reps = (4_000_000 / n).max(2);
        let mut best = f64::INFINITY;
        for _ in 0..3 {
            let t = Instant::now();
            for _ in 0..reps {
                let v = ev.eval::<f64>(&store, &[0.5]).unwrap();
                std::hint::black_box(v);
            }
            best = best.min(t.elapsed().as_secs_f64() / reps as f64);
        }
        sizes.push((n as f64).ln());
        per_point.push(best.ln());
    }
    let (slope, r2) = ols(&sizes, &per_point);
    assert!(
        (slope - 1.0).abs() <= 0.15,
        "log-log slope {slope:.3} outside 1 +- 0.15 (r2 {r2:.4})"
    );
    assert!(r2 >= 0.95, "log-log fit r2 {r2:.4} below 0.95 (slope {slope:.3})");

    let (store, root) = reach_circuit(&corpus::brp_model(256, 4), "ok", Heuristic::TargetBfs);
    let ev = Evaluator::new(&store, &[root]);
    let t = Instant::now();
    for i in 0..100 {
        let pk = 0.005 + 0.01 * i as f64;
        for j in 0..100 {
            let pl = 0.005 + 0.01 * j as f64;
            let v = ev.eval::<f64>(&store, &[pk, pl]).unwrap();
            std::hint::black_box(v);
        }
    }
    assert!(t.elapsed() < Duration::from_secs(10), "grid over budget: {:?}", t.elapsed());
}

/// Every circuit the shipped corpus gives rise to: the transition and reward
/// stores of the bundled and generated models, and the elimination results
/// over them.
fn corpus_circuits() -> Vec<(String, DagStore, Vec<NodeId>)> {
    let mut out = Vec::new();

    let mut push_model = |name: &str, text: &str| {
        let parsed = modelio::parse_model(text).unwrap();
        let mut roots = BTreeSet::new();
        for s in 0..parsed.pmc.state_count() as u32 {
            roots.extend(parsed.pmc.row(s).values().copied());
        }
        for map in parsed.rewards.values() {
            roots.extend(map.nodes().iter().copied());
        }
        let roots: Vec<NodeId> = roots.into_iter().collect();
        let (store, roots) = extract(parsed.pmc.store(), &roots);
        out.push((format!("{name} model"), store, roots));
    };
    push_model("dice", corpus::DICE_MODEL);
    push_model("two_cycle", corpus::TWO_CYCLE_MODEL);
    push_model("brp 16 2", &corpus::brp_model(16, 2));
    push_model("brp 256 4", &corpus::brp_model(256, 4));

    let mut push_result = |name: String, store: &DagStore, root: NodeId| {
        let (sub, roots) = extract(store, &[root]);
        out.push((name, sub, roots));
    };
    let (store, root) = reach_circuit(corpus::DICE_MODEL, "six", Heuristic::TargetBfs);
    push_result("dice reach".into(), &store, root);
    let (store, root) = reach_circuit(&corpus::brp_model(16, 2), "ok", Heuristic::TargetBfs);
    push_result("brp 16 2 reach".into(), &store, root);

    let parsed = modelio::parse_model(corpus::TWO_CYCLE_MODEL).unwrap();
    let mut pmc = parsed.pmc;
    let witness = [q("1/2"), q("1/2")];
    let root = elim::lra(
        &mut pmc,
        &parsed.rewards["up"],
        &parsed.rewards["low"],
        Heuristic::TargetBfs,
        &witness,
    )
    .unwrap();
    push_result("two_cycle lra".into(), &pmc.into_store(), root);

    for seed in 0..30u64 {
        let (mut pmc, targets) = reach_instance(seed);
        let root = elim::reach_probability(&mut pmc, &targets, Heuristic::TargetBfs).unwrap();
        push_result(format!("random reach {seed}"), &pmc.into_store(), root);
    }
    for seed in 0..10u64 {
        let (mut pmc, targets, rewards) = acc_instance(seed);
        let root =
            elim::accumulated_reward(&mut pmc, &rewards, &targets, Heuristic::TargetBfs, &witness)
                .unwrap();
        push_result(format!("random acc {seed}"), &pmc.into_store(), root);
    }
    for seed in 0..10u64 {
        let (mut pmc, upper, lower) = lra_instance(seed);
        let root = elim::lra(&mut pmc, &upper, &lower, Heuristic::TargetBfs, &witness).unwrap();
        push_result(format!("random lra {seed}"), &pmc.into_store(), root);
    }
    out
}

fn criterion_9() {
    for (name, store, roots) in corpus_circuits() {
        let bytes = codec::encode(&store, &roots);
        let (decoded, decoded_roots) =
            codec::decode(&bytes).unwrap_or_else(|e| panic!("{name}: decode failed: {e}"));
        assert_eq!(decoded_roots, roots, "{name}: roots changed");
        assert_eq!(decoded.words(), store.words(), "{name}: words changed");
        assert_eq!(decoded.params(), store.params(), "{name}: parameters changed");
        assert_eq!(codec::encode(&decoded, &decoded_roots), bytes, "{name}: bytes changed");
    }
}

fn criterion_10() {
    for (name, mut store, roots) in corpus_circuits() {
        let map = sz_canonicalize(&mut store, &roots, 2, 0x5eed_0010).unwrap();
        let merged: Vec<(NodeId, NodeId)> =
            map.iter().map(|(&a, &b)| (a, b)).filter(|(a, b)| a != b).collect();
        if merged.is_empty() {
            continue;
        }
        let mut ids: Vec<NodeId> = merged.iter().flat_map(|&(a, b)| [a, b]).collect();
        ids.sort_unstable();
        ids.dedup();
        let slot: HashMap<NodeId, usize> =
            ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
        let ev = Evaluator::new(&store, &ids);
        let arity = store.params().len();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0011);
        let mut checked = 0;
        let mut redraws = 0;
        while checked < 5 {
            let v: Vec<Rational> = (0..arity).map(|_| random_unit_rational(&mut rng)).collect();
            let values = match ev.eval::<Rational>(&store, &v) {
                Ok(values) => values,
                Err(_) => {
                    redraws += 1;
                    assert!(redraws <= 64, "{name}: too many poles while sampling");
                    continue;
                }
            };
            for &(a, b) in &merged {
                assert_eq!(
                    values[slot[&a]], values[slot[&b]],
                    "{name}: merged {a:?} and {b:?} differ at {v:?}"
                );
            }
            checked += 1;
        }
    }
}
