//! End-to-end acceptance suite. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any fails.

use std::collections::BTreeSet;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use num_traits::{One, Zero};

use kdalloc::algorithms::reduction::split_copies_reduction;
use kdalloc::algorithms::{det_ratio, run, run_random};
use kdalloc::duals::{audit_ratio, check_dual_feasibility, PotentialTracker};
use kdalloc::generators::{
    default_eps, gen_adwords_ub, gen_greedy_tight, gen_high_degree_ub, gen_outlier_composite,
    gen_random_kd, gen_star_1mr, BidModel,
};
use kdalloc::harness::bounds::bounds_table;
use kdalloc::harness::certify::{certify, Level};
use kdalloc::harness::experiment::{run_experiment, ExperimentSpec, InstanceSource};
use kdalloc::instance::{compute_r_max, validate_kd, Edge};
use kdalloc::numeral::scaling_constant;
use kdalloc::oracle::{hall_check, max_matching, verify_witness};
use kdalloc::par::{self, Execution};
use kdalloc::rational::{self, frac, int, Q};
use kdalloc::{
    run_equal_bids, run_general_bids, run_greedy, run_high_degree, Algo, AlgoError, Instance,
    InstanceBuilder, InstanceMeta, Params, Run, RunOptions, TieBreak,
};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn unmatched(run: &Run, n: usize) -> usize {
    n - run.allocation.matched_advertisers()
}

/// Seeded random (k,d) instances; seeds whose draw is infeasible are skipped.
fn random_instances(k: u32, d: u32, n_l: usize, n_r: usize, model: &BidModel, want: usize, salt: u64) -> Vec<Instance> {
    let mut out = Vec::with_capacity(want);
    let mut seed = salt;
    while out.len() < want {
        if let Ok(inst) = gen_random_kd(k, d, n_l, n_r, seed, model) {
            out.push(inst);
        }
        seed += 1;
        assert!(seed < salt + 20 * want as u64, "generator keeps failing for ({k},{d})");
    }
    out
}

fn c1_greedy_tightness() -> Outcome {
    let mut seen = Vec::new();
    for (k, d) in [(1u32, 2u32), (3, 3), (7, 4)] {
        let g = gen_greedy_tight(k, d).map_err(|e| e.to_string())?;
        let opt = max_matching(&g.instance);
        let verified = verify_witness(&g.instance, opt.witness.as_deref().unwrap_or_default()).map_err(|e| e.to_string())?;
        let expect_opt = int((k + d - 1) as i64);
        ensure(verified == expect_opt, || format!("({k},{d}) OPT {verified}"))?;
        let run = run_greedy(&g.instance, Params::new(k, d), TieBreak::script(g.script.unwrap()))
            .map_err(|e| e.to_string())?;
        let ratio = &run.allocation.revenue / &verified;
        ensure(ratio == frac(k as i64, (k + d - 1) as i64), || {
            format!("({k},{d}) ratio {ratio}")
        })?;
        seen.push(format!("({k},{d})={ratio}"));
    }
    Ok(seen.join(" "))
}

fn c2_greedy_lower_bound() -> Outcome {
    let mut worst: Option<Q> = None;
    for (k, d) in [(2u32, 2u32), (4, 2), (6, 3)] {
        let n_l = 8;
        let n_r = (n_l * k as usize).div_ceil(d as usize) + 2;
        let bound = frac(k as i64, (k + d - 1) as i64);
        for inst in random_instances(k, d, n_l, n_r, &BidModel::Unweighted, 200, 1000 * k as u64) {
            let run = run_greedy(&inst, Params::new(k, d), TieBreak::LowestIndex).map_err(|e| e.to_string())?;
            let opt = max_matching(&inst).value;
            let ratio = &run.allocation.revenue / &opt;
            ensure(ratio >= bound, || format!("({k},{d}) ratio {ratio} < {bound}"))?;
            let slack = ratio - &bound;
            if worst.as_ref().is_none_or(|w| slack < *w) {
                worst = Some(slack);
            }
        }
    }
    Ok(format!("600 instances, least slack {}", worst.unwrap()))
}

fn c3_high_degree_tightness() -> Outcome {
    let g = gen_high_degree_ub(3, 2).map_err(|e| e.to_string())?;
    let inst = &g.instance;
    let n = inst.num_advertisers();
    ensure(n == 16, || format!("{n} advertisers"))?;
    let hall = hall_check(inst, 20).map_err(|e| e.to_string())?;
    ensure(hall.passed, || format!("Hall fails on {:?}", hall.violating))?;
    ensure(max_matching(inst).value == int(16), || "matching below 16".into())?;
    let p = Params::new(3, 2);
    let suite = [
        ("greedy/lowest", run_greedy(inst, p, TieBreak::LowestIndex)),
        ("greedy/degree", run_greedy(inst, p, TieBreak::HighestDegreeThenLowestIndex)),
        ("high-degree", run_high_degree(inst, p)),
        ("equal-bids/lowest", run_equal_bids(inst, p, TieBreak::LowestIndex)),
        ("equal-bids/degree", run_equal_bids(inst, p, TieBreak::HighestDegreeThenLowestIndex)),
        ("general-bids", run_general_bids(inst, p, TieBreak::LowestIndex)),
    ];
    for (name, r) in suite {
        let r = r.map_err(|e| format!("{name}: {e}"))?;
        let u = unmatched(&r, n);
        ensure(u == 2, || format!("{name} leaves {u} unmatched"))?;
    }
    let hd = run_high_degree(inst, p).map_err(|e| e.to_string())?;
    let ratio = hd.allocation.revenue / int(16);
    ensure(ratio == frac(7, 8), || format!("high-degree ratio {ratio}"))?;
    Ok("6 deterministic runs leave 2/16; ratio 7/8; Hall holds".into())
}

/// The high-degree runs used by criteria 4 and 5.
fn high_degree_corpus() -> Vec<(Instance, Params)> {
    let mut out = vec![(gen_high_degree_ub(3, 2).unwrap().instance, Params::new(3, 2))];
    for (k, d) in [(2u32, 2u32), (3, 2), (3, 3), (5, 3), (4, 4), (7, 4)] {
        for n_l in [8usize, 16] {
            let n_r = (n_l * k as usize).div_ceil(d as usize) + 3;
            for inst in random_instances(k, d, n_l, n_r, &BidModel::Unweighted, 25, 7 * n_l as u64) {
                out.push((inst, Params::new(k, d)));
            }
        }
    }
    out
}

fn c4_high_degree_lower_bound() -> Outcome {
    let corpus = high_degree_corpus();
    for (inst, p) in &corpus {
        let run = run_high_degree(inst, *p).map_err(|e| e.to_string())?;
        let n = inst.num_advertisers();
        let need = (det_ratio(p.k, p.d) * int(n as i64)).ceil();
        let got = int(run.allocation.matched_advertisers() as i64);
        ensure(got >= need, || format!("({},{}) n={n}: matched {got} < {need}", p.k, p.d))?;
    }
    Ok(format!("{} runs", corpus.len()))
}

/// φ recomputed from scratch at every arrival.
fn phi_from_scratch(q: &Q, degree: &[u32], matched: &[bool]) -> Q {
    degree
        .iter()
        .zip(matched)
        .filter(|(_, m)| !**m)
        .fold(Q::zero(), |acc, (deg, _)| acc + rational::pow(q, *deg))
}

fn c5_potential() -> Outcome {
    let corpus = high_degree_corpus();
    let mut steps = 0usize;
    for (inst, p) in &corpus {
        let run = run_high_degree(inst, *p).map_err(|e| e.to_string())?;
        let n = inst.num_advertisers();
        let q = frac(p.d as i64, p.d as i64 - 1);
        let mut degree = vec![0u32; n];
        let mut matched = vec![false; n];
        let mut tracker = PotentialTracker::new(n, p.d);
        let mut phi = phi_from_scratch(&q, &degree, &matched);
        for (slot, rec) in inst.slots().iter().zip(&run.trace.arrivals) {
            let neighbors: Vec<usize> = slot.edges.iter().map(|e| e.adv).collect();
            for &i in &neighbors {
                degree[i] += 1;
            }
            if let Some(m) = rec.decision {
                matched[m] = true;
            }
            let next = phi_from_scratch(&q, &degree, &matched);
            let delta = &next - &phi;
            ensure(delta <= Q::zero(), || format!("arrival {}: Δφ = {delta}", rec.index))?;
            let tracked = tracker.potential_step(&neighbors, rec.decision);
            ensure(tracked == delta, || format!("arrival {}: tracker Δφ {tracked} vs {delta}", rec.index))?;
            phi = next;
            steps += 1;
        }
    }
    Ok(format!("{steps} arrivals over {} runs", corpus.len()))
}

fn dual_checks(inst: &Instance, run: &Run, bound: &Q, what: &str) -> Result<(), String> {
    let duals = run.duals.as_ref().ok_or_else(|| format!("{what}: no duals"))?;
    let kd = validate_kd(inst, run.trace.header.k, run.trace.header.d);
    let bad = check_dual_feasibility(inst, duals, &kd.outliers);
    ensure(bad.is_empty(), || format!("{what}: {} infeasible edges, first {:?}", bad.len(), bad[0]))?;
    let audit = audit_ratio(&run.trace, bound);
    ensure(audit.passed, || format!("{what}: audit fails at {:?}", audit.first_offending))
}

fn c6_dual_certification() -> Outcome {
    let mut count = 0;
    for (k, d) in [(2u32, 2u32), (3, 2), (3, 3), (4, 3)] {
        let p = Params::new(k, d);
        let one_c = Q::one() + scaling_constant(k, d).unwrap();
        let greedy_b = frac((k + d - 1) as i64, k as i64);
        let n_r = 6 * k as usize;
        for inst in random_instances(k, d, 6, n_r, &BidModel::VertexWeighted, 20, 11) {
            let hd = run_high_degree(&inst, p).map_err(|e| e.to_string())?;
            dual_checks(&inst, &hd, &one_c, "high-degree")?;
            let g = run_greedy(&inst, p, TieBreak::LowestIndex).map_err(|e| e.to_string())?;
            dual_checks(&inst, &g, &greedy_b, "greedy")?;
            count += 2;
        }
        let model = BidModel::EqualBids { max_copies: 3 };
        for inst in random_instances(k, d, 4, 12 * k as usize, &model, 20, 23) {
            let eb = run_equal_bids(&inst, p, TieBreak::LowestIndex).map_err(|e| e.to_string())?;
            dual_checks(&inst, &eb, &one_c, "equal-bids")?;
            let g = run_greedy(&inst, p, TieBreak::LowestIndex).map_err(|e| e.to_string())?;
            dual_checks(&inst, &g, &greedy_b, "greedy")?;
            count += 2;
        }
        let model = BidModel::General { r_max: frac(1, 2) };
        for inst in random_instances(k, d, 4, 40, &model, 20, 37) {
            if k + 1 >= d {
                let gb = run_general_bids(&inst, p, TieBreak::LowestIndex).map_err(|e| e.to_string())?;
                dual_checks(&inst, &gb, &one_c, "general-bids")?;
                count += 1;
            }
            let g = run_greedy(&inst, p, TieBreak::LowestIndex).map_err(|e| e.to_string())?;
            dual_checks(&inst, &g, &greedy_b, "greedy")?;
            count += 1;
        }
    }
    Ok(format!("{count} runs feasible and audited"))
}

fn c7_general_bids_revenue() -> Outcome {
    let model = BidModel::General { r_max: frac(1, 2) };
    let det = det_ratio(3, 2);
    for inst in random_instances(3, 2, 5, 30, &model, 200, 500) {
        ensure(compute_r_max(&inst).unwrap() <= frac(1, 2), || "R_max above 1/2".into())?;
        let run = run_general_bids(&inst, Params::new(3, 2), TieBreak::LowestIndex).map_err(|e| e.to_string())?;
        let max_bids = inst.max_bids();
        let floor = inst
            .advertisers()
            .iter()
            .fold(Q::zero(), |acc, a| acc + &a.budget - &max_bids[a.id])
            * &det;
        ensure(run.allocation.revenue >= floor, || {
            format!("revenue {} < {floor}", run.allocation.revenue)
        })?;
        let rep = certify(&inst, &run.trace, Level::Full).map_err(|e| e.to_string())?;
        ensure(rep.passed(), || rep.render())?;
    }
    Ok("200 instances; revenue floor and all lemma checks hold".into())
}

fn c8_reduction_equivalence() -> Outcome {
    let model = BidModel::EqualBids { max_copies: 3 };
    let mut n = 0;
    for (k, d) in [(1u32, 2u32), (2, 2), (3, 2), (2, 3)] {
        let p = Params::new(k, d);
        for inst in random_instances(k, d, 4, 12 * k as usize, &model, 25, 900) {
            let eb = run_equal_bids(&inst, p, TieBreak::HighestDegreeThenLowestIndex).map_err(|e| e.to_string())?;
            let red = split_copies_reduction(&inst, p).map_err(|e| e.to_string())?;
            let hd = run_high_degree(&red.instance, p).map_err(|e| e.to_string())?;
            ensure(eb.allocation.revenue == hd.allocation.revenue, || {
                format!("({k},{d}): equal-bids {} vs reduction {}", eb.allocation.revenue, hd.allocation.revenue)
            })?;
            let floor = det_ratio(k, d) * inst.total_budget();
            ensure(eb.allocation.revenue >= floor, || format!("revenue below {floor}"))?;
            n += 1;
        }
    }
    Ok(format!("{n} instances"))
}

fn unit_instance(n: usize, slots: &[&[usize]]) -> Instance {
    let mut b = InstanceBuilder::new();
    b.add_advertisers(n, &int(1));
    for s in slots {
        b.add_slot(s.iter().map(|&adv| Edge { adv, bid: int(1) }).collect());
    }
    b.build(InstanceMeta::default()).unwrap()
}

/// Exact expected RANDOM revenue and the most branch points on any path.
fn enumerate_random(inst: &Instance, at: usize, matched: &mut Vec<bool>) -> (Q, usize) {
    let Some(slot) = inst.slots().get(at) else {
        return (Q::zero(), 0);
    };
    let free: Vec<usize> = slot.edges.iter().map(|e| e.adv).filter(|&a| !matched[a]).collect();
    if free.is_empty() {
        return enumerate_random(inst, at + 1, matched);
    }
    let mut sum = Q::zero();
    let mut depth = 0;
    for &a in &free {
        matched[a] = true;
        let (e, b) = enumerate_random(inst, at + 1, matched);
        matched[a] = false;
        sum += Q::one() + e;
        depth = depth.max(b);
    }
    let branch = usize::from(free.len() > 1);
    (sum / int(free.len() as i64), depth + branch)
}

fn c9_randomized() -> Outcome {
    let source = InstanceSource::Generator {
        name: "high-degree-ub".into(),
        params: [("k", "2"), ("d", "2")].iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        seed: 0,
    };
    let mut spec = ExperimentSpec::new(source, Algo::Random);
    spec.trials = 10_000;
    spec.seed = 2024;
    spec.verify = Level::Off;
    let rep = run_experiment(&spec).map_err(|e| e.to_string())?;
    let stats = rep.trials.unwrap();
    let mean = rational::to_f64(&stats.mean);
    ensure(mean >= 0.75 - 3.0 * stats.std_err, || stats.comparison.clone())?;

    let small = [
        unit_instance(2, &[&[0, 1], &[1]]),
        unit_instance(3, &[&[0, 1, 2], &[0], &[1]]),
        unit_instance(4, &[&[0, 1], &[1, 2], &[2, 3], &[3]]),
    ];
    let mut lines = vec![format!("ub(2,2) mean {mean:.4}")];
    for inst in &small {
        let n = inst.num_advertisers();
        let (expect, branches) = enumerate_random(inst, 0, &mut vec![false; n]);
        ensure(branches <= 3, || format!("{branches} branch points"))?;
        let trials = 10_000usize;
        let revenues = par::map_range(Execution::default(), trials, |t| {
            let r = run_random(inst, par::split_seed(99, t as u64)).unwrap();
            rational::to_f64(&r.allocation.revenue)
        });
        let m = revenues.iter().sum::<f64>() / trials as f64;
        let var = revenues.iter().map(|r| (r - m).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        let e = rational::to_f64(&expect);
        ensure((m - e).abs() <= 3.0 * se, || format!("mean {m} vs exact {expect} (stderr {se})"))?;
        lines.push(format!("{expect}≈{m:.4}"));
    }
    Ok(lines.join(" "))
}

fn c10_upper_bounds() -> Outcome {
    let half = frac(1, 2);
    let eps = default_eps(&half);
    let cap_ub = &half * (Q::one() - frac(1, 16)) * int(16) + int(16) * &eps;
    let star_eps = frac(1, 1000);
    let cap_star = (&half + &star_eps) * int(10);
    let mut lines = Vec::new();
    for algo in [Algo::Greedy, Algo::HighDegree, Algo::EqualBids, Algo::GeneralBids] {
        let mut src = gen_adwords_ub(2, 2, &half, Some(eps.clone())).map_err(|e| e.to_string())?;
        let ub = run(algo, &mut src, Params::new(2, 2), &RunOptions::default());
        let mut star = gen_star_1mr(&half, 10, Some(star_eps.clone())).map_err(|e| e.to_string())?;
        let st = run(algo, &mut star, Params::new(1, 2), &RunOptions::default());
        match (ub, st) {
            (Err(AlgoError::Contract(_)), Err(AlgoError::Contract(_))) => {
                lines.push(format!("{algo} n/a"));
            }
            (Ok(ub), Ok(st)) => {
                let (a, b) = (&ub.allocation.revenue, &st.allocation.revenue);
                ensure(*a <= cap_ub, || format!("{algo} gains {a} > {cap_ub} on adwords-ub"))?;
                ensure(*b <= cap_star, || format!("{algo} gains {b} > {cap_star} on star"))?;
                lines.push(format!("{algo} {a}|{b}"));
            }
            (a, b) => return Err(format!("{algo}: {:?} / {:?}", a.err(), b.err())),
        }
    }
    Ok(format!("caps {cap_ub}|{cap_star}: {}", lines.join(", ")))
}

fn c11_outliers() -> Outcome {
    let model = BidModel::General { r_max: frac(1, 2) };
    let (k, d) = (3u32, 2u32);
    let mut n = 0;
    for alpha in [frac(1, 10), frac(1, 4)] {
        for (i, base) in random_instances(k, d, 8, 40, &model, 10, 70).iter().enumerate() {
            let inst = gen_outlier_composite(base, &alpha, i as u64).map_err(|e| e.to_string())?;
            let kd = validate_kd(&inst, k, d);
            ensure(kd.alpha == alpha, || format!("composite alpha {} ≠ {alpha}", kd.alpha))?;
            let r = compute_r_max(&inst).unwrap();
            let run = run_general_bids(&inst, Params::new(k, d), TieBreak::LowestIndex).map_err(|e| e.to_string())?;
            let floor = (Q::one() - &alpha) * (Q::one() - &r) * det_ratio(k, d) * inst.total_budget();
            ensure(run.allocation.revenue >= floor, || {
                format!("alpha {alpha}: revenue {} < {floor}", run.allocation.revenue)
            })?;
            n += 1;
        }
    }
    Ok(format!("{n} composites"))
}

fn c12_table() -> Outcome {
    let rs: Vec<Q> = [2, 3, 4, 5, 6, 8, 16, 32, 100].iter().map(|m| frac(1, *m)).collect();
    let ours = [0.432, 0.633, 0.736, 0.795, 0.831, 0.875, 0.938, 0.969, 0.99];
    let sota = [0.278, 0.385, 0.443, 0.478, 0.503, 0.534, 0.582, 0.607, 0.624];
    let rows = bounds_table(&rs, &[]).map_err(|e| e.to_string())?;
    let mut got = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let o: f64 = row.asymptotic_ours.round(3).parse().unwrap();
        let s: f64 = row.asymptotic_sota.round(3).parse().unwrap();
        ensure((o - ours[i]).abs() <= 0.001 + 1e-9, || format!("R={}: ours {o} vs {}", row.r, ours[i]))?;
        ensure((s - sota[i]).abs() <= 0.001 + 1e-9, || format!("R={}: sota {s} vs {}", row.r, sota[i]))?;
        got.push(format!("{o}/{s}"));
    }
    Ok(got.join(" "))
}

fn c13_structural() -> Outcome {
    let (k, d, n_l) = (6u32, 2u32, 8usize);
    ensure(k as f64 >= d as f64 * (n_l as f64).ln(), || "k < d·ln|L|".into())?;
    let mut n = 0;
    for n_r in [24usize, 28, 32] {
        for inst in random_instances(k, d, n_l, n_r, &BidModel::Unweighted, 20, 3000) {
            let run = run_high_degree(&inst, Params::new(k, d)).map_err(|e| e.to_string())?;
            let u = unmatched(&run, n_l);
            ensure(u == 0, || format!("|R|={n_r}: {u} unmatched"))?;
            n += 1;
        }
    }
    Ok(format!("{n} instances fully matched"))
}

fn c14_full_scale() -> Outcome {
    let g = gen_high_degree_ub(7, 4).map_err(|e| e.to_string())?;
    let n = g.instance.num_advertisers();
    ensure(n == 65_536, || format!("{n} advertisers"))?;
    let run = run_high_degree(&g.instance, Params::new(7, 4)).map_err(|e| e.to_string())?;
    let u = unmatched(&run, n);
    ensure(u == 8_748, || format!("{u} unmatched"))?;
    Ok(format!("{u} of {n} unmatched over {} slots", g.instance.num_slots()))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 14] = [
        ("greedy tightness", c1_greedy_tightness),
        ("greedy lower bound", c2_greedy_lower_bound),
        ("high-degree tightness", c3_high_degree_tightness),
        ("high-degree lower bound", c4_high_degree_lower_bound),
        ("potential monotonicity", c5_potential),
        ("dual certification", c6_dual_certification),
        ("general-bids revenue", c7_general_bids_revenue),
        ("equal-bids reduction", c8_reduction_equivalence),
        ("randomized bound", c9_randomized),
        ("upper-bound constructions", c10_upper_bounds),
        ("outliers", c11_outliers),
        ("bounds table", c12_table),
        ("structural corollary", c13_structural),
        ("full-scale upper bound", c14_full_scale),
    ];
    let mut failed = BTreeSet::new();
    for (i, (name, f)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {:>2} PASS {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                println!("criterion {:>2} FAIL {name} ({secs:.1}s): {detail}", i + 1);
                failed.insert(i + 1);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 14 criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed {failed:?}");
        ExitCode::FAILURE
    }
}
