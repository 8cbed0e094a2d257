//! Online allocation algorithms and the arrival loop they share.
//!
//! Each algorithm is a [`Rule`]: it scores feasible neighbors and updates
//! its dual variables. The loop in [`drive`] owns budgets, spend, degrees
//! and the trace, so budget safety, maximality and the ΔP/ΔD bookkeeping
//! are enforced in one place.

mod equal_bids;
mod general_bids;
mod greedy;
mod high_degree;
mod randomized;
pub mod reduction;

use std::sync::Arc;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::duals::{DualState, ZcState};
use crate::instance::{AdSlot, Advertiser, Instance};
use crate::numeral::NumeralError;
use crate::rational::{self, Q, Ratio};
use crate::trace::{
    ArrivalRecord, CreditEvent, DualDiff, FinalRecord, RunTrace, TraceHeader, ZcSnapshot,
};

pub use crate::numeral::scaling_constant;
pub use crate::trace::Algo;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum AlgoError {
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("tie script at arrival {arrival} names advertiser {adv}, which is not a feasible best candidate")]
    Script { arrival: usize, adv: usize },
    #[error("invalid parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Numeral(#[from] NumeralError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Params {
    pub k: u32,
    pub d: u32,
}

impl Params {
    pub fn new(k: u32, d: u32) -> Self {
        Params { k, d }
    }

    /// Claimed (k,d) from the instance meta, falling back to the smallest
    /// advertiser degree and the largest slot degree.
    pub fn for_instance(instance: &Instance) -> Self {
        let meta = instance.meta();
        let k = meta.claimed_k.unwrap_or_else(|| {
            instance.degrees().into_iter().min().unwrap_or(1).max(1) as u32
        });
        let d = meta
            .claimed_d
            .unwrap_or_else(|| instance.max_slot_degree().max(1) as u32);
        Params { k, d }
    }
}

/// How an algorithm chooses among equally scored feasible neighbors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TieBreak {
    LowestIndex,
    /// Largest degree first; each algorithm defines the degree it uses.
    HighestDegreeThenLowestIndex,
    /// Explicit per-arrival choices; `None` or a missing entry falls back
    /// to the lowest index.
    Script(Arc<[Option<usize>]>),
    SeededUniform(u64),
}

impl TieBreak {
    pub fn script(choices: Vec<Option<usize>>) -> Self {
        TieBreak::Script(choices.into())
    }

    pub fn label(&self) -> String {
        match self {
            TieBreak::LowestIndex => "lowest".into(),
            TieBreak::HighestDegreeThenLowestIndex => "highest-degree".into(),
            TieBreak::Script(_) => "script".into(),
            TieBreak::SeededUniform(s) => format!("seeded:{s}"),
        }
    }

    /// Picks from `candidates` (ascending advertiser ids, non-empty).
    pub(crate) fn pick(
        &self,
        arrival: usize,
        candidates: &[usize],
        degree: impl Fn(usize) -> u64,
    ) -> Result<usize, AlgoError> {
        match self {
            TieBreak::LowestIndex => Ok(candidates[0]),
            TieBreak::HighestDegreeThenLowestIndex => {
                let best = candidates.iter().map(|&a| degree(a)).max().unwrap_or(0);
                Ok(*candidates.iter().find(|&&a| degree(a) == best).unwrap())
            }
            TieBreak::Script(choices) => match choices.get(arrival).copied().flatten() {
                None => Ok(candidates[0]),
                Some(adv) if candidates.contains(&adv) => Ok(adv),
                Some(adv) => Err(AlgoError::Script { arrival, adv }),
            },
            TieBreak::SeededUniform(seed) => {
                let mut rng = arrival_rng(*seed, arrival);
                Ok(candidates[rng.random_range(0..candidates.len())])
            }
        }
    }
}

/// Generator for one arrival: the run's root seed, split by arrival index.
pub(crate) fn arrival_rng(seed: u64, arrival: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(arrival as u64);
    rng
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub tie: TieBreak,
    /// Root seed for RANDOM and RANKING.
    pub seed: u64,
    /// Greedy only: divide a non-matched neighbor's increment by the matched
    /// advertiser's budget instead of its own.
    pub literal_greedy_budget: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            tie: TieBreak::LowestIndex,
            seed: 0,
            literal_greedy_budget: false,
        }
    }
}

impl RunOptions {
    pub fn with_tie(tie: TieBreak) -> Self {
        RunOptions {
            tie,
            ..Self::default()
        }
    }

    pub fn with_seed(seed: u64) -> Self {
        RunOptions {
            seed,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Match {
    pub slot: usize,
    pub adv: usize,
    pub bid: Ratio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AllocationResult {
    pub matches: Vec<Match>,
    pub revenue: Q,
    pub spend: Vec<Q>,
}

impl AllocationResult {
    pub fn matched_advertisers(&self) -> usize {
        self.spend.iter().filter(|s| !s.is_zero()).count()
    }
}

#[derive(Debug, Clone)]
pub struct Run {
    pub allocation: AllocationResult,
    pub trace: RunTrace,
    /// Absent for RANDOM and RANKING, which keep no duals.
    pub duals: Option<DualState>,
    /// The slot list an adaptive source produced during the run.
    pub realized: Option<Instance>,
}

/// Supplies slots one at a time. Adaptive adversaries look at the current
/// spend before deciding what arrives next.
pub trait ArrivalSource {
    fn advertisers(&self) -> &[Advertiser];
    fn next_slot(&mut self, spend: &[Q]) -> Option<AdSlot>;
    fn observe(&mut self, _decision: Option<usize>) {}
    /// The instance as it was revealed; only adaptive sources return one.
    fn realized(&mut self) -> Option<Instance> {
        None
    }
}

pub struct StaticSource<'a> {
    instance: &'a Instance,
    pos: usize,
}

impl<'a> StaticSource<'a> {
    pub fn new(instance: &'a Instance) -> Self {
        StaticSource { instance, pos: 0 }
    }
}

impl ArrivalSource for StaticSource<'_> {
    fn advertisers(&self) -> &[Advertiser] {
        self.instance.advertisers()
    }

    fn next_slot(&mut self, _spend: &[Q]) -> Option<AdSlot> {
        let s = self.instance.slots().get(self.pos)?.clone();
        self.pos += 1;
        Some(s)
    }
}

pub(crate) struct EngineState {
    pub budgets: Vec<Q>,
    pub spend: Vec<Q>,
    /// Edges seen so far, not counting the current arrival.
    pub degree: Vec<u32>,
    pub max_ratio: Option<Q>,
}

pub(crate) struct Arrival<'a> {
    pub index: usize,
    pub slot: &'a AdSlot,
    /// Feasible neighbors with their bids, ascending by advertiser.
    pub feasible: Vec<(usize, Q)>,
    pub state: &'a EngineState,
}

pub(crate) trait Rule {
    fn initial_zc(&self, n: usize) -> ZcState;

    fn keeps_duals(&self) -> bool {
        true
    }

    /// Online precondition checks, before feasibility is computed.
    fn check_slot(&mut self, _slot: &AdSlot, _st: &EngineState) -> Result<(), AlgoError> {
        Ok(())
    }

    fn choose(&mut self, cx: &Arrival<'_>, duals: &mut DualState) -> Result<usize, AlgoError>;

    fn update(
        &mut self,
        _cx: &Arrival<'_>,
        _chosen: usize,
        _duals: &mut DualState,
        _events: &mut Vec<CreditEvent>,
    ) -> Result<(), AlgoError> {
        Ok(())
    }

    fn finalize(&mut self, _st: &EngineState, _duals: &mut DualState) {}
}

/// Indices (ascending) of the entries whose score equals the maximum.
pub(crate) fn argmax(feasible: &[(usize, Q)], scores: &[Q]) -> Vec<usize> {
    let best = scores.iter().max().expect("non-empty feasible set");
    feasible
        .iter()
        .zip(scores)
        .filter(|(_, s)| *s == best)
        .map(|((a, _), _)| *a)
        .collect()
}

fn snapshot(duals: &DualState, adv: usize) -> Option<ZcSnapshot> {
    match &duals.zc {
        ZcState::None => None,
        ZcState::Plain(v) => Some(ZcSnapshot::Plain(v[adv].clone())),
        ZcState::Digits(v) => Some(ZcSnapshot::Digits(
            v[adv].digits().iter().cloned().map(Ratio).collect(),
        )),
    }
}

fn diff_for(
    duals: &DualState,
    adv: usize,
    z_before: &Q,
    zc_before: &Option<ZcSnapshot>,
) -> Option<DualDiff> {
    let zc_after = snapshot(duals, adv);
    let zc_changed = zc_after != *zc_before;
    (duals.z[adv] != *z_before || zc_changed).then(|| DualDiff {
        adv,
        z: duals.z[adv].clone(),
        zc: if zc_changed { zc_after } else { None },
    })
}

pub(crate) fn drive(
    rule: &mut dyn Rule,
    algo: Algo,
    source: &mut dyn ArrivalSource,
    params: Params,
    tie_label: String,
    seed: Option<u64>,
    c: Option<Q>,
) -> Result<Run, AlgoError> {
    let budgets: Vec<Q> = source.advertisers().iter().map(|a| a.budget.clone()).collect();
    let n = budgets.len();
    let mut st = EngineState {
        budgets,
        spend: vec![Q::zero(); n],
        degree: vec![0; n],
        max_ratio: None,
    };
    let mut duals = DualState::new(n, rule.initial_zc(n));
    let mut arrivals = Vec::new();
    let mut matches = Vec::new();
    let mut revenue = Q::zero();

    let mut index = 0;
    while let Some(slot) = source.next_slot(&st.spend) {
        for e in &slot.edges {
            if e.adv >= n {
                return Err(AlgoError::Contract(format!(
                    "slot {} references unknown advertiser {}",
                    slot.id, e.adv
                )));
            }
        }
        rule.check_slot(&slot, &st)?;
        for e in &slot.edges {
            let r = &e.bid / &st.budgets[e.adv];
            if st.max_ratio.as_ref().is_none_or(|m| r > *m) {
                st.max_ratio = Some(r);
            }
        }
        let mut feasible: Vec<(usize, Q)> = slot
            .edges
            .iter()
            .filter(|e| &st.budgets[e.adv] - &st.spend[e.adv] >= e.bid)
            .map(|e| (e.adv, e.bid.clone()))
            .collect();
        feasible.sort_by_key(|(a, _)| *a);
        duals.y.push(Q::zero());

        let mut record = ArrivalRecord {
            index,
            slot: slot.id,
            feasible: feasible.iter().map(|(a, _)| *a).collect(),
            decision: None,
            bid: None,
            delta_p: Q::zero(),
            delta_d: Q::zero(),
            diffs: Vec::new(),
            events: Vec::new(),
        };

        if !feasible.is_empty() {
            let before: Vec<(usize, Q, Q, Option<ZcSnapshot>)> = slot
                .edges
                .iter()
                .map(|e| {
                    (
                        e.adv,
                        duals.account(e.adv, &st.budgets[e.adv]),
                        duals.z[e.adv].clone(),
                        snapshot(&duals, e.adv),
                    )
                })
                .collect();
            let cx = Arrival {
                index,
                slot: &slot,
                feasible,
                state: &st,
            };
            let chosen = rule.choose(&cx, &mut duals)?;
            let Some(bid) = cx.feasible.iter().find(|(a, _)| *a == chosen).map(|(_, b)| b.clone())
            else {
                return Err(AlgoError::Contract(format!(
                    "arrival {index}: chose infeasible advertiser {chosen}"
                )));
            };
            rule.update(&cx, chosen, &mut duals, &mut record.events)?;
            drop(cx);
            for e in &slot.edges {
                duals.zf[e.adv] = None;
            }
            st.spend[chosen] += &bid;
            revenue += &bid;
            matches.push(Match {
                slot: slot.id,
                adv: chosen,
                bid: Ratio(bid.clone()),
            });
            let mut delta_d = Q::zero();
            for (adv, acc, z, zc) in &before {
                delta_d += duals.account(*adv, &st.budgets[*adv]) - acc;
                if let Some(diff) = diff_for(&duals, *adv, z, zc) {
                    record.diffs.push(diff);
                }
            }
            record.decision = Some(chosen);
            record.delta_p = bid.clone();
            record.bid = Some(bid);
            record.delta_d = delta_d;
        }
        for e in &slot.edges {
            st.degree[e.adv] += 1;
        }
        source.observe(record.decision);
        arrivals.push(record);
        index += 1;
    }

    let pre = duals.accounting_cost(&st.budgets);
    let z_before = duals.z.clone();
    let zc_before: Vec<Option<ZcSnapshot>> = (0..n).map(|i| snapshot(&duals, i)).collect();
    rule.finalize(&st, &mut duals);
    let dual_cost = duals.dual_cost(&st.budgets);
    let diffs = (0..n)
        .filter_map(|i| diff_for(&duals, i, &z_before[i], &zc_before[i]))
        .collect();
    let finalization = FinalRecord {
        delta_d: &dual_cost - pre,
        dual_cost,
        diffs,
    };

    let keeps = rule.keeps_duals();
    let trace = RunTrace {
        header: TraceHeader {
            algo,
            k: params.k,
            d: params.d,
            tie: tie_label,
            seed,
            scaling_constant: c,
            duals: keeps,
        },
        arrivals,
        finalization,
    };
    Ok(Run {
        allocation: AllocationResult {
            matches,
            revenue,
            spend: st.spend,
        },
        trace,
        duals: keeps.then_some(duals),
        realized: source.realized(),
    })
}

/// Runs `algo` against any arrival source.
pub fn run(
    algo: Algo,
    source: &mut dyn ArrivalSource,
    params: Params,
    opts: &RunOptions,
) -> Result<Run, AlgoError> {
    if params.k == 0 {
        return Err(AlgoError::Params("k must be at least 1".into()));
    }
    let tie = opts.tie.label();
    match algo {
        Algo::Greedy => {
            let mut rule = greedy::Greedy::new(params.k, opts.tie.clone(), opts.literal_greedy_budget);
            drive(&mut rule, algo, source, params, tie, None, None)
        }
        Algo::HighDegree => {
            let mut rule = high_degree::HighDegree::new(params)?;
            let c = Some(rule.c().clone());
            drive(&mut rule, algo, source, params, "highest-degree".into(), None, c)
        }
        Algo::EqualBids => {
            let mut rule = equal_bids::EqualBids::new(params, opts.tie.clone())?;
            let c = Some(rule.c().clone());
            drive(&mut rule, algo, source, params, tie, None, c)
        }
        Algo::GeneralBids => {
            let mut rule = general_bids::GeneralBids::new(params, opts.tie.clone())?;
            let c = Some(rule.c().clone());
            drive(&mut rule, algo, source, params, tie, None, c)
        }
        Algo::Random => {
            let mut rule = randomized::Random::new(opts.seed);
            drive(&mut rule, algo, source, params, "uniform".into(), Some(opts.seed), None)
        }
        Algo::Ranking => {
            let n = source.advertisers().len();
            let mut rule = randomized::Ranking::new(n, opts.seed);
            drive(&mut rule, algo, source, params, "rank".into(), Some(opts.seed), None)
        }
    }
}

pub fn run_instance(
    algo: Algo,
    instance: &Instance,
    params: Params,
    opts: &RunOptions,
) -> Result<Run, AlgoError> {
    run(algo, &mut StaticSource::new(instance), params, opts)
}

pub fn run_greedy(instance: &Instance, params: Params, tie: TieBreak) -> Result<Run, AlgoError> {
    run_instance(Algo::Greedy, instance, params, &RunOptions::with_tie(tie))
}

pub fn run_high_degree(instance: &Instance, params: Params) -> Result<Run, AlgoError> {
    run_instance(Algo::HighDegree, instance, params, &RunOptions::default())
}

pub fn run_equal_bids(instance: &Instance, params: Params, tie: TieBreak) -> Result<Run, AlgoError> {
    run_instance(Algo::EqualBids, instance, params, &RunOptions::with_tie(tie))
}

pub fn run_general_bids(
    instance: &Instance,
    params: Params,
    tie: TieBreak,
) -> Result<Run, AlgoError> {
    run_instance(Algo::GeneralBids, instance, params, &RunOptions::with_tie(tie))
}

pub fn run_random(instance: &Instance, seed: u64) -> Result<Run, AlgoError> {
    run_instance(
        Algo::Random,
        instance,
        Params::for_instance(instance),
        &RunOptions::with_seed(seed),
    )
}

pub fn run_ranking(instance: &Instance, seed: u64) -> Result<Run, AlgoError> {
    run_instance(
        Algo::Ranking,
        instance,
        Params::for_instance(instance),
        &RunOptions::with_seed(seed),
    )
}

/// `1 − (1 − 1/d)^k`, the deterministic primal-dual guarantee `1/(1+C)`.
pub fn det_ratio(k: u32, d: u32) -> Q {
    let base = rational::frac(d as i64 - 1, d as i64);
    rational::one() - rational::pow(&base, k)
}
