//! Ad allocation instances: advertisers with budgets, ad slots in arrival
//! order with their bids, and (k,d)-boundedness auditing.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::oracle::OptKind;
use crate::rational::{self, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InstanceError {
    #[error("advertiser at position {position} has id {id}")]
    AdvertiserIdMismatch { position: usize, id: usize },
    #[error("slot at position {position} has id {id}")]
    SlotIdMismatch { position: usize, id: usize },
    #[error("advertiser {adv} has non-positive budget {budget}")]
    NonPositiveBudget { adv: usize, budget: String },
    #[error("slot {slot} references unknown advertiser {adv}")]
    DanglingReference { slot: usize, adv: usize },
    #[error("slot {slot}: bid {bid} of advertiser {adv} is outside (0, budget]")]
    BidOutOfRange { slot: usize, adv: usize, bid: String },
    #[error("slot {slot} lists advertiser {adv} twice")]
    DuplicateEdge { slot: usize, adv: usize },
    #[error("bid-to-budget ratio is undefined on an instance without edges")]
    UndefinedRatio,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Advertiser {
    pub id: usize,
    pub budget: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Edge {
    pub adv: usize,
    pub bid: Q,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdSlot {
    pub id: usize,
    pub edges: Vec<Edge>,
}

impl AdSlot {
    pub fn degree(&self) -> usize {
        self.edges.len()
    }

    pub fn bid_of(&self, adv: usize) -> Option<&Q> {
        self.edges.iter().find(|e| e.adv == adv).map(|e| &e.bid)
    }
}

/// Serialized description of an adaptive adversary. The slot list of an
/// adaptive instance is produced while an algorithm runs against it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipe {
    pub generator: String,
    pub params: BTreeMap<String, String>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct InstanceMeta {
    pub claimed_k: Option<u32>,
    pub claimed_d: Option<u32>,
    pub known_opt: Option<Q>,
    pub opt_kind: Option<OptKind>,
    pub generator_tag: Option<String>,
    /// Slack of constructions that use an arbitrarily small bid.
    pub epsilon: Option<Q>,
    pub notes: Option<String>,
    pub recipe: Option<Recipe>,
}

/// Immutable instance. The slot order is the online arrival order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Instance {
    advertisers: Vec<Advertiser>,
    slots: Vec<AdSlot>,
    meta: InstanceMeta,
}

impl Instance {
    pub fn new(
        advertisers: Vec<Advertiser>,
        slots: Vec<AdSlot>,
        meta: InstanceMeta,
    ) -> Result<Self, InstanceError> {
        for (position, a) in advertisers.iter().enumerate() {
            if a.id != position {
                return Err(InstanceError::AdvertiserIdMismatch { position, id: a.id });
            }
            if !a.budget.is_positive() {
                return Err(InstanceError::NonPositiveBudget {
                    adv: a.id,
                    budget: rational::format(&a.budget),
                });
            }
        }
        for (position, s) in slots.iter().enumerate() {
            if s.id != position {
                return Err(InstanceError::SlotIdMismatch { position, id: s.id });
            }
            check_slot(s, &advertisers)?;
        }
        Ok(Instance {
            advertisers,
            slots,
            meta,
        })
    }

    pub fn empty() -> Self {
        Instance {
            advertisers: Vec::new(),
            slots: Vec::new(),
            meta: InstanceMeta::default(),
        }
    }

    pub fn advertisers(&self) -> &[Advertiser] {
        &self.advertisers
    }

    pub fn slots(&self) -> &[AdSlot] {
        &self.slots
    }

    pub fn meta(&self) -> &InstanceMeta {
        &self.meta
    }

    pub fn with_meta(mut self, meta: InstanceMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn num_advertisers(&self) -> usize {
        self.advertisers.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn budget(&self, adv: usize) -> &Q {
        &self.advertisers[adv].budget
    }

    pub fn budgets(&self) -> Vec<Q> {
        self.advertisers.iter().map(|a| a.budget.clone()).collect()
    }

    pub fn total_budget(&self) -> Q {
        self.advertisers
            .iter()
            .fold(Q::zero(), |acc, a| acc + &a.budget)
    }

    pub fn num_edges(&self) -> usize {
        self.slots.iter().map(AdSlot::degree).sum()
    }

    /// Degree of every advertiser in the full graph.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.advertisers.len()];
        for e in self.slots.iter().flat_map(|s| &s.edges) {
            deg[e.adv] += 1;
        }
        deg
    }

    /// `Σ_j b_ij` for every advertiser.
    pub fn bid_sums(&self) -> Vec<Q> {
        let mut sums = vec![Q::zero(); self.advertisers.len()];
        for e in self.slots.iter().flat_map(|s| &s.edges) {
            sums[e.adv] += &e.bid;
        }
        sums
    }

    /// `max_j b_ij` for every advertiser (zero for isolated ones).
    pub fn max_bids(&self) -> Vec<Q> {
        let mut best = vec![Q::zero(); self.advertisers.len()];
        for e in self.slots.iter().flat_map(|s| &s.edges) {
            if e.bid > best[e.adv] {
                best[e.adv] = e.bid.clone();
            }
        }
        best
    }

    /// Slots adjacent to each advertiser, in arrival order.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.advertisers.len()];
        for s in &self.slots {
            for e in &s.edges {
                adj[e.adv].push(s.id);
            }
        }
        adj
    }

    /// Every bid and budget equals one.
    pub fn is_unweighted(&self) -> bool {
        self.advertisers.iter().all(|a| a.budget.is_one())
            && self
                .slots
                .iter()
                .flat_map(|s| &s.edges)
                .all(|e| e.bid.is_one())
    }

    /// Every bid equals the bidder's full budget.
    pub fn is_vertex_weighted(&self) -> bool {
        self.slots
            .iter()
            .flat_map(|s| &s.edges)
            .all(|e| e.bid == self.advertisers[e.adv].budget)
    }

    /// Per-advertiser common bid, or `None` if some advertiser bids two
    /// different values. Isolated advertisers map to `None` inside the vec.
    pub fn equal_bids(&self) -> Option<Vec<Option<Q>>> {
        let mut bids: Vec<Option<Q>> = vec![None; self.advertisers.len()];
        for e in self.slots.iter().flat_map(|s| &s.edges) {
            match &bids[e.adv] {
                Some(b) if *b != e.bid => return None,
                Some(_) => {}
                None => bids[e.adv] = Some(e.bid.clone()),
            }
        }
        Some(bids)
    }

    pub fn max_slot_degree(&self) -> usize {
        self.slots.iter().map(AdSlot::degree).max().unwrap_or(0)
    }
}

fn check_slot(slot: &AdSlot, advertisers: &[Advertiser]) -> Result<(), InstanceError> {
    let mut seen = BTreeSet::new();
    for e in &slot.edges {
        let Some(a) = advertisers.get(e.adv) else {
            return Err(InstanceError::DanglingReference {
                slot: slot.id,
                adv: e.adv,
            });
        };
        if !e.bid.is_positive() || e.bid > a.budget {
            return Err(InstanceError::BidOutOfRange {
                slot: slot.id,
                adv: e.adv,
                bid: rational::format(&e.bid),
            });
        }
        if !seen.insert(e.adv) {
            return Err(InstanceError::DuplicateEdge {
                slot: slot.id,
                adv: e.adv,
            });
        }
    }
    Ok(())
}

/// Incremental construction used by the generators.
#[derive(Debug, Default, Clone)]
pub struct InstanceBuilder {
    advertisers: Vec<Advertiser>,
    slots: Vec<AdSlot>,
}

impl InstanceBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_instance(instance: &Instance) -> Self {
        InstanceBuilder {
            advertisers: instance.advertisers.clone(),
            slots: instance.slots.clone(),
        }
    }

    pub fn add_advertiser(&mut self, budget: Q) -> usize {
        let id = self.advertisers.len();
        self.advertisers.push(Advertiser { id, budget });
        id
    }

    pub fn add_advertisers(&mut self, n: usize, budget: &Q) -> std::ops::Range<usize> {
        let start = self.advertisers.len();
        for _ in 0..n {
            self.add_advertiser(budget.clone());
        }
        start..start + n
    }

    pub fn add_slot(&mut self, edges: Vec<Edge>) -> usize {
        let id = self.slots.len();
        self.slots.push(AdSlot { id, edges });
        id
    }

    pub fn num_advertisers(&self) -> usize {
        self.advertisers.len()
    }

    pub fn num_slots(&self) -> usize {
        self.slots.len()
    }

    pub fn budget(&self, adv: usize) -> &Q {
        &self.advertisers[adv].budget
    }

    /// Reorders slots; `order[t]` is the old position of the slot that now
    /// arrives t-th. Slot ids are renumbered to match.
    pub fn reorder_slots(&mut self, order: &[usize]) {
        let mut old: Vec<Option<AdSlot>> = self.slots.drain(..).map(Some).collect();
        self.slots = order
            .iter()
            .enumerate()
            .map(|(t, &o)| {
                let mut s = old[o].take().expect("order is not a permutation");
                s.id = t;
                s
            })
            .collect();
    }

    pub fn build(self, meta: InstanceMeta) -> Result<Instance, InstanceError> {
        Instance::new(self.advertisers, self.slots, meta)
    }
}

/// Result of auditing an instance against the (k,d) definition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KdReport {
    pub is_kd: bool,
    /// Largest slot degree.
    pub d_observed: usize,
    /// Advertisers with `Σ_j b_ij < k·B_i`.
    pub outliers: BTreeSet<usize>,
    /// Outlier share of the total budget.
    pub alpha: Q,
    /// Advertisers with fewer than k edges.
    pub degree_outliers: BTreeSet<usize>,
    /// The budget form and the degree form name different outlier sets.
    pub forms_disagree: bool,
}

/// Audits the (k,d) conditions. Slot degrees must not exceed `d`; the
/// advertiser side uses the budget form `Σ_j b_ij ≥ k·B_i`. The degree form
/// is reported alongside so callers can see when the two differ.
pub fn validate_kd(instance: &Instance, k: u32, d: u32) -> KdReport {
    let d_observed = instance.max_slot_degree();
    let kq = rational::int(k as i64);
    let sums = instance.bid_sums();
    let degrees = instance.degrees();
    let mut outliers = BTreeSet::new();
    let mut degree_outliers = BTreeSet::new();
    let mut outlier_budget = Q::zero();
    for a in instance.advertisers() {
        if sums[a.id] < &kq * &a.budget {
            outliers.insert(a.id);
            outlier_budget += &a.budget;
        }
        if degrees[a.id] < k as usize {
            degree_outliers.insert(a.id);
        }
    }
    let total = instance.total_budget();
    let alpha = if total.is_zero() {
        Q::zero()
    } else {
        outlier_budget / total
    };
    KdReport {
        is_kd: d_observed <= d as usize && outliers.is_empty(),
        d_observed,
        forms_disagree: outliers != degree_outliers,
        outliers,
        alpha,
        degree_outliers,
    }
}

/// `R_max = max_{(i,j)} b_ij / B_i`.
pub fn compute_r_max(instance: &Instance) -> Result<Q, InstanceError> {
    instance
        .slots()
        .iter()
        .flat_map(|s| &s.edges)
        .map(|e| &e.bid / instance.budget(e.adv))
        .max()
        .ok_or(InstanceError::UndefinedRatio)
}

/// Neighbors of `slot` whose residual budget covers their bid.
pub fn feasible_neighbors(instance: &Instance, slot: &AdSlot, spend: &[Q]) -> Vec<usize> {
    feasible_in(instance.advertisers(), slot, spend)
}

pub(crate) fn feasible_in(advertisers: &[Advertiser], slot: &AdSlot, spend: &[Q]) -> Vec<usize> {
    slot.edges
        .iter()
        .filter(|e| &advertisers[e.adv].budget - &spend[e.adv] >= e.bid)
        .map(|e| e.adv)
        .collect()
}
