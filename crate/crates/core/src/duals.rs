//! Dual variables and the exact checks run against them.

use std::collections::BTreeSet;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::instance::Instance;
use crate::numeral::DigitVector;
use crate::rational::{self, Q};
use crate::trace::{CreditEvent, CreditKind, RunTrace};

/// Per-advertiser current-copy accumulators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ZcState {
    None,
    Plain(Vec<Q>),
    Digits(Vec<DigitVector>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DualState {
    pub z: Vec<Q>,
    /// One entry per arrived slot; never raised by any algorithm here.
    pub y: Vec<Q>,
    pub zc: ZcState,
    /// Transient per-arrival fractions; empty between arrivals.
    pub zf: Vec<Option<DigitVector>>,
}

impl DualState {
    pub fn new(n: usize, zc: ZcState) -> Self {
        DualState {
            z: vec![Q::zero(); n],
            y: Vec::new(),
            zc,
            zf: vec![None; n],
        }
    }

    pub fn zc_value(&self, adv: usize) -> Q {
        match &self.zc {
            ZcState::None => Q::zero(),
            ZcState::Plain(v) => v[adv].clone(),
            ZcState::Digits(v) => v[adv].value(),
        }
    }

    /// LP dual objective `Σ B_i·z_i + Σ y_j`.
    pub fn dual_cost(&self, budgets: &[Q]) -> Q {
        let zs = budgets
            .iter()
            .zip(&self.z)
            .fold(Q::zero(), |acc, (b, z)| acc + b * z);
        self.y.iter().fold(zs, |acc, y| acc + y)
    }

    /// `B_i·(z_i + value(z_i^c))`, the per-advertiser share of the running
    /// dual total whose increments the ratio audit bounds.
    pub fn account(&self, adv: usize, budget: &Q) -> Q {
        budget * (&self.z[adv] + self.zc_value(adv))
    }

    pub fn accounting_cost(&self, budgets: &[Q]) -> Q {
        let s = (0..budgets.len()).fold(Q::zero(), |acc, i| acc + self.account(i, &budgets[i]));
        self.y.iter().fold(s, |acc, y| acc + y)
    }

    pub fn max_z(&self) -> Q {
        self.z.iter().max().cloned().unwrap_or_else(Q::zero)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EdgeViolation {
    pub slot: usize,
    pub adv: usize,
    pub lhs: String,
    pub bid: String,
}

/// Edges with `b_ij·z_i + y_j < b_ij`. Advertisers in `exempt` are skipped.
pub fn check_dual_feasibility(
    instance: &Instance,
    duals: &DualState,
    exempt: &BTreeSet<usize>,
) -> Vec<EdgeViolation> {
    let mut out = Vec::new();
    for s in instance.slots() {
        let y = duals.y.get(s.id).cloned().unwrap_or_else(Q::zero);
        for e in &s.edges {
            if exempt.contains(&e.adv) {
                continue;
            }
            let lhs = &e.bid * &duals.z[e.adv] + &y;
            if lhs < e.bid {
                out.push(EdgeViolation {
                    slot: s.id,
                    adv: e.adv,
                    lhs: rational::format(&lhs),
                    bid: rational::format(&e.bid),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AuditOutcome {
    pub passed: bool,
    /// First arrival with `ΔD > bound·ΔP`.
    pub first_offending: Option<usize>,
    /// Running totals satisfy `D ≤ bound·P` before finalization.
    pub cumulative_ok: bool,
}

pub fn audit_ratio(trace: &RunTrace, bound: &Q) -> AuditOutcome {
    let first_offending = trace
        .arrivals
        .iter()
        .find(|a| a.delta_d > bound * &a.delta_p)
        .map(|a| a.index);
    let cumulative_ok = trace.dual_prefinal() <= bound * trace.primal_total();
    AuditOutcome {
        passed: first_offending.is_none() && cumulative_ok,
        first_offending,
        cumulative_ok,
    }
}

/// `φ = Σ_{unmatched i} (d/(d−1))^{d(i)}` over the arrivals seen so far.
#[derive(Debug, Clone)]
pub struct PotentialTracker {
    q: Q,
    unmatched: Vec<bool>,
    degree: Vec<u32>,
    phi: Q,
}

impl PotentialTracker {
    pub fn new(n: usize, d: u32) -> Self {
        assert!(d >= 2, "potential needs d ≥ 2");
        PotentialTracker {
            q: rational::frac(d as i64, d as i64 - 1),
            unmatched: vec![true; n],
            degree: vec![0; n],
            phi: rational::int(n as i64),
        }
    }

    pub fn phi(&self) -> &Q {
        &self.phi
    }

    pub fn unmatched_count(&self) -> usize {
        self.unmatched.iter().filter(|u| **u).count()
    }

    pub fn degree(&self, adv: usize) -> u32 {
        self.degree[adv]
    }

    fn term(&self, adv: usize) -> Q {
        rational::pow(&self.q, self.degree[adv])
    }

    /// Applies one arrival (its neighbors and the matched advertiser, if
    /// any) and returns Δφ.
    pub fn potential_step(&mut self, neighbors: &[usize], matched: Option<usize>) -> Q {
        let before = self.phi.clone();
        for &i in neighbors {
            if self.unmatched[i] {
                self.phi -= self.term(i);
            }
            self.degree[i] += 1;
        }
        if let Some(m) = matched {
            self.unmatched[m] = false;
        }
        for &i in neighbors {
            if self.unmatched[i] {
                self.phi += self.term(i);
            }
        }
        &self.phi - before
    }

    /// `(d/(d−1))^k · |U_L| ≤ φ`, valid once every unmatched advertiser
    /// has degree at least k.
    pub fn final_bound_holds(&self, k: u32) -> bool {
        rational::pow(&self.q, k) * rational::int(self.unmatched_count() as i64) <= self.phi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum DigitProperty {
    /// At most k places.
    Places,
    /// At most k−1 non-null digits.
    NonNull,
    /// Every digit at most the owner's largest bid ratio.
    DigitSize,
}

/// Checks the three digit properties on one advertiser's `z^c`.
pub fn check_digit_lemma(zc: &DigitVector, max_ratio: &Q, k: u32) -> Vec<DigitProperty> {
    let mut bad = Vec::new();
    if zc.places() > k as usize {
        bad.push(DigitProperty::Places);
    }
    if zc.nonnull_count() > (k as usize).saturating_sub(1) {
        bad.push(DigitProperty::NonNull);
    }
    if zc.digits().iter().any(|b| b > max_ratio) {
        bad.push(DigitProperty::DigitSize);
    }
    bad
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DigitViolation {
    pub adv: usize,
    pub properties: Vec<DigitProperty>,
}

/// Digit properties for every advertiser of a general-bids state.
pub fn check_digit_lemma_state(
    duals: &DualState,
    instance: &Instance,
    k: u32,
) -> Vec<DigitViolation> {
    let ZcState::Digits(zc) = &duals.zc else {
        return Vec::new();
    };
    let ratios = max_ratios(instance);
    zc.iter()
        .enumerate()
        .filter_map(|(adv, v)| {
            let properties = check_digit_lemma(v, &ratios[adv], k);
            (!properties.is_empty()).then_some(DigitViolation { adv, properties })
        })
        .collect()
}

/// `max_j b_ij / B_i` per advertiser (zero when isolated).
pub fn max_ratios(instance: &Instance) -> Vec<Q> {
    instance
        .max_bids()
        .into_iter()
        .zip(instance.advertisers())
        .map(|(b, a)| b / &a.budget)
        .collect()
}

/// Checks one credit event against the bookkeeping it must satisfy:
/// overflow credits are covered in value and cost at most k digits per unit,
/// common-digit credits are exact, and a match at ratio β drops `z^c` by at
/// most β while `digit_drop + β ≤ kβ`.
pub fn check_credit_event(ev: &CreditEvent, k: u32) -> bool {
    let kq = rational::int(k as i64);
    match ev.kind {
        CreditKind::Overflow => {
            ev.zc_value_drop >= ev.z_increase && ev.digit_drop <= &kq * &ev.z_increase
        }
        CreditKind::Common => {
            ev.zc_value_drop == ev.z_increase && ev.digit_drop == &kq * &ev.z_increase
        }
        CreditKind::Match => {
            ev.zc_value_drop <= ev.z_increase
                && &ev.digit_drop + &ev.z_increase <= &kq * &ev.z_increase
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct AlmostFeasibleReport {
    pub failures: Vec<usize>,
    /// Outliers, which the check does not cover.
    pub skipped: Vec<usize>,
}

/// Pre-finalization lower bounds on `z_i` for general bids:
/// `z_i ≥ (Σ b_ij − k·max_j b_ij)/(k·B_i)` with the sum over edges at which
/// `i` was feasible, and `z_i ≥ 1 − max_j b_ij/B_i`.
pub fn check_almost_feasible(
    z: &[Q],
    instance: &Instance,
    k: u32,
    feasible_bid_sums: &[Q],
    outliers: &BTreeSet<usize>,
) -> AlmostFeasibleReport {
    let kq = rational::int(k as i64);
    let max_bids = instance.max_bids();
    let mut failures = Vec::new();
    let mut skipped = Vec::new();
    for a in instance.advertisers() {
        if outliers.contains(&a.id) {
            skipped.push(a.id);
            continue;
        }
        let mb = &max_bids[a.id];
        let first = (&feasible_bid_sums[a.id] - &kq * mb) / (&kq * &a.budget);
        let second = Q::one() - mb / &a.budget;
        if z[a.id] < first || z[a.id] < second {
            failures.push(a.id);
        }
    }
    AlmostFeasibleReport { failures, skipped }
}
