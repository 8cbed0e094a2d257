//! Equal-bids primal-dual rule with per-copy accumulators.

use num_traits::Zero;

use super::{argmax, AlgoError, Arrival, EngineState, Params, Rule, TieBreak};
use crate::duals::{DualState, ZcState};
use crate::instance::AdSlot;
use crate::numeral::scaling_constant;
use crate::rational::{self, Q};
use crate::trace::CreditEvent;

pub(crate) struct EqualBids {
    c: Q,
    q: Q,
    dm1: Q,
    tie: TieBreak,
    bids: Vec<Option<Q>>,
    /// Edges received by each advertiser's current copy.
    copy_degree: Vec<u32>,
}

impl EqualBids {
    pub fn new(p: Params, tie: TieBreak) -> Result<Self, AlgoError> {
        Ok(EqualBids {
            c: scaling_constant(p.k, p.d)?,
            q: rational::frac(p.d as i64, p.d as i64 - 1),
            dm1: rational::int(p.d as i64 - 1),
            tie,
            bids: Vec::new(),
            copy_degree: Vec::new(),
        })
    }

    pub fn c(&self) -> &Q {
        &self.c
    }
}

impl Rule for EqualBids {
    fn initial_zc(&self, n: usize) -> ZcState {
        ZcState::Plain(vec![Q::zero(); n])
    }

    fn check_slot(&mut self, slot: &AdSlot, st: &EngineState) -> Result<(), AlgoError> {
        if self.bids.len() < st.budgets.len() {
            self.bids.resize(st.budgets.len(), None);
            self.copy_degree.resize(st.budgets.len(), 0);
        }
        for e in &slot.edges {
            match &self.bids[e.adv] {
                Some(b) if *b != e.bid => {
                    return Err(AlgoError::Contract(format!(
                        "equal-bids needs one bid per advertiser; advertiser {} bids {} and {}",
                        e.adv,
                        rational::format(b),
                        rational::format(&e.bid)
                    )))
                }
                Some(_) => {}
                None => self.bids[e.adv] = Some(e.bid.clone()),
            }
        }
        Ok(())
    }

    fn choose(&mut self, cx: &Arrival<'_>, duals: &mut DualState) -> Result<usize, AlgoError> {
        let ZcState::Plain(zc) = &duals.zc else {
            unreachable!("equal-bids keeps plain accumulators")
        };
        let scores: Vec<Q> = cx
            .feasible
            .iter()
            .map(|(a, b)| &zc[*a] * &cx.state.budgets[*a] + &self.c * b)
            .collect();
        let cands = argmax(&cx.feasible, &scores);
        self.tie
            .pick(cx.index, &cands, |a| self.copy_degree[a] as u64)
    }

    fn update(
        &mut self,
        cx: &Arrival<'_>,
        chosen: usize,
        duals: &mut DualState,
        _events: &mut Vec<CreditEvent>,
    ) -> Result<(), AlgoError> {
        let ZcState::Plain(zc) = &mut duals.zc else {
            unreachable!("equal-bids keeps plain accumulators")
        };
        let budgets = &cx.state.budgets;
        for (adv, bid) in &cx.feasible {
            let full = bid / &budgets[*adv];
            if *adv == chosen {
                zc[*adv] = full;
            } else {
                let grown = &zc[*adv] * &self.q + &self.c * &full / &self.dm1;
                zc[*adv] = rational::min(&full, &grown);
                self.copy_degree[*adv] += 1;
            }
        }
        for e in &cx.slot.edges {
            let full = &e.bid / &budgets[e.adv];
            if !zc[e.adv].is_zero() && zc[e.adv] == full {
                let v = std::mem::replace(&mut zc[e.adv], Q::zero());
                duals.z[e.adv] += v;
                self.copy_degree[e.adv] = 0;
            }
        }
        Ok(())
    }
}
