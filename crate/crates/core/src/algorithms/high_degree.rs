//! Vertex-weighted primal-dual rule: score `(z_i + C)·b_ij`.

use num_traits::One;

use super::{AlgoError, Arrival, EngineState, Params, Rule};
use crate::duals::{DualState, ZcState};
use crate::instance::AdSlot;
use crate::numeral::scaling_constant;
use crate::rational::{self, Q};
use crate::trace::CreditEvent;

pub(crate) struct HighDegree {
    c: Q,
    q: Q,
    step: Q,
}

impl HighDegree {
    pub fn new(p: Params) -> Result<Self, AlgoError> {
        let c = scaling_constant(p.k, p.d)?;
        let dm1 = rational::int(p.d as i64 - 1);
        Ok(HighDegree {
            step: &c / &dm1,
            q: rational::frac(p.d as i64, p.d as i64 - 1),
            c,
        })
    }

    pub fn c(&self) -> &Q {
        &self.c
    }
}

impl Rule for HighDegree {
    fn initial_zc(&self, _n: usize) -> ZcState {
        ZcState::None
    }

    fn check_slot(&mut self, slot: &AdSlot, st: &EngineState) -> Result<(), AlgoError> {
        match slot.edges.iter().find(|e| e.bid != st.budgets[e.adv]) {
            Some(e) => Err(AlgoError::Contract(format!(
                "high-degree needs vertex weights; slot {} bids {} to advertiser {} with budget {}",
                slot.id,
                rational::format(&e.bid),
                e.adv,
                rational::format(&st.budgets[e.adv])
            ))),
            None => Ok(()),
        }
    }

    /// Ties go to the larger current degree, then the lower index. With the
    /// degree tie-break the pick stays a highest-degree neighbor even after
    /// `z` saturates at one.
    fn choose(&mut self, cx: &Arrival<'_>, duals: &mut DualState) -> Result<usize, AlgoError> {
        let mut best: Option<(Q, u32, usize)> = None;
        for (adv, bid) in &cx.feasible {
            let score = (&duals.z[*adv] + &self.c) * bid;
            let deg = cx.state.degree[*adv];
            let better = match &best {
                None => true,
                Some((s, d, _)) => score > *s || (score == *s && deg > *d),
            };
            if better {
                best = Some((score, deg, *adv));
            }
        }
        Ok(best.expect("non-empty feasible set").2)
    }

    fn update(
        &mut self,
        cx: &Arrival<'_>,
        chosen: usize,
        duals: &mut DualState,
        _events: &mut Vec<CreditEvent>,
    ) -> Result<(), AlgoError> {
        let one = Q::one();
        for (adv, _) in &cx.feasible {
            duals.z[*adv] = if *adv == chosen {
                one.clone()
            } else {
                rational::min(&one, &(&duals.z[*adv] * &self.q + &self.step))
            };
        }
        Ok(())
    }
}
