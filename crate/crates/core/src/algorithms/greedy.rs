//! Highest bid wins; duals are fitted afterwards.

use num_traits::One;

use super::{argmax, AlgoError, Arrival, EngineState, Rule, TieBreak};
use crate::duals::{DualState, ZcState};
use crate::rational::{self, Q};
use crate::trace::CreditEvent;

pub(crate) struct Greedy {
    k: Q,
    tie: TieBreak,
    literal_budget: bool,
}

impl Greedy {
    pub fn new(k: u32, tie: TieBreak, literal_budget: bool) -> Self {
        Greedy {
            k: rational::int(k as i64),
            tie,
            literal_budget,
        }
    }
}

impl Rule for Greedy {
    fn initial_zc(&self, _n: usize) -> ZcState {
        ZcState::None
    }

    fn choose(&mut self, cx: &Arrival<'_>, _duals: &mut DualState) -> Result<usize, AlgoError> {
        let scores: Vec<Q> = cx.feasible.iter().map(|(_, b)| b.clone()).collect();
        let cands = argmax(&cx.feasible, &scores);
        self.tie
            .pick(cx.index, &cands, |a| cx.state.degree[a] as u64)
    }

    fn update(
        &mut self,
        cx: &Arrival<'_>,
        chosen: usize,
        duals: &mut DualState,
        _events: &mut Vec<CreditEvent>,
    ) -> Result<(), AlgoError> {
        let budgets = &cx.state.budgets;
        let one = Q::one();
        for (adv, bid) in &cx.feasible {
            let inc = if *adv == chosen {
                bid / &budgets[*adv]
            } else {
                let denom = if self.literal_budget {
                    &budgets[chosen]
                } else {
                    &budgets[*adv]
                };
                bid / (&self.k * denom)
            };
            duals.z[*adv] = rational::min(&one, &(&duals.z[*adv] + inc));
        }
        Ok(())
    }

    fn finalize(&mut self, st: &EngineState, duals: &mut DualState) {
        let Some(r) = &st.max_ratio else { return };
        for i in 0..st.budgets.len() {
            if &st.budgets[i] - &st.spend[i] < r * &st.budgets[i] {
                duals.z[i] = Q::one();
            }
        }
    }
}
