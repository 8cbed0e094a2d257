//! General-bids primal-dual rule on base-d/(d−1) digit vectors.

use std::sync::Arc;

use num_traits::{One, Zero};

use super::{argmax, AlgoError, Arrival, EngineState, Params, Rule, TieBreak};
use crate::duals::{DualState, ZcState};
use crate::numeral::{DigitVector, NumeralBase};
use crate::rational::{self, Q};
use crate::trace::{CreditEvent, CreditKind};

pub(crate) struct GeneralBids {
    base: Arc<NumeralBase>,
    k: usize,
    tie: TieBreak,
}

impl GeneralBids {
    pub fn new(p: Params, tie: TieBreak) -> Result<Self, AlgoError> {
        Ok(GeneralBids {
            base: NumeralBase::new(p.k, p.d)?,
            k: p.k as usize,
            tie,
        })
    }

    pub fn c(&self) -> &Q {
        self.base.c()
    }
}

fn digits_mut(duals: &mut DualState) -> &mut Vec<DigitVector> {
    match &mut duals.zc {
        ZcState::Digits(v) => v,
        _ => unreachable!("general-bids keeps digit accumulators"),
    }
}

impl Rule for GeneralBids {
    fn initial_zc(&self, n: usize) -> ZcState {
        ZcState::Digits(vec![DigitVector::zeros(self.base.clone(), self.k); n])
    }

    /// Splits off `z^f` for every feasible neighbor first, then scores
    /// `value(z^f)·B_i + C·b_ij`.
    fn choose(&mut self, cx: &Arrival<'_>, duals: &mut DualState) -> Result<usize, AlgoError> {
        let budgets = &cx.state.budgets;
        let mut scores = Vec::with_capacity(cx.feasible.len());
        for (adv, bid) in &cx.feasible {
            let cap = bid / &budgets[*adv];
            let zc = &mut digits_mut(duals)[*adv];
            let zf = zc.truncate_fraction(&cap);
            *zc = zc.place_sub(&zf)?;
            scores.push(zf.value() * &budgets[*adv] + self.base.c() * bid);
            duals.zf[*adv] = Some(zf);
        }
        let cands = argmax(&cx.feasible, &scores);
        self.tie
            .pick(cx.index, &cands, |a| cx.state.degree[a] as u64)
    }

    fn update(
        &mut self,
        cx: &Arrival<'_>,
        chosen: usize,
        duals: &mut DualState,
        events: &mut Vec<CreditEvent>,
    ) -> Result<(), AlgoError> {
        let budgets = &cx.state.budgets;
        let kq = rational::int(self.k as i64);
        for (adv, bid) in &cx.feasible {
            let adv = *adv;
            let ratio = bid / &budgets[adv];
            let zf = duals.zf[adv].take().expect("fraction computed in choose");
            if adv == chosen {
                duals.z[adv] += &ratio;
                events.push(CreditEvent {
                    adv,
                    kind: CreditKind::Match,
                    z_increase: ratio,
                    zc_value_drop: zf.value(),
                    digit_drop: zf.digit_sum(),
                });
                continue;
            }
            let zf = zf.shift_append(ratio)?;
            let zc = &mut digits_mut(duals)[adv];
            let mut sum = zc.place_add(&zf)?;
            if !sum.digit(self.k).is_zero() {
                let before = sum.value();
                let (top, rest) = sum.pop_overflow()?;
                let inc = &top / &kq;
                events.push(CreditEvent {
                    adv,
                    kind: CreditKind::Overflow,
                    z_increase: inc.clone(),
                    zc_value_drop: before - rest.value(),
                    digit_drop: top,
                });
                duals.z[adv] += inc;
                sum = rest;
            } else {
                sum = sum.drop_high_places(self.k);
            }
            if sum.nonnull_count() == self.k {
                let before = sum.value();
                let before_digits = sum.digit_sum();
                let (b, rest) = sum.extract_common()?;
                events.push(CreditEvent {
                    adv,
                    kind: CreditKind::Common,
                    z_increase: b.clone(),
                    zc_value_drop: before - rest.value(),
                    digit_drop: before_digits - rest.digit_sum(),
                });
                duals.z[adv] += b;
                sum = rest;
            }
            digits_mut(duals)[adv] = sum;
        }
        Ok(())
    }

    /// Raises every `z_i` to at least one; never lowers.
    fn finalize(&mut self, _st: &EngineState, duals: &mut DualState) {
        let one = Q::one();
        for z in duals.z.iter_mut() {
            if *z < one {
                *z = one.clone();
            }
        }
    }
}
