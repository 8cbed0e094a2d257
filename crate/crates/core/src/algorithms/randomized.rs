//! RANDOM and RANKING. Neither keeps dual variables.

use num_traits::One;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{arrival_rng, AlgoError, Arrival, EngineState, Rule};
use crate::duals::{DualState, ZcState};
use crate::instance::AdSlot;

pub(crate) struct Random {
    seed: u64,
}

impl Random {
    pub fn new(seed: u64) -> Self {
        Random { seed }
    }
}

impl Rule for Random {
    fn initial_zc(&self, _n: usize) -> ZcState {
        ZcState::None
    }

    fn keeps_duals(&self) -> bool {
        false
    }

    fn choose(&mut self, cx: &Arrival<'_>, _duals: &mut DualState) -> Result<usize, AlgoError> {
        let mut rng = arrival_rng(self.seed, cx.index);
        Ok(cx.feasible[rng.random_range(0..cx.feasible.len())].0)
    }
}

pub(crate) struct Ranking {
    /// `rank[i] = σ(i)`.
    rank: Vec<usize>,
}

impl Ranking {
    pub fn new(n: usize, seed: u64) -> Self {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let mut rank = vec![0; n];
        for (pos, adv) in order.into_iter().enumerate() {
            rank[adv] = pos;
        }
        Ranking { rank }
    }

    #[cfg(test)]
    pub fn rank(&self) -> &[usize] {
        &self.rank
    }
}

impl Rule for Ranking {
    fn initial_zc(&self, _n: usize) -> ZcState {
        ZcState::None
    }

    fn keeps_duals(&self) -> bool {
        false
    }

    fn check_slot(&mut self, slot: &AdSlot, st: &EngineState) -> Result<(), AlgoError> {
        match slot
            .edges
            .iter()
            .find(|e| !e.bid.is_one() || !st.budgets[e.adv].is_one())
        {
            Some(e) => Err(AlgoError::Contract(format!(
                "ranking needs an unweighted instance; slot {} edge to advertiser {} is weighted",
                slot.id, e.adv
            ))),
            None => Ok(()),
        }
    }

    fn choose(&mut self, cx: &Arrival<'_>, _duals: &mut DualState) -> Result<usize, AlgoError> {
        Ok(cx
            .feasible
            .iter()
            .map(|(a, _)| *a)
            .min_by_key(|a| self.rank[*a])
            .expect("non-empty feasible set"))
    }
}
