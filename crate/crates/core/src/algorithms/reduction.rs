//! Online split of an equal-bids instance into a vertex-weighted one.
//!
//! Advertiser `i` with bid `b_i` is served by copies of weight `b_i`. Each
//! copy takes `i`'s edges until it has k of them or is matched, and a fresh
//! copy opens while `i` still has budget. Which copy is matched depends on
//! the algorithm, so the split is computed alongside a high-degree pass.

use num_traits::{One, ToPrimitive, Zero};

use super::{AlgoError, AllocationResult, Params};
use crate::instance::{Edge, Instance, InstanceBuilder, InstanceMeta};
use crate::numeral::scaling_constant;
use crate::rational::{self, Q};

#[derive(Debug, Clone)]
pub struct Reduction {
    pub instance: Instance,
    /// Owning advertiser of every copy.
    pub copy_owner: Vec<usize>,
    /// Original slot of every reduced slot; `None` for padding slots.
    pub slot_origin: Vec<Option<usize>>,
}

impl Reduction {
    /// Maps a matching of the reduced instance back to advertiser charges,
    /// as `(original slot, advertiser, bid)`.
    pub fn map_allocation(&self, alloc: &AllocationResult) -> Vec<(usize, usize, Q)> {
        alloc
            .matches
            .iter()
            .filter_map(|m| {
                self.slot_origin[m.slot].map(|j| (j, self.copy_owner[m.adv], m.bid.0.clone()))
            })
            .collect()
    }
}

struct Copy {
    adv: usize,
    ordinal: usize,
    edges: Vec<usize>,
    z: Q,
    matched: bool,
}

pub fn split_copies_reduction(instance: &Instance, params: Params) -> Result<Reduction, AlgoError> {
    let bids = instance.equal_bids().ok_or_else(|| {
        AlgoError::Contract("split-copies needs one bid per advertiser".into())
    })?;
    let n = instance.num_advertisers();
    let mut capacity = vec![0u64; n];
    for (i, b) in bids.iter().enumerate() {
        if let Some(b) = b {
            let copies = instance.budget(i) / b;
            if !copies.is_integer() {
                return Err(AlgoError::Contract(format!(
                    "advertiser {i}: budget/bid {} is not integral",
                    rational::format(&copies)
                )));
            }
            capacity[i] = copies.to_integer().to_u64().unwrap_or(u64::MAX);
        }
    }
    let c = scaling_constant(params.k, params.d)?;
    let q = rational::frac(params.d as i64, params.d as i64 - 1);
    let step = &c / rational::int(params.d as i64 - 1);
    let k = params.k as usize;

    let mut copies: Vec<Copy> = Vec::new();
    let mut current: Vec<Option<usize>> = vec![None; n];
    let mut opened = vec![0usize; n];
    let mut matches = vec![0u64; n];
    let mut routed: Vec<Vec<usize>> = Vec::with_capacity(instance.num_slots());

    for slot in instance.slots() {
        let mut here = Vec::new();
        for e in &slot.edges {
            let i = e.adv;
            if matches[i] >= capacity[i] {
                continue;
            }
            let open = match current[i] {
                Some(cid) if !copies[cid].matched && copies[cid].edges.len() < k => cid,
                _ => {
                    copies.push(Copy {
                        adv: i,
                        ordinal: opened[i],
                        edges: Vec::new(),
                        z: Q::zero(),
                        matched: false,
                    });
                    opened[i] += 1;
                    current[i] = Some(copies.len() - 1);
                    copies.len() - 1
                }
            };
            here.push(open);
        }
        here.sort_by_key(|&cid| copies[cid].adv);
        let mut best: Option<(Q, usize, usize)> = None;
        for &cid in &here {
            let cp = &copies[cid];
            let w = bids[cp.adv].as_ref().expect("routed advertisers bid");
            let score = (&cp.z + &c) * w;
            let deg = cp.edges.len();
            let better = match &best {
                None => true,
                Some((s, d, _)) => score > *s || (score == *s && deg > *d),
            };
            if better {
                best = Some((score, deg, cid));
            }
        }
        let one = Q::one();
        for &cid in &here {
            let cp = &mut copies[cid];
            if Some(cid) == best.as_ref().map(|b| b.2) {
                cp.matched = true;
                cp.z = one.clone();
                matches[cp.adv] += 1;
            } else {
                cp.z = rational::min(&one, &(&cp.z * &q + &step));
            }
            cp.edges.push(slot.id);
        }
        routed.push(here);
    }

    // Never-matched copies short of k edges are dropped; ids follow
    // (advertiser, ordinal).
    let mut kept: Vec<usize> = (0..copies.len())
        .filter(|&cid| copies[cid].matched || copies[cid].edges.len() >= k)
        .collect();
    kept.sort_by_key(|&cid| (copies[cid].adv, copies[cid].ordinal));
    let mut new_id = vec![None; copies.len()];
    let mut b = InstanceBuilder::new();
    let mut copy_owner = Vec::with_capacity(kept.len());
    for &cid in &kept {
        let w = bids[copies[cid].adv].clone().expect("kept copies bid");
        new_id[cid] = Some(b.add_advertiser(w));
        copy_owner.push(copies[cid].adv);
    }
    let mut slot_origin = Vec::new();
    for (j, here) in routed.iter().enumerate() {
        let edges = here
            .iter()
            .filter_map(|&cid| {
                new_id[cid].map(|id| Edge {
                    adv: id,
                    bid: b.budget(id).clone(),
                })
            })
            .collect();
        b.add_slot(edges);
        slot_origin.push(Some(j));
    }
    // Matched copies with fewer than k edges get degree-one filler slots
    // after everything else; their copy is already spent when those arrive.
    for &cid in &kept {
        let id = new_id[cid].expect("kept");
        for _ in copies[cid].edges.len()..k {
            let bid = b.budget(id).clone();
            b.add_slot(vec![Edge { adv: id, bid }]);
            slot_origin.push(None);
        }
    }
    let meta = InstanceMeta {
        claimed_k: Some(params.k),
        claimed_d: Some(params.d),
        generator_tag: Some("split-copies".into()),
        ..InstanceMeta::default()
    };
    let instance = b
        .build(meta)
        .map_err(|e| AlgoError::Contract(format!("reduced instance invalid: {e}")))?;
    Ok(Reduction {
        instance,
        copy_owner,
        slot_origin,
    })
}
