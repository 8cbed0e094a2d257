//! Offline optima at desk scale: maximum matchings, exhaustive allocation
//! search, Hall's condition and combinatorial upper bounds.

use std::collections::BTreeSet;

use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::instance::Instance;
use crate::par::{self, Execution};
use crate::rational::{self, Q};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OptKind {
    Exact,
    UpperBound,
    Construction,
}

impl OptKind {
    pub fn name(self) -> &'static str {
        match self {
            OptKind::Exact => "exact",
            OptKind::UpperBound => "upper-bound",
            OptKind::Construction => "construction",
        }
    }
}

/// `(slot, advertiser)` pairs of an integral allocation.
pub type Witness = Vec<(usize, usize)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OptCertificate {
    pub value: Q,
    pub kind: OptKind,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("{what} has size {size}, over the cap of {cap}; use opt_upper_bound instead")]
    TooLarge {
        what: &'static str,
        size: usize,
        cap: usize,
    },
    #[error("invalid witness: {0}")]
    InvalidWitness(String),
}

pub const DEFAULT_SLOT_CAP: usize = 12;
pub const DEFAULT_HALL_CAP: usize = 20;

const NIL: usize = usize::MAX;

/// Maximum bipartite matching; `adj[u]` lists right vertices of left `u`.
/// Returns the partner of every left vertex.
pub fn hopcroft_karp(adj: &[Vec<usize>], n_right: usize) -> Vec<Option<usize>> {
    let n_left = adj.len();
    let mut pair_u = vec![NIL; n_left];
    let mut pair_v = vec![NIL; n_right];
    let mut dist = vec![usize::MAX; n_left];
    let mut it = vec![0usize; n_left];
    loop {
        // layered BFS from free left vertices
        let mut queue = Vec::new();
        for u in 0..n_left {
            if pair_u[u] == NIL {
                dist[u] = 0;
                queue.push(u);
            } else {
                dist[u] = usize::MAX;
            }
        }
        let mut found = false;
        let mut head = 0;
        while head < queue.len() {
            let u = queue[head];
            head += 1;
            for &v in &adj[u] {
                let w = pair_v[v];
                if w == NIL {
                    found = true;
                } else if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    queue.push(w);
                }
            }
        }
        if !found {
            break;
        }
        it.iter_mut().for_each(|x| *x = 0);
        for root in 0..n_left {
            if pair_u[root] != NIL {
                continue;
            }
            let mut stack = vec![root];
            let mut via: Vec<usize> = Vec::new();
            while let Some(&u) = stack.last() {
                if it[u] == adj[u].len() {
                    dist[u] = usize::MAX;
                    stack.pop();
                    via.pop();
                    continue;
                }
                let v = adj[u][it[u]];
                it[u] += 1;
                let w = pair_v[v];
                if w == NIL {
                    let mut v_cur = v;
                    for l in (0..stack.len()).rev() {
                        let u_l = stack[l];
                        pair_u[u_l] = v_cur;
                        pair_v[v_cur] = u_l;
                        if l > 0 {
                            v_cur = via[l - 1];
                        }
                    }
                    break;
                } else if dist[w] != usize::MAX && dist[w] == dist[u] + 1 {
                    stack.push(w);
                    via.push(v);
                }
            }
        }
    }
    pair_u
        .into_iter()
        .map(|v| (v != NIL).then_some(v))
        .collect()
}

/// Maximum matching on the unweighted view (every edge worth one, every
/// advertiser matchable once).
pub fn max_matching(instance: &Instance) -> OptCertificate {
    let adj = instance.adjacency();
    let pairs = hopcroft_karp(&adj, instance.num_slots());
    let mut witness: Witness = pairs
        .iter()
        .enumerate()
        .filter_map(|(adv, s)| s.map(|slot| (slot, adv)))
        .collect();
    witness.sort();
    OptCertificate {
        value: rational::int(witness.len() as i64),
        kind: OptKind::Exact,
        witness: Some(witness),
    }
}

/// Degree-constrained matching: advertiser `i` may take up to `cap[i]` of
/// the slots in `allowed`. Solved by replicating advertisers.
pub fn b_matching(instance: &Instance, cap: &[usize], allowed: &dyn Fn(usize) -> bool) -> Witness {
    let adj = instance.adjacency();
    let mut rep_adj = Vec::new();
    let mut owner = Vec::new();
    for (i, slots) in adj.iter().enumerate() {
        let filtered: Vec<usize> = slots.iter().copied().filter(|&s| allowed(s)).collect();
        for _ in 0..cap[i] {
            rep_adj.push(filtered.clone());
            owner.push(i);
        }
    }
    let pairs = hopcroft_karp(&rep_adj, instance.num_slots());
    let mut w: Witness = pairs
        .iter()
        .enumerate()
        .filter_map(|(r, s)| s.map(|slot| (slot, owner[r])))
        .collect();
    w.sort();
    w
}

/// Checks budgets and slot uniqueness; returns the witness value.
pub fn verify_witness(instance: &Instance, witness: &[(usize, usize)]) -> Result<Q, OracleError> {
    let mut used = BTreeSet::new();
    let mut spend = vec![Q::zero(); instance.num_advertisers()];
    let mut total = Q::zero();
    for &(slot, adv) in witness {
        if !used.insert(slot) {
            return Err(OracleError::InvalidWitness(format!("slot {slot} used twice")));
        }
        let s = instance
            .slots()
            .get(slot)
            .ok_or_else(|| OracleError::InvalidWitness(format!("no slot {slot}")))?;
        let bid = s
            .bid_of(adv)
            .ok_or_else(|| OracleError::InvalidWitness(format!("slot {slot} has no edge to {adv}")))?;
        spend[adv] += bid;
        total += bid;
    }
    for a in instance.advertisers() {
        if spend[a.id] > a.budget {
            return Err(OracleError::InvalidWitness(format!(
                "advertiser {} over budget",
                a.id
            )));
        }
    }
    Ok(total)
}

/// Exhaustive search over per-slot choices (an advertiser or nobody).
pub fn brute_force_allocation(
    instance: &Instance,
    cap: usize,
    exec: Execution,
) -> Result<OptCertificate, OracleError> {
    let m = instance.num_slots();
    if m > cap {
        return Err(OracleError::TooLarge {
            what: "slot count",
            size: m,
            cap,
        });
    }
    let slots: Vec<Vec<(usize, Q)>> = instance
        .slots()
        .iter()
        .map(|s| s.edges.iter().map(|e| (e.adv, e.bid.clone())).collect())
        .collect();
    let mut suffix = vec![Q::zero(); m + 1];
    for t in (0..m).rev() {
        let best = slots[t].iter().map(|(_, b)| b).max().cloned().unwrap_or_else(Q::zero);
        suffix[t] = &suffix[t + 1] + best;
    }
    let budgets = instance.budgets();
    let search = Search {
        slots: &slots,
        suffix: &suffix,
    };

    let best = if m == 0 {
        (Q::zero(), Vec::new())
    } else {
        // Partition on the first slot's choice.
        let mut first: Vec<Option<usize>> = vec![None];
        first.extend(slots[0].iter().map(|(a, _)| Some(*a)));
        let parts = par::map_slice(exec, &first, |choice| {
            let mut rem = budgets.clone();
            let mut path = vec![None; m];
            let mut cur = Q::zero();
            if let Some(a) = choice {
                let bid = &slots[0].iter().find(|(x, _)| x == a).unwrap().1;
                if rem[*a] < *bid {
                    return None;
                }
                rem[*a] -= bid;
                cur += bid;
                path[0] = Some(*a);
            }
            let mut best = (Q::from_integer((-1).into()), Vec::new());
            search.go(1, &mut rem, &mut cur, &mut path, &mut best);
            Some(best)
        });
        parts
            .into_iter()
            .flatten()
            .fold((Q::from_integer((-1).into()), Vec::new()), |acc, p| {
                if p.0 > acc.0 {
                    p
                } else {
                    acc
                }
            })
    };
    let witness: Witness = best
        .1
        .iter()
        .enumerate()
        .filter_map(|(slot, a): (usize, &Option<usize>)| a.map(|adv| (slot, adv)))
        .collect();
    Ok(OptCertificate {
        value: best.0.max(Q::zero()),
        kind: OptKind::Exact,
        witness: Some(witness),
    })
}

struct Search<'a> {
    slots: &'a [Vec<(usize, Q)>],
    suffix: &'a [Q],
}

impl Search<'_> {
    fn go(
        &self,
        t: usize,
        rem: &mut [Q],
        cur: &mut Q,
        path: &mut Vec<Option<usize>>,
        best: &mut (Q, Vec<Option<usize>>),
    ) {
        if &*cur + &self.suffix[t] <= best.0 {
            return;
        }
        if t == self.slots.len() {
            *best = (cur.clone(), path.clone());
            return;
        }
        for (a, bid) in &self.slots[t] {
            if rem[*a] >= *bid {
                rem[*a] -= bid;
                *cur += bid;
                path[t] = Some(*a);
                self.go(t + 1, rem, cur, path, best);
                path[t] = None;
                *cur -= bid;
                rem[*a] += bid;
            }
        }
        self.go(t + 1, rem, cur, path, best);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HallOutcome {
    pub passed: bool,
    /// Smallest advertiser set with fewer slot neighbors than members.
    pub violating: Option<Vec<usize>>,
}

/// Hall's condition on the unweighted view, by subset enumeration in order
/// of increasing size.
pub fn hall_check(instance: &Instance, cap: usize) -> Result<HallOutcome, OracleError> {
    let n = instance.num_advertisers();
    if n > cap {
        return Err(OracleError::TooLarge {
            what: "advertiser count",
            size: n,
            cap,
        });
    }
    let words = instance.num_slots().div_ceil(64).max(1);
    let mut nbr = vec![vec![0u64; words]; n];
    for s in instance.slots() {
        for e in &s.edges {
            nbr[e.adv][s.id / 64] |= 1u64 << (s.id % 64);
        }
    }
    let mut union = vec![0u64; words];
    for size in 1..=n {
        // Gosper's hack over n-bit masks with `size` bits set.
        let mut mask: u64 = (1u64 << size) - 1;
        let limit = 1u64 << n;
        while mask < limit {
            union.iter_mut().for_each(|w| *w = 0);
            let mut bits = mask;
            while bits != 0 {
                let i = bits.trailing_zeros() as usize;
                for (u, w) in union.iter_mut().zip(&nbr[i]) {
                    *u |= w;
                }
                bits &= bits - 1;
            }
            let gamma: u32 = union.iter().map(|w| w.count_ones()).sum();
            if (gamma as usize) < size {
                let set = (0..n).filter(|i| mask >> i & 1 == 1).collect();
                return Ok(HallOutcome {
                    passed: false,
                    violating: Some(set),
                });
            }
            let c = mask & mask.wrapping_neg();
            let r = mask + c;
            mask = (((r ^ mask) >> 2) / c) | r;
        }
    }
    Ok(HallOutcome {
        passed: true,
        violating: None,
    })
}

/// `min(Σ_i min(B_i, Σ_j b_ij), Σ_j max_i b_ij)`.
pub fn opt_upper_bound(instance: &Instance) -> OptCertificate {
    let sums = instance.bid_sums();
    let by_adv = instance
        .advertisers()
        .iter()
        .fold(Q::zero(), |acc, a| acc + rational::min(&a.budget, &sums[a.id]));
    let by_slot = instance.slots().iter().fold(Q::zero(), |acc, s| {
        acc + s.edges.iter().map(|e| &e.bid).max().cloned().unwrap_or_else(Q::zero)
    });
    OptCertificate {
        value: rational::min(&by_adv, &by_slot),
        kind: OptKind::UpperBound,
        witness: None,
    }
}

/// Best certificate available without trusting anything unverified: a
/// matching for unweighted instances, brute force within the slot cap, an
/// upper bound that some witness meets, the generator's claim, and finally
/// the combinatorial upper bound.
pub fn best_certificate(instance: &Instance, exec: Execution) -> OptCertificate {
    if instance.is_unweighted() {
        return max_matching(instance);
    }
    if let Ok(c) = brute_force_allocation(instance, DEFAULT_SLOT_CAP, exec) {
        return c;
    }
    let ub = opt_upper_bound(instance);
    match (&instance.meta().known_opt, instance.meta().opt_kind) {
        (Some(v), Some(OptKind::Exact)) => OptCertificate {
            value: v.clone(),
            kind: OptKind::Exact,
            witness: None,
        },
        (Some(v), _) if *v == ub.value => OptCertificate {
            value: v.clone(),
            kind: OptKind::Exact,
            witness: None,
        },
        (Some(v), _) => OptCertificate {
            value: v.clone(),
            kind: OptKind::Construction,
            witness: None,
        },
        (None, _) => ub,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{Edge, InstanceBuilder, InstanceMeta};
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn graph(n_l: usize, slots: &[&[usize]]) -> Instance {
        let mut b = InstanceBuilder::new();
        b.add_advertisers(n_l, &int(1));
        for s in slots {
            b.add_slot(s.iter().map(|&adv| Edge { adv, bid: int(1) }).collect());
        }
        b.build(InstanceMeta::default()).unwrap()
    }

    #[test]
    fn permutation_graph() {
        let inst = graph(4, &[&[2], &[0], &[3], &[1]]);
        let c = max_matching(&inst);
        assert_eq!(c.value, int(4));
        assert_eq!(verify_witness(&inst, c.witness.as_ref().unwrap()).unwrap(), int(4));
    }

    #[test]
    fn folklore_instance() {
        let inst = graph(2, &[&[0, 1], &[0]]);
        let c = brute_force_allocation(&inst, 12, Execution::Sequential).unwrap();
        assert_eq!(c.value, int(2));
        assert_eq!(c.witness, Some(vec![(0, 1), (1, 0)]));
    }

    #[test]
    fn single_slot_two_bids() {
        let mut b = InstanceBuilder::new();
        b.add_advertisers(2, &int(2));
        b.add_slot(vec![Edge { adv: 0, bid: int(1) }, Edge { adv: 1, bid: int(2) }]);
        let inst = b.build(InstanceMeta::default()).unwrap();
        assert_eq!(brute_force_allocation(&inst, 12, Execution::Parallel).unwrap().value, int(2));
        assert_eq!(opt_upper_bound(&inst).value, int(2));
    }

    #[test]
    fn over_cap_is_an_error() {
        let slots: Vec<&[usize]> = vec![&[0]; 13];
        let inst = graph(1, &slots);
        assert!(matches!(
            brute_force_allocation(&inst, 12, Execution::Sequential),
            Err(OracleError::TooLarge { .. })
        ));
        assert!(matches!(hall_check(&graph(21, &[]), 20), Err(OracleError::TooLarge { .. })));
    }

    #[test]
    fn hall_shared_slot() {
        let inst = graph(2, &[&[0, 1]]);
        let h = hall_check(&inst, 20).unwrap();
        assert!(!h.passed);
        assert_eq!(h.violating, Some(vec![0, 1]));
    }

    #[test]
    fn upper_bound_exhaustible_budgets() {
        let mut b = InstanceBuilder::new();
        b.add_advertisers(2, &int(1));
        for adv in [0, 0, 1, 1] {
            b.add_slot(vec![Edge { adv, bid: frac(1, 2) }]);
        }
        let inst = b.build(InstanceMeta::default()).unwrap();
        assert_eq!(opt_upper_bound(&inst).value, int(2));
    }

    /// Independent oracle: the best matching over all per-slot choices.
    fn enumerate_matching(n_l: usize, slots: &[Vec<usize>]) -> usize {
        fn go(t: usize, slots: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if t == slots.len() {
                return 0;
            }
            let mut best = go(t + 1, slots, used);
            for &a in &slots[t] {
                if !used[a] {
                    used[a] = true;
                    best = best.max(1 + go(t + 1, slots, used));
                    used[a] = false;
                }
            }
            best
        }
        go(0, slots, &mut vec![false; n_l])
    }

    fn small_graph() -> impl Strategy<Value = (usize, Vec<Vec<usize>>)> {
        (1usize..7).prop_flat_map(|n_l| {
            let slot = prop::collection::btree_set(0..n_l, 0..=3.min(n_l))
                .prop_map(|s| s.into_iter().collect::<Vec<_>>());
            (Just(n_l), prop::collection::vec(slot, 0..7))
        })
    }

    proptest! {
        #[test]
        fn matching_equals_enumeration((n_l, slots) in small_graph()) {
            let refs: Vec<&[usize]> = slots.iter().map(|s| s.as_slice()).collect();
            let inst = graph(n_l, &refs);
            let c = max_matching(&inst);
            prop_assert_eq!(c.value.clone(), int(enumerate_matching(n_l, &slots) as i64));
            prop_assert_eq!(verify_witness(&inst, c.witness.as_ref().unwrap()).unwrap(), c.value.clone());
            let bf = brute_force_allocation(&inst, 12, Execution::Sequential).unwrap();
            prop_assert_eq!(bf.value, c.value);
        }

        #[test]
        fn hall_iff_saturating((n_l, slots) in small_graph()) {
            let refs: Vec<&[usize]> = slots.iter().map(|s| s.as_slice()).collect();
            let inst = graph(n_l, &refs);
            let saturates = max_matching(&inst).value == int(n_l as i64);
            prop_assert_eq!(hall_check(&inst, 20).unwrap().passed, saturates);
        }

        #[test]
        fn upper_bound_is_sound(
            n_l in 1usize..4,
            raw in prop::collection::vec(prop::collection::vec((0usize..4, 1i64..4), 0..3), 0..7),
        ) {
            let mut b = InstanceBuilder::new();
            for i in 0..n_l {
                b.add_advertiser(int(i as i64 % 3 + 2));
            }
            for s in &raw {
                let mut seen = BTreeSet::new();
                let edges = s
                    .iter()
                    .filter(|(a, _)| *a < n_l && seen.insert(*a))
                    .map(|&(adv, q)| Edge { adv, bid: frac(q, 2) })
                    .collect();
                b.add_slot(edges);
            }
            let inst = b.build(InstanceMeta::default()).unwrap();
            let seq = brute_force_allocation(&inst, 12, Execution::Sequential).unwrap();
            let par = brute_force_allocation(&inst, 12, Execution::Parallel).unwrap();
            prop_assert_eq!(&seq.value, &par.value);
            prop_assert_eq!(verify_witness(&inst, seq.witness.as_ref().unwrap()).unwrap(), seq.value.clone());
            prop_assert!(opt_upper_bound(&inst).value >= seq.value);
        }
    }
}
