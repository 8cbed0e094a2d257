//! Trace certification: replays a run against its instance and checks the
//! allocation, the dual solution, the primal-dual ratio and, at the full
//! level, the per-algorithm lemmas.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use num_traits::{One, Zero};
use serde::Serialize;

use crate::duals::{
    audit_ratio, check_almost_feasible, check_credit_event, check_digit_lemma,
    check_dual_feasibility, max_ratios, DualState, PotentialTracker, ZcState,
};
use crate::instance::{validate_kd, Instance};
use crate::numeral::{DigitVector, NumeralBase};
use crate::rational::{self, Q};
use crate::trace::{Algo, RunTrace, ZcSnapshot};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Level {
    Off,
    #[default]
    Ratio,
    Full,
}

impl FromStr for Level {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "off" => Ok(Level::Off),
            "ratio" => Ok(Level::Ratio),
            "full" => Ok(Level::Full),
            _ => Err(format!("unknown verification level `{s}` (off|ratio|full)")),
        }
    }
}

impl fmt::Display for Level {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Level::Off => "off",
            Level::Ratio => "ratio",
            Level::Full => "full",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct CertReport {
    pub checks: Vec<Check>,
}

impl CertReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    fn push(&mut self, name: &'static str, failure: Option<String>, ok: impl Into<String>) {
        let passed = failure.is_none();
        self.checks.push(Check {
            name,
            passed,
            detail: failure.unwrap_or_else(|| ok.into()),
        });
    }

    pub fn render(&self) -> String {
        self.checks
            .iter()
            .map(|c| {
                format!(
                    "{} {}: {}\n",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                )
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CertifyError {
    #[error("trace does not match instance: {0}")]
    Mismatch(String),
}

fn snapshot_value(s: &ZcSnapshot, base: &Arc<NumeralBase>) -> Result<(Q, Option<DigitVector>), String> {
    match s {
        ZcSnapshot::Plain(q) => Ok((q.clone(), None)),
        ZcSnapshot::Digits(ds) => {
            let v = DigitVector::new(base.clone(), ds.iter().map(|r| r.0.clone()).collect())
                .map_err(|e| e.to_string())?;
            Ok((v.value(), Some(v)))
        }
    }
}

/// Certifies `trace` against `instance` (the realized instance for an
/// adaptive run). Structural mismatches are errors; everything else is a
/// check in the report.
pub fn certify(instance: &Instance, trace: &RunTrace, level: Level) -> Result<CertReport, CertifyError> {
    let n = instance.num_advertisers();
    if trace.arrivals.len() != instance.num_slots() {
        return Err(CertifyError::Mismatch(format!(
            "{} arrivals for {} slots",
            trace.arrivals.len(),
            instance.num_slots()
        )));
    }
    for a in &trace.arrivals {
        if a.slot != a.index {
            return Err(CertifyError::Mismatch(format!(
                "arrival {} names slot {}",
                a.index, a.slot
            )));
        }
        if let Some(i) = a.feasible.iter().chain(a.decision.iter()).find(|&&i| i >= n) {
            return Err(CertifyError::Mismatch(format!(
                "arrival {} names advertiser {i} of {n}",
                a.index
            )));
        }
    }
    let mut report = CertReport::default();
    if level == Level::Off {
        return Ok(report);
    }
    let (k, d) = (trace.header.k, trace.header.d);
    let budgets = instance.budgets();

    // allocation replay
    let mut spend = vec![Q::zero(); n];
    let mut feasible_sums = vec![Q::zero(); n];
    let mut alloc_fail = None;
    let mut primal = Q::zero();
    for a in &trace.arrivals {
        let slot = &instance.slots()[a.slot];
        let expected: Vec<usize> = slot
            .edges
            .iter()
            .filter(|e| &spend[e.adv] + &e.bid <= budgets[e.adv])
            .map(|e| e.adv)
            .collect();
        let mut expected_sorted = expected.clone();
        expected_sorted.sort();
        let fail = |msg: String| Some(format!("arrival {}: {msg}", a.index));
        let problem = if a.feasible != expected_sorted {
            fail(format!("feasible set {:?}, expected {:?}", a.feasible, expected_sorted))
        } else {
            match a.decision {
                Some(i) if !a.feasible.contains(&i) => fail(format!("advertiser {i} is not feasible")),
                Some(i) => {
                    let bid = slot.bid_of(i).expect("feasible advertisers have an edge");
                    if a.bid.as_ref() != Some(bid) || a.delta_p != *bid {
                        fail(format!("recorded bid/ΔP differ from the bid {}", rational::format(bid)))
                    } else {
                        None
                    }
                }
                None if !a.feasible.is_empty() => fail("slot skipped with a feasible neighbor".into()),
                None if !a.delta_p.is_zero() => fail("ΔP without a match".into()),
                None => None,
            }
        };
        if let Some(p) = problem {
            alloc_fail.get_or_insert(p);
        }
        for e in &slot.edges {
            if a.feasible.contains(&e.adv) {
                feasible_sums[e.adv] += &e.bid;
            }
        }
        if let Some(i) = a.decision {
            if let Some(b) = slot.bid_of(i) {
                spend[i] += b;
                primal += b;
            }
        }
    }
    report.push(
        "allocation",
        alloc_fail,
        format!("revenue {}", rational::format(&primal)),
    );

    if !trace.header.duals {
        report.push("duals", None, "not maintained by this algorithm; skipped");
        return Ok(report);
    }

    let base = NumeralBase::new(k, d).ok();
    let kd = validate_kd(instance, k, d);
    let ratios = max_ratios(instance);
    let equal_bids = instance.equal_bids();
    let mut z = vec![Q::zero(); n];
    let mut zc = vec![Q::zero(); n];
    let mut delta_fail = None;
    let mut z_cap_fail = None;
    let mut zc_cap_fail = None;
    let mut digit_fail = None;
    let mut credit_fail = None;
    let account = |i: usize, z: &[Q], zc: &[Q]| &budgets[i] * (&z[i] + &zc[i]);
    for a in &trace.arrivals {
        let touched: BTreeSet<usize> = a.diffs.iter().map(|df| df.adv).collect();
        let before = touched.iter().fold(Q::zero(), |acc, &i| acc + account(i, &z, &zc));
        for df in &a.diffs {
            z[df.adv] = df.z.clone();
            if df.z > Q::one() && trace.header.algo == Algo::Greedy {
                z_cap_fail.get_or_insert(format!("arrival {}: z_{} > 1", a.index, df.adv));
            }
            match (&df.zc, &base) {
                (Some(s), Some(base)) => match snapshot_value(s, base) {
                    Ok((v, digits)) => {
                        if let (Some(Some(b)), Algo::EqualBids) = (
                            equal_bids.as_ref().map(|eb| eb[df.adv].clone()),
                            trace.header.algo,
                        ) {
                            if v > b / &budgets[df.adv] {
                                zc_cap_fail.get_or_insert(format!(
                                    "arrival {}: z^c_{} exceeds its bid ratio",
                                    a.index, df.adv
                                ));
                            }
                        }
                        if let Some(dv) = digits {
                            let bad = check_digit_lemma(&dv, &ratios[df.adv], k);
                            if !bad.is_empty() {
                                digit_fail.get_or_insert(format!(
                                    "arrival {}: advertiser {} violates {:?} ({dv})",
                                    a.index, df.adv, bad
                                ));
                            }
                        }
                        zc[df.adv] = v;
                    }
                    Err(e) => {
                        delta_fail.get_or_insert(format!("arrival {}: {e}", a.index));
                    }
                },
                (Some(_), None) => {
                    delta_fail.get_or_insert("digit snapshot without a numeral base".into());
                }
                (None, _) => {}
            }
        }
        let after = touched.iter().fold(Q::zero(), |acc, &i| acc + account(i, &z, &zc));
        if after - before != a.delta_d {
            delta_fail.get_or_insert(format!("arrival {}: recorded ΔD disagrees with the diffs", a.index));
        }
        for ev in &a.events {
            if !check_credit_event(ev, k) {
                credit_fail.get_or_insert(format!(
                    "arrival {}: {:?} credit of advertiser {} is not covered",
                    a.index, ev.kind, ev.adv
                ));
            }
        }
    }
    let prefinal_z = z.clone();
    for df in &trace.finalization.diffs {
        z[df.adv] = df.z.clone();
    }
    let lp_cost = budgets.iter().zip(&z).fold(Q::zero(), |acc, (b, zi)| acc + b * zi);
    let cost_fail = if lp_cost != trace.finalization.dual_cost {
        Some(format!(
            "final dual cost {} recorded as {}",
            rational::format(&lp_cost),
            rational::format(&trace.finalization.dual_cost)
        ))
    } else if trace.dual_total() != lp_cost {
        Some("per-arrival ΔD plus finalization ΔD does not reach the dual cost".into())
    } else {
        None
    };
    report.push("dual-deltas", delta_fail, "every ΔD matches the recorded diffs");
    report.push("dual-cost", cost_fail, format!("D = {}", rational::format(&lp_cost)));

    let mut duals = DualState::new(n, ZcState::None);
    duals.z = z.clone();
    duals.y = vec![Q::zero(); instance.num_slots()];
    let violations = check_dual_feasibility(instance, &duals, &kd.outliers);
    report.push(
        "dual-feasibility",
        violations.first().map(|v| {
            format!(
                "{} violated edges, first slot {} advertiser {} ({} < {})",
                violations.len(),
                v.slot,
                v.adv,
                v.lhs,
                v.bid
            )
        }),
        if kd.outliers.is_empty() {
            "all edges covered".to_string()
        } else {
            format!("all edges covered outside {} outliers", kd.outliers.len())
        },
    );
    if kd.outliers.is_empty() {
        report.push(
            "weak-duality",
            (primal > lp_cost).then(|| "primal exceeds a feasible dual".to_string()),
            "P ≤ D",
        );
    }

    let bound = match trace.header.algo {
        Algo::Greedy => Some(rational::frac((k + d - 1) as i64, k as i64)),
        _ => trace.header.scaling_constant.as_ref().map(|c| Q::one() + c),
    };
    if let Some(bound) = bound {
        let audit = audit_ratio(trace, &bound);
        report.push(
            "ratio-audit",
            (!audit.passed).then(|| match audit.first_offending {
                Some(i) => format!("arrival {i}: ΔD > {}·ΔP", rational::format(&bound)),
                None => format!("cumulative D > {}·P", rational::format(&bound)),
            }),
            format!("ΔD ≤ {}·ΔP at every arrival", rational::format(&bound)),
        );
    }

    if level < Level::Full {
        return Ok(report);
    }
    match trace.header.algo {
        Algo::Greedy => report.push("z-at-most-one", z_cap_fail, "z_i ≤ 1 throughout"),
        Algo::HighDegree => {
            if instance.is_unweighted() {
                let mut pot = PotentialTracker::new(n, d);
                let mut fail = None;
                for a in &trace.arrivals {
                    let nbrs: Vec<usize> =
                        instance.slots()[a.slot].edges.iter().map(|e| e.adv).collect();
                    let dphi = pot.potential_step(&nbrs, a.decision);
                    if dphi > Q::zero() {
                        fail.get_or_insert(format!("arrival {}: Δφ = {}", a.index, rational::format(&dphi)));
                    }
                }
                report.push("potential", fail, "Δφ ≤ 0 at every arrival");
                if kd.degree_outliers.is_empty() {
                    report.push(
                        "potential-final",
                        (!pot.final_bound_holds(k)).then(|| "(d/(d−1))^k·|U| > φ".to_string()),
                        format!("{} unmatched within the potential bound", pot.unmatched_count()),
                    );
                }
            }
        }
        Algo::EqualBids => report.push("zc-at-most-bid", zc_cap_fail, "z^c_i ≤ b_i/B_i throughout"),
        Algo::GeneralBids => {
            report.push("digits", digit_fail, "digit properties hold after every arrival");
            report.push("credits", credit_fail, "every z increase is paid for");
            let af = check_almost_feasible(&prefinal_z, instance, k, &feasible_sums, &kd.outliers);
            report.push(
                "almost-feasible",
                (!af.failures.is_empty())
                    .then(|| format!("advertisers {:?} below the pre-finalization bound", af.failures)),
                "z_i ≥ 1 − max b_ij/B_i before finalization",
            );
        }
        Algo::Random | Algo::Ranking => {}
    }
    Ok(report)
}
