//! Closed-form guarantees, exact where they are rational, and the two
//! asymptotic curves in binary fixed point.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::Serialize;

use crate::algorithms::det_ratio;
use crate::rational::{self, Q};

/// Fractional bits of [`Real`].
const BITS: u32 = 192;

/// Real number held as `X / 2^BITS`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Real(BigInt);

impl Real {
    pub fn from_q(q: &Q) -> Real {
        Real((q.numer() << BITS) / q.denom())
    }

    fn one() -> Real {
        Real(BigInt::one() << BITS)
    }

    fn mul(&self, o: &Real) -> Real {
        Real((&self.0 * &o.0) >> BITS)
    }

    fn mul_q(&self, q: &Q) -> Real {
        Real(&self.0 * q.numer() / q.denom())
    }

    fn sub(&self, o: &Real) -> Real {
        Real(&self.0 - &o.0)
    }

    /// Nearest rational with denominator `2^BITS`.
    pub fn to_q(&self) -> Q {
        Q::new(self.0.clone(), BigInt::one() << BITS)
    }

    pub fn to_f64(&self) -> f64 {
        rational::to_f64(&self.to_q())
    }

    /// Decimal rendering to `places` digits, halves away from zero.
    pub fn round(&self, places: usize) -> String {
        let scale = BigInt::from(10u32).pow(places as u32);
        let scaled: BigInt = (self.0.abs() * &scale * 2 + (BigInt::one() << BITS)) >> (BITS + 1);
        let neg = self.0.is_negative() && !scaled.is_zero();
        let digits = scaled.to_string();
        let digits = format!("{digits:0>width$}", width = places + 1);
        let (int, frac) = digits.split_at(digits.len() - places);
        let sign = if neg { "-" } else { "" };
        if places == 0 {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    }

    /// `e^x` by halving until |x| < 1/2, a Taylor series, then squaring.
    pub fn exp(x: &Real) -> Real {
        let half = BigInt::one() << (BITS - 1);
        let mut s = 0u32;
        let mut r = x.0.clone();
        while r.abs() >= half {
            r >>= 1;
            s += 1;
        }
        let r = Real(r);
        let mut sum = Real::one();
        let mut term = Real::one();
        let mut n = 1u32;
        while !term.0.is_zero() {
            term = Real(term.mul(&r).0 / n);
            sum = Real(&sum.0 + &term.0);
            n += 1;
        }
        for _ in 0..s {
            sum = sum.mul(&sum);
        }
        sum
    }

    /// `ln y` for rational `y > 0`, via `2·atanh((y−1)/(y+1))`.
    pub fn ln(y: &Q) -> Real {
        assert!(y.is_positive(), "ln of a non-positive number");
        let t = Real::from_q(&((y - Q::one()) / (y + Q::one())));
        let t2 = t.mul(&t);
        let mut pow = t.clone();
        let mut sum = BigInt::zero();
        let mut n = 1u32;
        while !pow.0.is_zero() {
            sum += &pow.0 / n;
            pow = pow.mul(&t2);
            n += 2;
        }
        Real(sum * 2)
    }
}

impl fmt::Display for Real {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.round(f.precision().unwrap_or(12)))
    }
}

impl Serialize for Real {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.round(12))
    }
}

/// `(1−R)·k/(k+(d−1)(1−R))`; with `R = 0` this is `k/(k+d−1)`.
pub fn greedy_bound(k: u32, d: u32, r: &Q) -> Q {
    let kq = rational::int(k as i64);
    let keep = Q::one() - r;
    &keep * &kq / (&kq + rational::int(d as i64 - 1) * &keep)
}

/// `(1−R)·(1−(1−1/d)^k)`.
pub fn det_bound(k: u32, d: u32, r: &Q) -> Q {
    (Q::one() - r) * det_ratio(k, d)
}

/// `(1−R)(1−e^{−1/R})`, the `d/k = R` limit of [`det_bound`].
pub fn asymptotic_ours(r: &Q) -> Real {
    let keep = Q::one() - r;
    if r.is_zero() {
        return Real::one();
    }
    let e = Real::exp(&Real::from_q(&(-Q::one() / r)));
    Real::one().sub(&e).mul_q(&keep)
}

/// `(1−R)(1−(1+R)^{−1/R})`, the best bound known before for bids up to R.
pub fn asymptotic_sota(r: &Q) -> Real {
    let keep = Q::one() - r;
    if r.is_zero() {
        // 1 − 1/e
        return Real::one().sub(&Real::exp(&Real::from_q(&-Q::one())));
    }
    let exponent = Real(-(Real::ln(&(Q::one() + r)).0) * r.denom() / r.numer());
    Real::one().sub(&Real::exp(&exponent)).mul_q(&keep)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BoundRow {
    #[serde(with = "rational::serde_q")]
    pub r: Q,
    pub k: Option<u32>,
    pub d: Option<u32>,
    #[serde(with = "rational::serde_opt_q")]
    pub greedy_bound: Option<Q>,
    #[serde(with = "rational::serde_opt_q")]
    pub det_bound: Option<Q>,
    pub asymptotic_ours: Real,
    pub asymptotic_sota: Real,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("R = {0} is outside [0, 1)")]
pub struct BoundsError(String);

/// One row per `R` without (k,d), then one per `(k,d)` and `R`. `R = 0`
/// stands for bids with no size restriction beyond the budget.
pub fn bounds_table(rs: &[Q], kds: &[(u32, u32)]) -> Result<Vec<BoundRow>, BoundsError> {
    for r in rs {
        if r.is_negative() || *r >= Q::one() {
            return Err(BoundsError(rational::format(r)));
        }
    }
    let row = |r: &Q, kd: Option<(u32, u32)>| BoundRow {
        r: r.clone(),
        k: kd.map(|p| p.0),
        d: kd.map(|p| p.1),
        greedy_bound: kd.map(|(k, d)| greedy_bound(k, d, r)),
        det_bound: kd.map(|(k, d)| det_bound(k, d, r)),
        asymptotic_ours: asymptotic_ours(r),
        asymptotic_sota: asymptotic_sota(r),
    };
    let mut rows: Vec<BoundRow> = rs.iter().map(|r| row(r, None)).collect();
    let zero = [Q::zero()];
    let with_kd: &[Q] = if rs.is_empty() { &zero } else { rs };
    for &kd in kds {
        for r in with_kd {
            rows.push(row(r, Some(kd)));
        }
    }
    Ok(rows)
}

/// Tab-separated rendering of a bounds table.
pub fn render(rows: &[BoundRow]) -> String {
    let mut out = String::from("R\tk\td\tgreedy\tdet\tasymptotic_ours\tasymptotic_sota\n");
    let opt = |v: &Option<Q>| {
        v.as_ref()
            .map(|q| format!("{} ({:.6})", rational::format(q), rational::to_f64(q)))
            .unwrap_or_else(|| "-".into())
    };
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            rational::format(&r.r),
            r.k.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            r.d.map(|v| v.to_string()).unwrap_or_else(|| "-".into()),
            opt(&r.greedy_bound),
            opt(&r.det_bound),
            r.asymptotic_ours.round(6),
            r.asymptotic_sota.round(6),
        ));
    }
    out
}

/// `1 − e^{−k/d}`, the bound `det_ratio` strictly exceeds.
pub fn exp_lower(k: u32, d: u32) -> Real {
    Real::one().sub(&Real::exp(&Real::from_q(&rational::frac(-(k as i64), d as i64))))
}
