//! Numbers in base d/(d−1) with place-wise, carry-free arithmetic.
//!
//! A vector `[b_t, …, b_1, b_0]` denotes `C/(d−1) · Σ_r b_r·(d/(d−1))^r`.
//! Digits hold raw bid-to-budget ratios; the `C/(d−1)` factor lives in the
//! shared [`NumeralBase`].

use std::fmt;
use std::sync::Arc;

use num_traits::{One, Signed, Zero};

use crate::rational::{self, Q};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NumeralError {
    #[error("base d/(d-1) is undefined for d = {0}")]
    BaseUndefined(u32),
    #[error("k must be at least 1")]
    ZeroK,
    #[error("place-wise subtraction underflows at place {place}")]
    Underflow { place: usize },
    #[error("no overflow digit: vector has {places} places, needs more than {k}")]
    NoOverflow { places: usize, k: u32 },
    #[error("overflow digit at place {k} is zero")]
    ZeroOverflowDigit { k: u32 },
    #[error("expected exactly {expected} places, found {found}")]
    WrongLength { expected: usize, found: usize },
    #[error("digit at place {place} is null")]
    NullDigit { place: usize },
    #[error("negative digit {0}")]
    NegativeDigit(String),
    #[error("operands use different bases")]
    BaseMismatch,
}

/// `C = 1/((d/(d−1))^k − 1)`.
pub fn scaling_constant(k: u32, d: u32) -> Result<Q, NumeralError> {
    if d < 2 {
        return Err(NumeralError::BaseUndefined(d));
    }
    if k == 0 {
        return Err(NumeralError::ZeroK);
    }
    let q = rational::frac(d as i64, d as i64 - 1);
    Ok((rational::pow(&q, k) - Q::one()).recip())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NumeralBase {
    d: u32,
    k: u32,
    c: Q,
    factor: Q,
    q: Q,
    powers: Vec<Q>,
}

impl NumeralBase {
    /// Base for the algorithm's scaling constant.
    pub fn new(k: u32, d: u32) -> Result<Arc<Self>, NumeralError> {
        let c = scaling_constant(k, d)?;
        Self::with_constant(k, d, c)
    }

    pub fn with_constant(k: u32, d: u32, c: Q) -> Result<Arc<Self>, NumeralError> {
        if d < 2 {
            return Err(NumeralError::BaseUndefined(d));
        }
        if k == 0 {
            return Err(NumeralError::ZeroK);
        }
        let q = rational::frac(d as i64, d as i64 - 1);
        let mut powers = Vec::with_capacity(k as usize + 2);
        let mut p = Q::one();
        for _ in 0..k + 2 {
            powers.push(p.clone());
            p *= &q;
        }
        let factor = &c / rational::int(d as i64 - 1);
        Ok(Arc::new(NumeralBase {
            d,
            k,
            c,
            factor,
            q,
            powers,
        }))
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn c(&self) -> &Q {
        &self.c
    }

    /// `(d/(d−1))^r`.
    pub fn power(&self, r: usize) -> Q {
        match self.powers.get(r) {
            Some(p) => p.clone(),
            None => rational::pow(&self.q, r as u32),
        }
    }

    /// Value of a single digit `b` at place `r`.
    pub fn place_value(&self, b: &Q, r: usize) -> Q {
        &self.factor * b * self.power(r)
    }
}

/// Digit list, most significant first, as in `[b_t, …, b_0]`.
#[derive(Clone, PartialEq, Eq)]
pub struct DigitVector {
    base: Arc<NumeralBase>,
    digits: Vec<Q>,
}

impl DigitVector {
    pub fn new(base: Arc<NumeralBase>, digits: Vec<Q>) -> Result<Self, NumeralError> {
        if let Some(neg) = digits.iter().find(|b| b.is_negative()) {
            return Err(NumeralError::NegativeDigit(rational::format(neg)));
        }
        Ok(DigitVector { base, digits })
    }

    /// `places` zero digits.
    pub fn zeros(base: Arc<NumeralBase>, places: usize) -> Self {
        DigitVector {
            base,
            digits: vec![Q::zero(); places],
        }
    }

    pub fn base(&self) -> &Arc<NumeralBase> {
        &self.base
    }

    pub fn digits(&self) -> &[Q] {
        &self.digits
    }

    pub fn places(&self) -> usize {
        self.digits.len()
    }

    /// Digit at place `r` (0 is least significant); absent places are zero.
    pub fn digit(&self, r: usize) -> Q {
        let n = self.digits.len();
        if r < n {
            self.digits[n - 1 - r].clone()
        } else {
            Q::zero()
        }
    }

    pub fn value(&self) -> Q {
        let n = self.digits.len();
        let sum = self
            .digits
            .iter()
            .enumerate()
            .filter(|(_, b)| !b.is_zero())
            .fold(Q::zero(), |acc, (pos, b)| acc + b * self.base.power(n - 1 - pos));
        &self.base.factor * sum
    }

    pub fn digit_sum(&self) -> Q {
        self.digits.iter().fold(Q::zero(), |acc, b| acc + b)
    }

    pub fn nonnull_count(&self) -> usize {
        self.digits.iter().filter(|b| !b.is_zero()).count()
    }

    pub fn max_digit(&self) -> Q {
        self.digits.iter().max().cloned().unwrap_or_else(Q::zero)
    }

    pub fn is_zero(&self) -> bool {
        self.digits.iter().all(Zero::is_zero)
    }

    /// Same digit list, with missing high places read as zero.
    pub fn digit_eq(&self, other: &DigitVector) -> bool {
        let n = self.places().max(other.places());
        (0..n).all(|r| self.digit(r) == other.digit(r))
    }

    pub fn value_eq(&self, other: &DigitVector) -> bool {
        self.value() == other.value()
    }

    fn check_base(&self, other: &DigitVector) -> Result<(), NumeralError> {
        if Arc::ptr_eq(&self.base, &other.base) || *self.base == *other.base {
            Ok(())
        } else {
            Err(NumeralError::BaseMismatch)
        }
    }

    fn zip_places(
        &self,
        other: &DigitVector,
        f: impl Fn(usize, Q, Q) -> Result<Q, NumeralError>,
    ) -> Result<DigitVector, NumeralError> {
        self.check_base(other)?;
        let n = self.places().max(other.places());
        let mut digits = Vec::with_capacity(n);
        for r in (0..n).rev() {
            digits.push(f(r, self.digit(r), other.digit(r))?);
        }
        Ok(DigitVector {
            base: self.base.clone(),
            digits,
        })
    }

    pub fn place_add(&self, other: &DigitVector) -> Result<DigitVector, NumeralError> {
        self.zip_places(other, |_, a, b| Ok(a + b))
    }

    pub fn place_sub(&self, other: &DigitVector) -> Result<DigitVector, NumeralError> {
        self.zip_places(other, |place, a, b| {
            if b > a {
                Err(NumeralError::Underflow { place })
            } else {
                Ok(a - b)
            }
        })
    }

    /// Multiplies by d/(d−1) and adds `C·b/(d−1)`: `b` becomes the new place 0.
    pub fn shift_append(&self, b: Q) -> Result<DigitVector, NumeralError> {
        if b.is_negative() {
            return Err(NumeralError::NegativeDigit(rational::format(&b)));
        }
        let mut digits = self.digits.clone();
        digits.push(b);
        Ok(DigitVector {
            base: self.base.clone(),
            digits,
        })
    }

    /// Every digit replaced by `min(digit, cap)`.
    pub fn truncate_fraction(&self, cap: &Q) -> DigitVector {
        DigitVector {
            base: self.base.clone(),
            digits: self.digits.iter().map(|b| rational::min(b, cap)).collect(),
        }
    }

    /// Removes the place-k digit of a (k+1)-place vector.
    pub fn pop_overflow(&self) -> Result<(Q, DigitVector), NumeralError> {
        let k = self.base.k;
        if self.places() <= k as usize {
            return Err(NumeralError::NoOverflow {
                places: self.places(),
                k,
            });
        }
        let top = self.digit(k as usize);
        if top.is_zero() {
            return Err(NumeralError::ZeroOverflowDigit { k });
        }
        Ok((top, self.drop_high_places(k as usize)))
    }

    /// Keeps only places `0..places`.
    pub fn drop_high_places(&self, places: usize) -> DigitVector {
        let n = self.places();
        let skip = n.saturating_sub(places);
        DigitVector {
            base: self.base.clone(),
            digits: self.digits[skip..].to_vec(),
        }
    }

    /// Subtracts the minimum digit from every place of an all-non-null
    /// k-place vector.
    pub fn extract_common(&self) -> Result<(Q, DigitVector), NumeralError> {
        let k = self.base.k as usize;
        if self.places() != k {
            return Err(NumeralError::WrongLength {
                expected: k,
                found: self.places(),
            });
        }
        if let Some(pos) = self.digits.iter().position(Zero::is_zero) {
            return Err(NumeralError::NullDigit {
                place: k - 1 - pos,
            });
        }
        let b = self.min_digit();
        let digits = self.digits.iter().map(|x| x - &b).collect();
        Ok((
            b,
            DigitVector {
                base: self.base.clone(),
                digits,
            },
        ))
    }

    fn min_digit(&self) -> Q {
        self.digits.iter().min().cloned().unwrap_or_else(Q::zero)
    }
}

impl fmt::Display for DigitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let body: Vec<String> = self.digits.iter().map(rational::format).collect();
        write!(
            f,
            "[{}] @ base {}/{}, C={}",
            body.join(","),
            self.base.d,
            self.base.d - 1,
            rational::format(&self.base.c)
        )
    }
}

impl fmt::Debug for DigitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{frac, int};
    use proptest::prelude::*;

    fn base22() -> Arc<NumeralBase> {
        NumeralBase::new(2, 2).unwrap()
    }

    fn dv(base: &Arc<NumeralBase>, ds: &[Q]) -> DigitVector {
        DigitVector::new(base.clone(), ds.to_vec()).unwrap()
    }

    #[test]
    fn scaling_constants() {
        assert_eq!(scaling_constant(1, 2).unwrap(), int(1));
        assert_eq!(scaling_constant(2, 2).unwrap(), frac(1, 3));
        assert_eq!(scaling_constant(7, 4).unwrap(), frac(2187, 14197));
        assert_eq!(scaling_constant(3, 1), Err(NumeralError::BaseUndefined(1)));
    }

    #[test]
    fn hand_values() {
        let b = base22();
        assert_eq!(DigitVector::zeros(b.clone(), 2).value(), int(0));
        assert_eq!(dv(&b, &[int(1)]).value(), frac(1, 3));
        assert_eq!(dv(&b, &[int(1), int(1)]).value(), int(1));
        let s = dv(&b, &[int(1)]).shift_append(int(2)).unwrap();
        assert_eq!(s.digits(), &[int(1), int(2)]);
        assert_eq!(s.value(), frac(4, 3));
    }

    #[test]
    fn placewise_sub_and_underflow() {
        let b = base22();
        let r = dv(&b, &[int(2), int(1)]).place_sub(&dv(&b, &[int(1), int(1)])).unwrap();
        assert_eq!(r.digits(), &[int(1), int(0)]);
        let e = dv(&b, &[int(0), int(1)]).place_sub(&dv(&b, &[int(1), int(0)]));
        assert_eq!(e, Err(NumeralError::Underflow { place: 1 }));
    }

    #[test]
    fn truncate() {
        let b = base22();
        let v = dv(&b, &[int(3), int(0), int(2)]);
        assert_eq!(v.truncate_fraction(&int(2)).digits(), &[int(2), int(0), int(2)]);
        assert_eq!(v.truncate_fraction(&int(5)), v);
    }

    #[test]
    fn overflow_and_common() {
        let b = base22();
        let (top, rest) = dv(&b, &[int(1), int(0), int(0)]).pop_overflow().unwrap();
        assert_eq!(top, int(1));
        assert_eq!(rest.digits(), &[int(0), int(0)]);
        assert_eq!(dv(&b, &[int(1), int(0), int(0)]).value(), frac(4, 3));
        assert!(matches!(
            dv(&b, &[int(0), int(1), int(0)]).pop_overflow(),
            Err(NumeralError::ZeroOverflowDigit { .. })
        ));
        assert!(matches!(
            dv(&b, &[int(1), int(0)]).pop_overflow(),
            Err(NumeralError::NoOverflow { .. })
        ));

        let v = dv(&b, &[int(2), int(1)]);
        let (m, rest) = v.extract_common().unwrap();
        assert_eq!(m, int(1));
        assert_eq!(rest.digits(), &[int(1), int(0)]);
        assert_eq!(v.value() - rest.value(), int(1));
        assert!(matches!(
            dv(&b, &[int(0), int(1)]).extract_common(),
            Err(NumeralError::NullDigit { place: 1 })
        ));
        let eq = dv(&b, &[frac(1, 3), frac(1, 3)]).extract_common().unwrap().1;
        assert!(eq.is_zero());
    }

    #[test]
    fn equality_modes() {
        let b = base22();
        let a = dv(&b, &[int(0), int(1)]);
        let c = dv(&b, &[int(1)]);
        assert!(a.digit_eq(&c));
        assert!(DigitVector::zeros(b.clone(), 0).value_eq(&DigitVector::zeros(b.clone(), 3)));
        // [1,0] and [2] carry the same value in base 2
        let x = dv(&b, &[int(1), int(0)]);
        let y = dv(&b, &[int(2)]);
        assert!(x.value_eq(&y));
        assert!(!x.digit_eq(&y));
    }

    #[test]
    fn display() {
        let b = NumeralBase::new(7, 4).unwrap();
        let v = dv(&b, &[frac(1, 2), int(0)]);
        assert_eq!(v.to_string(), "[1/2,0/1] @ base 4/3, C=2187/14197");
    }

    fn digit() -> impl Strategy<Value = Q> {
        (0i64..12, 1i64..6).prop_map(|(n, d)| frac(n, d))
    }

    fn kd() -> impl Strategy<Value = (u32, u32)> {
        (2u32..6).prop_flat_map(|d| ((d - 1).max(1)..d + 4).prop_map(move |k| (k, d)))
    }

    /// Independent evaluation straight from the defining sum.
    fn oracle_value(k: u32, d: u32, ds: &[Q]) -> Q {
        let c = (rational::pow(&frac(d as i64, d as i64 - 1), k) - int(1)).recip();
        let n = ds.len();
        let mut s = int(0);
        for (pos, b) in ds.iter().enumerate() {
            let r = (n - 1 - pos) as u32;
            s += b * rational::pow(&frac(d as i64, d as i64 - 1), r);
        }
        c / int(d as i64 - 1) * s
    }

    proptest! {
        #[test]
        fn value_matches_definition((k, d) in kd(), ds in prop::collection::vec(digit(), 0..8)) {
            let b = NumeralBase::new(k, d).unwrap();
            prop_assert_eq!(dv(&b, &ds).value(), oracle_value(k, d, &ds));
        }

        #[test]
        fn value_is_linear(
            (k, d) in kd(),
            a in prop::collection::vec(digit(), 0..7),
            c in prop::collection::vec(digit(), 0..7),
        ) {
            let b = NumeralBase::new(k, d).unwrap();
            let (x, y) = (dv(&b, &a), dv(&b, &c));
            let s = x.place_add(&y).unwrap();
            prop_assert_eq!(s.value(), x.value() + y.value());
            let back = s.place_sub(&y).unwrap();
            prop_assert!(back.digit_eq(&x));
            prop_assert_eq!(back.value(), x.value());
        }

        #[test]
        fn shift_append_identity((k, d) in kd(), a in prop::collection::vec(digit(), 0..7), t in digit()) {
            let b = NumeralBase::new(k, d).unwrap();
            let v = dv(&b, &a);
            let q = frac(d as i64, d as i64 - 1);
            let expect = v.value() * q + b.c() * &t / int(d as i64 - 1);
            prop_assert_eq!(v.shift_append(t).unwrap().value(), expect);
        }

        #[test]
        fn truncation_never_underflows(a in prop::collection::vec(digit(), 0..7), cap in digit()) {
            let b = base22();
            let v = dv(&b, &a);
            let t = v.truncate_fraction(&cap);
            for r in 0..v.places() {
                prop_assert!(t.digit(r) <= v.digit(r));
                prop_assert!(t.digit(r) <= cap);
            }
            prop_assert!(v.place_sub(&t).is_ok());
        }

        #[test]
        fn overflow_drop_covers_credit(
            (k, d) in kd(),
            seed in prop::collection::vec(digit(), 12),
            top in (1i64..12, 1i64..6),
        ) {
            let b = NumeralBase::new(k, d).unwrap();
            let mut ds = vec![frac(top.0, top.1)];
            ds.extend(seed.into_iter().take(k as usize));
            ds.resize(k as usize + 1, int(0));
            let v = dv(&b, &ds);
            let (bk, rest) = v.pop_overflow().unwrap();
            let drop = v.value() - rest.value();
            prop_assert!(drop >= &bk / int(k as i64));
        }

        #[test]
        fn common_extraction_exact(
            (k, d) in kd(),
            seed in prop::collection::vec((1i64..12, 1i64..6), 12),
        ) {
            let b = NumeralBase::new(k, d).unwrap();
            let ds: Vec<Q> = seed.iter().take(k as usize).map(|&(n, m)| frac(n, m)).collect();
            let v = dv(&b, &ds);
            let (m, rest) = v.extract_common().unwrap();
            prop_assert_eq!(v.value() - rest.value(), m.clone());
            prop_assert_eq!(v.digit_sum() - rest.digit_sum(), m * int(k as i64));
            prop_assert!(rest.nonnull_count() < k as usize);
        }

        #[test]
        fn k_equal_digits_have_that_value((k, d) in kd(), t in digit()) {
            let b = NumeralBase::new(k, d).unwrap();
            prop_assert_eq!(dv(&b, &vec![t.clone(); k as usize]).value(), t);
        }
    }
}
