//! Double-double arithmetic (about 32 significant digits) for
//! reference loss evaluations.
//!
//! Addition and multiplication come from `twofloat`. Its division,
//! `exp` and `ln` are no better than `f64`, so those and the functions
//! derived from them (`sqrt`, `exp_m1`, `ln_1p`, `tanh`) are computed
//! here to full precision.

use std::cmp::Ordering;
use std::fmt;
use std::num::FpCategory;
use std::ops::{Add, AddAssign, Div, DivAssign, Mul, MulAssign, Neg, Rem, RemAssign, Sub, SubAssign};

use num_traits::{Float, FromPrimitive, Num, NumCast, One, ToPrimitive, Zero};
use twofloat::TwoFloat;

use crate::numeric::Scalar;

/// A pair of `f64`s representing their unevaluated sum.
#[derive(Clone, Copy, Default)]
pub struct DoubleDouble(TwoFloat);

const LN_2: DoubleDouble = DoubleDouble(TwoFloat::from_f64(std::f64::consts::LN_2));
const LN_2_LO: f64 = 2.319_046_813_846_299_6e-17;

impl DoubleDouble {
    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    pub fn lo(self) -> f64 {
        self.0.lo()
    }

    fn from_f(x: f64) -> Self {
        DoubleDouble(<TwoFloat as From<f64>>::from(x))
    }

    fn ln2() -> Self {
        DoubleDouble(TwoFloat::new_add(LN_2.hi(), LN_2_LO))
    }

    /// Multiplies by `2^k` exactly (barring under/overflow).
    fn ldexp(self, k: i32) -> Self {
        let mut out = self;
        let mut k = k;
        while k != 0 {
            let step = k.clamp(-1000, 1000);
            let s = 2f64.powi(step);
            out = DoubleDouble(TwoFloat::new_add(out.hi() * s, out.lo() * s));
            k -= step;
        }
        out
    }

    /// `exp(r) − 1` for `|r| ≤ ln 2 / 2`.
    fn expm1_reduced(r: Self) -> Self {
        const HALVINGS: i32 = 10;
        let s = r.ldexp(-HALVINGS);
        // Taylor series of e^s − 1; |s| < 3.4e-4 so 12 terms exceed DD precision.
        let mut term = s;
        let mut sum = s;
        for n in 2..=12 {
            term = term * s / Self::from_f(n as f64);
            sum = sum + term;
        }
        // e^{2s} − 1 = 2p + p².
        for _ in 0..HALVINGS {
            sum = sum + sum + sum * sum;
        }
        sum
    }

    /// Splits `x = k·ln 2 + r` with `|r| ≤ ln 2 / 2`.
    fn reduce(self) -> (i32, Self) {
        let k = (self.hi() / std::f64::consts::LN_2).round();
        (k as i32, self - Self::ln2() * Self::from_f(k))
    }
}

impl fmt::Debug for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DoubleDouble({:e} + {:e})", self.hi(), self.lo())
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(&self.0, f)
    }
}

impl fmt::LowerExp for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::LowerExp::fmt(&self.0, f)
    }
}

impl PartialEq for DoubleDouble {
    fn eq(&self, other: &Self) -> bool {
        self.partial_cmp(other) == Some(Ordering::Equal)
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi().partial_cmp(&other.hi())? {
            Ordering::Equal if self.hi().is_finite() => self.lo().partial_cmp(&other.lo()),
            o => Some(o),
        }
    }
}

macro_rules! binop {
    ($tr:ident, $f:ident, $atr:ident, $af:ident) => {
        impl $tr for DoubleDouble {
            type Output = Self;
            #[inline]
            fn $f(self, rhs: Self) -> Self {
                DoubleDouble($tr::$f(self.0, rhs.0))
            }
        }
        impl $atr for DoubleDouble {
            #[inline]
            fn $af(&mut self, rhs: Self) {
                *self = $tr::$f(*self, rhs);
            }
        }
    };
}

binop!(Add, add, AddAssign, add_assign);
binop!(Sub, sub, SubAssign, sub_assign);
binop!(Mul, mul, MulAssign, mul_assign);

impl Div for DoubleDouble {
    type Output = Self;

    /// Long division with three correction steps.
    fn div(self, rhs: Self) -> Self {
        let q1 = self.hi() / rhs.hi();
        if !q1.is_finite() || q1 == 0.0 {
            return Self::from_f(q1);
        }
        let r = self.0 - rhs.0 * q1;
        let q2 = r.hi() / rhs.hi();
        let r = r - rhs.0 * q2;
        let q3 = r.hi() / rhs.hi();
        DoubleDouble(TwoFloat::new_add(q1, q2) + q3)
    }
}

impl DivAssign for DoubleDouble {
    fn div_assign(&mut self, rhs: Self) {
        *self = *self / rhs;
    }
}

impl Rem for DoubleDouble {
    type Output = Self;

    fn rem(self, rhs: Self) -> Self {
        self - (self / rhs).trunc() * rhs
    }
}

impl RemAssign for DoubleDouble {
    fn rem_assign(&mut self, rhs: Self) {
        *self = *self % rhs;
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble(-self.0)
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        DoubleDouble(TwoFloat::zero())
    }

    fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        DoubleDouble(TwoFloat::one())
    }
}

impl Num for DoubleDouble {
    type FromStrRadixErr = <f64 as Num>::FromStrRadixErr;

    fn from_str_radix(s: &str, radix: u32) -> Result<Self, Self::FromStrRadixErr> {
        f64::from_str_radix(s, radix).map(Self::from_f)
    }
}

impl ToPrimitive for DoubleDouble {
    fn to_i64(&self) -> Option<i64> {
        self.0.to_i64()
    }

    fn to_u64(&self) -> Option<u64> {
        self.0.to_u64()
    }

    fn to_f64(&self) -> Option<f64> {
        Some(<f64 as From<TwoFloat>>::from(self.0))
    }
}

impl FromPrimitive for DoubleDouble {
    fn from_i64(n: i64) -> Option<Self> {
        Some(DoubleDouble(<TwoFloat as From<_>>::from(n)))
    }

    fn from_u64(n: u64) -> Option<Self> {
        Some(DoubleDouble(<TwoFloat as From<_>>::from(n)))
    }

    fn from_f64(x: f64) -> Option<Self> {
        Some(Self::from_f(x))
    }
}

impl NumCast for DoubleDouble {
    fn from<N: ToPrimitive>(n: N) -> Option<Self> {
        n.to_f64().map(Self::from_f)
    }
}

macro_rules! delegate {
    ($($f:ident),*) => {
        $(fn $f(self) -> Self { DoubleDouble(Float::$f(self.0)) })*
    };
}

macro_rules! delegate_pred {
    ($($f:ident),*) => {
        $(fn $f(self) -> bool { Float::$f(self.0) })*
    };
}

impl Float for DoubleDouble {
    fn nan() -> Self {
        DoubleDouble(TwoFloat::NAN)
    }

    fn infinity() -> Self {
        DoubleDouble(TwoFloat::INFINITY)
    }

    fn neg_infinity() -> Self {
        DoubleDouble(TwoFloat::NEG_INFINITY)
    }

    fn neg_zero() -> Self {
        Self::from_f(-0.0)
    }

    fn min_value() -> Self {
        DoubleDouble(TwoFloat::MIN)
    }

    fn min_positive_value() -> Self {
        DoubleDouble(TwoFloat::MIN_POSITIVE)
    }

    fn max_value() -> Self {
        DoubleDouble(TwoFloat::MAX)
    }

    fn epsilon() -> Self {
        DoubleDouble(TwoFloat::EPSILON)
    }

    delegate_pred!(is_nan, is_infinite, is_finite, is_normal, is_sign_positive, is_sign_negative);
    delegate!(floor, ceil, round, trunc, fract, abs, signum, cbrt);

    fn recip(self) -> Self {
        Self::one() / self
    }

    fn sqrt(self) -> Self {
        if self.is_zero() || self.is_nan() || self.is_infinite() || self.hi() < 0.0 {
            return Self::from_f(self.hi().sqrt());
        }
        let y = Self::from_f(self.hi().sqrt());
        // One Newton step doubles the ~53 correct bits.
        y + (self - y * y) / (y + y)
    }
    delegate!(sin, cos, tan, asin, acos, atan, sinh, cosh, asinh, acosh, atanh);

    fn classify(self) -> FpCategory {
        Float::classify(self.0)
    }

    fn mul_add(self, a: Self, b: Self) -> Self {
        self * a + b
    }

    fn powi(self, n: i32) -> Self {
        let mut base = if n < 0 { self.recip() } else { self };
        let mut e = n.unsigned_abs();
        let mut acc = Self::one();
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    fn powf(self, n: Self) -> Self {
        (self.ln() * n).exp()
    }

    fn exp(self) -> Self {
        if self.is_nan() {
            return self;
        }
        if self.hi() > 709.78 {
            return Self::infinity();
        }
        if self.hi() < -745.2 {
            return Self::zero();
        }
        let (k, r) = self.reduce();
        (Self::expm1_reduced(r) + Self::one()).ldexp(k)
    }

    fn exp_m1(self) -> Self {
        if self.hi().abs() < 0.5 * std::f64::consts::LN_2 {
            return Self::expm1_reduced(self);
        }
        self.exp() - Self::one()
    }

    fn exp2(self) -> Self {
        (self * Self::ln2()).exp()
    }

    fn ln(self) -> Self {
        if self.is_nan() || self.hi() < 0.0 {
            return Self::nan();
        }
        if self.is_zero() {
            return Self::neg_infinity();
        }
        if self.is_infinite() {
            return self;
        }
        // Newton on exp(y) = x; each step squares the relative error.
        let mut y = Self::from_f(self.hi().ln());
        for _ in 0..2 {
            y = y + self * (-y).exp() - Self::one();
        }
        y
    }

    fn ln_1p(self) -> Self {
        if self.hi().abs() < 1e-3 {
            // Newton on expm1(y) = x avoids forming 1 + x.
            let mut y = Self::from_f(self.hi().ln_1p());
            for _ in 0..2 {
                let e = y.exp_m1();
                y = y - (e - self) / (e + Self::one());
            }
            return y;
        }
        (self + Self::one()).ln()
    }

    fn log(self, base: Self) -> Self {
        self.ln() / base.ln()
    }

    fn log2(self) -> Self {
        self.ln() / Self::ln2()
    }

    fn log10(self) -> Self {
        self.ln() / Self::from_f(10.0).ln()
    }

    fn max(self, other: Self) -> Self {
        if self.is_nan() || other > self {
            other
        } else {
            self
        }
    }

    fn min(self, other: Self) -> Self {
        if self.is_nan() || other < self {
            other
        } else {
            self
        }
    }

    fn abs_sub(self, other: Self) -> Self {
        if self > other {
            self - other
        } else {
            Self::zero()
        }
    }

    fn hypot(self, other: Self) -> Self {
        (self * self + other * other).sqrt()
    }

    fn atan2(self, other: Self) -> Self {
        DoubleDouble(Float::atan2(self.0, other.0))
    }

    fn sin_cos(self) -> (Self, Self) {
        (self.sin(), self.cos())
    }

    fn tanh(self) -> Self {
        if self.is_nan() {
            return self;
        }
        if self.hi() < 0.0 {
            return -(-self).tanh();
        }
        if self.hi() > 40.0 {
            return Self::one();
        }
        // tanh x = e/(e + 2) with e = exp(2x) − 1, no cancellation near 0.
        let e = (self + self).exp_m1();
        e / (e + Self::from_f(2.0))
    }

    fn integer_decode(self) -> (u64, i16, i8) {
        Float::integer_decode(self.hi())
    }
}

impl Scalar for DoubleDouble {
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f(x)
    }

    #[inline]
    fn as_f64(self) -> f64 {
        <f64 as From<TwoFloat>>::from(self.0)
    }

    /// Plain triple loop; double-double is only used on small problems.
    unsafe fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: *const Self,
        rsa: isize,
        csa: isize,
        b: *const Self,
        rsb: isize,
        csb: isize,
        beta: Self,
        c: *mut Self,
        rsc: isize,
        csc: isize,
    ) {
        for i in 0..m as isize {
            for j in 0..n as isize {
                let mut acc = Self::zero();
                for p in 0..k as isize {
                    acc += *a.offset(i * rsa + p * csa) * *b.offset(p * rsb + j * csb);
                }
                let dst = c.offset(i * rsc + j * csc);
                *dst = if beta.is_zero() { alpha * acc } else { alpha * acc + beta * *dst };
            }
        }
    }
}
