//! Double-double (compensated pair) arithmetic.
//!
//! A value is an unevaluated sum `hi + lo` with `|lo| <= ulp(hi)/2`, giving
//! roughly 106 bits of significand. Used as the extended-precision backend
//! of the forward-difference tables and as the compensated accumulator for
//! the direct series.

/// Relative rounding unit of a normalized double-double, 2^-104.
pub const DD_EPSILON: f64 = 4.930380657631324e-32;

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, f64::mul_add(a, b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    /// log(2) to double-double precision.
    pub const LN2: Dd = Dd { hi: 0.693147180559945_3, lo: 2.319046813846299_6e-17 };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    #[inline]
    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) { self.neg() } else { self }
    }

    #[inline]
    pub fn neg(self) -> Dd {
        Dd { hi: -self.hi, lo: -self.lo }
    }

    #[inline]
    pub fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (s1, s2) = quick_two_sum(s1, s2 + t2);
        Dd { hi: s1, lo: s2 }
    }

    #[inline]
    pub fn add_f64(self, rhs: f64) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs);
        let (s1, s2) = quick_two_sum(s1, s2 + self.lo);
        Dd { hi: s1, lo: s2 }
    }

    #[inline]
    pub fn sub(self, rhs: Dd) -> Dd {
        self.add(rhs.neg())
    }

    #[inline]
    pub fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (s, e) = quick_two_sum(p1, p2);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn mul_f64(self, rhs: f64) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs);
        let (s, e) = quick_two_sum(p1, p2 + self.lo * rhs);
        Dd { hi: s, lo: e }
    }

    pub fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self.sub(rhs.mul_f64(q1));
        let q2 = r.hi / rhs.hi;
        let r = r.sub(rhs.mul_f64(q2));
        let q3 = r.hi / rhs.hi;
        Dd::new(q1, q2).add_f64(q3)
    }

    /// Integer power by binary exponentiation.
    pub fn powi(self, mut n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        while n > 0 {
            if n & 1 == 1 {
                acc = acc.mul(base);
            }
            n >>= 1;
            if n > 0 {
                base = base.mul(base);
            }
        }
        acc
    }

    /// exp(self); argument reduction against LN2, Taylor tail in dd.
    pub fn exp(self) -> Dd {
        let x = self.to_f64();
        if x < -745.0 {
            return Dd::ZERO;
        }
        assert!(x < 709.0, "dd exp overflow");
        let k = (x / std::f64::consts::LN_2).round();
        let r = self.sub(Dd::LN2.mul_f64(k));
        // |r| <= ln2/2; Taylor series converges well past dd precision by i=26
        let mut term = Dd::ONE;
        let mut sum = Dd::ONE;
        for i in 1..=26 {
            term = term.mul(r).div(Dd::from(i as f64));
            sum = sum.add(term);
            if term.hi.abs() < 1e-35 * sum.hi.abs() {
                break;
            }
        }
        let scale = f64::powi(2.0, k as i32);
        Dd { hi: sum.hi * scale, lo: sum.lo * scale }
    }

    /// Natural log by one Newton step on top of the f64 estimate.
    pub fn ln(self) -> Dd {
        assert!(self.hi > 0.0, "dd ln of non-positive value");
        let y0 = self.hi.ln();
        // y1 = y0 + x*exp(-y0) - 1 doubles the accurate digits
        let e = Dd::new(-y0, 0.0).exp();
        self.mul(e).add_f64(-1.0).add_f64(y0)
    }

    /// self^e for f64 exponent, via exp(e * ln(self)). Requires self > 0.
    pub fn powf(self, e: f64) -> Dd {
        self.ln().mul_f64(e).exp()
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(x: f64) -> Dd {
        Dd { hi: x, lo: 0.0 }
    }
}

/// Exact conversion of an u128 that fits in 128 bits of significand.
pub fn dd_from_u128(u: u128) -> Dd {
    let hi = u as f64;
    debug_assert!(hi.is_finite());
    let rem = (u as i128).wrapping_sub(hi as i128);
    Dd::new(hi, rem as f64)
}
