//! Just enough double-double arithmetic to settle `floor(k / (3 ln k))`
//! when the plain `f64` quotient lands next to an integer.

#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct Dd(pub f64, pub f64);

const LN_2: Dd = Dd(std::f64::consts::LN_2, 2.319_046_813_846_299_6e-17);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd(s, b - (s - a))
}

fn two_prod(a: f64, b: f64) -> Dd {
    let p = a * b;
    Dd(p, a.mul_add(b, -p))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let Dd(s, e) = two_sum(self.0, o.0);
        quick_two_sum(s, e + self.1 + o.1)
    }

    fn neg(self) -> Dd {
        Dd(-self.0, -self.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let Dd(p, e) = two_prod(self.0, o.0);
        quick_two_sum(p, e + self.0 * o.1 + self.1 * o.0)
    }

    fn div(self, o: Dd) -> Dd {
        let q1 = self.0 / o.0;
        let r = self.add(o.mul(Dd(q1, 0.0)).neg());
        let q2 = r.0 / o.0;
        let r = r.add(o.mul(Dd(q2, 0.0)).neg());
        let q3 = r.0 / o.0;
        quick_two_sum(q1, q2).add(Dd(q3, 0.0))
    }

    /// The largest integer not above the exact value `hi + lo`.
    pub(crate) fn floor(self) -> f64 {
        let f = self.0.floor();
        if f == self.0 {
            f + (self.1.floor())
        } else {
            f
        }
    }
}

/// `ln k` to about 32 significant digits, for `2 <= k < 2^53`.
pub(crate) fn ln_dd(k: u64) -> Dd {
    assert!((2..1 << 53).contains(&k));
    let m = 63 - k.leading_zeros();
    // k = 2^m r with r in [1, 2); ln r = 2 atanh((r - 1) / (r + 1)).
    let r = k as f64 / (1u64 << m) as f64;
    let t = Dd(r - 1.0, 0.0).div(two_sum(r, 1.0));
    let t2 = t.mul(t);
    let mut power = t;
    let mut sum = Dd(0.0, 0.0);
    for i in 0..40 {
        sum = sum.add(power.div(Dd((2 * i + 1) as f64, 0.0)));
        power = power.mul(t2);
        if power.0.abs() < 1e-40 {
            break;
        }
    }
    LN_2.mul(Dd(m as f64, 0.0)).add(sum.add(sum))
}

/// `k / (3 ln k)` in double-double.
pub(crate) fn k_over_3lnk(k: u64) -> Dd {
    Dd(k as f64, 0.0).div(Dd(3.0, 0.0).mul(ln_dd(k)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_matches_high_precision_references() {
        // (hi, lo) split of ln k from a 50-digit evaluation.
        let cases: [(u64, f64, f64); 5] = [
            (5, 1.6094379124341003, 9.280081691085902e-17),
            (10, 2.302585092994046, -2.1707562233822494e-16),
            (20, 2.995732273553991, 1.39181753187785e-16),
            (64, 4.1588830833596715, 3.611874137558093e-16),
            (1_000_003, 13.815513557959774, 4.636218047193209e-16),
        ];
        for (k, hi, lo) in cases {
            let v = ln_dd(k);
            let err = (v.0 - hi) + (v.1 - lo);
            assert!(err.abs() < 1e-29 * hi, "k={k}: {v:?}");
        }
    }

    #[test]
    fn residual_is_consistent_with_f64_ln() {
        for k in 2..5000u64 {
            let v = ln_dd(k);
            assert!((v.0 - (k as f64).ln()).abs() <= 2.0 * f64::EPSILON * v.0.max(1.0), "k={k}");
            assert!(v.1.abs() <= f64::EPSILON * v.0.abs());
        }
    }

    #[test]
    fn floor_of_split_values() {
        assert_eq!(Dd(3.0, -1e-20).floor(), 2.0);
        assert_eq!(Dd(3.0, 1e-20).floor(), 3.0);
        assert_eq!(Dd(2.5, -1e-20).floor(), 2.0);
    }
}
