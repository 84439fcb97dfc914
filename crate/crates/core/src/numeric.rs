//! Small numerical helpers shared across the crate.

use num_complex::Complex64;

/// e^(i theta).
#[inline]
pub(crate) fn cis(theta: f64) -> Complex64 {
    let (s, c) = theta.sin_cos();
    Complex64::new(c, s)
}

/// Compensated (Kahan) accumulator. The seminorm estimators sum up to a few
/// million terms and are tested for exact homogeneity at 1e-12, which plain
/// summation does not reliably deliver.
#[derive(Clone, Copy, Default)]
pub(crate) struct Kahan {
    sum: f64,
    carry: f64,
}

impl Kahan {
    #[inline]
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, x: f64) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.sum
    }
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of `f` on [a, b].
///
/// `f` must be unimodal on the bracket for a guaranteed result; on wiggly
/// data the search still terminates and returns a local maximum inside the
/// bracket. Returns (argmax, max). Runs until the bracket is shorter than
/// `tol` (at least one probe pair is always evaluated).
pub(crate) fn golden_section_max(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    debug_assert!(a <= b);
    let (mut lo, mut hi) = (a, b);
    let mut x1 = hi - INV_PHI * (hi - lo);
    let mut x2 = lo + INV_PHI * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 < f2 {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + INV_PHI * (hi - lo);
            f2 = f(x2);
        } else {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - INV_PHI * (hi - lo);
            f1 = f(x1);
        }
    }
    let mid = 0.5 * (lo + hi);
    let fm = f(mid);
    if fm >= f1 && fm >= f2 {
        (mid, fm)
    } else if f1 >= f2 {
        (x1, f1)
    } else {
        (x2, f2)
    }
}

/// Golden-section search for a minimum. See [`golden_section_max`].
pub(crate) fn golden_section_min(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> (f64, f64) {
    let (x, neg) = golden_section_max(|t| -f(t), a, b, tol);
    (x, -neg)
}

/// Canonical float formatting for the text formats: 17 significant digits,
/// which round-trips every finite f64 exactly.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}
