//! Adaptive Gauss–Kronrod (7, 15) quadrature.

use std::collections::BinaryHeap;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

/// Integrate `f` over the finite interval `[a, b]` until the estimated
/// error falls below `max(abs_tol, rel_tol·|value|)`.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Quadrature {
    const MAX_SEGMENTS: usize = 4000;
    let (value, error) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < MAX_SEGMENTS {
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            heap.push(worst);
            break;
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        evaluations += 30;
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }
    // Re-sum to shed accumulated rounding in the running totals.
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Quadrature {
        value,
        error,
        evaluations,
    }
}

/// A density on an interval known only through its unnormalized log.
///
/// The log is shifted by its maximum over a coarse grid before
/// exponentiation, so very large or very small scales are harmless.
pub struct LogDensity<F> {
    log_f: F,
    pub lower: f64,
    pub upper: f64,
    shift: f64,
    mode: f64,
    /// log of the normalizing integral.
    pub log_norm: f64,
}

impl<F: Fn(f64) -> f64> LogDensity<F> {
    pub fn new(log_f: F, lower: f64, upper: f64) -> Self {
        Self::with_hints(log_f, lower, upper, &[])
    }

    /// Like [`LogDensity::new`], with extra candidate locations for the mode
    /// in case the peak is narrower than the search grid.
    pub fn with_hints(log_f: F, lower: f64, upper: f64, hints: &[f64]) -> Self {
        let grid = 2000;
        let mut shift = f64::NEG_INFINITY;
        let mut mode = 0.5 * (lower + upper);
        for k in 0..=grid {
            let x = lower + (upper - lower) * k as f64 / grid as f64;
            let v = log_f(x);
            if v.is_finite() && v > shift {
                shift = v;
                mode = x;
            }
        }
        for &x in hints.iter().filter(|&&x| x > lower && x < upper) {
            let v = log_f(x);
            if v.is_finite() && v > shift {
                shift = v;
                mode = x;
            }
        }
        let mut out = Self {
            log_f,
            lower,
            upper,
            shift,
            mode,
            log_norm: 0.0,
        };
        let mass = out.integrate_unnormalized(|_| 1.0);
        out.log_norm = shift + mass.ln();
        out
    }

    // Split at the grid mode so narrow peaks are never straddled unseen.
    fn integrate_unnormalized<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        let shift = self.shift;
        let h = |x: f64| {
            let v = (self.log_f)(x);
            if v.is_finite() {
                g(x) * (v - shift).exp()
            } else {
                0.0
            }
        };
        let mut total = 0.0;
        for (a, b) in [(self.lower, self.mode), (self.mode, self.upper)] {
            if b > a {
                total += integrate(&h, a, b, 1e-11, 1e-300).value;
            }
        }
        total
    }

    /// Normalized density.
    pub fn pdf(&self, x: f64) -> f64 {
        let v = (self.log_f)(x);
        if v.is_finite() {
            (v - self.log_norm).exp()
        } else {
            0.0
        }
    }

    /// E[g(X)].
    pub fn expect<G: Fn(f64) -> f64>(&self, g: G) -> f64 {
        self.integrate_unnormalized(g) / (self.log_norm - self.shift).exp()
    }

    pub fn mean(&self) -> f64 {
        self.expect(|x| x)
    }

    pub fn probability(&self, a: f64, b: f64) -> f64 {
        let (a, b) = (a.max(self.lower), b.min(self.upper));
        if a >= b {
            return 0.0;
        }
        let pdf = |x: f64| self.pdf(x);
        if self.mode > a && self.mode < b {
            integrate(pdf, a, self.mode, 1e-11, 1e-300).value
                + integrate(pdf, self.mode, b, 1e-11, 1e-300).value
        } else {
            integrate(pdf, a, b, 1e-11, 1e-300).value
        }
    }

    /// Total-variation distance to another density on the same interval.
    pub fn total_variation<H: Fn(f64) -> f64>(&self, other_pdf: H) -> f64 {
        let diff = |x: f64| (self.pdf(x) - other_pdf(x)).abs();
        let mut total = 0.0;
        for (a, b) in [(self.lower, self.mode), (self.mode, self.upper)] {
            if b > a {
                total += integrate(&diff, a, b, 1e-9, 1e-14).value;
            }
        }
        0.5 * total
    }
}
