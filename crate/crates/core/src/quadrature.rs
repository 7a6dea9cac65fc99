//! Adaptive Gauss–Kronrod integration and iterated integration over ℓ^p balls
//! in dimension ≤ 3.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

// 15-point Kronrod extension of the 7-point Gauss rule.
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
    0.209_482_141_084_728,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    /// Estimated absolute error.
    pub error: f64,
    pub evaluations: usize,
}

fn gk15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs_sum = fc.abs() * WGK[7];
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        kronrod += WGK[j] * (f1 + f2);
        abs_sum += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * kronrod;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let resasc = asc * half.abs();
    let resabs = abs_sum * half.abs();
    let mut err = ((kronrod - gauss) * half).abs();
    if resasc != 0.0 && err != 0.0 {
        err = resasc * (200.0 * err / resasc).powf(1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(50.0 * f64::EPSILON * resabs);
    }
    (value, err)
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
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Globally adaptive 15-point Gauss–Kronrod quadrature on [a, b].
/// Stops once the summed error estimate is below `max(abs_tol, rel_tol·|I|)`
/// or `max_segments` segments are in use.
pub fn integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> QuadResult {
    if a == b {
        return QuadResult {
            value: 0.0,
            error: 0.0,
            evaluations: 0,
        };
    }
    let (v, e) = gk15(&mut f, a, b);
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v, error: e });
    let mut total = v;
    let mut total_err = e;
    while total_err > abs_tol.max(rel_tol * total.abs()) && heap.len() < max_segments {
        let seg = heap.pop().expect("non-empty");
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b {
            heap.push(seg);
            break;
        }
        let (v1, e1) = gk15(&mut f, seg.a, mid);
        let (v2, e2) = gk15(&mut f, mid, seg.b);
        evaluations += 30;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.error;
        heap.push(Segment { a: seg.a, b: mid, value: v1, error: e1 });
        heap.push(Segment { a: mid, b: seg.b, value: v2, error: e2 });
    }
    // re-sum to shed the drift of the running updates
    let mut value = 0.0;
    let mut error = 0.0;
    for s in heap.iter() {
        value += s.value;
        error += s.error;
    }
    QuadResult {
        value,
        error,
        evaluations,
    }
}

const MAX_SEGMENTS: usize = 400;

/// Integrates `inner(prefix, half_width)` over the ℓ^p ball of radius `delta`
/// around `center`, one coordinate at a time.
///
/// `inner` receives the absolute coordinates of all but the last axis and the
/// admissible half-width `w` along the last axis; it returns the integral over
/// `(c_k − w, c_k + w)` together with its error estimate. Each outer axis is
/// split at the center and mapped with `t = r(1 − τ^p)` so the cross-section
/// half-width is smooth in τ near the boundary. The error budget is shared
/// evenly across levels.
pub fn integrate_lp_ball<G>(center: &[f64], delta: f64, p: f64, tol: f64, inner: &G) -> QuadResult
where
    G: Fn(&[f64], f64) -> (f64, f64),
{
    let k = center.len();
    let mut prefix = Vec::with_capacity(k);
    recurse(center, p, delta.powf(p), tol, inner, &mut prefix)
}

fn recurse<G>(
    center: &[f64],
    p: f64,
    remaining_pow: f64,
    tol: f64,
    inner: &G,
    prefix: &mut Vec<f64>,
) -> QuadResult
where
    G: Fn(&[f64], f64) -> (f64, f64),
{
    let k = center.len();
    let level = prefix.len();
    let r = remaining_pow.max(0.0).powf(1.0 / p);
    if level + 1 == k {
        let (value, error) = inner(prefix, r);
        return QuadResult {
            value,
            error,
            evaluations: 1,
        };
    }
    let levels_left = (k - level) as f64;
    let own = tol / levels_left;
    // error in the inner integrals enters multiplied by the outer length 2r
    let inner_tol = (tol - own) / (2.0 * r).max(1e-300);
    let mut worst_inner = 0.0f64;
    let mut evaluations = 0usize;
    let mut total = QuadResult {
        value: 0.0,
        error: 0.0,
        evaluations: 0,
    };
    for sign in [-1.0, 1.0] {
        let half = {
            let worst = &mut worst_inner;
            let evals = &mut evaluations;
            let mut g = |tau: f64| {
                // t = r (1 − τ^p), dt = r p τ^{p−1} dτ
                let tp = tau.powf(p);
                let t = r * (1.0 - tp);
                let jac = r * p * tau.powf(p - 1.0);
                let rest = remaining_pow - t.abs().powf(p);
                if rest <= 0.0 || jac == 0.0 {
                    return 0.0;
                }
                prefix.push(center[level] + sign * t);
                let res = recurse(center, p, rest, inner_tol, inner, prefix);
                prefix.pop();
                *worst = worst.max(res.error);
                *evals += res.evaluations;
                res.value * jac
            };
            integrate(&mut g, 0.0, 1.0, own / 2.0, 0.0, MAX_SEGMENTS)
        };
        total.value += half.value;
        total.error += half.error;
    }
    total.error += 2.0 * r * worst_inner;
    total.evaluations = evaluations;
    total
}
