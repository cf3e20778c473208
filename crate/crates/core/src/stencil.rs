//! Finite-difference stencils on uniform 1-D samples.
//!
//! Every stencil is written in terms of differences of samples so that it
//! returns exactly zero on constant data.

/// Second-order centered first derivative at interior index `i`.
#[inline]
pub fn centered_d1(a: &[f64], i: usize, h: f64) -> f64 {
    (a[i + 1] - a[i - 1]) / (2.0 * h)
}

/// Second-order centered second derivative at interior index `i`.
#[inline]
pub fn centered_d2(a: &[f64], i: usize, h: f64) -> f64 {
    ((a[i + 1] - a[i]) - (a[i] - a[i - 1])) / (h * h)
}

/// Fourth-order centered first derivative; needs `2 <= i < n - 2`.
#[inline]
pub fn centered4_d1(a: &[f64], i: usize, h: f64) -> f64 {
    ((a[i - 2] - a[i + 2]) + 8.0 * (a[i + 1] - a[i - 1])) / (12.0 * h)
}

/// Fourth-order centered second derivative; needs `2 <= i < n - 2`.
#[inline]
pub fn centered4_d2(a: &[f64], i: usize, h: f64) -> f64 {
    let c = a[i];
    (16.0 * ((a[i - 1] - c) + (a[i + 1] - c)) - ((a[i - 2] - c) + (a[i + 2] - c))) / (12.0 * h * h)
}

/// First derivative on the whole line: centered inside, second-order
/// one-sided at the endpoints. Needs `n >= 3`.
pub fn d1_full(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    debug_assert!(n >= 3);
    let mut out = vec![0.0; n];
    out[0] = (3.0 * (a[1] - a[0]) - (a[2] - a[1])) / (2.0 * h);
    for (i, o) in out.iter_mut().enumerate().take(n - 1).skip(1) {
        *o = centered_d1(a, i, h);
    }
    out[n - 1] = (3.0 * (a[n - 1] - a[n - 2]) - (a[n - 2] - a[n - 3])) / (2.0 * h);
    out
}

/// Second derivative on the whole line: centered inside, second-order
/// one-sided at the endpoints when `n >= 4` (first-order when `n == 3`).
pub fn d2_full(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    debug_assert!(n >= 3);
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().take(n - 1).skip(1) {
        *o = centered_d2(a, i, h);
    }
    if n >= 4 {
        let end = |b0: f64, b1: f64, b2: f64, b3: f64| (2.0 * (b0 - b1) - 3.0 * (b1 - b2) + (b2 - b3)) / (h * h);
        out[0] = end(a[0], a[1], a[2], a[3]);
        out[n - 1] = end(a[n - 1], a[n - 2], a[n - 3], a[n - 4]);
    } else {
        out[0] = out[1];
        out[n - 1] = out[n - 2];
    }
    out
}

/// Fourth-order first derivative on the whole line (one-sided five-point
/// stencils near the ends). Needs `n >= 5`.
pub fn d1_full4(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    debug_assert!(n >= 5);
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().take(n - 2).skip(2) {
        *o = centered4_d1(a, i, h);
    }
    // one-sided: (-25 a0 + 48 a1 - 36 a2 + 16 a3 - 3 a4) / 12h, and the
    // shifted (-3 a0 - 10 a1 + 18 a2 - 6 a3 + a4) / 12h
    let fwd0 = |b: [f64; 5]| {
        (48.0 * (b[1] - b[0]) - 36.0 * (b[2] - b[0]) + 16.0 * (b[3] - b[0]) - 3.0 * (b[4] - b[0])) / (12.0 * h)
    };
    let fwd1 =
        |b: [f64; 5]| (-3.0 * (b[0] - b[1]) + 18.0 * (b[2] - b[1]) - 6.0 * (b[3] - b[1]) + (b[4] - b[1])) / (12.0 * h);
    let head = [a[0], a[1], a[2], a[3], a[4]];
    let tail = [a[n - 1], a[n - 2], a[n - 3], a[n - 4], a[n - 5]];
    out[0] = fwd0(head);
    out[1] = fwd1(head);
    out[n - 1] = -fwd0(tail);
    out[n - 2] = -fwd1(tail);
    out
}

/// Fourth-order second derivative on the whole line (one-sided six-point
/// stencils near the ends). Needs `n >= 6`.
pub fn d2_full4(a: &[f64], h: f64) -> Vec<f64> {
    let n = a.len();
    debug_assert!(n >= 6);
    let mut out = vec![0.0; n];
    for (i, o) in out.iter_mut().enumerate().take(n - 2).skip(2) {
        *o = centered4_d2(a, i, h);
    }
    // (45, -154, 214, -156, 61, -10) and (10, -15, -4, 14, -6, 1), over 12 h^2
    const C0: [f64; 6] = [45.0, -154.0, 214.0, -156.0, 61.0, -10.0];
    const C1: [f64; 6] = [10.0, -15.0, -4.0, 14.0, -6.0, 1.0];
    let apply = |c: &[f64; 6], b: [f64; 6]| {
        c.iter().zip(b).skip(1).map(|(ck, bk)| ck * (bk - b[0])).sum::<f64>() / (12.0 * h * h)
    };
    let head = [a[0], a[1], a[2], a[3], a[4], a[5]];
    let tail = [a[n - 1], a[n - 2], a[n - 3], a[n - 4], a[n - 5], a[n - 6]];
    out[0] = apply(&C0, head);
    out[1] = apply(&C1, head);
    out[n - 1] = apply(&C0, tail);
    out[n - 2] = apply(&C1, tail);
    out
}
