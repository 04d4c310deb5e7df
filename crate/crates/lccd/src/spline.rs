//! Periodic cubic spline interpolation and arc-length parametrization.
//!
//! Supports the resampling kernel: a C² periodic interpolant through the
//! polyline nodes (chordal parameter), per-segment Gauss–Legendre arc length,
//! and Newton inversion of the arc-length function for node placement.

/// 12-point Gauss–Legendre abscissae on [-1, 1] (positive half; symmetric).
const GL_X: [f64; 6] = [
    0.125_233_408_511_468_9,
    0.367_831_498_998_180_2,
    0.587_317_954_286_617_4,
    0.769_902_674_194_304_9,
    0.904_117_256_370_474_9,
    0.981_560_634_246_719_3,
];
const GL_W: [f64; 6] = [
    0.249_147_045_813_402_8,
    0.233_492_536_538_354_8,
    0.203_167_426_723_065_9,
    0.160_078_328_543_346_2,
    0.106_939_325_995_318_4,
    0.047_175_336_386_511_83,
];

/// Periodic cubic spline through closed polyline nodes.
pub struct PeriodicSpline {
    /// Knot parameters (chordal), length n+1 with u[n] = period.
    u: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    /// Second derivatives (moments) at knots, length n+1.
    mx: Vec<f64>,
    my: Vec<f64>,
}

impl PeriodicSpline {
    /// Builds the interpolant through `pts` (closed; first point not repeated).
    ///
    /// Knot spacing is the chord length between consecutive nodes, which must
    /// be strictly positive.
    pub fn new(pts: &[[f64; 2]]) -> Self {
        let n = pts.len();
        let mut u = Vec::with_capacity(n + 1);
        u.push(0.0);
        let mut acc = 0.0;
        for i in 0..n {
            let j = (i + 1) % n;
            let d = ((pts[j][0] - pts[i][0]).powi(2) + (pts[j][1] - pts[i][1]).powi(2)).sqrt();
            acc += d;
            u.push(acc);
        }
        let mut x: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let mut y: Vec<f64> = pts.iter().map(|p| p[1]).collect();
        x.push(pts[0][0]);
        y.push(pts[0][1]);
        let mx = periodic_moments(&u, &x);
        let my = periodic_moments(&u, &y);
        PeriodicSpline { u, x, y, mx, my }
    }

    fn segments(&self) -> usize {
        self.u.len() - 1
    }

    /// Position at parameter t within segment `seg`.
    fn eval_seg(&self, seg: usize, t: f64) -> [f64; 2] {
        let (a, b) = (self.u[seg], self.u[seg + 1]);
        let h = b - a;
        let ta = (b - t) / h;
        let tb = (t - a) / h;
        let cub = |v: &[f64], m: &[f64]| -> f64 {
            ta * v[seg]
                + tb * v[seg + 1]
                + ((ta.powi(3) - ta) * m[seg] + (tb.powi(3) - tb) * m[seg + 1]) * h * h / 6.0
        };
        [cub(&self.x, &self.mx), cub(&self.y, &self.my)]
    }

    /// Derivative with respect to the parameter within segment `seg`.
    fn deriv_seg(&self, seg: usize, t: f64) -> [f64; 2] {
        let (a, b) = (self.u[seg], self.u[seg + 1]);
        let h = b - a;
        let ta = (b - t) / h;
        let tb = (t - a) / h;
        let der = |v: &[f64], m: &[f64]| -> f64 {
            (v[seg + 1] - v[seg]) / h
                + ((1.0 - 3.0 * ta * ta) * m[seg] + (3.0 * tb * tb - 1.0) * m[seg + 1]) * h / 6.0
        };
        [der(&self.x, &self.mx), der(&self.y, &self.my)]
    }

    fn speed(&self, seg: usize, t: f64) -> f64 {
        let d = self.deriv_seg(seg, t);
        d[0].hypot(d[1])
    }

    /// Arc length of [a, t] inside segment `seg` by Gauss–Legendre quadrature.
    fn partial_len(&self, seg: usize, a: f64, t: f64) -> f64 {
        let mid = 0.5 * (a + t);
        let half = 0.5 * (t - a);
        let mut acc = 0.0;
        for i in 0..6 {
            acc += GL_W[i] * (self.speed(seg, mid + half * GL_X[i]) + self.speed(seg, mid - half * GL_X[i]));
        }
        half * acc
    }

    /// Cumulative arc length at each knot plus the total.
    pub fn arc_table(&self) -> (Vec<f64>, f64) {
        let n = self.segments();
        let mut cum = Vec::with_capacity(n + 1);
        cum.push(0.0);
        let mut acc = 0.0;
        let mut comp = 0.0; // Kahan compensation
        for seg in 0..n {
            let len = self.partial_len(seg, self.u[seg], self.u[seg + 1]);
            let t = len - comp;
            let sum = acc + t;
            comp = (sum - acc) - t;
            acc = sum;
            cum.push(acc);
        }
        (cum, acc)
    }

    /// Places `n` points at arc lengths `j·L/n`, j = 0..n, measured from node 0.
    ///
    /// Returns the points and the total arc length of the interpolant.
    pub fn resample_uniform(&self, n: usize) -> (Vec<[f64; 2]>, f64) {
        let (cum, total) = self.arc_table();
        let mut out = Vec::with_capacity(n);
        let mut seg = 0usize;
        let nseg = self.segments();
        for j in 0..n {
            let target = total * j as f64 / n as f64;
            while seg + 1 < nseg && cum[seg + 1] < target {
                seg += 1;
            }
            // widen backwards in case targets start inside an earlier segment
            while seg > 0 && cum[seg] > target {
                seg -= 1;
            }
            let (a, b) = (self.u[seg], self.u[seg + 1]);
            let local = target - cum[seg];
            let seg_len = cum[seg + 1] - cum[seg];
            let mut t = if seg_len > 0.0 {
                a + (b - a) * (local / seg_len)
            } else {
                a
            };
            let tol = 2.0 * f64::EPSILON * total.max(1.0);
            let mut prev_err = f64::INFINITY;
            for _ in 0..60 {
                let err = self.partial_len(seg, a, t) - local;
                if err.abs() <= tol || err.abs() >= prev_err {
                    break;
                }
                prev_err = err.abs();
                let sp = self.speed(seg, t).max(1e-300);
                t = (t - err / sp).clamp(a, b);
            }
            out.push(self.eval_seg(seg, t));
        }
        (out, total)
    }
}

/// Solves the cyclic tridiagonal moment system for a periodic cubic spline.
///
/// `u` has length n+1 (u[n] = period), `vals` has length n+1 with
/// vals[n] = vals[0]. Returns moments of length n+1 (last = first).
fn periodic_moments(u: &[f64], vals: &[f64]) -> Vec<f64> {
    let n = u.len() - 1;
    if n == 1 {
        return vec![0.0, 0.0];
    }
    let h = |i: usize| u[i + 1] - u[i];
    // equations for moments m_0..m_{n-1}, cyclic indexing
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let hm = h((i + n - 1) % n);
        let hi = h(i);
        lower[i] = hm / 6.0;
        diag[i] = (hm + hi) / 3.0;
        upper[i] = hi / 6.0;
        let vprev = vals[if i == 0 { n - 1 } else { i - 1 }];
        rhs[i] = (vals[i + 1] - vals[i]) / hi - (vals[i] - vprev) / hm;
    }
    let m = solve_cyclic_tridiag(&lower, &diag, &upper, &rhs);
    let mut out = m;
    out.push(out[0]);
    out
}

/// Cyclic tridiagonal solve via the Sherman–Morrison correction.
fn solve_cyclic_tridiag(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    if n == 2 {
        // dense 2x2: corners combine with the off-diagonals
        let a = diag[0];
        let b = upper[0] + lower[0];
        let c = lower[1] + upper[1];
        let d = diag[1];
        let det = a * d - b * c;
        return vec![(rhs[0] * d - b * rhs[1]) / det, (a * rhs[1] - c * rhs[0]) / det];
    }
    let alpha = lower[0]; // corner A[0][n-1]
    let beta = upper[n - 1]; // corner A[n-1][0]
    let gamma = -diag[0];
    let mut dmod = diag.to_vec();
    dmod[0] -= gamma;
    dmod[n - 1] -= alpha * beta / gamma;
    let solve = |d: &[f64], r: &[f64]| -> Vec<f64> {
        // Thomas algorithm, non-cyclic
        let mut c = vec![0.0; n];
        let mut x = vec![0.0; n];
        c[0] = upper[0] / d[0];
        x[0] = r[0] / d[0];
        for i in 1..n {
            let m = d[i] - lower[i] * c[i - 1];
            c[i] = if i < n - 1 { upper[i] / m } else { 0.0 };
            x[i] = (r[i] - lower[i] * x[i - 1]) / m;
        }
        for i in (0..n - 1).rev() {
            x[i] -= c[i] * x[i + 1];
        }
        x
    };
    let y = solve(&dmod, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = beta;
    let z = solve(&dmod, &u);
    let factor = (y[0] + alpha * y[n - 1] / gamma) / (1.0 + z[0] + alpha * z[n - 1] / gamma);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn circle_pts(n: usize, r: f64) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| {
                let th = 2.0 * PI * i as f64 / n as f64;
                [r * th.cos(), r * th.sin()]
            })
            .collect()
    }

    #[test]
    fn interpolates_nodes() {
        let pts = circle_pts(32, 1.5);
        let sp = PeriodicSpline::new(&pts);
        for (i, p) in pts.iter().enumerate() {
            let q = sp.eval_seg(i, sp.u[i]);
            assert_relative_eq!(q[0], p[0], epsilon = 1e-12);
            assert_relative_eq!(q[1], p[1], epsilon = 1e-12);
        }
    }

    #[test]
    fn circle_arc_length_fourth_order() {
        let mut prev_err = f64::INFINITY;
        for &n in &[64usize, 128, 256] {
            let sp = PeriodicSpline::new(&circle_pts(n, 1.0));
            let (_, total) = sp.arc_table();
            let err = (total - 2.0 * PI).abs();
            assert!(err < prev_err / 8.0, "n={n}: err {err:.3e} prev {prev_err:.3e}");
            prev_err = err;
        }
        // absolute accuracy at n=256
        let sp = PeriodicSpline::new(&circle_pts(256, 1.0));
        let (_, total) = sp.arc_table();
        assert!((total - 2.0 * PI).abs() <= 1e-8);
    }

    #[test]
    fn uniform_resample_of_circle_has_equal_chords() {
        let sp = PeriodicSpline::new(&circle_pts(128, 2.0));
        let (pts, _) = sp.resample_uniform(128);
        let chords: Vec<f64> = (0..128)
            .map(|i| {
                let j = (i + 1) % 128;
                (pts[j][0] - pts[i][0]).hypot(pts[j][1] - pts[i][1])
            })
            .collect();
        let mean = chords.iter().sum::<f64>() / 128.0;
        for c in chords {
            assert_relative_eq!(c, mean, max_relative = 1e-10);
        }
    }
}
