//! Discrete closed plane curves: representation, arc-length resampling,
//! spectral geometry and embeddedness.
//!
//! Sign conventions (fixed once, used everywhere): curves are stored
//! counterclockwise-positive, the inward normal is the tangent rotated by
//! +90°, so a ccw unit circle has k ≡ +1, ∫k ds = 2π and enclosed area +π.

use rustfft::num_complex::Complex;
use std::collections::HashMap;
use std::f64::consts::PI;

use crate::periodic::{apply_deriv_multiplier, fft_forward, fft_inverse};
use crate::spline::PeriodicSpline;
use crate::{Error, Result};

/// Minimum node count for any curve.
pub const MIN_NODES: usize = 16;
/// Relative chord spread accepted by `geometry` as "uniform arc length".
/// Equal arc spacing still leaves chords varying by (kΔs)²/24, so coarse
/// grids on curved arcs legitimately show a few percent.
const UNIFORMITY_TOL: f64 = 0.2;

/// A closed polyline with cyclic node indexing.
#[derive(Debug, Clone)]
pub struct ClosedCurve {
    points: Vec<[f64; 2]>,
    spacing: f64,
    winding: i32,
}

impl ClosedCurve {
    /// Builds a curve from raw nodes (closure implicit; last node != first).
    ///
    /// Rejects non-finite coordinates, duplicated consecutive nodes and
    /// curves of near-zero total length. Winding is the polygon turning
    /// number. Degenerate curves are rejected, not repaired.
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.len() < MIN_NODES {
            return Err(Error::DegenerateCurve(format!(
                "need at least {MIN_NODES} nodes, got {}",
                points.len()
            )));
        }
        let mut total = 0.0;
        let mut min_edge = f64::INFINITY;
        let mut scale = 0.0_f64;
        for p in &points {
            if !p[0].is_finite() || !p[1].is_finite() {
                return Err(Error::DegenerateCurve("non-finite coordinates".into()));
            }
            scale = scale.max(p[0].abs()).max(p[1].abs());
        }
        let n = points.len();
        for i in 0..n {
            let j = (i + 1) % n;
            let d = (points[j][0] - points[i][0]).hypot(points[j][1] - points[i][1]);
            total += d;
            min_edge = min_edge.min(d);
        }
        if total < 1e-12 {
            return Err(Error::DegenerateCurve(format!(
                "total length {total:.3e} below 1e-12"
            )));
        }
        if min_edge <= 1e-14 * scale.max(1.0) {
            return Err(Error::DegenerateCurve(
                "duplicated consecutive points".into(),
            ));
        }
        let winding = polygon_winding(&points);
        let spacing = total / n as f64;
        Ok(ClosedCurve {
            points,
            spacing,
            winding,
        })
    }

    pub(crate) fn from_resampled(points: Vec<[f64; 2]>, spacing: f64, winding: i32) -> Self {
        ClosedCurve {
            points,
            spacing,
            winding,
        }
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn n(&self) -> usize {
        self.points.len()
    }

    /// Arc-length spacing Δs = L/N along the resampling interpolant.
    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Total length L = N·Δs.
    pub fn length(&self) -> f64 {
        self.spacing * self.n() as f64
    }

    /// Signed winding number ω (total turning / 2π).
    pub fn winding(&self) -> i32 {
        self.winding
    }

    /// Relative spread of consecutive chord lengths.
    pub fn chord_spread(&self) -> f64 {
        let n = self.n();
        let mut min = f64::INFINITY;
        let mut max = 0.0_f64;
        for i in 0..n {
            let j = (i + 1) % n;
            let d = (self.points[j][0] - self.points[i][0])
                .hypot(self.points[j][1] - self.points[i][1]);
            min = min.min(d);
            max = max.max(d);
        }
        (max - min) / (0.5 * (max + min))
    }

    /// Homothety about `center` with the given factor; spacing scales along.
    pub(crate) fn scaled_about(&self, center: [f64; 2], factor: f64) -> ClosedCurve {
        let points = self
            .points
            .iter()
            .map(|p| {
                [
                    center[0] + factor * (p[0] - center[0]),
                    center[1] + factor * (p[1] - center[1]),
                ]
            })
            .collect();
        ClosedCurve {
            points,
            spacing: self.spacing * factor,
            winding: self.winding,
        }
    }
}

/// Turning number of a closed polygon from summed exterior angles.
fn polygon_winding(pts: &[[f64; 2]]) -> i32 {
    let n = pts.len();
    let mut total = 0.0;
    for i in 0..n {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let c = pts[(i + 2) % n];
        let e1 = [b[0] - a[0], b[1] - a[1]];
        let e2 = [c[0] - b[0], c[1] - b[1]];
        let cross = e1[0] * e2[1] - e1[1] * e2[0];
        let dot = e1[0] * e2[0] + e1[1] * e2[1];
        total += cross.atan2(dot);
    }
    (total / (2.0 * PI)).round() as i32
}

/// Resamples to `n` nodes at equal arc length along a periodic cubic
/// interpolant of the input; node 0 stays at input node 0.
pub fn resample_by_arclength(curve: &ClosedCurve, n: usize) -> Result<ClosedCurve> {
    if n < MIN_NODES || n % 2 != 0 {
        return Err(Error::InvalidResolution(n));
    }
    let spline = PeriodicSpline::new(&curve.points);
    let (points, total) = spline.resample_uniform(n);
    if !total.is_finite() || total < 1e-12 {
        return Err(Error::DegenerateCurve(format!(
            "interpolant length {total:.3e}"
        )));
    }
    for p in &points {
        if !p[0].is_finite() || !p[1].is_finite() {
            return Err(Error::DegenerateCurve(
                "non-finite coordinates after resample".into(),
            ));
        }
    }
    Ok(ClosedCurve::from_resampled(
        points,
        total / n as f64,
        curve.winding,
    ))
}

/// Per-node differential geometry plus integral quantities of a curve.
///
/// Built by one spectral pass over the node positions. The parametrization
/// speed `|γ_u|` is retained so that integrals carry the correct arc-length
/// measure even when the grid is only approximately uniform.
#[derive(Debug, Clone)]
pub struct GeometryCache {
    pub tangent: Vec<[f64; 2]>,
    /// Inward unit normal: tangent rotated by +90°.
    pub normal: Vec<[f64; 2]>,
    pub k: Vec<f64>,
    pub k_s: Vec<f64>,
    pub k_ss: Vec<f64>,
    pub k_s3: Vec<f64>,
    pub k_s4: Vec<f64>,
    /// Parametrization speed |γ_u| per node (≈ 1 on resampled curves).
    pub speed: Vec<f64>,
    pub length: f64,
    pub area: f64,
    pub kbar: f64,
    pub spacing: f64,
    pub winding: i32,
}

impl GeometryCache {
    /// ∫ f ds with the curve's arc-length measure.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        debug_assert_eq!(f.len(), self.speed.len());
        self.spacing
            * f.iter()
                .zip(&self.speed)
                .map(|(a, v)| a * v)
                .sum::<f64>()
    }

    /// ∫ f ds for a per-node closure.
    pub fn integrate_with(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.spacing
            * self
                .speed
                .iter()
                .enumerate()
                .map(|(i, v)| f(i) * v)
                .sum::<f64>()
    }

    /// Arc-length-weighted centroid.
    pub fn centroid(&self, curve: &ClosedCurve) -> [f64; 2] {
        let cx = self.integrate_with(|i| curve.points()[i][0]) / self.length;
        let cy = self.integrate_with(|i| curve.points()[i][1]) / self.length;
        [cx, cy]
    }

    /// L·∫(k − k̄)² ds, the normalised oscillation of curvature.
    pub fn kosc(&self) -> f64 {
        let kbar = self.kbar;
        self.length * self.integrate_with(|i| (self.k[i] - kbar).powi(2))
    }

    /// Isoperimetric ratio L²/(4πA).
    pub fn isoperimetric_ratio(&self) -> f64 {
        self.length * self.length / (4.0 * PI * self.area)
    }
}

/// Computes the geometry cache; requires uniform arc-length spacing.
pub fn geometry(curve: &ClosedCurve) -> Result<GeometryCache> {
    let spread = curve.chord_spread();
    if !spread.is_finite() || spread > UNIFORMITY_TOL {
        return Err(Error::NonUniformSpacing(spread));
    }
    Ok(geometry_unchecked(curve))
}

/// Geometry without the uniformity precondition; used on intermediate
/// integrator stages where the grid drifts from arc length by O(dt).
pub(crate) fn geometry_unchecked(curve: &ClosedCurve) -> GeometryCache {
    let n = curve.n();
    let ds = curve.spacing;
    let period = ds * n as f64;
    let mut z: Vec<Complex<f64>> = curve
        .points
        .iter()
        .map(|p| Complex::new(p[0], p[1]))
        .collect();
    fft_forward(&mut z);
    let zhat = z;

    let mut zu = zhat.clone();
    apply_deriv_multiplier(&mut zu, period, 1);
    fft_inverse(&mut zu);
    let mut zuu = zhat.clone();
    apply_deriv_multiplier(&mut zuu, period, 2);
    fft_inverse(&mut zuu);

    let speed: Vec<f64> = zu.iter().map(|d| d.norm()).collect();
    let tangent: Vec<[f64; 2]> = zu
        .iter()
        .zip(&speed)
        .map(|(d, v)| [d.re / v, d.im / v])
        .collect();
    // inward normal = tangent rotated +90 degrees
    let normal: Vec<[f64; 2]> = tangent.iter().map(|t| [-t[1], t[0]]).collect();
    // k = (x_u y_uu - y_u x_uu)/|γ_u|³
    let k: Vec<f64> = zu
        .iter()
        .zip(&zuu)
        .zip(&speed)
        .map(|((du, dduu), v)| (du.re * dduu.im - du.im * dduu.re) / (v * v * v))
        .collect();

    // chained arc-length derivatives of k: k_{s,m} = ∂_u k_{s,m-1} / |γ_u|
    let chain = |vals: &[f64]| -> Vec<f64> {
        let mut buf: Vec<Complex<f64>> = vals.iter().map(|&v| Complex::new(v, 0.0)).collect();
        fft_forward(&mut buf);
        apply_deriv_multiplier(&mut buf, period, 1);
        fft_inverse(&mut buf);
        buf.iter()
            .zip(&speed)
            .map(|(d, v)| d.re / v)
            .collect()
    };
    let k_s = chain(&k);
    let k_ss = chain(&k_s);
    let k_s3 = chain(&k_ss);
    let k_s4 = chain(&k_s3);

    let length = ds * speed.iter().sum::<f64>();
    let area = -0.5
        * ds
        * curve
            .points
            .iter()
            .zip(&normal)
            .zip(&speed)
            .map(|((p, nu), v)| (p[0] * nu[0] + p[1] * nu[1]) * v)
            .sum::<f64>();
    let kbar = ds
        * k.iter()
            .zip(&speed)
            .map(|(ki, v)| ki * v)
            .sum::<f64>()
        / length;

    GeometryCache {
        tangent,
        normal,
        k,
        k_s,
        k_ss,
        k_s3,
        k_s4,
        speed,
        length,
        area,
        kbar,
        spacing: ds,
        winding: curve.winding,
    }
}

/// Spectrally accurate length Δu·Σ|γ_u| of a (near-uniform) curve.
pub(crate) fn quadrature_length(curve: &ClosedCurve) -> f64 {
    let n = curve.n();
    let ds = curve.spacing();
    let period = ds * n as f64;
    let mut z: Vec<Complex<f64>> = curve
        .points()
        .iter()
        .map(|p| Complex::new(p[0], p[1]))
        .collect();
    fft_forward(&mut z);
    apply_deriv_multiplier(&mut z, period, 1);
    fft_inverse(&mut z);
    ds * z.iter().map(|d| d.norm()).sum::<f64>()
}

// ---------------------------------------------------------------------------
// embeddedness
// ---------------------------------------------------------------------------

#[inline]
fn orient(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
}

#[inline]
fn on_segment(a: [f64; 2], b: [f64; 2], p: [f64; 2]) -> bool {
    p[0] >= a[0].min(b[0])
        && p[0] <= a[0].max(b[0])
        && p[1] >= a[1].min(b[1])
        && p[1] <= a[1].max(b[1])
}

/// Segment-segment intersection including touching and overlap.
pub(crate) fn segments_intersect(p1: [f64; 2], p2: [f64; 2], q1: [f64; 2], q2: [f64; 2]) -> bool {
    let d1 = orient(q1, q2, p1);
    let d2 = orient(q1, q2, p2);
    let d3 = orient(p1, p2, q1);
    let d4 = orient(p1, p2, q2);
    if ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
    {
        return true;
    }
    (d1 == 0.0 && on_segment(q1, q2, p1))
        || (d2 == 0.0 && on_segment(q1, q2, p2))
        || (d3 == 0.0 && on_segment(p1, p2, q1))
        || (d4 == 0.0 && on_segment(p1, p2, q2))
}

/// True iff no two non-adjacent edges of the polyline intersect.
///
/// Broad phase is a uniform grid hash keyed on edge bounding boxes; the
/// narrow phase uses orientation tests. Edges sharing a node are adjacent
/// and excluded.
pub fn is_embedded(curve: &ClosedCurve) -> bool {
    let pts = &curve.points;
    let n = pts.len();
    let edge = |i: usize| (pts[i], pts[(i + 1) % n]);
    let mut max_len = 0.0_f64;
    for i in 0..n {
        let (a, b) = edge(i);
        max_len = max_len.max((b[0] - a[0]).hypot(b[1] - a[1]));
    }
    let cell = max_len.max(1e-300);
    let keyf = |x: f64, y: f64| ((x / cell).floor() as i64, (y / cell).floor() as i64);
    let mut grid: HashMap<(i64, i64), Vec<u32>> = HashMap::new();
    for i in 0..n {
        let (a, b) = edge(i);
        let (kx0, ky0) = keyf(a[0].min(b[0]), a[1].min(b[1]));
        let (kx1, ky1) = keyf(a[0].max(b[0]), a[1].max(b[1]));
        for kx in kx0..=kx1 {
            for ky in ky0..=ky1 {
                grid.entry((kx, ky)).or_default().push(i as u32);
            }
        }
    }
    let adjacent = |i: usize, j: usize| {
        let d = if i > j { i - j } else { j - i };
        d == 1 || d == n - 1
    };
    for ((kx, ky), edges) in &grid {
        for &i in edges {
            // same cell, higher index
            for &j in edges.iter().filter(|&&j| j > i) {
                if !adjacent(i as usize, j as usize) {
                    let (a, b) = edge(i as usize);
                    let (c, d) = edge(j as usize);
                    if segments_intersect(a, b, c, d) {
                        return false;
                    }
                }
            }
            // forward neighbor cells (each unordered cell pair visited once)
            for (dx, dy) in [(1i64, 0i64), (1, 1), (0, 1), (-1, 1)] {
                if let Some(other) = grid.get(&(kx + dx, ky + dy)) {
                    for &j in other {
                        if j != i && !adjacent(i as usize, j as usize) {
                            let (a, b) = edge(i as usize);
                            let (c, d) = edge(j as usize);
                            if segments_intersect(a, b, c, d) {
                                return false;
                            }
                        }
                    }
                }
            }
        }
    }
    true
}

/// O(N²) all-pairs embeddedness; independent reference for `is_embedded`.
pub fn is_embedded_bruteforce(curve: &ClosedCurve) -> bool {
    let pts = &curve.points;
    let n = pts.len();
    for i in 0..n {
        for j in i + 1..n {
            let d = j - i;
            if d == 1 || d == n - 1 {
                continue;
            }
            if segments_intersect(pts[i], pts[(i + 1) % n], pts[j], pts[(j + 1) % n]) {
                return false;
            }
        }
    }
    true
}
