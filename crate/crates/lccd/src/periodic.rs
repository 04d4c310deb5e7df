//! Spectral calculus for smooth periodic scalar fields on a uniform grid.
//!
//! Differentiation is done through the discrete Fourier transform with
//! wavenumbers `2πj/P`; it is exact (to roundoff) on trigonometric
//! polynomials of degree below the Nyquist mode. Quadrature is the
//! trapezoidal rule, which is spectrally accurate on periodic grids.

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::Serialize;
use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::{Error, Result};

/// Relative slack used by every inequality check.
pub const INEQ_REL_SLACK: f64 = 1e-8;
/// Absolute floor added to inequality slacks to avoid machine-zero failures.
pub const INEQ_ABS_FLOOR: f64 = 1e-30;

thread_local! {
    static PLANS: RefCell<HashMap<usize, (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>> =
        RefCell::new(HashMap::new());
}

fn with_plans<T>(n: usize, f: impl FnOnce(&Arc<dyn Fft<f64>>, &Arc<dyn Fft<f64>>) -> T) -> T {
    PLANS.with(|cell| {
        let mut map = cell.borrow_mut();
        let (fwd, inv) = map.entry(n).or_insert_with(|| {
            let mut planner = FftPlanner::new();
            (planner.plan_fft_forward(n), planner.plan_fft_inverse(n))
        });
        f(fwd, inv)
    })
}

/// In-place forward DFT (unnormalized).
pub(crate) fn fft_forward(buf: &mut [Complex<f64>]) {
    with_plans(buf.len(), |fwd, _| fwd.process(buf));
}

/// In-place inverse DFT, normalized by 1/n.
pub(crate) fn fft_inverse(buf: &mut [Complex<f64>]) {
    let n = buf.len();
    with_plans(n, |_, inv| inv.process(buf));
    let scale = 1.0 / n as f64;
    for z in buf.iter_mut() {
        *z *= scale;
    }
}

/// Signed integer mode index for bin `i` of an n-point DFT.
#[inline]
pub(crate) fn mode_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Multiplies spectrum in place by (i q)^m, zeroing the Nyquist mode for odd m.
pub(crate) fn apply_deriv_multiplier(hat: &mut [Complex<f64>], period: f64, m: usize) {
    let n = hat.len();
    for (i, z) in hat.iter_mut().enumerate() {
        let j = mode_index(i, n);
        if m % 2 == 1 && n % 2 == 0 && i == n / 2 {
            *z = Complex::new(0.0, 0.0);
            continue;
        }
        let q = 2.0 * PI * j as f64 / period;
        *z *= Complex::new(0.0, q).powu(m as u32);
    }
}

/// A real scalar field sampled on the uniform periodic grid.
#[derive(Debug, Clone)]
pub struct PeriodicField {
    pub values: Vec<f64>,
    pub spacing: f64,
}

impl PeriodicField {
    pub fn new(values: Vec<f64>, spacing: f64) -> Result<Self> {
        if !values.iter().all(|v| v.is_finite()) || !spacing.is_finite() || spacing <= 0.0 {
            return Err(Error::NonFiniteField);
        }
        Ok(Self { values, spacing })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Grid period P = n Δs.
    pub fn period(&self) -> f64 {
        self.len() as f64 * self.spacing
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |a, v| a.max(v.abs()))
    }
}

/// Spectral m-th derivative of a periodic field.
pub fn derivative(f: &PeriodicField, m: usize) -> Result<PeriodicField> {
    if m == 0 || m > 6 {
        return Err(Error::BadDerivativeOrder(m));
    }
    if !f.values.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFiniteField);
    }
    let vals = derivative_values(&f.values, f.period(), m);
    Ok(PeriodicField {
        values: vals,
        spacing: f.spacing,
    })
}

pub(crate) fn derivative_values(values: &[f64], period: f64, m: usize) -> Vec<f64> {
    let mut buf: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    fft_forward(&mut buf);
    apply_deriv_multiplier(&mut buf, period, m);
    fft_inverse(&mut buf);
    buf.iter().map(|z| z.re).collect()
}

/// Trapezoidal quadrature Δs·Σ f_i over one period.
pub fn integral(f: &PeriodicField) -> f64 {
    f.spacing * f.values.iter().sum::<f64>()
}

/// 8th-order centered finite differences on the periodic grid.
///
/// Cross-validation oracle for the spectral kernel; not used by the flow.
pub fn derivative_fd8(f: &PeriodicField, m: usize) -> Result<PeriodicField> {
    // 9-point centered stencils, orders 1 and 2; higher orders by chaining.
    const C1: [f64; 9] = [
        1.0 / 280.0,
        -4.0 / 105.0,
        1.0 / 5.0,
        -4.0 / 5.0,
        0.0,
        4.0 / 5.0,
        -1.0 / 5.0,
        4.0 / 105.0,
        -1.0 / 280.0,
    ];
    const C2: [f64; 9] = [
        -1.0 / 560.0,
        8.0 / 315.0,
        -1.0 / 5.0,
        8.0 / 5.0,
        -205.0 / 72.0,
        8.0 / 5.0,
        -1.0 / 5.0,
        8.0 / 315.0,
        -1.0 / 560.0,
    ];
    if m == 0 || m > 6 {
        return Err(Error::BadDerivativeOrder(m));
    }
    let apply = |vals: &[f64], c: &[f64; 9], pow: i32| -> Vec<f64> {
        let n = vals.len();
        let h = f.spacing.powi(pow);
        (0..n)
            .map(|i| {
                let mut acc = 0.0;
                for (o, &cc) in c.iter().enumerate() {
                    let idx = (i + n + o - 4) % n;
                    acc += cc * vals[idx];
                }
                acc / h
            })
            .collect()
    };
    let mut vals = f.values.clone();
    let mut rem = m;
    while rem >= 2 {
        vals = apply(&vals, &C2, 2);
        rem -= 2;
    }
    if rem == 1 {
        vals = apply(&vals, &C1, 1);
    }
    Ok(PeriodicField {
        values: vals,
        spacing: f.spacing,
    })
}

/// One inequality evaluation, serialized as `{name, lhs, rhs, slack, holds}`.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityReport {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub holds: bool,
}

impl InequalityReport {
    /// lhs <= rhs within relative slack against the larger side.
    pub fn check(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = INEQ_REL_SLACK * lhs.abs().max(rhs.abs()) + INEQ_ABS_FLOOR;
        InequalityReport {
            name: name.to_string(),
            lhs,
            rhs,
            slack,
            holds: lhs <= rhs + slack,
        }
    }
}

/// Result of the Poincaré–Sobolev–Wirtinger checks for a zero-mean field.
#[derive(Debug, Clone, Serialize)]
pub struct PswReport {
    pub subtracted_mean: f64,
    pub l2: InequalityReport,
    pub sup: InequalityReport,
    pub holds: bool,
}

/// Checks ∫f² ≤ (P²/4π²)∫f_x² and ‖f‖∞² ≤ (P/2π)∫f_x² after removing the mean.
pub fn check_psw(f: &PeriodicField) -> Result<PswReport> {
    let mean = f.mean();
    let centered = PeriodicField::new(f.values.iter().map(|v| v - mean).collect(), f.spacing)?;
    let fx = derivative(&centered, 1)?;
    let p = f.period();
    let int_f2 = integral(&PeriodicField::new(
        centered.values.iter().map(|v| v * v).collect(),
        f.spacing,
    )?);
    let int_fx2 = integral(&PeriodicField::new(
        fx.values.iter().map(|v| v * v).collect(),
        f.spacing,
    )?);
    let sup2 = centered.max_abs().powi(2);
    let l2 = InequalityReport::check("psw_l2", int_f2, p * p / (4.0 * PI * PI) * int_fx2);
    let sup = InequalityReport::check("psw_sup", sup2, p / (2.0 * PI) * int_fx2);
    let holds = l2.holds && sup.holds;
    Ok(PswReport {
        subtracted_mean: mean,
        l2,
        sup,
        holds,
    })
}

/// Checks ∫k_{s^{n-1}}² ds ≤ (∫k² ds)^{1/n} (∫k_{s^n}² ds)^{(n-1)/n}.
pub fn check_iterated_interpolation(k: &PeriodicField, n: usize) -> Result<InequalityReport> {
    if n == 0 || n > 4 {
        return Err(Error::BadDerivativeOrder(n));
    }
    let sq_int = |g: &PeriodicField| -> f64 {
        g.spacing * g.values.iter().map(|v| v * v).sum::<f64>()
    };
    let int_k2 = sq_int(k);
    let int_lo = if n == 1 {
        int_k2
    } else {
        sq_int(&derivative(k, n - 1)?)
    };
    let int_hi = sq_int(&derivative(k, n)?);
    let rhs = int_k2.powf(1.0 / n as f64) * int_hi.powf((n as f64 - 1.0) / n as f64);
    Ok(InequalityReport::check(
        &format!("iterated_interpolation_n{n}"),
        int_lo,
        rhs,
    ))
}

/// Checks |h| ≤ (1/2π)(∫k² ds)^{1-1/n}(∫k_{s^n}² ds)^{1/n} on a curve.
pub fn check_h_bound(curve: &crate::ClosedCurve, n: usize) -> Result<InequalityReport> {
    if n == 0 || n > 4 {
        return Err(Error::BadDerivativeOrder(n));
    }
    let g = crate::geometry(curve)?;
    let h = crate::flow::compute_h(curve, crate::flow::HMode::Continuum)?;
    let k = PeriodicField::new(g.k.clone(), curve.spacing())?;
    let sq_int = |g: &PeriodicField| -> f64 {
        g.spacing * g.values.iter().map(|v| v * v).sum::<f64>()
    };
    let int_k2 = sq_int(&k);
    let int_hi = sq_int(&derivative(&k, n)?);
    let rhs = int_k2.powf(1.0 - 1.0 / n as f64) * int_hi.powf(1.0 / n as f64) / (2.0 * PI);
    Ok(InequalityReport::check(
        &format!("h_bound_n{n}"),
        h.abs(),
        rhs,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn grid(n: usize, period: f64) -> Vec<f64> {
        (0..n).map(|i| i as f64 * period / n as f64).collect()
    }

    #[test]
    fn derivative_of_sine_is_cosine() {
        let p = 5.0;
        let n = 64;
        let f = PeriodicField::new(
            grid(n, p)
                .iter()
                .map(|x| (2.0 * PI * x / p).sin())
                .collect(),
            p / n as f64,
        )
        .unwrap();
        let d = derivative(&f, 1).unwrap();
        for (i, x) in grid(n, p).iter().enumerate() {
            assert_relative_eq!(
                d.values[i],
                2.0 * PI / p * (2.0 * PI * x / p).cos(),
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn derivative_of_constant_vanishes() {
        let f = PeriodicField::new(vec![3.7; 128], 0.1).unwrap();
        let d = derivative(&f, 4).unwrap();
        assert!(d.max_abs() <= 1e-12);
    }

    #[test]
    fn exp_sin_second_derivative_matches_fd8_oracle() {
        let p = 2.0 * PI;
        let n = 128;
        let f = PeriodicField::new(
            grid(n, p).iter().map(|x| x.sin().exp()).collect(),
            p / n as f64,
        )
        .unwrap();
        let spec = derivative(&f, 2).unwrap();
        let fd = derivative_fd8(&f, 2).unwrap();
        let err = spec
            .values
            .iter()
            .zip(&fd.values)
            .fold(0.0_f64, |a, (s, o)| a.max((s - o).abs()));
        assert!(err <= 1e-6, "spectral vs fd8 max error {err:.3e}");
    }

    #[test]
    fn rejects_bad_inputs() {
        let f = PeriodicField::new(vec![1.0, f64::NAN], 0.1);
        assert!(f.is_err());
        let f = PeriodicField::new(vec![1.0; 16], 0.1).unwrap();
        assert!(derivative(&f, 7).is_err());
        assert!(derivative(&f, 0).is_err());
    }

    #[test]
    fn integral_examples() {
        let p = 2.0 * PI;
        let n = 64;
        let ds = p / n as f64;
        let ones = PeriodicField::new(vec![1.0; n], ds).unwrap();
        assert_relative_eq!(integral(&ones), 2.0 * PI, epsilon = 1e-14);
        let sin = PeriodicField::new(grid(n, p).iter().map(|x| x.sin()).collect(), ds).unwrap();
        assert!(integral(&sin).abs() <= 1e-14);
        let sin2 =
            PeriodicField::new(grid(n, p).iter().map(|x| x.sin().powi(2)).collect(), ds).unwrap();
        assert_relative_eq!(integral(&sin2), PI, epsilon = 1e-12);
    }

    #[test]
    fn psw_equality_for_pure_sinusoid() {
        let p = 3.0;
        let n = 128;
        let (a, b) = (1.3, 0.7);
        let f = PeriodicField::new(
            grid(n, p)
                .iter()
                .map(|x| a * (2.0 * PI * x / p + b).sin())
                .collect(),
            p / n as f64,
        )
        .unwrap();
        let rep = check_psw(&f).unwrap();
        assert!(rep.holds);
        assert_relative_eq!(rep.l2.lhs, rep.l2.rhs, max_relative = 1e-8);
    }

    #[test]
    fn psw_zero_field() {
        let f = PeriodicField::new(vec![0.0; 32], 0.5).unwrap();
        let rep = check_psw(&f).unwrap();
        assert!(rep.holds);
        assert_eq!(rep.l2.lhs, 0.0);
    }

    #[test]
    fn psw_holds_on_random_band_limited_fields() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 128;
        let p = 2.0 * PI;
        for _ in 0..1000 {
            let nmodes = rng.gen_range(1..=10);
            let mut vals = vec![0.0; n];
            for _ in 0..nmodes {
                let m = rng.gen_range(1..=(n / 4)) as f64;
                let amp: f64 = rng.gen_range(-2.0..2.0);
                let ph: f64 = rng.gen_range(0.0..2.0 * PI);
                for (i, v) in vals.iter_mut().enumerate() {
                    *v += amp * (m * (i as f64 * p / n as f64) + ph).sin();
                }
            }
            let f = PeriodicField::new(vals, p / n as f64).unwrap();
            let rep = check_psw(&f).unwrap();
            assert!(rep.holds, "psw failed: {rep:?}");
        }
    }

    #[test]
    fn iterated_interpolation_n1_is_equality() {
        let n = 64;
        let p = 2.0 * PI;
        let f = PeriodicField::new(
            grid(n, p).iter().map(|x| 1.0 + 0.3 * (2.0 * x).cos()).collect(),
            p / n as f64,
        )
        .unwrap();
        let rep = check_iterated_interpolation(&f, 1).unwrap();
        assert!(rep.holds);
        assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-14);
    }

    #[test]
    fn iterated_interpolation_pure_mode_closed_form() {
        // k = sin(mx) on P = 2π: ∫k_{s^j}² = m^{2j}·P/2.
        let n = 256;
        let p = 2.0 * PI;
        let m = 3.0;
        let f = PeriodicField::new(
            grid(n, p).iter().map(|x| (m * x).sin()).collect(),
            p / n as f64,
        )
        .unwrap();
        for order in 2..=4usize {
            let rep = check_iterated_interpolation(&f, order).unwrap();
            assert!(rep.holds);
            let lhs_exact = m.powi(2 * (order as i32 - 1)) * p / 2.0;
            let rhs_exact = (p / 2.0).powf(1.0 / order as f64)
                * (m.powi(2 * order as i32) * p / 2.0).powf((order as f64 - 1.0) / order as f64);
            assert_relative_eq!(rep.lhs, lhs_exact, max_relative = 1e-10);
            assert_relative_eq!(rep.rhs, rhs_exact, max_relative = 1e-10);
            // for a pure mode the inequality is exactly tight
            assert_relative_eq!(rep.lhs, rep.rhs, max_relative = 1e-10);
        }
    }

    #[test]
    fn derivative_commutes_with_cyclic_shift() {
        let n = 96;
        let p = 4.0;
        let ds = p / n as f64;
        let vals: Vec<f64> = grid(n, p)
            .iter()
            .map(|x| (2.0 * PI * x / p).sin().exp())
            .collect();
        let f = PeriodicField::new(vals.clone(), ds).unwrap();
        let d = derivative(&f, 1).unwrap();
        let shift = 17;
        let mut shifted = vals.clone();
        shifted.rotate_left(shift);
        let ds_f = PeriodicField::new(shifted, ds).unwrap();
        let d_shifted = derivative(&ds_f, 1).unwrap();
        for i in 0..n {
            assert_relative_eq!(
                d_shifted.values[i],
                d.values[(i + shift) % n],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn integral_of_derivative_vanishes_and_parts() {
        let n = 128;
        let p = 2.0 * PI;
        let ds = p / n as f64;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let a: f64 = rng.gen_range(-1.0..1.0);
            let b: f64 = rng.gen_range(-1.0..1.0);
            let f = PeriodicField::new(
                grid(n, p)
                    .iter()
                    .map(|x| a * (3.0 * x).cos() + b * x.sin().exp())
                    .collect(),
                ds,
            )
            .unwrap();
            let g = PeriodicField::new(
                grid(n, p).iter().map(|x| (2.0 * x).sin() + 0.2).collect(),
                ds,
            )
            .unwrap();
            let df = derivative(&f, 1).unwrap();
            let dg = derivative(&g, 1).unwrap();
            assert!(integral(&df).abs() <= 1e-12);
            let fdg: Vec<f64> = f.values.iter().zip(&dg.values).map(|(x, y)| x * y).collect();
            let dfg: Vec<f64> = df.values.iter().zip(&g.values).map(|(x, y)| x * y).collect();
            let lhs = integral(&PeriodicField::new(fdg, ds).unwrap());
            let rhs = integral(&PeriodicField::new(dfg, ds).unwrap());
            let scale = lhs.abs().max(rhs.abs()).max(1e-30);
            assert!((lhs + rhs).abs() / scale <= 1e-10);
        }
    }
}
