//! Deterministic initial-curve families and named experiment bundles.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::curve::{geometry, resample_by_arclength, ClosedCurve};
use crate::diagnostics::{
    check_kosc_budget, check_nonconvex_bound, fit_decay, fit_log_linear, predicted_decay_rate,
    CheckReport, DecayField, KoscBudget,
};
use crate::flow::{evolve, FlowConfig, FlowState, HMode, Observer, Scheme, TrajectorySummary};
use crate::periodic::{check_h_bound, check_iterated_interpolation, check_psw, PeriodicField};
use crate::{Error, Result};

/// Initial-curve family; generators are deterministic in their parameters.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    Circle { r: f64 },
    /// ρ(θ) = r + Σ amplitude·cos(mθ + phase), sampled in θ and then
    /// arc-length resampled.
    FourierCircle { r: f64, modes: Vec<(u32, f64, f64)> },
    Ellipse { a: f64, b: f64 },
    /// Circle of radius r traversed ω times.
    MultiCircle { r: f64, omega: u32 },
}

/// Builds the family curve at `n` uniform arc-length nodes, counterclockwise.
pub fn make_curve(family: &Family, n: usize) -> Result<ClosedCurve> {
    let oversample = (8 * n).max(8192);
    let pts: Vec<[f64; 2]> = match family {
        Family::Circle { r } => {
            if *r <= 0.0 {
                return Err(Error::BadFamily(format!("circle radius {r} must be positive")));
            }
            (0..oversample)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / oversample as f64;
                    [r * th.cos(), r * th.sin()]
                })
                .collect()
        }
        Family::FourierCircle { r, modes } => {
            if *r <= 0.0 {
                return Err(Error::BadFamily(format!("base radius {r} must be positive")));
            }
            let rho = |th: f64| -> f64 {
                r + modes
                    .iter()
                    .map(|(m, a, p)| a * (*m as f64 * th + p).cos())
                    .sum::<f64>()
            };
            let d_rho = |th: f64| -> f64 {
                -modes
                    .iter()
                    .map(|(m, a, p)| a * *m as f64 * (*m as f64 * th + p).sin())
                    .sum::<f64>()
            };
            let dd_rho = |th: f64| -> f64 {
                -modes
                    .iter()
                    .map(|(m, a, p)| a * (*m as f64).powi(2) * (*m as f64 * th + p).cos())
                    .sum::<f64>()
            };
            // regularity scan: ρ > 0 and finite curvature of the radial graph
            let mut min_rho = f64::INFINITY;
            let mut max_abs_k = 0.0_f64;
            let mut worst_theta = 0.0;
            for i in 0..oversample {
                let th = 2.0 * PI * i as f64 / oversample as f64;
                let (p0, p1, p2) = (rho(th), d_rho(th), dd_rho(th));
                min_rho = min_rho.min(p0);
                let denom = (p0 * p0 + p1 * p1).powf(1.5);
                if denom > 0.0 {
                    let k = (p0 * p0 + 2.0 * p1 * p1 - p0 * p2) / denom;
                    if k.abs() > max_abs_k {
                        max_abs_k = k.abs();
                        worst_theta = th;
                    }
                }
            }
            if min_rho <= 0.01 * r {
                return Err(Error::BadFamily(format!(
                    "radial graph degenerates: min ρ = {min_rho:.4e}, curvature extremum \
                     |k| = {max_abs_k:.4e} at θ = {worst_theta:.4}"
                )));
            }
            (0..oversample)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / oversample as f64;
                    let p = rho(th);
                    [p * th.cos(), p * th.sin()]
                })
                .collect()
        }
        Family::Ellipse { a, b } => {
            if *a <= 0.0 || *b <= 0.0 {
                return Err(Error::BadFamily(format!("ellipse axes ({a}, {b}) must be positive")));
            }
            (0..oversample)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / oversample as f64;
                    [a * th.cos(), b * th.sin()]
                })
                .collect()
        }
        Family::MultiCircle { r, omega } => {
            if *r <= 0.0 || *omega == 0 {
                return Err(Error::BadFamily(format!(
                    "multi_circle needs r > 0 and omega >= 1, got ({r}, {omega})"
                )));
            }
            (0..oversample)
                .map(|i| {
                    let th = 2.0 * PI * *omega as f64 * i as f64 / oversample as f64;
                    [r * th.cos(), r * th.sin()]
                })
                .collect()
        }
    };
    let raw = ClosedCurve::from_points(pts)?;
    resample_by_arclength(&raw, n)
}

/// Theorem-hypothesis status of an initial curve: ω = 1, K_osc(0) < K*
/// and I(0) < 4π²/(4π² − K*).
#[derive(Debug, Clone, Serialize)]
pub struct HypothesisReport {
    pub kosc0: f64,
    pub isoperimetric0: f64,
    pub k_star: f64,
    pub winding: i32,
    pub holds: bool,
}

pub fn hypothesis_report(curve: &ClosedCurve) -> Result<HypothesisReport> {
    let g = geometry(curve)?;
    let omega = curve.winding();
    let two_k_star = crate::diagnostics::solve_k_star(omega.unsigned_abs().max(1))?;
    let k_star = 0.5 * two_k_star;
    let kosc0 = g.kosc();
    let i0 = g.isoperimetric_ratio();
    let holds = omega == 1 && kosc0 < k_star && i0 < 4.0 * PI * PI / (4.0 * PI * PI - k_star);
    Ok(HypothesisReport {
        kosc0,
        isoperimetric0: i0,
        k_star,
        winding: omega,
        holds,
    })
}

/// Expected-outcome assertion attached to a scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum ScenarioCheck {
    /// Max relative length drift and per-interval area monotonicity.
    Conservation {
        max_rel_length_drift: f64,
        area_tol_rel: f64,
    },
    /// Final nodes lie on a circle of radius L₀/2π.
    CircleLimit { max_radial_dev_rel: f64 },
    /// ‖K_osc‖₁, the 2K* barrier and the running pointwise bound.
    KoscBudget,
    /// nonconvex_time within its bound; area growth on non-convex samples.
    NonconvexBound { require_positive: bool },
    /// Embedded flag true at every record.
    EmbeddedThroughout,
    /// Fitted decay rate of a field vs the linearized prediction.
    DecayRate {
        field: String,
        mode: u32,
        rel_tol: f64,
        r2_min: f64,
    },
    /// Evolution-identity residuals below tol wherever resolvable.
    IdentityResiduals { tol: f64, floor_max: f64 },
    /// PSW, iterated interpolation (n ≤ 4) and h bounds (n ≤ 4) at every
    /// record (attached as an observer during the run).
    InequalitySweep,
    /// Per-interval displacement increments decay log-linearly.
    DisplacementDecay { r2_min: f64 },
    /// Zero-motion trajectory for stationary data.
    Stationarity { max_displacement: f64 },
}

/// A named, reproducible experiment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    pub family: Family,
    pub config: FlowConfig,
    pub checks: Vec<ScenarioCheck>,
}

/// The code-defined scenario registry.
pub fn registry() -> Vec<Scenario> {
    vec![
        Scenario {
            name: "circle_static".into(),
            family: Family::Circle { r: 1.0 },
            config: FlowConfig {
                n: 128,
                sigma: 0.05,
                scheme: Scheme::IfRk4,
                h_mode: HMode::DiscreteExact,
                rescale: true,
                t_end: 5e-4,
                kosc_stop: 0.0,
                record_every: 5,
                resample_every: 1,
                snapshot_every: 0,
            },
            checks: vec![
                ScenarioCheck::Stationarity {
                    max_displacement: 1e-9,
                },
                ScenarioCheck::Conservation {
                    max_rel_length_drift: 1e-10,
                    area_tol_rel: 1e-10,
                },
                ScenarioCheck::EmbeddedThroughout,
                ScenarioCheck::InequalitySweep,
            ],
        },
        Scenario {
            name: "thm1_mode2".into(),
            family: Family::FourierCircle {
                r: 1.0,
                modes: vec![(2, 0.05, 0.0)],
            },
            config: FlowConfig {
                n: 256,
                sigma: 0.05,
                scheme: Scheme::IfRk4,
                h_mode: HMode::DiscreteExact,
                rescale: true,
                t_end: 2.0,
                kosc_stop: 1e-10,
                record_every: 5,
                resample_every: 1,
                snapshot_every: 0,
            },
            checks: vec![
                ScenarioCheck::Conservation {
                    max_rel_length_drift: 1e-6,
                    area_tol_rel: 1e-10,
                },
                ScenarioCheck::CircleLimit {
                    max_radial_dev_rel: 1e-6,
                },
                ScenarioCheck::KoscBudget,
                ScenarioCheck::EmbeddedThroughout,
                ScenarioCheck::DecayRate {
                    field: "kosc_integrand".into(),
                    mode: 2,
                    rel_tol: 0.05,
                    r2_min: 0.999,
                },
                ScenarioCheck::DecayRate {
                    field: "nkss2".into(),
                    mode: 2,
                    rel_tol: 0.05,
                    r2_min: 0.999,
                },
                ScenarioCheck::IdentityResiduals {
                    tol: 1e-4,
                    floor_max: 1e-5,
                },
                ScenarioCheck::InequalitySweep,
                ScenarioCheck::DisplacementDecay { r2_min: 0.99 },
            ],
        },
        Scenario {
            name: "nonconvex_m3".into(),
            family: Family::FourierCircle {
                r: 1.0,
                modes: vec![(3, 0.18, 0.0)],
            },
            config: FlowConfig {
                n: 256,
                sigma: 0.05,
                scheme: Scheme::IfRk4,
                h_mode: HMode::DiscreteExact,
                rescale: true,
                t_end: 1.0,
                kosc_stop: 1e-10,
                record_every: 5,
                resample_every: 1,
                snapshot_every: 0,
            },
            checks: vec![
                ScenarioCheck::NonconvexBound {
                    require_positive: true,
                },
                ScenarioCheck::Conservation {
                    max_rel_length_drift: 1e-6,
                    area_tol_rel: 1e-10,
                },
                ScenarioCheck::KoscBudget,
                ScenarioCheck::EmbeddedThroughout,
            ],
        },
    ]
}

pub fn find_scenario(name: &str) -> Result<Scenario> {
    registry()
        .into_iter()
        .find(|s| s.name == name)
        .ok_or_else(|| Error::UnknownScenario(name.to_string()))
}

/// Counts inequality failures at every record; installed as an observer
/// when a scenario carries `InequalitySweep`.
#[derive(Default)]
struct InequalityObserver {
    records_seen: usize,
    failures: usize,
}

impl Observer for InequalityObserver {
    fn observe(&mut self, state: &FlowState, _record: &crate::diagnostics::DiagnosticsRecord) {
        self.records_seen += 1;
        let Ok(g) = geometry(&state.curve) else {
            self.failures += 1;
            return;
        };
        let Ok(kfield) = PeriodicField::new(g.k.clone(), state.curve.spacing()) else {
            self.failures += 1;
            return;
        };
        match check_psw(&kfield) {
            Ok(rep) if rep.holds => {}
            _ => self.failures += 1,
        }
        for n in 1..=4 {
            match check_iterated_interpolation(&kfield, n) {
                Ok(rep) if rep.holds => {}
                _ => self.failures += 1,
            }
            match check_h_bound(&state.curve, n) {
                Ok(rep) if rep.holds => {}
                _ => self.failures += 1,
            }
        }
    }
}

/// Everything produced by one scenario run.
#[derive(Debug)]
pub struct ScenarioOutcome {
    pub scenario: Scenario,
    pub hypotheses: HypothesisReport,
    pub summary: TrajectorySummary,
    pub checks: Vec<CheckReport>,
    pub passed: bool,
}

/// Executes a scenario and evaluates its assertions. Output files are the
/// caller's concern (see `io::write_scenario_bundle`).
pub fn run_scenario(scenario: &Scenario) -> Result<ScenarioOutcome> {
    let curve = make_curve(&scenario.family, scenario.config.n)?;
    let hypotheses = hypothesis_report(&curve)?;
    let state = FlowState::new(&curve, &scenario.config)?;

    let wants_inequalities = scenario
        .checks
        .iter()
        .any(|c| matches!(c, ScenarioCheck::InequalitySweep));
    let mut ineq = InequalityObserver::default();
    let summary = {
        let mut observers: Vec<&mut dyn Observer> = Vec::new();
        if wants_inequalities {
            observers.push(&mut ineq);
        }
        evolve(state, &scenario.config, &mut observers)?
    };

    let mut checks = Vec::new();
    for check in &scenario.checks {
        evaluate_check(check, &summary, &ineq, &mut checks)?;
    }
    if let Some(reason) = &summary.aborted {
        checks.push(CheckReport {
            check: format!("engine_completed (aborted: {reason})"),
            bound: 0.0,
            observed: None,
            holds: false,
        });
    }
    let passed = checks.iter().all(|c| c.holds);
    Ok(ScenarioOutcome {
        scenario: scenario.clone(),
        hypotheses,
        summary,
        checks,
        passed,
    })
}

fn decay_window(records: &[crate::diagnostics::DiagnosticsRecord]) -> (f64, f64) {
    // late-time regime: K_osc within [1e-8, 1e-4]
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in records {
        if r.kosc < 1e-4 && r.kosc > 1e-8 {
            lo = lo.min(r.t);
            hi = hi.max(r.t);
        }
    }
    (lo, hi)
}

fn evaluate_check(
    check: &ScenarioCheck,
    summary: &TrajectorySummary,
    ineq: &InequalityObserver,
    out: &mut Vec<CheckReport>,
) -> Result<()> {
    let records = &summary.records;
    let l0 = summary.final_state.l0;
    match check {
        ScenarioCheck::Conservation {
            max_rel_length_drift,
            area_tol_rel,
        } => {
            let drift = records
                .iter()
                .map(|r| (r.length - l0).abs() / l0)
                .fold(0.0_f64, f64::max);
            out.push(CheckReport {
                check: "length_drift".into(),
                bound: *max_rel_length_drift,
                observed: Some(drift),
                holds: drift <= *max_rel_length_drift,
            });
            let mut worst = 0.0_f64;
            for w in records.windows(2) {
                worst = worst.max(w[0].area - w[1].area);
            }
            let bound = area_tol_rel * records[0].area.abs();
            out.push(CheckReport {
                check: "area_non_decreasing".into(),
                bound,
                observed: Some(worst),
                holds: worst <= bound,
            });
        }
        ScenarioCheck::CircleLimit { max_radial_dev_rel } => {
            let pts = summary.final_state.curve.points();
            let m = pts.len() as f64;
            let c = pts
                .iter()
                .fold([0.0, 0.0], |acc, p| [acc[0] + p[0] / m, acc[1] + p[1] / m]);
            let r_target = l0 / (2.0 * PI);
            let dev = pts
                .iter()
                .map(|p| ((p[0] - c[0]).hypot(p[1] - c[1]) - r_target).abs())
                .fold(0.0_f64, f64::max)
                / l0;
            out.push(CheckReport {
                check: "circle_limit_radius".into(),
                bound: *max_radial_dev_rel,
                observed: Some(dev),
                holds: dev <= *max_radial_dev_rel,
            });
        }
        ScenarioCheck::KoscBudget => {
            let budget = KoscBudget::from_initial(
                records[0].length,
                records[0].area,
                summary.final_state.curve.winding().unsigned_abs().max(1),
            )?;
            out.extend(check_kosc_budget(
                records,
                &budget,
                summary.final_state.curve.winding().unsigned_abs().max(1),
            ));
        }
        ScenarioCheck::NonconvexBound { require_positive } => {
            let budget = KoscBudget::from_initial(
                records[0].length,
                records[0].area,
                summary.final_state.curve.winding().unsigned_abs().max(1),
            )?;
            out.extend(check_nonconvex_bound(&summary.final_state, records, &budget));
            if *require_positive {
                let nct = summary.final_state.nonconvex_time;
                out.push(CheckReport {
                    check: "nonconvex_time_positive".into(),
                    bound: 0.0,
                    observed: Some(nct),
                    holds: nct > 0.0,
                });
            }
        }
        ScenarioCheck::EmbeddedThroughout => {
            let bad = records.iter().filter(|r| !r.embedded).count();
            out.push(CheckReport {
                check: "embedded_at_every_record".into(),
                bound: 0.0,
                observed: Some(bad as f64),
                holds: bad == 0,
            });
        }
        ScenarioCheck::DecayRate {
            field,
            mode,
            rel_tol,
            r2_min,
        } => {
            let f = match field.as_str() {
                "kosc_integrand" => DecayField::KoscIntegrand,
                "kosc" => DecayField::Kosc,
                "nks2" => DecayField::Nks2,
                "nkss2" => DecayField::Nkss2,
                other => {
                    return Err(Error::Config(format!("unknown decay field `{other}`")));
                }
            };
            let window = decay_window(records);
            let fit = fit_decay(records, f, window)?;
            let rho_inf = l0 / (2.0 * PI);
            let predicted = predicted_decay_rate(*mode, rho_inf);
            let rel_err = (fit.rate - predicted).abs() / predicted.abs().max(1e-30);
            out.push(CheckReport {
                check: format!("decay_rate_{field} (fit {:.4}, predicted {predicted:.4})", fit.rate),
                bound: *rel_tol,
                observed: Some(rel_err),
                holds: rel_err <= *rel_tol,
            });
            out.push(CheckReport {
                check: format!("decay_r2_{field}"),
                bound: *r2_min,
                observed: Some(fit.r_squared),
                holds: fit.r_squared >= *r2_min,
            });
        }
        ScenarioCheck::IdentityResiduals { tol, floor_max } => {
            let mut worst = 0.0_f64;
            let mut unresolvable = 0usize;
            let mut checked = 0usize;
            for r in records {
                for (res, floor) in [
                    (r.r_iii, r.floor_iii),
                    (r.r_iv, r.floor_iv),
                    (r.r_v, r.floor_v),
                    (r.r_vi, r.floor_vi),
                ] {
                    if res.is_nan() {
                        continue;
                    }
                    if floor > *floor_max {
                        unresolvable += 1;
                        continue;
                    }
                    checked += 1;
                    worst = worst.max(res);
                }
            }
            out.push(CheckReport {
                check: format!(
                    "identity_residuals (checked {checked}, below FD noise floor {unresolvable})"
                ),
                bound: *tol,
                observed: Some(worst),
                holds: checked > 0 && worst <= *tol,
            });
        }
        ScenarioCheck::InequalitySweep => {
            out.push(CheckReport {
                check: format!("inequalities_at_records (records {})", ineq.records_seen),
                bound: 0.0,
                observed: Some(ineq.failures as f64),
                holds: ineq.records_seen > 0 && ineq.failures == 0,
            });
        }
        ScenarioCheck::DisplacementDecay { r2_min } => {
            // fit log increments on the same late-time window
            let window = decay_window(records);
            let pts: Vec<(f64, f64)> = records
                .iter()
                .skip(1)
                .zip(&summary.increments)
                .filter(|(r, inc)| r.t >= window.0 && r.t <= window.1 && **inc > 0.0)
                .map(|(r, inc)| (r.t, *inc))
                .collect();
            let fit = fit_log_linear(&pts)?;
            out.push(CheckReport {
                check: format!("displacement_increment_decay (rate {:.3})", fit.rate),
                bound: *r2_min,
                observed: Some(fit.r_squared),
                holds: fit.r_squared >= *r2_min && fit.rate > 0.0,
            });
            let bounded = summary
                .records
                .iter()
                .map(|r| r.max_displacement)
                .fold(0.0_f64, f64::max);
            out.push(CheckReport {
                check: "max_displacement_bounded".into(),
                bound: l0,
                observed: Some(bounded),
                holds: bounded.is_finite() && bounded < l0,
            });
        }
        ScenarioCheck::Stationarity { max_displacement } => {
            let disp = records
                .iter()
                .map(|r| r.max_displacement)
                .fold(0.0_f64, f64::max);
            out.push(CheckReport {
                check: "stationary_displacement".into(),
                bound: *max_displacement,
                observed: Some(disp),
                holds: disp <= *max_displacement,
            });
            let worst_kosc = records.iter().map(|r| r.kosc).fold(0.0_f64, f64::max);
            out.push(CheckReport {
                check: "stationary_kosc".into(),
                bound: 1e-12,
                observed: Some(worst_kosc),
                holds: worst_kosc <= 1e-12,
            });
        }
    }
    Ok(())
}
