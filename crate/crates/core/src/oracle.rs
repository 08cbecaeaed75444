//! Reference solutions: closed-form populations and coherences for the four
//! geometries, a fixed-step RK4 integrator of the master equation, and
//! positivity / rate-sign diagnostics on a recorded series.

use num_complex::Complex64 as C64;

use crate::error::Result;
use crate::linalg::{DensityMatrix, Matrix};
use crate::master;
use crate::models::{ModelKind, ModelSpec};
use crate::quad::{self, QuadOptions};
use crate::reservoir::RateFunction;
use crate::series::TrajectorySeries;

/// Tolerance of the nested time integrals `∫₀ᵗ Δ_i e^{…}`.
const NESTED_OPTS: QuadOptions = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_intervals: 4000 };

struct Accumulated {
    d: Vec<f64>,
    l: Vec<f64>,
}

fn accumulated(model: &ModelSpec, t: f64) -> Result<Accumulated> {
    let mut d = Vec::new();
    let mut l = Vec::new();
    for ch in &model.channels {
        d.push(ch.rate.accumulated_decay(t)?);
        l.push(if model.lamb_shift_enabled { ch.rate.accumulated_lamb_shift(t)? } else { 0.0 });
    }
    Ok(Accumulated { d, l })
}

/// `∫₀ᵗ Δ_i(s) exp(−D_i(s) + sign·D_k(s)) ds` by adaptive quadrature.
fn nested(rate: &RateFunction, other: &RateFunction, sign: f64, t: f64) -> Result<f64> {
    // Rates are valid for s ≥ 0, which is all the quadrature visits.
    let f = |s: f64| {
        let g = rate.decay(s).unwrap_or(f64::NAN);
        let d = rate.accumulated_decay(s).unwrap_or(f64::NAN);
        let e = other.accumulated_decay(s).unwrap_or(f64::NAN);
        g * (-d + sign * e).exp()
    };
    let r = quad::integrate(f, 0.0, t, NESTED_OPTS);
    if r.value.is_nan() {
        rate.decay(-1.0)?;
    }
    Ok(r.value)
}

/// Closed-form density matrix of the model at time `t`. Coherence phases
/// carry the accumulated Lamb shifts only when the model enables them.
pub fn analytic_density(model: &ModelSpec, t: f64) -> Result<DensityMatrix> {
    let r0 = model.initial_state.outer();
    let p0 = |k: usize| r0.population(k);
    let c0 = |i: usize, j: usize| r0.get(i, j);
    let Accumulated { d, l } = accumulated(model, t)?;
    let decay = |x: f64, phase: f64| C64::from_polar((-x).exp(), -phase);
    let dim = model.dim();
    let mut m = Matrix::zeros(dim);
    let mut set = |i: usize, j: usize, z: C64| {
        m.set(i, j, z);
        m.set(j, i, z.conj());
    };
    match model.kind {
        ModelKind::JaynesCummings => {
            let e = (-d[0]).exp();
            set(0, 0, (e * p0(0)).into());
            set(1, 1, ((1.0 - e) * p0(0) + p0(1)).into());
            set(0, 1, decay(d[0] / 2.0, l[0]) * c0(0, 1));
        }
        ModelKind::Lambda => {
            let (r1, r2) = (&model.channels[0].rate, &model.channels[1].rate);
            let e = (-(d[0] + d[1])).exp();
            set(0, 0, (e * p0(0)).into());
            set(1, 1, (nested(r1, r2, -1.0, t)? * p0(0) + p0(1)).into());
            set(2, 2, (nested(r2, r1, -1.0, t)? * p0(0) + p0(2)).into());
            let z = decay((d[0] + d[1]) / 2.0, l[0] + l[1]);
            set(0, 1, z * c0(0, 1));
            set(0, 2, z * c0(0, 2));
            set(1, 2, c0(1, 2));
        }
        ModelKind::Vee => {
            let (e1, e2) = ((-d[0]).exp(), (-d[1]).exp());
            set(0, 0, (e1 * p0(0)).into());
            set(1, 1, (e2 * p0(1)).into());
            set(2, 2, ((1.0 - e1) * p0(0) + (1.0 - e2) * p0(1) + p0(2)).into());
            set(0, 1, decay((d[0] + d[1]) / 2.0, l[0] - l[1]) * c0(0, 1));
            set(0, 2, decay(d[0] / 2.0, l[0]) * c0(0, 2));
            set(1, 2, decay(d[1] / 2.0, l[1]) * c0(1, 2));
        }
        ModelKind::Ladder => {
            let (r1, r2) = (&model.channels[0].rate, &model.channels[1].rate);
            let (e1, e2) = ((-d[0]).exp(), (-d[1]).exp());
            let fed = e2 * nested(r1, r2, 1.0, t)?;
            set(0, 0, (e1 * p0(0)).into());
            set(1, 1, (fed * p0(0) + e2 * p0(1)).into());
            set(2, 2, ((1.0 - e1 - fed) * p0(0) + (1.0 - e2) * p0(1) + p0(2)).into());
            set(0, 1, decay((d[0] + d[1]) / 2.0, l[0] - l[1]) * c0(0, 1));
            set(0, 2, decay(d[0] / 2.0, l[0]) * c0(0, 2));
            set(1, 2, decay(d[1] / 2.0, l[1]) * c0(1, 2));
        }
    }
    Ok(DensityMatrix(m))
}

/// Uniform recording grid `t_k = k·stride·dt` up to `steps·dt`, always
/// including the final step. Matches the engine's recording.
pub fn record_steps(steps: usize, stride: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..=steps).step_by(stride.max(1)).collect();
    if out.last() != Some(&steps) {
        out.push(steps);
    }
    out
}

fn series_for(model: &ModelSpec) -> TrajectorySeries {
    TrajectorySeries::new(model.dim(), model.channels.iter().map(|c| c.label).collect())
}

/// Closed-form solution sampled at `step·dt` for each recorded step.
pub fn analytic_series(model: &ModelSpec, dt: f64, steps: &[usize]) -> Result<TrajectorySeries> {
    let mut s = series_for(model);
    for &k in steps {
        let t = k as f64 * dt;
        s.push(t, analytic_density(model, t)?, model.decay_rates(t)?, Vec::new());
    }
    Ok(s)
}

/// Classical RK4 on `dρ/dt = L(ρ, t)` with step `dt / refine`, recording at
/// `step·dt` for each recorded step (ascending).
pub fn integrate_master_equation(
    model: &ModelSpec,
    dt: f64,
    steps: &[usize],
    refine: usize,
) -> Result<TrajectorySeries> {
    let refine = refine.max(1);
    let h = dt / refine as f64;
    let mut rho = model.initial_state.outer().0;
    let mut s = series_for(model);
    let mut k = 0usize;
    let last = steps.last().copied().unwrap_or(0) * refine;
    let mut wanted = steps.iter().map(|&x| x * refine).peekable();
    let f = |t: f64, r: &Matrix| -> Result<Matrix> {
        let decay = model.decay_rates(t)?;
        let lamb = model.lamb_shift_rates(t)?;
        Ok(master::rhs_with_rates(model, r, &decay, &lamb))
    };
    let c = |x: f64| C64::new(x, 0.0);
    loop {
        while wanted.peek() == Some(&k) {
            let t = k as f64 * h;
            s.push(t, DensityMatrix(rho.clone()), model.decay_rates(t)?, Vec::new());
            wanted.next();
        }
        if k >= last {
            break;
        }
        let t = k as f64 * h;
        let k1 = f(t, &rho)?;
        let k2 = f(t + h / 2.0, &(&rho + &k1.scale(c(h / 2.0))))?;
        let k3 = f(t + h / 2.0, &(&rho + &k2.scale(c(h / 2.0))))?;
        let k4 = f(t + h, &(&rho + &k3.scale(c(h))))?;
        let mut incr = &k1 + &k4;
        incr += &(&k2 + &k3).scale(c(2.0));
        rho += &incr.scale(c(h / 6.0));
        k += 1;
    }
    Ok(s)
}

/// Earliest recorded time with a density-matrix eigenvalue below `−tol`.
pub fn positivity_scan(series: &TrajectorySeries, tol: f64) -> Result<Option<f64>> {
    for (t, rho) in series.times.iter().zip(&series.rho) {
        if rho.min_eigenvalue()? < -tol {
            return Ok(Some(*t));
        }
    }
    Ok(None)
}

/// Two-level rate-equation structure: on every recorded interval lying
/// strictly inside a window where the decay rate keeps one sign, the excited
/// population and the coherence magnitude must move against the rate and the
/// ground population with it. Violations up to `dt·|Δ|·1e-2` are tolerated.
pub fn rate_equation_sign_check(model: &ModelSpec, series: &TrajectorySeries) -> Result<bool> {
    const PROBES: usize = 8;
    let rate = &model.channels[0].rate;
    for k in 0..series.len().saturating_sub(1) {
        let (t0, t1) = (series.times[k], series.times[k + 1]);
        let probes =
            (0..=PROBES).map(|p| rate.decay(t0 + (t1 - t0) * p as f64 / PROBES as f64)).collect::<Result<Vec<_>>>()?;
        let sign = if probes.iter().all(|&g| g > 0.0) {
            1.0
        } else if probes.iter().all(|&g| g < 0.0) {
            -1.0
        } else {
            continue;
        };
        let g_mid = probes[PROBES / 2].abs();
        let tol = (t1 - t0) * g_mid * 1e-2;
        let (a, b) = (&series.rho[k], &series.rho[k + 1]);
        // With Δ > 0: ρ_aa and |ρ_ab| fall, ρ_bb rises; reversed for Δ < 0.
        let d_aa = -sign * (b.population(0) - a.population(0));
        let d_bb = sign * (b.population(1) - a.population(1));
        let d_ab = -sign * (b.get(0, 1).norm() - a.get(0, 1).norm());
        if d_aa < -tol || d_bb < -tol || d_ab < -tol {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{Operator, StateVector};
    use crate::models::{ChannelSpec, LadderStart, ModelParams};
    use crate::series::compare_series;

    fn models() -> Vec<ModelSpec> {
        vec![
            ModelSpec::jaynes_cummings(),
            ModelSpec::lambda(),
            ModelSpec::vee(),
            ModelSpec::ladder(LadderStart::Mixed),
            ModelSpec::ladder(LadderStart::Excited),
        ]
    }

    #[test]
    fn initial_density_is_exact() {
        for m in models() {
            assert_eq!(analytic_density(&m, 0.0).unwrap(), m.initial_state.outer(), "{}", m.kind);
        }
    }

    #[test]
    fn jaynes_cummings_excited_population() {
        let m = ModelSpec::jaynes_cummings();
        let rate = &m.channels[0].rate;
        for t in [0.5, 2.0, 4.5] {
            let rho = analytic_density(&m, t).unwrap();
            let expect = (-rate.accumulated_decay(t).unwrap()).exp() * 9.0 / 13.0;
            assert!((rho.population(0) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_trace_and_hermitian() {
        for m in models() {
            let m = m.with_lamb_shift(true);
            for t in [0.3, 1.7, 5.2] {
                let rho = analytic_density(&m, t).unwrap();
                assert!((rho.trace().re - 1.0).abs() < 1e-10);
                assert!(rho.matrix().hermiticity_error() == 0.0);
            }
        }
    }

    #[test]
    fn closed_forms_solve_the_master_equation() {
        // Central differences of the closed form against L(ρ, t); the residual
        // must shrink as h² (ratio 4 per halving).
        for m in models() {
            let m = m.with_lamb_shift(true);
            for t in [0.4, 1.3, 3.1] {
                let resid = |h: f64| {
                    let fwd = analytic_density(&m, t + h).unwrap();
                    let bwd = analytic_density(&m, t - h).unwrap();
                    let diff = (fwd.matrix() - bwd.matrix()).scale(C64::new(0.5 / h, 0.0));
                    let l = master::rhs(&m, &analytic_density(&m, t).unwrap(), t).unwrap();
                    diff.max_abs_diff(&l)
                };
                let (r1, r2) = (resid(1e-2), resid(5e-3));
                assert!(r1 < 1e-2, "{} t={t}: {r1}", m.kind);
                assert!((r1 / r2 - 4.0).abs() < 0.3, "{} t={t}: ratio {}", m.kind, r1 / r2);
            }
        }
    }

    #[test]
    fn rk4_matches_closed_form_with_lamb_shift() {
        let steps = record_steps(300, 10);
        for m in models() {
            let m = m.with_lamb_shift(true);
            let a = analytic_series(&m, 0.01, &steps).unwrap();
            let b = integrate_master_equation(&m, 0.01, &steps, 10).unwrap();
            for (x, y) in a.rho.iter().zip(&b.rho) {
                assert!(x.max_abs_diff(y) < 1e-8, "{}", m.kind);
            }
        }
    }

    #[test]
    fn frozen_dynamics_is_constant() {
        let p = ModelParams { constant_rates: Some(vec![0.0, 0.0]), ..Default::default() };
        let m = ModelSpec::build(crate::models::ModelKind::Ladder, &p).unwrap();
        let s = integrate_master_equation(&m, 0.01, &record_steps(100, 10), 10).unwrap();
        for rho in &s.rho {
            assert_eq!(rho, &m.initial_state.outer());
        }
    }

    #[test]
    fn constant_rate_is_exponential() {
        let p = ModelParams { constant_rates: Some(vec![0.7]), ..Default::default() };
        let m = ModelSpec::build(crate::models::ModelKind::JaynesCummings, &p).unwrap();
        let s = integrate_master_equation(&m, 0.01, &record_steps(500, 50), 10).unwrap();
        for (t, rho) in s.times.iter().zip(&s.rho) {
            assert!((rho.population(0) - (-0.7 * t).exp() * 9.0 / 13.0).abs() < 1e-12);
        }
        assert!(rate_equation_sign_check(&m, &s).unwrap());
    }

    #[test]
    fn record_grid_includes_end() {
        assert_eq!(record_steps(25, 10), vec![0, 10, 20, 25]);
        assert_eq!(record_steps(20, 10), vec![0, 10, 20]);
    }

    #[test]
    fn positivity_holds_for_jaynes_cummings() {
        let m = ModelSpec::jaynes_cummings();
        let s = analytic_series(&m, 0.01, &record_steps(600, 10)).unwrap();
        assert_eq!(positivity_scan(&s, 1e-6).unwrap(), None);
        let mut pure = series_for(&m);
        pure.push(0.0, StateVector::from_real(&[0.3, 0.7]).normalize().unwrap().outer(), vec![0.0], vec![]);
        assert_eq!(positivity_scan(&pure, 0.0).unwrap(), None);
    }

    #[test]
    fn sign_check_accepts_master_equation_and_rejects_swapped_operator() {
        let m = ModelSpec::jaynes_cummings();
        let steps = record_steps(600, 10);
        let good = analytic_series(&m, 0.01, &steps).unwrap();
        assert!(rate_equation_sign_check(&m, &good).unwrap());

        let mut wrong = m.channels[0].clone();
        wrong.jump_op = Operator::transition(2, 0, 1);
        let swapped = ModelSpec::new(m.kind, vec![ChannelSpec { ..wrong }], m.initial_state.clone(), false).unwrap();
        let bad = integrate_master_equation(&swapped, 0.01, &steps, 10).unwrap();
        assert!(!rate_equation_sign_check(&m, &bad).unwrap());
        assert!(!compare_series(&good, &bad, 1e-3).unwrap().pass);
    }

    #[test]
    fn nested_integral_agrees_with_richardson_trapezoid() {
        let m = ModelSpec::ladder(LadderStart::Excited);
        let (r1, r2) = (m.channels[0].rate, m.channels[1].rate);
        let t = 3.0;
        let trap = |n: usize| {
            let h = t / n as f64;
            let y: Vec<f64> = (0..=n)
                .map(|k| {
                    let s = k as f64 * h;
                    r1.decay(s).unwrap()
                        * (-r1.accumulated_decay(s).unwrap() + r2.accumulated_decay(s).unwrap()).exp()
                })
                .collect();
            *quad::cumulative_trapezoid(&y, h).last().unwrap()
        };
        let rich = (4.0 * trap(3000) - trap(1500)) / 3.0;
        let gk = nested(&r1, &r2, 1.0, t).unwrap();
        assert!((rich - gk).abs() < 1e-10, "{rich} vs {gk}");
    }
}
