//! Time-dependent decay and Lamb-shift rates for an atom coupled to a
//! Lorentzian (leaky cavity) reservoir at zero temperature.
//!
//! All frequencies and rates are in units of the Lorentzian width, times in
//! units of its inverse. For a transition detuned by `δ = ω_cav − ω` from the
//! cavity, the broadband (ν ∈ ℝ) closed forms with `a = Γ/2` are
//!
//! ```text
//! Δ(t) = 2α² [a + e^{−at}(δ sin δt − a cos δt)] / (δ² + a²)
//! λ(t) =  α² [δ − e^{−at}(δ cos δt + a sin δt)] / (δ² + a²)
//! ```
//!
//! Two numerical references check the closed forms: `*_reference` integrates
//! the defining double integral over the whole half-line ν ≥ 0 (time integral
//! done exactly), and `*_quadrature` runs plain nested quadrature over a
//! ±50Γ window, which is cheaper but misses tail weight at short times.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::quad::{self, QuadOptions};

/// Half-width of the ν window (in units of Γ) used by the quadrature reference.
pub const QUADRATURE_WINDOW: f64 = 50.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LorentzianReservoir {
    /// α², units of Γ.
    pub coupling: f64,
    /// Γ, the spectral width.
    pub width: f64,
    /// ω_cav, the cavity resonance.
    pub cavity_freq: f64,
}

impl LorentzianReservoir {
    pub fn new(coupling: f64, width: f64, cavity_freq: f64) -> Result<Self> {
        if !(coupling > 0.0) {
            return Err(Error::Validation(format!("coupling must be positive, got {coupling}")));
        }
        if !(width > 0.0) {
            return Err(Error::Validation(format!("width must be positive, got {width}")));
        }
        if !(cavity_freq > 10.0 * width) {
            return Err(Error::Validation(format!(
                "cavity frequency {cavity_freq} must be far above the width {width}"
            )));
        }
        Ok(Self { coupling, width, cavity_freq })
    }

    pub fn spectral_density(&self, nu: f64) -> f64 {
        let half = 0.5 * self.width;
        let x = nu - self.cavity_freq;
        self.coupling / (2.0 * PI) * self.width / (x * x + half * half)
    }
}

impl Default for LorentzianReservoir {
    fn default() -> Self {
        Self { coupling: 5.0, width: 1.0, cavity_freq: 1.0e3 }
    }
}

/// Rates of one decay channel with Bohr frequency `ω = ω_cav − δ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelRate {
    pub detuning: f64,
    pub reservoir: LorentzianReservoir,
}

fn check_time(t: f64) -> Result<()> {
    if t < 0.0 || t.is_nan() {
        return Err(Error::NegativeTime(t));
    }
    Ok(())
}

impl ChannelRate {
    pub fn new(detuning: f64, reservoir: LorentzianReservoir) -> Self {
        Self { detuning, reservoir }
    }

    fn parts(&self) -> (f64, f64, f64, f64) {
        let a = 0.5 * self.reservoir.width;
        let d = self.detuning;
        (self.reservoir.coupling, a, d, d * d + a * a)
    }

    pub fn bohr_frequency(&self) -> f64 {
        self.reservoir.cavity_freq - self.detuning
    }

    pub fn decay_rate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let (c, a, d, den) = self.parts();
        let e = (-a * t).exp();
        Ok(2.0 * c * (a + e * (d * (d * t).sin() - a * (d * t).cos())) / den)
    }

    pub fn lamb_shift_rate(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let (c, a, d, den) = self.parts();
        let e = (-a * t).exp();
        Ok(c * (d - e * (d * (d * t).cos() + a * (d * t).sin())) / den)
    }

    /// `D(t) = ∫₀ᵗ Δ(s) ds` from the antiderivative of the closed form.
    pub fn accumulated_decay(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let (c, a, d, den) = self.parts();
        let e = (-a * t).exp();
        let (s, co) = (d * t).sin_cos();
        let osc = (d * d - a * a) * (1.0 - e * co) - 2.0 * a * d * e * s;
        Ok(2.0 * c * (a * t + osc / den) / den)
    }

    /// `L(t) = ∫₀ᵗ λ(s) ds` from the antiderivative of the closed form.
    pub fn accumulated_lamb_shift(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let (c, a, d, den) = self.parts();
        let e = (-a * t).exp();
        let (s, co) = (d * t).sin_cos();
        let osc = 2.0 * a * d * (1.0 - e * co) + (d * d - a * a) * e * s;
        Ok(c * (d * t - osc / den) / den)
    }

    /// `lim Δ(t)` for `t → ∞`: `2α² a / (δ² + a²)`.
    pub fn markov_decay_rate(&self) -> f64 {
        let (c, a, _, den) = self.parts();
        2.0 * c * a / den
    }

    /// `lim λ(t)` for `t → ∞`: `α² δ / (δ² + a²)`.
    pub fn markov_lamb_shift_rate(&self) -> f64 {
        let (c, _, d, den) = self.parts();
        c * d / den
    }

    fn inner_spectral_integral(&self, s: f64, kernel: fn(f64) -> f64) -> f64 {
        let res = &self.reservoir;
        let omega = self.bohr_frequency();
        let lo = (res.cavity_freq - QUADRATURE_WINDOW * res.width).max(0.0);
        let hi = res.cavity_freq + QUADRATURE_WINDOW * res.width;
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 4000 };
        quad::integrate_with_breaks(
            |nu| res.spectral_density(nu) * kernel((nu - omega) * s),
            lo,
            hi,
            &[res.cavity_freq, omega],
            opts,
        )
        .value
    }

    fn nested(&self, t: f64, kernel: fn(f64) -> f64) -> f64 {
        let opts = QuadOptions { abs_tol: 1e-12, rel_tol: 1e-11, max_intervals: 500 };
        quad::integrate(|s| self.inner_spectral_integral(s, kernel), 0.0, t, opts).value
    }

    /// `Δ(t) = 2 ∫₀ᵗ ds ∫ dν J(ν) cos[(ν − ω)s]` by nested adaptive quadrature
    /// over a finite ν window around the cavity resonance.
    pub fn decay_rate_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(2.0 * self.nested(t, f64::cos))
    }

    /// `λ(t) = ∫₀ᵗ ds ∫ dν J(ν) sin[(ν − ω)s]` by nested adaptive quadrature.
    pub fn lamb_shift_rate_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.nested(t, f64::sin))
    }

    /// `∫_{ν≥0} J(ν) K(ν − ω) dν` over the whole half-line: `[0, 2ω_cav]`
    /// directly, the remaining tail through `ν = 2ω_cav / u`, `u ∈ (0, 1]`.
    fn half_line_integral(&self, kernel: impl Fn(f64) -> f64) -> f64 {
        let res = &self.reservoir;
        let omega = self.bohr_frequency();
        let hi = 2.0 * res.cavity_freq;
        let opts = QuadOptions { abs_tol: 1e-13, rel_tol: 1e-12, max_intervals: 40_000 };
        let body = quad::integrate_with_breaks(
            |nu| res.spectral_density(nu) * kernel(nu - omega),
            0.0,
            hi,
            &[res.cavity_freq, omega],
            opts,
        );
        let tail = quad::integrate(
            |u| {
                if u <= 0.0 {
                    return 0.0;
                }
                let nu = hi / u;
                res.spectral_density(nu) * kernel(nu - omega) * hi / (u * u)
            },
            0.0,
            1.0,
            QuadOptions { abs_tol: 1e-13, rel_tol: 1e-10, max_intervals: 2000 },
        );
        body.value + tail.value
    }

    /// `Δ(t)` from its defining double integral over the full half-line
    /// `ν ≥ 0`, with the elementary time integral done exactly:
    /// `2 ∫ J(ν) sin(xt)/x dν`, `x = ν − ω`. No broadband approximation and
    /// no truncation of the spectrum.
    pub fn decay_rate_reference(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(2.0 * self.half_line_integral(|x| if x.abs() * t < 1e-8 { t } else { (x * t).sin() / x }))
    }

    /// `λ(t) = ∫ J(ν) (1 − cos xt)/x dν` over `ν ≥ 0`, as for
    /// [`Self::decay_rate_reference`].
    pub fn lamb_shift_rate_reference(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.half_line_integral(|x| {
            let y = x * t;
            if y.abs() < 1e-4 {
                x * t * t / 2.0
            } else {
                2.0 * (0.5 * y).sin().powi(2) / x
            }
        }))
    }

    /// `D(t)` by adaptive quadrature of the closed-form rate.
    pub fn accumulated_decay_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-12, max_intervals: 2000 };
        Ok(quad::integrate(|s| self.decay_rate(s).unwrap_or(0.0), 0.0, t, opts).value)
    }

    /// `L(t)` by adaptive quadrature of the closed-form rate.
    pub fn accumulated_lamb_shift_quadrature(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        let opts = QuadOptions { abs_tol: 1e-10, rel_tol: 1e-12, max_intervals: 2000 };
        Ok(quad::integrate(|s| self.lamb_shift_rate(s).unwrap_or(0.0), 0.0, t, opts).value)
    }
}

/// Rate source for one channel: a structured reservoir or fixed Markovian rates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RateFunction {
    Lorentzian(ChannelRate),
    Constant { decay: f64, lamb_shift: f64 },
}

impl RateFunction {
    pub fn decay(&self, t: f64) -> Result<f64> {
        match self {
            RateFunction::Lorentzian(r) => r.decay_rate(t),
            RateFunction::Constant { decay, .. } => check_time(t).map(|_| *decay),
        }
    }

    pub fn lamb_shift(&self, t: f64) -> Result<f64> {
        match self {
            RateFunction::Lorentzian(r) => r.lamb_shift_rate(t),
            RateFunction::Constant { lamb_shift, .. } => check_time(t).map(|_| *lamb_shift),
        }
    }

    pub fn accumulated_decay(&self, t: f64) -> Result<f64> {
        match self {
            RateFunction::Lorentzian(r) => r.accumulated_decay(t),
            RateFunction::Constant { decay, .. } => check_time(t).map(|_| decay * t),
        }
    }

    pub fn accumulated_lamb_shift(&self, t: f64) -> Result<f64> {
        match self {
            RateFunction::Lorentzian(r) => r.accumulated_lamb_shift(t),
            RateFunction::Constant { lamb_shift, .. } => check_time(t).map(|_| lamb_shift * t),
        }
    }

    pub fn detuning(&self) -> Option<f64> {
        match self {
            RateFunction::Lorentzian(r) => Some(r.detuning),
            RateFunction::Constant { .. } => None,
        }
    }
}

/// Rates sampled on the uniform simulation grid `t_k = k·dt`.
#[derive(Clone, Debug)]
pub struct RateTable {
    dt: f64,
    decay: Vec<Vec<f64>>,
    lamb_shift: Vec<Vec<f64>>,
}

impl RateTable {
    pub fn new(rates: &[RateFunction], dt: f64, steps: usize) -> Result<Self> {
        let mut decay = Vec::with_capacity(steps + 1);
        let mut lamb_shift = Vec::with_capacity(steps + 1);
        for k in 0..=steps {
            let t = k as f64 * dt;
            decay.push(rates.iter().map(|r| r.decay(t)).collect::<Result<Vec<_>>>()?);
            lamb_shift.push(rates.iter().map(|r| r.lamb_shift(t)).collect::<Result<Vec<_>>>()?);
        }
        Ok(Self { dt, decay, lamb_shift })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.decay.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decay.is_empty()
    }

    pub fn decay(&self, step: usize) -> &[f64] {
        &self.decay[step]
    }

    pub fn lamb_shift(&self, step: usize) -> &[f64] {
        &self.lamb_shift[step]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn channel(coupling: f64, detuning: f64) -> ChannelRate {
        ChannelRate::new(detuning, LorentzianReservoir::new(coupling, 1.0, 1.0e3).unwrap())
    }

    #[test]
    fn spectral_density_values() {
        let r = LorentzianReservoir::new(5.0, 1.0, 1.0e3).unwrap();
        assert!((r.spectral_density(1.0e3) - 10.0 / PI).abs() < 1e-12);
        assert!((r.spectral_density(1.0e3 + 0.5) - 5.0 / PI).abs() < 1e-12);
        assert!((r.spectral_density(1.0e3 - 0.5) - 5.0 / PI).abs() < 1e-12);
        assert!(r.spectral_density(1.0e9) < 1e-12);
    }

    #[test]
    fn reservoir_validation() {
        assert!(LorentzianReservoir::new(0.0, 1.0, 1e3).is_err());
        assert!(LorentzianReservoir::new(1.0, -1.0, 1e3).is_err());
        assert!(LorentzianReservoir::new(1.0, 1.0, 2.0).is_err());
    }

    #[test]
    fn rates_vanish_at_zero() {
        for d in [-3.0, 0.0, 5.0] {
            let c = channel(5.0, d);
            assert_eq!(c.decay_rate(0.0).unwrap(), 0.0);
            assert!(c.lamb_shift_rate(0.0).unwrap().abs() < 1e-15);
            assert_eq!(c.accumulated_decay(0.0).unwrap(), 0.0);
            assert!(c.accumulated_lamb_shift(0.0).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn negative_time_is_rejected() {
        let c = channel(5.0, 5.0);
        assert!(matches!(c.decay_rate(-1.0), Err(Error::NegativeTime(_))));
        assert!(matches!(c.lamb_shift_rate(-0.1), Err(Error::NegativeTime(_))));
        assert!(matches!(c.accumulated_decay(-0.1), Err(Error::NegativeTime(_))));
    }

    #[test]
    fn markov_limits() {
        let c = channel(5.0, 5.0);
        // 2α²(Γ/2)/(δ² + Γ²/4) and α²δ/(δ² + Γ²/4)
        assert!((c.markov_decay_rate() - 5.0 / 25.25).abs() < 1e-15);
        assert!((c.markov_lamb_shift_rate() - 25.0 / 25.25).abs() < 1e-15);
        assert!((c.decay_rate(60.0).unwrap() - c.markov_decay_rate()).abs() < 1e-10);
        assert!((c.lamb_shift_rate(60.0).unwrap() - c.markov_lamb_shift_rate()).abs() < 1e-10);
    }

    #[test]
    fn decay_rate_turns_negative_early() {
        let c = channel(5.0, 5.0);
        let negative = (1..500).map(|k| k as f64 * 0.01).any(|t| c.decay_rate(t).unwrap() < 0.0);
        assert!(negative);
    }

    #[test]
    fn lamb_shift_vanishes_on_resonance() {
        let c = channel(5.0, 0.0);
        for k in 0..100 {
            assert!(c.lamb_shift_rate(k as f64 * 0.1).unwrap().abs() < 1e-15);
        }
    }

    #[test]
    fn initial_slope_is_twice_the_coupling() {
        for (alpha2, d) in [(5.0, 5.0), (2.0, -3.0)] {
            let c = channel(alpha2, d);
            let h = 1e-6;
            let slope = c.decay_rate(h).unwrap() / h;
            assert!((slope - 2.0 * alpha2).abs() < 1e-3, "{slope}");
        }
    }

    #[test]
    fn antiderivatives_match_quadrature() {
        for (alpha2, d) in [(5.0, 5.0), (2.0, -3.0), (2.0, 5.0)] {
            let c = channel(alpha2, d);
            for t in [0.3, 1.0, 2.7, 6.0, 10.0] {
                let a = c.accumulated_decay(t).unwrap();
                let q = c.accumulated_decay_quadrature(t).unwrap();
                assert!((a - q).abs() < 1e-8, "D({t}): {a} vs {q}");
                let a = c.accumulated_lamb_shift(t).unwrap();
                let q = c.accumulated_lamb_shift_quadrature(t).unwrap();
                assert!((a - q).abs() < 1e-8, "L({t}): {a} vs {q}");
            }
        }
    }

    #[test]
    fn accumulated_decay_grows_with_markov_slope() {
        let c = channel(5.0, 5.0);
        let slope = (c.accumulated_decay(60.0).unwrap() - c.accumulated_decay(40.0).unwrap()) / 20.0;
        assert!((slope - c.markov_decay_rate()).abs() < 1e-9);
    }

    #[test]
    fn accumulated_decay_falls_where_rate_is_negative() {
        let c = channel(5.0, 5.0);
        let h = 0.01;
        for k in 0..1000 {
            let t = k as f64 * h;
            let dd = c.accumulated_decay(t + h).unwrap() - c.accumulated_decay(t).unwrap();
            let (r0, r1) = (c.decay_rate(t).unwrap(), c.decay_rate(t + h).unwrap());
            if r0 < 0.0 && r1 < 0.0 {
                assert!(dd < 0.0);
            }
            if r0 > 0.0 && r1 > 0.0 {
                assert!(dd > 0.0);
            }
        }
    }

    #[test]
    fn closed_form_matches_double_quadrature_spot() {
        let c = channel(5.0, 5.0);
        for t in [0.5, 1.3, 4.0] {
            let cf = c.decay_rate(t).unwrap();
            let q = c.decay_rate_quadrature(t).unwrap();
            assert!(((cf - q) / cf).abs() < 1e-4, "t={t}: {cf} vs {q}");
        }
    }

    #[test]
    fn closed_form_matches_full_spectrum_reference() {
        for (alpha2, d) in [(5.0, 5.0), (2.0, -3.0)] {
            let c = channel(alpha2, d);
            for t in [0.01, 0.2, 1.3, 7.5] {
                let (cf, q) = (c.decay_rate(t).unwrap(), c.decay_rate_reference(t).unwrap());
                // What remains is the broadband (ν ∈ ℝ) approximation itself.
                assert!(((cf - q) / cf).abs() < 1e-5, "Δ({t}): {cf} vs {q}");
                // λ(t) ~ t² is tiny early on while the ν < 0 tail stays ~1e-7.
                if t >= 0.2 {
                    let (cf, q) = (c.lamb_shift_rate(t).unwrap(), c.lamb_shift_rate_reference(t).unwrap());
                    assert!(((cf - q) / cf).abs() < 1e-5, "λ({t}): {cf} vs {q}");
                }
            }
        }
    }

    #[test]
    fn window_truncation_dominates_at_short_times() {
        // The ±50Γ window misses Lorentzian tail weight ~1/(πW); it matters
        // only while t ≲ 1/W.
        let c = channel(2.0, -3.0);
        let t = 0.02;
        let cf = c.decay_rate(t).unwrap();
        let windowed = ((c.decay_rate_quadrature(t).unwrap() - cf) / cf).abs();
        let full = ((c.decay_rate_reference(t).unwrap() - cf) / cf).abs();
        assert!(windowed > 1e-3 && full < 1e-6, "{windowed} {full}");
    }

    #[test]
    fn rate_table_samples_grid() {
        let rates = [RateFunction::Lorentzian(channel(5.0, 5.0)), RateFunction::Constant { decay: 0.3, lamb_shift: 0.0 }];
        let table = RateTable::new(&rates, 0.01, 100).unwrap();
        assert_eq!(table.len(), 101);
        assert_eq!(table.decay(0)[0], 0.0);
        assert_eq!(table.decay(37)[1], 0.3);
        assert!((table.decay(50)[0] - rates[0].decay(0.5).unwrap()).abs() < 1e-15);
    }
}
