//! Clipping operators and the time-indexed scalar schedules that drive them.
//!
//! [`biclip_coordinatewise`] clips every coordinate from above (to `upper`) and
//! from below (up to `lower`), keeping its sign. [`biclip_l2`] applies the same
//! two-sided rule to the Euclidean norm, and [`l2clip`] is the classical
//! one-sided norm clip. Zero inputs map to zero throughout (`0/0 := 0`).

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vectorops::Vector;

/// Upper and lower clipping bounds, `0 <= lower <= upper`.
///
/// `upper` may be `+inf`, which disables the upper branch.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiClipThresholds<T> {
    upper: T,
    lower: T,
}

impl<T: Real> BiClipThresholds<T> {
    pub fn new(upper: T, lower: T) -> Result<Self> {
        if upper.is_nan() || lower.is_nan() {
            return Err(Error::contract("clipping thresholds must not be NaN"));
        }
        if lower < T::zero() || !lower.is_finite() {
            return Err(Error::contract(format!(
                "lower clipping threshold must be finite and nonnegative, got {lower}"
            )));
        }
        if lower > upper {
            return Err(Error::contract(format!(
                "lower clipping threshold {lower} exceeds upper threshold {upper}"
            )));
        }
        Ok(Self { upper, lower })
    }

    /// `(+inf, 0)`: clipping disabled.
    pub fn disabled() -> Self {
        Self {
            upper: T::infinity(),
            lower: T::zero(),
        }
    }

    pub fn upper(&self) -> T {
        self.upper
    }

    pub fn lower(&self) -> T {
        self.lower
    }
}

#[inline]
fn biclip_scalar<T: Real>(upper: T, lower: T, x: T) -> T {
    if x == T::zero() {
        return x;
    }
    let magnitude = x.abs();
    if magnitude <= lower {
        lower.copysign(x)
    } else if magnitude >= upper {
        upper.copysign(x)
    } else {
        x
    }
}

/// Coordinate-wise BiClip.
pub fn biclip_coordinatewise<T: Real>(thresholds: &BiClipThresholds<T>, x: &Vector<T>) -> Vector<T> {
    let (upper, lower) = (thresholds.upper, thresholds.lower);
    x.map(|v| biclip_scalar(upper, lower, v))
}

/// `x` rescaled so its computed norm is at most `target` (`shrink`) or at
/// least `target`, correcting the last-ulp error of `x * (target / norm)`.
fn rescale_norm<T: Real>(x: &Vector<T>, norm: T, target: T, shrink: bool) -> Vector<T> {
    let nudge = if shrink {
        T::one() - T::epsilon()
    } else {
        T::one() + T::epsilon()
    };
    let mut factor = target / norm;
    for _ in 0..64 {
        let y = x.scaled(factor);
        let n = y.l2_norm();
        if (shrink && n <= target) || (!shrink && n >= target) {
            return y;
        }
        factor = factor * nudge;
    }
    x.scaled(factor)
}

/// Norm-wise BiClip: the norm is clipped into `[lower, upper]`, direction kept.
pub fn biclip_l2<T: Real>(thresholds: &BiClipThresholds<T>, x: &Vector<T>) -> Vector<T> {
    let norm = x.l2_norm();
    if norm == T::zero() {
        x.clone()
    } else if norm <= thresholds.lower {
        rescale_norm(x, norm, thresholds.lower, false)
    } else if norm >= thresholds.upper {
        rescale_norm(x, norm, thresholds.upper, true)
    } else {
        x.clone()
    }
}

/// `min{1, c/||y||} y`.
pub fn l2clip<T: Real>(c: T, y: &Vector<T>) -> Result<Vector<T>> {
    if !(c >= T::zero()) {
        return Err(Error::contract(format!(
            "L2 clipping threshold must be nonnegative, got {c}"
        )));
    }
    let norm = y.l2_norm();
    if norm == T::zero() || norm < c {
        Ok(y.clone())
    } else {
        Ok(rescale_norm(y, norm, c, true))
    }
}

/// A scalar function of the round index `t >= 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Schedule<T> {
    /// A fixed value. May be `0` or `+inf` (for thresholds).
    Constant(T),
    /// `coefficient * t^exponent`, used for learning rates.
    PowerLaw { coefficient: T, exponent: T },
    /// `r / (t + 1)`.
    Harmonic { r: T },
    /// `coefficient * t^exponent`, used for clipping thresholds.
    ScaledPower { coefficient: T, exponent: T },
}

impl<T: Real> Schedule<T> {
    pub fn constant(value: T) -> Result<Self> {
        if !(value >= T::zero()) {
            return Err(Error::contract(format!(
                "constant schedule must be nonnegative, got {value}"
            )));
        }
        Ok(Schedule::Constant(value))
    }

    pub fn power_law(coefficient: T, exponent: T) -> Result<Self> {
        check_power(coefficient, exponent)?;
        Ok(Schedule::PowerLaw { coefficient, exponent })
    }

    pub fn scaled_power(coefficient: T, exponent: T) -> Result<Self> {
        check_power(coefficient, exponent)?;
        Ok(Schedule::ScaledPower { coefficient, exponent })
    }

    pub fn harmonic(r: T) -> Result<Self> {
        if !(r > T::zero() && r.is_finite()) {
            return Err(Error::contract(format!(
                "harmonic schedule needs a positive finite r, got {r}"
            )));
        }
        Ok(Schedule::Harmonic { r })
    }

    /// Value at round `t`. Round `0` is treated as round `1`.
    pub fn eval(&self, t: u64) -> T {
        let t = t.max(1);
        match *self {
            Schedule::Constant(value) => value,
            Schedule::PowerLaw { coefficient, exponent } | Schedule::ScaledPower { coefficient, exponent } => {
                coefficient * T::of(t as f64).powf(exponent)
            }
            Schedule::Harmonic { r } => r / T::of((t + 1) as f64),
        }
    }
}

fn check_power<T: Real>(coefficient: T, exponent: T) -> Result<()> {
    if !(coefficient > T::zero() && coefficient.is_finite()) {
        return Err(Error::contract(format!(
            "power schedule coefficient must be positive and finite, got {coefficient}"
        )));
    }
    if !exponent.is_finite() {
        return Err(Error::contract("power schedule exponent must be finite"));
    }
    Ok(())
}

pub fn schedule_eval<T: Real>(schedule: &Schedule<T>, t: u64) -> T {
    schedule.eval(t)
}

/// Default exponent of the lower thresholds `d_t`, `d~_t` when a preset
/// leaves it open.
pub const DEFAULT_LOWER_EXPONENT: f64 = -1.0;
/// Default growth exponent of the outer upper threshold `u~_t` for Bi2Clip.
pub const DEFAULT_OUTER_UPPER_EXPONENT: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetKind {
    Bi2Clip,
    RmspropTailClip,
}

/// Power-law exponents of a convergent schedule family.
///
/// Outer lr `~ t^omega`, inner lr `~ t^nu`, inner upper `~ t^zeta`, inner lower
/// `~ t^gamma`, outer upper `~ t^zeta_tilde`, outer lower `~ t^gamma_tilde`.
/// The predicted rate of the running-minimum squared gradient norm is
/// `T^(-predicted_rate_exponent)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchedulePreset {
    pub kind: PresetKind,
    pub alpha: f64,
    pub omega: f64,
    pub nu: f64,
    pub zeta: f64,
    pub gamma: f64,
    pub zeta_tilde: f64,
    pub gamma_tilde: f64,
    pub predicted_rate_exponent: f64,
}

fn check_alpha(alpha: f64) -> Result<()> {
    // alpha = 2 is the finite-variance boundary; accepted as a limit case.
    if !(alpha > 1.0 && alpha <= 2.0) {
        return Err(Error::contract(format!(
            "moment exponent alpha must lie in (1, 2], got {alpha}"
        )));
    }
    Ok(())
}

/// Exponents for Bi2Clip (BiClip at both tiers) given the noise moment `alpha`.
pub fn preset_bi2clip(alpha: f64) -> Result<SchedulePreset> {
    check_alpha(alpha)?;
    let denom = 4.0 * alpha - 2.0;
    let preset = SchedulePreset {
        kind: PresetKind::Bi2Clip,
        alpha,
        omega: -0.5,
        nu: -alpha / denom,
        zeta: 1.0 / denom,
        gamma: DEFAULT_LOWER_EXPONENT,
        zeta_tilde: DEFAULT_OUTER_UPPER_EXPONENT,
        gamma_tilde: DEFAULT_LOWER_EXPONENT,
        predicted_rate_exponent: (alpha - 1.0) / denom,
    };
    preset.validate()?;
    Ok(preset)
}

/// Exponents for RMSProp outer / TailClip inner given the noise moment `alpha`.
pub fn preset_rmsprop_tailclip(alpha: f64) -> Result<SchedulePreset> {
    check_alpha(alpha)?;
    let preset = SchedulePreset {
        kind: PresetKind::RmspropTailClip,
        alpha,
        omega: 0.0,
        nu: -(alpha + 1.0) / (2.0 * alpha),
        zeta: 1.0 / (2.0 * alpha),
        gamma: DEFAULT_LOWER_EXPONENT,
        zeta_tilde: DEFAULT_OUTER_UPPER_EXPONENT,
        gamma_tilde: DEFAULT_LOWER_EXPONENT,
        predicted_rate_exponent: (alpha - 1.0) / (2.0 * alpha),
    };
    preset.validate()?;
    Ok(preset)
}

impl SchedulePreset {
    /// Replaces the free exponents and re-checks the feasibility region.
    pub fn with_free_exponents(mut self, gamma: f64, gamma_tilde: f64, zeta_tilde: f64) -> Result<Self> {
        self.gamma = gamma;
        self.gamma_tilde = gamma_tilde;
        self.zeta_tilde = zeta_tilde;
        self.validate()?;
        Ok(self)
    }

    /// Checks the exponent constraints of the originating convergence result.
    pub fn validate(&self) -> Result<()> {
        let mut violations = Vec::new();
        match self.kind {
            PresetKind::Bi2Clip => {
                if !(self.zeta > 0.0 && self.zeta_tilde > 0.0) {
                    violations.push("zeta and zeta_tilde must be positive");
                }
                if !(self.gamma < 0.0 && self.gamma_tilde < 0.0) {
                    violations.push("gamma and gamma_tilde must be negative");
                }
                if !(self.omega <= 0.0 && self.nu <= 0.0) {
                    violations.push("omega and nu must be nonpositive");
                }
                if !(self.omega + self.nu > -1.0) {
                    violations.push("omega + nu must exceed -1");
                }
            }
            PresetKind::RmspropTailClip => {
                if !(self.zeta > 0.0) {
                    violations.push("zeta must be positive");
                }
                if !(self.gamma < -0.5) {
                    violations.push("gamma must be below -1/2");
                }
                // The decay condition of the leading bound term, omega - zeta + 1/2 > 0.
                if !(self.omega - self.zeta + 0.5 > 0.0) {
                    violations.push("omega - zeta + 1/2 must be positive");
                }
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            Err(Error::contract(format!(
                "{:?} preset infeasible: {}",
                self.kind,
                violations.join("; ")
            )))
        }
    }

    /// Builds the six schedules `coefficient * t^exponent` from per-schedule
    /// coefficients.
    pub fn schedules<T: Real>(&self, coefficients: &PresetCoefficients<T>) -> Result<PresetSchedules<T>> {
        let s = |c: T, e: f64| Schedule::scaled_power(c, T::of(e));
        Ok(PresetSchedules {
            inner_lr: s(coefficients.inner_lr, self.nu)?,
            inner_upper: s(coefficients.inner_upper, self.zeta)?,
            inner_lower: s(coefficients.inner_lower, self.gamma)?,
            outer_lr: s(coefficients.outer_lr, self.omega)?,
            outer_upper: s(coefficients.outer_upper, self.zeta_tilde)?,
            outer_lower: s(coefficients.outer_lower, self.gamma_tilde)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetCoefficients<T> {
    pub inner_lr: T,
    pub inner_upper: T,
    pub inner_lower: T,
    pub outer_lr: T,
    pub outer_upper: T,
    pub outer_lower: T,
}

impl<T: Real> Default for PresetCoefficients<T> {
    fn default() -> Self {
        Self {
            inner_lr: T::one(),
            inner_upper: T::one(),
            inner_lower: T::one(),
            outer_lr: T::one(),
            outer_upper: T::one(),
            outer_lower: T::one(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetSchedules<T> {
    pub inner_lr: Schedule<T>,
    pub inner_upper: Schedule<T>,
    pub inner_lower: Schedule<T>,
    pub outer_lr: Schedule<T>,
    pub outer_upper: Schedule<T>,
    pub outer_lower: Schedule<T>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn v(values: &[f64]) -> Vector<f64> {
        Vector::from_vec(values.to_vec())
    }

    fn th(u: f64, d: f64) -> BiClipThresholds<f64> {
        BiClipThresholds::new(u, d).unwrap()
    }

    fn assert_close(a: &Vector<f64>, b: &[f64]) {
        assert_eq!(a.dim(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() < 1e-14, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn coordinatewise_examples() {
        assert_eq!(
            biclip_coordinatewise(&th(1.0, 0.1), &v(&[0.05, -0.5, 2.0])),
            v(&[0.1, -0.5, 1.0])
        );
        assert_eq!(
            biclip_coordinatewise(&th(f64::INFINITY, 0.0), &v(&[7.0, -3.0, 0.0])),
            v(&[7.0, -3.0, 0.0])
        );
        assert_eq!(
            biclip_coordinatewise(&th(1.0, 1.0), &v(&[0.3, -7.0, 0.0])),
            v(&[1.0, -1.0, 0.0])
        );
    }

    #[test]
    fn thresholds_reject_inverted_order() {
        assert!(BiClipThresholds::new(0.1, 1.0).is_err());
        assert!(BiClipThresholds::new(1.0, -0.1).is_err());
        assert!(BiClipThresholds::new(f64::NAN, 0.0).is_err());
        assert!(BiClipThresholds::new(f64::INFINITY, f64::INFINITY).is_err());
        assert!(BiClipThresholds::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn l2_biclip_examples() {
        assert_close(&biclip_l2(&th(1.0, 0.0), &v(&[3.0, 4.0])), &[0.6, 0.8]);
        assert_close(&biclip_l2(&th(10.0, 2.0), &v(&[0.6, 0.8])), &[1.2, 1.6]);
        assert_eq!(biclip_l2(&th(5.0, 1.0), &v(&[0.0, 0.0])), v(&[0.0, 0.0]));
    }

    #[test]
    fn l2clip_examples() {
        assert_close(&l2clip(1.0, &v(&[3.0, 4.0])).unwrap(), &[0.6, 0.8]);
        assert_eq!(l2clip(10.0, &v(&[3.0, 4.0])).unwrap(), v(&[3.0, 4.0]));
        assert_eq!(l2clip(0.0, &v(&[5.0, -5.0])).unwrap(), v(&[0.0, 0.0]));
        assert!(l2clip(-1.0, &v(&[1.0])).is_err());
    }

    #[test]
    fn nan_coordinates_propagate() {
        let out = biclip_coordinatewise(&th(1.0, 0.1), &v(&[f64::NAN, 3.0]));
        assert!(out[0].is_nan());
        assert_eq!(out[1], 1.0);
    }

    #[test]
    fn schedule_examples() {
        assert_eq!(Schedule::harmonic(4.0).unwrap().eval(1), 2.0);
        assert_eq!(Schedule::power_law(1.0, -0.5).unwrap().eval(4), 0.5);
        assert_eq!(Schedule::constant(0.3).unwrap().eval(1_000_000), 0.3);
        assert_eq!(Schedule::scaled_power(2.0, 0.5).unwrap().eval(9), 6.0);
        assert_eq!(Schedule::constant(f64::INFINITY).unwrap().eval(3), f64::INFINITY);
        assert_eq!(Schedule::constant(0.0).unwrap().eval(3), 0.0);
    }

    #[test]
    fn schedule_constructors_validate() {
        assert!(Schedule::constant(-1.0).is_err());
        assert!(Schedule::power_law(0.0, 1.0).is_err());
        assert!(Schedule::power_law(1.0, f64::NAN).is_err());
        assert!(Schedule::harmonic(0.0).is_err());
        assert!(Schedule::scaled_power(f64::INFINITY, 0.0).is_err());
    }

    #[test]
    fn bi2clip_preset_values() {
        let p = preset_bi2clip(1.5).unwrap();
        assert_eq!(p.nu, -0.375);
        assert_eq!(p.zeta, 0.25);
        assert_eq!(p.omega, -0.5);
        assert_eq!(p.predicted_rate_exponent, 0.125);
        assert!((preset_bi2clip(2.0).unwrap().predicted_rate_exponent - 1.0 / 6.0).abs() < 1e-15);
        assert!((preset_bi2clip(1.25).unwrap().predicted_rate_exponent - 0.25 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_preset_values() {
        let p = preset_rmsprop_tailclip(1.5).unwrap();
        assert!((p.zeta - 1.0 / 3.0).abs() < 1e-15);
        assert!((p.nu + 5.0 / 6.0).abs() < 1e-15);
        assert_eq!(p.omega, 0.0);
        assert!((p.predicted_rate_exponent - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(preset_rmsprop_tailclip(2.0).unwrap().predicted_rate_exponent, 0.25);
        let near = preset_rmsprop_tailclip(1.01).unwrap().predicted_rate_exponent;
        assert!((near - 0.01 / 2.02).abs() < 1e-15);
    }

    #[test]
    fn presets_reject_out_of_range_alpha() {
        for alpha in [1.0, 0.5, 2.5, f64::NAN] {
            assert!(preset_bi2clip(alpha).is_err());
            assert!(preset_rmsprop_tailclip(alpha).is_err());
        }
    }

    #[test]
    fn presets_satisfy_constraints_and_reject_bad_overrides() {
        for alpha in [1.01, 1.25, 1.5, 1.75, 2.0] {
            let b = preset_bi2clip(alpha).unwrap();
            assert!(b.zeta > 0.0 && 0.0 > b.gamma && b.omega + b.nu > -1.0);
            let r = preset_rmsprop_tailclip(alpha).unwrap();
            assert!(r.omega - r.zeta + 0.5 > 0.0 && r.gamma < -0.5);
        }
        let b = preset_bi2clip(1.5).unwrap();
        assert!(b.with_free_exponents(0.1, -1.0, 0.01).is_err());
        assert!(b.with_free_exponents(-0.5, -0.5, 0.0).is_err());
        let r = preset_rmsprop_tailclip(1.5).unwrap();
        assert!(r.with_free_exponents(-0.25, -1.0, 0.01).is_err());
    }

    #[test]
    fn preset_schedules_follow_exponents() {
        let p = preset_bi2clip(1.5).unwrap();
        let coeffs = PresetCoefficients {
            inner_lr: 0.2,
            ..PresetCoefficients::default()
        };
        let s = p.schedules(&coeffs).unwrap();
        assert!((s.inner_lr.eval(16) - 0.2 * 16f64.powf(-0.375)).abs() < 1e-15);
        assert_eq!(s.inner_upper.eval(16), 2.0);
        assert_eq!(s.outer_lr.eval(4), 0.5);
        assert_eq!(s.inner_lower.eval(4), 0.25);
    }

    #[test]
    fn generic_over_single_precision() {
        let t = BiClipThresholds::<f32>::new(1.0, 0.1).unwrap();
        let out = biclip_coordinatewise(&t, &Vector::from_vec(vec![0.05f32, -0.5, 2.0]));
        assert_eq!(out.as_slice(), &[0.1f32, -0.5, 1.0]);
    }

    fn vector() -> impl Strategy<Value = Vector<f64>> {
        prop::collection::vec(prop_oneof![4 => -50.0f64..50.0, 1 => Just(0.0)], 1..12).prop_map(Vector::from_vec)
    }

    fn thresholds() -> impl Strategy<Value = BiClipThresholds<f64>> {
        (0.0f64..5.0, 0.0f64..5.0).prop_map(|(a, b)| th(a.max(b), a.min(b)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2_000))]

        #[test]
        fn coordinatewise_range_and_sign(t in thresholds(), x in vector()) {
            let out = biclip_coordinatewise(&t, &x);
            for (o, xi) in out.iter().zip(x.iter()) {
                prop_assert!(o * xi >= 0.0);
                prop_assert!(o.abs() <= t.upper());
                if *xi != 0.0 {
                    prop_assert!(o.abs() >= t.lower());
                }
                if t.lower() > 0.0 {
                    prop_assert_eq!(*o == 0.0, *xi == 0.0);
                }
            }
        }

        #[test]
        fn coordinatewise_monotone_in_upper(t in thresholds(), bump in 0.0f64..3.0, x in vector()) {
            let raised = th(t.upper() + bump, t.lower());
            let lo = biclip_coordinatewise(&t, &x);
            let hi = biclip_coordinatewise(&raised, &x);
            for (a, b) in lo.iter().zip(hi.iter()) {
                prop_assert!(b.abs() >= a.abs());
            }
        }

        #[test]
        fn l2clip_is_biclip_l2_without_lower(c in 0.0f64..20.0, x in vector()) {
            prop_assert_eq!(l2clip(c, &x).unwrap(), biclip_l2(&th(c, 0.0), &x));
        }
    }
}
