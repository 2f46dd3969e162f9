//! Zero-mean gradient/label noise with light or heavy tails.
//!
//! Heavy-tailed families (Student-t, symmetric Pareto, symmetric alpha-stable)
//! have a finite `alpha`-moment only for `alpha` below their tail parameter,
//! which is the regime where plain averaged SGD breaks down.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Pareto, StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vectorops::Vector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NoiseFamily {
    None,
    Gaussian,
    StudentT,
    SymmetricPareto,
    AlphaStable,
}

impl NoiseFamily {
    pub fn name(self) -> &'static str {
        match self {
            NoiseFamily::None => "none",
            NoiseFamily::Gaussian => "gaussian",
            NoiseFamily::StudentT => "student-t",
            NoiseFamily::SymmetricPareto => "symmetric-pareto",
            NoiseFamily::AlphaStable => "alpha-stable",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for NoiseFamily {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Ok(match s {
            "none" => NoiseFamily::None,
            "gaussian" => NoiseFamily::Gaussian,
            "student-t" => NoiseFamily::StudentT,
            "symmetric-pareto" => NoiseFamily::SymmetricPareto,
            "alpha-stable" => NoiseFamily::AlphaStable,
            other => {
                return Err(format!(
                "unknown noise family `{other}` (expected none, gaussian, student-t, symmetric-pareto, alpha-stable)"
            ))
            }
        })
    }
}

/// Default tail parameter for heavy-tailed families.
pub const DEFAULT_TAIL: f64 = 1.5;

/// A validated noise distribution: `scale * Z` with `Z` drawn from `family`.
///
/// `tail` is the degrees of freedom (Student-t), the Pareto shape, or the
/// stability index (alpha-stable); Gaussian and `None` ignore it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    family: NoiseFamily,
    scale: f64,
    tail: f64,
}

impl NoiseSpec {
    pub fn new(family: NoiseFamily, scale: f64, tail: f64) -> Result<Self> {
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::contract(format!(
                "noise scale must be positive and finite, got {scale}"
            )));
        }
        match family {
            NoiseFamily::StudentT | NoiseFamily::AlphaStable if !(tail > 1.0 && tail <= 2.0) => {
                return Err(Error::contract(format!(
                    "{family} tail parameter must lie in (1, 2], got {tail}"
                )));
            }
            NoiseFamily::SymmetricPareto if !(tail > 1.0 && tail.is_finite()) => {
                return Err(Error::contract(format!(
                    "symmetric-pareto tail must exceed 1 for a zero mean, got {tail}"
                )));
            }
            _ => {}
        }
        Ok(Self { family, scale, tail })
    }

    pub fn none() -> Self {
        Self {
            family: NoiseFamily::None,
            scale: 1.0,
            tail: DEFAULT_TAIL,
        }
    }

    pub fn gaussian(scale: f64) -> Result<Self> {
        Self::new(NoiseFamily::Gaussian, scale, DEFAULT_TAIL)
    }

    pub fn student_t(scale: f64, dof: f64) -> Result<Self> {
        Self::new(NoiseFamily::StudentT, scale, dof)
    }

    pub fn family(&self) -> NoiseFamily {
        self.family
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn tail(&self) -> f64 {
        self.tail
    }

    pub fn is_none(&self) -> bool {
        self.family == NoiseFamily::None
    }

    /// One unit-scale draw.
    pub fn sample_unit<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.family {
            NoiseFamily::None => 0.0,
            NoiseFamily::Gaussian => StandardNormal.sample(rng),
            NoiseFamily::StudentT => StudentT::new(self.tail)
                .expect("validated degrees of freedom")
                .sample(rng),
            NoiseFamily::SymmetricPareto => {
                let magnitude: f64 = Pareto::new(1.0, self.tail).expect("validated pareto shape").sample(rng);
                if rng.random::<bool>() {
                    magnitude
                } else {
                    -magnitude
                }
            }
            NoiseFamily::AlphaStable => symmetric_stable(self.tail, rng),
        }
    }

    /// One draw at the configured scale.
    pub fn sample_scalar<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.sample_unit(rng) * self.scale
    }

    /// Whether `E|xi|^alpha` is finite for this family.
    pub fn has_finite_moment(&self, alpha: f64) -> bool {
        match self.family {
            NoiseFamily::None | NoiseFamily::Gaussian => true,
            NoiseFamily::StudentT | NoiseFamily::SymmetricPareto => alpha < self.tail,
            // Stability index 2 is the Gaussian law.
            NoiseFamily::AlphaStable => self.tail >= 2.0 || alpha < self.tail,
        }
    }
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self::none()
    }
}

/// Symmetric alpha-stable variate (unit scale) by the Chambers-Mallows-Stuck
/// construction.
fn symmetric_stable<R: Rng + ?Sized>(alpha: f64, rng: &mut R) -> f64 {
    let v = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break PI * (u - 0.5);
        }
    };
    let w: f64 = Exp1.sample(rng);
    let first = (alpha * v).sin() / v.cos().powf(1.0 / alpha);
    let second = (((1.0 - alpha) * v).cos() / w).powf((1.0 - alpha) / alpha);
    first * second
}

/// `dim` independent draws from `spec`.
pub fn sample_noise<T: Real, R: Rng + ?Sized>(spec: &NoiseSpec, dim: usize, rng: &mut R) -> Vector<T> {
    if spec.is_none() {
        return Vector::zeros(dim);
    }
    let scale = T::of(spec.scale);
    Vector::from_vec((0..dim).map(|_| T::of(spec.sample_unit(rng)) * scale).collect())
}

/// Mean of `|s|^alpha`.
pub fn empirical_moment<T: Real>(samples: &[T], alpha: T) -> Result<T> {
    if samples.is_empty() {
        return Err(Error::contract("empirical moment of an empty sample"));
    }
    if !(alpha > T::zero()) {
        return Err(Error::contract(format!("moment order must be positive, got {alpha}")));
    }
    let total: T = samples.iter().map(|s| s.abs().powf(alpha)).sum();
    Ok(total / T::of_usize(samples.len()))
}

pub fn has_finite_moment(spec: &NoiseSpec, alpha: f64) -> bool {
    spec.has_finite_moment(alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stream::{Purpose, Streams};

    fn stream(tag: u64) -> crate::stream::StreamRng {
        Streams::new(2024).substream(Purpose::Custom(tag), 0, 0, 0)
    }

    fn draws(spec: &NoiseSpec, n: usize, tag: u64) -> Vec<f64> {
        sample_noise::<f64, _>(spec, n, &mut stream(tag)).into_vec()
    }

    #[test]
    fn none_is_zero() {
        let z: Vector<f64> = sample_noise(&NoiseSpec::none(), 3, &mut stream(0));
        assert_eq!(z.as_slice(), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn gaussian_mean_absolute_value() {
        // E|Z| = sqrt(2/pi) for a standard normal.
        let x = draws(&NoiseSpec::gaussian(1.0).unwrap(), 1_000_000, 1);
        let mean_abs = empirical_moment(&x, 1.0).unwrap();
        assert!((mean_abs - (2.0 / PI).sqrt()).abs() < 0.005, "{mean_abs}");
    }

    #[test]
    fn student_t_moments_split_at_the_tail_index() {
        let spec = NoiseSpec::student_t(1.0, 1.5).unwrap();
        let x = draws(&spec, 2_000_000, 2);
        let (half, full) = (&x[..1_000_000], &x[..]);
        let m12_half = empirical_moment(half, 1.2).unwrap();
        let m12_full = empirical_moment(full, 1.2).unwrap();
        assert!(((m12_full - m12_half) / m12_half).abs() < 0.05);

        // Nested doubling ratios are exchangeable, so growth is measured on
        // fresh samples across a 100x size ladder instead.
        let growth = |spec: &NoiseSpec, alpha: f64, seed: u64| {
            let small = draws(spec, 10_000, 200 + seed);
            let large = draws(spec, 1_000_000, 300 + seed);
            empirical_moment(&large, alpha).unwrap() / empirical_moment(&small, alpha).unwrap()
        };
        let ratios: Vec<f64> = (0..10).map(|seed| growth(&spec, 2.0, seed)).collect();
        let grew = ratios.iter().filter(|r| **r > 1.0).count();
        let geo = (ratios.iter().map(|r| r.ln()).sum::<f64>() / 10.0).exp();
        assert!(grew >= 8 && geo > 2.0, "second moment ratios {ratios:?}");

        let gauss = NoiseSpec::gaussian(1.0).unwrap();
        let control: Vec<f64> = (0..10).map(|seed| growth(&gauss, 2.0, seed)).collect();
        let geo = (control.iter().map(|r| r.ln()).sum::<f64>() / 10.0).exp();
        assert!((geo - 1.0).abs() < 0.05, "gaussian control {control:?}");
    }

    #[test]
    fn every_family_is_centered() {
        let specs = [
            NoiseSpec::gaussian(1.0).unwrap(),
            NoiseSpec::student_t(1.0, 1.5).unwrap(),
            NoiseSpec::new(NoiseFamily::SymmetricPareto, 1.0, 1.5).unwrap(),
            NoiseSpec::new(NoiseFamily::AlphaStable, 1.0, 1.5).unwrap(),
            NoiseSpec::new(NoiseFamily::AlphaStable, 1.0, 2.0).unwrap(),
        ];
        for (k, spec) in specs.iter().enumerate() {
            let mut x = draws(spec, 1_000_000, 10 + k as u64);
            let n = x.len() as f64;
            if spec.has_finite_moment(2.0) {
                let mean = x.iter().sum::<f64>() / n;
                let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                let se = (var / n).sqrt();
                assert!(mean.abs() < 5.0 * se, "{}: mean {mean} se {se}", spec.family());
                continue;
            }
            // Infinite variance: the raw mean has no standard error, so test
            // the 1%-trimmed mean against its winsorized standard error.
            x.sort_by(|a, b| a.total_cmp(b));
            let cut = x.len() / 100;
            let (lo, hi) = (x[cut], x[x.len() - cut - 1]);
            let core = &x[cut..x.len() - cut];
            let trimmed = core.iter().sum::<f64>() / core.len() as f64;
            let wins: Vec<f64> = x.iter().map(|v| v.clamp(lo, hi)).collect();
            let wmean = wins.iter().sum::<f64>() / n;
            let wvar = wins.iter().map(|v| (v - wmean).powi(2)).sum::<f64>() / n;
            let se = wvar.sqrt() / ((1.0 - 2.0 * cut as f64 / n) * n.sqrt());
            assert!(
                trimmed.abs() < 5.0 * se,
                "{}: trimmed mean {trimmed} se {se}",
                spec.family()
            );
        }
    }

    #[test]
    fn alpha_stable_at_two_is_gaussian_with_variance_two() {
        let x = draws(&NoiseSpec::new(NoiseFamily::AlphaStable, 1.0, 2.0).unwrap(), 400_000, 3);
        let var = empirical_moment(&x, 2.0).unwrap();
        assert!((var - 2.0).abs() < 0.03, "{var}");
    }

    #[test]
    fn scale_equivariance_is_bit_exact() {
        for family in [
            NoiseFamily::Gaussian,
            NoiseFamily::StudentT,
            NoiseFamily::SymmetricPareto,
            NoiseFamily::AlphaStable,
        ] {
            let unit = draws(&NoiseSpec::new(family, 1.0, 1.5).unwrap(), 1000, 4);
            let scaled = draws(&NoiseSpec::new(family, 3.7, 1.5).unwrap(), 1000, 4);
            for (u, s) in unit.iter().zip(&scaled) {
                assert_eq!((3.7 * u).to_bits(), s.to_bits());
            }
        }
    }

    #[test]
    fn empirical_moment_examples() {
        assert_eq!(empirical_moment(&[1.0, -1.0, 1.0, -1.0], 2.0).unwrap(), 1.0);
        assert_eq!(empirical_moment(&[0.0, 0.0, 0.0], 1.5).unwrap(), 0.0);
        assert!((empirical_moment(&[2.0], 1.5).unwrap() - 2f64.powf(1.5)).abs() < 1e-15);
        assert!(empirical_moment::<f64>(&[], 1.0).is_err());
    }

    #[test]
    fn finite_moment_table() {
        let t = NoiseSpec::student_t(1.0, 1.5).unwrap();
        assert!(has_finite_moment(&t, 1.2));
        assert!(!has_finite_moment(&t, 2.0));
        assert!(has_finite_moment(&NoiseSpec::gaussian(1.0).unwrap(), 7.0));
        assert!(has_finite_moment(&NoiseSpec::none(), 7.0));
        let s = NoiseSpec::new(NoiseFamily::AlphaStable, 1.0, 1.7).unwrap();
        assert!(has_finite_moment(&s, 1.6) && !has_finite_moment(&s, 1.7));
        let p = NoiseSpec::new(NoiseFamily::SymmetricPareto, 1.0, 1.3).unwrap();
        assert!(!has_finite_moment(&p, 1.3));
    }

    #[test]
    fn spec_validation() {
        assert!(NoiseSpec::student_t(1.0, 2.5).is_err());
        assert!(NoiseSpec::student_t(0.0, 1.5).is_err());
        assert!(NoiseSpec::new(NoiseFamily::AlphaStable, 1.0, 1.0).is_err());
        assert!(NoiseSpec::new(NoiseFamily::SymmetricPareto, 1.0, 0.9).is_err());
        assert!(NoiseSpec::gaussian(f64::INFINITY).is_err());
        assert_eq!("student-t".parse::<NoiseFamily>().unwrap(), NoiseFamily::StudentT);
        assert!("cauchy".parse::<NoiseFamily>().is_err());
    }
}
