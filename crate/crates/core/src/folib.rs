//! Fractional-order operators and PID controller templates.
//!
//! `s^alpha` is replaced by an Oustaloup recursive filter over a finite band,
//! then the controller is discretized with Tustin. The result is the
//! ready-to-implement discrete controller that the tuning loss evaluates.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lti::{self, ContinuousTf, DiscreteTf, LtiError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FolibError {
    #[error("invalid Oustaloup band: need 0 < w_b < w_h, got ({0}, {1})")]
    InvalidBand(f64, f64),
    #[error("Oustaloup order must be at least 1")]
    InvalidOrder,
    #[error("expected {expected} controller parameters, got {got}")]
    WrongParameterCount { expected: usize, got: usize },
    #[error("non-finite controller parameter")]
    NonFiniteParameter,
    #[error("template is for {0:?}")]
    KindMismatch(ControllerKind),
    #[error(transparent)]
    Lti(#[from] LtiError),
}

/// Fractional-order PID gains, vector order `[kfp, kfi, lambda, kfd, mu]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FopidParams {
    pub kfp: f64,
    pub kfi: f64,
    pub lambda: f64,
    pub kfd: f64,
    pub mu: f64,
}

impl FopidParams {
    pub fn from_slice(theta: &[f64]) -> Result<Self, FolibError> {
        let [kfp, kfi, lambda, kfd, mu] = fixed::<5>(theta)?;
        Ok(Self { kfp, kfi, lambda, kfd, mu })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.kfp, self.kfi, self.lambda, self.kfd, self.mu]
    }
}

/// Integer-order PID gains, vector order `[kp, ki, kd]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IopidParams {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl IopidParams {
    pub fn from_slice(theta: &[f64]) -> Result<Self, FolibError> {
        let [kp, ki, kd] = fixed::<3>(theta)?;
        Ok(Self { kp, ki, kd })
    }

    pub fn to_vec(&self) -> Vec<f64> {
        vec![self.kp, self.ki, self.kd]
    }
}

fn fixed<const N: usize>(theta: &[f64]) -> Result<[f64; N], FolibError> {
    let arr: [f64; N] =
        theta.try_into().map_err(|_| FolibError::WrongParameterCount { expected: N, got: theta.len() })?;
    if arr.iter().any(|x| !x.is_finite()) {
        return Err(FolibError::NonFiniteParameter);
    }
    Ok(arr)
}

/// Oustaloup filter settings: `order` gives `2 * order + 1` zero/pole pairs
/// spread geometrically over `[w_b, w_h]` rad/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OustaloupConfig {
    pub order: usize,
    pub w_b: f64,
    pub w_h: f64,
}

impl OustaloupConfig {
    pub fn new(order: usize, w_b: f64, w_h: f64) -> Result<Self, FolibError> {
        let cfg = Self { order, w_b, w_h };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), FolibError> {
        if self.order < 1 {
            return Err(FolibError::InvalidOrder);
        }
        if !(self.w_b > 0.0 && self.w_h > self.w_b && self.w_h.is_finite()) {
            return Err(FolibError::InvalidBand(self.w_b, self.w_h));
        }
        Ok(())
    }

    /// Number of zero/pole pairs per fractional operator.
    pub fn pairs(&self) -> usize {
        2 * self.order + 1
    }
}

impl Default for OustaloupConfig {
    fn default() -> Self {
        Self { order: 5, w_b: 1e-6, w_h: 1e3 }
    }
}

/// Rational approximation of `s^alpha`.
///
/// Integer powers are exact monomials; only the fractional part goes through
/// the recursive filter, so `alpha = 1` gives exactly `s`. Negative orders are
/// the reciprocal of the positive-order filter.
pub fn oustaloup(alpha: f64, cfg: &OustaloupConfig) -> ContinuousTf {
    if alpha < 0.0 {
        return oustaloup(-alpha, cfg).reciprocal();
    }
    let whole = alpha.floor();
    let frac = alpha - whole;
    let mut parts = Vec::new();
    if whole > 0.0 {
        parts.push(ContinuousTf::s_power(whole as i32));
    }
    if frac > 0.0 {
        parts.push(fractional_filter(frac, cfg));
    }
    parts.into_iter().reduce(|a, b| a.series(&b)).unwrap_or_else(|| ContinuousTf::gain(1.0))
}

/// `w_h^a * prod (s + w'_k) / (s + w_k)` for `0 < a < 1`. With monic factors
/// the gain `w_h^a` puts the band centre `sqrt(w_b w_h)` at magnitude
/// `sqrt(w_b w_h)^a`.
fn fractional_filter(a: f64, cfg: &OustaloupConfig) -> ContinuousTf {
    let m = cfg.pairs() as f64;
    let ratio = cfg.w_h / cfg.w_b;
    let mut tf = ContinuousTf::gain(cfg.w_h.powf(a));
    for k in 1..=cfg.pairs() {
        let kf = (k - 1) as f64;
        let zero = cfg.w_b * ratio.powf((kf + 0.5 * (1.0 - a)) / m);
        let pole = cfg.w_b * ratio.powf((kf + 0.5 * (1.0 + a)) / m);
        let section = ContinuousTf::new(vec![1.0, zero], vec![1.0, pole]).expect("first-order section");
        tf = tf.series(&section);
    }
    tf
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Fopid,
    Iopid,
}

impl ControllerKind {
    pub fn dimension(self) -> usize {
        match self {
            ControllerKind::Fopid => 5,
            ControllerKind::Iopid => 3,
        }
    }
}

/// How a parameter vector becomes a discrete controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerTemplate {
    pub kind: ControllerKind,
    /// Ignored for integer-order controllers.
    pub oustaloup: OustaloupConfig,
    pub sample_time: f64,
}

impl ControllerTemplate {
    pub fn fopid(oustaloup: OustaloupConfig, sample_time: f64) -> Self {
        Self { kind: ControllerKind::Fopid, oustaloup, sample_time }
    }

    pub fn iopid(sample_time: f64) -> Self {
        Self { kind: ControllerKind::Iopid, oustaloup: OustaloupConfig::default(), sample_time }
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    /// Continuous controller after integer-order approximation (before Tustin).
    pub fn continuous(&self, theta: &[f64]) -> Result<ContinuousTf, FolibError> {
        match self.kind {
            ControllerKind::Fopid => Ok(fopid_continuous(&FopidParams::from_slice(theta)?, &self.oustaloup)),
            ControllerKind::Iopid => Ok(iopid_continuous(&IopidParams::from_slice(theta)?)),
        }
    }

    /// `c2d(F2I(C(s; theta)))`.
    pub fn realize(&self, theta: &[f64]) -> Result<DiscreteTf, FolibError> {
        Ok(lti::tustin(&self.continuous(theta)?, self.sample_time)?)
    }
}

fn fopid_continuous(p: &FopidParams, cfg: &OustaloupConfig) -> ContinuousTf {
    let mut terms = Vec::new();
    // exact zero gains drop the whole term, order included
    if p.kfp != 0.0 {
        terms.push(ContinuousTf::gain(p.kfp));
    }
    if p.kfi != 0.0 {
        terms.push(oustaloup(-p.lambda, cfg).scale(p.kfi));
    }
    if p.kfd != 0.0 {
        terms.push(oustaloup(p.mu, cfg).scale(p.kfd));
    }
    ContinuousTf::sum(&terms)
}

fn iopid_continuous(p: &IopidParams) -> ContinuousTf {
    let mut terms = Vec::new();
    if p.kp != 0.0 {
        terms.push(ContinuousTf::gain(p.kp));
    }
    if p.ki != 0.0 {
        terms.push(ContinuousTf::s_power(-1).scale(p.ki));
    }
    if p.kd != 0.0 {
        terms.push(ContinuousTf::s_power(1).scale(p.kd));
    }
    ContinuousTf::sum(&terms)
}

/// `kfp + kfi s^-lambda + kfd s^mu`, approximated and discretized.
///
/// The sum is formed in `s` and each rational factor is mapped through
/// Tustin; the derivative part may be improper in `s` but its image in `z`
/// is proper.
pub fn realize_fopid(p: &FopidParams, t: &ControllerTemplate) -> Result<DiscreteTf, FolibError> {
    if t.kind != ControllerKind::Fopid {
        return Err(FolibError::KindMismatch(t.kind));
    }
    Ok(lti::tustin(&fopid_continuous(p, &t.oustaloup), t.sample_time)?)
}

/// `kp + ki / s + kd s`, discretized term by term.
pub fn realize_iopid(p: &IopidParams, t: &ControllerTemplate) -> Result<DiscreteTf, FolibError> {
    if t.kind != ControllerKind::Iopid {
        return Err(FolibError::KindMismatch(t.kind));
    }
    Ok(lti::tustin(&iopid_continuous(p), t.sample_time)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn band_cfg() -> OustaloupConfig {
        OustaloupConfig::new(5, 1e-6, 1e3).unwrap()
    }

    fn logspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        let (a, b) = (lo.log10(), hi.log10());
        (0..n).map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)).collect()
    }

    /// Magnitude error in dB and phase error in degrees against (j w)^alpha.
    fn band_errors(alpha: f64, cfg: &OustaloupConfig, omegas: &[f64]) -> (f64, f64) {
        let g = oustaloup(alpha, cfg);
        omegas.iter().fold((0.0f64, 0.0f64), |(dm, dp), &w| {
            let approx = g.eval(Complex64::new(0.0, w));
            let exact = Complex64::new(0.0, w).powf(alpha);
            let mag = 20.0 * (approx.norm() / exact.norm()).log10();
            let mut phase = (approx.arg() - exact.arg()).to_degrees();
            phase = (phase + 180.0).rem_euclid(360.0) - 180.0;
            (dm.max(mag.abs()), dp.max(phase.abs()))
        })
    }

    #[test]
    fn zero_order_is_unity() {
        let (n, d) = oustaloup(0.0, &band_cfg()).num_den();
        assert_eq!(n.coeffs(), &[1.0]);
        assert_eq!(d.coeffs(), &[1.0]);
    }

    #[test]
    fn unit_order_is_exact_derivative() {
        let (n, d) = oustaloup(1.0, &band_cfg()).num_den();
        assert_eq!(n.coeffs(), &[1.0, 0.0]);
        assert_eq!(d.coeffs(), &[1.0]);
    }

    #[test]
    fn half_order_tracks_sqrt_jw() {
        let (mag, phase) = band_errors(0.5, &band_cfg(), &logspace(1e-4, 1e1, 20));
        assert!(mag <= 1.0, "magnitude error {mag} dB");
        assert!(phase <= 2.0, "phase error {phase} deg");
    }

    #[test]
    fn band_centre_gain() {
        let cfg = band_cfg();
        let wc = (cfg.w_b * cfg.w_h).sqrt();
        for a in [0.2, 0.5, 0.8] {
            let g = oustaloup(a, &cfg).eval(Complex64::new(0.0, wc));
            assert!((g.norm() / wc.powf(a) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn eleven_sections_for_order_five() {
        let g = oustaloup(0.3, &band_cfg());
        let (n, d) = g.num_den();
        assert_eq!(n.degree(), 11);
        assert_eq!(d.degree(), 11);
        let g = oustaloup(1.3, &band_cfg());
        assert_eq!(g.num_den().0.degree(), 12);
    }

    #[test]
    fn invalid_configs() {
        assert!(OustaloupConfig::new(0, 1.0, 2.0).is_err());
        assert!(OustaloupConfig::new(3, 2.0, 1.0).is_err());
        assert!(OustaloupConfig::new(3, 0.0, 1.0).is_err());
    }

    #[test]
    fn initial_fopid_is_unit_gain() {
        let t = ControllerTemplate::fopid(band_cfg(), 0.1);
        let c = realize_fopid(&FopidParams::from_slice(&[1.0, 0.0, 1.0, 0.0, 1.0]).unwrap(), &t).unwrap();
        let (n, d) = c.num_den();
        assert_eq!(n.coeffs(), &[1.0]);
        assert_eq!(d.coeffs(), &[1.0]);
    }

    #[test]
    fn pure_integrator_fopid() {
        let ts = 0.1;
        let t = ControllerTemplate::fopid(band_cfg(), ts);
        let c = t.realize(&[0.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
        let (n, d) = c.num_den();
        let h = ts / 2.0;
        assert!((n.coeffs()[0] - h).abs() < 1e-15 && (n.coeffs()[1] - h).abs() < 1e-15);
        assert_eq!(d.coeffs(), &[1.0, -1.0]);
    }

    #[test]
    fn iopid_examples() {
        let t = ControllerTemplate::iopid(0.05);
        let c = realize_iopid(&IopidParams { kp: 1.0, ki: 0.0, kd: 0.0 }, &t).unwrap();
        assert_eq!(c.num_den().0.coeffs(), &[1.0]);

        // 0.1 + 0.5 * (ts/2)(z+1)/(z-1) = (0.1125 z - 0.0875) / (z - 1)
        let c = t.realize(&[0.1, 0.5, 0.0]).unwrap();
        let (n, d) = c.num_den();
        assert!((n.coeffs()[0] - 0.1125).abs() < 1e-15);
        assert!((n.coeffs()[1] + 0.0875).abs() < 1e-15);
        assert_eq!(d.coeffs(), &[1.0, -1.0]);

        let c = ControllerTemplate::iopid(0.1).realize(&[0.0, 0.0, 1.0]).unwrap();
        let (n, d) = c.num_den();
        assert!((n.coeffs()[0] - 20.0).abs() < 1e-12 && (n.coeffs()[1] + 20.0).abs() < 1e-12);
        assert_eq!(d.coeffs(), &[1.0, 1.0]);
    }

    #[test]
    fn wrong_dimension_and_kind() {
        let t = ControllerTemplate::iopid(0.1);
        assert_eq!(t.realize(&[1.0, 2.0]), Err(FolibError::WrongParameterCount { expected: 3, got: 2 }));
        assert!(matches!(
            realize_fopid(&FopidParams::from_slice(&[1.0; 5]).unwrap(), &t),
            Err(FolibError::KindMismatch(ControllerKind::Iopid))
        ));
        assert_eq!(
            FopidParams::from_slice(&[1.0, f64::NAN, 1.0, 0.0, 1.0]),
            Err(FolibError::NonFiniteParameter)
        );
    }

    #[test]
    fn oustaloup_band_fidelity() {
        // two decades inside the band; within one decade of either edge the
        // truncated product loses up to ~4.4 deg of phase (alpha = 0.8)
        let cfg = band_cfg();
        let omegas = logspace(100.0 * cfg.w_b, cfg.w_h / 100.0, 30);
        for alpha in [0.2, 0.5, 0.8, 1.3, 1.7] {
            let (mag, phase) = band_errors(alpha, &cfg, &omegas);
            assert!(mag <= 1.0 && phase <= 2.0, "alpha {alpha}: {mag} dB, {phase} deg");
        }
        let (_, edge) = band_errors(0.8, &cfg, &[10.0 * cfg.w_b]);
        assert!(edge > 4.0 && edge < 4.5, "{edge}");
    }

    proptest! {
        #[test]
        fn fopid_with_unit_orders_equals_iopid(kp in 0.0..10.0f64, ki in 0.0..10.0f64, kd in 0.0..10.0f64) {
            let fo = ControllerTemplate::fopid(band_cfg(), 0.1).realize(&[kp, ki, 1.0, kd, 1.0]).unwrap();
            let io = ControllerTemplate::iopid(0.1).realize(&[kp, ki, kd]).unwrap();
            let (fn_, fd) = fo.num_den();
            let (in_, id) = io.num_den();
            prop_assert_eq!(fn_.coeffs().len(), in_.coeffs().len());
            prop_assert_eq!(fd.coeffs().len(), id.coeffs().len());
            for (a, b) in fn_.coeffs().iter().zip(in_.coeffs()).chain(fd.coeffs().iter().zip(id.coeffs())) {
                prop_assert!((a - b).abs() <= 1e-9);
            }
        }

        #[test]
        fn reciprocal_symmetry(alpha in 0.01..1.99f64, logw in -6.0..3.0f64) {
            let cfg = band_cfg();
            let w = Complex64::new(0.0, 10f64.powf(logw));
            let prod = oustaloup(-alpha, &cfg).eval(w) * oustaloup(alpha, &cfg).eval(w);
            prop_assert!((prod.norm() - 1.0).abs() <= 1e-6);
        }

        #[test]
        fn realized_fopid_is_biproper_and_invertible(
            kfp in 0.0..10.0f64, kfi in 0.0..10.0f64, lambda in 0.0..2.0f64,
            kfd in 0.0..10.0f64, mu in 0.0..2.0f64,
        ) {
            prop_assume!(kfp != 0.0 || kfd != 0.0);
            let c = ControllerTemplate::fopid(band_cfg(), 0.1).realize(&[kfp, kfi, lambda, kfd, mu]).unwrap();
            prop_assert!(c.block().is_proper());
            prop_assert!(c.feedthrough().abs() >= 1e-12);
            prop_assert!(lti::invert(&c).is_ok());
        }
    }
}
