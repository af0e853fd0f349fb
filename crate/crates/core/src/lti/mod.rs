//! Discrete-time SISO LTI toolkit: polynomials, transfer functions, Tustin
//! discretization, zero-state simulation, loop composition and poles.

mod block;
mod continuous;
mod discrete;
mod polynomial;
mod signal;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

pub use block::{Block, StateSpace, FEEDTHROUGH_TOL};
pub use continuous::ContinuousTf;
pub use discrete::DiscreteTf;
pub use polynomial::Polynomial;
pub use signal::Signal;

pub(crate) use signal::same_sample_time;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LtiError {
    #[error("polynomial needs at least one coefficient")]
    EmptyPolynomial,
    #[error("non-finite coefficient")]
    NonFiniteCoefficient,
    #[error("denominator is identically zero")]
    ZeroDenominator,
    #[error("transfer function is improper")]
    Improper,
    #[error("invalid sample time {0}")]
    InvalidSampleTime(f64),
    #[error("invalid dead time {0}")]
    InvalidDeadTime(f64),
    #[error("signal needs at least one sample")]
    EmptySignal,
    #[error("sample time mismatch: {0} vs {1}")]
    SampleTimeMismatch(f64, f64),
    #[error("signal length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("improper discretization")]
    ImproperDiscretization,
    #[error("algebraic loop: 1 + P C has zero feedthrough")]
    AlgebraicLoop,
    #[error("non-invertible controller")]
    NonInvertible,
}

/// Bilinear (Tustin) discretization `s <- (2/ts)(z-1)/(z+1)` without
/// prewarping. Dead time becomes `round(dead_time / ts)` samples.
///
/// Each rational leaf is substituted separately, so structured inputs stay
/// structured. Leaves with a pure-derivative excess (e.g. `s`) are accepted:
/// their image is still proper in `z`.
pub fn tustin(g: &ContinuousTf, ts: f64) -> Result<DiscreteTf, LtiError> {
    discrete::check_sample_time(ts)?;
    let c = 2.0 / ts;
    let block = g.block().try_map_leaves(&mut |num, den| tustin_leaf(num, den, c))?;
    let delay = (g.dead_time() / ts).round() as usize;
    Ok(DiscreteTf::from_block(block, ts, delay))
}

fn tustin_leaf(num: &Polynomial, den: &Polynomial, c: f64) -> Result<Block, LtiError> {
    let order = num.degree().max(den.degree());
    let zm1 = Polynomial::from_vec(vec![1.0, -1.0]);
    let zp1 = Polynomial::from_vec(vec![1.0, 1.0]);
    let substitute = |p: &Polynomial| {
        (0..=p.degree()).fold(Polynomial::zero(), |acc, j| {
            let cj = p.coeff_of(j);
            if cj == 0.0 {
                return acc;
            }
            let term = zm1.pow(j).mul(&zp1.pow(order - j)).scale(cj * c.powi(j as i32));
            acc.add(&term)
        })
    };
    let nz = substitute(num);
    let dz = substitute(den);
    if dz.is_zero() || nz.degree() > dz.degree() {
        return Err(LtiError::ImproperDiscretization);
    }
    Ok(Block::rational(nz, dz))
}

/// Zero-state response of `g` to `u`, same length as `u`.
///
/// Non-finite values are passed through untouched.
pub fn simulate(g: &DiscreteTf, u: &Signal) -> Result<Signal, LtiError> {
    if !same_sample_time(g.sample_time(), u.sample_time()) {
        return Err(LtiError::SampleTimeMismatch(g.sample_time(), u.sample_time()));
    }
    let mut stepper = g.stepper();
    let y = u.samples().iter().map(|&x| stepper.step(x)).collect();
    Ok(Signal::from_parts(y, u.sample_time()))
}

/// Impulse response `g_0 .. g_n`.
pub fn impulse_response(g: &DiscreteTf, n: usize) -> Signal {
    let delta = Signal::impulse(n + 1, g.sample_time()).expect("valid sample time");
    simulate(g, &delta).expect("matching sample time")
}

/// Closed loop `T = P C / (1 + P C)` under unity negative feedback.
/// Any plant or controller delay is folded into the loop.
pub fn feedback_unity(p: &DiscreteTf, c: &DiscreteTf) -> Result<DiscreteTf, LtiError> {
    p.check_same_rate(c)?;
    let forward = Block::series(vec![p.folded_block(), c.folded_block()]);
    if (1.0 + forward.feedthrough()).abs() <= FEEDTHROUGH_TOL {
        return Err(LtiError::AlgebraicLoop);
    }
    Ok(DiscreteTf::from_block(Block::Feedback(Box::new(forward)), p.sample_time(), 0))
}

/// `1 / G`; requires a delay-free, biproper `G`.
pub fn invert(g: &DiscreteTf) -> Result<DiscreteTf, LtiError> {
    if g.delay_samples() > 0 || g.feedthrough().abs() < FEEDTHROUGH_TOL || !g.block().is_proper() {
        return Err(LtiError::NonInvertible);
    }
    Ok(DiscreteTf::from_block(g.block().reciprocal(), g.sample_time(), 0))
}

/// Poles as eigenvalues of the realization's state matrix (for a plain
/// `num / den` this is the companion matrix of the monic denominator).
/// The explicit `z^-d` delay contributes no poles here.
pub fn poles(g: &DiscreteTf) -> Vec<Complex64> {
    let ss = g.block().state_space();
    polynomial::eigenvalues(ss.a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StabilityCheck {
    pub stable: bool,
    /// `1 - max |pole|`.
    pub margin: f64,
    pub max_pole_magnitude: f64,
}

/// Stable iff every pole lies inside the circle of radius `1 - tol`.
pub fn is_bibo_stable(g: &DiscreteTf, tol: f64) -> StabilityCheck {
    let max = poles(g).iter().map(|p| p.norm()).fold(0.0, f64::max);
    StabilityCheck { stable: max < 1.0 - tol, margin: 1.0 - max, max_pole_magnitude: max }
}

/// Poles of a realization with exactly cancelled boundary modes set apart.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModeSplit {
    pub poles: Vec<Complex64>,
    pub hidden: Vec<Complex64>,
}

/// Modes with `|p| >= 1 - BOUNDARY_BAND` are checked against this rank
/// tolerance; interior modes are always kept.
const BOUNDARY_BAND: f64 = 1e-9;
const PBH_TOL: f64 = 1e-8;

/// Poles of the input-output map of `g`.
///
/// Modes on or outside the unit circle that are uncontrollable or
/// unobservable (PBH rank test) are moved to `hidden`. These come from exact
/// pole/zero cancellations, e.g. the `z = -1` pole of a Tustin derivative
/// against the `z = -1` zeros of a Tustin plant with relative degree.
pub fn transfer_poles(g: &DiscreteTf) -> ModeSplit {
    let ss = g.block().state_space();
    let modes = polynomial::eigenvalues(ss.a.clone());
    let mut split = ModeSplit { poles: Vec::new(), hidden: Vec::new() };
    for p in modes {
        if p.norm() >= 1.0 - BOUNDARY_BAND && hidden_mode(&ss, p) {
            split.hidden.push(p);
        } else {
            split.poles.push(p);
        }
    }
    split
}

fn hidden_mode(ss: &StateSpace, p: Complex64) -> bool {
    let n = ss.a.nrows();
    let unit = |v: &nalgebra::DVector<f64>| {
        let norm = v.norm();
        if norm > 0.0 {
            v / norm
        } else {
            v.clone()
        }
    };
    let b = unit(&ss.b);
    let c = unit(&ss.c);
    let shifted = ss.a.map(Complex64::from) - nalgebra::DMatrix::<Complex64>::identity(n, n) * p;
    let scale = 1.0 + ss.a.norm();
    let smallest = |m: nalgebra::DMatrix<Complex64>| m.singular_values().min();
    let mut ctrb = nalgebra::DMatrix::<Complex64>::zeros(n, n + 1);
    ctrb.view_mut((0, 0), (n, n)).copy_from(&shifted);
    ctrb.view_mut((0, n), (n, 1)).copy_from(&b.map(Complex64::from));
    let mut obsv = nalgebra::DMatrix::<Complex64>::zeros(n + 1, n);
    obsv.view_mut((0, 0), (n, n)).copy_from(&shifted);
    obsv.view_mut((n, 0), (1, n)).copy_from(&c.map(Complex64::from).transpose());
    smallest(ctrb) <= PBH_TOL * scale || smallest(obsv) <= PBH_TOL * scale
}

/// Signals of a unity-feedback loop driven by a reference.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopTrace {
    pub u: Signal,
    pub y: Signal,
}

/// Sample-by-sample co-simulation of `e = r - y`, `u = C e`, `y = P u`,
/// zero initial state, with the direct-feedthrough algebra solved per sample.
pub fn cosimulate_loop(p: &DiscreteTf, c: &DiscreteTf, r: &Signal) -> Result<LoopTrace, LtiError> {
    p.check_same_rate(c)?;
    if !same_sample_time(p.sample_time(), r.sample_time()) {
        return Err(LtiError::SampleTimeMismatch(p.sample_time(), r.sample_time()));
    }
    let mut ps = p.stepper();
    let mut cs = c.stepper();
    let dp = ps.feedthrough();
    let dc = cs.feedthrough();
    let den = 1.0 + dc * dp;
    if den.abs() <= FEEDTHROUGH_TOL {
        return Err(LtiError::AlgebraicLoop);
    }
    let mut u = Vec::with_capacity(r.len());
    let mut y = Vec::with_capacity(r.len());
    for &rk in r.samples() {
        let fp = ps.free();
        let fc = cs.free();
        let uk = (dc * (rk - fp) + fc) / den;
        let yk = dp * uk + fp;
        cs.step(rk - yk);
        ps.step(uk);
        u.push(uk);
        y.push(yk);
    }
    let ts = r.sample_time();
    Ok(LoopTrace { u: Signal::from_parts(u, ts), y: Signal::from_parts(y, ts) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{a:?} vs {b:?}");
        }
    }

    fn first_order() -> DiscreteTf {
        tustin(&ContinuousTf::new(vec![1.0], vec![1.0, 1.0]).unwrap(), 0.1).unwrap()
    }

    #[test]
    fn tustin_first_order() {
        // (z+1)/(21z-19)
        let (n, d) = first_order().num_den();
        close(n.coeffs(), &[0.047619, 0.047619], 5e-7);
        close(d.coeffs(), &[1.0, -0.904762], 5e-7);
        close(n.coeffs(), &[1.0 / 21.0, 1.0 / 21.0], 1e-15);
        close(d.coeffs(), &[1.0, -19.0 / 21.0], 1e-15);
    }

    #[test]
    fn tustin_static_gain_is_identity() {
        let g = tustin(&ContinuousTf::gain(1.0), 0.37).unwrap();
        let (n, d) = g.num_den();
        assert_eq!(n.coeffs(), &[1.0]);
        assert_eq!(d.coeffs(), &[1.0]);
    }

    #[test]
    fn tustin_rounds_dead_time() {
        let g = ContinuousTf::new(vec![1.0], vec![1.0, 1.0]).unwrap().with_dead_time(5.0).unwrap();
        assert_eq!(tustin(&g, 0.1).unwrap().delay_samples(), 50);
    }

    #[test]
    fn tustin_of_pole_at_two_over_ts_is_rejected() {
        // den(s) = s - 20 vanishes at s = 2/ts, so the z-denominator drops a degree
        let g = ContinuousTf::new(vec![1.0, 0.0], vec![1.0, -20.0]).unwrap();
        assert_eq!(tustin(&g, 0.1), Err(LtiError::ImproperDiscretization));
        assert!(tustin(&g, 0.0).is_err());
    }

    #[test]
    fn tustin_of_derivative() {
        let g = tustin(&ContinuousTf::s_power(1), 0.1).unwrap();
        let (n, d) = g.num_den();
        close(n.coeffs(), &[20.0, -20.0], 1e-12);
        close(d.coeffs(), &[1.0, 1.0], 1e-15);
    }

    #[test]
    fn unit_delay_step() {
        let g = DiscreteTf::pure_delay(1, 1.0).unwrap();
        let y = simulate(&g, &Signal::step(4, 1.0).unwrap()).unwrap();
        assert_eq!(y.samples(), &[0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn identity_passes_input() {
        let g = DiscreteTf::gain(1.0, 0.5).unwrap();
        let u = Signal::new(vec![3.0, -1.0, f64::NAN, 2.0], 0.5).unwrap();
        let y = simulate(&g, &u).unwrap();
        assert_eq!(y.samples()[..2], [3.0, -1.0]);
        assert!(y.samples()[2].is_nan());
        assert_eq!(y.samples()[3], 2.0);
    }

    #[test]
    fn first_order_step_response() {
        let y = simulate(&first_order(), &Signal::step(3, 0.1).unwrap()).unwrap();
        // reference values truncated to 6 d.p.
        close(y.samples(), &[0.047619, 0.138322, 0.220386], 1e-6);
    }

    #[test]
    fn simulate_rejects_rate_mismatch() {
        let u = Signal::step(3, 0.2).unwrap();
        assert!(matches!(simulate(&first_order(), &u), Err(LtiError::SampleTimeMismatch(..))));
    }

    #[test]
    fn impulse_responses() {
        assert_eq!(
            impulse_response(&DiscreteTf::gain(1.0, 1.0).unwrap(), 3).samples(),
            &[1.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(
            impulse_response(&DiscreteTf::pure_delay(2, 1.0).unwrap(), 3).samples(),
            &[0.0, 0.0, 1.0, 0.0]
        );
        close(impulse_response(&first_order(), 2).samples(), &[0.047619, 0.090703, 0.082064], 1e-6);
    }

    #[test]
    fn feedback_static_loop() {
        let one = DiscreteTf::gain(1.0, 1.0).unwrap();
        let t = feedback_unity(&one, &one).unwrap();
        let (n, d) = t.num_den();
        assert_eq!(n.coeffs(), &[0.5]);
        assert_eq!(d.coeffs(), &[1.0]);
        assert_eq!(t.dc_gain(), 0.5);
    }

    #[test]
    fn feedback_of_unit_delay() {
        // z^-1 / (1 + z^-1) = 1 / (z + 1)
        let p = DiscreteTf::pure_delay(1, 1.0).unwrap();
        let c = DiscreteTf::gain(1.0, 1.0).unwrap();
        let t = feedback_unity(&p, &c).unwrap();
        assert_eq!(t.delay_samples(), 0);
        let (n, d) = t.num_den();
        assert_eq!(n.coeffs(), &[1.0]);
        assert_eq!(d.coeffs(), &[1.0, 1.0]);
        let y = simulate(&t, &Signal::step(4, 1.0).unwrap()).unwrap();
        assert_eq!(y.samples(), &[0.0, 1.0, 0.0, 1.0]);
    }

    #[test]
    fn feedback_algebraic_loop() {
        let p = DiscreteTf::gain(1.0, 1.0).unwrap();
        let c = DiscreteTf::gain(-1.0, 1.0).unwrap();
        assert_eq!(feedback_unity(&p, &c), Err(LtiError::AlgebraicLoop));
        let r = Signal::step(3, 1.0).unwrap();
        assert_eq!(cosimulate_loop(&p, &c, &r), Err(LtiError::AlgebraicLoop));
    }

    #[test]
    fn invert_examples() {
        let g = invert(&DiscreteTf::gain(2.0, 1.0).unwrap()).unwrap();
        assert_eq!(g.dc_gain(), 0.5);
        let g = DiscreteTf::new(vec![1.0, 0.5], vec![1.0, -0.3], 1.0).unwrap();
        let (n, d) = invert(&g).unwrap().num_den();
        assert_eq!(n.coeffs(), &[1.0, -0.3]);
        assert_eq!(d.coeffs(), &[1.0, 0.5]);
        assert_eq!(invert(&DiscreteTf::pure_delay(1, 1.0).unwrap()), Err(LtiError::NonInvertible));
        let strictly = DiscreteTf::new(vec![1.0], vec![1.0, -0.3], 1.0).unwrap();
        assert_eq!(invert(&strictly), Err(LtiError::NonInvertible));
    }

    #[test]
    fn pole_examples() {
        let g = DiscreteTf::new(vec![1.0], vec![1.0, -0.5], 1.0).unwrap();
        let p = poles(&g);
        assert_eq!(p.len(), 1);
        assert!((p[0].re - 0.5).abs() < 1e-15 && p[0].im == 0.0);
        assert!(poles(&DiscreteTf::gain(3.0, 1.0).unwrap()).is_empty());
        let g = DiscreteTf::new(vec![1.0], vec![1.0, 0.0, 0.25], 1.0).unwrap();
        let mut p = poles(&g);
        p.sort_by(|a, b| a.im.partial_cmp(&b.im).unwrap());
        assert!((p[0] - Complex64::new(0.0, -0.5)).norm() < 1e-12);
        assert!((p[1] - Complex64::new(0.0, 0.5)).norm() < 1e-12);
    }

    #[test]
    fn stability_examples() {
        let g = DiscreteTf::new(vec![1.0], vec![1.0, -0.9], 1.0).unwrap();
        let s = is_bibo_stable(&g, 0.0);
        assert!(s.stable);
        assert!((s.margin - 0.1).abs() < 1e-12);
        let g = DiscreteTf::new(vec![1.0], vec![1.0, -1.0], 1.0).unwrap();
        assert!(!is_bibo_stable(&g, 0.0).stable);
        // Tustin of 1/(s+1)^2 at 0.1 s: double pole at 19/21
        let g = tustin(&ContinuousTf::new(vec![1.0], vec![1.0, 2.0, 1.0]).unwrap(), 0.1).unwrap();
        let s = is_bibo_stable(&g, 1e-6);
        assert!(s.stable);
        assert!((s.max_pole_magnitude - 19.0 / 21.0).abs() < 1e-7);
    }

    #[test]
    fn cancelled_boundary_mode_is_hidden() {
        // plant zero at -1 against a derivative-like controller pole at -1
        let p = DiscreteTf::new(vec![0.1, 0.1], vec![1.0, -0.5, 0.0], 1.0).unwrap();
        let c = DiscreteTf::new(vec![1.0, -1.0], vec![1.0, 1.0], 1.0).unwrap();
        let t = feedback_unity(&p, &c).unwrap();
        assert!(poles(&t).iter().any(|z| (z + 1.0).norm() < 1e-9));
        let split = transfer_poles(&t);
        assert_eq!(split.hidden.len(), 1);
        assert!((split.hidden[0] + 1.0).norm() < 1e-9);
        assert!(split.poles.iter().all(|z| z.norm() < 1.0));

        let integrator = DiscreteTf::new(vec![1.0], vec![1.0, -1.0], 1.0).unwrap();
        let split = transfer_poles(&integrator);
        assert!(split.hidden.is_empty());
        assert_eq!(split.poles.len(), 1);
    }
}
