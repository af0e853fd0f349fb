//! Random systems and signals shared by the property and acceptance tests.
#![allow(dead_code)]

use frit::folib::{ControllerTemplate, OustaloupConfig};
use frit::idfrit::ExperimentRecord;
use frit::lti::{self, DiscreteTf, Polynomial, Signal};
use rand::Rng;

/// Monic polynomial with `deg` roots of magnitude at most `radius`,
/// complex ones in conjugate pairs.
pub fn stable_den(rng: &mut impl Rng, deg: usize, radius: f64) -> Polynomial {
    let mut p = Polynomial::one();
    let mut left = deg;
    while left > 0 {
        if left >= 2 && rng.random_bool(0.5) {
            let r = radius * rng.random::<f64>();
            let phi = std::f64::consts::PI * rng.random::<f64>();
            p = p.mul(&Polynomial::new(vec![1.0, -2.0 * r * phi.cos(), r * r]).unwrap());
            left -= 2;
        } else {
            p = p.mul(&Polynomial::from_roots(&[radius * rng.random_range(-1.0..1.0)]));
            left -= 1;
        }
    }
    p
}

/// Strictly proper stable plant of order 1..=4, optionally delayed.
pub fn stable_plant(rng: &mut impl Rng, ts: f64) -> DiscreteTf {
    let deg = rng.random_range(1..=4);
    let den = stable_den(rng, deg, 0.9);
    let num: Vec<f64> = (0..deg).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut num = Polynomial::new(num).unwrap();
    if num.is_zero() {
        num = Polynomial::one();
    }
    let g = DiscreteTf::from_polys(num, den, ts).unwrap();
    g.with_delay(rng.random_range(0..=2))
}

/// Biproper first- or second-order controller, gain shrunk until the loop
/// with `p` is stable.
pub fn stabilizing_controller(rng: &mut impl Rng, p: &DiscreteTf) -> DiscreteTf {
    let ts = p.sample_time();
    let deg = rng.random_range(1..=2);
    let den = stable_den(rng, deg, 0.95);
    let num = stable_den(rng, deg, 0.95);
    let mut k = rng.random_range(0.2..2.0);
    for _ in 0..40 {
        let c = DiscreteTf::from_polys(num.scale(k), den.clone(), ts).unwrap();
        if let Ok(t) = lti::feedback_unity(p, &c) {
            if lti::is_bibo_stable(&t, 1e-3).stable {
                return c;
            }
        }
        k *= 0.5;
    }
    DiscreteTf::from_polys(num.scale(k), den, ts).unwrap()
}

/// Reference with a head in `[0.5, 1]` and bounded random tail.
pub fn reference(rng: &mut impl Rng, n: usize, ts: f64) -> Signal {
    let mut r: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    r[0] = rng.random_range(0.5..1.0);
    Signal::new(r, ts).unwrap()
}

/// Closed-loop record of `p` under `c0` driven by `r0`.
pub fn experiment(p: &DiscreteTf, c0: &DiscreteTf, r0: Signal) -> ExperimentRecord {
    let trace = lti::cosimulate_loop(p, c0, &r0).unwrap();
    ExperimentRecord::new(r0, trace.u, trace.y).unwrap()
}

/// FOPID template over a narrow band (fewer sections keeps tests quick) or IOPID.
pub fn template(rng: &mut impl Rng, ts: f64) -> ControllerTemplate {
    if rng.random_bool(0.5) {
        ControllerTemplate::fopid(OustaloupConfig::new(2, 1e-3, 1e2).unwrap(), ts)
    } else {
        ControllerTemplate::iopid(ts)
    }
}

pub fn theta_for(rng: &mut impl Rng, tpl: &ControllerTemplate) -> Vec<f64> {
    match tpl.dimension() {
        5 => vec![
            rng.random_range(0.05..3.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..2.0),
            rng.random_range(0.0..1.0),
            rng.random_range(0.0..2.0),
        ],
        _ => vec![rng.random_range(0.05..3.0), rng.random_range(0.0..2.0), rng.random_range(0.0..1.0)],
    }
}

pub fn max_abs(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m: f64, v| m.max(v.abs()))
}

/// Lower-triangular Toeplitz matrix with first column `col`.
pub fn dense_toeplitz(col: &[f64]) -> nalgebra::DMatrix<f64> {
    let n = col.len();
    nalgebra::DMatrix::from_fn(n, n, |i, j| if i >= j { col[i - j] } else { 0.0 })
}

/// Draws parameters and shrinks the gains until `C(theta)` stabilizes `p`;
/// gains take the sign of the plant's DC gain.
pub fn stabilizing_theta(rng: &mut impl Rng, tpl: &ControllerTemplate, p: &DiscreteTf) -> Option<Vec<f64>> {
    let mut theta = theta_for(rng, tpl);
    let gains: &[usize] = if tpl.dimension() == 5 { &[0, 1, 3] } else { &[0, 1, 2] };
    let sign = if p.dc_gain() < 0.0 { -1.0 } else { 1.0 };
    for &i in gains {
        theta[i] *= sign;
    }
    for _ in 0..30 {
        if let Ok(c) = tpl.realize(&theta) {
            if let Ok(t) = lti::feedback_unity(p, &c) {
                if lti::is_bibo_stable(&t, 0.0).stable {
                    return Some(theta);
                }
            }
        }
        for &i in gains {
            theta[i] *= 0.5;
        }
    }
    None
}
