//! Dirac-GAN with an EMA-anchored self-distillation penalty.
//!
//! State is `(theta, psi, phi)`: generator, discriminator and EMA
//! generator. With linearized adversarial loss `c·psi·theta` and penalty
//! `alpha/2·(theta - phi)^2` the continuous dynamics are linear:
//!
//! ```text
//! dtheta/dt = -eta_g (c psi + alpha (theta - phi))
//! dpsi/dt   =  eta_d c theta
//! dphi/dt   =  eta_phi (theta - phi)
//! ```
//!
//! and the equilibrium at the origin is asymptotically stable iff
//! `alpha > 0`.

use std::io::{self, Write};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Norm above which a trajectory is cut off and flagged diverged.
pub const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiracError {
    #[error("invalid Dirac parameter {name} = {value}: {reason}")]
    InvalidParam {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("invalid simulation setting {name} = {value}")]
    InvalidSetting { name: &'static str, value: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiracParams {
    pub eta_g: f64,
    pub eta_d: f64,
    /// EMA update rate, `1 - beta`.
    pub eta_phi: f64,
    pub alpha: f64,
    /// Slope `f'(0)` of the adversarial objective.
    pub c: f64,
}

impl DiracParams {
    pub fn new(
        eta_g: f64,
        eta_d: f64,
        eta_phi: f64,
        alpha: f64,
        c: f64,
    ) -> Result<Self, DiracError> {
        let p = Self {
            eta_g,
            eta_d,
            eta_phi,
            alpha,
            c,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), DiracError> {
        let bad = |name, value, reason| {
            Err(DiracError::InvalidParam {
                name,
                value,
                reason,
            })
        };
        let all = [self.eta_g, self.eta_d, self.eta_phi, self.alpha, self.c];
        if let Some(v) = all.iter().find(|v| !v.is_finite()) {
            return bad("parameter", *v, "must be finite");
        }
        if self.eta_g <= 0.0 {
            return bad("eta_g", self.eta_g, "must be > 0");
        }
        if self.eta_d <= 0.0 {
            return bad("eta_d", self.eta_d, "must be > 0");
        }
        if !(0.0..1.0).contains(&self.eta_phi) {
            return bad("eta_phi", self.eta_phi, "must lie in [0, 1)");
        }
        if self.alpha < 0.0 {
            return bad("alpha", self.alpha, "must be >= 0");
        }
        if self.c == 0.0 {
            return bad("c", self.c, "must be nonzero");
        }
        Ok(())
    }
}

impl Default for DiracParams {
    fn default() -> Self {
        Self {
            eta_g: 1.0,
            eta_d: 1.0,
            eta_phi: 0.01,
            alpha: 1.0,
            c: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiracState {
    pub theta: f64,
    pub psi: f64,
    pub phi: f64,
}

impl DiracState {
    pub fn new(theta: f64, psi: f64, phi: f64) -> Self {
        Self { theta, psi, phi }
    }

    pub fn radius(&self) -> f64 {
        self.theta.hypot(self.psi)
    }

    pub fn norm(&self) -> f64 {
        (self.theta * self.theta + self.psi * self.psi + self.phi * self.phi).sqrt()
    }

    fn axpy(&self, h: f64, d: &DiracState) -> DiracState {
        DiracState::new(
            self.theta + h * d.theta,
            self.psi + h * d.psi,
            self.phi + h * d.phi,
        )
    }
}

pub fn vector_field(s: &DiracState, p: &DiracParams) -> DiracState {
    DiracState {
        theta: -p.eta_g * (p.c * s.psi + p.alpha * (s.theta - s.phi)),
        psi: p.eta_d * p.c * s.theta,
        phi: p.eta_phi * (s.theta - s.phi),
    }
}

/// Jacobian of [`vector_field`], rows and columns ordered `(theta, psi, phi)`.
pub fn jacobian(p: &DiracParams) -> [[f64; 3]; 3] {
    [
        [-p.eta_g * p.alpha, -p.eta_g * p.c, p.eta_g * p.alpha],
        [p.eta_d * p.c, 0.0, 0.0],
        [p.eta_phi, 0.0, -p.eta_phi],
    ]
}

/// Coefficients `(a3, a2, a1, a0)` of `det(λI - J)`.
pub fn characteristic_coefficients(p: &DiracParams) -> [f64; 4] {
    let c2 = p.c * p.c;
    [
        1.0,
        p.eta_g * p.alpha + p.eta_phi,
        p.eta_d * p.eta_g * c2,
        p.eta_d * p.eta_g * p.eta_phi * c2,
    ]
}

/// Evaluates `a3 λ³ + a2 λ² + a1 λ + a0` by Horner's rule.
pub fn eval_cubic(coef: &[f64; 4], z: Complex64) -> Complex64 {
    ((z * coef[0] + coef[1]) * z + coef[2]) * z + coef[3]
}

fn eval_cubic_deriv(coef: &[f64; 4], z: Complex64) -> Complex64 {
    (z * (3.0 * coef[0]) + 2.0 * coef[1]) * z + coef[2]
}

/// Roots of a real cubic with `a3 != 0`.
///
/// Closed-form start (trigonometric branch for three real roots, Cardano
/// otherwise) followed by a few Newton iterations on each root.
pub fn cubic_roots(coef: &[f64; 4]) -> [Complex64; 3] {
    let (a, b, c) = (coef[1] / coef[0], coef[2] / coef[0], coef[3] / coef[0]);
    let q = (a * a - 3.0 * b) / 9.0;
    let r = (2.0 * a * a * a - 9.0 * a * b + 27.0 * c) / 54.0;
    let shift = a / 3.0;
    let q3 = q * q * q;
    let mut roots = if r * r < q3 {
        let theta = (r / q3.sqrt()).clamp(-1.0, 1.0).acos();
        let m = -2.0 * q.sqrt();
        let tau = std::f64::consts::TAU;
        [
            Complex64::new(m * (theta / 3.0).cos() - shift, 0.0),
            Complex64::new(m * ((theta + tau) / 3.0).cos() - shift, 0.0),
            Complex64::new(m * ((theta - tau) / 3.0).cos() - shift, 0.0),
        ]
    } else {
        let big_a = -r.signum() * (r.abs() + (r * r - q3).sqrt()).cbrt();
        let big_b = if big_a == 0.0 { 0.0 } else { q / big_a };
        let re = -0.5 * (big_a + big_b) - shift;
        let im = 0.5 * 3f64.sqrt() * (big_a - big_b);
        [
            Complex64::new(big_a + big_b - shift, 0.0),
            Complex64::new(re, im),
            Complex64::new(re, -im),
        ]
    };
    for z in &mut roots {
        for _ in 0..4 {
            let d = eval_cubic_deriv(coef, *z);
            if d.norm() == 0.0 {
                break;
            }
            let step = eval_cubic(coef, *z) / d;
            let next = *z - step;
            if !(next.re.is_finite() && next.im.is_finite())
                || eval_cubic(coef, next).norm() >= eval_cubic(coef, *z).norm()
            {
                break;
            }
            *z = next;
        }
    }
    roots
}

pub fn eigenvalues(p: &DiracParams) -> [Complex64; 3] {
    cubic_roots(&characteristic_coefficients(p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    /// `(a3, a2, a1, a0)`.
    pub coefficients: [f64; 4],
    pub eigenvalues: [Complex64; 3],
    pub routh_hurwitz_pass: bool,
    pub max_real_part: f64,
    /// `a2·a1 - a3·a0`; analytically `eta_d eta_g² c² alpha`.
    pub margin: f64,
}

pub fn routh_hurwitz(p: &DiracParams) -> StabilityReport {
    let coefficients = characteristic_coefficients(p);
    let [a3, a2, a1, a0] = coefficients;
    let margin = a2 * a1 - a3 * a0;
    let routh_hurwitz_pass = a3 > 0.0 && a2 > 0.0 && a1 > 0.0 && a0 > 0.0 && margin > 0.0;
    let eigenvalues = cubic_roots(&coefficients);
    let max_real_part = eigenvalues
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    StabilityReport {
        coefficients,
        eigenvalues,
        routh_hurwitz_pass,
        max_real_part,
        margin,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrator {
    Rk4,
    Euler,
    DiscreteSimGd,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateOrder {
    /// Jacobi: discriminator sees the pre-step generator.
    #[default]
    Simultaneous,
    /// Gauss-Seidel: discriminator sees the updated generator.
    Alternating,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<DiracState>,
    pub integrator: Integrator,
    pub diverged: bool,
}

impl Trajectory {
    fn start(s0: DiracState, integrator: Integrator) -> Self {
        Self {
            times: vec![0.0],
            states: vec![s0],
            integrator,
            diverged: false,
        }
    }

    // false once the state blows up
    fn record(&mut self, t: f64, s: DiracState) -> bool {
        if !(s.norm() <= DIVERGENCE_NORM) {
            self.diverged = true;
            return false;
        }
        self.times.push(t);
        self.states.push(s);
        true
    }

    pub fn last(&self) -> &DiracState {
        self.states
            .last()
            .expect("trajectory always holds the initial state")
    }

    /// Writes `t,theta,psi,phi,radius` with one header row.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "t,theta,psi,phi,radius")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(w, "{},{},{},{},{}", t, s.theta, s.psi, s.phi, s.radius())?;
        }
        Ok(())
    }
}

/// Fixed-step integration of [`vector_field`] from `t = 0` to `t_end`.
pub fn simulate_ode(
    s0: DiracState,
    p: &DiracParams,
    t_end: f64,
    dt: f64,
    integrator: Integrator,
) -> Result<Trajectory, DiracError> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(DiracError::InvalidSetting {
            name: "dt",
            value: dt,
        });
    }
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(DiracError::InvalidSetting {
            name: "t_end",
            value: t_end,
        });
    }
    if integrator == Integrator::DiscreteSimGd {
        return Err(DiracError::InvalidSetting {
            name: "integrator",
            value: f64::NAN,
        });
    }
    p.validate()?;
    let steps = (t_end / dt).round().max(1.0) as usize;
    let mut traj = Trajectory::start(s0, integrator);
    traj.times.reserve(steps);
    traj.states.reserve(steps);
    let mut s = s0;
    for k in 1..=steps {
        s = match integrator {
            Integrator::Euler => s.axpy(dt, &vector_field(&s, p)),
            _ => {
                let k1 = vector_field(&s, p);
                let k2 = vector_field(&s.axpy(0.5 * dt, &k1), p);
                let k3 = vector_field(&s.axpy(0.5 * dt, &k2), p);
                let k4 = vector_field(&s.axpy(dt, &k3), p);
                DiracState::new(
                    s.theta + dt / 6.0 * (k1.theta + 2.0 * k2.theta + 2.0 * k3.theta + k4.theta),
                    s.psi + dt / 6.0 * (k1.psi + 2.0 * k2.psi + 2.0 * k3.psi + k4.psi),
                    s.phi + dt / 6.0 * (k1.phi + 2.0 * k2.phi + 2.0 * k3.phi + k4.phi),
                )
            }
        };
        if !traj.record(k as f64 * dt, s) {
            break;
        }
    }
    Ok(traj)
}

/// Discrete gradient play with an EMA readout.
///
/// Per step, from pre-step values:
/// `theta' = theta - eta_g (c psi + alpha (theta - phi))`,
/// `psi' = psi + eta_d c theta` (`theta'` under [`UpdateOrder::Alternating`]),
/// then `phi' = beta phi + (1 - beta) theta'`.
/// `p.eta_phi` is ignored; `beta` sets the EMA.
pub fn simulate_discrete(
    s0: DiracState,
    p: &DiracParams,
    steps: usize,
    beta: f64,
    order: UpdateOrder,
) -> Result<Trajectory, DiracError> {
    if steps == 0 {
        return Err(DiracError::InvalidSetting {
            name: "steps",
            value: 0.0,
        });
    }
    if !(0.0..1.0).contains(&beta) {
        return Err(DiracError::InvalidSetting {
            name: "beta",
            value: beta,
        });
    }
    p.validate()?;
    let mut traj = Trajectory::start(s0, Integrator::DiscreteSimGd);
    let mut s = s0;
    for k in 1..=steps {
        let theta = s.theta - p.eta_g * (p.c * s.psi + p.alpha * (s.theta - s.phi));
        let seen = match order {
            UpdateOrder::Simultaneous => s.theta,
            UpdateOrder::Alternating => theta,
        };
        let psi = s.psi + p.eta_d * p.c * seen;
        let phi = beta * s.phi + (1.0 - beta) * theta;
        s = DiracState::new(theta, psi, phi);
        if !traj.record(k as f64, s) {
            break;
        }
    }
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(eta_g: f64, eta_d: f64, eta_phi: f64, alpha: f64, c: f64) -> DiracParams {
        DiracParams::new(eta_g, eta_d, eta_phi, alpha, c).unwrap()
    }

    #[test]
    fn vector_field_examples() {
        let q = p(1.0, 1.0, 0.1, 1.0, 1.0);
        let d = vector_field(&DiracState::new(1.0, 0.0, 0.0), &q);
        assert_eq!((d.theta, d.psi, d.phi), (-1.0, 1.0, 0.1));
        let d = vector_field(&DiracState::new(0.0, 1.0, 0.0), &q);
        assert_eq!((d.theta, d.psi, d.phi), (-1.0, 0.0, 0.0));
        let d = vector_field(&DiracState::default(), &p(3.0, 0.2, 0.5, 2.0, -4.0));
        assert_eq!((d.theta.abs(), d.psi.abs(), d.phi.abs()), (0.0, 0.0, 0.0));
    }

    #[test]
    fn jacobian_examples() {
        let j = jacobian(&p(1.0, 1.0, 0.1, 1.0, 1.0));
        assert_eq!(j, [[-1.0, -1.0, 1.0], [1.0, 0.0, 0.0], [0.1, 0.0, -0.1]]);
        let j = jacobian(&p(2.0, 1.0, 0.1, 0.0, 3.0));
        assert_eq!(j[0][0].abs(), 0.0);
        assert_eq!(j[0][1], -6.0);
        assert_eq!(j[0][2], 0.0);
    }

    #[test]
    fn jacobian_matches_central_differences() {
        let q = p(0.7, 2.3, 0.05, 0.4, -1.3);
        let s = DiracState::new(0.3, -1.2, 2.0);
        let j = jacobian(&q);
        let h = 1e-5;
        for col in 0..3 {
            let mut e = [0.0; 3];
            e[col] = h;
            let plus = vector_field(
                &DiracState::new(s.theta + e[0], s.psi + e[1], s.phi + e[2]),
                &q,
            );
            let minus = vector_field(
                &DiracState::new(s.theta - e[0], s.psi - e[1], s.phi - e[2]),
                &q,
            );
            let fd = [
                (plus.theta - minus.theta) / (2.0 * h),
                (plus.psi - minus.psi) / (2.0 * h),
                (plus.phi - minus.phi) / (2.0 * h),
            ];
            for row in 0..3 {
                assert!((fd[row] - j[row][col]).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn coefficient_examples() {
        let a = characteristic_coefficients(&p(1.0, 1.0, 0.01, 1.0, 1.0));
        assert_eq!(a, [1.0, 1.01, 1.0, 0.01]);
        let a = characteristic_coefficients(&p(1.0, 1.0, 0.05, 0.0, 1.0));
        assert_eq!(a, [1.0, 0.05, 1.0, 0.05]);
    }

    #[test]
    fn marginal_roots_are_pure_imaginary_pair_and_decay() {
        let ev = eigenvalues(&p(1.0, 1.0, 0.05, 0.0, 1.0));
        let mut found = [false; 3];
        for z in ev {
            if (z - Complex64::new(0.0, 1.0)).norm() < 1e-12 {
                found[0] = true;
            } else if (z - Complex64::new(0.0, -1.0)).norm() < 1e-12 {
                found[1] = true;
            } else if (z - Complex64::new(-0.05, 0.0)).norm() < 1e-12 {
                found[2] = true;
            }
        }
        assert_eq!(found, [true; 3], "{ev:?}");
    }

    #[test]
    fn roots_have_small_residual() {
        for q in [
            p(1.0, 1.0, 0.01, 1.0, 1.0),
            p(10.0, 0.1, 0.001, 0.01, -2.0),
            p(0.1, 10.0, 0.1, 2.0, 1.0),
            p(10.0, 10.0, 0.999, 2.0, -2.0),
        ] {
            let coef = characteristic_coefficients(&q);
            for z in eigenvalues(&q) {
                assert!(eval_cubic(&coef, z).norm() < 1e-9, "{q:?} {z}");
            }
        }
    }

    #[test]
    fn three_real_roots_branch() {
        // (x-1)(x-2)(x-3)
        let roots = cubic_roots(&[1.0, -6.0, 11.0, -6.0]);
        let mut re: Vec<f64> = roots.iter().map(|z| z.re).collect();
        re.sort_by(f64::total_cmp);
        for (got, want) in re.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(roots.iter().all(|z| z.im == 0.0));
    }

    #[test]
    fn routh_margin_examples() {
        let r = routh_hurwitz(&p(1.0, 1.0, 0.01, 1.0, 1.0));
        assert!((r.margin - 1.0).abs() < 1e-15);
        assert!(r.routh_hurwitz_pass);
        assert!(r.max_real_part < 0.0);

        let r = routh_hurwitz(&p(1.0, 1.0, 0.01, 0.0, 1.0));
        assert_eq!(r.margin, 0.0);
        assert!(!r.routh_hurwitz_pass);
        assert!(r.max_real_part.abs() < 1e-9);

        assert!(routh_hurwitz(&p(1.0, 1.0, 0.01, 0.5, -1.0)).routh_hurwitz_pass);
    }

    #[test]
    fn invalid_params_rejected() {
        assert!(DiracParams::new(0.0, 1.0, 0.1, 1.0, 1.0).is_err());
        assert!(DiracParams::new(1.0, -1.0, 0.1, 1.0, 1.0).is_err());
        assert!(DiracParams::new(1.0, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(DiracParams::new(1.0, 1.0, 0.1, -0.1, 1.0).is_err());
        let e = DiracParams::new(1.0, 1.0, 0.1, 1.0, 0.0).unwrap_err();
        assert!(e.to_string().contains('c'));
    }

    #[test]
    fn zero_state_stays_zero() {
        let q = p(1.0, 1.0, 0.1, 0.5, 1.0);
        let t = simulate_ode(DiracState::default(), &q, 1.0, 0.01, Integrator::Rk4).unwrap();
        assert!(t.states.iter().all(|s| s.norm() == 0.0));
        let t = simulate_discrete(
            DiracState::default(),
            &q,
            50,
            0.9,
            UpdateOrder::Simultaneous,
        )
        .unwrap();
        assert!(t.states.iter().all(|s| s.norm() == 0.0));
    }

    #[test]
    fn rk4_conserves_unit_orbit() {
        let q = p(1.0, 1.0, 0.3, 0.0, 1.0);
        let t = simulate_ode(
            DiracState::new(1.0, 0.0, 0.0),
            &q,
            100.0,
            1e-3,
            Integrator::Rk4,
        )
        .unwrap();
        assert_eq!(t.states.len(), 100_001);
        assert!((t.times.last().unwrap() - 100.0).abs() < 1e-9);
        for s in &t.states {
            assert!((s.theta * s.theta + s.psi * s.psi - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn rk4_with_penalty_spirals_in() {
        let q = p(1.0, 1.0, 0.3, 0.5, 1.0);
        let t = simulate_ode(
            DiracState::new(1.0, 0.0, 0.0),
            &q,
            100.0,
            1e-3,
            Integrator::Rk4,
        )
        .unwrap();
        assert!(t.last().radius() < 0.1);
    }

    #[test]
    fn euler_is_first_order_accurate() {
        let q = p(1.0, 1.0, 0.3, 0.5, 1.0);
        let s0 = DiracState::new(1.0, 0.0, 0.0);
        let fine = simulate_ode(s0, &q, 1.0, 1e-4, Integrator::Rk4).unwrap();
        let e1 = simulate_ode(s0, &q, 1.0, 1e-2, Integrator::Euler).unwrap();
        let e2 = simulate_ode(s0, &q, 1.0, 5e-3, Integrator::Euler).unwrap();
        let err = |t: &Trajectory| (t.last().theta - fine.last().theta).abs();
        let ratio = err(&e1) / err(&e2);
        assert!((1.8..2.2).contains(&ratio), "{ratio}");
    }

    #[test]
    fn unregularized_discrete_play_spirals_out() {
        let q = p(0.1, 0.1, 0.01, 0.0, 1.0);
        let s0 = DiracState::new(1.0, 1.0, 1.0);
        let t = simulate_discrete(s0, &q, 5000, 0.0, UpdateOrder::Simultaneous).unwrap();
        assert!(t.last().radius() >= s0.radius());
    }

    #[test]
    fn regularized_discrete_play_converges() {
        let q = p(0.1, 0.1, 0.01, 1.0, 1.0);
        let t = simulate_discrete(
            DiracState::new(1.0, 1.0, 1.0),
            &q,
            5000,
            0.99,
            UpdateOrder::Simultaneous,
        )
        .unwrap();
        let s = t.last();
        assert!(s.theta.abs() + s.psi.abs() < 1e-2, "{s:?}");
    }

    #[test]
    fn alternating_order_differs_from_simultaneous() {
        let q = p(0.1, 0.1, 0.01, 0.0, 1.0);
        let s0 = DiracState::new(1.0, 0.0, 0.0);
        let a = simulate_discrete(s0, &q, 1, 0.0, UpdateOrder::Simultaneous).unwrap();
        let b = simulate_discrete(s0, &q, 1, 0.0, UpdateOrder::Alternating).unwrap();
        assert_eq!(a.last().theta, b.last().theta);
        assert_eq!(a.last().psi, 0.1);
        assert!((b.last().psi - 0.1 * 1.0).abs() < 1e-15);
        // after one more step the orders part ways
        let a = simulate_discrete(s0, &q, 2, 0.0, UpdateOrder::Simultaneous).unwrap();
        let b = simulate_discrete(s0, &q, 2, 0.0, UpdateOrder::Alternating).unwrap();
        assert_ne!(a.last().psi, b.last().psi);
    }

    #[test]
    fn divergence_truncates_and_flags() {
        let q = p(1.5, 1.5, 0.01, 0.0, 1.0);
        let t = simulate_discrete(
            DiracState::new(1.0, 0.0, 0.0),
            &q,
            10_000,
            0.0,
            UpdateOrder::Simultaneous,
        )
        .unwrap();
        assert!(t.diverged);
        assert!(t.states.len() < 10_001);
        assert!(t.states.iter().all(|s| s.norm() <= DIVERGENCE_NORM));
    }

    #[test]
    fn bad_settings_rejected() {
        let q = DiracParams::default();
        let s0 = DiracState::new(1.0, 0.0, 0.0);
        assert!(simulate_ode(s0, &q, 1.0, 0.0, Integrator::Rk4).is_err());
        assert!(simulate_ode(s0, &q, -1.0, 0.1, Integrator::Rk4).is_err());
        assert!(simulate_discrete(s0, &q, 0, 0.5, UpdateOrder::Simultaneous).is_err());
        assert!(simulate_discrete(s0, &q, 10, 1.0, UpdateOrder::Simultaneous).is_err());
    }

    #[test]
    fn csv_has_header_and_rows() {
        let q = DiracParams::default();
        let t = simulate_discrete(
            DiracState::new(3.0, 4.0, 0.0),
            &q,
            2,
            0.5,
            UpdateOrder::Simultaneous,
        )
        .unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "t,theta,psi,phi,radius");
        assert_eq!(lines[1], "0,3,4,0,5");
        assert_eq!(lines.len(), 4);
    }
}
