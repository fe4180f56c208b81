//! Controlled systems in input-output form
//!
//! ```text
//! ÿ = f(d, y, ẏ, η) + g(d, y, ẏ, η)·u
//! η̇ = h(η, y, ẏ)
//! ```
//!
//! with the linear family [`LinearIOPlant`], the mass-on-car benchmark and the
//! worst-case constants the design needs.

use nalgebra::{Complex, DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::signals::{ReferenceSpec, Sinusoid};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlantError {
    #[error("matrix `{name}` has shape {rows}x{cols}, expected {expected_rows}x{expected_cols}")]
    Shape {
        name: &'static str,
        rows: usize,
        cols: usize,
        expected_rows: usize,
        expected_cols: usize,
    },
    #[error("internal dynamics matrix Q is not Hurwitz")]
    NotHurwitz,
    #[error("input gain is not positive definite (min eigenvalue of symmetric part {0})")]
    GainNotPositive(f64),
    #[error("invalid physical parameter `{name}` = {value}: {constraint}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        constraint: &'static str,
    },
    #[error("Lyapunov equation for Q has no solution")]
    Lyapunov,
}

/// Behavioural interface of a relative-degree-two system.
pub trait PlantModel: Send + Sync {
    fn output_dim(&self) -> usize;
    fn internal_dim(&self) -> usize;
    fn disturbance_dim(&self) -> usize;
    fn drift(
        &self,
        d: &DVector<f64>,
        y: &DVector<f64>,
        ydot: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> DVector<f64>;
    fn gain(
        &self,
        d: &DVector<f64>,
        y: &DVector<f64>,
        ydot: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> DMatrix<f64>;
    fn internal(&self, eta: &DVector<f64>, y: &DVector<f64>, ydot: &DVector<f64>) -> DVector<f64>;
    fn disturbance(&self, t: f64) -> DVector<f64>;
    fn initial_internal(&self) -> DVector<f64>;
}

/// `ÿ = R0·y + R1·ẏ + S·η + Γ·u`, `η̇ = Q·η + P·y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearIOPlant {
    r0: DMatrix<f64>,
    r1: DMatrix<f64>,
    s: DMatrix<f64>,
    gamma: DMatrix<f64>,
    q: DMatrix<f64>,
    p: DMatrix<f64>,
    eta0: DVector<f64>,
}

fn expect_shape(
    name: &'static str,
    a: &DMatrix<f64>,
    rows: usize,
    cols: usize,
) -> Result<(), PlantError> {
    if a.nrows() == rows && a.ncols() == cols {
        Ok(())
    } else {
        Err(PlantError::Shape {
            name,
            rows: a.nrows(),
            cols: a.ncols(),
            expected_rows: rows,
            expected_cols: cols,
        })
    }
}

impl LinearIOPlant {
    /// Validates shapes, Hurwitz `Q` and positive definiteness of `Γ`.
    pub fn new(
        r0: DMatrix<f64>,
        r1: DMatrix<f64>,
        s: DMatrix<f64>,
        gamma: DMatrix<f64>,
        q: DMatrix<f64>,
        p: DMatrix<f64>,
        eta0: DVector<f64>,
    ) -> Result<Self, PlantError> {
        let m = gamma.nrows();
        let l = q.nrows();
        expect_shape("gamma", &gamma, m, m)?;
        expect_shape("r0", &r0, m, m)?;
        expect_shape("r1", &r1, m, m)?;
        expect_shape("s", &s, m, l)?;
        expect_shape("q", &q, l, l)?;
        expect_shape("p", &p, l, m)?;
        if eta0.len() != l {
            return Err(PlantError::Shape {
                name: "eta0",
                rows: eta0.len(),
                cols: 1,
                expected_rows: l,
                expected_cols: 1,
            });
        }
        if !linalg::is_hurwitz(&q) {
            return Err(PlantError::NotHurwitz);
        }
        let g_min = linalg::min_symmetric_eigenvalue(&gamma);
        if !(g_min > 0.0) {
            return Err(PlantError::GainNotPositive(g_min));
        }
        Ok(LinearIOPlant {
            r0,
            r1,
            s,
            gamma,
            q,
            p,
            eta0,
        })
    }

    /// `ÿ = Γ·u` without internal dynamics.
    pub fn double_integrator(gamma: DMatrix<f64>) -> Result<Self, PlantError> {
        let m = gamma.nrows();
        Self::new(
            DMatrix::zeros(m, m),
            DMatrix::zeros(m, m),
            DMatrix::zeros(m, 0),
            gamma,
            DMatrix::zeros(0, 0),
            DMatrix::zeros(0, m),
            DVector::zeros(0),
        )
    }

    pub fn with_initial_internal(mut self, eta0: DVector<f64>) -> Result<Self, PlantError> {
        if eta0.len() != self.q.nrows() {
            return Err(PlantError::Shape {
                name: "eta0",
                rows: eta0.len(),
                cols: 1,
                expected_rows: self.q.nrows(),
                expected_cols: 1,
            });
        }
        self.eta0 = eta0;
        Ok(self)
    }

    /// Value at `t = 0` of the periodic solution of `η̇ = Qη + P·y_ref`, i.e.
    /// the internal state of a plant that has been following the reference
    /// forever.
    pub fn reference_periodic_internal(
        &self,
        reference: &ReferenceSpec,
    ) -> Result<DVector<f64>, PlantError> {
        let (l, m) = (self.q.nrows(), self.gamma.nrows());
        if reference.output_dim() != m {
            return Err(PlantError::Shape {
                name: "reference",
                rows: reference.output_dim(),
                cols: 1,
                expected_rows: m,
                expected_cols: 1,
            });
        }
        let mut eta = DVector::zeros(l);
        if l == 0 {
            return Ok(eta);
        }
        match reference {
            ReferenceSpec::Constant { value } => {
                let y = DVector::from_column_slice(value);
                let sol = (-&self.q)
                    .lu()
                    .solve(&(&self.p * y))
                    .ok_or(PlantError::NotHurwitz)?;
                eta += sol;
            }
            ReferenceSpec::SinusoidSum { channels } => {
                let q = self.q.map(|x| Complex::new(x, 0.0));
                for (i, channel) in channels.iter().enumerate() {
                    let p_col = self.p.column(i).map(|x| Complex::new(x, 0.0));
                    for s in channel {
                        // a·sin(ωt + φ) = Im(a·e^{iφ}·e^{iωt})
                        let shift = DMatrix::<Complex<f64>>::identity(l, l)
                            * Complex::new(0.0, s.angular_frequency);
                        let phasor = Complex::from_polar(s.amplitude, s.phase);
                        let sol = (shift - &q)
                            .lu()
                            .solve(&(&p_col * phasor))
                            .ok_or(PlantError::NotHurwitz)?;
                        eta += sol.map(|z| z.im);
                    }
                }
            }
        }
        Ok(eta)
    }

    pub fn r0(&self) -> &DMatrix<f64> {
        &self.r0
    }
    pub fn r1(&self) -> &DMatrix<f64> {
        &self.r1
    }
    pub fn s(&self) -> &DMatrix<f64> {
        &self.s
    }
    pub fn gamma(&self) -> &DMatrix<f64> {
        &self.gamma
    }
    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }
    pub fn p(&self) -> &DMatrix<f64> {
        &self.p
    }
    pub fn eta0(&self) -> &DVector<f64> {
        &self.eta0
    }
}

impl PlantModel for LinearIOPlant {
    fn output_dim(&self) -> usize {
        self.gamma.nrows()
    }

    fn internal_dim(&self) -> usize {
        self.q.nrows()
    }

    fn disturbance_dim(&self) -> usize {
        0
    }

    fn drift(
        &self,
        _d: &DVector<f64>,
        y: &DVector<f64>,
        ydot: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> DVector<f64> {
        &self.r0 * y + &self.r1 * ydot + &self.s * eta
    }

    fn gain(
        &self,
        _d: &DVector<f64>,
        _y: &DVector<f64>,
        _ydot: &DVector<f64>,
        _eta: &DVector<f64>,
    ) -> DMatrix<f64> {
        self.gamma.clone()
    }

    fn internal(&self, eta: &DVector<f64>, y: &DVector<f64>, _ydot: &DVector<f64>) -> DVector<f64> {
        &self.q * eta + &self.p * y
    }

    fn disturbance(&self, _t: f64) -> DVector<f64> {
        DVector::zeros(0)
    }

    fn initial_internal(&self) -> DVector<f64> {
        self.eta0.clone()
    }
}

/// Adds a sinusoidal disturbance `d(t)` (one channel per output) to the drift
/// of an inner plant.
#[derive(Debug, Clone, PartialEq)]
pub struct DisturbedPlant<P> {
    inner: P,
    channels: Vec<Vec<Sinusoid>>,
}

impl<P: PlantModel> DisturbedPlant<P> {
    pub fn new(inner: P, channels: Vec<Vec<Sinusoid>>) -> Result<Self, PlantError> {
        let m = inner.output_dim();
        if channels.len() != m {
            return Err(PlantError::Shape {
                name: "disturbance",
                rows: channels.len(),
                cols: 1,
                expected_rows: m,
                expected_cols: 1,
            });
        }
        Ok(DisturbedPlant { inner, channels })
    }

    /// `sup_t ‖d(t)‖`, to be added to the drift bound.
    pub fn disturbance_bound(&self) -> f64 {
        self.channels
            .iter()
            .map(|c| c.iter().map(|s| s.amplitude.abs()).sum::<f64>().powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

impl<P: PlantModel> PlantModel for DisturbedPlant<P> {
    fn output_dim(&self) -> usize {
        self.inner.output_dim()
    }
    fn internal_dim(&self) -> usize {
        self.inner.internal_dim()
    }
    fn disturbance_dim(&self) -> usize {
        self.channels.len()
    }
    fn drift(
        &self,
        d: &DVector<f64>,
        y: &DVector<f64>,
        ydot: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> DVector<f64> {
        let inner_d = self.inner.disturbance(0.0);
        self.inner.drift(&inner_d, y, ydot, eta) + d
    }
    fn gain(
        &self,
        _d: &DVector<f64>,
        y: &DVector<f64>,
        ydot: &DVector<f64>,
        eta: &DVector<f64>,
    ) -> DMatrix<f64> {
        let inner_d = self.inner.disturbance(0.0);
        self.inner.gain(&inner_d, y, ydot, eta)
    }
    fn internal(&self, eta: &DVector<f64>, y: &DVector<f64>, ydot: &DVector<f64>) -> DVector<f64> {
        self.inner.internal(eta, y, ydot)
    }
    fn disturbance(&self, t: f64) -> DVector<f64> {
        DVector::from_iterator(
            self.channels.len(),
            self.channels.iter().map(|c| {
                c.iter()
                    .map(|s| s.amplitude * (s.angular_frequency * t + s.phase).sin())
                    .sum::<f64>()
            }),
        )
    }
    fn initial_internal(&self) -> DVector<f64> {
        self.inner.initial_internal()
    }
}

/// Physical parameters of the mass-on-car system: a car of mass `m1` carrying
/// a mass `m2` that slides on a ramp inclined by `theta`, coupled to the car by
/// a spring `k` and a damper `d`. The output is the horizontal position of the
/// sliding mass, `y = z + s·cos(theta)`, where `z` is the car position and `s`
/// the displacement along the ramp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MassOnCar {
    pub m1: f64,
    pub m2: f64,
    pub k: f64,
    pub d: f64,
    pub theta: f64,
}

impl Default for MassOnCar {
    fn default() -> Self {
        MassOnCar {
            m1: 4.0,
            m2: 1.0,
            k: 2.0,
            d: 1.0,
            theta: std::f64::consts::FRAC_PI_4,
        }
    }
}

/// Internal-coordinate constants of the mass-on-car normal form.
struct Normal {
    /// `cos θ / sin² θ`
    a: f64,
    /// `d / (m2 sin² θ)`
    delta: f64,
    /// `k / (m2 sin² θ)`
    kappa: f64,
}

impl MassOnCar {
    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = |name, value: f64| {
            if value > 0.0 && value.is_finite() {
                Ok(())
            } else {
                Err(PlantError::InvalidParameter {
                    name,
                    value,
                    constraint: "must be > 0",
                })
            }
        };
        positive("m1", self.m1)?;
        positive("m2", self.m2)?;
        positive("k", self.k)?;
        positive("d", self.d)?;
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.theta > 0.0 && self.theta < half_pi) {
            return Err(PlantError::InvalidParameter {
                name: "theta",
                value: self.theta,
                constraint: "must lie in (0, pi/2)",
            });
        }
        Ok(())
    }

    fn normal(&self) -> Normal {
        let (sin, cos) = self.theta.sin_cos();
        let s2 = sin * sin;
        Normal {
            a: cos / s2,
            delta: self.d / (self.m2 * s2),
            kappa: self.k / (self.m2 * s2),
        }
    }

    /// Input-output realization with `η̇ = Qη + Py`, `Q = [[0, 1], [-κ, -δ]]`,
    /// `P = [0; 1]` and the ramp displacement recovered as
    /// `s = a·(κ·η₁ + δ·η₂) - a·y`.
    pub fn io_plant(&self) -> Result<LinearIOPlant, PlantError> {
        self.validate()?;
        let Normal { a, delta, kappa } = self.normal();
        let (sin, cos) = self.theta.sin_cos();
        let s2 = sin * sin;
        let reduced = self.m1 + self.m2 * s2;
        let gamma = s2 / reduced;
        // ÿ = Γu - μ(k·s + d·ṡ)
        let mu = self.m1 * cos / (self.m2 * reduced);
        let (k, d) = (self.k, self.d);
        let r0 = mu * a * (k - d * delta);
        let r1 = mu * a * d;
        let s_row = [
            -mu * a * (k * kappa - d * delta * kappa),
            -mu * a * (k * delta + d * kappa - d * delta * delta),
        ];
        LinearIOPlant::new(
            DMatrix::from_element(1, 1, r0),
            DMatrix::from_element(1, 1, r1),
            DMatrix::from_row_slice(1, 2, &s_row),
            DMatrix::from_element(1, 1, gamma),
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -kappa, -delta]),
            DMatrix::from_row_slice(2, 1, &[0.0, 1.0]),
            DVector::zeros(2),
        )
    }

    /// Internal state corresponding to the physical state `(y, ẏ, s, ṡ)`.
    pub fn internal_from_physical(&self, y: f64, ydot: f64, s: f64, sdot: f64) -> DVector<f64> {
        let Normal { a, delta, kappa } = self.normal();
        // a(κη₁ + δη₂) = s + a·y
        // a(-δκη₁ + (κ - δ²)η₂ + δy) = ṡ + a·ẏ
        let b1 = (s + a * y) / a;
        let b2 = (sdot + a * ydot) / a - delta * y;
        let m = nalgebra::Matrix2::new(kappa, delta, -delta * kappa, kappa - delta * delta);
        let sol = m
            .lu()
            .solve(&nalgebra::Vector2::new(b1, b2))
            .expect("normal-form change of coordinates is invertible for k > 0");
        DVector::from_column_slice(sol.as_slice())
    }

    /// Inverse of [`Self::internal_from_physical`]: `(s, ṡ)` from `(y, ẏ, η)`.
    pub fn physical_from_internal(&self, y: f64, ydot: f64, eta: &DVector<f64>) -> (f64, f64) {
        let Normal { a, delta, kappa } = self.normal();
        let s = a * (kappa * eta[0] + delta * eta[1]) - a * y;
        let sdot =
            a * (-delta * kappa * eta[0] + (kappa - delta * delta) * eta[1] + delta * y) - a * ydot;
        (s, sdot)
    }
}

pub fn mass_on_car(
    m1: f64,
    m2: f64,
    k: f64,
    d: f64,
    theta: f64,
) -> Result<LinearIOPlant, PlantError> {
    MassOnCar {
        m1,
        m2,
        k,
        d,
        theta,
    }
    .io_plant()
}

/// Constants dominating drift and gain on the operating set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseBounds {
    pub f_max: f64,
    pub g_max: f64,
    pub g_min: f64,
}

/// Norm bounds of `(y, ẏ, η)` describing the compact operating set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatingSet {
    pub output: f64,
    pub output_rate: f64,
    pub internal: f64,
}

/// `f_max = ‖R0‖Y + ‖R1‖Ẏ + ‖S‖H`, `g_max = ‖Γ‖`, `g_min = λ_min((Γ+Γᵀ)/2)`.
pub fn worst_case_bounds(
    plant: &LinearIOPlant,
    set: &OperatingSet,
) -> Result<WorstCaseBounds, PlantError> {
    let g_min = linalg::min_symmetric_eigenvalue(&plant.gamma);
    if !(g_min > 0.0) {
        return Err(PlantError::GainNotPositive(g_min));
    }
    let f_max = linalg::spectral_norm(&plant.r0) * set.output
        + linalg::spectral_norm(&plant.r1) * set.output_rate
        + linalg::spectral_norm(&plant.s) * set.internal;
    Ok(WorstCaseBounds {
        f_max,
        g_max: linalg::spectral_norm(&plant.gamma),
        g_min,
    })
}

/// Exponential estimate `‖exp(Qt)‖ ≤ M·exp(-ωt)` from the Lyapunov solution of
/// `QᵀX + XQ = -I`: `M = sqrt(cond X)`, `ω = 1/(2 λ_max(X))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayEstimate {
    pub overshoot: f64,
    pub rate: f64,
}

pub fn decay_estimate(q: &DMatrix<f64>) -> Result<DecayEstimate, PlantError> {
    if !linalg::is_hurwitz(q) {
        return Err(PlantError::NotHurwitz);
    }
    if q.is_empty() {
        return Ok(DecayEstimate {
            overshoot: 1.0,
            rate: f64::INFINITY,
        });
    }
    let x = linalg::lyapunov_identity(q).ok_or(PlantError::Lyapunov)?;
    let eig = x.symmetric_eigenvalues();
    let (lo, hi) = (eig.min(), eig.max());
    if !(lo > 0.0) {
        return Err(PlantError::Lyapunov);
    }
    Ok(DecayEstimate {
        overshoot: (hi / lo).sqrt(),
        rate: 1.0 / (2.0 * hi),
    })
}

/// Bound `H` on `‖η(t)‖` for every output signal with `‖y‖∞ ≤ output_bound`.
pub fn bibs_state_bound(
    q: &DMatrix<f64>,
    p: &DMatrix<f64>,
    eta0: &DVector<f64>,
    output_bound: f64,
) -> Result<f64, PlantError> {
    if q.is_empty() {
        return Ok(0.0);
    }
    let DecayEstimate { overshoot, rate } = decay_estimate(q)?;
    Ok(overshoot * eta0.norm() + overshoot * linalg::spectral_norm(p) * output_bound / rate)
}
