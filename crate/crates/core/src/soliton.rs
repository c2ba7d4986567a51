//! Closed-form solitons of `u'' + ρ|u|^{p-2}u = λu` on the line and half-line.
//!
//! For a frequency `λ > 0` the unique positive even decaying solution is
//! `φ(x) = A sech^q(kx)` with `q = 2/(p-2)`, `k = (p-2)√λ/2` and
//! `ρA^{p-2} = λp/2`. Its mass is `m_p λ^{(6-p)/(2(p-2))} ρ^{-q}`, so the
//! soliton of prescribed mass `μ` has `λ = Λ_p ρ^{2α} μ^{2β}` with
//! `α = 2/(6-p)`, `β = (p-2)/(6-p)` and `Λ_p = m_p^{-2β}`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::scalar::{cst, to_f64, Real};

/// `∫_ℝ sech^a(y) dy`, memoized per exponent.
pub fn sech_power_integral(a: f64) -> f64 {
    static CACHE: OnceLock<Mutex<HashMap<u64, f64>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(&v) = cache.lock().unwrap().get(&a.to_bits()) {
        return v;
    }
    let f = move |y: f64| {
        let e = (-2.0 * y).exp();
        (2.0f64.ln() * a - a * y).exp() * (1.0 + e).powf(-a)
    };
    let upper = 60.0 / a.clamp(1e-3, 60.0);
    let (half, _) = integrate(f, 0.0, upper, 1e-15);
    let v = 2.0 * half;
    cache.lock().unwrap().insert(a.to_bits(), v);
    v
}

/// `sech^q(y)` without overflow for large `|y|`.
#[inline]
fn sech_pow<T: Real>(y: T, q: T) -> T {
    let y = y.abs();
    let two = cst::<T>(2.0);
    let e = (-two * y).exp();
    (two.ln() * q - q * y).exp() * (T::one() + e).powf(-q)
}

/// The soliton of frequency `λ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Soliton<T> {
    pub p: T,
    pub lambda: T,
    pub rho: T,
    pub amplitude: T,
    pub k: T,
    pub q: T,
}

impl<T: Real> Soliton<T> {
    pub fn from_lambda(p: T, lambda: T, rho: T) -> Result<Self> {
        check_p(p)?;
        check_rho(rho)?;
        if !(lambda > T::zero() && lambda.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "lambda must be positive, got {}",
                to_f64(lambda)
            )));
        }
        let two = cst::<T>(2.0);
        let pm2 = p - two;
        Ok(Soliton {
            p,
            lambda,
            rho,
            amplitude: (lambda * p / (two * rho)).powf(T::one() / pm2),
            k: pm2 * lambda.sqrt() / two,
            q: two / pm2,
        })
    }

    pub fn eval(&self, x: T) -> T {
        self.amplitude * sech_pow(self.k * x, self.q)
    }

    pub fn deriv(&self, x: T) -> T {
        let y = self.k * x;
        -self.amplitude * self.q * self.k * sech_pow(y, self.q) * y.tanh()
    }

    /// `‖φ‖_∞ = φ(0)`.
    pub fn peak(&self) -> T {
        self.amplitude
    }

    /// Length scale `1/k` of the profile.
    pub fn width(&self) -> T {
        T::one() / self.k
    }

    fn sech_int(&self, a: T) -> T {
        cst(sech_power_integral(to_f64(a)))
    }

    /// `‖φ‖₂²` over the line.
    pub fn mass(&self) -> T {
        self.amplitude * self.amplitude / self.k * self.sech_int(cst::<T>(2.0) * self.q)
    }

    /// `‖φ‖_p^p` over the line.
    pub fn lpp(&self) -> T {
        self.amplitude.powf(self.p) / self.k * self.sech_int(self.p * self.q)
    }

    /// `‖φ'‖₂²` over the line.
    pub fn gradsq(&self) -> T {
        let two_q = cst::<T>(2.0) * self.q;
        let tanh2 = self.sech_int(two_q) - self.sech_int(two_q + cst(2.0));
        self.amplitude * self.amplitude * self.q * self.q * self.k * tanh2
    }

    /// `E_ρ(φ)` over the line.
    pub fn energy(&self) -> T {
        cst::<T>(0.5) * self.gradsq() - self.rho / self.p * self.lpp()
    }
}

fn check_p<T: Real>(p: T) -> Result<()> {
    if p > cst(2.0) && p.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("p must exceed 2, got {}", to_f64(p))))
    }
}

fn check_rho<T: Real>(rho: T) -> Result<()> {
    if rho > T::zero() && rho <= T::one() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "rho must lie in (0, 1], got {}",
            to_f64(rho)
        )))
    }
}

fn check_mu<T: Real>(mu: T) -> Result<()> {
    if mu > T::zero() && mu.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("mass must be positive, got {}", to_f64(mu))))
    }
}

/// `(α, β) = (2/(6-p), (p-2)/(6-p))`.
pub fn exponents<T: Real>(p: T) -> Result<(T, T)> {
    check_p(p)?;
    let six = cst::<T>(6.0);
    if p == six {
        return Err(Error::UndefinedExponent);
    }
    Ok((cst::<T>(2.0) / (six - p), (p - cst(2.0)) / (six - p)))
}

/// Mass of the `λ = ρ = 1` soliton.
pub fn mass_constant<T: Real>(p: T) -> Result<T> {
    Ok(Soliton::from_lambda(p, T::one(), T::one())?.mass())
}

/// `Λ_p = m_p^{-2β}`: frequency of the unit-mass soliton at `ρ = 1`.
pub fn lambda_constant<T: Real>(p: T) -> Result<T> {
    let (_, beta) = exponents(p)?;
    Ok(mass_constant(p)?.powf(-cst::<T>(2.0) * beta))
}

/// `(α, β, λ_{μ,ρ})`.
pub fn exponents_and_lambda<T: Real>(p: T, mu: T, rho: T) -> Result<(T, T, T)> {
    let (alpha, beta) = exponents(p)?;
    check_mu(mu)?;
    check_rho(rho)?;
    let two = cst::<T>(2.0);
    let lambda = lambda_constant(p)? * rho.powf(two * alpha) * mu.powf(two * beta);
    Ok((alpha, beta, lambda))
}

/// `θ_p = ((p-6)/(4p)) ‖φ_{1,1}‖_p^p`, the energy of the unit-mass soliton at `ρ = 1`.
pub fn theta<T: Real>(p: T) -> Result<T> {
    let (_, _, lambda) = exponents_and_lambda(p, T::one(), T::one())?;
    let s = Soliton::from_lambda(p, lambda, T::one())?;
    Ok((p - cst(6.0)) / (cst::<T>(4.0) * p) * s.lpp())
}

/// `E_ρ(φ_{μ,ρ}, ℝ) = θ_p ρ^{4/(6-p)} μ^{2β+1}`, valid for `p > 6`.
pub fn soliton_energy<T: Real>(p: T, mu: T, rho: T) -> Result<T> {
    if !(p > cst(6.0)) {
        return Err(Error::OutOfRegime(format!(
            "soliton energy law needs p > 6, got {}",
            to_f64(p)
        )));
    }
    let (_, beta, _) = exponents_and_lambda(p, mu, rho)?;
    let four = cst::<T>(4.0);
    Ok(theta(p)? * rho.powf(four / (cst::<T>(6.0) - p)) * mu.powf(cst::<T>(2.0) * beta + T::one()))
}

/// `(c_ρ(ℝ), c_ρ(ℝ⁺)) = (E_ρ(φ_{μ,ρ}), 2^{2β} E_ρ(φ_{μ,ρ}))`.
pub fn line_and_halfline_levels<T: Real>(p: T, mu: T, rho: T) -> Result<(T, T)> {
    let c = soliton_energy(p, mu, rho)?;
    let (_, beta) = exponents(p)?;
    Ok((c, cst::<T>(2.0).powf(cst::<T>(2.0) * beta) * c))
}

/// `μ_ℝ = √3 π / 2`, the unique mass carrying a soliton at `p = 6`.
pub fn critical_mass_line<T: Real>() -> T {
    cst::<T>(3.0).sqrt() * T::PI() / cst(2.0)
}

/// Soliton family data for a prescribed mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolitonParams<T> {
    pub p: T,
    pub mu: T,
    pub rho: T,
    /// `None` at `p = 6`, where the exponents blow up.
    pub alpha: Option<T>,
    pub beta: Option<T>,
    pub lambda: T,
    pub peak: T,
    pub theta: T,
    pub soliton: Soliton<T>,
}

impl<T: Real> SolitonParams<T> {
    pub fn new(p: T, mu: T, rho: T) -> Result<Self> {
        let (alpha, beta, lambda) = exponents_and_lambda(p, mu, rho)?;
        let soliton = Soliton::from_lambda(p, lambda, rho)?;
        Ok(SolitonParams {
            p,
            mu,
            rho,
            alpha: Some(alpha),
            beta: Some(beta),
            lambda,
            peak: soliton.peak(),
            theta: theta(p)?,
            soliton,
        })
    }

    /// The `p = 6` family, parameterized by `λ`; the mass is then `μ_ℝ/√ρ`.
    pub fn critical(lambda: T, rho: T) -> Result<Self> {
        let p = cst::<T>(6.0);
        let soliton = Soliton::from_lambda(p, lambda, rho)?;
        Ok(SolitonParams {
            p,
            mu: soliton.mass(),
            rho,
            alpha: None,
            beta: None,
            lambda,
            peak: soliton.peak(),
            theta: T::zero(),
            soliton,
        })
    }

    pub fn eval(&self, x: T) -> T {
        self.soliton.eval(x)
    }

    pub fn deriv(&self, x: T) -> T {
        self.soliton.deriv(x)
    }
}

/// Evaluates `φ_{μ,ρ}(x)`.
pub fn soliton_eval<T: Real>(params: &SolitonParams<T>, x: T) -> T {
    params.eval(x)
}

/// Leading exponential term of the soliton tail.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TailEstimate<T> {
    pub value: T,
    pub derivative: T,
    /// Whether `kx ≥ 5`, where the expansion is accurate.
    pub in_regime: bool,
}

/// `φ(x) ≈ 2^q A e^{-√λ x}` and `φ'(x) ≈ -√λ φ(x)` for large `x`.
pub fn tail_asymptotics<T: Real>(params: &SolitonParams<T>, x: T) -> Result<TailEstimate<T>> {
    if !(params.p > cst(6.0)) {
        return Err(Error::OutOfRegime("tail expansion is provided for p > 6".into()));
    }
    let s = &params.soliton;
    let x = x.abs();
    let rate = s.q * s.k;
    let value = s.amplitude * cst::<T>(2.0).powf(s.q) * (-rate * x).exp();
    Ok(TailEstimate {
        value,
        derivative: -rate * value,
        in_regime: s.k * x >= cst(5.0),
    })
}
