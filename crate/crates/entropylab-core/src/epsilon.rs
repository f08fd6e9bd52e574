//! Integrability envelopes for entropy bumps.
//!
//! An envelope is a monotone nondecreasing function on `[1, inf)` whose
//! growth is calibrated by a normalization integral. Two closed-form families
//! are provided, one for each way the bump enters a constant:
//!
//! * joint flavor: `eps(t) = (1/delta) (1 + ln t)^(1+delta)`, normalized by
//!   `int_1^inf dt / (eps(t) t) = 1`;
//! * separated flavor with exponent p: `eps(t) = delta^-p (1 + ln t)^(p(1+delta))`,
//!   normalized by `int_1^inf eps(t)^(-1/p) dt/t = 1`.
//!
//! Both normalization integrals share the partial value `1 - (1 + ln T)^-delta`
//! up to T (substitute u = 1 + ln t), which [`normalization_partial`]
//! (EpsilonFn::normalization_partial) exposes so quadrature checks have a
//! closed form to compare against. Values below t = 1 are a domain error; the
//! endpoint itself is evaluated by the same formula (the limit is finite).

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(
    feature = "serde",
    derive(serde::Serialize, serde::Deserialize),
    serde(tag = "flavor", rename_all = "kebab-case")
)]
pub enum EpsilonFn {
    Joint { delta: f64 },
    SeparatedP { delta: f64, p: f64 },
}

pub(crate) fn check_delta(delta: f64) -> Result<()> {
    if !(delta.is_finite() && delta > 0.0) {
        return Err(Error::InvalidDelta { delta });
    }
    Ok(())
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if !(p.is_finite() && p > 1.0) {
        return Err(Error::InvalidExponent { p });
    }
    Ok(())
}

impl EpsilonFn {
    pub fn joint(delta: f64) -> Result<Self> {
        check_delta(delta)?;
        Ok(EpsilonFn::Joint { delta })
    }

    pub fn separated(p: f64, delta: f64) -> Result<Self> {
        check_delta(delta)?;
        check_exponent(p)?;
        Ok(EpsilonFn::SeparatedP { delta, p })
    }

    pub fn delta(&self) -> f64 {
        match self {
            EpsilonFn::Joint { delta } | EpsilonFn::SeparatedP { delta, .. } => *delta,
        }
    }

    /// Re-checks parameter ranges; needed after deserializing from config.
    pub fn validate(&self) -> Result<()> {
        match self {
            EpsilonFn::Joint { delta } => check_delta(*delta),
            EpsilonFn::SeparatedP { delta, p } => {
                check_delta(*delta)?;
                check_exponent(*p)
            }
        }
    }

    pub fn eval(&self, t: f64) -> Result<f64> {
        if !(t.is_finite() && t >= 1.0) {
            return Err(Error::EpsilonDomain { t });
        }
        let u = 1.0 + libm::log(t);
        Ok(match self {
            EpsilonFn::Joint { delta } => libm::pow(u, 1.0 + delta) / delta,
            EpsilonFn::SeparatedP { delta, p } => {
                libm::pow(*delta, -p) * libm::pow(u, p * (1.0 + delta))
            }
        })
    }

    /// Closed form of the flavor's normalization integral from 1 to T:
    /// `int_1^T dt/(eps(t) t)` for the joint flavor and
    /// `int_1^T eps(t)^(-1/p) dt/t` for the separated one; both equal
    /// `1 - (1 + ln T)^-delta`, increasing to 1 as T grows.
    pub fn normalization_partial(&self, t_upper: f64) -> Result<f64> {
        if !(t_upper.is_finite() && t_upper >= 1.0) {
            return Err(Error::EpsilonDomain { t: t_upper });
        }
        let delta = self.delta();
        Ok(1.0 - libm::pow(1.0 + libm::log(t_upper), -delta))
    }

    /// Integrand of the normalization integral, for quadrature cross-checks:
    /// `1/(eps(t) t)` or `eps(t)^(-1/p) / t` depending on flavor.
    pub fn normalization_integrand(&self, t: f64) -> Result<f64> {
        let e = self.eval(t)?;
        Ok(match self {
            EpsilonFn::Joint { .. } => 1.0 / (e * t),
            EpsilonFn::SeparatedP { p, .. } => libm::pow(e, -1.0 / p) / t,
        })
    }
}
