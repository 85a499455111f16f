//! Reduced-order post-contingency frequency simulator.
//!
//! The system is lumped into a single centre-of-inertia frequency deviation
//! `df` (per-unit) driven by the lost generation, load damping and one
//! first-order governor per surviving unit:
//!
//! ```text
//! 2 H_sys d(df)/dt = -dP_loss - D df + sum_g dP_g
//! T_g     d(dP_g)/dt = -dP_g - (1/R_g) df,      dP_g in [0, headroom_g]
//! ```
//!
//! All quantities are per-unit on the system MVA base. The governor clamp is
//! applied to every RK4 stage state and to the accepted step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::system::{OperatingPoint, SystemSpec};

/// Frequency excursion beyond which a trajectory is declared unconverged.
pub const DIVERGENCE_GUARD_HZ: f64 = 5.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Rk4,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    /// Step size in seconds.
    pub dt: f64,
    /// Simulated time in seconds.
    pub horizon: f64,
    pub integrator: Integrator,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            horizon: 30.0,
            integrator: Integrator::Rk4,
        }
    }
}

impl SimConfig {
    pub fn validate(&self, spec: &SystemSpec) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt must be > 0, got {}", self.dt)));
        }
        let slowest = spec
            .generators
            .iter()
            .map(|g| g.governor_t)
            .fold(0.0, f64::max);
        if self.horizon < 10.0 * slowest {
            return Err(Error::InvalidArgument(format!(
                "horizon {} s is shorter than 10 x slowest governor ({} s)",
                self.horizon, slowest
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTrace {
    pub times: Vec<f64>,
    pub freq: Vec<f64>,
    pub converged: bool,
}

impl FrequencyTrace {
    /// CSV dump with header `time_s,freq_hz`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,freq_hz\n");
        for (t, f) in self.times.iter().zip(&self.freq) {
            out.push_str(&format!("{t},{f}\n"));
        }
        out
    }

    pub fn last(&self) -> f64 {
        *self.freq.last().expect("trace has at least the initial sample")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Governor {
    /// 1/R on the system base.
    pub gain: f64,
    pub time_constant: f64,
    /// Available upward reserve, per-unit on the system base.
    pub headroom: f64,
}

/// Lumped post-fault model with the tripped unit already removed.
#[derive(Debug, Clone, PartialEq)]
pub struct CoiModel {
    pub two_h: f64,
    pub damping: f64,
    pub loss_pu: f64,
    pub governors: Vec<Governor>,
}

impl CoiModel {
    /// Trip the largest unit of `op` and lump the survivors.
    pub fn from_contingency(spec: &SystemSpec, op: &OperatingPoint) -> Result<Self> {
        op.validate(spec)?;
        if op.committed_count() < 2 {
            return Err(Error::DegenerateContingency(format!(
                "{} committed generator(s); the largest-unit trip leaves no survivor",
                op.committed_count()
            )));
        }
        let tripped = op.largest_unit();
        let base = spec.system_mva_base;
        let mut h_sys = 0.0;
        let mut governors = Vec::new();
        for (g, gen) in spec.generators.iter().enumerate() {
            if g == tripped || !op.u[g] {
                continue;
            }
            h_sys += spec.rebased_inertia(g);
            governors.push(Governor {
                gain: spec.rebased_governor_gain(g),
                time_constant: gen.governor_t,
                headroom: ((gen.p_max - op.p[g]) / base).max(0.0),
            });
        }
        Ok(Self {
            two_h: 2.0 * h_sys,
            damping: spec.load_damping_d,
            loss_pu: op.p[tripped] / base,
            governors,
        })
    }

    /// Closed-form quasi-steady-state deviation (per-unit), ignoring headroom.
    pub fn steady_state_deviation(&self) -> Result<f64> {
        let stiffness = self.damping + self.governors.iter().map(|g| g.gain).sum::<f64>();
        if stiffness == 0.0 {
            return Err(Error::ZeroStiffness);
        }
        Ok(-self.loss_pu / stiffness)
    }

    fn derivative(&self, x: &[f64], dx: &mut [f64]) {
        let df = x[0];
        let response: f64 = x[1..].iter().sum();
        dx[0] = (-self.loss_pu - self.damping * df + response) / self.two_h;
        for (k, gov) in self.governors.iter().enumerate() {
            dx[k + 1] = (-x[k + 1] - gov.gain * df) / gov.time_constant;
        }
    }

    fn clamp(&self, x: &mut [f64]) {
        for (k, gov) in self.governors.iter().enumerate() {
            x[k + 1] = x[k + 1].clamp(0.0, gov.headroom);
        }
    }

    pub fn integrate(&self, cfg: &SimConfig, f_nominal: f64) -> FrequencyTrace {
        let n = self.governors.len() + 1;
        let steps = (cfg.horizon / cfg.dt).round() as usize;
        let dt = cfg.dt;
        let mut times = Vec::with_capacity(steps + 1);
        let mut freq = Vec::with_capacity(steps + 1);
        times.push(0.0);
        freq.push(f_nominal);

        let mut x = vec![0.0; n];
        let mut stage = vec![0.0; n];
        let (mut k1, mut k2, mut k3, mut k4) =
            (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut converged = true;
        for step in 1..=steps {
            self.derivative(&x, &mut k1);
            for i in 0..n {
                stage[i] = x[i] + 0.5 * dt * k1[i];
            }
            self.clamp(&mut stage);
            self.derivative(&stage, &mut k2);
            for i in 0..n {
                stage[i] = x[i] + 0.5 * dt * k2[i];
            }
            self.clamp(&mut stage);
            self.derivative(&stage, &mut k3);
            for i in 0..n {
                stage[i] = x[i] + dt * k3[i];
            }
            self.clamp(&mut stage);
            self.derivative(&stage, &mut k4);
            for i in 0..n {
                x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            self.clamp(&mut x);

            let f = f_nominal * (1.0 + x[0]);
            times.push(step as f64 * dt);
            freq.push(f);
            if !f.is_finite() || (f - f_nominal).abs() > DIVERGENCE_GUARD_HZ {
                converged = false;
                break;
            }
        }
        FrequencyTrace {
            times,
            freq,
            converged,
        }
    }
}

/// Simulate the N-1 trip of the largest unit in `op`.
pub fn simulate_contingency(
    spec: &SystemSpec,
    op: &OperatingPoint,
    cfg: &SimConfig,
) -> Result<FrequencyTrace> {
    cfg.validate(spec)?;
    let model = CoiModel::from_contingency(spec, op)?;
    Ok(model.integrate(cfg, spec.f_nominal_hz))
}

/// Minimum frequency of a converged trace.
pub fn nadir(trace: &FrequencyTrace) -> Result<f64> {
    if !trace.converged {
        return Err(Error::Unconverged);
    }
    Ok(trace.freq.iter().copied().fold(f64::INFINITY, f64::min))
}

/// Quasi-steady-state frequency after the largest-unit trip, assuming no
/// governor reaches its headroom limit.
pub fn steady_state_frequency(spec: &SystemSpec, op: &OperatingPoint) -> Result<f64> {
    let model = CoiModel::from_contingency(spec, op)?;
    Ok(spec.f_nominal_hz * (1.0 + model.steady_state_deviation()?))
}
