//! System parameters and the JSON config they are read from.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evt::{gev_mean, gev_quantile, GevParams};

/// Device/server and uncertainty parameters with all timing already in slots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    pub f_c: f64,
    pub f_s: f64,
    pub kappa: f64,
    pub delta_s: f64,
    pub deadline_slots: i64,
    pub z_up_slots: i64,
    pub z_down_slots: i64,
    pub theta_up: f64,
    pub theta_down: f64,
    pub eps_m_up: f64,
    pub eps_m_down: f64,
}

impl SystemParams {
    /// Unit-free parameters handy for hand-checked instances: one cycle per
    /// slot on the client, every slot one second.
    pub fn unit(deadline_slots: i64) -> Self {
        SystemParams {
            f_c: 1.0,
            f_s: 1.0,
            kappa: 1.0,
            delta_s: 1.0,
            deadline_slots,
            z_up_slots: 0,
            z_down_slots: 0,
            theta_up: 1.0,
            theta_down: 1.0,
            eps_m_up: 0.1,
            eps_m_down: 0.1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("f_c", self.f_c),
            ("f_s", self.f_s),
            ("kappa", self.kappa),
            ("delta_s", self.delta_s),
        ];
        for (name, v) in pos {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("theta_up", self.theta_up), ("theta_down", self.theta_down)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidParameter(format!("{name} must be nonnegative, got {v}")));
            }
        }
        if self.deadline_slots < 1 {
            return Err(Error::InvalidParameter("deadline_slots must be at least 1".into()));
        }
        if self.z_up_slots < 0 || self.z_down_slots < 0 {
            return Err(Error::InvalidParameter("z slots must be nonnegative".into()));
        }
        check_eps_m(self.eps_m_up)?;
        check_eps_m(self.eps_m_down)
    }

    pub fn client_exec(&self, workload: u64) -> i64 {
        exec_slots(workload, self.f_c, self.delta_s)
    }

    pub fn server_exec(&self, workload: u64) -> i64 {
        exec_slots(workload, self.f_s, self.delta_s)
    }

    /// Local computation energy of one module, κ ω f_c².
    pub fn local_energy(&self, workload: u64) -> f64 {
        self.kappa * workload as f64 * self.f_c * self.f_c
    }
}

fn check_eps_m(e: f64) -> Result<()> {
    if e > 0.0 && e < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("eps_m must lie in (0,1), got {e}")))
    }
}

// ceil(q) that ignores floating noise just above an integer.
fn ceil_tol(q: f64) -> i64 {
    let r = q.round();
    if (q - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as i64
    } else {
        q.ceil() as i64
    }
}

/// Slots needed to run `workload` cycles at `freq`; 0 for an empty workload.
pub fn exec_slots(workload: u64, freq: f64, delta_s: f64) -> i64 {
    if workload == 0 {
        return 0;
    }
    ceil_tol(workload as f64 / (freq * delta_s)).max(1)
}

/// Seconds rounded up to whole slots.
pub fn seconds_to_slots(seconds: f64, delta_s: f64) -> i64 {
    if seconds <= 0.0 {
        0
    } else {
        ceil_tol(seconds / delta_s).max(1)
    }
}

fn default_eps_m() -> f64 {
    0.1
}
fn default_epsilon() -> f64 {
    0.03
}
fn default_seed() -> u64 {
    42
}
fn default_k() -> usize {
    1500
}

/// On-disk config. Times are in seconds and converted to slots by
/// [`Config::system_params`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub f_c_hz: f64,
    pub f_s_hz: f64,
    pub kappa: f64,
    pub delta_s: f64,
    pub deadline_slots: i64,
    #[serde(default = "default_eps_m")]
    pub eps_m_up: f64,
    #[serde(default = "default_eps_m")]
    pub eps_m_down: f64,
    pub z_up_s: f64,
    pub z_down_s: f64,
    pub theta_up: f64,
    pub theta_down: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_k")]
    pub block_size_k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gev_v_up: Option<GevParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gev_v_down: Option<GevParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gev_j: Option<GevParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gev_h: Option<GevParams>,
}

impl Default for Config {
    fn default() -> Self {
        Config::testbed_defaults()
    }
}

impl Config {
    /// Smart Diagnosis testbed settings.
    pub fn testbed_defaults() -> Self {
        Config {
            f_c_hz: 1.5e9,
            f_s_hz: 2.4e9,
            kappa: 1e-24,
            delta_s: 0.001,
            deadline_slots: 5000,
            eps_m_up: 0.1,
            eps_m_down: 0.1,
            z_up_s: 0.349,
            z_down_s: 0.107,
            theta_up: 4.81e-4,
            theta_down: 1.11e-5,
            epsilon: 0.03,
            seed: 42,
            block_size_k: 1500,
            energy_unit: None,
            gev_v_up: None,
            gev_v_down: None,
            gev_j: None,
            gev_h: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Config = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Data => Error::Schema(e.to_string()),
            _ => Error::Json(e),
        })?;
        cfg.system_params()?;
        if !(cfg.epsilon >= 0.0 && cfg.epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in [0,1), got {}",
                cfg.epsilon
            )));
        }
        if cfg.block_size_k < 1 {
            return Err(Error::InvalidParameter("block_size_k must be at least 1".into()));
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn system_params(&self) -> Result<SystemParams> {
        if !(self.z_up_s >= 0.0 && self.z_down_s >= 0.0) {
            return Err(Error::InvalidParameter("z_up_s and z_down_s must be nonnegative".into()));
        }
        let p = SystemParams {
            f_c: self.f_c_hz,
            f_s: self.f_s_hz,
            kappa: self.kappa,
            delta_s: self.delta_s,
            deadline_slots: self.deadline_slots,
            z_up_slots: seconds_to_slots(self.z_up_s, self.delta_s),
            z_down_slots: seconds_to_slots(self.z_down_s, self.delta_s),
            theta_up: self.theta_up,
            theta_down: self.theta_down,
            eps_m_up: self.eps_m_up,
            eps_m_down: self.eps_m_down,
        };
        p.validate()?;
        Ok(p)
    }

    /// Re-derives z_up_s / z_down_s at new extreme-event probabilities from
    /// the stored transfer-time GEV fits.
    pub fn with_eps_m(&self, eps_m_up: f64, eps_m_down: f64) -> Result<Self> {
        let (up, down) = match (self.gev_v_up, self.gev_v_down) {
            (Some(u), Some(d)) => (u, d),
            _ => {
                return Err(Error::InvalidParameter(
                    "config has no gev_v_up/gev_v_down fits to re-derive z from".into(),
                ))
            }
        };
        let mut c = self.clone();
        c.eps_m_up = eps_m_up;
        c.eps_m_down = eps_m_down;
        c.z_up_s = gev_quantile(&up, eps_m_up)?;
        c.z_down_s = gev_quantile(&down, eps_m_down)?;
        Ok(c)
    }

    /// Fills z and θ from fitted GEVs at the configured eps_m.
    pub fn apply_fits(
        &mut self,
        v_up: GevParams,
        v_down: GevParams,
        j: GevParams,
        h: GevParams,
    ) -> Result<()> {
        self.z_up_s = gev_quantile(&v_up, self.eps_m_up)?;
        self.z_down_s = gev_quantile(&v_down, self.eps_m_down)?;
        self.theta_up = gev_mean(&j);
        self.theta_down = gev_mean(&h);
        if !(self.theta_up.is_finite() && self.theta_down.is_finite()) {
            return Err(Error::InvalidParameter(
                "energy-per-bit fit has shape >= 1, so its mean is infinite".into(),
            ));
        }
        self.gev_v_up = Some(v_up);
        self.gev_v_down = Some(v_down);
        self.gev_j = Some(j);
        self.gev_h = Some(h);
        Ok(())
    }
}
