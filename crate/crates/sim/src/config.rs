use std::path::Path;

use chrono::{DateTime, NaiveDate, TimeZone, Utc};
use serde::{Deserialize, Serialize};

use crate::SimError;

/// Parameters of a synthetic two-group cohort. All behaviour is a
/// function of these values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub n_group1: usize,
    pub n_group2: usize,
    pub experiment_days: u32,
    /// Mean of the Poisson number of share attempts per user-day.
    pub attempts_per_day_rate: f64,
    /// Chance a nudged agent chooses EDIT (otherwise POST, unless it abandons).
    pub edit_probability: f64,
    /// Chance that content actually changes after an EDIT.
    pub change_after_edit_probability: f64,
    /// Chance a nudged agent closes the pop-up without answering.
    pub abandon_probability: f64,
    pub rng_seed: u64,
    /// First experiment day (UTC). Attempts fall between 08:00 and 23:00.
    pub start_date: NaiveDate,
    pub username_prefix: String,
}

impl Default for CohortConfig {
    fn default() -> Self {
        Self {
            n_group1: 10,
            n_group2: 12,
            experiment_days: 7,
            attempts_per_day_rate: 3.0,
            edit_probability: 0.15,
            change_after_edit_probability: 0.3,
            abandon_probability: 0.05,
            rng_seed: 1,
            start_date: NaiveDate::from_ymd_opt(2026, 1, 5).expect("valid date"),
            username_prefix: "sim".into(),
        }
    }
}

impl CohortConfig {
    pub fn from_toml_str(s: &str) -> Result<Self, SimError> {
        let c: Self = toml::from_str(s).map_err(|e| SimError::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn from_path(path: &Path) -> Result<Self, SimError> {
        let raw = std::fs::read_to_string(path).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&raw).map_err(|e| SimError::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let probs = [
            ("edit_probability", self.edit_probability),
            ("change_after_edit_probability", self.change_after_edit_probability),
            ("abandon_probability", self.abandon_probability),
        ];
        for (name, p) in probs {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::Config(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        if !(self.attempts_per_day_rate >= 0.0 && self.attempts_per_day_rate.is_finite()) {
            return Err(SimError::Config(format!(
                "attempts_per_day_rate must be a finite value >= 0, got {}",
                self.attempts_per_day_rate
            )));
        }
        if self.username_prefix.is_empty() {
            return Err(SimError::Config("username_prefix must not be empty".into()));
        }
        Ok(())
    }

    pub fn start(&self) -> DateTime<Utc> {
        Utc.from_utc_datetime(&self.start_date.and_hms_opt(0, 0, 0).expect("midnight"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_overrides_and_rejects() {
        let c = CohortConfig::from_toml_str("n_group1 = 3\nrng_seed = 9\nstart_date = \"2026-03-02\"").unwrap();
        assert_eq!((c.n_group1, c.n_group2, c.rng_seed), (3, 12, 9));
        assert_eq!(c.start().to_rfc3339(), "2026-03-02T00:00:00+00:00");
        assert!(CohortConfig::from_toml_str("edit_probability = 1.5").is_err());
        assert!(CohortConfig::from_toml_str("attempts_per_day_rate = -1.0").is_err());
        assert!(CohortConfig::from_toml_str("bogus = 1").is_err());
    }
}
