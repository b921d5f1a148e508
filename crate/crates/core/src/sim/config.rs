//! Experiment configuration with JSON overrides on top of a named profile.

use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use super::EvalMode;
use crate::channel::{noise_power_watts, TrainingConfig};
use crate::error::{Error, Result};
use crate::linalg::dbm_to_watts;
use crate::netgen::{path_loss_linear, GeometryConfig};
use crate::rng::{derive_seed, Stream};
use crate::wsr::{OptimConfig, TransmissionMode};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PilotScheme {
    Hac,
    Random,
}

/// Named starting points for a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// Small network that runs a full fairness simulation in minutes.
    Desk,
    /// Full-size network with the published parameter table.
    Paper,
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Profile::Desk),
            "paper" => Ok(Profile::Paper),
            _ => Err(Error::config("profile", format!("unknown profile `{s}`"))),
        }
    }
}

/// Every tunable of a simulation run. Powers are in dBm, distances in km.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub num_virtual_cells: usize,
    pub cell_radius_km: f64,
    pub rrhs_per_cell: usize,
    pub antennas: usize,
    /// Users per km².
    pub user_density: f64,
    /// Fixed user count instead of a Poisson draw.
    pub user_count: Option<usize>,
    pub exclusion_radius_km: f64,
    pub power_dbm: f64,
    pub pilot_power_dbm: f64,
    pub noise_psd_dbm_hz: f64,
    pub noise_figure_db: f64,
    pub bandwidth_hz: f64,
    pub block_length: usize,
    pub pilot_length: usize,
    pub pilot_assignment: PilotScheme,
    pub shadowing_db: f64,
    /// Clustering threshold is the path loss at this distance.
    pub cluster_distance_km: f64,
    /// `eta`.
    pub forgetting_factor: f64,
    /// Long-term rate every user starts from, nats/s/Hz.
    pub initial_rate: f64,
    pub max_weight: f64,
    /// `epsilon = epsilon_factor * p / M`.
    pub epsilon_factor: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub mode: EvalMode,
    pub transmission: TransmissionMode,
    pub num_slots: usize,
    pub realizations: usize,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig::profile(Profile::Paper)
    }
}

impl SimConfig {
    pub fn profile(profile: Profile) -> Self {
        let paper = SimConfig {
            num_virtual_cells: 7,
            cell_radius_km: 0.5,
            rrhs_per_cell: 10,
            antennas: 8,
            user_density: 200.0,
            user_count: None,
            exclusion_radius_km: 0.02,
            power_dbm: 30.0,
            pilot_power_dbm: 20.0,
            noise_psd_dbm_hz: -174.0,
            noise_figure_db: 8.0,
            bandwidth_hz: 180e3,
            block_length: 200,
            pilot_length: 32,
            pilot_assignment: PilotScheme::Hac,
            shadowing_db: 4.0,
            cluster_distance_km: 0.4,
            forgetting_factor: 0.2,
            initial_rate: 1e-3,
            max_weight: 1e3,
            epsilon_factor: 0.9,
            max_iters: 200,
            rel_tol: 1e-4,
            mode: EvalMode::Pi,
            transmission: TransmissionMode::Coherent,
            num_slots: 100,
            realizations: 10,
            seed: 0,
        };
        match profile {
            Profile::Paper => paper,
            Profile::Desk => SimConfig {
                rrhs_per_cell: 3,
                antennas: 4,
                user_density: 60.0,
                pilot_length: 8,
                num_slots: 20,
                ..paper
            },
        }
    }

    /// Applies the keys of a JSON object on top of `base` and validates the
    /// result. Unknown keys and ill-typed values are reported by name.
    pub fn from_json_overrides(base: &SimConfig, overrides: &Value) -> Result<SimConfig> {
        let Value::Object(user) = overrides else {
            return Err(Error::config("<root>", "config must be a JSON object"));
        };
        let Value::Object(mut merged) = serde_json::to_value(base)? else {
            unreachable!("config serializes to an object");
        };
        for key in user.keys() {
            if !merged.contains_key(key) {
                return Err(Error::config(key.as_str(), "unknown key"));
            }
        }
        for (key, value) in user {
            let mut single: Map<String, Value> = merged.clone();
            single.insert(key.clone(), value.clone());
            if let Err(e) = serde_json::from_value::<SimConfig>(Value::Object(single)) {
                return Err(Error::config(key.as_str(), e.to_string()));
            }
            merged.insert(key.clone(), value.clone());
        }
        let config: SimConfig = serde_json::from_value(Value::Object(merged))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_json_str(base: &SimConfig, text: &str) -> Result<SimConfig> {
        let value: Value = serde_json::from_str(text)?;
        SimConfig::from_json_overrides(base, &value)
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry(0).validate()?;
        self.training().validate()?;
        self.optim().validate()?;
        if self.antennas == 0 {
            return Err(Error::config("antennas", "must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.forgetting_factor) {
            return Err(Error::config("forgetting_factor", "must lie in [0, 1]"));
        }
        if !(self.initial_rate > 0.0) {
            return Err(Error::config("initial_rate", "must be positive"));
        }
        if !(self.max_weight > 0.0) {
            return Err(Error::config("max_weight", "must be positive"));
        }
        if !(self.cluster_distance_km > 0.0) {
            return Err(Error::config("cluster_distance_km", "must be positive"));
        }
        if !(self.shadowing_db >= 0.0) {
            return Err(Error::config("shadowing_db", "must be non-negative"));
        }
        if !(self.bandwidth_hz > 0.0) {
            return Err(Error::config("bandwidth_hz", "must be positive"));
        }
        if self.num_slots == 0 {
            return Err(Error::config("num_slots", "must be at least 1"));
        }
        if self.realizations == 0 {
            return Err(Error::config("realizations", "must be at least 1"));
        }
        Ok(())
    }

    /// Per-RRH power budget, W.
    pub fn power(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }

    pub fn noise_power(&self) -> f64 {
        noise_power_watts(self.noise_psd_dbm_hz, self.noise_figure_db, self.bandwidth_hz)
    }

    /// Gain threshold `rho` for cluster formation.
    pub fn cluster_threshold(&self) -> Result<f64> {
        path_loss_linear(self.cluster_distance_km)
    }

    /// Geometry of realization `index`, seeded from the master seed.
    pub fn geometry(&self, index: usize) -> GeometryConfig {
        GeometryConfig {
            num_virtual_cells: self.num_virtual_cells,
            cell_radius_km: self.cell_radius_km,
            rrhs_per_cell: self.rrhs_per_cell,
            user_density: self.user_density,
            user_count: self.user_count,
            exclusion_radius_km: self.exclusion_radius_km,
            seed: derive_seed(self.seed, Stream::Geometry, &[index as u64]),
        }
    }

    pub fn training(&self) -> TrainingConfig {
        TrainingConfig {
            pilot_length: self.pilot_length,
            block_length: self.block_length,
            pilot_power: dbm_to_watts(self.pilot_power_dbm),
            noise_power: self.noise_power(),
        }
    }

    pub fn optim(&self) -> OptimConfig {
        let mut c = OptimConfig::new(self.power(), self.antennas);
        c.epsilon = self.epsilon_factor * c.power / self.antennas.max(1) as f64;
        c.max_iters = self.max_iters;
        c.rel_tol = self.rel_tol;
        c
    }

    /// Fraction of each block carrying data under the configured mode.
    pub fn overhead_factor(&self) -> f64 {
        self.mode.overhead_factor(&self.training())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn empty_object_gives_table_defaults() {
        let c = SimConfig::from_json_str(&SimConfig::default(), "{}").unwrap();
        assert_eq!(c.power_dbm, 30.0);
        assert_eq!(c.antennas, 8);
        assert_eq!(c.rrhs_per_cell, 10);
        assert_eq!(c.shadowing_db, 4.0);
        assert_eq!(c.num_virtual_cells, 7);
        assert_eq!(c.user_density, 200.0);
        assert_eq!(c.block_length, 200);
        assert_eq!(c.forgetting_factor, 0.2);
        assert!((c.power() - 1.0).abs() < 1e-12);
        assert!((c.optim().epsilon - 0.9 / 8.0).abs() < 1e-15);
    }

    #[test]
    fn desk_profile() {
        let c = SimConfig::profile(Profile::Desk);
        assert_eq!(
            (c.num_virtual_cells, c.rrhs_per_cell, c.antennas, c.pilot_length, c.num_slots),
            (7, 3, 4, 8, 20)
        );
        assert_eq!(c.user_density, 60.0);
        assert_eq!(c.realizations, 10);
        c.validate().unwrap();
    }

    fn key_of(e: Error) -> String {
        match e {
            Error::InvalidConfig { key, .. } => key,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn unknown_key_is_named() {
        let e = SimConfig::from_json_overrides(&SimConfig::default(), &json!({"antenas": 4}));
        assert_eq!(key_of(e.unwrap_err()), "antenas");
    }

    #[test]
    fn ill_typed_value_is_named() {
        let e = SimConfig::from_json_overrides(&SimConfig::default(), &json!({"power_dbm": "high"}));
        assert_eq!(key_of(e.unwrap_err()), "power_dbm");
        let e = SimConfig::from_json_overrides(&SimConfig::default(), &json!({"mode": "XYZ"}));
        assert_eq!(key_of(e.unwrap_err()), "mode");
    }

    #[test]
    fn pilot_longer_than_block_is_rejected() {
        let e = SimConfig::from_json_overrides(
            &SimConfig::default(),
            &json!({"pilot_length": 300, "block_length": 200}),
        );
        assert_eq!(key_of(e.unwrap_err()), "pilot_length");
    }

    #[test]
    fn wrap_around_needs_seven_cells() {
        let e = SimConfig::from_json_overrides(&SimConfig::default(), &json!({"num_virtual_cells": 19}));
        assert_eq!(key_of(e.unwrap_err()), "num_virtual_cells");
    }

    #[test]
    fn overhead_factor_echo() {
        let c = SimConfig::from_json_overrides(
            &SimConfig::default(),
            &json!({"mode": "PEAR", "pilot_length": 32}),
        )
        .unwrap();
        assert!((c.overhead_factor() - 0.84).abs() < 1e-15);
        let c = SimConfig::from_json_overrides(&c, &json!({"mode": "PEARNF"})).unwrap();
        assert_eq!(c.overhead_factor(), 1.0);
    }

    #[test]
    fn round_trips_through_json() {
        let c = SimConfig::profile(Profile::Desk);
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(SimConfig::from_json_str(&SimConfig::default(), &text).unwrap(), c);
    }

    #[test]
    fn realizations_get_distinct_geometry_seeds() {
        let c = SimConfig::default();
        assert_ne!(c.geometry(0).seed, c.geometry(1).seed);
        assert_eq!(c.geometry(3).seed, c.geometry(3).seed);
    }
}
