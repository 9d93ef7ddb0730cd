//! A fixed BS/user deployment with a UAV relay that moves in the horizontal
//! plane at constant altitude.

use serde::{Deserialize, Serialize};

use crate::channel::{
    link_budget, AirGroundParams, FadingSpec, GroundModel, LinkBudget, NodeLayout, Position3D, RadioConfig,
};
use crate::error::{Error, Result};
use crate::outage::{outage_closed_form, SystemOutage};
use crate::quadrature::QuadratureConfig;
use crate::rate_distortion::DistortionSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemModel {
    pub bs: Position3D,
    pub users: Vec<Position3D>,
    pub uav_altitude: f64,
    pub radio: RadioConfig,
    pub a2g: AirGroundParams,
    pub ground: GroundModel,
    pub fading: FadingSpec,
    pub distortion: Vec<DistortionSpec>,
    pub quadrature: QuadratureConfig,
}

impl Default for SystemModel {
    /// Two users with `D = (0.1, 0.3)` at invented default positions.
    fn default() -> Self {
        SystemModel {
            bs: Position3D::ground(0.0, 0.0),
            users: vec![Position3D::ground(7000.0, 5000.0), Position3D::ground(10000.0, -6000.0)],
            uav_altitude: 500.0,
            radio: RadioConfig::default(),
            a2g: AirGroundParams::default(),
            ground: GroundModel::default(),
            fading: FadingSpec::default(),
            distortion: vec![DistortionSpec::new(0.1).unwrap(), DistortionSpec::new(0.3).unwrap()],
            quadrature: QuadratureConfig::default(),
        }
    }
}

impl SystemModel {
    pub fn validate(&self) -> Result<()> {
        self.layout_at(0.0, 0.0)?.validate()?;
        self.radio.validate()?;
        self.a2g.validate()?;
        self.fading.validate()?;
        self.quadrature.validate()?;
        let k = self.users.len();
        if self.radio.carrier_hz.len() != k {
            return Err(Error::invalid(
                "radio.carrier_hz",
                format!("{} carriers for {k} users", self.radio.carrier_hz.len()),
            ));
        }
        if self.distortion.len() != k {
            return Err(Error::invalid(
                "distortion",
                format!("{} distortion specs for {k} users", self.distortion.len()),
            ));
        }
        for s in &self.distortion {
            s.validate()?;
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn with_distortions(mut self, d: &[f64]) -> Result<Self> {
        self.distortion = d.iter().map(|&x| DistortionSpec::new(x)).collect::<Result<_>>()?;
        Ok(self)
    }

    pub fn layout_at(&self, x: f64, y: f64) -> Result<NodeLayout> {
        Ok(NodeLayout {
            bs: self.bs,
            uav: Position3D::new(x, y, self.uav_altitude)?,
            users: self.users.clone(),
        })
    }

    pub fn budget_at(&self, x: f64, y: f64, k: usize) -> Result<LinkBudget> {
        link_budget(&self.layout_at(x, y)?, &self.radio, &self.a2g, self.ground, k)
    }

    /// Closed-form outage of every user with the UAV at `(x, y)`.
    pub fn outage_at(&self, x: f64, y: f64) -> Result<SystemOutage> {
        self.outage_at_with(x, y, &self.quadrature)
    }

    pub fn outage_at_with(&self, x: f64, y: f64, quad: &QuadratureConfig) -> Result<SystemOutage> {
        let per_user = (0..self.num_users())
            .map(|k| {
                let b = self.budget_at(x, y, k)?;
                outage_closed_form(&b, &self.distortion[k], self.fading.m, quad)
            })
            .collect::<Result<Vec<_>>>()?;
        let sum = per_user.iter().map(|e| e.value).sum();
        Ok(SystemOutage { per_user, sum })
    }
}
