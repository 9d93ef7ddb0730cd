//! Node geometry, air-to-ground path loss, and Nakagami-m SNR sampling.
//!
//! Elevation angles enter the LoS/NLoS sigmoid in degrees, which is the unit
//! the environment constants (`a = 4.88`, `b = 0.43` for suburban) were
//! fitted in. Path loss is computed in dB and converted to a linear factor
//! before it divides the transmit power.
//!
//! `RadioConfig::n0` is the total receiver noise power in watts, not a
//! spectral density: the SNR is `pt / (n0 * PL)` with no bandwidth factor.

use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Position3D {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position3D {
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let p = Position3D { x, y, z };
        p.validate()?;
        Ok(p)
    }

    pub fn ground(x: f64, y: f64) -> Self {
        Position3D { x, y, z: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(Error::invalid("position", "coordinates must be finite"));
        }
        if self.z < 0.0 {
            return Err(Error::invalid("position.z", format!("altitude {} < 0", self.z)));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Position3D) -> f64 {
        let (dx, dy, dz) = (self.x - other.x, self.y - other.y, self.z - other.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeLayout {
    pub bs: Position3D,
    pub uav: Position3D,
    pub users: Vec<Position3D>,
}

impl NodeLayout {
    pub fn validate(&self) -> Result<()> {
        self.bs.validate()?;
        self.uav.validate()?;
        if self.users.is_empty() {
            return Err(Error::invalid("layout.users", "at least one user is required"));
        }
        for u in &self.users {
            u.validate()?;
        }
        if self.uav.z <= 0.0 {
            return Err(Error::invalid("layout.uav.z", "UAV altitude must be positive"));
        }
        Ok(())
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }
}

/// Environment constants of the elevation-dependent A2G model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AirGroundParams {
    pub a: f64,
    pub b: f64,
    pub eta_los: f64,
    pub eta_nlos: f64,
}

impl Default for AirGroundParams {
    fn default() -> Self {
        AirGroundParams {
            a: 4.88,
            b: 0.43,
            eta_los: 0.1,
            eta_nlos: 21.0,
        }
    }
}

impl AirGroundParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a.is_finite() && self.b.is_finite()) || self.b <= 0.0 {
            return Err(Error::invalid("a2g.b", "must be finite and positive"));
        }
        if !(self.eta_los.is_finite() && self.eta_nlos.is_finite()) || self.eta_nlos < self.eta_los {
            return Err(Error::invalid("a2g.eta_nlos", "must be finite and >= eta_los"));
        }
        Ok(())
    }

    /// Excess-loss sigmoid at elevation `theta_deg`, in dB. Lies in
    /// `[eta_los - eta_nlos, 0]`.
    pub fn elevation_term(&self, theta_deg: f64) -> f64 {
        (self.eta_los - self.eta_nlos) / (1.0 + self.a * (-self.b * (theta_deg - self.a)).exp())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub pt: f64,
    pub n0: f64,
    pub carrier_hz: Vec<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        RadioConfig {
            pt: 0.5,
            n0: 3.9811e-14,
            carrier_hz: vec![2.0e9, 1.985e9],
        }
    }
}

impl RadioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.pt.is_finite() && self.pt > 0.0) {
            return Err(Error::invalid("radio.pt", "must be positive"));
        }
        if !(self.n0.is_finite() && self.n0 > 0.0) {
            return Err(Error::invalid("radio.n0", "must be positive"));
        }
        if self.carrier_hz.iter().any(|f| !(f.is_finite() && *f > 0.0)) {
            return Err(Error::invalid("radio.carrier_hz", "every carrier must be positive"));
        }
        Ok(())
    }
}

/// Path-loss model for the direct BS-user link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GroundModel {
    /// The A2G formula evaluated at zero elevation.
    #[default]
    ZeroElevation,
    /// Free-space loss up to `ref_distance`, then `10 * exponent * log10(d / d0)`.
    LogDistance { exponent: f64, ref_distance: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FadingSpec {
    pub m: f64,
}

impl Default for FadingSpec {
    fn default() -> Self {
        FadingSpec { m: 2.0 }
    }
}

impl FadingSpec {
    pub fn validate(&self) -> Result<()> {
        check_shape(self.m)
    }
}

pub(crate) fn check_shape(m: f64) -> Result<()> {
    if !(m.is_finite() && m >= 0.5) {
        return Err(Error::invalid(
            "m",
            format!("Nakagami shape {m} must be finite and >= 0.5"),
        ));
    }
    Ok(())
}

/// Per-user average SNRs (linear): S-R, S-D and R-D.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub g0: f64,
    pub g1: f64,
    pub g2: f64,
}

impl LinkBudget {
    pub fn new(g0: f64, g1: f64, g2: f64) -> Result<Self> {
        let b = LinkBudget { g0, g1, g2 };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("g0", self.g0), ("g1", self.g1), ("g2", self.g2)] {
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::invalid(name, format!("average SNR {g} must be positive")));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, c: f64) -> Self {
        LinkBudget {
            g0: self.g0 * c,
            g1: self.g1 * c,
            g2: self.g2 * c,
        }
    }
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn free_space_db(d: f64, f: f64) -> f64 {
    20.0 * (4.0 * std::f64::consts::PI * f * d / SPEED_OF_LIGHT).log10()
}

/// A2G path loss in dB for a link of length `d` whose endpoints differ in
/// height by `h_rel`.
pub fn path_loss_a2g(d: f64, h_rel: f64, f: f64, params: &AirGroundParams) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain {
            what: "link distance",
            value: d,
        });
    }
    if !(h_rel.is_finite() && h_rel > 0.0 && h_rel <= d) {
        return Err(Error::Domain {
            what: "relative height",
            value: h_rel,
        });
    }
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Domain {
            what: "carrier frequency",
            value: f,
        });
    }
    let theta = (h_rel / d).asin().to_degrees();
    Ok(params.elevation_term(theta) + free_space_db(d, f) + params.eta_nlos)
}

pub fn path_loss_ground(d: f64, f: f64, params: &AirGroundParams, model: GroundModel) -> Result<f64> {
    if !(d.is_finite() && d > 0.0) {
        return Err(Error::Domain {
            what: "link distance",
            value: d,
        });
    }
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::Domain {
            what: "carrier frequency",
            value: f,
        });
    }
    match model {
        GroundModel::ZeroElevation => Ok(params.elevation_term(0.0) + free_space_db(d, f) + params.eta_nlos),
        GroundModel::LogDistance { exponent, ref_distance } => {
            if !(exponent > 0.0 && ref_distance > 0.0) {
                return Err(Error::invalid(
                    "ground.exponent",
                    "exponent and reference distance must be positive",
                ));
            }
            Ok(free_space_db(ref_distance, f) + 10.0 * exponent * (d / ref_distance).log10())
        }
    }
}

/// Mean received SNR with unit-mean fading.
pub fn average_snr(pt: f64, n0: f64, pl_db: f64) -> Result<f64> {
    if !(pt > 0.0 && pt.is_finite()) {
        return Err(Error::Domain {
            what: "transmit power",
            value: pt,
        });
    }
    if !(n0 > 0.0 && n0.is_finite()) {
        return Err(Error::Domain {
            what: "noise power",
            value: n0,
        });
    }
    if !pl_db.is_finite() {
        return Err(Error::Domain {
            what: "path loss",
            value: pl_db,
        });
    }
    Ok(pt / (n0 * db_to_linear(pl_db)))
}

/// Gamma-distributed SNR with shape `m` and mean `gamma_bar`.
#[derive(Debug, Clone, Copy)]
pub struct SnrSampler {
    dist: Gamma<f64>,
}

impl SnrSampler {
    pub fn new(gamma_bar: f64, m: f64) -> Result<Self> {
        check_shape(m)?;
        if !(gamma_bar.is_finite() && gamma_bar > 0.0) {
            return Err(Error::Domain {
                what: "average SNR",
                value: gamma_bar,
            });
        }
        let dist = Gamma::new(m, gamma_bar / m).map_err(|e| Error::invalid("m", e.to_string()))?;
        Ok(SnrSampler { dist })
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        self.dist.sample(rng)
    }
}

pub fn sample_instantaneous_snr<R: Rng + ?Sized>(gamma_bar: f64, m: f64, rng: &mut R) -> Result<f64> {
    Ok(SnrSampler::new(gamma_bar, m)?.sample(rng))
}

/// Average SNR triple seen by user `k` for the given layout.
pub fn link_budget(
    layout: &NodeLayout,
    radio: &RadioConfig,
    a2g: &AirGroundParams,
    ground: GroundModel,
    k: usize,
) -> Result<LinkBudget> {
    let user = layout
        .users
        .get(k)
        .ok_or_else(|| Error::invalid("user_index", format!("{k} out of range")))?;
    let f = *radio
        .carrier_hz
        .get(k)
        .ok_or_else(|| Error::invalid("radio.carrier_hz", format!("no carrier for user {k}")))?;

    let d_sr = layout.bs.distance(&layout.uav);
    let d_sd = layout.bs.distance(user);
    let d_rd = layout.uav.distance(user);

    let pl0 = path_loss_a2g(d_sr, layout.uav.z - layout.bs.z, f, a2g)?;
    let pl1 = path_loss_ground(d_sd, f, a2g, ground)?;
    let pl2 = path_loss_a2g(d_rd, layout.uav.z - user.z, f, a2g)?;

    LinkBudget::new(
        average_snr(radio.pt, radio.n0, pl0)?,
        average_snr(radio.pt, radio.n0, pl1)?,
        average_snr(radio.pt, radio.n0, pl2)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_geometry() {
        let p = AirGroundParams::default();
        assert!(path_loss_a2g(0.0, 0.0, 2e9, &p).is_err());
        assert!(path_loss_a2g(100.0, 101.0, 2e9, &p).is_err());
        assert!(path_loss_a2g(f64::NAN, 10.0, 2e9, &p).is_err());
        assert!(path_loss_ground(-1.0, 2e9, &p, GroundModel::default()).is_err());
        assert!(Position3D::new(0.0, 0.0, -1.0).is_err());
    }

    #[test]
    fn doubling_distance_adds_six_db() {
        let p = AirGroundParams::default();
        let theta: f64 = 0.3;
        let d = 1234.5;
        let a = path_loss_a2g(d, d * theta.sin(), 2e9, &p).unwrap();
        let b = path_loss_a2g(2.0 * d, 2.0 * d * theta.sin(), 2e9, &p).unwrap();
        assert!((b - a - 20.0 * 2f64.log10()).abs() < 1e-9);

        let g1 = path_loss_ground(5000.0, 2e9, &p, GroundModel::default()).unwrap();
        let g2 = path_loss_ground(10000.0, 2e9, &p, GroundModel::default()).unwrap();
        assert!((g2 - g1 - 20.0 * 2f64.log10()).abs() < 1e-9);
    }

    #[test]
    fn ground_zero_elevation_offset() {
        let p = AirGroundParams::default();
        let d = 3000.0;
        let offset = (p.eta_los - p.eta_nlos) / (1.0 + p.a * (p.a * p.b).exp());
        let expect = offset + free_space_db(d, 2e9) + p.eta_nlos;
        let got = path_loss_ground(d, 2e9, &p, GroundModel::ZeroElevation).unwrap();
        assert!((got - expect).abs() < 1e-12);
    }

    #[test]
    fn elevation_term_bounds() {
        let p = AirGroundParams::default();
        for i in 0..=90 {
            let t = p.elevation_term(i as f64);
            assert!(t <= 0.0 && t >= p.eta_los - p.eta_nlos);
        }
    }

    #[test]
    fn average_snr_identities() {
        assert_eq!(average_snr(0.5, 0.25, 0.0).unwrap(), 2.0);
        let a = average_snr(0.5, 3.9811e-14, 120.0).unwrap();
        let b = average_snr(0.5, 3.9811e-14, 130.0).unwrap();
        assert!((a / b - 10.0).abs() < 1e-12);
        assert!(average_snr(0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn db_round_trip() {
        for &x in &[1e-9, 0.3, 1.0, 12.56, 7.7e12] {
            let back = db_to_linear(linear_to_db(x));
            assert!((back - x).abs() / x < 1e-12);
        }
    }

    #[test]
    fn sampler_is_positive_and_deterministic() {
        let s = SnrSampler::new(3.0, 2.0).unwrap();
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..1000 {
            let a = s.sample(&mut r1);
            assert!(a > 0.0);
            assert_eq!(a.to_bits(), s.sample(&mut r2).to_bits());
        }
        assert!(SnrSampler::new(1.0, 0.4).is_err());
        assert!(SnrSampler::new(0.0, 1.0).is_err());
    }

    #[test]
    fn uav_over_bs_has_altitude_distance() {
        let layout = NodeLayout {
            bs: Position3D::ground(0.0, 0.0),
            uav: Position3D {
                x: 0.0,
                y: 0.0,
                z: 500.0,
            },
            users: vec![Position3D::ground(7000.0, 5000.0)],
        };
        assert_eq!(layout.bs.distance(&layout.uav), 500.0);
        let radio = RadioConfig::default();
        let a2g = AirGroundParams::default();
        let b = link_budget(&layout, &radio, &a2g, GroundModel::default(), 0).unwrap();
        let pl0 = path_loss_a2g(500.0, 500.0, 2e9, &a2g).unwrap();
        assert!((b.g0 - average_snr(0.5, 3.9811e-14, pl0).unwrap()).abs() < 1e-9 * b.g0);
        assert!(link_budget(&layout, &radio, &a2g, GroundModel::default(), 1).is_err());
    }

    #[test]
    fn approaching_user_raises_rd_snr() {
        let radio = RadioConfig::default();
        let a2g = AirGroundParams::default();
        let user = Position3D::ground(7000.0, 5000.0);
        let mut prev = 0.0;
        for step in 0..8 {
            let frac = step as f64 / 8.0;
            let layout = NodeLayout {
                bs: Position3D::ground(0.0, 0.0),
                uav: Position3D {
                    x: 7000.0 * frac,
                    y: 5000.0 * frac,
                    z: 500.0,
                },
                users: vec![user],
            };
            let g2 = link_budget(&layout, &radio, &a2g, GroundModel::default(), 0)
                .unwrap()
                .g2;
            assert!(g2 > prev);
            prev = g2;
        }
    }
}
