//! Physical-layer primitives: topology generation, large- and small-scale
//! fading, interference, SINR, and the SINR-to-rate mapping.
//!
//! Received power on a link is `P * |h_large|^2 * |h_small|^2` where the
//! large-scale gain is the free-space form `(c / (4 pi f d^2))^2` and the
//! small-scale amplitude is Rayleigh distributed. All arithmetic below the
//! module boundary is carried out in linear milliwatts; dBm appears only in
//! the parameter structs and at conversion helpers.

use rand::Rng;
use rand_distr::{Distribution, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in m/s, as used by the free-space gain formula.
pub const SPEED_OF_LIGHT: f64 = 3.0e8;

/// Convert dBm to linear milliwatts.
#[inline]
pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

/// Convert linear milliwatts to dBm.
#[inline]
pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// One step of the SINR-to-rate ladder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateStep {
    /// Minimum SINR (dB) at which this rate is usable.
    pub sinr_threshold_db: f64,
    /// Transmit rate in Mbps.
    pub rate_mbps: f64,
}

/// Physical-layer parameters shared by every link in the network.
///
/// The defaults reproduce the reference setup: 20 dBm transmit power,
/// -95 dBm noise, -60 dBm carrier-sense threshold, carriers at 2.4/5/6 GHz,
/// Rayleigh scale sqrt(1/2) (unit mean power), and a four-step rate ladder
/// topping out at 150 Mbps.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PhyParams {
    pub transmit_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub carrier_sense_threshold_dbm: f64,
    /// Carrier frequency per band, in Hz. One channel per band.
    pub bands: Vec<f64>,
    /// Scale parameter of the Rayleigh amplitude distribution.
    pub rayleigh_scale: f64,
    /// SINR thresholds must be strictly increasing, rates positive.
    pub rate_table: Vec<RateStep>,
    /// Distances below this are clamped before the path-loss evaluation.
    pub min_distance_m: f64,
    /// Default CSMA access intensity (mean transmission time over mean
    /// back-off time) applied to every link.
    pub access_intensity: f64,
    /// Maximum number of carrier-sensing graph vertices per channel before
    /// feasible-state enumeration refuses to run.
    pub state_cap: usize,
}

impl Default for PhyParams {
    fn default() -> Self {
        Self {
            transmit_power_dbm: 20.0,
            noise_power_dbm: -95.0,
            carrier_sense_threshold_dbm: -60.0,
            bands: vec![2.4e9, 5.0e9, 6.0e9],
            rayleigh_scale: (0.5f64).sqrt(),
            rate_table: vec![
                RateStep { sinr_threshold_db: 2.0, rate_mbps: 20.0 },
                RateStep { sinr_threshold_db: 8.0, rate_mbps: 50.0 },
                RateStep { sinr_threshold_db: 15.0, rate_mbps: 100.0 },
                RateStep { sinr_threshold_db: 22.0, rate_mbps: 150.0 },
            ],
            min_distance_m: 0.1,
            access_intensity: 1.0,
            state_cap: 20,
        }
    }
}

impl PhyParams {
    /// Validate the parameter invariants.
    pub fn validate(&self) -> Result<()> {
        if self.bands.is_empty() {
            return Err(Error::InvalidParams("bands must be non-empty".into()));
        }
        if self.bands.iter().any(|&f| !(f > 0.0)) {
            return Err(Error::InvalidParams("carrier frequencies must be positive".into()));
        }
        if self.rate_table.is_empty() {
            return Err(Error::InvalidParams("rate table must be non-empty".into()));
        }
        for w in self.rate_table.windows(2) {
            if w[1].sinr_threshold_db <= w[0].sinr_threshold_db {
                return Err(Error::InvalidParams(
                    "rate table thresholds must be strictly increasing".into(),
                ));
            }
        }
        if self.rate_table.iter().any(|s| !(s.rate_mbps > 0.0)) {
            return Err(Error::InvalidParams("rates must be positive".into()));
        }
        if !(self.rayleigh_scale > 0.0) {
            return Err(Error::InvalidParams("rayleigh scale must be positive".into()));
        }
        if !(self.min_distance_m > 0.0) {
            return Err(Error::InvalidParams("minimum distance must be positive".into()));
        }
        if !(self.access_intensity > 0.0) {
            return Err(Error::InvalidParams("access intensity must be positive".into()));
        }
        Ok(())
    }

    pub fn n_bands(&self) -> usize {
        self.bands.len()
    }

    pub fn transmit_power_mw(&self) -> f64 {
        dbm_to_mw(self.transmit_power_dbm)
    }

    pub fn noise_power_mw(&self) -> f64 {
        dbm_to_mw(self.noise_power_dbm)
    }

    pub fn carrier_sense_threshold_mw(&self) -> f64 {
        dbm_to_mw(self.carrier_sense_threshold_dbm)
    }

    /// Large-scale power gain on `band` at `distance_m`, with the
    /// short-distance clamp applied.
    pub fn link_gain(&self, band: usize, distance_m: f64) -> f64 {
        path_loss(self.bands[band], distance_m.max(self.min_distance_m))
    }

    /// Highest rate in the ladder, in Mbps.
    pub fn max_rate_mbps(&self) -> f64 {
        self.rate_table
            .iter()
            .map(|s| s.rate_mbps)
            .fold(0.0, f64::max)
    }
}

/// A point in the plane, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// Station and access-point placement plus the fixed association map.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    pub ap_positions: Vec<Point>,
    pub sta_positions: Vec<Point>,
    /// `association[sta]` is the index of the serving AP.
    pub association: Vec<usize>,
    /// Seed the topology was drawn with, kept for reproducibility records.
    pub rng_seed: u64,
}

impl Topology {
    pub fn new(
        ap_positions: Vec<Point>,
        sta_positions: Vec<Point>,
        association: Vec<usize>,
        rng_seed: u64,
    ) -> Result<Self> {
        let topo = Self { ap_positions, sta_positions, association, rng_seed };
        topo.validate()?;
        Ok(topo)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sta_positions.is_empty() {
            return Err(Error::InvalidScenario("topology has zero stations".into()));
        }
        if self.association.len() != self.sta_positions.len() {
            return Err(Error::InvalidScenario(
                "every station must be associated to exactly one AP".into(),
            ));
        }
        if self.association.iter().any(|&m| m >= self.ap_positions.len()) {
            return Err(Error::InvalidScenario("association references a missing AP".into()));
        }
        let finite = |p: &Point| p.x.is_finite() && p.y.is_finite();
        if !self.ap_positions.iter().all(finite) || !self.sta_positions.iter().all(finite) {
            return Err(Error::InvalidScenario("positions must be finite".into()));
        }
        Ok(())
    }

    pub fn n_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn n_stas(&self) -> usize {
        self.sta_positions.len()
    }

    pub fn ap_of(&self, sta: usize) -> usize {
        self.association[sta]
    }

    /// Distance between a station and an arbitrary AP.
    pub fn sta_ap_distance(&self, sta: usize, ap: usize) -> f64 {
        self.sta_positions[sta].distance(&self.ap_positions[ap])
    }

    /// Distance between two stations.
    pub fn sta_sta_distance(&self, a: usize, b: usize) -> f64 {
        self.sta_positions[a].distance(&self.sta_positions[b])
    }
}

/// AP placement rule for generated scenarios.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApLayout {
    /// Three APs on the vertices of an equilateral triangle centred in the
    /// square (circumradius one quarter of the side).
    Triangle,
    Explicit(Vec<Point>),
}

/// Declarative description of a random scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioSpec {
    /// Side length of the square deployment area, in meters.
    pub area_m: f64,
    pub ap_layout: ApLayout,
    /// Stations served by each AP, in AP order.
    pub stas_per_ap: Vec<usize>,
    #[serde(default)]
    pub phy: PhyParams,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn ap_positions(&self) -> Vec<Point> {
        match &self.ap_layout {
            ApLayout::Triangle => {
                let c = self.area_m / 2.0;
                let r = self.area_m / 4.0;
                [90f64, 210.0, 330.0]
                    .iter()
                    .map(|deg| {
                        let th = deg.to_radians();
                        Point::new(c + r * th.cos(), c + r * th.sin())
                    })
                    .collect()
            }
            ApLayout::Explicit(points) => points.clone(),
        }
    }

    pub fn n_stas(&self) -> usize {
        self.stas_per_ap.iter().sum()
    }
}

/// Draw a topology: APs at the layout's fixed positions, stations i.i.d.
/// uniform in the square. Deterministic for a fixed seed.
pub fn generate_topology(spec: &ScenarioSpec, seed: u64) -> Result<Topology> {
    use rand::SeedableRng;

    if !(spec.area_m > 0.0) {
        return Err(Error::InvalidScenario("area side length must be positive".into()));
    }
    let aps = spec.ap_positions();
    if aps.is_empty() {
        return Err(Error::InvalidScenario("scenario has zero APs".into()));
    }
    if spec.stas_per_ap.len() != aps.len() {
        return Err(Error::InvalidScenario(format!(
            "stas_per_ap has {} entries for {} APs",
            spec.stas_per_ap.len(),
            aps.len()
        )));
    }
    if spec.n_stas() == 0 {
        return Err(Error::InvalidScenario("scenario has zero stations".into()));
    }
    spec.phy.validate()?;

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut sta_positions = Vec::with_capacity(spec.n_stas());
    let mut association = Vec::with_capacity(spec.n_stas());
    for (ap, &count) in spec.stas_per_ap.iter().enumerate() {
        for _ in 0..count {
            let x = rng.random_range(0.0..spec.area_m);
            let y = rng.random_range(0.0..spec.area_m);
            sta_positions.push(Point::new(x, y));
            association.push(ap);
        }
    }
    Topology::new(aps, sta_positions, association, seed)
}

/// Free-space power gain `(c / (4 pi f d^2))^2`.
///
/// Callers are responsible for keeping `distance_m` away from zero;
/// [`PhyParams::link_gain`] applies the configured clamp.
pub fn path_loss(fc_hz: f64, distance_m: f64) -> f64 {
    debug_assert!(fc_hz > 0.0 && distance_m > 0.0);
    let amp = SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * fc_hz * distance_m * distance_m);
    amp * amp
}

/// One small-scale fading realisation: a power gain `|h|^2` for every
/// (station, AP, band) triple.
#[derive(Debug, Clone)]
pub struct FadingDraw {
    gains: Vec<f64>,
    n_aps: usize,
    n_bands: usize,
}

impl FadingDraw {
    /// All gains equal to one; used wherever the model is evaluated on
    /// large-scale fading alone.
    pub fn unit(topology: &Topology, n_bands: usize) -> Self {
        Self {
            gains: vec![1.0; topology.n_stas() * topology.n_aps() * n_bands],
            n_aps: topology.n_aps(),
            n_bands,
        }
    }

    #[inline]
    pub fn gain(&self, sta: usize, ap: usize, band: usize) -> f64 {
        self.gains[(sta * self.n_aps + ap) * self.n_bands + band]
    }
}

/// Sample Rayleigh amplitudes for every (station, AP, band) triple and store
/// them as power gains. With the default scale sqrt(1/2) the mean power is 1.
pub fn sample_fading<R: Rng + ?Sized>(
    topology: &Topology,
    params: &PhyParams,
    rng: &mut R,
) -> FadingDraw {
    // Rayleigh(sigma) is Weibull with shape 2 and scale sigma*sqrt(2).
    let rayleigh = Weibull::new(params.rayleigh_scale * std::f64::consts::SQRT_2, 2.0)
        .expect("valid rayleigh scale");
    let n = topology.n_stas() * topology.n_aps() * params.n_bands();
    let gains = (0..n)
        .map(|_| {
            let amp: f64 = rayleigh.sample(rng);
            amp * amp
        })
        .collect();
    FadingDraw { gains, n_aps: topology.n_aps(), n_bands: params.n_bands() }
}

/// One transmitting link: a station active on one band's channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LinkId {
    pub sta: usize,
    pub band: usize,
}

/// Aggregate interference (mW) seen by `link`'s AP from the other links that
/// are simultaneously active on the same channel.
pub fn interference_power(
    link: LinkId,
    active: &[LinkId],
    topology: &Topology,
    fading: &FadingDraw,
    params: &PhyParams,
) -> f64 {
    let ap = topology.ap_of(link.sta);
    let p_mw = params.transmit_power_mw();
    active
        .iter()
        .filter(|j| j.sta != link.sta)
        .map(|j| {
            debug_assert_eq!(j.band, link.band);
            let gain = params.link_gain(j.band, topology.sta_ap_distance(j.sta, ap))
                * fading.gain(j.sta, ap, j.band);
            gain * p_mw
        })
        .sum()
}

/// SINR of `link` at its serving AP when `active` lists the other links
/// transmitting on the same channel.
pub fn compute_sinr(
    link: LinkId,
    active: &[LinkId],
    topology: &Topology,
    fading: &FadingDraw,
    params: &PhyParams,
) -> f64 {
    let ap = topology.ap_of(link.sta);
    let signal = params.link_gain(link.band, topology.sta_ap_distance(link.sta, ap))
        * fading.gain(link.sta, ap, link.band)
        * params.transmit_power_mw();
    let interference = interference_power(link, active, topology, fading, params);
    signal / (interference + params.noise_power_mw())
}

/// Map a linear SINR to a rate: the largest ladder step whose threshold is
/// at or below the SINR (inclusive at the threshold). Below the lowest
/// threshold the link carries nothing.
pub fn map_rate(gamma: f64, params: &PhyParams) -> f64 {
    if gamma <= 0.0 {
        return 0.0;
    }
    let db = 10.0 * gamma.log10();
    params
        .rate_table
        .iter()
        .rev()
        .find(|step| db >= step.sinr_threshold_db)
        .map_or(0.0, |step| step.rate_mbps)
}
