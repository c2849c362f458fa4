//! Seeded synthetic corpora with a planted UTI signature.
//!
//! Baseline counts are Poisson draws from a per-node circadian profile scaled by a
//! per-home, per-node factor and a per-day factor (both log-normal). Night rows
//! (00:00 to 06:00) run at a flat `night_baseline`. UTI days multiply the whole
//! bathroom column by `bathroom_boost`, add `night_rate` to the night rows of the
//! wandering nodes, and raise body temperature by `fever_delta`.

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::{
    Corpus, DailyActivityMatrix, LabeledDay, Label, Node, NodeSet, PhysChannel, PhysVector,
    Provenance, HOURS,
};
use crate::error::{Error, Result};

const NIGHT_END: usize = 6;
/// Nodes that pick up night-time wandering on UTI days.
const WANDERING: [Node; 3] = [Node::HallwayPir, Node::BedroomDoor, Node::LoungePir];
/// Days between a diagnosis and any NonUTI-labelled day of the same home.
const CLEAR_MARGIN: u64 = 8;
const EPISODE_BLOCK: u64 = 30;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub unlabelled_homes: usize,
    pub unlabelled_days: usize,
    pub labelled_homes: usize,
    /// Each episode labels the diagnosis day and the three days after it.
    pub uti_episodes: usize,
    pub non_uti_days: usize,
    pub bathroom_boost: f64,
    pub night_rate: f64,
    pub night_baseline: f64,
    pub fever_delta: f64,
    /// Log-normal sigma of the per-home, per-node activity scale.
    pub home_variability: f64,
    /// Log-normal sigma of the per-day activity scale.
    pub day_variability: f64,
    /// Fraction of unlabelled days that silently carry the UTI signature.
    pub unlabelled_uti_rate: f64,
    pub phys_observed_rate: f64,
    pub start_date: NaiveDate,
    pub nodes: NodeSet,
    pub phys_channels: Vec<PhysChannel>,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            unlabelled_homes: 110,
            unlabelled_days: 3864,
            labelled_homes: 18,
            uti_episodes: 6,
            non_uti_days: 36,
            bathroom_boost: 2.5,
            night_rate: 0.6,
            night_baseline: 0.05,
            fever_delta: 1.2,
            home_variability: 0.5,
            day_variability: 0.3,
            unlabelled_uti_rate: 0.05,
            phys_observed_rate: 0.7,
            start_date: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
            nodes: NodeSet::default(),
            phys_channels: PhysChannel::default_set(),
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("unlabelled_homes", self.unlabelled_homes),
            ("unlabelled_days", self.unlabelled_days),
            ("labelled_homes", self.labelled_homes),
            ("uti_episodes", self.uti_episodes),
            ("non_uti_days", self.non_uti_days),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidConfig(format!("{name} must be positive")));
        }
        if !(self.bathroom_boost > 0.0) {
            return Err(Error::InvalidConfig("bathroom_boost must be positive".into()));
        }
        let nonneg = [
            ("night_rate", self.night_rate),
            ("night_baseline", self.night_baseline),
            ("home_variability", self.home_variability),
            ("day_variability", self.day_variability),
        ];
        if let Some((name, _)) = nonneg.iter().find(|(_, v)| !(*v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidConfig(format!("{name} must be nonnegative")));
        }
        for (name, p) in [
            ("unlabelled_uti_rate", self.unlabelled_uti_rate),
            ("phys_observed_rate", self.phys_observed_rate),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")));
            }
        }
        if !self.fever_delta.is_finite() {
            return Err(Error::InvalidConfig("fever_delta must be finite".into()));
        }
        Ok(())
    }
}

/// Expected hourly activations of a typical home for hours 06..24.
fn daytime_profile(node: Node, hour: usize) -> f64 {
    let h = hour as f64;
    let bump = |centre: f64, width: f64, height: f64| {
        height * (-(h - centre).powi(2) / (2.0 * width * width)).exp()
    };
    match node {
        Node::HallwayPir => 1.0 + bump(8.0, 1.5, 4.0) + bump(19.0, 2.0, 3.0),
        Node::LoungePir => 1.0 + bump(15.0, 3.5, 6.0),
        Node::KitchenMotion => 0.5 + bump(8.0, 1.0, 4.0) + bump(12.5, 1.0, 3.0) + bump(18.0, 1.0, 3.5),
        Node::PillboxMotion => 0.1 + bump(8.5, 0.7, 1.5) + bump(20.0, 0.7, 1.2),
        Node::BedroomDoor => 0.3 + bump(7.0, 1.0, 2.0) + bump(22.0, 1.0, 2.0),
        Node::BathroomDoor => 0.8 + bump(7.5, 1.0, 1.5) + bump(21.5, 1.0, 1.0),
        Node::BedPressure => 0.2 + bump(6.5, 0.8, 2.0) + bump(23.0, 0.8, 2.5),
        Node::ChairPressure => 0.5 + bump(14.0, 3.0, 3.0),
    }
}

struct Home {
    node_scale: Vec<f64>,
    temperature: f64,
    pulse: f64,
}

struct Generator<'a> {
    cfg: &'a SyntheticConfig,
    rng: ChaCha8Rng,
    bathroom: Option<usize>,
    wandering: Vec<usize>,
}

impl Generator<'_> {
    fn home(&mut self) -> Home {
        let scale = LogNormal::new(0.0, self.cfg.home_variability).expect("validated sigma");
        let node_scale = (0..self.cfg.nodes.len())
            .map(|_| scale.sample(&mut self.rng))
            .collect();
        let temperature = Normal::new(36.6, 0.25).expect("sigma").sample(&mut self.rng);
        let pulse = Normal::new(72.0, 8.0).expect("sigma").sample(&mut self.rng);
        Home {
            node_scale,
            temperature,
            pulse,
        }
    }

    fn poisson(&mut self, rate: f64) -> u32 {
        if rate <= 0.0 {
            return 0;
        }
        Poisson::new(rate).expect("positive rate").sample(&mut self.rng) as u32
    }

    fn day(&mut self, home_id: &str, home: &Home, date: NaiveDate, uti: bool) -> DailyActivityMatrix {
        let cfg = self.cfg;
        let n = cfg.nodes.len();
        let day_scale = LogNormal::new(0.0, cfg.day_variability)
            .expect("validated sigma")
            .sample(&mut self.rng);
        let mut matrix = DailyActivityMatrix::zeros(home_id, date, n);
        for hour in 0..HOURS {
            for (col, &node) in cfg.nodes.nodes().iter().enumerate() {
                let mut rate = if hour < NIGHT_END {
                    cfg.night_baseline
                } else {
                    daytime_profile(node, hour) * home.node_scale[col] * day_scale
                };
                if uti {
                    if hour < NIGHT_END && self.wandering.contains(&col) {
                        rate += cfg.night_rate;
                    }
                    if Some(col) == self.bathroom {
                        rate *= cfg.bathroom_boost;
                    }
                }
                let count = self.poisson(rate);
                matrix.add(hour, col, count);
            }
        }
        if !cfg.phys_channels.is_empty() {
            let phys = self.phys(home, uti);
            matrix = matrix.with_phys(phys);
        }
        matrix
    }

    fn phys(&mut self, home: &Home, uti: bool) -> PhysVector {
        let cfg = self.cfg;
        let mut out = PhysVector::unobserved(&cfg.phys_channels);
        for (i, &ch) in cfg.phys_channels.iter().enumerate() {
            let observed = self.rng.random::<f64>() < cfg.phys_observed_rate;
            let noise = Normal::new(0.0, 1.0).expect("unit normal").sample(&mut self.rng);
            let value = match ch {
                PhysChannel::Temperature => {
                    home.temperature + 0.2 * noise + if uti { cfg.fever_delta } else { 0.0 }
                }
                PhysChannel::Pulse => home.pulse + 4.0 * noise,
                PhysChannel::BloodPressure => 130.0 + 10.0 * noise,
                PhysChannel::Weight => 70.0 + 0.5 * noise,
                PhysChannel::Hydration => 55.0 + 2.0 * noise,
                PhysChannel::Spo2 => 96.0 + noise,
            };
            let value = match ch.valid_range() {
                Some((lo, hi)) => value.clamp(lo, hi),
                None => value,
            };
            if observed {
                out.values[i] = value;
                out.observed[i] = true;
            }
        }
        out
    }
}

/// Generates a corpus deterministically from `seed`.
///
/// Labelled and unlabelled days come from disjoint homes. In every labelled home
/// the NonUTI days lie at least [`CLEAR_MARGIN`] days after the last UTI window.
pub fn generate_synthetic(config: &SyntheticConfig, seed: u64) -> Result<Corpus> {
    config.validate()?;
    let mut gen = Generator {
        cfg: config,
        rng: ChaCha8Rng::seed_from_u64(seed),
        bathroom: config.nodes.index_of(Node::BathroomDoor),
        wandering: WANDERING
            .iter()
            .filter_map(|&n| config.nodes.index_of(n))
            .collect(),
    };

    let mut unlabelled = Vec::with_capacity(config.unlabelled_days);
    let homes: Vec<Home> = (0..config.unlabelled_homes).map(|_| gen.home()).collect();
    let mut next_day = vec![0u64; homes.len()];
    for i in 0..config.unlabelled_days {
        let h = i % homes.len();
        let date = config.start_date + Days::new(next_day[h]);
        next_day[h] += 1;
        let uti = gen.rng.random::<f64>() < config.unlabelled_uti_rate;
        let id = format!("U{:03}", h + 1);
        unlabelled.push(gen.day(&id, &homes[h], date, uti));
    }

    let mut labelled = Vec::with_capacity(config.uti_episodes * 4 + config.non_uti_days);
    let homes: Vec<Home> = (0..config.labelled_homes).map(|_| gen.home()).collect();
    let episodes_per_home = config.uti_episodes.div_ceil(homes.len()) as u64;
    let clear_start = EPISODE_BLOCK * episodes_per_home + CLEAR_MARGIN;
    for e in 0..config.uti_episodes {
        let h = e % homes.len();
        let block = (e / homes.len()) as u64;
        let diagnosis = config.start_date + Days::new(EPISODE_BLOCK * block);
        for date in super::label_uti_window(diagnosis) {
            let id = format!("L{:02}", h + 1);
            let matrix = gen.day(&id, &homes[h], date, true);
            labelled.push(LabeledDay {
                matrix,
                label: Label::Uti,
                provenance: Provenance::Synthetic,
            });
        }
    }
    for j in 0..config.non_uti_days {
        let h = j % homes.len();
        let k = (j / homes.len()) as u64;
        let date = config.start_date + Days::new(clear_start + 2 * k);
        let id = format!("L{:02}", h + 1);
        let matrix = gen.day(&id, &homes[h], date, false);
        labelled.push(LabeledDay {
            matrix,
            label: Label::NonUti,
            provenance: Provenance::Synthetic,
        });
    }

    let corpus = Corpus {
        nodes: config.nodes.clone(),
        phys_channels: config.phys_channels.clone(),
        unlabelled,
        labelled,
    };
    corpus.validate()?;
    Ok(corpus)
}
