//! Sensor events, hourly Sensor Firing Pattern (SFP) matrices and labelled corpora.
//!
//! A home-day is a 24×N grid of activation counts: row `h` holds the events in the
//! half-open hour `[h:00, h+1:00)` of the corpus' civil day, column `n` the node.

mod io;
mod sfp;
mod synth;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use io::{
    load_events, load_phys, parse_events_csv, parse_events_jsonl, read_corpus, write_corpus,
    write_events, EventFormat, LoadReport, Rejection,
};
pub use sfp::{aggregate_phys, build_days, build_sfp, label_uti_window, SfpLayout};
pub use synth::{generate_synthetic, SyntheticConfig};

pub const HOURS: usize = 24;

/// Environmental sensor nodes used for risk analysis.
///
/// The main entrance door and the energy monitor are not modelled: they react to
/// visitors more than to the resident.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    HallwayPir,
    LoungePir,
    KitchenMotion,
    PillboxMotion,
    BedroomDoor,
    BathroomDoor,
    BedPressure,
    ChairPressure,
}

impl Node {
    pub const ALL: [Node; 8] = [
        Node::HallwayPir,
        Node::LoungePir,
        Node::KitchenMotion,
        Node::PillboxMotion,
        Node::BedroomDoor,
        Node::BathroomDoor,
        Node::BedPressure,
        Node::ChairPressure,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Node::HallwayPir => "hallway_pir",
            Node::LoungePir => "lounge_pir",
            Node::KitchenMotion => "kitchen_motion",
            Node::PillboxMotion => "pillbox_motion",
            Node::BedroomDoor => "bedroom_door",
            Node::BathroomDoor => "bathroom_door",
            Node::BedPressure => "bed_pressure",
            Node::ChairPressure => "chair_pressure",
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Node {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Node::ALL
            .into_iter()
            .find(|n| n.name() == s)
            .ok_or_else(|| Error::UnknownNode(s.to_string()))
    }
}

/// Ordered, duplicate-free set of nodes; the order fixes the matrix columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Node>", into = "Vec<Node>")]
pub struct NodeSet(Vec<Node>);

impl NodeSet {
    pub fn new(nodes: Vec<Node>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(Error::InvalidConfig("node set is empty".into()));
        }
        let unique: HashSet<_> = nodes.iter().collect();
        if unique.len() != nodes.len() {
            return Err(Error::InvalidConfig("node set contains duplicates".into()));
        }
        Ok(NodeSet(nodes))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn nodes(&self) -> &[Node] {
        &self.0
    }

    pub fn index_of(&self, node: Node) -> Option<usize> {
        self.0.iter().position(|&n| n == node)
    }
}

impl Default for NodeSet {
    fn default() -> Self {
        NodeSet(Node::ALL.to_vec())
    }
}

impl TryFrom<Vec<Node>> for NodeSet {
    type Error = Error;

    fn try_from(nodes: Vec<Node>) -> Result<Self> {
        NodeSet::new(nodes)
    }
}

impl From<NodeSet> for Vec<Node> {
    fn from(set: NodeSet) -> Self {
        set.0
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorEvent {
    pub home_id: String,
    pub node: Node,
    pub timestamp: DateTime<Utc>,
    #[serde(default = "unit_count")]
    pub value: u32,
}

fn unit_count() -> u32 {
    1
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhysChannel {
    Temperature,
    Pulse,
    BloodPressure,
    Weight,
    Hydration,
    Spo2,
}

impl PhysChannel {
    pub const ALL: [PhysChannel; 6] = [
        PhysChannel::Temperature,
        PhysChannel::Pulse,
        PhysChannel::BloodPressure,
        PhysChannel::Weight,
        PhysChannel::Hydration,
        PhysChannel::Spo2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PhysChannel::Temperature => "temperature",
            PhysChannel::Pulse => "pulse",
            PhysChannel::BloodPressure => "blood_pressure",
            PhysChannel::Weight => "weight",
            PhysChannel::Hydration => "hydration",
            PhysChannel::Spo2 => "spo2",
        }
    }

    /// Plausible range for an observed reading, if the channel has one.
    pub fn valid_range(self) -> Option<(f64, f64)> {
        match self {
            PhysChannel::Temperature => Some((30.0, 45.0)),
            PhysChannel::Pulse => Some((20.0, 250.0)),
            _ => None,
        }
    }

    /// Default channels fused into the classifier: body temperature and pulse.
    pub fn default_set() -> Vec<PhysChannel> {
        vec![PhysChannel::Temperature, PhysChannel::Pulse]
    }
}

impl fmt::Display for PhysChannel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PhysChannel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PhysChannel::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| Error::MissingChannel(s.to_string()))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysReading {
    pub home_id: String,
    pub channel: PhysChannel,
    pub timestamp: DateTime<Utc>,
    pub value: f64,
    pub observed: bool,
}

impl PhysReading {
    pub fn validate(&self) -> Result<()> {
        if !self.observed {
            return Ok(());
        }
        if !self.value.is_finite() {
            return Err(Error::parse(self.channel.name(), "non-finite reading"));
        }
        if let Some((lo, hi)) = self.channel.valid_range() {
            if self.value < lo || self.value > hi {
                return Err(Error::parse(
                    self.channel.name(),
                    format!("{} outside [{lo}, {hi}]", self.value),
                ));
            }
        }
        Ok(())
    }
}

/// Daily physiological summary: one slot per channel plus an observed flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysVector {
    pub channels: Vec<PhysChannel>,
    pub values: Vec<f64>,
    pub observed: Vec<bool>,
}

impl PhysVector {
    pub fn unobserved(channels: &[PhysChannel]) -> Self {
        PhysVector {
            channels: channels.to_vec(),
            values: vec![0.0; channels.len()],
            observed: vec![false; channels.len()],
        }
    }

    pub fn get(&self, channel: PhysChannel) -> Option<f64> {
        let i = self.channels.iter().position(|&c| c == channel)?;
        self.observed[i].then_some(self.values[i])
    }
}

/// One home-day as a 24×N grid of hourly activation counts (row-major, hour-major).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DailyActivityMatrix {
    pub home_id: String,
    pub date: NaiveDate,
    n_nodes: usize,
    grid: Vec<u32>,
    pub phys: Option<PhysVector>,
}

impl DailyActivityMatrix {
    pub fn zeros(home_id: impl Into<String>, date: NaiveDate, n_nodes: usize) -> Self {
        DailyActivityMatrix {
            home_id: home_id.into(),
            date,
            n_nodes,
            grid: vec![0; HOURS * n_nodes],
            phys: None,
        }
    }

    pub fn from_grid(
        home_id: impl Into<String>,
        date: NaiveDate,
        n_nodes: usize,
        grid: Vec<u32>,
    ) -> Result<Self> {
        if n_nodes == 0 {
            return Err(Error::InvalidConfig("matrix needs at least one node".into()));
        }
        if grid.len() != HOURS * n_nodes {
            return Err(Error::DimensionMismatch {
                expected: HOURS * n_nodes,
                got: grid.len(),
            });
        }
        Ok(DailyActivityMatrix {
            home_id: home_id.into(),
            date,
            n_nodes,
            grid,
            phys: None,
        })
    }

    pub fn with_phys(mut self, phys: PhysVector) -> Self {
        self.phys = Some(phys);
        self
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn get(&self, hour: usize, node: usize) -> u32 {
        self.grid[hour * self.n_nodes + node]
    }

    pub(crate) fn add(&mut self, hour: usize, node: usize, count: u32) {
        self.grid[hour * self.n_nodes + node] += count;
    }

    pub fn grid(&self) -> &[u32] {
        &self.grid
    }

    pub fn row(&self, hour: usize) -> &[u32] {
        &self.grid[hour * self.n_nodes..(hour + 1) * self.n_nodes]
    }

    pub fn column(&self, node: usize) -> impl Iterator<Item = u32> + '_ {
        (0..HOURS).map(move |h| self.get(h, node))
    }

    pub fn total(&self) -> u64 {
        self.grid.iter().map(|&c| c as u64).sum()
    }

    /// Row-major flattening as reals, the input layout of every extractor.
    pub fn flatten(&self) -> Vec<f64> {
        self.grid.iter().map(|&c| c as f64).collect()
    }

    pub fn key(&self) -> (&str, NaiveDate) {
        (&self.home_id, self.date)
    }

    /// Adds another grid of the same home, day and width into this one.
    pub fn merge(&mut self, other: &DailyActivityMatrix) -> Result<()> {
        if other.key() != self.key() {
            return Err(Error::InvalidConfig(format!(
                "cannot merge {} {} into {} {}",
                other.home_id, other.date, self.home_id, self.date
            )));
        }
        if other.n_nodes != self.n_nodes {
            return Err(Error::DimensionMismatch {
                expected: self.n_nodes,
                got: other.n_nodes,
            });
        }
        self.grid.iter_mut().zip(&other.grid).for_each(|(a, b)| *a += b);
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    NonUti,
    Uti,
}

impl Label {
    /// Class index: NonUti = 0, Uti = 1 (the positive class).
    pub fn index(self) -> usize {
        match self {
            Label::NonUti => 0,
            Label::Uti => 1,
        }
    }

    pub fn from_index(i: usize) -> Label {
        if i == 0 {
            Label::NonUti
        } else {
            Label::Uti
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Uti
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::NonUti => "non_uti",
            Label::Uti => "uti",
        }
    }
}

impl FromStr for Label {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uti" | "UTI" | "1" => Ok(Label::Uti),
            "non_uti" | "NonUTI" | "0" => Ok(Label::NonUti),
            other => Err(Error::parse("label", format!("unknown label `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Clinical,
    Synthetic,
    ValidatedAlert,
}

impl Provenance {
    pub fn name(self) -> &'static str {
        match self {
            Provenance::Clinical => "clinical",
            Provenance::Synthetic => "synthetic",
            Provenance::ValidatedAlert => "validated_alert",
        }
    }
}

impl FromStr for Provenance {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "clinical" => Ok(Provenance::Clinical),
            "synthetic" => Ok(Provenance::Synthetic),
            "validated_alert" => Ok(Provenance::ValidatedAlert),
            other => Err(Error::parse("provenance", format!("unknown `{other}`"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDay {
    pub matrix: DailyActivityMatrix,
    pub label: Label,
    pub provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub nodes: NodeSet,
    pub phys_channels: Vec<PhysChannel>,
    pub unlabelled: Vec<DailyActivityMatrix>,
    pub labelled: Vec<LabeledDay>,
}

impl Corpus {
    /// Checks matrix widths and that no (home, date) appears in both partitions.
    pub fn validate(&self) -> Result<()> {
        let width = self.nodes.len();
        let all = self
            .unlabelled
            .iter()
            .chain(self.labelled.iter().map(|d| &d.matrix));
        for m in all {
            if m.n_nodes() != width {
                return Err(Error::DimensionMismatch {
                    expected: width,
                    got: m.n_nodes(),
                });
            }
        }
        let unlabelled: HashSet<_> = self.unlabelled.iter().map(|m| m.key()).collect();
        if let Some(day) = self
            .labelled
            .iter()
            .find(|d| unlabelled.contains(&d.matrix.key()))
        {
            return Err(Error::InvalidConfig(format!(
                "{} {} is both labelled and unlabelled",
                day.matrix.home_id, day.matrix.date
            )));
        }
        Ok(())
    }

    pub fn labels(&self) -> Vec<Label> {
        self.labelled.iter().map(|d| d.label).collect()
    }

    pub fn bathroom_column(&self) -> Option<usize> {
        self.nodes.index_of(Node::BathroomDoor)
    }

    /// SHA-256 over a canonical rendering of every matrix, label and phys value,
    /// independent of day order.
    pub fn content_hash(&self) -> String {
        let mut hasher = Sha256::new();
        for node in self.nodes.nodes() {
            hasher.update(node.name().as_bytes());
            hasher.update(b",");
        }
        let mut feed = |tag: &str, m: &DailyActivityMatrix| {
            hasher.update(format!("\n{tag}|{}|{}|", m.home_id, m.date).as_bytes());
            for c in m.grid() {
                hasher.update(c.to_le_bytes());
            }
            if let Some(p) = &m.phys {
                for (v, o) in p.values.iter().zip(&p.observed) {
                    hasher.update(v.to_bits().to_le_bytes());
                    hasher.update([*o as u8]);
                }
            }
        };
        let mut unlabelled: Vec<&DailyActivityMatrix> = self.unlabelled.iter().collect();
        unlabelled.sort_by(|a, b| a.key().cmp(&b.key()));
        for m in unlabelled {
            feed("u", m);
        }
        let mut labelled: Vec<&LabeledDay> = self.labelled.iter().collect();
        labelled.sort_by(|a, b| a.matrix.key().cmp(&b.matrix.key()));
        for d in labelled {
            feed(d.label.name(), &d.matrix);
        }
        hex(&hasher.finalize())
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
