//! Categorical domain types: latent states, action dimensions, observations.
//!
//! Every enum has a fixed canonical enumeration order and a canonical
//! category name. The names are shared by every file format and HTTP body.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A finite categorical variable with a canonical order and names.
pub trait Category: Copy + Eq + Sized + 'static {
    /// All values in canonical order.
    const ALL: &'static [Self];
    /// Name of the variable (e.g. `reliability`).
    const VARIABLE: &'static str;

    fn index(self) -> usize;
    fn name(self) -> &'static str;

    fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }

    fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .iter()
            .copied()
            .find(|c| c.name() == name)
            .ok_or_else(|| Error::UnknownCategory {
                variable: Self::VARIABLE,
                value: name.to_string(),
            })
    }

    fn names() -> Vec<&'static str> {
        Self::ALL.iter().map(|c| c.name()).collect()
    }
}

macro_rules! category {
    (
        $(#[$meta:meta])*
        $name:ident, $var:literal { $($(#[$vmeta:meta])* $variant:ident => $label:literal),+ $(,)? }
    ) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum $name {
            $($(#[$vmeta])* $variant),+
        }

        impl Category for $name {
            const ALL: &'static [Self] = &[$($name::$variant),+];
            const VARIABLE: &'static str = $var;

            fn index(self) -> usize {
                self as usize
            }

            fn name(self) -> &'static str {
                match self {
                    $($name::$variant => $label),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                <$name as Category>::from_name(s)
            }
        }

        impl Serialize for $name {
            fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
                s.serialize_str(self.name())
            }
        }

        impl<'de> Deserialize<'de> for $name {
            fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
                let s = String::deserialize(d)?;
                <$name as Category>::from_name(&s).map_err(serde::de::Error::custom)
            }
        }
    };
}

category! {
    /// Latent trust level.
    TrustState, "trust" { Low => "T_low", High => "T_high" }
}

category! {
    /// Latent workload level.
    WorkloadState, "workload" { Low => "W_low", High => "W_high" }
}

category! {
    /// Automation transparency: AR cues absent or present. The only
    /// controllable action dimension.
    Transparency, "transparency" { Off => "AR_off", On => "AR_on" }
}

category! {
    /// Automation reliability, derived from the stopping distance.
    Reliability, "reliability" { Low => "Rel_low", Mid => "Rel_mid", High => "Rel_high" }
}

category! {
    Traffic, "traffic" { Low => "Traffic_low", High => "Traffic_high" }
}

category! {
    /// Intersection complexity.
    Pedestrians, "pedestrians" { Absent => "Peds_absent", Present => "Peds_present" }
}

category! {
    /// Whether the driver lets the automation act (`R_plus`) or takes over (`R_minus`).
    Reliance, "reliance" { Minus => "R_minus", Plus => "R_plus" }
}

category! {
    /// Gaze target of the current fixation.
    Gaze, "gaze" {
        Road => "G_road",
        Vehicle => "G_vehi",
        Pedestrian => "G_ped",
        Sidewalk => "G_side",
        Other => "G_oth",
    }
}

pub const N_JOINT: usize = 4;
pub const N_TRUST: usize = 2;
pub const N_WORKLOAD: usize = 2;
pub const N_RELIANCE: usize = 2;
pub const N_GAZE: usize = 5;
pub const N_CONTEXTS: usize = 12;

/// A joint latent state. Index order is
/// `(T_low,W_low), (T_low,W_high), (T_high,W_low), (T_high,W_high)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct JointState {
    pub trust: TrustState,
    pub workload: WorkloadState,
}

impl JointState {
    pub const ALL: [JointState; N_JOINT] = [
        JointState::new(TrustState::Low, WorkloadState::Low),
        JointState::new(TrustState::Low, WorkloadState::High),
        JointState::new(TrustState::High, WorkloadState::Low),
        JointState::new(TrustState::High, WorkloadState::High),
    ];

    pub const fn new(trust: TrustState, workload: WorkloadState) -> Self {
        Self { trust, workload }
    }

    pub fn index(self) -> usize {
        self.trust.index() * N_WORKLOAD + self.workload.index()
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        Self::ALL.get(idx).copied()
    }
}

impl fmt::Display for JointState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.trust, self.workload)
    }
}

/// The four action dimensions, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ActionDim {
    Transparency,
    Reliability,
    Traffic,
    Pedestrians,
}

impl ActionDim {
    pub const ALL: [ActionDim; 4] = [
        ActionDim::Transparency,
        ActionDim::Reliability,
        ActionDim::Traffic,
        ActionDim::Pedestrians,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ActionDim::Transparency => Transparency::VARIABLE,
            ActionDim::Reliability => Reliability::VARIABLE,
            ActionDim::Traffic => Traffic::VARIABLE,
            ActionDim::Pedestrians => Pedestrians::VARIABLE,
        }
    }

    pub fn from_name(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|d| d.name() == name)
            .ok_or_else(|| Error::UnknownDimension(name.to_string()))
    }

    pub fn cardinality(self) -> usize {
        match self {
            ActionDim::Transparency => Transparency::ALL.len(),
            ActionDim::Reliability => Reliability::ALL.len(),
            ActionDim::Traffic => Traffic::ALL.len(),
            ActionDim::Pedestrians => Pedestrians::ALL.len(),
        }
    }

    /// Category name of the `level`-th value of this dimension.
    pub fn level_name(self, level: usize) -> &'static str {
        match self {
            ActionDim::Transparency => Transparency::ALL[level].name(),
            ActionDim::Reliability => Reliability::ALL[level].name(),
            ActionDim::Traffic => Traffic::ALL[level].name(),
            ActionDim::Pedestrians => Pedestrians::ALL[level].name(),
        }
    }

    fn bit(self) -> u8 {
        1 << (self as u8)
    }
}

impl fmt::Display for ActionDim {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A subset of action dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct DimSet(u8);

impl DimSet {
    pub const EMPTY: DimSet = DimSet(0);
    pub const FULL: DimSet = DimSet(0b1111);

    pub fn from_bits(bits: u8) -> Option<Self> {
        (bits <= 0b1111).then_some(DimSet(bits))
    }

    pub fn bits(self) -> u8 {
        self.0
    }

    pub fn of(dims: &[ActionDim]) -> Self {
        DimSet(dims.iter().fold(0, |acc, d| acc | d.bit()))
    }

    pub fn contains(self, dim: ActionDim) -> bool {
        self.0 & dim.bit() != 0
    }

    pub fn is_subset_of(self, other: DimSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn with(self, dim: ActionDim) -> Self {
        DimSet(self.0 | dim.bit())
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Member dimensions in canonical order.
    pub fn dims(self) -> impl Iterator<Item = ActionDim> {
        ActionDim::ALL.into_iter().filter(move |d| self.contains(*d))
    }

    /// Number of distinct reduced actions: product of the member cardinalities.
    pub fn n_reduced(self) -> usize {
        self.dims().map(ActionDim::cardinality).product()
    }

    /// Mixed-radix index of `a` restricted to this set; the first dimension
    /// in canonical order is the most significant digit.
    pub fn reduce(self, a: &ActionTuple) -> usize {
        self.dims()
            .fold(0, |acc, d| acc * d.cardinality() + a.level(d))
    }

    /// Per-dimension levels of a reduced index (inverse of [`DimSet::reduce`]).
    pub fn levels(self, mut idx: usize) -> Vec<(ActionDim, usize)> {
        let dims: Vec<ActionDim> = self.dims().collect();
        let mut out = vec![(ActionDim::Transparency, 0); dims.len()];
        for (slot, d) in dims.iter().enumerate().rev() {
            out[slot] = (*d, idx % d.cardinality());
            idx /= d.cardinality();
        }
        out
    }

    /// `+`-joined dimension names, or `none` for the empty set.
    pub fn label(self) -> String {
        if self.is_empty() {
            "none".to_string()
        } else {
            self.dims().map(ActionDim::name).collect::<Vec<_>>().join("+")
        }
    }

    /// Inverse of [`DimSet::label`]; also accepts comma-separated lists.
    pub fn parse_label(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() || s == "none" {
            return Ok(DimSet::EMPTY);
        }
        let mut set = DimSet::EMPTY;
        for part in s.split(['+', ',']) {
            set = set.with(ActionDim::from_name(part.trim())?);
        }
        Ok(set)
    }
}

impl fmt::Display for DimSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Which action dimensions condition the trust and workload transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionStructure {
    trust: DimSet,
    workload: DimSet,
}

impl ActionStructure {
    /// Reliability must always condition trust.
    pub fn new(trust: DimSet, workload: DimSet) -> Result<Self> {
        if !trust.contains(ActionDim::Reliability) {
            return Err(Error::InvalidStructure(
                "trust dimensions must include reliability".into(),
            ));
        }
        Ok(Self { trust, workload })
    }

    /// Trust on {transparency, reliability}; workload on
    /// {transparency, reliability, pedestrians}.
    pub fn paper() -> Self {
        Self {
            trust: DimSet::of(&[ActionDim::Transparency, ActionDim::Reliability]),
            workload: DimSet::of(&[
                ActionDim::Transparency,
                ActionDim::Reliability,
                ActionDim::Pedestrians,
            ]),
        }
    }

    pub fn full() -> Self {
        Self { trust: DimSet::FULL, workload: DimSet::FULL }
    }

    pub fn minimal() -> Self {
        Self { trust: DimSet::of(&[ActionDim::Reliability]), workload: DimSet::EMPTY }
    }

    pub fn trust_dims(&self) -> DimSet {
        self.trust
    }

    pub fn workload_dims(&self) -> DimSet {
        self.workload
    }

    pub fn dims(&self, factor: Factor) -> DimSet {
        match factor {
            Factor::Trust => self.trust,
            Factor::Workload => self.workload,
        }
    }

    pub fn is_subset_of(&self, other: &ActionStructure) -> bool {
        self.trust.is_subset_of(other.trust) && self.workload.is_subset_of(other.workload)
    }
}

impl fmt::Display for ActionStructure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trust:{} workload:{}", self.trust, self.workload)
    }
}

/// The two latent factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Factor {
    Trust,
    Workload,
}

/// Full action: transparency plus the uncontrollable context.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionTuple {
    pub transparency: Transparency,
    pub reliability: Reliability,
    pub traffic: Traffic,
    pub pedestrians: Pedestrians,
}

impl ActionTuple {
    pub const COUNT: usize = 24;

    pub fn new(
        transparency: Transparency,
        reliability: Reliability,
        traffic: Traffic,
        pedestrians: Pedestrians,
    ) -> Self {
        Self { transparency, reliability, traffic, pedestrians }
    }

    pub fn from_parts(transparency: Transparency, context: Context) -> Self {
        Self::new(transparency, context.reliability, context.traffic, context.pedestrians)
    }

    pub fn context(&self) -> Context {
        Context::new(self.reliability, self.traffic, self.pedestrians)
    }

    pub fn level(&self, dim: ActionDim) -> usize {
        match dim {
            ActionDim::Transparency => self.transparency.index(),
            ActionDim::Reliability => self.reliability.index(),
            ActionDim::Traffic => self.traffic.index(),
            ActionDim::Pedestrians => self.pedestrians.index(),
        }
    }

    /// Index in the full 24-action space (transparency most significant).
    pub fn index(&self) -> usize {
        DimSet::FULL.reduce(self)
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        (idx < Self::COUNT).then(|| {
            let levels = DimSet::FULL.levels(idx);
            Self::new(
                Transparency::ALL[levels[0].1],
                Reliability::ALL[levels[1].1],
                Traffic::ALL[levels[2].1],
                Pedestrians::ALL[levels[3].1],
            )
        })
    }

    pub fn all() -> impl Iterator<Item = ActionTuple> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }

    /// `AR_on+Rel_low+Traffic_high+Peds_present`
    pub fn label(&self) -> String {
        format!(
            "{}+{}+{}+{}",
            self.transparency, self.reliability, self.traffic, self.pedestrians
        )
    }

    /// Parses `+`- or `,`-separated category names in canonical order.
    pub fn parse_label(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['+', ',']).map(str::trim).collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("action needs 4 components, got `{s}`")));
        }
        Ok(Self::new(
            parts[0].parse()?,
            parts[1].parse()?,
            parts[2].parse()?,
            parts[3].parse()?,
        ))
    }
}

impl fmt::Display for ActionTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// The uncontrollable part of an action: reliability and scene complexity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Context {
    pub reliability: Reliability,
    pub traffic: Traffic,
    pub pedestrians: Pedestrians,
}

impl Context {
    pub fn new(reliability: Reliability, traffic: Traffic, pedestrians: Pedestrians) -> Self {
        Self { reliability, traffic, pedestrians }
    }

    /// Index in the 12-context space (reliability most significant).
    pub fn index(&self) -> usize {
        (self.reliability.index() * 2 + self.traffic.index()) * 2 + self.pedestrians.index()
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        (idx < N_CONTEXTS).then(|| {
            Self::new(
                Reliability::ALL[idx / 4],
                Traffic::ALL[(idx / 2) % 2],
                Pedestrians::ALL[idx % 2],
            )
        })
    }

    pub fn all() -> impl Iterator<Item = Context> {
        (0..N_CONTEXTS).filter_map(Self::from_index)
    }

    /// `Rel_low+Traffic_high+Peds_present`
    pub fn label(&self) -> String {
        format!("{}+{}+{}", self.reliability, self.traffic, self.pedestrians)
    }

    pub fn parse_label(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(['+', ',']).map(str::trim).collect();
        if parts.len() != 3 {
            return Err(Error::Parse(format!("context needs 3 components, got `{s}`")));
        }
        Ok(Self::new(parts[0].parse()?, parts[1].parse()?, parts[2].parse()?))
    }
}

impl fmt::Display for Context {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ObservationTuple {
    pub reliance: Reliance,
    pub gaze: Gaze,
}

impl ObservationTuple {
    pub const COUNT: usize = N_RELIANCE * N_GAZE;

    pub fn new(reliance: Reliance, gaze: Gaze) -> Self {
        Self { reliance, gaze }
    }

    pub fn index(&self) -> usize {
        self.reliance.index() * N_GAZE + self.gaze.index()
    }

    pub fn from_index(idx: usize) -> Option<Self> {
        (idx < Self::COUNT)
            .then(|| Self::new(Reliance::ALL[idx / N_GAZE], Gaze::ALL[idx % N_GAZE]))
    }

    pub fn all() -> impl Iterator<Item = ObservationTuple> {
        (0..Self::COUNT).filter_map(Self::from_index)
    }
}

impl fmt::Display for ObservationTuple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}+{}", self.reliance, self.gaze)
    }
}
