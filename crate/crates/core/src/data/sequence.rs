use std::collections::HashSet;
use std::io::{Read, Write};

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::types::*;

/// One frame of an interaction: the action in force and what was observed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Step {
    pub t: i64,
    pub action: ActionTuple,
    pub observation: ObservationTuple,
}

/// Action–observation record of one intersection episode, one step per frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSequence {
    id: String,
    steps: Vec<Step>,
}

impl InteractionSequence {
    pub fn new(id: impl Into<String>, steps: Vec<Step>) -> Result<Self> {
        let id = id.into();
        if steps.is_empty() {
            return Err(Error::EmptySequence);
        }
        if let Some(w) = steps.windows(2).find(|w| w[1].t != w[0].t + 1) {
            return Err(Error::InvalidSequence {
                id,
                reason: format!("frame {} follows frame {}", w[1].t, w[0].t),
            });
        }
        Ok(Self { id, steps })
    }

    /// Builds a sequence with frames numbered from `start`.
    pub fn from_pairs(
        id: impl Into<String>,
        start: i64,
        pairs: impl IntoIterator<Item = (ActionTuple, ObservationTuple)>,
    ) -> Result<Self> {
        let steps = pairs
            .into_iter()
            .enumerate()
            .map(|(i, (action, observation))| Step { t: start + i as i64, action, observation })
            .collect();
        Self::new(id, steps)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn with_id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }
}

/// A collection of sequences with unique ids.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    sequences: Vec<InteractionSequence>,
    /// Free-form provenance lines, written as `#` comments.
    pub notes: Vec<String>,
}

const HEADER: [&str; 8] = [
    "seq_id",
    "t",
    "transparency",
    "reliability",
    "traffic",
    "pedestrians",
    "reliance",
    "gaze",
];

#[derive(Debug, Deserialize)]
struct Row {
    seq_id: String,
    t: i64,
    transparency: Transparency,
    reliability: Reliability,
    traffic: Traffic,
    pedestrians: Pedestrians,
    reliance: Reliance,
    gaze: Gaze,
}

impl Dataset {
    pub fn new(sequences: Vec<InteractionSequence>) -> Result<Self> {
        let mut seen = HashSet::new();
        for s in &sequences {
            if !seen.insert(s.id()) {
                return Err(Error::DuplicateSequence(s.id().to_string()));
            }
        }
        Ok(Self { sequences, notes: Vec::new() })
    }

    pub fn sequences(&self) -> &[InteractionSequence] {
        &self.sequences
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn n_frames(&self) -> usize {
        self.sequences.iter().map(InteractionSequence::len).sum()
    }

    /// Subset by position, preserving order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            sequences: indices.iter().map(|&i| self.sequences[i].clone()).collect(),
            notes: Vec::new(),
        }
    }

    /// Parses the sequence CSV format. Rows of one sequence must be
    /// contiguous-in-time; sequences keep their order of first appearance.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != HEADER {
            return Err(Error::Parse(format!(
                "sequence header must be `{}`",
                HEADER.join(",")
            )));
        }
        let mut order: Vec<String> = Vec::new();
        let mut steps: std::collections::HashMap<String, Vec<Step>> = Default::default();
        for row in rdr.deserialize() {
            let row: Row = row?;
            let step = Step {
                t: row.t,
                action: ActionTuple::new(row.transparency, row.reliability, row.traffic, row.pedestrians),
                observation: ObservationTuple::new(row.reliance, row.gaze),
            };
            steps
                .entry(row.seq_id.clone())
                .or_insert_with(|| {
                    order.push(row.seq_id.clone());
                    Vec::new()
                })
                .push(step);
        }
        let sequences = order
            .into_iter()
            .map(|id| {
                let s = steps.remove(&id).unwrap_or_default();
                InteractionSequence::new(id, s)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(sequences)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        for note in &self.notes {
            writeln!(w, "# {note}")?;
        }
        writeln!(w, "{}", HEADER.join(","))?;
        for s in &self.sequences {
            for st in s.steps() {
                let a = &st.action;
                let o = &st.observation;
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{}",
                    s.id(),
                    st.t,
                    a.transparency,
                    a.reliability,
                    a.traffic,
                    a.pedestrians,
                    o.reliance,
                    o.gaze
                )?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# recorded 2020-01-01
seq_id,t,transparency,reliability,traffic,pedestrians,reliance,gaze
p01/c1/i0,0,AR_on,Rel_low,Traffic_high,Peds_present,R_plus,G_road
p01/c1/i0,1,AR_on,Rel_low,Traffic_high,Peds_present,R_minus,G_ped
p01/c2/i0,5,AR_off,Rel_mid,Traffic_low,Peds_absent,R_plus,G_oth
";

    #[test]
    fn parses_and_writes_sequence_csv() {
        let ds = Dataset::read_csv(SAMPLE.as_bytes()).unwrap();
        assert_eq!(ds.len(), 2);
        assert_eq!(ds.sequences()[0].len(), 2);
        assert_eq!(ds.sequences()[1].steps()[0].t, 5);
        assert_eq!(ds.sequences()[0].steps()[1].observation.gaze, Gaze::Pedestrian);

        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert_eq!(Dataset::read_csv(buf.as_slice()).unwrap(), ds);
    }

    #[test]
    fn rejects_gaps_unknown_categories_and_duplicates() {
        let gap = SAMPLE.replace("p01/c1/i0,1,", "p01/c1/i0,2,");
        assert!(matches!(Dataset::read_csv(gap.as_bytes()), Err(Error::InvalidSequence { .. })));
        let bad = SAMPLE.replace("G_oth", "G_sky");
        assert!(Dataset::read_csv(bad.as_bytes()).is_err());
        let s = InteractionSequence::from_pairs(
            "a",
            0,
            [(ActionTuple::from_index(0).unwrap(), ObservationTuple::from_index(0).unwrap())],
        )
        .unwrap();
        assert!(matches!(Dataset::new(vec![s.clone(), s]), Err(Error::DuplicateSequence(_))));
        assert!(matches!(InteractionSequence::new("e", vec![]), Err(Error::EmptySequence)));
    }
}
