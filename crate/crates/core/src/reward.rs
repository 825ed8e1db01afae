//! Trust-calibration reward indexed by (trust state, reliability).

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::types::{Category, Reliability, TrustState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardSpec {
    table: [[f64; 3]; 2],
}

impl Default for RewardSpec {
    /// +1 for calibrated trust (low/low, high/high), -1 for over- or
    /// under-trust, 0 at medium reliability.
    fn default() -> Self {
        Self { table: [[1.0, 0.0, -1.0], [-1.0, 0.0, 1.0]] }
    }
}

impl RewardSpec {
    pub fn new(table: [[f64; 3]; 2]) -> Result<Self> {
        if table.iter().flatten().any(|r| !r.is_finite()) {
            return Err(Error::InvalidConfig(format!("reward table has a non-finite entry: {table:?}")));
        }
        Ok(Self { table })
    }

    pub fn constant(c: f64) -> Result<Self> {
        Self::new([[c; 3]; 2])
    }

    pub fn reward(&self, trust: TrustState, reliability: Reliability) -> f64 {
        self.table[trust.index()][reliability.index()]
    }

    pub fn table(&self) -> &[[f64; 3]; 2] {
        &self.table
    }

    pub fn max_abs(&self) -> f64 {
        self.table.iter().flatten().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// `c * r + d` applied entrywise.
    pub fn affine(&self, scale: f64, shift: f64) -> Result<Self> {
        Self::new(self.table.map(|row| row.map(|r| scale * r + shift)))
    }

    /// Reads the table layout `trust,Rel_low,Rel_mid,Rel_high` with one row per
    /// trust state. `#` lines are comments.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let expected: Vec<&str> = std::iter::once("trust").chain(Reliability::names()).collect();
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse(format!(
                "reward header must be `{}`, got `{}`",
                expected.join(","),
                headers.iter().collect::<Vec<_>>().join(",")
            )));
        }
        let mut table = [[f64::NAN; 3]; 2];
        let mut seen = [false; 2];
        for rec in rdr.records() {
            let rec = rec?;
            let trust: TrustState = rec[0].parse()?;
            if std::mem::replace(&mut seen[trust.index()], true) {
                return Err(Error::Parse(format!("duplicate reward row for {trust}")));
            }
            for j in 0..3 {
                table[trust.index()][j] = rec[j + 1]
                    .parse()
                    .map_err(|e| Error::Parse(format!("reward {}: {e}", &rec[j + 1])))?;
            }
        }
        if !seen.iter().all(|s| *s) {
            return Err(Error::Parse("reward table needs a row for T_low and T_high".into()));
        }
        Self::new(table)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "trust,{}", Reliability::names().join(","))?;
        for t in TrustState::ALL {
            let row = self.table[t.index()];
            writeln!(w, "{},{},{},{}", t, row[0], row[1], row[2])?;
        }
        Ok(())
    }
}
