use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub k: u64,
    /// Block updates so far divided by `n` (epochs).
    pub normalized_updates: f64,
    /// `F(x_k) − F*` when `F*` is known, otherwise `F(x_k)`.
    #[serde(rename = "gap_or_F")]
    pub gap_or_f: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Trace {
    pub records: Vec<TraceRecord>,
    /// Whether `gap_or_f` holds gaps rather than raw objective values.
    pub reports_gap: bool,
    pub converged: bool,
    pub iterations: u64,
    pub epochs: f64,
    pub final_objective: f64,
    /// PCDM2 steps rolled back because they increased `F`.
    pub rejected_steps: u64,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

impl Trace {
    pub fn last(&self) -> Option<&TraceRecord> {
        self.records.last()
    }

    /// CSV with header `k,normalized_updates,gap_or_F,elapsed_s`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            w.serialize(r).map_err(csv_error)?;
        }
        if self.records.is_empty() {
            w.write_record(["k", "normalized_updates", "gap_or_F", "elapsed_s"])
                .map_err(csv_error)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
        csv::Reader::from_reader(input)
            .deserialize()
            .map(|r| r.map_err(csv_error))
            .collect()
    }
}
