use std::io::Write;

use crate::error::{Error, Result};

use super::TrialRecord;

pub const CSV_HEADER: [&str; 7] = [
    "trial_index",
    "alignment",
    "sent_retained",
    "unsent_retained",
    "cap_underflow",
    "misses",
    "runtime_ms",
];

fn cell<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One row per trial; unrecorded fields are empty cells.
pub fn write_trial_csv<W: Write>(records: &[TrialRecord], out: W) -> Result<()> {
    let to_err = |e: csv::Error| Error::Output(e.to_string());
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(CSV_HEADER).map_err(to_err)?;
    for r in records {
        writer
            .write_record([
                r.trial_index.to_string(),
                cell(r.alignment),
                cell(r.sent_retained),
                cell(r.unsent_retained),
                cell(r.cap_underflow),
                cell(r.misses),
                cell(r.runtime_ms),
            ])
            .map_err(to_err)?;
    }
    writer.flush().map_err(|e| Error::Output(e.to_string()))
}
