use std::io::{Read, Write};

use super::{EigenstateRecord, HistogramBin, WProfile};
use crate::error::{Error, Result};

pub const RECORD_HEADER: &str = "seed,W,L,model,method,state_id,energy,variance,c_tot,n_tot,s_g,npr,accepted";
pub const PROFILE_HEADER: &str = "L,W,measure,d,mean,n";

pub fn write_records_csv<W: Write>(out: W, records: &[EigenstateRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    if records.is_empty() {
        w.write_record(RECORD_HEADER.split(','))?;
    }
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records_csv<R: Read>(input: R) -> Result<Vec<EigenstateRecord>> {
    let mut rd = csv::Reader::from_reader(input);
    let header: Vec<String> = rd.headers()?.iter().map(str::to_string).collect();
    if header.join(",") != RECORD_HEADER {
        return Err(Error::Decode(format!(
            "unexpected records header `{}`",
            header.join(",")
        )));
    }
    rd.deserialize().map(|r| r.map_err(Error::from)).collect()
}

/// Profile rows per `(L, W, measure)`, each block followed by `slope` and
/// `xi` footer rows (with an empty `n`) when a decay fit exists.
pub fn write_profiles_csv<W: Write>(out: W, profiles: &[WProfile]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(PROFILE_HEADER.split(','))?;
    for p in profiles {
        let (l, wv, m) = (p.length.to_string(), format!("{:?}", p.w), p.profile.measure.name());
        for ((d, mean), n) in p.profile.distances.iter().zip(&p.profile.means).zip(&p.profile.counts) {
            w.write_record([l.as_str(), &wv, m, &d.to_string(), &format!("{mean:?}"), &n.to_string()])?;
        }
        if let Some(fit) = &p.fit {
            w.write_record([l.as_str(), &wv, m, "slope", &format!("{:?}", fit.slope), ""])?;
            w.write_record([l.as_str(), &wv, m, "xi", &format!("{:?}", fit.xi), ""])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(out: W, bins: &[HistogramBin]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["lo", "hi", "ed", "simps"])?;
    for b in bins {
        w.write_record([
            format!("{:?}", b.lo),
            format!("{:?}", b.hi),
            b.ed.to_string(),
            b.simps.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
