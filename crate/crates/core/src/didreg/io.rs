use std::io::Write;
use std::path::Path;

use super::sampler::DidPosterior;
use crate::error::{Error, Result};
use crate::month::{MonthWindow, YearMonth};
use crate::syncontrol::PairedRow;

/// A treated series and its control on a contiguous month grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedSeries {
    pub window: MonthWindow,
    pub treated: Vec<f64>,
    pub control: Vec<f64>,
}

/// Reads `year,month,y_treated,y_control`. Rows must cover consecutive months
/// in ascending order.
pub fn read_paired_csv(path: &Path) -> Result<PairedSeries> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut months: Vec<YearMonth> = Vec::new();
    let mut treated = Vec::new();
    let mut control = Vec::new();
    for (i, rec) in rdr.deserialize::<PairedRow>().enumerate() {
        let row = rec?;
        let line = i + 2;
        let parse_err = |message: String| Error::Parse {
            path: path.into(),
            line,
            message,
        };
        let ym = YearMonth::new(row.year, row.month).map_err(|e| parse_err(e.to_string()))?;
        if let Some(&prev) = months.last() {
            if ym != prev.offset(1) {
                return Err(parse_err(format!("{ym} does not follow {prev}")));
            }
        }
        if !row.y_treated.is_finite() || !row.y_control.is_finite() {
            return Err(parse_err("non-finite value".into()));
        }
        months.push(ym);
        treated.push(row.y_treated);
        control.push(row.y_control);
    }
    let (Some(&start), Some(&end)) = (months.first(), months.last()) else {
        return Err(Error::InvalidInput(format!(
            "{} has no rows",
            path.display()
        )));
    };
    Ok(PairedSeries {
        window: MonthWindow::new(start, end)?,
        treated,
        control,
    })
}

/// `chain,iter,alpha,beta,beta_post,beta_gpt_post,sigma` over kept draws.
pub fn write_draws_csv<W: Write>(out: W, post: &DidPosterior) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out);
    w.write_record([
        "chain",
        "iter",
        "alpha",
        "beta",
        "beta_post",
        "beta_gpt_post",
        "sigma",
    ])?;
    for (c, chain) in post.chains.iter().enumerate() {
        for (i, d) in chain.iter().enumerate() {
            w.serialize((c, i, d[0], d[1], d[2], d[3], d[4]))?;
        }
    }
    w.flush().map_err(|e| Error::io("<draws csv>", e))
}
