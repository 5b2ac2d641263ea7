use std::io::Write;

use serde::{Deserialize, Serialize};

use super::fit::SyntheticFit;
use super::placebo::InTimePlaceboResult;
use crate::error::{Error, Result};

fn writer<W: Write>(out: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(out)
}

fn finish<W: Write>(mut w: csv::Writer<W>, what: &str) -> Result<()> {
    w.flush().map_err(|e| Error::io(what, e))
}

/// `donor,weight`, one row per donor in pool order.
pub fn write_weights_csv<W: Write>(out: W, fit: &SyntheticFit) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["donor", "weight"])?;
    for (d, wt) in fit.donors.iter().zip(&fit.weights) {
        w.serialize((d, wt))?;
    }
    finish(w, "<weights csv>")
}

/// `ym,y_treated,y_synth`, one row per month.
pub fn write_plot_csv<W: Write>(out: W, fit: &SyntheticFit) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["ym", "y_treated", "y_synth"])?;
    for (t, ym) in fit.window.months().enumerate() {
        w.serialize((ym.to_string(), fit.treated[t], fit.synthetic[t]))?;
    }
    finish(w, "<plot csv>")
}

/// One month of a treated series and its synthetic control.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedRow {
    pub year: i32,
    pub month: u32,
    pub y_treated: f64,
    pub y_control: f64,
}

/// `year,month,y_treated,y_control`, the input of the DiD regression.
pub fn write_paired_csv<W: Write>(out: W, fit: &SyntheticFit) -> Result<()> {
    let mut w = writer(out);
    for (t, ym) in fit.window.months().enumerate() {
        w.serialize(PairedRow {
            year: ym.year,
            month: ym.month,
            y_treated: fit.treated[t],
            y_control: fit.synthetic[t],
        })?;
    }
    finish(w, "<paired csv>")
}

/// `date,kind,ratio` with one row per fake date and a final `true` row.
/// Undefined ratios are left empty.
pub fn write_in_time_csv<W: Write>(out: W, result: &InTimePlaceboResult) -> Result<()> {
    let mut w = writer(out);
    w.write_record(["date", "kind", "ratio"])?;
    for f in &result.fakes {
        w.serialize((f.date.to_string(), "fake", f.ratio))?;
    }
    w.serialize((result.true_event.to_string(), "true", result.true_ratio))?;
    finish(w, "<in-time csv>")
}

/// Summary written next to a fit: `{pre_mspe, post_mspe, ratio, p_value}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSummary {
    pub pre_mspe: f64,
    pub post_mspe: f64,
    pub ratio: Option<f64>,
    pub p_value: Option<f64>,
}

impl FitSummary {
    pub fn from_fit(fit: &SyntheticFit, p_value: Option<f64>) -> Self {
        FitSummary {
            pre_mspe: fit.mspe.pre_mspe,
            post_mspe: fit.mspe.post_mspe,
            ratio: fit.mspe.ratio,
            p_value,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::month::{MonthWindow, YearMonth};
    use crate::syncontrol::MspeSummary;

    fn fit() -> SyntheticFit {
        let w = MonthWindow::new(
            YearMonth::new(2022, 11).unwrap(),
            YearMonth::new(2023, 1).unwrap(),
        )
        .unwrap();
        SyntheticFit {
            treated_word: "delv".into(),
            window: w,
            event: YearMonth::new(2022, 12).unwrap(),
            donors: vec!["a".into(), "b".into()],
            weights: vec![0.25, 0.75],
            treated: vec![-2.0, -2.5, -1.0],
            synthetic: vec![-2.0, -2.25, -2.0],
            mspe: MspeSummary {
                pre_mspe: 0.03125,
                post_mspe: 1.0,
                ratio: Some(32.0),
            },
        }
    }

    fn text(f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn csv_layouts() {
        let fit = fit();
        assert_eq!(
            text(|b| write_weights_csv(b, &fit)),
            "donor,weight\na,0.25\nb,0.75\n"
        );
        assert_eq!(
            text(|b| write_plot_csv(b, &fit)),
            "ym,y_treated,y_synth\n2022-11,-2.0,-2.0\n2022-12,-2.5,-2.25\n2023-01,-1.0,-2.0\n"
        );
        assert_eq!(
            text(|b| write_paired_csv(b, &fit)),
            "year,month,y_treated,y_control\n2022,11,-2.0,-2.0\n2022,12,-2.5,-2.25\n2023,1,-1.0,-2.0\n"
        );
    }

    #[test]
    fn summary_json_keys() {
        let s = FitSummary::from_fit(&fit(), Some(0.01));
        let v: serde_json::Value = serde_json::to_value(&s).unwrap();
        assert_eq!(v["ratio"], 32.0);
        assert_eq!(v["p_value"], 0.01);
        let none = FitSummary { ratio: None, ..s };
        assert!(serde_json::to_value(&none).unwrap()["ratio"].is_null());
    }
}
