use std::fmt::Write as _;

use serde::Serialize;

use super::diagnostics::quantile_type7;
use super::samples::PosteriorSamples;

pub const QUANTILE_PROBS: [f64; 5] = [0.025, 0.25, 0.5, 0.75, 0.975];
const QUANTILE_LABELS: [&str; 5] = ["2.5%", "25%", "50%", "75%", "97.5%"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub name: String,
    pub mean: f64,
    pub sd: f64,
    /// At 2.5%, 25%, 50%, 75% and 97.5%.
    pub quantiles: [f64; 5],
    /// NaN when chains are too short for diagnostics.
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryTable {
    pub rows: Vec<SummaryRow>,
}

/// Pooled-chain summaries with type-7 quantiles and split-chain diagnostics.
pub fn summarize(samples: &PosteriorSamples) -> SummaryTable {
    let rhat = samples.rhat().ok();
    let ess = samples.ess().ok();
    let rows = samples
        .parameter_names
        .iter()
        .enumerate()
        .map(|(p, name)| {
            let mut x = samples.pooled(p);
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let sd = if x.len() > 1 {
                (x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            x.sort_by(f64::total_cmp);
            let quantiles = QUANTILE_PROBS.map(|q| {
                if x.is_empty() {
                    f64::NAN
                } else {
                    quantile_type7(&x, q)
                }
            });
            SummaryRow {
                name: name.clone(),
                mean,
                sd,
                quantiles,
                rhat: rhat.as_ref().map_or(f64::NAN, |r| r[p]),
                ess: ess.as_ref().map_or(f64::NAN, |e| e[p]),
            }
        })
        .collect();
    SummaryTable { rows }
}

impl SummaryTable {
    pub fn row(&self, name: &str) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(0)
            .max(9);
        let mut out = String::new();
        let _ = write!(out, "{:<width$} {:>10} {:>10}", "parameter", "mean", "sd");
        for label in QUANTILE_LABELS {
            let _ = write!(out, " {label:>10}");
        }
        let _ = writeln!(out, " {:>7} {:>8}", "R-hat", "ESS");
        for r in &self.rows {
            let _ = write!(out, "{:<width$} {:>10.4} {:>10.4}", r.name, r.mean, r.sd);
            for q in r.quantiles {
                let _ = write!(out, " {q:>10.4}");
            }
            let _ = writeln!(out, " {:>7.3} {:>8.0}", r.rhat, r.ess);
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec!["parameter", "mean", "sd"];
        header.extend(QUANTILE_LABELS);
        header.extend(["rhat", "ess"]);
        w.write_record(&header).expect("in-memory write");
        for r in &self.rows {
            let mut rec = vec![r.name.clone(), r.mean.to_string(), r.sd.to_string()];
            rec.extend(r.quantiles.iter().map(f64::to_string));
            rec.push(r.rhat.to_string());
            rec.push(r.ess.to_string());
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("summary serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_param(chains: Vec<Vec<f64>>) -> PosteriorSamples {
        PosteriorSamples::from_draws(
            vec!["x".into()],
            chains
                .into_iter()
                .map(|c| c.into_iter().map(|v| vec![v]).collect())
                .collect(),
        )
    }

    #[test]
    fn constant_draws() {
        let t = summarize(&one_param(vec![vec![5.0; 20], vec![5.0; 20]]));
        let r = &t.rows[0];
        assert_eq!(r.mean, 5.0);
        assert_eq!(r.sd, 0.0);
        assert_eq!(r.quantiles, [5.0; 5]);
        assert_eq!(r.rhat, 1.0);
        assert_eq!(r.ess, 0.0);
    }

    #[test]
    fn median_of_five() {
        let t = summarize(&one_param(vec![vec![1.0, 2.0, 3.0, 4.0, 5.0]]));
        assert_eq!(t.rows[0].quantiles[2], 3.0);
        assert_eq!(t.rows[0].mean, 3.0);
        assert!((t.rows[0].sd - 2.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn too_short_gives_nan_diagnostics() {
        let t = summarize(&one_param(vec![vec![1.0, 2.0]]));
        assert!(t.rows[0].rhat.is_nan());
        assert!(t.to_text().contains("NaN"));
    }

    #[test]
    fn formats() {
        let t = summarize(&one_param(vec![(1..=40).map(f64::from).collect()]));
        let text = t.to_text();
        assert!(text.starts_with("parameter"));
        assert_eq!(text.lines().count(), 2);
        let csv = t.to_csv();
        assert!(csv.starts_with("parameter,mean,sd,2.5%,25%,50%,75%,97.5%,rhat,ess\nx,20.5,"));
        let json: serde_json::Value = serde_json::from_str(&t.to_json()).unwrap();
        assert_eq!(json["rows"][0]["mean"], 20.5);
    }
}
