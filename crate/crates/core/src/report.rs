//! Plain-text and comma-separated summary tables built from on-disk
//! artifacts only.

use std::fs;
use std::path::Path;

use crate::analysis::{parse_analysis_csv, ReprReport};
use crate::model::Component;
use crate::optim::{build_condition, CONDITION_IDS};
use crate::runner::{parse_results_csv, ResultRow, RESULT_COLUMNS};
use crate::{Error, Result};

pub const MISSING: &str = "—";

/// Everything the tables are rendered from.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Bundle {
    pub results: Vec<ResultRow>,
    pub analysis: Vec<ReprReport>,
}

impl Bundle {
    /// `results.csv` is required; `analysis.csv` is optional.
    pub fn load(dir: &Path) -> Result<Self> {
        let results_path = dir.join("results.csv");
        if !results_path.exists() {
            return Err(Error::MissingFile(results_path));
        }
        let results = parse_results_csv(&fs::read_to_string(&results_path)?)?;
        let analysis_path = dir.join("analysis.csv");
        let analysis = if analysis_path.exists() {
            parse_analysis_csv(&fs::read_to_string(&analysis_path)?)?
        } else {
            Vec::new()
        };
        Ok(Bundle { results, analysis })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_text(&self) -> String {
        let widths: Vec<usize> = (0..self.header.len())
            .map(|c| {
                std::iter::once(&self.header[c])
                    .chain(self.rows.iter().map(|r| &r[c]))
                    .map(|s| s.chars().count())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let line = |cells: &[String]| -> String {
            let padded: Vec<String> = cells
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (s, w))| {
                    let pad = " ".repeat(w - s.chars().count());
                    if i == 0 { format!("{s}{pad}") } else { format!("{pad}{s}") }
                })
                .collect();
            padded.join(" | ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        out.push_str(&(widths.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>().join("-+-") + "\n"));
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let esc = |s: &String| if s.contains(',') { format!("\"{s}\"") } else { s.clone() };
        let mut out = self.header.iter().map(esc).collect::<Vec<_>>().join(",") + "\n";
        for r in &self.rows {
            out.push_str(&(r.iter().map(esc).collect::<Vec<_>>().join(",") + "\n"));
        }
        out
    }
}

/// Conditions × (A, B, C, D, Global) median WER; the lowest value in each
/// column carries an asterisk.
pub fn wer_table(results: &[ResultRow]) -> Table {
    let medians: Vec<[Option<f64>; 5]> = CONDITION_IDS
        .clone()
        .map(|k| {
            results
                .iter()
                .find(|r| r.condition_id == k && r.seed.is_none())
                .map_or([None; 5], |r| r.wer)
        })
        .collect();
    let rounded = |v: f64| (v * 100.0).round() / 100.0;
    let best: Vec<Option<f64>> = (0..5)
        .map(|c| {
            medians
                .iter()
                .filter_map(|m| m[c].map(rounded))
                .min_by(f64::total_cmp)
        })
        .collect();
    let mut header = vec!["Condition".to_string()];
    header.extend(RESULT_COLUMNS.iter().map(|c| if *c == "Global" { c.to_string() } else { format!("Tier {c}") }));
    let rows = CONDITION_IDS
        .clone()
        .zip(&medians)
        .map(|(k, m)| {
            let name = build_condition(k).map(|c| c.name).unwrap_or_default();
            let mut row = vec![format!("{k} {name}")];
            for c in 0..5 {
                row.push(match m[c] {
                    Some(v) if Some(rounded(v)) == best[c] => format!("{v:.2}*"),
                    Some(v) => format!("{v:.2}"),
                    None => MISSING.into(),
                });
            }
            row
        })
        .collect();
    Table { header, rows }
}

fn fmt(v: f64, digits: usize) -> String {
    if v.is_finite() { format!("{v:.digits$}") } else { MISSING.into() }
}

/// Comparisons × (CKA, EMD, Δθ), encoder column before decoder column.
pub fn analysis_table(reports: &[ReprReport]) -> Table {
    let header = ["Comparison", "CKA Enc", "CKA Dec", "EMD Enc", "EMD Dec", "Δθ Enc", "Δθ Dec"]
        .map(String::from)
        .to_vec();
    let rows = reports
        .iter()
        .map(|r| {
            let (e, d) = (r.get(Component::Encoder), r.get(Component::Decoder));
            vec![
                r.comparison_id.clone(),
                fmt(e.cka, 3),
                fmt(d.cka, 3),
                fmt(e.emd, 4),
                fmt(d.emd, 4),
                fmt(e.delta_theta, 3),
                fmt(d.delta_theta, 3),
            ]
        })
        .collect();
    Table { header, rows }
}

/// Effective rank and tail of the fine-tuned activations per component.
pub fn spectral_table(reports: &[ReprReport]) -> Table {
    let header = ["Comparison", "ζ Enc", "Tail Enc", "ζ Dec", "Tail Dec"].map(String::from).to_vec();
    let rows = reports
        .iter()
        .map(|r| {
            let (e, d) = (r.get(Component::Encoder), r.get(Component::Decoder));
            vec![
                r.comparison_id.clone(),
                e.effective_rank.to_string(),
                fmt(e.tail, 4),
                d.effective_rank.to_string(),
                fmt(d.tail, 4),
            ]
        })
        .collect();
    Table { header, rows }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Tables {
    pub wer: Table,
    pub analysis: Table,
    pub spectral: Table,
}

pub fn render_tables(bundle: &Bundle) -> Tables {
    Tables {
        wer: wer_table(&bundle.results),
        analysis: analysis_table(&bundle.analysis),
        spectral: spectral_table(&bundle.analysis),
    }
}

impl Tables {
    pub fn to_text(&self) -> String {
        format!(
            "Median WER (%) over seeds; * marks the best per column\n\n{}\n\
             Representational shift relative to the base\n\n{}\n\
             Spectrum of fine-tuned activations (99% energy rank, min/max singular value)\n\n{}",
            self.wer.to_text(),
            self.analysis.to_text(),
            self.spectral.to_text()
        )
    }

    /// Write `tables.txt` plus one csv per table into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("tables.txt"), self.to_text())?;
        fs::write(dir.join("wer_table.csv"), self.wer.to_csv())?;
        fs::write(dir.join("analysis_table.csv"), self.analysis.to_csv())?;
        fs::write(dir.join("spectral_table.csv"), self.spectral.to_csv())?;
        Ok(())
    }
}
