use std::fs;
use std::path::{Path, PathBuf};

use crate::diagnosis::MapSummary;
use crate::error::{HoiError, Result};
use crate::metrics::pr_curve;

use super::{Analysis, DiagnosisReport, Format, RunConfig, REPORT_FILE, SUMMARY_FILE};

/// One output file, rendered in memory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub bytes: Vec<u8>,
}

/// Percentages in CSV files carry one decimal (`{:.1}` on the full-precision
/// value); undefined values are empty cells.
fn one_decimal(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.1}")).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>> {
    let err = |e: csv::Error| HoiError::Computation {
        stage: "render",
        message: e.to_string(),
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| HoiError::Computation {
        stage: "render",
        message: e.to_string(),
    })
}

fn summary(report: &DiagnosisReport) -> Result<Vec<u8>> {
    let m = &report.metrics;
    let mut rows = vec![
        ("map", Some(m.map)),
        ("map_rare", m.map_rare),
        ("map_non_rare", m.map_non_rare),
        ("pair_recall", Some(m.pairs.recall)),
        ("pair_precision", Some(m.pairs.precision)),
        ("mean_pairs_per_image", Some(m.pairs.mean_pairs_per_image)),
        ("negative_pair_ap", m.negative_pair_ap),
        ("action_map", m.action_map),
    ]
    .into_iter()
    .map(|(k, v)| vec![k.to_string(), one_decimal(v)])
    .collect::<Vec<_>>();
    for (e, n) in report.error_counts() {
        rows.push(vec![format!("errors_{e}"), n.to_string()]);
    }
    csv_bytes(&["metric", "value"], rows)
}

fn delta_csv(report: &DiagnosisReport, pick: fn(&MapSummary) -> Option<f64>) -> Result<Vec<u8>> {
    let rows = report
        .delta_map
        .oracles
        .iter()
        .map(|o| vec![o.error_type.clone(), one_decimal(pick(&o.delta))]);
    csv_bytes(&["error_type", "delta_map"], rows)
}

/// Renders every requested artifact without touching the file system.
pub fn render(
    report: &DiagnosisReport,
    analysis: &Analysis,
    config: &RunConfig,
) -> Result<Vec<Artifact>> {
    let mut out = Vec::new();
    let mut push = |name: String, bytes: Vec<u8>| out.push(Artifact { name, bytes });
    if config.formats.contains(&Format::Json) {
        push(REPORT_FILE.into(), report.to_json());
    }
    if config.formats.contains(&Format::Csv) {
        push(SUMMARY_FILE.into(), summary(report)?);
    }
    if config.formats.contains(&Format::Plot) {
        push("delta_map.csv".into(), delta_csv(report, |s| s.overall)?);
        push("delta_map_rare.csv".into(), delta_csv(report, |s| s.rare)?);
        push(
            "delta_map_non_rare.csv".into(),
            delta_csv(report, |s| s.non_rare)?,
        );
        for c in config.categories.iter().flatten() {
            let Some(l) = analysis.diagnosed.ledger.get(*c) else {
                continue;
            };
            let curve = pr_curve(l);
            let rows = curve.points.iter().map(|p| {
                vec![
                    p.confidence.to_string(),
                    p.recall.to_string(),
                    p.precision.to_string(),
                    p.interpolated.to_string(),
                ]
            });
            push(
                format!("pr_curve_{}_{}.csv", c.object, c.action),
                csv_bytes(
                    &[
                        "confidence",
                        "recall",
                        "precision",
                        "interpolated_precision",
                    ],
                    rows,
                )?,
            );
        }
    }
    Ok(out)
}

/// Writes artifacts into `dir`, each through a temporary file. On failure
/// every file written so far is removed, and `dir` too if this call created it.
pub fn write_artifacts(dir: &Path, artifacts: &[Artifact]) -> Result<()> {
    let created = !dir.exists();
    let io = |path: PathBuf| move |source| HoiError::Io { path, source };
    fs::create_dir_all(dir).map_err(io(dir.to_path_buf()))?;
    let mut written: Vec<PathBuf> = Vec::new();
    let result = artifacts.iter().try_for_each(|a| {
        let path = dir.join(&a.name);
        let tmp = dir.join(format!(".{}.tmp", a.name));
        fs::write(&tmp, &a.bytes).map_err(io(tmp.clone()))?;
        let renamed = fs::rename(&tmp, &path).map_err(io(path.clone()));
        if renamed.is_err() {
            let _ = fs::remove_file(&tmp);
        }
        renamed?;
        written.push(path);
        Ok(())
    });
    if result.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        if created {
            let _ = fs::remove_dir(dir);
        }
    }
    result
}
