use std::collections::BTreeSet;
use std::fs;
use std::path::PathBuf;

use anyhow::{anyhow, bail, Context, Result};
use gupmech::analysis::{literature_points, summary_plot_data};
use gupmech::{BoundReport, SummaryRow};

use super::{csv_bytes, num, Outcome, Output};
use crate::config::ExperimentConfig;
use crate::plot::{Plot, Series, Style};

/// Collect bound reports matching `patterns` into `summary.csv` and a
/// log-log `beta0_vs_mass.svg`.
pub fn run(cfg: &ExperimentConfig, patterns: &[String]) -> Result<Outcome> {
    let mut paths = BTreeSet::<PathBuf>::new();
    for pattern in patterns {
        let matches = glob::glob(pattern).map_err(|e| anyhow!("bad pattern `{pattern}`: {e}"))?;
        for m in matches {
            paths.insert(m.context("listing report files")?);
        }
    }
    if paths.is_empty() {
        bail!("no bound reports matched {}", patterns.join(" "));
    }
    let reports = paths
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            BoundReport::from_toml_str(&text).with_context(|| format!("parsing {}", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut literature: Vec<SummaryRow> = if cfg.summary.reference_points {
        literature_points()
    } else {
        Vec::new()
    };
    literature.extend(
        cfg.summary
            .literature
            .iter()
            .map(|l| SummaryRow::literature(l.label.clone(), l.mass, l.beta0_upper)),
    );
    let rows = summary_plot_data(&reports, &literature);

    let inputs: Vec<&std::path::Path> = paths.iter().map(|p| p.as_path()).collect();
    let out = Output::create(&cfg.output.directory, &inputs)?;
    let csv = csv_bytes(
        &["mass_kg", "beta0_upper", "label", "annotation"],
        rows.iter().map(|r| {
            vec![
                num(r.mass),
                num(r.beta0_upper),
                r.label.clone(),
                r.annotation.to_string(),
            ]
        }),
    )?;
    out.write("summary.csv", csv)?;
    out.write("beta0_vs_mass.svg", summary_plot(&rows))?;
    println!("summarised {} reports ({} rows)", reports.len(), rows.len());
    Ok(Outcome::default())
}

fn summary_plot(rows: &[SummaryRow]) -> String {
    let mut plot = Plot::new("Bounds on beta0 against oscillator mass", "effective mass (kg)", "beta0 upper bound").log_log();
    let (lit, own): (Vec<&SummaryRow>, Vec<&SummaryRow>) = rows.iter().partition(|r| r.annotation);
    for (name, group, style) in [("this work", own, Style::Markers), ("literature", lit, Style::Hollow)] {
        if group.is_empty() {
            continue;
        }
        plot.add(
            Series::new(name, group.iter().map(|r| (r.mass, r.beta0_upper)).collect(), style)
                .with_point_labels(group.iter().map(|r| r.label.clone()).collect()),
        );
    }
    plot.to_svg()
}
