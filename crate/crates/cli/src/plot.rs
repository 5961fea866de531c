use std::path::Path;

use anyhow::{anyhow, Result};
use circalloc::sim::{SimulationReport, SweepRow};
use log::info;
use plotters::prelude::*;

const METRICS: [(&str, &str, fn(&SweepRow) -> f64); 4] = [
    ("drop_rate", "drop rate", |r| r.drop_rate),
    ("mean_hops", "mean hops", |r| r.mean_hops),
    ("router_load", "router load (Mb/s per node)", |r| r.router_load_mbps),
    ("frac_routed", "fraction routed", |r| r.frac_routed),
];

/// One SVG per metric against the normalized load.
pub fn write_all(report: &SimulationReport, dir: &Path) -> Result<()> {
    for (file, label, metric) in METRICS {
        let path = dir.join(format!("{file}.svg"));
        draw(report, &path, label, metric).map_err(|e| anyhow!("plotting {}: {e}", path.display()))?;
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn draw(
    report: &SimulationReport,
    path: &Path,
    label: &str,
    metric: fn(&SweepRow) -> f64,
) -> std::result::Result<(), Box<dyn std::error::Error>> {
    let loads = report.loads();
    let (x0, x1) = loads
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &l| (a.min(l), b.max(l)));
    let (x0, x1) = if x0 < x1 { (x0, x1) } else { (x0 - 0.5, x0 + 0.5) };
    let ymax = report
        .rows
        .iter()
        .map(metric)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let ymax = if ymax > 0.0 { ymax * 1.05 } else { 1.0 };

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(12)
        .x_label_area_size(36)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, 0.0..ymax)?;
    chart
        .configure_mesh()
        .x_desc("normalized load")
        .y_desc(label)
        .draw()?;
    for (i, s) in report.strategies().into_iter().enumerate() {
        let color = Palette99::pick(i).to_rgba();
        let points: Vec<(f64, f64)> = loads
            .iter()
            .filter_map(|&l| report.get(s, l).map(|r| (l, metric(r))))
            .filter(|(_, v)| v.is_finite())
            .collect();
        chart
            .draw_series(LineSeries::new(points, color.stroke_width(2)))?
            .label(s.to_string())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperLeft)
        .draw()?;
    root.present()?;
    Ok(())
}
