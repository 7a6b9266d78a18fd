//! SVG figures: pooled Z-score histogram, inter-setup scatter with its fit,
//! and difference boxplots.

use super::boxplot::DifferenceBoxplots;
use super::mos::{ZScoreSummary, HISTOGRAM_BIN};
use super::perturb::SetupFit;
use super::{Result, StatsError};
use plotters::prelude::*;
use std::path::Path;

const SIZE: (u32, u32) = (640, 480);

fn plot_err(e: impl std::fmt::Display) -> StatsError {
    StatsError::Plot(e.to_string())
}

fn save(svg: String, path: &Path) -> Result<()> {
    std::fs::write(path, svg).map_err(|source| StatsError::Io { path: path.to_path_buf(), source })
}

pub fn plot_zscore_histogram(summary: &ZScoreSummary, path: &Path) -> Result<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let top = summary.histogram.iter().map(|b| b.1).max().unwrap_or(0).max(1) as f64;
        let mut chart = ChartBuilder::on(&root)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(-4.0..4.0, 0.0..top * 1.05)
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().draw().map_err(plot_err)?;
        chart
            .draw_series(summary.histogram.iter().map(|&(lo, count)| {
                Rectangle::new([(lo, 0.0), (lo + HISTOGRAM_BIN, count as f64)], BLUE.mix(0.6).filled())
            }))
            .map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    save(svg, path)
}

pub fn plot_fit(fit: &SetupFit, path: &Path) -> Result<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let mut chart = ChartBuilder::on(&root)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(1.0..5.0, 0.5..5.5)
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().draw().map_err(plot_err)?;
        chart
            .draw_series(
                fit.pairs.x.iter().zip(&fit.pairs.y).map(|(&x, &y)| Circle::new((x, y), 3, BLACK.filled())),
            )
            .map_err(plot_err)?;
        let curve = (0..=200).map(|i| {
            let x = 1.0 + 4.0 * i as f64 / 200.0;
            (x, fit.fit.poly.eval(x))
        });
        chart.draw_series(LineSeries::new(curve, RED.stroke_width(2))).map_err(plot_err)?;
        root.present().map_err(plot_err)?;
    }
    save(svg, path)
}

pub fn plot_boxplots(boxes: &DifferenceBoxplots, path: &Path) -> Result<()> {
    let mut svg = String::new();
    {
        let root = SVGBackend::with_string(&mut svg, SIZE).into_drawing_area();
        root.fill(&WHITE).map_err(plot_err)?;
        let n = boxes.rows.len().max(1) as f64;
        let lo = boxes.rows.iter().map(|r| r.whisker_lo).fold(-1.0, f64::min);
        let hi = boxes.rows.iter().map(|r| r.whisker_hi).fold(1.0, f64::max);
        let mut chart = ChartBuilder::on(&root)
            .margin(10)
            .x_label_area_size(30)
            .y_label_area_size(40)
            .build_cartesian_2d(0.0..n, lo - 0.1..hi + 0.1)
            .map_err(plot_err)?;
        chart.configure_mesh().disable_mesh().disable_x_axis().draw().map_err(plot_err)?;
        for (i, r) in boxes.rows.iter().enumerate() {
            let c = i as f64 + 0.5;
            let style = BLACK.stroke_width(1);
            chart
                .draw_series([
                    Rectangle::new([(c - 0.3, r.q1), (c + 0.3, r.q3)], style),
                    Rectangle::new([(c - 0.3, r.median), (c + 0.3, r.median)], RED.stroke_width(2)),
                ])
                .map_err(plot_err)?;
            chart
                .draw_series([
                    PathElement::new(vec![(c, r.q3), (c, r.whisker_hi)], style),
                    PathElement::new(vec![(c, r.q1), (c, r.whisker_lo)], style),
                ])
                .map_err(plot_err)?;
        }
        root.present().map_err(plot_err)?;
    }
    save(svg, path)
}
