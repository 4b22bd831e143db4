//! Self-contained SVG charts rendered from a mutation report.
//!
//! The renderer is deliberately hand-rolled: charts are pure functions of
//! the report, so identical reports produce byte-identical files. Every
//! value axis is the unit interval, which both killing rates and
//! sensitivities live in.

use crate::pipeline::report::{MutationReport, OperatorReport};

const PLOT_TOP: f64 = 40.0;
const PLOT_BOTTOM: f64 = 220.0;
const PLOT_HEIGHT: f64 = PLOT_BOTTOM - PLOT_TOP;
const MARGIN_LEFT: f64 = 56.0;
const GROUP_WIDTH: f64 = 84.0;
const BAR_WIDTH: f64 = 24.0;
const BAR_GAP: f64 = 6.0;
const HEIGHT: f64 = 258.0;

/// One named, colored series of a grouped bar chart.
struct Series {
    name: &'static str,
    color: &'static str,
}

/// A grouped bar chart on a [0, 1] value axis. Groups may omit values
/// (rendered as an empty group, keeping the operator visible).
struct BarChart {
    title: String,
    series: Vec<Series>,
    groups: Vec<(String, Vec<Option<f64>>)>,
}

impl BarChart {
    fn render(&self) -> String {
        let width = MARGIN_LEFT + GROUP_WIDTH * self.groups.len() as f64 + 24.0;
        let mut svg = String::new();
        svg.push_str(&format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{HEIGHT}\" \
             viewBox=\"0 0 {width} {HEIGHT}\">\n"
        ));
        svg.push_str(
            "  <style>text { font-family: monospace; font-size: 11px; fill: #222; }</style>\n",
        );
        svg.push_str(&format!(
            "  <rect width=\"{width}\" height=\"{HEIGHT}\" fill=\"#ffffff\"/>\n"
        ));
        svg.push_str(&format!(
            "  <text x=\"{MARGIN_LEFT}\" y=\"20\" font-size=\"13\">{}</text>\n",
            self.title
        ));

        // Value axis with gridlines every 0.25.
        for i in 0..=4 {
            let value = i as f64 * 0.25;
            let y = PLOT_BOTTOM - value * PLOT_HEIGHT;
            svg.push_str(&format!(
                "  <line x1=\"{MARGIN_LEFT}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" \
                 stroke=\"#dddddd\"/>\n",
                width - 16.0
            ));
            svg.push_str(&format!(
                "  <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{value:.2}</text>\n",
                MARGIN_LEFT - 6.0,
                y + 4.0
            ));
        }
        svg.push_str(&format!(
            "  <line x1=\"{MARGIN_LEFT}\" y1=\"{PLOT_TOP}\" x2=\"{MARGIN_LEFT}\" \
             y2=\"{PLOT_BOTTOM}\" stroke=\"#222222\"/>\n"
        ));
        svg.push_str(&format!(
            "  <line x1=\"{MARGIN_LEFT}\" y1=\"{PLOT_BOTTOM}\" x2=\"{}\" y2=\"{PLOT_BOTTOM}\" \
             stroke=\"#222222\"/>\n",
            width - 16.0
        ));

        // Legend in the top-right corner.
        let mut legend_x = width - 16.0 - 92.0 * self.series.len() as f64;
        for series in &self.series {
            svg.push_str(&format!(
                "  <rect x=\"{legend_x}\" y=\"10\" width=\"10\" height=\"10\" fill=\"{}\"/>\n",
                series.color
            ));
            svg.push_str(&format!(
                "  <text x=\"{}\" y=\"19\">{}</text>\n",
                legend_x + 14.0,
                series.name
            ));
            legend_x += 92.0;
        }

        // One group per operator, bars only where a value exists.
        for (g, (label, values)) in self.groups.iter().enumerate() {
            let group_left = MARGIN_LEFT + g as f64 * GROUP_WIDTH;
            let bars = self.series.len() as f64;
            let bars_width = bars * BAR_WIDTH + (bars - 1.0) * BAR_GAP;
            let bar_left = group_left + (GROUP_WIDTH - bars_width) / 2.0;
            svg.push_str("  <g class=\"bar-group\">\n");
            for (s, value) in values.iter().enumerate() {
                let Some(value) = value else { continue };
                let clamped = value.clamp(0.0, 1.0);
                let bar_height = clamped * PLOT_HEIGHT;
                let x = bar_left + s as f64 * (BAR_WIDTH + BAR_GAP);
                let y = PLOT_BOTTOM - bar_height;
                svg.push_str(&format!(
                    "    <rect x=\"{x}\" y=\"{y}\" width=\"{BAR_WIDTH}\" \
                     height=\"{bar_height}\" fill=\"{}\"/>\n",
                    self.series[s].color
                ));
                svg.push_str(&format!(
                    "    <text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"9\">\
                     {clamped:.2}</text>\n",
                    x + BAR_WIDTH / 2.0,
                    y - 3.0
                ));
            }
            svg.push_str(&format!(
                "    <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{label}</text>\n",
                group_left + GROUP_WIDTH / 2.0,
                PLOT_BOTTOM + 16.0
            ));
            svg.push_str("  </g>\n");
        }

        svg.push_str("</svg>\n");
        svg
    }
}

/// The representative config's weak and strong killing rates, when present.
fn representative_rates(op: &OperatorReport) -> (Option<f64>, Option<f64>) {
    let Some(config) = op.configs.iter().find(|c| c.representative) else {
        return (None, None);
    };
    (
        config.killing_rates.get("weak").map(|r| r.killing_rate),
        config.killing_rates.get("strong").map(|r| r.killing_rate),
    )
}

/// Grouped Weak-vs-Strong mutation score bars, one group per operator.
/// `None` when the report has an empty scope (nothing to plot).
pub fn mutation_score_svg(report: &MutationReport) -> Option<String> {
    if report.empty_scope || report.operators.is_empty() {
        return None;
    }
    let chart = BarChart {
        title: format!(
            "Mutation score per operator ({} / {})",
            report.environment, report.algorithm
        ),
        series: vec![
            Series {
                name: "weak",
                color: "#5b8db8",
            },
            Series {
                name: "strong",
                color: "#c06048",
            },
        ],
        groups: report
            .operators
            .iter()
            .map(|op| {
                let (weak, strong) = representative_rates(op);
                (op.operator.to_string(), vec![weak, strong])
            })
            .collect(),
    };
    Some(chart.render())
}

/// Per-operator sensitivity bars. `None` when the report has an empty scope.
pub fn sensitivity_svg(report: &MutationReport) -> Option<String> {
    if report.empty_scope || report.operators.is_empty() {
        return None;
    }
    let chart = BarChart {
        title: format!(
            "Test-suite sensitivity per operator ({} / {})",
            report.environment, report.algorithm
        ),
        series: vec![Series {
            name: "sensitivity",
            color: "#6a9a58",
        }],
        groups: report
            .operators
            .iter()
            .map(|op| (op.operator.to_string(), vec![op.sensitivity]))
            .collect(),
    };
    Some(chart.render())
}
