//! Plain SVG renderers. Coordinates are printed with two decimals so reruns
//! produce identical files.

use std::f64::consts::PI;
use std::fmt::Write;

use har_audit::confusion::ChordData;
use har_audit::runlength::Bin;

const GREEN: &str = "#2ca02c";
const RED: &str = "#d62728";
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Window-averaged channel values, one point per window, over a green
/// (correct somewhere) / red (IFC) underlay.
pub fn condensed_view(channel_names: &[String], means: &[Vec<f64>], ifc_flags: &[bool]) -> String {
    let (width, height, margin) = (1000.0, 400.0, 40.0);
    let n = means.len();
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let step = plot_w / n.max(1) as f64;
    let mut svg = header(width, height);

    let mut i = 0;
    while i < n {
        let flag = ifc_flags[i];
        let start = i;
        while i < n && ifc_flags[i] == flag {
            i += 1;
        }
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{margin:.2}\" width=\"{:.2}\" height=\"{plot_h:.2}\" fill=\"{}\" fill-opacity=\"0.25\"/>",
            margin + start as f64 * step,
            (i - start) as f64 * step,
            if flag { RED } else { GREEN }
        );
    }

    let (lo, hi) = means
        .iter()
        .flatten()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = if hi > lo { hi - lo } else { 1.0 };
    for (c, name) in channel_names.iter().enumerate() {
        let points: Vec<String> = means
            .iter()
            .enumerate()
            .map(|(w, m)| {
                let x = margin + (w as f64 + 0.5) * step;
                let y = margin + plot_h * (1.0 - (m[c] - lo) / span);
                format!("{x:.2},{y:.2}")
            })
            .collect();
        let colour = PALETTE[c % PALETTE.len()];
        let _ = writeln!(
            svg,
            "<polyline fill=\"none\" stroke=\"{colour}\" stroke-width=\"1\" points=\"{}\"/>",
            points.join(" ")
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" fill=\"{colour}\">{}</text>",
            margin + 80.0 * c as f64,
            margin - 10.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bars of the run-length histogram, one per bin.
pub fn histogram(bins: &[Bin]) -> String {
    let (width, height, margin) = (600.0, 400.0, 40.0);
    let plot_w = width - 2.0 * margin;
    let plot_h = height - 2.0 * margin;
    let max = bins.iter().map(|b| b.count).max().unwrap_or(0).max(1) as f64;
    let slot = plot_w / bins.len().max(1) as f64;
    let mut svg = header(width, height);
    for (i, b) in bins.iter().enumerate() {
        let h = plot_h * b.count as f64 / max;
        let x = margin + i as f64 * slot;
        let label = if b.lower == b.upper {
            b.lower.to_string()
        } else {
            format!("{}-{}", b.lower, b.upper)
        };
        let _ = writeln!(
            svg,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{h:.2}\" fill=\"{RED}\"/>",
            x + 0.1 * slot,
            margin + plot_h - h,
            0.8 * slot
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{label}</text>",
            x + 0.5 * slot,
            height - margin + 15.0
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\">{}</text>",
            x + 0.5 * slot,
            margin + plot_h - h - 4.0,
            b.count
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Classes on a circle, one curved ribbon per (true, confused) edge with
/// stroke width proportional to its weight.
pub fn chord(data: &ChordData) -> String {
    let (size, radius) = (600.0, 220.0);
    let centre = size / 2.0;
    let n = data.classes.len().max(1);
    let pos = |c: usize| {
        let a = 2.0 * PI * c as f64 / n as f64 - PI / 2.0;
        (centre + radius * a.cos(), centre + radius * a.sin(), a)
    };
    let max = data.edges.iter().map(|e| e.weight).max().unwrap_or(0).max(1) as f64;
    let mut svg = header(size, size);
    for e in &data.edges {
        let (x1, y1, _) = pos(e.true_class);
        let (x2, y2, _) = pos(e.confused_class);
        let _ = writeln!(
            svg,
            "<path d=\"M {x1:.2} {y1:.2} Q {centre:.2} {centre:.2} {x2:.2} {y2:.2}\" fill=\"none\" stroke=\"{}\" stroke-opacity=\"0.6\" stroke-width=\"{:.2}\"/>",
            PALETTE[e.true_class % PALETTE.len()],
            1.0 + 11.0 * e.weight as f64 / max
        );
    }
    for (c, name) in data.classes.iter().enumerate() {
        let (x, y, a) = pos(c);
        let _ = writeln!(
            svg,
            "<circle cx=\"{x:.2}\" cy=\"{y:.2}\" r=\"6\" fill=\"{}\"/>",
            PALETTE[c % PALETTE.len()]
        );
        let _ = writeln!(
            svg,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\">{}</text>",
            centre + (radius + 25.0) * a.cos(),
            centre + (radius + 25.0) * a.sin() + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use har_audit::confusion::ChordEdge;

    #[test]
    fn underlay_merges_runs() {
        let svg = condensed_view(
            &["x".into()],
            &[vec![0.0], vec![1.0], vec![2.0], vec![1.0]],
            &[false, true, true, false],
        );
        assert_eq!(svg.matches(RED).count(), 1);
        assert_eq!(svg.matches(GREEN).count(), 2);
        assert_eq!(svg.matches("<polyline").count(), 1);
    }

    #[test]
    fn histogram_bar_per_bin() {
        let bins = vec![
            Bin { lower: 1, upper: 1, count: 3 },
            Bin { lower: 2, upper: 3, count: 0 },
            Bin { lower: 4, upper: 7, count: 1 },
        ];
        let svg = histogram(&bins);
        assert_eq!(svg.matches(&format!("fill=\"{RED}\"")).count(), 3);
        assert!(svg.contains(">4-7<"));
    }

    #[test]
    fn chord_edge_per_pair() {
        let data = ChordData {
            classes: vec!["Walk".into(), "Run".into(), "<Sit>".into()],
            edges: vec![
                ChordEdge { true_class: 0, confused_class: 1, weight: 4 },
                ChordEdge { true_class: 2, confused_class: 0, weight: 1 },
            ],
        };
        let svg = chord(&data);
        assert_eq!(svg.matches("<path").count(), 2);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("&lt;Sit&gt;"));
    }

    #[test]
    fn deterministic() {
        let bins = vec![Bin { lower: 1, upper: 1, count: 2 }];
        assert_eq!(histogram(&bins), histogram(&bins));
    }
}
