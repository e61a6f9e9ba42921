//! Standalone SVG with a log-scale residual panel and a linear PSNR panel.

use std::fmt::Write;

use pnpkit::trace::read_trace;
use pnpkit::Trace;

use crate::commands::Context;
use crate::failure::Failure;

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 420.0;
const PANEL_W: f64 = 380.0;
const PANEL_H: f64 = 300.0;
const TOP: f64 = 50.0;
const LEFTS: [f64; 2] = [70.0, 550.0];
const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

struct Panel {
    title: &'static str,
    series: Vec<Vec<(f64, f64)>>,
}

impl Panel {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let pts = self.series.iter().flatten();
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            return (0.0, 1.0, 0.0, 1.0);
        }
        if x1 <= x0 {
            x1 = x0 + 1.0;
        }
        if y1 <= y0 {
            y0 -= 0.5;
            y1 += 0.5;
        }
        (x0, x1, y0, y1)
    }
}

fn series(trace: &Trace, value: impl Fn(&pnpkit::TraceRow) -> Option<f64>) -> Vec<(f64, f64)> {
    trace
        .rows()
        .iter()
        .filter_map(|r| value(r).filter(|v| v.is_finite()).map(|v| (r.iter as f64, v)))
        .collect()
}

pub fn render(traces: &[(String, Trace)]) -> String {
    let panels = [
        Panel {
            title: "log10 step residual",
            series: traces
                .iter()
                .map(|(_, t)| series(t, |r| (r.step_residual > 0.0).then(|| r.step_residual.log10())))
                .collect(),
        },
        Panel {
            title: "PSNR (dB)",
            series: traces.iter().map(|(_, t)| series(t, |r| Some(r.psnr))).collect(),
        },
    ];
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    for (panel, left) in panels.iter().zip(LEFTS) {
        let (x0, x1, y0, y1) = panel.bounds();
        let sx = |x: f64| left + (x - x0) / (x1 - x0) * PANEL_W;
        let sy = |y: f64| TOP + PANEL_H - (y - y0) / (y1 - y0) * PANEL_H;
        let _ = writeln!(
            svg,
            r#"<rect x="{left}" y="{TOP}" width="{PANEL_W}" height="{PANEL_H}" fill="none" stroke="black"/>"#
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + PANEL_W / 2.0,
            TOP - 12.0,
            panel.title
        );
        let bottom = TOP + PANEL_H;
        let _ = writeln!(svg, r#"<text x="{left}" y="{}">{x0}</text>"#, bottom + 16.0);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{x1}</text>"#,
            left + PANEL_W,
            bottom + 16.0
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#,
            left + PANEL_W / 2.0,
            bottom + 32.0
        );
        let _ = writeln!(svg, r#"<text x="{}" y="{bottom}" text-anchor="end">{y0:.3}</text>"#, left - 6.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{y1:.3}</text>"#, left - 6.0, TOP + 10.0);
        for (i, pts) in panel.series.iter().enumerate() {
            let points: Vec<String> = pts
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
                PALETTE[i % PALETTE.len()],
                points.join(" ")
            );
        }
    }
    for (i, (label, _)) in traces.iter().enumerate() {
        let y = HEIGHT - 12.0 - 14.0 * (traces.len() - 1 - i) as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{y}" fill="{}">{}</text>"#,
            WIDTH - 10.0,
            PALETTE[i % PALETTE.len()],
            escape(label)
        );
    }
    svg = svg.replace(
        &format!(r#"<text x="{}""#, WIDTH - 10.0),
        &format!(r#"<text text-anchor="end" x="{}""#, WIDTH - 10.0),
    );
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn plot(ctx: &Context) -> Result<(), Failure> {
    let spec = ctx
        .cfg
        .plot
        .as_ref()
        .ok_or_else(|| Failure::usage("config needs a plot section"))?;
    if spec.traces.is_empty() {
        return Err(Failure::usage("plot needs at least one trace"));
    }
    if let Some(labels) = &spec.labels {
        if labels.len() != spec.traces.len() {
            return Err(Failure::usage("plot labels must match the traces one to one"));
        }
    }
    let mut traces = Vec::with_capacity(spec.traces.len());
    for (i, path) in spec.traces.iter().enumerate() {
        let trace = read_trace(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))?;
        if trace.is_empty() {
            return Err(Failure::usage(format!("{}: trace has no rows", path.display())));
        }
        let label = match &spec.labels {
            Some(l) => l[i].clone(),
            None => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| format!("trace {i}")),
        };
        traces.push((label, trace));
    }
    let name = spec.output.clone().unwrap_or_else(|| "plot.svg".into());
    let path = ctx.out.write(&name, render(&traces))?;
    println!("wrote {}", path.display());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use pnpkit::TraceRow;

    fn trace(n: usize) -> Trace {
        let mut t = Trace::new();
        for i in 1..=n {
            t.push(TraceRow {
                iter: i,
                objective: f64::NAN,
                step_residual: 1.0 / i as f64,
                fp_residual: f64::NAN,
                psnr: 20.0 + i as f64,
                seconds: f64::NAN,
            });
        }
        t
    }

    #[test]
    fn two_polylines_per_trace() {
        for k in [1, 10] {
            let traces: Vec<_> = (0..k).map(|i| (format!("t{i}"), trace(5))).collect();
            assert_eq!(render(&traces).matches("<polyline").count(), 2 * k);
        }
    }

    #[test]
    fn labels_are_escaped() {
        let svg = render(&[("a<b".into(), trace(3))]);
        assert!(svg.contains("a&lt;b") && !svg.contains("a<b"));
    }
}
