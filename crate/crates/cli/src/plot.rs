//! Minimal standalone SVG output.

use std::fmt::Write;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn header(width: f64, height: f64) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
    )
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Mean flipping curves, one polyline per method, outcome axis fixed to [−1, 1].
pub fn flipping_curves(series: &[(String, Vec<f64>)]) -> String {
    let (w, h) = (640.0, 400.0);
    let (left, right, top, bottom) = (60.0, 150.0, 20.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let steps = series.iter().map(|(_, c)| c.len()).max().unwrap_or(1).max(1);
    let sx = |t: usize| left + pw * (t as f64 - 1.0) / (steps.max(2) - 1) as f64;
    let sy = |v: f64| top + ph * (1.0 - v) / 2.0;

    let mut svg = header(w, h);
    let _ = writeln!(
        svg,
        "<rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"black\"/>"
    );
    for v in [-1.0, 0.0, 1.0] {
        let y = sy(v);
        let _ = writeln!(
            svg,
            "<line x1=\"{left}\" x2=\"{}\" y1=\"{y}\" y2=\"{y}\" stroke=\"#ccc\"/>\
             <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{v}</text>",
            left + pw,
            left - 6.0,
            y + 4.0
        );
    }
    for t in 1..=steps {
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{t}</text>",
            sx(t),
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">features removed</text>\
         <text transform=\"translate(16,{}) rotate(-90)\" text-anchor=\"middle\">mean outcome</text>",
        left + pw / 2.0,
        h - 10.0,
        top + ph / 2.0
    );
    for (s, (name, curve)) in series.iter().enumerate() {
        let color = PALETTE[s % PALETTE.len()];
        let pts: Vec<String> = curve
            .iter()
            .enumerate()
            .map(|(t, v)| format!("{:.2},{:.2}", sx(t + 1), sy(*v)))
            .collect();
        let _ = writeln!(
            svg,
            "<polyline class=\"curve\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"/>",
            pts.join(" ")
        );
        let ly = top + 14.0 + 18.0 * s as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" x2=\"{}\" y1=\"{ly}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\
             <text x=\"{}\" y=\"{}\">{}</text>",
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0,
            escape(name)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Bars with ± error whiskers.
pub fn bars(entries: &[(String, f64, f64)], y_label: &str) -> String {
    let (w, h) = (120.0 + 90.0 * entries.len() as f64, 360.0);
    let (left, top, bottom) = (60.0, 20.0, 50.0);
    let ph = h - top - bottom;
    let hi = entries
        .iter()
        .map(|(_, m, e)| m + e)
        .fold(0.0f64, f64::max)
        .max(1e-9);
    let lo = entries.iter().map(|(_, m, e)| m - e).fold(0.0f64, f64::min);
    let sy = |v: f64| top + ph * (hi - v) / (hi - lo);

    let mut svg = header(w, h);
    let zero = sy(0.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{left}\" x2=\"{}\" y1=\"{zero}\" y2=\"{zero}\" stroke=\"black\"/>\
         <text transform=\"translate(16,{}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        w - 20.0,
        top + ph / 2.0,
        escape(y_label)
    );
    for (b, (name, mean, err)) in entries.iter().enumerate() {
        let x = left + 20.0 + 90.0 * b as f64;
        let (y0, y1) = (sy(mean.max(0.0)), sy(mean.min(0.0)));
        let _ = writeln!(
            svg,
            "<rect class=\"bar\" x=\"{x}\" y=\"{y0:.2}\" width=\"60\" height=\"{:.2}\" fill=\"{}\"/>\
             <line x1=\"{}\" x2=\"{}\" y1=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\
             <text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\
             <text x=\"{}\" y=\"{:.2}\" text-anchor=\"middle\">{mean:.3}</text>",
            y1 - y0,
            PALETTE[b % PALETTE.len()],
            x + 30.0,
            x + 30.0,
            sy(mean + err),
            sy(mean - err),
            x + 30.0,
            h - 20.0,
            escape(name),
            x + 30.0,
            sy(mean + err) - 4.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// Diverging red/blue colour, white at zero; `t` in [−1, 1].
fn diverging(t: f64) -> String {
    let t = t.clamp(-1.0, 1.0);
    let fade = |c: f64| (255.0 - (255.0 - c) * t.abs()).round() as u8;
    let (r, g, b) = if t >= 0.0 {
        (fade(202.0), fade(0.0), fade(32.0))
    } else {
        (fade(5.0), fade(48.0), fade(170.0))
    };
    format!("#{r:02x}{g:02x}{b:02x}")
}

/// Side-by-side heatmaps of row-major `n × n` grids (first row at the top
/// of the window's y range). Each panel is scaled by its own largest
/// magnitude, with the zero level set drawn as white.
pub fn heatmaps(panels: &[(&str, &[f64])], n: usize) -> String {
    let cell = (400.0 / n as f64).max(1.0);
    let side = cell * n as f64;
    let gap = 30.0;
    let w = gap + (side + gap) * panels.len() as f64;
    let h = side + 60.0;
    let mut svg = header(w, h);
    for (p, (title, values)) in panels.iter().enumerate() {
        let x0 = gap + (side + gap) * p as f64;
        let y0 = 30.0;
        let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"20\" text-anchor=\"middle\">{}</text>",
            x0 + side / 2.0,
            escape(title)
        );
        for row in 0..n {
            for col in 0..n {
                let v = values[row * n + col];
                let _ = write!(
                    svg,
                    "<rect class=\"px\" x=\"{:.2}\" y=\"{:.2}\" width=\"{cell:.2}\" height=\"{cell:.2}\" fill=\"{}\"/>",
                    x0 + cell * col as f64,
                    y0 + cell * (n - 1 - row) as f64,
                    diverging(v / scale)
                );
            }
            svg.push('\n');
        }
    }
    svg.push_str("</svg>\n");
    svg
}
