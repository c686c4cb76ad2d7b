//! Minimal SVG heatmaps and line charts for eyeballing outputs.

use std::fmt::Write;

const CELL: f64 = 48.0;
const MARGIN: f64 = 90.0;
const PALETTE: [&str; 5] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// White-to-red ramp over `[0, max]`.
fn shade(v: f64, max: f64) -> String {
    let t = if max > 0.0 { (v / max).clamp(0.0, 1.0) } else { 0.0 };
    let gb = (255.0 * (1.0 - t)).round() as u8;
    format!("#ff{gb:02x}{gb:02x}")
}

/// Rows by columns of shaded cells with labels along both axes.
pub fn heatmap(title: &str, rows: &[String], cols: &[String], values: &[Vec<f64>]) -> String {
    let max = values.iter().flatten().copied().fold(0.0, f64::max);
    let width = MARGIN + CELL * cols.len() as f64 + 10.0;
    let height = MARGIN + CELL * rows.len() as f64 + 10.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"##
    );
    let _ = writeln!(s, r##"<text x="4" y="14" font-size="13">{}</text>"##, escape(title));
    for (j, c) in cols.iter().enumerate() {
        let x = MARGIN + CELL * (j as f64 + 0.5);
        let _ = writeln!(
            s,
            r##"<text x="{x}" y="{}" text-anchor="end" transform="rotate(-45 {x} {})">{}</text>"##,
            MARGIN - 6.0,
            MARGIN - 6.0,
            escape(c)
        );
    }
    for (i, r) in rows.iter().enumerate() {
        let y = MARGIN + CELL * i as f64;
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##,
            MARGIN - 6.0,
            y + CELL / 2.0 + 3.0,
            escape(r)
        );
        for (j, v) in values[i].iter().enumerate() {
            let x = MARGIN + CELL * j as f64;
            let _ = writeln!(
                s,
                r##"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}" stroke="#ccc"><title>{}</title></rect>"##,
                shade(*v, max),
                v
            );
        }
    }
    s.push_str("</svg>\n");
    s
}

/// Labelled values laid out as a near-square grid of tiles.
pub fn tile_map(title: &str, items: &[(String, f64)]) -> String {
    let cols = (items.len() as f64).sqrt().ceil().max(1.0) as usize;
    let max = items.iter().map(|i| i.1).fold(0.0, f64::max);
    let rows = items.len().div_ceil(cols).max(1);
    let size = 72.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="10">"##,
        size * cols as f64 + 20.0,
        size * rows as f64 + 40.0
    );
    let _ = writeln!(s, r##"<text x="4" y="14" font-size="13">{}</text>"##, escape(title));
    for (k, (label, v)) in items.iter().enumerate() {
        let x = 10.0 + size * (k % cols) as f64;
        let y = 30.0 + size * (k / cols) as f64;
        let _ = writeln!(
            s,
            r##"<rect x="{x}" y="{y}" width="{size}" height="{size}" fill="{}" stroke="#999"/>"##,
            shade(*v, max)
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="middle">{}</text><text x="{}" y="{}" text-anchor="middle">{}</text>"##,
            x + size / 2.0,
            y + size / 2.0 - 4.0,
            escape(label),
            x + size / 2.0,
            y + size / 2.0 + 10.0,
            v
        );
    }
    s.push_str("</svg>\n");
    s
}

/// One polyline per series over shared x labels; gaps where a value is
/// missing.
pub fn line_chart(title: &str, x_labels: &[String], series: &[(String, Vec<Option<f64>>)]) -> String {
    let (w, h) = (900.0, 380.0);
    let (left, right, top, bottom) = (60.0, 150.0, 30.0, 40.0);
    let values = series.iter().flat_map(|(_, v)| v.iter().flatten().copied());
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 1.0, lo + 1.0)
    } else {
        (0.0, 1.0)
    };
    let n = x_labels.len().max(2) - 1;
    let px = |i: usize| left + (w - left - right) * i as f64 / n as f64;
    let py = |v: f64| top + (h - top - bottom) * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="10">"##
    );
    let _ = writeln!(s, r##"<text x="4" y="16" font-size="13">{}</text>"##, escape(title));
    let _ = writeln!(
        s,
        r##"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="#999"/>"##,
        w - left - right,
        h - top - bottom
    );
    for (v, anchor) in [(hi, "end"), (lo, "end")] {
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="{anchor}">{:.3}</text>"##,
            left - 4.0,
            py(v) + 3.0,
            v
        );
    }
    if let (Some(first), Some(last)) = (x_labels.first(), x_labels.last()) {
        let _ = writeln!(s, r##"<text x="{left}" y="{}">{}</text>"##, h - bottom + 14.0, escape(first));
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" text-anchor="end">{}</text>"##,
            w - right,
            h - bottom + 14.0,
            escape(last)
        );
    }
    for (k, (label, values)) in series.iter().enumerate() {
        let colour = PALETTE[k % PALETTE.len()];
        let mut path = String::new();
        let mut pen_down = false;
        for (i, v) in values.iter().enumerate() {
            match v {
                Some(v) => {
                    let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, px(i), py(*v));
                    pen_down = true;
                }
                None => pen_down = false,
            }
        }
        let _ = writeln!(
            s,
            r##"<path d="{}" fill="none" stroke="{colour}" stroke-width="1.5"/>"##,
            path.trim_end()
        );
        let _ = writeln!(
            s,
            r##"<text x="{}" y="{}" fill="{colour}">{}</text>"##,
            w - right + 8.0,
            top + 14.0 * (k as f64 + 1.0),
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_chart_breaks_at_gaps() {
        let x: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let svg = line_chart("t", &x, &[("a".into(), vec![Some(1.0), None, Some(2.0), Some(3.0)])]);
        assert_eq!(svg.matches('M').count(), 2);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn heatmap_has_one_cell_per_value() {
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        let svg = heatmap("<C>", &labels, &labels, &[vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert_eq!(svg.matches("<rect").count(), 4);
        assert!(svg.contains("&lt;C&gt;"));
    }
}
