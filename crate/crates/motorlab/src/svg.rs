//! Minimal bar charts.

use std::fmt::Write as _;

pub struct Bar {
    pub label: String,
    pub value: f64,
    /// Half-length of the error bar; 0 or non-finite draws none.
    pub err: f64,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Nicely rounded upper axis limit.
fn axis_max(v: f64) -> f64 {
    if !(v > 0.0) {
        return 1.0;
    }
    let mag = 10f64.powf(v.log10().floor());
    for step in [1.0, 2.0, 2.5, 5.0, 10.0] {
        if step * mag >= v {
            return step * mag;
        }
    }
    10.0 * mag
}

/// Vertical bars with error whiskers; missing values (NaN) leave a gap
/// labelled "n/a".
pub fn bar_chart(title: &str, y_label: &str, bars: &[Bar]) -> String {
    let (w, h) = (120.0 + 70.0 * bars.len().max(1) as f64, 360.0);
    let (left, right, top, bottom) = (70.0, 20.0, 40.0, 80.0);
    let plot_h = h - top - bottom;
    let top_value = bars.iter().filter(|b| b.value.is_finite()).map(|b| b.value + if b.err.is_finite() { b.err } else { 0.0 }).fold(0.0, f64::max);
    let y_max = axis_max(top_value);
    let y = |v: f64| top + plot_h * (1.0 - v / y_max);

    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title)).unwrap();
    writeln!(s, r#"<text transform="translate(16,{}) rotate(-90)" text-anchor="middle">{}</text>"#, top + plot_h / 2.0, escape(y_label)).unwrap();
    for k in 0..=4 {
        let v = y_max * k as f64 / 4.0;
        let yy = y(v);
        writeln!(s, r##"<line x1="{left}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/>"##, w - right).unwrap();
        writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, left - 6.0, yy + 4.0, format_tick(v)).unwrap();
    }
    writeln!(s, r#"<line x1="{left}" y1="{top}" x2="{left}" y2="{:.2}" stroke="black"/>"#, top + plot_h).unwrap();
    writeln!(s, r#"<line x1="{left}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black"/>"#, top + plot_h, w - right, top + plot_h).unwrap();
    let slot = (w - left - right) / bars.len().max(1) as f64;
    for (i, b) in bars.iter().enumerate() {
        let cx = left + slot * (i as f64 + 0.5);
        let bw = slot * 0.6;
        if b.value.is_finite() {
            let v = b.value.max(0.0);
            writeln!(s, r##"<rect x="{:.2}" y="{:.2}" width="{bw:.2}" height="{:.2}" fill="#4c72b0"/>"##, cx - bw / 2.0, y(v), y(0.0) - y(v)).unwrap();
            if b.err.is_finite() && b.err > 0.0 {
                let (lo, hi) = (y((v - b.err).max(0.0)), y(v + b.err));
                writeln!(s, r#"<line x1="{cx:.2}" y1="{lo:.2}" x2="{cx:.2}" y2="{hi:.2}" stroke="black"/>"#).unwrap();
                for yy in [lo, hi] {
                    writeln!(s, r#"<line x1="{:.2}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="black"/>"#, cx - 6.0, cx + 6.0).unwrap();
                }
            }
        } else {
            writeln!(s, r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">n/a</text>"#, y(0.0) - 6.0).unwrap();
        }
        writeln!(s, r#"<text transform="translate({cx:.2},{:.2}) rotate(-35)" text-anchor="end">{}</text>"#, top + plot_h + 16.0, escape(&b.label)).unwrap();
    }
    s.push_str("</svg>\n");
    s
}

fn format_tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.1e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn axis_limits() {
        assert_eq!(axis_max(0.87), 1.0);
        assert_eq!(axis_max(13.0), 20.0);
        assert_eq!(axis_max(0.0042), 0.005);
        assert_eq!(axis_max(0.0), 1.0);
    }

    #[test]
    fn chart_is_well_formed() {
        let svg = bar_chart("A & B", "m", &[Bar { label: "x".into(), value: 1.0, err: 0.1 }, Bar { label: "y<".into(), value: f64::NAN, err: 0.0 }]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("A &amp; B") && svg.contains("y&lt;") && svg.contains("n/a"));
        assert_eq!(svg.matches("<rect").count(), 2);
    }
}
