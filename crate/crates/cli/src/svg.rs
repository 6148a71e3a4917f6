//! Deterministic SVG maps: scatter of usage points colored by means,
//! contour overlays per level and an optional NULL heat layer.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use semmap_core::align::NULL_FORM;
use semmap_core::surface::{HeatLayer, KrigSurface, Point};

const SIZE: f64 = 800.0;
const MARGIN: f64 = 40.0;
const PALETTE: [&str; 12] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
    "#bcbd22", "#393b79", "#ad494a", "#637939",
];
const NULL_COLOR: &str = "#7f7f7f";

pub struct MapSpec<'a> {
    pub title: &'a str,
    /// Plain header lines, emitted as an XML comment.
    pub header: &'a str,
    pub points: &'a [Point],
    pub labels: &'a [String],
    pub surfaces: &'a [KrigSurface],
    pub levels: &'a [f64],
    pub heat: Option<&'a HeatLayer>,
}

/// Maps world coordinates onto the canvas with y pointing up.
struct View {
    x0: f64,
    y0: f64,
    scale: f64,
}

impl View {
    fn fit(points: &[Point], surfaces: &[KrigSurface]) -> View {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        let mut take = |p: Point| {
            for a in 0..2 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        };
        points.iter().for_each(|p| take(*p));
        for s in surfaces {
            let [a, b] = s.grid.bbox();
            take(a);
            take(b);
        }
        if !lo[0].is_finite() {
            lo = [0.0, 0.0];
            hi = [1.0, 1.0];
        }
        let span = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-12);
        View {
            x0: lo[0],
            y0: hi[1],
            scale: (SIZE - 2.0 * MARGIN) / span,
        }
    }

    fn x(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) * self.scale
    }

    fn y(&self, y: f64) -> f64 {
        MARGIN + (self.y0 - y) * self.scale
    }
}

/// Fixed three decimals; negative zero prints as zero.
fn num(v: f64) -> String {
    let s = format!("{v:.3}");
    if s == "-0.000" {
        "0.000".into()
    } else {
        s
    }
}

pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// Colors by sorted means label, NULL always grey.
pub fn colors(labels: &[String]) -> BTreeMap<String, &'static str> {
    let mut names: Vec<&String> = labels.iter().collect();
    names.sort();
    names.dedup();
    let mut out = BTreeMap::new();
    let mut next = 0;
    for n in names {
        let c = if n == NULL_FORM {
            NULL_COLOR
        } else {
            next += 1;
            PALETTE[(next - 1) % PALETTE.len()]
        };
        out.insert(n.clone(), c);
    }
    out
}

pub fn render_map(spec: &MapSpec) -> String {
    let view = View::fit(spec.points, spec.surfaces);
    let palette = colors(spec.labels);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{s}" height="{s}" viewBox="0 0 {s} {s}">"#,
        s = SIZE
    );
    let _ = writeln!(out, "<!--\n{}\n-->", spec.header.replace("--", "- -"));
    let _ = writeln!(out, r#"<title>{}</title>"#, escape(spec.title));
    let _ = writeln!(
        out,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );

    if let Some(heat) = spec.heat {
        out.push_str("<g class=\"heat\">\n");
        let denom = heat.doculects.max(1) as f64;
        for (p, &c) in spec.points.iter().zip(&heat.counts) {
            if c == 0 {
                continue;
            }
            let _ = writeln!(
                out,
                r#"<circle cx="{}" cy="{}" r="{}" fill="{NULL_COLOR}" fill-opacity="0.25" data-nulls="{c}"/>"#,
                num(view.x(p[0])),
                num(view.y(p[1])),
                num(2.0 + 10.0 * c as f64 / denom)
            );
        }
        out.push_str("</g>\n");
    }

    // Outer levels first so inner outlines draw on top.
    let mut levels: Vec<f64> = spec.levels.to_vec();
    levels.sort_by(f64::total_cmp);
    out.push_str("<g class=\"contours\" fill-rule=\"evenodd\">\n");
    let mut surfaces: Vec<&KrigSurface> = spec.surfaces.iter().collect();
    surfaces.sort_by(|a, b| a.means.cmp(&b.means));
    for s in surfaces {
        let color = palette.get(&s.means).copied().unwrap_or(NULL_COLOR);
        for &level in &levels {
            let Some(polys) = s.area(level) else { continue };
            if polys.is_empty() {
                continue;
            }
            let mut d = String::new();
            for poly in polys {
                for (k, v) in poly.iter().enumerate() {
                    let _ = write!(
                        d,
                        "{}{} {} ",
                        if k == 0 { "M" } else { "L" },
                        num(view.x(v[0])),
                        num(view.y(v[1]))
                    );
                }
                d.push_str("Z ");
            }
            let _ = writeln!(
                out,
                r#"<path class="contour" data-means="{}" data-level="{level}" d="{}" fill="{color}" fill-opacity="0.06" stroke="{color}" stroke-width="{}"/>"#,
                escape(&s.means),
                d.trim_end(),
                num(0.5 + 2.0 * level)
            );
        }
    }
    out.push_str("</g>\n");

    out.push_str("<g class=\"points\">\n");
    for (p, l) in spec.points.iter().zip(spec.labels) {
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="3" fill="{}" data-means="{}"/>"#,
            num(view.x(p[0])),
            num(view.y(p[1])),
            palette[l],
            escape(l)
        );
    }
    out.push_str("</g>\n");

    out.push_str("<g class=\"legend\" font-family=\"sans-serif\" font-size=\"12\">\n");
    for (i, (name, color)) in palette.iter().enumerate() {
        let y = 20.0 + 16.0 * i as f64;
        let _ = writeln!(
            out,
            r#"<circle cx="{}" cy="{}" r="5" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            num(SIZE - 120.0),
            num(y),
            num(SIZE - 110.0),
            num(y + 4.0),
            escape(name)
        );
    }
    out.push_str("</g>\n</svg>\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use semmap_core::surface::{fit_surface, KrigParams};

    fn demo() -> (Vec<Point>, Vec<String>) {
        let pts: Vec<Point> = (0..20).map(|i| [(i % 5) as f64, (i / 5) as f64]).collect();
        let labels = (0..20)
            .map(|i| {
                if i % 5 < 2 {
                    "a&b".to_string()
                } else {
                    NULL_FORM.to_string()
                }
            })
            .collect();
        (pts, labels)
    }

    #[test]
    fn rendering_is_deterministic_and_escaped() {
        let (pts, labels) = demo();
        let params = KrigParams {
            grid: 30,
            ..KrigParams::default()
        };
        let s = fit_surface(&pts, &labels, "a&b", &params).unwrap();
        let spec = MapSpec {
            title: "x<y",
            header: "semmap test\nconfig-sha256 00",
            points: &pts,
            labels: &labels,
            surfaces: std::slice::from_ref(&s),
            levels: &[0.35, 0.32, 0.29],
            heat: None,
        };
        let a = render_map(&spec);
        assert_eq!(a, render_map(&spec));
        assert!(a.contains("x&lt;y") && a.contains("data-means=\"a&amp;b\""));
        assert!(a.contains("config-sha256 00"));
        assert_eq!(a.matches("<circle").count(), 20 + 2);
        assert_eq!(a.matches("class=\"contour\"").count(), 3);
    }

    #[test]
    fn coordinates_have_three_decimals() {
        let (pts, labels) = demo();
        let spec = MapSpec {
            title: "t",
            header: "",
            points: &pts,
            labels: &labels,
            surfaces: &[],
            levels: &[0.29],
            heat: None,
        };
        let svg = render_map(&spec);
        for cap in svg.split("cx=\"").skip(1) {
            let v = &cap[..cap.find('"').unwrap()];
            assert_eq!(v.split('.').nth(1).map(str::len), Some(3), "{v}");
        }
    }

    #[test]
    fn null_is_grey_and_palette_follows_label_order() {
        let c = colors(&["zo".into(), NULL_FORM.into(), "ab".into(), "zo".into()]);
        assert_eq!(c[NULL_FORM], NULL_COLOR);
        assert_eq!(c["ab"], PALETTE[0]);
        assert_eq!(c["zo"], PALETTE[1]);
    }
}
