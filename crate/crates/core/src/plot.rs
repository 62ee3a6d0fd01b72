//! SVG and CSV renderings of envelopes. Polygon coordinates are written in
//! data units with shortest round-trip formatting, so each `<polygon>` lists
//! exactly the boundary vertices of the JSON output.

use std::fmt::Write;

use crate::geometry::{PqPoint, PqPolygon};

pub struct Layer<'a> {
    pub label: String,
    pub polygon: &'a PqPolygon,
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    mag * if r < 1.5 { 1.0 } else if r < 3.5 { 2.0 } else if r < 7.5 { 5.0 } else { 10.0 }
}

pub fn svg(title: &str, layers: &[Layer], marker: Option<PqPoint>) -> String {
    let mut pts: Vec<PqPoint> = layers.iter().flat_map(|l| l.polygon.vertices().iter().copied()).collect();
    pts.extend(marker);
    let (mut p0, mut p1, mut q0, mut q1) = pts.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), v| (a.min(v.p), b.max(v.p), c.min(v.q), d.max(v.q)),
    );
    if !p0.is_finite() {
        (p0, p1, q0, q1) = (-1.0, 1.0, -1.0, 1.0);
    }
    let pad = |lo: f64, hi: f64| {
        let s = (hi - lo).max(1e-3) * 0.08;
        (lo - s, hi + s)
    };
    let (p0, p1) = pad(p0, p1);
    let (q0, q1) = pad(q0, q1);
    let sx = (W - 2.0 * MARGIN) / (p1 - p0);
    let sy = (H - 2.0 * MARGIN) / (q1 - q0);
    let x = |p: f64| MARGIN + (p - p0) * sx;
    let y = |q: f64| H - MARGIN - (q - q0) * sy;

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - 2.0 * MARGIN,
        H - 2.0 * MARGIN
    );
    for (lo, hi, horizontal) in [(p0, p1, true), (q0, q1, false)] {
        let step = nice_step(hi - lo);
        let mut t = (lo / step).ceil() * step;
        while t <= hi {
            let v = if t.abs() < step * 1e-9 { 0.0 } else { t };
            if horizontal {
                let _ = writeln!(s, r##"<line x1="{0:.2}" y1="{1}" x2="{0:.2}" y2="{2}" stroke="#ddd"/>"##, x(v), MARGIN, H - MARGIN);
                let _ = writeln!(s, r#"<text x="{:.2}" y="{}" text-anchor="middle">{}</text>"#, x(v), H - MARGIN + 16.0, fmt_tick(v));
            } else {
                let _ = writeln!(s, r##"<line x1="{1}" y1="{0:.2}" x2="{2}" y2="{0:.2}" stroke="#ddd"/>"##, y(v), MARGIN, W - MARGIN);
                let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN - 6.0, y(v) + 4.0, fmt_tick(v));
            }
            t += step;
        }
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">P (MW)</text>"#, W / 2.0, H - 18.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">Q (MVAr)</text>"#,
        H / 2.0
    );
    let _ = writeln!(s, r#"<text x="{}" y="30" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));

    let _ = writeln!(s, r#"<g transform="matrix({sx} 0 0 {} {} {})">"#, -sy, MARGIN - p0 * sx, H - MARGIN + q0 * sy);
    for (i, l) in layers.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = l.polygon.vertices().iter().map(|v| format!("{},{}", v.p, v.q)).collect();
        let _ = writeln!(
            s,
            r#"<polygon data-label="{}" points="{}" fill="{c}" fill-opacity="0.12" stroke="{c}" stroke-width="1.5" vector-effect="non-scaling-stroke"/>"#,
            escape(&l.label),
            points.join(" ")
        );
    }
    s.push_str("</g>\n");
    if let Some(m) = marker {
        let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="4" fill="black"><title>dispatch</title></circle>"#, x(m.p), y(m.q));
    }
    for (i, l) in layers.iter().enumerate() {
        let c = PALETTE[i % PALETTE.len()];
        let ly = MARGIN + 14.0 + 14.0 * i as f64;
        let _ = writeln!(s, r#"<rect x="{}" y="{}" width="10" height="10" fill="{c}"/>"#, W - MARGIN - 130.0, ly - 9.0);
        let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, W - MARGIN - 115.0, escape(&l.label));
    }
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// `label,index,p_mw,q_mvar` rows, one per vertex.
pub fn csv(layers: &[Layer]) -> String {
    let mut s = String::from("label,index,p_mw,q_mvar\n");
    for l in layers {
        for (i, v) in l.polygon.vertices().iter().enumerate() {
            let _ = writeln!(s, "{},{i},{},{}", l.label, v.p, v.q);
        }
    }
    s
}

/// Parses the `points` attribute of every `<polygon>` in an SVG document.
pub fn svg_polygons(svg: &str) -> Vec<Vec<PqPoint>> {
    let mut out = Vec::new();
    for chunk in svg.split("<polygon").skip(1) {
        let Some(start) = chunk.find("points=\"") else { continue };
        let rest = &chunk[start + 8..];
        let end = rest.find('"').unwrap_or(rest.len());
        let pts = rest[..end]
            .split_whitespace()
            .filter_map(|pair| {
                let (p, q) = pair.split_once(',')?;
                Some(PqPoint::new(p.parse().ok()?, q.parse().ok()?))
            })
            .collect();
        out.push(pts);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_points_round_trip() {
        let poly = crate::geometry::convex_hull(&[
            PqPoint::new(0.1, 0.2),
            PqPoint::new(1.0 / 3.0, -0.7),
            PqPoint::new(-0.123456789012345, 0.5),
        ])
        .unwrap();
        let doc = svg("t", &[Layer { label: "a".into(), polygon: &poly }], Some(PqPoint::new(0.0, 0.0)));
        assert_eq!(svg_polygons(&doc), vec![poly.vertices().to_vec()]);
        assert!(csv(&[Layer { label: "a".into(), polygon: &poly }]).lines().count() == 4);
    }
}
