//! SVG rendering of advantage heatmaps.

use std::fmt::Write as _;

use crate::protocols::{Axis, Heatmap, Scale};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 600.0;
const LEFT: f64 = 90.0;
const RIGHT: f64 = 690.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 530.0;

/// Clamp for `log10(ratio)` so infinities and zeros stay drawable.
const LOG_CLAMP: f64 = 12.0;

fn log_ratio(r: f64) -> f64 {
    if r.is_nan() {
        return 0.0;
    }
    if r <= 0.0 {
        return -LOG_CLAMP;
    }
    r.log10().clamp(-LOG_CLAMP, LOG_CLAMP)
}

fn px(axis: &Axis, v: f64) -> f64 {
    LEFT + axis.fraction(v) * (RIGHT - LEFT)
}

fn py(axis: &Axis, v: f64) -> f64 {
    BOTTOM - axis.fraction(v) * (BOTTOM - TOP)
}

/// Gray shades below 1, a light-to-dark blue ramp above.
fn color(l: f64, lo: f64, hi: f64) -> String {
    if l < 0.0 {
        let f = if lo < 0.0 { (l / lo).clamp(0.0, 1.0) } else { 0.0 };
        let g = (200.0 - 110.0 * f).round() as u8;
        format!("#{g:02x}{g:02x}{g:02x}")
    } else {
        let f = if hi > 0.0 { (l / hi).clamp(0.0, 1.0) } else { 0.0 };
        let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
        format!("#{:02x}{:02x}{:02x}", lerp(255.0, 8.0), lerp(247.0, 48.0), lerp(188.0, 107.0))
    }
}

fn ticks(axis: &Axis) -> Vec<f64> {
    match axis.scale {
        Scale::Log => {
            let (a, b) = (axis.min.log10().ceil() as i32, axis.max.log10().floor() as i32);
            (a..=b).map(|k| 10f64.powi(k)).collect()
        }
        Scale::Linear => (0..=4).map(|i| axis.min + (axis.max - axis.min) * i as f64 / 4.0).collect(),
    }
}

fn tick_label(axis: &Axis, v: f64) -> String {
    match axis.scale {
        Scale::Log => format!("1e{}", v.log10().round() as i32),
        Scale::Linear => format!("{v:.3}"),
    }
}

/// Edges in cell `(i, j)` crossed by the zero level, as point pairs.
fn contour_segments(map: &Heatmap, z: &[f64]) -> Vec<[(f64, f64); 2]> {
    let (nx, ny) = (map.nx(), map.ny());
    let xs: Vec<f64> = (0..nx).map(|i| px(&map.grid.x_axis, map.at(i, 0).x)).collect();
    let ys: Vec<f64> = (0..ny).map(|j| py(&map.grid.y_axis, map.at(0, j).y)).collect();
    let at = |i: usize, j: usize| z[j * nx + i];
    let cross = |(x0, y0, z0): (f64, f64, f64), (x1, y1, z1): (f64, f64, f64)| {
        let f = z0 / (z0 - z1);
        (x0 + f * (x1 - x0), y0 + f * (y1 - y0))
    };
    let mut out = Vec::new();
    for j in 0..ny.saturating_sub(1) {
        for i in 0..nx.saturating_sub(1) {
            // corners counter-clockwise from (i, j)
            let c = [
                (xs[i], ys[j], at(i, j)),
                (xs[i + 1], ys[j], at(i + 1, j)),
                (xs[i + 1], ys[j + 1], at(i + 1, j + 1)),
                (xs[i], ys[j + 1], at(i, j + 1)),
            ];
            let mut pts = Vec::with_capacity(4);
            for k in 0..4 {
                let (a, b) = (c[k], c[(k + 1) % 4]);
                if (a.2 < 0.0) != (b.2 < 0.0) {
                    pts.push(cross(a, b));
                }
            }
            match pts.len() {
                2 => out.push([pts[0], pts[1]]),
                4 => {
                    // saddle: pair edges by the sign of the cell mean
                    let mean = c.iter().map(|p| p.2).sum::<f64>() / 4.0;
                    if (mean < 0.0) == (c[0].2 < 0.0) {
                        out.push([pts[0], pts[1]]);
                        out.push([pts[2], pts[3]]);
                    } else {
                        out.push([pts[0], pts[3]]);
                        out.push([pts[1], pts[2]]);
                    }
                }
                _ => {}
            }
        }
    }
    out
}

/// 800×600 SVG with a log color scale and the ratio = 1 contour.
pub fn heatmap_svg(map: &Heatmap) -> String {
    let gx = &map.grid.x_axis;
    let gy = &map.grid.y_axis;
    let (nx, ny) = (map.nx(), map.ny());
    let z: Vec<f64> = map.cells.iter().map(|c| log_ratio(c.ratio)).collect();
    let lo = z.iter().cloned().fold(0.0, f64::min);
    let hi = z.iter().cloned().fold(0.0, f64::max);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r##"<rect width="{WIDTH}" height="{HEIGHT}" fill="#ffffff"/>"##);

    // cell edges halfway between neighbouring grid points
    let edges = |n: usize, pos: &dyn Fn(usize) -> f64| -> Vec<f64> {
        let mut e = Vec::with_capacity(n + 1);
        e.push(pos(0) - (pos(1) - pos(0)) / 2.0);
        for k in 0..n - 1 {
            e.push((pos(k) + pos(k + 1)) / 2.0);
        }
        e.push(pos(n - 1) + (pos(n - 1) - pos(n - 2)) / 2.0);
        e
    };
    let ex = edges(nx, &|i| px(gx, map.at(i, 0).x));
    let ey = edges(ny, &|j| py(gy, map.at(0, j).y));
    let _ = writeln!(s, r#"<g shape-rendering="crispEdges">"#);
    for j in 0..ny {
        for i in 0..nx {
            let (x0, x1) = (ex[i].max(LEFT), ex[i + 1].min(RIGHT));
            let (y0, y1) = (ey[j + 1].max(TOP), ey[j].min(BOTTOM));
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                x0,
                y0,
                x1 - x0,
                y1 - y0,
                color(z[j * nx + i], lo, hi)
            );
        }
    }
    let _ = writeln!(s, "</g>");

    let mut d = String::new();
    for [a, b] in contour_segments(map, &z) {
        let _ = write!(d, "M{:.2} {:.2}L{:.2} {:.2}", a.0, a.1, b.0, b.1);
    }
    let _ = writeln!(s, r##"<path d="{d}" fill="none" stroke="#000000" stroke-width="2"/>"##);

    let _ = writeln!(
        s,
        r##"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="#000000"/>"##,
        RIGHT - LEFT,
        BOTTOM - TOP
    );
    for v in ticks(gx) {
        let x = px(gx, v);
        let _ = writeln!(s, r##"<line x1="{x:.2}" y1="{BOTTOM}" x2="{x:.2}" y2="{}" stroke="#000000"/>"##, BOTTOM + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{}" text-anchor="middle">{}</text>"#, BOTTOM + 20.0, tick_label(gx, v));
    }
    for v in ticks(gy) {
        let y = py(gy, v);
        let _ = writeln!(s, r##"<line x1="{}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="#000000"/>"##, LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, y + 4.0, tick_label(gy, v));
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        (LEFT + RIGHT) / 2.0,
        BOTTOM + 45.0,
        gx.name
    );
    let _ = writeln!(
        s,
        r#"<text x="25" y="{}" text-anchor="middle" transform="rotate(-90 25 {})">{}</text>"#,
        (TOP + BOTTOM) / 2.0,
        (TOP + BOTTOM) / 2.0,
        gy.name
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="25" text-anchor="middle">F_open/F_closed ({}), black line: ratio = 1</text>"#,
        (LEFT + RIGHT) / 2.0,
        map.parameter
    );

    // color bar
    let (bx, bw) = (720.0, 20.0);
    let steps = 50;
    for k in 0..steps {
        let l = lo + (hi - lo) * (k as f64 + 0.5) / steps as f64;
        let y = BOTTOM - (BOTTOM - TOP) * (k + 1) as f64 / steps as f64;
        let _ = writeln!(
            s,
            r#"<rect x="{bx}" y="{y:.2}" width="{bw}" height="{:.2}" fill="{}"/>"#,
            (BOTTOM - TOP) / steps as f64,
            color(l, lo, hi)
        );
    }
    for (l, label) in [(lo, lo), (0.0, 0.0), (hi, hi)] {
        if hi > lo {
            let y = BOTTOM - (BOTTOM - TOP) * (l - lo) / (hi - lo);
            let _ = writeln!(s, r#"<text x="{}" y="{:.2}">1e{:.1}</text>"#, bx + bw + 5.0, y + 4.0, label);
        }
    }
    let _ = writeln!(s, "</svg>");
    s
}
