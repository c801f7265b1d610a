//! Fiber foot pictures: arc length against colatitude about the fiber axis,
//! and an azimuthal equal-area view of the fiber sphere.

use std::fmt::Write;

use pants_core::matching::{fiber_axis, FootAtlas};

#[derive(Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Plain,
    Target,
    Preimage,
}

impl Role {
    fn color(self) -> &'static str {
        match self {
            Role::Plain => "#666666",
            Role::Target => "#c0392b",
            Role::Preimage => "#2471a3",
        }
    }
}

const W: f64 = 900.0;
const H: f64 = 420.0;
const PAD: f64 = 40.0;

pub fn fiber_plot(atlas: &FootAtlas, roles: &[Role], title: &str) -> String {
    let g = &atlas.gamma0;
    let axis = fiber_axis(g);
    let m = axis.len();
    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{PAD}" y="22" font-size="14">{}</text>"#, escape(title));
    // left panel
    let (x0, y0, pw, ph) = (PAD, PAD, 500.0, H - 2.0 * PAD - 10.0);
    let _ = writeln!(s, r#"<rect x="{x0}" y="{y0}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">s (0 to {:.3})</text>"#, x0 + pw / 2.0, y0 + ph + 18.0, g.length);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" transform="rotate(-90 {} {})" text-anchor="middle">colatitude (0 to pi)</text>"#,
        x0 - 12.0,
        y0 + ph / 2.0,
        x0 - 12.0,
        y0 + ph / 2.0
    );
    // right panel
    let (cx, cy, rad) = (x0 + pw + 40.0 + 150.0, y0 + ph / 2.0, 150.0);
    let _ = writeln!(s, r#"<circle cx="{cx}" cy="{cy}" r="{rad}" fill="none" stroke="black"/>"#);
    let _ = writeln!(s, r##"<circle cx="{cx}" cy="{cy}" r="{:.2}" fill="none" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##, rad * std::f64::consts::FRAC_1_SQRT_2);
    let _ = writeln!(s, r#"<text x="{cx}" y="{}" text-anchor="middle">fiber sphere, equal-area about the axis</text>"#, y0 + ph + 18.0);
    // plain feet first so highlighted ones stay visible
    let mut order: Vec<usize> = (0..atlas.len()).collect();
    order.sort_by_key(|&i| roles.get(i).copied().unwrap_or(Role::Plain) != Role::Plain);
    for i in order {
        let foot = &atlas.entries[i].foot;
        let role = roles.get(i).copied().unwrap_or(Role::Plain);
        let c = axis.dot(&foot.w).clamp(-1.0, 1.0);
        let theta = c.acos();
        let px = x0 + pw * (foot.s / g.length);
        let py = y0 + ph * (theta / std::f64::consts::PI);
        let _ = writeln!(s, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{}"/>"#, role.color());
        // azimuth from the first two coordinates (a line for circle fibers)
        let phi = if m >= 2 { foot.w[1].atan2(foot.w[0]) } else { 0.0 };
        let rr = rad * (theta / 2.0).sin();
        let (qx, qy) = (cx + rr * phi.cos(), cy - rr * phi.sin());
        let _ = writeln!(s, r#"<circle cx="{qx:.2}" cy="{qy:.2}" r="2.5" fill="{}"/>"#, role.color());
    }
    let legend = [(Role::Plain, "foot"), (Role::Target, "certificate target"), (Role::Preimage, "preimage")];
    for (k, (r, label)) in legend.iter().enumerate() {
        let (x, y) = (W - 430.0 + 140.0 * k as f64, 22.0);
        let _ = writeln!(s, r#"<circle cx="{x}" cy="{}" r="4" fill="{}"/><text x="{}" y="{y}">{label}</text>"#, y - 4.0, r.color(), x + 8.0);
    }
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
