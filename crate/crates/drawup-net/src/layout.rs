//! Circular bow-tie visualization: SCC nodes inside the unit disc at radius
//! 1 − b (more impacting ⇒ closer to the centre), IN and OUT nodes stacked on
//! dedicated arcs outside the disc, edges drawn as quadratic curves bowed
//! toward the origin and colored by their region class.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::bowtie::{BowtieAssignment, Region};
use crate::centrality::CentralityProfile;
use crate::error::{Error, Result};
use crate::graph::Edge;

/// Arc occupied by OUT glyphs (radians).
pub const OUT_ARC: (f64, f64) = (PI / 2.0, 5.0 * PI / 8.0);
/// Arc occupied by IN glyphs (radians).
pub const IN_ARC: (f64, f64) = (3.0 * PI / 2.0, 13.0 * PI / 8.0);
/// Radial offset of the innermost IN/OUT ring.
pub const RING_OFFSET: f64 = 1.1;

/// Placement options. Glyph sizes are monotone in the impacting centrality
/// unless a node-attribute table (debt, leverage, ...) is supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutOptions {
    /// IN/OUT nodes per concentric ring.
    pub ring_capacity: usize,
    /// Radial step between rings.
    pub ring_step: f64,
    pub glyph_min_radius: f64,
    pub glyph_max_radius: f64,
    /// Optional `entity -> attribute` sizing table.
    #[serde(skip)]
    pub size_attribute: Option<BTreeMap<String, f64>>,
}

impl Default for LayoutOptions {
    fn default() -> Self {
        LayoutOptions {
            ring_capacity: 8,
            ring_step: 0.15,
            glyph_min_radius: 0.012,
            glyph_max_radius: 0.05,
            size_attribute: None,
        }
    }
}

/// A positioned node glyph in unit-circle coordinates (y up; the SVG writer
/// flips the axis for display).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeGlyph {
    pub entity_id: String,
    pub x: f64,
    pub y: f64,
    pub radius: f64,
    /// Scalar mapped onto the color ramp (the impacting centrality).
    pub color_value: f64,
    pub region: Region,
}

fn polar(radius: f64, angle: f64) -> (f64, f64) {
    (radius * angle.cos(), radius * angle.sin())
}

/// Deterministic placement:
/// SCC glyphs sit at radius 1 − b, angles evenly spaced over [0, 2π) in order
/// of descending b (ties by entity id); IN/OUT glyphs are stacked on their
/// arcs at offset 1.1 plus `ring_step` per full ring.
pub fn place_nodes(
    assignment: &BowtieAssignment,
    profiles: &[CentralityProfile],
    nodes: &[String],
    opts: &LayoutOptions,
) -> Result<Vec<NodeGlyph>> {
    if assignment.regions.len() != nodes.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} regions for {} nodes",
            assignment.regions.len(),
            nodes.len()
        )));
    }
    let by_id: BTreeMap<&str, &CentralityProfile> = profiles
        .iter()
        .map(|p| (p.entity_id.as_str(), p))
        .collect();
    let b_of = |entity: &str| -> Result<f64> {
        by_id
            .get(entity)
            .map(|p| p.b)
            .ok_or_else(|| Error::MissingCentrality(entity.to_string()))
    };

    // (region, entity index) buckets ordered by descending b then entity id
    let mut order: Vec<(usize, f64)> = Vec::with_capacity(nodes.len());
    for (i, entity) in nodes.iter().enumerate() {
        let b = if assignment.regions[i] == Region::Disconnected {
            0.0
        } else {
            b_of(entity)?
        };
        order.push((i, b));
    }
    let bucket = |region: Region| -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = order
            .iter()
            .copied()
            .filter(|&(i, _)| assignment.regions[i] == region)
            .collect();
        v.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| nodes[a.0].cmp(&nodes[b.0]))
        });
        v
    };

    let scc = bucket(Region::Scc);
    let ins = bucket(Region::In);
    let outs = bucket(Region::Out);
    let disconnected = bucket(Region::Disconnected);

    let attr_max = opts.size_attribute.as_ref().and_then(|attrs| {
        attrs
            .values()
            .copied()
            .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v))))
    });
    let glyph_radius = |entity: &str, b: f64| -> f64 {
        let scale = match (&opts.size_attribute, attr_max) {
            (Some(attrs), Some(max)) if max > 0.0 => {
                attrs.get(entity).copied().unwrap_or(0.0) / max
            }
            _ => b,
        };
        opts.glyph_min_radius + (opts.glyph_max_radius - opts.glyph_min_radius) * scale
    };

    let mut glyphs = Vec::with_capacity(nodes.len());
    let n_scc = scc.len();
    for (k, &(i, b)) in scc.iter().enumerate() {
        let angle = 2.0 * PI * k as f64 / n_scc as f64;
        let (x, y) = polar(1.0 - b, angle);
        glyphs.push(NodeGlyph {
            entity_id: nodes[i].clone(),
            x,
            y,
            radius: glyph_radius(&nodes[i], b),
            color_value: b,
            region: Region::Scc,
        });
    }

    let mut place_arc = |members: &[(usize, f64)], arc: (f64, f64), region: Region| {
        for (k, &(i, b)) in members.iter().enumerate() {
            let ring = k / opts.ring_capacity;
            let slot = k % opts.ring_capacity;
            let in_ring = (members.len() - ring * opts.ring_capacity).min(opts.ring_capacity);
            let angle = if in_ring <= 1 {
                (arc.0 + arc.1) / 2.0
            } else {
                arc.0 + (arc.1 - arc.0) * slot as f64 / (in_ring - 1) as f64
            };
            let (x, y) = polar(RING_OFFSET + opts.ring_step * ring as f64, angle);
            glyphs.push(NodeGlyph {
                entity_id: nodes[i].clone(),
                x,
                y,
                radius: glyph_radius(&nodes[i], b),
                color_value: b,
                region,
            });
        }
    };
    place_arc(&outs, OUT_ARC, Region::Out);
    place_arc(&ins, IN_ARC, Region::In);

    // disconnected nodes line up along the outer left edge, out of the way
    for (k, &(i, b)) in disconnected.iter().enumerate() {
        let ring = k / opts.ring_capacity;
        let slot = k % opts.ring_capacity;
        let angle = PI - 0.15 + 0.3 * slot as f64 / opts.ring_capacity.max(1) as f64;
        let (x, y) = polar(RING_OFFSET + 0.3 + opts.ring_step * ring as f64, angle);
        glyphs.push(NodeGlyph {
            entity_id: nodes[i].clone(),
            x,
            y,
            radius: glyph_radius(&nodes[i], b),
            color_value: b,
            region: Region::Disconnected,
        });
    }

    Ok(glyphs)
}

/// Colors and canvas settings for the SVG writer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvgStyle {
    /// IN -> SCC edges (bright blue by default).
    pub in_scc_color: String,
    /// SCC -> SCC edges (green by default).
    pub scc_scc_color: String,
    /// SCC -> OUT edges (dull blue-grey by default).
    pub scc_out_color: String,
    /// Any other surviving edge class.
    pub other_edge_color: String,
    /// Color ramp endpoints for node fill, low to high color value.
    pub ramp_low: String,
    pub ramp_high: String,
    pub background: String,
    pub canvas_px: u32,
    /// Half-width of the world window mapped onto the canvas.
    pub world_half_width: f64,
    pub show_labels: bool,
    /// How strongly edges bow toward the origin (0 = straight lines).
    pub bow_factor: f64,
}

impl Default for SvgStyle {
    fn default() -> Self {
        SvgStyle {
            in_scc_color: "#1f6feb".into(),
            scc_scc_color: "#2da44e".into(),
            scc_out_color: "#7d8590".into(),
            other_edge_color: "#c4c9d0".into(),
            ramp_low: "#ffd33d".into(),
            ramp_high: "#d73a49".into(),
            background: "#ffffff".into(),
            canvas_px: 900,
            world_half_width: 1.6,
            show_labels: false,
            bow_factor: 0.55,
        }
    }
}

fn parse_hex(color: &str) -> (u8, u8, u8) {
    let hex = color.trim_start_matches('#');
    if hex.len() == 6 {
        if let (Ok(r), Ok(g), Ok(b)) = (
            u8::from_str_radix(&hex[0..2], 16),
            u8::from_str_radix(&hex[2..4], 16),
            u8::from_str_radix(&hex[4..6], 16),
        ) {
            return (r, g, b);
        }
    }
    (128, 128, 128)
}

fn ramp(style: &SvgStyle, v: f64) -> String {
    let v = v.clamp(0.0, 1.0);
    let (r0, g0, b0) = parse_hex(&style.ramp_low);
    let (r1, g1, b1) = parse_hex(&style.ramp_high);
    let lerp = |a: u8, b: u8| -> u8 { (a as f64 + (b as f64 - a as f64) * v).round() as u8 };
    format!("#{:02x}{:02x}{:02x}", lerp(r0, r1), lerp(g0, g1), lerp(b0, b1))
}

fn edge_color(style: &SvgStyle, from: Region, to: Region) -> &str {
    match (from, to) {
        (Region::In, Region::Scc) => &style.in_scc_color,
        (Region::Scc, Region::Scc) => &style.scc_scc_color,
        (Region::Scc, Region::Out) => &style.scc_out_color,
        _ => &style.other_edge_color,
    }
}

/// Render glyphs and (filtered) edges to a deterministic standalone SVG
/// document. Identical inputs produce byte-identical output.
pub fn render_svg(
    glyphs: &[NodeGlyph],
    edges: &[Edge],
    nodes: &[String],
    style: &SvgStyle,
) -> Result<String> {
    for g in glyphs {
        if !(g.x.is_finite() && g.y.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "glyph `{}` has non-finite coordinates",
                g.entity_id
            )));
        }
    }
    let by_id: BTreeMap<&str, &NodeGlyph> =
        glyphs.iter().map(|g| (g.entity_id.as_str(), g)).collect();

    let size = style.canvas_px as f64;
    let scale = size / (2.0 * style.world_half_width);
    // world y points up, SVG y points down
    let px = |x: f64| (x + style.world_half_width) * scale;
    let py = |y: f64| (style.world_half_width - y) * scale;
    let fmt = |v: f64| format!("{v:.4}");

    let mut svg = String::with_capacity(4096 + 160 * (glyphs.len() + edges.len()));
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{0}\" \
         viewBox=\"0 0 {0} {0}\">\n",
        style.canvas_px
    ));
    svg.push_str(&format!(
        "  <rect width=\"{}\" height=\"{}\" fill=\"{}\"/>\n",
        style.canvas_px, style.canvas_px, style.background
    ));
    // unit circle hosting the SCC
    svg.push_str(&format!(
        "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"none\" stroke=\"#d0d7de\" stroke-width=\"1\"/>\n",
        fmt(px(0.0)),
        fmt(py(0.0)),
        fmt(scale)
    ));

    // edges beneath nodes, in input order (deterministic)
    svg.push_str("  <g fill=\"none\" stroke-width=\"1\" opacity=\"0.55\">\n");
    for e in edges {
        let (Some(src), Some(dst)) = (
            nodes.get(e.source).and_then(|n| by_id.get(n.as_str())),
            nodes.get(e.target).and_then(|n| by_id.get(n.as_str())),
        ) else {
            continue;
        };
        let color = edge_color(style, src.region, dst.region);
        // control point: the midpoint pulled toward the origin
        let (mx, my) = (
            (src.x + dst.x) / 2.0 * style.bow_factor,
            (src.y + dst.y) / 2.0 * style.bow_factor,
        );
        svg.push_str(&format!(
            "    <path d=\"M {} {} Q {} {} {} {}\" stroke=\"{}\"/>\n",
            fmt(px(src.x)),
            fmt(py(src.y)),
            fmt(px(mx)),
            fmt(py(my)),
            fmt(px(dst.x)),
            fmt(py(dst.y)),
            color
        ));
    }
    svg.push_str("  </g>\n");

    svg.push_str("  <g stroke=\"#24292f\" stroke-width=\"0.5\">\n");
    for g in glyphs {
        svg.push_str(&format!(
            "    <circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n",
            fmt(px(g.x)),
            fmt(py(g.y)),
            fmt((g.radius * scale).max(1.5)),
            ramp(style, g.color_value)
        ));
    }
    svg.push_str("  </g>\n");

    if style.show_labels {
        svg.push_str("  <g font-family=\"sans-serif\" font-size=\"9\" fill=\"#24292f\">\n");
        for g in glyphs {
            svg.push_str(&format!(
                "    <text x=\"{}\" y=\"{}\">{}</text>\n",
                fmt(px(g.x) + 4.0),
                fmt(py(g.y) - 4.0),
                xml_escape(&g.entity_id)
            ));
        }
        svg.push_str("  </g>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
