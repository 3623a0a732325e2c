//! SVG figures: arc diagrams of one-dimensional edge samples and lattice
//! distance profiles with their long edges.

use std::fmt::Write as _;

use crate::continuum::{expected_edge_mass, sample_continuum_edges, EdgeSample, Window};
use crate::error::{Error, Result};
use crate::lattice::{distance_profile, sample_lattice_graph, Profile};
use crate::model::{Budget, ModelParams};
use crate::rng::SeedSpec;
use crate::scaling::lattice_distance;
use crate::stats::mean;

const WIDTH: f64 = 1000.0;
const MARGIN: f64 = 20.0;

fn header(out: &mut String, height: f64, repro: bool) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    if !repro {
        let secs = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let _ = writeln!(out, "<!-- generated at unix time {secs} -->");
    }
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">"
    );
}

struct XMap {
    lo: f64,
    span: f64,
}

impl XMap {
    fn new(lo: f64, hi: f64) -> Self {
        XMap {
            lo,
            span: (hi - lo).max(f64::MIN_POSITIVE),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.lo) / self.span * (WIDTH - 2.0 * MARGIN)
    }
}

fn arc(out: &mut String, x1: f64, x2: f64, base: f64, class: &str) {
    let r = (x2 - x1).abs() / 2.0;
    let _ = writeln!(
        out,
        "<path class=\"{class}\" d=\"M {x1:.3} {base:.3} A {r:.3} {r:.3} 0 0 1 {x2:.3} {base:.3}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.3\"/>"
    );
}

/// Semicircle per edge over a horizontal axis spanning the window.
pub fn render_arc_diagram(sample: &EdgeSample, repro: bool) -> Result<String> {
    if sample.dim() != 1 {
        return Err(Error::Domain(format!("arc diagrams need d = 1, got d = {}", sample.dim())));
    }
    let c = sample.window.center[0];
    let m = sample.window.radius;
    let map = XMap::new(c - m, c + m);
    let height = WIDTH / 2.0 + 2.0 * MARGIN;
    let base = height - MARGIN;
    let mut out = String::new();
    header(&mut out, height, repro);
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{:.3}\" y1=\"{base:.3}\" x2=\"{:.3}\" y2=\"{base:.3}\" stroke=\"black\"/>",
        map.px(c - m),
        map.px(c + m)
    );
    for (u, v) in sample.edges() {
        let (a, b) = if u[0] <= v[0] { (u[0], v[0]) } else { (v[0], u[0]) };
        arc(&mut out, map.px(a), map.px(b), base, "edge");
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Landing points of long edges where the profile drops when stepping
/// outward onto them: `D(v) < D(v - sign(v))`.
pub fn profile_dips(profile: &Profile) -> Result<Vec<i64>> {
    let by_offset = profile_line(profile)?;
    let get = |x: i64| by_offset.binary_search_by_key(&x, |p| p.0).ok().map(|i| by_offset[i].1);
    let mut dips: Vec<i64> = profile
        .long_edges
        .iter()
        .flat_map(|(a, b)| [a[0], b[0]])
        .filter(|&v| v != 0)
        .filter(|&v| match (get(v), get(v - v.signum())) {
            (Some(dv), Some(dn)) => dv < dn,
            _ => false,
        })
        .collect();
    dips.sort_unstable();
    dips.dedup();
    Ok(dips)
}

fn profile_line(profile: &Profile) -> Result<Vec<(i64, u32)>> {
    if profile.origin.len() != 1 {
        return Err(Error::Domain("distance profiles are drawn for d = 1 only".into()));
    }
    let mut pts: Vec<(i64, u32)> = profile.points.iter().map(|(o, d)| (o[0], *d)).collect();
    pts.sort_unstable();
    Ok(pts)
}

/// Top panel: distance against offset; bottom panel: long-edge arcs hanging
/// below a shared axis; red markers at dips.
pub fn render_distance_profile(profile: &Profile, repro: bool) -> Result<String> {
    let pts = profile_line(profile)?;
    let dips = profile_dips(profile)?;
    let (lo, hi) = match (pts.first(), pts.last()) {
        (Some(a), Some(b)) => (a.0 as f64, b.0 as f64),
        _ => (-1.0, 1.0),
    };
    let map = XMap::new(lo, hi);
    let top_h = 300.0;
    let arc_h = WIDTH / 2.0;
    let height = top_h + arc_h + 3.0 * MARGIN;
    let axis_y = top_h + 2.0 * MARGIN;
    let dmax = pts.iter().map(|p| p.1).max().unwrap_or(1).max(1) as f64;
    let py = |d: u32| MARGIN + top_h - d as f64 / dmax * top_h;
    let mut out = String::new();
    header(&mut out, height, repro);
    let _ = writeln!(out, "<!-- max distance {dmax} -->");
    out.push_str("<polyline class=\"profile\" fill=\"none\" stroke=\"blue\" stroke-width=\"0.5\" points=\"");
    for (i, (x, d)) in pts.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        let _ = write!(out, "{:.3},{:.3}", map.px(*x as f64), py(*d));
    }
    out.push_str("\"/>\n");
    let _ = writeln!(
        out,
        "<line class=\"axis\" x1=\"{:.3}\" y1=\"{axis_y:.3}\" x2=\"{:.3}\" y2=\"{axis_y:.3}\" stroke=\"black\"/>",
        map.px(lo),
        map.px(hi)
    );
    for (a, b) in &profile.long_edges {
        let (x1, x2) = (map.px(a[0].min(b[0]) as f64), map.px(a[0].max(b[0]) as f64));
        let r = (x2 - x1) / 2.0;
        // sweep flag 0 hangs the arc below the axis
        let _ = writeln!(
            out,
            "<path class=\"edge\" d=\"M {x1:.3} {axis_y:.3} A {r:.3} {r:.3} 0 0 0 {x2:.3} {axis_y:.3}\" fill=\"none\" stroke=\"black\" stroke-width=\"0.3\"/>"
        );
    }
    for &v in &dips {
        let d = pts[pts.binary_search_by_key(&v, |p| p.0).expect("dip on profile")].1;
        let _ = writeln!(
            out,
            "<circle class=\"dip\" cx=\"{:.3}\" cy=\"{:.3}\" r=\"2\" fill=\"red\"/>",
            map.px(v as f64),
            py(d)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// One arc-diagram panel: edges of length in `[1, box]` on a window of
/// side `box` centred at 0, and the expected count.
pub struct ArcPanel {
    pub sample: EdgeSample,
    pub expected: f64,
}

impl ArcPanel {
    /// Count deviation in Poisson standard deviations.
    pub fn z_score(&self) -> f64 {
        (self.sample.len() as f64 - self.expected) / self.expected.sqrt()
    }
}

pub fn arc_panel(params: &ModelParams, box_side: f64, seed: &SeedSpec, budget: &Budget) -> Result<ArcPanel> {
    let w = Window::centered(1, box_side / 2.0)?;
    let expected = expected_edge_mass(params, &w, 1.0, box_side)?;
    let sample = sample_continuum_edges(params, &w, 1.0, seed, budget)?;
    Ok(ArcPanel { sample, expected })
}

/// Scales and replicates used to fit the constant of the distance bound.
pub const FIT_SCALES: [u64; 4] = [64, 128, 256, 512];
pub const FIT_REPLICATES: usize = 16;

pub struct ProfileFigure {
    pub profile: Profile,
    pub dips: Vec<i64>,
    pub max_distance: u32,
    /// `C` fitted on independent graphs as the largest `mean D / (log|x|)^Delta`.
    pub fitted_c: f64,
    /// `C (log range)^Delta`.
    pub bound: f64,
}

/// Lattice profile over `[-range, range]` on a box of side `4 range`.
/// The profile graph uses `seed.child(0)`, the fit uses `seed.child(1)`.
pub fn profile_figure(params: &ModelParams, range: u64, seed: &SeedSpec, budget: &Budget) -> Result<ProfileFigure> {
    if params.d != 1 {
        return Err(Error::Domain("profile figure needs d = 1".into()));
    }
    let g = sample_lattice_graph(params, (4 * range) as usize, &seed.child(0), budget)?;
    let profile = distance_profile(&g, &[0], range)?;
    let dips = profile_dips(&profile)?;
    let max_distance = profile.points.iter().map(|p| p.1).max().unwrap_or(0);
    let delta = params.delta();
    let mut fitted_c = 0.0f64;
    for (i, &x) in FIT_SCALES.iter().enumerate() {
        let ds: Result<Vec<f64>> = (0..FIT_REPLICATES)
            .map(|j| lattice_distance(params, x, &seed.child(1).child(i as u64).child(j as u64), budget).map(f64::from))
            .collect();
        fitted_c = fitted_c.max(mean(&ds?) / (x as f64).ln().powf(delta));
    }
    Ok(ProfileFigure {
        bound: fitted_c * (range as f64).ln().powf(delta),
        profile,
        dips,
        max_distance,
        fitted_c,
    })
}
