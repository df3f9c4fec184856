//! Triangulated half-translation surfaces in period coordinates: the data
//! model, validation, area, the Teichmüller flow action and the JSON format.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::scalar::{Coord, Mode, Rational, AXIS_EPS};

pub type EdgeId = usize;

/// One side of a triangle: an edge together with the sign of its stored
/// period as seen from this triangle (counterclockwise traversal).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Slot {
    pub edge: EdgeId,
    pub sign: i8,
}

impl Slot {
    pub fn new(edge: EdgeId, sign: i8) -> Self {
        Slot { edge, sign }
    }

    pub fn negated(self) -> Self {
        Slot {
            edge: self.edge,
            sign: -self.sign,
        }
    }

    fn times(self, factor: i8) -> Self {
        Slot {
            edge: self.edge,
            sign: self.sign * factor,
        }
    }
}

/// Period of a saddle connection: width `w` (real part) and height `h`.
#[derive(Clone, Debug, PartialEq)]
pub struct Period<F> {
    pub w: F,
    pub h: F,
}

impl<F: Coord> Period<F> {
    pub fn new(w: F, h: F) -> Self {
        Period { w, h }
    }

    pub fn signed(&self, sign: i8) -> Self {
        if sign < 0 {
            Period::new(-self.w.clone(), -self.h.clone())
        } else {
            self.clone()
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Period::new(
            self.w.clone() + other.w.clone(),
            self.h.clone() + other.h.clone(),
        )
    }

    pub fn sub(&self, other: &Self) -> Self {
        Period::new(
            self.w.clone() - other.w.clone(),
            self.h.clone() - other.h.clone(),
        )
    }

    pub fn cross(&self, other: &Self) -> F {
        self.w.clone() * other.h.clone() - self.h.clone() * other.w.clone()
    }

    pub fn to_f64(&self) -> (f64, f64) {
        (self.w.to_f(), self.h.to_f())
    }
}

/// Combinatorics of a triangulation: triangles as counterclockwise slot
/// triples, stable edge labels, and vertex identities that survive flips.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Triangulation {
    labels: Vec<String>,
    triangles: Vec<[Slot; 3]>,
    /// Vertex at corner `i` of each triangle, i.e. the start of slot `i`.
    corner_vertex: Vec<[usize; 3]>,
    marked: Vec<bool>,
}

/// The quadrilateral around an edge, developed into the frame of `t1`.
/// Sides in counterclockwise order are `y1, y2, x1, x2`; the edge runs from
/// vertex `p` to vertex `q`, with `r` opposite in `t1` and `s` opposite in `t2`.
#[derive(Clone, Debug)]
pub(crate) struct Quad {
    pub t1: usize,
    pub t2: usize,
    pub y1: Slot,
    pub y2: Slot,
    pub x1: Slot,
    pub x2: Slot,
    pub p: usize,
    pub q: usize,
    pub r: usize,
    pub s: usize,
}

impl Triangulation {
    /// Builds the combinatorics; `marked_corners` names vertices by a
    /// (triangle, corner) pair. Edge multiplicities are not checked here.
    pub fn new(
        labels: Vec<String>,
        triangles: Vec<[Slot; 3]>,
        marked_corners: &[(usize, usize)],
    ) -> Result<Self> {
        for (t, tri) in triangles.iter().enumerate() {
            for slot in tri {
                if slot.edge >= labels.len() {
                    return Err(Error::Semantic(format!("triangle {t} uses unknown edge")));
                }
                if slot.sign != 1 && slot.sign != -1 {
                    return Err(Error::Semantic(format!(
                        "triangle {t} has a sign other than ±1"
                    )));
                }
            }
        }
        let (corner_vertex, count) = vertex_classes(&triangles, labels.len());
        let mut marked = vec![false; count];
        for &(t, c) in marked_corners {
            if t >= triangles.len() || c >= 3 {
                return Err(Error::Semantic(format!(
                    "marked vertex ({t},{c}) out of range"
                )));
            }
            marked[corner_vertex[t][c]] = true;
        }
        Ok(Triangulation {
            labels,
            triangles,
            corner_vertex,
            marked,
        })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label(&self, e: EdgeId) -> &str {
        &self.labels[e]
    }

    pub fn edge_id(&self, label: &str) -> Option<EdgeId> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn edge_count(&self) -> usize {
        self.labels.len()
    }

    pub fn triangles(&self) -> &[[Slot; 3]] {
        &self.triangles
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.marked.len()
    }

    pub fn corner_vertex(&self, t: usize, corner: usize) -> usize {
        self.corner_vertex[t][corner]
    }

    pub fn is_marked(&self, v: usize) -> bool {
        self.marked[v]
    }

    pub fn marked_vertices(&self) -> impl Iterator<Item = usize> + '_ {
        self.marked
            .iter()
            .enumerate()
            .filter(|(_, m)| **m)
            .map(|(v, _)| v)
    }

    /// Every (triangle, position) where edge `e` occurs.
    pub fn occurrences(&self, e: EdgeId) -> Vec<(usize, usize)> {
        self.triangles
            .iter()
            .enumerate()
            .flat_map(|(t, tri)| {
                tri.iter()
                    .enumerate()
                    .filter(move |(_, s)| s.edge == e)
                    .map(move |(i, _)| (t, i))
            })
            .collect()
    }

    /// Triangle and position of both occurrences, or an error when the edge
    /// is not shared by two distinct triangles.
    pub(crate) fn pair(&self, e: EdgeId) -> Result<[(usize, usize); 2]> {
        let occ = self.occurrences(e);
        if occ.len() != 2 {
            return Err(Error::Semantic(format!(
                "edge {} used {} times",
                self.labels[e],
                occ.len()
            )));
        }
        if occ[0].0 == occ[1].0 {
            return Err(Error::NotFlippable(self.labels[e].clone()));
        }
        Ok([occ[0], occ[1]])
    }

    /// The quadrilateral around `e` with `first` (0 or 1) choosing which
    /// occurrence plays the role of `t1`.
    pub(crate) fn quad(&self, e: EdgeId, first: usize) -> Result<Quad> {
        let pair = self.pair(e)?;
        let (t1, i1) = pair[first];
        let (t2, i2) = pair[1 - first];
        let s1 = self.triangles[t1][i1].sign;
        let s2 = self.triangles[t2][i2].sign;
        // Rotating t2 by π when the gluing is a half-translation.
        let rho = -s1 * s2;
        let tri1 = self.triangles[t1];
        let tri2 = self.triangles[t2];
        Ok(Quad {
            t1,
            t2,
            x1: tri1[(i1 + 1) % 3],
            x2: tri1[(i1 + 2) % 3],
            y1: tri2[(i2 + 1) % 3].times(rho),
            y2: tri2[(i2 + 2) % 3].times(rho),
            p: self.corner_vertex[t1][i1],
            q: self.corner_vertex[t1][(i1 + 1) % 3],
            r: self.corner_vertex[t1][(i1 + 2) % 3],
            s: self.corner_vertex[t2][(i2 + 2) % 3],
        })
    }

    /// Replaces the diagonal of `quad` by the other one, keeping label `e`.
    /// The new edge enters the first new triangle with sign `new_sign`.
    pub(crate) fn apply_flip(&mut self, quad: &Quad, e: EdgeId, new_sign: i8) {
        let f = Slot::new(e, new_sign);
        self.triangles[quad.t1] = [f, quad.x2, quad.y1];
        self.corner_vertex[quad.t1] = [quad.s, quad.r, quad.p];
        self.triangles[quad.t2] = [f.negated(), quad.y2, quad.x1];
        self.corner_vertex[quad.t2] = [quad.r, quad.s, quad.q];
    }

    /// Same triangulation with edge labels renamed through `rename`.
    pub fn relabeled(&self, rename: impl Fn(&str) -> String) -> Self {
        let mut out = self.clone();
        out.labels = self.labels.iter().map(|l| rename(l)).collect();
        out
    }
}

/// Union-find on corners: the start of one occurrence of an edge is glued to
/// the end of the other occurrence, whatever the gluing sign.
fn vertex_classes(triangles: &[[Slot; 3]], edges: usize) -> (Vec<[usize; 3]>, usize) {
    let n = triangles.len() * 3;
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut occ: Vec<Vec<(usize, usize)>> = vec![Vec::new(); edges];
    for (t, tri) in triangles.iter().enumerate() {
        for (i, s) in tri.iter().enumerate() {
            occ[s.edge].push((t, i));
        }
    }
    for list in &occ {
        for pair in list.windows(2) {
            let (ta, ia) = pair[0];
            let (tb, ib) = pair[1];
            let joins = [
                (3 * ta + ia, 3 * tb + (ib + 1) % 3),
                (3 * ta + (ia + 1) % 3, 3 * tb + ib),
            ];
            for (a, b) in joins {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut ids = BTreeMap::new();
    let mut corner_vertex = vec![[0usize; 3]; triangles.len()];
    for c in 0..n {
        let root = find(&mut parent, c);
        let next = ids.len();
        let id = *ids.entry(root).or_insert(next);
        corner_vertex[c / 3][c % 3] = id;
    }
    (corner_vertex, ids.len())
}

/// A triangulated half-translation surface. Periods are stored at flow time
/// zero; `scale` records the accumulated flow as the factor `e^{2t}` so that
/// exact-mode comparisons never need irrational numbers.
#[derive(Clone, Debug, PartialEq)]
pub struct Surface<F> {
    tri: Triangulation,
    periods: Vec<Period<F>>,
    scale: F,
}

impl<F: Coord> Surface<F> {
    /// Assembles a surface without validating it.
    pub fn new(tri: Triangulation, periods: Vec<Period<F>>) -> Self {
        assert_eq!(tri.edge_count(), periods.len(), "one period per edge");
        Surface {
            tri,
            periods,
            scale: F::one(),
        }
    }

    pub fn with_scale(mut self, scale: F) -> Self {
        self.scale = scale;
        self
    }

    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn periods(&self) -> &[Period<F>] {
        &self.periods
    }

    pub fn period(&self, e: EdgeId) -> &Period<F> {
        &self.periods[e]
    }

    pub fn edge_count(&self) -> usize {
        self.tri.edge_count()
    }

    pub fn label(&self, e: EdgeId) -> &str {
        self.tri.label(e)
    }

    pub fn edge_id(&self, label: &str) -> Result<EdgeId> {
        self.tri
            .edge_id(label)
            .ok_or_else(|| Error::UnknownEdge(label.to_string()))
    }

    /// Flow parameter `e^{2t}` relative to the stored periods.
    pub fn scale(&self) -> &F {
        &self.scale
    }

    pub fn flow_time(&self) -> f64 {
        0.5 * self.scale.to_f().ln()
    }

    pub fn slot_vector(&self, slot: Slot) -> Period<F> {
        self.periods[slot.edge].signed(slot.sign)
    }

    pub fn triangle_vectors(&self, t: usize) -> [Period<F>; 3] {
        let tri = &self.tri.triangles()[t];
        [
            self.slot_vector(tri[0]),
            self.slot_vector(tri[1]),
            self.slot_vector(tri[2]),
        ]
    }

    /// Teichmüller flow `(w, h) ↦ (e^t w, e^{-t} h)`, kept as a parameter.
    pub fn apply_flow(&self, t: f64) -> Self {
        self.apply_flow_scale(F::from_f((2.0 * t).exp()))
    }

    /// Flow by the time whose factor `e^{2t}` equals `factor`.
    pub fn apply_flow_scale(&self, factor: F) -> Self {
        let mut out = self.clone();
        out.scale = self.scale.clone() * factor;
        out
    }

    /// Period after applying the recorded flow, in floating point.
    pub fn flowed_period(&self, e: EdgeId) -> (f64, f64) {
        let root = self.scale.to_f().sqrt();
        let (w, h) = self.periods[e].to_f64();
        (w * root, h / root)
    }

    pub fn flowed_periods(&self) -> Vec<(f64, f64)> {
        (0..self.edge_count())
            .map(|e| self.flowed_period(e))
            .collect()
    }

    pub fn with_periods(&self, periods: Vec<Period<F>>) -> Self {
        assert_eq!(periods.len(), self.periods.len());
        Surface {
            tri: self.tri.clone(),
            periods,
            scale: self.scale.clone(),
        }
    }

    pub(crate) fn parts_mut(&mut self) -> (&mut Triangulation, &mut Vec<Period<F>>) {
        (&mut self.tri, &mut self.periods)
    }

    /// Floating-point copy with the flow folded into the periods.
    pub fn to_float(&self) -> Surface<f64> {
        let periods = self
            .flowed_periods()
            .into_iter()
            .map(|(w, h)| Period::new(w, h))
            .collect();
        Surface {
            tri: self.tri.clone(),
            periods,
            scale: 1.0,
        }
    }

    pub fn mode(&self) -> Mode {
        F::MODE
    }
}

impl Surface<f64> {
    /// Folds the recorded flow into the stored periods.
    pub fn normalized(&self) -> Self {
        self.to_float()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub rule: &'static str,
    pub location: String,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub violations: Vec<Violation>,
    /// Cone angles in multiples of π, with the number of vertices of each.
    pub angle_census: BTreeMap<u32, usize>,
}

/// Checks every structural invariant of a surface. Never fails: problems are
/// returned as data.
pub fn validate<F: Coord>(s: &Surface<F>) -> ValidationReport {
    let tri = s.triangulation();
    let mut violations = Vec::new();
    for e in 0..tri.edge_count() {
        let n = tri.occurrences(e).len();
        if n != 2 {
            violations.push(Violation {
                rule: "edge-count",
                location: tri.label(e).to_string(),
                detail: format!("used {n} times, expected 2"),
            });
        }
    }
    let mut geometric = true;
    for (t, slots) in tri.triangles().iter().enumerate() {
        if slots[0].edge == slots[1].edge
            || slots[1].edge == slots[2].edge
            || slots[0].edge == slots[2].edge
        {
            violations.push(Violation {
                rule: "distinct-edges",
                location: format!("triangle {t}"),
                detail: "an edge repeats within the triangle".into(),
            });
        }
        let v = s.triangle_vectors(t);
        let sum = v[0].add(&v[1]).add(&v[2]);
        if sum.w.sign_eps(AXIS_EPS).is_some() || sum.h.sign_eps(AXIS_EPS).is_some() {
            geometric = false;
            violations.push(Violation {
                rule: "zero-sum",
                location: format!("triangle {t}"),
                detail: format!("signed periods sum to ({}, {})", sum.w, sum.h),
            });
        }
        if v[0].cross(&v[1]).sign_eps(AXIS_EPS) != Some(1) {
            geometric = false;
            violations.push(Violation {
                rule: "orientation",
                location: format!("triangle {t}"),
                detail: "first two sides are not positively oriented".into(),
            });
        }
    }
    let mut angle_census = BTreeMap::new();
    if geometric && violations.is_empty() {
        for (v, angle) in vertex_angles(s).into_iter().enumerate() {
            let k = (angle / PI).round();
            if (angle - k * PI).abs() > 1e-9 || k < 1.0 {
                violations.push(Violation {
                    rule: "cone-angle",
                    location: format!("vertex {v}"),
                    detail: format!(
                        "total angle {:.12}π is not a positive multiple of π",
                        angle / PI
                    ),
                });
                continue;
            }
            if k == 1.0 && !tri.is_marked(v) {
                violations.push(Violation {
                    rule: "cone-angle",
                    location: format!("vertex {v}"),
                    detail: "angle π at an unmarked vertex".into(),
                });
            }
            *angle_census.entry(k as u32).or_insert(0) += 1;
        }
        let total = s
            .triangulation()
            .triangles()
            .iter()
            .enumerate()
            .fold(F::zero(), |acc, (t, _)| {
                acc + shoelace(&s.triangle_vectors(t))
            });
        if total.sign_eps(AXIS_EPS) != Some(1) {
            violations.push(Violation {
                rule: "area",
                location: "surface".into(),
                detail: "total area is not positive".into(),
            });
        }
    }
    ValidationReport {
        passed: violations.is_empty(),
        violations,
        angle_census,
    }
}

/// Total angle around each vertex, summed from the corners of the triangles.
pub fn vertex_angles<F: Coord>(s: &Surface<F>) -> Vec<f64> {
    let tri = s.triangulation();
    let mut angles = vec![0.0; tri.vertex_count()];
    for t in 0..tri.triangle_count() {
        let v: Vec<(f64, f64)> = s.triangle_vectors(t).iter().map(|p| p.to_f64()).collect();
        for i in 0..3 {
            let out = v[i];
            let back = (-v[(i + 2) % 3].0, -v[(i + 2) % 3].1);
            let cross = out.0 * back.1 - out.1 * back.0;
            let dot = out.0 * back.0 + out.1 * back.1;
            angles[tri.corner_vertex(t, i)] += cross.atan2(dot);
        }
    }
    angles
}

/// Cone angles as multiples of π with their multiplicities.
pub fn angle_census<F: Coord>(s: &Surface<F>) -> BTreeMap<u32, usize> {
    let mut census = BTreeMap::new();
    for a in vertex_angles(s) {
        *census.entry((a / PI).round() as u32).or_insert(0) += 1;
    }
    census
}

/// Half the cross product of the first two sides.
pub fn shoelace<F: Coord>(v: &[Period<F>; 3]) -> F {
    v[0].cross(&v[1]).half()
}

/// Area from absolute widths and heights: with side 3 the widest and side 1
/// the tallest, `w3 h1 - (w1 h1 + w2 h2 + w3 h3) / 2`. Only defined when the
/// widest side is not also the tallest.
pub fn trapezoid_area<F: Coord>(v: &[Period<F>; 3]) -> Option<F> {
    let widths: Vec<F> = v.iter().map(|p| p.w.abs()).collect();
    let heights: Vec<F> = v.iter().map(|p| p.h.abs()).collect();
    let widest = argmax(&widths)?;
    let tallest = argmax(&heights)?;
    if widest == tallest {
        return None;
    }
    let middle = 3 - widest - tallest;
    let (w1, h1) = (&widths[tallest], &heights[tallest]);
    let (w2, h2) = (&widths[middle], &heights[middle]);
    let (w3, h3) = (&widths[widest], &heights[widest]);
    let sum = w1.clone() * h1.clone() + w2.clone() * h2.clone() + w3.clone() * h3.clone();
    Some(w3.clone() * h1.clone() - sum.half())
}

/// Index of the strict maximum, `None` on a tie for the maximum.
fn argmax<F: Coord>(xs: &[F]) -> Option<usize> {
    let mut best = 0;
    for i in 1..xs.len() {
        if xs[i] > xs[best] {
            best = i;
        }
    }
    let ties = xs
        .iter()
        .filter(|x| x.cmp_tol(&xs[best], AXIS_EPS).is_none())
        .count();
    (ties == 1).then_some(best)
}

/// Total area. Each triangle is measured by the shoelace formula and, when
/// the trapezoid formula applies, cross-checked against it.
pub fn area<F: Coord>(s: &Surface<F>) -> Result<F> {
    let mut total = F::zero();
    for t in 0..s.triangulation().triangle_count() {
        let v = s.triangle_vectors(t);
        let a = shoelace(&v);
        if a.sign_eps(AXIS_EPS).is_none() {
            return Err(Error::degenerate(format!("triangle {t} has zero area")));
        }
        if let Some(b) = trapezoid_area(&v) {
            let agree = match F::MODE {
                Mode::Exact => a == b,
                Mode::Float => (a.to_f() - b.to_f()).abs() <= 1e-12 * a.to_f().abs(),
            };
            if !agree {
                return Err(Error::Inconsistent(format!(
                    "triangle {t}: shoelace {a} and trapezoid {b} disagree"
                )));
            }
        }
        total = total + a;
    }
    Ok(total)
}

/// Either coordinate field, as selected by the document's `mode`.
#[derive(Clone, Debug, PartialEq)]
pub enum AnySurface {
    Exact(Surface<Rational>),
    Float(Surface<f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDocument {
    mode: Mode,
    edges: serde_json::Map<String, Value>,
    triangles: Vec<Vec<RawSlot>>,
    #[serde(default)]
    marked_vertices: Vec<[usize; 2]>,
    #[serde(default)]
    flow_scale: Option<Value>,
}

#[derive(Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
struct RawSlot {
    edge: String,
    sign: i8,
}

fn syntax_error(e: serde_json::Error) -> Error {
    Error::Syntax {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn number<F: Coord>(v: &Value, what: &str) -> Result<F> {
    let parsed = match v {
        Value::String(s) => F::parse_str(s),
        Value::Number(n) => F::parse_str(&n.to_string()).or_else(|| n.as_f64().map(F::from_f)),
        _ => None,
    };
    parsed.ok_or_else(|| Error::Semantic(format!("{what}: cannot read number {v}")))
}

/// Reads a surface document without checking the geometric invariants.
pub fn parse_surface_unchecked<F: Coord>(doc: &str) -> Result<Surface<F>> {
    let raw: RawDocument = serde_json::from_str(doc).map_err(syntax_error)?;
    if raw.mode != F::MODE {
        return Err(Error::Semantic(format!(
            "document is in {} mode, expected {}",
            raw.mode,
            F::MODE
        )));
    }
    let mut labels = Vec::new();
    let mut periods = Vec::new();
    for (label, value) in &raw.edges {
        let pair = value
            .as_array()
            .filter(|a| a.len() == 2)
            .ok_or_else(|| Error::Semantic(format!("edge {label}: expected [w, h]")))?;
        labels.push(label.clone());
        periods.push(Period::new(
            number(&pair[0], label)?,
            number(&pair[1], label)?,
        ));
    }
    let mut triangles = Vec::new();
    for (t, raw_tri) in raw.triangles.iter().enumerate() {
        if raw_tri.len() != 3 {
            return Err(Error::Semantic(format!(
                "triangle {t} does not have three sides"
            )));
        }
        let mut slots = [Slot::new(0, 1); 3];
        for (i, rs) in raw_tri.iter().enumerate() {
            let e = labels
                .iter()
                .position(|l| *l == rs.edge)
                .ok_or_else(|| Error::UnknownEdge(rs.edge.clone()))?;
            slots[i] = Slot::new(e, rs.sign);
        }
        triangles.push(slots);
    }
    for (e, label) in labels.iter().enumerate() {
        let uses = triangles.iter().flatten().filter(|s| s.edge == e).count();
        if uses != 2 {
            return Err(Error::Semantic(format!(
                "edge {label} used {uses} times, expected 2"
            )));
        }
    }
    let marked: Vec<(usize, usize)> = raw.marked_vertices.iter().map(|m| (m[0], m[1])).collect();
    let tri = Triangulation::new(labels, triangles, &marked)?;
    let mut s = Surface::new(tri, periods);
    if let Some(v) = &raw.flow_scale {
        s.scale = number(v, "flow_scale")?;
    }
    Ok(s)
}

/// Reads a surface document in the coordinate field `F` and validates it.
pub fn parse_surface_as<F: Coord>(doc: &str) -> Result<Surface<F>> {
    let s = parse_surface_unchecked::<F>(doc)?;
    let report = validate(&s);
    if !report.passed {
        let listing: Vec<String> = report
            .violations
            .iter()
            .map(|v| format!("{} at {}: {}", v.rule, v.location, v.detail))
            .collect();
        return Err(Error::Semantic(listing.join("; ")));
    }
    Ok(s)
}

/// Reads a surface document, choosing the coordinate field from `mode`.
pub fn parse_surface(doc: &str) -> Result<AnySurface> {
    let probe: Value = serde_json::from_str(doc).map_err(syntax_error)?;
    match probe.get("mode").and_then(Value::as_str) {
        Some("exact") => Ok(AnySurface::Exact(parse_surface_as(doc)?)),
        Some("float") => Ok(AnySurface::Float(parse_surface_as(doc)?)),
        _ => Err(Error::Semantic(
            "mode must be \"exact\" or \"float\"".into(),
        )),
    }
}

/// Writes the document format read by [`parse_surface`]. Float surfaces are
/// written with their flow folded into the periods.
pub fn serialize_surface<F: Coord>(s: &Surface<F>) -> String {
    let tri = s.triangulation();
    let mut edges = serde_json::Map::new();
    let fold = F::MODE == Mode::Float && !s.scale.is_one();
    for e in 0..tri.edge_count() {
        let pair = if fold {
            let (w, h) = s.flowed_period(e);
            vec![w.to_json(), h.to_json()]
        } else {
            vec![s.periods[e].w.to_json(), s.periods[e].h.to_json()]
        };
        edges.insert(tri.label(e).to_string(), Value::Array(pair));
    }
    let triangles: Vec<Vec<RawSlot>> = tri
        .triangles()
        .iter()
        .map(|slots| {
            slots
                .iter()
                .map(|sl| RawSlot {
                    edge: tri.label(sl.edge).to_string(),
                    sign: sl.sign,
                })
                .collect()
        })
        .collect();
    let mut marked = Vec::new();
    for v in tri.marked_vertices() {
        'search: for t in 0..tri.triangle_count() {
            for c in 0..3 {
                if tri.corner_vertex(t, c) == v {
                    marked.push([t, c]);
                    break 'search;
                }
            }
        }
    }
    let mut doc = serde_json::Map::new();
    doc.insert("mode".into(), Value::String(F::MODE.to_string()));
    doc.insert("edges".into(), Value::Object(edges));
    doc.insert(
        "triangles".into(),
        serde_json::to_value(triangles).expect("serializable"),
    );
    if !marked.is_empty() {
        doc.insert(
            "marked_vertices".into(),
            serde_json::to_value(marked).expect("serializable"),
        );
    }
    if !fold && !s.scale.is_one() {
        doc.insert("flow_scale".into(), s.scale.to_json());
    }
    serde_json::to_string_pretty(&Value::Object(doc)).expect("serializable")
}

impl AnySurface {
    pub fn mode(&self) -> Mode {
        match self {
            AnySurface::Exact(_) => Mode::Exact,
            AnySurface::Float(_) => Mode::Float,
        }
    }

    pub fn to_float(&self) -> Surface<f64> {
        match self {
            AnySurface::Exact(s) => s.to_float(),
            AnySurface::Float(s) => s.clone(),
        }
    }
}

/// Lifts an exact period pair to the float field.
pub fn period_f64(p: &Period<Rational>) -> Period<f64> {
    Period::new(p.w.to_f(), p.h.to_f())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::rational;

    #[test]
    fn t2_counts_and_census() {
        let s = fixtures::t2();
        let tri = s.triangulation();
        assert_eq!(
            (tri.vertex_count(), tri.edge_count(), tri.triangle_count()),
            (1, 3, 2)
        );
        let report = validate(&s);
        assert!(report.passed, "{:?}", report.violations);
        assert_eq!(report.angle_census, BTreeMap::from([(2, 1)]));
    }

    #[test]
    fn t2_area_both_formulas() {
        let s = fixtures::t2();
        assert_eq!(area(&s).unwrap(), rational(112, 100));
        let v = s.triangle_vectors(0);
        assert_eq!(shoelace(&v), rational(56, 100));
        assert_eq!(trapezoid_area(&v), Some(rational(56, 100)));
    }

    #[test]
    fn zero_sum_violation_reported_on_both_triangles() {
        let s = fixtures::t2();
        let mut periods = s.periods().to_vec();
        periods[2] = Period::new(rational(-6, 10), rational(-12, 10));
        let bad = s.with_periods(periods);
        let report = validate(&bad);
        let hits: Vec<_> = report
            .violations
            .iter()
            .filter(|v| v.rule == "zero-sum")
            .collect();
        assert_eq!(hits.len(), 2);
        assert!(!report.passed);
    }

    #[test]
    fn orientation_violation_on_transposed_triangle() {
        let s = fixtures::t2();
        let tri = s.triangulation();
        let mut triangles = tri.triangles().to_vec();
        triangles[0].swap(0, 1);
        let bad_tri = Triangulation::new(tri.labels().to_vec(), triangles, &[(0, 0)]).unwrap();
        let report = validate(&Surface::new(bad_tri, s.periods().to_vec()));
        assert!(report
            .violations
            .iter()
            .any(|v| v.rule == "orientation" && v.location == "triangle 0"));
    }

    #[test]
    fn tripled_edge_is_a_semantic_error() {
        let doc = r#"{"mode":"exact","edges":{"e1":["1","0"],"e2":["0","1"]},
            "triangles":[[{"edge":"e1","sign":1},{"edge":"e1","sign":1},{"edge":"e1","sign":-1}],
                         [{"edge":"e2","sign":1},{"edge":"e2","sign":-1},{"edge":"e2","sign":1}]]}"#;
        let err = parse_surface(doc).unwrap_err();
        assert!(
            matches!(err, Error::Semantic(ref m) if m.contains("e1 used 3 times")),
            "{err}"
        );
    }

    #[test]
    fn syntax_error_has_position() {
        let err = parse_surface("{\"mode\": \"exact\",\n  \"edges\": [}").unwrap_err();
        assert!(matches!(err, Error::Syntax { line: 2, .. }), "{err}");
    }

    #[test]
    fn flow_by_log_two() {
        let s = fixtures::t2().apply_flow(2f64.ln());
        let (w, h) = s.flowed_period(0);
        assert!((w - 2.0).abs() < 1e-12 && (h - 0.15).abs() < 1e-12);
        assert_eq!(area(&s).unwrap(), rational(112, 100));
        assert_eq!(fixtures::t2().apply_flow(0.0), fixtures::t2());
    }

    #[test]
    fn round_trip_keeps_labels_and_report() {
        for doc in [
            serialize_surface(&fixtures::t2()),
            serialize_surface(&fixtures::pillow()),
        ] {
            let s: Surface<Rational> = parse_surface_as(&doc).unwrap();
            assert_eq!(serialize_surface(&s), doc);
        }
        let gold = fixtures::gold();
        let again: Surface<f64> = parse_surface_as(&serialize_surface(&gold)).unwrap();
        assert_eq!(validate(&again), validate(&gold));
    }

    #[test]
    fn pillow_has_four_marked_poles() {
        let s = fixtures::pillow();
        let report = validate(&s);
        assert!(report.passed, "{:?}", report.violations);
        assert_eq!(report.angle_census, BTreeMap::from([(1, 4)]));
    }
}
