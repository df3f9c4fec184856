//! Train tracks dual to veering triangulations: measures, complementary
//! regions, vertex curves, splits, and inessential subgraphs.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polyhedral::extreme_rays;
use crate::scalar::{rational, Coord, Rational, AXIS_EPS};
use crate::surface::{EdgeId, Period, Quad, Surface, Triangulation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Vertical,
    Horizontal,
}

impl Direction {
    /// Signed transverse coordinate and the complementary coordinate of a
    /// period. The horizontal track is the vertical track of the surface
    /// rotated by a quarter turn, `(w, h) ↦ (-h, w)`.
    pub fn coordinates<F: Coord>(self, p: &Period<F>) -> (F, F) {
        match self {
            Direction::Vertical => (p.w.clone(), p.h.clone()),
            Direction::Horizontal => (-p.h.clone(), p.w.clone()),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Direction::Vertical => write!(f, "vertical"),
            Direction::Horizontal => write!(f, "horizontal"),
        }
    }
}

/// Left or right split.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Side {
    L,
    R,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Side::L => write!(f, "L"),
            Side::R => write!(f, "R"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    /// Large at both switches.
    Large,
    Mixed,
    Small,
}

/// A trivalent switch: the large half-branch, then the two small ones in
/// counterclockwise order.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Switch {
    pub large: EdgeId,
    pub small: [EdgeId; 2],
}

/// A branch subset.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Subgraph(pub BTreeSet<EdgeId>);

impl Subgraph {
    pub fn new(edges: impl IntoIterator<Item = EdgeId>) -> Self {
        Subgraph(edges.into_iter().collect())
    }

    pub fn contains(&self, e: EdgeId) -> bool {
        self.0.contains(&e)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = EdgeId> + '_ {
        self.0.iter().copied()
    }
}

/// Train track dual to a triangulation: one switch per triangle and one
/// branch per edge. The track remembers which side of each triangle is large
/// and the sign of the transverse coordinate of each stored edge period,
/// which is all the data needed to split it without geometry.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainTrack {
    tri: Triangulation,
    large_slot: Vec<usize>,
    width_sign: Vec<i8>,
    direction: Direction,
}

/// Transverse weights (widths) and tangential weights (rectangle heights).
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurePair<F> {
    pub transverse: Vec<F>,
    pub tangential: Vec<F>,
}

/// Combinatorics of one split.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitRecord {
    pub edge: EdgeId,
    pub side: Side,
    pub losers: [EdgeId; 2],
    pub winners: [EdgeId; 2],
}

/// Vertical or horizontal track of `s` with its geometric measures, taken
/// from the stored base periods (the flow rescales the two measures by
/// `e^t` and `e^{-t}`).
pub fn dual_track<F: Coord>(
    s: &Surface<F>,
    direction: Direction,
) -> Result<(TrainTrack, MeasurePair<F>)> {
    let tri = s.triangulation().clone();
    let coords: Vec<(F, F)> = s
        .periods()
        .iter()
        .map(|p| direction.coordinates(p))
        .collect();
    let width_sign = coords
        .iter()
        .enumerate()
        .map(|(e, (w, _))| {
            w.sign_eps(AXIS_EPS).ok_or_else(|| {
                Error::degenerate(format!("edge {} has zero {direction} width", s.label(e)))
            })
        })
        .collect::<Result<Vec<i8>>>()?;
    let mut large_slot = Vec::with_capacity(tri.triangle_count());
    for (t, slots) in tri.triangles().iter().enumerate() {
        // The widest side is the one whose traversal width has the odd sign out.
        let signs: Vec<i8> = slots
            .iter()
            .map(|sl| sl.sign * width_sign[sl.edge])
            .collect();
        let large = (0..3).find(|&i| signs.iter().filter(|&&x| x == signs[i]).count() == 1);
        match large {
            Some(i) => large_slot.push(i),
            None => {
                return Err(Error::Inconsistent(format!(
                    "triangle {t} has widths of one sign"
                )))
            }
        }
    }
    let track = TrainTrack {
        tri,
        large_slot,
        width_sign,
        direction,
    };
    let transverse: Vec<F> = coords.iter().map(|(w, _)| w.abs()).collect();
    let heights: Vec<F> = coords.iter().map(|(_, h)| h.abs()).collect();
    let tangential = track.rectangle_heights(&heights);
    Ok((
        track,
        MeasurePair {
            transverse,
            tangential,
        },
    ))
}

impl TrainTrack {
    pub fn triangulation(&self) -> &Triangulation {
        &self.tri
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn branch_count(&self) -> usize {
        self.tri.edge_count()
    }

    pub fn switch_count(&self) -> usize {
        self.tri.triangle_count()
    }

    pub fn label(&self, e: EdgeId) -> &str {
        self.tri.label(e)
    }

    pub fn switch(&self, t: usize) -> Switch {
        let slots = self.tri.triangles()[t];
        let l = self.large_slot[t];
        Switch {
            large: slots[l].edge,
            small: [slots[(l + 1) % 3].edge, slots[(l + 2) % 3].edge],
        }
    }

    pub fn switches(&self) -> Vec<Switch> {
        (0..self.switch_count()).map(|t| self.switch(t)).collect()
    }

    pub fn large_slot(&self, t: usize) -> usize {
        self.large_slot[t]
    }

    pub fn width_signs(&self) -> &[i8] {
        &self.width_sign
    }

    pub fn role(&self, e: EdgeId) -> Role {
        let large = self
            .tri
            .occurrences(e)
            .into_iter()
            .filter(|&(t, i)| self.large_slot[t] == i)
            .count();
        match large {
            0 => Role::Small,
            1 => Role::Mixed,
            _ => Role::Large,
        }
    }

    /// Branches that are large at both of their switches.
    pub fn large_branches(&self) -> Vec<EdgeId> {
        (0..self.branch_count())
            .filter(|&e| self.role(e) == Role::Large)
            .collect()
    }

    /// Switch-condition matrix, one row `1_large - 1_small - 1_small` per switch.
    pub fn switch_rows(&self) -> Vec<Vec<i64>> {
        self.switches()
            .iter()
            .map(|sw| {
                let mut row = vec![0i64; self.branch_count()];
                row[sw.large] += 1;
                row[sw.small[0]] -= 1;
                row[sw.small[1]] -= 1;
                row
            })
            .collect()
    }

    pub fn satisfies_switch_conditions<F: Coord>(&self, weights: &[F]) -> bool {
        self.switches().iter().all(|sw| {
            let diff = weights[sw.large].clone()
                - weights[sw.small[0]].clone()
                - weights[sw.small[1]].clone();
            diff.sign_eps(AXIS_EPS * 10.0).is_none()
        })
    }

    /// Tangential weights from saddle-connection heights: each branch gets
    /// half the sum, over the switches where it is small, of the height of
    /// its small partner; large half-branches contribute nothing.
    pub fn rectangle_heights<F: Coord>(&self, heights: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.branch_count()];
        for sw in self.switches() {
            let [a, b] = sw.small;
            out[a] = out[a].clone() + heights[b].half();
            out[b] = out[b].clone() + heights[a].half();
        }
        out
    }

    fn quad(&self, e: EdgeId) -> Result<Quad> {
        let pair = self.tri.pair(e)?;
        let (t, i) = pair[0];
        let slot_sign = self.tri.triangles()[t][i].sign * self.width_sign[e];
        self.tri.quad(e, if slot_sign > 0 { 0 } else { 1 })
    }

    /// Which side of the split of `e` makes the given branches losers, if any.
    pub fn losers(&self, e: EdgeId, side: Side) -> Result<[EdgeId; 2]> {
        let q = self.quad(e)?;
        Ok(match side {
            Side::L => [q.y1.edge, q.x1.edge],
            Side::R => [q.y2.edge, q.x2.edge],
        })
    }

    /// Splits the large branch `e`. The new branch keeps the label of `e`.
    pub fn split(&self, e: EdgeId, side: Side) -> Result<(TrainTrack, SplitRecord)> {
        if self.role(e) != Role::Large {
            return Err(Error::NotFlippable(format!(
                "branch {} is not large",
                self.label(e)
            )));
        }
        let q = self.quad(e)?;
        let (losers, winners) = match side {
            Side::L => ([q.y1.edge, q.x1.edge], [q.y2.edge, q.x2.edge]),
            Side::R => ([q.y2.edge, q.x2.edge], [q.y1.edge, q.x1.edge]),
        };
        let mut out = self.clone();
        out.tri.apply_flip(&q, e, 1);
        // New triangles are [f, x2, y1] and [-f, y2, x1]; winners become large.
        let new_large = match side {
            Side::L => (1, 1),
            Side::R => (2, 2),
        };
        out.large_slot[q.t1] = new_large.0;
        out.large_slot[q.t2] = new_large.1;
        out.width_sign[e] = if side == Side::L { 1 } else { -1 };
        Ok((
            out,
            SplitRecord {
                edge: e,
                side,
                losers,
                winners,
            },
        ))
    }

    /// The split of `e` compatible with transverse weights `mu`, together
    /// with the new weight of `e`.
    pub fn compatible_side<F: Coord>(&self, e: EdgeId, mu: &[F]) -> Result<(Side, F)> {
        let left = self.losers(e, Side::L)?;
        let rest = mu[e].clone() - mu[left[0]].clone() - mu[left[1]].clone();
        match rest.sign_eps(AXIS_EPS) {
            Some(1) => Ok((Side::L, rest)),
            Some(_) => {
                let right = self.losers(e, Side::R)?;
                let rest = mu[e].clone() - mu[right[0]].clone() - mu[right[1]].clone();
                match rest.sign_eps(AXIS_EPS) {
                    Some(1) => Ok((Side::R, rest)),
                    _ => Err(Error::Inconsistent(format!(
                        "weights incompatible with splitting {}",
                        self.label(e)
                    ))),
                }
            }
            None => Err(Error::degenerate(format!(
                "central split of {}",
                self.label(e)
            ))),
        }
    }

    pub fn relabeled(&self, rename: impl Fn(&str) -> String) -> Self {
        let mut out = self.clone();
        out.tri = self.tri.relabeled(rename);
        out
    }
}

/// Flat holonomy of the closed curve carried with integer weights `c`,
/// traced as a train path through the triangles it crosses. `None` when the
/// weights do not form a single closed curve, or when the curve's linear
/// holonomy is a half turn so that its period is only defined up to sign
/// along the way; in that case the second value bounds the length by
/// the componentwise sum of absolute displacements.
pub fn curve_holonomy<F: Coord>(
    track: &TrainTrack,
    s: &Surface<F>,
    c: &[u64],
) -> Result<CurveLength<F>> {
    let tri = &track.tri;
    let total: u64 = c.iter().sum();
    let Some(start_edge) = (0..c.len()).find(|&e| c[e] > 0) else {
        return Err(Error::Semantic("empty curve".into()));
    };
    let (t0, i0) = tri.occurrences(start_edge)[0];
    let (mut t, mut i, mut pos) = (t0, i0, 0u64);
    let mut frame: i8 = 1;
    let mut sum = Period::new(F::zero(), F::zero());
    let mut abs_sum = Period::new(F::zero(), F::zero());
    let mut steps = 0u64;
    loop {
        let slots = tri.triangles()[t];
        let l = track.large_slot[t];
        let weight = |k: usize| c[slots[k % 3].edge];
        let (cl, cs1, cs2) = (weight(l), weight(l + 1), weight(l + 2));
        let (exit, out_pos) = if i == l {
            if pos < cs2 {
                ((l + 2) % 3, cs2 - 1 - pos)
            } else {
                ((l + 1) % 3, cl - 1 - pos)
            }
        } else if i == (l + 1) % 3 {
            (l, cl - 1 - pos)
        } else {
            (l, cs2 - 1 - pos)
        };
        if cl != cs1 + cs2 {
            return Err(Error::Inconsistent(
                "weights violate a switch condition".into(),
            ));
        }
        let v = s.triangle_vectors(t);
        let corner = |k: usize| match k {
            0 => Period::new(F::zero(), F::zero()),
            1 => v[0].clone(),
            _ => v[0].add(&v[1]),
        };
        let mid = |k: usize| {
            let c0 = corner(k);
            Period::new(c0.w.clone() + v[k].w.half(), c0.h.clone() + v[k].h.half())
        };
        let step = mid(exit).sub(&mid(i)).signed(frame);
        abs_sum = abs_sum.add(&Period::new(step.w.abs(), step.h.abs()));
        sum = sum.add(&step);
        let e = slots[exit].edge;
        let (t2, i2) = tri
            .occurrences(e)
            .into_iter()
            .find(|&o| o != (t, exit))
            .ok_or_else(|| Error::Inconsistent("edge without a partner".into()))?;
        frame *= -slots[exit].sign * tri.triangles()[t2][i2].sign;
        t = t2;
        i = i2;
        pos = c[e] - 1 - out_pos;
        steps += 1;
        if (t, i, pos) == (t0, i0, 0) || steps > total {
            break;
        }
    }
    if steps != total {
        return Ok(CurveLength::NotSimple);
    }
    Ok(if frame == 1 {
        CurveLength::Holonomy(sum)
    } else {
        CurveLength::HalfTurn(abs_sum)
    })
}

#[derive(Clone, Debug, PartialEq)]
pub enum CurveLength<F> {
    Holonomy(Period<F>),
    /// Componentwise bound for a curve whose holonomy is a half turn.
    HalfTurn(Period<F>),
    NotSimple,
}

/// Transverse weights after a split: the split branch loses its losers' weight.
pub fn split_transverse<F: Coord>(mu: &[F], rec: &SplitRecord) -> Vec<F> {
    let mut out = mu.to_vec();
    out[rec.edge] = mu[rec.edge].clone() - mu[rec.losers[0]].clone() - mu[rec.losers[1]].clone();
    out
}

/// Tangential weights after a split: each loser gains the split branch's weight.
pub fn split_tangential<F: Coord>(nu: &[F], rec: &SplitRecord) -> Vec<F> {
    let mut out = nu.to_vec();
    for &b in &rec.losers {
        out[b] = out[b].clone() + nu[rec.edge].clone();
    }
    out
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Region {
    /// Number of cusps on the boundary.
    pub sides: usize,
    pub marked: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct RegionCensus {
    pub regions: Vec<Region>,
}

impl RegionCensus {
    /// Number of complementary regions with each number of cusps.
    pub fn counts(&self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for r in &self.regions {
            *out.entry(r.sides).or_insert(0) += 1;
        }
        out
    }
}

/// Complementary regions of a dual track. Each region surrounds one vertex
/// of the triangulation; walking its boundary passes one corner of every
/// incident triangle, and the corner opposite a switch's large side is a cusp.
pub fn complementary_regions(track: &TrainTrack) -> RegionCensus {
    let tri = &track.tri;
    let mut sides = vec![0usize; tri.vertex_count()];
    for t in 0..tri.triangle_count() {
        let cusp = (track.large_slot[t] + 2) % 3;
        sides[tri.corner_vertex(t, cusp)] += 1;
    }
    let regions = sides
        .into_iter()
        .enumerate()
        .map(|(v, n)| Region {
            sides: n,
            marked: tri.is_marked(v),
        })
        .collect();
    RegionCensus { regions }
}

fn rational_rows(rows: &[Vec<i64>]) -> Vec<Vec<Rational>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| rational(x, 1)).collect())
        .collect()
}

fn identity_rows(n: usize) -> Vec<Vec<Rational>> {
    (0..n)
        .map(|i| (0..n).map(|j| rational((i == j) as i64, 1)).collect())
        .collect()
}

fn to_u64(rays: Vec<Vec<BigInt>>) -> Result<Vec<Vec<u64>>> {
    rays.into_iter()
        .map(|r| {
            r.into_iter()
                .map(|x| {
                    x.to_u64()
                        .ok_or_else(|| Error::Overflow("vertex curve weight".into()))
                })
                .collect()
        })
        .collect()
}

/// Vertex curves: primitive integral extreme rays of the cone of
/// nonnegative weights satisfying every switch condition, sorted.
pub fn vertex_curves(track: &TrainTrack) -> Result<Vec<Vec<u64>>> {
    let eq = rational_rows(&track.switch_rows());
    let n = track.branch_count();
    to_u64(extreme_rays(&eq, &identity_rows(n), n)?)
}

/// Components of the part of the triangulation missed by the subtrack on
/// `kept` branches: all vertices, the edges of deleted branches and the
/// triangles all of whose branches are deleted. Returns, per component,
/// its Euler characteristic and its marked vertices.
fn complement_components(
    track: &TrainTrack,
    kept: &dyn Fn(EdgeId) -> bool,
) -> Vec<(i64, Vec<usize>)> {
    let tri = &track.tri;
    let nv = tri.vertex_count();
    let mut parent: Vec<usize> = (0..nv).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    let mut edge_ends: Vec<Option<(usize, usize)>> = vec![None; tri.edge_count()];
    for t in 0..tri.triangle_count() {
        for (i, sl) in tri.triangles()[t].iter().enumerate() {
            edge_ends[sl.edge] = Some((tri.corner_vertex(t, i), tri.corner_vertex(t, (i + 1) % 3)));
        }
    }
    let mut chi = vec![1i64; nv];
    let deleted_edges: Vec<EdgeId> = (0..tri.edge_count()).filter(|&e| !kept(e)).collect();
    for &e in &deleted_edges {
        if let Some((a, b)) = edge_ends[e] {
            let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
            if ra != rb {
                parent[ra] = rb;
                chi[rb] += chi[ra];
            }
            let r = find(&mut parent, a);
            chi[r] -= 1;
        }
    }
    for t in 0..tri.triangle_count() {
        if tri.triangles()[t].iter().all(|sl| !kept(sl.edge)) {
            let r = find(&mut parent, tri.corner_vertex(t, 0));
            chi[r] += 1;
        }
    }
    let mut comps: BTreeMap<usize, (i64, Vec<usize>)> = BTreeMap::new();
    for v in 0..nv {
        let r = find(&mut parent, v);
        let entry = comps.entry(r).or_insert((chi[r], Vec::new()));
        if tri.is_marked(v) {
            entry.1.push(v);
        }
    }
    comps.into_values().collect()
}

/// Whether every complementary region of the subtrack carried by `support`
/// is a disk or a once-punctured disk.
pub fn is_filling_subtrack(track: &TrainTrack, support: &Subgraph) -> Result<bool> {
    if support.is_empty() {
        return Err(Error::Semantic("empty support".into()));
    }
    let kept = |e: EdgeId| support.contains(e);
    Ok(complement_components(track, &kept)
        .into_iter()
        .all(|(chi, marked)| chi == 1 && marked.len() <= 1))
}

/// The track left after deleting an inessential subgraph, with valence-two
/// switches merged.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReducedTrack {
    /// Each branch as the chain of original branches it merges.
    pub branches: Vec<Vec<EdgeId>>,
    /// Each remaining trivalent switch as (large, small, small) indices into `branches`.
    pub switches: Vec<[usize; 3]>,
    pub regions: RegionCensus,
}

/// Tests the half-branch condition for `h` (a large half-branch lies in `h`
/// only when both small half-branches at its switch do), and that the
/// complement track is filling and recurrent. Returns the reduced track
/// when all conditions hold.
pub fn detect_inessential(
    track: &TrainTrack,
    h: &Subgraph,
) -> Result<(bool, Option<ReducedTrack>)> {
    for sw in track.switches() {
        if h.contains(sw.large) && !(h.contains(sw.small[0]) && h.contains(sw.small[1])) {
            return Ok((false, None));
        }
    }
    let kept = |e: EdgeId| !h.contains(e);
    let n = track.branch_count();
    if (0..n).all(|e| !kept(e)) {
        return Ok((false, None));
    }

    // Switch equations on the kept branches, with deleted ones pinned at zero.
    let mut eq: Vec<Vec<i64>> = Vec::new();
    let mut merges: Vec<(EdgeId, EdgeId)> = Vec::new();
    let mut trivalent: Vec<Switch> = Vec::new();
    for sw in track.switches() {
        let small_kept: Vec<EdgeId> = sw.small.iter().copied().filter(|&e| kept(e)).collect();
        match (kept(sw.large), small_kept.len()) {
            (false, _) => continue,
            (true, 0) => return Ok((false, None)),
            (true, 1) => merges.push((sw.large, small_kept[0])),
            _ => trivalent.push(sw),
        }
        let mut row = vec![0i64; n];
        row[sw.large] += 1;
        for e in small_kept {
            row[e] -= 1;
        }
        eq.push(row);
    }
    for e in h.iter() {
        let mut row = vec![0i64; n];
        row[e] = 1;
        eq.push(row);
    }

    let components = complement_components(track, &kept);
    if !components
        .iter()
        .all(|(chi, marked)| *chi == 1 && marked.len() <= 1)
    {
        return Ok((false, None));
    }
    let curves = to_u64(extreme_rays(&rational_rows(&eq), &identity_rows(n), n)?)?;
    let recurrent = (0..n)
        .filter(|&e| kept(e))
        .all(|e| curves.iter().any(|c| c[e] > 0));
    if !recurrent {
        return Ok((false, None));
    }

    // Merge chains through valence-two switches.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for &(a, b) in &merges {
        let (ra, rb) = (find(&mut parent, a), find(&mut parent, b));
        if ra != rb {
            parent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut index: BTreeMap<usize, usize> = BTreeMap::new();
    let mut branches: Vec<Vec<EdgeId>> = Vec::new();
    for e in (0..n).filter(|&e| kept(e)) {
        let r = find(&mut parent, e);
        let next = index.len();
        let i = *index.entry(r).or_insert(next);
        if i == branches.len() {
            branches.push(Vec::new());
        }
        branches[i].push(e);
    }
    let mut at = |e: EdgeId| index[&find(&mut parent, e)];
    let switches: Vec<[usize; 3]> = trivalent
        .iter()
        .map(|sw| [at(sw.large), at(sw.small[0]), at(sw.small[1])])
        .collect();

    // Cusps of the surviving trivalent switches, gathered by region.
    let tri = &track.tri;
    let nv = tri.vertex_count();
    let mut vparent: Vec<usize> = (0..nv).collect();
    for e in h.iter() {
        let (t, i) = tri.occurrences(e)[0];
        let (a, b) = (tri.corner_vertex(t, i), tri.corner_vertex(t, (i + 1) % 3));
        let (ra, rb) = (find(&mut vparent, a), find(&mut vparent, b));
        if ra != rb {
            vparent[ra.max(rb)] = ra.min(rb);
        }
    }
    let mut cusps: BTreeMap<usize, (usize, bool)> = BTreeMap::new();
    for v in 0..nv {
        let r = find(&mut vparent, v);
        let entry = cusps.entry(r).or_insert((0, false));
        entry.1 |= tri.is_marked(v);
    }
    for t in 0..tri.triangle_count() {
        let sw = track.switch(t);
        if trivalent.contains(&sw) {
            let v = tri.corner_vertex(t, (track.large_slot[t] + 2) % 3);
            let r = find(&mut vparent, v);
            cusps.get_mut(&r).expect("region").0 += 1;
        }
    }
    let regions = RegionCensus {
        regions: cusps
            .into_values()
            .map(|(sides, marked)| Region { sides, marked })
            .collect(),
    };
    Ok((
        true,
        Some(ReducedTrack {
            branches,
            switches,
            regions,
        }),
    ))
}

/// Splits every large branch whose split, in the direction forced by `mu`,
/// has a loser in `h`, until no such improvement remains.
pub fn resolve<F: Coord>(
    track: &TrainTrack,
    h: &Subgraph,
    mu: &[F],
) -> Result<(TrainTrack, Subgraph, Vec<F>)> {
    let mut current = track.clone();
    let mut weights = mu.to_vec();
    let cap = 16 * track.branch_count() + 16;
    for _ in 0..cap {
        let mut improved = false;
        for e in current.large_branches() {
            if h.contains(e) {
                continue;
            }
            let (side, _) = current.compatible_side(e, &weights)?;
            let losers = current.losers(e, side)?;
            if losers.iter().any(|&b| h.contains(b)) {
                let (next, rec) = current.split(e, side)?;
                weights = split_transverse(&weights, &rec);
                current = next;
                improved = true;
                break;
            }
        }
        if !improved {
            return Ok((current, h.clone(), weights));
        }
    }
    Err(Error::NoConvergence("resolution did not terminate".into()))
}

/// Whether `resolve` would make no further split.
pub fn is_resolved<F: Coord>(track: &TrainTrack, h: &Subgraph, mu: &[F]) -> Result<bool> {
    for e in track.large_branches() {
        if h.contains(e) {
            continue;
        }
        let (side, _) = track.compatible_side(e, mu)?;
        if track.losers(e, side)?.iter().any(|&b| h.contains(b)) {
            return Ok(false);
        }
    }
    Ok(true)
}
