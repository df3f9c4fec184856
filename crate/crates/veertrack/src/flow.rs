//! Event-driven Teichmüller flow on L∞ Delaunay triangulations: split
//! events, trajectories, thick-part statistics and periodicity.

use std::cmp::Ordering;
use std::collections::{BTreeMap, VecDeque};

use serde::Serialize;

use crate::delaunay::{
    delaunay_violations, develop, flip, is_axis_parallel, raw_diagonal, slope_sign,
};
use crate::error::{Error, Result};
use crate::scalar::{Coord, THRESHOLD_EPS};
use crate::surface::{EdgeId, Surface, Triangulation};
use crate::traintrack::{
    curve_holonomy, dual_track, vertex_curves, CurveLength, Direction, Side, TrainTrack,
};

/// Relative tolerance when matching period vectors up to scale.
pub const PERIOD_MATCH_TOL: f64 = 1e-8;

/// A split of the vertical track: at flow scale `threshold = e^{2t}` the
/// large edge `edge` becomes as long as its flippable diagonal.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitEvent<F> {
    pub threshold: F,
    pub edge: EdgeId,
    pub side: Side,
    pub losers: [EdgeId; 2],
    pub winners: [EdgeId; 2],
}

impl<F: Coord> SplitEvent<F> {
    /// Absolute flow time of the event, `ln(threshold) / 2`.
    pub fn time(&self) -> f64 {
        0.5 * self.threshold.to_f().ln()
    }
}

/// The next split of the vertical track under forward flow, if any.
pub fn next_split<F: Coord>(s: &Surface<F>) -> Result<Option<SplitEvent<F>>> {
    next_split_before(s, None)
}

/// Like [`next_split`], ignoring candidates beyond the scale `limit`, so that
/// degeneracies after the end of a run are not reported.
pub fn next_split_before<F: Coord>(
    s: &Surface<F>,
    limit: Option<&F>,
) -> Result<Option<SplitEvent<F>>> {
    let (track, _) = dual_track(s, Direction::Vertical)?;
    let mut best: Option<(SplitEvent<F>, bool)> = None;
    for e in track.large_branches() {
        let (diag, convex) = raw_diagonal(&develop(s, e)?);
        if !convex {
            continue;
        }
        let pe = s.period(e);
        let (we, he) = (pe.w.abs(), pe.h.abs());
        let (wd, hd) = (diag.w.abs(), diag.h.abs());
        if !(wd < we && hd > he) {
            continue;
        }
        let threshold = hd / we;
        if threshold <= *s.scale() || limit.is_some_and(|l| threshold > *l) {
            continue;
        }
        let degenerate = is_axis_parallel(&diag);
        let side = if !degenerate && slope_sign(&diag)? < 0 {
            Side::R
        } else {
            Side::L
        };
        let losers = track.losers(e, side)?;
        let winners = track.losers(e, if side == Side::L { Side::R } else { Side::L })?;
        let candidate = SplitEvent {
            threshold,
            edge: e,
            side,
            losers,
            winners,
        };
        best = match best {
            None => Some((candidate, degenerate)),
            Some((current, flag)) => match candidate
                .threshold
                .cmp_tol(&current.threshold, THRESHOLD_EPS)
            {
                Some(Ordering::Less) => Some((candidate, degenerate)),
                Some(_) => Some((current, flag)),
                None => {
                    return Err(Error::degenerate(format!(
                        "simultaneous split events on edges {} and {}",
                        s.label(current.edge),
                        s.label(candidate.edge)
                    )))
                }
            },
        };
    }
    match best {
        Some((ev, true)) => Err(Error::degenerate(format!(
            "edge {} splits into an axis-parallel edge",
            s.label(ev.edge)
        ))),
        Some((ev, false)) => Ok(Some(ev)),
        None => Ok(None),
    }
}

/// How often `run_flow` re-verifies the Delaunay certificate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CheckMode {
    EveryEvent,
    /// Every `n`-th event and the last one.
    Every(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory<F> {
    pub start: Surface<F>,
    pub events: Vec<SplitEvent<F>>,
    /// Flow time covered, measured from `start`.
    pub t_end: f64,
    /// The surface at the end of the run, with its flow scale.
    pub end: Surface<F>,
}

impl<F: Coord> Trajectory<F> {
    /// Surfaces after 0, 1, 2, … events, each at the scale of the event
    /// that produced it (the start scale for the first).
    pub fn states(&self) -> Result<Vec<Surface<F>>> {
        let mut out = vec![self.start.clone()];
        let mut current = self.start.clone();
        for ev in &self.events {
            let (next, _) = flip(&current, ev.edge)?;
            current = next.with_scale(ev.threshold.clone());
            out.push(current.clone());
        }
        Ok(out)
    }

    /// Event time relative to the start.
    pub fn event_time(&self, i: usize) -> f64 {
        self.events[i].time() - self.start.flow_time()
    }

    pub fn word(&self) -> String {
        self.events.iter().map(|e| e.side.to_string()).collect()
    }
}

fn midpoint<F: Coord>(a: &F, b: &F) -> F {
    (a.clone() + b.clone()).half()
}

/// Flows `s` for time `t_end`, flipping at every split event, stopping
/// early after `max_events` events.
pub fn run_flow<F: Coord>(
    s: &Surface<F>,
    t_end: f64,
    max_events: usize,
    check: CheckMode,
) -> Result<Trajectory<F>> {
    if !delaunay_violations(s)?.is_empty() {
        return Err(Error::Inconsistent(
            "flow must start at a Delaunay triangulation".into(),
        ));
    }
    let end_scale = s.scale().clone() * F::from_f((2.0 * t_end).exp());
    let mut current = s.clone();
    let mut events: Vec<SplitEvent<F>> = Vec::new();
    let mut pending = next_split_before(&current, Some(&end_scale))?;
    let mut stopped_early = false;
    while let Some(ev) = pending.take() {
        if ev.threshold > end_scale {
            break;
        }
        if events.len() >= max_events {
            stopped_early = true;
            break;
        }
        let (flipped, _) = flip(&current, ev.edge)?;
        current = flipped.with_scale(ev.threshold.clone());
        let following = next_split_before(&current, Some(&end_scale))?;
        let index = events.len() + 1;
        let check_now = match check {
            CheckMode::EveryEvent => true,
            CheckMode::Every(n) => index.is_multiple_of(n.max(1)) || following.is_none(),
        };
        if check_now {
            let probe_scale = match &following {
                Some(next) if next.threshold < end_scale => {
                    midpoint(&ev.threshold, &next.threshold)
                }
                _ => midpoint(&ev.threshold, &F::max_of(&end_scale, &ev.threshold)),
            };
            if probe_scale > ev.threshold
                && !delaunay_violations(&current.clone().with_scale(probe_scale))?.is_empty()
            {
                return Err(Error::Inconsistent(format!(
                    "certificate fails after splitting {}",
                    current.label(ev.edge)
                )));
            }
        }
        events.push(ev);
        pending = following;
    }
    let (end, t_final) = if stopped_early {
        let t = events
            .last()
            .map_or(0.0, |last| last.time() - s.flow_time());
        (current.clone(), t)
    } else {
        (current.clone().with_scale(end_scale), t_end)
    };
    Ok(Trajectory {
        start: s.clone(),
        events,
        t_end: t_final,
        end,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThickStats {
    pub epsilon: f64,
    pub thick_time: f64,
    pub fraction: f64,
}

/// For each vertex curve of both dual tracks, the coefficients `(a, b)` of
/// its proxy length `max(a e^{τ}, b e^{-τ})` at absolute log-scale `τ`:
/// the width and height of its flat holonomy in base coordinates.
fn curve_coefficients<F: Coord>(
    s: &Surface<F>,
    cache: &mut BTreeMap<String, Vec<Vec<u64>>>,
) -> Result<Vec<(f64, f64)>> {
    let mut out = Vec::new();
    for direction in [Direction::Vertical, Direction::Horizontal] {
        let (track, _) = dual_track(s, direction)?;
        let key = format!(
            "{direction}{:?}{:?}",
            track.triangulation().triangles(),
            (0..track.switch_count())
                .map(|t| track.large_slot(t))
                .collect::<Vec<_>>()
        );
        if !cache.contains_key(&key) {
            cache.insert(key.clone(), vertex_curves(&track)?);
        }
        for c in &cache[&key] {
            match curve_holonomy(&track, s, c)? {
                CurveLength::Holonomy(p) | CurveLength::HalfTurn(p) => {
                    out.push((p.w.abs().to_f(), p.h.abs().to_f()))
                }
                CurveLength::NotSimple => {}
            }
        }
    }
    Ok(out)
}

/// Total length of the union of open intervals, clipped to `[lo, hi]`.
fn union_length(mut intervals: Vec<(f64, f64)>, lo: f64, hi: f64) -> f64 {
    intervals.retain(|(a, b)| b > a);
    intervals.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(Ordering::Equal));
    let mut total = 0.0;
    let mut reach = lo;
    for (a, b) in intervals {
        let (a, b) = (a.max(reach), b.min(hi));
        if b > a {
            total += b - a;
            reach = b;
        }
    }
    total
}

/// Thin intervals of a trajectory: for each state, its absolute time
/// interval and the open intervals on which some vertex curve is shorter
/// than `epsilon`.
#[derive(Clone, Debug, PartialEq)]
pub struct ThickProfile {
    pub epsilon: f64,
    /// `bounds[k]..bounds[k + 1]` is the time interval of state `k`.
    pub bounds: Vec<f64>,
    pub thin: Vec<Vec<(f64, f64)>>,
}

impl ThickProfile {
    /// Thin time inside `[lo, hi]` (absolute times).
    pub fn thin_time(&self, lo: f64, hi: f64) -> f64 {
        (0..self.thin.len())
            .map(|k| {
                let (a, b) = (self.bounds[k].max(lo), self.bounds[k + 1].min(hi));
                if b > a {
                    union_length(self.thin[k].clone(), a, b)
                } else {
                    0.0
                }
            })
            .sum()
    }

    pub fn thick_time(&self, lo: f64, hi: f64) -> f64 {
        ((hi - lo) - self.thin_time(lo, hi)).max(0.0)
    }

    /// Whether the proxy is at least `epsilon` at absolute time `t`, using
    /// the state whose interval starts at or before `t`.
    pub fn is_thick_at(&self, t: f64) -> bool {
        let k = (0..self.thin.len())
            .rev()
            .find(|&k| self.bounds[k] <= t)
            .unwrap_or(0);
        !self.thin[k].iter().any(|&(a, b)| a < t && t < b)
    }
}

pub fn thick_profile<F: Coord>(traj: &Trajectory<F>, epsilon: f64) -> Result<ThickProfile> {
    let states = traj.states()?;
    let base = traj.start.flow_time();
    let mut bounds: Vec<f64> = vec![base];
    bounds.extend(traj.events.iter().map(SplitEvent::time));
    bounds.push(base + traj.t_end);
    for k in 1..bounds.len() {
        bounds[k] = bounds[k].max(bounds[k - 1]);
    }
    let mut cache = BTreeMap::new();
    let mut thin = Vec::with_capacity(states.len());
    for state in &states {
        if epsilon <= 0.0 {
            thin.push(Vec::new());
            continue;
        }
        // Curve c is shorter than ε exactly on (ln(b/ε), ln(ε/a)).
        let intervals = curve_coefficients(state, &mut cache)?
            .into_iter()
            .map(|(a, b)| ((b / epsilon).ln(), (epsilon / a).ln()))
            .filter(|(a, b)| b > a)
            .collect();
        thin.push(intervals);
    }
    Ok(ThickProfile {
        epsilon,
        bounds,
        thin,
    })
}

/// Measure of the times in `[0, t_end]` at which the flat systole proxy
/// (the shortest vertex curve of either dual track, each measured by the
/// larger of the width and height of its holonomy) is at least `epsilon`.
pub fn thick_fraction<F: Coord>(traj: &Trajectory<F>, epsilon: f64) -> Result<ThickStats> {
    let profile = thick_profile(traj, epsilon)?;
    let base = traj.start.flow_time();
    let thick_time = profile.thick_time(base, base + traj.t_end);
    let fraction = if traj.t_end > 0.0 {
        thick_time / traj.t_end
    } else {
        1.0
    };
    Ok(ThickStats {
        epsilon,
        thick_time,
        fraction,
    })
}

/// A labelled isomorphism between the triangulations of two states, with
/// per-edge orientation signs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Relabeling {
    /// `map[e]` is the edge of the later state corresponding to `e`.
    pub map: Vec<EdgeId>,
    pub signs: Vec<i8>,
}

/// All orientation-preserving isomorphisms from `a` to `b` respecting the
/// marked vertices.
pub fn isomorphisms(a: &Triangulation, b: &Triangulation) -> Vec<Relabeling> {
    let (na, nb) = (a.triangle_count(), b.triangle_count());
    if na != nb || a.edge_count() != b.edge_count() || na == 0 {
        return Vec::new();
    }
    let mut out = Vec::new();
    for t0 in 0..nb {
        for rot0 in 0..3 {
            if let Some(r) = extend_isomorphism(a, b, t0, rot0) {
                if !out.contains(&r) {
                    out.push(r);
                }
            }
        }
    }
    out
}

fn extend_isomorphism(
    a: &Triangulation,
    b: &Triangulation,
    t0: usize,
    rot0: usize,
) -> Option<Relabeling> {
    let n = a.triangle_count();
    let mut tmap: Vec<Option<(usize, usize)>> = vec![None; n];
    let mut emap: Vec<Option<(EdgeId, i8)>> = vec![None; a.edge_count()];
    let mut used = vec![false; n];
    tmap[0] = Some((t0, rot0));
    used[t0] = true;
    let mut queue = VecDeque::from([0usize]);
    while let Some(t) = queue.pop_front() {
        let (u, rot) = tmap[t]?;
        for i in 0..3 {
            let sa = a.triangles()[t][i];
            let j = (i + rot) % 3;
            let sb = b.triangles()[u][j];
            if a.is_marked(a.corner_vertex(t, i)) != b.is_marked(b.corner_vertex(u, j)) {
                return None;
            }
            let sign = sa.sign * sb.sign;
            match emap[sa.edge] {
                None => emap[sa.edge] = Some((sb.edge, sign)),
                Some(prev) if prev == (sb.edge, sign) => {}
                Some(_) => return None,
            }
            // Neighbour across side i of t must map to neighbour across side j of u.
            let other_a = a.occurrences(sa.edge).into_iter().find(|&o| o != (t, i))?;
            let other_b = b.occurrences(sb.edge).into_iter().find(|&o| o != (u, j))?;
            let rot_n = (other_b.1 + 3 - other_a.1) % 3;
            match tmap[other_a.0] {
                None => {
                    if used[other_b.0] {
                        return None;
                    }
                    used[other_b.0] = true;
                    tmap[other_a.0] = Some((other_b.0, rot_n));
                    queue.push_back(other_a.0);
                }
                Some(prev) if prev == (other_b.0, rot_n) => {}
                Some(_) => return None,
            }
        }
    }
    let pairs: Vec<(EdgeId, i8)> = emap.into_iter().collect::<Option<Vec<_>>>()?;
    let mut seen = vec![false; b.edge_count()];
    for &(e, _) in &pairs {
        if std::mem::replace(&mut seen[e], true) {
            return None;
        }
    }
    Some(Relabeling {
        map: pairs.iter().map(|p| p.0).collect(),
        signs: pairs.iter().map(|p| p.1).collect(),
    })
}

/// A return of the flow to the same labelled triangulation, rescaled.
#[derive(Clone, Debug, PartialEq)]
pub struct Periodicity<F> {
    /// States `m < m2` (number of events performed) that match.
    pub m: usize,
    pub m2: usize,
    pub word: Vec<SplitEvent<F>>,
    pub relabeling: Relabeling,
    /// Width contraction factor `e^{T}` over one period.
    pub lambda: f64,
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

/// Whether state `late` is state `early` flowed by some time and relabelled
/// by `r`: base widths shrink and base heights grow by a common factor.
fn rescaling_factor<F: Coord>(
    early: &Surface<F>,
    late: &Surface<F>,
    r: &Relabeling,
    tol: f64,
) -> Option<f64> {
    let e0 = (0..early.edge_count()).max_by(|&x, &y| {
        early
            .period(x)
            .w
            .abs()
            .partial_cmp(&early.period(y).w.abs())
            .unwrap_or(Ordering::Equal)
    })?;
    let lambda = early.period(e0).w.to_f() / (late.period(r.map[e0]).w.to_f() * r.signs[e0] as f64);
    if !(lambda.is_finite() && lambda > 1.0) {
        return None;
    }
    for e in 0..early.edge_count() {
        let (w0, h0) = early.period(e).to_f64();
        let (w1, h1) = late.period(r.map[e]).to_f64();
        let s = r.signs[e] as f64;
        if slope_sign(early.period(e)).ok()? != slope_sign(late.period(r.map[e])).ok()? {
            return None;
        }
        let scale = w0.abs().max(h0.abs());
        if !close(w0, lambda * s * w1, tol) && (w0 - lambda * s * w1).abs() > tol * scale {
            return None;
        }
        if !close(s * h1, lambda * h0, tol) && (s * h1 - lambda * h0).abs() > tol * lambda * scale {
            return None;
        }
    }
    Some(lambda)
}

/// First pair of states `m < m2` (smallest `m2`, then smallest `m`) whose
/// labelled triangulations and slope signs agree and whose periods differ
/// by the flow.
pub fn detect_periodicity<F: Coord>(traj: &Trajectory<F>) -> Result<Option<Periodicity<F>>> {
    detect_return(traj, PERIOD_MATCH_TOL)
}

/// [`detect_periodicity`] with relative tolerance `tol` on the period match;
/// a loose tolerance finds approximate returns of nearby orbits.
pub fn detect_return<F: Coord>(traj: &Trajectory<F>, tol: f64) -> Result<Option<Periodicity<F>>> {
    if traj.events.len() < 2 {
        return Ok(None);
    }
    let states = traj.states()?;
    for m2 in 1..states.len() {
        for m in 0..m2 {
            for r in isomorphisms(states[m].triangulation(), states[m2].triangulation()) {
                if let Some(lambda) = rescaling_factor(&states[m], &states[m2], &r, tol) {
                    return Ok(Some(Periodicity {
                        m,
                        m2,
                        word: traj.events[m..m2].to_vec(),
                        relabeling: r,
                        lambda,
                    }));
                }
            }
        }
    }
    Ok(None)
}

/// The vertical track at state `m` of a trajectory.
pub fn track_at<F: Coord>(traj: &Trajectory<F>, m: usize) -> Result<TrainTrack> {
    let states = traj.states()?;
    let s = states
        .get(m)
        .ok_or_else(|| Error::Inconsistent(format!("no state {m}")))?;
    Ok(dual_track(s, Direction::Vertical)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::{rational, Rational};
    use crate::traintrack::complementary_regions;
    use rand::SeedableRng;

    #[test]
    fn t2_first_split() {
        let ev = next_split(&fixtures::t2()).unwrap().unwrap();
        assert_eq!(ev.edge, 0);
        assert_eq!(ev.threshold, rational(23, 10));
        assert_eq!(ev.side, Side::L);
        assert_eq!(ev.losers, [1, 1]);
    }

    #[test]
    fn t2_event_counts() {
        let s = fixtures::t2();
        assert_eq!(
            run_flow(&s, 0.3, 100, CheckMode::EveryEvent)
                .unwrap()
                .events
                .len(),
            0
        );
        let traj = run_flow(&s, 0.5, 100, CheckMode::EveryEvent).unwrap();
        assert_eq!(traj.events.len(), 1);
        assert!((traj.event_time(0) - 0.5 * 2.3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn thresholds_increase_and_tracks_stay_consistent() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let s = fixtures::random_exact_torus(&mut rng).unwrap();
        let traj = run_flow(&s, 6.0, 40, CheckMode::EveryEvent).unwrap();
        assert!(traj.events.len() > 3);
        for pair in traj.events.windows(2) {
            assert!(pair[0].threshold < pair[1].threshold);
        }
        for s in traj.states().unwrap() {
            let (track, m) = dual_track(&s, Direction::Vertical).unwrap();
            assert!(track.satisfies_switch_conditions::<Rational>(&m.transverse));
            assert_eq!(
                complementary_regions(&track).counts(),
                BTreeMap::from([(2, 1)])
            );
        }
    }

    #[test]
    fn gold_alternates_and_is_periodic() {
        let traj = run_flow(&fixtures::gold(), 10.0, 200, CheckMode::EveryEvent).unwrap();
        let word = traj.word();
        assert!(word.len() >= 8, "{word}");
        let tail = &word[2..];
        assert!(tail.as_bytes().windows(2).all(|w| w[0] != w[1]), "{word}");
        let p = detect_periodicity(&traj).unwrap().expect("periodic");
        let golden_sq = (3.0 + 5f64.sqrt()) / 2.0;
        assert!((p.lambda - golden_sq).abs() < 1e-6, "{}", p.lambda);
    }

    #[test]
    fn thick_fraction_limits() {
        let traj = run_flow(&fixtures::gold(), 5.0, 200, CheckMode::EveryEvent).unwrap();
        assert_eq!(thick_fraction(&traj, 0.0).unwrap().fraction, 1.0);
        assert_eq!(thick_fraction(&traj, 0.1).unwrap().fraction, 1.0);
        let fractions: Vec<f64> = [2.0, 3.0, 4.0]
            .iter()
            .map(|&t| {
                let cusp =
                    run_flow(&fixtures::cusp_torus(), t, 100_000, CheckMode::Every(64)).unwrap();
                thick_fraction(&cusp, 0.3).unwrap().fraction
            })
            .collect();
        assert!(fractions.windows(2).all(|w| w[1] < w[0]), "{fractions:?}");
        assert!(fractions[2] < 0.4, "{fractions:?}");
    }

    #[test]
    fn union_of_intervals() {
        assert_eq!(
            union_length(vec![(0.0, 1.0), (0.5, 2.0), (3.0, 4.0)], 0.0, 3.5),
            2.5
        );
        assert_eq!(union_length(vec![(-1.0, -0.5)], 0.0, 1.0), 0.0);
    }

    #[test]
    fn t2_prefix_is_not_periodic() {
        let traj = run_flow(&fixtures::t2(), 0.8, 100, CheckMode::EveryEvent).unwrap();
        assert!(run_flow(&fixtures::t2(), 1.5, 100, CheckMode::EveryEvent)
            .unwrap_err()
            .is_degenerate());
        assert!(detect_periodicity(&traj).unwrap().is_none());
    }
}
