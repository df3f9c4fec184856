//! Experiments along flow trajectories: strong-stable contraction in period
//! coordinates, Hilbert-diameter decay of tangential cones, the closing
//! fixed-point search, and split supports of thick windows.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cones::{compose_word, tangential_cone, tangential_image_diameter};
use crate::delaunay::is_delaunay;
use crate::error::{Error, Result};
use crate::fixtures::{period_space, perturbed, shifted};
use crate::flow::{
    detect_return, isomorphisms, run_flow, thick_profile, CheckMode, Periodicity, Relabeling,
    Trajectory,
};
use crate::linalg::{kernel, norm, orthonormalize};
use crate::scalar::Coord;
use crate::surface::{area, shoelace, Period, Surface};
use crate::traintrack::{
    dual_track, is_filling_subtrack, Direction, SplitRecord, Subgraph, TrainTrack,
};

/// Event cap for a single flow run inside an experiment.
pub const MAX_EVENTS: usize = 100_000;

/// Runs `f` on a thread pool capped by `VEERTRACK_THREADS` when it is set.
pub fn with_thread_cap<R: Send>(f: impl FnOnce() -> R + Send) -> R {
    let cap = std::env::var("VEERTRACK_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok());
    match cap.and_then(|n| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .ok()
    }) {
        Some(pool) => pool.install(f),
        None => f(),
    }
}

/// Random generator of trial `trial` of an experiment seeded with `seed`.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn signed_area(s: &Surface<f64>, heights: &[f64]) -> f64 {
    let periods: Vec<Period<f64>> = s
        .periods()
        .iter()
        .zip(heights)
        .map(|(p, &h)| Period::new(p.w, h))
        .collect();
    let moved = s.with_periods(periods);
    (0..moved.triangulation().triangle_count())
        .map(|t| shoelace(&moved.triangle_vectors(t)))
        .sum()
}

/// Orthonormal basis of the height perturbations that keep the triangle
/// relations and, to first order, the area.
pub fn strong_stable_basis(s: &Surface<f64>) -> Vec<Vec<f64>> {
    let basis = period_space(s);
    let zero = vec![0.0; s.edge_count()];
    let base = signed_area(s, &zero);
    let gradient: Vec<f64> = basis.iter().map(|b| signed_area(s, b) - base).collect();
    let coefficients = kernel(&[gradient], basis.len(), 1e-12);
    let vectors: Vec<Vec<f64>> = coefficients
        .iter()
        .map(|c| {
            (0..s.edge_count())
                .map(|e| c.iter().zip(&basis).map(|(ci, b)| ci * b[e]).sum())
                .collect()
        })
        .collect();
    orthonormalize(&vectors, 1e-12)
}

/// Euclidean distance between the flowed period vectors of two surfaces
/// in the same labelled chart.
pub fn period_distance(a: &Surface<f64>, b: &Surface<f64>) -> Result<f64> {
    if a.triangulation() != b.triangulation() {
        return Err(Error::Inconsistent(
            "surfaces are in different charts".into(),
        ));
    }
    let diff: Vec<f64> = a
        .flowed_periods()
        .iter()
        .zip(b.flowed_periods())
        .flat_map(|(&(w0, h0), (w1, h1))| [w0 - w1, h0 - h1])
        .collect();
    Ok(norm(&diff))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionSample {
    pub t: f64,
    pub trial: usize,
    pub d0: f64,
    pub dt: f64,
    pub ratio: f64,
}

/// Samples from one trial plus the (trial, T) pairs it dropped.
type TrialOutcome = (Vec<ContractionSample>, Vec<(usize, f64)>);

/// Least-squares fit `ln ratio ≈ ln C - α T` over the samples.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionFit {
    pub samples: Vec<ContractionSample>,
    pub alpha: f64,
    pub c: f64,
    pub residual: f64,
    pub r_squared: f64,
    /// Trial and time pairs whose trajectories split differently.
    pub dropped: Vec<(usize, f64)>,
}

/// Slope, intercept, residual sum of squares and R² of a line fit.
pub fn fit_line(points: &[(f64, f64)]) -> Option<(f64, f64, f64, f64)> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual: f64 = points
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { 1.0 - residual / syy } else { 1.0 };
    Some((slope, intercept, residual, r_squared))
}

fn same_schedule(a: &Trajectory<f64>, b: &Trajectory<f64>) -> bool {
    a.events.len() == b.events.len()
        && a.events
            .iter()
            .zip(&b.events)
            .all(|(x, y)| x.edge == y.edge && x.side == y.side)
}

/// Flows random strong-stable perturbations of size `delta` alongside `s`
/// and records how the distance in period coordinates shrinks by each time
/// in `times`.
pub fn contraction_experiment(
    s: &Surface<f64>,
    times: &[f64],
    delta: f64,
    trials: usize,
    seed: u64,
) -> Result<ContractionFit> {
    let s = s.normalized();
    let basis = strong_stable_basis(&s);
    if basis.is_empty() {
        return Err(Error::Unsupported("no strong-stable directions".into()));
    }
    let reference: Vec<Trajectory<f64>> = times
        .iter()
        .map(|&t| run_flow(&s, t, MAX_EVENTS, CheckMode::Every(16)))
        .collect::<Result<_>>()?;
    let per_trial: Vec<Result<TrialOutcome>> = with_thread_cap(|| {
        (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = trial_rng(seed, trial as u64);
                let coeffs: Vec<f64> = basis.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
                let mut dh: Vec<f64> = (0..s.edge_count())
                    .map(|e| coeffs.iter().zip(&basis).map(|(c, b)| c * b[e]).sum())
                    .collect();
                let size = norm(&dh);
                if size == 0.0 {
                    return Err(Error::Degenerate("zero perturbation".into()));
                }
                dh.iter_mut().for_each(|x| *x *= delta / size);
                let moved = shifted(&s, &vec![0.0; s.edge_count()], &dh);
                if !is_delaunay(&moved).unwrap_or(false) {
                    return Err(Error::Inconsistent(
                        "perturbation leaves the Delaunay chart".into(),
                    ));
                }
                let d0 = period_distance(&s, &moved)?;
                let mut samples = Vec::new();
                let mut dropped = Vec::new();
                for (&t, base) in times.iter().zip(&reference) {
                    let other = match run_flow(&moved, t, MAX_EVENTS, CheckMode::Every(16)) {
                        Ok(tr) if same_schedule(base, &tr) => tr,
                        Ok(_) | Err(Error::Degenerate(_)) => {
                            dropped.push((trial, t));
                            continue;
                        }
                        Err(e) => return Err(e),
                    };
                    let dt = period_distance(&base.end, &other.end)?;
                    samples.push(ContractionSample {
                        t,
                        trial,
                        d0,
                        dt,
                        ratio: dt / d0,
                    });
                }
                Ok((samples, dropped))
            })
            .collect()
    });
    let mut samples = Vec::new();
    let mut dropped = Vec::new();
    for r in per_trial {
        let (s, d) = r?;
        samples.extend(s);
        dropped.extend(d);
    }
    let points: Vec<(f64, f64)> = samples.iter().map(|p| (p.t, p.ratio.ln())).collect();
    let (slope, intercept, residual, r_squared) =
        fit_line(&points).ok_or_else(|| Error::NoConvergence("too few samples to fit".into()))?;
    Ok(ContractionFit {
        samples,
        alpha: -slope,
        c: intercept.exp(),
        residual,
        r_squared,
        dropped,
    })
}

/// Hilbert diameter of the tangential image of the starting cone at a
/// checkpoint time.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HilbertPoint {
    pub t: f64,
    pub events: usize,
    pub diameter: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HilbertDecay {
    pub points: Vec<HilbertPoint>,
    /// Slope of ln(diameter) against t over the finite positive diameters.
    pub slope: Option<f64>,
}

/// At each checkpoint, the Hilbert diameter in the current tangential cone
/// of the image of all tangential weights on the starting track.
pub fn hilbert_contraction_experiment<F: Coord>(
    traj: &Trajectory<F>,
    checkpoints: &[f64],
) -> Result<HilbertDecay> {
    let states = traj.states()?;
    let records: Vec<SplitRecord> = traj.events.iter().map(|e| e.record()).collect();
    let n = traj.start.edge_count();
    let mut points = Vec::new();
    for &t in checkpoints {
        let k = (0..traj.events.len())
            .take_while(|&i| traj.event_time(i) <= t)
            .count();
        let (track, _) = dual_track(&states[k], Direction::Vertical)?;
        let pair = compose_word(&records[..k], n)?;
        let diameter = tangential_image_diameter(&pair.tangential, &tangential_cone(&track)?)?;
        points.push(HilbertPoint {
            t,
            events: k,
            diameter,
        });
    }
    let finite: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p.diameter.is_finite() && p.diameter > 0.0)
        .map(|p| (p.t, p.diameter.ln()))
        .collect();
    Ok(HilbertDecay {
        slope: fit_line(&finite).map(|f| f.0),
        points,
    })
}

/// A periodic orbit found near a recurrent trajectory.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosingResult {
    #[serde(skip)]
    pub periodic_point: Surface<f64>,
    /// Flow time of one period, the log of the width scaling.
    pub period: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Largest period change in the last iteration.
    pub movement: f64,
}

/// Iteration cap of [`closing_search`].
pub const CLOSING_MAX_ITER: usize = 200;
const CLOSING_HORIZON: f64 = 60.0;

fn with_unit_area(s: &Surface<f64>, scale_widths: bool) -> Result<Surface<f64>> {
    let a = area(s)?;
    if a.is_nan() || a <= 0.0 {
        return Err(Error::Inconsistent("iteration left the chart".into()));
    }
    let periods = s
        .periods()
        .iter()
        .map(|p| {
            if scale_widths {
                Period::new(p.w / a, p.h)
            } else {
                Period::new(p.w, p.h / a)
            }
        })
        .collect();
    Ok(s.with_periods(periods))
}

fn rotate(s: &Surface<f64>, quarter_turns: usize) -> Surface<f64> {
    let periods = s
        .periods()
        .iter()
        .map(|p| match quarter_turns % 4 {
            0 => p.clone(),
            1 => Period::new(-p.h, p.w),
            2 => Period::new(-p.w, -p.h),
            _ => Period::new(p.h, -p.w),
        })
        .collect();
    s.with_periods(periods)
}

/// Flows `x` through exactly `events` split events; errors when the flow
/// degenerates or the events run out.
fn flow_events(x: &Surface<f64>, events: usize) -> Result<Trajectory<f64>> {
    let traj = run_flow(x, CLOSING_HORIZON, events, CheckMode::EveryEvent)
        .map_err(|e| Error::Inconsistent(format!("iteration left the chart: {e}")))?;
    if traj.events.len() != events {
        return Err(Error::Inconsistent(
            "iteration left the chart: too few events".into(),
        ));
    }
    Ok(traj)
}

fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    dot / (norm(a) * norm(b)).max(f64::MIN_POSITIVE)
}

/// One forward pass: new height direction from the forward image.
fn forward_step(
    x: &Surface<f64>,
    word: &[SplitRecord],
    r: &Relabeling,
) -> Result<(Surface<f64>, f64)> {
    let traj = flow_events(x, word.len())?;
    if traj
        .events
        .iter()
        .zip(word)
        .any(|(ev, w)| ev.edge != w.edge || ev.side != w.side)
    {
        return Err(Error::Inconsistent(
            "iteration left the chart: split sequence changed".into(),
        ));
    }
    let end = &traj.end;
    let heights: Vec<f64> = (0..x.edge_count())
        .map(|e| r.signs[e] as f64 * end.period(r.map[e]).h)
        .collect();
    let widths_x: Vec<f64> = x.periods().iter().map(|p| p.w).collect();
    let widths_end: Vec<f64> = end.periods().iter().map(|p| p.w).collect();
    let period = (norm(&widths_x) / norm(&widths_end)).ln();
    let periods = x
        .periods()
        .iter()
        .zip(&heights)
        .map(|(p, &h)| Period::new(p.w, h))
        .collect();
    Ok((with_unit_area(&x.with_periods(periods), false)?, period))
}

/// One backward pass, run as a forward flow of the quarter-turned surface:
/// new width direction from the backward image.
fn backward_step(x: &Surface<f64>, events: usize) -> Result<Surface<f64>> {
    let traj = flow_events(&rotate(x, 1), events)?;
    let end = rotate(&traj.end, 3);
    let widths_x: Vec<f64> = x.periods().iter().map(|p| p.w).collect();
    let best = isomorphisms(x.triangulation(), end.triangulation())
        .into_iter()
        .map(|r| -> Vec<f64> {
            (0..x.edge_count())
                .map(|e| r.signs[e] as f64 * end.period(r.map[e]).w)
                .collect()
        })
        .max_by(|a, b| cosine(a, &widths_x).total_cmp(&cosine(b, &widths_x)))
        .ok_or_else(|| Error::Inconsistent("iteration left the chart: no return".into()))?;
    if cosine(&best, &widths_x) <= 0.0 {
        return Err(Error::Inconsistent(
            "iteration left the chart: no nearby return".into(),
        ));
    }
    let periods = x
        .periods()
        .iter()
        .zip(&best)
        .map(|(p, &w)| Period::new(w, p.h))
        .collect();
    with_unit_area(&x.with_periods(periods), true)
}

fn max_change(a: &Surface<f64>, b: &Surface<f64>) -> f64 {
    a.periods()
        .iter()
        .zip(b.periods())
        .map(|(p, q)| (p.w - q.w).abs().max((p.h - q.h).abs()))
        .fold(0.0, f64::max)
}

/// Starting point for the closing search: state `m` flowed to the middle
/// of its interval before the next split, at unit area.
pub fn chart_midpoint(traj: &Trajectory<f64>, m: usize) -> Result<Surface<f64>> {
    let states = traj.states()?;
    let state = states
        .get(m)
        .ok_or_else(|| Error::Inconsistent(format!("no state {m}")))?;
    let next = traj
        .events
        .get(m)
        .ok_or_else(|| Error::Inconsistent(format!("no split after state {m}")))?;
    let mid = (state.scale() * next.threshold).sqrt();
    let s = state.clone().with_scale(mid).normalized();
    let a = area(&s)?;
    let root = a.sqrt();
    Ok(s.with_periods(
        s.periods()
            .iter()
            .map(|p| Period::new(p.w / root, p.h / root))
            .collect(),
    ))
}

/// Searches for a periodic orbit that follows the split word between
/// states `m` and `m2` of `traj`, alternating forward passes (which fix the
/// heights) and backward passes (which fix the widths) until the periods
/// move less than `tol`.
pub fn closing_search(
    traj: &Trajectory<f64>,
    m: usize,
    m2: usize,
    relabeling: &Relabeling,
    tol: f64,
) -> Result<ClosingResult> {
    if m >= m2 || m2 > traj.events.len() {
        return Err(Error::Inconsistent("closing window is empty".into()));
    }
    let word: Vec<SplitRecord> = traj.events[m..m2].iter().map(|e| e.record()).collect();
    let mut x = chart_midpoint(traj, m)?;
    let mut period = f64::NAN;
    let mut movement = f64::INFINITY;
    for iteration in 1..=CLOSING_MAX_ITER {
        let (forward, t) = forward_step(&x, &word, relabeling)?;
        let next = backward_step(&forward, word.len())?;
        period = t;
        movement = max_change(&x, &next);
        x = next;
        if movement < tol {
            let (_, t) = forward_step(&x, &word, relabeling)?;
            return Ok(ClosingResult {
                periodic_point: x,
                period: t,
                iterations: iteration,
                converged: true,
                movement,
            });
        }
    }
    Ok(ClosingResult {
        periodic_point: x,
        period,
        iterations: CLOSING_MAX_ITER,
        converged: false,
        movement,
    })
}

/// Relative tolerance for spotting the approximate return that seeds
/// [`close_trajectory`].
pub const RETURN_TOL: f64 = 1e-2;

/// Random perturbation of `s` whose period-space coordinates move by
/// multiples of `delta / 5` up to `delta`, reduced to its Delaunay chart.
pub fn perturb(s: &Surface<f64>, delta: f64, seed: u64) -> Result<Surface<f64>> {
    if delta == 0.0 {
        return Ok(s.clone());
    }
    perturbed(s, &mut trial_rng(seed, 0), delta / 5.0, 5)
}

/// Flows `s` for `time`, takes the first approximate return of the
/// trajectory and closes it.
pub fn close_trajectory(
    s: &Surface<f64>,
    time: f64,
    tol: f64,
) -> Result<(Periodicity<f64>, ClosingResult)> {
    let traj = run_flow(s, time, MAX_EVENTS, CheckMode::EveryEvent)?;
    let found = detect_return(&traj, RETURN_TOL)?
        .ok_or_else(|| Error::NoConvergence(format!("no approximate return within time {time}")))?;
    let res = closing_search(&traj, found.m, found.m2, &found.relabeling, tol)?;
    Ok((found, res))
}

/// Distance from `x` to the flow orbit of `reference` (same chart), over
/// flow times in `[-span, span]` and the global sign of the periods.
pub fn orbit_distance(x: &Surface<f64>, reference: &Surface<f64>, span: f64) -> Result<f64> {
    if x.triangulation() != reference.triangulation() {
        return Err(Error::Inconsistent(
            "surfaces are in different charts".into(),
        ));
    }
    let target = x.flowed_periods();
    let at = |t: f64, sign: f64| -> f64 {
        let moved = reference.apply_flow(t).flowed_periods();
        let diff: Vec<f64> = moved
            .iter()
            .zip(&target)
            .flat_map(|(&(w, h), &(a, b))| [sign * w - a, sign * h - b])
            .collect();
        norm(&diff)
    };
    let mut best = f64::INFINITY;
    for sign in [1.0, -1.0] {
        let steps = 400;
        let grid = |i: usize| -span + 2.0 * span * i as f64 / steps as f64;
        let i0 = (0..=steps)
            .min_by(|&a, &b| at(grid(a), sign).total_cmp(&at(grid(b), sign)))
            .unwrap_or(0);
        let (mut lo, mut hi) = (grid(i0.saturating_sub(1)), grid((i0 + 1).min(steps)));
        let ratio = (5f64.sqrt() - 1.0) / 2.0;
        for _ in 0..200 {
            let a = hi - ratio * (hi - lo);
            let b = lo + ratio * (hi - lo);
            if at(a, sign) < at(b, sign) {
                hi = b;
            } else {
                lo = a;
            }
        }
        best = best.min(at(0.5 * (lo + hi), sign));
    }
    Ok(best)
}

/// A stretch of a trajectory between two states with isomorphic vertical
/// tracks, both thick.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SplitWindow {
    pub m: usize,
    pub m2: usize,
    pub duration: f64,
    pub thick_time: f64,
    pub thick_fraction: f64,
    pub split_edges: usize,
    pub filling: bool,
}

fn tracks_match(a: &TrainTrack, b: &TrainTrack) -> bool {
    isomorphisms(a.triangulation(), b.triangulation())
        .iter()
        .any(|r| {
            (0..a.branch_count())
                .all(|e| a.width_signs()[e] * r.signs[e] == b.width_signs()[r.map[e]])
        })
}

/// All windows of at most `max_len` events whose end states are thick at
/// `epsilon` and carry matching vertical tracks, with the thick time in
/// between and whether the split edges fill the track at the start.
pub fn split_windows<F: Coord>(
    traj: &Trajectory<F>,
    epsilon: f64,
    max_len: usize,
) -> Result<Vec<SplitWindow>> {
    let states = traj.states()?;
    let profile = thick_profile(traj, epsilon)?;
    let tracks: Vec<TrainTrack> = states
        .iter()
        .map(|s| dual_track(s, Direction::Vertical).map(|t| t.0))
        .collect::<Result<_>>()?;
    let thick_end: Vec<bool> = profile.bounds[..states.len()]
        .iter()
        .map(|&t| profile.is_thick_at(t))
        .collect();
    let mut out = Vec::new();
    for m in (0..states.len()).filter(|&m| thick_end[m]) {
        for m2 in (m + 1..states.len().min(m + max_len + 1)).filter(|&k| thick_end[k]) {
            if !tracks_match(&tracks[m], &tracks[m2]) {
                continue;
            }
            let support = Subgraph::new(traj.events[m..m2].iter().map(|e| e.edge));
            let (lo, hi) = (profile.bounds[m], profile.bounds[m2]);
            let thick_time = profile.thick_time(lo, hi);
            out.push(SplitWindow {
                m,
                m2,
                duration: hi - lo,
                thick_time,
                thick_fraction: if hi > lo { thick_time / (hi - lo) } else { 1.0 },
                split_edges: support.len(),
                filling: is_filling_subtrack(&tracks[m], &support)?,
            });
        }
    }
    Ok(out)
}

/// Empirical `M(ε)`: the largest thick time of a calibration window whose
/// split edges do not fill.
pub fn calibrate_thick_threshold(windows: &[SplitWindow]) -> f64 {
    windows
        .iter()
        .filter(|w| !w.filling)
        .map(|w| w.thick_time)
        .fold(0.0, f64::max)
}
