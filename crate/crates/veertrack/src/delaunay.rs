//! L∞ lengths, slope signs, diagonal flips and the L∞ Delaunay certificate.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::scalar::{Coord, AXIS_EPS};
use crate::surface::{EdgeId, Period, Slot, Surface};

/// Upper bound on greedy flips before giving up.
const MAX_GREEDY_FLIPS: usize = 100_000;

pub fn linf_length<F: Coord>(p: &Period<F>) -> F {
    F::max_of(&p.w.abs(), &p.h.abs())
}

/// L∞ length after the flow `scale = e^{2t}`, multiplied by `e^t` so that it
/// stays in the coordinate field.
pub fn linf_length_at<F: Coord>(p: &Period<F>, scale: &F) -> F {
    F::max_of(&(p.w.abs() * scale.clone()), &p.h.abs())
}

/// Sign of `w·h`; axis-parallel periods are degenerate.
pub fn slope_sign<F: Coord>(p: &Period<F>) -> Result<i8> {
    match (p.w.sign_eps(AXIS_EPS), p.h.sign_eps(AXIS_EPS)) {
        (Some(a), Some(b)) => Ok(a * b),
        _ => Err(Error::degenerate(format!(
            "axis-parallel period ({}, {})",
            p.w, p.h
        ))),
    }
}

/// True iff no triangle has three sides of the same slope sign.
pub fn is_veering<F: Coord>(s: &Surface<F>) -> Result<bool> {
    for t in 0..s.triangulation().triangle_count() {
        let signs = s
            .triangle_vectors(t)
            .iter()
            .map(slope_sign)
            .collect::<Result<Vec<i8>>>()?;
        if signs.iter().all(|&x| x == signs[0]) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagonal<F> {
    pub period: Period<F>,
    pub flippable: bool,
}

/// The quadrilateral around `e` as developed side vectors `[y1, y2, x1, x2]`
/// in counterclockwise order, together with its combinatorial description.
pub(crate) struct DevelopedQuad<F> {
    pub quad: crate::surface::Quad,
    pub sides: [Period<F>; 4],
}

/// Develops the quadrilateral around `e`, using as first triangle the one in
/// which `e` is traversed with positive width.
pub(crate) fn develop<F: Coord>(s: &Surface<F>, e: EdgeId) -> Result<DevelopedQuad<F>> {
    let tri = s.triangulation();
    let pair = tri.pair(e)?;
    let sign = tri.triangles()[pair[0].0][pair[0].1].sign;
    let first = match (s.period(e).w.clone() * F::from_int(sign as i64)).sign_eps(AXIS_EPS) {
        Some(1) => 0,
        Some(_) => 1,
        None => {
            return Err(Error::degenerate(format!(
                "edge {} is vertical",
                tri.label(e)
            )))
        }
    };
    let quad = tri.quad(e, first)?;
    let sides = [
        s.slot_vector(quad.y1),
        s.slot_vector(quad.y2),
        s.slot_vector(quad.x1),
        s.slot_vector(quad.x2),
    ];
    Ok(DevelopedQuad { quad, sides })
}

/// The other diagonal and whether both triangles it would bound are
/// positively oriented; axis-parallel diagonals are not rejected here.
pub(crate) fn raw_diagonal<F: Coord>(q: &DevelopedQuad<F>) -> (Period<F>, bool) {
    let [_, y2, x1, x2] = &q.sides;
    let f = y2.add(x1);
    let neg_f = f.signed(-1);
    let convex =
        f.cross(x2).sign_eps(AXIS_EPS) == Some(1) && neg_f.cross(y2).sign_eps(AXIS_EPS) == Some(1);
    (f, convex)
}

pub(crate) fn is_axis_parallel<F: Coord>(p: &Period<F>) -> bool {
    p.w.sign_eps(AXIS_EPS).is_none() || p.h.sign_eps(AXIS_EPS).is_none()
}

fn diagonal_of<F: Coord>(q: &DevelopedQuad<F>) -> Result<Diagonal<F>> {
    let (f, convex) = raw_diagonal(q);
    if is_axis_parallel(&f) {
        return Err(Error::degenerate("the other diagonal is axis-parallel"));
    }
    Ok(Diagonal {
        period: f,
        flippable: convex,
    })
}

/// The diagonal of the quadrilateral around `e` that is not `e`.
pub fn other_diagonal<F: Coord>(s: &Surface<F>, e: EdgeId) -> Result<Diagonal<F>> {
    diagonal_of(&develop(s, e)?)
}

/// Compares `e` with its flippable diagonal at the current flow time;
/// `None` when the quadrilateral is not flippable.
fn certificate_order<F: Coord>(s: &Surface<F>, e: EdgeId) -> Result<Option<Ordering>> {
    let (d, convex) = raw_diagonal(&develop(s, e)?);
    if !convex {
        return Ok(None);
    }
    let le = linf_length_at(s.period(e), s.scale());
    let ld = linf_length_at(&d, s.scale());
    match le.cmp_tol(&ld, AXIS_EPS) {
        Some(Ordering::Greater) if is_axis_parallel(&d) => Err(Error::degenerate(format!(
            "edge {} would flip to an axis-parallel diagonal",
            s.label(e)
        ))),
        Some(o) => Ok(Some(o)),
        None => Err(Error::degenerate(format!(
            "edge {} ties with its diagonal: the Delaunay triangulation is not unique",
            s.label(e)
        ))),
    }
}

/// Every edge whose flippable diagonal is strictly shorter in L∞.
pub fn delaunay_violations<F: Coord>(s: &Surface<F>) -> Result<Vec<EdgeId>> {
    let mut out = Vec::new();
    for e in 0..s.edge_count() {
        if certificate_order(s, e)? == Some(Ordering::Greater) {
            out.push(e);
        }
    }
    Ok(out)
}

pub fn is_delaunay<F: Coord>(s: &Surface<F>) -> Result<bool> {
    Ok(delaunay_violations(s)?.is_empty())
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlipRecord<F> {
    pub old_edge: EdgeId,
    pub old_period: Period<F>,
    pub new_period: Period<F>,
    /// Quadrilateral sides in counterclockwise order.
    pub quad: [Slot; 4],
}

/// Replaces `e` by the other diagonal of its quadrilateral; the new edge
/// keeps the label of `e`.
pub fn flip<F: Coord>(s: &Surface<F>, e: EdgeId) -> Result<(Surface<F>, FlipRecord<F>)> {
    let dq = develop(s, e)?;
    let d = diagonal_of(&dq)?;
    if !d.flippable {
        return Err(Error::NotFlippable(s.label(e).to_string()));
    }
    let mut out = s.clone();
    let record = FlipRecord {
        old_edge: e,
        old_period: s.period(e).clone(),
        new_period: d.period.clone(),
        quad: [dq.quad.y1, dq.quad.y2, dq.quad.x1, dq.quad.x2],
    };
    let (tri, periods) = out.parts_mut();
    tri.apply_flip(&dq.quad, e, 1);
    periods[e] = d.period;
    Ok((out, record))
}

/// Flips violating edges, longest first with ties broken by label, until the
/// certificate holds.
pub fn greedy_delaunay<F: Coord>(s: &Surface<F>) -> Result<(Surface<F>, Vec<FlipRecord<F>>)> {
    let mut current = s.clone();
    let mut records = Vec::new();
    loop {
        let violations = delaunay_violations(&current)?;
        let pick = violations.into_iter().max_by(|&a, &b| {
            let la = linf_length_at(current.period(a), current.scale());
            let lb = linf_length_at(current.period(b), current.scale());
            la.partial_cmp(&lb)
                .unwrap_or(Ordering::Equal)
                .then_with(|| current.label(b).cmp(current.label(a)))
        });
        let Some(e) = pick else {
            return Ok((current, records));
        };
        if records.len() >= MAX_GREEDY_FLIPS {
            return Err(Error::NoConvergence("greedy flip limit reached".into()));
        }
        let (next, record) = flip(&current, e)?;
        current = next;
        records.push(record);
    }
}

/// Sum of L∞ lengths at the current flow time; strictly decreases along the
/// greedy reduction.
pub fn total_linf<F: Coord>(s: &Surface<F>) -> F {
    s.periods()
        .iter()
        .fold(F::zero(), |acc, p| acc + linf_length_at(p, s.scale()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::{rational, Rational};
    use crate::surface::{angle_census, area, validate};

    fn p(w: f64, h: f64) -> Period<f64> {
        Period::new(w, h)
    }

    #[test]
    fn lengths_and_slopes() {
        assert_eq!(linf_length(&p(3.0, -4.0)), 4.0);
        assert_eq!(linf_length(&p(1.0, 0.3)), 1.0);
        assert_eq!(linf_length(&p(0.2, 2.3)), 2.3);
        assert_eq!(slope_sign(&p(1.0, 0.3)).unwrap(), 1);
        assert_eq!(slope_sign(&p(-0.4, 1.0)).unwrap(), -1);
        assert_eq!(slope_sign(&p(-0.6, -1.3)).unwrap(), 1);
        assert!(slope_sign(&p(0.0, 1.0)).unwrap_err().is_degenerate());
    }

    #[test]
    fn t2_diagonals() {
        let s = fixtures::t2();
        let expect = [(2, 10, 23, 10), (-16, 10, -16, 10), (14, 10, -7, 10)];
        for (e, (a, b, c, d)) in expect.into_iter().enumerate() {
            let diag = other_diagonal(&s, e).unwrap();
            let want = Period::new(rational(a, b), rational(c, d));
            assert!(
                diag.period == want || diag.period == want.signed(-1),
                "edge {e}: {:?}",
                diag.period
            );
            assert!(diag.flippable);
        }
    }

    #[test]
    fn t2_is_veering_and_delaunay() {
        let s = fixtures::t2();
        assert!(is_veering(&s).unwrap());
        assert!(delaunay_violations(&s).unwrap().is_empty());
        assert!(is_veering(&fixtures::gold()).unwrap());
        assert!(delaunay_violations(&fixtures::gold()).unwrap().is_empty());
    }

    #[test]
    fn all_positive_slopes_is_not_veering() {
        let s = fixtures::torus(
            Period::new(rational(1, 1), rational(1, 2)),
            Period::new(rational(1, 3), rational(1, 1)),
        );
        assert!(validate(&s).passed);
        assert!(!is_veering(&s).unwrap());
    }

    #[test]
    fn flip_e1_and_back() {
        let s = fixtures::t2();
        let (f, rec) = flip(&s, 0).unwrap();
        assert_eq!(
            rec.new_period,
            Period::new(rational(2, 10), rational(23, 10))
        );
        assert_eq!(area(&f).unwrap(), rational(112, 100));
        assert!(validate(&f).passed);
        assert_eq!(delaunay_violations(&f).unwrap(), vec![0]);
        let (back, _) = flip(&f, 0).unwrap();
        let pe = back.period(0).clone();
        assert!(pe == *s.period(0) || pe == s.period(0).signed(-1));
        assert!(validate(&back).passed);
    }

    #[test]
    fn flips_preserve_census() {
        let s = fixtures::t2();
        for e in 0..3 {
            let (f, _) = flip(&s, e).unwrap();
            assert_eq!(angle_census(&f), angle_census(&s));
        }
    }

    #[test]
    fn greedy_undoes_single_flip() {
        let s = fixtures::t2();
        let (scrambled, _) = flip(&s, 0).unwrap();
        let (out, flips) = greedy_delaunay(&scrambled).unwrap();
        assert_eq!(flips.len(), 1);
        assert!(delaunay_violations(&out).unwrap().is_empty());
        let (again, none) = greedy_delaunay(&s).unwrap();
        assert!(none.is_empty());
        assert_eq!(again, s);
    }

    #[test]
    fn total_length_decreases_on_violating_flip() {
        let s = fixtures::t2();
        let (scrambled, _) = flip(&s, 0).unwrap();
        let before: Rational = total_linf(&scrambled);
        let (after, _) = flip(&scrambled, 0).unwrap();
        assert!(total_linf(&after) < before);
    }
}
