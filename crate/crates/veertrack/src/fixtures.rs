//! Reference surfaces: the T2 torus, the golden torus, a pillowcase, a
//! principal-stratum genus-two surface and random perturbations of them.

use rand::{Rng, SeedableRng};

use crate::delaunay::{greedy_delaunay, is_veering};
use crate::error::{Error, Result};
use crate::linalg::{kernel, solve};
use crate::scalar::{rational, Coord, Rational, AXIS_EPS};
use crate::surface::{validate, EdgeId, Period, Slot, Surface, Triangulation};

fn labels(n: usize, prefix: &str) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Torus with one marked point, triangles `(+e1,+e2,+e3)` and `(-e1,-e2,-e3)`
/// where `e3 = -(e1 + e2)`. Requires `cross(v1, v2) > 0`.
pub fn torus<F: Coord>(v1: Period<F>, v2: Period<F>) -> Surface<F> {
    let v3 = v1.add(&v2).signed(-1);
    let tri = Triangulation::new(
        labels(3, "e"),
        vec![
            [Slot::new(0, 1), Slot::new(1, 1), Slot::new(2, 1)],
            [Slot::new(0, -1), Slot::new(1, -1), Slot::new(2, -1)],
        ],
        &[(0, 0)],
    )
    .expect("torus combinatorics");
    Surface::new(tri, vec![v1, v2, v3])
}

/// The T2 torus: `e1 = (1.0, 0.3)`, `e2 = (-0.4, 1.0)`, `e3 = (-0.6, -1.3)`.
pub fn t2() -> Surface<Rational> {
    torus(
        Period::new(rational(1, 1), rational(3, 10)),
        Period::new(rational(-4, 10), rational(1, 1)),
    )
}

pub fn golden_ratio() -> f64 {
    (1.0 + 5f64.sqrt()) / 2.0
}

/// Flow offset placing the golden torus strictly between two split events;
/// at time zero its L∞ Delaunay triangulation is not unique.
pub const GOLD_OFFSET: f64 = -0.2406059125;

/// The golden torus exactly on its periodic axis: `e1 = (φ, 1)`,
/// `e2 = (1, -φ)`, `e3 = -(e1 + e2)`, triangles `(+e1,+e3,+e2)`, `(-e1,-e3,-e2)`.
pub fn gold_axis() -> Surface<f64> {
    let phi = golden_ratio();
    let v1 = Period::new(phi, 1.0);
    let v2 = Period::new(1.0, -phi);
    let v3 = v1.add(&v2).signed(-1);
    let tri = Triangulation::new(
        labels(3, "e"),
        vec![
            [Slot::new(0, 1), Slot::new(2, 1), Slot::new(1, 1)],
            [Slot::new(0, -1), Slot::new(2, -1), Slot::new(1, -1)],
        ],
        &[(0, 0)],
    )
    .expect("torus combinatorics");
    Surface::new(tri, vec![v1, v2, v3])
}

/// The golden torus flowed by [`GOLD_OFFSET`], with the flow folded into the
/// periods. Its Delaunay triangulation is unique and equal to the fixture's.
pub fn gold() -> Surface<f64> {
    gold_axis().apply_flow(GOLD_OFFSET).normalized()
}

/// A pillowcase: the quotient of a torus by `z ↦ -z`, cut into two
/// parallelograms spanned by `a` and `b`, each split along `a + b`.
/// All four vertices are poles of angle π and are marked.
pub fn pillowcase<F: Coord>(a: Period<F>, b: Period<F>) -> Surface<F> {
    // Edges: A bottom halves, B outer sides, C top halves, M middle, D1/D2 diagonals.
    let names = ["A", "B", "C", "M", "D1", "D2"].map(String::from).to_vec();
    let (ea, eb, ec, em, d1, d2) = (0, 1, 2, 3, 4, 5);
    let triangles = vec![
        [Slot::new(ea, 1), Slot::new(em, 1), Slot::new(d1, -1)],
        [Slot::new(d1, 1), Slot::new(ec, -1), Slot::new(eb, -1)],
        [Slot::new(ea, 1), Slot::new(eb, 1), Slot::new(d2, -1)],
        [Slot::new(d2, 1), Slot::new(ec, -1), Slot::new(em, -1)],
    ];
    let all_corners: Vec<(usize, usize)> =
        (0..4).flat_map(|t| (0..3).map(move |c| (t, c))).collect();
    let tri = Triangulation::new(names, triangles, &all_corners).expect("pillowcase combinatorics");
    let ab = a.add(&b);
    Surface::new(tri, vec![a.clone(), b.clone(), a, b, ab.clone(), ab])
}

/// The reference pillowcase with `a = (2, 7/10)` and `b = (-9/10, 3)`.
pub fn pillow() -> Surface<Rational> {
    pillowcase(
        Period::new(rational(2, 1), rational(7, 10)),
        Period::new(rational(-9, 10), rational(3, 1)),
    )
}

/// Sheet permutations of a connected threefold cover of the pillowcase
/// branched with a 3-cycle over every pole: a genus-two surface with four
/// simple zeros.
const COVER_SHEETS: usize = 3;

fn permutations3() -> Vec<[usize; 3]> {
    vec![
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ]
}

/// Lifts a triangulated surface to the cover in which edge `e`'s copy `j`
/// joins sheet `j` of its first triangle to sheet `perm[e][j]` of its second.
pub fn lift<F: Coord>(s: &Surface<F>, perms: &[[usize; 3]]) -> Result<Surface<F>> {
    let tri = s.triangulation();
    let n = tri.edge_count();
    let sheets = COVER_SHEETS;
    let mut names = Vec::new();
    let mut periods = Vec::new();
    for k in 0..sheets {
        for e in 0..n {
            names.push(format!("{}_{}", tri.label(e), k));
            periods.push(s.period(e).clone());
        }
    }
    let first: Vec<(usize, usize)> = (0..n).map(|e| tri.occurrences(e)[0]).collect();
    let mut triangles = Vec::new();
    for k in 0..sheets {
        for (t, slots) in tri.triangles().iter().enumerate() {
            let mut lifted = [Slot::new(0, 1); 3];
            for (i, slot) in slots.iter().enumerate() {
                let copy = if first[slot.edge] == (t, i) {
                    k
                } else {
                    perms[slot.edge]
                        .iter()
                        .position(|&x| x == k)
                        .expect("permutation")
                };
                lifted[i] = Slot::new(copy * n + slot.edge, slot.sign);
            }
            triangles.push(lifted);
        }
    }
    let out = Surface::new(Triangulation::new(names, triangles, &[])?, periods);
    Ok(out)
}

fn is_connected(tri: &Triangulation) -> bool {
    let n = tri.triangle_count();
    let mut seen = vec![false; n];
    let mut stack = vec![0];
    seen[0] = true;
    while let Some(t) = stack.pop() {
        for slot in tri.triangles()[t] {
            for (u, _) in tri.occurrences(slot.edge) {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
    }
    seen.into_iter().all(|x| x)
}

/// A genus-two surface with four zeros of angle 3π: the first (in a fixed
/// enumeration order) connected threefold cover of [`pillow`] fully
/// ramified over the four poles.
pub fn genus_two() -> Surface<Rational> {
    let base = pillow();
    let perms = permutations3();
    let n = base.edge_count();
    let mut choice = vec![0usize; n];
    loop {
        let assignment: Vec<[usize; 3]> = choice.iter().map(|&i| perms[i]).collect();
        if let Ok(s) = lift(&base, &assignment) {
            let tri = s.triangulation();
            if tri.vertex_count() == 4 && is_connected(tri) && validate(&s).passed {
                return s;
            }
        }
        let mut i = 0;
        loop {
            choice[i] += 1;
            if choice[i] < perms.len() {
                break;
            }
            choice[i] = 0;
            i += 1;
            assert!(i < n, "a fully ramified threefold cover exists");
        }
    }
}

/// Basis of the period assignments compatible with the triangle relations.
pub fn period_space<F: Coord>(s: &Surface<F>) -> Vec<Vec<F>> {
    let tri = s.triangulation();
    let rows: Vec<Vec<F>> = tri
        .triangles()
        .iter()
        .map(|slots| {
            let mut row = vec![F::zero(); tri.edge_count()];
            for sl in slots {
                row[sl.edge] = row[sl.edge].clone() + F::from_int(sl.sign as i64);
            }
            row
        })
        .collect();
    kernel(&rows, tri.edge_count(), AXIS_EPS)
}

/// Adds the period-space vectors `dw`, `dh` to the widths and heights.
pub fn shifted<F: Coord>(s: &Surface<F>, dw: &[F], dh: &[F]) -> Surface<F> {
    let periods = s
        .periods()
        .iter()
        .zip(dw.iter().zip(dh))
        .map(|(p, (a, b))| Period::new(p.w.clone() + a.clone(), p.h.clone() + b.clone()))
        .collect();
    s.with_periods(periods)
}

/// Random combination of the period-space basis, each basis vector scaled
/// to unit maximum entry and weighted by a multiple of `step` in `[-amp, amp]`.
fn random_direction<F: Coord, R: Rng>(basis: &[Vec<F>], rng: &mut R, step: &F, amp: i64) -> Vec<F> {
    let n = basis.first().map_or(0, Vec::len);
    let mut out = vec![F::zero(); n];
    for v in basis {
        let top = v.iter().fold(F::zero(), |m, x| F::max_of(&m, &x.abs()));
        if top.is_zero() {
            continue;
        }
        let c = F::from_int(rng.gen_range(-amp..=amp)) * step.clone() / top;
        for (o, x) in out.iter_mut().zip(v) {
            *o = o.clone() + c.clone() * x.clone();
        }
    }
    out
}

/// Random small perturbation of all periods of `s`, re-triangulated to its
/// L∞ Delaunay triangulation. Retries until the result is valid, veering
/// and free of ties.
pub fn perturbed<F: Coord, R: Rng>(
    s: &Surface<F>,
    rng: &mut R,
    step: F,
    amp: i64,
) -> Result<Surface<F>> {
    let basis = period_space(s);
    for _ in 0..200 {
        let dw = random_direction(&basis, rng, &step, amp);
        let dh = random_direction(&basis, rng, &step, amp);
        let candidate = shifted(s, &dw, &dh);
        if !validate(&candidate).passed || !matches!(is_veering(&candidate), Ok(true)) {
            continue;
        }
        if let Ok((out, _)) = greedy_delaunay(&candidate) {
            return Ok(out);
        }
    }
    Err(Error::NoConvergence(
        "no admissible perturbation found".into(),
    ))
}

/// Denominator of random exact periods; large so that the vertical and
/// horizontal lattice vectors stay long for many split events.
const RANDOM_DENOMINATOR: i64 = 1_000_003;

/// Random exact torus near T2's shape, reduced to its Delaunay triangulation.
pub fn random_exact_torus<R: Rng>(rng: &mut R) -> Result<Surface<Rational>> {
    let d = RANDOM_DENOMINATOR;
    for _ in 0..200 {
        let mut q = |lo: f64, hi: f64| {
            rational(
                rng.gen_range((lo * d as f64) as i64..=(hi * d as f64) as i64),
                d,
            )
        };
        let v1 = Period::new(q(0.6, 1.4), q(0.05, 0.6));
        let v2 = Period::new(q(-0.7, -0.1), q(0.6, 1.4));
        let s = torus(v1, v2);
        if !validate(&s).passed || !matches!(is_veering(&s), Ok(true)) {
            continue;
        }
        if let Ok((out, _)) = greedy_delaunay(&s) {
            return Ok(out);
        }
    }
    Err(Error::NoConvergence("no admissible torus found".into()))
}

/// Random exact genus-two surface near [`genus_two`].
pub fn random_exact_genus_two<R: Rng>(rng: &mut R) -> Result<Surface<Rational>> {
    perturbed(&genus_two(), rng, rational(1, 997), 40)
}

/// Random float torus of area one with both periods in general position.
pub fn random_float_torus<R: Rng>(rng: &mut R) -> Result<Surface<f64>> {
    for _ in 0..200 {
        let a: f64 = rng.gen_range(0.1..0.7);
        let b: f64 = rng.gen_range(1.7..2.6);
        let (ra, rb) = (rng.gen_range(0.8..1.25), rng.gen_range(0.8..1.25));
        let v1 = Period::new(ra * a.cos(), ra * a.sin());
        let v2 = Period::new(rb * b.cos(), rb * b.sin());
        let s = torus(v1, v2);
        if !validate(&s).passed || !matches!(is_veering(&s), Ok(true)) {
            continue;
        }
        if let Ok((out, _)) = greedy_delaunay(&s) {
            return Ok(out);
        }
    }
    Err(Error::NoConvergence("no admissible torus found".into()))
}

/// Minimal-norm period-space direction `d` with `d[e] = 1`: the cheapest way
/// to change edge `e` alone while keeping the triangle relations.
pub fn edge_direction<F: Coord>(s: &Surface<F>, e: EdgeId) -> Result<Vec<F>> {
    let basis = period_space(s);
    let dot = |a: &[F], b: &[F]| {
        a.iter()
            .zip(b)
            .fold(F::zero(), |acc, (x, y)| acc + x.clone() * y.clone())
    };
    let gram: Vec<Vec<F>> = basis
        .iter()
        .map(|a| basis.iter().map(|b| dot(a, b)).collect())
        .collect();
    let row: Vec<F> = basis.iter().map(|b| b[e].clone()).collect();
    let x = solve(&gram, &row, AXIS_EPS)
        .ok_or_else(|| Error::Inconsistent("singular period basis".into()))?;
    let k = dot(&row, &x);
    if k.is_zero() {
        return Err(Error::Inconsistent(format!(
            "edge {} has no free period",
            s.label(e)
        )));
    }
    Ok((0..s.edge_count())
        .map(|f| {
            basis
                .iter()
                .zip(&x)
                .fold(F::zero(), |acc, (b, c)| acc + b[f].clone() * c.clone())
                / k.clone()
        })
        .collect())
}

/// Scales the period of edge `e` by `factor` along [`edge_direction`];
/// edges forced parallel to `e` shrink with it.
pub fn shrink_edge<F: Coord>(s: &Surface<F>, e: EdgeId, factor: F) -> Result<Surface<F>> {
    let d = edge_direction(s, e)?;
    let cut = F::one() - factor;
    let pe = s.period(e).clone();
    let dw: Vec<F> = d
        .iter()
        .map(|x| -(cut.clone() * pe.w.clone() * x.clone()))
        .collect();
    let dh: Vec<F> = d
        .iter()
        .map(|x| -(cut.clone() * pe.h.clone() * x.clone()))
        .collect();
    Ok(shifted(s, &dw, &dh))
}

/// Genus-two surface near a double collision of zeros: the random exact
/// genus-two surface of seed 0 with `A_0` (and its parallel partner `C_0`)
/// shrunk to a twentieth, then made Delaunay.
pub fn near_collision() -> Surface<Rational> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let s = random_exact_genus_two(&mut rng).expect("genus-two perturbation");
    let e = s.edge_id("A_0").expect("edge A_0");
    let moved = shrink_edge(&s, e, rational(1, 20)).expect("edge has a free period");
    greedy_delaunay(&moved)
        .map(|(out, _)| out)
        .expect("near collision reduces")
}

/// A torus whose short lattice vector `(1e-6, 1)` is nearly vertical: its
/// forward flow spends a long time near the cusp.
pub fn cusp_torus() -> Surface<f64> {
    let v1 = Period::new(1.0, 0.37);
    let v2 = Period::new(-0.999999, 0.63);
    let s = torus(v1, v2);
    greedy_delaunay(&s)
        .map(|(out, _)| out)
        .expect("cusp torus reduces")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::surface::angle_census;
    use std::collections::BTreeMap;

    #[test]
    fn genus_two_has_four_simple_zeros() {
        let s = genus_two();
        let tri = s.triangulation();
        assert_eq!(
            (tri.vertex_count(), tri.edge_count(), tri.triangle_count()),
            (4, 18, 12)
        );
        assert!(validate(&s).passed);
        assert_eq!(angle_census(&s), BTreeMap::from([(3, 4)]));
        assert_eq!(period_space(&s).len(), 6);
    }

    #[test]
    fn gold_is_valid_and_offset_from_axis() {
        assert!(validate(&gold()).passed);
        assert!(validate(&gold_axis()).passed);
    }
    #[test]
    fn near_collision_has_an_inessential_pair() {
        use crate::traintrack::{
            detect_inessential, dual_track, is_resolved, resolve, Direction, Subgraph,
        };
        let s = near_collision();
        assert!(validate(&s).passed);
        let h = Subgraph::new(["A_0", "C_0"].map(|l| s.edge_id(l).unwrap()));
        let (track, measures) = dual_track(&s, Direction::Vertical).unwrap();
        let (inessential, reduced) = detect_inessential(&track, &h).unwrap();
        assert!(inessential);
        let reduced = reduced.unwrap();
        assert_eq!((reduced.branches.len(), reduced.switches.len()), (12, 8));
        assert_eq!(reduced.regions.counts(), BTreeMap::from([(4, 2)]));

        let (resolved, h2, mu) = resolve(&track, &h, &measures.transverse).unwrap();
        assert!(is_resolved(&resolved, &h2, &mu).unwrap());
        let (again, _, mu2) = resolve(&resolved, &h2, &mu).unwrap();
        assert_eq!(again, resolved);
        assert_eq!(mu2, mu);
        for sw in resolved.switches() {
            if resolved.large_branches().contains(&sw.large) && !h2.contains(sw.large) {
                assert!(sw.small.iter().all(|&e| !h2.contains(e)));
            }
        }
    }

    #[test]
    fn single_short_edge_leaves_three_regions() {
        use crate::traintrack::{detect_inessential, dual_track, Direction, Subgraph};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let s = random_exact_genus_two(&mut rng).unwrap();
        let e = s.edge_id("D1_0").unwrap();
        let moved = greedy_delaunay(&shrink_edge(&s, e, rational(1, 20)).unwrap())
            .unwrap()
            .0;
        let (track, _) = dual_track(&moved, Direction::Vertical).unwrap();
        let (ok, reduced) = detect_inessential(&track, &Subgraph::new([e])).unwrap();
        assert!(ok);
        let reduced = reduced.unwrap();
        assert_eq!((reduced.branches.len(), reduced.switches.len()), (15, 10));
        assert_eq!(reduced.regions.counts(), BTreeMap::from([(3, 2), (4, 1)]));
    }
}
