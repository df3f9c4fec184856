//! Polyhedral cones, the Hilbert projective metric, Birkhoff contraction,
//! and the integer transition matrices of splitting sequences.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::flow::{Relabeling, SplitEvent};
use crate::linalg::in_span;
use crate::polyhedral::extreme_rays;
use crate::scalar::{rational, Coord, Rational};
use crate::surface::EdgeId;
use crate::traintrack::{
    is_filling_subtrack, vertex_curves, Side, SplitRecord, Subgraph, TrainTrack,
};

/// Relative size below which a facet value counts as zero.
pub const BOUNDARY_EPS: f64 = 1e-13;
/// Tolerance and iteration cap of the Perron root power iteration.
pub const PERRON_TOL: f64 = 1e-12;
pub const PERRON_MAX_ITER: usize = 100_000;
const SPECTRAL_BISECTIONS: usize = 80;

/// A pointed polyhedral cone `{x : f·x ≥ 0 for every facet f}`, stored with
/// its extreme rays.
#[derive(Clone, Debug, PartialEq)]
pub struct Cone {
    pub facets: Vec<Vec<f64>>,
    pub generators: Vec<Vec<f64>>,
}

fn to_rational_rows(rows: &[Vec<i64>]) -> Vec<Vec<Rational>> {
    rows.iter()
        .map(|r| r.iter().map(|&x| rational(x, 1)).collect())
        .collect()
}

fn to_float_rows(rows: &[Vec<num_bigint::BigInt>]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|r| r.iter().map(|x| x.to_f64().unwrap_or(f64::NAN)).collect())
        .collect()
}

impl Cone {
    pub fn orthant(dim: usize) -> Self {
        let unit: Vec<Vec<f64>> = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Cone {
            facets: unit.clone(),
            generators: unit,
        }
    }

    /// Cone cut out by integer facet functionals; extreme rays are found by
    /// double description.
    pub fn from_integer_facets(facets: &[Vec<i64>]) -> Result<Self> {
        let dim = facets.first().map_or(0, Vec::len);
        let rays = extreme_rays(&[], &to_rational_rows(facets), dim)?;
        Ok(Cone {
            facets: facets
                .iter()
                .map(|f| f.iter().map(|&x| x as f64).collect())
                .collect(),
            generators: to_float_rows(&rays),
        })
    }

    /// Cone spanned by integer generators; facets are the extreme rays of
    /// the dual cone.
    pub fn from_integer_generators(generators: &[Vec<i64>]) -> Result<Self> {
        let dim = generators.first().map_or(0, Vec::len);
        let facets = extreme_rays(&[], &to_rational_rows(generators), dim)?;
        Ok(Cone {
            facets: to_float_rows(&facets),
            generators: generators
                .iter()
                .map(|g| g.iter().map(|&x| x as f64).collect())
                .collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.facets.first().map_or(0, Vec::len)
    }

    fn values(&self, x: &[f64]) -> Vec<f64> {
        self.facets
            .iter()
            .map(|f| f.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn scale(x: &[f64]) -> f64 {
        x.iter()
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE)
    }

    /// Whether `x` lies strictly inside the cone.
    pub fn contains_interior(&self, x: &[f64]) -> bool {
        let s = Self::scale(x);
        self.values(x).iter().all(|&v| v > BOUNDARY_EPS * s)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let s = Self::scale(x);
        self.values(x).iter().all(|&v| v >= -BOUNDARY_EPS * s * 1e3)
    }
}

/// Hilbert projective distance `ln(max_f f(x)/f(y) · max_g g(y)/g(x))` over
/// the facet functionals.
pub fn hilbert_distance(c: &Cone, x: &[f64], y: &[f64]) -> Result<f64> {
    if !c.contains(x) || !c.contains(y) {
        return Err(Error::OutsideCone);
    }
    if !c.contains_interior(x) || !c.contains_interior(y) {
        return Err(Error::Boundary);
    }
    let (fx, fy) = (c.values(x), c.values(y));
    let up = fx
        .iter()
        .zip(&fy)
        .map(|(a, b)| a / b)
        .fold(f64::MIN, f64::max);
    let down = fy
        .iter()
        .zip(&fx)
        .map(|(a, b)| a / b)
        .fold(f64::MIN, f64::max);
    Ok((up * down).ln().max(0.0))
}

/// Dense integer matrix.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IntMatrix {
    pub rows: Vec<Vec<i64>>,
}

impl IntMatrix {
    pub fn identity(n: usize) -> Self {
        IntMatrix {
            rows: (0..n)
                .map(|i| (0..n).map(|j| (i == j) as i64).collect())
                .collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.rows.len()
    }

    pub fn transpose(&self) -> Self {
        let n = self.size();
        IntMatrix {
            rows: (0..n)
                .map(|i| (0..n).map(|j| self.rows[j][i]).collect())
                .collect(),
        }
    }

    pub fn mul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        let n = self.size();
        let mut rows = vec![vec![0i64; n]; n];
        for (i, row) in rows.iter_mut().enumerate() {
            for (k, &a) in self.rows[i].iter().enumerate() {
                if a == 0 {
                    continue;
                }
                for (j, slot) in row.iter_mut().enumerate() {
                    let term = a
                        .checked_mul(other.rows[k][j])
                        .ok_or_else(|| Error::Overflow("transition matrix".into()))?;
                    *slot = slot
                        .checked_add(term)
                        .ok_or_else(|| Error::Overflow("transition matrix".into()))?;
                }
            }
        }
        Ok(IntMatrix { rows })
    }

    pub fn apply_f64(&self, x: &[f64]) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum())
            .collect()
    }

    pub fn apply<F: Coord>(&self, x: &[F]) -> Vec<F> {
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .zip(x)
                    .fold(F::zero(), |acc, (&a, b)| acc + F::from_int(a) * b.clone())
            })
            .collect()
    }

    /// Exact determinant by rational elimination.
    pub fn det(&self) -> Rational {
        let mut m: Vec<Vec<Rational>> = to_rational_rows(&self.rows);
        let n = m.len();
        let mut det = rational(1, 1);
        for col in 0..n {
            let Some(p) = (col..n).find(|&r| m[r][col] != rational(0, 1)) else {
                return rational(0, 1);
            };
            if p != col {
                m.swap(p, col);
                det = -det;
            }
            let pivot = m[col][col].clone();
            det *= pivot.clone();
            for r in col + 1..n {
                let factor = m[r][col].clone() / pivot.clone();
                let (upper, lower) = m.split_at_mut(r);
                for (target, source) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                    *target -= factor.clone() * source.clone();
                }
            }
        }
        det
    }

    /// Whether `self - I` has nonnegative entries.
    pub fn dominates_identity(&self) -> bool {
        self.rows
            .iter()
            .enumerate()
            .all(|(i, r)| r.iter().enumerate().all(|(j, &a)| a - (i == j) as i64 >= 0))
    }

    /// Characteristic polynomial `det(xI - A)`, lowest degree first, by
    /// Faddeev-LeVerrier over the integers.
    pub fn characteristic_polynomial(&self) -> Vec<BigInt> {
        let n = self.size();
        let a: Vec<Vec<BigInt>> = self
            .rows
            .iter()
            .map(|r| r.iter().map(|&v| BigInt::from(v)).collect())
            .collect();
        let mut coeffs = vec![BigInt::zero(); n + 1];
        coeffs[n] = BigInt::one();
        let mut m = vec![vec![BigInt::zero(); n]; n];
        for k in 1..=n {
            // m <- A m + c_{n-k+1} I
            let mut next = vec![vec![BigInt::zero(); n]; n];
            for i in 0..n {
                for l in 0..n {
                    if a[i][l].is_zero() {
                        continue;
                    }
                    for j in 0..n {
                        next[i][j] += &a[i][l] * &m[l][j];
                    }
                }
                next[i][i] += &coeffs[n - k + 1];
            }
            m = next;
            let mut trace = BigInt::zero();
            for i in 0..n {
                for l in 0..n {
                    trace += &a[i][l] * &m[l][i];
                }
            }
            coeffs[n - k] = -trace / BigInt::from(k);
        }
        coeffs
    }

    /// Spectral radius of a nonnegative integer matrix: the largest real
    /// root of its characteristic polynomial, isolated with a Sturm sequence.
    /// Works for reducible and unipotent matrices where power iteration stalls.
    pub fn spectral_radius(&self) -> f64 {
        let n = self.size();
        if n == 0 {
            return 0.0;
        }
        let p: Vec<Rational> = self
            .characteristic_polynomial()
            .into_iter()
            .map(Rational::from_integer)
            .collect();
        let sturm = sturm_sequence(&squarefree(&p));
        let bound = self
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<i64>())
            .max()
            .unwrap_or(0)
            + 1;
        let mut hi = rational(bound, 1);
        let mut lo = rational(-1, 1);
        let top = sign_changes(&sturm, &hi);
        for _ in 0..SPECTRAL_BISECTIONS {
            let mid = (lo.clone() + hi.clone()) / rational(2, 1);
            if sign_changes(&sturm, &mid) > top {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mid = (lo + hi) / rational(2, 1);
        mid.to_f64().unwrap_or(f64::NAN)
    }

    pub fn to_f64(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| r.iter().map(|&a| a as f64).collect())
            .collect()
    }
}

fn trim(mut p: Vec<Rational>) -> Vec<Rational> {
    while p.last().is_some_and(|c| c.is_zero()) {
        p.pop();
    }
    p
}

fn derivative(p: &[Rational]) -> Vec<Rational> {
    p.iter()
        .enumerate()
        .skip(1)
        .map(|(k, c)| c * Rational::from_integer(BigInt::from(k)))
        .collect()
}

fn remainder(num: &[Rational], den: &[Rational]) -> Vec<Rational> {
    let mut r = trim(num.to_vec());
    let lead = den.last().expect("nonzero divisor").clone();
    while r.len() >= den.len() && !r.is_empty() {
        let shift = r.len() - den.len();
        let factor = r.last().unwrap().clone() / lead.clone();
        for (k, d) in den.iter().enumerate() {
            let delta = &factor * d;
            r[shift + k] -= delta;
        }
        r.pop();
        r = trim(r);
    }
    r
}

fn quotient(num: &[Rational], den: &[Rational]) -> Vec<Rational> {
    let mut r = trim(num.to_vec());
    let lead = den.last().expect("nonzero divisor").clone();
    let mut q = vec![Rational::zero(); r.len().saturating_sub(den.len()) + 1];
    while r.len() >= den.len() && !r.is_empty() {
        let shift = r.len() - den.len();
        let factor = r.last().unwrap().clone() / lead.clone();
        for (k, d) in den.iter().enumerate() {
            let delta = &factor * d;
            r[shift + k] -= delta;
        }
        q[shift] = factor;
        r.pop();
        r = trim(r);
    }
    trim(q)
}

fn squarefree(p: &[Rational]) -> Vec<Rational> {
    let (mut a, mut b) = (trim(p.to_vec()), trim(derivative(p)));
    while !b.is_empty() {
        let r = remainder(&a, &b);
        a = b;
        b = r;
    }
    if a.len() <= 1 {
        return trim(p.to_vec());
    }
    quotient(p, &a)
}

fn sturm_sequence(p: &[Rational]) -> Vec<Vec<Rational>> {
    let mut seq = vec![trim(p.to_vec()), trim(derivative(p))];
    while seq.last().is_some_and(|q| q.len() > 1) {
        let k = seq.len();
        let r: Vec<Rational> = remainder(&seq[k - 2], &seq[k - 1])
            .into_iter()
            .map(|c| -c)
            .collect();
        if r.is_empty() {
            break;
        }
        seq.push(r);
    }
    seq
}

fn sign_changes(seq: &[Vec<Rational>], x: &Rational) -> usize {
    let signs: Vec<bool> = seq
        .iter()
        .map(|q| q.iter().rev().fold(Rational::zero(), |acc, c| acc * x + c))
        .filter(|v| !v.is_zero())
        .map(|v| v.is_positive())
        .collect();
    signs.windows(2).filter(|w| w[0] != w[1]).count()
}

/// Spectral radius of a nonnegative matrix by power iteration from the
/// all-ones vector.
pub fn perron_root(m: &[Vec<f64>]) -> Result<f64> {
    let n = m.len();
    let mut v = vec![1.0; n];
    let mut estimate = 0.0;
    for _ in 0..PERRON_MAX_ITER {
        let w: Vec<f64> = m
            .iter()
            .map(|r| r.iter().zip(&v).map(|(a, b)| a * b).sum())
            .collect();
        let norm = w.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
        if norm == 0.0 {
            return Ok(0.0);
        }
        let next: Vec<f64> = w.iter().map(|x| x / norm).collect();
        let moved = next
            .iter()
            .zip(&v)
            .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));
        let converged = (norm - estimate).abs() <= PERRON_TOL * norm && moved <= PERRON_TOL * 1e3;
        estimate = norm;
        v = next;
        if converged {
            return Ok(estimate);
        }
    }
    Err(Error::NoConvergence("Perron root".into()))
}

/// Hilbert diameter of the image of `source` under `a`, taken over images
/// of extreme rays; infinite when an image touches the boundary of `target`.
pub fn image_diameter(a: &[Vec<f64>], source: &Cone, target: &Cone) -> Result<f64> {
    let images: Vec<Vec<f64>> = source
        .generators
        .iter()
        .map(|g| {
            a.iter()
                .map(|r| r.iter().zip(g).map(|(p, q)| p * q).sum())
                .collect()
        })
        .collect();
    if images.iter().any(|x| !target.contains(x)) {
        return Err(Error::OutsideCone);
    }
    if images.iter().any(|x| !target.contains_interior(x)) {
        return Ok(f64::INFINITY);
    }
    let mut diameter: f64 = 0.0;
    for i in 0..images.len() {
        for j in i + 1..images.len() {
            diameter = diameter.max(hilbert_distance(target, &images[i], &images[j])?);
        }
    }
    Ok(diameter)
}

/// Contraction factor `tanh(Δ/4)` of a map whose image has Hilbert diameter `Δ`.
pub fn birkhoff_coefficient(diameter: f64) -> f64 {
    if diameter.is_infinite() {
        1.0
    } else {
        (diameter / 4.0).tanh()
    }
}

/// Transition matrices of a split or a word of splits. The transverse matrix
/// maps measures on the later track to the earlier one; the tangential matrix
/// goes the other way and is its transpose.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct TransitionPair {
    pub transverse: IntMatrix,
    pub tangential: IntMatrix,
}

impl TransitionPair {
    pub fn identity(n: usize) -> Self {
        TransitionPair {
            transverse: IntMatrix::identity(n),
            tangential: IntMatrix::identity(n),
        }
    }
}

impl<F: Coord> SplitEvent<F> {
    pub fn record(&self) -> SplitRecord {
        SplitRecord {
            edge: self.edge,
            side: self.side,
            losers: self.losers,
            winners: self.winners,
        }
    }
}

/// `I + M_{eb} + M_{ec}` for losers `b, c` (repeated losers accumulate).
pub fn split_transition(rec: &SplitRecord, branches: usize) -> Result<TransitionPair> {
    if rec.edge >= branches || rec.losers.iter().any(|&b| b >= branches) {
        return Err(Error::Inconsistent(
            "split refers to an unknown branch".into(),
        ));
    }
    let mut m = IntMatrix::identity(branches);
    for &b in &rec.losers {
        m.rows[rec.edge][b] += 1;
    }
    Ok(TransitionPair {
        tangential: m.transpose(),
        transverse: m,
    })
}

/// Transition pair of a word: transverse matrices multiplied in trajectory
/// order, tangential ones in reverse order.
pub fn compose_word<'a>(
    records: impl IntoIterator<Item = &'a SplitRecord>,
    branches: usize,
) -> Result<TransitionPair> {
    let mut out = TransitionPair::identity(branches);
    for rec in records {
        let step = split_transition(rec, branches)?;
        out.transverse = out.transverse.mul(&step.transverse)?;
        out.tangential = step.tangential.mul(&out.tangential)?;
    }
    Ok(out)
}

/// Per-edge sequences of split sides along a word.
pub fn edge_words<'a>(
    records: impl IntoIterator<Item = &'a SplitRecord>,
) -> BTreeMap<EdgeId, Vec<Side>> {
    let mut out: BTreeMap<EdgeId, Vec<Side>> = BTreeMap::new();
    for rec in records {
        out.entry(rec.edge).or_default().push(rec.side);
    }
    out
}

/// Rebuilds a splitting sequence from the per-edge words: repeatedly
/// performs a ready split, i.e. one on a branch that is large at both ends
/// and still has letters, choosing among the ready ones with `pick`.
pub fn reconstruct_with(
    start: &TrainTrack,
    end: &TrainTrack,
    words: &BTreeMap<EdgeId, Vec<Side>>,
    pick: impl Fn(&[EdgeId]) -> EdgeId,
) -> Result<(Vec<SplitRecord>, TransitionPair)> {
    let mut remaining: BTreeMap<EdgeId, std::collections::VecDeque<Side>> = words
        .iter()
        .map(|(&e, w)| (e, w.iter().copied().collect()))
        .collect();
    let mut current = start.clone();
    let mut records = Vec::new();
    loop {
        remaining.retain(|_, w| !w.is_empty());
        if remaining.is_empty() {
            break;
        }
        let ready: Vec<EdgeId> = current
            .large_branches()
            .into_iter()
            .filter(|e| remaining.contains_key(e))
            .collect();
        if ready.is_empty() {
            return Err(Error::Inconsistent("no split is ready".into()));
        }
        let e = pick(&ready);
        let side = remaining
            .get_mut(&e)
            .and_then(|w| w.pop_front())
            .expect("ready edge has letters");
        let (next, rec) = current.split(e, side)?;
        current = next;
        records.push(rec);
    }
    if current != *end {
        return Err(Error::Inconsistent(
            "words do not lead to the final track".into(),
        ));
    }
    let pair = compose_word(&records, start.branch_count())?;
    Ok((records, pair))
}

/// [`reconstruct_with`] choosing the ready branch of smallest index.
pub fn reconstruct_from_words(
    start: &TrainTrack,
    end: &TrainTrack,
    words: &BTreeMap<EdgeId, Vec<Side>>,
) -> Result<(Vec<SplitRecord>, TransitionPair)> {
    reconstruct_with(start, end, words, |ready| ready[0])
}

/// Generators `1_large - 1_small - 1_small` of the space by which tangential
/// measures are defined.
pub fn equivalence_space(track: &TrainTrack) -> Vec<Vec<i64>> {
    track.switch_rows()
}

/// Whether `a - b` lies in the equivalence space of `track`.
pub fn equivalent_mod_v(track: &TrainTrack, a: &[Rational], b: &[Rational]) -> bool {
    let diff: Vec<Rational> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    in_span(&to_rational_rows(&equivalence_space(track)), &diff, 0.0)
}

/// Cone of tangential measures of a track modulo its equivalence space,
/// in coordinates given by an integer projection whose kernel is the
/// equivalence space.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentialCone {
    pub projection: Vec<Vec<i64>>,
    pub cone: Cone,
}

impl TangentialCone {
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        self.projection
            .iter()
            .map(|r| r.iter().zip(x).map(|(&a, b)| a as f64 * b).sum())
            .collect()
    }
}

pub fn tangential_cone(track: &TrainTrack) -> Result<TangentialCone> {
    use num_traits::ToPrimitive;
    let n = track.branch_count();
    let rows = to_rational_rows(&equivalence_space(track));
    let projection: Vec<Vec<i64>> = crate::linalg::kernel(&rows, n, 0.0)
        .iter()
        .map(|v| {
            crate::polyhedral::primitive(v)
                .iter()
                .map(|x| {
                    x.to_i64()
                        .ok_or_else(|| Error::Overflow("projection entry".into()))
                })
                .collect::<Result<Vec<i64>>>()
        })
        .collect::<Result<_>>()?;
    let k = projection.len();
    let columns: Vec<Vec<i64>> = (0..n)
        .map(|i| projection.iter().map(|r| r[i]).collect())
        .collect();
    let facets = extreme_rays(&[], &to_rational_rows(&columns), k)
        .map_err(|_| Error::Unsupported("tangential cone is not full-dimensional".into()))?;
    let facet_rows: Vec<Vec<Rational>> = facets
        .iter()
        .map(|f| f.iter().cloned().map(Rational::from_integer).collect())
        .collect();
    if crate::linalg::rank(&facet_rows, k, 0.0) < k {
        return Err(Error::Unsupported("tangential cone is not pointed".into()));
    }
    let cone = Cone {
        facets: to_float_rows(&facets),
        generators: columns
            .iter()
            .map(|c| c.iter().map(|&x| x as f64).collect())
            .collect(),
    };
    Ok(TangentialCone { projection, cone })
}

/// Hilbert diameter, in the tangential cone `target`, of the image of all
/// nonnegative branch weights under the tangential matrix `m`.
pub fn tangential_image_diameter(m: &IntMatrix, target: &TangentialCone) -> Result<f64> {
    let n = m.size();
    let a: Vec<Vec<f64>> = target
        .projection
        .iter()
        .map(|row| {
            (0..n)
                .map(|j| (0..n).map(|i| row[i] as f64 * m.rows[i][j] as f64).sum())
                .collect()
        })
        .collect();
    image_diameter(&a, &Cone::orthant(n), &target.cone)
}

/// Outcome of analysing a periodic splitting word.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PAReport {
    pub support: Vec<String>,
    pub filling: bool,
    pub is_pa: bool,
    /// Perron root of the period transverse matrix.
    pub dilatation: f64,
    /// Height scaling over one period, the reciprocal of the tangential Perron root.
    pub lambda_h: f64,
    /// Perron root of the period tangential matrix.
    pub tangential_root: f64,
    pub period_matrix: TransitionPair,
    /// Smallest power of the period map sending every vertex curve into
    /// the interior of the measure cone.
    pub good_power: Option<usize>,
}

/// Analyses the word of one period from the track `track` at its start,
/// with `relabeling` identifying the final track with `track`.
pub fn analyze_periodic_word(
    track: &TrainTrack,
    word: &[SplitRecord],
    relabeling: &Relabeling,
) -> Result<PAReport> {
    let n = track.branch_count();
    if relabeling.map.len() != n {
        return Err(Error::Inconsistent(
            "relabeling size differs from the track".into(),
        ));
    }
    let mut support: BTreeSet<EdgeId> = word.iter().map(|r| r.edge).collect();
    loop {
        let image: BTreeSet<EdgeId> = support.iter().map(|&e| relabeling.map[e]).collect();
        let before = support.len();
        support.extend(image);
        if support.len() == before {
            break;
        }
    }
    let filling = !support.is_empty() && is_filling_subtrack(track, &Subgraph(support.clone()))?;

    // Period map on measures of `track`: relabel to the final track, then pull back.
    let word_pair = compose_word(word, n)?;
    let mut perm = IntMatrix {
        rows: vec![vec![0; n]; n],
    };
    for e in 0..n {
        perm.rows[relabeling.map[e]][e] = 1;
    }
    let transverse = word_pair.transverse.mul(&perm)?;
    let period_matrix = TransitionPair {
        tangential: transverse.transpose(),
        transverse,
    };
    let dilatation = period_matrix.transverse.spectral_radius();
    let tangential_root = period_matrix.tangential.spectral_radius();

    let mut good_power = None;
    if filling {
        let curves = vertex_curves(track)?;
        let mut power = period_matrix.transverse.clone();
        for k in 1..=4 * n {
            let interior = curves.iter().all(|c| {
                let x: Vec<f64> = c.iter().map(|&v| v as f64).collect();
                power.apply_f64(&x).iter().all(|&v| v > 0.0)
            });
            if interior {
                good_power = Some(k);
                break;
            }
            power = match power.mul(&period_matrix.transverse) {
                Ok(p) => p,
                Err(_) => break,
            };
        }
    }
    Ok(PAReport {
        support: support
            .iter()
            .map(|&e| track.label(e).to_string())
            .collect(),
        filling,
        is_pa: filling,
        dilatation,
        lambda_h: 1.0 / tangential_root,
        tangential_root,
        period_matrix,
        good_power,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::delaunay::flip;
    use crate::fixtures;
    use crate::flow::{detect_periodicity, run_flow, CheckMode};
    use crate::traintrack::{dual_track, Direction};

    #[test]
    fn quadrant_distance_is_log_two() {
        let c = Cone::orthant(2);
        let d = hilbert_distance(&c, &[1.0, 1.0], &[2.0, 1.0]).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-12);
        assert_eq!(hilbert_distance(&c, &[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!(
            hilbert_distance(&c, &[1.0, 2.0], &[3.0, 6.0])
                .unwrap()
                .abs()
                < 1e-15
        );
        assert_eq!(
            hilbert_distance(&c, &[1.0, 0.0], &[1.0, 1.0]),
            Err(Error::Boundary)
        );
        assert_eq!(
            hilbert_distance(&c, &[1.0, -1.0], &[1.0, 1.0]),
            Err(Error::OutsideCone)
        );
    }

    #[test]
    fn golden_matrix_diameter() {
        let c = Cone::orthant(2);
        let a = vec![vec![2.0, 1.0], vec![1.0, 1.0]];
        let d = image_diameter(&a, &c, &c).unwrap();
        assert!((d - 2f64.ln()).abs() < 1e-12);
        assert!((birkhoff_coefficient(d) - 0.171573).abs() < 1e-6);
        assert_eq!(birkhoff_coefficient(0.0), 0.0);
        let id = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
        assert_eq!(image_diameter(&id, &c, &c).unwrap(), f64::INFINITY);
    }

    #[test]
    fn cone_from_facets_and_generators_agree() {
        let facets = vec![
            vec![1, 0, 0],
            vec![0, 1, 0],
            vec![0, 0, 1],
            vec![-1, 0, 2],
            vec![0, -1, 2],
        ];
        let c = Cone::from_integer_facets(&facets).unwrap();
        assert_eq!(c.generators.len(), 4);
        let gens: Vec<Vec<i64>> = c
            .generators
            .iter()
            .map(|g| g.iter().map(|&x| x as i64).collect())
            .collect();
        let back = Cone::from_integer_generators(&gens).unwrap();
        assert_eq!(back.facets.len(), 4);
        for g in &c.generators {
            assert!(back.contains(g));
        }
    }

    #[test]
    fn t2_first_split_matrices() {
        let s = fixtures::t2();
        let (track, before) = dual_track(&s, Direction::Vertical).unwrap();
        let (split, rec) = track.split(0, Side::L).unwrap();
        let pair = split_transition(&rec, 3).unwrap();
        assert_eq!(
            pair.transverse.rows,
            vec![vec![1, 2, 0], vec![0, 1, 0], vec![0, 0, 1]]
        );
        assert_eq!(pair.tangential, pair.transverse.transpose());
        assert_eq!(pair.transverse.det(), rational(1, 1));
        assert!(pair.transverse.dominates_identity());
        let (flipped, _) = flip(&s, 0).unwrap();
        let (after_track, after) = dual_track(&flipped, Direction::Vertical).unwrap();
        assert_eq!(split, after_track);
        assert_eq!(pair.transverse.apply(&after.transverse), before.transverse);
        let pushed = pair.tangential.apply(&before.tangential);
        assert_eq!(
            pushed,
            vec![rational(0, 1), rational(13, 10), rational(1, 1)]
        );
        assert_eq!(
            after.tangential,
            vec![rational(1, 1), rational(23, 10), rational(0, 1)]
        );
        assert!(equivalent_mod_v(&after_track, &pushed, &after.tangential));
        assert!(!equivalent_mod_v(&after_track, &pushed, &before.transverse));
    }

    #[test]
    fn gold_period_is_pseudo_anosov() {
        let traj = run_flow(&fixtures::gold(), 4.0, 100, CheckMode::EveryEvent).unwrap();
        let p = detect_periodicity(&traj).unwrap().unwrap();
        let states = traj.states().unwrap();
        let (track, _) = dual_track(&states[p.m], Direction::Vertical).unwrap();
        let word: Vec<SplitRecord> = p.word.iter().map(|e| e.record()).collect();
        let report = analyze_periodic_word(&track, &word, &p.relabeling).unwrap();
        let golden_sq = (3.0 + 5f64.sqrt()) / 2.0;
        assert!(report.is_pa && report.filling);
        assert!(
            (report.dilatation - golden_sq).abs() < 1e-9,
            "{}",
            report.dilatation
        );
        assert!((report.dilatation * report.lambda_h - 1.0).abs() < 1e-9);
        assert!(report.good_power.is_some());
    }

    #[test]
    fn commuting_splits_give_one_matrix() {
        let a = SplitRecord {
            edge: 0,
            side: Side::L,
            losers: [2, 3],
            winners: [4, 5],
        };
        let b = SplitRecord {
            edge: 1,
            side: Side::R,
            losers: [4, 5],
            winners: [2, 3],
        };
        let ab = compose_word([&a, &b], 6).unwrap();
        let ba = compose_word([&b, &a], 6).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(compose_word([], 6).unwrap(), TransitionPair::identity(6));
    }

    #[test]
    fn perron_of_golden_matrix() {
        let r = perron_root(&[vec![2.0, 1.0], vec![1.0, 1.0]]).unwrap();
        assert!((r - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        let exact = IntMatrix {
            rows: vec![vec![2, 1], vec![1, 1]],
        }
        .spectral_radius();
        assert!((exact - r).abs() < 1e-12);
    }

    #[test]
    fn spectral_radius_handles_unipotent_and_nilpotent() {
        let twist = IntMatrix {
            rows: vec![vec![1, 1, 0], vec![0, 1, 1], vec![0, 0, 1]],
        };
        assert!((twist.spectral_radius() - 1.0).abs() < 1e-12);
        let nil = IntMatrix {
            rows: vec![vec![0, 1], vec![0, 0]],
        };
        assert!(nil.spectral_radius().abs() < 1e-12);
        // block diagonal: golden block next to a twist block
        let mixed = IntMatrix {
            rows: vec![
                vec![2, 1, 0, 0],
                vec![1, 1, 0, 0],
                vec![0, 0, 1, 3],
                vec![0, 0, 0, 1],
            ],
        };
        assert!((mixed.spectral_radius() - (3.0 + 5f64.sqrt()) / 2.0).abs() < 1e-12);
        assert_eq!(
            IntMatrix {
                rows: vec![vec![2, 1], vec![1, 1]]
            }
            .characteristic_polynomial(),
            vec![BigInt::from(1), BigInt::from(-3), BigInt::from(1)]
        );
    }
    #[test]
    fn single_twist_on_torus_is_reducible() {
        let (track, _) = dual_track(&fixtures::t2(), Direction::Vertical).unwrap();
        for side in [Side::L, Side::R] {
            let (after, rec) = track.split(0, side).unwrap();
            let relabeling =
                crate::flow::isomorphisms(track.triangulation(), after.triangulation())
                    .into_iter()
                    .find(|r| {
                        (0..track.branch_count()).all(|e| {
                            track.width_signs()[e] * r.signs[e] == after.width_signs()[r.map[e]]
                        })
                    })
                    .expect("one split returns the torus track");
            let report = analyze_periodic_word(&track, &[rec], &relabeling).unwrap();
            assert!(!report.filling);
            assert!(!report.is_pa);
            assert_eq!(report.support.len(), 2);
            assert!((report.dilatation - 1.0).abs() < 1e-12);
            assert!((report.tangential_root - 1.0).abs() < 1e-12);
            assert!(report.good_power.is_none());
        }
    }
}
