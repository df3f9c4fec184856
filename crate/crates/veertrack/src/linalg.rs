//! Small dense linear algebra over either coordinate field.

use crate::scalar::Coord;

/// Row-reduces `rows` in place and returns the pivot columns.
/// Entries with `sign_eps(eps) == None` count as zero.
pub fn row_reduce<F: Coord>(rows: &mut [Vec<F>], ncols: usize, eps: f64) -> Vec<usize> {
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..ncols {
        if r == rows.len() {
            break;
        }
        // Largest magnitude pivot keeps float mode stable; exact mode only needs nonzero.
        let best = (r..rows.len())
            .filter(|&i| rows[i][col].sign_eps(eps).is_some())
            .max_by(|&a, &b| {
                rows[a][col]
                    .abs()
                    .partial_cmp(&rows[b][col].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        let Some(p) = best else { continue };
        rows.swap(r, p);
        let pivot = rows[r][col].clone();
        for x in rows[r].iter_mut() {
            *x = x.clone() / pivot.clone();
        }
        for i in 0..rows.len() {
            if i == r || rows[i][col].is_zero() {
                continue;
            }
            let factor = rows[i][col].clone();
            for j in 0..rows[r].len() {
                let delta = factor.clone() * rows[r][j].clone();
                rows[i][j] = rows[i][j].clone() - delta;
            }
        }
        pivots.push(col);
        r += 1;
    }
    pivots
}

pub fn rank<F: Coord>(rows: &[Vec<F>], ncols: usize, eps: f64) -> usize {
    let mut m = rows.to_vec();
    row_reduce(&mut m, ncols, eps).len()
}

/// Basis of the null space `{x : rows · x = 0}`.
pub fn kernel<F: Coord>(rows: &[Vec<F>], ncols: usize, eps: f64) -> Vec<Vec<F>> {
    let mut m = rows.to_vec();
    let pivots = row_reduce(&mut m, ncols, eps);
    let free: Vec<usize> = (0..ncols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![F::zero(); ncols];
            v[f] = F::one();
            for (r, &p) in pivots.iter().enumerate() {
                v[p] = -m[r][f].clone();
            }
            v
        })
        .collect()
}

/// Whether `target` lies in the span of `vectors`.
pub fn in_span<F: Coord>(vectors: &[Vec<F>], target: &[F], eps: f64) -> bool {
    let n = target.len();
    let base = rank(vectors, n, eps);
    let mut extended = vectors.to_vec();
    extended.push(target.to_vec());
    rank(&extended, n, eps) == base
}

/// Solves the square system `a · x = b`; `None` when singular.
pub fn solve<F: Coord>(a: &[Vec<F>], b: &[F], eps: f64) -> Option<Vec<F>> {
    let n = b.len();
    let mut aug: Vec<Vec<F>> = a
        .iter()
        .zip(b)
        .map(|(row, rhs)| {
            let mut r = row.clone();
            r.push(rhs.clone());
            r
        })
        .collect();
    let pivots = row_reduce(&mut aug, n, eps);
    if pivots.len() < n {
        return None;
    }
    Some(aug.iter().map(|r| r[n].clone()).collect())
}

pub fn mat_vec<F: Coord>(a: &[Vec<F>], x: &[F]) -> Vec<F> {
    a.iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .fold(F::zero(), |acc, (p, q)| acc + p.clone() * q.clone())
        })
        .collect()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Orthonormalizes `vectors` (modified Gram-Schmidt), dropping dependent ones.
pub fn orthonormalize(vectors: &[Vec<f64>], eps: f64) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for v in vectors {
        let mut w = v.clone();
        for b in &basis {
            let c = dot(&w, b);
            w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
        }
        let n = norm(&w);
        if n > eps {
            basis.push(w.into_iter().map(|x| x / n).collect());
        }
    }
    basis
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::{rational, Rational};

    #[test]
    fn kernel_of_switch_system() {
        // e1 = e2 + e3 twice.
        let row = vec![rational(1, 1), rational(-1, 1), rational(-1, 1)];
        let k = kernel(&[row.clone(), row], 3, 0.0);
        assert_eq!(k.len(), 2);
        for v in &k {
            let s: Rational = v[0].clone() - v[1].clone() - v[2].clone();
            assert!(num_traits::Zero::is_zero(&s));
        }
    }

    #[test]
    fn span_membership() {
        let v = vec![vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]];
        assert!(in_span(&v, &[2.0, 3.0, 5.0], 1e-12));
        assert!(!in_span(&v, &[2.0, 3.0, 4.0], 1e-12));
    }

    #[test]
    fn solves_two_by_two() {
        let a = vec![vec![2.0, 1.0], vec![1.0, 1.0]];
        let x = solve(&a, &[3.0, 2.0], 1e-12).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14 && (x[1] - 1.0).abs() < 1e-14);
    }
}
