//! Extreme rays of pointed polyhedral cones by double description, in exact
//! rational arithmetic.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::linalg::{kernel, rank, solve};
use crate::scalar::Rational;

/// Fixed-size bit set over constraint indices.
#[derive(Clone, Debug, PartialEq, Eq)]
struct Bits(Vec<u64>);

impl Bits {
    fn new(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64)])
    }

    fn set(&mut self, i: usize) {
        self.0[i / 64] |= 1 << (i % 64);
    }

    fn and(&self, other: &Bits) -> Bits {
        Bits(self.0.iter().zip(&other.0).map(|(a, b)| a & b).collect())
    }

    fn count(&self) -> usize {
        self.0.iter().map(|w| w.count_ones() as usize).sum()
    }

    fn subset_of(&self, other: &Bits) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| a & !b == 0)
    }
}

struct Ray {
    coords: Vec<Rational>,
    zeros: Bits,
}

fn dot(a: &[Rational], b: &[Rational]) -> Rational {
    a.iter()
        .zip(b)
        .fold(Rational::zero(), |acc, (x, y)| acc + x * y)
}

/// Extreme rays of `{x : eq·x = 0, ineq·x ≥ 0}` in `dim` variables. The cone
/// must be pointed; the result is sorted and each ray is primitive integral.
pub fn extreme_rays(
    eq: &[Vec<Rational>],
    ineq: &[Vec<Rational>],
    dim: usize,
) -> Result<Vec<Vec<BigInt>>> {
    let basis = kernel(eq, dim, 0.0);
    let k = basis.len();
    if k == 0 {
        return Ok(Vec::new());
    }
    // Inequalities pulled back to kernel coordinates y, with x = Σ y_j basis_j.
    let rows: Vec<Vec<Rational>> = ineq
        .iter()
        .map(|row| basis.iter().map(|b| dot(row, b)).collect())
        .collect();
    if rank(&rows, k, 0.0) < k {
        return Err(Error::Unsupported("cone is not pointed".into()));
    }

    let mut chosen: Vec<usize> = Vec::new();
    let mut chosen_rows: Vec<Vec<Rational>> = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let mut trial = chosen_rows.clone();
        trial.push(row.clone());
        if rank(&trial, k, 0.0) > chosen_rows.len() {
            chosen.push(i);
            chosen_rows = trial;
            if chosen.len() == k {
                break;
            }
        }
    }

    let m = rows.len();
    let mut rays: Vec<Ray> = (0..k)
        .map(|j| {
            let mut rhs = vec![Rational::zero(); k];
            rhs[j] = Rational::one();
            let coords = solve(&chosen_rows, &rhs, 0.0).expect("independent rows");
            let mut zeros = Bits::new(m);
            for (jj, &row) in chosen.iter().enumerate() {
                if jj != j {
                    zeros.set(row);
                }
            }
            Ray { coords, zeros }
        })
        .collect();

    for (i, row) in rows.iter().enumerate() {
        if chosen.contains(&i) {
            continue;
        }
        let values: Vec<Rational> = rays.iter().map(|r| dot(row, &r.coords)).collect();
        let plus: Vec<usize> = (0..rays.len())
            .filter(|&r| values[r].is_positive())
            .collect();
        let minus: Vec<usize> = (0..rays.len())
            .filter(|&r| values[r].is_negative())
            .collect();
        let mut next: Vec<Ray> = Vec::new();
        for (r, ray) in rays.iter().enumerate() {
            if !values[r].is_negative() {
                let mut zeros = ray.zeros.clone();
                if values[r].is_zero() {
                    zeros.set(i);
                }
                next.push(Ray {
                    coords: ray.coords.clone(),
                    zeros,
                });
            }
        }
        for &p in &plus {
            for &n in &minus {
                let common = rays[p].zeros.and(&rays[n].zeros);
                if common.count() + 2 < k {
                    continue;
                }
                let adjacent = (0..rays.len())
                    .filter(|&r| r != p && r != n)
                    .all(|r| !common.subset_of(&rays[r].zeros));
                if !adjacent {
                    continue;
                }
                let (vp, vn) = (&values[p], &values[n]);
                let coords = rays[n]
                    .coords
                    .iter()
                    .zip(&rays[p].coords)
                    .map(|(a, b)| vp * a - vn * b)
                    .collect();
                let mut zeros = common;
                zeros.set(i);
                next.push(Ray { coords, zeros });
            }
        }
        rays = next;
    }

    let mut out: Vec<Vec<BigInt>> = rays
        .iter()
        .map(|r| {
            let x: Vec<Rational> = (0..dim)
                .map(|c| {
                    basis
                        .iter()
                        .zip(&r.coords)
                        .fold(Rational::zero(), |acc, (b, y)| acc + &b[c] * y)
                })
                .collect();
            primitive(&x)
        })
        .collect();
    out.sort();
    out.dedup();
    Ok(out)
}

/// The primitive integer vector on the ray through `v`.
pub fn primitive(v: &[Rational]) -> Vec<BigInt> {
    let lcm = v.iter().fold(BigInt::one(), |acc, x| acc.lcm(x.denom()));
    let ints: Vec<BigInt> = v
        .iter()
        .map(|x| (x * Rational::from_integer(lcm.clone())).to_integer())
        .collect();
    let gcd = ints.iter().fold(BigInt::zero(), |acc, x| acc.gcd(x));
    if gcd.is_zero() {
        return ints;
    }
    ints.into_iter().map(|x| x / &gcd).collect()
}
