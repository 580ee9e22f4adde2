use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::trial_core::RngStream;

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_dims<R: AsRef<[f64]>>(a: &[R], b: &[R]) -> Result<usize> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyGroup(if a.is_empty() { 1 } else { 2 }));
    }
    let p = a[0].as_ref().len();
    for r in a.iter().chain(b) {
        if r.as_ref().len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                found: r.as_ref().len(),
            });
        }
    }
    Ok(p)
}

/// Total order on samples used to make the statistic bit-for-bit symmetric
/// in its arguments.
fn sample_order<R: AsRef<[f64]>>(a: &[R], b: &[R]) -> Ordering {
    a.len().cmp(&b.len()).then_with(|| {
        a.iter()
            .flat_map(|r| r.as_ref().iter())
            .zip(b.iter().flat_map(|r| r.as_ref().iter()))
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
    })
}

fn within_sum<R: AsRef<[f64]>>(g: &[R]) -> f64 {
    let mut s = 0.0;
    for (i, u) in g.iter().enumerate() {
        for v in &g[i + 1..] {
            s += euclidean(u.as_ref(), v.as_ref());
        }
    }
    2.0 * s
}

fn row_order(x: &[f64], y: &[f64]) -> Ordering {
    x.iter()
        .zip(y)
        .map(|(u, v)| u.total_cmp(v))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

fn sorted_rows<R: AsRef<[f64]>>(g: &[R]) -> Vec<&[f64]> {
    let mut rows: Vec<&[f64]> = g.iter().map(AsRef::as_ref).collect();
    rows.sort_by(|x, y| row_order(x, y));
    rows
}

/// Sum of distances between every row of `a` and every row of `b`. Equal-size
/// groups are summed pairwise across the diagonal, in the same order as
/// `within_sum`, so a multiset compared with itself cancels exactly.
fn cross_sum(a: &[&[f64]], b: &[&[f64]]) -> f64 {
    let mut s = 0.0;
    if a.len() == b.len() {
        for i in 0..a.len() {
            for j in i + 1..a.len() {
                s += euclidean(a[i], b[j]) + euclidean(a[j], b[i]);
            }
        }
        for i in 0..a.len() {
            s += euclidean(a[i], b[i]);
        }
    } else {
        for u in a {
            for v in b {
                s += euclidean(u, v);
            }
        }
    }
    s
}

/// Two-sample energy distance (V-statistic form) with Euclidean norms.
///
/// `E = 2/(n1 n2) sum |x - y| - 1/n1^2 sum |x - x'| - 1/n2^2 sum |y - y'|`
///
/// Rows are put in a canonical order first, so the value depends only on the
/// two multisets.
pub fn energy_distance<R: AsRef<[f64]>>(group1: &[R], group2: &[R]) -> Result<f64> {
    check_dims(group1, group2)?;
    let (g1, g2) = (sorted_rows(group1), sorted_rows(group2));
    let (a, b) = match sample_order(&g1, &g2) {
        Ordering::Greater => (g2, g1),
        _ => (g1, g2),
    };
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let cross = cross_sum(&a, &b);
    Ok(2.0 * cross / (na * nb) - within_sum(&a) / (na * na) - within_sum(&b) / (nb * nb))
}

/// Energy statistic for a labelling of a pooled sample, from precomputed distances.
fn labelled_energy(dist: &[f64], n: usize, in_first: &[bool]) -> f64 {
    let (mut cross, mut w1, mut w2) = (0.0, 0.0, 0.0);
    let mut n1 = 0usize;
    for i in 0..n {
        if in_first[i] {
            n1 += 1;
        }
        for j in i + 1..n {
            let d = dist[i * n + j];
            match (in_first[i], in_first[j]) {
                (true, true) => w1 += d,
                (false, false) => w2 += d,
                _ => cross += d,
            }
        }
    }
    let (a, b) = (n1 as f64, (n - n1) as f64);
    2.0 * cross / (a * b) - 2.0 * w1 / (a * a) - 2.0 * w2 / (b * b)
}

/// Permutation p-value for the energy statistic: group labels are reshuffled
/// `replicates` times with the group sizes preserved, and
/// `p = (1 + #{E_perm >= E_obs}) / (replicates + 1)`.
pub fn energy_permutation_test<R: AsRef<[f64]>>(
    group1: &[R],
    group2: &[R],
    replicates: usize,
    rng: &mut RngStream,
) -> Result<f64> {
    check_dims(group1, group2)?;
    if replicates == 0 {
        return Err(Error::config("permutations", "must be at least 1"));
    }
    let pooled: Vec<&[f64]> = group1.iter().chain(group2).map(AsRef::as_ref).collect();
    let n = pooled.len();
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(pooled[i], pooled[j]);
            dist[i * n + j] = d;
            dist[j * n + i] = d;
        }
    }
    let mut labels: Vec<bool> = (0..n).map(|i| i < group1.len()).collect();
    let observed = labelled_energy(&dist, n, &labels);
    // permuted statistics within round-off of the observed one count as ties
    let slack = 1e-12 * observed.abs().max(1.0);
    let mut exceed = 0usize;
    for _ in 0..replicates {
        rng.shuffle(&mut labels);
        if labelled_energy(&dist, n, &labels) >= observed - slack {
            exceed += 1;
        }
    }
    Ok((1 + exceed) as f64 / (replicates + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_multisets_are_zero() {
        let a = vec![vec![0.0, 1.0], vec![2.0, -1.0], vec![0.5, 0.5]];
        let b = vec![vec![2.0, -1.0], vec![0.5, 0.5], vec![0.0, 1.0]];
        assert_eq!(energy_distance(&a, &b).unwrap(), 0.0);
    }

    #[test]
    fn single_points() {
        assert_eq!(energy_distance(&[vec![0.0]], &[vec![1.0]]).unwrap(), 2.0);
    }

    #[test]
    fn two_versus_one() {
        // cross: |(0,0)-(0,1)| + |(1,1)-(0,1)| = 2, times 2/(2*1) = 2
        // within group one: 2 * sqrt2 / 4
        let a = vec![vec![0.0, 0.0], vec![1.0, 1.0]];
        let b = vec![vec![0.0, 1.0]];
        let e = energy_distance(&a, &b).unwrap();
        assert!((e - (2.0 - 2f64.sqrt() / 2.0)).abs() < 1e-15);
    }

    #[test]
    fn argument_order_is_exact() {
        let a = vec![vec![0.3, 1.7], vec![-2.1, 0.4], vec![0.9, 0.9]];
        let b = vec![vec![1.1, -0.2], vec![0.0, 0.0]];
        assert_eq!(
            energy_distance(&a, &b).unwrap().to_bits(),
            energy_distance(&b, &a).unwrap().to_bits()
        );
    }

    #[test]
    fn errors() {
        let empty: Vec<Vec<f64>> = vec![];
        assert_eq!(energy_distance(&empty, &[vec![1.0]]).unwrap_err(), Error::EmptyGroup(1));
        assert!(matches!(
            energy_distance(&[vec![1.0]], &[vec![1.0, 2.0]]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn permutation_p_values() {
        let mut rng = RngStream::new(17, 0);
        let same = vec![vec![0.0], vec![1.0], vec![2.0], vec![3.0]];
        let p = energy_permutation_test(&same, &same, 199, &mut rng).unwrap();
        assert!(p > 0.9, "{p}");

        let mut g = RngStream::new(5, 5);
        let normal = |g: &mut RngStream, mu: f64| {
            // Box-Muller
            let (u1, u2) = (1.0 - g.uniform(), g.uniform());
            mu + (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let a: Vec<Vec<f64>> = (0..10).map(|_| vec![normal(&mut g, 0.0)]).collect();
        let b: Vec<Vec<f64>> = (0..10).map(|_| vec![normal(&mut g, 10.0)]).collect();
        let p = energy_permutation_test(&a, &b, 999, &mut rng).unwrap();
        assert!(p <= 0.01, "{p}");
        assert!(p >= 1.0 / 1000.0);
    }
}
