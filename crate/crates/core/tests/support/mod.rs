//! Independent reference implementations used as test oracles. Nothing here
//! shares code with the library's solvers.
#![allow(dead_code)]

use minmax_core::numkit::SeededRng;
use minmax_core::projections::Norm;

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `‖a − b‖ / max(‖a‖, ‖b‖)`, with a floor so all-zero pairs compare equal.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    dist2(a, b) / na.max(nb).max(1e-12)
}

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    let mut p = x.to_vec();
    (0..x.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let fp = f(&p);
            p[i] = orig - h;
            let fm = f(&p);
            p[i] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect()
}

/// Classical sort-and-threshold simplex projection.
pub fn simplex_by_sort(b: &[f64]) -> Vec<f64> {
    let mut u = b.to_vec();
    u.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    b.iter().map(|&x| (x - tau).max(0.0)).collect()
}

fn clip(a: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    a.iter().zip(lo.iter().zip(hi)).map(|(&x, (&l, &h))| x.max(l).min(h)).collect()
}

/// Sort-based projection onto the ℓ1 ball of radius `eps`.
fn l1_ball(v: &[f64], eps: f64) -> Vec<f64> {
    if v.iter().map(|x| x.abs()).sum::<f64>() <= eps {
        return v.to_vec();
    }
    let mut u: Vec<f64> = v.iter().map(|x| x.abs()).collect();
    u.sort_by(|x, y| y.partial_cmp(x).unwrap());
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - eps) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| x.signum() * (x.abs() - theta).max(0.0)).collect()
}

fn ball(norm: Norm, v: &[f64], eps: f64) -> Vec<f64> {
    match norm {
        Norm::L1 => l1_ball(v, eps),
        Norm::L2 => {
            let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if n <= eps {
                v.to_vec()
            } else {
                v.iter().map(|x| x * eps / n).collect()
            }
        }
        Norm::Linf => v.iter().map(|x| x.max(-eps).min(eps)).collect(),
        Norm::L0 => unreachable!("nonconvex; use l0_brute_force"),
    }
}

/// Dykstra's alternating projections onto box ∩ ball: converges to the
/// Euclidean projection onto the intersection of the two convex sets.
pub fn dykstra(norm: Norm, a: &[f64], eps: f64, lo: &[f64], hi: &[f64]) -> Vec<f64> {
    let d = a.len();
    let mut x = a.to_vec();
    let mut p = vec![0.0; d];
    let mut q = vec![0.0; d];
    for _ in 0..200_000 {
        let (p_prev, q_prev) = (p.clone(), q.clone());
        let xp: Vec<f64> = (0..d).map(|i| x[i] + p[i]).collect();
        let y = clip(&xp, lo, hi);
        for i in 0..d {
            p[i] = xp[i] - y[i];
        }
        let yq: Vec<f64> = (0..d).map(|i| y[i] + q[i]).collect();
        let next = ball(norm, &yq, eps);
        for i in 0..d {
            q[i] = yq[i] - next[i];
        }
        // x can stall while the correction terms still move, so all three
        // must settle.
        let change = max_abs_diff(&next, &x).max(max_abs_diff(&p, &p_prev)).max(max_abs_diff(&q, &q_prev));
        x = next;
        if change < 1e-15 {
            break;
        }
    }
    x
}

/// Minimum of `‖δ − a‖²` over every support of size at most `k`, with
/// box-clipped values on the support.
pub fn l0_brute_force(a: &[f64], k: usize, lo: &[f64], hi: &[f64]) -> f64 {
    let d = a.len();
    let c = clip(a, lo, hi);
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << d) {
        if mask.count_ones() as usize > k {
            continue;
        }
        let obj: f64 = (0..d)
            .map(|i| {
                let v = if mask & (1 << i) != 0 { c[i] } else { 0.0 };
                (v - a[i]) * (v - a[i])
            })
            .sum();
        best = best.min(obj);
    }
    best
}

pub struct ProjectionCase {
    pub a: Vec<f64>,
    pub eps: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Random instance with `d ≤ 8` and a box satisfying `lower ≤ 0 ≤ upper`.
pub fn random_projection_case(rng: &mut SeededRng, norm: Norm) -> ProjectionCase {
    let d = 1 + rng.below(8);
    let scale = [0.1, 1.0, 3.0][rng.below(3)];
    let a = (0..d).map(|_| scale * rng.normal::<f64>()).collect();
    let lower = (0..d).map(|_| if rng.bernoulli(0.2) { -5.0 } else { rng.uniform(-1.0, 0.0) }).collect();
    let upper = (0..d).map(|_| if rng.bernoulli(0.2) { 5.0 } else { rng.uniform(0.0, 1.0) }).collect();
    let eps = match norm {
        Norm::L0 => (1 + rng.below(d)) as f64,
        _ => rng.uniform(0.05, 2.0),
    };
    ProjectionCase { a, eps, lower, upper }
}
