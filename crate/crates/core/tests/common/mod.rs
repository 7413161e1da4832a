//! Reference computations that share no code path with the library.
#![allow(dead_code)]

use spiderstick::{SpiderPoint, SpiderSample};

/// Standard normal distribution function by composite Simpson quadrature of
/// the density on `[0, |z|]`, accumulated with Kahan summation.
pub fn phi_quadrature(z: f64) -> f64 {
    if z == 0.0 {
        return 0.5;
    }
    let a = z.abs();
    let intervals = 400_000usize;
    let h = a / intervals as f64;
    let density = |t: f64| (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let (mut sum, mut c) = (0.0f64, 0.0f64);
    for i in 0..=intervals {
        let w = if i == 0 || i == intervals {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let y = w * density(i as f64 * h) - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    let integral = sum * h / 3.0;
    if z > 0.0 {
        0.5 + integral
    } else {
        0.5 - integral
    }
}

/// Atoms of the example family as plain `(leg, x, p)` triples.
pub fn xt_atoms(legs: usize, t: f64) -> Vec<(usize, f64, f64)> {
    let k = legs as f64;
    let mut atoms = vec![(legs, k - 1.0 + k * t, 1.0 / k)];
    for leg in 1..legs {
        atoms.push((leg, 1.0, 1.0 / k));
    }
    atoms
}

/// `(p_n, p_{n,k}, bound)` straight from the definitions, with moments
/// taken directly over the atoms and the supplied normal cdf.
pub fn bound_oracle(
    atoms: &[(usize, f64, f64)],
    legs: usize,
    mean_leg: usize,
    n: f64,
    phi: impl Fn(f64) -> f64,
) -> (f64, f64, f64) {
    const CS: f64 = 0.4748;
    let fold = |k: usize, leg: usize, x: f64| if leg == k { x } else { -x };
    let mut p_n = 0.0;
    let mut mk = (0.0, 0.0, 0.0);
    for k in 1..=legs {
        let m: f64 = atoms.iter().map(|&(l, x, p)| p * fold(k, l, x)).sum();
        let s2: f64 = atoms
            .iter()
            .map(|&(l, x, p)| p * (fold(k, l, x) - m).powi(2))
            .sum();
        let t3: f64 = atoms
            .iter()
            .map(|&(l, x, p)| p * (fold(k, l, x) - m).abs().powi(3))
            .sum();
        let s = s2.sqrt();
        p_n += phi(n.sqrt() * m / s) + t3 / (n.sqrt() * s * s * s) * CS;
        if k == mean_leg {
            mk = (m, s2, t3);
        }
    }
    let (m, s2, t3) = mk;
    let s = s2.sqrt();
    let p_nk = phi(n.sqrt() * m / s) - t3 / (n.sqrt() * s * s * s) * CS;
    (p_n, p_nk, p_n + n * m * m / s2 * (1.0 - p_nk))
}

/// Minimizer of the Fréchet sum found leg by leg: along leg `k` the objective
/// is `(1/n) sum (x - F_k(X_j))^2` for `x >= 0`, a parabola clipped at zero.
/// Returns `(leg or 0 for origin, position, objective)`.
pub fn brute_force_mean(sample: &SpiderSample) -> (usize, f64, f64) {
    let legs = sample.spider().legs();
    let pts: Vec<(usize, f64)> = sample
        .points()
        .iter()
        .map(|p| (p.leg().unwrap_or(0), p.radius()))
        .collect();
    let n = pts.len() as f64;
    let objective = |leg: usize, x: f64| -> f64 {
        pts.iter()
            .map(|&(l, r)| {
                let d = if l == leg || l == 0 || x == 0.0 {
                    (x - r).abs()
                } else {
                    x + r
                };
                d * d
            })
            .sum::<f64>()
            / n
    };
    let mut best = (0usize, 0.0f64, objective(0, 0.0));
    for leg in 1..=legs {
        let mean_fold: f64 = pts
            .iter()
            .map(|&(l, r)| if l == leg { r } else { -r })
            .sum::<f64>()
            / n;
        if mean_fold > 0.0 {
            let v = objective(leg, mean_fold);
            if v < best.2 {
                best = (leg, mean_fold, v);
            }
        }
    }
    best
}

/// Smallest objective value over a grid of step `step` on every leg.
pub fn grid_minimum(sample: &SpiderSample, step: f64) -> f64 {
    let legs = sample.spider().legs();
    let reach = sample
        .points()
        .iter()
        .map(|p| p.radius())
        .fold(0.0, f64::max);
    let steps = (reach / step).ceil() as usize + 1;
    let mut best = sample.frechet_function(&SpiderPoint::ORIGIN).unwrap();
    for leg in 1..=legs {
        for i in 1..=steps {
            let p = SpiderPoint::on_leg(leg, i as f64 * step).unwrap();
            best = best.min(sample.frechet_function(&p).unwrap());
        }
    }
    best
}
