//! Nelder–Mead downhill simplex (minimization).

use alloc::vec;
use alloc::vec::Vec;

const REFLECT: f64 = 1.0;
const EXPAND: f64 = 2.0;
const CONTRACT: f64 = 0.5;
const SHRINK: f64 = 0.5;

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Minimum {
    pub x: Vec<f64>,
    pub value: f64,
    /// `(iteration, best value so far)`, recorded at iteration 0 and at
    /// every strict improvement.
    pub history: Vec<(usize, f64)>,
    pub evaluations: usize,
    pub iterations: usize,
}

/// Minimizes `f` from `x0` with an axis-aligned initial simplex of edge
/// `step`. Non-finite values count as `+inf`.
pub(crate) fn minimize<F>(mut f: F, x0: &[f64], step: f64, max_iterations: usize) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let d = x0.len();
    let mut evaluations = 0;
    let mut eval = |x: &[f64]| {
        evaluations += 1;
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut points: Vec<Vec<f64>> = Vec::with_capacity(d + 1);
    points.push(x0.to_vec());
    for i in 0..d {
        let mut p = x0.to_vec();
        p[i] += step;
        points.push(p);
    }
    let mut values: Vec<f64> = points.iter().map(|p| eval(p)).collect();

    let mut best = values[0];
    let mut best_x = points[0].clone();
    for (p, &v) in points.iter().zip(&values) {
        if v < best {
            best = v;
            best_x = p.clone();
        }
    }
    let mut history = vec![(0, best)];

    let mut iterations = 0;
    let mut order: Vec<usize> = (0..=d).collect();
    let mut centroid = vec![0.0; d];
    let mut trial = vec![0.0; d];
    let mut trial2 = vec![0.0; d];

    for it in 1..=max_iterations {
        iterations = it;
        order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
        let lo = order[0];
        let hi = order[d];
        let second = order[d.saturating_sub(1)];

        if values[lo].is_finite() && collapsed(&points, &values, lo, hi) {
            break;
        }

        centroid.iter_mut().for_each(|c| *c = 0.0);
        for &i in &order[..d] {
            for (c, x) in centroid.iter_mut().zip(&points[i]) {
                *c += x;
            }
        }
        centroid.iter_mut().for_each(|c| *c /= d as f64);

        along(&centroid, &points[hi], -REFLECT, &mut trial);
        let f_reflect = eval(&trial);

        if f_reflect < values[lo] {
            along(&centroid, &points[hi], -EXPAND, &mut trial2);
            let f_expand = eval(&trial2);
            if f_expand < f_reflect {
                points[hi].copy_from_slice(&trial2);
                values[hi] = f_expand;
            } else {
                points[hi].copy_from_slice(&trial);
                values[hi] = f_reflect;
            }
        } else if f_reflect < values[second] {
            points[hi].copy_from_slice(&trial);
            values[hi] = f_reflect;
        } else {
            let outside = f_reflect < values[hi];
            if outside {
                along(&centroid, &points[hi], -CONTRACT, &mut trial2);
            } else {
                along(&centroid, &points[hi], CONTRACT, &mut trial2);
            }
            let f_contract = eval(&trial2);
            let accept = if outside {
                f_contract <= f_reflect
            } else {
                f_contract < values[hi]
            };
            if accept {
                points[hi].copy_from_slice(&trial2);
                values[hi] = f_contract;
            } else {
                let anchor = points[lo].clone();
                for &i in &order[1..] {
                    for (x, a) in points[i].iter_mut().zip(&anchor) {
                        *x = a + SHRINK * (*x - a);
                    }
                    values[i] = eval(&points[i]);
                }
            }
        }

        for (p, &v) in points.iter().zip(&values) {
            if v < best {
                best = v;
                best_x.clone_from(p);
            }
        }
        if history.last().is_some_and(|&(_, b)| best < b) {
            history.push((it, best));
        }
    }

    Minimum {
        x: best_x,
        value: best,
        history,
        evaluations,
        iterations,
    }
}

// out = c + t (p - c)
fn along(c: &[f64], p: &[f64], t: f64, out: &mut [f64]) {
    for ((o, ci), pi) in out.iter_mut().zip(c).zip(p) {
        *o = ci + t * (pi - ci);
    }
}

fn collapsed(points: &[Vec<f64>], values: &[f64], lo: usize, hi: usize) -> bool {
    let spread = (values[hi] - values[lo]).abs();
    if spread > 1e-15 * (1.0 + values[lo].abs()) {
        return false;
    }
    let diameter = points
        .iter()
        .map(|p| {
            p.iter()
                .zip(&points[lo])
                .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
        })
        .fold(0.0_f64, f64::max);
    diameter <= 1e-12 * (1.0 + points[lo].iter().fold(0.0_f64, |m, x| m.max(x.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let m = minimize(rosen, &[-1.2, 1.0], 0.5, 5000);
        assert!(
            (m.x[0] - 1.0).abs() < 1e-6 && (m.x[1] - 1.0).abs() < 1e-6,
            "{:?}",
            m.x
        );
        assert!(m
            .history
            .windows(2)
            .all(|w| w[1].1 < w[0].1 && w[1].0 > w[0].0));
    }

    #[test]
    fn non_finite_values_are_avoided() {
        let f = |x: &[f64]| {
            if x[0] < 0.0 {
                f64::NAN
            } else {
                (x[0] - 2.0).powi(2)
            }
        };
        let m = minimize(f, &[0.5], 1.0, 500);
        assert!((m.x[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn deterministic() {
        let f = |x: &[f64]| x.iter().map(|v| v.sin() + 0.1 * v * v).sum::<f64>();
        let a = minimize(f, &[1.0, -2.0, 3.0], 0.7, 300);
        let b = minimize(f, &[1.0, -2.0, 3.0], 0.7, 300);
        assert_eq!(a, b);
    }
}
