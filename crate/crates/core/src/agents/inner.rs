use serde::{Deserialize, Serialize};

/// Stopping tolerance of the projected-gradient loop.
pub const INNER_TOL: f64 = 1e-8;
/// Iteration cap of the projected-gradient loop.
pub const INNER_MAX_ITERS: usize = 1000;

const DYKSTRA_TOL: f64 = 1e-13;
const DYKSTRA_MAX_ITERS: usize = 2000;

/// How the optimistic transition vector is chosen inside each per-pair set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum InnerSolver {
    /// Simplex intersected with the 2-norm ball, by projected gradient.
    #[default]
    ProjectedGradient,
    /// Simplex intersected with the 1-norm ball of radius `sqrt(S) r`, which
    /// contains the 2-norm ball of radius `r`; solved exactly by moving mass
    /// towards the best state.
    L1Relaxation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InnerSolution {
    pub p: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for j in 1..v.len() {
        if v[j] > v[best] {
            best = j;
        }
    }
    best
}

fn vertex(n: usize, j: usize) -> Vec<f64> {
    let mut p = vec![0.0; n];
    p[j] = 1.0;
    p
}

/// Euclidean projection onto the probability simplex (sort and threshold).
pub fn project_simplex(y: &[f64]) -> Vec<f64> {
    let mut u = y.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    y.iter().map(|v| (v - theta).max(0.0)).collect()
}

fn project_ball(y: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let d = dist(y, center);
    if d <= radius {
        return y.to_vec();
    }
    let s = radius / d;
    center.iter().zip(y).map(|(c, v)| c + s * (v - c)).collect()
}

/// Projection onto `simplex ∩ {||p - center|| <= radius}` by Dykstra's
/// alternating projections. The returned point lies on the simplex.
pub fn project_simplex_ball(y: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let n = y.len();
    let mut x = y.to_vec();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    let mut on_simplex = project_simplex(&x);
    for _ in 0..DYKSTRA_MAX_ITERS {
        let a: Vec<f64> = x.iter().zip(&p).map(|(x, p)| x + p).collect();
        on_simplex = project_simplex(&a);
        for j in 0..n {
            p[j] = a[j] - on_simplex[j];
        }
        let b: Vec<f64> = on_simplex.iter().zip(&q).map(|(s, q)| s + q).collect();
        let next = project_ball(&b, center, radius);
        for j in 0..n {
            q[j] = b[j] - next[j];
        }
        let change = dist(&next, &x);
        x = next;
        if change < DYKSTRA_TOL && dist(&x, &on_simplex) < DYKSTRA_TOL {
            break;
        }
    }
    on_simplex
}

/// `max v . p` over `p` in the simplex with `||p - center||_2 <= radius`.
///
/// `center` must lie on the simplex. When the best vertex is inside the ball
/// it is returned directly; otherwise projected gradient ascent runs until
/// successive iterates move less than [`INNER_TOL`].
pub fn max_over_simplex_ball(v: &[f64], center: &[f64], radius: f64) -> InnerSolution {
    let n = v.len();
    let best = argmax(v);
    let top = vertex(n, best);
    if dist(&top, center) <= radius {
        return InnerSolution {
            value: v[best],
            p: top,
            iterations: 0,
            converged: true,
        };
    }
    let mean = v.iter().sum::<f64>() / n as f64;
    let g: Vec<f64> = v.iter().map(|x| x - mean).collect();
    let gn = g.iter().map(|x| x * x).sum::<f64>().sqrt();
    if gn == 0.0 {
        return InnerSolution {
            value: dot(v, center),
            p: center.to_vec(),
            iterations: 0,
            converged: true,
        };
    }
    let step = radius.max(1e-3) / gn;
    let mut p = center.to_vec();
    let mut converged = false;
    let mut iterations = 0;
    while iterations < INNER_MAX_ITERS {
        iterations += 1;
        let y: Vec<f64> = p.iter().zip(&g).map(|(p, g)| p + step * g).collect();
        let next = project_simplex_ball(&y, center, radius);
        let change = dist(&next, &p);
        p = next;
        if change < INNER_TOL {
            converged = true;
            break;
        }
    }
    InnerSolution {
        value: dot(v, &p),
        p,
        iterations,
        converged,
    }
}

/// `max v . p` over the simplex with `||p - center||_1 <= radius`: moves up
/// to `radius / 2` of mass onto the best state, taking it from the worst
/// states first.
pub fn max_over_simplex_l1(v: &[f64], center: &[f64], radius: f64) -> InnerSolution {
    let n = v.len();
    let best = argmax(v);
    let mut p = center.to_vec();
    let mut budget = (radius / 2.0).min(1.0 - p[best]).max(0.0);
    p[best] += budget;
    let mut order: Vec<usize> = (0..n).filter(|&j| j != best).collect();
    order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    for j in order {
        if budget <= 0.0 {
            break;
        }
        let take = p[j].min(budget);
        p[j] -= take;
        budget -= take;
    }
    InnerSolution {
        value: dot(v, &p),
        p,
        iterations: 0,
        converged: true,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_simplex(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let s: f64 = raw.iter().sum();
        raw.iter().map(|x| x / s).collect()
    }

    /// Exact optimum: by the KKT conditions the maximizer is
    /// `Proj_simplex(center + t v)` for the `t` at which it meets the sphere.
    fn kkt_oracle(v: &[f64], center: &[f64], radius: f64) -> f64 {
        let at = |t: f64| {
            let y: Vec<f64> = center.iter().zip(v).map(|(c, v)| c + t * v).collect();
            project_simplex(&y)
        };
        let (mut lo, mut hi) = (0.0, 1.0);
        while dist(&at(hi), center) < radius && hi < 1e12 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if dist(&at(mid), center) < radius {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        dot(v, &at(lo))
    }

    #[test]
    fn simplex_projection_is_feasible_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let y: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
            let p = project_simplex(&y);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            assert!(p.iter().all(|x| *x >= 0.0));
            let again = project_simplex(&p);
            assert!(dist(&p, &again) < 1e-12);
        }
    }

    #[test]
    fn projected_gradient_matches_kkt_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.random_range(2..7);
            let c = random_simplex(&mut rng, n);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let r = rng.random_range(0.01..0.8);
            let sol = max_over_simplex_ball(&v, &c, r);
            let exact = kkt_oracle(&v, &c, r);
            assert!((sol.value - exact).abs() < 1e-6, "{} vs {exact}", sol.value);
            assert!(dist(&sol.p, &c) <= r * (1.0 + 1e-6));
        }
    }

    #[test]
    fn l1_relaxation_sandwiches_ball() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let n = rng.random_range(2..7);
            let c = random_simplex(&mut rng, n);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..5.0)).collect();
            let r = rng.random_range(0.01..0.8);
            let l2 = max_over_simplex_ball(&v, &c, r).value;
            let inner = max_over_simplex_l1(&v, &c, r).value;
            let outer = max_over_simplex_l1(&v, &c, (n as f64).sqrt() * r).value;
            assert!(inner <= l2 + 1e-7 && l2 <= outer + 1e-7, "{inner} {l2} {outer}");
        }
    }

    #[test]
    fn large_radius_gives_best_vertex() {
        let sol = max_over_simplex_ball(&[0.1, 3.0, 2.0], &[0.5, 0.25, 0.25], 2.0);
        assert_eq!(sol.p, vec![0.0, 1.0, 0.0]);
        assert_eq!(sol.value, 3.0);
    }

    #[test]
    fn zero_radius_keeps_center() {
        let c = [0.2, 0.3, 0.5];
        let sol = max_over_simplex_ball(&[1.0, 0.0, 2.0], &c, 0.0);
        assert!(dist(&sol.p, &c) < 1e-9);
        let l1 = max_over_simplex_l1(&[1.0, 0.0, 2.0], &c, 0.0);
        assert_eq!(l1.p, c.to_vec());
    }
}
