use serde::{Deserialize, Serialize};

use super::{ConfsetError, FiniteClass, FunctionClass};

/// Covering number `N(F, alpha, ||.||_2)` stored on the log scale.
///
/// Parametric surrogates overflow `f64` for moderate dimensions, so callers
/// should work with `log_value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoveringNumber {
    pub log_value: f64,
    /// True for an actual cover (finite classes), false for the analytic surrogate.
    pub exact: bool,
}

impl CoveringNumber {
    pub fn exact(n: usize) -> Self {
        Self {
            log_value: (n as f64).ln(),
            exact: true,
        }
    }

    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// Sup over `probe` points of `||f_a(x) - f_b(x)||_2`.
pub fn probe_distance(class: &FiniteClass, a: usize, b: usize, probe: &[usize]) -> f64 {
    probe.iter().map(|&x| class.distance_at(a, b, x)).fold(0.0, f64::max)
}

/// Greedy cover: repeatedly takes the first uncovered member as a centre and
/// marks every member within `alpha` of it. Returns the centre indices.
pub fn greedy_cover(class: &FiniteClass, alpha: f64, probe: &[usize]) -> Vec<usize> {
    let mut covered = vec![false; class.len()];
    let mut centres = vec![];
    while let Some(c) = covered.iter().position(|v| !v) {
        centres.push(c);
        for (m, flag) in covered.iter_mut().enumerate() {
            if !*flag && probe_distance(class, c, m, probe) <= alpha {
                *flag = true;
            }
        }
    }
    centres
}

/// `N(F, alpha)`: greedy cover for finite classes, `dim * ln(1 + 2 C_theta / alpha)`
/// surrogate otherwise. `probe` is only used by finite classes (`None` probes
/// the whole domain).
pub fn covering_number(class: &FunctionClass, alpha: f64, probe: Option<&[usize]>) -> Result<CoveringNumber, ConfsetError> {
    if !(alpha > 0.0) {
        return Err(ConfsetError::InvalidArgument(format!("covering scale must be positive, got {alpha}")));
    }
    match class {
        FunctionClass::Finite(f) => {
            let all: Vec<usize> = (0..f.n_points).collect();
            let probe = probe.unwrap_or(&all);
            if probe.is_empty() {
                return Err(ConfsetError::InvalidArgument("empty probe set".into()));
            }
            Ok(CoveringNumber::exact(greedy_cover(f, alpha, probe).len()))
        }
        _ => {
            let dim = class.param_dim().expect("parametric class") as f64;
            let c_theta = class.theta_bound().expect("parametric class");
            Ok(CoveringNumber {
                log_value: dim * (2.0 * c_theta / alpha).ln_1p(),
                exact: false,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_class(rng: &mut ChaCha8Rng, members: usize, points: usize) -> FiniteClass {
        let ms = (0..members)
            .map(|_| (0..points).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        FiniteClass::new(points, 1, ms, 1.0, 1.0).unwrap()
    }

    /// Smallest set of centres (drawn from the class) covering every member.
    fn exhaustive_cover(class: &FiniteClass, alpha: f64, probe: &[usize]) -> usize {
        let m = class.len();
        (1..(1usize << m))
            .filter(|mask| {
                (0..m).all(|f| (0..m).any(|c| mask >> c & 1 == 1 && probe_distance(class, c, f, probe) <= alpha))
            })
            .map(|mask| mask.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn scale_above_diameter_gives_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let class = random_class(&mut rng, 6, 4);
        let probe: Vec<usize> = (0..4).collect();
        let diam = (0..6)
            .flat_map(|a| (0..6).map(move |b| (a, b)))
            .map(|(a, b)| probe_distance(&class, a, b, &probe))
            .fold(0.0, f64::max);
        let n = covering_number(&FunctionClass::Finite(class), diam, None).unwrap();
        assert_eq!(n.value().round(), 1.0);
        assert!(n.exact);
    }

    #[test]
    fn duplicate_members_cover_with_one() {
        let class = FiniteClass::new(2, 1, vec![vec![0.1, 0.2], vec![0.1, 0.2]], 1.0, 1.0).unwrap();
        for alpha in [1e-9, 0.1, 10.0] {
            let n = covering_number(&FunctionClass::Finite(class.clone()), alpha, None).unwrap();
            assert_eq!(n.log_value, 0.0);
        }
    }

    #[test]
    fn greedy_is_a_valid_cover_no_smaller_than_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let class = random_class(&mut rng, 5, 3);
            let probe = [0usize, 1, 2];
            let alpha = rng.random_range(0.05..1.0);
            let centres = greedy_cover(&class, alpha, &probe);
            for f in 0..5 {
                assert!(centres.iter().any(|&c| probe_distance(&class, c, f, &probe) <= alpha));
            }
            assert!(centres.len() >= exhaustive_cover(&class, alpha, &probe));
        }
    }

    #[test]
    fn surrogate_formula() {
        let class = FunctionClass::linear(super::super::LinearClass {
            n: 2,
            p: 3,
            c_theta: 2.0,
            c_phi: 1.0,
            c: 1.0,
            sigma: 1.0,
        });
        let n = covering_number(&class, 0.5, None).unwrap();
        assert!(!n.exact);
        assert!((n.log_value - 6.0 * 9f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn rejects_empty_probe_and_bad_scale() {
        let class = FunctionClass::Finite(FiniteClass::new(1, 1, vec![vec![0.0]], 1.0, 1.0).unwrap());
        assert!(covering_number(&class, 0.1, Some(&[])).is_err());
        assert!(covering_number(&class, 0.0, None).is_err());
    }
}
