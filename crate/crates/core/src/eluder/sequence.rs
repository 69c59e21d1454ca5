use serde::{Deserialize, Serialize};

use super::{is_dependent, EluderError, Witness};
use crate::confsets::{FunctionClass, Input};

/// Largest pool searched exhaustively.
pub const EXHAUSTIVE_POOL_LIMIT: usize = 12;

/// A growing eluder sequence: every retained input carries the witness pair
/// that makes it independent of its predecessors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderInstance {
    pub class: FunctionClass,
    pub eps: f64,
    pub sequence: Vec<Input>,
    pub certificates: Vec<Witness>,
}

impl EluderInstance {
    pub fn new(class: FunctionClass, eps: f64) -> Result<Self, EluderError> {
        if !(eps > 0.0) {
            return Err(EluderError::InvalidArgument(format!("eps must be positive, got {eps}")));
        }
        class.validate()?;
        Ok(Self {
            class,
            eps,
            sequence: vec![],
            certificates: vec![],
        })
    }

    /// Appends `x` if it is certifiably independent of the current sequence.
    pub fn try_push(&mut self, x: Input) -> Result<bool, EluderError> {
        let check = is_dependent(&self.class, &x, &self.sequence, self.eps)?;
        match check.witness() {
            Some(w) => {
                self.certificates.push(w.clone());
                self.sequence.push(x);
                Ok(true)
            }
            None => Ok(false),
        }
    }

    pub fn len(&self) -> usize {
        self.sequence.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequence.is_empty()
    }
}

/// Pool indices of an eluder sequence in order, with one witness per entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EluderSequence {
    pub indices: Vec<usize>,
    pub witnesses: Vec<Witness>,
}

impl EluderSequence {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// Single pass over `pool`, keeping every point independent of those kept so
/// far. The result is a valid sequence, hence a lower bound on `dim_E`.
pub fn greedy_eluder_sequence(class: &FunctionClass, pool: &[Input], eps: f64) -> Result<EluderSequence, EluderError> {
    let mut inst = EluderInstance::new(class.clone(), eps)?;
    let mut indices = vec![];
    for (i, x) in pool.iter().enumerate() {
        if inst.try_push(x.clone())? {
            indices.push(i);
        }
    }
    Ok(EluderSequence {
        indices,
        witnesses: inst.certificates,
    })
}

/// Longest eluder sequence drawn from `pool` (without repeats).
///
/// Dependence only looks at the set of predecessors, so a subset `S` can be
/// ordered into a sequence iff some `x` in `S` is independent of `S - x` and
/// `S - x` can itself be ordered. This runs over all `2^|pool|` subsets.
pub fn exhaustive_eluder_dimension(class: &FunctionClass, pool: &[Input], eps: f64) -> Result<EluderSequence, EluderError> {
    if pool.len() > EXHAUSTIVE_POOL_LIMIT {
        return Err(EluderError::InvalidArgument(format!(
            "pool of {} exceeds the exhaustive limit {EXHAUSTIVE_POOL_LIMIT}",
            pool.len()
        )));
    }
    EluderInstance::new(class.clone(), eps)?;
    let n = pool.len();
    let full = 1usize << n;
    // last[mask] = (element appended last, its witness) for orderable masks.
    let mut last: Vec<Option<(usize, Witness)>> = vec![None; full];
    let mut orderable = vec![false; full];
    orderable[0] = true;
    let mut best = 0usize;
    for mask in 1..full {
        for x in 0..n {
            if mask >> x & 1 == 0 {
                continue;
            }
            let rest = mask & !(1 << x);
            if !orderable[rest] {
                continue;
            }
            let prefix: Vec<Input> = (0..n).filter(|i| rest >> i & 1 == 1).map(|i| pool[i].clone()).collect();
            let check = is_dependent(class, &pool[x], &prefix, eps)?;
            if let Some(w) = check.witness() {
                orderable[mask] = true;
                last[mask] = Some((x, w.clone()));
                break;
            }
        }
        if orderable[mask] && mask.count_ones() > best.count_ones() {
            best = mask;
        }
    }
    let mut indices = vec![];
    let mut witnesses = vec![];
    let mut mask = best;
    while mask != 0 {
        let (x, w) = last[mask].clone().expect("orderable mask records its last element");
        indices.push(x);
        witnesses.push(w);
        mask &= !(1 << x);
    }
    indices.reverse();
    witnesses.reverse();
    Ok(EluderSequence { indices, witnesses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confsets::{FiniteClass, LinearClass};
    use crate::eluder::verify_witness;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(p: usize) -> FunctionClass {
        FunctionClass::linear(LinearClass {
            n: 1,
            p,
            c_theta: 1.0,
            c_phi: 1.0,
            c: 1.0,
            sigma: 1.0,
        })
    }

    fn one_hot(p: usize, i: usize) -> Input {
        Input::Features(DVector::from_fn(p, |k, _| if k == i { 1.0 } else { 0.0 }))
    }

    #[test]
    fn independent_measurements_reach_domain_size() {
        let pool: Vec<Input> = (0..7).map(|i| one_hot(7, i)).collect();
        let seq = greedy_eluder_sequence(&linear(7), &pool, 0.5).unwrap();
        assert_eq!(seq.len(), 7);
    }

    #[test]
    fn eps_above_diameter_gives_empty_sequence() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pool: Vec<Input> = (0..8)
            .map(|_| {
                let v = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                Input::Features(v.normalize())
            })
            .collect();
        // Differences are at most 2 C_theta C_phi = 2.
        assert!(greedy_eluder_sequence(&linear(2), &pool, 2.0).unwrap().len() <= 1);
        assert!(exhaustive_eluder_dimension(&linear(2), &pool, 2.0).unwrap().len() <= 1);
    }

    #[test]
    fn exhaustive_sequence_is_valid_and_dominates_greedy() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..10 {
            let members: Vec<Vec<f64>> = (0..5).map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let class = FunctionClass::Finite(FiniteClass::new(8, 1, members, 1.0, 1.0).unwrap());
            let pool: Vec<Input> = (0..8).map(Input::Point).collect();
            let eps = rng.random_range(0.1..0.8);
            let greedy = greedy_eluder_sequence(&class, &pool, eps).unwrap();
            let full = exhaustive_eluder_dimension(&class, &pool, eps).unwrap();
            assert!(greedy.len() <= full.len());
            for (k, (&i, w)) in full.indices.iter().zip(&full.witnesses).enumerate() {
                let prefix: Vec<Input> = full.indices[..k].iter().map(|&j| pool[j].clone()).collect();
                assert!(verify_witness(&class, w, &pool[i], &prefix, eps).unwrap());
            }
        }
    }

    #[test]
    fn exhaustive_rejects_large_pools() {
        let pool: Vec<Input> = (0..13).map(|i| one_hot(13, i)).collect();
        assert!(exhaustive_eluder_dimension(&linear(13), &pool, 0.5).is_err());
    }

    #[test]
    fn exhaustive_length_is_monotone_in_eps() {
        // Shrinking a linear witness pair by eps1 / eps2 keeps it a witness at eps1.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pool: Vec<Input> = (0..9)
            .map(|_| Input::Features(DVector::from_fn(2, |_, _| rng.random_range(-0.7..0.7))))
            .collect();
        let mut last = usize::MAX;
        for eps in [0.05, 0.1, 0.2, 0.4, 0.8, 1.6] {
            let len = exhaustive_eluder_dimension(&linear(2), &pool, eps).unwrap().len();
            assert!(len <= last);
            last = len;
        }
    }
}
