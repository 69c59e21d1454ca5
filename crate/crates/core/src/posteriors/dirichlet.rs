use rand::Rng;
use rand_distr::{Distribution, Gamma};
use serde::{Deserialize, Serialize};

use super::PosteriorError;

/// Independent Dirichlet posteriors over next-state distributions, one per
/// state-action pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirichletTransitionPosterior {
    n_states: usize,
    n_actions: usize,
    /// Indexed `(s * n_actions + a) * n_states + s'`.
    concentrations: Vec<f64>,
}

impl DirichletTransitionPosterior {
    /// Symmetric prior `Dirichlet(c, ..., c)` for every pair.
    pub fn symmetric(n_states: usize, n_actions: usize, c: f64) -> Result<Self, PosteriorError> {
        Self::from_concentrations(n_states, n_actions, vec![c; n_states * n_actions * n_states])
    }

    pub fn from_concentrations(
        n_states: usize,
        n_actions: usize,
        concentrations: Vec<f64>,
    ) -> Result<Self, PosteriorError> {
        let expected = n_states * n_actions * n_states;
        if concentrations.len() != expected {
            return Err(PosteriorError::DimensionMismatch {
                expected,
                actual: concentrations.len(),
            });
        }
        if let Some(c) = concentrations.iter().find(|c| !(**c > 0.0) || !c.is_finite()) {
            return Err(PosteriorError::InvalidPrior(format!(
                "Dirichlet concentration must be positive, got {c}"
            )));
        }
        Ok(Self {
            n_states,
            n_actions,
            concentrations,
        })
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn concentrations(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * self.n_actions + a) * self.n_states;
        &self.concentrations[start..start + self.n_states]
    }

    pub fn update(&mut self, s: usize, a: usize, next: usize) -> Result<(), PosteriorError> {
        if s >= self.n_states || a >= self.n_actions || next >= self.n_states {
            return Err(PosteriorError::DimensionMismatch {
                expected: self.n_states,
                actual: s.max(next),
            });
        }
        self.concentrations[(s * self.n_actions + a) * self.n_states + next] += 1.0;
        Ok(())
    }

    pub fn mean_row(&self, s: usize, a: usize) -> Vec<f64> {
        let row = self.concentrations(s, a);
        let total: f64 = row.iter().sum();
        row.iter().map(|c| c / total).collect()
    }

    /// All mean rows, laid out like [`crate::environments::TabularMdp`] transitions.
    pub fn mean_transitions(&self) -> Vec<f64> {
        (0..self.n_states * self.n_actions)
            .flat_map(|x| self.mean_row(x / self.n_actions, x % self.n_actions))
            .collect()
    }

    /// Draws one row by normalizing independent Gamma variates.
    pub fn sample_row<R: Rng + ?Sized>(&self, s: usize, a: usize, rng: &mut R) -> Vec<f64> {
        let mut row: Vec<f64> = self
            .concentrations(s, a)
            .iter()
            .map(|&c| Gamma::new(c, 1.0).expect("positive concentration").sample(rng))
            .collect();
        let total: f64 = row.iter().sum();
        if total > 0.0 && total.is_finite() {
            row.iter_mut().for_each(|p| *p /= total);
        } else {
            // Every Gamma draw underflowed; fall back to the mean.
            row = self.mean_row(s, a);
        }
        renormalize(&mut row);
        row
    }

    pub fn sample_transitions<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.concentrations.len());
        for s in 0..self.n_states {
            for a in 0..self.n_actions {
                out.extend(self.sample_row(s, a, rng));
            }
        }
        out
    }
}

/// Pushes the rounding residual of a probability row onto its largest entry so
/// the row sums to one within a few ulps.
pub(crate) fn renormalize(row: &mut [f64]) {
    let total: f64 = row.iter().sum();
    let (imax, _) = row
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |b, (i, &p)| if p > b.1 { (i, p) } else { b });
    row[imax] += 1.0 - total;
    if row[imax] < 0.0 {
        row[imax] = 0.0;
    }
}
