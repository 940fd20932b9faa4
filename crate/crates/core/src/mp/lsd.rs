use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One atom of a discrete population spectral distribution.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Discrete bulk law `H = sum_i w_i delta_{sigma2 * r_i}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteLsd {
    atoms: Vec<Atom>,
    sigma2: f64,
}

impl DiscreteLsd {
    /// Atoms must have strictly increasing positive locations and positive
    /// weights summing to one within `1e-12`.
    pub fn new(atoms: Vec<Atom>, sigma2: f64) -> Result<Self> {
        if atoms.is_empty() {
            return Err(Error::invalid("bulk law needs at least one atom"));
        }
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(Error::invalid(format!("sigma2 must be positive, got {sigma2}")));
        }
        let mut prev = 0.0;
        for a in &atoms {
            if !(a.location.is_finite() && a.location > prev) {
                return Err(Error::invalid(
                    "atom locations must be positive, finite and strictly increasing",
                ));
            }
            if !(a.weight.is_finite() && a.weight > 0.0 && a.weight <= 1.0) {
                return Err(Error::invalid(format!("atom weight {} outside (0, 1]", a.weight)));
            }
            prev = a.location;
        }
        let total: f64 = atoms.iter().map(|a| a.weight).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::invalid(format!("atom weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, sigma2 })
    }

    pub fn from_pairs(pairs: &[(f64, f64)], sigma2: f64) -> Result<Self> {
        let mut atoms: Vec<Atom> =
            pairs.iter().map(|&(location, weight)| Atom { location, weight }).collect();
        atoms.sort_by(|a, b| a.location.total_cmp(&b.location));
        Self::new(atoms, sigma2)
    }

    /// `sigma2 * delta_1`.
    pub fn point_mass(sigma2: f64) -> Result<Self> {
        Self::new(vec![Atom { location: 1.0, weight: 1.0 }], sigma2)
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn with_sigma2(&self, sigma2: f64) -> Result<Self> {
        Self::new(self.atoms.clone(), sigma2)
    }

    pub fn is_point_mass(&self) -> bool {
        self.atoms.len() == 1
    }

    /// `(sigma2 * r_i, w_i)` pairs.
    pub fn scaled(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.atoms.iter().map(move |a| (self.sigma2 * a.location, a.weight))
    }

    /// Smallest and largest scaled atom.
    pub fn range(&self) -> (f64, f64) {
        let lo = self.atoms[0].location * self.sigma2;
        let hi = self.atoms[self.atoms.len() - 1].location * self.sigma2;
        (lo, hi)
    }

    /// `sum_i w_i r_i`, without the scale.
    pub fn unit_mean(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight * a.location).sum()
    }

    /// `int t dH`.
    pub fn mean(&self) -> f64 {
        self.sigma2 * self.unit_mean()
    }

    /// `int t^2 dH`.
    pub fn second_moment(&self) -> f64 {
        self.scaled().map(|(t, w)| w * t * t).sum()
    }

    /// `int log t dH`.
    pub fn mean_log(&self) -> f64 {
        self.scaled().map(|(t, w)| w * t.ln()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_must_sum_to_one() {
        assert!(DiscreteLsd::from_pairs(&[(1.0, 0.5), (2.0, 0.4)], 1.0).is_err());
        assert!(DiscreteLsd::from_pairs(&[(1.0, 0.5), (2.0, 0.5)], 1.0).is_ok());
    }

    #[test]
    fn locations_sorted_and_distinct() {
        assert!(DiscreteLsd::from_pairs(&[(1.0, 0.5), (1.0, 0.5)], 1.0).is_err());
        let h = DiscreteLsd::from_pairs(&[(3.0, 0.5), (1.0, 0.5)], 2.0).unwrap();
        assert_eq!(h.range(), (2.0, 6.0));
        assert_eq!(h.mean(), 4.0);
        assert_eq!(h.second_moment(), 20.0);
    }
}
