//! Settings chains for CHSH and chained Bell statistics.
//!
//! A chain with `2N` terms has `N` settings per site. Terms are grouped in
//! pairs and group `j` enters the statistic as `|E(a_j, b_j) + E(a_j, b_{j+1})|`,
//! except the last group, whose closing term `E(a_N, b_1)` is subtracted.
//! For `N = 2` with `b = (δ, β)` this is exactly the CHSH combination
//! `|E(α,δ) + E(α,β)| + |E(γ,β) − E(γ,δ)|`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::setting::Setting;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TermSign {
    #[serde(rename = "+")]
    Plus,
    #[serde(rename = "-")]
    Minus,
}

impl TermSign {
    pub fn factor(self) -> f64 {
        match self {
            TermSign::Plus => 1.0,
            TermSign::Minus => -1.0,
        }
    }
}

/// One correlation term: indices into the per-site setting lists.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainTerm {
    pub site1: usize,
    pub site2: usize,
    pub sign: TermSign,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SettingsChain {
    site1: Vec<Setting>,
    site2: Vec<Setting>,
    terms: Vec<ChainTerm>,
}

fn check_terms(terms: usize) -> Result<usize> {
    if terms < 4 || !terms.is_multiple_of(2) {
        return invalid(format!("chain needs an even number of terms >= 4, got {terms}"));
    }
    Ok(terms / 2)
}

impl SettingsChain {
    /// Builds the standard term order over arbitrary per-site settings.
    pub fn with_settings(site1: Vec<Setting>, site2: Vec<Setting>) -> Result<Self> {
        let n = site1.len();
        if n < 2 || site2.len() != n {
            return invalid(format!(
                "chain needs N >= 2 settings at both sites, got {} and {}",
                site1.len(),
                site2.len()
            ));
        }
        let mut terms = Vec::with_capacity(2 * n);
        for j in 0..n {
            terms.push(ChainTerm { site1: j, site2: j, sign: TermSign::Plus });
            if j + 1 < n {
                terms.push(ChainTerm { site1: j, site2: j + 1, sign: TermSign::Plus });
            } else {
                terms.push(ChainTerm { site1: j, site2: 0, sign: TermSign::Minus });
            }
        }
        Ok(SettingsChain { site1, site2, terms })
    }

    /// Number of correlation terms (2N).
    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Settings per site (N).
    pub fn settings_per_site(&self) -> usize {
        self.site1.len()
    }

    pub fn site1_settings(&self) -> &[Setting] {
        &self.site1
    }

    pub fn site2_settings(&self) -> &[Setting] {
        &self.site2
    }

    pub fn terms(&self) -> &[ChainTerm] {
        &self.terms
    }

    /// The setting pair measured by `term`.
    pub fn term_settings(&self, term: &ChainTerm) -> (Setting, Setting) {
        (self.site1[term.site1], self.site2[term.site2])
    }

    /// Iterates over the setting pairs of all terms in order.
    pub fn pairs(&self) -> impl Iterator<Item = (Setting, Setting)> + '_ {
        self.terms.iter().map(|t| self.term_settings(t))
    }

    /// Evaluates the grouped absolute-value statistic from per-term values.
    pub fn combine(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.terms.len());
        self.terms
            .chunks(2)
            .zip(values.chunks(2))
            .map(|(t, v)| (t[0].sign.factor() * v[0] + t[1].sign.factor() * v[1]).abs())
            .sum()
    }
}

/// Chain of `terms` settings spaced `π/terms` apart.
///
/// Site 1 sits at `(2k+1)π/terms` and site 2 at `−2kπ/terms`, `k = 0..N`.
/// Under the sum-phase correlation `cos(φ+ψ)` every term then contributes
/// `cos(π/terms)` to the statistic, including the negated closing term.
pub fn chain_settings(terms: usize) -> Result<SettingsChain> {
    let n = check_terms(terms)?;
    let step = PI / terms as f64;
    let site1 = (0..n).map(|k| Setting::new((2 * k + 1) as f64 * step)).collect();
    let site2 = (0..n).map(|k| Setting::new(-((2 * k) as f64) * step)).collect();
    SettingsChain::with_settings(site1, site2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn franson(chain: &SettingsChain) -> Vec<f64> {
        chain.pairs().map(|(a, b)| (a.radians() + b.radians()).cos()).collect()
    }

    #[test]
    fn rejects_odd_or_short_chains() {
        for bad in [0, 2, 3, 5, 7] {
            assert!(chain_settings(bad).is_err(), "{bad}");
        }
        assert!(SettingsChain::with_settings(vec![Setting::new(0.0)], vec![Setting::new(0.0)]).is_err());
    }

    #[test]
    fn every_term_contributes_cos_pi_over_terms() {
        for terms in (4..=40).step_by(2) {
            let chain = chain_settings(terms).unwrap();
            let c = (PI / terms as f64).cos();
            let values = franson(&chain);
            for (t, v) in chain.terms().iter().zip(&values) {
                assert!((t.sign.factor() * v - c).abs() < 1e-12, "terms={terms}");
            }
            assert!((chain.combine(&values) - terms as f64 * c).abs() < 1e-12);
        }
    }

    #[test]
    fn reported_chain_values() {
        let cases = [(4, 2.0 * 2f64.sqrt()), (6, 5.196), (10, 9.511)];
        for (terms, expected) in cases {
            let chain = chain_settings(terms).unwrap();
            let tol = if terms == 4 { 1e-12 } else { 5e-4 };
            assert!((chain.combine(&franson(&chain)) - expected).abs() < tol);
        }
    }

    #[test]
    fn term_structure_visits_each_adjacent_pair_once() {
        let chain = chain_settings(8).unwrap();
        let minus = chain.terms().iter().filter(|t| t.sign == TermSign::Minus).count();
        assert_eq!(minus, 1);
        assert_eq!(chain.terms().last().unwrap().sign, TermSign::Minus);
        let mut seen = std::collections::BTreeSet::new();
        for t in chain.terms() {
            assert!(seen.insert((t.site1, t.site2)));
        }
        assert_eq!(seen.len(), 8);
    }

    #[test]
    fn four_term_chain_has_chsh_layout() {
        // |E(α,δ) + E(α,β)| + |E(γ,β) − E(γ,δ)| with site2 = (δ, β)
        let chain = chain_settings(4).unwrap();
        let layout: Vec<_> = chain.terms().iter().map(|t| (t.site1, t.site2, t.sign)).collect();
        assert_eq!(
            layout,
            vec![
                (0, 0, TermSign::Plus),
                (0, 1, TermSign::Plus),
                (1, 1, TermSign::Plus),
                (1, 0, TermSign::Minus)
            ]
        );
        assert_eq!(chain.combine(&[1.0, 1.0, 1.0, -1.0]), 4.0);
        assert_eq!(chain.combine(&[0.0; 4]), 0.0);
    }
}
