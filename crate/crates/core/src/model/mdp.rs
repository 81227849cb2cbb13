use std::collections::{BTreeMap, BTreeSet};

use super::dtmc::{canonical_row, validate_distribution};
use super::{Dtmc, ModelError, SparseRow};

/// A Markov decision process with named actions. Each state maps its
/// enabled action indices to a distribution over successor states.
#[derive(Debug, Clone, PartialEq)]
pub struct Mdp {
    init: usize,
    actions: Vec<String>,
    choices: Vec<BTreeMap<usize, SparseRow>>,
    atoms: Vec<String>,
    labels: Vec<BTreeSet<usize>>,
}

impl Mdp {
    pub fn new(
        init: usize,
        actions: Vec<String>,
        choices: Vec<BTreeMap<usize, SparseRow>>,
        atoms: Vec<String>,
        labels: Vec<BTreeSet<usize>>,
    ) -> Result<Self, ModelError> {
        // Actions are kept sorted by name so indices are canonical.
        let mut order: Vec<usize> = (0..actions.len()).collect();
        order.sort_by(|&a, &b| actions[a].cmp(&actions[b]));
        let mut remap = vec![0; actions.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let actions: Vec<String> = order.iter().map(|&i| actions[i].clone()).collect();
        let choices: Vec<BTreeMap<usize, SparseRow>> = choices
            .into_iter()
            .map(|m| {
                m.into_iter()
                    .map(|(a, r)| (remap.get(a).copied().unwrap_or(a), canonical_row(r)))
                    .collect()
            })
            .collect();
        let mut labels = labels;
        labels.resize(choices.len(), BTreeSet::new());
        let mdp = Mdp {
            init,
            actions,
            choices,
            atoms,
            labels,
        };
        mdp.validate()?;
        Ok(mdp)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.choices.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if self.init >= n {
            return Err(ModelError::BadInit { init: self.init, n });
        }
        for (s, enabled) in self.choices.iter().enumerate() {
            if enabled.is_empty() {
                return Err(ModelError::NoEnabledAction { state: s });
            }
            for (&a, row) in enabled {
                let name = self.actions.get(a).ok_or_else(|| {
                    ModelError::parse(format!("state {s}"), format!("action index {a} undeclared"))
                })?;
                validate_distribution(s, row, n).map_err(|e| ModelError::BadDistribution {
                    state: s,
                    action: name.clone(),
                    source: Box::new(e),
                })?;
            }
        }
        for (s, set) in self.labels.iter().enumerate() {
            if let Some(&bad) = set.iter().find(|&&l| l >= self.atoms.len()) {
                return Err(ModelError::BadLabel {
                    state: s,
                    label: bad,
                    atoms: self.atoms.len(),
                });
            }
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.choices.len()
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn actions(&self) -> &[String] {
        &self.actions
    }

    pub fn action_index(&self, name: &str) -> Option<usize> {
        self.actions.iter().position(|a| a == name)
    }

    /// Enabled actions of `s` with their distributions.
    pub fn choices(&self, s: usize) -> &BTreeMap<usize, SparseRow> {
        &self.choices[s]
    }

    pub fn distribution(&self, s: usize, action: &str) -> Option<&SparseRow> {
        self.action_index(action)
            .and_then(|a| self.choices[s].get(&a))
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn labels(&self) -> &[BTreeSet<usize>] {
        &self.labels
    }

    /// Replaces one `(state, action)` distribution, revalidating the result.
    pub fn with_distribution(
        &self,
        s: usize,
        action: &str,
        row: SparseRow,
    ) -> Result<Self, ModelError> {
        let a = self
            .action_index(action)
            .ok_or_else(|| ModelError::PolicyActionDisabled {
                state: s,
                action: action.to_string(),
            })?;
        let mut choices = self.choices.clone();
        choices[s].insert(a, row);
        Mdp::new(
            self.init,
            self.actions.clone(),
            choices,
            self.atoms.clone(),
            self.labels.clone(),
        )
    }

    /// Resolves the nondeterminism with `policy`: `P(s, ·) = T(s, σ(s), ·)`.
    pub fn compose(&self, policy: &Policy) -> Result<Dtmc, ModelError> {
        if policy.choice.len() != self.n() {
            return Err(ModelError::PolicyLength {
                got: policy.choice.len(),
                expected: self.n(),
            });
        }
        let mut rows = Vec::with_capacity(self.n());
        for (s, name) in policy.choice.iter().enumerate() {
            let row =
                self.distribution(s, name)
                    .ok_or_else(|| ModelError::PolicyActionDisabled {
                        state: s,
                        action: name.clone(),
                    })?;
            rows.push(row.clone());
        }
        Dtmc::new(self.init, rows, self.atoms.clone(), self.labels.clone())
    }
}

/// A memoryless deterministic policy: one action name per state.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Policy {
    pub choice: Vec<String>,
}

impl Policy {
    pub fn new(choice: Vec<String>) -> Self {
        Policy { choice }
    }

    pub fn action(&self, s: usize) -> &str {
        &self.choice[s]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state() -> Mdp {
        let stay = |s: usize| vec![(s, 1.0)];
        let swap = |s: usize| vec![(1 - s, 1.0)];
        let choices = (0..2)
            .map(|s| [(0usize, stay(s)), (1usize, swap(s))].into_iter().collect())
            .collect();
        Mdp::new(0, vec!["a".into(), "b".into()], choices, vec![], vec![]).unwrap()
    }

    #[test]
    fn swap_policy_gives_permutation() {
        let d = two_state()
            .compose(&Policy::new(vec!["b".into(), "b".into()]))
            .unwrap();
        assert_eq!(d.to_dense(), vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    }

    #[test]
    fn single_action_keeps_matrix() {
        let choices = vec![
            [(0usize, vec![(0, 0.25), (1, 0.75)])].into_iter().collect(),
            [(0usize, vec![(1, 1.0)])].into_iter().collect(),
        ];
        let mdp = Mdp::new(0, vec!["go".into()], choices, vec![], vec![]).unwrap();
        let d = mdp.compose(&Policy::new(vec!["go".into(); 2])).unwrap();
        assert_eq!(d.to_dense(), vec![vec![0.25, 0.75], vec![0.0, 1.0]]);
    }

    #[test]
    fn disabled_action_rejected() {
        let choices = vec![[(0usize, vec![(0, 1.0)])].into_iter().collect()];
        let mdp = Mdp::new(0, vec!["a".into(), "b".into()], choices, vec![], vec![]).unwrap();
        let err = mdp.compose(&Policy::new(vec!["b".into()])).unwrap_err();
        assert_eq!(
            err,
            ModelError::PolicyActionDisabled {
                state: 0,
                action: "b".into()
            }
        );
    }

    #[test]
    fn state_without_actions_rejected() {
        let choices = vec![BTreeMap::new()];
        let err = Mdp::new(0, vec!["a".into()], choices, vec![], vec![]).unwrap_err();
        assert_eq!(err, ModelError::NoEnabledAction { state: 0 });
    }

    #[test]
    fn perturbing_unchosen_action_leaves_composition() {
        let mdp = two_state();
        let policy = Policy::new(vec!["b".into(), "a".into()]);
        let before = mdp.compose(&policy).unwrap();
        let perturbed = mdp
            .with_distribution(0, "a", vec![(0, 0.3), (1, 0.7)])
            .unwrap();
        assert_eq!(perturbed.compose(&policy).unwrap(), before);
    }
}
