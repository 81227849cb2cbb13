use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Dtmc, ModelError, ROW_SUM_TOLERANCE};

/// Entries within this distance outside `[0, 1]` are snapped back after
/// perturbation; they arise from `base + (value - base)` rounding.
const SNAP: f64 = 1e-12;

/// Sparse additive perturbation `X` of a transition matrix, keyed by
/// `(source, target)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationMatrix {
    #[serde(with = "entry_list")]
    entries: BTreeMap<(usize, usize), f64>,
}

impl PerturbationMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries<I: IntoIterator<Item = ((usize, usize), f64)>>(iter: I) -> Self {
        let mut x = Self::new();
        for (k, v) in iter {
            x.add(k.0, k.1, v);
        }
        x
    }

    /// Accumulates `delta` on `(from, to)`; exact zeros are not stored.
    pub fn add(&mut self, from: usize, to: usize, delta: f64) {
        let v = self.entries.entry((from, to)).or_insert(0.0);
        *v += delta;
        if *v == 0.0 {
            self.entries.remove(&(from, to));
        }
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.entries.get(&(from, to)).copied().unwrap_or(0.0)
    }

    pub fn entries(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.entries.iter().map(|(&k, &v)| (k, v))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Rows with at least one nonzero delta.
    pub fn touched_rows(&self) -> Vec<usize> {
        let mut rows: Vec<usize> = self.entries.keys().map(|&(s, _)| s).collect();
        rows.dedup();
        rows
    }

    /// Largest absolute delta, i.e. `‖X‖_max`.
    pub fn max_norm(&self) -> f64 {
        self.entries.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn negated(&self) -> Self {
        PerturbationMatrix {
            entries: self.entries.iter().map(|(&k, &v)| (k, -v)).collect(),
        }
    }

    pub fn to_dense(&self, n: usize) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; n]; n];
        for (&(s, t), &v) in &self.entries {
            m[s][t] = v;
        }
        m
    }
}

/// Returns the chain with transition matrix `P + X`.
pub fn apply_perturbation(model: &Dtmc, x: &PerturbationMatrix) -> Result<Dtmc, ModelError> {
    let n = model.n();
    let mut rows: Vec<Vec<(usize, f64)>> = model.rows().to_vec();
    for row in x.touched_rows() {
        if row >= n {
            return Err(ModelError::InfeasiblePerturbation(format!(
                "row {row} out of range"
            )));
        }
        let mut dense: BTreeMap<usize, f64> = rows[row].iter().copied().collect();
        let before: f64 = dense.values().sum();
        for ((_, t), d) in x.entries.range((row, 0)..=(row, usize::MAX)) {
            if *t >= n {
                return Err(ModelError::InfeasiblePerturbation(format!(
                    "target {t} out of range"
                )));
            }
            *dense.entry(*t).or_insert(0.0) += d;
        }
        let mut after = 0.0;
        for (&t, v) in dense.iter_mut() {
            if *v < 0.0 && *v >= -SNAP {
                *v = 0.0;
            } else if *v > 1.0 && *v <= 1.0 + SNAP {
                *v = 1.0;
            }
            if !(0.0..=1.0).contains(v) {
                return Err(ModelError::InfeasiblePerturbation(format!(
                    "entry ({row}, {t}) becomes {v}"
                )));
            }
            after += *v;
        }
        if (after - before).abs() > ROW_SUM_TOLERANCE {
            return Err(ModelError::InfeasiblePerturbation(format!(
                "row {row} sum drifts by {}",
                after - before
            )));
        }
        rows[row] = dense.into_iter().collect();
    }
    model.with_rows(rows)
}

mod entry_list {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Entry {
        from: usize,
        to: usize,
        delta: f64,
    }

    pub fn serialize<S: Serializer>(
        map: &BTreeMap<(usize, usize), f64>,
        ser: S,
    ) -> Result<S::Ok, S::Error> {
        let list: Vec<Entry> = map
            .iter()
            .map(|(&(from, to), &delta)| Entry { from, to, delta })
            .collect();
        list.serialize(ser)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(
        de: D,
    ) -> Result<BTreeMap<(usize, usize), f64>, D::Error> {
        let list = Vec::<Entry>::deserialize(de)?;
        Ok(list
            .into_iter()
            .map(|e| ((e.from, e.to), e.delta))
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn four_state() -> Dtmc {
        Dtmc::from_dense(
            0,
            &[
                vec![0.0, 0.6, 0.4, 0.0],
                vec![0.1, 0.1, 0.0, 0.8],
                vec![0.3, 0.0, 0.0, 0.7],
                vec![0.0, 0.0, 0.0, 1.0],
            ],
        )
        .unwrap()
    }

    fn assert_row(d: &Dtmc, s: usize, expect: [f64; 4]) {
        for (t, e) in expect.iter().enumerate() {
            assert!((d.prob(s, t) - e).abs() < 1e-12, "({s},{t})");
        }
    }

    #[test]
    fn spss_attack_row() {
        let x = PerturbationMatrix::from_entries([((1, 3), -0.1), ((1, 0), 0.1)]);
        let d = apply_perturbation(&four_state(), &x).unwrap();
        assert_row(&d, 1, [0.2, 0.1, 0.0, 0.7]);
    }

    #[test]
    fn ss_attack_row() {
        let x = PerturbationMatrix::from_entries([
            ((1, 3), -0.1),
            ((1, 0), 0.1),
            ((1, 1), -0.1),
            ((1, 2), 0.1),
        ]);
        let d = apply_perturbation(&four_state(), &x).unwrap();
        assert_row(&d, 1, [0.2, 0.0, 0.1, 0.7]);
        assert_eq!(d.row(1).len(), 3);
    }

    #[test]
    fn empty_perturbation_is_identity() {
        let m = four_state();
        assert_eq!(
            apply_perturbation(&m, &PerturbationMatrix::new()).unwrap(),
            m
        );
    }

    #[test]
    fn infeasible_entries_rejected() {
        let x = PerturbationMatrix::from_entries([((1, 2), -0.1), ((1, 3), 0.1)]);
        assert!(matches!(
            apply_perturbation(&four_state(), &x),
            Err(ModelError::InfeasiblePerturbation(_))
        ));
        let x = PerturbationMatrix::from_entries([((1, 0), 0.05)]);
        assert!(matches!(
            apply_perturbation(&four_state(), &x),
            Err(ModelError::InfeasiblePerturbation(_))
        ));
    }

    #[test]
    fn negation_round_trips() {
        let m = four_state();
        let x = PerturbationMatrix::from_entries([((0, 1), -0.07), ((0, 2), 0.07)]);
        let back = apply_perturbation(&apply_perturbation(&m, &x).unwrap(), &x.negated()).unwrap();
        for s in 0..4 {
            for t in 0..4 {
                assert!((back.prob(s, t) - m.prob(s, t)).abs() <= 1e-12);
            }
        }
    }
}
