use std::collections::BTreeSet;

use super::ModelError;

/// Tolerance on `|row sum - 1|` accepted for input models.
pub const ROW_SUM_TOLERANCE: f64 = 1e-9;

/// Outgoing transitions of one state as `(target, probability)` pairs,
/// sorted by target with no duplicates and no zero entries.
pub type SparseRow = Vec<(usize, f64)>;

/// A labeled discrete-time Markov chain over dense state indices `0..n`.
///
/// Values are validated on construction and immutable afterwards; every
/// transformation builds a new chain.
#[derive(Debug, Clone, PartialEq)]
pub struct Dtmc {
    init: usize,
    rows: Vec<SparseRow>,
    atoms: Vec<String>,
    labels: Vec<BTreeSet<usize>>,
}

impl Dtmc {
    /// Builds a chain from sparse rows. Rows are sorted by target, duplicate
    /// targets are summed and explicit zeros dropped before validation.
    pub fn new(
        init: usize,
        rows: Vec<SparseRow>,
        atoms: Vec<String>,
        labels: Vec<BTreeSet<usize>>,
    ) -> Result<Self, ModelError> {
        let rows = rows.into_iter().map(canonical_row).collect::<Vec<_>>();
        let mut labels = labels;
        labels.resize(rows.len(), BTreeSet::new());
        let dtmc = Dtmc {
            init,
            rows,
            atoms,
            labels,
        };
        dtmc.validate()?;
        Ok(dtmc)
    }

    /// Builds an unlabeled chain from a dense row-major matrix.
    pub fn from_dense(init: usize, matrix: &[Vec<f64>]) -> Result<Self, ModelError> {
        let rows = matrix
            .iter()
            .map(|r| r.iter().copied().enumerate().collect())
            .collect();
        Dtmc::new(init, rows, Vec::new(), Vec::new())
    }

    /// Declares a new atom (or extends an existing one) holding at `states`.
    pub fn with_atom(mut self, name: &str, states: &[usize]) -> Result<Self, ModelError> {
        let idx = match self.atom_index(name) {
            Some(i) => i,
            None => {
                self.atoms.push(name.to_string());
                self.atoms.len() - 1
            }
        };
        for &s in states {
            if s >= self.n() {
                return Err(ModelError::BadLabel {
                    state: s,
                    label: idx,
                    atoms: self.atoms.len(),
                });
            }
            self.labels[s].insert(idx);
        }
        Ok(self)
    }

    /// Checks every structural invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), ModelError> {
        let n = self.rows.len();
        if n == 0 {
            return Err(ModelError::Empty);
        }
        if self.init >= n {
            return Err(ModelError::BadInit { init: self.init, n });
        }
        for (s, row) in self.rows.iter().enumerate() {
            validate_distribution(s, row, n)?;
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

    /// Same labeling and initial state, new transition rows.
    pub fn with_rows(&self, rows: Vec<SparseRow>) -> Result<Self, ModelError> {
        Dtmc::new(self.init, rows, self.atoms.clone(), self.labels.clone())
    }

    pub fn n(&self) -> usize {
        self.rows.len()
    }

    pub fn init(&self) -> usize {
        self.init
    }

    pub fn rows(&self) -> &[SparseRow] {
        &self.rows
    }

    pub fn row(&self, s: usize) -> &[(usize, f64)] {
        &self.rows[s]
    }

    /// `P(from, to)`, zero for absent transitions.
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        let row = &self.rows[from];
        match row.binary_search_by_key(&to, |&(t, _)| t) {
            Ok(i) => row[i].1,
            Err(_) => 0.0,
        }
    }

    pub fn atoms(&self) -> &[String] {
        &self.atoms
    }

    pub fn labels(&self) -> &[BTreeSet<usize>] {
        &self.labels
    }

    pub fn atom_index(&self, name: &str) -> Option<usize> {
        self.atoms.iter().position(|a| a == name)
    }

    /// Indicator vector of the states labeled with atom `idx`.
    pub fn atom_states(&self, idx: usize) -> Vec<bool> {
        self.labels.iter().map(|l| l.contains(&idx)).collect()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        self.rows
            .iter()
            .map(|row| {
                let mut dense = vec![0.0; n];
                for &(t, p) in row {
                    dense[t] = p;
                }
                dense
            })
            .collect()
    }

    /// States reachable from the initial state along positive transitions.
    pub fn reachable(&self) -> Vec<bool> {
        let mut seen = vec![false; self.n()];
        let mut stack = vec![self.init];
        seen[self.init] = true;
        while let Some(s) = stack.pop() {
            for &(t, _) in &self.rows[s] {
                if !seen[t] {
                    seen[t] = true;
                    stack.push(t);
                }
            }
        }
        seen
    }
}

pub(crate) fn canonical_row(mut row: SparseRow) -> SparseRow {
    row.sort_by_key(|&(t, _)| t);
    let mut out: SparseRow = Vec::with_capacity(row.len());
    for (t, p) in row {
        match out.last_mut() {
            Some(last) if last.0 == t => last.1 += p,
            _ => out.push((t, p)),
        }
    }
    out.retain(|&(_, p)| p != 0.0);
    out
}

pub(crate) fn validate_distribution(
    s: usize,
    row: &[(usize, f64)],
    n: usize,
) -> Result<(), ModelError> {
    let mut sum = 0.0;
    for &(t, p) in row {
        if t >= n {
            return Err(ModelError::BadTarget { row: s, to: t });
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(ModelError::EntryOutOfRange {
                from: s,
                to: t,
                value: p,
            });
        }
        sum += p;
    }
    if (sum - 1.0).abs() > ROW_SUM_TOLERANCE {
        return Err(ModelError::RowSumViolation { row: s, sum });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn four_state() -> Vec<Vec<f64>> {
        vec![
            vec![0.0, 0.6, 0.4, 0.0],
            vec![0.1, 0.1, 0.0, 0.8],
            vec![0.3, 0.0, 0.0, 0.7],
            vec![0.0, 0.0, 0.0, 1.0],
        ]
    }

    #[test]
    fn four_state_is_valid() {
        let d = Dtmc::from_dense(0, &four_state()).unwrap();
        assert_eq!(d.n(), 4);
        assert_eq!(d.prob(1, 3), 0.8);
        assert_eq!(d.prob(1, 2), 0.0);
        assert_eq!(d.row(2), &[(0, 0.3), (3, 0.7)]);
    }

    #[test]
    fn identity_is_valid() {
        let id: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        assert!(Dtmc::from_dense(2, &id).is_ok());
    }

    #[test]
    fn row_sum_violation_names_row() {
        let mut m = four_state();
        m[0][1] = 0.7;
        match Dtmc::from_dense(0, &m) {
            Err(ModelError::RowSumViolation { row, sum }) => {
                assert_eq!(row, 0);
                assert!((sum - 1.1).abs() < 1e-12);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn entry_out_of_range() {
        let m = vec![vec![1.5, -0.5], vec![0.0, 1.0]];
        assert_eq!(
            Dtmc::from_dense(0, &m),
            Err(ModelError::EntryOutOfRange {
                from: 0,
                to: 0,
                value: 1.5
            })
        );
    }

    #[test]
    fn bad_init_and_label() {
        assert!(matches!(
            Dtmc::from_dense(4, &four_state()),
            Err(ModelError::BadInit { init: 4, n: 4 })
        ));
        let err = Dtmc::new(
            0,
            vec![vec![(0, 1.0)]],
            vec!["a".into()],
            vec![[3].into_iter().collect()],
        )
        .unwrap_err();
        assert!(matches!(err, ModelError::BadLabel { label: 3, .. }));
    }

    #[test]
    fn missing_row_rejected() {
        let err = Dtmc::new(0, vec![vec![(1, 1.0)], vec![]], vec![], vec![]).unwrap_err();
        assert!(matches!(err, ModelError::RowSumViolation { row: 1, .. }));
    }

    #[test]
    fn duplicates_merge() {
        let d = Dtmc::new(0, vec![vec![(0, 0.5), (0, 0.5)]], vec![], vec![]).unwrap();
        assert_eq!(d.row(0), &[(0, 1.0)]);
    }
}
