use serde::{Deserialize, Serialize};

use crate::model::Dtmc;

use super::{ThreatError, ThreatModel};

/// Interval chain enclosing a threat model's perturbation set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdtmcExport {
    pub lower: Vec<Vec<f64>>,
    pub upper: Vec<Vec<f64>>,
    /// Set when the interval form over-approximates the threat model.
    #[serde(skip)]
    pub notice: Option<String>,
}

/// Vulnerable entries get `[P − min(ε, P), P + min(ε, 1 − P)]`; all other
/// entries are the point interval `[P, P]`. Structure-preserving kinds keep
/// zero-probability entries at `[0, 0]`.
pub fn build_idtmc(model: &Dtmc, tm: &ThreatModel) -> Result<IdtmcExport, ThreatError> {
    tm.check_range(model.n())?;
    let p = model.to_dense();
    let eps = tm.epsilon();
    let structural = tm.kind().preserves_structure();
    let mut lower = p.clone();
    let mut upper = p.clone();
    for (s, row) in p.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            if tm.covers(s, t) && !(structural && v == 0.0) {
                lower[s][t] = v - eps.min(v);
                upper[s][t] = v + eps.min(1.0 - v);
            }
        }
    }
    let notice = structural.then(|| {
        format!(
            "{} exported as intervals; zero-probability entries are pinned to [0, 0]",
            tm.kind()
        )
    });
    Ok(IdtmcExport {
        lower,
        upper,
        notice,
    })
}

impl IdtmcExport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string(self).expect("interval matrices serialize");
        s.push('\n');
        s
    }

    pub fn contains(&self, matrix: &[Vec<f64>], tol: f64) -> bool {
        matrix.iter().enumerate().all(|(s, row)| {
            row.iter()
                .enumerate()
                .all(|(t, &v)| v >= self.lower[s][t] - tol && v <= self.upper[s][t] + tol)
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::threat::ThreatKind;

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

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn selected_state_intervals() {
        let m = four_state();
        let tm = ThreatModel::states(ThreatKind::Ss, 0.1, [1]).unwrap();
        let ex = build_idtmc(&m, &tm).unwrap();
        assert!(close(&ex.lower[1], &[0.0, 0.0, 0.0, 0.7]));
        assert!(close(&ex.upper[1], &[0.2, 0.2, 0.1, 0.9]));
        assert_eq!(ex.lower[0], m.to_dense()[0]);
        assert_eq!(ex.upper[2], m.to_dense()[2]);
        assert!(ex.notice.is_none());
    }

    #[test]
    fn selected_transition_clipping() {
        let m = four_state();
        let tm = ThreatModel::transitions(ThreatKind::St, 0.5, [(0, 1), (0, 2)]).unwrap();
        let ex = build_idtmc(&m, &tm).unwrap();
        assert!(close(&ex.lower[0], &[0.0, 0.1, 0.0, 0.0]));
        assert!(close(&ex.upper[0], &[0.0, 1.0, 0.9, 0.0]));
    }

    #[test]
    fn zero_budget_is_point_interval() {
        let m = four_state();
        let tm = ThreatModel::states(ThreatKind::Ss, 0.0, [0, 1, 2, 3]).unwrap();
        let ex = build_idtmc(&m, &tm).unwrap();
        assert_eq!(ex.lower, m.to_dense());
        assert_eq!(ex.upper, m.to_dense());
    }

    #[test]
    fn structure_preserving_notice() {
        let m = four_state();
        let tm = ThreatModel::states(ThreatKind::Spss, 0.1, [1]).unwrap();
        let ex = build_idtmc(&m, &tm).unwrap();
        assert_eq!((ex.lower[1][2], ex.upper[1][2]), (0.0, 0.0));
        assert!(ex.notice.is_some());
        let json = ex.to_json();
        assert!(json.starts_with("{\"lower\":[[") && !json.contains("notice"));
    }
}
