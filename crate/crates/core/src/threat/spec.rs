use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ThreatError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ThreatKind {
    #[serde(rename = "ST")]
    St,
    #[serde(rename = "SPST")]
    Spst,
    #[serde(rename = "SS")]
    Ss,
    #[serde(rename = "SPSS")]
    Spss,
}

impl ThreatKind {
    pub const ALL: [ThreatKind; 4] = [
        ThreatKind::St,
        ThreatKind::Spst,
        ThreatKind::Ss,
        ThreatKind::Spss,
    ];

    /// Structure-preserving kinds may not create transitions.
    pub fn preserves_structure(self) -> bool {
        matches!(self, ThreatKind::Spst | ThreatKind::Spss)
    }

    pub fn selects_states(self) -> bool {
        matches!(self, ThreatKind::Ss | ThreatKind::Spss)
    }

    pub fn name(self) -> &'static str {
        match self {
            ThreatKind::St => "ST",
            ThreatKind::Spst => "SPST",
            ThreatKind::Ss => "SS",
            ThreatKind::Spss => "SPSS",
        }
    }
}

impl fmt::Display for ThreatKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for ThreatKind {
    type Err = ThreatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ThreatKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ThreatError::Parse(format!("unknown threat kind '{s}'")))
    }
}

/// The vulnerable part of the model: whole rows for the selected-states
/// kinds, individual cells for the selected-transitions kinds.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Vulnerable {
    States(BTreeSet<usize>),
    Transitions(BTreeSet<(usize, usize)>),
}

/// An ε,max-bounded threat model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ThreatFile", into = "ThreatFile")]
pub struct ThreatModel {
    kind: ThreatKind,
    epsilon: f64,
    vulnerable: Vulnerable,
}

impl ThreatModel {
    pub fn new(
        kind: ThreatKind,
        epsilon: f64,
        vulnerable: Vulnerable,
    ) -> Result<Self, ThreatError> {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(ThreatError::BadEpsilon(epsilon));
        }
        let matches_kind = match &vulnerable {
            Vulnerable::States(_) => kind.selects_states(),
            Vulnerable::Transitions(_) => !kind.selects_states(),
        };
        if !matches_kind {
            return Err(ThreatError::KindMismatch(kind));
        }
        Ok(ThreatModel {
            kind,
            epsilon,
            vulnerable,
        })
    }

    pub fn states(
        kind: ThreatKind,
        epsilon: f64,
        states: impl IntoIterator<Item = usize>,
    ) -> Result<Self, ThreatError> {
        Self::new(
            kind,
            epsilon,
            Vulnerable::States(states.into_iter().collect()),
        )
    }

    pub fn transitions(
        kind: ThreatKind,
        epsilon: f64,
        cells: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, ThreatError> {
        Self::new(
            kind,
            epsilon,
            Vulnerable::Transitions(cells.into_iter().collect()),
        )
    }

    pub fn kind(&self) -> ThreatKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn vulnerable(&self) -> &Vulnerable {
        &self.vulnerable
    }

    /// Same kind and vulnerable set under another budget.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self, ThreatError> {
        Self::new(self.kind, epsilon, self.vulnerable.clone())
    }

    /// Same vulnerable set and budget under another kind of the same family
    /// (states or transitions).
    pub fn with_kind(&self, kind: ThreatKind) -> Result<Self, ThreatError> {
        Self::new(kind, self.epsilon, self.vulnerable.clone())
    }

    pub fn check_range(&self, n: usize) -> Result<(), ThreatError> {
        match &self.vulnerable {
            Vulnerable::States(set) => match set.iter().find(|&&s| s >= n) {
                Some(&s) => Err(ThreatError::StateOutOfRange { state: s, n }),
                None => Ok(()),
            },
            Vulnerable::Transitions(set) => match set.iter().find(|&&(s, t)| s >= n || t >= n) {
                Some(&(from, to)) => Err(ThreatError::TransitionOutOfRange { from, to, n }),
                None => Ok(()),
            },
        }
    }

    /// Whether cell `(s, t)` is in the vulnerable set, ignoring structure.
    pub fn covers(&self, s: usize, t: usize) -> bool {
        match &self.vulnerable {
            Vulnerable::States(set) => set.contains(&s),
            Vulnerable::Transitions(set) => set.contains(&(s, t)),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ThreatFile {
    kind: ThreatKind,
    epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vulnerable_states: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    vulnerable_transitions: Option<Vec<(usize, usize)>>,
}

impl TryFrom<ThreatFile> for ThreatModel {
    type Error = ThreatError;

    fn try_from(f: ThreatFile) -> Result<Self, ThreatError> {
        let vulnerable = match (f.vulnerable_states, f.vulnerable_transitions) {
            (Some(s), None) => Vulnerable::States(s.into_iter().collect()),
            (None, Some(t)) => Vulnerable::Transitions(t.into_iter().collect()),
            _ => {
                return Err(ThreatError::Parse(
                    "exactly one of vulnerable_states / vulnerable_transitions is required".into(),
                ))
            }
        };
        ThreatModel::new(f.kind, f.epsilon, vulnerable)
    }
}

impl From<ThreatModel> for ThreatFile {
    fn from(tm: ThreatModel) -> Self {
        let (vulnerable_states, vulnerable_transitions) = match tm.vulnerable {
            Vulnerable::States(s) => (Some(s.into_iter().collect()), None),
            Vulnerable::Transitions(t) => (None, Some(t.into_iter().collect())),
        };
        ThreatFile {
            kind: tm.kind,
            epsilon: tm.epsilon,
            vulnerable_states,
            vulnerable_transitions,
        }
    }
}

pub fn parse_threat(text: &str) -> Result<ThreatModel, ThreatError> {
    serde_json::from_str(text).map_err(|e| ThreatError::Parse(e.to_string()))
}

pub fn render_threat(tm: &ThreatModel) -> String {
    let mut s = serde_json::to_string_pretty(tm).expect("threat model serializes");
    s.push('\n');
    s
}

pub fn load_threat(path: impl AsRef<Path>) -> Result<ThreatModel, ThreatError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ThreatError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_threat(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let tm = ThreatModel::states(ThreatKind::Spss, 0.1, [3, 1, 7]).unwrap();
        let text = render_threat(&tm);
        assert!(text.contains("\"vulnerable_states\": [\n    1,\n    3,\n    7\n  ]"));
        assert_eq!(parse_threat(&text).unwrap(), tm);

        let tm = ThreatModel::transitions(ThreatKind::St, 0.5, [(0, 2), (0, 1)]).unwrap();
        let back = parse_threat(&render_threat(&tm)).unwrap();
        assert_eq!(back, tm);
    }

    #[test]
    fn file_shape_errors() {
        let both = r#"{"kind":"SS","epsilon":0.1,"vulnerable_states":[1],"vulnerable_transitions":[[1,2]]}"#;
        assert!(matches!(parse_threat(both), Err(ThreatError::Parse(_))));
        let mismatch = r#"{"kind":"ST","epsilon":0.1,"vulnerable_states":[1]}"#;
        assert!(matches!(parse_threat(mismatch), Err(ThreatError::Parse(_))));
        let eps = r#"{"kind":"SS","epsilon":1.5,"vulnerable_states":[1]}"#;
        assert!(matches!(parse_threat(eps), Err(ThreatError::Parse(_))));
        assert_eq!(
            ThreatModel::states(ThreatKind::Ss, -0.1, [1]),
            Err(ThreatError::BadEpsilon(-0.1))
        );
    }

    #[test]
    fn range_check() {
        let tm = ThreatModel::transitions(ThreatKind::Spst, 0.1, [(0, 4)]).unwrap();
        assert_eq!(
            tm.check_range(4),
            Err(ThreatError::TransitionOutOfRange {
                from: 0,
                to: 4,
                n: 4
            })
        );
        assert!(tm.check_range(5).is_ok());
    }
}
