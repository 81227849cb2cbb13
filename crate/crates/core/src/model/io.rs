//! JSON model files.
//!
//! ```json
//! {"type": "dtmc", "n": 2, "init": 0, "atoms": ["goal"],
//!  "labels": {"1": ["goal"]},
//!  "transitions": [{"from": 0, "to": 1, "p": 1.0}, {"from": 1, "to": 1, "p": 1.0}]}
//! ```
//!
//! MDP files use `"type": "mdp"` and carry an `"action"` on every transition.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dtmc, Mdp, ModelError, SparseRow};

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dtmc(Dtmc),
    Mdp(Mdp),
}

impl From<Dtmc> for Model {
    fn from(d: Dtmc) -> Self {
        Model::Dtmc(d)
    }
}

impl From<Mdp> for Model {
    fn from(m: Mdp) -> Self {
        Model::Mdp(m)
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    #[serde(rename = "type")]
    kind: String,
    n: usize,
    init: usize,
    #[serde(default)]
    atoms: Vec<String>,
    #[serde(default)]
    labels: BTreeMap<usize, Vec<String>>,
    transitions: Vec<TransitionEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TransitionEntry {
    from: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    action: Option<String>,
    to: usize,
    p: f64,
}

pub fn load_model(path: impl AsRef<Path>) -> Result<Model, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_model(&text)
}

pub fn store_model(model: &Model, path: impl AsRef<Path>) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, render_model(model)).map_err(|e| ModelError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn parse_model(text: &str) -> Result<Model, ModelError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| {
        ModelError::parse(
            format!("line {} column {}", e.line(), e.column()),
            e.to_string(),
        )
    })?;
    let n = file.n;
    let atom_ids: BTreeMap<&str, usize> = file
        .atoms
        .iter()
        .enumerate()
        .map(|(i, a)| (a.as_str(), i))
        .collect();
    if atom_ids.len() != file.atoms.len() {
        return Err(ModelError::parse("atoms", "duplicate atom name"));
    }
    let mut labels = vec![BTreeSet::new(); n];
    for (&s, names) in &file.labels {
        if s >= n {
            return Err(ModelError::parse(
                format!("labels.\"{s}\""),
                format!("state out of range for n = {n}"),
            ));
        }
        for name in names {
            let idx = atom_ids.get(name.as_str()).ok_or_else(|| {
                ModelError::parse(
                    format!("labels.\"{s}\""),
                    format!("undeclared atom '{name}'"),
                )
            })?;
            labels[s].insert(*idx);
        }
    }

    let mut seen = HashSet::new();
    for (i, t) in file.transitions.iter().enumerate() {
        let ctx = || format!("transitions[{i}]");
        if t.from >= n || t.to >= n {
            return Err(ModelError::parse(
                ctx(),
                format!("state index out of range for n = {n}"),
            ));
        }
        if !seen.insert((t.from, t.action.clone(), t.to)) {
            return Err(ModelError::parse(ctx(), "duplicate transition"));
        }
    }

    match file.kind.as_str() {
        "dtmc" => {
            let mut rows: Vec<SparseRow> = vec![Vec::new(); n];
            for (i, t) in file.transitions.iter().enumerate() {
                if t.action.is_some() {
                    return Err(ModelError::parse(
                        format!("transitions[{i}].action"),
                        "actions are only legal in mdp files",
                    ));
                }
                rows[t.from].push((t.to, t.p));
            }
            Ok(Model::Dtmc(Dtmc::new(file.init, rows, file.atoms, labels)?))
        }
        "mdp" => {
            let mut actions: Vec<String> = Vec::new();
            let mut choices: Vec<BTreeMap<usize, SparseRow>> = vec![BTreeMap::new(); n];
            for (i, t) in file.transitions.iter().enumerate() {
                let name = t.action.as_ref().ok_or_else(|| {
                    ModelError::parse(format!("transitions[{i}]"), "mdp transition without action")
                })?;
                let a = match actions.iter().position(|x| x == name) {
                    Some(a) => a,
                    None => {
                        actions.push(name.clone());
                        actions.len() - 1
                    }
                };
                choices[t.from].entry(a).or_default().push((t.to, t.p));
            }
            Ok(Model::Mdp(Mdp::new(
                file.init, actions, choices, file.atoms, labels,
            )?))
        }
        other => Err(ModelError::parse(
            "type",
            format!("unknown model type '{other}'"),
        )),
    }
}

/// Canonical file text: states ascending, then action name, then target.
pub fn render_model(model: &Model) -> String {
    let (kind, n, init, atoms, labels, transitions) = match model {
        Model::Dtmc(d) => {
            let transitions = d
                .rows()
                .iter()
                .enumerate()
                .flat_map(|(s, row)| {
                    row.iter().map(move |&(to, p)| TransitionEntry {
                        from: s,
                        action: None,
                        to,
                        p,
                    })
                })
                .collect();
            ("dtmc", d.n(), d.init(), d.atoms(), d.labels(), transitions)
        }
        Model::Mdp(m) => {
            let mut transitions = Vec::new();
            for s in 0..m.n() {
                for (a, row) in m.choices(s) {
                    for &(to, p) in row {
                        transitions.push(TransitionEntry {
                            from: s,
                            action: Some(m.actions()[*a].clone()),
                            to,
                            p,
                        });
                    }
                }
            }
            ("mdp", m.n(), m.init(), m.atoms(), m.labels(), transitions)
        }
    };
    let labels = labels
        .iter()
        .enumerate()
        .filter(|(_, l)| !l.is_empty())
        .map(|(s, l)| (s, l.iter().map(|&i| atoms[i].clone()).collect()))
        .collect();
    let file = ModelFile {
        kind: kind.to_string(),
        n,
        init,
        atoms: atoms.to_vec(),
        labels,
        transitions,
    };
    let mut text = serde_json::to_string_pretty(&file).expect("model serializes");
    text.push('\n');
    text
}
