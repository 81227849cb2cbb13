//! Ready-made models: the message-resend protocol, the zeroconf address
//! protocol, the fixed 3×3 grid chain and randomized grid MDPs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::model::{Dtmc, Mdp, ModelError, Policy, SparseRow};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CaseStudyError {
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error(transparent)]
    Model(#[from] ModelError),
}

fn out_of_range(msg: impl Into<String>) -> CaseStudyError {
    CaseStudyError::ParameterOutOfRange(msg.into())
}

/// Chain with one atom per state, named after the state.
fn named_chain(names: &[&str], rows: Vec<SparseRow>) -> Result<Dtmc, CaseStudyError> {
    let atoms = names.iter().map(|s| s.to_string()).collect();
    let labels = (0..names.len()).map(|i| BTreeSet::from([i])).collect();
    Ok(Dtmc::new(0, rows, atoms, labels)?)
}

/// States start, try, lost, delivered (indices 0..4).
pub fn simple_protocol() -> Dtmc {
    named_chain(
        &["start", "try", "lost", "delivered"],
        vec![
            vec![(1, 1.0)],
            vec![(2, 0.2), (3, 0.8)],
            vec![(1, 1.0)],
            vec![(0, 1.0)],
        ],
    )
    .expect("well-formed")
}

/// Zeroconf address selection with `n` probe ticks, `m` hosts already on
/// the network and `k` addresses. State 0 is s₀, states 1..=n the ticks,
/// then err, uniq and succ.
pub fn zeroconf(n: usize, m: u64, k: u64, p: f64) -> Result<Dtmc, CaseStudyError> {
    if n == 0 {
        return Err(out_of_range("n must be at least 1"));
    }
    if m == 0 || m >= k {
        return Err(out_of_range(format!("need 0 < m < K, got m={m}, K={k}")));
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(out_of_range(format!("p={p} outside [0, 1]")));
    }
    let (err, uniq, succ) = (n + 1, n + 2, n + 3);
    let q = m as f64 / k as f64;
    let mut rows: Vec<SparseRow> = vec![vec![(1, q), (uniq, 1.0 - q)]];
    for i in 1..n {
        rows.push(vec![(0, 1.0 - p), (i + 1, p)]);
    }
    rows.push(vec![(0, 1.0 - p), (err, p)]);
    rows.push(vec![(err, 1.0)]);
    rows.push(vec![(succ, 1.0)]);
    rows.push(vec![(succ, 1.0)]);
    let mut names: Vec<String> = (0..=n).map(|i| format!("s{i}")).collect();
    names.extend(["err", "uniq", "succ"].map(String::from));
    let refs: Vec<&str> = names.iter().map(String::as_str).collect();
    named_chain(&refs, rows)
}

/// The 3×3 grid chain with hazards {2, 6} and goal {8}.
pub fn small_gridworld() -> Dtmc {
    let rows = vec![
        vec![(1, 0.1), (3, 0.9)],
        vec![(0, 0.1), (1, 0.1), (4, 0.8)],
        vec![(2, 1.0)],
        vec![(3, 0.1), (4, 0.8), (6, 0.1)],
        vec![(1, 0.1), (5, 0.1), (7, 0.8)],
        vec![(8, 1.0)],
        vec![(6, 1.0)],
        vec![(4, 0.1), (8, 0.9)],
        vec![(8, 1.0)],
    ];
    Dtmc::new(
        0,
        rows,
        vec!["hazard".into(), "goal".into()],
        (0..9)
            .map(|s| match s {
                2 | 6 => BTreeSet::from([0]),
                8 => BTreeSet::from([1]),
                _ => BTreeSet::new(),
            })
            .collect(),
    )
    .expect("well-formed")
}

/// Randomized grid parameters. Cells are indexed left to right, then bottom
/// to top: cell `(row, col)` is state `row * cols + col`, row 0 at the bottom.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub rows: usize,
    pub cols: usize,
    pub hazards: BTreeSet<usize>,
    pub goals: BTreeSet<usize>,
    /// Probability mass that slips away from the intended move.
    pub slip: f64,
    pub seed: u64,
}

impl GridSpec {
    /// Goal in the top-right corner, one hazard at the start of the second
    /// row, 20% slip.
    pub fn standard(rows: usize, cols: usize, seed: u64) -> Self {
        GridSpec {
            rows,
            cols,
            hazards: BTreeSet::from([cols]),
            goals: BTreeSet::from([(rows * cols).saturating_sub(1)]),
            slip: 0.2,
            seed,
        }
    }

    pub fn states(&self) -> usize {
        self.rows * self.cols
    }

    fn validate(&self) -> Result<(), CaseStudyError> {
        if self.rows == 0 || self.cols == 0 {
            return Err(out_of_range("grid must have at least one cell"));
        }
        if self.rows * self.cols < 2 {
            return Err(out_of_range("grid needs at least two cells"));
        }
        let n = self.states();
        if let Some(c) = self.hazards.iter().chain(&self.goals).find(|&&c| c >= n) {
            return Err(out_of_range(format!("cell {c} outside a {n}-cell grid")));
        }
        if let Some(c) = self.hazards.intersection(&self.goals).next() {
            return Err(out_of_range(format!("cell {c} is both hazard and goal")));
        }
        if self.goals.is_empty() {
            return Err(out_of_range("at least one goal cell is required"));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(out_of_range(format!("slip {} outside [0, 1]", self.slip)));
        }
        Ok(())
    }
}

/// Move order doubles as the policy tie-break order.
const MOVES: [(&str, isize, isize); 4] = [
    ("up", 1, 0),
    ("right", 0, 1),
    ("down", -1, 0),
    ("left", 0, -1),
];

fn step(spec: &GridSpec, s: usize, dr: isize, dc: isize) -> Option<usize> {
    let (r, c) = ((s / spec.cols) as isize, (s % spec.cols) as isize);
    let (nr, nc) = (r + dr, c + dc);
    (nr >= 0 && nc >= 0 && (nr as usize) < spec.rows && (nc as usize) < spec.cols)
        .then(|| nr as usize * spec.cols + nc as usize)
}

/// Grid MDP with actions up/down/left/right and its greedy shortest-path
/// policy.
pub fn random_gridworld(spec: &GridSpec) -> Result<(Mdp, Policy), CaseStudyError> {
    spec.validate()?;
    let n = spec.states();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let absorbing = |s: usize| spec.hazards.contains(&s) || spec.goals.contains(&s);
    let actions: Vec<String> = MOVES.iter().map(|m| m.0.to_string()).collect();
    let mut choices = Vec::with_capacity(n);
    for s in 0..n {
        let mut by_action = BTreeMap::new();
        for (a, &(_, dr, dc)) in MOVES.iter().enumerate() {
            if absorbing(s) {
                by_action.insert(a, vec![(s, 1.0)]);
                continue;
            }
            let intended = step(spec, s, dr, dc).unwrap_or(s);
            // Slip targets are the two perpendicular neighbours.
            let side = [
                step(spec, s, dc, dr).unwrap_or(s),
                step(spec, s, -dc, -dr).unwrap_or(s),
            ];
            let w: [f64; 2] = [rng.gen::<f64>(), rng.gen::<f64>()];
            let total = w[0] + w[1];
            let mut row = vec![(intended, 1.0 - spec.slip)];
            row.push((side[0], spec.slip * w[0] / total));
            row.push((side[1], spec.slip * (1.0 - w[0] / total)));
            by_action.insert(a, row);
        }
        choices.push(by_action);
    }
    let atoms = vec!["hazard".to_string(), "goal".to_string()];
    let labels = (0..n)
        .map(|s| {
            let mut l = BTreeSet::new();
            if spec.hazards.contains(&s) {
                l.insert(0);
            }
            if spec.goals.contains(&s) {
                l.insert(1);
            }
            l
        })
        .collect();
    let mdp = Mdp::new(0, actions, choices, atoms, labels)?;
    Ok((mdp, greedy_policy(spec)))
}

fn greedy_policy(spec: &GridSpec) -> Policy {
    let n = spec.states();
    let mut dist = vec![usize::MAX; n];
    let mut queue = VecDeque::new();
    for &g in &spec.goals {
        dist[g] = 0;
        queue.push_back(g);
    }
    while let Some(s) = queue.pop_front() {
        for &(_, dr, dc) in &MOVES {
            if let Some(t) = step(spec, s, dr, dc) {
                if dist[t] == usize::MAX && !spec.hazards.contains(&t) {
                    dist[t] = dist[s] + 1;
                    queue.push_back(t);
                }
            }
        }
    }
    let choice = (0..n)
        .map(|s| {
            let mut best = (usize::MAX, MOVES[0].0);
            for &(name, dr, dc) in &MOVES {
                let d = step(spec, s, dr, dc).map_or(usize::MAX, |t| dist[t]);
                if d < best.0 {
                    best = (d, name);
                }
            }
            best.1.to_string()
        })
        .collect();
    Policy::new(choice)
}

/// Picks `count` cells for a selected-transition threat on `model`, grouped
/// into rows of two or three so that no row is left with a single (and
/// hence pinned) variable. Rows come from transient states in breadth-first
/// order from the initial state, so they lie where the chain spends its
/// early steps; the most likely transitions are taken first, padded with
/// self-loops.
pub fn pick_transitions(model: &Dtmc, count: usize) -> Result<Vec<(usize, usize)>, CaseStudyError> {
    if count == 1 {
        return Err(out_of_range("a single transition cannot be perturbed"));
    }
    let mut sizes = Vec::new();
    let mut left = count;
    while left > 0 {
        let take = if left == 4 || left == 2 { 2 } else { 3 };
        sizes.push(take);
        left -= take;
    }
    let mut order = vec![model.init()];
    let mut seen = vec![false; model.n()];
    seen[model.init()] = true;
    let mut i = 0;
    while i < order.len() {
        for &(t, p) in model.row(order[i]) {
            if p > 0.0 && !seen[t] {
                seen[t] = true;
                order.push(t);
            }
        }
        i += 1;
    }
    let states: Vec<usize> = order
        .into_iter()
        .filter(|&s| model.prob(s, s) != 1.0)
        .collect();
    if states.len() < sizes.len() {
        return Err(out_of_range(format!(
            "{count} transitions need {} transient states, model has {}",
            sizes.len(),
            states.len()
        )));
    }
    let mut cells = Vec::with_capacity(count);
    for (&s, &size) in states.iter().zip(&sizes) {
        let mut row: Vec<(usize, f64)> = model.row(s).to_vec();
        row.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut targets: Vec<usize> = row.iter().map(|&(t, _)| t).take(size).collect();
        for t in std::iter::once(s).chain(0..model.n()) {
            if targets.len() == size {
                break;
            }
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        cells.extend(targets.into_iter().map(|t| (s, t)));
    }
    cells.sort_unstable();
    Ok(cells)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::property::{parse_property, sat_prob};

    #[test]
    fn simple_protocol_values() {
        let m = simple_protocol();
        let p = sat_prob(&m, &parse_property("P=? [ F<=10 delivered ]").unwrap()).unwrap();
        assert!((p - (1.0 - 0.2f64.powi(5))).abs() < 1e-15);
        let p = sat_prob(&m, &parse_property("P=? [ F delivered ]").unwrap()).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn zeroconf_shape() {
        let m = zeroconf(10, 50_000, 65_024, 0.5).unwrap();
        assert_eq!(m.n(), 14);
        assert!((m.prob(0, 1) - 0.768947).abs() < 1e-6);
        assert_eq!(m.prob(10, 11), 0.5);
        assert_eq!(m.prob(11, 11), 1.0);
        assert!(zeroconf(10, 0, 65_024, 0.5).is_err());
        assert!(zeroconf(10, 5, 4, 0.5).is_err());
        assert!(zeroconf(0, 5, 40, 0.5).is_err());
        assert!(zeroconf(3, 5, 40, 1.5).is_err());
    }

    #[test]
    fn zeroconf_without_forward_moves_never_errs() {
        let m = zeroconf(10, 50_000, 65_024, 0.0).unwrap();
        let phi = parse_property("P=? [ F<=30 err ]").unwrap();
        assert_eq!(sat_prob(&m, &phi).unwrap(), 0.0);
    }

    #[test]
    fn small_grid_reachability() {
        let m = small_gridworld();
        assert!(!m.reachable()[2]);
        let p = sat_prob(&m, &parse_property("P=? [ !hazard U<=6 goal ]").unwrap()).unwrap();
        assert!(p > 0.5184, "{p}");
    }

    #[test]
    fn grid_determinism_and_size() {
        let spec = GridSpec::standard(5, 5, 9);
        let (a, pa) = random_gridworld(&spec).unwrap();
        let (b, pb) = random_gridworld(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(pa, pb);
        let d = a.compose(&pa).unwrap();
        assert_eq!(d.n(), 25);
        d.validate().unwrap();
        let (c, _) = random_gridworld(&GridSpec::standard(5, 5, 10)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn greedy_policy_heads_to_goal() {
        let spec = GridSpec::standard(3, 3, 1);
        let p = greedy_policy(&spec);
        // From the bottom-left corner, the hazard at cell 3 blocks "up".
        assert_eq!(p.action(0), "right");
        assert_eq!(p.action(7), "right");
        assert_eq!(p.action(5), "up");
    }

    #[test]
    fn bad_grid_specs() {
        let mut spec = GridSpec::standard(3, 3, 1);
        spec.hazards.insert(8);
        assert!(random_gridworld(&spec).is_err());
        let mut spec = GridSpec::standard(3, 3, 1);
        spec.slip = 1.2;
        assert!(random_gridworld(&spec).is_err());
    }

    #[test]
    fn transition_picker_groups_rows() {
        let spec = GridSpec::standard(5, 5, 3);
        let (mdp, pol) = random_gridworld(&spec).unwrap();
        let d = mdp.compose(&pol).unwrap();
        for count in [5, 10, 20] {
            let cells = pick_transitions(&d, count).unwrap();
            assert_eq!(cells.len(), count);
            let mut per_row = BTreeMap::new();
            for (s, _) in &cells {
                *per_row.entry(*s).or_insert(0) += 1;
            }
            assert!(per_row.values().all(|&c| c >= 2));
        }
    }
}
