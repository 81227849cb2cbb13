//! Graph-based precomputation for unbounded until: states with probability
//! exactly 0 or exactly 1, decided from the transition structure alone.

fn predecessors(succ: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let mut pred = vec![Vec::new(); succ.len()];
    for (s, ts) in succ.iter().enumerate() {
        for &t in ts {
            pred[t].push(s);
        }
    }
    pred
}

/// Backward closure of `seeds` through states admitted by `through`.
fn backward(pred: &[Vec<usize>], seeds: &[bool], through: impl Fn(usize) -> bool) -> Vec<bool> {
    let mut seen = seeds.to_vec();
    let mut stack: Vec<usize> = (0..seeds.len()).filter(|&s| seeds[s]).collect();
    while let Some(t) = stack.pop() {
        for &u in &pred[t] {
            if !seen[u] && through(u) {
                seen[u] = true;
                stack.push(u);
            }
        }
    }
    seen
}

/// States from which `rhs` is unreachable along `lhs`-paths.
pub(crate) fn prob0(succ: &[Vec<usize>], lhs: &[bool], rhs: &[bool]) -> Vec<bool> {
    let pred = predecessors(succ);
    let reach = backward(&pred, rhs, |u| lhs[u]);
    reach.into_iter().map(|r| !r).collect()
}

/// States satisfying `lhs U rhs` with probability 1, given the prob-0 set.
/// `leak` marks states whose rows lose mass to an implicit failing sink.
pub(crate) fn prob1(
    succ: &[Vec<usize>],
    lhs: &[bool],
    rhs: &[bool],
    no: &[bool],
    leak: &[bool],
) -> Vec<bool> {
    let pred = predecessors(succ);
    let maybe = |s: usize| lhs[s] && !rhs[s] && !no[s];
    let bad: Vec<bool> = (0..succ.len())
        .map(|s| no[s] || (maybe(s) && leak[s]))
        .collect();
    let can_fail = backward(&pred, &bad, maybe);
    can_fail.into_iter().map(|f| !f).collect()
}
