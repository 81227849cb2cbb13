/// Pivots smaller than this in magnitude are treated as singular.
pub(crate) const PIVOT_TOLERANCE: f64 = 1e-12;

/// Solves `a x = b` by Gaussian elimination with partial pivoting.
///
/// Rows track their last nonzero column so banded systems (row-major grid
/// orderings) are eliminated in `O(n·w²)` rather than `O(n³)`.
pub(crate) fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    let mut end: Vec<usize> = a
        .iter()
        .map(|row| row.iter().rposition(|&v| v != 0.0).map_or(0, |j| j + 1))
        .collect();
    for k in 0..n {
        let mut p = k;
        let mut best = a[k][k].abs();
        for (i, row) in a.iter().enumerate().skip(k + 1) {
            let v = row[k].abs();
            if v > best {
                best = v;
                p = i;
            }
        }
        if best < PIVOT_TOLERANCE {
            return None;
        }
        if p != k {
            a.swap(p, k);
            b.swap(p, k);
            end.swap(p, k);
        }
        let (top, rest) = a.split_at_mut(k + 1);
        let pivot_row = &top[k];
        let pivot = pivot_row[k];
        let pend = end[k].max(k + 1);
        for (off, row) in rest.iter_mut().enumerate() {
            let factor = row[k];
            if factor == 0.0 {
                continue;
            }
            let f = factor / pivot;
            row[k] = 0.0;
            for j in k + 1..pend {
                row[j] -= f * pivot_row[j];
            }
            let i = k + 1 + off;
            end[i] = end[i].max(pend);
            b[i] -= f * b[k];
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let mut acc = b[k];
        for j in k + 1..end[k].max(k + 1) {
            acc -= a[k][j] * x[j];
        }
        x[k] = acc / a[k][k];
    }
    Some(x)
}
