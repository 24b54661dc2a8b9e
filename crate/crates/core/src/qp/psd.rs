//! Positive-semidefiniteness probe for sparse symmetric Q.

use nalgebra::DMatrix;

/// Cholesky of `Q_c + δI` for every connected component `Q_c` of the
/// sparsity graph. Returns a variable of the first component that fails.
///
/// The shift `δ = 1e-10·(1 + max|Q_c|)` admits singular PSD blocks while
/// rejecting eigenvalues more negative than the shift.
pub(crate) fn first_non_psd_component(n: usize, upper: &[(usize, usize, f64)]) -> Option<usize> {
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut [usize], mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    let mut touched = vec![false; n];
    for &(i, j, _) in upper {
        touched[i] = true;
        touched[j] = true;
        let (a, b) = (find(&mut parent, i), find(&mut parent, j));
        if a != b {
            parent[a] = b;
        }
    }

    let mut members: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in (0..n).filter(|&i| touched[i]) {
        let root = find(&mut parent, i);
        members.entry(root).or_default().push(i);
    }
    let mut local = vec![usize::MAX; n];
    let mut entries: std::collections::BTreeMap<usize, Vec<(usize, usize, f64)>> = Default::default();
    for &(i, j, v) in upper {
        let root = find(&mut parent, i);
        entries.entry(root).or_default().push((i, j, v));
    }

    for (root, vars) in &members {
        for (k, &v) in vars.iter().enumerate() {
            local[v] = k;
        }
        let size = vars.len();
        let mut m = DMatrix::<f64>::zeros(size, size);
        let mut scale = 0.0_f64;
        for &(i, j, v) in &entries[root] {
            let (a, b) = (local[i], local[j]);
            m[(a, b)] += v;
            if a != b {
                m[(b, a)] += v;
            }
            scale = scale.max(v.abs());
        }
        let shift = 1e-10 * (1.0 + scale);
        for k in 0..size {
            m[(k, k)] += shift;
        }
        if m.cholesky().is_none() {
            return Some(vars[0]);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_and_singular_blocks_pass() {
        assert_eq!(first_non_psd_component(3, &[(0, 0, 2.0), (1, 2, 0.0)]), None);
        // [[1, 1], [1, 1]] is singular PSD.
        assert_eq!(first_non_psd_component(2, &[(0, 0, 1.0), (0, 1, 1.0), (1, 1, 1.0)]), None);
    }

    #[test]
    fn negative_diagonal_fails() {
        assert_eq!(first_non_psd_component(3, &[(0, 0, 1.0), (2, 2, -1e-3)]), Some(2));
    }
}
