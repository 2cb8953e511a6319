//! Fill-reducing ordering for symmetric sparse matrices.

use std::collections::BTreeSet;

use crate::sparse::CscMatrix;

/// Minimum-degree elimination order of the symmetric pattern of `upper`.
///
/// Works on the explicit elimination graph: the vertex of least current degree
/// (lowest index on ties) is eliminated and its neighbours become a clique.
/// Returns `perm` with `perm[new] = old`.
pub fn minimum_degree(upper: &CscMatrix) -> Vec<usize> {
    let n = upper.ncols;
    let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
    for (r, c, _) in upper.iter() {
        if r != c {
            adj[r].insert(c);
            adj[c].insert(r);
        }
    }
    let mut queue: BTreeSet<(usize, usize)> = (0..n).map(|v| (adj[v].len(), v)).collect();
    let mut perm = Vec::with_capacity(n);
    while let Some((_, v)) = queue.pop_first() {
        perm.push(v);
        let nbrs: Vec<usize> = std::mem::take(&mut adj[v]).into_iter().collect();
        for &a in &nbrs {
            let before = adj[a].len();
            adj[a].remove(&v);
            for &b in &nbrs {
                if b != a {
                    adj[a].insert(b);
                }
            }
            let after = adj[a].len();
            if before != after {
                queue.remove(&(before, a));
                queue.insert((after, a));
            }
        }
    }
    perm
}

/// Inverse permutation: `inv[old] = new`.
pub fn invert(perm: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; perm.len()];
    for (new, &old) in perm.iter().enumerate() {
        inv[old] = new;
    }
    inv
}

/// Upper triangle of `P A P'` for a symmetric `A` given by its upper triangle.
pub fn permute_symmetric(upper: &CscMatrix, perm: &[usize]) -> CscMatrix {
    let inv = invert(perm);
    let mut b = crate::sparse::TripletBuilder::new(upper.nrows, upper.ncols);
    for (r, c, v) in upper.iter() {
        let (i, j) = (inv[r], inv[c]);
        b.push(i.min(j), i.max(j), v);
    }
    b.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arrow_matrix_hub_goes_last() {
        // Vertex 0 is connected to everything: eliminating it first would fill the matrix.
        let n = 6;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 4.0));
            if i > 0 {
                t.push((0, i, 1.0));
            }
        }
        let m = CscMatrix::from_triplets(n, n, &t).unwrap();
        let perm = minimum_degree(&m);
        assert_eq!(perm.len(), n);
        assert!(perm.iter().position(|&v| v == 0).unwrap() >= n - 2);
        let mut sorted = perm.clone();
        sorted.sort();
        assert_eq!(sorted, (0..n).collect::<Vec<_>>());
    }
}
