//! Agglomerative hierarchical clustering with Ward linkage via the
//! Lance-Williams recurrence, applied to a dissimilarity matrix.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::distance::DistanceMatrix;
use crate::analysis::tree::{ClusterTree, TreeBuilder};
use crate::error::{Error, Result};

struct Cluster {
    node: usize,
    size: usize,
    /// Lexicographically smallest leaf label, used for deterministic
    /// tie-breaking of equal merge distances.
    rep: String,
}

/// Ward clustering. At each step the pair with minimal current distance is
/// merged at that distance; remaining distances follow
/// `d(i∪j, k) = sqrt(((n_i+n_k) d_ik^2 + (n_j+n_k) d_jk^2 - n_k d_ij^2) / (n_i+n_j+n_k))`.
/// Ties are broken by the label-sorted representative pair.
pub fn ward_cluster(dm: &DistanceMatrix) -> Result<ClusterTree> {
    let n = dm.n();
    if n < 2 {
        return Err(Error::invalid("clustering needs at least 2 labels"));
    }
    dm.validate()?;

    let mut builder = TreeBuilder::new();
    let mut active: Vec<Cluster> = dm
        .labels()
        .iter()
        .map(|l| Cluster {
            node: builder.leaf(l),
            size: 1,
            rep: l.clone(),
        })
        .collect();
    // working copy of pairwise distances between active clusters
    let mut dist: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| dm.get(i, j)).collect())
        .collect();

    let mut root = active[0].node;
    while active.len() > 1 {
        let m = active.len();
        let mut best: Option<(f64, String, String, usize, usize)> = None;
        for i in 0..m {
            for j in (i + 1)..m {
                let d = dist[i][j];
                let (ra, rb) = if active[i].rep <= active[j].rep {
                    (active[i].rep.clone(), active[j].rep.clone())
                } else {
                    (active[j].rep.clone(), active[i].rep.clone())
                };
                let candidate = (d, ra, rb, i, j);
                let better = match &best {
                    None => true,
                    Some((bd, bra, brb, _, _)) => {
                        (candidate.0, &candidate.1, &candidate.2) < (*bd, bra, brb)
                    }
                };
                if better {
                    best = Some(candidate);
                }
            }
        }
        let (d, _, _, i, j) = best.expect("at least one pair");

        let merged_node = builder.internal(vec![active[i].node, active[j].node], d);
        root = merged_node;
        let (ni, nj) = (active[i].size as f64, active[j].size as f64);
        let dij2 = d * d;

        // distances from the merged cluster to every other active cluster
        let mut new_row: Vec<f64> = Vec::with_capacity(m);
        for k in 0..m {
            if k == i || k == j {
                new_row.push(0.0);
                continue;
            }
            let nk = active[k].size as f64;
            let dik2 = dist[i][k] * dist[i][k];
            let djk2 = dist[j][k] * dist[j][k];
            let num = (ni + nk) * dik2 + (nj + nk) * djk2 - nk * dij2;
            new_row.push((num / (ni + nj + nk)).max(0.0).sqrt());
        }

        let merged = Cluster {
            node: merged_node,
            size: active[i].size + active[j].size,
            rep: if active[i].rep <= active[j].rep {
                active[i].rep.clone()
            } else {
                active[j].rep.clone()
            },
        };

        // drop j then i (j > i), append merged cluster at the end
        let keep: Vec<usize> = (0..m).filter(|&k| k != i && k != j).collect();
        let mut next_dist: Vec<Vec<f64>> = Vec::with_capacity(m - 1);
        for (a_new, &a_old) in keep.iter().enumerate() {
            let mut row: Vec<f64> = keep.iter().map(|&b_old| dist[a_old][b_old]).collect();
            row.push(new_row[a_old]);
            debug_assert_eq!(row.len(), keep.len() + 1);
            let _ = a_new;
            next_dist.push(row);
        }
        let mut last: Vec<f64> = keep.iter().map(|&b_old| new_row[b_old]).collect();
        last.push(0.0);
        next_dist.push(last);

        let mut next_active: Vec<Cluster> = Vec::with_capacity(m - 1);
        for &k in &keep {
            let c = &active[k];
            next_active.push(Cluster {
                node: c.node,
                size: c.size,
                rep: c.rep.clone(),
            });
        }
        next_active.push(merged);

        active = next_active;
        dist = next_dist;
    }

    builder.build(root)
}

/// Random symmetric dissimilarity matrix with uniform(0,1) entries.
pub fn random_distance_matrix(labels: &[String], rng: &mut ChaCha8Rng) -> DistanceMatrix {
    let n = labels.len();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let v: f64 = rng.random_range(0.0..1.0);
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    DistanceMatrix::new(labels.to_vec(), values).expect("construction is valid")
}

/// Ward tree of a random matrix, mirroring the random reference tree used
/// as a worst-case anchor.
pub fn random_ward_tree(labels: &[String], rng: &mut ChaCha8Rng) -> ClusterTree {
    ward_cluster(&random_distance_matrix(labels, rng)).expect("random matrix clusters")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::tree::to_newick;

    fn labels(names: &[&str]) -> Vec<String> {
        names.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn two_points_merge_at_their_distance() {
        let dm = DistanceMatrix::new(labels(&["a", "b"]), vec![0.0, 3.5, 3.5, 0.0]).unwrap();
        let t = ward_cluster(&dm).unwrap();
        assert_eq!(to_newick(&t), "(a:3.5,b:3.5);");
    }

    #[test]
    fn one_dimensional_points_cluster_into_pairs() {
        // points {0, 1, 10, 11} under Euclidean distance -> ((a,b),(c,d))
        let pts = [0.0f64, 1.0, 10.0, 11.0];
        let names = labels(&["a", "b", "c", "d"]);
        let mut values = vec![0.0; 16];
        for i in 0..4 {
            for j in 0..4 {
                values[i * 4 + j] = (pts[i] - pts[j]).abs();
            }
        }
        let dm = DistanceMatrix::new(names, values).unwrap();
        let t = ward_cluster(&dm).unwrap();
        let s = to_newick(&t);
        assert!(
            s.starts_with("((a:") || s.starts_with("((c:"),
            "unexpected topology: {s}"
        );
        // both pairs must appear as sibling groups
        let expect = crate::analysis::tree::from_newick("((a:1,b:1):1,(c:1,d:1):1);").unwrap();
        assert_eq!(crate::analysis::tree::tree_distance(&t, &expect).unwrap(), 0.0);
    }

    #[test]
    fn heights_are_monotone() {
        use rand_chacha::rand_core::SeedableRng;
        let names = labels(&["a", "b", "c", "d", "e", "f"]);
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dm = random_distance_matrix(&names, &mut rng);
            let t = ward_cluster(&dm).unwrap();
            for i in 0..t.len() {
                let n = t.node(i);
                for &c in &n.children {
                    assert!(
                        t.node(c).height <= n.height + 1e-12,
                        "height inversion at seed {seed}"
                    );
                }
            }
        }
    }

    #[test]
    fn asymmetric_input_is_rejected() {
        let dm = DistanceMatrix::new(labels(&["a", "b"]), vec![0.0, 1.0, 2.0, 0.0]);
        assert!(dm.is_err());
    }

    #[test]
    fn nested_blocks_recover_exactly() {
        // block-constant dissimilarities with strictly increasing
        // between-block levels recover the nesting
        let names = labels(&["a", "b", "c", "d", "e", "f", "g", "h"]);
        let level = |i: usize, j: usize| -> f64 {
            if i == j {
                0.0
            } else if i / 2 == j / 2 {
                1.0
            } else if i / 4 == j / 4 {
                4.0
            } else {
                10.0
            }
        };
        let mut values = vec![0.0; 64];
        for i in 0..8 {
            for j in 0..8 {
                values[i * 8 + j] = level(i, j);
            }
        }
        let dm = DistanceMatrix::new(names, values).unwrap();
        let t = ward_cluster(&dm).unwrap();
        let expect = crate::analysis::tree::from_newick(
            "(((a:1,b:1):1,(c:1,d:1):1):1,((e:1,f:1):1,(g:1,h:1):1):1);",
        )
        .unwrap();
        assert_eq!(crate::analysis::tree::tree_distance(&t, &expect).unwrap(), 0.0);
    }
}
