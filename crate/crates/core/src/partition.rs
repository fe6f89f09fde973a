//! Set partitions of `0..n` in canonical form.
//!
//! Cluster ids are `0..k`, numbered in order of each cluster's smallest
//! vertex, so two partitions are equal exactly when they describe the same
//! family of sets.

use crate::dsu::DisjointSets;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Partition {
    cluster_of: Vec<u32>,
    clusters: usize,
}

impl Partition {
    /// Canonicalizes arbitrary labels: vertices with equal labels share a cluster.
    pub fn from_labels<L: Copy + Eq + std::hash::Hash>(labels: &[L]) -> Self {
        let mut map = std::collections::HashMap::with_capacity(labels.len());
        let cluster_of: Vec<u32> = labels
            .iter()
            .map(|l| {
                let next = map.len() as u32;
                *map.entry(*l).or_insert(next)
            })
            .collect();
        Partition { cluster_of, clusters: map.len() }
    }

    /// Faster path for labels that are already vertex ids or small integers.
    pub fn from_dense_labels(labels: &[u32]) -> Self {
        let bound = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
        let mut map = vec![u32::MAX; bound];
        let mut next = 0u32;
        let cluster_of = labels
            .iter()
            .map(|&l| {
                let slot = &mut map[l as usize];
                if *slot == u32::MAX {
                    *slot = next;
                    next += 1;
                }
                *slot
            })
            .collect();
        Partition { cluster_of, clusters: next as usize }
    }

    pub fn singletons(n: usize) -> Self {
        Partition { cluster_of: (0..n as u32).collect(), clusters: n }
    }

    pub fn trivial(n: usize) -> Self {
        Partition { cluster_of: vec![0; n], clusters: n.min(1) }
    }

    pub fn from_dsu(d: &mut DisjointSets) -> Self {
        let roots: Vec<u32> = d.roots().into_iter().map(|r| r as u32).collect();
        Self::from_dense_labels(&roots)
    }

    pub fn from_sets(n: usize, sets: &[Vec<u32>]) -> Option<Self> {
        let mut labels = vec![u32::MAX; n];
        for (i, s) in sets.iter().enumerate() {
            for &v in s {
                if labels.get(v as usize).copied() != Some(u32::MAX) {
                    return None;
                }
                labels[v as usize] = i as u32;
            }
        }
        if labels.contains(&u32::MAX) {
            return None;
        }
        Some(Self::from_dense_labels(&labels))
    }

    pub fn n(&self) -> usize {
        self.cluster_of.len()
    }

    pub fn len(&self) -> usize {
        self.clusters
    }

    pub fn is_empty(&self) -> bool {
        self.clusters == 0
    }

    #[inline]
    pub fn cluster_of(&self, v: usize) -> usize {
        self.cluster_of[v] as usize
    }

    pub fn labels(&self) -> &[u32] {
        &self.cluster_of
    }

    pub fn same(&self, u: usize, v: usize) -> bool {
        self.cluster_of[u] == self.cluster_of[v]
    }

    /// Member lists in cluster-id order; each list is increasing.
    pub fn clusters(&self) -> Vec<Vec<u32>> {
        let mut out = vec![Vec::new(); self.clusters];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            out[c as usize].push(v as u32);
        }
        out
    }

    /// Smallest vertex of every cluster, indexed by cluster id.
    pub fn leaders(&self) -> Vec<u32> {
        let mut out = vec![u32::MAX; self.clusters];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            if out[c as usize] == u32::MAX {
                out[c as usize] = v as u32;
            }
        }
        out
    }

    /// Smallest vertex of the cluster containing each vertex.
    pub fn leader_labels(&self) -> Vec<u32> {
        let leaders = self.leaders();
        self.cluster_of.iter().map(|&c| leaders[c as usize]).collect()
    }

    pub fn refines(&self, coarser: &Partition) -> bool {
        if self.n() != coarser.n() {
            return false;
        }
        let mut image = vec![u32::MAX; self.clusters];
        for (v, &c) in self.cluster_of.iter().enumerate() {
            let target = coarser.cluster_of[v];
            let slot = &mut image[c as usize];
            if *slot == u32::MAX {
                *slot = target;
            } else if *slot != target {
                return false;
            }
        }
        true
    }

    /// The coarsest partition refining both.
    pub fn common_refinement(&self, other: &Partition) -> Partition {
        let pairs: Vec<(u32, u32)> = self.cluster_of.iter().copied().zip(other.cluster_of.iter().copied()).collect();
        Partition::from_labels(&pairs)
    }

    /// `P ⊕ E`: merge clusters along the given edges.
    pub fn join_edges<I: IntoIterator<Item = (usize, usize)>>(&self, edges: I) -> Partition {
        let mut d = self.to_dsu();
        for (u, v) in edges {
            d.union(u, v);
        }
        Partition::from_dsu(&mut d)
    }

    pub fn to_dsu(&self) -> DisjointSets {
        let mut d = DisjointSets::new(self.n());
        let leaders = self.leaders();
        for (v, &c) in self.cluster_of.iter().enumerate() {
            d.union(leaders[c as usize] as usize, v);
        }
        d
    }
}
