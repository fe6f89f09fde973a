//! Tree broadcast and aggregation, grouped head distribution, and doubling.

use super::tree::{arity_for, sweep_down, sweep_up, RangeTree};
use super::{Cluster, MpcError, Record};

/// Sorted records together with, for each record, the index of the first
/// record of its group.
#[derive(Debug, Clone)]
pub struct Grouped<R> {
    pub records: Vec<R>,
    pub head: Vec<u32>,
}

impl<R> Grouped<R> {
    pub fn head_of(&self, i: usize) -> &R {
        &self.records[self.head[i] as usize]
    }

    pub fn is_head(&self, i: usize) -> bool {
        self.head[i] as usize == i
    }

    pub fn iter(&self) -> impl Iterator<Item = (&R, &R)> {
        self.records.iter().enumerate().map(move |(i, r)| (r, self.head_of(i)))
    }

    pub fn heads(&self) -> impl Iterator<Item = &R> {
        self.records.iter().enumerate().filter(move |(i, _)| self.is_head(*i)).map(|(_, r)| r)
    }
}

impl Cluster {
    fn tree_arity(&self, words: usize) -> Result<usize, MpcError> {
        let a = arity_for(self.config.space, words as u64);
        if a < 1 {
            return Err(MpcError::RecordTooWide { words, space: self.config.space });
        }
        Ok(a)
    }

    /// Delivers a `words`-word message from `root` to every target through a
    /// bounded-arity tree. Returns the number of supersteps used.
    pub fn broadcast(&mut self, phase: &str, root: usize, targets: &[usize], words: usize) -> Result<u64, MpcError> {
        let start = self.net.supersteps();
        self.charge_tree(phase);
        if self.config.enforce && !targets.is_empty() {
            let arity = self.tree_arity(words)?;
            if root != targets[0] {
                self.net.send(root, targets[0], words as u64);
                self.net.barrier()?;
            }
            let t = RangeTree::new(targets.len(), arity);
            sweep_down(&mut self.net, &[(targets, &t)], |_, _, _| words as u64)?;
        }
        let used = self.net.supersteps() - start;
        self.steps_since(phase, start);
        Ok(used)
    }

    /// Folds `inputs` (machine, value) up a tree rooted at the first machine.
    /// `combine` must be associative and commutative; this is not checked.
    pub fn aggregate<T: Clone>(
        &mut self,
        phase: &str,
        inputs: &[(usize, T)],
        words: usize,
        combine: impl Fn(&T, &T) -> T,
    ) -> Result<Option<T>, MpcError> {
        let start = self.net.supersteps();
        self.charge_tree(phase);
        if inputs.is_empty() {
            return Ok(None);
        }
        let out = if self.config.enforce {
            let arity = self.tree_arity(words)?;
            let machines: Vec<usize> = inputs.iter().map(|(m, _)| *m).collect();
            let t = RangeTree::new(machines.len(), arity);
            let mut acc: Vec<T> = inputs.iter().map(|(_, v)| v.clone()).collect();
            for d in (1..=t.max_depth as usize).rev() {
                for &node in &t.levels[d] {
                    let p = t.parent[node];
                    acc[p] = combine(&acc[p], &acc[node]);
                }
            }
            sweep_up(&mut self.net, &[(&machines, &t)], |_, _| words as u64)?;
            acc.swap_remove(0)
        } else {
            let mut it = inputs.iter();
            let first = it.next().unwrap().1.clone();
            it.fold(first, |a, (_, v)| combine(&a, v))
        };
        self.steps_since(phase, start);
        Ok(Some(out))
    }

    /// Sorts `records` and tells every record the first record of its group.
    /// Groups must be contiguous in sort order. `head_words` is the size of
    /// the part of the head record that members need.
    pub fn group_heads<R: Record, K: Eq>(
        &mut self,
        phase: &str,
        records: Vec<R>,
        group: impl Fn(&R) -> K,
        head_words: usize,
    ) -> Result<Grouped<R>, MpcError> {
        let placement = self.distributed_sort(phase, records)?;
        let start = self.net.supersteps();
        self.charge_tree(phase);
        let sizes: Vec<usize> = placement.machines.iter().map(Vec::len).collect();
        let records = placement.into_flat();
        let mut head = Vec::with_capacity(records.len());
        for i in 0..records.len() {
            if i > 0 && group(&records[i]) == group(&records[i - 1]) {
                head.push(head[i - 1]);
            } else {
                head.push(i as u32);
            }
        }
        if self.config.enforce && !records.is_empty() {
            let mut machine_of = Vec::with_capacity(records.len());
            for (m, &s) in sizes.iter().enumerate() {
                machine_of.extend(std::iter::repeat(m).take(s));
            }
            // each machine learns the group of its predecessor's last record
            for m in 1..sizes.len() {
                if sizes[m] > 0 && sizes[m - 1] > 0 {
                    self.net.send(m - 1, m, 1);
                }
            }
            self.net.barrier()?;
            let mut spans: Vec<Vec<usize>> = Vec::new();
            let mut i = 0;
            while i < records.len() {
                let mut j = i;
                while j + 1 < records.len() && head[j + 1] as usize == i {
                    j += 1;
                }
                if machine_of[i] != machine_of[j] {
                    spans.push((machine_of[i]..=machine_of[j]).collect());
                }
                i = j + 1;
            }
            let arity = self.tree_arity(head_words)?;
            let trees: Vec<RangeTree> = spans.iter().map(|s| RangeTree::new(s.len(), arity)).collect();
            for class in 0..2 {
                let views: Vec<(&[usize], &RangeTree)> = spans
                    .iter()
                    .zip(&trees)
                    .skip(class)
                    .step_by(2)
                    .map(|(s, t)| (s.as_slice(), t))
                    .collect();
                sweep_down(&mut self.net, &views, |_, _, _| head_words as u64)?;
            }
        }
        self.steps_since(phase, start);
        Ok(Grouped { records, head })
    }

    /// One doubling step: the result holds `(u, v)`, `u < v`, exactly when the
    /// two vertices are within two hops in `adjacency`.
    pub fn doubling_round(&mut self, phase: &str, adjacency: &[(u32, u32)]) -> Result<Vec<(u32, u32)>, MpcError> {
        let directed: Vec<(u32, u32)> = adjacency.iter().flat_map(|&(u, v)| [(u, v), (v, u)]).filter(|(u, v)| u != v).collect();
        let grouped = self.group_heads(phase, directed, |r| r.0, 1)?;
        let mut lists: Vec<(u32, Vec<u32>)> = Vec::new();
        for (i, r) in grouped.records.iter().enumerate() {
            if grouped.is_head(i) {
                lists.push((r.0, Vec::new()));
            }
            lists.last_mut().unwrap().1.push(r.1);
        }
        // count the pairs each head will emit before densifying
        let counts: Vec<(usize, u64)> = lists.iter().enumerate().map(|(i, (_, l))| (i, (l.len() * l.len()) as u64)).collect();
        let total = self.aggregate(phase, &counts, 1, |a, b| a + b)?.unwrap_or(0);
        if 2 * total > self.config.total_space_cap {
            return Err(MpcError::CapacityExceeded { needed: 2 * total, available: self.config.total_space_cap });
        }
        let mut pairs: Vec<(u32, u32)> = Vec::new();
        for (x, nbrs) in &lists {
            for (i, &a) in nbrs.iter().enumerate() {
                pairs.push(((*x).min(a), (*x).max(a)));
                for &b in &nbrs[i + 1..] {
                    if a != b {
                        pairs.push((a.min(b), a.max(b)));
                    }
                }
            }
        }
        let sorted = self.distributed_sort(phase, pairs)?.into_flat();
        let mut out = sorted;
        out.dedup();
        Ok(out)
    }
}
