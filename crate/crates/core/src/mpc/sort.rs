//! Recursive sample sort over virtual machines.
//!
//! Records sit `b = S / (2w)` per machine in global position order. Every
//! group of positions that still spans several machines picks splitters from
//! a regular sample gathered up a tree, counts bucket sizes with a tree
//! prefix sum, and routes each record to its final bucket range in one
//! superstep. Buckets become the next groups; once every group fits on a
//! single machine a local sort finishes the job.

use super::tree::{arity_for, sweep_down, sweep_up, RangeTree};
use super::{Cluster, MpcError, Placement, Record};

/// `q` evenly spaced elements of a sorted slice.
fn regular_sample<T: Clone>(sorted: &[T], q: usize) -> Vec<T> {
    if sorted.len() <= q {
        return sorted.to_vec();
    }
    (0..q).map(|i| sorted[(2 * i + 1) * sorted.len() / (2 * q)].clone()).collect()
}

fn merge_sorted<T: Ord + Clone>(a: &[T], b: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i].clone());
            i += 1;
        } else {
            out.push(b[j].clone());
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Rule {
    /// bucket = number of splitters `<= key`
    Lower,
    /// bucket = number of splitters `< key`
    Upper,
}

fn bucket_of<T: Ord>(splitters: &[T], key: &T, rule: Rule) -> usize {
    match rule {
        Rule::Lower => splitters.partition_point(|s| s <= key),
        Rule::Upper => splitters.partition_point(|s| s < key),
    }
}

impl Cluster {
    /// Sorts `records` across the cluster. The concatenation of the returned
    /// machine slices is the sequentially sorted input.
    pub fn distributed_sort<R: Record>(&mut self, phase: &str, records: Vec<R>) -> Result<Placement<R>, MpcError> {
        let start = self.net.supersteps();
        self.charge_sort(phase);
        let needed = (records.len() * R::WORDS) as u64;
        if needed > self.config.total_space_cap {
            return Err(MpcError::CapacityExceeded { needed, available: self.config.total_space_cap });
        }
        let out = if self.config.enforce {
            self.sample_sort(records)
        } else {
            let mut records = records;
            records.sort();
            Ok(Placement { machines: vec![records] })
        };
        self.steps_since(phase, start);
        out
    }

    /// Records per machine for a given record width.
    pub(crate) fn per_machine(&self, words: usize) -> usize {
        (self.config.space as usize / (2 * words)).max(1)
    }

    fn sample_sort<R: Record>(&mut self, records: Vec<R>) -> Result<Placement<R>, MpcError> {
        let space = self.config.space;
        let mut w = R::WORDS;
        let mut probe = records.clone();
        probe.sort();
        let mut multiplicity = usize::from(!probe.is_empty());
        let mut run = 1;
        for pair in probe.windows(2) {
            run = if pair[0] == pair[1] { run + 1 } else { 1 };
            multiplicity = multiplicity.max(run);
        }
        drop(probe);
        if multiplicity > 1 {
            if !self.config.salting && (multiplicity * w) as u64 > space {
                return Err(MpcError::SkewOverflow { multiplicity, space });
            }
            w += 1;
        }
        let wu = w as u64;
        let payload = |q: usize| ((q * w) as u64).max(2 * (q as u64 + 1));
        let mut q = ((space as usize / 4) / w).max(1);
        while q > 1 && arity_for(space, payload(q)) < 2 {
            q -= 1;
        }
        let arity = arity_for(space, payload(q));
        if arity < 2 {
            return Err(MpcError::RecordTooWide { words: w, space });
        }
        let b = self.per_machine(w);
        let n = records.len();
        let machines_needed = n.div_ceil(b) as u64;
        if machines_needed > self.config.machines {
            return Err(MpcError::CapacityExceeded {
                needed: machines_needed * space,
                available: self.config.machines * space,
            });
        }
        let mut flat: Vec<(R, u32)> = records.into_iter().enumerate().map(|(i, r)| (r, i as u32)).collect();
        for m in 0..machines_needed as usize {
            let len = (n - m * b).min(b);
            self.net.store(m, (len * w) as u64)?;
        }

        let spans = |s: usize, e: usize| s / b != (e - 1) / b;
        let mut groups: Vec<(usize, usize)> = if n > 0 { vec![(0, n)] } else { Vec::new() };
        loop {
            let (active, mut next): (Vec<_>, Vec<_>) = groups.iter().partition(|&&(s, e)| spans(s, e));
            if active.is_empty() {
                break;
            }
            let mut new_pos: Vec<(usize, usize)> = Vec::new();
            for class in 0..2 {
                let mine: Vec<(usize, usize)> = active.iter().copied().skip(class).step_by(2).collect();
                if mine.is_empty() {
                    continue;
                }
                let (moves, buckets) = self.split_groups(&mut flat, &mine, b, q, arity, wu)?;
                new_pos.extend(moves);
                next.extend(buckets);
            }
            let mut staged: Vec<Option<(R, u32)>> = flat.into_iter().map(Some).collect();
            let mut out: Vec<Option<(R, u32)>> = vec![None; n];
            for &(from, to) in &new_pos {
                self.net.send(from / b, to / b, wu);
                out[to] = staged[from].take();
            }
            for (i, slot) in staged.into_iter().enumerate() {
                if let Some(r) = slot {
                    out[i] = Some(r);
                }
            }
            self.net.barrier()?;
            flat = out.into_iter().map(|r| r.expect("routing is a permutation")).collect();
            next.sort_unstable();
            groups = next;
        }
        let machines = flat
            .chunks_mut(b)
            .map(|chunk| {
                chunk.sort();
                chunk.iter().map(|(r, _)| r.clone()).collect()
            })
            .collect();
        Ok(Placement { machines })
    }

    /// One splitting round for a set of groups that share no machine.
    /// Returns `(old position, new position)` moves and the new bucket ranges.
    #[allow(clippy::type_complexity)]
    fn split_groups<R: Record>(
        &mut self,
        flat: &mut [(R, u32)],
        groups: &[(usize, usize)],
        b: usize,
        q: usize,
        arity: usize,
        w: u64,
    ) -> Result<(Vec<(usize, usize)>, Vec<(usize, usize)>), MpcError> {
        let machine_lists: Vec<Vec<usize>> = groups.iter().map(|&(s, e)| (s / b..=(e - 1) / b).collect()).collect();
        let trees: Vec<RangeTree> = machine_lists.iter().map(|m| RangeTree::new(m.len(), arity)).collect();
        let slice_of = |g: usize, node: usize| -> (usize, usize) {
            let (s, e) = groups[g];
            let m = machine_lists[g][node];
            (s.max(m * b), e.min((m + 1) * b))
        };
        // local sort of every machine's share of its group
        for g in 0..groups.len() {
            for node in 0..trees[g].len() {
                let (lo, hi) = slice_of(g, node);
                flat[lo..hi].sort();
            }
        }
        // gather a regular sample at each root
        let mut samples: Vec<Vec<Vec<(R, u32)>>> = (0..groups.len())
            .map(|g| (0..trees[g].len()).map(|node| {
                let (lo, hi) = slice_of(g, node);
                regular_sample(&flat[lo..hi], q)
            }).collect())
            .collect();
        for g in 0..groups.len() {
            let t = &trees[g];
            for d in (1..=t.max_depth as usize).rev() {
                for &node in &t.levels[d] {
                    let p = t.parent[node];
                    let merged = merge_sorted(&samples[g][p], &samples[g][node]);
                    samples[g][p] = merged;
                }
                // a parent resamples only after hearing from all of its children
                for &node in t.levels[d - 1].iter() {
                    let s = std::mem::take(&mut samples[g][node]);
                    samples[g][node] = regular_sample(&s, q);
                }
            }
        }
        let views: Vec<(&[usize], &RangeTree)> = machine_lists.iter().map(|m| m.as_slice()).zip(trees.iter()).collect();
        sweep_up(&mut self.net, &views, |_, _| q as u64 * w)?;
        let splitters: Vec<Vec<(R, u32)>> = samples.iter().map(|s| s[0].clone()).collect();
        sweep_down(&mut self.net, &views, |g, _, _| splitters[g].len() as u64 * w)?;

        let count = |flat: &[(R, u32)], g: usize, rules: &[Rule]| -> Vec<Vec<u64>> {
            (0..trees[g].len())
                .map(|node| {
                    let (lo, hi) = slice_of(g, node);
                    let mut c = vec![0u64; splitters[g].len() + 1];
                    for r in &flat[lo..hi] {
                        c[bucket_of(&splitters[g], r, rules[g])] += 1;
                    }
                    c
                })
                .collect()
        };
        let subtree = |counts: &[Vec<u64>], t: &RangeTree| -> Vec<Vec<u64>> {
            let mut sub = counts.to_vec();
            for d in (1..=t.max_depth as usize).rev() {
                for &node in &t.levels[d] {
                    let p = t.parent[node];
                    let child = sub[node].clone();
                    for (x, y) in sub[p].iter_mut().zip(child) {
                        *x += y;
                    }
                }
            }
            sub
        };
        let mut rules = vec![Rule::Lower; groups.len()];
        let mut counts: Vec<Vec<Vec<u64>>> = (0..groups.len()).map(|g| count(flat, g, &rules)).collect();
        let mut subs: Vec<Vec<Vec<u64>>> = (0..groups.len()).map(|g| subtree(&counts[g], &trees[g])).collect();
        sweep_up(&mut self.net, &views, |g, _| splitters[g].len() as u64 + 1)?;
        let stuck: Vec<bool> = (0..groups.len())
            .map(|g| {
                let total = (groups[g].1 - groups[g].0) as u64;
                subs[g][0].contains(&total)
            })
            .collect();
        if stuck.iter().any(|&s| s) {
            // the single splitter was the group minimum; flip the tie rule and recount
            let stuck_views: Vec<(&[usize], &RangeTree)> =
                views.iter().zip(&stuck).filter(|(_, &s)| s).map(|(v, _)| *v).collect();
            sweep_down(&mut self.net, &stuck_views, |_, _, _| 1)?;
            for g in 0..groups.len() {
                if stuck[g] {
                    rules[g] = Rule::Upper;
                    counts[g] = count(flat, g, &rules);
                    subs[g] = subtree(&counts[g], &trees[g]);
                }
            }
            sweep_up(&mut self.net, &stuck_views, |_, _| 2)?;
        }
        sweep_down(&mut self.net, &views, |g, _, _| 2 * (splitters[g].len() as u64 + 1))?;

        let mut moves = Vec::new();
        let mut buckets = Vec::new();
        for g in 0..groups.len() {
            let t = &trees[g];
            let nb = splitters[g].len() + 1;
            let totals = &subs[g][0];
            let mut base = vec![0usize; nb];
            let mut acc = groups[g].0;
            for j in 0..nb {
                base[j] = acc;
                if totals[j] > 0 {
                    buckets.push((acc, acc + totals[j] as usize));
                }
                acc += totals[j] as usize;
            }
            debug_assert_eq!(acc, groups[g].1);
            let mut prefix = vec![vec![0u64; nb]; t.len()];
            for d in 0..t.max_depth as usize {
                for &node in &t.levels[d] {
                    let mut run: Vec<u64> = prefix[node].iter().zip(&counts[g][node]).map(|(a, b)| a + b).collect();
                    for &c in &t.children[node] {
                        prefix[c] = run.clone();
                        for (x, y) in run.iter_mut().zip(&subs[g][c]) {
                            *x += y;
                        }
                    }
                }
            }
            for node in 0..t.len() {
                let (lo, hi) = slice_of(g, node);
                let mut next = prefix[node].clone();
                for pos in lo..hi {
                    let j = bucket_of(&splitters[g], &flat[pos], rules[g]);
                    moves.push((pos, base[j] + next[j] as usize));
                    next[j] += 1;
                }
            }
        }
        Ok((moves, buckets))
    }
}
