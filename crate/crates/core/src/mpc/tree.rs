//! Bounded-arity trees over contiguous machine ranges.

use super::{MpcError, Network};

/// Node `i`'s subtree covers the index range `i..end[i]`, so subtrees are
/// contiguous in machine order and prefix sums follow the tree.
#[derive(Debug, Clone)]
pub(crate) struct RangeTree {
    pub parent: Vec<usize>,
    pub children: Vec<Vec<usize>>,
    pub max_depth: u32,
    pub levels: Vec<Vec<usize>>,
}

pub(crate) const ROOT: usize = usize::MAX;

impl RangeTree {
    pub fn new(k: usize, arity: usize) -> Self {
        assert!(arity >= 1);
        let mut parent = vec![ROOT; k];
        let mut depth = vec![0u32; k];
        let mut children = vec![Vec::new(); k];
        let mut max_depth = 0;
        let mut stack = vec![(0usize, k)];
        while let Some((lo, hi)) = stack.pop() {
            if hi <= lo + 1 {
                continue;
            }
            let rest = hi - lo - 1;
            let chunks = arity.min(rest);
            let (base, extra) = (rest / chunks, rest % chunks);
            let mut start = lo + 1;
            for c in 0..chunks {
                let len = base + usize::from(c < extra);
                parent[start] = lo;
                depth[start] = depth[lo] + 1;
                max_depth = max_depth.max(depth[start]);
                children[lo].push(start);
                stack.push((start, start + len));
                start += len;
            }
        }
        let mut levels = vec![Vec::new(); max_depth as usize + 1];
        for (i, &d) in depth.iter().enumerate() {
            levels[d as usize].push(i);
        }
        RangeTree { parent, children, max_depth, levels }
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }
}

/// Largest arity such that a node exchanging `payload` words with its
/// parent and every child stays within `space`.
pub(crate) fn arity_for(space: u64, payload: u64) -> usize {
    if payload == 0 {
        return usize::MAX / 2;
    }
    ((space / payload).saturating_sub(1)) as usize
}

/// Leaves-to-root metering: at each depth, every node sends `words(t, node)`
/// to its parent, followed by a barrier.
pub(crate) fn sweep_up(
    net: &mut Network,
    trees: &[(&[usize], &RangeTree)],
    mut words: impl FnMut(usize, usize) -> u64,
) -> Result<(), MpcError> {
    let max = trees.iter().map(|(_, t)| t.max_depth).max().unwrap_or(0);
    for d in (1..=max).rev() {
        for (ti, (machines, t)) in trees.iter().enumerate() {
            if let Some(level) = t.levels.get(d as usize) {
                for &node in level {
                    net.send(machines[node], machines[t.parent[node]], words(ti, node));
                }
            }
        }
        net.barrier()?;
    }
    Ok(())
}

/// Root-to-leaves metering: at each depth, every node sends
/// `words(t, parent, child)` to each child, followed by a barrier.
pub(crate) fn sweep_down(
    net: &mut Network,
    trees: &[(&[usize], &RangeTree)],
    mut words: impl FnMut(usize, usize, usize) -> u64,
) -> Result<(), MpcError> {
    let max = trees.iter().map(|(_, t)| t.max_depth).max().unwrap_or(0);
    for d in 0..max {
        for (ti, (machines, t)) in trees.iter().enumerate() {
            if let Some(level) = t.levels.get(d as usize) {
                for &node in level {
                    for &c in &t.children[node] {
                        net.send(machines[node], machines[c], words(ti, node, c));
                    }
                }
            }
        }
        net.barrier()?;
    }
    Ok(())
}
