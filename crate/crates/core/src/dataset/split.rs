//! Stratified splitting and real/synthetic mixing.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng, stream_id};
use crate::tree::Intent;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub dev: f64,
    pub test: f64,
}

impl Default for SplitRatios {
    fn default() -> Self {
        SplitRatios { train: 0.8, dev: 0.1, test: 0.1 }
    }
}

impl SplitRatios {
    pub fn as_array(&self) -> [f64; 3] {
        [self.train, self.dev, self.test]
    }

    pub fn validate(&self) -> Result<()> {
        let r = self.as_array();
        if r.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Config(format!("split ratios must be non-negative: {r:?}")));
        }
        if (r.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("split ratios must sum to 1: {r:?}")));
        }
        Ok(())
    }
}

pub const SPLIT_NAMES: [&str; 3] = ["train", "dev", "test"];

#[derive(Debug, Clone, PartialEq)]
pub struct Split<T> {
    pub parts: [Vec<T>; 3],
    pub notes: Vec<String>,
}

/// Largest-remainder apportionment of `n` by `ratios`; ties go to the earlier
/// entry.
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|x| x.floor() as usize).collect();
    let mut left = n - out.iter().sum::<usize>().min(n);
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())).then(a.cmp(&b)));
    for &i in order.iter().cycle() {
        if left == 0 {
            break;
        }
        if ratios[i] > 0.0 {
            out[i] += 1;
            left -= 1;
        }
    }
    out
}

/// Class-by-split allocation whose columns hit `totals` and whose cells are
/// within one of the exact proportional share. Rows are class sizes.
fn allocate(rows: &[usize], ratios: &[f64; 3], totals: &[usize]) -> Vec<[usize; 3]> {
    let exact: Vec<[f64; 3]> = rows.iter().map(|&n| ratios.map(|r| r * n as f64)).collect();
    let mut cells: Vec<[usize; 3]> = exact.iter().map(|e| e.map(|x| x.floor() as usize)).collect();
    let mut row_left: Vec<usize> = rows.iter().zip(&cells).map(|(n, c)| n - c.iter().sum::<usize>()).collect();
    let mut col_left: Vec<usize> =
        (0..3).map(|s| totals[s].saturating_sub(cells.iter().map(|c| c[s]).sum::<usize>())).collect();
    // Each cell may take one extra unit. Route units from classes to splits
    // along augmenting paths, trying cells with larger remainders first.
    let mut extra = vec![[false; 3]; rows.len()];
    let frac = |c: usize, s: usize| exact[c][s] - exact[c][s].floor();
    while let Some(start) = (0..rows.len()).find(|&c| row_left[c] > 0) {
        // BFS over classes; an edge class->split is an unused cell, a split
        // leads back to any class holding an extra unit there.
        let mut prev_class: Vec<Option<(usize, usize)>> = vec![None; rows.len()];
        let mut seen_class = vec![false; rows.len()];
        seen_class[start] = true;
        let mut queue = std::collections::VecDeque::from([start]);
        let mut found: Option<(usize, usize)> = None;
        'bfs: while let Some(c) = queue.pop_front() {
            let mut splits: Vec<usize> = (0..3).filter(|&s| ratios[s] > 0.0 && !extra[c][s]).collect();
            splits.sort_by(|&a, &b| frac(c, b).total_cmp(&frac(c, a)).then(a.cmp(&b)));
            for s in splits {
                if col_left[s] > 0 {
                    found = Some((c, s));
                    break 'bfs;
                }
                for c2 in 0..rows.len() {
                    if !seen_class[c2] && extra[c2][s] {
                        seen_class[c2] = true;
                        prev_class[c2] = Some((c, s));
                        queue.push_back(c2);
                    }
                }
            }
        }
        let Some((mut c, mut s)) = found else { break };
        col_left[s] -= 1;
        row_left[start] -= 1;
        loop {
            extra[c][s] = true;
            match prev_class[c] {
                Some((pc, ps)) => {
                    extra[c][ps] = false;
                    c = pc;
                    s = ps;
                }
                None => break,
            }
        }
    }
    for (c, row) in cells.iter_mut().enumerate() {
        for s in 0..3 {
            row[s] += usize::from(extra[c][s]);
        }
        // Anything left unplaced goes to the split with the largest ratio.
        let best = (0..3).max_by(|&a, &b| ratios[a].total_cmp(&ratios[b]).then(b.cmp(&a))).unwrap_or(0);
        row[best] += row_left[c];
    }
    cells
}

/// Split stratified by `class`, deterministic under `seed`. Overall split
/// sizes follow largest-remainder rounding of the ratios; each class gets
/// within one instance of its proportional share.
pub fn split<T>(items: Vec<T>, class: impl Fn(&T) -> Intent, ratios: SplitRatios, seed: u64) -> Result<Split<T>> {
    ratios.validate()?;
    let r = ratios.as_array();
    let mut by_class: BTreeMap<Intent, Vec<usize>> = BTreeMap::new();
    for (i, item) in items.iter().enumerate() {
        by_class.entry(class(item)).or_default().push(i);
    }
    let totals = apportion(items.len(), &r);
    let classes: Vec<Intent> = by_class.keys().copied().collect();
    let sizes: Vec<usize> = classes.iter().map(|c| by_class[c].len()).collect();
    let cells = allocate(&sizes, &r, &totals);
    let active = r.iter().filter(|x| **x > 0.0).count();
    let mut notes = Vec::new();
    let mut dest = vec![0usize; items.len()];
    for (ci, c) in classes.iter().enumerate() {
        let mut idx = by_class[c].clone();
        if idx.len() < active {
            notes.push(format!("class {c} has {} instances for {active} splits; rounded proportionally", idx.len()));
        }
        idx.shuffle(&mut rng(derive_seed(seed, &[stream_id("split"), stream_id(c.name())])));
        let mut pos = 0;
        for (s, &k) in cells[ci].iter().enumerate() {
            for &i in &idx[pos..pos + k] {
                dest[i] = s;
            }
            pos += k;
        }
    }
    let mut parts: [Vec<T>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    for (i, item) in items.into_iter().enumerate() {
        parts[dest[i]].push(item);
    }
    Ok(Split { parts, notes })
}

/// Training set of `total` items, `round(fraction * total)` of them synthetic,
/// drawn without replacement and shuffled together.
pub fn mix<T: Clone>(real: &[T], synthetic: &[T], fraction: f64, total: usize, seed: u64) -> Result<Vec<T>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!("synthetic fraction {fraction} outside [0, 1]")));
    }
    let n_syn = (fraction * total as f64).round() as usize;
    let n_real = total - n_syn;
    if n_syn > synthetic.len() {
        return Err(Error::Insufficient(format!("{n_syn} synthetic instances needed, {} available", synthetic.len())));
    }
    if n_real > real.len() {
        return Err(Error::Insufficient(format!("{n_real} real instances needed, {} available", real.len())));
    }
    let pick = |pool: &[T], n: usize, stream: &str| -> Vec<T> {
        let mut idx: Vec<usize> = (0..pool.len()).collect();
        idx.shuffle(&mut rng(derive_seed(seed, &[stream_id(stream)])));
        idx.truncate(n);
        idx.sort_unstable();
        idx.into_iter().map(|i| pool[i].clone()).collect()
    };
    let mut out = pick(synthetic, n_syn, "mix-synthetic");
    out.extend(pick(real, n_real, "mix-real"));
    out.shuffle(&mut rng(derive_seed(seed, &[stream_id("mix-order")])));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn apportion_cases() {
        assert_eq!(apportion(100, &[0.8, 0.1, 0.1]), vec![80, 10, 10]);
        assert_eq!(apportion(7, &[1.0, 0.0, 0.0]), vec![7, 0, 0]);
        assert_eq!(apportion(5, &[0.8, 0.1, 0.1]), vec![4, 1, 0]);
        assert_eq!(apportion(0, &[0.8, 0.1, 0.1]), vec![0, 0, 0]);
    }

    #[test]
    fn mix_counts() {
        let real: Vec<u32> = (0..2000).collect();
        let syn: Vec<u32> = (10_000..12_000).collect();
        let m = mix(&real, &syn, 0.75, 1000, 3).unwrap();
        assert_eq!(m.iter().filter(|x| **x >= 10_000).count(), 750);
        assert_eq!(m.len(), 1000);
        assert!(mix(&real, &syn, 0.0, 1000, 3).unwrap().iter().all(|x| *x < 10_000));
        assert!(mix(&real, &syn, 1.0, 1000, 3).unwrap().iter().all(|x| *x >= 10_000));
        assert!(mix(&real[..10], &syn, 0.5, 1000, 3).is_err());
    }
}
