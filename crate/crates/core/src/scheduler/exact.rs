//! Depth-first branch and bound over active schedules.
//!
//! Some optimal schedule starts every transaction at time zero or at the
//! completion of another one (shift any other start left until it hits a
//! conflict or a full thread pool). The search therefore only branches at
//! completion events: at the current instant it either starts one more
//! eligible transaction (indices increasing within an instant, so each set
//! of simultaneous starts is visited once) or advances the clock to the
//! next completion.

use std::collections::HashMap;

use super::problem::Problem;

pub(crate) struct Solution {
    pub makespan: u64,
    pub starts: Vec<u64>,
}

/// Longest-first list scheduling in ticks.
pub(crate) fn greedy(p: &Problem) -> Vec<u64> {
    let n = p.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| p.dur[b].cmp(&p.dur[a]).then(a.cmp(&b)));
    let limit = p.threads.unwrap_or(usize::MAX);
    let mut starts = vec![0u64; n];
    let mut started = 0u32;
    let mut running: Vec<(usize, u64)> = Vec::new();
    let mut clock = 0u64;
    let all = full(n);
    while started != all {
        running.retain(|&(_, end)| end > clock);
        for &i in &order {
            if started >> i & 1 == 1 || running.len() >= limit {
                continue;
            }
            let busy = running.iter().fold(0u32, |m, &(r, _)| m | 1 << r);
            if p.conflicts[i] & busy != 0 {
                continue;
            }
            starts[i] = clock;
            started |= 1 << i;
            running.push((i, clock + p.dur[i]));
        }
        if let Some(next) = running.iter().map(|&(_, e)| e).min() {
            clock = next;
        }
    }
    starts
}

fn full(n: usize) -> u32 {
    if n == 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

fn span(p: &Problem, starts: &[u64]) -> u64 {
    starts
        .iter()
        .zip(&p.dur)
        .map(|(s, d)| s + d)
        .max()
        .unwrap_or(0)
}

pub(crate) fn solve(p: &Problem) -> Solution {
    let n = p.len();
    match n {
        0 => {
            return Solution {
                makespan: 0,
                starts: Vec::new(),
            }
        }
        1 => {
            return Solution {
                makespan: p.dur[0],
                starts: vec![0],
            }
        }
        _ => {}
    }
    let starts = greedy(p);
    let mut search = Search {
        p,
        best: span(p, &starts),
        best_starts: starts,
        starts: vec![0; n],
        seen: HashMap::new(),
        all: full(n),
    };
    if search.best > search.root_bound() {
        let mut running = Vec::with_capacity(n);
        search.dfs(0, 0, &mut running, 0);
    }
    Solution {
        makespan: search.best,
        starts: search.best_starts,
    }
}

struct Search<'a> {
    p: &'a Problem,
    best: u64,
    best_starts: Vec<u64>,
    starts: Vec<u64>,
    /// Earliest clock at which each (started set, running remainder) state was entered.
    seen: HashMap<(u32, Vec<(usize, u64)>), u64>,
    all: u32,
}

impl Search<'_> {
    fn root_bound(&self) -> u64 {
        let group = self
            .p
            .key_groups
            .iter()
            .map(|&g| self.group_load(g, 0))
            .max()
            .unwrap_or(0);
        let work: u64 = self.p.dur.iter().sum();
        let work_bound = match self.p.threads {
            Some(t) => work.div_ceil(t as u64),
            None => 0,
        };
        group.max(work_bound)
    }

    fn group_load(&self, group: u32, started: u32) -> u64 {
        (0..self.p.len())
            .filter(|&i| group >> i & 1 == 1 && started >> i & 1 == 0)
            .map(|i| self.p.dur[i])
            .sum()
    }

    /// No completion of this partial schedule can finish before the returned instant.
    fn lower_bound(&self, clock: u64, started: u32, running: &[(usize, u64)]) -> u64 {
        let mut lb = running.iter().map(|&(_, e)| e).max().unwrap_or(clock);
        let mut running_rest = 0u64;
        let mut busy = 0u32;
        for &(i, e) in running {
            running_rest += e - clock;
            busy |= 1 << i;
        }
        let mut unstarted = 0u64;
        for i in 0..self.p.len() {
            if started >> i & 1 == 0 {
                unstarted += self.p.dur[i];
            }
        }
        if let Some(t) = self.p.threads {
            lb = lb.max(clock + (running_rest + unstarted).div_ceil(t as u64));
        }
        for &g in &self.p.key_groups {
            let pending = self.group_load(g, started);
            if pending == 0 {
                continue;
            }
            let holder = running
                .iter()
                .filter(|&&(i, _)| g >> i & 1 == 1 && busy >> i & 1 == 1)
                .map(|&(_, e)| e)
                .max()
                .unwrap_or(clock);
            lb = lb.max(holder + pending);
        }
        lb
    }

    fn dfs(&mut self, clock: u64, started: u32, running: &mut Vec<(usize, u64)>, min_idx: usize) {
        if started == self.all {
            let ms = running.iter().map(|&(_, e)| e).max().unwrap_or(clock);
            let ms = ms.max(span(self.p, &self.starts));
            if ms < self.best {
                self.best = ms;
                self.best_starts = self.starts.clone();
            }
            return;
        }
        if self.lower_bound(clock, started, running) >= self.best {
            return;
        }
        if min_idx == 0 {
            let mut key: Vec<(usize, u64)> = running.iter().map(|&(i, e)| (i, e - clock)).collect();
            key.sort_unstable();
            match self.seen.get(&(started, key.clone())) {
                Some(&c) if c <= clock => return,
                _ => {
                    self.seen.insert((started, key), clock);
                }
            }
        }

        let limit = self.p.threads.unwrap_or(usize::MAX);
        if running.len() < limit {
            let busy = running.iter().fold(0u32, |m, &(r, _)| m | 1 << r);
            for i in min_idx..self.p.len() {
                if started >> i & 1 == 1 || self.p.conflicts[i] & busy != 0 {
                    continue;
                }
                self.starts[i] = clock;
                running.push((i, clock + self.p.dur[i]));
                self.dfs(clock, started | 1 << i, running, i + 1);
                running.pop();
            }
        }

        if let Some(next) = running.iter().map(|&(_, e)| e).min() {
            let mut rest: Vec<(usize, u64)> =
                running.iter().copied().filter(|&(_, e)| e > next).collect();
            self.dfs(next, started, &mut rest, 0);
        }
    }
}
