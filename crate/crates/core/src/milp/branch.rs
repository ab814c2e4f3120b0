//! Best-bound branch-and-bound with depth-first plunging.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::model::Milp;
use super::simplex::{solve_cold, LpSolution, LpStatus, Pricing, WarmStart};
use crate::problem::Sense;

pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_GAP_TOLERANCE: f64 = 1e-6;
pub const DEFAULT_TIME_LIMIT: Duration = Duration::from_secs(30);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MilpOptions {
    pub time_limit: Duration,
    /// Absolute gap between incumbent and best bound at which the search
    /// stops with `Optimal`.
    pub gap_tolerance: f64,
    pub node_limit: Option<usize>,
}

impl Default for MilpOptions {
    fn default() -> Self {
        Self { time_limit: DEFAULT_TIME_LIMIT, gap_tolerance: DEFAULT_GAP_TOLERANCE, node_limit: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    /// Stopped on a limit with an incumbent.
    Feasible,
    Infeasible,
    /// Stopped on a limit without an incumbent.
    Timeout,
    Unbounded,
}

impl MilpStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, MilpStatus::Optimal | MilpStatus::Feasible)
    }
}

/// Search progress sampled at node counts 1, 2, 4, 8, … and at the end.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub nodes: usize,
    pub incumbent: Option<f64>,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub nodes_explored: usize,
    pub checkpoints: Vec<Checkpoint>,
    pub numerically_unstable: bool,
}

pub fn solve_milp(milp: &Milp, time_limit: Duration, gap_tolerance: f64) -> MilpSolution {
    solve_milp_with(milp, &MilpOptions { time_limit, gap_tolerance, node_limit: None })
}

/// Bytes of warm-start tableaux the open-node heap may hold.
const WARM_START_BUDGET: usize = 256 << 20;

struct Node<'a> {
    lower: Vec<f64>,
    upper: Vec<f64>,
    /// Parent relaxation value in maximization orientation.
    bound: f64,
    id: usize,
    /// Parent's optimal simplex state and the variable branched on.
    warm: Option<(Box<WarmStart<'a>>, usize)>,
}

impl PartialEq for Node<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node<'_> {}
impl PartialOrd for Node<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.bound.total_cmp(&other.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Search<'a> {
    milp: &'a Milp,
    sign: f64,
    integers: Vec<usize>,
    incumbent: Option<(f64, Vec<f64>)>,
    unstable: bool,
}

impl<'a> Search<'a> {
    fn relax(
        &mut self,
        lower: &[f64],
        upper: &[f64],
        warm: Option<(Box<WarmStart<'a>>, Vec<(usize, f64, f64)>)>,
    ) -> (LpSolution, Option<WarmStart<'a>>) {
        let (sol, state) = match warm {
            Some((start, changes)) => start.resolve(&changes),
            None => solve_cold(self.milp, lower, upper, Pricing::default()),
        };
        self.unstable |= sol.numerically_unstable;
        (sol, state)
    }

    fn most_fractional(&self, values: &[f64]) -> Option<usize> {
        let mut best = None;
        let mut best_dist = f64::INFINITY;
        for &j in &self.integers {
            let f = values[j] - values[j].floor();
            if f.min(1.0 - f) <= INTEGRALITY_TOLERANCE {
                continue;
            }
            let dist = (f - 0.5).abs();
            if dist < best_dist {
                best_dist = dist;
                best = Some(j);
            }
        }
        best
    }

    /// Fixes the integer variables at their rounded values and re-solves, so
    /// the stored incumbent is exactly integral.
    fn try_incumbent(&mut self, lower: &[f64], upper: &[f64], values: &[f64], warm: Option<WarmStart<'a>>) {
        let mut lo = lower.to_vec();
        let mut hi = upper.to_vec();
        let mut changes = Vec::with_capacity(self.integers.len());
        for &j in &self.integers {
            let r = values[j].round().clamp(lower[j], upper[j]);
            lo[j] = r;
            hi[j] = r;
            changes.push((j, r, r));
        }
        let (polished, _) = self.relax(&lo, &hi, warm.map(|w| (Box::new(w), changes)));
        let candidate = if polished.status == LpStatus::Optimal {
            polished.values
        } else if self.milp.max_violation(values) <= 1e-6 {
            values.to_vec()
        } else {
            return;
        };
        let score = self.sign * self.milp.objective_value(&candidate);
        if self.incumbent.as_ref().is_none_or(|(best, _)| score > *best) {
            log::trace!("new incumbent {}", self.sign * score);
            self.incumbent = Some((score, candidate));
        }
    }
}

pub fn solve_milp_with(milp: &Milp, options: &MilpOptions) -> MilpSolution {
    let start = Instant::now();
    let sign = match milp.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut search = Search { milp, sign, integers: milp.integer_indices(), incumbent: None, unstable: false };

    let mut root_lower: Vec<f64> = milp.vars.iter().map(|v| v.lower).collect();
    let mut root_upper: Vec<f64> = milp.vars.iter().map(|v| v.upper).collect();
    for &j in &search.integers {
        root_lower[j] = (root_lower[j] - INTEGRALITY_TOLERANCE).ceil();
        root_upper[j] = (root_upper[j] + INTEGRALITY_TOLERANCE).floor();
    }

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut dive: Option<Node> =
        Some(Node { lower: root_lower, upper: root_upper, bound: f64::INFINITY, id: next_id, warm: None });
    let mut stored_bytes = 0usize;
    next_id += 1;

    let mut nodes = 0usize;
    let mut checkpoints = Vec::new();
    let mut next_checkpoint = 1usize;
    let mut limit_hit = false;
    let mut root_unbounded = false;

    let global_bound = |heap: &BinaryHeap<Node>, dive: &Option<Node>, incumbent: &Option<(f64, Vec<f64>)>| {
        let open = heap.peek().map(|n| n.bound).into_iter().chain(dive.as_ref().map(|n| n.bound));
        let inc = incumbent.as_ref().map(|(s, _)| *s);
        open.chain(inc).fold(f64::NEG_INFINITY, f64::max)
    };

    loop {
        let mut node = match dive.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(n) => {
                    if let Some((w, _)) = &n.warm {
                        stored_bytes -= w.footprint();
                    }
                    n
                }
                None => break,
            },
        };
        if let Some((best, _)) = &search.incumbent {
            if node.bound <= best + options.gap_tolerance {
                continue;
            }
        }
        if start.elapsed() >= options.time_limit || options.node_limit.is_some_and(|l| nodes >= l) {
            node.warm = None;
            heap.push(node);
            limit_hit = true;
            break;
        }

        nodes += 1;
        let warm = node.warm.take().map(|(w, j)| (w, vec![(j, node.lower[j], node.upper[j])]));
        let (lp, state) = search.relax(&node.lower, &node.upper, warm);
        match lp.status {
            LpStatus::Infeasible => {}
            LpStatus::Unbounded => {
                if nodes == 1 {
                    root_unbounded = true;
                    break;
                }
            }
            LpStatus::Optimal => {
                let value = (sign * lp.objective).min(node.bound);
                let prune = search.incumbent.as_ref().is_some_and(|(best, _)| value <= best + options.gap_tolerance);
                if !prune {
                    match search.most_fractional(&lp.values) {
                        None => search.try_incumbent(&node.lower, &node.upper, &lp.values, state),
                        Some(j) => {
                            let v = lp.values[j];
                            let mut down = Node {
                                lower: node.lower.clone(),
                                upper: node.upper.clone(),
                                bound: value,
                                id: next_id,
                                warm: None,
                            };
                            down.upper[j] = v.floor();
                            let mut up =
                                Node { lower: node.lower, upper: node.upper, bound: value, id: next_id + 1, warm: None };
                            up.lower[j] = v.ceil();
                            next_id += 2;
                            let go_up = match &search.incumbent {
                                Some((_, inc)) => inc[j] >= v.ceil() - INTEGRALITY_TOLERANCE,
                                None => v - v.floor() >= 0.5,
                            };
                            let (mut first, mut second) = if go_up { (up, down) } else { (down, up) };
                            if let Some(state) = state {
                                if stored_bytes + state.footprint() <= WARM_START_BUDGET {
                                    stored_bytes += state.footprint();
                                    second.warm = Some((Box::new(state.clone()), j));
                                }
                                first.warm = Some((Box::new(state), j));
                            }
                            heap.push(second);
                            dive = Some(first);
                        }
                    }
                }
            }
        }

        if nodes == next_checkpoint {
            checkpoints.push(Checkpoint {
                nodes,
                incumbent: search.incumbent.as_ref().map(|(s, _)| sign * s),
                bound: sign * global_bound(&heap, &dive, &search.incumbent),
            });
            next_checkpoint *= 2;
        }
    }

    let bound_score = if limit_hit {
        global_bound(&heap, &dive, &search.incumbent)
    } else {
        search.incumbent.as_ref().map_or(f64::NEG_INFINITY, |(s, _)| *s)
    };
    let gap_closed = search
        .incumbent
        .as_ref()
        .is_some_and(|(s, _)| bound_score <= s + options.gap_tolerance);

    let (status, values, objective) = if root_unbounded {
        (MilpStatus::Unbounded, Vec::new(), sign * f64::INFINITY)
    } else {
        match search.incumbent.take() {
            Some((score, values)) => {
                let status = if !limit_hit || gap_closed { MilpStatus::Optimal } else { MilpStatus::Feasible };
                (status, values, sign * score)
            }
            None if limit_hit => (MilpStatus::Timeout, Vec::new(), f64::NAN),
            None => (MilpStatus::Infeasible, Vec::new(), f64::NAN),
        }
    };
    let bound = if root_unbounded { sign * f64::INFINITY } else { sign * bound_score };
    checkpoints.push(Checkpoint {
        nodes,
        incumbent: status.has_solution().then_some(objective),
        bound,
    });
    log::debug!(
        "branch-and-bound: {status:?} objective {objective} bound {bound} after {nodes} nodes in {:.3}s",
        start.elapsed().as_secs_f64()
    );
    MilpSolution {
        status,
        values,
        objective,
        bound,
        nodes_explored: nodes,
        checkpoints,
        numerically_unstable: search.unstable,
    }
}
