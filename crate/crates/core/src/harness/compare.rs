use std::fmt;

use crate::builder::{
    agent, exit_symbol, parse_rule_id, stage_boundaries, strategy_label, GameSpec, StageReport,
};
use crate::engine::Trace;
use crate::oracle::{LoopRecord, StateZ, Trajectory};
use crate::symbol::Label;

/// Reads the per-loop quantities of a GNE run back out of its step records
/// and its final skin contents.
pub fn psystem_trajectory(spec: &GameSpec, trace: &Trace) -> (Trajectory, StageReport) {
    let index = spec.index();
    let n = index.len();
    let players = spec.players;
    let timing = stage_boundaries(trace, spec);
    let tags: Vec<_> = trace.rule_ids().iter().map(|id| parse_rule_id(id)).collect();
    let pos = |k: usize, i: usize| index.lookup(k, i).map(|e| e.l - 1);

    let initial = trace.initial();
    let counts0 = index
        .entries
        .iter()
        .map(|e| {
            initial
                .contents(Label::new(&strategy_label(e.slot, e.k)))
                .map_or(0, |ms| ms.count(agent(e)))
        })
        .collect();
    let mut states = vec![StateZ {
        counts: counts0,
        err: vec![0; players],
    }];

    let blank = || LoopRecord {
        payoff: vec![0; n],
        sums: vec![0; players],
        q: vec![0; n],
        zdot: vec![0; n],
        delta: vec![0; n],
        state: StateZ {
            counts: vec![0; n],
            err: vec![0; players],
        },
    };
    let mut loops: Vec<LoopRecord> = timing.loops.iter().map(|_| blank()).collect();
    for (lp, window) in timing.loops.iter().enumerate() {
        let rec = &mut loops[lp];
        let first = window.first_step - 1;
        for step in &trace.steps[first..first + window.total_steps] {
            for app in &step.applications {
                let Some(tag) = &tags[app.rule] else { continue };
                if tag.stage == 0 {
                    continue;
                }
                let c = app.count as i64;
                let l = match (tag.k, tag.i) {
                    (Some(k), Some(i)) => pos(k, i),
                    _ => None,
                };
                match (tag.stage, tag.number, l, tag.k) {
                    (1, 10, Some(l), _) => rec.payoff[l] += c as u64,
                    (2, 10 | 11, _, Some(k)) => rec.sums[k - 1] += c as u64,
                    (3, 9, Some(l), _) => rec.q[l] += c as u64,
                    (4, 19, Some(l), _) => rec.zdot[l] += c,
                    (4, 20, Some(l), _) => rec.zdot[l] -= c,
                    (5, 4 | 9, Some(l), _) => rec.delta[l] += c,
                    (5, 2 | 3 | 6 | 7, Some(l), _) => rec.delta[l] -= c,
                    (5, 23 | 24, _, Some(k)) => rec.state.err[k - 1] += c as u64,
                    _ => {}
                }
            }
        }
    }

    let skin = trace.final_config().skin();
    for (lp, rec) in loops.iter_mut().enumerate() {
        for (l, e) in index.entries.iter().enumerate() {
            rec.state.counts[l] = skin.count(exit_symbol(e, lp + 1));
        }
        states.push(rec.state.clone());
    }
    (
        Trajectory {
            index,
            states,
            loops,
        },
        timing,
    )
}

/// Where two trajectories first disagree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Divergence {
    pub loop_index: usize,
    pub stage: u8,
    pub quantity: &'static str,
    /// Player, and strategy slot / global index where the quantity is per
    /// strategy.
    pub k: usize,
    pub slot: Option<usize>,
    pub l: Option<usize>,
    pub psystem: i64,
    pub oracle: i64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiffReport {
    pub loops_compared: usize,
    pub first: Option<Divergence>,
}

impl DiffReport {
    pub fn agrees(&self) -> bool {
        self.first.is_none()
    }
}

impl fmt::Display for DiffReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.first {
            None => writeln!(f, "exact agreement over {} loops", self.loops_compared),
            Some(d) => {
                write!(
                    f,
                    "first divergence: loop {} stage {} {} k={}",
                    d.loop_index, d.stage, d.quantity, d.k
                )?;
                if let (Some(i), Some(l)) = (d.slot, d.l) {
                    write!(f, " i={i} l={l}")?;
                }
                writeln!(f, " psystem={} oracle={}", d.psystem, d.oracle)
            }
        }
    }
}

/// Walks both trajectories loop by loop, and within a loop stage by stage,
/// reporting the first quantity that differs.
pub fn compare_trajectories(ps: &Trajectory, oracle: &Trajectory) -> DiffReport {
    let index = &oracle.index;
    let per_l = |l: usize| {
        let e = &index.entries[l];
        (e.k, Some(e.slot), Some(e.l))
    };
    let mut report = DiffReport {
        loops_compared: 0,
        first: None,
    };
    if let Some(d) = first_state_diff(0, &ps.states[0], &oracle.states[0], &per_l) {
        report.first = Some(d);
        return report;
    }
    for (t, (a, b)) in ps.loops.iter().zip(&oracle.loops).enumerate() {
        let loop_index = t + 1;
        let mut found = None;
        let mut check = |stage: u8, quantity: &'static str, x: &[i64], y: &[i64], per_player: bool| {
            if found.is_some() {
                return;
            }
            if let Some(pos) = (0..x.len()).find(|&p| x[p] != y[p]) {
                let (k, slot, l) = if per_player { (pos + 1, None, None) } else { per_l(pos) };
                found = Some(Divergence {
                    loop_index,
                    stage,
                    quantity,
                    k,
                    slot,
                    l,
                    psystem: x[pos],
                    oracle: y[pos],
                });
            }
        };
        let wide = |v: &[u64]| v.iter().map(|&x| x as i64).collect::<Vec<_>>();
        check(1, "payoff", &wide(&a.payoff), &wide(&b.payoff), false);
        check(2, "sum", &wide(&a.sums), &wide(&b.sums), true);
        check(3, "positive part", &wide(&a.q), &wide(&b.q), false);
        check(4, "rate", &a.zdot, &b.zdot, false);
        check(5, "increment", &a.delta, &b.delta, false);
        check(5, "count", &wide(&a.state.counts), &wide(&b.state.counts), false);
        check(5, "err", &wide(&a.state.err), &wide(&b.state.err), true);
        if found.is_some() {
            report.first = found;
            return report;
        }
        report.loops_compared = loop_index;
    }
    if ps.loops.len() != oracle.loops.len() {
        report.first = Some(Divergence {
            loop_index: ps.loops.len().min(oracle.loops.len()) + 1,
            stage: 5,
            quantity: "loop count",
            k: 0,
            slot: None,
            l: None,
            psystem: ps.loops.len() as i64,
            oracle: oracle.loops.len() as i64,
        });
    }
    report
}

fn first_state_diff(
    loop_index: usize,
    a: &StateZ,
    b: &StateZ,
    per_l: &dyn Fn(usize) -> (usize, Option<usize>, Option<usize>),
) -> Option<Divergence> {
    let pos = (0..a.counts.len()).find(|&p| a.counts[p] != b.counts[p])?;
    let (k, slot, l) = per_l(pos);
    Some(Divergence {
        loop_index,
        stage: 5,
        quantity: "count",
        k,
        slot,
        l,
        psystem: a.counts[pos] as i64,
        oracle: b.counts[pos] as i64,
    })
}
