use std::collections::HashMap;
use std::fmt;

use super::game::GameSpec;
use super::gne::{parse_rule_id, RuleTag};
use crate::engine::Trace;

/// Step numbers are relative to the loop: the first step of a loop is 1.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoopTiming {
    pub loop_index: usize,
    /// Absolute index of the loop's first step.
    pub first_step: usize,
    /// Payoff objects reach the player membranes.
    pub payoff_ready: Option<usize>,
    /// `y6` appears in `P`.
    pub y6: Option<usize>,
    /// Last `y_{2,2}` leaves an accumulator.
    pub sums_done: Option<usize>,
    /// Last `y_{3,7,i}` reaches a player.
    pub positive_parts_done: Option<usize>,
    /// Last `y_{5,0}` appears in a strategy membrane.
    pub rates_done: Option<usize>,
    /// Last `EXIT` object reaches the skin.
    pub exit_done: Option<usize>,
    /// `y0` is back in `P`; `None` for the final loop.
    pub restart: Option<usize>,
    pub total_steps: usize,
    /// Longest stage-2 multiplication, in steps after its start.
    pub max_mult: Option<usize>,
    /// Longest stage-4 multiplication.
    pub max_mult2: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StageReport {
    pub loops: Vec<LoopTiming>,
    pub failures: Vec<String>,
}

impl StageReport {
    pub fn max_loop_steps(&self) -> usize {
        self.loops.iter().map(|l| l.total_steps).max().unwrap_or(0)
    }
}

fn show(x: Option<usize>) -> String {
    x.map_or_else(|| "-".to_string(), |v| v.to_string())
}

impl fmt::Display for StageReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "loop payoff y6 sums pos rates exit restart total mult mult2")?;
        for l in &self.loops {
            writeln!(
                f,
                "{} {} {} {} {} {} {} {} {} {} {}",
                l.loop_index,
                show(l.payoff_ready),
                show(l.y6),
                show(l.sums_done),
                show(l.positive_parts_done),
                show(l.rates_done),
                show(l.exit_done),
                show(l.restart),
                l.total_steps,
                show(l.max_mult),
                show(l.max_mult2)
            )?;
        }
        for msg in &self.failures {
            writeln!(f, "FAIL {msg}")?;
        }
        Ok(())
    }
}

/// Splits a run of the GNE system into loops and locates each stage's
/// marker objects from the step records.
pub fn stage_boundaries(trace: &Trace, spec: &GameSpec) -> StageReport {
    let tags: Vec<Option<RuleTag>> = trace.rule_ids().iter().map(|id| parse_rule_id(id)).collect();

    let mut report = StageReport::default();
    let mut current = LoopTiming {
        loop_index: 1,
        first_step: 1,
        ..Default::default()
    };
    let mut mult_start: HashMap<(bool, usize, usize), usize> = HashMap::new();
    let last_step = trace.steps.len();

    for (t0, rec) in trace.steps.iter().enumerate() {
        let t = t0 + 1;
        let rel = t + 1 - current.first_step;
        let mut restart = false;
        for app in &rec.applications {
            let Some(tag) = &tags[app.rule] else { continue };
            let key = |second: bool| (second, tag.k.unwrap_or(0), tag.i.unwrap_or(0));
            match (tag.family.as_str(), tag.stage) {
                ("RS1_12", _) => current.payoff_ready = Some(rel),
                ("RS1_13", _) => current.y6 = Some(rel),
                ("RS2_14", _) => current.sums_done = Some(rel),
                ("RS3_13", _) => current.positive_parts_done = Some(rel),
                ("RS4_23", _) => current.rates_done = Some(rel),
                ("RS5_47", _) => current.exit_done = Some(rel),
                ("RS5_58", _) => restart = true,
                ("RS2_6", _) => {
                    mult_start.insert(key(false), rel);
                }
                ("RS4_9", _) => {
                    mult_start.insert(key(true), rel);
                }
                (_, 0) if tag.number == 39 => {
                    let second = tag.family.starts_with("MULB");
                    if let Some(start) = mult_start.get(&key(second)) {
                        let slot = if second {
                            &mut current.max_mult2
                        } else {
                            &mut current.max_mult
                        };
                        *slot = Some(slot.unwrap_or(0).max(rel - start));
                    }
                }
                _ => {}
            }
        }
        if restart || t == last_step {
            current.total_steps = rel;
            if restart {
                current.restart = Some(rel);
            }
            let next_index = current.loop_index + 1;
            report.loops.push(std::mem::take(&mut current));
            current.loop_index = next_index;
            current.first_step = t + 1;
            mult_start.clear();
        }
    }

    for l in &report.loops {
        let checks = [
            ("stage 1 (payoff objects)", l.payoff_ready),
            ("stage 1 (y6)", l.y6),
            ("stage 2 (sums)", l.sums_done),
            ("stage 3 (positive parts)", l.positive_parts_done),
            ("stage 4 (rates)", l.rates_done),
            ("stage 5 (exit)", l.exit_done),
        ];
        for (name, v) in checks {
            if v.is_none() {
                report
                    .failures
                    .push(format!("loop {}: {name} marker never appeared", l.loop_index));
            }
        }
        if l.loop_index < spec.loops && l.restart.is_none() {
            report
                .failures
                .push(format!("loop {}: stage 5 (restart) marker never appeared", l.loop_index));
        }
    }
    if report.loops.len() < spec.loops {
        report.failures.push(format!(
            "only {} of {} loops ran",
            report.loops.len(),
            spec.loops
        ));
    }
    report
}
