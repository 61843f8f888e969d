use std::collections::{BTreeSet, BinaryHeap, HashMap};
use std::cmp::Reverse;
use std::fmt::Write as _;
use std::sync::Arc;

use super::config::{Configuration, Structure};
use super::types::{Charge, PSystem, Rule};
use crate::error::EngineError;
use crate::multiset::Multiset;
use crate::symbol::{Label, Symbol};

/// One entry of a step record: `rule` fired `count` times at `membrane`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Application {
    pub rule: usize,
    pub membrane: usize,
    pub count: u64,
}

/// Everything that happened in one transition step, in selection order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StepRecord {
    pub applications: Vec<Application>,
}

impl StepRecord {
    pub fn is_empty(&self) -> bool {
        self.applications.is_empty()
    }

    pub fn count_of(&self, rule: usize) -> u64 {
        self.applications
            .iter()
            .filter(|a| a.rule == rule)
            .map(|a| a.count)
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Halting {
    /// No rule was applicable anywhere.
    Quiescent,
    /// The step budget ran out with rules still applicable.
    BudgetExhausted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TraceMode {
    /// Keep every configuration.
    Full,
    /// Keep only the initial and final configurations plus all step records.
    #[default]
    Light,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    pub max_steps: usize,
    pub trace: TraceMode,
    /// Fail on competition between priority-incomparable rules.
    pub strict: bool,
}

impl RunOptions {
    pub fn new(max_steps: usize) -> Self {
        RunOptions {
            max_steps,
            ..Default::default()
        }
    }

    pub fn full(mut self) -> Self {
        self.trace = TraceMode::Full;
        self
    }

    pub fn strict(mut self, strict: bool) -> Self {
        self.strict = strict;
        self
    }
}

/// The record of a run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    /// All configurations in `Full` mode (`steps.len() + 1` of them);
    /// just the first and last in `Light` mode.
    pub snapshots: Vec<Configuration>,
    pub steps: Vec<StepRecord>,
    pub halting: Halting,
    pub mode: TraceMode,
    rule_ids: Arc<[String]>,
}

impl Trace {
    pub fn steps_executed(&self) -> usize {
        self.steps.len()
    }

    pub fn initial(&self) -> &Configuration {
        &self.snapshots[0]
    }

    pub fn final_config(&self) -> &Configuration {
        self.snapshots.last().expect("trace has an initial snapshot")
    }

    pub fn rule_id(&self, rule: usize) -> &str {
        &self.rule_ids[rule]
    }

    pub fn rule_ids(&self) -> &[String] {
        &self.rule_ids
    }

    /// One line per step: index then `rule_id@label×count` entries sorted
    /// lexicographically.
    pub fn export_steps(&self) -> String {
        let structure = self.initial().structure().clone();
        let mut out = String::new();
        for (idx, rec) in self.steps.iter().enumerate() {
            let mut entries: Vec<String> = rec
                .applications
                .iter()
                .map(|a| {
                    format!(
                        "{}@{}×{}",
                        self.rule_ids[a.rule],
                        structure.label(a.membrane),
                        a.count
                    )
                })
                .collect();
            entries.sort();
            let _ = write!(out, "{}", idx + 1);
            for e in entries {
                out.push(' ');
                out.push_str(&e);
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug)]
struct CompiledRule {
    target: usize,
    outside: usize,
    child: Option<usize>,
    changes_target: bool,
    changes_child: bool,
}

/// A P system prepared for execution: labels resolved, priority relation
/// closed and linearized.
#[derive(Debug)]
pub struct Engine {
    system: PSystem,
    compiled: Vec<CompiledRule>,
    /// Total order extending the priority relation, ties by declaration.
    order: Vec<usize>,
    /// Transitive closure: rules with strictly higher priority.
    higher: Vec<Vec<usize>>,
    higher_sets: Vec<BTreeSet<usize>>,
    initial: Configuration,
    rule_ids: Arc<[String]>,
}

impl Engine {
    pub fn new(system: PSystem) -> Result<Engine, EngineError> {
        let initial = Configuration::from_tree(&system.tree)?;
        let structure = initial.structure().clone();
        let compiled = system
            .rules
            .iter()
            .map(|r| compile_rule(r, &structure))
            .collect::<Result<Vec<_>, _>>()?;

        let mut by_id = HashMap::new();
        for (idx, r) in system.rules.iter().enumerate() {
            if by_id.insert(r.id.as_str(), idx).is_some() {
                return Err(EngineError::Invalid(format!("duplicate rule id {}", r.id)));
            }
        }
        let n = system.rules.len();
        let mut lower_of = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for (hi, lo) in &system.priorities {
            let h = *by_id
                .get(hi.as_str())
                .ok_or_else(|| EngineError::Invalid(format!("priority names unknown rule {hi}")))?;
            let l = *by_id
                .get(lo.as_str())
                .ok_or_else(|| EngineError::Invalid(format!("priority names unknown rule {lo}")))?;
            lower_of[h].push(l);
            indegree[l] += 1;
        }

        let mut heap: BinaryHeap<Reverse<usize>> = (0..n)
            .filter(|&r| indegree[r] == 0)
            .map(Reverse)
            .collect();
        let mut order = Vec::with_capacity(n);
        while let Some(Reverse(r)) = heap.pop() {
            order.push(r);
            for &l in &lower_of[r] {
                indegree[l] -= 1;
                if indegree[l] == 0 {
                    heap.push(Reverse(l));
                }
            }
        }
        if order.len() != n {
            return Err(EngineError::Invalid("priority relation is cyclic".into()));
        }

        // Closure in topological order: higher(l) = ∪ {h} ∪ higher(h).
        let mut higher_sets: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &r in &order {
            let above = higher_sets[r].clone();
            for &l in &lower_of[r] {
                higher_sets[l].insert(r);
                higher_sets[l].extend(above.iter().copied());
            }
        }
        let higher = higher_sets.iter().map(|s| s.iter().copied().collect()).collect();
        let rule_ids: Arc<[String]> = system.rules.iter().map(|r| r.id.clone()).collect();

        Ok(Engine {
            system,
            compiled,
            order,
            higher,
            higher_sets,
            initial,
            rule_ids,
        })
    }

    pub fn system(&self) -> &PSystem {
        &self.system
    }

    pub fn initial(&self) -> &Configuration {
        &self.initial
    }

    pub fn rule_index(&self, id: &str) -> Option<usize> {
        self.rule_ids.iter().position(|r| r == id)
    }

    pub fn rule_ids(&self) -> &[String] {
        &self.rule_ids
    }

    /// Selection order used by [`Engine::step`].
    pub fn selection_order(&self) -> &[usize] {
        &self.order
    }

    fn comparable(&self, a: usize, b: usize) -> bool {
        self.higher_sets[a].contains(&b) || self.higher_sets[b].contains(&a)
    }

    /// How many times rule `r` could fire against `regions`, ignoring
    /// priorities but honoring the one-charge-change-per-membrane cap.
    fn capacity(
        &self,
        r: usize,
        charges: &[Charge],
        regions: &[Multiset],
        locked: &[bool],
    ) -> u64 {
        let rule = &self.system.rules[r];
        let c = &self.compiled[r];
        if charges[c.target] != rule.pre_charge {
            return 0;
        }
        let mut k = u64::MAX;
        if let Some(cidx) = c.child {
            let child = rule.child.as_ref().expect("compiled child");
            if charges[cidx] != child.pre_charge {
                return 0;
            }
            if let Some(m) = child.consume.multiplicity_in(&regions[cidx]) {
                k = k.min(m);
            }
        }
        if let Some(m) = rule.consume_inside.multiplicity_in(&regions[c.target]) {
            k = k.min(m);
        }
        if let Some(m) = rule.consume_outside.multiplicity_in(&regions[c.outside]) {
            k = k.min(m);
        }
        if c.changes_target || c.changes_child {
            if (c.changes_target && locked[c.target])
                || (c.changes_child && locked[c.child.expect("child")])
            {
                return 0;
            }
            k = k.min(1);
        }
        k
    }

    /// Computes the successor of `cfg` under maximal parallelism with strong
    /// priorities. Charge changes are staged and committed after all object
    /// rewriting; objects produced in this step are not visible until the next.
    pub fn step(
        &self,
        cfg: &Configuration,
        strict: bool,
        step_index: usize,
    ) -> Result<(Configuration, StepRecord), EngineError> {
        let mut avail = cfg.regions.clone();
        let mut produced = vec![Multiset::new(); avail.len()];
        let mut locked = vec![false; cfg.charges.len()];
        let mut new_charges = cfg.charges.clone();
        let mut record = StepRecord::default();
        // (region, symbol) -> rules that already consumed it this step.
        let mut consumers: HashMap<(usize, Symbol), Vec<usize>> = HashMap::new();

        for &r in &self.order {
            let k = self.capacity(r, &cfg.charges, &avail, &locked);
            if strict {
                let k_pre = self.capacity(r, &cfg.charges, &cfg.regions, &locked);
                if k < k_pre {
                    self.check_ambiguity(r, &consumers, &cfg.regions, &avail, step_index)?;
                }
            }
            if k == 0 {
                continue;
            }
            if self.higher[r]
                .iter()
                .any(|&h| self.capacity(h, &cfg.charges, &avail, &locked) > 0)
            {
                continue;
            }
            let rule = &self.system.rules[r];
            let c = &self.compiled[r];

            avail[c.target].remove_scaled(&rule.consume_inside, k);
            avail[c.outside].remove_scaled(&rule.consume_outside, k);
            produced[c.target].add_scaled(&rule.produce_inside, k);
            produced[c.outside].add_scaled(&rule.produce_outside, k);
            if let (Some(cidx), Some(child)) = (c.child, rule.child.as_ref()) {
                avail[cidx].remove_scaled(&child.consume, k);
                produced[cidx].add_scaled(&child.produce, k);
                if c.changes_child {
                    locked[cidx] = true;
                    new_charges[cidx] = child.post_charge;
                }
            }
            if c.changes_target {
                locked[c.target] = true;
                new_charges[c.target] = rule.post_charge;
            }
            if strict {
                let mut note = |region: usize, ms: &Multiset| {
                    for s in ms.symbols() {
                        consumers.entry((region, s)).or_default().push(r);
                    }
                };
                note(c.target, &rule.consume_inside);
                note(c.outside, &rule.consume_outside);
                if let (Some(cidx), Some(child)) = (c.child, rule.child.as_ref()) {
                    note(cidx, &child.consume);
                }
            }
            record.applications.push(Application {
                rule: r,
                membrane: c.target,
                count: k,
            });
        }

        for (region, extra) in avail.iter_mut().zip(&produced) {
            region.merge(extra);
        }
        let next = Configuration {
            regions: avail,
            charges: new_charges,
            ..cfg.clone()
        };
        Ok((next, record))
    }

    fn check_ambiguity(
        &self,
        r: usize,
        consumers: &HashMap<(usize, Symbol), Vec<usize>>,
        pre: &[Multiset],
        avail: &[Multiset],
        step_index: usize,
    ) -> Result<(), EngineError> {
        let rule = &self.system.rules[r];
        let c = &self.compiled[r];
        let mut needs: Vec<(usize, &Multiset)> =
            vec![(c.target, &rule.consume_inside), (c.outside, &rule.consume_outside)];
        if let (Some(cidx), Some(child)) = (c.child, rule.child.as_ref()) {
            needs.push((cidx, &child.consume));
        }
        for (region, ms) in needs {
            for (sym, _) in ms.iter() {
                if avail[region].count(sym) == pre[region].count(sym) {
                    continue;
                }
                if let Some(prev) = consumers.get(&(region, sym)) {
                    if let Some(&other) = prev.iter().find(|&&o| !self.comparable(o, r)) {
                        let structure = self.initial.structure();
                        let region_name = if region == structure.environment() {
                            "environment".to_string()
                        } else {
                            structure.label(region).to_string()
                        };
                        return Err(EngineError::Ambiguity {
                            step: step_index,
                            region: region_name,
                            symbol: sym.to_string(),
                            first: self.rule_ids[other].clone(),
                            second: rule.id.clone(),
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Re-applies a recorded step to its pre-configuration.
    pub fn replay(
        &self,
        cfg: &Configuration,
        record: &StepRecord,
    ) -> Result<Configuration, EngineError> {
        let mut regions = cfg.regions.clone();
        let mut produced = vec![Multiset::new(); regions.len()];
        let mut charges = cfg.charges.clone();
        for app in &record.applications {
            let rule = &self.system.rules[app.rule];
            let c = &self.compiled[app.rule];
            let k = app.count;
            let mut take = |region: usize, ms: &Multiset| -> Result<(), EngineError> {
                if ms.multiplicity_in(&regions[region]).is_some_and(|m| m < k) {
                    return Err(EngineError::Invalid(format!(
                        "replay of {} exceeds available objects",
                        rule.id
                    )));
                }
                regions[region].remove_scaled(ms, k);
                Ok(())
            };
            take(c.target, &rule.consume_inside)?;
            take(c.outside, &rule.consume_outside)?;
            if let (Some(cidx), Some(child)) = (c.child, rule.child.as_ref()) {
                take(cidx, &child.consume)?;
                produced[cidx].add_scaled(&child.produce, k);
                if c.changes_child {
                    charges[cidx] = child.post_charge;
                }
            }
            produced[c.target].add_scaled(&rule.produce_inside, k);
            produced[c.outside].add_scaled(&rule.produce_outside, k);
            if c.changes_target {
                charges[c.target] = rule.post_charge;
            }
        }
        for (region, extra) in regions.iter_mut().zip(&produced) {
            region.merge(extra);
        }
        Ok(Configuration {
            regions,
            charges,
            ..cfg.clone()
        })
    }

    /// Iterates [`Engine::step`] from the initial configuration until no rule
    /// applies or the budget runs out.
    pub fn run(&self, opts: RunOptions) -> Result<Trace, EngineError> {
        self.run_from(self.initial.clone(), opts)
    }

    pub fn run_from(&self, start: Configuration, opts: RunOptions) -> Result<Trace, EngineError> {
        let mut snapshots = vec![start.clone()];
        let mut steps = Vec::new();
        let mut current = start;
        let mut halting = Halting::BudgetExhausted;
        loop {
            let (next, rec) = self.step(&current, opts.strict, steps.len() + 1)?;
            if rec.is_empty() {
                halting = Halting::Quiescent;
                break;
            }
            if steps.len() == opts.max_steps {
                break;
            }
            steps.push(rec);
            current = next;
            if opts.trace == TraceMode::Full {
                snapshots.push(current.clone());
            }
        }
        if opts.trace == TraceMode::Light {
            snapshots.push(current);
        }
        Ok(Trace {
            snapshots,
            steps,
            halting,
            mode: opts.trace,
            rule_ids: self.rule_ids.clone(),
        })
    }
}

fn compile_rule(rule: &Rule, s: &Structure) -> Result<CompiledRule, EngineError> {
    let target = s.require(rule.target)?;
    let child = match &rule.child {
        Some(cp) => {
            let cidx = s.require(cp.label)?;
            if s.parent(cidx) != Some(target) {
                return Err(EngineError::Invalid(format!(
                    "rule {}: '{}' is not a child of '{}'",
                    rule.id, cp.label, rule.target
                )));
            }
            Some(cidx)
        }
        None => None,
    };
    if rule.consumes_nothing() {
        return Err(EngineError::Invalid(format!("rule {} consumes nothing", rule.id)));
    }
    Ok(CompiledRule {
        target,
        outside: s.outside(target),
        child,
        changes_target: rule.pre_charge != rule.post_charge,
        changes_child: rule
            .child
            .as_ref()
            .is_some_and(|c| c.pre_charge != c.post_charge),
    })
}

/// Whether `rule` is applicable at membrane `label` of `cfg`, judged against
/// pre-step charges and contents.
pub fn rule_applicable(rule: &Rule, cfg: &Configuration, label: Label) -> Result<bool, EngineError> {
    let s = cfg.structure();
    let m = s.require(label)?;
    if rule.target != label {
        return Ok(false);
    }
    if cfg.charges[m] != rule.pre_charge {
        return Ok(false);
    }
    if !cfg.regions[m].contains(&rule.consume_inside)
        || !cfg.regions[s.outside(m)].contains(&rule.consume_outside)
    {
        return Ok(false);
    }
    if let Some(child) = &rule.child {
        let c = s.require(child.label)?;
        if s.parent(c) != Some(m)
            || cfg.charges[c] != child.pre_charge
            || !cfg.regions[c].contains(&child.consume)
        {
            return Ok(false);
        }
    }
    Ok(!rule.consumes_nothing())
}

/// One maximal-parallel step of `sys` from `cfg`.
pub fn maximal_step(
    cfg: &Configuration,
    sys: &PSystem,
) -> Result<(Configuration, StepRecord), EngineError> {
    Engine::new(sys.clone())?.step(cfg, false, 1)
}

/// Runs `sys` from its initial configuration.
pub fn run(sys: &PSystem, max_steps: usize, mode: TraceMode) -> Result<Trace, EngineError> {
    let opts = RunOptions {
        max_steps,
        trace: mode,
        strict: false,
    };
    Engine::new(sys.clone())?.run(opts)
}
