//! Jump unraveling with reverse jumps for channels whose rate turns negative.
//!
//! The ensemble is stored as distinct pure states with integer occupation
//! numbers. Per step and per occupied entry, members are split between the
//! branches (positive-channel jumps, reverse jumps, deterministic evolution)
//! by an exact multinomial draw against counts frozen at the start of the
//! step. Transfers are then applied together, every state is propagated with
//! the non-Hermitian step, coinciding states are merged and the reverse-jump
//! connectivity is rebuilt.
//!
//! Branch ordering within a draw: positive channels by label, then reverse
//! jumps by (channel, target), then the no-jump remainder. Entry `k` (in
//! insertion order) owns the ChaCha8 stream `k` under the master seed, so a
//! run is reproducible regardless of how entries are visited.

use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{DensityMatrix, StateVector, NORM_FLOOR, PHASE_TOL};
use crate::master;
use crate::models::ModelSpec;
use crate::reservoir::RateTable;

/// Expectations `⟨C†C⟩` below this are treated as exact zeros (dark states).
const DARK_FLOOR: f64 = NORM_FLOOR * NORM_FLOOR;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EngineConfig {
    pub dt: f64,
    pub t_max: f64,
    pub ensemble_size: u64,
    pub rng_seed: u64,
    pub record_stride: usize,
    pub max_jump_prob: f64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self { dt: 0.01, t_max: 6.0, ensemble_size: 100_000, rng_seed: 0, record_stride: 10, max_jump_prob: 0.1 }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Validation(msg.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("engine.dt must be positive");
        }
        if !(self.t_max >= 0.0 && self.t_max.is_finite()) {
            return bad("engine.t_max must be non-negative");
        }
        if self.ensemble_size < 1 {
            return bad("engine.ensemble_size must be at least 1");
        }
        if self.record_stride < 1 {
            return bad("engine.record_stride must be at least 1");
        }
        if !(self.max_jump_prob > 0.0 && self.max_jump_prob <= 1.0) {
            return bad("engine.max_jump_prob must lie in (0, 1]");
        }
        Ok(())
    }

    /// Number of steps needed to reach `t_max`.
    pub fn steps(&self) -> usize {
        (self.t_max / self.dt - 1e-9).ceil().max(0.0) as usize
    }
}

/// Decay and Lamb-shift rates of every channel at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct InstantRates {
    pub decay: Vec<f64>,
    pub lamb_shift: Vec<f64>,
}

impl InstantRates {
    pub fn at(model: &ModelSpec, t: f64) -> Result<Self> {
        Ok(Self { decay: model.decay_rates(t)?, lamb_shift: model.lamb_shift_rates(t)? })
    }

    pub fn zero(model: &ModelSpec) -> Self {
        let n = model.num_channels();
        Self { decay: vec![0.0; n], lamb_shift: vec![0.0; n] }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Reverse,
}

/// Members moved along one branch during one step. Entries are identified by
/// insertion order, which is stable across merges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpEvent {
    pub step: usize,
    pub time: f64,
    pub channel: usize,
    pub direction: Direction,
    pub source: usize,
    pub target: usize,
    pub members: u64,
}

/// A negative channel wants to move weight out of `target` (occupied, not
/// dark for the channel) but the state it would come from is unoccupied.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemoryLoss {
    pub channel: usize,
    pub target: usize,
    pub source: Option<usize>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct StepOutcome {
    pub events: Vec<JumpEvent>,
    pub counts_after: Vec<u64>,
    /// Entries whose reverse-jump probabilities summed past one and were rescaled.
    pub saturated: Vec<usize>,
    pub memory_loss: Vec<MemoryLoss>,
    pub created: usize,
}

#[derive(Clone, Debug)]
pub struct Entry {
    pub id: usize,
    pub state: StateVector,
    pub count: u64,
    rng: ChaCha8Rng,
}

impl Entry {
    pub fn active(&self) -> bool {
        self.count > 0
    }
}

/// `source` holds `normalize(C_channel ψ_target)`: members of `source` may
/// reverse-jump to `target` while the channel is negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Link {
    pub channel: usize,
    pub source: usize,
    pub target: usize,
}

#[derive(Clone, Debug)]
pub struct EnsembleRegistry {
    entries: Vec<Entry>,
    total: u64,
    seed: u64,
    next_id: usize,
    links: Vec<Link>,
}

impl EnsembleRegistry {
    pub fn new(model: &ModelSpec, initial: StateVector, total: u64, seed: u64) -> Result<Self> {
        Self::from_entries(model, vec![(initial, total)], seed)
    }

    /// Registry with prescribed states and counts; the states are normalised.
    pub fn from_entries(model: &ModelSpec, entries: Vec<(StateVector, u64)>, seed: u64) -> Result<Self> {
        let mut reg = Self { entries: Vec::new(), total: 0, seed, next_id: 0, links: Vec::new() };
        for (state, count) in entries {
            if state.dim() != model.dim() {
                return Err(Error::DimensionMismatch { expected: model.dim(), found: state.dim() });
            }
            let pos = reg.push(state.normalize()?);
            reg.entries[pos].count = count;
            reg.total += count;
        }
        if reg.total == 0 {
            return Err(Error::Validation("ensemble must have at least one member".into()));
        }
        reg.merge_duplicates();
        reg.rebuild_links(model);
        Ok(reg)
    }

    fn push(&mut self, state: StateVector) -> usize {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.next_id as u64);
        self.entries.push(Entry { id: self.next_id, state, count: 0, rng });
        self.next_id += 1;
        self.entries.len() - 1
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn counts(&self) -> Vec<u64> {
        self.entries.iter().map(|e| e.count).collect()
    }

    /// Number of occupied, physically distinct states.
    pub fn n_eff(&self) -> usize {
        self.entries.iter().filter(|e| e.active()).count()
    }

    /// Entries ever created, including merged ones.
    pub fn created(&self) -> usize {
        self.next_id
    }

    pub fn position(&self, state: &StateVector) -> Option<usize> {
        self.entries.iter().position(|e| e.state.phase_equal(state, PHASE_TOL))
    }

    pub fn position_of_id(&self, id: usize) -> Option<usize> {
        self.entries.iter().position(|e| e.id == id)
    }

    fn find_or_create(&mut self, state: StateVector) -> usize {
        match self.position(&state) {
            Some(pos) => pos,
            None => self.push(state),
        }
    }

    pub fn density_matrix(&self) -> DensityMatrix {
        let d = self.entries[0].state.dim();
        let mut rho = DensityMatrix::zeros(d);
        let n = self.total as f64;
        for e in self.entries.iter().filter(|e| e.active()) {
            rho.add_scaled(e.count as f64 / n, &e.state.outer());
        }
        rho
    }

    pub fn rebuild_links(&mut self, model: &ModelSpec) {
        let mut links = Vec::new();
        for j in 0..model.num_channels() {
            for (target, e) in self.entries.iter().enumerate() {
                let Some(image) = jump_image(model, j, &e.state) else { continue };
                if let Some(source) = self.position(&image) {
                    links.push(Link { channel: j, source, target });
                }
            }
        }
        links.sort_by_key(|l| (l.source, l.channel, l.target));
        self.links = links;
    }

    fn merge_duplicates(&mut self) {
        let mut i = 0;
        while i < self.entries.len() {
            let mut k = i + 1;
            while k < self.entries.len() {
                if self.entries[i].state.phase_equal(&self.entries[k].state, PHASE_TOL) {
                    let gone = self.entries.remove(k);
                    self.entries[i].count += gone.count;
                } else {
                    k += 1;
                }
            }
            i += 1;
        }
    }

    /// Propagate every entry deterministically, merge coinciding states and
    /// rebuild the connectivity.
    pub fn propagate(&mut self, model: &ModelSpec, rates: &InstantRates, dt: f64) -> Result<()> {
        for e in &mut self.entries {
            e.state = deterministic_step(&e.state, model, rates, dt)?;
        }
        self.merge_duplicates();
        self.rebuild_links(model);
        Ok(())
    }

    /// Move `members` of entry `source` through a positive-channel jump,
    /// creating the target entry if needed. Returns the target position.
    pub fn force_jump(&mut self, model: &ModelSpec, source: usize, channel: usize, members: u64) -> Result<usize> {
        let image = jump_image(model, channel, &self.entries[source].state).ok_or(Error::ZeroNorm(0.0))?;
        let target = self.find_or_create(image);
        self.transfer(source, target, members)
    }

    /// Move `members` of `source` back to `target` along a reverse jump.
    pub fn force_reverse(&mut self, source: usize, target: usize, channel: usize, members: u64) -> Result<usize> {
        if !self.links.contains(&Link { channel, source, target }) {
            return Err(Error::Validation(format!(
                "entry {target} is not a reverse-jump target of {source} via channel {channel}"
            )));
        }
        self.transfer(source, target, members)
    }

    fn transfer(&mut self, source: usize, target: usize, members: u64) -> Result<usize> {
        if self.entries[source].count < members {
            return Err(Error::SourceEmpty(self.entries[source].id));
        }
        self.entries[source].count -= members;
        self.entries[target].count += members;
        Ok(target)
    }
}

/// `normalize(C_j ψ)`, or `None` when ψ is dark for channel `j`.
pub fn jump_image(model: &ModelSpec, j: usize, state: &StateVector) -> Option<StateVector> {
    let image = model.channels[j].jump_op.apply(state).ok()?;
    if image.norm_sqr() <= DARK_FLOOR {
        return None;
    }
    image.normalize().ok()
}

/// First-order non-Hermitian step `(1 − iH dt)ψ`, renormalised, with
/// `H = Σ_j λ_j C_j†C_j − (i/2) Σ_j Δ_j C_j†C_j` (signed rates).
pub fn deterministic_step(v: &StateVector, model: &ModelSpec, rates: &InstantRates, dt: f64) -> Result<StateVector> {
    let mut amps: Vec<C64> = v.amplitudes().to_vec();
    for j in 0..model.num_channels() {
        let coeff = C64::new(-0.5 * rates.decay[j] * dt, -rates.lamb_shift[j] * dt);
        if coeff == C64::new(0.0, 0.0) {
            continue;
        }
        let nv = model.number_op(j).apply(v)?;
        for (a, b) in amps.iter_mut().zip(nv.amplitudes()) {
            *a += coeff * b;
        }
    }
    StateVector::new(amps).normalize()
}

fn check_limit(probability: f64, limit: f64) -> Result<()> {
    if probability > limit {
        return Err(Error::StepTooLarge { probability, limit });
    }
    Ok(())
}

/// `Δ_j dt ⟨ψ|C_j†C_j|ψ⟩` for a channel with non-negative rate.
pub fn positive_jump_probability(
    v: &StateVector,
    model: &ModelSpec,
    j: usize,
    decay: f64,
    dt: f64,
    max_jump_prob: f64,
) -> Result<f64> {
    let p = decay.max(0.0) * dt * v.expectation(model.number_op(j))?.re;
    check_limit(p, max_jump_prob)?;
    Ok(p)
}

/// `(N_target / N_source) |Δ_j| dt ⟨ψ_target|C_j†C_j|ψ_target⟩`; zero for an
/// empty target. The limit applies to the rate factor without the count ratio.
pub fn reverse_jump_probability(
    reg: &EnsembleRegistry,
    source: usize,
    target: usize,
    model: &ModelSpec,
    j: usize,
    decay: f64,
    dt: f64,
    max_jump_prob: f64,
) -> Result<f64> {
    let src = &reg.entries[source];
    let tgt = &reg.entries[target];
    if src.count == 0 {
        return Err(Error::SourceEmpty(src.id));
    }
    let factor = decay.min(0.0).abs() * dt * tgt.state.expectation(model.number_op(j))?.re;
    check_limit(factor, max_jump_prob)?;
    if tgt.count == 0 {
        return Ok(0.0);
    }
    Ok(tgt.count as f64 / src.count as f64 * factor)
}

#[derive(Clone, Debug)]
enum BranchKind {
    Forward { channel: usize, image: StateVector },
    Reverse { channel: usize, target: usize },
}

#[derive(Clone, Debug)]
struct Branch {
    kind: BranchKind,
    prob: f64,
}

struct EntryBranches {
    source: usize,
    branches: Vec<Branch>,
    saturated: bool,
}

fn build_branches(
    reg: &EnsembleRegistry,
    model: &ModelSpec,
    rates: &InstantRates,
    dt: f64,
    max_jump_prob: f64,
) -> Result<Vec<EntryBranches>> {
    let mut out = Vec::new();
    for (source, e) in reg.entries.iter().enumerate() {
        if !e.active() {
            continue;
        }
        let mut branches = Vec::new();
        for j in 0..model.num_channels() {
            if rates.decay[j] <= 0.0 {
                continue;
            }
            let Some(image) = jump_image(model, j, &e.state) else { continue };
            let prob = positive_jump_probability(&e.state, model, j, rates.decay[j], dt, max_jump_prob)?;
            branches.push(Branch { kind: BranchKind::Forward { channel: j, image }, prob });
        }
        let forward_total: f64 = branches.iter().map(|b| b.prob).sum();
        let mut reverse = Vec::new();
        for link in reg.links.iter().filter(|l| l.source == source) {
            let decay = rates.decay[link.channel];
            if decay >= 0.0 {
                continue;
            }
            let prob =
                reverse_jump_probability(reg, source, link.target, model, link.channel, decay, dt, max_jump_prob)?;
            if prob > 0.0 {
                reverse.push(Branch { kind: BranchKind::Reverse { channel: link.channel, target: link.target }, prob });
            }
        }
        let reverse_total: f64 = reverse.iter().map(|b| b.prob).sum();
        let room = 1.0 - forward_total;
        let saturated = reverse_total > room;
        if saturated {
            for b in &mut reverse {
                b.prob *= room / reverse_total;
            }
        }
        branches.extend(reverse);
        out.push(EntryBranches { source, branches, saturated });
    }
    Ok(out)
}

/// Split `n` members over `probs` (the remainder stays put) by sequential
/// conditional binomials, which is an exact multinomial draw.
fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for &p in probs {
        if left == 0 || p <= 0.0 || mass <= 0.0 {
            out.push(0);
            continue;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(left, q).expect("probability clamped to [0, 1]").sample(rng);
        out.push(k);
        left -= k;
        mass -= p;
    }
    out
}

/// Occupied targets of negative channels whose source state is empty or absent.
pub fn memory_loss(reg: &EnsembleRegistry, model: &ModelSpec, rates: &InstantRates) -> Vec<MemoryLoss> {
    let mut out = Vec::new();
    for j in 0..model.num_channels() {
        if rates.decay[j] >= 0.0 {
            continue;
        }
        for (target, e) in reg.entries.iter().enumerate() {
            if !e.active() || jump_image(model, j, &e.state).is_none() {
                continue;
            }
            let link = reg.links.iter().find(|l| l.channel == j && l.target == target);
            let source = link.map(|l| &reg.entries[l.source]);
            if source.is_none_or(|s| s.count == 0) {
                out.push(MemoryLoss { channel: model.channels[j].label, target: e.id, source: source.map(|s| s.id) });
            }
        }
    }
    out
}

/// One stochastic step at grid index `step` (time `step·dt`).
pub fn advance_step(
    reg: &mut EnsembleRegistry,
    model: &ModelSpec,
    rates: &InstantRates,
    step: usize,
    dt: f64,
    max_jump_prob: f64,
) -> Result<StepOutcome> {
    let time = step as f64 * dt;
    let mut outcome = StepOutcome { memory_loss: memory_loss(reg, model, rates), ..Default::default() };
    let plan = build_branches(reg, model, rates, dt, max_jump_prob)?;
    let frozen = reg.counts();
    let before = reg.entries.len();
    let mut delta = vec![0i64; 0];
    let mut moves = Vec::new();
    for eb in plan {
        if eb.saturated {
            outcome.saturated.push(reg.entries[eb.source].id);
        }
        if eb.branches.is_empty() {
            continue;
        }
        let probs: Vec<f64> = eb.branches.iter().map(|b| b.prob).collect();
        let drawn = multinomial(&mut reg.entries[eb.source].rng, frozen[eb.source], &probs);
        for (b, k) in eb.branches.into_iter().zip(drawn) {
            if k == 0 {
                continue;
            }
            let (channel, direction, target) = match b.kind {
                BranchKind::Forward { channel, image } => (channel, Direction::Forward, reg.find_or_create(image)),
                BranchKind::Reverse { channel, target } => (channel, Direction::Reverse, target),
            };
            moves.push((eb.source, target, k));
            outcome.events.push(JumpEvent {
                step,
                time,
                channel: model.channels[channel].label,
                direction,
                source: reg.entries[eb.source].id,
                target: reg.entries[target].id,
                members: k,
            });
        }
    }
    delta.resize(reg.entries.len(), 0);
    for (s, t, k) in moves {
        delta[s] -= k as i64;
        delta[t] += k as i64;
    }
    for (e, d) in reg.entries.iter_mut().zip(delta) {
        e.count = (e.count as i64 + d) as u64;
    }
    outcome.created = reg.entries.len() - before;
    reg.propagate(model, rates, dt)?;
    outcome.counts_after = reg.counts();
    Ok(outcome)
}

/// Exact expectation of one [`advance_step`] compared with an Euler step of
/// the master equation: `‖σ̄(t+dt) − ρ(t) − dt L(ρ(t), t)‖_∞`.
pub fn one_step_average_check(reg: &EnsembleRegistry, model: &ModelSpec, t: f64, dt: f64) -> Result<f64> {
    let rates = InstantRates::at(model, t)?;
    let plan = build_branches(reg, model, &rates, dt, 1.0)?;
    let d = model.dim();
    let n = reg.total as f64;
    let evolve = |v: &StateVector| deterministic_step(v, model, &rates, dt).map(|s| s.outer());
    let mut sigma = DensityMatrix::zeros(d);
    for eb in plan {
        let e = &reg.entries[eb.source];
        let w = e.count as f64 / n;
        let mut stay = 1.0;
        for b in &eb.branches {
            stay -= b.prob;
            let landed = match &b.kind {
                BranchKind::Forward { image, .. } => evolve(image)?,
                BranchKind::Reverse { target, .. } => evolve(&reg.entries[*target].state)?,
            };
            sigma.add_scaled(w * b.prob, &landed);
        }
        sigma.add_scaled(w * stay, &evolve(&e.state)?);
    }
    let rho = reg.density_matrix();
    let l = master::rhs_with_rates(model, rho.matrix(), &rates.decay, &rates.lamb_shift);
    let reference = rho.matrix() + &l.scale(C64::new(dt, 0.0));
    Ok(sigma.matrix().max_abs_diff(&reference))
}

/// Recorded quantities at one grid time.
#[derive(Clone, Debug)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub rho: DensityMatrix,
    pub decay: Vec<f64>,
    /// Counts indexed by entry id.
    pub counts: Vec<u64>,
    pub n_eff: usize,
}

/// Whole-run bookkeeping beyond the recorded snapshots.
#[derive(Clone, Debug, Default)]
pub struct RunDiagnostics {
    pub first_memory_loss: Option<(f64, MemoryLoss)>,
    pub memory_loss_steps: usize,
    pub saturated_steps: usize,
    /// Entries created at steps where every channel rate was negative.
    pub created_in_negative_windows: usize,
    /// Largest `|Σ N_α − N|` seen after any step.
    pub max_count_drift: u64,
    pub max_n_eff: usize,
}

/// Stepper over a precomputed rate table.
pub struct Simulation<'m> {
    model: &'m ModelSpec,
    cfg: EngineConfig,
    table: RateTable,
    registry: EnsembleRegistry,
    step: usize,
    pub diagnostics: RunDiagnostics,
}

impl<'m> Simulation<'m> {
    pub fn new(model: &'m ModelSpec, cfg: EngineConfig) -> Result<Self> {
        cfg.validate()?;
        let table = RateTable::new(&model.rate_functions(), cfg.dt, cfg.steps())?;
        let registry = EnsembleRegistry::new(model, model.initial_state.clone(), cfg.ensemble_size, cfg.rng_seed)?;
        Ok(Self { model, cfg, table, registry, step: 0, diagnostics: RunDiagnostics::default() })
    }

    pub fn registry(&self) -> &EnsembleRegistry {
        &self.registry
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn time(&self) -> f64 {
        self.step as f64 * self.cfg.dt
    }

    pub fn done(&self) -> bool {
        self.step >= self.cfg.steps()
    }

    fn rates(&self, step: usize) -> InstantRates {
        let lamb = if self.model.lamb_shift_enabled {
            self.table.lamb_shift(step).to_vec()
        } else {
            vec![0.0; self.model.num_channels()]
        };
        InstantRates { decay: self.table.decay(step).to_vec(), lamb_shift: lamb }
    }

    pub fn snapshot(&self) -> Snapshot {
        let mut counts = vec![0; self.registry.created()];
        for e in self.registry.entries() {
            counts[e.id] = e.count;
        }
        Snapshot {
            step: self.step,
            time: self.time(),
            rho: self.registry.density_matrix(),
            decay: self.table.decay(self.step).to_vec(),
            counts,
            n_eff: self.registry.n_eff(),
        }
    }

    pub fn advance(&mut self) -> Result<StepOutcome> {
        let rates = self.rates(self.step);
        let out = advance_step(&mut self.registry, self.model, &rates, self.step, self.cfg.dt, self.cfg.max_jump_prob)?;
        let now = self.time();
        let diag = &mut self.diagnostics;
        if let Some(first) = out.memory_loss.first() {
            if diag.first_memory_loss.is_none() {
                diag.first_memory_loss = Some((now, first.clone()));
            }
            diag.memory_loss_steps += 1;
        }
        if !out.saturated.is_empty() {
            diag.saturated_steps += 1;
        }
        if rates.decay.iter().all(|&g| g < 0.0) {
            diag.created_in_negative_windows += out.created;
        }
        let sum: u64 = out.counts_after.iter().sum();
        diag.max_count_drift = diag.max_count_drift.max(sum.abs_diff(self.registry.total()));
        diag.max_n_eff = diag.max_n_eff.max(self.registry.n_eff());
        self.step += 1;
        Ok(out)
    }

    /// Run to `t_max`, recording every `record_stride` steps (and the last).
    pub fn run(mut self, mut on_step: impl FnMut(&StepOutcome)) -> Result<(Vec<Snapshot>, RunDiagnostics)> {
        let mut snaps = vec![self.snapshot()];
        self.diagnostics.max_n_eff = self.registry.n_eff();
        while !self.done() {
            let out = self.advance()?;
            on_step(&out);
            if self.step % self.cfg.record_stride == 0 || self.done() {
                snaps.push(self.snapshot());
            }
        }
        Ok((snaps, self.diagnostics))
    }
}
