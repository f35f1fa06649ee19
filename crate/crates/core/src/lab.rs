//! Square-case experiments: hitting-time scaling, the deterministic
//! envelopes `S_t^±` with censored auxiliary dynamics, and the halo sets
//! of a jagged ceiling.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::coupling::hitting_time_max;
use crate::equilibrium::check_alpha;
use crate::error::{Error, Result};
use crate::glauber::{Chain, DynamicsParams, EventClock};
use crate::model::{BoundaryPair, MonotoneCubeSet, Path, PolymerConfig};
use crate::rng::replica_rng;
use crate::stats::{linear_fit, quantile_sorted, LinearFit};

/// Quantile level `1 − 1/(2e)` used for hitting times.
pub fn hitting_quantile_level() -> f64 {
    1.0 - 0.5 / std::f64::consts::E
}

/// Smallest even integer `≥ (ln M)²`, and at least 2.
pub fn block_side(m: usize) -> usize {
    let raw = (m as f64).ln().powi(2).ceil().max(2.0) as usize;
    raw + raw % 2
}

/// Minimal configuration `k = M` copies of `∨` on `n = 2M`: the full cube.
pub fn full_cube_config(m: usize) -> Result<PolymerConfig> {
    PolymerConfig::replicate(&Path::vee(2 * m, 0)?, m)
}

/// How much of a block belongs to `S_t^+`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockFill {
    Full,
    LowerHalf,
    Empty,
}

/// The deterministic sets `S_t^− ⊆ S_t^+` on a cube padded to a multiple
/// of the block side.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeSchedule {
    requested: usize,
    side: usize,
    block: usize,
    blocks: usize,
    c_alpha: f64,
    tau: f64,
    censor: bool,
}

pub fn build_envelope(m: usize, c_alpha: f64) -> Result<EnvelopeSchedule> {
    if m < 2 {
        return Err(Error::InvalidParameter(format!("envelope needs M ≥ 2, got {m}")));
    }
    if !(c_alpha > 0.0) || !c_alpha.is_finite() {
        return Err(Error::InvalidParameter(format!("C(α) must be positive, got {c_alpha}")));
    }
    let block = block_side(m);
    let blocks = m.div_ceil(block);
    Ok(EnvelopeSchedule {
        requested: m,
        side: blocks * block,
        block,
        blocks,
        c_alpha,
        tau: c_alpha * (m as f64).ln().powi(8) / 7.0,
        censor: true,
    })
}

impl EnvelopeSchedule {
    /// Same geometry with `S_t^− ≡ ∅`, so nothing is censored.
    pub fn without_censoring(mut self) -> Self {
        self.censor = false;
        self
    }

    pub fn requested_side(&self) -> usize {
        self.requested
    }

    /// Side of the padded cube actually simulated.
    pub fn side(&self) -> usize {
        self.side
    }

    pub fn block(&self) -> usize {
        self.block
    }

    /// `K`, blocks per edge.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn c_alpha(&self) -> f64 {
        self.c_alpha
    }

    /// `6Kτ`, after which `S^−` is empty and `S^+ = B^−_{(0,0,0)}`.
    pub fn settle_time(&self) -> f64 {
        6.0 * self.blocks as f64 * self.tau
    }

    /// `min(M², 100·C(α)·M(log M)⁶)`.
    pub fn default_horizon(&self) -> f64 {
        let m = self.requested as f64;
        (m * m).min(100.0 * self.c_alpha * m * m.ln().powi(6))
    }

    /// Phase `i` with `(i−1)τ < t ≤ iτ`; 0 at `t ≤ 0`.
    pub fn lower_phase(&self, t: f64) -> u64 {
        if t <= 0.0 {
            0
        } else {
            (t / self.tau).ceil() as u64
        }
    }

    /// Phase `⌊t/τ⌋` on which `S_t^+` is constant.
    pub fn upper_phase(&self, t: f64) -> u64 {
        (t.max(0.0) / self.tau).floor() as u64
    }

    fn in_lower(&self, v: [usize; 3], phase: u64) -> bool {
        if !self.censor && phase > 0 {
            return false;
        }
        if phase == 0 {
            return true;
        }
        let lhs = (v[2] + 2 * (v[0] + v[1])) as i64;
        lhs <= 5 * (self.blocks as i64 - 1) - phase as i64
    }

    pub fn lower_contains_block(&self, v: [usize; 3], t: f64) -> bool {
        self.in_lower(v, self.lower_phase(t))
    }

    pub fn upper_block(&self, v: [usize; 3], t: f64) -> BlockFill {
        self.upper_block_at_phase(v, self.upper_phase(t))
    }

    fn upper_block_at_phase(&self, v: [usize; 3], phase: u64) -> BlockFill {
        if self.in_lower(v, phase) {
            return BlockFill::Full;
        }
        let exposed = (0..3).any(|d| {
            v[d] > 0 && {
                let mut w = v;
                w[d] -= 1;
                !self.in_lower(w, phase)
            }
        });
        if exposed {
            BlockFill::Empty
        } else {
            BlockFill::LowerHalf
        }
    }

    fn columns(&self, fill: impl Fn([usize; 3]) -> u32) -> MonotoneCubeSet {
        let (m, b) = (self.side, self.block);
        let mut cols = vec![0u32; m * m];
        for v1 in 0..self.blocks {
            for v2 in 0..self.blocks {
                let h: u32 = (0..self.blocks).map(|v3| fill([v1, v2, v3])).sum();
                for r1 in v1 * b..(v1 + 1) * b {
                    for r2 in v2 * b..(v2 + 1) * b {
                        cols[r1 * m + r2] = h;
                    }
                }
            }
        }
        MonotoneCubeSet::new(m, cols).expect("envelopes are monotone")
    }

    fn lower_set_at_phase(&self, phase: u64) -> MonotoneCubeSet {
        let b = self.block as u32;
        self.columns(|v| if self.in_lower(v, phase) { b } else { 0 })
    }

    fn upper_set_at_phase(&self, phase: u64) -> MonotoneCubeSet {
        let b = self.block as u32;
        self.columns(|v| match self.upper_block_at_phase(v, phase) {
            BlockFill::Full => b,
            BlockFill::LowerHalf => b / 2,
            BlockFill::Empty => 0,
        })
    }

    pub fn lower_at(&self, t: f64) -> MonotoneCubeSet {
        self.lower_set_at_phase(self.lower_phase(t))
    }

    pub fn upper_at(&self, t: f64) -> MonotoneCubeSet {
        self.upper_set_at_phase(self.upper_phase(t))
    }
}

/// Heights of the configuration whose cube set is `s`.
fn heights_of(s: &MonotoneCubeSet) -> Vec<i32> {
    PolymerConfig::from_cube_set(s)
        .expect("cube sets map to configurations")
        .flat()
        .to_vec()
}

/// One censored run from the full cube.
#[derive(Debug, Clone, PartialEq)]
pub struct CensoredRun {
    /// First time `ŝ_t ⊄ S_t^+`.
    pub first_violation: Option<f64>,
    /// Largest `|ŝ_t \ S_t^+|` seen during each `S^+` phase.
    pub worst_excess: Vec<u64>,
    /// First time `ŝ_t` is empty.
    pub hit_time: Option<f64>,
    pub events: u64,
    /// `(time, ŝ_t)` at each requested snapshot time.
    pub snapshots: Vec<(f64, MonotoneCubeSet)>,
    /// Events after which the free run coupled on the same clocks was not
    /// contained in `ŝ_t`; `None` when no free run was attached.
    pub domination_failures: Option<u64>,
}

/// Single-flip dynamics in the cube picture, started from the full cube,
/// with every removal that would breach `S_t^−` suppressed.
pub fn run_censored_dynamics(
    schedule: &EnvelopeSchedule,
    alpha: f64,
    horizon: f64,
    seed: u64,
    replica: u64,
    snapshot_times: &[f64],
    coupled: bool,
) -> Result<CensoredRun> {
    check_alpha(alpha)?;
    let m = schedule.side();
    let n = 2 * m;
    let bounds = BoundaryPair::extremal(n, 0)?;
    let init = full_cube_config(m)?;
    let mut chain = Chain::new(&bounds, alpha, &init)?;
    let mut free = coupled.then(|| chain.clone());
    let mut clock = EventClock::new(replica_rng(seed, replica), m, n);
    let w = n + 1;
    let floor = vec![i32::MIN; m * w];

    let mut lower_phase = 0;
    let mut upper_phase = 0;
    let mut upper = heights_of(&schedule.upper_set_at_phase(0));
    let deficit = |y: i32, cap: i32| ((cap - y).max(0) / 2) as u64;
    let mut excess: u64 = chain.polymers().iter().zip(&upper).map(|(&y, &c)| deficit(y, c)).sum();
    let mut run = CensoredRun {
        first_violation: None,
        worst_excess: vec![excess],
        hit_time: None,
        events: 0,
        snapshots: Vec::with_capacity(snapshot_times.len()),
        domination_failures: coupled.then_some(0),
    };
    let mut pending_snapshots = snapshot_times.iter().copied().filter(|&t| t <= horizon).peekable();
    while pending_snapshots.peek().is_some_and(|&t| t <= 0.0) {
        run.snapshots.push((pending_snapshots.next().unwrap(), chain.state().to_cube_set()?));
    }

    loop {
        let e = clock.next_event();
        let t = e.time.min(horizon);
        while let Some(&ts) = pending_snapshots.peek() {
            if ts >= e.time {
                break;
            }
            run.snapshots.push((ts, chain.state().to_cube_set()?));
            pending_snapshots.next();
        }
        while upper_phase < schedule.upper_phase(t) {
            upper_phase += 1;
            upper = heights_of(&schedule.upper_set_at_phase(upper_phase));
            excess = chain.polymers().iter().zip(&upper).map(|(&y, &c)| deficit(y, c)).sum();
            run.worst_excess.push(excess);
            if excess > 0 && run.first_violation.is_none() {
                run.first_violation = Some(upper_phase as f64 * schedule.tau());
            }
        }
        if e.time > horizon {
            break;
        }
        let phase = schedule.lower_phase(e.time);
        if phase != lower_phase {
            lower_phase = phase;
            chain.set_caps(floor.clone(), heights_of(&schedule.lower_set_at_phase(phase)))?;
        }
        let at = (e.i - 1) * w + e.x;
        let before = deficit(chain.polymers()[at], upper[at]);
        chain.apply(&e);
        run.events += 1;
        excess = excess - before + deficit(chain.polymers()[at], upper[at]);
        let worst = run.worst_excess.last_mut().unwrap();
        *worst = (*worst).max(excess);
        if excess > 0 && run.first_violation.is_none() {
            run.first_violation = Some(e.time);
        }
        if run.hit_time.is_none() && chain.excess_volume() == 0 {
            run.hit_time = Some(e.time);
        }
        if let Some(free) = free.as_mut() {
            free.apply(&e);
            if !free.dominates(&chain) {
                *run.domination_failures.as_mut().unwrap() += 1;
            }
        }
    }
    for ts in pending_snapshots {
        run.snapshots.push((ts, chain.state().to_cube_set()?));
    }
    Ok(run)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvelopeReport {
    pub side: usize,
    pub alpha: f64,
    pub c_alpha: f64,
    pub horizon: f64,
    /// First upper-inclusion violation time per replica.
    pub first_violations: Vec<Option<f64>>,
    /// Worst `|ŝ_t \ S_t^+|` per `S^+` phase over all replicas.
    pub worst_excess: Vec<u64>,
    /// Events at which `S_t^− ⊄ ŝ_t`; zero by construction.
    pub lower_violations: u64,
}

impl EnvelopeReport {
    pub fn violation_frequency(&self) -> f64 {
        let hits = self.first_violations.iter().filter(|v| v.is_some()).count();
        hits as f64 / self.first_violations.len().max(1) as f64
    }
}

/// Runs `replicas` censored trajectories and records when `ŝ_t ⊂ S_t^+`
/// first fails.
pub fn check_envelope_containment(
    schedule: &EnvelopeSchedule,
    alpha: f64,
    horizon: f64,
    replicas: usize,
    seed: u64,
) -> Result<EnvelopeReport> {
    let runs = (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let run = run_censored_dynamics(schedule, alpha, horizon, seed, r, &[horizon], false)?;
            // the lower inclusion is enforced by the caps; recheck at the end
            let lower = schedule.lower_at(horizon);
            let ok = run.snapshots.iter().all(|(_, s)| lower.is_subset(s));
            Ok((run, ok))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut worst_excess = Vec::new();
    for (run, _) in &runs {
        if worst_excess.len() < run.worst_excess.len() {
            worst_excess.resize(run.worst_excess.len(), 0);
        }
        for (w, &x) in worst_excess.iter_mut().zip(&run.worst_excess) {
            *w = (*w).max(x);
        }
    }
    Ok(EnvelopeReport {
        side: schedule.side(),
        alpha,
        c_alpha: schedule.c_alpha(),
        horizon,
        first_violations: runs.iter().map(|(r, _)| r.first_violation).collect(),
        worst_excess,
        lower_violations: runs.iter().filter(|(_, ok)| !ok).count() as u64,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingRow {
    pub m: usize,
    pub replicas: usize,
    pub censored: usize,
    pub median: f64,
    /// The `1 − 1/(2e)` quantile; infinite when it falls on a censored run.
    pub quantile: f64,
}

impl ScalingRow {
    pub fn quantile_censored(&self) -> bool {
        self.quantile.is_infinite()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub alpha: f64,
    pub rows: Vec<ScalingRow>,
    /// Fit of `ln q` against `ln M`: slope is `a` in `t(M) ~ M^a`.
    pub power: Option<LinearFit>,
    /// Fit of `ln(q/M)` against `ln ln M`: slope is `b` in `t(M)/M ~ (log M)^b`.
    pub polylog: Option<LinearFit>,
}

/// Horizon per side used when none is given: `100·M²`.
pub fn default_hitting_horizon(m: usize) -> f64 {
    100.0 * (m * m) as f64
}

/// `t(M)`: first time the dynamics on `k = M`, `n = 2M`, `∧/∨` started
/// from the full cube reaches the empty one, over `replicas` streams.
pub fn hitting_scaling_experiment(
    sides: &[usize],
    alpha: f64,
    replicas: usize,
    seed: u64,
    horizon: Option<f64>,
) -> Result<ScalingReport> {
    check_alpha(alpha)?;
    if replicas == 0 {
        return Err(Error::InvalidParameter("need at least one replica".into()));
    }
    let mut rows = Vec::with_capacity(sides.len());
    for &m in sides {
        if m == 0 {
            return Err(Error::InvalidParameter("side must be positive".into()));
        }
        let params = DynamicsParams {
            alpha,
            bounds: BoundaryPair::extremal(2 * m, 0)?,
            k: m,
            seed: seed ^ ((m as u64) << 40),
            horizon: horizon.unwrap_or_else(|| default_hitting_horizon(m)),
        };
        let init = full_cube_config(m)?;
        let hits = (0..replicas as u64)
            .into_par_iter()
            .map(|r| hitting_time_max(&params, &init, r))
            .collect::<Result<Vec<_>>>()?;
        let censored = hits.iter().filter(|h| h.censored).count();
        let mut times: Vec<f64> = hits
            .iter()
            .map(|h| if h.censored { f64::INFINITY } else { h.time })
            .collect();
        times.sort_by(f64::total_cmp);
        rows.push(ScalingRow {
            m,
            replicas,
            censored,
            median: censored_quantile(&times, 0.5),
            quantile: censored_quantile(&times, hitting_quantile_level()),
        });
    }
    let usable: Vec<&ScalingRow> = rows.iter().filter(|r| r.quantile.is_finite() && r.m >= 2).collect();
    let (power, polylog) = if usable.len() >= 2 {
        let lm: Vec<f64> = usable.iter().map(|r| (r.m as f64).ln()).collect();
        let lq: Vec<f64> = usable.iter().map(|r| r.quantile.ln()).collect();
        let llm: Vec<f64> = lm.iter().map(|x| x.ln()).collect();
        let lqm: Vec<f64> = lq.iter().zip(&lm).map(|(q, m)| q - m).collect();
        (Some(linear_fit(&lm, &lq)), Some(linear_fit(&llm, &lqm)))
    } else {
        (None, None)
    };
    Ok(ScalingReport {
        alpha,
        rows,
        power,
        polylog,
    })
}

/// Quantile that refuses to interpolate into censored (infinite) values.
fn censored_quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    if sorted[pos.ceil() as usize].is_infinite() {
        f64::INFINITY
    } else {
        quantile_sorted(sorted, q)
    }
}

/// `A₁ = A₂ ∪ A₃` around the ground state of a jagged ceiling. Blocks have
/// the side of [`block_side`]; the last row and column of blocks are
/// truncated when the side does not divide `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct HaloSets {
    m: usize,
    block: usize,
    blocks: usize,
    ground: MonotoneCubeSet,
    a2: Vec<bool>,
    a3: Vec<bool>,
}

pub fn build_halo(xi: &Path, m: usize) -> Result<HaloSets> {
    if m == 0 || xi.n() != 2 * m || xi.h() != 0 {
        return Err(Error::DimensionMismatch(format!(
            "ceiling must have n = 2M = {} and h = 0; got n = {}, h = {}",
            2 * m,
            xi.n(),
            xi.h()
        )));
    }
    let ground = PolymerConfig::replicate(xi, m)?.to_cube_set()?;
    let block = block_side(m);
    let blocks = m.div_ceil(block);
    let mut a2 = vec![false; blocks * blocks];
    for r1 in 0..m {
        for r2 in 0..m {
            if ground.column(r1, r2) > 0 {
                a2[(r1 / block) * blocks + r2 / block] = true;
            }
        }
    }
    // a neighbour outside the cube is not in C_M \ A₂
    let blocked = |v1: Option<usize>, v2: Option<usize>| match (v1, v2) {
        (Some(a), Some(b)) => a2[a * blocks + b],
        _ => true,
    };
    let mut a3 = vec![false; blocks * blocks];
    for v1 in 0..blocks {
        for v2 in 0..blocks {
            a3[v1 * blocks + v2] = blocked(v1.checked_sub(1), Some(v2)) && blocked(Some(v1), v2.checked_sub(1));
        }
    }
    Ok(HaloSets {
        m,
        block,
        blocks,
        ground,
        a2,
        a3,
    })
}

impl HaloSets {
    pub fn side(&self) -> usize {
        self.m
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// The ground state `s⁻`.
    pub fn ground(&self) -> &MonotoneCubeSet {
        &self.ground
    }

    pub fn in_a2(&self, v1: usize, v2: usize) -> bool {
        self.a2[v1 * self.blocks + v2]
    }

    pub fn in_a3(&self, v1: usize, v2: usize) -> bool {
        self.a3[v1 * self.blocks + v2]
    }

    pub fn in_a1(&self, v1: usize, v2: usize) -> bool {
        self.in_a2(v1, v2) || self.in_a3(v1, v2)
    }

    /// Column heights of `s⁻ ∪ A₁`.
    pub fn confining_columns(&self) -> Vec<u32> {
        let m = self.m;
        let mut cols = self.ground.columns().to_vec();
        for r1 in 0..m {
            for r2 in 0..m {
                if self.in_a1(r1 / self.block, r2 / self.block) {
                    let top = self.block.min(m) as u32;
                    cols[r1 * m + r2] = cols[r1 * m + r2].max(top);
                }
            }
        }
        cols
    }

    /// `|A₁ \ s⁻|`.
    pub fn extra_volume(&self) -> u64 {
        self.confining_columns()
            .iter()
            .zip(self.ground.columns())
            .map(|(&c, &g)| (c - g) as u64)
            .sum()
    }

    /// `4M(log M)⁴`.
    pub fn volume_bound(&self) -> f64 {
        let m = self.m as f64;
        4.0 * m * m.ln().powi(4)
    }

    /// `s ⊆ s⁻ ∪ A₁`.
    pub fn confines(&self, s: &MonotoneCubeSet) -> bool {
        s.side() == self.m && s.columns().iter().zip(self.confining_columns()).all(|(&c, cap)| c <= cap)
    }
}

/// Uniformly random ceiling in `Ω⁰_{1,2M}`.
pub fn random_ceiling<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Path> {
    let mut steps: Vec<char> = std::iter::repeat_n('+', m).chain(std::iter::repeat_n('-', m)).collect();
    steps.shuffle(rng);
    Path::from_increments(&steps.into_iter().collect::<String>())
}

#[derive(Debug, Clone, PartialEq)]
pub struct HaloReport {
    pub side: usize,
    pub alpha: f64,
    pub c_alpha: f64,
    /// `(6/7)·C(α)·M(log M)⁶`.
    pub burn_in: f64,
    pub horizon: f64,
    /// Snapshot checks per replica, equally spaced on `[burn_in, horizon]`.
    pub checks_per_replica: usize,
    /// Checks with `s_t ⊆ s⁻ ∪ A₁`, per replica.
    pub confined: Vec<usize>,
    pub extra_volume: u64,
    pub volume_bound: f64,
}

impl HaloReport {
    /// Fraction of all snapshot checks that found the state confined.
    pub fn frequency(&self) -> f64 {
        let total = self.checks_per_replica * self.confined.len();
        self.confined.iter().sum::<usize>() as f64 / total.max(1) as f64
    }

    /// Fraction of replicas confined at every check.
    pub fn always_confined(&self) -> f64 {
        let all = self.confined.iter().filter(|&&c| c == self.checks_per_replica).count();
        all as f64 / self.confined.len().max(1) as f64
    }
}

/// Snapshot checks taken per replica by [`check_halo_confinement`].
pub const HALO_CHECKS: usize = 20;

/// Runs the dynamics under ceiling `ξ` from the full cube and checks
/// `s_t ⊆ s⁻ ∪ A₁` at equally spaced times after the burn-in.
pub fn check_halo_confinement(
    xi: &Path,
    m: usize,
    alpha: f64,
    c_alpha: f64,
    replicas: usize,
    seed: u64,
    horizon: Option<f64>,
) -> Result<HaloReport> {
    check_alpha(alpha)?;
    let halo = build_halo(xi, m)?;
    let mf = m as f64;
    let burn_in = 6.0 / 7.0 * c_alpha * mf * mf.ln().powi(6);
    let horizon = horizon.unwrap_or_else(|| (mf * mf).min(100.0 * c_alpha * mf * mf.ln().powi(6)));
    if !(burn_in < horizon) {
        return Err(Error::InvalidParameter(format!(
            "burn-in {burn_in} does not precede the horizon {horizon}"
        )));
    }
    let times: Vec<f64> = (0..HALO_CHECKS)
        .map(|i| burn_in + (horizon - burn_in) * i as f64 / (HALO_CHECKS - 1) as f64)
        .collect();
    let n = 2 * m;
    let bounds = BoundaryPair::new(xi.clone(), Path::vee(n, 0)?)?;
    let init = full_cube_config(m)?;
    let confined = (0..replicas as u64)
        .into_par_iter()
        .map(|r| -> Result<usize> {
            let mut chain = Chain::new(&bounds, alpha, &init)?;
            let mut clock = EventClock::new(replica_rng(seed, r), m, n);
            let mut hits = 0;
            let mut next = 0;
            while next < times.len() {
                let e = clock.next_event();
                while next < times.len() && times[next] < e.time {
                    hits += halo.confines(&chain.state().to_cube_set()?) as usize;
                    next += 1;
                }
                chain.apply(&e);
            }
            Ok(hits)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(HaloReport {
        side: m,
        alpha,
        c_alpha,
        burn_in,
        horizon,
        checks_per_replica: HALO_CHECKS,
        confined,
        extra_volume: halo.extra_volume(),
        volume_bound: halo.volume_bound(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_sides() {
        assert_eq!(block_side(4), 2);
        assert_eq!(block_side(16), 8);
        assert_eq!(block_side(32), 14);
    }

    #[test]
    fn envelope_rule_examples() {
        // K = 10 needs side 10·b; probe the rule directly
        let mut s = build_envelope(16, 1.0).unwrap();
        s.blocks = 10;
        let t = 14.5 * s.tau();
        assert!(s.lower_contains_block([0, 0, 0], t));
        assert!(!s.lower_contains_block([9, 9, 9], t));
        assert!(s.lower_contains_block([9, 9, 9], 0.0));
        assert!(!s.lower_contains_block([9, 9, 9], 0.5 * s.tau()));
        assert!(s.lower_contains_block([8, 9, 9], 0.5 * s.tau()));
    }

    #[test]
    fn envelope_invariants() {
        let s = build_envelope(16, 0.01).unwrap();
        let full = MonotoneCubeSet::full(s.side());
        assert_eq!(s.lower_at(0.0), full);
        assert_eq!(s.upper_at(0.0), full);
        let mut prev_lo = full.clone();
        let mut prev_hi = full;
        for step in 0..=40 {
            let t = step as f64 * s.tau() / 3.0;
            let (lo, hi) = (s.lower_at(t), s.upper_at(t));
            assert!(lo.is_subset(&hi));
            assert!(lo.is_subset(&prev_lo) && hi.is_subset(&prev_hi));
            prev_lo = lo;
            prev_hi = hi;
        }
        let late = s.settle_time();
        assert_eq!(s.lower_at(late).volume(), 0);
        let hi = s.upper_at(late);
        assert_eq!(hi.volume() as usize, s.block().pow(3) / 2);
        assert_eq!(hi.column(0, 0) as usize, s.block() / 2);
    }

    #[test]
    fn uncensored_run_matches_free_dynamics() {
        let s = build_envelope(4, 0.5).unwrap().without_censoring();
        let run = run_censored_dynamics(&s, 1.0, 20.0, 3, 0, &[20.0], true).unwrap();
        assert_eq!(run.domination_failures, Some(0));
        let bounds = BoundaryPair::extremal(2 * s.side(), 0).unwrap();
        let mut chain = Chain::new(&bounds, 1.0, &full_cube_config(s.side()).unwrap()).unwrap();
        let mut clock = EventClock::new(replica_rng(3, 0), s.side(), 2 * s.side());
        loop {
            let e = clock.next_event();
            if e.time > 20.0 {
                break;
            }
            chain.apply(&e);
        }
        assert_eq!(run.snapshots[0].1, chain.state().to_cube_set().unwrap());
    }

    #[test]
    fn censored_run_respects_lower_envelope() {
        let s = build_envelope(8, 0.002).unwrap();
        let times: Vec<f64> = (0..30).map(|i| i as f64).collect();
        let run = run_censored_dynamics(&s, 20.0, 30.0, 5, 0, &times, true).unwrap();
        assert_eq!(run.domination_failures, Some(0));
        for (t, snap) in &run.snapshots {
            assert!(s.lower_at(*t).is_subset(snap), "t = {t}");
        }
    }

    #[test]
    fn halo_of_extremal_ceilings() {
        let m = 16;
        let halo = build_halo(&Path::wedge(2 * m, 0).unwrap(), m).unwrap();
        assert_eq!(halo.ground().volume(), 0);
        assert!(halo.in_a3(0, 0) && !halo.in_a2(0, 0));
        assert_eq!((0..2).flat_map(|a| (0..2).map(move |b| (a, b))).filter(|&(a, b)| halo.in_a1(a, b)).count(), 1);
        assert_eq!(halo.extra_volume() as usize, halo.block().pow(3));

        let halo = build_halo(&Path::vee(2 * m, 0).unwrap(), m).unwrap();
        assert_eq!(halo.ground(), &MonotoneCubeSet::full(m));
        assert!((0..2).all(|a| (0..2).all(|b| halo.in_a2(a, b))));
        assert_eq!(halo.extra_volume(), 0);
    }

    #[test]
    fn random_ceilings_respect_volume_bound() {
        let mut rng = replica_rng(11, 0);
        for _ in 0..20 {
            let xi = random_ceiling(16, &mut rng).unwrap();
            let halo = build_halo(&xi, 16).unwrap();
            assert!((halo.extra_volume() as f64) <= halo.volume_bound());
        }
    }

    #[test]
    fn scaling_at_one_is_a_single_flip() {
        // one site, heights ±1: the full cube empties at the first up-move
        let report = hitting_scaling_experiment(&[1], 1.0, 2000, 9, None).unwrap();
        let row = &report.rows[0];
        assert_eq!(row.censored, 0);
        let p = crate::glauber::high_probability(1.0);
        let median = (2.0f64).ln() / p;
        assert!((row.median - median).abs() / median < 0.1, "{row:?}");
    }
}
