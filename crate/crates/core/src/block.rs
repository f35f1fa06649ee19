//! Coarse-grained block dynamics: particle blocks (`𝒢`), whole-polymer
//! slabs (`ℳ`) and the crude single-polymer window chain, with exact
//! generators and coupled contraction estimates.

use std::collections::HashMap;
use std::ops::RangeInclusive;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rayon::prelude::*;

use crate::coupling::{cftp_joint, height_distance, particle_distance, CFTP_EVENT_CAP};
use crate::equilibrium::{check_alpha, exact_measure_capped, ExactMeasure, DEFAULT_STATE_CAP};
use crate::error::{Error, Result};
use crate::glauber::{spectral_gap_exact, Chain, ExactChain};
use crate::model::{particle_count, BoundaryPair, Path, PolymerConfig};
use crate::rng::{replica_rng, SimRng};
use crate::stats::{mean_se, Z95};

type Rows = Vec<Vec<(usize, f64)>>;

/// Window states above which exact block resampling refuses to run.
pub const DEFAULT_WINDOW_CAP: usize = 200_000;

/// Default particle block half-width and distance decay.
pub const DEFAULT_ELL: usize = 2;
pub const DEFAULT_GAMMA: f64 = 0.5;
/// Default polymer slab half-width and distance decay.
pub const DEFAULT_S: usize = 1;
pub const DEFAULT_RHO: f64 = 1.0;

/// Heights left free for resampling: polymer `j` (1-based) may change at
/// sites `start..=end` of its span; everything else is frozen.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Region {
    spans: Vec<Option<(usize, usize)>>,
}

impl Region {
    pub fn frozen(k: usize) -> Self {
        Self { spans: vec![None; k] }
    }

    pub fn set(&mut self, j: usize, start: usize, end: usize) {
        self.spans[j - 1] = (start <= end).then_some((start, end));
    }

    pub fn span(&self, j: usize) -> Option<(usize, usize)> {
        self.spans[j - 1]
    }

    pub fn is_free(&self, j: usize, x: usize) -> bool {
        self.spans[j - 1].is_some_and(|(s, e)| s <= x && x <= e)
    }

    pub fn is_empty(&self) -> bool {
        self.spans.iter().all(Option::is_none)
    }
}

/// Exact conditional law of the free heights given everything else.
#[derive(Debug, Clone)]
pub struct RegionLaw {
    configs: Vec<Vec<i32>>,
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl RegionLaw {
    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    /// Full flattened configurations in the support.
    pub fn configs(&self) -> &[Vec<i32>] {
        &self.configs
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample_index(&self, u: f64) -> usize {
        let target = u * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.configs.len() - 1)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> &[i32] {
        &self.configs[self.sample_index(rng.random())]
    }
}

/// Enumerates every way to refill `region` in `flat` (a `k × (n+1)`
/// configuration inside `bounds`) and weights each by `exp(−2α V^ξ)`.
pub fn region_law(
    bounds: &BoundaryPair,
    k: usize,
    flat: &[i32],
    region: &Region,
    alpha: f64,
    cap: usize,
) -> Result<RegionLaw> {
    let n = bounds.n();
    let w = n + 1;
    if flat.len() != k * w || region.spans.len() != k {
        return Err(Error::DimensionMismatch("region and configuration disagree".into()));
    }
    let mut slots = Vec::new();
    for j in 1..=k {
        if let Some((s, e)) = region.span(j) {
            if s == 0 || e >= n {
                return Err(Error::InvalidParameter("path endpoints cannot be free".into()));
            }
            slots.extend((s..=e).map(|x| (j - 1, x, e)));
        }
    }
    let mut walk = RegionWalk {
        w,
        k,
        xi: bounds.xi().heights(),
        sigma: bounds.sigma().heights(),
        region,
        slots: &slots,
        buf: flat.to_vec(),
        configs: Vec::new(),
        log_weights: Vec::new(),
        cap,
        overflow: false,
        alpha,
    };
    walk.descend(0, 0.0);
    if walk.overflow {
        return Err(Error::CapExceeded {
            what: "window states",
            count: cap + 1,
            cap,
        });
    }
    let RegionWalk {
        configs, log_weights, ..
    } = walk;
    if configs.is_empty() {
        return Err(Error::InvalidConfig("configuration admits no refill of the region".into()));
    }
    let max = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = raw.iter().sum();
    let probs: Vec<f64> = raw.iter().map(|r| r / total).collect();
    let mut acc = 0.0;
    let cumulative = probs
        .iter()
        .map(|p| {
            acc += p;
            acc
        })
        .collect();
    Ok(RegionLaw {
        configs,
        probs,
        cumulative,
    })
}

struct RegionWalk<'a> {
    w: usize,
    k: usize,
    xi: &'a [i32],
    sigma: &'a [i32],
    region: &'a Region,
    slots: &'a [(usize, usize, usize)],
    buf: Vec<i32>,
    configs: Vec<Vec<i32>>,
    log_weights: Vec<f64>,
    cap: usize,
    overflow: bool,
    alpha: f64,
}

impl RegionWalk<'_> {
    fn descend(&mut self, t: usize, log_w: f64) {
        if self.overflow {
            return;
        }
        let Some(&(j0, x, end)) = self.slots.get(t) else {
            if self.configs.len() == self.cap {
                self.overflow = true;
            } else {
                self.configs.push(self.buf.clone());
                self.log_weights.push(log_w);
            }
            return;
        };
        let w = self.w;
        let prev = self.buf[j0 * w + x - 1];
        let upper = if j0 == 0 {
            self.xi[x]
        } else {
            self.buf[(j0 - 1) * w + x]
        };
        let mut lower = self.sigma[x];
        if j0 + 1 < self.k && !self.region.is_free(j0 + 2, x) {
            lower = lower.max(self.buf[(j0 + 1) * w + x]);
        }
        let target = self.buf[j0 * w + end + 1];
        let room = (end + 1 - x) as i32;
        for y in [prev + 1, prev - 1] {
            if y <= upper && y >= lower && (y - target).abs() <= room {
                self.buf[j0 * w + x] = y;
                self.descend(t + 1, log_w + self.alpha * y as f64);
            }
        }
    }
}

/// Free region of the particle labels `first..=last` on `polymers`.
///
/// On polymer `j` the increments strictly between the frozen particles
/// `first−1` and `last+1` are free, so the free heights are
/// `x_{first−1}+2 ..= x_{last+1}−1`.
pub fn particle_region(
    config: &PolymerConfig,
    first: usize,
    last: usize,
    polymers: RangeInclusive<usize>,
) -> Region {
    let particles = config.to_particles();
    let mut region = Region::frozen(config.k());
    for j in polymers {
        let a = particles.x_ext(j, first as isize - 1);
        let b = particles.x_ext(j, last as isize + 1);
        if a + 2 <= b - 1 {
            region.set(j, (a + 2) as usize, (b - 1) as usize);
        }
    }
    region
}

/// Free region of whole polymers `lo..=hi`.
pub fn slab_region(k: usize, n: usize, lo: usize, hi: usize) -> Region {
    let mut region = Region::frozen(k);
    if n >= 2 {
        for j in lo..=hi {
            region.set(j, 1, n - 1);
        }
    }
    region
}

/// Block of `2ℓ+1` particle labels around `i`, clipped to `1..=N`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParticleWindow {
    pub i: usize,
    pub ell: usize,
}

impl ParticleWindow {
    pub fn labels(&self, count: usize) -> (usize, usize) {
        (self.i.saturating_sub(self.ell).max(1), (self.i + self.ell).min(count))
    }
}

/// Slab of `2s+1` polymers around `j`, clipped to `1..=k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PolymerWindow {
    pub j: usize,
    pub s: usize,
}

impl PolymerWindow {
    pub fn polymers(&self, k: usize) -> (usize, usize) {
        (self.j.saturating_sub(self.s).max(1), (self.j + self.s).min(k))
    }
}

fn check_member(config: &PolymerConfig, bounds: &BoundaryPair) -> Result<()> {
    if !config.in_bounds(bounds)? {
        return Err(Error::InvalidConfig("configuration leaves the boundary pair".into()));
    }
    Ok(())
}

/// Replaces particles `i−ℓ..=i+ℓ` of every polymer by an exact sample of
/// their conditional law given all other particle positions.
pub fn resample_particle_block<R: Rng + ?Sized>(
    config: &PolymerConfig,
    bounds: &BoundaryPair,
    window: ParticleWindow,
    alpha: f64,
    rng: &mut R,
    cap: usize,
) -> Result<PolymerConfig> {
    check_alpha(alpha)?;
    check_member(config, bounds)?;
    let count = particle_count(config.n(), config.h());
    if window.i == 0 || window.i > count {
        return Err(Error::InvalidParameter(format!(
            "particle label {} outside 1..={count}",
            window.i
        )));
    }
    let (first, last) = window.labels(count);
    let region = particle_region(config, first, last, 1..=config.k());
    let law = region_law(bounds, config.k(), config.flat(), &region, alpha, cap)?;
    Ok(rebuild(config, law.sample(rng).to_vec()))
}

/// Resamples polymers `j−s..=j+s` given the polymers just outside the slab
/// (the ceiling and floor standing in at the edges).
pub fn resample_polymer_block<R: Rng + ?Sized>(
    config: &PolymerConfig,
    bounds: &BoundaryPair,
    window: PolymerWindow,
    alpha: f64,
    rng: &mut R,
    cap: usize,
) -> Result<PolymerConfig> {
    check_alpha(alpha)?;
    check_member(config, bounds)?;
    let k = config.k();
    if window.j == 0 || window.j > k {
        return Err(Error::InvalidParameter(format!("polymer {} outside 1..={k}", window.j)));
    }
    let (lo, hi) = window.polymers(k);
    let region = slab_region(k, config.n(), lo, hi);
    let law = region_law(bounds, k, config.flat(), &region, alpha, cap)?;
    Ok(rebuild(config, law.sample(rng).to_vec()))
}

fn rebuild(like: &PolymerConfig, flat: Vec<i32>) -> PolymerConfig {
    PolymerConfig::from_flat_unchecked(like.k(), like.n(), like.h(), flat)
}

/// Which coarse-grained chain to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockKind {
    /// `𝒢`: `N` clocks, each resampling a block of `2ℓ+1` particle labels.
    Particle { ell: usize },
    /// `ℳ`: `k` clocks, each resampling a slab of `2s+1` polymers.
    Polymer { s: usize },
    /// Particles `first..=last` free, all others frozen at the maximal
    /// configuration; `k` clocks, each resampling one polymer's window.
    Crude { first: usize, last: usize },
}

/// A block chain: its generator `Σ_c (P_c − I)` and the projectors `P_c`
/// as sparse rows.
#[derive(Debug, Clone)]
pub struct BlockChain {
    kind: BlockKind,
    chain: ExactChain,
    projectors: Vec<Vec<Vec<(usize, f64)>>>,
}

impl BlockChain {
    pub fn kind(&self) -> BlockKind {
        self.kind
    }

    pub fn chain(&self) -> &ExactChain {
        &self.chain
    }

    pub fn clocks(&self) -> usize {
        self.projectors.len()
    }

    pub fn gap(&self) -> Result<f64> {
        spectral_gap_exact(&self.chain)
    }

    /// `var_{P_c(η,·)}(f)` for every state `η`.
    pub fn conditional_variance(&self, clock: usize, f: &[f64]) -> Vec<f64> {
        projector_variance(&self.projectors[clock], f)
    }
}

fn projector_variance(rows: &[Vec<(usize, f64)>], f: &[f64]) -> Vec<f64> {
    rows.iter()
        .map(|row| {
            let m: f64 = row.iter().map(|&(b, p)| p * f[b]).sum();
            let m2: f64 = row.iter().map(|&(b, p)| p * f[b] * f[b]).sum();
            (m2 - m * m).max(0.0)
        })
        .collect()
}

/// Exact generator of a block chain on `E_{ξ,σ}` (or, for the crude
/// chain, on the window class of the maximal configuration).
pub fn block_generator_exact(
    kind: BlockKind,
    bounds: &BoundaryPair,
    k: usize,
    alpha: f64,
    cap: usize,
) -> Result<BlockChain> {
    match kind {
        BlockKind::Crude { first, last } => {
            let exterior = PolymerConfig::replicate(bounds.xi(), k)?;
            crude_generator_exact(bounds, &exterior, first, last, alpha, cap)
        }
        _ => {
            let measure = exact_measure_capped(bounds, k, alpha, cap)?;
            let (n, h) = (bounds.n(), bounds.h());
            let clocks = match kind {
                BlockKind::Particle { .. } => particle_count(n, h),
                _ => k,
            };
            let projectors = build_projectors(&measure, clocks, |c, state| match kind {
                BlockKind::Particle { ell } => {
                    let (first, last) = ParticleWindow { i: c + 1, ell }.labels(clocks);
                    particle_region(state, first, last, 1..=k)
                }
                BlockKind::Polymer { s } => {
                    let (lo, hi) = PolymerWindow { j: c + 1, s }.polymers(k);
                    slab_region(k, n, lo, hi)
                }
                BlockKind::Crude { .. } => unreachable!(),
            })?;
            finish_block_chain(kind, measure, projectors)
        }
    }
}

/// The crude chain around an arbitrary exterior configuration.
pub fn crude_generator_exact(
    bounds: &BoundaryPair,
    exterior: &PolymerConfig,
    first: usize,
    last: usize,
    alpha: f64,
    cap: usize,
) -> Result<BlockChain> {
    check_alpha(alpha)?;
    check_member(exterior, bounds)?;
    let k = exterior.k();
    let count = particle_count(exterior.n(), exterior.h());
    if first == 0 || first > last || last > count {
        return Err(Error::InvalidParameter(format!(
            "window {first}..={last} must lie in 1..={count}"
        )));
    }
    let window = particle_region(exterior, first, last, 1..=k);
    let law = region_law(bounds, k, exterior.flat(), &window, alpha, cap)?;
    let states: Vec<PolymerConfig> = law.configs().iter().map(|f| rebuild(exterior, f.clone())).collect();
    let measure = ExactMeasure::from_states(bounds.clone(), k, alpha, states)?;
    let projectors = build_projectors(&measure, k, |c, state| {
        particle_region(state, first, last, c + 1..=c + 1)
    })?;
    finish_block_chain(BlockKind::Crude { first, last }, measure, projectors)
}

fn build_projectors(
    measure: &ExactMeasure,
    clocks: usize,
    region_of: impl Fn(usize, &PolymerConfig) -> Region + Sync,
) -> Result<Vec<Vec<Vec<(usize, f64)>>>> {
    let bounds = measure.bounds();
    let (k, alpha) = (measure.k(), measure.alpha());
    (0..clocks)
        .into_par_iter()
        .map(|c| {
            let mut cache: HashMap<(Region, Vec<i32>), Vec<(usize, f64)>> = HashMap::new();
            measure
                .states()
                .iter()
                .map(|state| {
                    let region = region_of(c, state);
                    let key = (region.clone(), masked(state.flat(), &region, state.n()));
                    if let Some(row) = cache.get(&key) {
                        return Ok(row.clone());
                    }
                    let law = region_law(bounds, k, state.flat(), &region, alpha, DEFAULT_WINDOW_CAP)?;
                    let row = law
                        .configs()
                        .iter()
                        .zip(law.probs())
                        .map(|(f, &p)| {
                            let b = measure
                                .index_of_flat(f)
                                .expect("window refills stay in the state space");
                            (b, p)
                        })
                        .collect::<Vec<_>>();
                    cache.insert(key, row.clone());
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect()
}

fn masked(flat: &[i32], region: &Region, n: usize) -> Vec<i32> {
    let w = n + 1;
    flat.iter()
        .enumerate()
        .map(|(at, &y)| {
            if region.is_free(at / w + 1, at % w) {
                i32::MIN
            } else {
                y
            }
        })
        .collect()
}

fn finish_block_chain(
    kind: BlockKind,
    measure: ExactMeasure,
    projectors: Vec<Vec<Vec<(usize, f64)>>>,
) -> Result<BlockChain> {
    let size = measure.len();
    let mut generator = DMatrix::zeros(size, size);
    for rows in &projectors {
        for (a, row) in rows.iter().enumerate() {
            for &(b, p) in row {
                if a != b {
                    generator[(a, b)] += p;
                }
            }
        }
    }
    Ok(BlockChain {
        kind,
        chain: ExactChain::from_generator(measure, generator)?,
        projectors,
    })
}

/// Family member of a gap sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrendKind {
    SingleFlip,
    Particle,
    Polymer,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapTrendRow {
    pub kind: TrendKind,
    pub n: usize,
    pub k: usize,
    pub h: i32,
    pub alpha: f64,
    /// `ℓ` or `s`; 0 for the single-flip chain.
    pub param: usize,
    pub states: usize,
    pub gap: f64,
}

impl GapTrendRow {
    pub fn meets_unit_gap(&self) -> bool {
        self.gap >= 1.0 - 1e-9
    }
}

/// Exact gaps over instances × parameters, in input order.
pub fn gap_trend_report(
    kind: TrendKind,
    family: &[(BoundaryPair, usize)],
    params: &[usize],
    alpha: f64,
    cap: usize,
) -> Result<Vec<GapTrendRow>> {
    let params: Vec<usize> = if kind == TrendKind::SingleFlip { vec![0] } else { params.to_vec() };
    let jobs: Vec<(usize, usize)> = (0..family.len())
        .flat_map(|f| params.iter().map(move |&p| (f, p)))
        .collect();
    jobs.into_par_iter()
        .map(|(f, param)| {
            let (bounds, k) = &family[f];
            let (chain, gap) = match kind {
                TrendKind::SingleFlip => {
                    let chain = crate::glauber::build_exact_chain_capped(bounds, *k, alpha, cap)?;
                    let gap = spectral_gap_exact(&chain)?;
                    (chain, gap)
                }
                TrendKind::Particle | TrendKind::Polymer => {
                    let bk = if kind == TrendKind::Particle {
                        BlockKind::Particle { ell: param }
                    } else {
                        BlockKind::Polymer { s: param }
                    };
                    let block = block_generator_exact(bk, bounds, *k, alpha, cap)?;
                    let gap = block.gap()?;
                    (block.chain, gap)
                }
            };
            Ok(GapTrendRow {
                kind,
                n: bounds.n(),
                k: *k,
                h: bounds.h(),
                alpha,
                param,
                states: chain.len(),
                gap,
            })
        })
        .collect()
}

/// Smallest parameter with `gap ≥ 1` for each `(n, k, h)` in the report.
pub fn smallest_unit_gap_param(rows: &[GapTrendRow]) -> Vec<((usize, usize, i32), Option<usize>)> {
    let mut out: Vec<((usize, usize, i32), Option<usize>)> = Vec::new();
    for r in rows {
        let key = (r.n, r.k, r.h);
        let hit = r.meets_unit_gap().then_some(r.param);
        match out.iter_mut().find(|(k, _)| *k == key) {
            Some((_, best)) => {
                if let Some(p) = hit {
                    *best = Some(best.map_or(p, |b| b.min(p)));
                }
            }
            None => out.push((key, hit)),
        }
    }
    out
}

/// Monte-Carlo estimate of `d/dt E[d(η(t), η'(t))]` at `t = 0⁺` for a pair
/// at unit base distance.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftEstimate {
    pub drift: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Distance of the starting pair.
    pub distance: f64,
    /// Clocks whose block contains the discrepancy (each removes it).
    pub covering_clocks: usize,
    /// Per neighbouring clock: label, mean change of the distance, standard error.
    pub neighbours: Vec<(usize, f64, f64)>,
    pub samples: usize,
    /// Fraction of first-step full matchings in the left neighbour block.
    pub match_rate: Option<f64>,
    /// Empirical `P(F_v)`, `v = 1, 2, …`: a mismatch `v` labels left of the discrepancy.
    pub failure_by_depth: Vec<f64>,
}

impl DriftEstimate {
    /// `drift / d`; contraction in the strong sense means `≤ −1`.
    pub fn relative(&self) -> f64 {
        self.drift / self.distance
    }

    fn coalesced(samples: usize) -> Self {
        Self {
            drift: 0.0,
            ci_low: 0.0,
            ci_high: 0.0,
            distance: 0.0,
            covering_clocks: 0,
            neighbours: Vec::new(),
            samples,
            match_rate: None,
            failure_by_depth: Vec::new(),
        }
    }
}

fn assemble(
    distance: f64,
    covering: usize,
    neighbours: Vec<(usize, Vec<f64>)>,
    samples: usize,
) -> DriftEstimate {
    let mut drift = -(covering as f64) * distance;
    let mut var = 0.0;
    let mut summary = Vec::new();
    for (clock, deltas) in neighbours {
        let (m, se) = mean_se(&deltas);
        drift += m;
        var += se * se;
        summary.push((clock, m, se));
    }
    let half = Z95 * var.sqrt();
    DriftEstimate {
        drift,
        ci_low: drift - half,
        ci_high: drift + half,
        distance,
        covering_clocks: covering,
        neighbours: summary,
        samples,
        match_rate: None,
        failure_by_depth: Vec::new(),
    }
}

/// Drift of `d_γ` under the coupled particle block dynamics.
///
/// Blocks containing the discrepancy see identical boundary data and are
/// coupled to agree. Blocks whose boundary labels avoid it also see
/// identical conditional laws and contribute nothing. The block just to the
/// right uses the independent coupling; the block just to the left uses the
/// recursive matching coupling: sample both copies independently, and as
/// soon as the rightmost sampled label matches on every polymer, copy the
/// remaining labels; otherwise drop that label and resample the rest.
#[allow(clippy::too_many_arguments)]
pub fn particle_contraction(
    bounds: &BoundaryPair,
    alpha: f64,
    ell: usize,
    gamma: f64,
    a: &PolymerConfig,
    b: &PolymerConfig,
    samples: usize,
    seed: u64,
) -> Result<DriftEstimate> {
    check_alpha(alpha)?;
    check_member(a, bounds)?;
    check_member(b, bounds)?;
    if a == b {
        return Ok(DriftEstimate::coalesced(samples));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let (pa, pb) = (a.to_particles(), b.to_particles());
    let k = a.k();
    let count = pa.count();
    let mut diffs = Vec::new();
    for j in 1..=k {
        for i in 1..=count {
            if pa.x(j, i) != pb.x(j, i) {
                diffs.push(i);
            }
        }
    }
    let [star] = diffs[..] else {
        return Err(Error::InvalidParameter(format!(
            "pair must differ in exactly one particle, found {}",
            diffs.len()
        )));
    };
    let d0 = particle_distance(&pa, &pb, gamma);
    let covering = (1..=count).filter(|&v| v.abs_diff(star) <= ell).count();
    let mut cache = LawCache::new(bounds, k, alpha);
    let mut neighbours = Vec::new();

    let right = star + ell + 1;
    if right <= count {
        let (first, last) = ParticleWindow { i: right, ell }.labels(count);
        let mut rng = replica_rng(seed, 1);
        let mut deltas = Vec::with_capacity(samples);
        for _ in 0..samples {
            let x = cache.sample(a, first, last, &mut rng)?;
            let y = cache.sample(b, first, last, &mut rng)?;
            deltas.push(particle_distance(&x.to_particles(), &y.to_particles(), gamma) - d0);
        }
        neighbours.push((right, deltas));
    }

    let mut match_rate = None;
    let mut failure_by_depth = Vec::new();
    if star > ell + 1 {
        let left = star - ell - 1;
        let (first, _) = ParticleWindow { i: left, ell }.labels(count);
        let depth = star - first;
        let mut failures = vec![0usize; depth];
        let mut matched_first = 0usize;
        let mut rng = replica_rng(seed, 2);
        let mut deltas = Vec::with_capacity(samples);
        for _ in 0..samples {
            let mut x = cache.sample(a, first, star - 1, &mut rng)?;
            let mut y = cache.sample(b, first, star - 1, &mut rng)?;
            let mut top = star - 1;
            loop {
                let (px, py) = (x.to_particles(), y.to_particles());
                let matched = (1..=k).all(|j| px.x(j, top) == py.x(j, top));
                if top == star - 1 && matched {
                    matched_first += 1;
                }
                if matched {
                    if top > first {
                        let region = particle_region(&x, first, top - 1, 1..=k);
                        y = copy_region(&y, &x, &region);
                    }
                    break;
                }
                if top == first {
                    break;
                }
                top -= 1;
                x = cache.sample(&x, first, top, &mut rng)?;
                y = cache.sample(&y, first, top, &mut rng)?;
            }
            let (px, py) = (x.to_particles(), y.to_particles());
            for v in 1..=depth {
                if (1..=k).any(|j| px.x(j, star - v) != py.x(j, star - v)) {
                    failures[v - 1] += 1;
                }
            }
            deltas.push(particle_distance(&px, &py, gamma) - d0);
        }
        match_rate = Some(matched_first as f64 / samples as f64);
        failure_by_depth = failures.iter().map(|&f| f as f64 / samples as f64).collect();
        neighbours.push((left, deltas));
    }

    let mut est = assemble(d0, covering, neighbours, samples);
    est.match_rate = match_rate;
    est.failure_by_depth = failure_by_depth;
    Ok(est)
}

fn copy_region(target: &PolymerConfig, source: &PolymerConfig, region: &Region) -> PolymerConfig {
    let w = target.n() + 1;
    let mut flat = target.flat().to_vec();
    for j in 1..=target.k() {
        if let Some((s, e)) = region.span(j) {
            let row = (j - 1) * w;
            flat[row + s..=row + e].copy_from_slice(&source.flat()[row + s..=row + e]);
        }
    }
    rebuild(target, flat)
}

/// Memoised particle-window laws keyed by the frozen data.
struct LawCache<'a> {
    bounds: &'a BoundaryPair,
    k: usize,
    alpha: f64,
    laws: HashMap<Vec<i32>, RegionLaw>,
}

impl<'a> LawCache<'a> {
    fn new(bounds: &'a BoundaryPair, k: usize, alpha: f64) -> Self {
        Self {
            bounds,
            k,
            alpha,
            laws: HashMap::new(),
        }
    }

    fn sample(&mut self, config: &PolymerConfig, first: usize, last: usize, rng: &mut SimRng) -> Result<PolymerConfig> {
        let region = particle_region(config, first, last, 1..=self.k);
        let mut key = masked(config.flat(), &region, config.n());
        key.push(first as i32);
        key.push(last as i32);
        if !self.laws.contains_key(&key) {
            let law = region_law(self.bounds, self.k, config.flat(), &region, self.alpha, DEFAULT_WINDOW_CAP)?;
            self.laws.insert(key.clone(), law);
        }
        let law = &self.laws[&key];
        let free = law.sample(rng);
        // the cached law may come from a configuration that differs outside
        // the region; keep this configuration's frozen part
        Ok(copy_region(config, &rebuild(config, free.to_vec()), &region))
    }
}

/// Drift of `D_ρ` under the coupled polymer-slab dynamics.
///
/// Slabs containing the discrepancy are coupled to agree; slabs whose
/// fixed neighbours avoid it contribute nothing. The two slabs bordering
/// the discrepant polymer are resampled with the monotone coupling given by
/// joint coupling from the past on shared clock rings.
#[allow(clippy::too_many_arguments)]
pub fn polymer_contraction(
    bounds: &BoundaryPair,
    alpha: f64,
    s: usize,
    rho: f64,
    a: &PolymerConfig,
    b: &PolymerConfig,
    samples: usize,
    seed: u64,
) -> Result<DriftEstimate> {
    check_alpha(alpha)?;
    check_member(a, bounds)?;
    check_member(b, bounds)?;
    if a == b {
        return Ok(DriftEstimate::coalesced(samples));
    }
    if samples < 2 {
        return Err(Error::InvalidParameter("need at least 2 samples".into()));
    }
    let (k, n) = (a.k(), a.n());
    let w = n + 1;
    let diffs: Vec<usize> = (0..a.flat().len()).filter(|&t| a.flat()[t] != b.flat()[t]).collect();
    let [site] = diffs[..] else {
        return Err(Error::InvalidParameter(format!(
            "pair must differ at exactly one height, found {}",
            diffs.len()
        )));
    };
    let (a, b) = if a.flat()[site] > b.flat()[site] { (a, b) } else { (b, a) };
    let star = site / w + 1;
    let d0 = height_distance(a.flat(), b.flat(), k, n, rho);
    let covering = (1..=k).filter(|&j| j.abs_diff(star) <= s).count();
    let mut neighbours = Vec::new();
    let mut clocks = Vec::new();
    if star + s < k {
        clocks.push(star + s + 1);
    }
    if star > s + 1 {
        clocks.push(star - s - 1);
    }
    for (tag, clock) in clocks.into_iter().enumerate() {
        let (lo, hi) = PolymerWindow { j: clock, s }.polymers(k);
        let outer = |c: &PolymerConfig, j: usize| -> Result<Path> {
            if j == 0 {
                Ok(bounds.xi().clone())
            } else if j == k + 1 {
                Ok(bounds.sigma().clone())
            } else {
                Ok(c.path(j))
            }
        };
        let pair_a = BoundaryPair::new(outer(a, lo - 1)?, outer(a, hi + 1)?)?;
        let pair_b = BoundaryPair::new(outer(b, lo - 1)?, outer(b, hi + 1)?)?;
        let pairs = [pair_a, pair_b];
        let slab_seed = seed ^ ((tag as u64 + 1) << 56);
        let deltas = (0..samples as u64)
            .into_par_iter()
            .map(|idx| -> Result<f64> {
                let joint = cftp_joint(&pairs, hi - lo + 1, alpha, slab_seed, idx, CFTP_EVENT_CAP)?;
                let x = splice(a, lo, &joint.states[0]);
                let y = splice(b, lo, &joint.states[1]);
                Ok(height_distance(x.flat(), y.flat(), k, n, rho) - d0)
            })
            .collect::<Result<Vec<_>>>()?;
        neighbours.push((clock, deltas));
    }
    Ok(assemble(d0, covering, neighbours, samples))
}

fn splice(base: &PolymerConfig, lo: usize, slab: &PolymerConfig) -> PolymerConfig {
    let w = base.n() + 1;
    let mut flat = base.flat().to_vec();
    let start = (lo - 1) * w;
    flat[start..start + slab.flat().len()].copy_from_slice(slab.flat());
    rebuild(base, flat)
}

/// Slack in the comparison inequalities, over random test functions.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    /// `min_f [Σ_j μ(var_{ν̂_j} f) − var_μ f]`.
    pub polymer_step: f64,
    /// `min_{f,j} [Σ_i μ(var_{ρ_i^{(j)}} f) − μ(var_{ν̂_j} f)]`.
    pub particle_step: f64,
    /// `min_{f,j,i} [c⁻¹ Σ_{u,x} μ(var_{u,x} f) − μ(var_{ρ_i^{(j)}} f)]`.
    pub single_site_step: f64,
    /// The constant `c` used in the last step (smallest relative gap).
    pub c: f64,
}

/// Checks the chain `var ≤ Σ_j ν̂_j-variances ≤ Σ_{j,i} ρ-variances ≤
/// c⁻¹ Σ single-site variances` on random functions. Each slack should be
/// non-negative whenever the block gaps at `(s, ℓ)` are at least 1.
pub fn comparison_check(
    bounds: &BoundaryPair,
    k: usize,
    alpha: f64,
    s: usize,
    ell: usize,
    functions: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    let slabs = block_generator_exact(BlockKind::Polymer { s }, bounds, k, alpha, DEFAULT_STATE_CAP)?;
    let measure = slabs.chain().measure().clone();
    let mu = measure.probabilities().to_vec();
    let size = measure.len();
    let n = bounds.n();
    let count = particle_count(n, bounds.h());

    // particle windows inside each slab, and the matching single-site chains
    let mut inner: Vec<Vec<Vec<Vec<(usize, f64)>>>> = Vec::new();
    let mut sites: Vec<Vec<Vec<Rows>>> = Vec::new();
    let mut c = f64::INFINITY;
    for j in 1..=k {
        let (lo, hi) = PolymerWindow { j, s }.polymers(k);
        let projectors = build_projectors(&measure, count, |i, state| {
            let (first, last) = ParticleWindow { i: i + 1, ell }.labels(count);
            particle_region(state, first, last, lo..=hi)
        })?;
        let mut per_window = Vec::new();
        for (i, proj) in projectors.iter().enumerate() {
            let (first, last) = ParticleWindow { i: i + 1, ell }.labels(count);
            let site_rows = single_site_rows(&measure, |state| particle_region(state, first, last, lo..=hi))?;
            c = c.min(relative_gap(&mu, proj, &site_rows)?);
            per_window.push(site_rows);
        }
        inner.push(projectors);
        sites.push(per_window);
    }

    let mut rng = replica_rng(seed, 0);
    let avg = |v: &[f64]| v.iter().zip(&mu).map(|(x, p)| x * p).sum::<f64>();
    let mut report = ComparisonReport {
        polymer_step: f64::INFINITY,
        particle_step: f64::INFINITY,
        single_site_step: f64::INFINITY,
        c,
    };
    for _ in 0..functions {
        let f: Vec<f64> = (0..size).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let var = slabs.chain().variance(&f);
        let mut slab_total = 0.0;
        for j in 0..k {
            let slab_var = avg(&slabs.conditional_variance(j, &f));
            slab_total += slab_var;
            let mut window_total = 0.0;
            for (i, proj) in inner[j].iter().enumerate() {
                let window_var = avg(&projector_variance(proj, &f));
                window_total += window_var;
                let site_total: f64 = sites[j][i].iter().map(|rows| avg(&projector_variance(rows, &f))).sum();
                report.single_site_step = report.single_site_step.min(site_total / c - window_var);
            }
            report.particle_step = report.particle_step.min(window_total - slab_var);
        }
        report.polymer_step = report.polymer_step.min(slab_total - var);
    }
    Ok(report)
}

/// Heat-bath projectors `P_{u,x}` of the single-site updates that stay
/// inside `region_of(state)`, one entry per site in use.
fn single_site_rows(
    measure: &ExactMeasure,
    region_of: impl Fn(&PolymerConfig) -> Region,
) -> Result<Vec<Vec<Vec<(usize, f64)>>>> {
    let (k, n) = (measure.k(), measure.bounds().n());
    let w = n + 1;
    let size = measure.len();
    let mut per_site: HashMap<(usize, usize), Vec<Vec<(usize, f64)>>> = HashMap::new();
    for (a, state) in measure.states().iter().enumerate() {
        let region = region_of(state);
        let chain = Chain::new(measure.bounds(), measure.alpha(), state)?;
        for u in 1..=k {
            let Some((s, e)) = region.span(u) else { continue };
            for x in s..=e {
                let rows = per_site
                    .entry((u, x))
                    .or_insert_with(|| (0..size).map(|b| vec![(b, 1.0)]).collect());
                let law = chain.law(u, x);
                let mut row = Vec::new();
                for (y, p) in [(law.low, 1.0 - law.p_high), (law.high, law.p_high)] {
                    if p == 0.0 || (law.low == law.high && !row.is_empty()) {
                        continue;
                    }
                    let mut flat = state.flat().to_vec();
                    flat[(u - 1) * w + x] = y;
                    let b = measure.index_of_flat(&flat).expect("single flips stay inside");
                    row.push((b, p));
                }
                rows[a] = row;
            }
        }
    }
    let mut keys: Vec<_> = per_site.keys().copied().collect();
    keys.sort_unstable();
    Ok(keys.into_iter().map(|key| per_site.remove(&key).unwrap()).collect())
}

/// `min_f Σ_{u,x} μ(var_{u,x} f) / μ(var_P f)` over `f` with `μ(var_P f) > 0`.
fn relative_gap(mu: &[f64], projector: &[Vec<(usize, f64)>], sites: &[Vec<Vec<(usize, f64)>>]) -> Result<f64> {
    let size = mu.len();
    let roots: Vec<f64> = mu.iter().map(|p| p.sqrt()).collect();
    let sym = |rows: &[Vec<(usize, f64)>]| {
        let mut m = DMatrix::zeros(size, size);
        for (a, row) in rows.iter().enumerate() {
            for &(b, p) in row {
                m[(a, b)] += p * roots[a] / roots[b];
            }
        }
        m
    };
    let identity = DMatrix::<f64>::identity(size, size);
    let p = sym(projector);
    let complement = &identity - &p;
    let mut dirichlet = DMatrix::zeros(size, size);
    for rows in sites {
        dirichlet += &identity - sym(rows);
    }
    // class-constant directions are pushed far above the relevant spectrum
    let penalty = 1e6;
    let a = &complement * &dirichlet * &complement + &p * penalty;
    let a = 0.5 * (&a + a.transpose());
    let eig = SymmetricEigen::new(a);
    let min = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min > 0.0) {
        return Err(Error::Numerical {
            what: "single-site chain does not connect a window class",
            residual: min,
        });
    }
    Ok(min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::exact_measure;
    use crate::stats::tv_distance;

    fn ext(n: usize) -> BoundaryPair {
        BoundaryPair::extremal(n, 0).unwrap()
    }

    #[test]
    fn full_region_law_is_the_measure() {
        let b = ext(4);
        let m = exact_measure(&b, 2, 1.0).unwrap();
        let top = PolymerConfig::replicate(b.xi(), 2).unwrap();
        let law = region_law(&b, 2, top.flat(), &slab_region(2, 4, 1, 2), 1.0, 1000).unwrap();
        assert_eq!(law.len(), m.len());
        for (f, p) in law.configs().iter().zip(law.probs()) {
            let i = m.index_of_flat(f).unwrap();
            assert!((m.probabilities()[i] - p).abs() < 1e-14);
        }
    }

    #[test]
    fn singleton_window_is_forced() {
        let b = ext(4);
        // particles {0, 1}: label 1 is squeezed between the left edge and label 2
        let config = PolymerConfig::from_text("++--").unwrap();
        let mut rng = replica_rng(0, 0);
        let out = resample_particle_block(&config, &b, ParticleWindow { i: 1, ell: 0 }, 1.0, &mut rng, 100).unwrap();
        assert_eq!(out, config);
    }

    #[test]
    fn squeezed_slab_is_forced() {
        let vee = Path::vee(6, 0).unwrap();
        let b = BoundaryPair::new(vee.clone(), vee.clone()).unwrap();
        let config = PolymerConfig::replicate(&vee, 3).unwrap();
        let mut rng = replica_rng(0, 0);
        let out = resample_polymer_block(&config, &b, PolymerWindow { j: 2, s: 0 }, 1.0, &mut rng, 100).unwrap();
        assert_eq!(out, config);
    }

    #[test]
    fn whole_system_blocks_have_gap_equal_to_clock_count() {
        let b = ext(4);
        let count = particle_count(4, 0);
        let g = block_generator_exact(BlockKind::Particle { ell: count }, &b, 2, 1.0, 1000).unwrap();
        assert!((g.gap().unwrap() - count as f64).abs() < 1e-10);
        let m = block_generator_exact(BlockKind::Polymer { s: 2 }, &b, 2, 1.0, 1000).unwrap();
        assert!((m.gap().unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn block_chains_are_reversible() {
        let b = ext(6);
        for kind in [
            BlockKind::Particle { ell: 0 },
            BlockKind::Particle { ell: 1 },
            BlockKind::Polymer { s: 0 },
            BlockKind::Crude { first: 1, last: 2 },
        ] {
            let chain = block_generator_exact(kind, &b, 2, 1.0, 1000).unwrap();
            assert!(chain.chain().detailed_balance_residual() < 1e-12, "{kind:?}");
            assert!(chain.gap().unwrap() > 0.0);
        }
    }

    #[test]
    fn particle_block_marginal_matches_conditional() {
        let b = ext(6);
        let k = 2;
        let m = exact_measure(&b, k, 0.7).unwrap();
        let start = m.states()[m.len() / 2].clone();
        let window = ParticleWindow { i: 2, ell: 0 };
        let region = particle_region(&start, 2, 2, 1..=k);
        let law = region_law(&b, k, start.flat(), &region, 0.7, 1000).unwrap();
        let mut rng = replica_rng(4, 0);
        let mut counts = vec![0.0; law.len()];
        let draws = 20_000;
        for _ in 0..draws {
            let out = resample_particle_block(&start, &b, window, 0.7, &mut rng, 1000).unwrap();
            let idx = law.configs().iter().position(|c| c == out.flat()).unwrap();
            counts[idx] += 1.0 / draws as f64;
        }
        assert!(tv_distance(&counts, law.probs()) < 0.02);
    }

    #[test]
    fn coalesced_pair_has_zero_drift() {
        let b = ext(8);
        let top = PolymerConfig::replicate(b.xi(), 1).unwrap();
        let d = particle_contraction(&b, 1.0, 2, 0.5, &top, &top, 10, 0).unwrap();
        assert_eq!(d.drift, 0.0);
        let d = polymer_contraction(&b, 1.0, 1, 0.5, &top, &top, 10, 0).unwrap();
        assert_eq!(d.drift, 0.0);
    }

    #[test]
    fn contraction_rejects_wide_discrepancies() {
        let b = ext(4);
        let top = PolymerConfig::replicate(b.xi(), 1).unwrap();
        let bottom = PolymerConfig::replicate(b.sigma(), 1).unwrap();
        assert!(polymer_contraction(&b, 1.0, 1, 0.5, &top, &bottom, 10, 0).is_err());
    }
}
