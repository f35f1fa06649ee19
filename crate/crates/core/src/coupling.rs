//! Grand coupling on shared clocks, coupling distances, coalescence-based
//! gap estimates, hitting times and coupling from the past.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use rayon::prelude::*;

use crate::equilibrium::{check_alpha, enumerate_states};
use crate::error::{Error, Result};
use crate::glauber::{Chain, DynamicsParams, Event, EventClock};
use crate::model::{BoundaryPair, PolymerConfig};
use crate::rng::replica_rng;
use crate::stats::{wilson, Z95};

/// Events a single CFTP epoch may replay.
pub const CFTP_EVENT_CAP: u64 = 1 << 30;
pub const PATH_METRIC_STATE_CAP: usize = 1_000;

/// Configurations evolving under one shared stream of clock rings.
#[derive(Debug, Clone)]
pub struct CoupledBundle {
    chains: Vec<Chain>,
    ordered: Vec<(usize, usize)>,
    clock: EventClock,
    pending: Option<Event>,
}

impl CoupledBundle {
    /// `stream` selects the replica stream of `seed`; stream 0 reproduces
    /// [`crate::glauber::simulate`] for a single member.
    pub fn new(members: &[(PolymerConfig, BoundaryPair)], alpha: f64, seed: u64, stream: u64) -> Result<Self> {
        check_alpha(alpha)?;
        let Some((first, _)) = members.first() else {
            return Err(Error::InvalidParameter("empty bundle".into()));
        };
        let dims = (first.k(), first.n(), first.h());
        let mut chains = Vec::with_capacity(members.len());
        for (config, bounds) in members {
            if (config.k(), config.n(), config.h()) != dims {
                return Err(Error::DimensionMismatch("bundle members differ in (k,n,h)".into()));
            }
            chains.push(Chain::new(bounds, alpha, config)?);
        }
        let mut ordered = Vec::new();
        for (a, (ca, ba)) in members.iter().enumerate() {
            for (b, (cb, bb)) in members.iter().enumerate() {
                if a != b
                    && ca.dominates(cb)?
                    && ba.xi().dominates(bb.xi())
                    && ba.sigma().dominates(bb.sigma())
                {
                    ordered.push((a, b));
                }
            }
        }
        Ok(Self {
            chains,
            ordered,
            clock: EventClock::new(replica_rng(seed, stream), dims.0, dims.1),
            pending: None,
        })
    }

    pub fn chains(&self) -> &[Chain] {
        &self.chains
    }

    pub fn members(&self) -> Vec<PolymerConfig> {
        self.chains.iter().map(Chain::state).collect()
    }

    /// Pairs `(a, b)` with member `a` above member `b` at construction.
    pub fn ordered_pairs(&self) -> &[(usize, usize)] {
        &self.ordered
    }

    pub fn coalesced(&self) -> bool {
        self.chains.windows(2).all(|w| w[0].polymers() == w[1].polymers())
    }

    fn apply(&mut self, e: &Event) {
        for c in &mut self.chains {
            c.apply(e);
        }
        debug_assert!(self
            .ordered
            .iter()
            .all(|&(a, b)| self.chains[a].height(e.i, e.x) >= self.chains[b].height(e.i, e.x)));
    }
}

/// Advances every member to time `horizon` with common events. Returns the
/// number of events applied.
pub fn evolve_coupled(bundle: &mut CoupledBundle, horizon: f64) -> u64 {
    evolve_until(bundle, horizon, |_| false).0
}

/// Like [`evolve_coupled`] but stops early once `stop` holds after an
/// event. Returns the event count and the stopping time, if any.
pub fn evolve_until(
    bundle: &mut CoupledBundle,
    horizon: f64,
    mut stop: impl FnMut(&CoupledBundle) -> bool,
) -> (u64, Option<f64>) {
    if bundle.clock.rate() == 0.0 {
        return (0, None);
    }
    let mut count = 0;
    loop {
        let e = bundle.pending.take().unwrap_or_else(|| bundle.clock.next_event());
        if e.time > horizon {
            bundle.pending = Some(e);
            return (count, None);
        }
        bundle.apply(&e);
        count += 1;
        if stop(bundle) {
            return (count, Some(e.time));
        }
    }
}

/// Which coupling distance to evaluate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DistanceSpec {
    /// `d_γ = Σ_{i,j} e^{−γ i} 1{x_i^{(j)} ≠ y_i^{(j)}}`.
    Particle { gamma: f64 },
    /// `D_ρ = Σ_j e^{−jρ} Σ_x |η_x^{(j)} − η'_x^{(j)}| / 2`.
    Height { rho: f64 },
}

impl DistanceSpec {
    pub fn particle_count() -> Self {
        Self::Particle { gamma: 0.0 }
    }

    pub fn height_l1() -> Self {
        Self::Height { rho: 0.0 }
    }

    /// The undecayed distance of the same kind.
    pub fn base(&self) -> Self {
        match self {
            Self::Particle { .. } => Self::particle_count(),
            Self::Height { .. } => Self::height_l1(),
        }
    }

    fn check(&self) -> Result<()> {
        let d = match self {
            Self::Particle { gamma } => *gamma,
            Self::Height { rho } => *rho,
        };
        if !(d >= 0.0) || !d.is_finite() {
            return Err(Error::InvalidParameter(format!("decay must be non-negative, got {d}")));
        }
        Ok(())
    }
}

pub fn distance(spec: &DistanceSpec, a: &PolymerConfig, b: &PolymerConfig) -> Result<f64> {
    spec.check()?;
    if (a.k(), a.n(), a.h()) != (b.k(), b.n(), b.h()) {
        return Err(Error::DimensionMismatch("configurations differ in (k,n,h)".into()));
    }
    Ok(distance_unchecked(spec, a, b))
}

fn distance_unchecked(spec: &DistanceSpec, a: &PolymerConfig, b: &PolymerConfig) -> f64 {
    match *spec {
        DistanceSpec::Particle { gamma } => {
            let (pa, pb) = (a.to_particles(), b.to_particles());
            particle_distance(&pa, &pb, gamma)
        }
        DistanceSpec::Height { rho } => height_distance(a.flat(), b.flat(), a.k(), a.n(), rho),
    }
}

pub(crate) fn particle_distance(
    a: &crate::model::ParticleConfig,
    b: &crate::model::ParticleConfig,
    gamma: f64,
) -> f64 {
    let mut total = 0.0;
    for j in 1..=a.k() {
        for (i, (x, y)) in a.polymer(j).iter().zip(b.polymer(j)).enumerate() {
            if x != y {
                total += (-gamma * (i + 1) as f64).exp();
            }
        }
    }
    total
}

pub(crate) fn height_distance(a: &[i32], b: &[i32], k: usize, n: usize, rho: f64) -> f64 {
    let w = n + 1;
    (0..k)
        .map(|j| {
            let diff: i64 = a[j * w..(j + 1) * w]
                .iter()
                .zip(&b[j * w..(j + 1) * w])
                .map(|(x, y)| (x - y).abs() as i64)
                .sum();
            (-((j + 1) as f64) * rho).exp() * diff as f64 / 2.0
        })
        .sum()
}

/// Shortest-path distances from `from` over the graph whose edges join
/// states at base distance 1, weighted by `spec`.
pub fn path_metric_distances(
    spec: &DistanceSpec,
    bounds: &BoundaryPair,
    k: usize,
    from: &PolymerConfig,
) -> Result<(Vec<PolymerConfig>, Vec<f64>)> {
    spec.check()?;
    let states = enumerate_states(bounds, k, PATH_METRIC_STATE_CAP)?;
    let start = states
        .iter()
        .position(|s| s == from)
        .ok_or_else(|| Error::InvalidConfig("start is not in the state space".into()))?;
    let base = spec.base();
    let size = states.len();
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); size];
    for a in 0..size {
        for b in a + 1..size {
            if (distance_unchecked(&base, &states[a], &states[b]) - 1.0).abs() < 1e-12 {
                let w = distance_unchecked(spec, &states[a], &states[b]);
                adj[a].push((b, w));
                adj[b].push((a, w));
            }
        }
    }
    let mut dist = vec![f64::INFINITY; size];
    dist[start] = 0.0;
    let mut heap = BinaryHeap::from([Reverse((OrdF64(0.0), start))]);
    while let Some(Reverse((OrdF64(d), u))) = heap.pop() {
        if d > dist[u] {
            continue;
        }
        for &(v, w) in &adj[u] {
            if d + w < dist[v] {
                dist[v] = d + w;
                heap.push(Reverse((OrdF64(d + w), v)));
            }
        }
    }
    Ok((states, dist))
}

/// True iff `distance(a, b)` equals the weighted shortest path between them.
pub fn path_metric_check(
    spec: &DistanceSpec,
    bounds: &BoundaryPair,
    k: usize,
    a: &PolymerConfig,
    b: &PolymerConfig,
) -> Result<bool> {
    let direct = distance(spec, a, b)?;
    let (states, dist) = path_metric_distances(spec, bounds, k, a)?;
    let target = states
        .iter()
        .position(|s| s == b)
        .ok_or_else(|| Error::InvalidConfig("target is not in the state space".into()))?;
    Ok((dist[target] - direct).abs() <= 1e-12 * direct.max(1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Statistical estimate of `−(1/t) log P(η(t) ≠ η'(t))` from the extremal
/// starts. A lower-bound estimate of the gap, not a proof.
#[derive(Debug, Clone, PartialEq)]
pub struct CouplingRate {
    pub rate: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub survivors: u64,
    pub replicas: u64,
    pub horizon: f64,
    /// No discrepancy survived; `rate` is then the value implied by the
    /// upper confidence limit of the survival probability.
    pub censored: bool,
}

pub fn gap_lower_bound_coupling(params: &DynamicsParams, replicas: u64) -> Result<CouplingRate> {
    params.validate()?;
    if replicas < 100 {
        return Err(Error::InvalidParameter(format!(
            "need at least 100 replicas, got {replicas}"
        )));
    }
    let t = params.horizon;
    if !(t > 0.0) {
        return Err(Error::InvalidParameter("horizon must be positive".into()));
    }
    let top = PolymerConfig::replicate(params.bounds.xi(), params.k)?;
    let bottom = PolymerConfig::replicate(params.bounds.sigma(), params.k)?;
    let members = [(top, params.bounds.clone()), (bottom, params.bounds.clone())];
    let survivors: u64 = (0..replicas)
        .into_par_iter()
        .map(|r| -> Result<u64> {
            let mut bundle = CoupledBundle::new(&members, params.alpha, params.seed, r)?;
            let (_, hit) = evolve_until(&mut bundle, t, CoupledBundle::coalesced);
            Ok(u64::from(hit.is_none() && !bundle.coalesced()))
        })
        .sum::<Result<u64>>()?;
    let (p_lo, p_hi) = wilson(survivors, replicas, Z95);
    let to_rate = |p: f64| if p > 0.0 { -p.ln() / t } else { f64::INFINITY };
    let censored = survivors == 0;
    let rate = if censored {
        to_rate(p_hi)
    } else {
        to_rate(survivors as f64 / replicas as f64)
    };
    Ok(CouplingRate {
        rate,
        ci_low: to_rate(p_hi),
        ci_high: to_rate(p_lo),
        survivors,
        replicas,
        horizon: t,
        censored,
    })
}

/// First time the chain started at `init` reaches the maximal
/// configuration `ξ̂`; `censored` if the horizon ran out first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HitTime {
    pub time: f64,
    pub censored: bool,
    pub events: u64,
}

pub fn hitting_time_max(params: &DynamicsParams, init: &PolymerConfig, stream: u64) -> Result<HitTime> {
    params.validate()?;
    let mut bundle = CoupledBundle::new(
        &[(init.clone(), params.bounds.clone())],
        params.alpha,
        params.seed,
        stream,
    )?;
    if bundle.chains[0].excess_volume() == 0 {
        return Ok(HitTime {
            time: 0.0,
            censored: false,
            events: 0,
        });
    }
    let (events, hit) = evolve_until(&mut bundle, params.horizon, |b| b.chains[0].excess_volume() == 0);
    Ok(match hit {
        Some(time) => HitTime {
            time,
            censored: false,
            events,
        },
        None => HitTime {
            time: params.horizon,
            censored: true,
            events,
        },
    })
}

/// Result of one coupling-from-the-past run.
#[derive(Debug, Clone, PartialEq)]
pub struct CftpOutcome {
    pub state: PolymerConfig,
    /// Start time `−T` of the coalescing epoch.
    pub window: f64,
    pub events: u64,
}

/// Exact sample from `μ^{ξ,σ}` (sample index 0 of `params.seed`).
pub fn cftp_sample(params: &DynamicsParams) -> Result<PolymerConfig> {
    Ok(cftp_sample_indexed(params, 0)?.state)
}

/// Coupling from the past with doubling epochs. Epoch `b` covers
/// `(−2^b, −2^{b−1}]` (epoch 0 covers `(−1, 0]`); its events are drawn once
/// from their own stream and replayed by every longer run.
pub fn cftp_sample_indexed(params: &DynamicsParams, index: u64) -> Result<CftpOutcome> {
    cftp_sample_capped(params, index, CFTP_EVENT_CAP)
}

pub fn cftp_sample_capped(params: &DynamicsParams, index: u64, cap: u64) -> Result<CftpOutcome> {
    let joint = cftp_joint(
        std::slice::from_ref(&params.bounds),
        params.k,
        params.alpha,
        params.seed,
        index,
        cap,
    )?;
    Ok(CftpOutcome {
        state: joint.states.into_iter().next().unwrap(),
        window: joint.window,
        events: joint.events,
    })
}

/// Samples from several boundary pairs at once under the same clock rings.
#[derive(Debug, Clone, PartialEq)]
pub struct JointCftp {
    pub states: Vec<PolymerConfig>,
    pub window: f64,
    pub events: u64,
}

/// Coupling from the past run simultaneously for every boundary pair on
/// one shared event stream. Each output is an exact sample of its own
/// measure; ordered boundary pairs give ordered outputs.
pub fn cftp_joint(
    bounds: &[BoundaryPair],
    k: usize,
    alpha: f64,
    seed: u64,
    index: u64,
    cap: u64,
) -> Result<JointCftp> {
    check_alpha(alpha)?;
    let Some(first) = bounds.first() else {
        return Err(Error::InvalidParameter("no boundary pairs".into()));
    };
    let (n, h) = (first.n(), first.h());
    if bounds.iter().any(|b| b.n() != n || b.h() != h) {
        return Err(Error::DimensionMismatch("boundary pairs differ in (n,h)".into()));
    }
    let extremes = bounds
        .iter()
        .map(|b| {
            Ok((
                PolymerConfig::replicate(b.xi(), k)?,
                PolymerConfig::replicate(b.sigma(), k)?,
            ))
        })
        .collect::<Result<Vec<_>>>()?;
    let sites = k * n.saturating_sub(1);
    if sites == 0 || extremes.iter().all(|(t, b)| t == b) {
        return Ok(JointCftp {
            states: extremes.into_iter().map(|(t, _)| t).collect(),
            window: 0.0,
            events: 0,
        });
    }
    let wait = Exp::new(sites as f64).expect("positive rate");
    let mut epochs: Vec<Vec<Event>> = Vec::new();
    for b in 0..64u32 {
        let (start, end) = if b == 0 {
            (-1.0, 0.0)
        } else {
            (-(2f64.powi(b as i32)), -(2f64.powi(b as i32 - 1)))
        };
        let mut rng = replica_rng(seed, (index << 8) | b as u64);
        let mut events = Vec::new();
        let mut t = start;
        loop {
            t += wait.sample(&mut rng);
            if t > end {
                break;
            }
            let i = rng.random_range(1..=k);
            let x = rng.random_range(1..n);
            events.push(Event {
                time: t,
                i,
                x,
                u: rng.random(),
            });
        }
        epochs.push(events);
        let total: u64 = epochs.iter().map(|e| e.len() as u64).sum();
        if total > cap {
            return Err(Error::CapExceeded {
                what: "CFTP events",
                count: total as usize,
                cap: cap as usize,
            });
        }
        let mut sandwiches = bounds
            .iter()
            .zip(&extremes)
            .map(|(bp, (top, bottom))| {
                Ok((Chain::new(bp, alpha, top)?, Chain::new(bp, alpha, bottom)?))
            })
            .collect::<Result<Vec<_>>>()?;
        for e in epochs.iter().rev().flatten() {
            for (hi, lo) in &mut sandwiches {
                hi.apply(e);
                lo.apply(e);
                debug_assert!(hi.height(e.i, e.x) >= lo.height(e.i, e.x));
            }
        }
        if sandwiches.iter().all(|(hi, lo)| hi.polymers() == lo.polymers()) {
            return Ok(JointCftp {
                states: sandwiches.iter().map(|(hi, _)| hi.state()).collect(),
                window: -start,
                events: total,
            });
        }
    }
    Err(Error::CapExceeded {
        what: "CFTP epochs",
        count: 64,
        cap: 64,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glauber::{law_from, simulate};
    use crate::model::Path;

    fn square(m: usize) -> BoundaryPair {
        BoundaryPair::extremal(2 * m, 0).unwrap()
    }

    #[test]
    fn single_member_matches_simulate() {
        let bounds = square(2);
        let init = PolymerConfig::replicate(bounds.sigma(), 2).unwrap();
        let params = DynamicsParams {
            alpha: 0.8,
            bounds: bounds.clone(),
            k: 2,
            seed: 11,
            horizon: 7.5,
        };
        let solo = simulate(&params, &init, false).unwrap();
        let mut bundle = CoupledBundle::new(&[(init, bounds)], 0.8, 11, 0).unwrap();
        let events = evolve_coupled(&mut bundle, 7.5);
        assert_eq!(events, solo.events);
        assert_eq!(bundle.members()[0], solo.final_state);
    }

    #[test]
    fn extremal_starts_stay_ordered() {
        let bounds = square(2);
        let top = PolymerConfig::replicate(bounds.xi(), 2).unwrap();
        let bottom = PolymerConfig::replicate(bounds.sigma(), 2).unwrap();
        let mut bundle = CoupledBundle::new(&[(top, bounds.clone()), (bottom, bounds)], 1.0, 5, 0).unwrap();
        let mut steps = 0;
        evolve_until(&mut bundle, f64::INFINITY, |b| {
            steps += 1;
            assert!(b.chains()[0].dominates(&b.chains()[1]));
            steps >= 10_000
        });
    }

    #[test]
    fn lower_ceiling_stays_below() {
        let bounds = square(2);
        let vee = Path::vee(4, 0).unwrap();
        let pinned = BoundaryPair::new(vee.clone(), vee.clone()).unwrap();
        let top = PolymerConfig::replicate(bounds.xi(), 2).unwrap();
        let low = PolymerConfig::replicate(&vee, 2).unwrap();
        let mut bundle = CoupledBundle::new(&[(top, bounds), (low, pinned)], 1.0, 2, 0).unwrap();
        assert_eq!(bundle.ordered_pairs(), &[(0, 1)]);
        evolve_coupled(&mut bundle, 500.0);
        assert!(bundle.chains()[0].dominates(&bundle.chains()[1]));
    }

    #[test]
    fn update_map_is_monotone_exhaustively() {
        // every admissible neighbourhood (left, right, above, below) in a small box
        let mut local = Vec::new();
        for l in -3i32..=3 {
            for r in [l - 2, l, l + 2] {
                for above in -4..=4 {
                    for below in -4..=above {
                        // heights at one site share a parity
                        if (above - l).rem_euclid(2) != 1 || (below - l).rem_euclid(2) != 1 {
                            continue;
                        }
                        let admissible = |y: i32| {
                            (y - l).abs() == 1 && (y - r).abs() == 1 && y <= above && y >= below
                        };
                        if (l - 1..=l + 1).any(admissible) {
                            local.push((l, r, above, below));
                        }
                    }
                }
            }
        }
        let us = [0.0, 0.2, 0.5, 0.69, 0.7, 0.71, 0.99];
        for &(l, r, a, b) in &local {
            let hi = law_from(l, r, a, b, i32::MIN, i32::MAX, 0.7);
            for &(l2, r2, a2, b2) in &local {
                if l2 > l || r2 > r || a2 > a || b2 > b || (l - l2) % 2 != 0 {
                    continue;
                }
                let lo = law_from(l2, r2, a2, b2, i32::MIN, i32::MAX, 0.7);
                for &u in &us {
                    assert!(hi.sample(u) >= lo.sample(u), "{:?} vs {:?} u={u}", (l, r, a, b), (l2, r2, a2, b2));
                }
            }
        }
    }

    #[test]
    fn distance_examples() {
        let a = PolymerConfig::from_text("+-+-").unwrap();
        let b = PolymerConfig::from_text("+--+").unwrap();
        let gamma = 0.5;
        let d = distance(&DistanceSpec::Particle { gamma }, &a, &b).unwrap();
        assert!((d - (-2.0 * gamma).exp()).abs() < 1e-15);
        let rho = 0.3;
        let d = distance(&DistanceSpec::Height { rho }, &a, &b).unwrap();
        assert!((d - (-rho).exp()).abs() < 1e-15);
        assert_eq!(distance(&DistanceSpec::Height { rho }, &a, &a).unwrap(), 0.0);
        assert!(distance(&DistanceSpec::Height { rho: -1.0 }, &a, &b).is_err());
    }

    #[test]
    fn path_metric_examples() {
        let b4 = BoundaryPair::extremal(4, 0).unwrap();
        let top = PolymerConfig::replicate(b4.xi(), 1).unwrap();
        let bottom = PolymerConfig::replicate(b4.sigma(), 1).unwrap();
        let spec = DistanceSpec::Particle { gamma: 0.5 };
        assert!(path_metric_check(&spec, &b4, 1, &top, &bottom).unwrap());
    }

    #[test]
    fn coupling_rate_needs_replicas() {
        let params = DynamicsParams {
            alpha: 1.0,
            bounds: square(1),
            k: 1,
            seed: 0,
            horizon: 1.0,
        };
        assert!(gap_lower_bound_coupling(&params, 0).is_err());
    }

    #[test]
    fn hitting_from_maximum_is_zero() {
        let bounds = square(2);
        let top = PolymerConfig::replicate(bounds.xi(), 2).unwrap();
        let params = DynamicsParams {
            alpha: 1.0,
            bounds,
            k: 2,
            seed: 0,
            horizon: 10.0,
        };
        let h = hitting_time_max(&params, &top, 0).unwrap();
        assert_eq!(h.time, 0.0);
        assert!(!h.censored);
    }

    #[test]
    fn cftp_is_deterministic_and_capped() {
        let params = DynamicsParams {
            alpha: 1.0,
            bounds: square(2),
            k: 2,
            seed: 42,
            horizon: 0.0,
        };
        assert_eq!(cftp_sample(&params).unwrap(), cftp_sample(&params).unwrap());
        assert!(matches!(
            cftp_sample_capped(&params, 0, 3),
            Err(Error::CapExceeded { .. })
        ));
    }
}
