//! Exact equilibrium quantities on enumerable instances, plane-partition
//! volume counts, and stochastic-domination checks.

use std::collections::HashMap;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{BoundaryPair, Path, PolymerConfig};
use crate::rng::replica_rng;

pub const DEFAULT_STATE_CAP: usize = 1_000_000;
pub const DEFAULT_VOLUME_CAP: usize = 5_000;
/// Above this many states the domination check falls back to sampling.
pub const DOMINATION_EXACT_CAP: usize = 1_000;

/// All configurations of `E_{ξ,σ}` with `k` polymers, in ASCII-lexicographic
/// order of their increment strings (`+` before `-`, polymer 1 first).
pub fn enumerate_states(bounds: &BoundaryPair, k: usize, cap: usize) -> Result<Vec<PolymerConfig>> {
    let n = bounds.n();
    if k == 0 {
        return Err(Error::Degenerate { k, n });
    }
    let mut e = Enumerator {
        k,
        n,
        xi: bounds.xi().heights(),
        sigma: bounds.sigma().heights(),
        buf: vec![0; k * (n + 1)],
        out: Vec::new(),
        cap,
        overflow: false,
    };
    e.descend(0, 0);
    if e.overflow {
        return Err(Error::CapExceeded {
            what: "states",
            count: cap + 1,
            cap,
        });
    }
    let h = bounds.h();
    Ok(e.out
        .into_iter()
        .map(|flat| PolymerConfig::from_flat_unchecked(k, n, h, flat))
        .collect())
}

struct Enumerator<'a> {
    k: usize,
    n: usize,
    xi: &'a [i32],
    sigma: &'a [i32],
    buf: Vec<i32>,
    out: Vec<Vec<i32>>,
    cap: usize,
    overflow: bool,
}

impl Enumerator<'_> {
    /// Extends polymer `j` (0-based) past site `x`.
    fn descend(&mut self, j: usize, x: usize) {
        if self.overflow {
            return;
        }
        let w = self.n + 1;
        if x == self.n {
            if j + 1 == self.k {
                if self.out.len() == self.cap {
                    self.overflow = true;
                    return;
                }
                self.out.push(self.buf.clone());
            } else {
                self.buf[(j + 1) * w] = 0;
                self.descend(j + 1, 0);
            }
            return;
        }
        let y = self.buf[j * w + x];
        let upper = if j == 0 {
            self.xi[x + 1]
        } else {
            self.buf[(j - 1) * w + x + 1]
        };
        let lower = self.sigma[x + 1];
        for next in [y + 1, y - 1] {
            if next <= upper && next >= lower {
                self.buf[j * w + x + 1] = next;
                self.descend(j, x + 1);
            }
        }
    }
}

/// The conditioned measure `μ^{ξ,σ}` on an enumerated state space, with
/// weights `exp(−2α V^ξ)` kept in the log domain.
#[derive(Debug, Clone)]
pub struct ExactMeasure {
    bounds: BoundaryPair,
    k: usize,
    alpha: f64,
    states: Vec<PolymerConfig>,
    volumes: Vec<u64>,
    log_weights: Vec<f64>,
    log_z: f64,
    probs: Vec<f64>,
    index: HashMap<Vec<i32>, usize>,
}

pub fn exact_measure(bounds: &BoundaryPair, k: usize, alpha: f64) -> Result<ExactMeasure> {
    exact_measure_capped(bounds, k, alpha, DEFAULT_STATE_CAP)
}

pub fn exact_measure_capped(
    bounds: &BoundaryPair,
    k: usize,
    alpha: f64,
    cap: usize,
) -> Result<ExactMeasure> {
    check_alpha(alpha)?;
    let states = enumerate_states(bounds, k, cap)?;
    ExactMeasure::from_states(bounds.clone(), k, alpha, states)
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "alpha must be positive and finite, got {alpha}"
        )));
    }
    Ok(())
}

impl ExactMeasure {
    pub(crate) fn from_states(
        bounds: BoundaryPair,
        k: usize,
        alpha: f64,
        states: Vec<PolymerConfig>,
    ) -> Result<Self> {
        let volumes = states
            .iter()
            .map(|s| s.excess_volume(bounds.xi()))
            .collect::<Result<Vec<_>>>()?;
        let log_weights: Vec<f64> = volumes.iter().map(|&v| -2.0 * alpha * v as f64).collect();
        let log_z = log_sum_exp(&log_weights);
        let probs = log_weights.iter().map(|lw| (lw - log_z).exp()).collect();
        let index = states
            .iter()
            .enumerate()
            .map(|(i, s)| (s.flat().to_vec(), i))
            .collect();
        Ok(Self {
            bounds,
            k,
            alpha,
            states,
            volumes,
            log_weights,
            log_z,
            probs,
            index,
        })
    }

    pub fn bounds(&self) -> &BoundaryPair {
        &self.bounds
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[PolymerConfig] {
        &self.states
    }

    pub fn volumes(&self) -> &[u64] {
        &self.volumes
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn weights(&self) -> Vec<f64> {
        self.log_weights.iter().map(|w| w.exp()).collect()
    }

    /// `log Ẑ_{ξ,σ}`.
    pub fn log_z(&self) -> f64 {
        self.log_z
    }

    pub fn z_hat(&self) -> f64 {
        self.log_z.exp()
    }

    pub fn index_of(&self, state: &PolymerConfig) -> Option<usize> {
        self.index.get(state.flat()).copied()
    }

    pub(crate) fn index_of_flat(&self, flat: &[i32]) -> Option<usize> {
        self.index.get(flat).copied()
    }

    pub fn prob_of(&self, state: &PolymerConfig) -> f64 {
        self.index_of(state).map_or(0.0, |i| self.probs[i])
    }

    /// Index of the maximal configuration `ξ̂`.
    pub fn top_index(&self) -> usize {
        // Lexicographic order with '+' first puts the maximal state first
        // only when it is the ceiling; look it up instead.
        let top = PolymerConfig::replicate(self.bounds.xi(), self.k).unwrap();
        self.index_of(&top).expect("ceiling configuration is always a state")
    }

    pub fn bottom_index(&self) -> usize {
        let bottom = PolymerConfig::replicate(self.bounds.sigma(), self.k).unwrap();
        self.index_of(&bottom).expect("floor configuration is always a state")
    }

    /// Expectation of a function of the state index.
    pub fn expect(&self, f: impl Fn(usize) -> f64) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| p * f(i)).sum()
    }

    pub fn mean_volume(&self) -> f64 {
        self.expect(|i| self.volumes[i] as f64)
    }

    /// Unnormalised log weight `α Σ_{j,x} η_x^{(j)}` of the unconditioned
    /// measure on paths.
    pub fn unconditioned_log_weight(&self, state: &PolymerConfig) -> f64 {
        self.alpha * state.flat().iter().map(|&y| y as f64).sum::<f64>()
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Exact counts `N(v)` of (unboxed) plane partitions of volume `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeCountTable {
    counts: Vec<BigUint>,
}

impl VolumeCountTable {
    pub fn max_v(&self) -> usize {
        self.counts.len() - 1
    }

    pub fn get(&self, v: usize) -> &BigUint {
        &self.counts[v]
    }

    pub fn counts(&self) -> &[BigUint] {
        &self.counts
    }

    pub fn ln_count(&self, v: usize) -> f64 {
        ln_big(&self.counts[v])
    }
}

fn ln_big(x: &BigUint) -> f64 {
    match x.to_f64() {
        Some(f) if f.is_finite() => f.ln(),
        _ => {
            let bits = x.bits();
            let shift = bits.saturating_sub(60);
            let top = (x >> shift).to_f64().unwrap();
            top.ln() + shift as f64 * std::f64::consts::LN_2
        }
    }
}

/// Expands `∏_{m≥1} (1 − q^m)^{−m}` through the recurrence
/// `v N(v) = Σ_{j=1}^{v} σ₂(j) N(v−j)`, `σ₂(j) = Σ_{d | j} d²`.
pub fn count_by_volume(max_v: usize, cap: usize) -> Result<VolumeCountTable> {
    if max_v > cap {
        return Err(Error::CapExceeded {
            what: "max volume",
            count: max_v,
            cap,
        });
    }
    let mut sigma2 = vec![0u64; max_v + 1];
    for d in 1..=max_v {
        for multiple in (d..=max_v).step_by(d) {
            sigma2[multiple] += (d * d) as u64;
        }
    }
    let mut counts: Vec<BigUint> = Vec::with_capacity(max_v + 1);
    counts.push(BigUint::one());
    for v in 1..=max_v {
        let mut acc = BigUint::zero();
        for j in 1..=v {
            acc += &counts[v - j] * sigma2[j];
        }
        let (q, r) = (&acc / v as u64, &acc % v as u64);
        debug_assert!(r.is_zero(), "recurrence must divide exactly");
        counts.push(q);
    }
    Ok(VolumeCountTable { counts })
}

/// Direct enumeration of plane partitions by volume, as stacks of
/// partitions `λ¹ ⊇ λ² ⊇ …` read row by row. Only for small volumes.
pub fn count_by_enumeration(max_v: usize) -> Vec<u64> {
    fn rows(prev: &[usize], remaining: usize, max_v: usize, used: usize, counts: &mut [u64]) {
        counts[used] += 1;
        if remaining == 0 {
            return;
        }
        // next row: a partition fitting under `prev` entrywise, non-empty
        let mut row = Vec::new();
        next_row(prev, &mut row, remaining, max_v, used, counts);
    }
    fn next_row(
        prev: &[usize],
        row: &mut Vec<usize>,
        remaining: usize,
        max_v: usize,
        used: usize,
        counts: &mut [u64],
    ) {
        let col = row.len();
        if col > 0 {
            let sum: usize = row.iter().sum();
            rows(row, remaining - sum, max_v, used + sum, counts);
        }
        if col == prev.len() {
            return;
        }
        let sum: usize = row.iter().sum();
        let cap = prev[col].min(row.last().copied().unwrap_or(usize::MAX));
        for part in 1..=cap.min(remaining - sum) {
            row.push(part);
            next_row(prev, row, remaining, max_v, used, counts);
            row.pop();
        }
    }
    let mut counts = vec![0u64; max_v + 1];
    // the first row is bounded only by the volume
    let unbounded = vec![max_v; max_v];
    rows(&unbounded, max_v, max_v, 0, &mut counts);
    counts
}

/// Exact `P(V^∧ ≥ i)` for `i = 0..=max V`. Requires ceiling `∧` and `h = 0`.
pub fn tail_excess_volume(measure: &ExactMeasure) -> Result<Vec<(u64, f64)>> {
    let b = measure.bounds();
    if b.h() != 0 || b.xi() != &Path::wedge(b.n(), 0)? {
        return Err(Error::InvalidParameter(
            "excess-volume tails need h = 0 and ceiling = wedge".into(),
        ));
    }
    Ok(volume_tail(measure))
}

pub(crate) fn volume_tail(measure: &ExactMeasure) -> Vec<(u64, f64)> {
    let max_v = measure.volumes().iter().copied().max().unwrap_or(0);
    let mut mass = vec![0.0; max_v as usize + 1];
    for (&v, &p) in measure.volumes().iter().zip(measure.probabilities()) {
        mass[v as usize] += p;
    }
    let mut tail = vec![0.0; mass.len()];
    let mut acc = 0.0;
    for v in (0..mass.len()).rev() {
        acc += mass[v];
        tail[v] = acc;
    }
    tail[0] = 1.0;
    tail.into_iter()
        .enumerate()
        .map(|(i, p)| (i as u64, p.min(1.0)))
        .collect()
}

/// `Σ_{v≥i} e^{−2αv} N(v) / Σ_{v≥0} e^{−2αv} N(v)` for every `i` in the
/// table. Fails if the table is too short for the series to have converged.
pub fn volume_tail_bound(alpha: f64, table: &VolumeCountTable) -> Result<Vec<f64>> {
    check_alpha(alpha)?;
    let terms: Vec<f64> = (0..=table.max_v())
        .map(|v| table.ln_count(v) - 2.0 * alpha * v as f64)
        .collect();
    let log_total = log_sum_exp(&terms);
    let last = *terms.last().unwrap();
    if last - log_total > -40.0 || (terms.len() > 1 && terms[terms.len() - 2] < last) {
        return Err(Error::InvalidParameter(format!(
            "volume table up to {} is too short for alpha={alpha}",
            table.max_v()
        )));
    }
    let mut out = vec![0.0; terms.len()];
    let mut acc = f64::NEG_INFINITY;
    for v in (0..terms.len()).rev() {
        acc = log_add(acc, terms[v]);
        out[v] = (acc - log_total).exp().min(1.0);
    }
    Ok(out)
}

fn log_add(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `P(η_x^{(j)} ≠ ξ_x)`.
pub fn sticking_probability(measure: &ExactMeasure, j: usize, x: usize) -> Result<f64> {
    let n = measure.bounds().n();
    if j == 0 || j > measure.k() || x > n {
        return Err(Error::InvalidParameter(format!(
            "polymer {j} / site {x} out of range (k={}, n={n})",
            measure.k()
        )));
    }
    let xi = measure.bounds().xi().get(x);
    Ok(measure
        .states()
        .iter()
        .zip(measure.probabilities())
        .filter(|(s, _)| s.height(j, x) != xi)
        .map(|(_, p)| p)
        .sum())
}

/// `P(η_x^{(k)} ≠ ξ_x for all a ≤ x ≤ b)`, with `0 < a ≤ b < n`.
pub fn detachment_run_probability(measure: &ExactMeasure, a: usize, b: usize) -> Result<f64> {
    let n = measure.bounds().n();
    if a == 0 || a > b || b >= n {
        return Err(Error::InvalidParameter(format!(
            "window [{a}, {b}] must satisfy 0 < a <= b < n = {n}"
        )));
    }
    let k = measure.k();
    let xi = measure.bounds().xi().heights();
    Ok(measure
        .states()
        .iter()
        .zip(measure.probabilities())
        .filter(|(s, _)| (a..=b).all(|x| s.height(k, x) != xi[x]))
        .map(|(_, p)| p)
        .sum())
}

/// Outcome of a stochastic-domination check.
#[derive(Debug, Clone, PartialEq)]
pub enum Domination {
    /// Decided exactly: `μ_A(U) ≥ μ_B(U)` for every up-set `U`.
    Holds,
    /// An up-set with `μ_A(U) < μ_B(U)`; `deficit = μ_B(U) − μ_A(U)`.
    Fails { upset_size: usize, deficit: f64 },
    /// Sampled up-sets found no counterexample; not a proof.
    NotFalsified { checked: usize },
}

impl Domination {
    pub fn holds(&self) -> bool {
        matches!(self, Domination::Holds)
    }
}

const DOMINATION_TOL: f64 = 1e-12;

/// Decides whether `a` stochastically dominates `b`.
///
/// Up to [`DOMINATION_EXACT_CAP`] states in the union of the supports, the
/// worst up-set is found exactly as a minimum-weight closure (one max-flow),
/// which ranges over every increasing indicator at once. Larger instances
/// are probed with principal and random up-sets.
pub fn check_stochastic_domination(a: &ExactMeasure, b: &ExactMeasure, seed: u64) -> Result<Domination> {
    let (ba, bb) = (a.bounds(), b.bounds());
    if (a.k(), ba.n(), ba.h()) != (b.k(), bb.n(), bb.h()) {
        return Err(Error::DimensionMismatch("measures live on different spaces".into()));
    }
    if !ba.xi().dominates(bb.xi()) || !ba.sigma().dominates(bb.sigma()) {
        return Err(Error::InvalidParameter(
            "boundaries must be ordered: xi_A >= xi_B and sigma_A >= sigma_B".into(),
        ));
    }

    let mut union: Vec<&PolymerConfig> = a.states().iter().collect();
    for s in b.states() {
        if a.index_of(s).is_none() {
            union.push(s);
        }
    }
    let weight: Vec<f64> = union.iter().map(|s| a.prob_of(s) - b.prob_of(s)).collect();
    let n = union.len();
    let le = |i: usize, j: usize| union[j].flat().iter().zip(union[i].flat()).all(|(x, y)| x >= y);

    if n <= DOMINATION_EXACT_CAP {
        // maximise Σ_{U} c over up-closed U with c = −weight
        let (source, sink) = (n, n + 1);
        let mut flow = MaxFlow::new(n + 2);
        let mut positive = 0.0;
        for (i, &w) in weight.iter().enumerate() {
            let c = -w;
            if c > 0.0 {
                flow.add_edge(source, i, c);
                positive += c;
            } else if c < 0.0 {
                flow.add_edge(i, sink, -c);
            }
        }
        for i in 0..n {
            for j in 0..n {
                if i != j && le(i, j) {
                    flow.add_edge(i, j, f64::INFINITY);
                }
            }
        }
        let cut = flow.run(source, sink);
        let best = positive - cut;
        if best <= DOMINATION_TOL {
            return Ok(Domination::Holds);
        }
        let upset: Vec<usize> = flow.source_side(source).into_iter().filter(|&v| v < n).collect();
        return Ok(Domination::Fails {
            upset_size: upset.len(),
            deficit: -upset.iter().map(|&i| weight[i]).sum::<f64>(),
        });
    }

    let mut rng = replica_rng(seed, 0);
    let mut checked = 0;
    let probe = |members: &[usize]| -> Option<Domination> {
        let inside: Vec<usize> = (0..n).filter(|&j| members.iter().any(|&i| le(i, j))).collect();
        let total: f64 = inside.iter().map(|&j| weight[j]).sum();
        if total < -DOMINATION_TOL {
            return Some(Domination::Fails {
                upset_size: inside.len(),
                deficit: -total,
            });
        }
        None
    };
    for i in 0..n {
        checked += 1;
        if let Some(f) = probe(&[i]) {
            return Ok(f);
        }
    }
    for _ in 0..n {
        let size = rng.random_range(2..=4usize);
        let members: Vec<usize> = (0..size).map(|_| rng.random_range(0..n)).collect();
        checked += 1;
        if let Some(f) = probe(&members) {
            return Ok(f);
        }
    }
    Ok(Domination::NotFalsified { checked })
}

/// Dinic max-flow on real capacities.
struct MaxFlow {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<f64>,
    level: Vec<i32>,
    iter: Vec<usize>,
}

const FLOW_EPS: f64 = 1e-15;

impl MaxFlow {
    fn new(nodes: usize) -> Self {
        Self {
            adj: vec![Vec::new(); nodes],
            to: Vec::new(),
            cap: Vec::new(),
            level: vec![0; nodes],
            iter: vec![0; nodes],
        }
    }

    fn add_edge(&mut self, u: usize, v: usize, c: f64) {
        self.adj[u].push(self.to.len());
        self.to.push(v);
        self.cap.push(c);
        self.adj[v].push(self.to.len());
        self.to.push(u);
        self.cap.push(0.0);
    }

    fn bfs(&mut self, s: usize) {
        self.level.iter_mut().for_each(|l| *l = -1);
        self.level[s] = 0;
        let mut queue = std::collections::VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for &e in &self.adj[u] {
                let v = self.to[e];
                if self.cap[e] > FLOW_EPS && self.level[v] < 0 {
                    self.level[v] = self.level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
    }

    fn dfs(&mut self, u: usize, t: usize, pushed: f64) -> f64 {
        if u == t {
            return pushed;
        }
        while self.iter[u] < self.adj[u].len() {
            let e = self.adj[u][self.iter[u]];
            let v = self.to[e];
            if self.cap[e] > FLOW_EPS && self.level[v] == self.level[u] + 1 {
                let d = self.dfs(v, t, pushed.min(self.cap[e]));
                if d > FLOW_EPS {
                    self.cap[e] -= d;
                    self.cap[e ^ 1] += d;
                    return d;
                }
            }
            self.iter[u] += 1;
        }
        0.0
    }

    fn run(&mut self, s: usize, t: usize) -> f64 {
        let mut total = 0.0;
        loop {
            self.bfs(s);
            if self.level[t] < 0 {
                return total;
            }
            self.iter.iter_mut().for_each(|i| *i = 0);
            loop {
                let f = self.dfs(s, t, f64::INFINITY);
                if f <= FLOW_EPS {
                    break;
                }
                total += f;
            }
        }
    }

    fn source_side(&mut self, s: usize) -> Vec<usize> {
        self.bfs(s);
        (0..self.level.len()).filter(|&v| self.level[v] >= 0).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn extremal(n: usize) -> BoundaryPair {
        BoundaryPair::extremal(n, 0).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        assert_eq!(enumerate_states(&extremal(2), 1, 100).unwrap().len(), 2);
        assert_eq!(enumerate_states(&extremal(4), 1, 100).unwrap().len(), 6);
        assert_eq!(enumerate_states(&extremal(4), 2, 100).unwrap().len(), 20);
    }

    #[test]
    fn enumeration_cap_is_reported() {
        let err = enumerate_states(&extremal(4), 2, 10).unwrap_err();
        assert_eq!(
            err,
            Error::CapExceeded {
                what: "states",
                count: 11,
                cap: 10
            }
        );
    }

    #[test]
    fn enumeration_is_canonical() {
        let states = enumerate_states(&extremal(4), 2, 100).unwrap();
        let texts: Vec<String> = states.iter().map(|s| s.to_text()).collect();
        let mut sorted = texts.clone();
        sorted.sort();
        assert_eq!(texts, sorted);
        sorted.dedup();
        assert_eq!(sorted.len(), texts.len());
    }

    #[test]
    fn two_state_measure() {
        let alpha = 0.5 * 2f64.ln();
        let m = exact_measure(&extremal(2), 1, alpha).unwrap();
        let up = PolymerConfig::from_text("+-").unwrap();
        let down = PolymerConfig::from_text("-+").unwrap();
        assert!((m.prob_of(&up) - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.prob_of(&down) - 1.0 / 3.0).abs() < 1e-15);
        assert!((m.prob_of(&up) - 1.0 / m.z_hat()).abs() < 1e-15);
    }

    #[test]
    fn alpha_must_be_positive() {
        assert!(matches!(
            exact_measure(&extremal(2), 1, 0.0),
            Err(Error::InvalidParameter(_))
        ));
        assert!(exact_measure(&extremal(2), 1, -1.0).is_err());
    }

    #[test]
    fn counts_small_volumes() {
        let t = count_by_volume(6, DEFAULT_VOLUME_CAP).unwrap();
        let got: Vec<u64> = t.counts().iter().map(|c| c.to_u64().unwrap()).collect();
        assert_eq!(got, vec![1, 1, 3, 6, 13, 24, 48]);
        assert!(count_by_volume(10, 5).is_err());
    }

    #[test]
    fn enumeration_matches_generating_function() {
        let t = count_by_volume(10, DEFAULT_VOLUME_CAP).unwrap();
        let direct = count_by_enumeration(10);
        for v in 0..=10 {
            assert_eq!(t.get(v).to_u64().unwrap(), direct[v], "v={v}");
        }
    }

    #[test]
    fn tails_of_two_state_chain() {
        let alpha = 0.5 * 2f64.ln();
        let m = exact_measure(&extremal(2), 1, alpha).unwrap();
        let tail = tail_excess_volume(&m).unwrap();
        assert_eq!(tail[0], (0, 1.0));
        assert!((tail[1].1 - 1.0 / 3.0).abs() < 1e-15);

        let xi = Path::from_increments("+-+-").unwrap();
        let jagged = BoundaryPair::new(xi, Path::vee(4, 0).unwrap()).unwrap();
        let m = exact_measure(&jagged, 1, 1.0).unwrap();
        assert!(tail_excess_volume(&m).is_err());
    }

    #[test]
    fn sticking_examples() {
        let alpha = 0.5 * 2f64.ln();
        let m = exact_measure(&extremal(2), 1, alpha).unwrap();
        assert_eq!(sticking_probability(&m, 1, 0).unwrap(), 0.0);
        assert_eq!(sticking_probability(&m, 1, 2).unwrap(), 0.0);
        assert!((sticking_probability(&m, 1, 1).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert!(sticking_probability(&m, 2, 1).is_err());
        assert!(sticking_probability(&m, 1, 3).is_err());
    }

    #[test]
    fn detachment_degenerate_window() {
        let m = exact_measure(&extremal(6), 2, 1.0).unwrap();
        for a in 1..6 {
            let single = detachment_run_probability(&m, a, a).unwrap();
            let stick = sticking_probability(&m, 2, a).unwrap();
            assert!((single - stick).abs() < 1e-15);
        }
        assert!(detachment_run_probability(&m, 0, 2).is_err());
        assert!(detachment_run_probability(&m, 2, 6).is_err());
        assert!(detachment_run_probability(&m, 3, 2).is_err());
    }

    #[test]
    fn domination_examples() {
        let b = extremal(4);
        let m1 = exact_measure(&b, 2, 1.0).unwrap();
        assert!(check_stochastic_domination(&m1, &m1, 0).unwrap().holds());

        let vee = Path::vee(4, 0).unwrap();
        let pinned = BoundaryPair::new(vee.clone(), vee).unwrap();
        let frozen = exact_measure(&pinned, 2, 1.0).unwrap();
        assert!(check_stochastic_domination(&m1, &frozen, 0).unwrap().holds());
        assert!(matches!(
            check_stochastic_domination(&frozen, &m1, 0),
            Err(Error::InvalidParameter(_))
        ));

        let m2 = exact_measure(&b, 2, 2.0).unwrap();
        assert!(check_stochastic_domination(&m2, &m1, 0).unwrap().holds());
        assert!(matches!(
            check_stochastic_domination(&m1, &m2, 0).unwrap(),
            Domination::Fails { .. }
        ));
    }
}
