//! Continuous-time heat-bath dynamics: local laws, trajectories, and the
//! exact generator with its spectral gap and total-variation mixing time.

use std::io::{self, Write};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, Exp};

use crate::equilibrium::{check_alpha, exact_measure_capped, ExactMeasure, DEFAULT_STATE_CAP};
use crate::error::{Error, Result};
use crate::model::{BoundaryPair, PolymerConfig};
use crate::rng::{replica_rng, SimRng};

/// States above which the dense mixing-time computation refuses to run.
pub const TV_STATE_CAP: usize = 10_000;
/// Rayleigh-quotient cross-validation runs on chains up to this size.
pub const RAYLEIGH_STATE_CAP: usize = 50;
pub const TV_THRESHOLD: f64 = 0.5 / std::f64::consts::E;

/// `e^{2α} / (1 + e^{2α})`, the probability of the higher of two admissible heights.
pub fn high_probability(alpha: f64) -> f64 {
    1.0 / (1.0 + (-2.0 * alpha).exp())
}

/// The conditional law of one height given everything else.
///
/// `low == high` means the value is forced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalLaw {
    pub low: i32,
    pub high: i32,
    pub p_high: f64,
}

impl LocalLaw {
    pub fn forced(value: i32) -> Self {
        Self {
            low: value,
            high: value,
            p_high: 1.0,
        }
    }

    pub fn is_forced(&self) -> bool {
        self.low == self.high || self.p_high == 0.0 || self.p_high == 1.0
    }

    /// The threshold rule shared by every coupled copy.
    pub fn sample(&self, u: f64) -> i32 {
        if u < self.p_high {
            self.high
        } else {
            self.low
        }
    }

    pub fn prob(&self, y: i32) -> f64 {
        if self.low == self.high {
            (y == self.low) as u8 as f64
        } else if y == self.high {
            self.p_high
        } else if y == self.low {
            1.0 - self.p_high
        } else {
            0.0
        }
    }
}

/// Heat-bath law from the horizontal neighbours `left`, `right`, the
/// height directly above `above` and directly below `below`, and extra
/// per-site caps `[lo, hi]`.
#[inline]
pub(crate) fn law_from(left: i32, right: i32, above: i32, below: i32, lo: i32, hi: i32, p: f64) -> LocalLaw {
    if left != right {
        return LocalLaw::forced((left + right) / 2);
    }
    let (down, up) = (left - 1, left + 1);
    let up_ok = up <= above && up >= below && up <= hi && up >= lo;
    let down_ok = down >= below && down <= above && down >= lo && down <= hi;
    match (down_ok, up_ok) {
        (true, true) => LocalLaw {
            low: down,
            high: up,
            p_high: p,
        },
        (true, false) => LocalLaw {
            low: down,
            high: up,
            p_high: 0.0,
        },
        (false, true) => LocalLaw {
            low: down,
            high: up,
            p_high: 1.0,
        },
        (false, false) => unreachable!("current height is always admissible"),
    }
}

/// `μ_{i,x}^η`: the law of `η_x^{(i)}` given all other heights.
pub fn local_update_law(
    config: &PolymerConfig,
    i: usize,
    x: usize,
    bounds: &BoundaryPair,
    alpha: f64,
) -> Result<LocalLaw> {
    check_alpha(alpha)?;
    let (k, n) = (config.k(), config.n());
    if i == 0 || i > k || x == 0 || x >= n {
        return Err(Error::InvalidParameter(format!(
            "site ({i}, {x}) out of range for k={k}, n={n}"
        )));
    }
    if bounds.n() != n || bounds.h() != config.h() {
        return Err(Error::DimensionMismatch("boundary pair and configuration differ".into()));
    }
    let above = if i == 1 {
        bounds.xi().get(x)
    } else {
        config.height(i - 1, x)
    };
    let below = if i == k {
        bounds.sigma().get(x)
    } else {
        config.height(i + 1, x)
    };
    Ok(law_from(
        config.height(i, x - 1),
        config.height(i, x + 1),
        above,
        below,
        i32::MIN,
        i32::MAX,
        high_probability(alpha),
    ))
}

/// Parameters of a single trajectory.
#[derive(Debug, Clone)]
pub struct DynamicsParams {
    pub alpha: f64,
    pub bounds: BoundaryPair,
    pub k: usize,
    pub seed: u64,
    pub horizon: f64,
}

impl DynamicsParams {
    pub fn validate(&self) -> Result<()> {
        check_alpha(self.alpha)?;
        if self.k == 0 {
            return Err(Error::Degenerate {
                k: 0,
                n: self.bounds.n(),
            });
        }
        if !(self.horizon >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "horizon must be non-negative, got {}",
                self.horizon
            )));
        }
        Ok(())
    }
}

/// One clock ring: polymer `i`, site `x`, uniform `u` for the threshold rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub time: f64,
    pub i: usize,
    pub x: usize,
    pub u: f64,
}

/// Superposition of the `k(n−1)` rate-1 clocks.
#[derive(Debug, Clone)]
pub struct EventClock {
    rng: SimRng,
    k: usize,
    sites: usize,
    rate: f64,
    wait: Option<Exp<f64>>,
    time: f64,
}

impl EventClock {
    pub fn new(rng: SimRng, k: usize, n: usize) -> Self {
        let sites = n.saturating_sub(1);
        Self {
            rng,
            k,
            sites,
            rate: (k * sites) as f64,
            wait: Exp::new((k * sites) as f64).ok().filter(|_| k * sites > 0),
            time: 0.0,
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn next_event(&mut self) -> Event {
        self.time += self.wait.expect("clock with no sites").sample(&mut self.rng);
        let i = self.rng.random_range(1..=self.k);
        let x = self.rng.random_range(1..=self.sites);
        let u = self.rng.random();
        Event {
            time: self.time,
            i,
            x,
            u,
        }
    }
}

/// Mutable state of the chain. Rows `0` and `k+1` hold the ceiling and
/// floor so that every vertical lookup is a plain index.
#[derive(Debug, Clone)]
pub struct Chain {
    k: usize,
    n: usize,
    h: i32,
    rows: Vec<i32>,
    p: f64,
    caps: Option<(Vec<i32>, Vec<i32>)>,
    twice_volume: i64,
}

impl Chain {
    pub fn new(bounds: &BoundaryPair, alpha: f64, init: &PolymerConfig) -> Result<Self> {
        check_alpha(alpha)?;
        if !init.in_bounds(bounds)? {
            return Err(Error::InvalidConfig(
                "initial configuration leaves the boundary pair".into(),
            ));
        }
        let (k, n) = (init.k(), init.n());
        let mut rows = Vec::with_capacity((k + 2) * (n + 1));
        rows.extend_from_slice(bounds.xi().heights());
        rows.extend_from_slice(init.flat());
        rows.extend_from_slice(bounds.sigma().heights());
        let twice_volume = init.excess_volume(bounds.xi())? as i64 * 2;
        Ok(Self {
            k,
            n,
            h: init.h(),
            rows,
            p: high_probability(alpha),
            caps: None,
            twice_volume,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Height of polymer `j` at `x`; `j = 0` is the ceiling, `j = k+1` the floor.
    #[inline]
    pub fn height(&self, j: usize, x: usize) -> i32 {
        self.rows[j * (self.n + 1) + x]
    }

    /// Heights of polymers `1..=k`, flattened.
    pub fn polymers(&self) -> &[i32] {
        let w = self.n + 1;
        &self.rows[w..(self.k + 1) * w]
    }

    pub fn state(&self) -> PolymerConfig {
        PolymerConfig::from_flat_unchecked(self.k, self.n, self.h, self.polymers().to_vec())
    }

    /// Current `V^ξ`.
    pub fn excess_volume(&self) -> u64 {
        (self.twice_volume / 2) as u64
    }

    /// Restricts polymer `j`'s height at `x` to `[lower, upper]` (flattened
    /// as `(j−1)(n+1) + x`). Updates that would leave the window are
    /// suppressed. The current state must satisfy the caps.
    pub fn set_caps(&mut self, lower: Vec<i32>, upper: Vec<i32>) -> Result<()> {
        let len = self.k * (self.n + 1);
        if lower.len() != len || upper.len() != len {
            return Err(Error::DimensionMismatch(format!("caps must have {len} entries")));
        }
        if self
            .polymers()
            .iter()
            .zip(lower.iter().zip(&upper))
            .any(|(y, (lo, hi))| y < lo || y > hi)
        {
            return Err(Error::InvalidConfig("current state violates the caps".into()));
        }
        self.caps = Some((lower, upper));
        Ok(())
    }

    pub fn clear_caps(&mut self) {
        self.caps = None;
    }

    #[inline]
    pub fn law(&self, i: usize, x: usize) -> LocalLaw {
        let w = self.n + 1;
        let at = i * w + x;
        let (lo, hi) = match &self.caps {
            Some((lo, hi)) => (lo[at - w], hi[at - w]),
            None => (i32::MIN, i32::MAX),
        };
        law_from(
            self.rows[at - 1],
            self.rows[at + 1],
            self.rows[at - w],
            self.rows[at + w],
            lo,
            hi,
            self.p,
        )
    }

    /// Heat-bath update of `(i, x)` driven by `u`. Returns the new height.
    #[inline]
    pub fn update(&mut self, i: usize, x: usize, u: f64) -> i32 {
        let y = self.law(i, x).sample(u);
        let at = i * (self.n + 1) + x;
        self.twice_volume += (self.rows[at] - y) as i64;
        self.rows[at] = y;
        debug_assert!(self.local_ok(i, x));
        y
    }

    pub fn apply(&mut self, e: &Event) -> i32 {
        self.update(e.i, e.x, e.u)
    }

    fn local_ok(&self, i: usize, x: usize) -> bool {
        let y = self.height(i, x);
        (y - self.height(i, x - 1)).abs() == 1
            && (y - self.height(i, x + 1)).abs() == 1
            && y <= self.height(i - 1, x)
            && y >= self.height(i + 1, x)
    }

    pub fn dominates(&self, other: &Chain) -> bool {
        self.polymers().iter().zip(other.polymers()).all(|(a, b)| a >= b)
    }
}

/// One logged update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRecord {
    pub time: f64,
    pub polymer: u16,
    pub site: u16,
    pub new_height: i16,
}

pub const LOG_RECORD_BYTES: usize = 14;

/// Little-endian `(f64, u16, u16, i16)` records.
pub fn write_event_log<W: Write>(records: &[LogRecord], mut out: W) -> io::Result<()> {
    for r in records {
        out.write_all(&r.time.to_le_bytes())?;
        out.write_all(&r.polymer.to_le_bytes())?;
        out.write_all(&r.site.to_le_bytes())?;
        out.write_all(&r.new_height.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_event_log(bytes: &[u8]) -> Result<Vec<LogRecord>> {
    if bytes.len() % LOG_RECORD_BYTES != 0 {
        return Err(Error::InvalidConfig(format!(
            "event log length {} is not a multiple of {LOG_RECORD_BYTES}",
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(LOG_RECORD_BYTES)
        .map(|c| LogRecord {
            time: f64::from_le_bytes(c[0..8].try_into().unwrap()),
            polymer: u16::from_le_bytes(c[8..10].try_into().unwrap()),
            site: u16::from_le_bytes(c[10..12].try_into().unwrap()),
            new_height: i16::from_le_bytes(c[12..14].try_into().unwrap()),
        })
        .collect())
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: PolymerConfig,
    pub events: u64,
    pub log: Option<Vec<LogRecord>>,
}

/// Runs one trajectory up to `params.horizon`.
pub fn simulate(params: &DynamicsParams, init: &PolymerConfig, keep_log: bool) -> Result<Trajectory> {
    let mut log = keep_log.then(Vec::new);
    if keep_log && (init.k() > u16::MAX as usize || init.n() > u16::MAX as usize + 1) {
        return Err(Error::InvalidParameter("event log fields are 16-bit".into()));
    }
    let (chain, events) = simulate_observed(params, init, |e, y, _| {
        if let Some(log) = log.as_mut() {
            log.push(LogRecord {
                time: e.time,
                polymer: e.i as u16,
                site: e.x as u16,
                new_height: y as i16,
            });
        }
    })?;
    Ok(Trajectory {
        final_state: chain.state(),
        events,
        log,
    })
}

/// Runs one trajectory, calling `observe(event, new_height, chain)` after
/// every update. Returns the final chain and the number of events.
pub fn simulate_observed(
    params: &DynamicsParams,
    init: &PolymerConfig,
    mut observe: impl FnMut(&Event, i32, &Chain),
) -> Result<(Chain, u64)> {
    params.validate()?;
    if init.k() != params.k {
        return Err(Error::DimensionMismatch(format!(
            "initial state has {} polymers, parameters say {}",
            init.k(),
            params.k
        )));
    }
    let mut chain = Chain::new(&params.bounds, params.alpha, init)?;
    let mut clock = EventClock::new(replica_rng(params.seed, 0), params.k, init.n());
    let mut events = 0;
    if clock.rate() == 0.0 {
        return Ok((chain, 0));
    }
    loop {
        let e = clock.next_event();
        if e.time > params.horizon {
            break;
        }
        let y = chain.apply(&e);
        events += 1;
        observe(&e, y, &chain);
    }
    Ok((chain, events))
}

/// Generator and its symmetrisation on an enumerated state space.
#[derive(Debug, Clone)]
pub struct ExactChain {
    measure: ExactMeasure,
    generator: DMatrix<f64>,
    symmetrized: DMatrix<f64>,
}

pub fn build_exact_chain(bounds: &BoundaryPair, k: usize, alpha: f64) -> Result<ExactChain> {
    build_exact_chain_capped(bounds, k, alpha, DEFAULT_STATE_CAP)
}

pub fn build_exact_chain_capped(
    bounds: &BoundaryPair,
    k: usize,
    alpha: f64,
    cap: usize,
) -> Result<ExactChain> {
    let measure = exact_measure_capped(bounds, k, alpha, cap)?;
    ExactChain::from_measure(measure)
}

impl ExactChain {
    pub fn from_measure(measure: ExactMeasure) -> Result<Self> {
        let size = measure.len();
        let (k, n) = (measure.k(), measure.bounds().n());
        let w = n + 1;
        let mut generator = DMatrix::zeros(size, size);
        for (a, state) in measure.states().iter().enumerate() {
            let chain = Chain::new(measure.bounds(), measure.alpha(), state)?;
            let mut flat = state.flat().to_vec();
            for i in 1..=k {
                for x in 1..n {
                    let law = chain.law(i, x);
                    let here = chain.height(i, x);
                    for (y, p) in [(law.low, 1.0 - law.p_high), (law.high, law.p_high)] {
                        if y == here || p == 0.0 || law.low == law.high {
                            continue;
                        }
                        flat[(i - 1) * w + x] = y;
                        let b = measure
                            .index_of_flat(&flat)
                            .expect("single flips stay inside the state space");
                        flat[(i - 1) * w + x] = here;
                        generator[(a, b)] += p;
                    }
                }
            }
        }
        Self::from_generator(measure, generator)
    }

    /// Wraps an explicit generator; the diagonal is overwritten so rows sum to 0.
    pub fn from_generator(measure: ExactMeasure, mut generator: DMatrix<f64>) -> Result<Self> {
        let size = measure.len();
        if generator.nrows() != size || generator.ncols() != size {
            return Err(Error::DimensionMismatch(format!(
                "generator is {}x{}, state space has {size} states",
                generator.nrows(),
                generator.ncols()
            )));
        }
        for a in 0..size {
            generator[(a, a)] = 0.0;
            let out: f64 = generator.row(a).iter().sum();
            generator[(a, a)] = -out;
        }
        let roots: Vec<f64> = measure.probabilities().iter().map(|p| p.sqrt()).collect();
        let symmetrized =
            DMatrix::from_fn(size, size, |a, b| generator[(a, b)] * roots[a] / roots[b]);
        let residual = (&symmetrized - symmetrized.transpose()).amax();
        if residual > 1e-10 {
            return Err(Error::Numerical {
                what: "symmetrised generator",
                residual,
            });
        }
        Ok(Self {
            measure,
            generator,
            symmetrized,
        })
    }

    pub fn measure(&self) -> &ExactMeasure {
        &self.measure
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn symmetrized(&self) -> &DMatrix<f64> {
        &self.symmetrized
    }

    pub fn len(&self) -> usize {
        self.measure.len()
    }

    pub fn is_empty(&self) -> bool {
        self.measure.is_empty()
    }

    /// Largest violation of `μ(a) L(a,b) = μ(b) L(b,a)`.
    pub fn detailed_balance_residual(&self) -> f64 {
        let mu = self.measure.probabilities();
        let mut worst: f64 = 0.0;
        for a in 0..self.len() {
            for b in 0..a {
                let d = mu[a] * self.generator[(a, b)] - mu[b] * self.generator[(b, a)];
                worst = worst.max(d.abs());
            }
        }
        worst
    }

    /// `𝓔(f) = ½ Σ μ(a) L(a,b) (f(b) − f(a))²`.
    pub fn dirichlet_form(&self, f: &[f64]) -> f64 {
        let mu = self.measure.probabilities();
        let mut total = 0.0;
        for a in 0..self.len() {
            for b in 0..self.len() {
                if a != b {
                    let r = self.generator[(a, b)];
                    if r != 0.0 {
                        total += mu[a] * r * (f[b] - f[a]).powi(2);
                    }
                }
            }
        }
        0.5 * total
    }

    pub fn variance(&self, f: &[f64]) -> f64 {
        let mu = self.measure.probabilities();
        let mean: f64 = mu.iter().zip(f).map(|(p, v)| p * v).sum();
        mu.iter().zip(f).map(|(p, v)| p * (v - mean).powi(2)).sum()
    }

    /// Eigenvalues of `−L` in increasing order with orthonormal eigenvectors
    /// of the symmetrised matrix as columns.
    pub fn spectrum(&self) -> Result<Spectrum> {
        let eig = SymmetricEigen::new(-self.symmetrized.clone());
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let values = DVector::from_iterator(self.len(), order.iter().map(|&i| eig.eigenvalues[i]));
        let vectors = DMatrix::from_fn(self.len(), self.len(), |r, c| eig.eigenvectors[(r, order[c])]);
        let residual = values[0].abs();
        if residual > 1e-8 {
            return Err(Error::Numerical {
                what: "stationary eigenvalue",
                residual,
            });
        }
        Ok(Spectrum { values, vectors })
    }

    /// Distribution at time `t` from state `start`.
    pub fn distribution_at(&self, spectrum: &Spectrum, start: usize, t: f64) -> Vec<f64> {
        let mu = self.measure.probabilities();
        let decay = spectrum.values.map(|l| (-l * t).exp());
        let v = &spectrum.vectors;
        let row = v.row(start).component_mul(&decay.transpose());
        let raw = &row * v.transpose();
        (0..self.len())
            .map(|b| (raw[b] * (mu[b] / mu[start]).sqrt()).max(0.0))
            .collect()
    }

    /// `‖P_t(a, ·) − μ‖_var` for every start `a`.
    pub fn tv_profile(&self, spectrum: &Spectrum, t: f64) -> Vec<f64> {
        let mu = self.measure.probabilities();
        let roots: Vec<f64> = mu.iter().map(|p| p.sqrt()).collect();
        let decay = spectrum.values.map(|l| (-l * t).exp());
        let scaled = DMatrix::from_fn(self.len(), self.len(), |r, c| {
            spectrum.vectors[(r, c)] * decay[c]
        });
        let kernel = scaled * spectrum.vectors.transpose();
        (0..self.len())
            .map(|a| {
                0.5 * (0..self.len())
                    .map(|b| (kernel[(a, b)] * roots[b] / roots[a] - mu[b]).abs())
                    .sum::<f64>()
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct Spectrum {
    pub values: DVector<f64>,
    pub vectors: DMatrix<f64>,
}

impl Spectrum {
    pub fn gap(&self) -> f64 {
        self.values.get(1).copied().unwrap_or(f64::INFINITY)
    }
}

/// Second-smallest eigenvalue of `−L`. Small chains are cross-checked
/// against the Rayleigh quotient `𝓔(f)/var(f)` of random test functions.
pub fn spectral_gap_exact(chain: &ExactChain) -> Result<f64> {
    let spectrum = chain.spectrum()?;
    let gap = spectrum.gap();
    if !(gap > 0.0) {
        return Err(Error::Numerical {
            what: "spectral gap not positive",
            residual: gap,
        });
    }
    if chain.len() <= RAYLEIGH_STATE_CAP && chain.len() > 1 {
        let worst = rayleigh_check(chain, &spectrum, 0x5eed, 200);
        if worst < gap - 1e-8 {
            return Err(Error::Numerical {
                what: "Rayleigh quotient below eigenvalue",
                residual: gap - worst,
            });
        }
    }
    Ok(gap)
}

/// Smallest `𝓔(f)/var(f)` over random `f` and over the computed second
/// eigenfunction (which should attain the gap).
pub fn rayleigh_check(chain: &ExactChain, spectrum: &Spectrum, seed: u64, trials: usize) -> f64 {
    let mu = chain.measure().probabilities();
    let mut rng = replica_rng(seed, 0);
    let mut best = f64::INFINITY;
    let mut consider = |f: &[f64]| {
        let var = chain.variance(f);
        if var > 1e-300 {
            best = best.min(chain.dirichlet_form(f) / var);
        }
    };
    let eigenfunction: Vec<f64> = (0..chain.len())
        .map(|a| spectrum.vectors[(a, 1)] / mu[a].sqrt())
        .collect();
    consider(&eigenfunction);
    for _ in 0..trials {
        let f: Vec<f64> = (0..chain.len()).map(|_| rng.random::<f64>() - 0.5).collect();
        consider(&f);
    }
    best
}

/// Smallest `t` with `max_a ‖P_t(a,·) − μ‖ ≤ 1/(2e)`, to within `1e−6`.
pub fn tv_mixing_exact(chain: &ExactChain) -> Result<f64> {
    if chain.len() > TV_STATE_CAP {
        return Err(Error::CapExceeded {
            what: "states for mixing time",
            count: chain.len(),
            cap: TV_STATE_CAP,
        });
    }
    let spectrum = chain.spectrum()?;
    let worst = |t: f64| chain.tv_profile(&spectrum, t).into_iter().fold(0.0, f64::max);
    if worst(0.0) <= TV_THRESHOLD {
        return Ok(0.0);
    }
    let mut hi = 1.0 / spectrum.gap().max(1e-12);
    let mut lo = 0.0;
    while worst(hi) > TV_THRESHOLD {
        lo = hi;
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::Numerical {
                what: "mixing time bracket",
                residual: hi,
            });
        }
    }
    while hi - lo > 1e-6 {
        let mid = 0.5 * (lo + hi);
        if worst(mid) > TV_THRESHOLD {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(hi)
}
