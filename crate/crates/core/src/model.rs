//! Configuration spaces of ordered lattice paths and their equivalent
//! descriptions: particle arrays, boxed plane partitions and monotone
//! unions of unit cubes.
//!
//! Polymers are indexed `1..=k` from the top, sites `0..=n`. A path of
//! length `n` ends at height `h`, so `n` and `h` must share parity.

use std::fmt;

use crate::error::{Error, Result};

pub(crate) fn check_dims(n: usize, h: i32) -> Result<()> {
    if n == 0 {
        return Err(Error::Degenerate { k: 1, n });
    }
    if h.unsigned_abs() as usize > n || (n as i64 + h as i64) % 2 != 0 {
        return Err(Error::Parity { n, h });
    }
    Ok(())
}

/// Number of positive increments `(n + h) / 2` of any path in the space.
pub fn particle_count(n: usize, h: i32) -> usize {
    ((n as i64 + h as i64) / 2) as usize
}

/// A single ±1 lattice path of length `n` starting at height 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Path {
    heights: Vec<i32>,
}

impl Path {
    pub fn new(heights: Vec<i32>) -> Result<Self> {
        if heights.len() < 2 {
            return Err(Error::Degenerate {
                k: 1,
                n: heights.len().saturating_sub(1),
            });
        }
        if heights[0] != 0 {
            return Err(Error::InvalidConfig("path must start at height 0".into()));
        }
        if let Some(x) = heights.windows(2).position(|w| (w[1] - w[0]).abs() != 1) {
            return Err(Error::InvalidConfig(format!(
                "increment at x={x} is not +1 or -1"
            )));
        }
        Ok(Self { heights })
    }

    /// Parses a string of `+` / `-` increments.
    pub fn from_increments(s: &str) -> Result<Self> {
        let s = s.trim();
        let mut heights = Vec::with_capacity(s.len() + 1);
        heights.push(0);
        let mut y = 0;
        for (x, c) in s.chars().enumerate() {
            y += match c {
                '+' => 1,
                '-' => -1,
                other => {
                    return Err(Error::InvalidConfig(format!(
                        "unexpected character {other:?} at increment {x}"
                    )))
                }
            };
            heights.push(y);
        }
        Self::new(heights)
    }

    /// The maximal path: up first, then down.
    pub fn wedge(n: usize, h: i32) -> Result<Self> {
        check_dims(n, h)?;
        let top = particle_count(n, h) as i32;
        let heights = (0..=n as i32)
            .map(|x| if x <= top { x } else { n as i32 + h - x })
            .collect();
        Ok(Self { heights })
    }

    /// The minimal path: down first, then up.
    pub fn vee(n: usize, h: i32) -> Result<Self> {
        check_dims(n, h)?;
        let bottom = (n as i32 - h) / 2;
        let heights = (0..=n as i32)
            .map(|x| if x <= bottom { -x } else { h - n as i32 + x })
            .collect();
        Ok(Self { heights })
    }

    pub fn n(&self) -> usize {
        self.heights.len() - 1
    }

    pub fn h(&self) -> i32 {
        *self.heights.last().unwrap()
    }

    pub fn heights(&self) -> &[i32] {
        &self.heights
    }

    pub fn get(&self, x: usize) -> i32 {
        self.heights[x]
    }

    /// True iff the path lies weakly above `other` everywhere.
    pub fn dominates(&self, other: &Path) -> bool {
        self.heights.len() == other.heights.len()
            && self.heights.iter().zip(&other.heights).all(|(a, b)| a >= b)
    }

    /// Positions (0-based) of the positive increments, increasing.
    pub fn particles(&self) -> Vec<usize> {
        positive_increments(&self.heights)
    }

    pub fn increments(&self) -> String {
        increments_of(&self.heights)
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.increments())
    }
}

fn positive_increments(heights: &[i32]) -> Vec<usize> {
    heights
        .windows(2)
        .enumerate()
        .filter(|(_, w)| w[1] > w[0])
        .map(|(x, _)| x)
        .collect()
}

fn increments_of(heights: &[i32]) -> String {
    heights
        .windows(2)
        .map(|w| if w[1] > w[0] { '+' } else { '-' })
        .collect()
}

/// Ceiling `xi` and floor `sigma` with `xi >= sigma`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoundaryPair {
    xi: Path,
    sigma: Path,
}

impl BoundaryPair {
    pub fn new(xi: Path, sigma: Path) -> Result<Self> {
        if xi.n() != sigma.n() || xi.h() != sigma.h() {
            return Err(Error::DimensionMismatch(format!(
                "ceiling (n={}, h={}) vs floor (n={}, h={})",
                xi.n(),
                xi.h(),
                sigma.n(),
                sigma.h()
            )));
        }
        check_dims(xi.n(), xi.h())?;
        if !xi.dominates(&sigma) {
            return Err(Error::InvalidConfig("ceiling lies below floor".into()));
        }
        Ok(Self { xi, sigma })
    }

    /// The unconstrained pair (wedge, vee).
    pub fn extremal(n: usize, h: i32) -> Result<Self> {
        Self::new(Path::wedge(n, h)?, Path::vee(n, h)?)
    }

    pub fn xi(&self) -> &Path {
        &self.xi
    }

    pub fn sigma(&self) -> &Path {
        &self.sigma
    }

    pub fn n(&self) -> usize {
        self.xi.n()
    }

    pub fn h(&self) -> i32 {
        self.xi.h()
    }
}

/// Checks raw height rows against the configuration-space rules and the
/// boundary pair. Dimension and parity problems are errors; violated
/// invariants give `Ok(false)`.
pub fn validate(
    k: usize,
    n: usize,
    h: i32,
    rows: &[Vec<i32>],
    bounds: &BoundaryPair,
) -> Result<bool> {
    if k == 0 || n == 0 {
        return Err(Error::Degenerate { k, n });
    }
    check_dims(n, h)?;
    if rows.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "expected {k} polymers, got {}",
            rows.len()
        )));
    }
    if let Some(r) = rows.iter().find(|r| r.len() != n + 1) {
        return Err(Error::DimensionMismatch(format!(
            "polymer has {} sites, expected {}",
            r.len(),
            n + 1
        )));
    }
    if bounds.n() != n || bounds.h() != h {
        return Err(Error::DimensionMismatch(format!(
            "boundary pair has n={}, h={}; configuration has n={n}, h={h}",
            bounds.n(),
            bounds.h()
        )));
    }
    Ok(rows_valid(rows, h) && rows_in_bounds(rows, bounds))
}

fn rows_valid(rows: &[Vec<i32>], h: i32) -> bool {
    let paths_ok = rows.iter().all(|r| {
        r[0] == 0
            && *r.last().unwrap() == h
            && r.windows(2).all(|w| (w[1] - w[0]).abs() == 1)
    });
    paths_ok
        && rows
            .windows(2)
            .all(|p| p[0].iter().zip(&p[1]).all(|(a, b)| a >= b))
}

fn rows_in_bounds(rows: &[Vec<i32>], bounds: &BoundaryPair) -> bool {
    let top = &rows[0];
    let bottom = rows.last().unwrap();
    top.iter().zip(bounds.xi.heights()).all(|(e, c)| e <= c)
        && bottom.iter().zip(bounds.sigma.heights()).all(|(e, f)| e >= f)
}

/// `k` ordered paths of length `n` from 0 to `h`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PolymerConfig {
    k: usize,
    n: usize,
    h: i32,
    heights: Vec<i32>,
}

impl PolymerConfig {
    pub fn new(rows: Vec<Vec<i32>>) -> Result<Self> {
        let k = rows.len();
        let n = rows.first().map_or(0, |r| r.len().saturating_sub(1));
        if k == 0 || n == 0 {
            return Err(Error::Degenerate { k, n });
        }
        if rows.iter().any(|r| r.len() != n + 1) {
            return Err(Error::DimensionMismatch("polymers of unequal length".into()));
        }
        let h = *rows[0].last().unwrap();
        check_dims(n, h)?;
        if !rows_valid(&rows, h) {
            return Err(Error::InvalidConfig(
                "paths must start at 0, end at h, use ±1 steps and be ordered".into(),
            ));
        }
        Ok(Self {
            k,
            n,
            h,
            heights: rows.concat(),
        })
    }

    /// Builds from a flat `k × (n+1)` buffer that is known to be valid.
    pub(crate) fn from_flat_unchecked(k: usize, n: usize, h: i32, heights: Vec<i32>) -> Self {
        debug_assert_eq!(heights.len(), k * (n + 1));
        Self { k, n, h, heights }
    }

    pub fn from_paths(paths: &[Path]) -> Result<Self> {
        Self::new(paths.iter().map(|p| p.heights.clone()).collect())
    }

    /// `k` copies of one path (the configuration written `ξ̂` for a ceiling `ξ`).
    pub fn replicate(path: &Path, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::Degenerate { k, n: path.n() });
        }
        Ok(Self {
            k,
            n: path.n(),
            h: path.h(),
            heights: path.heights.repeat(k),
        })
    }

    /// Parses `k` lines of `+`/`-` increments (blank lines ignored).
    pub fn from_text(text: &str) -> Result<Self> {
        let paths = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .map(Path::from_increments)
            .collect::<Result<Vec<_>>>()?;
        Self::from_paths(&paths)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::with_capacity(self.k * (self.n + 1));
        for j in 1..=self.k {
            out.push_str(&increments_of(self.polymer(j)));
            out.push('\n');
        }
        out
    }

    /// Increment strings of all polymers joined by `|` (one CSV field).
    pub fn encode(&self) -> String {
        (1..=self.k)
            .map(|j| increments_of(self.polymer(j)))
            .collect::<Vec<_>>()
            .join("|")
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> i32 {
        self.h
    }

    /// Heights of polymer `j` (1-based).
    pub fn polymer(&self, j: usize) -> &[i32] {
        let w = self.n + 1;
        &self.heights[(j - 1) * w..j * w]
    }

    pub fn height(&self, j: usize, x: usize) -> i32 {
        self.heights[(j - 1) * (self.n + 1) + x]
    }

    pub fn flat(&self) -> &[i32] {
        &self.heights
    }

    pub fn path(&self, j: usize) -> Path {
        Path {
            heights: self.polymer(j).to_vec(),
        }
    }

    fn same_space(&self, other: &Self) -> Result<()> {
        if (self.k, self.n, self.h) != (other.k, other.n, other.h) {
            return Err(Error::DimensionMismatch(format!(
                "(k,n,h)=({},{},{}) vs ({},{},{})",
                self.k, self.n, self.h, other.k, other.n, other.h
            )));
        }
        Ok(())
    }

    /// Membership in `E_{ξ,σ}`.
    pub fn in_bounds(&self, bounds: &BoundaryPair) -> Result<bool> {
        if bounds.n() != self.n || bounds.h() != self.h {
            return Err(Error::DimensionMismatch(
                "boundary pair and configuration differ in (n,h)".into(),
            ));
        }
        Ok(self.polymer(1).iter().zip(bounds.xi.heights()).all(|(e, c)| e <= c)
            && self
                .polymer(self.k)
                .iter()
                .zip(bounds.sigma.heights())
                .all(|(e, f)| e >= f))
    }

    /// Coordinatewise order: every polymer of `self` lies weakly above the
    /// matching polymer of `other`.
    pub fn dominates(&self, other: &Self) -> Result<bool> {
        self.same_space(other)?;
        Ok(self.heights.iter().zip(&other.heights).all(|(a, b)| a >= b))
    }

    /// Half the total area between the ceiling and every polymer.
    pub fn excess_volume(&self, xi: &Path) -> Result<u64> {
        if xi.n() != self.n || xi.h() != self.h {
            return Err(Error::DimensionMismatch("ceiling and configuration differ".into()));
        }
        let mut twice = 0i64;
        for j in 1..=self.k {
            for (x, (&e, &c)) in self.polymer(j).iter().zip(xi.heights()).enumerate() {
                if e > c {
                    return Err(Error::InvalidConfig(format!(
                        "polymer {j} is above the ceiling at x={x}"
                    )));
                }
                twice += (c - e) as i64;
            }
        }
        Ok((twice / 2) as u64)
    }

    pub fn to_particles(&self) -> ParticleConfig {
        let count = particle_count(self.n, self.h);
        let mut positions = Vec::with_capacity(self.k * count);
        for j in 1..=self.k {
            positions.extend(positive_increments(self.polymer(j)));
        }
        ParticleConfig {
            k: self.k,
            n: self.n,
            h: self.h,
            count,
            positions,
        }
    }

    /// Box `a × b × c` with `a = (n−h)/2`, `b = (n+h)/2`, `c = k`. Polymer
    /// `k` is the bottom layer; higher polymers give lower surfaces.
    pub fn to_plane_partition(&self) -> PlanePartition {
        let a = (self.n as i32 - self.h) as usize / 2;
        let b = particle_count(self.n, self.h);
        let mut heights = vec![0u32; a * b];
        for j in 1..=self.k {
            for (x, len) in row_lengths(self.polymer(j)).into_iter().enumerate() {
                for y in 0..len {
                    heights[x * b + y] += 1;
                }
            }
        }
        PlanePartition {
            a,
            b,
            c: self.k as u32,
            heights,
        }
    }

    pub fn from_plane_partition(pp: &PlanePartition, k: usize, n: usize, h: i32) -> Result<Self> {
        check_dims(n, h)?;
        if k == 0 {
            return Err(Error::Degenerate { k, n });
        }
        let a = (n as i32 - h) as usize / 2;
        let b = particle_count(n, h);
        if (pp.a, pp.b, pp.c as usize) != (a, b, k) {
            return Err(Error::DimensionMismatch(format!(
                "box {}x{}x{} does not match {a}x{b}x{k}",
                pp.a, pp.b, pp.c
            )));
        }
        let mut heights = Vec::with_capacity(k * (n + 1));
        for j in 1..=k {
            let level = (k - j + 1) as u32;
            let mut row = Vec::with_capacity(n + 1);
            row.push(0);
            let mut y = 0;
            let mut ups = 0;
            for x in 0..a {
                let len = (0..b).take_while(|&c| pp.get(x, c) >= level).count();
                while ups < b - len {
                    y += 1;
                    ups += 1;
                    row.push(y);
                }
                y -= 1;
                row.push(y);
            }
            while ups < b {
                y += 1;
                ups += 1;
                row.push(y);
            }
            heights.extend(row);
        }
        Ok(Self { k, n, h, heights })
    }

    /// Square case `h = 0`, `n = 2M`, `k = M` only.
    pub fn to_cube_set(&self) -> Result<MonotoneCubeSet> {
        let m = self.k;
        if self.h != 0 || self.n != 2 * m {
            return Err(Error::DimensionMismatch(format!(
                "cube map needs h=0, n=2k; got k={}, n={}, h={}",
                self.k, self.n, self.h
            )));
        }
        let mut cols = vec![0u32; m * m];
        for r1 in 0..m {
            for r2 in 0..m {
                let x = m - r1 + r2;
                let bound = m as i32 - r1 as i32 - r2 as i32;
                cols[r1 * m + r2] = (0..m)
                    .take_while(|&r3| self.height(m - r3, x) < bound)
                    .count() as u32;
            }
        }
        Ok(MonotoneCubeSet { m, cols })
    }

    pub fn from_cube_set(s: &MonotoneCubeSet) -> Result<Self> {
        let m = s.m;
        if m == 0 {
            return Err(Error::Degenerate { k: 0, n: 0 });
        }
        let n = 2 * m;
        let wedge = Path::wedge(n, 0)?;
        let mut heights = Vec::with_capacity(m * (n + 1));
        for j in 1..=m {
            let r3 = (m - j) as u32;
            for x in 0..=n {
                let mut removed = 0;
                if x > 0 && x < n {
                    let lo = m.saturating_sub(x);
                    let hi = (m - 1).min(2 * m - 1 - x);
                    for r1 in lo..=hi {
                        let r2 = r1 + x - m;
                        if s.column(r1, r2) > r3 {
                            removed += 1;
                        }
                    }
                }
                heights.push(wedge.get(x) - 2 * removed);
            }
        }
        let rows = heights.chunks(n + 1).map(<[i32]>::to_vec).collect();
        Self::new(rows)
    }
}

/// Young-diagram row lengths of one path: for the r-th negative increment,
/// the number of positive increments after it.
fn row_lengths(heights: &[i32]) -> Vec<usize> {
    let total_up = heights.windows(2).filter(|w| w[1] > w[0]).count();
    let mut seen_up = 0;
    let mut rows = Vec::new();
    for w in heights.windows(2) {
        if w[1] > w[0] {
            seen_up += 1;
        } else {
            rows.push(total_up - seen_up);
        }
    }
    rows
}

/// Positions of the positive increments of every polymer.
///
/// Labels are 1-based: `x(j, i)` is the i-th particle of polymer j.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ParticleConfig {
    k: usize,
    n: usize,
    h: i32,
    count: usize,
    positions: Vec<usize>,
}

impl ParticleConfig {
    pub fn new(n: usize, h: i32, rows: Vec<Vec<usize>>) -> Result<Self> {
        check_dims(n, h)?;
        let k = rows.len();
        if k == 0 {
            return Err(Error::Degenerate { k, n });
        }
        let count = particle_count(n, h);
        for r in &rows {
            if r.len() != count {
                return Err(Error::DimensionMismatch(format!(
                    "expected {count} particles per polymer, got {}",
                    r.len()
                )));
            }
            if r.iter().any(|&x| x >= n) || r.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::InvalidConfig(
                    "particle positions must be strictly increasing in 0..n".into(),
                ));
            }
        }
        if rows
            .windows(2)
            .any(|p| p[0].iter().zip(&p[1]).any(|(a, b)| a > b))
        {
            return Err(Error::InvalidConfig("particles are not interlaced".into()));
        }
        Ok(Self {
            k,
            n,
            h,
            count,
            positions: rows.concat(),
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Particles per polymer, `N = (n+h)/2`.
    pub fn count(&self) -> usize {
        self.count
    }

    pub fn x(&self, j: usize, i: usize) -> usize {
        self.positions[(j - 1) * self.count + (i - 1)]
    }

    /// Position with out-of-range labels extended: `-1` below label 1 and
    /// `n` above label `N`.
    pub fn x_ext(&self, j: usize, v: isize) -> isize {
        if v < 1 {
            -1
        } else if v as usize > self.count {
            self.n as isize
        } else {
            self.x(j, v as usize) as isize
        }
    }

    pub fn polymer(&self, j: usize) -> &[usize] {
        &self.positions[(j - 1) * self.count..j * self.count]
    }

    pub fn to_polymers(&self) -> PolymerConfig {
        let w = self.n + 1;
        let mut heights = Vec::with_capacity(self.k * w);
        for j in 1..=self.k {
            let parts = self.polymer(j);
            let mut y = 0;
            let mut next = 0;
            heights.push(0);
            for x in 0..self.n {
                if next < parts.len() && parts[next] == x {
                    y += 1;
                    next += 1;
                } else {
                    y -= 1;
                }
                heights.push(y);
            }
        }
        PolymerConfig::from_flat_unchecked(self.k, self.n, self.h, heights)
    }
}

/// Heights `ℓ_{x,y}` on the `a × b` rectangle, bounded by `c`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PlanePartition {
    a: usize,
    b: usize,
    c: u32,
    heights: Vec<u32>,
}

impl PlanePartition {
    pub fn new(a: usize, b: usize, c: u32, rows: Vec<Vec<u32>>) -> Result<Self> {
        if rows.len() != a || rows.iter().any(|r| r.len() != b) {
            return Err(Error::DimensionMismatch(format!("expected {a} rows of {b}")));
        }
        let pp = Self {
            a,
            b,
            c,
            heights: rows.concat(),
        };
        for x in 0..a {
            for y in 0..b {
                let v = pp.get(x, y);
                if v > c
                    || (x + 1 < a && pp.get(x + 1, y) > v)
                    || (y + 1 < b && pp.get(x, y + 1) > v)
                {
                    return Err(Error::InvalidConfig(format!(
                        "heights must be weakly decreasing and <= {c} (cell {x},{y})"
                    )));
                }
            }
        }
        Ok(pp)
    }

    /// Parses whitespace-separated integer rows.
    pub fn from_text(a: usize, b: usize, c: u32, text: &str) -> Result<Self> {
        let rows = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.split_whitespace()
                    .map(|t| {
                        t.parse::<u32>()
                            .map_err(|e| Error::InvalidConfig(format!("bad height {t:?}: {e}")))
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(a, b, c, rows)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for x in 0..self.a {
            let row: Vec<String> = (0..self.b).map(|y| self.get(x, y).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    pub fn dims(&self) -> (usize, usize, u32) {
        (self.a, self.b, self.c)
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.heights[x * self.b + y]
    }

    pub fn volume(&self) -> u64 {
        self.heights.iter().map(|&v| v as u64).sum()
    }

    /// Pointwise `self <= other`.
    pub fn le(&self, other: &Self) -> bool {
        self.heights.len() == other.heights.len()
            && self.heights.iter().zip(&other.heights).all(|(a, b)| a <= b)
    }
}

/// A monotone union of unit cubes in `[0, M]^3`, stored by column height.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MonotoneCubeSet {
    m: usize,
    cols: Vec<u32>,
}

impl MonotoneCubeSet {
    pub fn new(m: usize, cols: Vec<u32>) -> Result<Self> {
        if cols.len() != m * m {
            return Err(Error::DimensionMismatch(format!(
                "expected {} columns, got {}",
                m * m,
                cols.len()
            )));
        }
        let s = Self { m, cols };
        if !s.is_monotone() {
            return Err(Error::InvalidConfig("column heights are not monotone".into()));
        }
        Ok(s)
    }

    pub fn empty(m: usize) -> Self {
        Self {
            m,
            cols: vec![0; m * m],
        }
    }

    pub fn full(m: usize) -> Self {
        Self {
            m,
            cols: vec![m as u32; m * m],
        }
    }

    pub fn side(&self) -> usize {
        self.m
    }

    pub fn column(&self, r1: usize, r2: usize) -> u32 {
        self.cols[r1 * self.m + r2]
    }

    pub fn columns(&self) -> &[u32] {
        &self.cols
    }

    pub fn contains(&self, r1: usize, r2: usize, r3: usize) -> bool {
        (r3 as u32) < self.column(r1, r2)
    }

    pub fn volume(&self) -> u64 {
        self.cols.iter().map(|&c| c as u64).sum()
    }

    pub fn is_subset(&self, other: &Self) -> bool {
        self.m == other.m && self.cols.iter().zip(&other.cols).all(|(a, b)| a <= b)
    }

    pub fn is_monotone(&self) -> bool {
        let m = self.m;
        (0..m).all(|r1| {
            (0..m).all(|r2| {
                let c = self.column(r1, r2);
                c as usize <= m
                    && (r1 + 1 == m || self.column(r1 + 1, r2) <= c)
                    && (r2 + 1 == m || self.column(r1, r2 + 1) <= c)
            })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rows(v: &[&[i32]]) -> Vec<Vec<i32>> {
        v.iter().map(|r| r.to_vec()).collect()
    }

    #[test]
    fn validate_examples() {
        let b = BoundaryPair::extremal(2, 0).unwrap();
        assert!(validate(1, 2, 0, &rows(&[&[0, 1, 0]]), &b).unwrap());
        assert!(!validate(2, 2, 0, &rows(&[&[0, -1, 0], &[0, 1, 0]]), &b).unwrap());
        assert!(matches!(
            validate(1, 3, 0, &rows(&[&[0, 1, 0, 1]]), &b),
            Err(Error::Parity { .. })
        ));
        assert!(matches!(
            validate(1, 2, 0, &rows(&[&[0, 1, 0, 1]]), &b),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            validate(0, 2, 0, &[], &b),
            Err(Error::Degenerate { .. })
        ));
    }

    #[test]
    fn validate_respects_boundaries() {
        let xi = Path::from_increments("+-+-").unwrap();
        let b = BoundaryPair::new(xi, Path::vee(4, 0).unwrap()).unwrap();
        assert!(!validate(1, 4, 0, &rows(&[&[0, 1, 2, 1, 0]]), &b).unwrap());
        assert!(validate(1, 4, 0, &rows(&[&[0, 1, 0, 1, 0]]), &b).unwrap());
    }

    #[test]
    fn wedge_and_vee() {
        assert_eq!(Path::wedge(4, 0).unwrap().heights(), &[0, 1, 2, 1, 0]);
        assert_eq!(Path::vee(4, 2).unwrap().heights(), &[0, -1, 0, 1, 2]);
        let v = Path::vee(2, 0).unwrap();
        let w = Path::wedge(2, 0).unwrap();
        assert!(v.heights().iter().zip(w.heights()).all(|(a, b)| *a == -b));
        assert_eq!(Path::wedge(4, 4).unwrap().heights(), &[0, 1, 2, 3, 4]);
        assert!(matches!(Path::wedge(3, 0), Err(Error::Parity { .. })));
        assert!(matches!(Path::vee(2, 4), Err(Error::Parity { .. })));
    }

    #[test]
    fn particles_examples() {
        let c = PolymerConfig::new(rows(&[&[0, 1, 0, 1, 0]])).unwrap();
        let p = c.to_particles();
        assert_eq!(p.polymer(1), &[0, 2]);
        let back = ParticleConfig::new(4, 0, vec![vec![0, 2]]).unwrap().to_polymers();
        assert_eq!(back, c);
        assert_eq!(p.x_ext(1, 0), -1);
        assert_eq!(p.x_ext(1, 3), 4);
    }

    #[test]
    fn plane_partition_examples() {
        let w = Path::wedge(4, 0).unwrap();
        let top = PolymerConfig::replicate(&w, 3).unwrap();
        let pp = top.to_plane_partition();
        assert_eq!(pp.dims(), (2, 2, 3));
        assert_eq!(pp.volume(), 0);

        let low = PolymerConfig::new(rows(&[&[0, -1, 0]])).unwrap();
        let pp = low.to_plane_partition();
        assert_eq!(pp.dims(), (1, 1, 1));
        assert_eq!(pp.get(0, 0), 1);
        assert_eq!(PolymerConfig::from_plane_partition(&pp, 1, 2, 0).unwrap(), low);

        assert!(matches!(
            PolymerConfig::from_plane_partition(&pp, 2, 2, 0),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn plane_partition_text() {
        let pp = PlanePartition::from_text(2, 3, 2, "2 1 0\n1 1 0\n").unwrap();
        assert_eq!(pp.volume(), 5);
        assert_eq!(pp.to_text(), "2 1 0\n1 1 0\n");
        assert!(PlanePartition::from_text(2, 2, 2, "0 1\n0 0").is_err());
    }

    #[test]
    fn cube_set_examples() {
        let up = PolymerConfig::new(rows(&[&[0, 1, 0]])).unwrap();
        assert_eq!(up.to_cube_set().unwrap().volume(), 0);
        let down = PolymerConfig::new(rows(&[&[0, -1, 0]])).unwrap();
        let s = down.to_cube_set().unwrap();
        assert_eq!(s, MonotoneCubeSet::full(1));
        assert_eq!(PolymerConfig::from_cube_set(&s).unwrap(), down);

        let not_square = PolymerConfig::new(rows(&[&[0, 1, 0, 1, 0]])).unwrap();
        assert!(not_square.to_cube_set().is_err());
    }

    #[test]
    fn excess_volume_examples() {
        let w = Path::wedge(2, 0).unwrap();
        let top = PolymerConfig::replicate(&w, 2).unwrap();
        assert_eq!(top.excess_volume(&w).unwrap(), 0);
        let down = PolymerConfig::new(rows(&[&[0, -1, 0]])).unwrap();
        assert_eq!(down.excess_volume(&w).unwrap(), 1);
        let low_ceiling = Path::vee(2, 0).unwrap();
        assert!(PolymerConfig::replicate(&w, 1)
            .unwrap()
            .excess_volume(&low_ceiling)
            .is_err());
    }

    #[test]
    fn dominance_examples() {
        let a = PolymerConfig::from_text("+-+-+-").unwrap();
        assert!(a.dominates(&a).unwrap());
        let top = PolymerConfig::replicate(&Path::wedge(6, 0).unwrap(), 1).unwrap();
        let bottom = PolymerConfig::replicate(&Path::vee(6, 0).unwrap(), 1).unwrap();
        assert!(top.dominates(&bottom).unwrap());
        let p = ParticleConfig::new(6, 0, vec![vec![0, 3, 4]]).unwrap().to_polymers();
        let q = ParticleConfig::new(6, 0, vec![vec![1, 2, 3]]).unwrap().to_polymers();
        assert!(!p.dominates(&q).unwrap());
        assert!(!q.dominates(&p).unwrap());
        let other = PolymerConfig::from_text("+-").unwrap();
        assert!(a.dominates(&other).is_err());
    }

    #[test]
    fn text_round_trip() {
        let c = PolymerConfig::from_text("++--\n+-+-\n").unwrap();
        assert_eq!(c.k(), 2);
        assert_eq!(c.to_text(), "++--\n+-+-\n");
        assert_eq!(c.encode(), "++--|+-+-");
        assert!(PolymerConfig::from_text("+-+-\n++--\n").is_err());
        assert!(PolymerConfig::from_text("+x").is_err());
    }

    #[test]
    fn interlacing_rejected() {
        assert!(ParticleConfig::new(4, 0, vec![vec![1, 2], vec![0, 3]]).is_err());
        assert!(ParticleConfig::new(4, 0, vec![vec![2, 1]]).is_err());
        assert!(ParticleConfig::new(4, 0, vec![vec![0, 4]]).is_err());
    }
}
