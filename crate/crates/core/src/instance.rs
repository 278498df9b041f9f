//! Unit-commitment instance data, JSON ingestion, validation and synthetic
//! instance generation.
//!
//! Buses, lines and generators refer to each other by string id. Demand is
//! bus-indexed and already net of any renewable injection, so renewables carry
//! no commitment variables. All quantities are in MW, $ and per-unit
//! susceptance (flows are `B·Δθ` in MW).

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Load-shed penalty used by [`synth_instance`], in $/MW.
pub const SYNTH_PENALTY: f64 = 5e5;

const LEVEL_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid instance: {0}")]
    Invalid(String),
}

/// One breakpoint of a generator's piecewise-linear cost curve.
///
/// `c6` is the running cost at output `p_level`; the objective charges
/// `c6 − c6_first` per unit of the breakpoint weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub p_level: f64,
    pub c6: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub p_min: Vec<f64>,
    pub p_max: Vec<f64>,
    /// No-load cost per step online.
    pub c1: f64,
    /// Startup cost.
    pub c2: f64,
    /// Shutdown cost.
    pub c3: f64,
    /// Quadratic and linear dispatch coefficients; kept for completeness, the
    /// piecewise curve in `segments` is the cost model actually optimized.
    #[serde(default)]
    pub c4: f64,
    #[serde(default)]
    pub c5: f64,
    pub segments: Vec<Segment>,
    pub t_minup: usize,
    pub t_mindn: usize,
    pub r_startup: f64,
    pub r_shutdown: f64,
    pub r_up: f64,
    pub r_down: f64,
    pub initial_on: bool,
}

impl Generator {
    /// Steepest slope between any two breakpoints, in $/MW.
    pub fn max_marginal_cost(&self) -> f64 {
        let s = &self.segments;
        let mut best = 0.0f64;
        for i in 0..s.len() {
            for j in i + 1..s.len() {
                let dp = s[j].p_level - s[i].p_level;
                if dp > 0.0 {
                    best = best.max((s[j].c6 - s[i].c6) / dp);
                }
            }
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    #[serde(default)]
    pub reference: bool,
    /// Net demand per step, MW.
    pub demand: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: String,
    pub to_bus: String,
    pub susceptance: f64,
    pub f_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UcInstance {
    pub horizon: usize,
    pub buses: Vec<Bus>,
    #[serde(default)]
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    /// Load-imbalance penalty per step, $/MW.
    pub penalty_cost: Vec<f64>,
}

/// Index view of an instance: ids resolved to positions.
#[derive(Debug, Clone)]
pub struct Topology {
    pub reference: usize,
    pub gen_bus: Vec<usize>,
    /// `(from, to, susceptance, f_max)` per line.
    pub lines: Vec<(usize, usize, f64, f64)>,
}

impl UcInstance {
    pub fn num_gens(&self) -> usize {
        self.generators.len()
    }

    pub fn num_buses(&self) -> usize {
        self.buses.len()
    }

    pub fn demand(&self, bus: usize, t: usize) -> f64 {
        self.buses[bus].demand[t]
    }

    pub fn total_demand(&self, t: usize) -> f64 {
        self.buses.iter().map(|b| b.demand[t]).sum()
    }

    pub fn total_capacity(&self, t: usize) -> f64 {
        self.generators.iter().map(|g| g.p_max[t]).sum()
    }

    pub fn bus_index(&self, id: &str) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Resolves ids; panics on dangling references, so call after
    /// [`UcInstance::validate`].
    pub fn topology(&self) -> Topology {
        let index: HashMap<&str, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect();
        Topology {
            reference: self.buses.iter().position(|b| b.reference).unwrap_or(0),
            gen_bus: self.generators.iter().map(|g| index[g.bus.as_str()]).collect(),
            lines: self
                .lines
                .iter()
                .map(|l| {
                    (
                        index[l.from_bus.as_str()],
                        index[l.to_bus.as_str()],
                        l.susceptance,
                        l.f_max,
                    )
                })
                .collect(),
        }
    }

    pub fn max_marginal_cost(&self) -> f64 {
        self.generators
            .iter()
            .map(Generator::max_marginal_cost)
            .fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let t_len = self.horizon;
        let bad = |msg: String| Err(InstanceError::Invalid(msg));
        if t_len < 1 {
            return bad("horizon must be at least 1".into());
        }
        if self.buses.is_empty() {
            return bad("instance has no buses".into());
        }
        let mut ids = HashSet::new();
        for b in &self.buses {
            if !ids.insert(b.id.as_str()) {
                return bad(format!("duplicate bus id {}", b.id));
            }
            if b.demand.len() != t_len {
                return bad(format!(
                    "bus {} demand has {} entries, horizon is {t_len}",
                    b.id,
                    b.demand.len()
                ));
            }
            if b.demand.iter().any(|d| !d.is_finite()) {
                return bad(format!("bus {} demand is not finite", b.id));
            }
        }
        match self.buses.iter().filter(|b| b.reference).count() {
            0 => return bad("missing reference bus".into()),
            1 => {}
            _ => return bad("more than one reference bus".into()),
        }
        if self.penalty_cost.len() != t_len {
            return bad(format!(
                "penalty_cost has {} entries, horizon is {t_len}",
                self.penalty_cost.len()
            ));
        }

        for l in &self.lines {
            for end in [&l.from_bus, &l.to_bus] {
                if !ids.contains(end.as_str()) {
                    return bad(format!("line refers to unknown bus {end}"));
                }
            }
            if l.from_bus == l.to_bus {
                return bad(format!("line {0}-{0} connects a bus to itself", l.from_bus));
            }
            if !(l.susceptance > 0.0) || !l.susceptance.is_finite() {
                return bad(format!(
                    "line {}-{} susceptance must be positive",
                    l.from_bus, l.to_bus
                ));
            }
            if !(l.f_max > 0.0) || !l.f_max.is_finite() {
                return bad(format!("line {}-{} f_max must be positive", l.from_bus, l.to_bus));
            }
        }
        if !self.is_connected() {
            return bad("network graph is not connected".into());
        }

        let mut gen_ids = HashSet::new();
        for g in &self.generators {
            self.validate_generator(g)?;
            if !gen_ids.insert(g.id.as_str()) {
                return bad(format!("duplicate generator id {}", g.id));
            }
            if !ids.contains(g.bus.as_str()) {
                return bad(format!("generator {} sits on unknown bus {}", g.id, g.bus));
            }
        }

        let max_cost = self.max_marginal_cost();
        for (t, &c) in self.penalty_cost.iter().enumerate() {
            if !c.is_finite() || c <= max_cost {
                return bad(format!(
                    "penalty below max dispatch cost: c_pen[{t}] = {c} but a generator reaches {max_cost} $/MW"
                ));
            }
        }
        Ok(())
    }

    fn validate_generator(&self, g: &Generator) -> Result<(), InstanceError> {
        let bad = |msg: String| Err(InstanceError::Invalid(format!("generator {}: {msg}", g.id)));
        let t_len = self.horizon;
        if g.p_min.len() != t_len || g.p_max.len() != t_len {
            return bad(format!("p_min/p_max must have {t_len} entries"));
        }
        let scalars = [
            g.c1, g.c2, g.c3, g.c4, g.c5, g.r_startup, g.r_shutdown, g.r_up, g.r_down,
        ];
        if scalars.iter().any(|v| !v.is_finite()) {
            return bad("non-finite cost or ramp value".into());
        }
        for t in 0..t_len {
            if !(0.0 <= g.p_min[t] && g.p_min[t] <= g.p_max[t]) || !g.p_max[t].is_finite() {
                return bad(format!("needs 0 <= p_min <= p_max at t={t}"));
            }
        }
        if g.segments.is_empty() {
            return bad("needs at least one segment".into());
        }
        if g.segments.iter().any(|s| !s.p_level.is_finite() || !s.c6.is_finite()) {
            return bad("non-finite segment".into());
        }
        if g.segments.windows(2).any(|w| w[1].p_level <= w[0].p_level) {
            return bad("segment p_levels must be strictly increasing".into());
        }
        let first = g.segments[0].p_level;
        let last = g.segments[g.segments.len() - 1].p_level;
        for t in 0..t_len {
            if (first - g.p_min[t]).abs() > LEVEL_TOL || (last - g.p_max[t]).abs() > LEVEL_TOL {
                return bad(format!("segments must span p_min..p_max at t={t}"));
            }
        }
        if g.t_minup < 1 || g.t_mindn < 1 {
            return bad("t_minup and t_mindn must be at least 1".into());
        }
        if g.r_startup < 0.0 || g.r_shutdown < 0.0 || g.r_up < 0.0 || g.r_down < 0.0 {
            return bad("ramp limits must be non-negative".into());
        }
        // Below p_min the startup/shutdown ramp rows admit no dispatch at all.
        let p_min_max = g.p_min.iter().copied().fold(0.0, f64::max);
        if g.r_startup < p_min_max || g.r_shutdown < p_min_max {
            return bad("startup and shutdown ramps must be at least p_min".into());
        }
        Ok(())
    }

    fn is_connected(&self) -> bool {
        let n = self.buses.len();
        let index: HashMap<&str, usize> = self
            .buses
            .iter()
            .enumerate()
            .map(|(i, b)| (b.id.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); n];
        for l in &self.lines {
            if let (Some(&a), Some(&b)) = (index.get(l.from_bus.as_str()), index.get(l.to_bus.as_str())) {
                adj[a].push(b);
                adj[b].push(a);
            }
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(a) = queue.pop_front() {
            for &b in &adj[a] {
                if !seen[b] {
                    seen[b] = true;
                    queue.push_back(b);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, InstanceError> {
        let inst: UcInstance = serde_json::from_str(text).map_err(|e| InstanceError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        inst.validate()?;
        Ok(inst)
    }

    pub fn save(&self, path: &Path) -> Result<(), InstanceError> {
        std::fs::write(path, self.to_json()).map_err(|source| InstanceError::Io {
            path: path.to_path_buf(),
            source,
        })
    }
}

pub fn load_instance(path: &Path) -> Result<UcInstance, InstanceError> {
    let text = std::fs::read_to_string(path).map_err(|source| InstanceError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    UcInstance::from_json(&text)
}

fn round_to(v: f64, places: i32) -> f64 {
    let s = 10f64.powi(places);
    (v * s).round() / s
}

/// Deterministic random instance.
///
/// Bus 0 is the reference; buses are joined by a random spanning tree plus a
/// few extra lines. Every generator has three breakpoints with convex costs,
/// startup/shutdown ramps at or above `p_min`, and up/down times of at most 3
/// steps. Total demand sits between 40% and 90% of aggregate `p_max` at every
/// step, following a smooth daily-style profile, and enough units start
/// online that the first step can be served.
pub fn synth_instance(n_gens: usize, n_buses: usize, horizon: usize, seed: u64) -> UcInstance {
    assert!(n_gens >= 1 && n_buses >= 1 && horizon >= 1, "synth_instance needs positive sizes");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let bus_id = |i: usize| format!("b{i}");

    let mut generators = Vec::with_capacity(n_gens);
    for g in 0..n_gens {
        let p_max = rng.gen_range(50..=150) as f64;
        let p_min = (p_max * rng.gen_range(0.2..0.35)).round();
        let mid = ((p_min + p_max) / 2.0).round();
        let m1 = round_to(rng.gen_range(10.0..40.0), 2);
        let m2 = round_to(m1 + rng.gen_range(2.0..15.0), 2);
        let base = round_to(m1 * p_min, 2);
        let segments = vec![
            Segment { p_level: p_min, c6: base },
            Segment { p_level: mid, c6: round_to(base + m1 * (mid - p_min), 2) },
            Segment { p_level: p_max, c6: round_to(base + m1 * (mid - p_min) + m2 * (p_max - mid), 2) },
        ];
        let max_window = horizon.min(3);
        let span = p_max - p_min;
        generators.push(Generator {
            id: format!("g{g}"),
            bus: bus_id(rng.gen_range(0..n_buses)),
            p_min: vec![p_min; horizon],
            p_max: vec![p_max; horizon],
            c1: round_to(rng.gen_range(100.0..600.0) + base, 2),
            c2: round_to(rng.gen_range(200.0..1500.0), 2),
            c3: round_to(rng.gen_range(0.0..200.0), 2),
            c4: round_to(rng.gen_range(0.0..0.05), 4),
            c5: m1,
            segments,
            t_minup: rng.gen_range(1..=max_window),
            t_mindn: rng.gen_range(1..=max_window),
            r_startup: (p_min + span * rng.gen_range(0.3..0.7)).round(),
            r_shutdown: (p_min + span * rng.gen_range(0.3..0.7)).round(),
            r_up: (p_max * rng.gen_range(0.3..0.7)).round(),
            r_down: (p_max * rng.gen_range(0.3..0.7)).round(),
            initial_on: rng.gen_bool(0.5),
        });
    }
    let capacity: f64 = generators.iter().map(|g| g.p_max[0]).sum();

    let mut lines = Vec::new();
    let mut linked = HashSet::new();
    for i in 1..n_buses {
        let j = rng.gen_range(0..i);
        linked.insert((j, i));
        lines.push((j, i));
    }
    for _ in 0..n_buses / 3 {
        let a = rng.gen_range(0..n_buses);
        let b = rng.gen_range(0..n_buses);
        let key = (a.min(b), a.max(b));
        if a != b && linked.insert(key) {
            lines.push(key);
        }
    }
    let lines = lines
        .into_iter()
        .map(|(a, b)| Line {
            from_bus: bus_id(a),
            to_bus: bus_id(b),
            susceptance: round_to(rng.gen_range(5.0..15.0), 2),
            f_max: (capacity * rng.gen_range(1.0..1.5)).round(),
        })
        .collect();

    let weights: Vec<f64> = (0..n_buses).map(|_| rng.gen_range(0.5..1.5)).collect();
    let wsum: f64 = weights.iter().sum();
    let phase = rng.gen_range(0.0..std::f64::consts::TAU);
    let mut demand = vec![vec![0.0; horizon]; n_buses];
    for t in 0..horizon {
        let wave = (std::f64::consts::TAU * t as f64 / 24.0 + phase).sin();
        let frac = (0.62 + 0.2 * wave + rng.gen_range(-0.05..0.05)).clamp(0.42, 0.88);
        let total = frac * capacity;
        for n in 0..n_buses {
            demand[n][t] = round_to(total * weights[n] / wsum, 2);
        }
    }
    // Units starting cold are capped by their startup ramp in the first step;
    // switch units on until that step can be served.
    let first: f64 = demand.iter().map(|d| d[0]).sum();
    let reach = |gens: &[Generator]| -> f64 {
        gens.iter()
            .map(|g| if g.initial_on { g.p_max[0] } else { g.r_startup })
            .sum()
    };
    for g in 0..n_gens {
        if reach(&generators) >= 1.05 * first {
            break;
        }
        generators[g].initial_on = true;
    }

    let buses = demand
        .into_iter()
        .enumerate()
        .map(|(n, d)| Bus {
            id: bus_id(n),
            reference: n == 0,
            demand: d,
        })
        .collect();

    UcInstance {
        horizon,
        buses,
        lines,
        generators,
        penalty_cost: vec![SYNTH_PENALTY; horizon],
    }
}
