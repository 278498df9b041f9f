//! QUBO samplers behind a name-keyed registry.
//!
//! Every sampler returns a [`SampleSet`] whose total multiplicity equals the
//! requested read count and whose energies are recomputed with
//! [`Qubo::energy`]. [`SamplerRegistry::sample`] checks that contract on every
//! call, so misbehaving adapters fail loudly instead of corrupting a run.
//!
//! External samplers receive the sparse text form of the QUBO (see
//! [`Qubo::to_text`]) on stdin, with `--reads N --sweeps K --seed S` appended
//! to their command line, and must print one sample per line as a string of
//! `0`/`1` characters in variable order. Blank lines and lines starting with
//! `#` are ignored.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_xoshiro::Xoshiro256PlusPlus;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::qubo::{PenaltyGroup, Qubo, VarKind};

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error("sampler {0} is already registered")]
    Duplicate(String),
    #[error("no sampler named {0}")]
    Unknown(String),
    #[error("invalid anneal parameters: {0}")]
    Params(String),
    #[error("sampler {name} broke its contract: {message}")]
    Contract { name: String, message: String },
    #[error("sampler {name} failed: {message}")]
    Failed { name: String, message: String },
}

/// Mixes a base seed with a stream number (splitmix64 finalizer).
pub fn split_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AnnealParams {
    pub num_reads: usize,
    pub sweeps: usize,
    /// Inverse-temperature range; derived from the QUBO when `None`.
    pub beta_range: Option<(f64, f64)>,
    pub seed: u64,
}

impl AnnealParams {
    pub fn new(num_reads: usize, sweeps: usize, seed: u64) -> Self {
        Self {
            num_reads,
            sweeps,
            beta_range: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.num_reads < 1 {
            return Err(SamplerError::Params("num_reads must be at least 1".into()));
        }
        if self.sweeps < 1 {
            return Err(SamplerError::Params("sweeps must be at least 1".into()));
        }
        if let Some((b0, b1)) = self.beta_range {
            if !(b0 > 0.0 && b0 < b1 && b1.is_finite()) {
                return Err(SamplerError::Params("need 0 < beta0 < beta1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Sample {
    pub bits: Vec<u8>,
    pub energy: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleInfo {
    pub sampler: String,
    pub sweeps: usize,
    pub beta_range: Option<(f64, f64)>,
    pub seed: u64,
    #[serde(skip)]
    pub wall_time: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleSet {
    pub samples: Vec<Sample>,
    pub info: SampleInfo,
}

impl SampleSet {
    /// Merges identical bit strings and sorts by energy, then by bits.
    pub fn from_reads(qubo: &Qubo, reads: Vec<Vec<u8>>, info: SampleInfo) -> Self {
        let mut seen: HashMap<Vec<u8>, usize> = HashMap::new();
        let mut samples: Vec<Sample> = Vec::new();
        for bits in reads {
            if let Some(&k) = seen.get(&bits) {
                samples[k].multiplicity += 1;
            } else {
                seen.insert(bits.clone(), samples.len());
                let energy = qubo.energy(&bits);
                samples.push(Sample {
                    bits,
                    energy,
                    multiplicity: 1,
                });
            }
        }
        samples.sort_by(|a, b| a.energy.total_cmp(&b.energy).then_with(|| a.bits.cmp(&b.bits)));
        Self { samples, info }
    }

    pub fn best(&self) -> Option<&Sample> {
        self.samples.first()
    }

    pub fn total_reads(&self) -> usize {
        self.samples.iter().map(|s| s.multiplicity).sum()
    }

    /// Same samples, ignoring metadata such as wall time.
    pub fn same_samples(&self, other: &SampleSet) -> bool {
        self.samples == other.samples
    }
}

pub trait Sampler: Send + Sync {
    fn name(&self) -> &str;
    fn sample(&self, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError>;
}

/// Samplers selectable by name.
pub struct SamplerRegistry {
    samplers: BTreeMap<String, Box<dyn Sampler>>,
}

impl std::fmt::Debug for SamplerRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.names()).finish()
    }
}

impl Default for SamplerRegistry {
    fn default() -> Self {
        Self::with_defaults(0.05)
    }
}

impl SamplerRegistry {
    pub fn empty() -> Self {
        Self {
            samplers: BTreeMap::new(),
        }
    }

    /// `sa`, `noisy` (flip rate `noise_rate`) and `exact`.
    pub fn with_defaults(noise_rate: f64) -> Self {
        let mut r = Self::empty();
        r.register("sa", Box::new(SimulatedAnnealing)).expect("fresh registry");
        r.register("noisy", Box::new(NoisySampler::new(noise_rate))).expect("fresh registry");
        r.register("exact", Box::new(ExactSampler::default())).expect("fresh registry");
        r
    }

    pub fn register(&mut self, name: &str, sampler: Box<dyn Sampler>) -> Result<(), SamplerError> {
        if self.samplers.contains_key(name) {
            return Err(SamplerError::Duplicate(name.to_string()));
        }
        self.samplers.insert(name.to_string(), sampler);
        Ok(())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.samplers.keys().map(String::as_str)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.samplers.contains_key(name)
    }

    /// Runs sampler `name` and checks the result against the contract.
    pub fn sample(&self, name: &str, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError> {
        let sampler = self
            .samplers
            .get(name)
            .ok_or_else(|| SamplerError::Unknown(name.to_string()))?;
        params.validate()?;
        let set = sampler.sample(qubo, params)?;
        check_contract(name, qubo, params, &set)?;
        Ok(set)
    }
}

fn check_contract(name: &str, qubo: &Qubo, params: &AnnealParams, set: &SampleSet) -> Result<(), SamplerError> {
    let broke = |message: String| {
        Err(SamplerError::Contract {
            name: name.to_string(),
            message,
        })
    };
    if set.total_reads() != params.num_reads {
        return broke(format!("returned {} reads, {} requested", set.total_reads(), params.num_reads));
    }
    for s in &set.samples {
        if s.bits.len() != qubo.len() || s.bits.iter().any(|&b| b > 1) {
            return broke("sample is not a bit vector of the qubo's length".into());
        }
        if s.multiplicity == 0 {
            return broke("zero multiplicity".into());
        }
        let e = qubo.energy(&s.bits);
        if e != s.energy {
            return broke(format!("stored energy {} differs from recomputed {e}", s.energy));
        }
    }
    if set.samples.windows(2).any(|w| w[0].energy > w[1].energy) {
        return broke("samples not sorted by energy".into());
    }
    Ok(())
}

/// QUBO in flip-friendly form: local fields plus block residuals.
/// Flattened adjacency: entries of variable `i` are `items[start[i]..start[i + 1]]`.
struct Csr {
    start: Vec<usize>,
    items: Vec<(usize, f64)>,
}

impl Csr {
    fn from_lists(lists: Vec<Vec<(usize, f64)>>) -> Self {
        let mut start = Vec::with_capacity(lists.len() + 1);
        start.push(0);
        let mut items = Vec::new();
        for l in lists {
            items.extend(l);
            start.push(items.len());
        }
        Self { start, items }
    }

    #[inline]
    fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.items[self.start[i]..self.start[i + 1]]
    }
}

struct Compiled {
    linear: Vec<f64>,
    neighbors: Csr,
    /// Per variable: (penalty block, coefficient in that block).
    members: Csr,
    weights: Vec<f64>,
    constants: Vec<f64>,
}

impl Compiled {
    fn new(q: &Qubo) -> Self {
        let n = q.len();
        let mut neighbors = vec![Vec::new(); n];
        for (&(i, j), &c) in q.quadratic() {
            neighbors[i].push((j, c));
            neighbors[j].push((i, c));
        }
        let mut memberships = vec![Vec::new(); n];
        for (b, block) in q.blocks().iter().enumerate() {
            for &(i, c) in &block.terms {
                memberships[i].push((b, c));
            }
        }
        Self {
            linear: q.linear().to_vec(),
            neighbors: Csr::from_lists(neighbors),
            members: Csr::from_lists(memberships),
            weights: q.blocks().iter().map(|b| b.weight).collect(),
            constants: q.blocks().iter().map(|b| b.constant).collect(),
        }
    }

    /// Largest and smallest nonzero single-flip energy scales, from the
    /// coefficients alone.
    fn delta_range(&self, q: &Qubo) -> (f64, f64) {
        let max_residual: Vec<f64> = q
            .blocks()
            .iter()
            .map(|b| b.constant.abs() + b.terms.iter().map(|(_, c)| c.abs()).sum::<f64>())
            .collect();
        let mut hi = 0.0f64;
        let mut lo = f64::INFINITY;
        let mut consider = |v: f64| {
            if v > 0.0 {
                lo = lo.min(v);
            }
        };
        for i in 0..self.linear.len() {
            let mut d = self.linear[i].abs();
            consider(self.linear[i].abs());
            for &(_, c) in self.neighbors.row(i) {
                d += c.abs();
                consider(c.abs());
            }
            for &(b, c) in self.members.row(i) {
                let w = self.weights[b];
                d += w * (2.0 * c.abs() * max_residual[b] + c * c);
                consider(w * c * c);
            }
            hi = hi.max(d);
        }
        if hi == 0.0 {
            (1.0, 1.0)
        } else {
            (hi, lo.min(hi))
        }
    }

    fn anneal(&self, sweeps: usize, betas: (f64, f64), rng: &mut Xoshiro256PlusPlus) -> Vec<u8> {
        let n = self.linear.len();
        let mut x: Vec<u8> = (0..n).map(|_| rng.gen::<bool>() as u8).collect();
        let mut field = self.linear.clone();
        // Residuals are stored pre-scaled by the block weight so the inner
        // loop needs one multiply per membership.
        let mut resid: Vec<f64> = self.constants.iter().zip(&self.weights).map(|(c, w)| c * w).collect();
        let members: Vec<(usize, f64, f64)> = self
            .members
            .items
            .iter()
            .map(|&(b, c)| (b, c, self.weights[b] * c))
            .collect();
        for i in 0..n {
            if x[i] == 1 {
                for &(j, c) in self.neighbors.row(i) {
                    field[j] += c;
                }
                for &(b, c, _) in &members[self.members.start[i]..self.members.start[i + 1]] {
                    resid[b] += self.weights[b] * c;
                }
            }
        }
        let (b0, b1) = betas;
        let ratio = if sweeps > 1 { (b1 / b0).powf(1.0 / (sweeps - 1) as f64) } else { 1.0 };
        let mut beta = if sweeps > 1 { b0 } else { b1 };
        for _ in 0..sweeps {
            for i in 0..n {
                let s = if x[i] == 0 { 1.0 } else { -1.0 };
                let mine = &members[self.members.start[i]..self.members.start[i + 1]];
                let mut delta = s * field[i];
                for &(b, c, wc) in mine {
                    delta += c * (2.0 * s * resid[b] + wc);
                }
                // exp(-40) is below the resolution of a uniform f64 draw.
                if delta <= 0.0 || (beta * delta < 40.0 && rng.gen::<f64>() < (-beta * delta).exp()) {
                    x[i] ^= 1;
                    for &(j, c) in self.neighbors.row(i) {
                        field[j] += s * c;
                    }
                    for &(b, _, wc) in mine {
                        resid[b] += s * wc;
                    }
                }
            }
            beta *= ratio;
        }
        x
    }
}

/// Inverse temperatures giving roughly 80% acceptance of the largest
/// single-flip uphill move at the start and 1% acceptance of the smallest at
/// the end.
pub fn default_beta_range(qubo: &Qubo) -> (f64, f64) {
    let (hi, lo) = Compiled::new(qubo).delta_range(qubo);
    let b0 = 1.25f64.ln() / hi;
    let b1 = 100f64.ln() / lo;
    if b1 > b0 {
        (b0, b1)
    } else {
        (b0, b0 * 100f64.ln() / 1.25f64.ln())
    }
}

/// Single-flip Metropolis annealing with a geometric inverse-temperature
/// schedule. Reads run in parallel and are merged in read order.
pub struct SimulatedAnnealing;

impl SimulatedAnnealing {
    fn reads(&self, qubo: &Qubo, params: &AnnealParams) -> (Vec<Vec<u8>>, (f64, f64)) {
        let compiled = Compiled::new(qubo);
        let betas = params.beta_range.unwrap_or_else(|| default_beta_range(qubo));
        let reads = (0..params.num_reads)
            .into_par_iter()
            .map(|r| {
                let mut rng = Xoshiro256PlusPlus::seed_from_u64(split_seed(params.seed, r as u64));
                compiled.anneal(params.sweeps, betas, &mut rng)
            })
            .collect();
        (reads, betas)
    }
}

impl Sampler for SimulatedAnnealing {
    fn name(&self) -> &str {
        "sa"
    }

    fn sample(&self, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError> {
        let start = Instant::now();
        let (reads, betas) = self.reads(qubo, params);
        let info = SampleInfo {
            sampler: self.name().to_string(),
            sweeps: params.sweeps,
            beta_range: Some(betas),
            seed: params.seed,
            wall_time: start.elapsed(),
        };
        Ok(SampleSet::from_reads(qubo, reads, info))
    }
}

/// Annealing followed by independent bit flips with probability `rate`.
pub struct NoisySampler {
    pub rate: f64,
    inner: SimulatedAnnealing,
}

impl NoisySampler {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..=1.0).contains(&rate), "noise rate must lie in [0, 1]");
        Self {
            rate,
            inner: SimulatedAnnealing,
        }
    }
}

const NOISE_STREAM: u64 = 0x6e_6f69_7365;

impl Sampler for NoisySampler {
    fn name(&self) -> &str {
        "noisy"
    }

    fn sample(&self, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError> {
        let start = Instant::now();
        let (mut reads, betas) = self.inner.reads(qubo, params);
        for (r, bits) in reads.iter_mut().enumerate() {
            let mut rng = ChaCha8Rng::seed_from_u64(split_seed(params.seed ^ NOISE_STREAM, r as u64));
            for b in bits.iter_mut() {
                if rng.gen::<f64>() < self.rate {
                    *b ^= 1;
                }
            }
        }
        let info = SampleInfo {
            sampler: self.name().to_string(),
            sweeps: params.sweeps,
            beta_range: Some(betas),
            seed: params.seed,
            wall_time: start.elapsed(),
        };
        Ok(SampleSet::from_reads(qubo, reads, info))
    }
}

/// Exhaustive minimizer for small QUBOs.
///
/// For master QUBOs it enumerates only the commitment bits: each min-up/down
/// slack is set to its best value, and the η register is chosen by integer
/// search on its (convex) energy profile with every cut slack at its best
/// value. Other QUBOs are enumerated bit by bit. The `num_reads` lowest
/// distinct assignments are returned, each with multiplicity one, padded by
/// repeating the best when fewer exist.
pub struct ExactSampler {
    pub max_enumerated_bits: usize,
}

impl Default for ExactSampler {
    fn default() -> Self {
        Self {
            max_enumerated_bits: 20,
        }
    }
}

struct Registers {
    free: Vec<usize>,
    /// Slack bit and the blocks it appears in.
    slacks: Vec<(usize, Vec<usize>)>,
    eta: Vec<usize>,
    /// Per cut block: block index and slack bits.
    cuts: Vec<(usize, Vec<usize>)>,
}

impl ExactSampler {
    fn registers(qubo: &Qubo) -> Registers {
        let mut r = Registers {
            free: Vec::new(),
            slacks: Vec::new(),
            eta: Vec::new(),
            cuts: Vec::new(),
        };
        let mut cut_bits: BTreeMap<usize, Vec<(usize, usize)>> = BTreeMap::new();
        for i in 0..qubo.len() {
            match qubo.kind(i) {
                VarKind::MinUpSlack { .. } | VarKind::MinDownSlack { .. } => {
                    let blocks = (0..qubo.blocks().len())
                        .filter(|&b| qubo.blocks()[b].terms.iter().any(|&(j, _)| j == i))
                        .collect();
                    r.slacks.push((i, blocks))
                }
                VarKind::EtaBit(k) => {
                    debug_assert_eq!(k, r.eta.len());
                    r.eta.push(i)
                }
                VarKind::CutSlackBit { cut, bit } => cut_bits.entry(cut).or_default().push((bit, i)),
                VarKind::Commit { .. } | VarKind::Plain => r.free.push(i),
            }
        }
        let p4: Vec<usize> = qubo
            .blocks()
            .iter()
            .enumerate()
            .filter(|(_, b)| b.group == PenaltyGroup::P4)
            .map(|(k, _)| k)
            .collect();
        for (c, &block) in p4.iter().enumerate() {
            let mut bits = cut_bits.remove(&c).unwrap_or_default();
            bits.sort();
            r.cuts.push((block, bits.into_iter().map(|(_, i)| i).collect()));
        }
        r
    }

    /// Sets slack and register bits to their best values given the free bits.
    fn complete(qubo: &Qubo, regs: &Registers, bits: &mut [u8]) {
        // Only the slack's own terms are compared; the full energy can be
        // large enough to swallow the difference.
        for (s, blocks) in &regs.slacks {
            let local = |bits: &[u8]| -> f64 {
                let mut e = qubo.linear()[*s] * bits[*s] as f64;
                e += blocks.iter().map(|&b| qubo.blocks()[b].energy(bits)).sum::<f64>();
                e += qubo
                    .quadratic()
                    .iter()
                    .filter(|(&(i, j), _)| i == *s || j == *s)
                    .map(|(&(i, j), c)| c * (bits[i] & bits[j]) as f64)
                    .sum::<f64>();
                e
            };
            bits[*s] = 0;
            let e0 = local(bits);
            bits[*s] = 1;
            if local(bits) >= e0 {
                bits[*s] = 0;
            }
        }
        for &i in regs.eta.iter().chain(regs.cuts.iter().flat_map(|(_, b)| b)) {
            bits[i] = 0;
        }
        // With η and every s₃ at zero the block residual is the cut's LHS.
        let lhs: Vec<f64> = regs.cuts.iter().map(|&(b, _)| qubo.blocks()[b].residual(bits)).collect();
        let eta_max = if regs.eta.is_empty() { 0 } else { (1u64 << regs.eta.len()) - 1 };
        let unit_cost = regs.eta.first().map(|&i| qubo.linear()[i]).unwrap_or(0.0);
        let energy_at = |e: u64| -> f64 {
            let mut total = unit_cost * e as f64;
            for (c, (b, sbits)) in regs.cuts.iter().enumerate() {
                let smax = if sbits.is_empty() { 0 } else { (1i64 << sbits.len()) - 1 };
                let s = (e as f64 - lhs[c]).clamp(0.0, smax as f64);
                let r = lhs[c] - e as f64 + s;
                total += qubo.blocks()[*b].weight * r * r;
            }
            total
        };
        let (mut lo, mut hi) = (0u64, eta_max);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if energy_at(mid + 1) < energy_at(mid) {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        for (k, &i) in regs.eta.iter().enumerate() {
            bits[i] = ((lo >> k) & 1) as u8;
        }
        for (c, (_, sbits)) in regs.cuts.iter().enumerate() {
            let smax = if sbits.is_empty() { 0 } else { (1i64 << sbits.len()) - 1 };
            let s = ((lo as f64 - lhs[c]).round() as i64).clamp(0, smax) as u64;
            for (k, &i) in sbits.iter().enumerate() {
                bits[i] = ((s >> k) & 1) as u8;
            }
        }
    }
}

impl Sampler for ExactSampler {
    fn name(&self) -> &str {
        "exact"
    }

    fn sample(&self, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError> {
        let start = Instant::now();
        let regs = Self::registers(qubo);
        if regs.free.len() > self.max_enumerated_bits {
            return Err(SamplerError::Failed {
                name: self.name().into(),
                message: format!(
                    "{} enumerated bits exceed the limit of {}",
                    regs.free.len(),
                    self.max_enumerated_bits
                ),
            });
        }
        let mut scored: Vec<(f64, Vec<u8>)> = Vec::with_capacity(1 << regs.free.len());
        let mut bits = vec![0u8; qubo.len()];
        for mask in 0u64..(1u64 << regs.free.len()) {
            for (k, &i) in regs.free.iter().enumerate() {
                bits[i] = ((mask >> k) & 1) as u8;
            }
            Self::complete(qubo, &regs, &mut bits);
            scored.push((qubo.energy(&bits), bits.clone()));
        }
        scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        let keep = params.num_reads.min(scored.len());
        let mut reads: Vec<Vec<u8>> = scored.into_iter().take(keep).map(|(_, b)| b).collect();
        while reads.len() < params.num_reads {
            reads.push(reads[0].clone());
        }
        let info = SampleInfo {
            sampler: self.name().to_string(),
            sweeps: params.sweeps,
            beta_range: None,
            seed: params.seed,
            wall_time: start.elapsed(),
        };
        Ok(SampleSet::from_reads(qubo, reads, info))
    }
}

/// Sampler running an external program (see module docs for the protocol).
pub struct ExternalSampler {
    name: String,
    program: PathBuf,
    args: Vec<String>,
}

impl ExternalSampler {
    pub fn new(name: &str, program: impl Into<PathBuf>, args: Vec<String>) -> Self {
        Self {
            name: name.to_string(),
            program: program.into(),
            args,
        }
    }

    fn fail(&self, message: String) -> SamplerError {
        SamplerError::Failed {
            name: self.name.clone(),
            message,
        }
    }
}

impl Sampler for ExternalSampler {
    fn name(&self) -> &str {
        &self.name
    }

    fn sample(&self, qubo: &Qubo, params: &AnnealParams) -> Result<SampleSet, SamplerError> {
        let start = Instant::now();
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .args([
                "--reads",
                &params.num_reads.to_string(),
                "--sweeps",
                &params.sweeps.to_string(),
                "--seed",
                &params.seed.to_string(),
            ])
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| self.fail(format!("cannot start {}: {e}", self.program.display())))?;
        let text = qubo.to_text();
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            stdin
                .write_all(text.as_bytes())
                .map_err(|e| self.fail(format!("writing qubo: {e}")))?;
        }
        let out = child
            .wait_with_output()
            .map_err(|e| self.fail(format!("waiting for process: {e}")))?;
        if !out.status.success() {
            return Err(self.fail(format!(
                "exited with {}: {}",
                out.status,
                String::from_utf8_lossy(&out.stderr).trim()
            )));
        }
        let mut reads = Vec::new();
        for line in String::from_utf8_lossy(&out.stdout).lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bits: Option<Vec<u8>> = line
                .chars()
                .map(|c| match c {
                    '0' => Some(0),
                    '1' => Some(1),
                    _ => None,
                })
                .collect();
            reads.push(bits.ok_or_else(|| self.fail(format!("bad sample line {line:?}")))?);
        }
        if let Some(bad) = reads.iter().find(|b| b.len() != qubo.len()) {
            return Err(SamplerError::Contract {
                name: self.name.clone(),
                message: format!("sample of length {} for {} variables", bad.len(), qubo.len()),
            });
        }
        let info = SampleInfo {
            sampler: self.name.clone(),
            sweeps: params.sweeps,
            beta_range: None,
            seed: params.seed,
            wall_time: start.elapsed(),
        };
        Ok(SampleSet::from_reads(qubo, reads, info))
    }
}
