//! Monte Carlo sweeps, interval estimates, threshold crossings and the
//! local-dimension rescaling.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{ChannelError, NoiseParams, Simulator};
use crate::code::{build_code, CodeError};
use crate::decoder::{DecoderError, DecoderKind, DecoderPair, DecoderScratch};
use crate::lattice::{Manifold, ManifoldKind};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Code(#[from] CodeError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("curves do not cross inside the swept range")]
    NoCrossing,
}

impl ExperimentError {
    /// True for failures of a decoder to honour its syndrome contract.
    pub fn is_decoder_contract(&self) -> bool {
        matches!(
            self,
            Self::Channel(ChannelError::Decoder(DecoderError::Contract | DecoderError::Unsatisfiable))
                | Self::Channel(ChannelError::SyndromeAfterReadout)
        )
    }
}

/// Default normal quantile for 95% intervals.
pub const Z95: f64 = 1.96;

fn default_z() -> f64 {
    Z95
}

/// A sweep over `d x L x t x p` for one manifold and decoder pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub manifold: ManifoldKind,
    pub d: Vec<u32>,
    #[serde(rename = "L")]
    pub l: Vec<usize>,
    pub p: Vec<f64>,
    pub t: Vec<usize>,
    pub trials: u64,
    pub validator: DecoderKind,
    pub corrector: DecoderKind,
    pub seed: u64,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default = "default_z")]
    pub z: f64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::Config(m));
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.d.is_empty() || self.l.is_empty() || self.p.is_empty() || self.t.is_empty() {
            return bad("d, L, p and t must be non-empty".into());
        }
        if let Some(&d) = self.d.iter().find(|&&d| d < 2) {
            return bad(format!("d = {d} is below 2"));
        }
        if let Some(&p) = self.p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return bad(format!("p = {p} outside [0, 1]"));
        }
        for &l in &self.l {
            Manifold::new(self.manifold, l).map_err(|e| ExperimentError::Config(e.to_string()))?;
        }
        let matching = self.validator == DecoderKind::Matching || self.corrector == DecoderKind::Matching;
        if matching && self.d.iter().any(|&d| d != 2) {
            return bad("matching decoders need d = 2".into());
        }
        if !(self.z > 0.0) {
            return bad(format!("z = {} must be positive", self.z));
        }
        Ok(())
    }

    pub fn pair(&self) -> DecoderPair {
        DecoderPair { validator: self.validator, corrector: self.corrector }
    }

    /// Parses without validating, so callers can override fields first.
    pub fn parse_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        let cfg = Self::parse_toml(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }
}

/// Parses `a:b:step` (inclusive) or a comma-separated list.
pub fn parse_grid(s: &str) -> Result<Vec<f64>, ExperimentError> {
    let err = || ExperimentError::Config(format!("bad grid {s:?}"));
    let parts: Vec<&str> = s.split(':').collect();
    if parts.len() == 3 {
        let v: Vec<f64> = parts.iter().map(|x| x.trim().parse::<f64>().map_err(|_| err())).collect::<Result<_, _>>()?;
        let (a, b, step) = (v[0], v[1], v[2]);
        if !(step > 0.0) || b < a {
            return Err(err());
        }
        let count = ((b - a) / step + 1e-9).floor() as usize + 1;
        return Ok((0..count).map(|i| ((a + i as f64 * step) * 1e12).round() / 1e12).collect());
    }
    s.split(',').map(|x| x.trim().parse::<f64>().map_err(|_| err())).collect()
}

/// Parses a comma-separated list of integers.
pub fn parse_list<T: std::str::FromStr>(s: &str) -> Result<Vec<T>, ExperimentError> {
    s.split(',').map(|x| x.trim().parse::<T>().map_err(|_| ExperimentError::Config(format!("bad list {s:?}")))).collect()
}

/// One row of the results file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DataPoint {
    pub manifold: ManifoldKind,
    pub d: u32,
    #[serde(rename = "L")]
    pub l: usize,
    pub p: f64,
    pub t: usize,
    pub validator: DecoderKind,
    pub corrector: DecoderKind,
    pub trials: u64,
    pub failures: u64,
    pub pfail: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
}

/// Agresti-Coull interval: `n' = n + z^2`, `p' = (k + z^2/2) / n'`,
/// half-width `z sqrt(p'(1-p')/n')`, clamped to `[0, 1]`. Returns
/// `(p', lo, hi)`.
pub fn agresti_coull(failures: u64, trials: u64, z: f64) -> (f64, f64, f64) {
    let z2 = z * z;
    let nt = trials as f64 + z2;
    let pt = (failures as f64 + z2 / 2.0) / nt;
    let h = z * (pt * (1.0 - pt) / nt).sqrt();
    (pt, (pt - h).max(0.0), (pt + h).min(1.0))
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Grid coordinates of one estimate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointSpec {
    pub manifold: ManifoldKind,
    pub d: u32,
    pub l: usize,
    pub p: f64,
    pub t: usize,
    pub pair: DecoderPair,
}

impl PointSpec {
    /// Seed of this point's trial streams: a splitmix chain over the master
    /// seed and every coordinate.
    pub fn stream_seed(&self, master: u64) -> u64 {
        let parts = [
            self.manifold as u64,
            self.d as u64,
            self.l as u64,
            self.p.to_bits(),
            self.t as u64,
            self.pair.validator as u64,
            self.pair.corrector as u64,
        ];
        parts.iter().fold(splitmix(master), |h, &v| splitmix(h ^ v))
    }
}

/// Environment variable capping the number of worker threads.
pub const THREADS_VAR: &str = "SAQD_THREADS";

/// Sizes the global worker pool from `SAQD_THREADS` when it is set.
/// Returns the resulting worker count.
pub fn configure_threads() -> Result<usize, ExperimentError> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| ExperimentError::Config(format!("{THREADS_VAR}={v:?} is not a positive integer")))?;
        // A pool that already exists keeps its size.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(rayon::current_num_threads())
}

/// Trials per work unit; each unit reuses one decoder scratch.
const CHUNK: u64 = 64;

/// Runs `trials` independent trials. Trial `i` draws from the ChaCha8
/// stream `i` of the point seed, so the count does not depend on how the
/// work is scheduled.
pub fn estimate_pfail(sim: &Simulator, spec: PointSpec, trials: u64, master_seed: u64, z: f64) -> Result<DataPoint, ExperimentError> {
    let noise = NoiseParams::new(spec.p, spec.t)?;
    let seed = spec.stream_seed(master_seed);
    let chunks = trials.div_ceil(CHUNK);
    let failures: u64 = (0..chunks)
        .into_par_iter()
        .map(|c| -> Result<u64, ChannelError> {
            let mut scratch = DecoderScratch::default();
            let mut fails = 0;
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i);
                fails += sim.run_trial(noise, spec.pair, &mut scratch, &mut rng)? as u64;
            }
            Ok(fails)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;
    let (_, ci_lo, ci_hi) = agresti_coull(failures, trials, z);
    Ok(DataPoint {
        manifold: spec.manifold,
        d: spec.d,
        l: spec.l,
        p: spec.p,
        t: spec.t,
        validator: spec.pair.validator,
        corrector: spec.pair.corrector,
        trials,
        failures,
        pfail: failures as f64 / trials as f64,
        ci_lo,
        ci_hi,
        seed: master_seed,
    })
}

/// Runs the whole grid, writing each row as soon as it is done. Returns all
/// rows. Rows are ordered by `d`, then `L`, then `t`, then `p`.
pub fn run_sweep<W: Write>(cfg: &RunConfig, out: W, mut progress: impl FnMut(&DataPoint)) -> Result<Vec<DataPoint>, ExperimentError> {
    cfg.validate()?;
    let mut writer = csv::Writer::from_writer(out);
    let mut rows = Vec::new();
    for &d in &cfg.d {
        for &l in &cfg.l {
            let code = build_code(Manifold::new(cfg.manifold, l).map_err(CodeError::from)?, d)?;
            let sim = Simulator::new(&code)?;
            for &t in &cfg.t {
                for &p in &cfg.p {
                    let spec = PointSpec { manifold: cfg.manifold, d, l, p, t, pair: cfg.pair() };
                    let row = estimate_pfail(&sim, spec, cfg.trials, cfg.seed, cfg.z)?;
                    writer.serialize(&row)?;
                    writer.flush()?;
                    progress(&row);
                    rows.push(row);
                }
            }
        }
    }
    writer.flush()?;
    Ok(rows)
}

pub fn read_results(path: &Path) -> Result<Vec<DataPoint>, ExperimentError> {
    let mut rdr = csv::Reader::from_path(path)?;
    Ok(rdr.deserialize().collect::<Result<Vec<DataPoint>, _>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ThresholdEstimate {
    pub p_th: f64,
    pub uncertainty: f64,
    pub method: &'static str,
    /// The two sizes whose curves were intersected.
    pub sizes: (usize, usize),
}

/// Intersection of the linearly interpolated curves of the two largest
/// sizes. With several sign changes the crossing nearest the median swept
/// `p` wins. The uncertainty propagates the interval half-widths at the two
/// bracketing grid points.
pub fn crossing_threshold(curves: &BTreeMap<usize, Vec<DataPoint>>) -> Result<ThresholdEstimate, ExperimentError> {
    let mut sizes: Vec<usize> = curves.iter().filter(|(_, v)| !v.is_empty()).map(|(&l, _)| l).collect();
    if sizes.len() < 2 {
        return Err(ExperimentError::Config("need curves for at least two sizes".into()));
    }
    sizes.sort_unstable();
    let (la, lb) = (sizes[sizes.len() - 2], sizes[sizes.len() - 1]);
    let by_p = |l: usize| -> BTreeMap<u64, &DataPoint> { curves[&l].iter().map(|pt| (pt.p.to_bits(), pt)).collect() };
    let (a, b) = (by_p(la), by_p(lb));
    let mut shared: Vec<(f64, f64, f64)> = a
        .iter()
        .filter_map(|(k, pa)| b.get(k).map(|pb| (pa.p, pb.pfail - pa.pfail, half(pa).hypot(half(pb)))))
        .collect();
    shared.sort_by(|x, y| x.0.total_cmp(&y.0));
    if shared.len() < 2 {
        return Err(ExperimentError::Config("curves share fewer than two p values".into()));
    }
    let median = shared[shared.len() / 2].0;
    let mut best: Option<(f64, f64)> = None;
    for w in shared.windows(2) {
        let ((p0, d0, s0), (p1, d1, s1)) = (w[0], w[1]);
        let crosses = (d0 <= 0.0 && d1 > 0.0) || (d0 >= 0.0 && d1 < 0.0) || (d0 == 0.0 && d1 != 0.0);
        if !crosses {
            continue;
        }
        let dp = p1 - p0;
        let den = d0 - d1;
        let p = p0 + dp * d0 / den;
        let g0 = dp * -d1 / (den * den);
        let g1 = dp * d0 / (den * den);
        let sigma = (g0 * s0).hypot(g1 * s1);
        if best.map_or(true, |(bp, _)| (p - median).abs() < (bp - median).abs()) {
            best = Some((p, sigma));
        }
    }
    let (p_th, uncertainty) = best.ok_or(ExperimentError::NoCrossing)?;
    Ok(ThresholdEstimate { p_th, uncertainty, method: "crossing", sizes: (la, lb) })
}

fn half(pt: &DataPoint) -> f64 {
    (pt.ci_hi - pt.ci_lo) / 2.0
}

/// Groups rows into per-size curves for one `(manifold, d, t, decoders)`.
pub fn curves_for(rows: &[DataPoint], manifold: ManifoldKind, d: u32, t: usize, pair: DecoderPair) -> BTreeMap<usize, Vec<DataPoint>> {
    let mut out: BTreeMap<usize, Vec<DataPoint>> = BTreeMap::new();
    for r in rows {
        if r.manifold == manifold && r.d == d && r.t == t && r.validator == pair.validator && r.corrector == pair.corrector {
            out.entry(r.l).or_default().push(r.clone());
        }
    }
    out
}

/// Maps a threshold at dimension `d` to the qubit-equivalent rate
/// `1 - (1 - p)^(1 / log2 d)`.
pub fn rescale_threshold(p_th: f64, d: u32) -> Result<f64, ExperimentError> {
    if d < 2 {
        return Err(ExperimentError::Config(format!("d = {d} is below 2")));
    }
    if !(0.0..1.0).contains(&p_th) {
        return Err(ExperimentError::Config(format!("p = {p_th} outside [0, 1)")));
    }
    if d == 2 {
        return Ok(p_th);
    }
    Ok(-((-p_th).ln_1p() / (d as f64).log2()).exp_m1())
}

/// Inverse of [`rescale_threshold`]: `1 - (1 - p)^(log2 d)`.
pub fn unscale_threshold(p: f64, d: u32) -> Result<f64, ExperimentError> {
    if d < 2 {
        return Err(ExperimentError::Config(format!("d = {d} is below 2")));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(ExperimentError::Config(format!("p = {p} outside [0, 1)")));
    }
    Ok(-((-p).ln_1p() * (d as f64).log2()).exp_m1())
}
