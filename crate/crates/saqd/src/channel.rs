//! Phenomenological Z noise and the error-correction cycle.
//!
//! The simulation tracks the Z part of the accumulated residual operator.
//! For the three-body variant everything is tracked in the frame before the
//! weight-reduction circuit: physical errors are mapped back through the
//! inverse circuit, which sends Z-type operators to Z-type operators.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::code::{lattice_term_op, Circuit, CssOp, OpType, SubsystemCode};
use crate::decoder::{flux_terms, DecoderError, DecoderPair, DecoderScratch, TwoStageDecoder};
use crate::lattice::{QuditClass, TermKind};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ChannelError {
    #[error("probability {0} outside [0, 1]")]
    BadProbability(String),
    #[error(transparent)]
    Decoder(#[from] DecoderError),
    #[error("residual has a nonzero stabilizer syndrome after the ideal round")]
    SyndromeAfterReadout,
    #[error("residual has length {got}, code has {expected} qudits")]
    Length { got: usize, expected: usize },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub p_data: f64,
    pub p_meas: f64,
    /// Noisy cycles before the ideal readout round.
    pub t: usize,
}

impl NoiseParams {
    /// One probability for both qudit and measurement errors.
    pub fn new(p: f64, t: usize) -> Result<Self, ChannelError> {
        Self::split(p, p, t)
    }

    pub fn split(p_data: f64, p_meas: f64, t: usize) -> Result<Self, ChannelError> {
        for p in [p_data, p_meas] {
            if !(0.0..=1.0).contains(&p) {
                return Err(ChannelError::BadProbability(p.to_string()));
            }
        }
        Ok(Self { p_data, p_meas, t })
    }
}

/// I.i.d. qudit noise: `Z^j` with probability `p / (d - 1)` for each
/// `j` in `1..d`.
pub fn sample_z_error<R: Rng + ?Sized>(n: usize, p: f64, d: u32, rng: &mut R) -> Vec<u32> {
    let mut z = vec![0u32; n];
    if p > 0.0 {
        for v in &mut z {
            if rng.random::<f64>() < p {
                *v = rng.random_range(1..d);
            }
        }
    }
    z
}

/// Replaces each outcome, with probability `p`, by a uniformly random
/// different value.
pub fn corrupt_measurements<R: Rng + ?Sized>(flux: &[u32], p: f64, d: u32, rng: &mut R) -> Vec<u32> {
    let mut out = flux.to_vec();
    if p > 0.0 {
        for v in &mut out {
            if rng.random::<f64>() < p {
                *v = (*v + rng.random_range(1..d)) % d;
            }
        }
    }
    out
}

type Sparse = Vec<(usize, u32)>;

/// Immutable per-code simulation data, shared between workers.
#[derive(Clone, Debug)]
pub struct Simulator {
    d: u32,
    n: usize,
    flux_ops: Vec<Sparse>,
    z_gauge: Vec<Sparse>,
    bare_x: Vec<Sparse>,
    to_base: Option<Circuit>,
    pub decoder: TwoStageDecoder,
}

impl Simulator {
    pub fn new(code: &SubsystemCode) -> Result<Self, ChannelError> {
        let lat = &code.lattice;
        let d = code.d;
        let flux_ops = flux_terms(lat).into_iter().map(|t| lattice_term_op(lat, t, d).support).collect();
        let mut z_gauge: Vec<Sparse> = (0..lat.terms.len())
            .filter(|&t| lat.terms[t].kind == TermKind::Vertex)
            .map(|t| lattice_term_op(lat, t, d).support)
            .collect();
        for (q, qd) in lat.qudits.iter().enumerate() {
            if matches!(qd.class, QuditClass::Plaquette(_)) {
                z_gauge.push(vec![(q, 1)]);
            }
        }
        let to_base = code.circuit.as_ref().map(Circuit::inverse);
        let bare_x = code
            .bare
            .iter()
            .map(|p| match &to_base {
                Some(c) => c.apply_css(&p.x, d).support,
                None => p.x.support.clone(),
            })
            .collect();
        Ok(Self { d, n: lat.n(), flux_ops, z_gauge, bare_x, to_base, decoder: TwoStageDecoder::new(code)? })
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn flux_count(&self) -> usize {
        self.flux_ops.len()
    }

    /// Outcome of every X-type term on a Z residual.
    pub fn measure_flux(&self, residual: &[u32]) -> Vec<u32> {
        let d = self.d as u64;
        self.flux_ops
            .iter()
            .map(|op| (op.iter().map(|&(q, e)| e as u64 * residual[q] as u64).sum::<u64>() % d) as u32)
            .collect()
    }

    /// Uniform element of the Z-type gauge group.
    pub fn random_z_gauge<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<u32> {
        let mut z = vec![0u32; self.n];
        self.add_random_gauge(&mut z, rng);
        z
    }

    fn add_random_gauge<R: Rng + ?Sized>(&self, z: &mut [u32], rng: &mut R) {
        let d = self.d;
        for op in &self.z_gauge {
            let k = rng.random_range(0..d);
            if k != 0 {
                for &(q, e) in op {
                    z[q] = ((z[q] as u64 + k as u64 * e as u64) % d as u64) as u32;
                }
            }
        }
    }

    /// Maps a physical Z error into the tracking frame.
    pub fn to_tracking_frame(&self, z: &mut [u32]) {
        if let Some(c) = &self.to_base {
            c.apply_z_dense(z, self.d);
        }
    }

    /// Local X-stabilizer syndrome of a residual.
    pub fn stabilizer_syndrome(&self, residual: &[u32]) -> Vec<u32> {
        self.decoder.h2.syndrome(residual)
    }

    /// True when the residual acts nontrivially on some logical qudit.
    /// Requires a zero stabilizer syndrome.
    pub fn logical_failure(&self, residual: &[u32]) -> Result<bool, ChannelError> {
        if residual.len() != self.n {
            return Err(ChannelError::Length { got: residual.len(), expected: self.n });
        }
        if self.stabilizer_syndrome(residual).iter().any(|&v| v != 0) {
            return Err(ChannelError::SyndromeAfterReadout);
        }
        let d = self.d as u64;
        Ok(self.bare_x.iter().any(|op| op.iter().map(|&(q, e)| e as u64 * residual[q] as u64).sum::<u64>() % d != 0))
    }

    /// One cycle: random gauge, qudit noise, flux measurement with
    /// corruption, two-stage decoding and correction.
    pub fn cycle<R: Rng + ?Sized>(
        &self,
        residual: &mut [u32],
        p_data: f64,
        p_meas: f64,
        pair: DecoderPair,
        scratch: &mut DecoderScratch,
        rng: &mut R,
    ) -> Result<(), ChannelError> {
        let d = self.d;
        self.add_random_gauge(residual, rng);
        if p_data > 0.0 {
            let mut e = sample_z_error(self.n, p_data, d, rng);
            self.to_tracking_frame(&mut e);
            for (r, v) in residual.iter_mut().zip(&e) {
                *r = (*r + v) % d;
            }
        }
        let flux = self.measure_flux(residual);
        let noisy = corrupt_measurements(&flux, p_meas, d, rng);
        let out = self.decoder.decode(&noisy, pair, scratch)?;
        for (r, c) in residual.iter_mut().zip(&out.correction) {
            *r = (*r + d - c) % d;
        }
        Ok(())
    }

    /// `t` noisy cycles and one ideal round starting from `residual`, then
    /// logical adjudication.
    pub fn run_trial_from<R: Rng + ?Sized>(
        &self,
        mut residual: Vec<u32>,
        noise: NoiseParams,
        pair: DecoderPair,
        scratch: &mut DecoderScratch,
        rng: &mut R,
    ) -> Result<bool, ChannelError> {
        if residual.len() != self.n {
            return Err(ChannelError::Length { got: residual.len(), expected: self.n });
        }
        for _ in 0..noise.t {
            self.cycle(&mut residual, noise.p_data, noise.p_meas, pair, scratch, rng)?;
        }
        self.cycle(&mut residual, 0.0, 0.0, pair, scratch, rng)?;
        self.logical_failure(&residual)
    }

    pub fn run_trial<R: Rng + ?Sized>(
        &self,
        noise: NoiseParams,
        pair: DecoderPair,
        scratch: &mut DecoderScratch,
        rng: &mut R,
    ) -> Result<bool, ChannelError> {
        self.run_trial_from(vec![0; self.n], noise, pair, scratch, rng)
    }
}

/// Dense Z-exponent vector of a Z-type operator.
pub fn dense_z(op: &CssOp, n: usize) -> Vec<u32> {
    assert_eq!(op.ty, OpType::Z, "dense_z takes a Z-type operator");
    let mut z = vec![0u32; n];
    for &(q, e) in &op.support {
        z[q] = e;
    }
    z
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::build_code;
    use crate::decoder::DecoderKind;
    use crate::lattice::{Manifold, ManifoldKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const CC: DecoderPair = DecoderPair { validator: DecoderKind::Clustering, corrector: DecoderKind::Clustering };

    fn sim(kind: ManifoldKind, l: usize, d: u32) -> (SubsystemCode, Simulator) {
        let c = build_code(Manifold::new(kind, l).unwrap(), d).unwrap();
        let s = Simulator::new(&c).unwrap();
        (c, s)
    }

    #[test]
    fn noise_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert!(sample_z_error(50, 0.0, 3, &mut rng).iter().all(|&v| v == 0));
        assert!(sample_z_error(50, 1.0, 2, &mut rng).iter().all(|&v| v == 1));
        let flux: Vec<u32> = (0..50).map(|i| i % 5).collect();
        assert_eq!(corrupt_measurements(&flux, 0.0, 5, &mut rng), flux);
        let all = corrupt_measurements(&flux, 1.0, 5, &mut rng);
        assert!(all.iter().zip(&flux).all(|(a, b)| a != b && *a < 5));
    }

    #[test]
    fn bad_probability() {
        assert!(NoiseParams::new(1.5, 1).is_err());
        assert!(NoiseParams::new(-0.1, 1).is_err());
    }

    #[test]
    fn gauge_is_invisible() {
        let (_, s) = sim(ManifoldKind::Cube, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..20 {
            let g = s.random_z_gauge(&mut rng);
            assert!(s.stabilizer_syndrome(&g).iter().all(|&v| v == 0));
            assert!(!s.logical_failure(&g).unwrap());
        }
    }

    #[test]
    fn zero_noise_never_fails() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for kind in ManifoldKind::ALL {
            let (_, s) = sim(kind, 2, 3);
            let noise = NoiseParams::new(0.0, 3).unwrap();
            let mut scratch = DecoderScratch::default();
            for _ in 0..10 {
                assert!(!s.run_trial(noise, CC, &mut scratch, &mut rng).unwrap(), "{kind}");
            }
        }
    }

    #[test]
    fn dressed_logical_is_a_failure() {
        let (c, s) = sim(ManifoldKind::Cube, 2, 2);
        let z = dense_z(&c.dressed[0].z, c.n());
        assert!(s.logical_failure(&z).unwrap());
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let noise = NoiseParams::new(0.0, 0).unwrap();
        assert!(s.run_trial_from(z, noise, CC, &mut DecoderScratch::default(), &mut rng).unwrap());
    }

    #[test]
    fn single_qudit_flux_is_local() {
        let (c, s) = sim(ManifoldKind::Torus3, 4, 3);
        let mut z = vec![0; c.n()];
        z[17] = 2;
        let flux = s.measure_flux(&z);
        let faces = flux_terms(&c.lattice);
        for (i, &f) in flux.iter().enumerate() {
            let touches = c.lattice.terms[faces[i]].support.iter().any(|&(q, _)| q == 17);
            assert!(f == 0 || touches);
        }
        assert!(flux.iter().any(|&f| f != 0));
    }
}
