use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use saqd::channel::{dense_z, sample_z_error, Simulator};
use saqd::code::{build_code, CssOp, OpType, SubsystemCode};
use saqd::decoder::{two_stage_decode, DecoderKind, DecoderPair, DecoderScratch};
use saqd::lattice::{Manifold, ManifoldKind, QuditClass};

fn code(kind: ManifoldKind, l: usize, d: u32) -> SubsystemCode {
    build_code(Manifold::new(kind, l).unwrap(), d).unwrap()
}

const CC: DecoderPair = DecoderPair { validator: DecoderKind::Clustering, corrector: DecoderKind::Clustering };
const MM: DecoderPair = DecoderPair { validator: DecoderKind::Matching, corrector: DecoderKind::Matching };

fn pairs(d: u32) -> Vec<DecoderPair> {
    if d == 2 {
        vec![CC, MM, DecoderPair { validator: DecoderKind::Matching, corrector: DecoderKind::Clustering }]
    } else {
        vec![CC]
    }
}

fn random_residual<R: Rng>(rng: &mut R, n: usize, d: u32) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..d)).collect()
}

#[test]
fn physical_flux_obeys_both_gauss_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kind in ManifoldKind::ALL {
        for d in [2, 3, 16] {
            let sim = Simulator::new(&code(kind, 4, d)).unwrap();
            for _ in 0..100 {
                let r = random_residual(&mut rng, sim.n(), d);
                let flux = sim.measure_flux(&r);
                assert!(sim.decoder.h1.syndrome(&flux).iter().all(|&v| v == 0), "{kind} d={d}");
            }
        }
    }
}

#[test]
fn corrupted_flux_lights_its_column() {
    let sim = Simulator::new(&code(ManifoldKind::Cube, 4, 5)).unwrap();
    let h1 = &sim.decoder.h1;
    for f in 0..sim.flux_count() {
        let mut flux = vec![0u32; sim.flux_count()];
        flux[f] = 2;
        let s = h1.syndrome(&flux);
        let lit: Vec<(usize, u32)> = s.iter().enumerate().filter(|(_, &v)| v != 0).map(|(r, &v)| (r, v)).collect();
        let expected: Vec<(usize, u32)> = h1.column(f).iter().map(|&(r, a)| (r, a * 2 % 5)).collect();
        assert_eq!(lit, expected);
        assert!(!lit.is_empty() && lit.len() <= 2);
        assert!(lit.iter().all(|&(_, v)| v == 2 || v == 3));
    }
}

#[test]
fn correction_checks_see_errors_but_not_gauge_or_logicals() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for kind in [ManifoldKind::Cube, ManifoldKind::T2xI, ManifoldKind::Torus3] {
        let c = code(kind, 4, 3);
        let sim = Simulator::new(&c).unwrap();
        for _ in 0..20 {
            let g = sim.random_z_gauge(&mut rng);
            assert!(sim.stabilizer_syndrome(&g).iter().all(|&v| v == 0));
        }
        for p in &c.dressed {
            assert!(sim.stabilizer_syndrome(&dense_z(&p.z, sim.n())).iter().all(|&v| v == 0));
        }
        for (q, qd) in c.lattice.qudits.iter().enumerate() {
            let mut e = vec![0u32; sim.n()];
            e[q] = 1;
            let mut lit: Vec<u32> = sim.stabilizer_syndrome(&e).into_iter().filter(|&v| v != 0).collect();
            lit.sort_unstable();
            if kind == ManifoldKind::Torus3 {
                assert_eq!(lit, vec![1, 2], "{kind} qudit {q}");
            } else if qd.class == QuditClass::Bulk {
                assert!(lit == vec![1, 2] || lit == vec![1] || lit == vec![2], "{kind} qudit {q}");
            }
        }
    }
}

#[test]
fn zero_flux_needs_no_correction() {
    for d in [2, 3] {
        let sim = Simulator::new(&code(ManifoldKind::Cube, 4, d)).unwrap();
        for pair in pairs(d) {
            let out = two_stage_decode(&sim.decoder, &vec![0; sim.flux_count()], pair).unwrap();
            assert!(out.correction.iter().all(|&v| v == 0));
            assert!(out.corrected_flux.iter().all(|&v| v == 0));
        }
    }
}

#[test]
fn single_qudit_errors_leave_gauge_residuals() {
    for kind in [ManifoldKind::Cube] {
        for d in [2, 3] {
            let c = code(kind, 2, d);
            let n = c.n();
            let sim = Simulator::new(&c).unwrap();
            let gauge = c.gauge_basis().unwrap();
            for pair in pairs(d) {
                let mut scratch = DecoderScratch::default();
                for q in 0..n {
                    for j in 1..d {
                        let mut r = vec![0u32; n];
                        r[q] = j;
                        let out = sim.decoder.decode(&sim.measure_flux(&r), pair, &mut scratch).unwrap();
                        let residual: Vec<i64> = r.iter().zip(&out.correction).map(|(&a, &b)| a as i64 - b as i64).collect();
                        let op = CssOp::new(OpType::Z, residual.into_iter().enumerate(), d);
                        assert!(gauge.contains(&op.to_pauli(n, d)).unwrap(), "{kind} d={d} q={q} j={j} {pair:?}");
                    }
                }
            }
        }
    }
}

#[test]
fn single_measurement_errors_are_harmless() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for d in [2, 3] {
        let sim = Simulator::new(&code(ManifoldKind::Cube, 4, d)).unwrap();
        for pair in pairs(d) {
            let mut scratch = DecoderScratch::default();
            for f in 0..sim.flux_count() {
                let mut flux = vec![0u32; sim.flux_count()];
                flux[f] = 1;
                let out = sim.decoder.decode(&flux, pair, &mut scratch).unwrap();
                let mut residual: Vec<u32> = out.correction.iter().map(|&c| (d - c) % d).collect();
                sim.cycle(&mut residual, 0.0, 0.0, pair, &mut scratch, &mut rng).unwrap();
                assert!(!sim.logical_failure(&residual).unwrap(), "d={d} flux {f} {pair:?}");
            }
        }
    }
}

#[test]
fn validated_flux_is_consistent_and_correction_matches() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in ManifoldKind::ALL {
        for d in [2, 3, 16] {
            let sim = Simulator::new(&code(kind, 4, d)).unwrap();
            for pair in pairs(d) {
                let mut scratch = DecoderScratch::default();
                for _ in 0..30 {
                    let e = sample_z_error(sim.n(), 0.02, d, &mut rng);
                    let mut flux = sim.measure_flux(&e);
                    for v in flux.iter_mut() {
                        if rng.random_bool(0.02) {
                            *v = (*v + rng.random_range(1..d)) % d;
                        }
                    }
                    let out = sim.decoder.decode(&flux, pair, &mut scratch).unwrap_or_else(|e| panic!("{kind} d={d} {pair:?} {e}"));
                    assert!(sim.decoder.h1.syndrome(&out.corrected_flux).iter().all(|&v| v == 0));
                    assert_eq!(sim.decoder.h2.syndrome(&out.correction), sim.decoder.stabilizer_syndrome(&out.corrected_flux));
                }
            }
        }
    }
}
