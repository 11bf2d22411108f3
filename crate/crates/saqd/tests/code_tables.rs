use saqd::code::{brute_force_distance, build_code, css_sp, DistanceBound, OpType, StabKind};
use saqd::lattice::{Color, Manifold, ManifoldKind};

fn code(kind: ManifoldKind, l: usize, d: u32) -> saqd::code::SubsystemCode {
    build_code(Manifold::new(kind, l).unwrap(), d).unwrap()
}

#[test]
fn parameter_table() {
    for kind in ManifoldKind::ALL {
        for l in [2, 4] {
            for d in [2, 3, 5, 16] {
                let r = code(kind, l, d).verify_parameters().unwrap();
                assert_eq!((r.params.n, r.params.k), (r.expected_n, r.expected_k), "{kind} L={l} d={d}");
            }
        }
    }
}

#[test]
fn table_examples() {
    let p = |k, l, d| code(k, l, d).verify_parameters().unwrap().params;
    assert_eq!((p(ManifoldKind::Torus3, 4, 2).n, p(ManifoldKind::Torus3, 4, 2).k), (192, 0));
    assert_eq!((p(ManifoldKind::T2xI, 2, 2).n, p(ManifoldKind::T2xI, 2, 2).k), (32, 2));
    assert_eq!((p(ManifoldKind::Cube, 2, 16).n, p(ManifoldKind::Cube, 2, 16).k), (59, 1));
    assert_eq!(p(ManifoldKind::T2xIPrime, 2, 2).n, 36);
}

#[test]
fn dressed_distances() {
    assert_eq!(brute_force_distance(&code(ManifoldKind::Cube, 2, 2), 3, None).unwrap(), DistanceBound::Exact(3));
    assert_eq!(brute_force_distance(&code(ManifoldKind::T2xI, 2, 2), 2, None).unwrap(), DistanceBound::Exact(2));
    assert_eq!(brute_force_distance(&code(ManifoldKind::Cube, 2, 3), 2, None).unwrap(), DistanceBound::AboveCap(2));
}

#[test]
fn three_body_variant_halves_one_distance() {
    let c = code(ManifoldKind::T2xIPrime, 4, 2);
    let yz = c.bare.iter().position(|p| p.label == "yz").unwrap();
    assert_eq!(brute_force_distance(&c, 2, Some(yz)).unwrap(), DistanceBound::Exact(2));
    let xy = 1 - yz;
    assert_eq!(brute_force_distance(&c, 3, Some(xy)).unwrap(), DistanceBound::AboveCap(3));
    assert_eq!(c.max_gauge_weight(), 3);
}

#[test]
fn cap_budget_is_enforced() {
    assert!(brute_force_distance(&code(ManifoldKind::Cube, 4, 16), 6, None).is_err());
}

#[test]
fn same_colour_generators_commute() {
    for kind in ManifoldKind::ALL {
        for l in [2, 4] {
            for d in [2, 3, 4] {
                let c = code(kind, l, d);
                for colour in [Color::Green, Color::Yellow] {
                    let ops: Vec<_> = c.gauge_gens.iter().filter(|g| g.color == Some(colour)).map(|g| &g.op).collect();
                    let xs: Vec<_> = ops.iter().filter(|o| o.ty == OpType::X).collect();
                    let zs: Vec<_> = ops.iter().filter(|o| o.ty == OpType::Z).collect();
                    for a in &xs {
                        for b in &zs {
                            assert_eq!(css_sp(a, b, d), 0, "{kind} L={l} d={d}");
                        }
                    }
                }
            }
        }
    }
}

#[test]
fn local_stabilizers_factor_both_ways() {
    for kind in [ManifoldKind::Torus3, ManifoldKind::Cube, ManifoldKind::T2xI] {
        let c = code(kind, 2, 3);
        let n = c.n();
        for colour in [Color::Green, Color::Yellow] {
            let span = saqd::algebra::GroupBasis::new(
                c.terms
                    .iter()
                    .enumerate()
                    .filter(|(t, _)| c.lattice.spheres[c.lattice.terms[*t].sphere].color == colour)
                    .map(|(_, o)| o.to_pauli(n, 3))
                    .collect(),
            )
            .unwrap();
            for s in c.stabilizers.iter().filter(|s| matches!(s.kind, StabKind::LocalX | StabKind::LocalZ)) {
                assert!(span.contains(&s.op.to_pauli(n, 3)).unwrap(), "{kind} {colour:?}");
            }
        }
    }
}

#[test]
fn bare_and_dressed_logicals() {
    for kind in [ManifoldKind::Cube, ManifoldKind::T2xI, ManifoldKind::T2xIPrime] {
        for d in [2, 3] {
            let c = code(kind, 2, d);
            let n = c.n();
            let gauge = c.gauge_basis().unwrap();
            for p in &c.bare {
                for op in [&p.x, &p.z] {
                    assert!(c.gauge_gens.iter().all(|g| css_sp(op, &g.op, d) == 0), "{kind}");
                }
                assert_eq!(css_sp(&p.x, &p.z, d), 1);
            }
            for (b, p) in c.bare.iter().zip(&c.dressed) {
                for (bare, dressed) in [(&b.x, &p.x), (&b.z, &p.z)] {
                    assert!(c.stabilizers.iter().all(|s| css_sp(dressed, &s.op, d) == 0));
                    assert!(c.gauge_gens.iter().any(|g| css_sp(dressed, &g.op, d) != 0), "{kind} d={d} {:?}", dressed.ty);
                    let ratio = bare.mul_pow(dressed, -1, d).to_pauli(n, d);
                    assert!(gauge.contains(&ratio).unwrap(), "{kind} d={d}");
                }
            }
        }
    }
}

#[test]
fn cube_logical_weights_scale() {
    for l in [2, 4] {
        let c = code(ManifoldKind::Cube, l, 2);
        assert_eq!(c.bare[0].x.weight(), 2 * l * l + 3 * l + 1);
        assert_eq!(c.dressed[0].z.weight(), l + 1);
    }
}
