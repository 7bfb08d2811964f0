//! Property tests for structural invariants.

use gbdyn::dynamics::{assemble_cholesky, ForceModel, MassMatrixModel, PotentialModel, WbAffineIdx};
use gbdyn::engine::{Mlp, ParamLayout, ParamVector};
use proptest::prelude::*;

fn finite(range: f64) -> impl Strategy<Value = f64> {
    -range..range
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Packing rule: diagonal first (plus offset), then the strict lower
    /// triangle row-major; upper triangle stays zero.
    #[test]
    fn cholesky_assembly_packs_and_rejects(
        n in 1usize..5,
        delta in 0.0..2.0f64,
        seedval in finite(3.0),
    ) {
        let len = n * (n + 1) / 2;
        let raw: Vec<f64> = (0..len).map(|i| seedval + i as f64).collect();
        let l = assemble_cholesky(&raw, n, delta).unwrap();
        for i in 0..n {
            prop_assert_eq!(l[i * n + i], raw[i] + delta);
            for j in (i + 1)..n {
                prop_assert_eq!(l[i * n + j], 0.0);
            }
        }
        let mut p = n;
        for i in 1..n {
            for j in 0..i {
                prop_assert_eq!(l[i * n + j], raw[p]);
                p += 1;
            }
        }
        // Off-by-one lengths are rejected.
        prop_assert!(assemble_cholesky(&raw[..len - 1], n, delta).is_err());
    }

    /// Flatten → unflatten is the identity for any layout and contents.
    #[test]
    fn param_vector_round_trip(values in prop::collection::vec(finite(1e6), 1..64)) {
        let mut layout = ParamLayout::new();
        layout.push("block", values.len());
        let mut pv = ParamVector::zeros(layout);
        pv.data.copy_from_slice(&values);
        let flat = pv.flatten();
        let mut pv2 = pv.clone();
        pv2.unflatten(&flat);
        prop_assert_eq!(pv, pv2);
    }

    /// Learned mass matrices are symmetric positive definite at any
    /// configuration, for any bounded parameter values (the construction,
    /// not training, guarantees it).
    #[test]
    fn learned_mass_is_spd_everywhere(
        q1 in finite(20.0),
        q2 in finite(20.0),
        scale in 0.01..1.0f64,
        seed in 0u64..1000,
    ) {
        use gbdyn::engine::rng::stream_rng;
        use rand::Rng;
        let net = Mlp::new(vec![4, 8, 3]);
        let mut rng = stream_rng(seed, "prop-mass", 0);
        let params: Vec<f64> = (0..net.param_count())
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let model = gbdyn::dynamics::DynModel {
            n: 2,
            m: 2,
            mass: MassMatrixModel::LearnedCholesky { n: 2, net, offset: 0, delta: 1.0 },
            potential: PotentialModel::LearnedScalar {
                net: Mlp::new(vec![4, 2, 1]),
                offset: usize::MAX / 2,
            },
            force: ForceModel::WhiteBoxAffine(WbAffineIdx {
                b: usize::MAX / 2,
                eta: usize::MAX / 2,
            }),
        };
        let m = model.mass_matrix(&params, &[q1, q2]).unwrap();
        prop_assert_eq!(m[1], m[2]);
        let (tr, det) = (m[0] + m[3], m[0] * m[3] - m[1] * m[2]);
        prop_assert!(tr > 0.0 && det > 0.0, "not SPD: {:?}", m);
    }

    /// The end effector never leaves the reachable disc.
    #[test]
    fn end_effector_within_reach(q1 in finite(50.0), q2 in finite(50.0)) {
        let p = gbdyn::systems::DoublePendulumParams::nominal();
        let ee = gbdyn::systems::end_effector(&p, &[q1, q2]);
        let r = (ee[0] * ee[0] + ee[1] * ee[1]).sqrt();
        prop_assert!(r <= p.l1 + p.l2 + 1e-9);
    }
}
