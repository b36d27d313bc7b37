mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dcp_core::kernel::Scaled;
use dcp_core::linalg::{cholesky_logdet, inverse_add_point, inverse_remove_point};
use dcp_core::metrics::{adjusted_rand_index, normalized_mutual_information};
use dcp_core::partition::{canonicalize, partition_log_likelihood, Target};
use dcp_core::sampler::{gibbs_conditional, gibbs_sweep};
use dcp_core::{ClusterState, DataSet, Kernel, KernelParams, LabelConstraints, Partition, PdCache};

fn assignment(max_len: usize, max_label: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(0..max_label, 2..=max_len)
}

fn paired(max_len: usize, max_label: usize) -> impl Strategy<Value = (Vec<usize>, Vec<usize>)> {
    (2..=max_len).prop_flat_map(move |n| {
        (
            prop::collection::vec(0..max_label, n),
            prop::collection::vec(0..max_label, n),
        )
    })
}

fn points(n: std::ops::RangeInclusive<usize>, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-3.0..3.0f64, dim), n)
}

fn se(ls: Vec<f64>, tau: f64) -> KernelParams {
    KernelParams::squared_exponential(ls, tau).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn canonicalize_is_idempotent_and_label_blind(raw in assignment(20, 6), shift in 1usize..50) {
        let once = canonicalize(&raw);
        prop_assert_eq!(&canonicalize(once.assignment()), &once);
        let renamed: Vec<usize> = raw.iter().map(|c| c * 7 + shift).collect();
        prop_assert_eq!(canonicalize(&renamed), once);
    }

    #[test]
    fn partition_text_round_trips(raw in assignment(20, 6)) {
        let p = Partition::from_assignment(&raw);
        prop_assert_eq!(p.to_string().parse::<Partition>().unwrap(), p);
    }

    #[test]
    fn ari_and_nmi_are_symmetric_bounded_and_match_oracles((a, b) in paired(25, 5)) {
        let (p, q) = (Partition::from_assignment(&a), Partition::from_assignment(&b));
        let ari = adjusted_rand_index(&p, &q).unwrap();
        let nmi = normalized_mutual_information(&p, &q).unwrap();
        prop_assert!((ari - adjusted_rand_index(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!((nmi - normalized_mutual_information(&q, &p).unwrap()).abs() < 1e-12);
        prop_assert!(ari <= 1.0 + 1e-12);
        prop_assert!((0.0..=1.0).contains(&nmi));
        prop_assert!((ari - common::ari_pairs(&a, &b)).abs() < 1e-9);
        prop_assert!((nmi - common::nmi_brute(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn se_kernel_bounded_symmetric_and_monotone_in_lengthscale(
        x in prop::collection::vec(-5.0..5.0f64, 3),
        y in prop::collection::vec(-5.0..5.0f64, 3),
        ls in prop::collection::vec(0.05..5.0f64, 3),
        grow in 1.0..4.0f64,
    ) {
        let k = se(ls.clone(), 1.0);
        let v = k.eval(&x, &y);
        prop_assert!(v > 0.0 || v == 0.0 && x != y);
        prop_assert!(v <= 1.0);
        prop_assert_eq!(v, k.eval(&y, &x));
        prop_assert_eq!(k.eval(&x, &x), 1.0);
        prop_assert!((v - common::se(&x, &y, &ls)).abs() < 1e-14);
        let wider = se(ls.iter().map(|l| l * grow).collect(), 1.0);
        prop_assert!(wider.eval(&x, &y) >= v);
    }

    #[test]
    fn add_then_remove_restores_the_cache(pts in points(2..=10, 2), l in 0.3..3.0f64) {
        let data = DataSet::from_rows(pts).unwrap();
        let k = se(vec![l, l], 1.0);
        let n = data.len();
        let base: Vec<usize> = (0..n - 1).collect();
        let Ok(cache) = PdCache::from_gram(&data.gram_sym(&k, &base)) else { return Ok(()) };
        let x = data.point(n - 1);
        let cross: Vec<f64> = base.iter().map(|&i| k.eval(data.point(i), x)).collect();
        let Ok(grown) = inverse_add_point(&cache, &cross, 1.0) else { return Ok(()) };
        let back = inverse_remove_point(&grown, n - 1).unwrap();
        let scale = grown.inverse().max_abs();
        prop_assert!(back.inverse().max_abs_diff(cache.inverse()) <= 1e-9 * scale);
        prop_assert!((back.log_det() - cache.log_det()).abs() <= 1e-9 * grown.log_det().abs().max(1.0));
    }

    #[test]
    fn incremental_log_det_matches_oracle(pts in points(1..=8, 2), l in 0.2..2.0f64) {
        let data = DataSet::from_rows(pts.clone()).unwrap();
        let k = se(vec![l, l], 1.0);
        let all: Vec<usize> = (0..data.len()).collect();
        let Ok(direct) = PdCache::from_gram(&data.gram_sym(&k, &all)) else { return Ok(()) };
        let oracle = common::log_det_gauss(&common::se_gram(&pts, &all, &[l, l]));
        prop_assume!(oracle > -20.0);
        let mut cache = PdCache::empty();
        for i in 0..data.len() {
            let cross: Vec<f64> = (0..i).map(|j| k.eval(data.point(j), data.point(i))).collect();
            cache = inverse_add_point(&cache, &cross, 1.0).unwrap();
        }
        prop_assert!((cache.log_det() - oracle).abs() < 1e-6 * oracle.abs().max(1.0));
        prop_assert!((direct.log_det() - oracle).abs() < 1e-6 * oracle.abs().max(1.0));
    }

    #[test]
    fn joining_never_beats_a_singleton(pts in points(2..=9, 3), ls in prop::collection::vec(0.1..5.0f64, 3)) {
        let data = DataSet::from_rows(pts).unwrap();
        let k = se(ls, 1.0);
        let n = data.len();
        let a: Vec<usize> = (0..n - 1).collect();
        let ax: Vec<usize> = (0..n).collect();
        if let (Ok((la, _)), Ok((lax, _))) =
            (cholesky_logdet(&data.gram_sym(&k, &a)), cholesky_logdet(&data.gram_sym(&k, &ax)))
        {
            prop_assert!(lax <= la + 1e-10);
        }
    }

    #[test]
    fn kernel_scale_does_not_change_conditionals(
        pts in points(3..=8, 2),
        raw in prop::collection::vec(0usize..3, 8),
        alpha in 0.1..10.0f64,
        tau in 0.3..3.0f64,
    ) {
        let data = DataSet::from_rows(pts).unwrap();
        let n = data.len();
        let k = se(vec![1.0, 0.7], tau);
        let scaled = Scaled { inner: k.clone(), alpha };
        let p = Partition::from_assignment(&raw[..n]);
        let none = LabelConstraints::none();
        let (Ok(mut s1), Ok(mut s2)) = (ClusterState::new(&data, &k, &p), ClusterState::new(&data, &scaled, &p)) else {
            return Ok(());
        };
        s1.detach(&data, &k, 0).unwrap();
        s2.detach(&data, &scaled, 0).unwrap();
        let a = gibbs_conditional(&s1, &data, 0, &k, tau, &none);
        let b = gibbs_conditional(&s2, &data, 0, &scaled, tau, &none);
        prop_assume!(a.degenerate == 0 && b.degenerate == 0);
        for (x, y) in a.probabilities().iter().zip(b.probabilities()) {
            prop_assert!((x - y).abs() < 1e-8);
        }
        let single = Partition::single_cluster(n);
        let ll = |kern: &dyn Kernel, s: &Partition| partition_log_likelihood(&data, &kern, tau, s, &none);
        if let (Ok(a1), Ok(a2), Ok(b1), Ok(b2)) = (ll(&k, &p), ll(&k, &single), ll(&scaled, &p), ll(&scaled, &single)) {
            prop_assert!(((a1 - a2) - (b1 - b2)).abs() < 1e-8 * (a1 - a2).abs().max(1.0));
        }
    }

    #[test]
    fn vanishing_temperature_flattens_the_conditional(pts in points(3..=7, 2), raw in prop::collection::vec(0usize..3, 7)) {
        let data = DataSet::from_rows(pts).unwrap();
        let n = data.len();
        let k = se(vec![1.0, 1.0], 1.0);
        let p = Partition::from_assignment(&raw[..n]);
        let Ok(mut state) = ClusterState::new(&data, &k, &p) else { return Ok(()) };
        state.detach(&data, &k, n - 1).unwrap();
        let probs = gibbs_conditional(&state, &data, n - 1, &k, 1e-12, &LabelConstraints::none()).probabilities();
        let uniform = 1.0 / probs.len() as f64;
        for q in probs {
            prop_assert!((q - uniform).abs() < 1e-9);
        }
    }

    #[test]
    fn conditional_agrees_with_joint(pts in points(3..=7, 2), raw in prop::collection::vec(0usize..3, 7), tau in 0.3..3.0f64) {
        let data = DataSet::from_rows(pts).unwrap();
        let n = data.len();
        let k = se(vec![0.8, 0.8], tau);
        let none = LabelConstraints::none();
        let p = Partition::from_assignment(&raw[..n]);
        let point = n / 2;
        let Ok(mut state) = ClusterState::new(&data, &k, &p) else { return Ok(()) };
        state.detach(&data, &k, point).unwrap();
        let cond = gibbs_conditional(&state, &data, point, &k, tau, &none);
        prop_assume!(cond.degenerate == 0);
        let m = state.num_clusters();
        let mut joint = Vec::new();
        for t in 0..=m {
            let mut s = state.clone();
            let target = if t == m { Target::New } else { Target::Existing(t) };
            s.attach(&data, &k, point, target).unwrap();
            joint.push(partition_log_likelihood(&data, &k, tau, &s.partition(), &none).unwrap());
        }
        for t in 1..=m {
            let d_cond = cond.log_weights[t] - cond.log_weights[0];
            let d_joint = joint[t] - joint[0];
            prop_assert!((d_cond - d_joint).abs() < 1e-6 * d_joint.abs().max(1.0), "{} vs {}", d_cond, d_joint);
        }
    }

    #[test]
    fn gibbs_sweeps_preserve_label_constraints(
        pts in points(4..=12, 2),
        labels in prop::collection::vec(prop::option::of(0u8..3), 12),
        seed in any::<u64>(),
    ) {
        let n = pts.len();
        let labels: Vec<Option<String>> = labels[..n].iter().map(|l| l.map(|v| v.to_string())).collect();
        let data = DataSet::new(pts, labels).unwrap();
        let constraints = LabelConstraints::from_labels(data.labels());
        let k = se(vec![1.0, 1.0], 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let init = dcp_core::sampler::initial_partition(n, &constraints, dcp_core::sampler::InitMode::Singletons, &mut rng);
        prop_assert!(constraints.satisfied_by(&init));
        let Ok(mut state) = ClusterState::new(&data, &k, &init) else { return Ok(()) };
        for _ in 0..5 {
            gibbs_sweep(&mut state, &data, &k, 1.0, &constraints, &mut rng).unwrap();
            prop_assert!(constraints.satisfied_by(&state.partition()));
        }
    }
}
