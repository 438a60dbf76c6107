#![allow(clippy::needless_range_loop)]

mod common;

use common::*;
use fillorder::env::AdjacencyMode;
use fillorder::policy::{forward, loss, loss_and_grad, PolicyConfig, PolicyParams};
use fillorder::ppo::{clip_grad_norm, Adam};
use fillorder::Execution;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn scores_are_permutation_equivariant(
        (g, pi) in graph_and_perm(1, 10),
        k in 0usize..10,
        seed in any::<u64>(),
        masking in any::<bool>(),
    ) {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let perm = random_permutation(&mut rng, g.n());
        let k = k.min(g.n());
        let cfg = PolicyConfig { node_dim: 6, policy_sizes: vec![5], adjacency: AdjacencyMode::Current, action_masking: masking };
        let mut params = PolicyParams::init(cfg, seed).unwrap();
        for t in params.tensors_mut() {
            t.data.iter_mut().for_each(|x| *x *= 3.0);
        }
        let a = forward(&params, &observation(&g, &pi[..k], masking, AdjacencyMode::Current)).unwrap();
        let h = g.relabel(&perm).unwrap();
        let mapped: Vec<usize> = pi[..k].iter().map(|&v| perm[v]).collect();
        let b = forward(&params, &observation(&h, &mapped, masking, AdjacencyMode::Current)).unwrap();
        for v in 0..g.n() {
            prop_assert!((a.logits[v] - b.logits[perm[v]]).abs() < 1e-6);
            let (la, lb) = (a.masked_log_probs[v], b.masked_log_probs[perm[v]]);
            prop_assert!(la == lb || (la - lb).abs() < 1e-6);
        }
        prop_assert!((a.value - b.value).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_central_differences(seed in any::<u64>()) {
        let case = random_grad_case(seed);
        let err = max_grad_rel_error(&case, 1e-5);
        prop_assert!(err < 1e-4, "relative error {}", err);
    }

    #[test]
    fn parallel_and_sequential_gradients_are_identical(seed in any::<u64>()) {
        let case = random_grad_case(seed);
        let samples = case.samples();
        let a = loss_and_grad(&case.params, &samples, &case.spec, Execution::Sequential).unwrap();
        let b = loss_and_grad(&case.params, &samples, &case.spec, Execution::Parallel).unwrap();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn small_optimizer_steps_reduce_the_loss() {
    let mut decreased = 0;
    for seed in 0..20 {
        let case = random_grad_case(seed);
        let samples = case.samples();
        let before = loss(&case.params, &samples, &case.spec).unwrap().total;
        let (_, mut grads) = loss_and_grad(&case.params, &samples, &case.spec, Execution::Sequential).unwrap();
        clip_grad_norm(&mut grads, 0.5);
        let mut params = case.params.clone();
        let mut opt = Adam::new(&params, 1e-4);
        opt.step(&mut params, &grads);
        let after = loss(&params, &samples, &case.spec).unwrap().total;
        if after < before {
            decreased += 1;
        }
    }
    assert_eq!(decreased, 20);
}

#[test]
fn gradient_check_detects_a_mismatched_loss() {
    for seed in 100..120 {
        let case = random_grad_case(seed);
        assert!(max_grad_rel_error(&case, 1e-5) < 1e-4);
        // analytic gradient of a loss with a 1% different value coefficient
        let mut wrong = random_grad_case(seed);
        wrong.spec.value_coef *= 1.01;
        let (_, g_wrong) = loss_and_grad(&wrong.params, &wrong.samples(), &wrong.spec, Execution::Sequential).unwrap();
        assert!(max_rel_error_against(&case, &g_wrong, 1e-5) > 1e-3, "seed {seed}");
    }
}
