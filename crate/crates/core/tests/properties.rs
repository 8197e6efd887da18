use std::sync::Arc;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgtn::graph::{self, Adjacency, CarryTable, RateQuote};
use mgtn::market::{self, SynthKind, SynthSpec, TradingEnv};
use mgtn::mgtn::{Activation, FMGTNLayer, GMGTNLayer};
use mgtn::rl::Action;
use mgtn::tensor::{self, DenseTensor, TTMatrix, Truncation};

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> DenseTensor {
    DenseTensor::from_fn(shape, |_| rng.random_range(-1.0..1.0))
}

fn random_adj(n: usize, rng: &mut ChaCha8Rng) -> Adjacency {
    Adjacency::new(DenseTensor::from_fn(&[n, n], |ix| {
        if ix[0] == ix[1] {
            0.0
        } else {
            rng.random_range(0.0..1.0)
        }
    }))
    .unwrap()
}

fn shape_strategy(max_order: usize, max_dim: usize) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1..=max_dim, 1..=max_order)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn contraction_is_bilinear(shape in shape_strategy(3, 4), extra in shape_strategy(2, 4), seed in any::<u64>(), alpha in -2.0f64..2.0, beta in -2.0f64..2.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mode = rng.random_range(0..shape.len());
        let mut b_shape = extra.clone();
        b_shape.insert(0, shape[mode]);
        let (a1, a2, b) = (random(&shape, &mut rng), random(&shape, &mut rng), random(&b_shape, &mut rng));
        let lhs = tensor::contract(&a1.scale(alpha).axpy(beta, &a2).unwrap(), &[mode], &b, &[0]).unwrap();
        let rhs = tensor::contract(&a1, &[mode], &b, &[0]).unwrap().scale(alpha)
            .axpy(beta, &tensor::contract(&a2, &[mode], &b, &[0]).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        let expected: Vec<usize> = shape.iter().enumerate().filter(|(d, _)| *d != mode).map(|(_, &s)| s)
            .chain(extra.iter().copied()).collect();
        prop_assert_eq!(lhs.shape(), expected.as_slice());
    }

    #[test]
    fn permute_round_trips(shape in shape_strategy(4, 4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&shape, &mut rng);
        let mut perm: Vec<usize> = (0..shape.len()).collect();
        for k in (1..perm.len()).rev() {
            perm.swap(k, rng.random_range(0..=k));
        }
        let mut inv = vec![0; perm.len()];
        for (d, &p) in perm.iter().enumerate() {
            inv[p] = d;
        }
        let y = tensor::permute(&x, &perm).unwrap();
        prop_assert_eq!(tensor::permute(&y, &inv).unwrap(), x);
    }

    #[test]
    fn kron_dims_and_mixed_product(n in 1usize..4, m in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (a, b) = (random(&[n, m], &mut rng), random(&[m, n], &mut rng));
        let (c, d) = (random(&[m, n], &mut rng), random(&[n, m], &mut rng));
        let ab = tensor::kron(&a, &c).unwrap();
        prop_assert_eq!(ab.shape(), &[n * m, m * n]);
        let lhs = tensor::matmul(&ab, &tensor::kron(&b, &d).unwrap()).unwrap();
        let rhs = tensor::kron(&tensor::matmul(&a, &b).unwrap(), &tensor::matmul(&c, &d).unwrap()).unwrap();
        prop_assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
    }

    #[test]
    fn matricize_tensorize_inverse(shape in shape_strategy(4, 4), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&shape, &mut rng);
        for n in 0..shape.len() {
            let m = tensor::matricize(&x, n).unwrap();
            prop_assert_eq!(m.shape()[0], shape[n]);
            prop_assert_eq!(tensor::tensorize(&m, &shape, n).unwrap(), x.clone());
        }
    }

    #[test]
    fn tt_svd_exact_and_tolerance(shape in prop::collection::vec(2usize..5, 2..5), seed in any::<u64>(), tau in 0.05f64..0.8) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = random(&shape, &mut rng);
        let norm = x.frobenius_norm();
        let exact = tensor::tt_reconstruct(&tensor::tt_svd(&x, &Truncation::Exact).unwrap());
        prop_assert!(exact.max_abs_diff(&x).unwrap() <= 1e-12 * norm.max(1.0));
        let approx = tensor::tt_reconstruct(&tensor::tt_svd(&x, &Truncation::Tolerance(tau)).unwrap());
        let err = approx.axpy(-1.0, &x).unwrap().frobenius_norm();
        prop_assert!(err <= tau * norm * (1.0 + 1e-12));
    }

    #[test]
    fn tt_matvec_matches_dense(d in 1usize..4, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let outs: Vec<usize> = (0..d).map(|_| rng.random_range(1..4)).collect();
        let ins: Vec<usize> = (0..d).map(|_| rng.random_range(1..5)).collect();
        let mut ranks = vec![1];
        ranks.extend((1..d).map(|_| rng.random_range(1..4)));
        ranks.push(1);
        let cores = (0..d).map(|k| random(&[ranks[k], outs[k], ins[k], ranks[k + 1]], &mut rng)).collect();
        let w = TTMatrix::new(cores).unwrap();
        let x = random(&ins, &mut rng);
        let y = tensor::tt_matvec(&w, &x).unwrap();
        let dense = tensor::matmul(&w.to_dense(), &x.reshape(&[w.cols(), 1]).unwrap()).unwrap();
        prop_assert!(y.reshape(&[w.rows(), 1]).unwrap().max_abs_diff(&dense).unwrap() < 1e-10);
    }

    #[test]
    fn multilinear_filter_at_identity_is_shift(j in 1usize..4, i in 1usize..6, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = random_adj(i, &mut rng);
        let f = graph::multilinear_filter(&a, &DenseTensor::identity(j), graph::DEFAULT_FILTER_CAP).unwrap();
        let x = random(&[j, i], &mut rng);
        let via_filter = tensor::contract(f.tensor(), &[2, 3], &x, &[0, 1]).unwrap();
        let via_shift = tensor::mode_product(&x, &a.shift_matrix(), 1).unwrap();
        prop_assert!(via_filter.max_abs_diff(&via_shift).unwrap() < 1e-12);
    }

    #[test]
    fn carry_graph_is_symmetric_with_zero_diagonal(quotes in prop::collection::vec((0.5f64..2.0, 0.5f64..2.0), 1..6), rescale in any::<bool>()) {
        let currencies: Vec<String> = ["EUR", "GBP", "JPY", "CHF", "SEK", "NOK", "AUD"].iter().map(|s| s.to_string()).collect();
        let mut table = CarryTable::default();
        for (k, (spot, forward)) in quotes.iter().enumerate() {
            let pair = format!("{}{}", currencies[k], currencies[k + 1]);
            table.pairs.insert(pair, RateQuote { spot: *spot, forward: *forward });
        }
        let a = graph::carry_graph(&table, &currencies, rescale).unwrap();
        prop_assert!(a.is_symmetric());
        for k in 0..a.nodes() {
            prop_assert_eq!(a.weight(k, k), 0.0);
        }
        if let Ok(n) = a.normalize() {
            prop_assert!(n.is_symmetric());
            for k in 0..n.nodes() {
                prop_assert_eq!(n.weight(k, k), 0.0);
            }
        }
    }

    #[test]
    fn fast_layer_equals_general_layer(j0 in 1usize..5, j1 in 1usize..5, i1 in 1usize..6, i2 in 1usize..5, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = vec![random_adj(i1, &mut rng), random_adj(i2, &mut rng)];
        let w = random(&[j1, j0], &mut rng);
        let fast = FMGTNLayer::from_adjacencies(&a, w.clone(), Activation::Relu).unwrap();
        let general = GMGTNLayer::new(a, vec![w, DenseTensor::identity(j1)], vec![DenseTensor::identity(j1); 2], Activation::Relu).unwrap();
        let x = random(&[j0, i1, i2], &mut rng);
        prop_assert!(fast.forward(&x).unwrap().max_abs_diff(&general.forward(&x).unwrap()).unwrap() < 1e-12);
    }

    #[test]
    fn stream_invariants(kind in prop_oneof![Just(SynthKind::Alternating), Just(SynthKind::Momentum), Just(SynthKind::RandomWalk)],
                         length in 8usize..80, lags in 1usize..6, seed in any::<u64>(), noise in 0.0f64..1.0) {
        let spec = SynthSpec { kind, length, seed, noise, ..SynthSpec::default() };
        let series = market::synth_series(&spec).unwrap();
        let returns = market::log_returns(&series).unwrap();
        let build = || market::build_stream(&returns, lags, "GBPUSD").unwrap();
        let stream = Arc::new(build());
        prop_assert_eq!(stream.len(), returns.len() - lags);
        for s in &stream.samples {
            prop_assert!(s.state_time < s.reward_time);
            prop_assert!(s.state.data().iter().all(|v| v.is_finite()));
        }
        let again = build();
        for (a, b) in stream.samples.iter().zip(&again.samples) {
            prop_assert_eq!(&a.state, &b.state);
            prop_assert_eq!(a.next_return.to_bits(), b.next_return.to_bits());
        }
        let mut buy = TradingEnv::new(stream.clone());
        let mut sell = TradingEnv::new(stream.clone());
        buy.restart();
        sell.restart();
        loop {
            let (b, s) = (buy.advance(Action::Buy).unwrap(), sell.advance(Action::Sell).unwrap());
            prop_assert_eq!(b.reward, -s.reward);
            if b.terminal {
                prop_assert!(s.terminal);
                break;
            }
        }
    }
}
