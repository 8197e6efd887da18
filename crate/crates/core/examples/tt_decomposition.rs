//! TT-SVD in exact and tolerance mode, and a TT matrix applied without
//! materializing it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mgtn::tensor::{self, DenseTensor, TTMatrix, Truncation};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let x = DenseTensor::from_fn(&[6, 6, 6, 6], |_| rng.random_range(-1.0..1.0));
    let norm = x.frobenius_norm();

    let exact = tensor::tt_svd(&x, &Truncation::Exact)?;
    let err = tensor::tt_reconstruct(&exact).axpy(-1.0, &x)?.frobenius_norm() / norm;
    println!(
        "exact: ranks {:?}, {} parameters, relative error {err:.2e}",
        exact.ranks(),
        exact.param_count()
    );

    for tau in [0.1, 0.3, 0.6] {
        let tt = tensor::tt_svd(&x, &Truncation::Tolerance(tau))?;
        let err = tensor::tt_reconstruct(&tt).axpy(-1.0, &x)?.frobenius_norm() / norm;
        println!(
            "tau {tau}: ranks {:?}, {} parameters, relative error {err:.3}",
            tt.ranks(),
            tt.param_count()
        );
    }

    let capped = tensor::tt_svd(&x, &Truncation::MaxRanks(vec![2, 2, 2]))?;
    println!("capped at 2: ranks {:?}", capped.ranks());

    // the agent's hidden layer shape: (16, 30, 9) -> (3, 3, 3), ranks (1, 2, 2, 1)
    let (outs, ins, ranks) = ([3, 3, 3], [16, 30, 9], [1, 2, 2, 1]);
    let cores = (0..3)
        .map(|k| {
            DenseTensor::from_fn(&[ranks[k], outs[k], ins[k], ranks[k + 1]], |_| {
                rng.random_range(-0.2..0.2)
            })
        })
        .collect();
    let w = TTMatrix::new(cores)?;
    let v = DenseTensor::from_fn(&ins, |_| rng.random_range(-1.0..1.0));
    let y = tensor::tt_matvec(&w, &v)?;
    let dense = tensor::matmul(&w.to_dense(), &v.reshape(&[w.cols(), 1])?)?;
    println!(
        "TT matrix {}x{} stored in {} numbers (dense {}); matvec vs dense max diff {:.1e}",
        w.rows(),
        w.cols(),
        w.param_count(),
        w.rows() * w.cols(),
        y.reshape(&[w.rows(), 1])?.max_abs_diff(&dense)?
    );
    Ok(())
}
