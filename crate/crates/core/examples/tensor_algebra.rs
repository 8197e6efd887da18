//! Contractions, mode products, Kronecker products and unfoldings on small
//! dense tensors.

use mgtn::tensor::{self, DenseTensor};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    // x[i, j, k] = i + 10 j + 100 k
    let x = DenseTensor::from_fn(&[2, 3, 4], |ix| (ix[0] + 10 * ix[1] + 100 * ix[2]) as f64);
    let y = DenseTensor::from_fn(&[3, 5], |ix| if ix[0] == ix[1] { 1.0 } else { 0.5 });

    let z = tensor::contract(&x, &[1], &y, &[0])?;
    println!("contract modes (1 | 0): {:?} -> {:?}", x.shape(), z.shape());

    let u = DenseTensor::from_rows(&[vec![1.0, -1.0], vec![0.5, 0.5]])?;
    let m = tensor::mode_product(&x, &u, 0)?;
    println!("mode-0 product with a 2x2 matrix keeps shape {:?}", m.shape());

    let unfold = tensor::matricize(&x, 2)?;
    println!(
        "mode-2 unfolding is {:?}; refolds exactly: {}",
        unfold.shape(),
        tensor::tensorize(&unfold, x.shape(), 2)? == x
    );

    let a = DenseTensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]])?;
    let b = DenseTensor::identity(2);
    let k = tensor::kron(&a, &b)?;
    println!("kron(A, I2):");
    for r in 0..4 {
        let row: Vec<f64> = (0..4).map(|c| k.get(&[r, c])).collect();
        println!("  {row:?}");
    }

    let full = tensor::contract(&x, &[0, 1, 2], &x, &[0, 1, 2])?;
    println!("<x, x> = {} = ||x||^2 = {}", full.data()[0], x.frobenius_norm().powi(2));
    Ok(())
}
