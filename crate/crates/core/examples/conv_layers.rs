//! One pass through the building blocks by hand: a 3x3 filter over a 6x6
//! input, ReLU, 2x2 max-pooling, then the gradient flowing back through the
//! pool.

use convforest::dcnn::{conv_forward, maxpool_backward, maxpool_forward, relu_forward, softmax, Tensor3};

fn show(label: &str, t: &Tensor3) {
    let (c, h, w) = t.shape();
    println!("{label} ({c}x{h}x{w}):");
    for y in 0..h {
        let row: Vec<String> = (0..w).map(|x| format!("{:6.2}", t.get(0, y, x))).collect();
        println!("  {}", row.join(" "));
    }
}

fn main() -> convforest::Result<()> {
    let input = Tensor3::from_vec(1, 6, 6, (0..36).map(|i| ((i * 7) % 11) as f64 / 10.0).collect())?;
    // A vertical edge detector.
    let filter = Tensor3::from_vec(1, 3, 3, vec![1.0, 0.0, -1.0, 1.0, 0.0, -1.0, 1.0, 0.0, -1.0])?;

    let conv = conv_forward(&input, &[filter], &[0.0])?;
    let act = relu_forward(&conv);
    let (pooled, record) = maxpool_forward(&act, 2, 2)?;
    show("input", &input);
    show("convolution", &conv);
    show("relu", &act);
    show("max-pool", &pooled);

    let ones = Tensor3::from_vec(1, 2, 2, vec![1.0; 4])?;
    show("gradient routed back to the pool winners", &maxpool_backward(&ones, &record));

    let p = softmax(&[2.0, 1.0, 0.1]);
    println!("softmax of [2, 1, 0.1] = {p:.4?}, sum {}", p.iter().sum::<f64>());
    Ok(())
}
