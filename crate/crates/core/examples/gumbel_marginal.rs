//! Empirical presence frequency of noisy hard decodes against `sigmoid(s)`.

use haucl::vhgae::{gumbel_from_uniform, presence_from_scores, presence_marginal};
use haucl::{Noise, Tape, Tensor};

fn main() -> haucl::Result<()> {
    let trials = 10_000;
    let mut noise = Noise::sampling(0);
    for tau in [1.0, 0.1] {
        for s in [-2.0, -0.5, 0.0, 0.5, 2.0] {
            let tape = Tape::new();
            let scores = tape.constant(Tensor::full(&[trials, 1], s));
            let u0 = noise.clamped_uniform(&[trials, 1])?.expect("sampling");
            let u1 = noise.clamped_uniform(&[trials, 1])?.expect("sampling");
            let p = presence_from_scores(scores, Some((gumbel_from_uniform(&u0), gumbel_from_uniform(&u1))), tau)?;
            let freq = p.value().data().iter().filter(|&&v| v >= 0.5).count() as f64 / trials as f64;
            println!("tau={tau:<4} s={s:+.1} freq={freq:.4} sigmoid={:.4}", presence_marginal(s));
        }
    }
    Ok(())
}
