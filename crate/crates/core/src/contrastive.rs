//! Node-level contrastive loss between two views of the same dialogue.
//!
//! Node `i` of view 1 and node `i` of view 2 form a positive pair. For an
//! anchor in one view the negatives are every other node of the other view
//! and every other node of its own view. Similarities are cosines divided by
//! a temperature, and the per-anchor term is a log-softmax evaluated at the
//! positive pair. Both directions are averaged.

use crate::autodiff::Var;
use crate::error::{Error, Result};

/// Cosine similarity; 0 if either vector has zero norm.
pub fn cosine_similarity(x: &[f64], y: &[f64]) -> f64 {
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 {
        0.0
    } else {
        (dot / (nx * ny)).clamp(-1.0, 1.0)
    }
}

/// Rows scaled to unit norm; zero rows stay zero.
pub fn normalize_rows<'t>(x: Var<'t>) -> Result<Var<'t>> {
    let norms = x.mul(x)?.sum_axis(1)?.sqrt()?;
    x.mul(norms.safe_recip())
}

/// `[n, m]` matrix of row-wise cosine similarities between `a` (`[n, d]`) and `b` (`[m, d]`).
pub fn cosine_matrix<'t>(a: Var<'t>, b: Var<'t>) -> Result<Var<'t>> {
    normalize_rows(a)?.matmul(normalize_rows(b)?.t()?)
}

/// Sum over anchors of `-log q(pos) / (q(pos) + Σ cross negatives + Σ same-view negatives)`.
fn directional_sum<'t>(cross: Var<'t>, same: Var<'t>, n: usize, tau: f64) -> Result<Var<'t>> {
    let tape = cross.tape();
    let logits = if n == 1 {
        cross
    } else {
        // same-view similarities with the diagonal (self pairs) removed: [n, n-1]
        let off_diag: Vec<usize> =
            (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| i * n + j)).collect();
        let same_neg = same.gather(off_diag, vec![n, n - 1])?;
        tape.concat(&[cross, same_neg], 1)?
    };
    let width = if n == 1 { 1 } else { 2 * n - 1 };
    let log_p = logits.scale(1.0 / tau).log_softmax(1)?;
    let positives: Vec<usize> = (0..n).map(|i| i * width + i).collect();
    Ok(log_p.gather(positives, vec![n])?.sum().neg())
}

/// Symmetrized contrastive loss between views `v1` and `v2` (`[n, d]` each).
pub fn contrastive_loss<'t>(v1: Var<'t>, v2: Var<'t>, tau: f64) -> Result<Var<'t>> {
    if !(tau > 0.0) {
        return Err(Error::Parameter(format!("contrastive temperature must be positive, got {tau}")));
    }
    let (s1, s2) = (v1.shape(), v2.shape());
    if s1 != s2 || s1.len() != 2 {
        return Err(Error::shape("contrastive_loss", &s1, &s2));
    }
    let n = s1[0];
    let s12 = cosine_matrix(v1, v2)?;
    let s21 = s12.t()?;
    let s11 = cosine_matrix(v1, v1)?;
    let s22 = cosine_matrix(v2, v2)?;
    let forward = directional_sum(s12, s11, n, tau)?;
    let backward = directional_sum(s21, s22, n, tau)?;
    Ok(forward.add(backward)?.scale(1.0 / (2.0 * n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;
    use crate::tensor::Tensor;

    #[test]
    fn cosine_cases() {
        let v = [0.3, -1.2, 2.0];
        assert!((cosine_similarity(&v, &v) - 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[1.0, 0.0], &[0.0, 1.0]), 0.0);
        let neg: Vec<f64> = v.iter().map(|x| -x).collect();
        assert!((cosine_similarity(&v, &neg) + 1.0).abs() < 1e-15);
        assert_eq!(cosine_similarity(&[0.0, 0.0], &[1.0, 2.0]), 0.0);
    }

    #[test]
    fn single_node_has_zero_loss() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![1.0, 2.0]]).unwrap());
        let b = tape.leaf(Tensor::from_rows(&[vec![-3.0, 0.5]]).unwrap());
        assert_eq!(contrastive_loss(a, b, 0.5).unwrap().item(), 0.0);
    }

    #[test]
    fn zero_rows_do_not_produce_nan() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::from_rows(&[vec![0.0, 0.0], vec![1.0, 0.0]]).unwrap());
        let b = tape.leaf(Tensor::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap());
        let loss = contrastive_loss(a, b, 0.5).unwrap();
        assert!(loss.item().is_finite());
        let g = tape.backward(loss).unwrap();
        assert!(g.wrt(a).unwrap().is_finite());
    }

    #[test]
    fn rejects_bad_temperature_and_shapes() {
        let tape = Tape::new();
        let a = tape.leaf(Tensor::zeros(&[2, 2]));
        let b = tape.leaf(Tensor::zeros(&[3, 2]));
        assert!(matches!(contrastive_loss(a, a, 0.0), Err(Error::Parameter(_))));
        assert!(matches!(contrastive_loss(a, b, 1.0), Err(Error::Shape { .. })));
    }
}
