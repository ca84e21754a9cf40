//! Conversation hypergraphs.
//!
//! A dialogue of `N` utterances becomes `3N` nodes, one per (modality,
//! utterance), laid out as `[all textual, all acoustic, all visual]`.
//! The initial hyperedges are the three modality edges (every node of one
//! modality) followed by `N` utterance edges (the three modality nodes of
//! one utterance), so `M = N + 3`.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Modality {
    Text = 0,
    Audio = 1,
    Visual = 2,
}

impl Modality {
    pub const ALL: [Modality; 3] = [Modality::Text, Modality::Audio, Modality::Visual];
}

/// Row of node `(modality, utterance)` in a dialogue of `n` utterances.
pub fn node_index(modality: Modality, utterance: usize, n: usize) -> usize {
    modality as usize * n + utterance
}

/// Hypergraph structure over the `3N` modality nodes of one dialogue.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypergraph {
    num_utterances: usize,
    incidence: Tensor,
}

impl Hypergraph {
    /// Wraps an existing `3N × M` incidence matrix after checking it is binary.
    pub fn from_incidence(num_utterances: usize, incidence: Tensor) -> Result<Self> {
        if num_utterances == 0 {
            return Err(Error::EmptyDialogue);
        }
        if incidence.rank() != 2 || incidence.rows() != 3 * num_utterances {
            return Err(Error::shape("hypergraph incidence", incidence.shape(), &[3 * num_utterances]));
        }
        if let Some(bad) = incidence.data().iter().find(|&&v| v != 0.0 && v != 1.0) {
            return Err(Error::Domain { op: "hypergraph incidence", msg: format!("entry {bad} is not binary") });
        }
        Ok(Hypergraph { num_utterances, incidence })
    }

    pub fn num_utterances(&self) -> usize {
        self.num_utterances
    }

    pub fn num_nodes(&self) -> usize {
        3 * self.num_utterances
    }

    pub fn num_edges(&self) -> usize {
        self.incidence.cols()
    }

    pub fn incidence(&self) -> &Tensor {
        &self.incidence
    }

    pub fn contains(&self, node: usize, edge: usize) -> bool {
        self.incidence.at(node, edge) == 1.0
    }

    pub fn degrees(&self) -> (Vec<f64>, Vec<f64>) {
        degrees(&self.incidence)
    }

    /// True if some node belongs to no hyperedge.
    pub fn has_isolated_node(&self) -> bool {
        self.degrees().0.iter().any(|&d| d == 0.0)
    }
}

/// The initial dialogue hypergraph: 3 modality edges, then one edge per utterance.
pub fn build_initial_incidence(num_utterances: usize) -> Result<Hypergraph> {
    if num_utterances == 0 {
        return Err(Error::EmptyDialogue);
    }
    let n = num_utterances;
    let m = n + 3;
    let mut h = Tensor::zeros(&[3 * n, m]);
    let data = h.data_mut();
    for modality in Modality::ALL {
        for i in 0..n {
            let row = node_index(modality, i, n);
            data[row * m + modality as usize] = 1.0;
            data[row * m + 3 + i] = 1.0;
        }
    }
    Ok(Hypergraph { num_utterances, incidence: h })
}

/// Row sums (node degrees) and column sums (edge degrees) of an incidence matrix.
pub fn degrees(h: &Tensor) -> (Vec<f64>, Vec<f64>) {
    let (rows, cols) = (h.rows(), h.cols());
    let mut node = vec![0.0; rows];
    let mut edge = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = h.at(i, j);
            node[i] += v;
            edge[j] += v;
        }
    }
    (node, edge)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_utterance() {
        let g = build_initial_incidence(1).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 4);
        let (node, _) = g.degrees();
        assert_eq!(node, vec![2.0; 3]);
    }

    #[test]
    fn two_utterances_column_sums() {
        let g = build_initial_incidence(2).unwrap();
        assert_eq!((g.num_nodes(), g.num_edges()), (6, 5));
        let (_, edge) = g.degrees();
        assert_eq!(edge, vec![2.0, 2.0, 2.0, 3.0, 3.0]);
        // utterance 1's edge holds its text, audio and visual nodes
        for m in Modality::ALL {
            assert!(g.contains(node_index(m, 1, 2), 4));
            assert!(!g.contains(node_index(m, 0, 2), 4));
        }
    }

    #[test]
    fn modality_edge_degree_equals_n() {
        let g = build_initial_incidence(4).unwrap();
        let (node, edge) = g.degrees();
        assert!(node.iter().all(|&d| d == 2.0));
        assert_eq!(&edge[..3], &[4.0, 4.0, 4.0]);
    }

    #[test]
    fn empty_dialogue_rejected() {
        assert!(matches!(build_initial_incidence(0), Err(Error::EmptyDialogue)));
    }

    #[test]
    fn zero_column_has_zero_degree() {
        let h = Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let (node, edge) = degrees(&h);
        assert_eq!(edge, vec![2.0, 0.0]);
        assert_eq!(node, vec![1.0, 1.0, 0.0]);
        let g = Hypergraph::from_incidence(1, h).unwrap();
        assert!(g.has_isolated_node());
    }

    #[test]
    fn non_binary_incidence_rejected() {
        let h = Tensor::full(&[3, 2], 0.5);
        assert!(Hypergraph::from_incidence(1, h).is_err());
    }
}
