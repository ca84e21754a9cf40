//! Hypergraph convolution: node→hyperedge mean aggregation followed by
//! hyperedge→node mean propagation.
//!
//! For node features `X` (`[n, d]`) and incidence `H` (`[n, m]`):
//!
//! ```text
//! E' = relu((D_e⁻¹ Hᵀ X) · W_edge + b_edge)
//! X' = relu((D_v⁻¹ H E') · W_node + b_node)
//! ```
//!
//! `D_e`, `D_v` are the diagonal edge and node degree matrices; a zero
//! degree yields a zero aggregate. `H` may be a soft or straight-through
//! incidence on the tape, in which case degrees are differentiated too.

use rand::Rng;

use crate::autodiff::Var;
use crate::error::{Error, Result};
use crate::params::{affine, Bound, ParamId, ParamStore};

#[derive(Clone, Debug)]
pub struct ConvParams {
    pub w_edge: ParamId,
    pub b_edge: ParamId,
    pub w_node: ParamId,
    pub b_node: ParamId,
}

impl ConvParams {
    pub fn init<R: Rng + ?Sized>(store: &mut ParamStore, prefix: &str, d: usize, rng: &mut R) -> Self {
        ConvParams {
            w_edge: store.add_weight(format!("{prefix}.w_edge"), d, d, rng),
            b_edge: store.add_bias(format!("{prefix}.b_edge"), d, d, rng),
            w_node: store.add_weight(format!("{prefix}.w_node"), d, d, rng),
            b_node: store.add_bias(format!("{prefix}.b_node"), d, d, rng),
        }
    }
}

/// A stack of convolution layers; the last layer's hyperedge state is returned.
#[derive(Clone, Debug)]
pub struct HyperConv {
    pub layers: Vec<ConvParams>,
}

impl HyperConv {
    pub fn init<R: Rng + ?Sized>(
        store: &mut ParamStore,
        prefix: &str,
        d: usize,
        num_layers: usize,
        rng: &mut R,
    ) -> Self {
        let layers = (0..num_layers).map(|l| ConvParams::init(store, &format!("{prefix}.{l}"), d, rng)).collect();
        HyperConv { layers }
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    /// Returns `(X', E')` after all layers.
    pub fn forward<'t>(&self, bound: &Bound<'t>, x: Var<'t>, h: Var<'t>) -> Result<(Var<'t>, Var<'t>)> {
        let mut nodes = x;
        let mut edges = None;
        for layer in &self.layers {
            let (n, e) = hypergraph_conv(bound, nodes, h, layer)?;
            nodes = n;
            edges = Some(e);
        }
        let edges = edges.ok_or_else(|| Error::Config("hypergraph convolution needs at least one layer".into()))?;
        Ok((nodes, edges))
    }
}

/// One convolution layer; returns `(X', E')`.
pub fn hypergraph_conv<'t>(bound: &Bound<'t>, x: Var<'t>, h: Var<'t>, p: &ConvParams) -> Result<(Var<'t>, Var<'t>)> {
    let (xs, hs) = (x.shape(), h.shape());
    if hs.len() != 2 || xs.len() != 2 || hs[0] != xs[0] {
        return Err(Error::shape("hypergraph_conv", &xs, &hs));
    }
    let ht = h.t()?;
    // node → hyperedge
    let inv_edge_deg = h.sum_axis(0)?.safe_recip().t()?;
    let edge_agg = ht.matmul(x)?.mul(inv_edge_deg)?;
    let edges = affine(edge_agg, bound.var(p.w_edge), bound.var(p.b_edge))?.relu();
    // hyperedge → node
    let inv_node_deg = h.sum_axis(1)?.safe_recip();
    let node_agg = h.matmul(edges)?.mul(inv_node_deg)?;
    let nodes = affine(node_agg, bound.var(p.w_node), bound.var(p.b_node))?.relu();
    Ok((nodes, edges))
}
