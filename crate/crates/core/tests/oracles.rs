//! Independent numeric oracles for the differentiable building blocks.

use haucl::autodiff::{Tape, Var};
use haucl::contrastive::{contrastive_loss, cosine_similarity};
use haucl::encoders::{encode_modalities, EncoderConfig, EncoderParams};
use haucl::hyperconv::{hypergraph_conv, ConvParams};
use haucl::noise::{stream_rng, Stream};
use haucl::vhgae::{
    gumbel_from_uniform, incidence_bce, kl_to_standard_normal, latent_params, presence_from_scores, sample_latent,
    vhgae_encode, Latent, LatentHead,
};
use haucl::{build_initial_incidence, DialogueFeatures, ModalityDims, Noise, ParamStore, Result, Tensor, Utterance};
use rand::Rng;

fn random_tensor(shape: &[usize], seed: u64, lo: f64, hi: f64) -> Tensor {
    let mut rng = stream_rng(seed, Stream::Data);
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(lo..hi)).collect()).unwrap()
}

/// Checks d/dx Σ w ⊙ f(x) against central differences.
fn fd_check(name: &str, x: Tensor, f: impl for<'t> Fn(Var<'t>) -> Result<Var<'t>>) {
    let out_shape = {
        let tape = Tape::new();
        f(tape.leaf(x.clone())).unwrap().shape()
    };
    let w = random_tensor(&out_shape, 99, -1.0, 1.0);
    let objective = |x: &Tensor| -> f64 {
        let tape = Tape::new();
        let y = f(tape.leaf(x.clone())).unwrap();
        y.mul(tape.constant(w.clone())).unwrap().sum().item()
    };
    let tape = Tape::new();
    let leaf = tape.leaf(x.clone());
    let loss = f(leaf).unwrap().mul(tape.constant(w.clone())).unwrap().sum();
    let grad = tape.backward(loss).unwrap().wrt(leaf).unwrap();
    let h = 1e-5;
    for i in 0..x.numel() {
        let mut xp = x.clone();
        xp.data_mut()[i] += h;
        let mut xm = x.clone();
        xm.data_mut()[i] -= h;
        let numeric = (objective(&xp) - objective(&xm)) / (2.0 * h);
        let analytic = grad.data()[i];
        assert!(
            (analytic - numeric).abs() <= 1e-6 * numeric.abs().max(1.0),
            "{name}[{i}]: analytic {analytic} numeric {numeric}"
        );
    }
}

#[test]
fn finite_differences_per_op() {
    // kept away from kinks (relu at 0, clamp edges) and from log/sqrt poles
    let x = random_tensor(&[3, 4], 1, 0.2, 1.5).map(|v| if v > 0.85 { v } else { -v });
    let pos = random_tensor(&[3, 4], 2, 0.3, 2.0);
    let other = random_tensor(&[3, 4], 3, -1.0, 1.0);
    let row = random_tensor(&[1, 4], 4, -1.0, 1.0);
    let mat = random_tensor(&[4, 2], 5, -1.0, 1.0);

    fd_check("add-broadcast", x.clone(), |v| v.add(v.tape().constant(row.clone())));
    fd_check("sub", x.clone(), |v| v.tape().constant(other.clone()).sub(v));
    fd_check("mul", x.clone(), |v| v.mul(v));
    fd_check("div", pos.clone(), |v| v.tape().constant(other.clone()).div(v));
    fd_check("neg", x.clone(), |v| Ok(v.neg()));
    fd_check("relu", x.clone(), |v| Ok(v.relu()));
    fd_check("softplus", x.clone(), |v| Ok(v.softplus()));
    fd_check("sigmoid", x.clone(), |v| Ok(v.sigmoid()));
    fd_check("tanh", x.clone(), |v| Ok(v.tanh()));
    fd_check("exp", x.clone(), |v| Ok(v.exp()));
    fd_check("log", pos.clone(), |v| v.log());
    fd_check("sqrt", pos.clone(), |v| v.sqrt());
    fd_check("safe_recip", pos.clone(), |v| Ok(v.safe_recip()));
    fd_check("scale", x.clone(), |v| Ok(v.scale(-2.5)));
    fd_check("clamp", x.clone(), |v| Ok(v.clamp(-0.5, 0.5)));
    fd_check("matmul", x.clone(), |v| v.matmul(v.tape().constant(mat.clone())));
    fd_check("matmul-rhs", mat.clone(), |v| v.tape().constant(x.clone()).matmul(v));
    fd_check("t", x.clone(), |v| v.t());
    fd_check("sum", x.clone(), |v| Ok(v.sum()));
    fd_check("mean", x.clone(), |v| Ok(v.mean()));
    fd_check("sum_axis0", x.clone(), |v| v.sum_axis(0));
    fd_check("sum_axis1", x.clone(), |v| v.sum_axis(1));
    fd_check("softmax", x.clone(), |v| v.softmax(1));
    fd_check("log_softmax", x.clone(), |v| v.log_softmax(0));
    fd_check("gather", x.clone(), |v| v.gather(vec![0, 5, 5, 11], vec![2, 2]));
    fd_check("select_rows", x.clone(), |v| v.select_rows(&[2, 0, 2]));
    fd_check("reshape", x.clone(), |v| v.reshape(vec![6, 2]));
    fd_check("concat", x.clone(), |v| v.tape().concat(&[v, v.scale(3.0)], 1));
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn affine_row(x: &[f64], w: &Tensor, b: &Tensor) -> Vec<f64> {
    (0..w.cols()).map(|j| b.data()[j] + x.iter().enumerate().map(|(i, xi)| xi * w.at(i, j)).sum::<f64>()).collect()
}

fn dialogue(n: usize, dims: ModalityDims, seed: u64) -> DialogueFeatures {
    let mut rng = stream_rng(seed, Stream::Data);
    let mut vec = |len| (0..len).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    DialogueFeatures {
        utterances: (0..n)
            .map(|i| Utterance { t: vec(dims.t), a: vec(dims.a), v: vec(dims.v), speaker: i % 2, label: 0 })
            .collect(),
    }
}

#[test]
fn bidirectional_gru_matches_scalar_recurrence() {
    let dims = ModalityDims { t: 3, a: 2, v: 2 };
    let mut store = ParamStore::new();
    let cfg = EncoderConfig { dims, num_speakers: 2, d: 4, gru_hidden: 3 };
    let p = EncoderParams::init(&mut store, cfg, &mut stream_rng(11, Stream::Init));
    let dlg = dialogue(4, dims, 12);

    let step = |g: &haucl::encoders::GruParams, x: &[f64], h: &[f64]| -> Vec<f64> {
        let v = |id| store.get(id).clone();
        let xr = affine_row(x, &v(g.w_ir), &v(g.b_ir));
        let xz = affine_row(x, &v(g.w_iz), &v(g.b_iz));
        let xn = affine_row(x, &v(g.w_in), &v(g.b_in));
        let hr = affine_row(h, &v(g.w_hr), &v(g.b_hr));
        let hz = affine_row(h, &v(g.w_hz), &v(g.b_hz));
        let hn = affine_row(h, &v(g.w_hn), &v(g.b_hn));
        (0..h.len())
            .map(|k| {
                let r = sigmoid(xr[k] + hr[k]);
                let z = sigmoid(xz[k] + hz[k]);
                let n = (xn[k] + r * hn[k]).tanh();
                (1.0 - z) * n + z * h[k]
            })
            .collect()
    };
    let n = dlg.len();
    let mut fwd = vec![vec![0.0; 3]; n];
    let mut h = vec![0.0; 3];
    for t in 0..n {
        h = step(&p.gru_fwd, &dlg.utterances[t].t, &h);
        fwd[t] = h.clone();
    }
    let mut bwd = vec![vec![0.0; 3]; n];
    let mut h = vec![0.0; 3];
    for t in (0..n).rev() {
        h = step(&p.gru_bwd, &dlg.utterances[t].t, &h);
        bwd[t] = h.clone();
    }

    let tape = Tape::new();
    let bound = store.bind(&tape);
    let u = encode_modalities(&dlg, &p, &bound).unwrap().value();
    for t in 0..n {
        let ctx: Vec<f64> = fwd[t].iter().chain(&bwd[t]).copied().collect();
        let want = affine_row(&ctx, store.get(p.w_t), store.get(p.b_t));
        for (a, b) in u.row(t).iter().zip(&want) {
            assert!((a - b).abs() < 1e-12, "text row {t}: {a} vs {b}");
        }
        let want_a = affine_row(&dlg.utterances[t].a, store.get(p.w_a), store.get(p.b_a));
        for (a, b) in u.row(n + t).iter().zip(&want_a) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn hyperconv_matches_dense_oracle() {
    let (n_nodes, n_edges, d) = (6, 4, 3);
    let mut store = ParamStore::new();
    let p = ConvParams::init(&mut store, "c", d, &mut stream_rng(21, Stream::Init));
    let x = random_tensor(&[n_nodes, d], 22, -1.0, 1.0);
    // weighted incidence with one empty edge column and positive weights elsewhere
    let mut h = random_tensor(&[n_nodes, n_edges], 23, 0.0, 1.0);
    for v in 0..n_nodes {
        h.data_mut()[v * n_edges + 3] = 0.0;
    }

    let relu = |v: f64| v.max(0.0);
    let dense = |m: &Tensor, w: &Tensor, b: &Tensor| -> Vec<Vec<f64>> {
        (0..m.rows()).map(|i| affine_row(m.row(i), w, b).into_iter().map(relu).collect()).collect()
    };
    // edge aggregate: D_e^{-1} Hᵀ X
    let mut agg_e = Tensor::zeros(&[n_edges, d]);
    for e in 0..n_edges {
        let deg: f64 = (0..n_nodes).map(|v| h.at(v, e)).sum();
        for k in 0..d {
            let s: f64 = (0..n_nodes).map(|v| h.at(v, e) * x.at(v, k)).sum();
            agg_e.data_mut()[e * d + k] = if deg == 0.0 { 0.0 } else { s / deg };
        }
    }
    let e_out = dense(&agg_e, store.get(p.w_edge), store.get(p.b_edge));
    let mut agg_v = Tensor::zeros(&[n_nodes, d]);
    for v in 0..n_nodes {
        let deg: f64 = (0..n_edges).map(|e| h.at(v, e)).sum();
        for k in 0..d {
            let s: f64 = (0..n_edges).map(|e| h.at(v, e) * e_out[e][k]).sum();
            agg_v.data_mut()[v * d + k] = s / deg;
        }
    }
    let v_out = dense(&agg_v, store.get(p.w_node), store.get(p.b_node));

    let tape = Tape::new();
    let bound = store.bind(&tape);
    let (nodes, edges) = hypergraph_conv(&bound, tape.constant(x), tape.constant(h), &p).unwrap();
    for (e, row) in e_out.iter().enumerate() {
        for (a, b) in edges.value().row(e).iter().zip(row) {
            assert!((a - b).abs() < 1e-12);
        }
    }
    for (v, row) in v_out.iter().enumerate() {
        for (a, b) in nodes.value().row(v).iter().zip(row) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn latent_head_matches_scalar_formula() {
    let (d, d_z) = (3, 2);
    let mut store = ParamStore::new();
    let head = LatentHead::init(&mut store, "h", d, d_z, &mut stream_rng(31, Stream::Init));
    let k = random_tensor(&[2, d], 32, -1.0, 1.0);
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let latent = latent_params(&head, &bound, tape.constant(k.clone())).unwrap();
    let g = |id| store.get(id);
    for i in 0..2 {
        let hidden_mu: Vec<f64> =
            affine_row(k.row(i), g(head.w_mu), g(head.b_mu)).into_iter().map(|v| v.max(0.0)).collect();
        let mu = affine_row(&hidden_mu, g(head.w_1), g(head.b_1));
        let hidden_s: Vec<f64> =
            affine_row(k.row(i), g(head.w_sigma), g(head.b_sigma)).into_iter().map(|v| v.max(0.0)).collect();
        let sigma: Vec<f64> =
            affine_row(&hidden_s, g(head.w_2), g(head.b_2)).into_iter().map(|v| (1.0 + v.exp()).ln()).collect();
        for j in 0..d_z {
            assert!((latent.mu.value().at(i, j) - mu[j]).abs() < 1e-12);
            assert!((latent.sigma.value().at(i, j) - sigma[j]).abs() < 1e-12);
            assert!(sigma[j] > 0.0);
        }
    }
}

#[test]
fn reparameterized_sample_mean() {
    let tape = Tape::new();
    let n = 10_000;
    let latent =
        Latent { mu: tape.constant(Tensor::full(&[n, 1], 1.0)), sigma: tape.constant(Tensor::full(&[n, 1], 2.0)) };
    let m = sample_latent(latent, &mut Noise::sampling(41)).unwrap().value();
    let mean = m.sum() / n as f64;
    assert!((mean - 1.0).abs() <= 3.0 * 2.0 / 100.0, "mean {mean}");
    // degenerate scale ignores the noise
    let flat = Latent { mu: tape.constant(Tensor::full(&[3, 2], 0.7)), sigma: tape.constant(Tensor::zeros(&[3, 2])) };
    let m = sample_latent(flat, &mut Noise::sampling(42)).unwrap().value();
    assert!(m.data().iter().all(|&v| v == 0.7));
}

#[test]
fn zero_latent_head_gives_prior_like_output() {
    let mut store = ParamStore::new();
    let head = LatentHead::init(&mut store, "h", 3, 2, &mut stream_rng(0, Stream::Init));
    for id in store.ids().collect::<Vec<_>>() {
        let shape = store.get(id).shape().to_vec();
        *store.get_mut(id) = Tensor::zeros(&shape);
    }
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let l = latent_params(&head, &bound, tape.constant(random_tensor(&[4, 3], 1, -1.0, 1.0))).unwrap();
    assert!(l.mu.value().data().iter().all(|&v| v == 0.0));
    assert!(l.sigma.value().data().iter().all(|&v| (v - 2f64.ln()).abs() < 1e-15));
}

#[test]
fn autoencoder_loss_matches_scalar_formulas() {
    let tape = Tape::new();
    let mu = Tensor::from_rows(&[vec![0.3, -1.2], vec![0.0, 2.0]]).unwrap();
    let sigma = Tensor::from_rows(&[vec![0.5, 1.0], vec![1.7, 0.2]]).unwrap();
    let kl = kl_to_standard_normal(Latent { mu: tape.constant(mu.clone()), sigma: tape.constant(sigma.clone()) })
        .unwrap()
        .item();
    let want: f64 =
        mu.data().iter().zip(sigma.data()).map(|(m, s)| 0.5 * (s * s + m * m - 1.0 - (s * s).ln())).sum::<f64>() / 4.0;
    assert!((kl - want).abs() < 1e-12);

    let p = Tensor::from_rows(&[vec![0.9, 0.2], vec![1e-9, 0.5]]).unwrap();
    let h = Tensor::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
    let bce = incidence_bce(tape.constant(p.clone()), &h).unwrap().item();
    let want: f64 = p
        .data()
        .iter()
        .zip(h.data())
        .map(|(&q, &y)| {
            let q = q.clamp(1e-7, 1.0 - 1e-7);
            -(y * q.ln() + (1.0 - y) * (1.0 - q).ln())
        })
        .sum::<f64>()
        / 4.0;
    assert!((bce - want).abs() < 1e-12);
}

#[test]
fn conv_is_edge_permutation_equivariant() {
    let mut store = ParamStore::new();
    let p = ConvParams::init(&mut store, "c", 3, &mut stream_rng(5, Stream::Init));
    let x = random_tensor(&[6, 3], 6, -1.0, 1.0);
    let h = build_initial_incidence(2).unwrap().incidence().clone();
    let perm = [4, 0, 3, 1, 2];
    let mut hp = Tensor::zeros(&[6, 5]);
    for v in 0..6 {
        for (j, &src) in perm.iter().enumerate() {
            hp.data_mut()[v * 5 + j] = h.at(v, src);
        }
    }
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let (n1, e1) = hypergraph_conv(&bound, tape.constant(x.clone()), tape.constant(h), &p).unwrap();
    let (n2, e2) = hypergraph_conv(&bound, tape.constant(x), tape.constant(hp), &p).unwrap();
    assert!(n1.value().bit_eq(&n2.value()));
    for (j, &src) in perm.iter().enumerate() {
        assert_eq!(e2.value().row(j), e1.value().row(src));
    }
}

#[test]
fn single_utterance_encoding_shapes() {
    let mut store = ParamStore::new();
    let mut rng = stream_rng(7, Stream::Init);
    let conv = haucl::hyperconv::HyperConv::init(&mut store, "c", 4, 1, &mut rng);
    let tape = Tape::new();
    let bound = store.bind(&tape);
    let h0 = tape.constant(build_initial_incidence(1).unwrap().incidence().clone());
    let (v, e) = vhgae_encode(&conv, &bound, tape.constant(Tensor::full(&[3, 4], 0.5)), h0).unwrap();
    assert_eq!((v.shape(), e.shape()), (vec![3, 4], vec![4, 4]));
}

#[test]
fn hard_decode_frequency_matches_sigmoid() {
    let trials = 10_000;
    for (k, s) in [-2.0, 0.0, 2.0].into_iter().enumerate() {
        let mut noise = Noise::sampling(50 + k as u64);
        let tape = Tape::new();
        let scores = tape.constant(Tensor::full(&[trials, 1], s));
        let u0 = noise.clamped_uniform(&[trials, 1]).unwrap().unwrap();
        let u1 = noise.clamped_uniform(&[trials, 1]).unwrap().unwrap();
        let p = presence_from_scores(scores, Some((gumbel_from_uniform(&u0), gumbel_from_uniform(&u1))), 1.0).unwrap();
        let present = p.value().data().iter().filter(|&&v| v >= 0.5).count();
        let freq = present as f64 / trials as f64;
        assert!((freq - sigmoid(s)).abs() < 0.02, "s={s}: {freq} vs {}", sigmoid(s));
    }
}

/// Literal double loop over anchors and negatives.
fn contrastive_oracle(v1: &Tensor, v2: &Tensor, tau: f64) -> f64 {
    let n = v1.rows();
    let sim = |a: &Tensor, i: usize, b: &Tensor, j: usize| (cosine_similarity(a.row(i), b.row(j)) / tau).exp();
    let mut total = 0.0;
    for (a, b) in [(v1, v2), (v2, v1)] {
        for i in 0..n {
            let pos = sim(a, i, b, i);
            let mut denom = 0.0;
            for j in 0..n {
                denom += sim(a, i, b, j);
                if j != i {
                    denom += sim(a, i, a, j);
                }
            }
            total += -(pos / denom).ln();
        }
    }
    total / (2.0 * n as f64)
}

#[test]
fn contrastive_orthogonal_pair_closed_form() {
    let tape = Tape::new();
    let v1 = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
    let loss = contrastive_loss(tape.constant(v1.clone()), tape.constant(v1.clone()), 1.0).unwrap().item();
    let e = std::f64::consts::E;
    assert!((loss - ((e + 2.0) / e).ln()).abs() < 1e-9);
    assert!((contrastive_oracle(&v1, &v1, 1.0) - loss).abs() < 1e-12);
}

#[test]
fn contrastive_matches_double_loop() {
    for seed in 0..20 {
        let n = 1 + seed as usize % 7;
        let v1 = random_tensor(&[n, 5], 100 + seed, -1.0, 1.0);
        let v2 = random_tensor(&[n, 5], 200 + seed, -1.0, 1.0);
        let tau = 0.2 + 0.1 * (seed % 5) as f64;
        let tape = Tape::new();
        let loss = contrastive_loss(tape.constant(v1.clone()), tape.constant(v2.clone()), tau).unwrap().item();
        let want = contrastive_oracle(&v1, &v2, tau);
        assert!((loss - want).abs() < 1e-9, "seed {seed}: {loss} vs {want}");
    }
}
