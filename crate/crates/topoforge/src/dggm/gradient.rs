//! Backpropagation through time across both recurrent levels.
//!
//! Produces exact gradients of the mean binary cross entropy with respect
//! to every tensor in the flat parameter buffer. Verified against central
//! finite differences in the test suite.

use std::ops::Range;

use super::model::{ForwardCache, GruStepCache, GruView, Layout, ModelError, ModelParams};
use super::sequence::EdgeSequence;

fn acc_vec(grads: &mut [f64], range: &Range<usize>, d: &[f64]) {
    for (slot, di) in grads[range.clone()].iter_mut().zip(d) {
        *slot += di;
    }
}

/// grads[range] += d (x)^T for a rows-by-cols block.
fn acc_outer(grads: &mut [f64], range: &Range<usize>, d: &[f64], x: &[f64]) {
    let cols = x.len();
    let block = &mut grads[range.clone()];
    for (i, di) in d.iter().enumerate() {
        let row = &mut block[i * cols..(i + 1) * cols];
        for (slot, xj) in row.iter_mut().zip(x) {
            *slot += di * xj;
        }
    }
}

/// out += W^T d for a row-major rows-by-cols matrix.
fn matvec_t_acc(w: &[f64], rows: usize, cols: usize, d: &[f64], out: &mut [f64]) {
    debug_assert_eq!(w.len(), rows * cols);
    for (i, di) in d.iter().enumerate().take(rows) {
        let row = &w[i * cols..(i + 1) * cols];
        for (oj, wj) in out.iter_mut().zip(row) {
            *oj += wj * di;
        }
    }
}

/// Gradient destinations for one gated unit.
struct GruRanges {
    wr: Range<usize>,
    wz: Range<usize>,
    wn: Range<usize>,
    ur: Range<usize>,
    uz: Range<usize>,
    un: Range<usize>,
    br: Range<usize>,
    bz: Range<usize>,
    bn: Range<usize>,
}

impl GruRanges {
    fn graph_unit(layout: &Layout) -> Self {
        GruRanges {
            wr: layout.gw_r.clone(),
            wz: layout.gw_z.clone(),
            wn: layout.gw_n.clone(),
            ur: layout.gu_r.clone(),
            uz: layout.gu_z.clone(),
            un: layout.gu_n.clone(),
            br: layout.gb_r.clone(),
            bz: layout.gb_z.clone(),
            bn: layout.gb_n.clone(),
        }
    }

    fn edge_unit(layout: &Layout) -> Self {
        GruRanges {
            wr: layout.ew_r.clone(),
            wz: layout.ew_z.clone(),
            wn: layout.ew_n.clone(),
            ur: layout.eu_r.clone(),
            uz: layout.eu_z.clone(),
            un: layout.eu_n.clone(),
            br: layout.eb_r.clone(),
            bz: layout.eb_z.clone(),
            bn: layout.eb_n.clone(),
        }
    }
}

/// Reverse one gated-unit step. `dh` is the loss gradient at the post-step
/// state; returns `(dh_prev, dx)` and accumulates parameter gradients.
fn gru_backward(
    view: &GruView<'_>,
    ranges: &GruRanges,
    grads: &mut [f64],
    cache: &GruStepCache,
    dh: &[f64],
) -> (Vec<f64>, Vec<f64>) {
    let h = view.hidden;
    let din = view.input;
    let (r, z, c, h_prev) = (&cache.r, &cache.z, &cache.c, &cache.h_prev);

    // h = z * h_prev + (1 - z) * c
    let dz: Vec<f64> = (0..h).map(|i| dh[i] * (h_prev[i] - c[i])).collect();
    let dc: Vec<f64> = (0..h).map(|i| dh[i] * (1.0 - z[i])).collect();
    let da_n: Vec<f64> = (0..h).map(|i| dc[i] * (1.0 - c[i] * c[i])).collect();

    // candidate consumed r (.) h_prev through U_n
    let mut drh = vec![0.0; h];
    matvec_t_acc(view.un, h, h, &da_n, &mut drh);
    let dr: Vec<f64> = (0..h).map(|i| drh[i] * h_prev[i]).collect();
    let da_r: Vec<f64> = (0..h).map(|i| dr[i] * r[i] * (1.0 - r[i])).collect();
    let da_z: Vec<f64> = (0..h).map(|i| dz[i] * z[i] * (1.0 - z[i])).collect();

    let mut dh_prev: Vec<f64> = (0..h).map(|i| dh[i] * z[i] + drh[i] * r[i]).collect();
    matvec_t_acc(view.ur, h, h, &da_r, &mut dh_prev);
    matvec_t_acc(view.uz, h, h, &da_z, &mut dh_prev);

    let mut dx = vec![0.0; din];
    matvec_t_acc(view.wr, h, din, &da_r, &mut dx);
    matvec_t_acc(view.wz, h, din, &da_z, &mut dx);
    matvec_t_acc(view.wn, h, din, &da_n, &mut dx);

    let rh: Vec<f64> = (0..h).map(|i| r[i] * h_prev[i]).collect();
    acc_outer(grads, &ranges.wr, &da_r, &cache.x);
    acc_outer(grads, &ranges.wz, &da_z, &cache.x);
    acc_outer(grads, &ranges.wn, &da_n, &cache.x);
    acc_outer(grads, &ranges.ur, &da_r, h_prev);
    acc_outer(grads, &ranges.uz, &da_z, h_prev);
    acc_outer(grads, &ranges.un, &da_n, &rh);
    acc_vec(grads, &ranges.br, &da_r);
    acc_vec(grads, &ranges.bz, &da_z);
    acc_vec(grads, &ranges.bn, &da_n);
    (dh_prev, dx)
}

/// Exact gradients of [`super::bce_loss`] with respect to every parameter,
/// from the cache of the matching [`super::forward`] call. A cache whose
/// shape disagrees with `target` is rejected as stale.
pub fn backward(
    params: &ModelParams,
    cache: &ForwardCache,
    target: &EdgeSequence,
) -> Result<Vec<f64>, ModelError> {
    if cache.rows.len() != target.rows().len()
        || cache
            .rows
            .iter()
            .zip(target.rows())
            .any(|(rc, row)| rc.edge_steps.len() != row.len())
    {
        return Err(ModelError::DimMismatch(
            "cache shape differs from target; recompute the forward pass".into(),
        ));
    }
    let layout = params.layout();
    let mut grads = vec![0.0; params.len()];
    if cache.slot_count == 0 {
        return Ok(grads);
    }
    let count = cache.slot_count as f64;
    let l = params.dims.latent;
    let le = params.dims.edge_latent;
    let graph_unit = GruView::graph_unit(params, &layout);
    let edge_unit = GruView::edge_unit(params, &layout);
    let graph_ranges = GruRanges::graph_unit(&layout);
    let edge_ranges = GruRanges::edge_unit(&layout);
    let w_init = &params.data()[layout.w_init.clone()];
    let w_out = &params.data()[layout.w_out.clone()];

    // Per-row gradient contributions flowing into the graph state through
    // the edge unit's seeding projection.
    let mut dh_g_rows: Vec<Vec<f64>> = vec![Vec::new(); target.rows().len()];
    for (r, row) in target.rows().iter().enumerate().rev() {
        let row_cache = &cache.rows[r];
        let mut dh_f = vec![0.0; le];
        for (j, &bit) in row.iter().enumerate().rev() {
            let estep = &row_cache.edge_steps[j];
            let dlogit = (row_cache.probs[j] - f64::from(bit)) / count;
            // output head: logit = w_out . h + b_out, h = estep.h
            let scaled: Vec<f64> = estep.h.iter().map(|hv| hv * dlogit).collect();
            acc_vec(&mut grads, &layout.w_out, &scaled);
            grads[layout.b_out.start] += dlogit;
            for (dhi, wi) in dh_f.iter_mut().zip(w_out) {
                *dhi += wi * dlogit;
            }
            let (dh_prev, _dx) = gru_backward(&edge_unit, &edge_ranges, &mut grads, estep, &dh_f);
            dh_f = dh_prev;
        }
        // dh_f is now the gradient at h_f0 = W_init h_g + b_init
        acc_outer(&mut grads, &layout.w_init, &dh_f, &row_cache.h_g);
        acc_vec(&mut grads, &layout.b_init, &dh_f);
        let mut into_graph = vec![0.0; l];
        matvec_t_acc(w_init, le, l, &dh_f, &mut into_graph);
        dh_g_rows[r] = into_graph;
    }

    let mut dh_g = vec![0.0; l];
    for r in (0..target.rows().len()).rev() {
        if !dh_g_rows[r].is_empty() {
            for (acc, d) in dh_g.iter_mut().zip(&dh_g_rows[r]) {
                *acc += d;
            }
        }
        let (dh_prev, dx) = gru_backward(
            &graph_unit,
            &graph_ranges,
            &mut grads,
            &cache.graph_steps[r],
            &dh_g,
        );
        if r == 0 {
            acc_vec(&mut grads, &layout.sos, &dx);
        }
        dh_g = dh_prev;
    }
    acc_vec(&mut grads, &layout.h0, &dh_g);
    Ok(grads)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dggm::model::{bce_loss, forward, ModelDims};
    use crate::dggm::sequence::{bfs_order, to_sequence};
    use crate::graph::Graph;
    use crate::util::seeded_rng;
    use rand::Rng;

    /// Central finite differences over every parameter entry.
    fn numeric_gradient(params: &ModelParams, target: &EdgeSequence, h: f64) -> Vec<f64> {
        let mut probe = params.clone();
        let mut out = vec![0.0; params.len()];
        for i in 0..params.len() {
            let orig = probe.data()[i];
            probe.data_mut()[i] = orig + h;
            let (p_plus, _) = forward(&probe, target).unwrap();
            let up = bce_loss(&p_plus, target).unwrap();
            probe.data_mut()[i] = orig - h;
            let (p_minus, _) = forward(&probe, target).unwrap();
            let down = bce_loss(&p_minus, target).unwrap();
            probe.data_mut()[i] = orig;
            out[i] = (up - down) / (2.0 * h);
        }
        out
    }

    pub(crate) fn gradients_match(analytic: &[f64], numeric: &[f64], rel_tol: f64) -> bool {
        analytic.iter().zip(numeric).all(|(&a, &n)| {
            let diff = (a - n).abs();
            diff <= 1e-8 || diff <= rel_tol * a.abs().max(n.abs())
        })
    }

    fn random_connected_graph(n: usize, extra_edges: usize, seed: u64) -> Graph {
        let mut rng = seeded_rng(seed);
        let mut g = Graph::new(n);
        for v in 1..n {
            let u = rng.gen_range(0..v);
            g.add_edge(u, v);
        }
        for _ in 0..extra_edges {
            let u = rng.gen_range(0..n);
            let v = rng.gen_range(0..n);
            if u != v {
                g.add_edge(u.min(v), u.max(v));
            }
        }
        g
    }

    #[test]
    fn analytic_gradient_matches_finite_differences() {
        for seed in 0..5u64 {
            let mut rng = seeded_rng(seed);
            let dims = ModelDims {
                transient: 3,
                latent: 4,
                edge_latent: 3,
            };
            let params = ModelParams::init(dims, seed.wrapping_add(100));
            let g = random_connected_graph(5, 3, seed);
            let order = bfs_order(&g, &mut rng).unwrap();
            let target = to_sequence(&g, &order, dims.transient)
                .unwrap()
                .with_stop_row();
            let (probs, cache) = forward(&params, &target).unwrap();
            assert!(bce_loss(&probs, &target).unwrap().is_finite());
            let analytic = backward(&params, &cache, &target).unwrap();
            let numeric = numeric_gradient(&params, &target, 1e-5);
            assert!(
                gradients_match(&analytic, &numeric, 1e-4),
                "gradcheck failed for seed {seed}"
            );
        }
    }

    #[test]
    fn empty_sequence_has_zero_gradients() {
        let dims = ModelDims {
            transient: 2,
            latent: 3,
            edge_latent: 2,
        };
        let params = ModelParams::init(dims, 4);
        let g = Graph::new(1);
        let target = to_sequence(&g, &[0], 2).unwrap();
        let (_, cache) = forward(&params, &target).unwrap();
        let grads = backward(&params, &cache, &target).unwrap();
        assert!(grads.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn gradients_are_linear_in_sample_accumulation() {
        let dims = ModelDims {
            transient: 2,
            latent: 3,
            edge_latent: 2,
        };
        let params = ModelParams::init(dims, 17);
        let g = Graph::from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let target = to_sequence(&g, &[0, 1, 2, 3], 2).unwrap();
        let (_, cache) = forward(&params, &target).unwrap();
        let once = backward(&params, &cache, &target).unwrap();
        let mut twice = backward(&params, &cache, &target).unwrap();
        let again = backward(&params, &cache, &target).unwrap();
        for (t, a) in twice.iter_mut().zip(&again) {
            *t += a;
        }
        for (o, t) in once.iter().zip(&twice) {
            assert!((2.0 * o - t).abs() < 1e-15);
        }
    }

    #[test]
    fn stale_cache_is_rejected() {
        let dims = ModelDims {
            transient: 2,
            latent: 3,
            edge_latent: 2,
        };
        let params = ModelParams::init(dims, 3);
        let g = Graph::from_edges(3, [(0, 1), (1, 2)]).unwrap();
        let target = to_sequence(&g, &[0, 1, 2], 2).unwrap();
        let (_, cache) = forward(&params, &target).unwrap();
        let other = target.with_stop_row();
        assert!(matches!(
            backward(&params, &cache, &other),
            Err(ModelError::DimMismatch(_))
        ));
    }
}
