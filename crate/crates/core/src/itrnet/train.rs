use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{LstmGrads, ScorerGrads};
use super::{ItrError, ItrNet, SeqModel, TrainConfig};
use crate::dataset::{PoiId, Route};
use crate::hash::content_hash;
use crate::optim::Adam;
use crate::poigraph::EmbeddingTable;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Mean per-step cross-entropy over each epoch's training updates.
    pub epoch_losses: Vec<f64>,
    pub validation_losses: Vec<f64>,
    /// Epoch whose parameters were kept (1-based; 0 means initialization).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

struct DirGrads {
    lstm: LstmGrads,
    scorer: ScorerGrads,
    d_projected: Array2<f64>,
}

impl DirGrads {
    fn zeros(m: &SeqModel, n: usize) -> Self {
        Self {
            lstm: LstmGrads::zeros(&m.lstm),
            scorer: ScorerGrads::zeros(&m.scorer),
            d_projected: Array2::zeros((n, m.scorer.mlp_dim())),
        }
    }

    /// Folds the per-POI pre-activation gradients into `w1z`/`b1` and scales
    /// everything by `scale`.
    fn finish(&mut self, z: &Array2<f64>, scale: f64) {
        let gw1z = self.d_projected.t().dot(z);
        for (dst, src) in self.scorer.w1z.iter_mut().zip(gw1z.iter()) {
            *dst = *src;
        }
        for (g, col) in self.scorer.b1.iter_mut().zip(self.d_projected.columns()) {
            *g = col.sum();
        }
        for v in [
            &mut self.lstm.w,
            &mut self.lstm.u,
            &mut self.lstm.b,
            &mut self.scorer.w1z,
            &mut self.scorer.w1h,
            &mut self.scorer.b1,
            &mut self.scorer.w2,
        ] {
            v.iter_mut().for_each(|g| *g *= scale);
        }
    }

    fn slices(&self) -> [&[f64]; 7] {
        [
            &self.lstm.w,
            &self.lstm.u,
            &self.lstm.b,
            &self.scorer.w1z,
            &self.scorer.w1h,
            &self.scorer.b1,
            &self.scorer.w2,
        ]
    }
}

fn params_mut(m: &mut SeqModel) -> [&mut [f64]; 7] {
    [
        m.lstm.w.as_slice_mut().unwrap(),
        m.lstm.u.as_slice_mut().unwrap(),
        m.lstm.b.as_slice_mut().unwrap(),
        m.scorer.w1z.as_slice_mut().unwrap(),
        m.scorer.w1h.as_slice_mut().unwrap(),
        m.scorer.b1.as_slice_mut().unwrap(),
        m.scorer.w2.as_slice_mut().unwrap(),
    ]
}

/// Teacher-forced cross-entropy over `seq[1..]` given each prefix. Returns
/// the summed loss and the number of predicted steps; accumulates unscaled
/// gradients when `grads` is given.
fn sequence_loss(
    model: &SeqModel,
    z: &Array2<f64>,
    projected: &Array2<f64>,
    seq: &[PoiId],
    s: PoiId,
    d: PoiId,
    grads: Option<&mut DirGrads>,
) -> (f64, usize) {
    let nh = model.lstm.hidden();
    let mut context = z.row(s).to_vec();
    context.extend(z.row(d).iter());
    let mut h = vec![0.0; nh];
    let mut c = vec![0.0; nh];
    let mut caches = Vec::with_capacity(seq.len() - 1);
    let mut d_logits = Vec::with_capacity(seq.len() - 1);
    let mut loss = 0.0;
    for j in 0..seq.len() - 1 {
        let mut x = z.row(seq[j]).to_vec();
        x.extend_from_slice(&context);
        let cache = model.lstm.step_cached(x, h, c);
        h = cache.h.clone();
        c = cache.c.clone();
        let logits = model.scorer.logits(projected, &cache.h);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut p: Vec<f64> = logits.iter().map(|v| (v - max).exp()).collect();
        let sum: f64 = p.iter().sum();
        p.iter_mut().for_each(|v| *v /= sum);
        let target = seq[j + 1];
        loss -= p[target].max(f64::MIN_POSITIVE).ln();
        p[target] -= 1.0;
        d_logits.push(p);
        caches.push(cache);
    }
    if let Some(g) = grads {
        let mut dh_next = vec![0.0; nh];
        let mut dc_next = vec![0.0; nh];
        for (cache, dl) in caches.iter().zip(&d_logits).rev() {
            let mut dh =
                model.scorer.backward(projected, &cache.h, dl, &mut g.scorer, &mut g.d_projected);
            for (a, b) in dh.iter_mut().zip(&dh_next) {
                *a += b;
            }
            let (dhp, dcp) = model.lstm.backward_step(cache, &dh, &dc_next, &mut g.lstm);
            dh_next = dhp;
            dc_next = dcp;
        }
    }
    (loss, seq.len() - 1)
}

/// Mean per-step loss over `routes` for both directions, with gradients.
fn batch_loss_and_grads(net: &ItrNet, routes: &[&Route]) -> (f64, DirGrads, DirGrads) {
    let z = &net.embeddings.z;
    let n = net.n_pois();
    let pf = net.forward.scorer.project_pois(z);
    let pb = net.backward.scorer.project_pois(z);
    let mut gf = DirGrads::zeros(&net.forward, n);
    let mut gb = DirGrads::zeros(&net.backward, n);
    let (mut loss, mut steps) = (0.0, 0usize);
    for r in routes {
        let seq = r.pois();
        let (s, d) = r.endpoints();
        let (lf, nf) = sequence_loss(&net.forward, z, &pf, seq, s, d, Some(&mut gf));
        let rev: Vec<PoiId> = seq.iter().rev().copied().collect();
        let (lb, nb) = sequence_loss(&net.backward, z, &pb, &rev, s, d, Some(&mut gb));
        loss += lf + lb;
        steps += nf + nb;
    }
    let scale = 1.0 / steps.max(1) as f64;
    gf.finish(z, scale);
    gb.finish(z, scale);
    (loss * scale, gf, gb)
}

/// Mean per-step cross-entropy of both directions over `routes`.
pub fn corpus_loss(net: &ItrNet, routes: &[&Route]) -> f64 {
    let z = &net.embeddings.z;
    let pf = net.forward.scorer.project_pois(z);
    let pb = net.backward.scorer.project_pois(z);
    let (mut loss, mut steps) = (0.0, 0usize);
    for r in routes {
        let (s, d) = r.endpoints();
        let (lf, nf) = sequence_loss(&net.forward, z, &pf, r.pois(), s, d, None);
        let rev: Vec<PoiId> = r.pois().iter().rev().copied().collect();
        let (lb, nb) = sequence_loss(&net.backward, z, &pb, &rev, s, d, None);
        loss += lf + lb;
        steps += nf + nb;
    }
    loss / steps.max(1) as f64
}

/// Fits both directions with teacher forcing and Adam. Each route is
/// conditioned on its own first and last POI. When a validation share is
/// configured, the parameters with the lowest validation loss are kept and
/// training stops after `patience` epochs without improvement.
pub fn train_itrnet(
    routes: &[Route],
    embeddings: EmbeddingTable,
    config: TrainConfig,
) -> Result<(ItrNet, TrainReport), ItrError> {
    config.validate()?;
    if routes.is_empty() {
        return Err(ItrError::EmptyTrainingSet);
    }
    if let Some(bad) = routes.iter().flat_map(|r| r.pois()).find(|&&p| p >= embeddings.n()) {
        return Err(ItrError::InvalidId(*bad));
    }
    let mut net = ItrNet::init(embeddings, config.clone());
    net.max_route_len = routes.iter().map(Route::len).max().unwrap_or(3);
    net.corpus_hash = content_hash(routes);
    let mut report = TrainReport::default();
    if config.epochs == 0 {
        return Ok((net, report));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(0x9e37_79b9));
    let mut order: Vec<&Route> = routes.iter().collect();
    order.shuffle(&mut rng);
    let n_val = if routes.len() >= 10 {
        (routes.len() as f64 * config.validation_fraction).floor() as usize
    } else {
        0
    };
    let (val, train) = order.split_at(n_val);
    let mut train = train.to_vec();

    let mut opt = Adam::new(config.learning_rate);
    let mut best: Option<(f64, ItrNet)> = None;
    let mut stale = 0;

    for epoch in 1..=config.epochs {
        train.shuffle(&mut rng);
        let (mut epoch_loss, mut batches) = (0.0, 0usize);
        for batch in train.chunks(config.batch_size) {
            let (loss, gf, gb) = batch_loss_and_grads(&net, batch);
            if !loss.is_finite() {
                return Err(ItrError::NonFiniteLoss(epoch));
            }
            epoch_loss += loss;
            batches += 1;
            let (fw, bw) = (&mut net.forward, &mut net.backward);
            let mut params: Vec<&mut [f64]> = params_mut(fw).into_iter().collect();
            params.extend(params_mut(bw));
            let grads: Vec<&[f64]> = gf.slices().into_iter().chain(gb.slices()).collect();
            opt.step(&mut params, &grads);
        }
        report.epoch_losses.push(epoch_loss / batches as f64);

        if !val.is_empty() {
            let v = corpus_loss(&net, val);
            if !v.is_finite() {
                return Err(ItrError::NonFiniteLoss(epoch));
            }
            report.validation_losses.push(v);
            if best.as_ref().is_none_or(|(b, _)| v < *b) {
                best = Some((v, net.clone()));
                report.best_epoch = epoch;
                stale = 0;
            } else {
                stale += 1;
                if stale >= config.patience {
                    report.stopped_early = true;
                    break;
                }
            }
        } else {
            report.best_epoch = epoch;
        }
    }
    if let Some((_, b)) = best {
        net = b;
    }
    log::debug!(
        "itrnet: {} epochs, best epoch {}, final train loss {:?}",
        report.epoch_losses.len(),
        report.best_epoch,
        report.epoch_losses.last()
    );
    Ok((net, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn tiny_net(seed: u64) -> ItrNet {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let z = Array2::from_shape_fn((5, 3), |_| rng.gen_range(-1.0..1.0));
        ItrNet::init(
            EmbeddingTable::new(z),
            TrainConfig { hidden_size: 4, mlp_dim: 3, seed, ..TrainConfig::default() },
        )
    }

    #[test]
    fn gradients_match_finite_differences() {
        let net = tiny_net(7);
        let routes =
            [Route::from_unchecked(vec![0, 2, 4, 1]), Route::from_unchecked(vec![3, 1, 2])];
        let refs: Vec<&Route> = routes.iter().collect();
        let (_, gf, gb) = batch_loss_and_grads(&net, &refs);
        let h = 1e-6;
        for (dir, grads) in [(0, gf.slices()), (1, gb.slices())] {
            for (k, g) in grads.iter().enumerate() {
                for idx in [0, g.len() / 2, g.len() - 1] {
                    let nudge = |delta: f64| {
                        let mut n = net.clone();
                        let m = if dir == 0 { &mut n.forward } else { &mut n.backward };
                        params_mut(m)[k][idx] += delta;
                        n
                    };
                    let (plus, minus) = (nudge(h), nudge(-h));
                    let fd = (corpus_loss(&plus, &refs) - corpus_loss(&minus, &refs)) / (2.0 * h);
                    assert!(
                        (fd - g[idx]).abs() < 1e-6 * (1.0 + fd.abs()),
                        "dir {dir} tensor {k} idx {idx}: fd {fd} analytic {}",
                        g[idx]
                    );
                }
            }
        }
    }

    #[test]
    fn zero_epochs_keep_initialization() {
        let net = tiny_net(3);
        let routes = vec![Route::from_unchecked(vec![0, 1, 2])];
        let cfg = TrainConfig { epochs: 0, ..net.config.clone() };
        let (trained, report) = train_itrnet(&routes, net.embeddings.clone(), cfg).unwrap();
        assert_eq!(trained.forward, net.forward);
        assert_eq!(trained.backward, net.backward);
        assert!(report.epoch_losses.is_empty());
    }

    #[test]
    fn empty_corpus_rejected() {
        let net = tiny_net(1);
        assert_eq!(
            train_itrnet(&[], net.embeddings.clone(), net.config.clone()).unwrap_err(),
            ItrError::EmptyTrainingSet
        );
    }
}
