#include "e2r/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <ostream>

namespace e2r::train {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using Arr = Eigen::ArrayXXd;
using scenario::EpisodeRecord;

void TrainerConfig::validate() const {
  using K = TrainError::Kind;
  if (epochs < 1) throw TrainError(K::InvalidConfig, "trainer.epochs must be >= 1");
  if (!(lr0 > 0.0)) throw TrainError(K::InvalidConfig, "trainer.lr0 must be > 0");
  if (batch_size < 1) throw TrainError(K::InvalidConfig, "trainer.batch_size must be >= 1");
  if (!(mask_p >= 0.0 && mask_p <= 1.0)) throw TrainError(K::InvalidConfig, "trainer.mask_p must be in [0, 1]");
  if (!(speed_loss_weight >= 0.0)) throw TrainError(K::InvalidConfig, "trainer.speed_loss_weight must be >= 0");
  if (!(scheduler.factor > 0.0 && scheduler.factor < 1.0))
    throw TrainError(K::InvalidConfig, "trainer.scheduler_factor must be in (0, 1)");
  if (scheduler.patience < 0) throw TrainError(K::InvalidConfig, "trainer.scheduler_patience must be >= 0");
  if (!(scheduler.lr_min >= 0.0)) throw TrainError(K::InvalidConfig, "trainer.lr_min must be >= 0");
}

LossBreakdown sequence_loss(const Params& params, const PolicyConfig& cfg, const EpisodeRecord& episode,
                            std::span<const std::uint8_t> mask, double speed_loss_weight) {
  if (episode.frames.empty()) throw TrainError(TrainError::Kind::EmptyEpisode, "episode has no frames");
  if (mask.size() != episode.frames.size()) throw TrainError(TrainError::Kind::InvalidConfig, "one mask flag per frame");
  policy::Network<double> net(cfg, params);
  Vec h = net.initial_state();
  std::vector<double> scan;
  double se_v = 0.0, se_d = 0.0;
  for (std::size_t t = 0; t < episode.frames.size(); ++t) {
    const auto& f = episode.frames[t];
    scan.assign(f.scan.begin(), f.scan.end());
    const auto a = net.forward_step(scan, static_cast<double>(f.ego_v), h, mask[t] != 0);
    se_v += (a.v - f.v_cmd) * (a.v - f.v_cmd);
    se_d += (a.delta - f.delta_cmd) * (a.delta - f.delta_cmd);
  }
  const double n = static_cast<double>(episode.frames.size());
  LossBreakdown out;
  out.l_speed = se_v / n;
  out.l_steer = se_d / n;
  out.loss = speed_loss_weight * out.l_speed + out.l_steer;
  return out;
}

namespace {

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace

double backward(const Params& p, const PolicyConfig& cfg, std::span<const EpisodeRecord* const> batch,
                std::span<const std::vector<std::uint8_t>> masks, double w_speed, Params& grad) {
  using K = TrainError::Kind;
  if (batch.empty()) throw TrainError(K::EmptyDataset, "empty batch");
  if (masks.size() != batch.size()) throw TrainError(K::InvalidConfig, "one mask vector per episode");
  p.check_shapes(cfg);

  const Eigen::Index B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index I = cfg.input_dim(), H = cfg.hidden_dim(), E = cfg.embed_dim;
  const Eigen::Index nb = cfg.n_beams;
  Eigen::Index T = 0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const auto n = static_cast<Eigen::Index>(batch[b]->frames.size());
    if (n == 0) throw TrainError(K::EmptyEpisode, "episode has no frames");
    if (masks[b].size() != batch[b]->frames.size()) throw TrainError(K::InvalidConfig, "one mask flag per frame");
    T = std::max(T, n);
  }
  const Eigen::Index C = T * B;  // column t * B + b

  // Inputs, per-column loss weights and targets. Padded columns stay zero.
  Mat X = Mat::Zero(I, C);
  Eigen::ArrayXd weight = Eigen::ArrayXd::Zero(C);
  Eigen::ArrayXd tv = Eigen::ArrayXd::Zero(C), td = Eigen::ArrayXd::Zero(C), speed = Eigen::ArrayXd::Zero(C);
  std::vector<std::uint8_t> masked(static_cast<std::size_t>(C), 0);
  for (Eigen::Index b = 0; b < B; ++b) {
    const auto& ep = *batch[static_cast<std::size_t>(b)];
    const double w = 1.0 / (static_cast<double>(B) * static_cast<double>(ep.frames.size()));
    for (std::size_t t = 0; t < ep.frames.size(); ++t) {
      const auto& f = ep.frames[t];
      if (static_cast<Eigen::Index>(f.scan.size()) != nb) throw policy::ShapeMismatch("scan length does not match n_beams");
      const Eigen::Index c = static_cast<Eigen::Index>(t) * B + b;
      for (Eigen::Index i = 0; i < nb; ++i)
        X(i, c) = policy::pressure(static_cast<double>(f.scan[static_cast<std::size_t>(i)]), cfg.sigmoid_k);
      const bool m = masks[static_cast<std::size_t>(b)][t] != 0;
      masked[static_cast<std::size_t>(c)] = m;
      speed[c] = f.ego_v;
      if (cfg.use_speed_input) X.col(c).tail(E) = m ? p.e_mask : Vec(p.speed_w * speed[c] + p.speed_b);
      weight[c] = w;
      tv[c] = f.v_cmd;
      td[c] = f.delta_cmd;
    }
  }

  // Forward. Hs holds h_{-1} = 0 in block 0 and h_t in block t + 1.
  Mat GX = p.W_x * X;
  GX.colwise() += p.b_x;
  Mat Hs = Mat::Zero(H, (T + 1) * B);
  Mat U(H, C), R(H, C), N(H, C), HN(H, C);
  Mat GH(3 * H, B);
  for (Eigen::Index t = 0; t < T; ++t) {
    GH.noalias() = p.W_h * Hs.middleCols(t * B, B);
    GH.colwise() += p.b_h;
    auto gx = GX.middleCols(t * B, B);
    auto u = U.middleCols(t * B, B);
    auto r = R.middleCols(t * B, B);
    auto n = N.middleCols(t * B, B);
    auto hn = HN.middleCols(t * B, B);
    u = (gx.topRows(H) + GH.topRows(H)).unaryExpr(&logistic);
    r = (gx.middleRows(H, H) + GH.middleRows(H, H)).unaryExpr(&logistic);
    hn = GH.bottomRows(H);
    n = (gx.bottomRows(H).array() + r.array() * hn.array()).tanh().matrix();
    Hs.middleCols((t + 1) * B, B) =
        ((1.0 - u.array()) * n.array() + u.array() * Hs.middleCols(t * B, B).array()).matrix();
  }
  const auto Hout = Hs.rightCols(C);
  Mat Z1 = p.W1 * Hout;
  Z1.colwise() += p.b1;
  const Mat A1 = Z1.cwiseMax(0.0);
  Mat Y = p.W2 * A1;
  Y.colwise() += p.b2;

  const Eigen::ArrayXd ev = Y.row(0).transpose().array() - tv;
  const Eigen::ArrayXd ed = Y.row(1).transpose().array() - td;
  const double loss = (weight * (w_speed * ev.square() + ed.square())).sum();

  // Backward through the decoder.
  Mat dY(2, C);
  dY.row(0) = (weight * 2.0 * w_speed * ev).matrix().transpose();
  dY.row(1) = (weight * 2.0 * ed).matrix().transpose();

  grad = Params::zeros(cfg);
  grad.W2.noalias() = dY * A1.transpose();
  grad.b2 = dY.rowwise().sum();
  Mat dZ1 = p.W2.transpose() * dY;
  dZ1 = (Z1.array() > 0.0).select(dZ1, 0.0);
  grad.W1.noalias() = dZ1 * Hout.transpose();
  grad.b1 = dZ1.rowwise().sum();
  const Mat dHdec = p.W1.transpose() * dZ1;

  // Backward through time.
  Mat DGX(3 * H, C), DGH(3 * H, C);
  Mat dh = Mat::Zero(H, B);
  Arr dn(H, B), du(H, B), dan(H, B), dr(H, B);
  for (Eigen::Index t = T - 1; t >= 0; --t) {
    dh += dHdec.middleCols(t * B, B);
    const auto u = U.middleCols(t * B, B).array();
    const auto r = R.middleCols(t * B, B).array();
    const auto n = N.middleCols(t * B, B).array();
    const auto hn = HN.middleCols(t * B, B).array();
    const auto hprev = Hs.middleCols(t * B, B).array();
    const auto g = dh.array();
    dn = g * (1.0 - u);
    du = g * (hprev - n);
    dan = dn * (1.0 - n.square());
    dr = dan * hn;
    auto dgx = DGX.middleCols(t * B, B);
    auto dgh = DGH.middleCols(t * B, B);
    dgx.topRows(H) = (du * u * (1.0 - u)).matrix();
    dgx.middleRows(H, H) = (dr * r * (1.0 - r)).matrix();
    dgx.bottomRows(H) = dan.matrix();
    dgh.topRows(2 * H) = dgx.topRows(2 * H);
    dgh.bottomRows(H) = (dan * r).matrix();
    Mat dprev = (g * u).matrix();
    dprev.noalias() += p.W_h.transpose() * dgh;
    dh = std::move(dprev);
  }
  grad.W_h.noalias() = DGH * Hs.leftCols(C).transpose();
  grad.b_h = DGH.rowwise().sum();
  grad.W_x.noalias() = DGX * X.transpose();
  grad.b_x = DGX.rowwise().sum();

  if (cfg.use_speed_input) {
    const Mat dEmb = p.W_x.rightCols(E).transpose() * DGX;
    for (Eigen::Index c = 0; c < C; ++c) {
      if (weight[c] == 0.0) continue;
      if (masked[static_cast<std::size_t>(c)]) {
        grad.e_mask += dEmb.col(c);
      } else {
        grad.speed_w += dEmb.col(c) * speed[c];
        grad.speed_b += dEmb.col(c);
      }
    }
  }

  bool finite = std::isfinite(loss);
  grad.visit([&](const char*, const double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n && finite; ++i) finite = std::isfinite(d[i]);
  });
  if (!finite) throw TrainError(K::NonFiniteGradient, "non-finite loss or gradient");
  return loss;
}

TrainState TrainState::start(Params params, double lr0) {
  TrainState s;
  s.m = params;
  s.v = params;
  s.m.visit([](const char*, double* d, Eigen::Index n) { std::fill(d, d + n, 0.0); });
  s.v.visit([](const char*, double* d, Eigen::Index n) { std::fill(d, d + n, 0.0); });
  s.params = std::move(params);
  s.lr = lr0;
  return s;
}

void adam_update(TrainState& s, const Params& grad, const AdamConfig& cfg) {
  ++s.step;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(s.step));
  std::vector<const double*> g;
  std::vector<double*> m, v;
  grad.visit([&](const char*, const double* d, Eigen::Index) { g.push_back(d); });
  s.m.visit([&](const char*, double* d, Eigen::Index) { m.push_back(d); });
  s.v.visit([&](const char*, double* d, Eigen::Index) { v.push_back(d); });
  std::size_t k = 0;
  s.params.visit([&](const char*, double* p, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double gi = g[k][i];
      m[k][i] = cfg.beta1 * m[k][i] + (1.0 - cfg.beta1) * gi;
      v[k][i] = cfg.beta2 * v[k][i] + (1.0 - cfg.beta2) * gi * gi;
      const double mh = m[k][i] / c1;
      const double vh = v[k][i] / c2;
      p[i] -= s.lr * mh / (std::sqrt(vh) + cfg.eps);
    }
    ++k;
  });
}

void lr_schedule_step(TrainState& s, double epoch_loss, const SchedulerConfig& cfg) {
  if (epoch_loss < s.best_loss - cfg.threshold) {
    s.best_loss = epoch_loss;
    s.stall = 0;
    return;
  }
  if (++s.stall >= cfg.patience) {
    s.lr = std::max(cfg.lr_min, s.lr * cfg.factor);
    s.stall = 0;
    s.best_loss = std::numeric_limits<double>::infinity();
  }
}

TrainResult train(const scenario::Dataset& dataset, const PolicyConfig& policy_cfg, const TrainerConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  policy_cfg.validate();
  if (dataset.episodes.empty()) throw TrainError(TrainError::Kind::EmptyDataset, "dataset has no episodes");

  Rng init_rng(derive_seed(cfg.seed, "init"));
  Rng rng(derive_seed(cfg.seed, "shuffle-mask"));
  TrainState state = TrainState::start(policy::init_params(policy_cfg, init_rng), cfg.lr0);

  TrainResult result;
  const std::size_t n = dataset.episodes.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Params grad;
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    double total = 0.0;
    const double lr_used = state.lr;
    for (std::size_t start = 0; start < n; start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t end = std::min(n, start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const EpisodeRecord*> batch;
      std::vector<std::vector<std::uint8_t>> masks;
      for (std::size_t j = start; j < end; ++j) {
        const auto& ep = dataset.episodes[order[j]];
        batch.push_back(&ep);
        std::vector<std::uint8_t> m(ep.frames.size());
        for (auto& f : m) f = rng.bernoulli(cfg.mask_p) ? 1 : 0;
        masks.push_back(std::move(m));
      }
      const double loss = backward(state.params, policy_cfg, batch, masks, cfg.speed_loss_weight, grad);
      total += loss * static_cast<double>(batch.size());
      adam_update(state, grad, cfg.adam);
    }
    const double mean = total / static_cast<double>(n);
    const EpochRecord rec{epoch, mean, lr_used};
    state.history.push_back(rec);
    if (mean < result.best_loss) {
      result.best_loss = mean;
      result.best_epoch = epoch;
      result.best_params = state.params;
    }
    lr_schedule_step(state, mean, cfg.scheduler);
    if (on_epoch) on_epoch(rec);
  }
  result.final_params = std::move(state.params);
  result.history = std::move(state.history);
  return result;
}

void write_loss_curve_csv(std::ostream& out, const std::vector<EpochRecord>& history) {
  out << "epoch,mean_loss,lr\n" << std::setprecision(17);
  for (const auto& r : history) out << r.epoch << ',' << r.mean_loss << ',' << r.lr << '\n';
}

}  // namespace e2r::train
