#include "e2r/policy.hpp"

namespace e2r::policy {

void PolicyConfig::validate() const {
  if (n_beams < 1) throw std::invalid_argument("policy.n_beams must be >= 1");
  if (embed_dim < 1) throw std::invalid_argument("policy.embed_dim must be >= 1");
  if (hidden_multiplier < 1) throw std::invalid_argument("policy.hidden_multiplier must be >= 1");
  if (!(sigmoid_k > 0.0)) throw std::invalid_argument("policy.sigmoid_k must be > 0");
}

template <typename T>
PolicyParams<T> PolicyParams<T>::zeros(const PolicyConfig& cfg) {
  const Eigen::Index I = cfg.input_dim(), H = cfg.hidden_dim(), M = cfg.mlp_hidden(), E = cfg.embed_dim;
  PolicyParams p;
  p.W_x = Mat::Zero(3 * H, I);
  p.W_h = Mat::Zero(3 * H, H);
  p.b_x = Vec::Zero(3 * H);
  p.b_h = Vec::Zero(3 * H);
  p.speed_w = Vec::Zero(E);
  p.speed_b = Vec::Zero(E);
  p.e_mask = Vec::Zero(E);
  p.W1 = Mat::Zero(M, H);
  p.b1 = Vec::Zero(M);
  p.W2 = Mat::Zero(2, M);
  p.b2 = Vec::Zero(2);
  return p;
}

template <typename T>
void PolicyParams<T>::check_shapes(const PolicyConfig& cfg) const {
  const Eigen::Index I = cfg.input_dim(), H = cfg.hidden_dim(), M = cfg.mlp_hidden(), E = cfg.embed_dim;
  auto need = [](bool ok, const char* name) {
    if (!ok) throw ShapeMismatch(std::string("tensor ") + name + " does not match the policy config");
  };
  need(W_x.rows() == 3 * H && W_x.cols() == I, "W_x");
  need(W_h.rows() == 3 * H && W_h.cols() == H, "W_h");
  need(b_x.size() == 3 * H, "b_x");
  need(b_h.size() == 3 * H, "b_h");
  need(speed_w.size() == E, "speed_w");
  need(speed_b.size() == E, "speed_b");
  need(e_mask.size() == E, "e_mask");
  need(W1.rows() == M && W1.cols() == H, "W1");
  need(b1.size() == M, "b1");
  need(W2.rows() == 2 && W2.cols() == M, "W2");
  need(b2.size() == 2, "b2");
}

template <typename T>
std::size_t PolicyParams<T>::count() const {
  std::size_t n = 0;
  visit([&](const char*, const T*, Eigen::Index s) { n += static_cast<std::size_t>(s); });
  return n;
}

template <typename T>
bool PolicyParams<T>::operator==(const PolicyParams& o) const {
  auto same = [](const auto& a, const auto& b) {
    return a.rows() == b.rows() && a.cols() == b.cols() && (a.size() == 0 || a == b);
  };
  return same(W_x, o.W_x) && same(W_h, o.W_h) && same(b_x, o.b_x) && same(b_h, o.b_h) &&
         same(speed_w, o.speed_w) && same(speed_b, o.speed_b) && same(e_mask, o.e_mask) && same(W1, o.W1) &&
         same(b1, o.b1) && same(W2, o.W2) && same(b2, o.b2);
}

std::vector<double> normalize_scan(std::span<const double> z, double sigmoid_k) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) out[i] = pressure(z[i], sigmoid_k);
  return out;
}

template <typename T>
Network<T>::Network(PolicyConfig cfg, PolicyParams<T> params) : cfg_(cfg), params_(std::move(params)) {
  cfg_.validate();
  params_.check_shapes(cfg_);
  const Eigen::Index H = cfg_.hidden_dim();
  x_.resize(cfg_.input_dim());
  gx_.resize(3 * H);
  gh_.resize(3 * H);
  m_.resize(cfg_.mlp_hidden());
}

template <typename T>
typename Network<T>::Vec Network<T>::embed_speed(T v, bool masked) const {
  if (masked) return params_.e_mask;
  return params_.speed_w * v + params_.speed_b;
}

template <typename T>
void Network<T>::build_input(std::span<const T> scan, T v, bool masked, Vec& x) const {
  if (static_cast<int>(scan.size()) != cfg_.n_beams) throw ShapeMismatch("scan length does not match n_beams");
  x.resize(cfg_.input_dim());
  const T k = static_cast<T>(cfg_.sigmoid_k);
  for (int i = 0; i < cfg_.n_beams; ++i) x[i] = pressure(scan[static_cast<std::size_t>(i)], k);
  if (cfg_.use_speed_input) {
    auto tail = x.tail(cfg_.embed_dim);
    if (masked)
      tail = params_.e_mask;
    else
      tail = params_.speed_w * v + params_.speed_b;
  }
}

template <typename T>
typename Network<T>::Vec Network<T>::gru_step(const Vec& x, const Vec& h) const {
  const Eigen::Index H = cfg_.hidden_dim();
  if (x.size() != cfg_.input_dim() || h.size() != H) throw ShapeMismatch("gru_step input or state size");
  gx_.noalias() = params_.W_x * x;
  gx_ += params_.b_x;
  gh_.noalias() = params_.W_h * h;
  gh_ += params_.b_h;
  Vec out(H);
  for (Eigen::Index j = 0; j < H; ++j) {
    const T u = T(1) / (T(1) + std::exp(-(gx_[j] + gh_[j])));
    const T r = T(1) / (T(1) + std::exp(-(gx_[H + j] + gh_[H + j])));
    const T n = std::tanh(gx_[2 * H + j] + r * gh_[2 * H + j]);
    out[j] = (T(1) - u) * n + u * h[j];
  }
  return out;
}

template <typename T>
Action Network<T>::decode(const Vec& h) const {
  if (h.size() != cfg_.hidden_dim()) throw ShapeMismatch("decode state size");
  m_.noalias() = params_.W1 * h;
  m_ = (m_ + params_.b1).cwiseMax(T(0));
  const Eigen::Matrix<T, 2, 1> a = params_.W2 * m_ + params_.b2;
  return {static_cast<double>(a[0]), static_cast<double>(a[1])};
}

template <typename T>
Action Network<T>::forward_step(std::span<const T> scan, T v, Vec& h, bool masked) const {
  build_input(scan, v, masked, x_);
  h = gru_step(x_, h);
  return decode(h);
}

PolicyParams<double> init_params(const PolicyConfig& cfg, Rng& rng) {
  cfg.validate();
  auto p = PolicyParams<double>::zeros(cfg);
  const double bound = 1.0 / std::sqrt(static_cast<double>(cfg.hidden_dim()));
  p.visit([&](const char*, double* d, Eigen::Index n) {
    for (Eigen::Index i = 0; i < n; ++i) d[i] = rng.uniform(-bound, bound);
  });
  return p;
}

template struct PolicyParams<double>;
template struct PolicyParams<float>;
template class Network<double>;
template class Network<float>;

}  // namespace e2r::policy
