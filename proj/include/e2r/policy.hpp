#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "e2r/rng.hpp"

namespace e2r::policy {

class ShapeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct PolicyConfig {
  int n_beams = 360;
  int embed_dim = 16;
  int hidden_multiplier = 4;
  double sigmoid_k = 0.5;  // 1/m
  bool use_speed_input = true;

  int input_dim() const { return n_beams + (use_speed_input ? embed_dim : 0); }
  int hidden_dim() const { return hidden_multiplier * input_dim(); }
  int mlp_hidden() const { return std::max(1, hidden_dim() / 4); }
  void validate() const;
  bool operator==(const PolicyConfig&) const = default;
};

/// All learnable tensors. Gate blocks in W_x, W_h, b_x, b_h are stacked in
/// the order update (u), reset (r), candidate (n), each `hidden` rows tall.
template <typename T>
struct PolicyParams {
  using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vec = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  Mat W_x;  // 3H x I
  Mat W_h;  // 3H x H
  Vec b_x;  // 3H (b_iu, b_ir, b_in)
  Vec b_h;  // 3H (b_hu, b_hr, b_hn)
  Vec speed_w;  // E
  Vec speed_b;  // E
  Vec e_mask;   // E
  Mat W1;  // M x H
  Vec b1;  // M
  Mat W2;  // 2 x M
  Vec b2;  // 2

  /// Zero tensors shaped for `cfg`.
  static PolicyParams zeros(const PolicyConfig& cfg);

  /// Calls f(name, data, size) for every tensor in checkpoint order.
  template <typename F>
  void visit(F&& f) {
    f("W_x", W_x.data(), W_x.size());
    f("W_h", W_h.data(), W_h.size());
    f("b_x", b_x.data(), b_x.size());
    f("b_h", b_h.data(), b_h.size());
    f("speed_w", speed_w.data(), speed_w.size());
    f("speed_b", speed_b.data(), speed_b.size());
    f("e_mask", e_mask.data(), e_mask.size());
    f("W1", W1.data(), W1.size());
    f("b1", b1.data(), b1.size());
    f("W2", W2.data(), W2.size());
    f("b2", b2.data(), b2.size());
  }
  template <typename F>
  void visit(F&& f) const {
    const_cast<PolicyParams*>(this)->visit([&](const char* n, T* d, Eigen::Index s) { f(n, static_cast<const T*>(d), s); });
  }

  /// Throws ShapeMismatch when any tensor disagrees with `cfg`.
  void check_shapes(const PolicyConfig& cfg) const;
  std::size_t count() const;

  template <typename U>
  PolicyParams<U> cast() const {
    PolicyParams<U> o;
    o.W_x = W_x.template cast<U>();
    o.W_h = W_h.template cast<U>();
    o.b_x = b_x.template cast<U>();
    o.b_h = b_h.template cast<U>();
    o.speed_w = speed_w.template cast<U>();
    o.speed_b = speed_b.template cast<U>();
    o.e_mask = e_mask.template cast<U>();
    o.W1 = W1.template cast<U>();
    o.b1 = b1.template cast<U>();
    o.W2 = W2.template cast<U>();
    o.b2 = b2.template cast<U>();
    return o;
  }

  bool operator==(const PolicyParams& o) const;
};

/// Spatial pressure 2 (1 - 1/(1 + e^{-kx})), evaluated as 2 e^{-kx}/(1 + e^{-kx}).
template <typename T>
inline T pressure(T x, T k) {
  const T e = std::exp(-k * x);
  return T(2) * e / (T(1) + e);
}

/// d pressure / dx = -2k e^{-kx} / (1 + e^{-kx})^2.
inline double pressure_slope(double x, double k) {
  const double e = std::exp(-k * x);
  return -2.0 * k * e / ((1.0 + e) * (1.0 + e));
}

std::vector<double> normalize_scan(std::span<const double> z, double sigmoid_k);

struct Action {
  double v = 0.0;
  double delta = 0.0;
};

/// Forward math on one parameter set. Holds scratch buffers, so each thread
/// needs its own instance.
template <typename T>
class Network {
 public:
  using Vec = typename PolicyParams<T>::Vec;

  Network(PolicyConfig cfg, PolicyParams<T> params);

  const PolicyConfig& config() const { return cfg_; }
  const PolicyParams<T>& params() const { return params_; }

  Vec embed_speed(T v, bool masked) const;
  /// Fills `x` (input_dim) from a raw scan and speed.
  void build_input(std::span<const T> scan, T v, bool masked, Vec& x) const;
  Vec gru_step(const Vec& x, const Vec& h) const;
  Action decode(const Vec& h) const;
  /// decode(gru_step(input(scan, v), h)); `h` is updated in place.
  Action forward_step(std::span<const T> scan, T v, Vec& h, bool masked = false) const;
  Vec initial_state() const { return Vec::Zero(cfg_.hidden_dim()); }

 private:
  PolicyConfig cfg_;
  PolicyParams<T> params_;
  mutable Vec x_, gx_, gh_, m_;
};

/// Uniform in [-1/sqrt(H), 1/sqrt(H)] for every tensor.
PolicyParams<double> init_params(const PolicyConfig& cfg, Rng& rng);

extern template struct PolicyParams<double>;
extern template struct PolicyParams<float>;
extern template class Network<double>;
extern template class Network<float>;

}  // namespace e2r::policy
