#pragma once

// Small fully-convolutional Q-map network with a hand-written forward and
// backward pass. The output is one action value per heightmap cell; the
// gradient of the TD loss flows only through the cell the action was taken on.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "csar/grid.hpp"
#include "csar/rng.hpp"

namespace csar {

struct ConvLayerSpec {
  int in_channels = 1;
  int out_channels = 1;
  int kernel = 1;  // odd, "same" zero padding
  bool relu = false;

  int pad() const { return kernel / 2; }
  std::size_t weight_count() const {
    return static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels) *
           static_cast<std::size_t>(kernel) * static_cast<std::size_t>(kernel);
  }
  std::size_t param_count() const {
    return weight_count() + static_cast<std::size_t>(out_channels);
  }

  friend bool operator==(const ConvLayerSpec&, const ConvLayerSpec&) = default;
};

// Layer shapes and the grid size they run on. Parameters are laid out layer by
// layer, each as weights[out][in][ky][kx] followed by biases[out].
struct Layout {
  int height = 16;
  int width = 16;
  std::vector<ConvLayerSpec> layers;

  // conv3x3 2->8 + ReLU, conv3x3 8->8 + ReLU, conv1x1 8->1, on a 16x16 grid.
  static Layout desk_default(int height = 16, int width = 16) {
    return Layout{height, width, {{2, 8, 3, true}, {8, 8, 3, true}, {8, 1, 1, false}}};
  }

  std::size_t num_params() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.param_count();
    return n;
  }

  std::size_t offset(std::size_t layer) const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < layer; ++i) n += layers[i].param_count();
    return n;
  }

  void validate() const {
    if (height < 1 || width < 1) throw std::invalid_argument("layout: empty grid");
    if (layers.empty()) throw std::invalid_argument("layout: no layers");
    if (layers.front().in_channels != 2)
      throw std::invalid_argument("layout: first layer must take 2 channels (color, depth)");
    if (layers.back().out_channels != 1)
      throw std::invalid_argument("layout: last layer must produce 1 channel");
    for (std::size_t i = 0; i < layers.size(); ++i) {
      const auto& l = layers[i];
      if (l.in_channels < 1 || l.out_channels < 1)
        throw std::invalid_argument("layout: channel counts must be positive");
      if (l.kernel < 1 || l.kernel % 2 == 0)
        throw std::invalid_argument("layout: kernels must be odd");
      if (i > 0 && layers[i - 1].out_channels != l.in_channels)
        throw std::invalid_argument("layout: channel mismatch between layers");
    }
  }

  friend bool operator==(const Layout&, const Layout&) = default;
};

struct ParameterVector {
  Layout layout;
  std::vector<double> weights;

  friend bool operator==(const ParameterVector&, const ParameterVector&) = default;
};

struct Gradient {
  Layout layout;
  std::vector<double> values;

  static Gradient zeros(const Layout& layout) {
    return Gradient{layout, std::vector<double>(layout.num_params(), 0.0)};
  }

  friend bool operator==(const Gradient&, const Gradient&) = default;
};

// Pick command. x is the column, y the row; z is read from the depth map.
struct Action {
  int x = 0;
  int y = 0;
  double z = 0.0;

  friend bool operator==(const Action&, const Action&) = default;
};

// Weights uniform in [-s, s] with s = sqrt(1 / fan_in); biases zero.
inline ParameterVector init_params(const Layout& layout, std::uint64_t seed) {
  layout.validate();
  Rng rng = make_rng(seed, 0, StreamPurpose::init);
  ParameterVector p{layout, std::vector<double>(layout.num_params(), 0.0)};
  std::size_t pos = 0;
  for (const auto& l : layout.layers) {
    const double fan_in = static_cast<double>(l.in_channels * l.kernel * l.kernel);
    const double s = std::sqrt(1.0 / fan_in);
    for (std::size_t i = 0; i < l.weight_count(); ++i)
      p.weights[pos++] = (2.0 * uniform01(rng) - 1.0) * s;
    pos += static_cast<std::size_t>(l.out_channels);
  }
  return p;
}

namespace detail {

// Half-open rectangle of grid cells.
struct Region {
  int r0 = 0, r1 = 0, c0 = 0, c1 = 0;

  Region dilate(int pad, int height, int width) const {
    return {std::max(0, r0 - pad), std::min(height, r1 + pad), std::max(0, c0 - pad),
            std::min(width, c1 + pad)};
  }
};

// Per-layer activations stored channel-major on the full grid; only cells
// inside each layer's region are ever written or read.
struct Activations {
  std::vector<std::vector<double>> post;  // post[0] is the network input
  std::vector<std::vector<double>> pre;   // pre[l] for l >= 1
  std::vector<Region> regions;            // regions[l] for l >= 0
};

inline void check_state(const Layout& layout, const Heightmaps& state) {
  if (!state.color.same_shape(state.depth))
    throw std::invalid_argument("heightmaps: color and depth differ in shape");
  if (state.rows() != layout.height || state.cols() != layout.width)
    throw std::invalid_argument("state shape " + std::to_string(state.rows()) + "x" +
                                std::to_string(state.cols()) + " does not match layout " +
                                std::to_string(layout.height) + "x" +
                                std::to_string(layout.width));
}

inline void check_params(const ParameterVector& params) {
  if (params.weights.size() != params.layout.num_params())
    throw std::invalid_argument("parameter vector length does not match its layout");
}

inline Activations run_forward(const ParameterVector& params, const Heightmaps& state,
                               Region out_region) {
  const Layout& layout = params.layout;
  const int h = layout.height;
  const int w = layout.width;
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const std::size_t n_layers = layout.layers.size();

  Activations act;
  act.post.resize(n_layers + 1);
  act.pre.resize(n_layers + 1);
  act.regions.resize(n_layers + 1);
  act.regions[n_layers] = out_region;
  for (std::size_t l = n_layers; l > 0; --l)
    act.regions[l - 1] = act.regions[l].dilate(layout.layers[l - 1].pad(), h, w);

  act.post[0].resize(2 * plane);
  std::copy(state.color.values().begin(), state.color.values().end(), act.post[0].begin());
  std::copy(state.depth.values().begin(), state.depth.values().end(),
            act.post[0].begin() + static_cast<std::ptrdiff_t>(plane));

  std::size_t offset = 0;
  for (std::size_t l = 1; l <= n_layers; ++l) {
    const ConvLayerSpec& spec = layout.layers[l - 1];
    const double* weights = params.weights.data() + offset;
    const double* bias = weights + spec.weight_count();
    offset += spec.param_count();

    const Region reg = act.regions[l];
    const int k = spec.kernel;
    const int pad = spec.pad();
    const std::vector<double>& in = act.post[l - 1];
    std::vector<double>& pre = act.pre[l];
    pre.assign(static_cast<std::size_t>(spec.out_channels) * plane, 0.0);

    for (int o = 0; o < spec.out_channels; ++o) {
      double* out_plane = pre.data() + static_cast<std::size_t>(o) * plane;
      for (int r = reg.r0; r < reg.r1; ++r)
        for (int c = reg.c0; c < reg.c1; ++c) out_plane[r * w + c] = bias[o];
      for (int i = 0; i < spec.in_channels; ++i) {
        const double* in_plane = in.data() + static_cast<std::size_t>(i) * plane;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const int r_lo = std::max(reg.r0, -dy);
          const int r_hi = std::min(reg.r1, h - dy);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const int c_lo = std::max(reg.c0, -dx);
            const int c_hi = std::min(reg.c1, w - dx);
            const double wv = weights[((o * spec.in_channels + i) * k + ky) * k + kx];
            for (int r = r_lo; r < r_hi; ++r) {
              double* dst = out_plane + r * w;
              const double* src = in_plane + (r + dy) * w + dx;
              for (int c = c_lo; c < c_hi; ++c) dst[c] += wv * src[c];
            }
          }
        }
      }
    }

    std::vector<double>& post = act.post[l];
    post = pre;
    if (spec.relu) {
      for (double& v : post) v = v > 0.0 ? v : 0.0;
    }
  }
  return act;
}

}  // namespace detail

inline QMap forward(const ParameterVector& params, const Heightmaps& state) {
  detail::check_params(params);
  detail::check_state(params.layout, state);
  const int h = params.layout.height;
  const int w = params.layout.width;
  const auto act = detail::run_forward(params, state, {0, h, 0, w});
  QMap q(h, w);
  std::copy_n(act.post.back().begin(), q.size(), q.values().begin());
  return q;
}

// Q value of a single cell, computed over that cell's receptive field only.
// Bitwise equal to forward(params, state)(action.y, action.x).
inline double q_value(const ParameterVector& params, const Heightmaps& state,
                      const Action& action) {
  detail::check_params(params);
  detail::check_state(params.layout, state);
  if (!state.depth.contains(action.y, action.x))
    throw std::out_of_range("q_value: action cell outside the grid");
  const auto act =
      detail::run_forward(params, state, {action.y, action.y + 1, action.x, action.x + 1});
  return act.post.back()[static_cast<std::size_t>(action.y * params.layout.width + action.x)];
}

inline double max_q(const QMap& q) {
  return *std::max_element(q.values().begin(), q.values().end());
}

// Row-major argmax; ties go to the lowest index.
inline std::pair<int, int> argmax_cell(const QMap& q) {
  const auto& v = q.values();
  const auto it = std::max_element(v.begin(), v.end());
  const int idx = static_cast<int>(it - v.begin());
  return {idx / q.cols(), idx % q.cols()};
}

// Epsilon-greedy. One uniform draw decides exploration; exploring draws a
// uniform cell.
inline Action select_action(const QMap& q, const Grid<double>& depth, double epsilon, Rng& rng) {
  if (!(epsilon >= 0.0 && epsilon <= 1.0))
    throw std::invalid_argument("select_action: epsilon outside [0, 1]");
  if (!q.same_shape(depth)) throw std::invalid_argument("select_action: q/depth shape mismatch");
  int row = 0;
  int col = 0;
  if (uniform01(rng) < epsilon) {
    const auto idx = static_cast<int>(uniform_index(rng, q.size()));
    row = idx / q.cols();
    col = idx % q.cols();
  } else {
    std::tie(row, col) = argmax_cell(q);
  }
  return Action{col, row, std::max(0.0, depth(row, col))};
}

inline double td_target(double reward, const QMap& next_q, double gamma, bool done) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw std::invalid_argument("td_target: gamma outside [0, 1]");
  if (done) return reward;
  return reward + gamma * max_q(next_q);
}

inline double td_error(double q, double target) { return q - target; }

inline double huber_loss(double xi) {
  const double a = std::abs(xi);
  return a < 1.0 ? 0.5 * xi * xi : a - 0.5;
}

inline double huber_derivative(double xi) { return std::clamp(xi, -1.0, 1.0); }

// Gradient of huber_loss(Q(cell) - Y) with Y held fixed. Only the action cell
// carries an upstream gradient.
inline Gradient backward(const ParameterVector& params, const Heightmaps& state,
                         const Action& action, double xi) {
  detail::check_params(params);
  const Layout& layout = params.layout;
  detail::check_state(layout, state);
  if (!state.depth.contains(action.y, action.x))
    throw std::out_of_range("backward: action cell outside the grid");
  if (!std::isfinite(xi)) throw std::domain_error("backward: non-finite TD error");

  Gradient grad = Gradient::zeros(layout);
  const double upstream = huber_derivative(xi);
  if (upstream == 0.0) return grad;

  const auto act =
      detail::run_forward(params, state, {action.y, action.y + 1, action.x, action.x + 1});
  const int h = layout.height;
  const int w = layout.width;
  const std::size_t plane = static_cast<std::size_t>(h) * static_cast<std::size_t>(w);
  const std::size_t n_layers = layout.layers.size();

  // d loss / d post-activation of the current layer.
  std::vector<double> d_post(plane, 0.0);
  d_post[static_cast<std::size_t>(action.y * w + action.x)] = upstream;

  for (std::size_t l = n_layers; l >= 1; --l) {
    const ConvLayerSpec& spec = layout.layers[l - 1];
    const std::size_t offset = layout.offset(l - 1);
    const double* weights = params.weights.data() + offset;
    double* g_weights = grad.values.data() + offset;
    double* g_bias = g_weights + spec.weight_count();
    const detail::Region reg = act.regions[l];
    const int k = spec.kernel;
    const int pad = spec.pad();

    std::vector<double> d_pre = d_post;
    if (spec.relu) {
      const auto& pre = act.pre[l];
      for (std::size_t i = 0; i < d_pre.size(); ++i)
        if (!(pre[i] > 0.0)) d_pre[i] = 0.0;
    }

    const bool need_input_grad = l > 1;
    std::vector<double> d_in;
    if (need_input_grad) d_in.assign(static_cast<std::size_t>(spec.in_channels) * plane, 0.0);
    const std::vector<double>& in = act.post[l - 1];

    for (int o = 0; o < spec.out_channels; ++o) {
      const double* dp = d_pre.data() + static_cast<std::size_t>(o) * plane;
      double bsum = 0.0;
      for (int r = reg.r0; r < reg.r1; ++r)
        for (int c = reg.c0; c < reg.c1; ++c) bsum += dp[r * w + c];
      g_bias[o] += bsum;
      for (int i = 0; i < spec.in_channels; ++i) {
        const double* in_plane = in.data() + static_cast<std::size_t>(i) * plane;
        double* din_plane =
            need_input_grad ? d_in.data() + static_cast<std::size_t>(i) * plane : nullptr;
        for (int ky = 0; ky < k; ++ky) {
          const int dy = ky - pad;
          const int r_lo = std::max(reg.r0, -dy);
          const int r_hi = std::min(reg.r1, h - dy);
          for (int kx = 0; kx < k; ++kx) {
            const int dx = kx - pad;
            const int c_lo = std::max(reg.c0, -dx);
            const int c_hi = std::min(reg.c1, w - dx);
            const std::size_t widx =
                static_cast<std::size_t>(((o * spec.in_channels + i) * k + ky) * k + kx);
            const double wv = weights[widx];
            double gsum = 0.0;
            for (int r = r_lo; r < r_hi; ++r) {
              for (int c = c_lo; c < c_hi; ++c) {
                const double g = dp[r * w + c];
                gsum += g * in_plane[(r + dy) * w + c + dx];
                if (din_plane) din_plane[(r + dy) * w + c + dx] += g * wv;
              }
            }
            g_weights[widx] += gsum;
          }
        }
      }
    }
    if (need_input_grad) d_post = std::move(d_in);
  }
  return grad;
}

inline ParameterVector apply_sgd(const ParameterVector& params, const Gradient& grad,
                                 double alpha) {
  if (!(params.layout == grad.layout) || params.weights.size() != grad.values.size())
    throw std::invalid_argument("apply_sgd: parameter and gradient layouts differ");
  ParameterVector out = params;
  for (std::size_t i = 0; i < out.weights.size(); ++i) out.weights[i] -= alpha * grad.values[i];
  return out;
}

}  // namespace csar
