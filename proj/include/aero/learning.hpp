// Reusable dueling double Q-learning core: bounded replay memory, a small
// fully-connected approximator with a value/advantage split head, double
// targets, epsilon-greedy action selection with masking, and plain SGD on
// the temporal-difference error.
#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aero/rng.hpp"

namespace aero::learning {

struct Transition {
  std::vector<double> state;
  int action = 0;
  double reward = 0.0;
  std::vector<double> next_state;
  std::vector<std::uint8_t> next_mask;  // empty = every action valid
  bool terminal = false;
};

class ReplayMemory {
 public:
  ReplayMemory() = default;
  ReplayMemory(std::size_t capacity, std::uint64_t seed) : capacity_(capacity), rng_(seed) {}

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return buffer_.size(); }
  const std::deque<Transition>& buffer() const { return buffer_; }
  Rng& rng() { return rng_; }

  void push(Transition t) {
    buffer_.push_back(std::move(t));
    while (buffer_.size() > capacity_) buffer_.pop_front();
  }

  // Uniform sample with replacement; deterministic given the seed.
  std::vector<const Transition*> sample(std::size_t batch) {
    std::vector<const Transition*> out;
    if (buffer_.empty()) return out;
    out.reserve(batch);
    for (std::size_t i = 0; i < batch; ++i)
      out.push_back(&buffer_[std::size_t(rng_.uniform_int(0, int(buffer_.size()) - 1))]);
    return out;
  }

 private:
  std::size_t capacity_ = 0;
  std::deque<Transition> buffer_;
  Rng rng_;
};

// ---------------------------------------------------------------------------
// Approximator: input -> hidden stack -> { value scalar, advantage vector }.

enum class Activation { tanh_fn, leaky_relu };

struct MlpConfig {
  int input_dim = 1;
  int actions = 1;
  std::vector<int> hidden = {64, 64};  // empty = linear (tabular-equivalent on one-hot inputs)
  Activation activation = Activation::tanh_fn;
  double input_scale = 1.0;
};

class DuelingMlp {
 public:
  DuelingMlp() = default;
  DuelingMlp(const MlpConfig& config, std::uint64_t seed) : config_(config) {
    Rng rng(seed);
    int in = config.input_dim;
    for (int width : config.hidden) {
      layers_.push_back(make_layer(in, width, rng));
      in = width;
    }
    value_ = make_layer(in, 1, rng);
    advantage_ = make_layer(in, config.actions, rng);
  }

  const MlpConfig& config() const { return config_; }

  struct Forward {
    std::vector<std::vector<double>> activations;  // scaled input + each hidden output
    double value = 0.0;
    std::vector<double> advantage;
  };

  Forward forward(const std::vector<double>& state) const {
    if (int(state.size()) != config_.input_dim)
      throw std::invalid_argument("approximator: state dimension mismatch");
    Forward f;
    std::vector<double> x(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) x[i] = state[i] * config_.input_scale;
    f.activations.push_back(x);
    for (const auto& layer : layers_) {
      x = affine(layer, x);
      for (auto& v : x) v = activate(v);
      f.activations.push_back(x);
    }
    f.value = affine(value_, x)[0];
    f.advantage = affine(advantage_, x);
    return f;
  }

  // Dueling combination: Q(a) = V + rho_a - mean(rho).
  std::vector<double> q_values(const std::vector<double>& state) const {
    const Forward f = forward(state);
    return combine(f);
  }

  static std::vector<double> combine(const Forward& f) {
    double mean = 0.0;
    for (double a : f.advantage) mean += a;
    mean /= double(f.advantage.size());
    std::vector<double> q(f.advantage.size());
    for (std::size_t i = 0; i < q.size(); ++i) q[i] = f.value + f.advantage[i] - mean;
    return q;
  }

  // Gradient of Q(state, action) with respect to every parameter, laid out
  // like parameters(). Computed by hand; verified against finite
  // differences in the test suite.
  std::vector<double> gradient(const std::vector<double>& state, int action) const {
    const Forward f = forward(state);
    const int actions = config_.actions;
    std::vector<double> grad(parameter_count(), 0.0);
    std::size_t offset = 0;
    // accumulate trunk deltas later; start with head gradients
    const auto& top = f.activations.back();

    // d q / d rho_j = [j == action] - 1/|A|;  d q / d V = 1
    auto dadv = std::vector<double>(std::size_t(actions));
    for (int j = 0; j < actions; ++j)
      dadv[std::size_t(j)] = (j == action ? 1.0 : 0.0) - 1.0 / double(actions);

    // backprop into the trunk output
    std::vector<double> dtop(top.size(), 0.0);
    for (std::size_t i = 0; i < top.size(); ++i) {
      dtop[i] += value_.weights[i];  // value head row 0
      for (int j = 0; j < actions; ++j)
        dtop[i] += dadv[std::size_t(j)] * advantage_.weights[std::size_t(j) * top.size() + i];
    }

    // trunk gradients, walking layers backwards
    std::vector<std::vector<double>> layer_grads(layers_.size());
    std::vector<double> delta = dtop;
    for (int li = int(layers_.size()) - 1; li >= 0; --li) {
      const auto& layer = layers_[std::size_t(li)];
      const auto& input = f.activations[std::size_t(li)];
      const auto& output = f.activations[std::size_t(li) + 1];
      std::vector<double> local(layer.weights.size() + layer.bias.size());
      std::vector<double> dprev(input.size(), 0.0);
      for (std::size_t o = 0; o < layer.bias.size(); ++o) {
        const double dz = delta[o] * activate_grad(output[o]);
        for (std::size_t i = 0; i < input.size(); ++i) {
          local[o * input.size() + i] = dz * input[i];
          dprev[i] += dz * layer.weights[o * input.size() + i];
        }
        local[layer.weights.size() + o] = dz;
      }
      layer_grads[std::size_t(li)] = std::move(local);
      delta = std::move(dprev);
    }

    // write out in parameters() order: trunk layers, then value, then advantage
    for (const auto& lg : layer_grads) {
      std::copy(lg.begin(), lg.end(), grad.begin() + long(offset));
      offset += lg.size();
    }
    for (std::size_t i = 0; i < top.size(); ++i) grad[offset + i] = top[i];  // value weights
    offset += top.size();
    grad[offset++] = 1.0;  // value bias
    for (int j = 0; j < actions; ++j) {
      for (std::size_t i = 0; i < top.size(); ++i)
        grad[offset + std::size_t(j) * top.size() + i] = dadv[std::size_t(j)] * top[i];
    }
    offset += std::size_t(actions) * top.size();
    for (int j = 0; j < actions; ++j) grad[offset + std::size_t(j)] = dadv[std::size_t(j)];
    return grad;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    n += value_.weights.size() + value_.bias.size();
    n += advantage_.weights.size() + advantage_.bias.size();
    return n;
  }

  std::vector<double> parameters() const {
    std::vector<double> out;
    out.reserve(parameter_count());
    auto append = [&](const Layer& l) {
      out.insert(out.end(), l.weights.begin(), l.weights.end());
      out.insert(out.end(), l.bias.begin(), l.bias.end());
    };
    for (const auto& l : layers_) append(l);
    append(value_);
    append(advantage_);
    return out;
  }

  void set_parameters(const std::vector<double>& params) {
    std::size_t offset = 0;
    auto restore = [&](Layer& l) {
      std::copy(params.begin() + long(offset), params.begin() + long(offset + l.weights.size()),
                l.weights.begin());
      offset += l.weights.size();
      std::copy(params.begin() + long(offset), params.begin() + long(offset + l.bias.size()),
                l.bias.begin());
      offset += l.bias.size();
    };
    for (auto& l : layers_) restore(l);
    restore(value_);
    restore(advantage_);
  }

  void add_scaled(const std::vector<double>& direction, double step) {
    std::size_t offset = 0;
    auto apply = [&](Layer& l) {
      for (auto& w : l.weights) w += step * direction[offset++];
      for (auto& b : l.bias) b += step * direction[offset++];
    };
    for (auto& l : layers_) apply(l);
    apply(value_);
    apply(advantage_);
  }

 private:
  struct Layer {
    int in = 0, out = 0;
    std::vector<double> weights;  // row-major out x in
    std::vector<double> bias;
  };

  static Layer make_layer(int in, int out, Rng& rng) {
    Layer l;
    l.in = in;
    l.out = out;
    const double bound = std::sqrt(6.0 / double(in + out));
    l.weights.resize(std::size_t(out) * std::size_t(in));
    for (auto& w : l.weights) w = rng.uniform(-bound, bound);
    l.bias.assign(std::size_t(out), 0.0);
    return l;
  }

  std::vector<double> affine(const Layer& l, const std::vector<double>& x) const {
    std::vector<double> y(std::size_t(l.out));
    for (int o = 0; o < l.out; ++o) {
      double acc = l.bias[std::size_t(o)];
      const double* row = l.weights.data() + std::size_t(o) * x.size();
      for (std::size_t i = 0; i < x.size(); ++i) acc += row[i] * x[i];
      y[std::size_t(o)] = acc;
    }
    return y;
  }

  double activate(double z) const {
    return config_.activation == Activation::tanh_fn ? std::tanh(z) : (z > 0.0 ? z : 0.01 * z);
  }
  // expressed in terms of the activation output (valid for both choices)
  double activate_grad(double a) const {
    if (config_.activation == Activation::tanh_fn) return 1.0 - a * a;
    return a > 0.0 ? 1.0 : 0.01;
  }

  MlpConfig config_;
  std::vector<Layer> layers_;
  Layer value_;
  Layer advantage_;
};

// ---------------------------------------------------------------------------
// Epsilon schedule: eps <- max(eps - decrement, floor).

struct EpsilonSchedule {
  double epsilon = 1.0;
  double decrement = 0.00005;
  double floor = 0.0001;

  void decay() { epsilon = std::max(epsilon - decrement, floor); }
};

// ---------------------------------------------------------------------------
// QFunction: online + target approximators, double targets, SGD updates.

struct QConfig {
  MlpConfig mlp;
  double learning_rate = 0.001;
  double discount = 0.8;
  int sync_period = 200;
};

inline int argmax_valid(const std::vector<double>& q, const std::vector<std::uint8_t>& mask) {
  int best = -1;
  for (std::size_t i = 0; i < q.size(); ++i) {
    if (!mask.empty() && !mask[i]) continue;
    if (best < 0 || q[i] > q[std::size_t(best)]) best = int(i);
  }
  return best;
}

class QFunction {
 public:
  QFunction() = default;
  QFunction(const QConfig& config, std::uint64_t seed)
      : config_(config), online_(config.mlp, seed), target_(online_) {}

  const QConfig& config() const { return config_; }
  const DuelingMlp& online() const { return online_; }
  const DuelingMlp& target() const { return target_; }
  int train_calls() const { return train_calls_; }

  std::vector<double> dueling_q(const std::vector<double>& state) const {
    return online_.q_values(state);
  }

  // Double target: action picked by the online net, value read from the
  // target net. Ties break toward the lowest action index.
  double double_target(const Transition& t) const {
    if (t.terminal) return t.reward;
    const auto online_q = online_.q_values(t.next_state);
    const int chosen = argmax_valid(online_q, t.next_mask);
    if (chosen < 0) return t.reward;  // fully masked next state
    const auto target_q = target_.q_values(t.next_state);
    return t.reward + config_.discount * target_q[std::size_t(chosen)];
  }

  // One SGD step on a batch: W <- W + sigma * mean(delta * grad Q).
  // Returns the mean squared TD error. The target net is refreshed every
  // sync_period calls.
  double train_step(const std::vector<const Transition*>& batch) {
    if (batch.empty()) throw std::invalid_argument("train_step: empty batch");
    std::vector<double> direction(online_.parameter_count(), 0.0);
    double loss = 0.0;
    for (const auto* t : batch) {
      const double y = double_target(*t);
      const double q = online_.q_values(t->state)[std::size_t(t->action)];
      const double delta = y - q;
      loss += delta * delta;
      const auto grad = online_.gradient(t->state, t->action);
      for (std::size_t i = 0; i < direction.size(); ++i) direction[i] += delta * grad[i];
    }
    const double inv = 1.0 / double(batch.size());
    for (auto& d : direction) d *= inv;
    online_.add_scaled(direction, config_.learning_rate);
    loss *= inv;
    ++train_calls_;
    if (config_.sync_period > 0 && train_calls_ % config_.sync_period == 0) sync_target();
    return loss;
  }

  void sync_target() { target_ = online_; }

  void save(std::ostream& out) const;
  void load(std::istream& in);

 private:
  QConfig config_;
  DuelingMlp online_;
  DuelingMlp target_;
  int train_calls_ = 0;

  friend class QFunctionSerializer;
};

// ---------------------------------------------------------------------------
// Epsilon-greedy with masking: exploit the best valid action with
// probability 1 - eps, otherwise explore uniformly over valid actions.

inline int epsilon_greedy(const QFunction& qf, const std::vector<double>& state,
                          const EpsilonSchedule& schedule, const std::vector<std::uint8_t>& mask,
                          Rng& rng) {
  std::vector<int> valid;
  const int actions = qf.config().mlp.actions;
  for (int a = 0; a < actions; ++a)
    if (mask.empty() || mask[std::size_t(a)]) valid.push_back(a);
  if (valid.empty()) throw std::runtime_error("epsilon_greedy: every action is masked");
  const double zeta = rng.uniform01();
  if (zeta > schedule.epsilon) {
    const auto q = qf.dueling_q(state);
    return argmax_valid(q, mask);
  }
  return valid[std::size_t(rng.uniform_int(0, int(valid.size()) - 1))];
}

// ---------------------------------------------------------------------------
// Bit-exact parameter serialization (doubles stored as hex words).

namespace detail {

inline std::string double_to_hex(double v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(std::bit_cast<std::uint64_t>(v)));
  return buf;
}

inline double hex_to_double(const std::string& s) {
  return std::bit_cast<double>(std::uint64_t(std::stoull(s, nullptr, 16)));
}

inline void write_vector(std::ostream& out, const std::vector<double>& v) {
  out << v.size();
  for (double x : v) out << ' ' << double_to_hex(x);
  out << '\n';
}

inline std::vector<double> read_vector(std::istream& in) {
  std::size_t n = 0;
  in >> n;
  std::vector<double> v(n);
  for (auto& x : v) {
    std::string word;
    in >> word;
    x = hex_to_double(word);
  }
  return v;
}

}  // namespace detail

inline void QFunction::save(std::ostream& out) const {
  out << "qfunction 1\n";
  out << config_.mlp.input_dim << ' ' << config_.mlp.actions << ' ' << config_.mlp.hidden.size();
  for (int h : config_.mlp.hidden) out << ' ' << h;
  out << ' ' << (config_.mlp.activation == Activation::tanh_fn ? 0 : 1) << ' '
      << detail::double_to_hex(config_.mlp.input_scale) << '\n';
  out << detail::double_to_hex(config_.learning_rate) << ' '
      << detail::double_to_hex(config_.discount) << ' ' << config_.sync_period << ' '
      << train_calls_ << '\n';
  detail::write_vector(out, online_.parameters());
  detail::write_vector(out, target_.parameters());
}

inline void QFunction::load(std::istream& in) {
  std::string tag;
  int version = 0;
  in >> tag >> version;
  if (tag != "qfunction") throw std::runtime_error("QFunction::load: bad header");
  MlpConfig mlp;
  std::size_t hidden_count = 0;
  in >> mlp.input_dim >> mlp.actions >> hidden_count;
  mlp.hidden.resize(hidden_count);
  for (auto& h : mlp.hidden) in >> h;
  int act = 0;
  std::string scale_hex;
  in >> act >> scale_hex;
  mlp.activation = act == 0 ? Activation::tanh_fn : Activation::leaky_relu;
  mlp.input_scale = detail::hex_to_double(scale_hex);
  std::string lr_hex, gamma_hex;
  in >> lr_hex >> gamma_hex >> config_.sync_period >> train_calls_;
  config_.learning_rate = detail::hex_to_double(lr_hex);
  config_.discount = detail::hex_to_double(gamma_hex);
  config_.mlp = mlp;
  online_ = DuelingMlp(mlp, 0);
  online_.set_parameters(detail::read_vector(in));
  target_ = DuelingMlp(mlp, 0);
  target_.set_parameters(detail::read_vector(in));
}

}  // namespace aero::learning
