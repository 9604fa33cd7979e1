#include "vinrs/vin_network.hpp"

#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>

#include "vinrs/rng.hpp"

namespace vinrs {

using namespace nn;

namespace {

Tensor uniform_init(std::vector<int> shape, int fan_in, Rng& rng) {
  Tensor t(std::move(shape));
  const double bound = 0.5 / std::sqrt(static_cast<double>(fan_in));
  for (auto& v : t.data) v = rng.uniform(-bound, bound);
  return t;
}

}  // namespace

VinNetwork::VinNetwork(const VinConfig& config, int height, int width,
                       std::uint64_t seed)
    : config_(config), height_(height), width_(width) {
  if (config.kernel_size % 2 == 0)
    throw std::invalid_argument("VinNetwork: kernel_size must be odd");
  if (config.k_iterations < 1)
    throw std::invalid_argument("VinNetwork: k_iterations must be >= 1");

  Rng rng(seed);
  const int ks = config.kernel_size;
  const int x = config.q_channels;
  const int flat = x * height * width;

  params_.reserve(10);
  params_.emplace_back(uniform_init({config.h_channels, 3, ks, ks}, 3 * ks * ks, rng),
                       "cnnH.kernel");
  params_.emplace_back(uniform_init({config.h_channels}, 3 * ks * ks, rng), "cnnH.bias");
  params_.emplace_back(uniform_init({1, config.h_channels, 1, 1}, config.h_channels, rng),
                       "cnnR.kernel");
  params_.emplace_back(uniform_init({1}, config.h_channels, rng), "cnnR.bias");
  params_.emplace_back(uniform_init({x, 1, ks, ks}, ks * ks, rng), "wQ");
  params_.emplace_back(uniform_init({x, 1, ks, ks}, ks * ks, rng), "wV");
  params_.emplace_back(uniform_init({config.fn_hidden, flat}, flat, rng), "fn.weights");
  params_.emplace_back(uniform_init({config.fn_hidden}, flat, rng), "fn.bias");
  params_.emplace_back(uniform_init({x, config.fn_hidden}, config.fn_hidden, rng),
                       "opt.weights");
  params_.emplace_back(uniform_init({x}, config.fn_hidden, rng), "opt.bias");
}

nn::Parameter& VinNetwork::param(const std::string& name) {
  for (auto& p : params_)
    if (p.name() == name) return p;
  throw std::invalid_argument("VinNetwork: no parameter named " + name);
}

Var VinNetwork::evaluate_q(const Var& rmap, const Var& vmap) const {
  const Var v3 = reshape(vmap, {1, height_, width_});
  return add(conv2d(rmap, params_[kWQ].var()), conv2d(v3, params_[kWV].var()));
}

Var VinNetwork::evaluate_q_concat(const Var& rmap, const Var& vmap) const {
  const Var v3 = reshape(vmap, {1, height_, width_});
  const Var rv = concat_channels(rmap, v3);
  // concat(wQ, wV) along the input-channel dim: per output channel, the wQ
  // tap block then the wV tap block
  const int x = config_.q_channels, ks = config_.kernel_size;
  const Var wq = params_[kWQ].var();
  const Var wv = params_[kWV].var();
  std::vector<Var> taps;
  taps.reserve(static_cast<std::size_t>(2 * x * ks * ks));
  for (int c = 0; c < x; ++c) {
    for (int i = 0; i < ks * ks; ++i) taps.push_back(pick(wq, c * ks * ks + i));
    for (int i = 0; i < ks * ks; ++i) taps.push_back(pick(wv, c * ks * ks + i));
  }
  const Var kernel = reshape(stack_scalars(taps), {x, 2, ks, ks});
  return conv2d(rv, kernel);
}

VinNetwork::ForwardResult VinNetwork::forward(const ObservationImage& obs, int k,
                                              MaxSelectionTrace* trace) const {
  if (obs.planes.rank() != 3 || obs.planes.dim(0) != 3 ||
      obs.planes.dim(1) != height_ || obs.planes.dim(2) != width_)
    throw std::invalid_argument("VinNetwork::forward: observation shape " +
                                obs.planes.shape_str() + " does not match network " +
                                std::to_string(height_) + "x" + std::to_string(width_));
  const int iters = k > 0 ? k : config_.k_iterations;

  auto take_max = [&](const Var& q) -> Var {
    if (trace && trace->replay) {
      if (trace->cursor >= trace->selections.size())
        throw std::logic_error("MaxSelectionTrace: replay past the recorded end");
      return channel_max_frozen(q, trace->selections[trace->cursor++]);
    }
    ChannelMax m = channel_max(q);
    if (trace) trace->selections.push_back(std::move(m.argmax));
    return m.values;
  };

  const Var input = constant(obs.planes);
  const Var h = relu(conv2d(input, params_[kHKernel].var(), params_[kHBias].var()));
  const Var r = conv2d(h, params_[kRKernel].var(), params_[kRBias].var());

  // wQ*r is loop-invariant; sharing the node across iterations halves the
  // conv work and accumulates the same gradient
  const Var qr = conv2d(r, params_[kWQ].var());
  Var q = qr;
  Var v = take_max(q);
  for (int i = 0; i < iters; ++i) {
    q = add(qr, conv2d(reshape(v, {1, height_, width_}), params_[kWV].var()));
    v = take_max(q);
  }
  q = add(qr, conv2d(reshape(v, {1, height_, width_}), params_[kWV].var()));
  v = take_max(q);  // final refinement

  ForwardResult out;
  out.qmap = q;
  out.vmap = v;
  const Var flat = reshape(q, {config_.q_channels * height_ * width_});
  const Var hidden = relu(dense(flat, params_[kFnW].var(), params_[kFnB].var()));
  // logits capped where the double-precision sigmoid would round to 0 or 1,
  // keeping phi strictly inside (0,1)
  out.phi = sigmoid(
      clamp(dense(hidden, params_[kOptW].var(), params_[kOptB].var()), -30.0, 30.0));
  return out;
}

double VinNetwork::potential(const Gridworld& world, StateId s, Action a) const {
  const auto res = forward(render(world, s));
  return res.phi->value[static_cast<int>(a)];
}

double lookahead_advice(const VinNetwork& net, const Gridworld& world, StateId s,
                        Action a, StateId s_next, Action a_next, double gamma) {
  return gamma * net.potential(world, s_next, a_next) - net.potential(world, s, a);
}

// ---- checkpoints ----------------------------------------------------------

std::string VinNetwork::save_checkpoint() const {
  std::string out = "vinrs-checkpoint 1\n";
  char buf[64];
  for (const auto& p : params_) {
    out += "param " + p.name() + " " + std::to_string(p.value().rank());
    for (int d : p.value().shape) out += " " + std::to_string(d);
    out += "\n";
    for (int i = 0; i < p.value().numel(); ++i) {
      std::snprintf(buf, sizeof(buf), i ? " %.17g" : "%.17g", p.value()[i]);
      out += buf;
    }
    out += "\n";
  }
  return out;
}

void VinNetwork::load_checkpoint(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  if (!(in >> magic >> version) || magic != "vinrs-checkpoint" || version != 1)
    throw std::invalid_argument("checkpoint: bad header");

  std::map<std::string, Tensor> loaded;
  std::string token;
  while (in >> token) {
    if (token != "param") throw std::invalid_argument("checkpoint: expected 'param'");
    std::string name;
    int rank = 0;
    if (!(in >> name >> rank) || rank < 1 || rank > 8)
      throw std::invalid_argument("checkpoint: bad parameter header");
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (auto& d : shape)
      if (!(in >> d) || d <= 0) throw std::invalid_argument("checkpoint: bad shape");
    Tensor t(shape);
    for (int i = 0; i < t.numel(); ++i)
      if (!(in >> t[i])) throw std::invalid_argument("checkpoint: truncated values");
    loaded.emplace(name, std::move(t));
  }

  for (auto& p : params_) {
    auto it = loaded.find(p.name());
    if (it == loaded.end())
      throw std::invalid_argument("checkpoint: missing parameter " + p.name());
    if (it->second.shape != p.value().shape)
      throw std::invalid_argument("checkpoint: shape mismatch for " + p.name() + ": " +
                                  it->second.shape_str() + " vs " +
                                  p.value().shape_str());
    p.value() = it->second;
    loaded.erase(it);
  }
  if (!loaded.empty())
    throw std::invalid_argument("checkpoint: unknown parameter " +
                                loaded.begin()->first);
}

// ---- training -------------------------------------------------------------

double train_step(VinNetwork& net, const std::vector<ObservationImage>& images,
                  const ExperienceGraph& g, const MessageTable& labels,
                  nn::AdamOptimizer& optimizer) {
  if (g.node_count() == 0)
    throw std::invalid_argument("train_step: empty experience graph");
  if (static_cast<int>(images.size()) != g.node_count())
    throw std::invalid_argument("train_step: " + std::to_string(images.size()) +
                                " images for " + std::to_string(g.node_count()) +
                                " graph nodes");

  // forward one pass per distinct state; nodes of the same state share it
  std::map<StateId, Var> phi_by_state;
  std::vector<Var> phi(static_cast<std::size_t>(g.node_count()));
  for (int i = 0; i < g.node_count(); ++i) {
    const auto& info = g.node(i);
    auto it = phi_by_state.find(info.state);
    if (it == phi_by_state.end()) {
      it = phi_by_state
               .emplace(info.state,
                        net.forward(images[static_cast<std::size_t>(i)]).phi)
               .first;
    }
    phi[static_cast<std::size_t>(i)] = pick(it->second, info.action);
  }

  // Targets clamped a hair inside (0,1): a target of exactly 1 has no
  // interior optimum and would push logits until the sigmoid saturates out of
  // the (0,1) prediction domain.
  std::vector<double> targets = labels.label;
  for (auto& y : targets) y = std::min(std::max(y, kLabelFloor), 1.0 - kLabelFloor);
  const Var base = base_loss_node(targets, phi, g.rewarding_nodes());
  const Var rec = recursive_loss_node(phi, g);
  const Var loss = add(base, scale(rec, net.config().eta));

  zero_grads(net.params());
  backward(loss);
  optimizer.step(net.params());
  return loss->value[0];
}

double train_step(VinNetwork& net, const std::vector<ObservationImage>& images,
                  const ExperienceGraph& g, nn::AdamOptimizer& optimizer) {
  const auto model = OptimalityModel::from_graph(g, net.config().tau);
  const MessageTable labels = message_labels(g, model);
  return train_step(net, images, g, labels, optimizer);
}

}  // namespace vinrs
