#include "aggrl/nn.hpp"

#include <array>
#include <cmath>
#include <string>

#include "aggrl/bytes.hpp"
#include "aggrl/errors.hpp"
#include "aggrl/sensing.hpp"

namespace aggrl {
namespace {

constexpr std::array<std::byte, 4> kMagic{std::byte{'A'}, std::byte{'G'}, std::byte{'R'}, std::byte{'L'}};

void apply_activation(Eigen::MatrixXd& z, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: z = z.cwiseMax(0.0); break;
    case Activation::tanh: z = z.array().tanh().matrix(); break;
  }
}

// Multiplies `grad` in place by the activation derivative, expressed through
// the post-activation output. ReLU's subgradient at 0 is 0.
void apply_activation_grad(Eigen::MatrixXd& grad, const Eigen::MatrixXd& out, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::relu: grad = (out.array() > 0.0).select(grad, 0.0); break;
    case Activation::tanh: grad = (grad.array() * (1.0 - out.array().square())).matrix(); break;
  }
}

double init_bound(const LayerSpec& s) {
  switch (s.init) {
    case Init::xavier_uniform: return std::sqrt(6.0 / (s.inputs + s.outputs));
    case Init::he_uniform: return std::sqrt(6.0 / s.inputs);
    case Init::small_uniform: return 3e-3;
    case Init::zeros: return 0.0;
  }
  return 0.0;
}

LayerGrad zeros_like(const DenseLayer& layer) {
  return {Eigen::MatrixXd::Zero(layer.outputs(), layer.inputs()), Eigen::VectorXd::Zero(layer.outputs())};
}

void write_matrix(ByteWriter& out, const Eigen::MatrixXd& m) {
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) out.f64(m(r, c));
}

void write_vector(ByteWriter& out, const Eigen::VectorXd& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) out.f64(v(i));
}

void read_matrix(ByteReader& in, Eigen::MatrixXd& m) {
  in.require(static_cast<std::size_t>(m.size()) * 8);
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = in.f64();
}

void read_vector(ByteReader& in, Eigen::VectorXd& v) {
  in.require(static_cast<std::size_t>(v.size()) * 8);
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = in.f64();
}

}  // namespace

Network::Network(std::span<const LayerSpec> specs, Rng& rng) {
  if (specs.empty()) throw ConfigError("Network: at least one layer required");
  for (const auto& s : specs) {
    if (s.inputs <= 0 || s.outputs <= 0) throw ConfigError("Network: layer sizes must be positive");
    DenseLayer layer;
    layer.activation = s.activation;
    layer.weight.resize(s.outputs, s.inputs);
    layer.bias = Eigen::VectorXd::Zero(s.outputs);
    const double bound = init_bound(s);
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c)
        layer.weight(r, c) = bound == 0.0 ? 0.0 : uniform(rng, -bound, bound);
    layers_.push_back(std::move(layer));
  }
  check_chain();
  reset_adam();
}

Network::Network(std::vector<DenseLayer> layers) : layers_(std::move(layers)) {
  if (layers_.empty()) throw ConfigError("Network: at least one layer required");
  for (const auto& l : layers_)
    if (l.bias.size() != l.weight.rows()) throw ConfigError("Network: bias size does not match outputs");
  check_chain();
  reset_adam();
}

void Network::check_chain() const {
  for (std::size_t i = 1; i < layers_.size(); ++i)
    if (layers_[i].inputs() != layers_[i - 1].outputs())
      throw ConfigError("Network: layer " + std::to_string(i) + " expects " +
                        std::to_string(layers_[i].inputs()) + " inputs but previous layer has " +
                        std::to_string(layers_[i - 1].outputs()) + " outputs");
}

void Network::reset_adam() {
  adam_.step = 0;
  adam_.first.clear();
  adam_.second.clear();
  for (const auto& l : layers_) {
    adam_.first.push_back(zeros_like(l));
    adam_.second.push_back(zeros_like(l));
  }
}

int Network::input_size() const { return layers_.empty() ? 0 : layers_.front().inputs(); }
int Network::output_size() const { return layers_.empty() ? 0 : layers_.back().outputs(); }

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

Eigen::MatrixXd Network::forward(const Eigen::MatrixXd& input) const {
  if (input.rows() != input_size())
    throw ConfigError("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                      std::to_string(input_size()));
  Eigen::MatrixXd x = input;
  for (const auto& l : layers_) {
    Eigen::MatrixXd z = l.weight * x;
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    x = std::move(z);
  }
  return x;
}

Eigen::VectorXd Network::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

ForwardPass Network::forward_cached(const Eigen::MatrixXd& input) const {
  if (input.rows() != input_size())
    throw ConfigError("forward: input has " + std::to_string(input.rows()) + " rows, network expects " +
                      std::to_string(input_size()));
  ForwardPass pass;
  pass.inputs.reserve(layers_.size());
  pass.outputs.reserve(layers_.size());
  const Eigen::MatrixXd* x = &input;
  for (const auto& l : layers_) {
    pass.inputs.push_back(*x);
    Eigen::MatrixXd z = l.weight * *x;
    z.colwise() += l.bias;
    apply_activation(z, l.activation);
    pass.outputs.push_back(std::move(z));
    x = &pass.outputs.back();
  }
  return pass;
}

Gradients Network::backward(const ForwardPass& pass, const Eigen::MatrixXd& upstream) const {
  if (pass.empty()) throw UsageError("backward: no forward pass recorded");
  if (pass.inputs.size() != layers_.size() || pass.outputs.size() != layers_.size())
    throw UsageError("backward: forward pass does not belong to this network");
  for (std::size_t k = 0; k < layers_.size(); ++k)
    if (pass.inputs[k].rows() != layers_[k].inputs() || pass.outputs[k].rows() != layers_[k].outputs())
      throw UsageError("backward: forward pass does not belong to this network");
  const Eigen::Index batch = pass.inputs.front().cols();
  if (upstream.rows() != output_size() || upstream.cols() != batch)
    throw UsageError("backward: upstream gradient shape does not match the forward pass");

  Gradients g;
  g.layers.resize(layers_.size());
  Eigen::MatrixXd delta = upstream;
  for (std::size_t k = layers_.size(); k-- > 0;) {
    const auto& l = layers_[k];
    apply_activation_grad(delta, pass.outputs[k], l.activation);
    g.layers[k].weight.noalias() = delta * pass.inputs[k].transpose();
    g.layers[k].bias = delta.rowwise().sum();
    Eigen::MatrixXd next = l.weight.transpose() * delta;
    delta = std::move(next);
  }
  g.input = std::move(delta);
  return g;
}

void Network::adam_update(const Gradients& gradients, double learning_rate) {
  if (gradients.layers.size() != layers_.size())
    throw ConfigError("adam_update: gradient layer count does not match network");
  ++adam_.step;
  const double t = static_cast<double>(adam_.step);
  const double c1 = 1.0 - std::pow(kAdamBeta1, t);
  const double c2 = 1.0 - std::pow(kAdamBeta2, t);
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    auto& l = layers_[k];
    const auto& g = gradients.layers[k];
    if (g.weight.rows() != l.weight.rows() || g.weight.cols() != l.weight.cols() || g.bias.size() != l.bias.size())
      throw ConfigError("adam_update: gradient shape mismatch in layer " + std::to_string(k));
    auto& m = adam_.first[k];
    auto& v = adam_.second[k];
    m.weight = kAdamBeta1 * m.weight + (1.0 - kAdamBeta1) * g.weight;
    m.bias = kAdamBeta1 * m.bias + (1.0 - kAdamBeta1) * g.bias;
    v.weight = (kAdamBeta2 * v.weight.array() + (1.0 - kAdamBeta2) * g.weight.array().square()).matrix();
    v.bias = (kAdamBeta2 * v.bias.array() + (1.0 - kAdamBeta2) * g.bias.array().square()).matrix();
    l.weight.array() -= learning_rate * (m.weight.array() / c1) / ((v.weight.array() / c2).sqrt() + kAdamEpsilon);
    l.bias.array() -= learning_rate * (m.bias.array() / c1) / ((v.bias.array() / c2).sqrt() + kAdamEpsilon);
  }
}

bool Network::same_topology(const Network& other) const {
  if (layers_.size() != other.layers_.size()) return false;
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    const auto& a = layers_[k];
    const auto& b = other.layers_[k];
    if (a.inputs() != b.inputs() || a.outputs() != b.outputs() || a.activation != b.activation) return false;
  }
  return true;
}

void Network::soft_update(const Network& online, double tau) {
  if (!same_topology(online)) throw ConfigError("soft_update: topology mismatch");
  if (tau == 1.0) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      layers_[k].weight = online.layers_[k].weight;
      layers_[k].bias = online.layers_[k].bias;
    }
    return;
  }
  if (tau == 0.0) return;
  // Written as an increment so that equal networks stay bit-identical.
  for (std::size_t k = 0; k < layers_.size(); ++k) {
    layers_[k].weight += tau * (online.layers_[k].weight - layers_[k].weight);
    layers_[k].bias += tau * (online.layers_[k].bias - layers_[k].bias);
  }
}

bool Network::all_finite() const {
  for (const auto& l : layers_)
    if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
  return true;
}

Network make_value_network(Rng& rng) {
  const std::array<LayerSpec, 3> specs{{
      {kObservationSize, 64, Activation::relu, Init::he_uniform},
      {64, 128, Activation::relu, Init::he_uniform},
      {128, 9, Activation::identity, Init::xavier_uniform},
  }};
  return Network(specs, rng);
}

Network make_actor_network(Rng& rng) {
  const std::array<LayerSpec, 3> specs{{
      {kObservationSize, 400, Activation::relu, Init::he_uniform},
      {400, 300, Activation::relu, Init::he_uniform},
      {300, 2, Activation::tanh, Init::small_uniform},
  }};
  return Network(specs, rng);
}

Network make_critic_network(Rng& rng) {
  const std::array<LayerSpec, 3> specs{{
      {kObservationSize + 2, 400, Activation::relu, Init::he_uniform},
      {400, 300, Activation::relu, Init::he_uniform},
      {300, 1, Activation::identity, Init::xavier_uniform},
  }};
  return Network(specs, rng);
}

void write_network(ByteWriter& out, const Network& net) {
  out.bytes(kMagic);
  out.u16(kNetworkFormatVersion);
  out.u32(static_cast<std::uint32_t>(net.layers().size()));
  for (const auto& l : net.layers()) {
    out.u32(static_cast<std::uint32_t>(l.inputs()));
    out.u32(static_cast<std::uint32_t>(l.outputs()));
    out.u8(static_cast<std::uint8_t>(l.activation));
  }
  for (const auto& l : net.layers()) {
    write_matrix(out, l.weight);
    write_vector(out, l.bias);
  }
  out.u64(net.adam().step);
  for (const auto* moments : {&net.adam().first, &net.adam().second})
    for (const auto& g : *moments) {
      write_matrix(out, g.weight);
      write_vector(out, g.bias);
    }
}

Network read_network(ByteReader& in) {
  const std::size_t start = in.offset();
  auto magic = in.bytes(4);
  if (!std::equal(magic.begin(), magic.end(), kMagic.begin())) throw ProtocolError("network: bad magic", start);
  const std::size_t version_at = in.offset();
  if (in.u16() != kNetworkFormatVersion) throw ProtocolError("network: unsupported format version", version_at);
  const std::size_t count_at = in.offset();
  const std::uint32_t count = in.u32();
  if (count == 0 || count > 64) throw ProtocolError("network: implausible layer count", count_at);
  std::vector<DenseLayer> layers(count);
  std::size_t parameters = 0;
  for (auto& l : layers) {
    const std::size_t at = in.offset();
    const std::uint32_t inputs = in.u32();
    const std::uint32_t outputs = in.u32();
    const std::uint8_t act = in.u8();
    if (inputs == 0 || outputs == 0 || inputs > (1u << 16) || outputs > (1u << 16) || act > 2)
      throw ProtocolError("network: bad layer header", at);
    // Parameters plus both ADAM moments must fit in what is left.
    parameters += (static_cast<std::size_t>(inputs) + 1) * outputs;
    if (parameters > in.remaining() / 24) throw ProtocolError("network: layer sizes exceed the record", at);
    l.weight.resize(outputs, inputs);
    l.bias.resize(outputs);
    l.activation = static_cast<Activation>(act);
  }
  for (auto& l : layers) {
    read_matrix(in, l.weight);
    read_vector(in, l.bias);
  }
  Network net;
  try {
    net = Network(std::move(layers));
  } catch (const ConfigError& e) {
    throw ProtocolError(std::string("network: ") + e.what(), count_at);
  }
  net.adam().step = in.u64();
  for (auto* moments : {&net.adam().first, &net.adam().second})
    for (auto& g : *moments) {
      read_matrix(in, g.weight);
      read_vector(in, g.bias);
    }
  return net;
}

}  // namespace aggrl
