#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "aggrl/rng.hpp"

namespace aggrl {

enum class Activation : std::uint8_t { identity = 0, relu = 1, tanh = 2 };

enum class Init : std::uint8_t {
  xavier_uniform,  // U(+-sqrt(6 / (in + out)))
  he_uniform,      // U(+-sqrt(6 / in))
  small_uniform,   // U(+-3e-3)
  zeros,
};

struct LayerSpec {
  int inputs = 0;
  int outputs = 0;
  Activation activation = Activation::identity;
  Init init = Init::xavier_uniform;
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // outputs x inputs
  Eigen::VectorXd bias;    // outputs
  Activation activation = Activation::identity;

  int inputs() const { return static_cast<int>(weight.cols()); }
  int outputs() const { return static_cast<int>(weight.rows()); }
  bool operator==(const DenseLayer& o) const {
    return activation == o.activation && weight == o.weight && bias == o.bias;
  }
};

/// Per-layer gradient (or ADAM moment) buffers shaped like the parameters.
struct LayerGrad {
  Eigen::MatrixXd weight;
  Eigen::VectorXd bias;
  bool operator==(const LayerGrad& o) const { return weight == o.weight && bias == o.bias; }
};

struct Gradients {
  std::vector<LayerGrad> layers;
  Eigen::MatrixXd input;  // d loss / d input, inputs x batch
};

struct AdamState {
  std::uint64_t step = 0;
  std::vector<LayerGrad> first;
  std::vector<LayerGrad> second;
  bool operator==(const AdamState&) const = default;
};

inline constexpr double kAdamBeta1 = 0.9;
inline constexpr double kAdamBeta2 = 0.999;
inline constexpr double kAdamEpsilon = 1e-8;

/// Activations recorded by Network::forward_cached, consumed by backward.
struct ForwardPass {
  std::vector<Eigen::MatrixXd> inputs;   // input of each layer
  std::vector<Eigen::MatrixXd> outputs;  // post-activation output of each layer

  bool empty() const { return inputs.empty(); }
  const Eigen::MatrixXd& result() const { return outputs.back(); }
};

/// Fully connected network. Batches are column-major: one sample per column.
class Network {
 public:
  Network() = default;
  Network(std::span<const LayerSpec> specs, Rng& rng);
  explicit Network(std::vector<DenseLayer> layers);

  int input_size() const;
  int output_size() const;
  std::size_t parameter_count() const;
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }
  const AdamState& adam() const { return adam_; }
  AdamState& adam() { return adam_; }

  /// Throws ConfigError on a dimension mismatch.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& input) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
  ForwardPass forward_cached(const Eigen::MatrixXd& input) const;

  /// Reverse-mode gradients of a loss whose gradient w.r.t. the network
  /// output is `upstream`. Throws UsageError if `pass` is empty or does not
  /// belong to this topology.
  Gradients backward(const ForwardPass& pass, const Eigen::MatrixXd& upstream) const;

  /// Standard bias-corrected ADAM step.
  void adam_update(const Gradients& gradients, double learning_rate);

  /// this <- tau * online + (1 - tau) * this. tau == 1 copies exactly.
  void soft_update(const Network& online, double tau);

  bool same_topology(const Network& other) const;
  bool all_finite() const;

  bool operator==(const Network& o) const { return layers_ == o.layers_ && adam_ == o.adam_; }

 private:
  void check_chain() const;
  void reset_adam();

  std::vector<DenseLayer> layers_;
  AdamState adam_;
};

Network make_value_network(Rng& rng);   // 31 -> 64 relu -> 128 relu -> 9
Network make_actor_network(Rng& rng);   // 31 -> 400 relu -> 300 relu -> 2 tanh
Network make_critic_network(Rng& rng);  // 33 -> 400 relu -> 300 relu -> 1

/// Network record: "AGRL", u16 format version, u32 layer count, per layer
/// (u32 inputs, u32 outputs, u8 activation), every layer's weights (row-major)
/// then bias as little-endian f64, then ADAM state (u64 step, per layer first
/// moment weights+bias, per layer second moment weights+bias).
inline constexpr std::uint16_t kNetworkFormatVersion = 1;

class ByteWriter;
class ByteReader;
void write_network(ByteWriter& out, const Network& net);
Network read_network(ByteReader& in);

}  // namespace aggrl
