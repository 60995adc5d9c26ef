#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <vector>

#include "f2r/ad.hpp"
#include "f2r/common.hpp"

namespace f2r {

/// One trainable matrix with its persistent gradient accumulator.
struct Tensor {
  std::string name;
  ad::Matrix value;
  ad::Matrix grad;
};

/// Ordered, name-addressed collection of model parameters. Order is creation
/// order and is part of the checkpoint contract.
class ParamStore {
 public:
  Tensor& create(const std::string& name, int rows, int cols);
  Tensor& zeros(const std::string& name, int rows, int cols);
  Tensor& ones(const std::string& name, int rows, int cols);
  Tensor& normal(const std::string& name, int rows, int cols, double stddev, Rng& rng);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::vector<Tensor*> all();
  std::vector<const Tensor*> all() const;
  std::size_t count() const { return tensors_.size(); }
  std::size_t parameter_count() const;

  void zero_grads();
  /// Global L2 norm of all gradients.
  double grad_norm() const;
  /// Scales all gradients so the global norm is at most max_norm. No-op when
  /// max_norm <= 0.
  void clip_grads(double max_norm);

  /// Copies values from another store with identical layout.
  void copy_values_from(const ParamStore& other);

 private:
  std::vector<std::unique_ptr<Tensor>> tensors_;
};

/// Registers all tensors of a store as leaves on a tape and exposes them by
/// name for the forward pass. Bindings built from a mutable store are
/// differentiable; after Tape::backward, flush() adds the tape gradients into
/// the persistent Tensor::grad buffers. Bindings built from a const store are
/// frozen: no pullbacks are recorded and flush() is a no-op.
class TapeBinding {
 public:
  TapeBinding(ad::Tape& tape, ParamStore& store);        // trainable
  TapeBinding(ad::Tape& tape, const ParamStore& store);  // frozen
  ad::Var operator[](const std::string& name) const;
  void flush();
  bool trainable() const { return trainable_; }

 private:
  ad::Tape* tape_;
  bool trainable_;
  std::vector<std::pair<const Tensor*, ad::Var>> bound_;
};

/// Checkpoint container: magic + JSON header (kind, config, tensor directory)
/// followed by raw little-endian float64 blobs. Round-trips bit-exact.
struct Checkpoint {
  std::string kind;
  nlohmann::json config;
  std::vector<std::pair<std::string, ad::Matrix>> tensors;
};

void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config, const ParamStore& params);
Checkpoint load_checkpoint(const std::string& path);
/// Loads tensor values into an already-constructed store; shapes must match.
void restore_params(ParamStore& params, const Checkpoint& ckpt);

}  // namespace f2r
