#include "f2r/params.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

namespace f2r {

Rng derive_rng(std::uint64_t seed, const std::string& stream) {
  return Rng{seed ^ fnv1a_hash(stream)};
}

std::uint64_t fnv1a_hash(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

Tensor& ParamStore::create(const std::string& name, int rows, int cols) {
  if (contains(name)) throw Error("ParamStore: duplicate tensor name '" + name + "'");
  auto t = std::make_unique<Tensor>();
  t->name = name;
  t->value = ad::Matrix::Zero(rows, cols);
  t->grad = ad::Matrix::Zero(rows, cols);
  tensors_.push_back(std::move(t));
  return *tensors_.back();
}

Tensor& ParamStore::zeros(const std::string& name, int rows, int cols) {
  return create(name, rows, cols);
}

Tensor& ParamStore::ones(const std::string& name, int rows, int cols) {
  Tensor& t = create(name, rows, cols);
  t.value.setOnes();
  return t;
}

Tensor& ParamStore::normal(const std::string& name, int rows, int cols, double stddev, Rng& rng) {
  Tensor& t = create(name, rows, cols);
  std::normal_distribution<double> dist(0.0, stddev);
  for (Eigen::Index i = 0; i < t.value.rows(); ++i) {
    for (Eigen::Index j = 0; j < t.value.cols(); ++j) {
      t.value(i, j) = dist(rng);
    }
  }
  return t;
}

Tensor& ParamStore::at(const std::string& name) {
  for (auto& t : tensors_) {
    if (t->name == name) return *t;
  }
  throw Error("ParamStore: no tensor named '" + name + "'");
}

const Tensor& ParamStore::at(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t->name == name) return *t;
  }
  throw Error("ParamStore: no tensor named '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& t : tensors_) {
    if (t->name == name) return true;
  }
  return false;
}

std::vector<Tensor*> ParamStore::all() {
  std::vector<Tensor*> out;
  out.reserve(tensors_.size());
  for (auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::vector<const Tensor*> ParamStore::all() const {
  std::vector<const Tensor*> out;
  out.reserve(tensors_.size());
  for (const auto& t : tensors_) out.push_back(t.get());
  return out;
}

std::size_t ParamStore::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += static_cast<std::size_t>(t->value.size());
  return n;
}

void ParamStore::zero_grads() {
  for (auto& t : tensors_) t->grad.setZero();
}

double ParamStore::grad_norm() const {
  double sq = 0.0;
  for (const auto& t : tensors_) sq += t->grad.squaredNorm();
  return std::sqrt(sq);
}

void ParamStore::clip_grads(double max_norm) {
  if (max_norm <= 0.0) return;
  const double norm = grad_norm();
  if (norm <= max_norm) return;
  const double s = max_norm / norm;
  for (auto& t : tensors_) t->grad *= s;
}

void ParamStore::copy_values_from(const ParamStore& other) {
  if (other.tensors_.size() != tensors_.size()) {
    throw Error("ParamStore: layout mismatch in copy_values_from");
  }
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    const Tensor& src = *other.tensors_[i];
    Tensor& dst = *tensors_[i];
    if (src.value.rows() != dst.value.rows() || src.value.cols() != dst.value.cols()) {
      throw Error("ParamStore: shape mismatch for tensor '" + dst.name + "'");
    }
    dst.value = src.value;
  }
}

TapeBinding::TapeBinding(ad::Tape& tape, ParamStore& store) : tape_(&tape), trainable_(true) {
  for (Tensor* t : store.all()) {
    bound_.emplace_back(t, tape.leaf(t->value, /*requires_grad=*/true));
  }
}

TapeBinding::TapeBinding(ad::Tape& tape, const ParamStore& store)
    : tape_(&tape), trainable_(false) {
  for (const Tensor* t : store.all()) {
    bound_.emplace_back(t, tape.leaf(t->value, /*requires_grad=*/false));
  }
}

ad::Var TapeBinding::operator[](const std::string& name) const {
  for (const auto& [t, v] : bound_) {
    if (t->name == name) return v;
  }
  throw Error("TapeBinding: no tensor named '" + name + "'");
}

void TapeBinding::flush() {
  if (!trainable_) return;
  for (auto& [t, v] : bound_) {
    const_cast<Tensor*>(t)->grad += tape_->grad(v);
  }
}

namespace {

constexpr char kMagic[8] = {'F', '2', 'R', 'C', 'K', 'P', 'T', '\n'};

void write_u64(std::ostream& os, std::uint64_t v) {
  unsigned char buf[8];
  for (int i = 0; i < 8; ++i) buf[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(buf), 8);
}

std::uint64_t read_u64(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::string& kind,
                     const nlohmann::json& config, const ParamStore& params) {
  nlohmann::json header;
  header["kind"] = kind;
  header["config"] = config;
  nlohmann::json dir = nlohmann::json::array();
  std::uint64_t offset = 0;
  for (const Tensor* t : params.all()) {
    dir.push_back({{"name", t->name},
                   {"rows", t->value.rows()},
                   {"cols", t->value.cols()},
                   {"offset", offset}});
    offset += static_cast<std::uint64_t>(t->value.size()) * sizeof(double);
  }
  header["tensors"] = dir;
  const std::string hs = header.dump();

  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error("checkpoint: cannot open '" + path + "' for writing");
  os.write(kMagic, sizeof(kMagic));
  write_u64(os, hs.size());
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const Tensor* t : params.all()) {
    // Eigen default storage is column-major; serialize in storage order.
    os.write(reinterpret_cast<const char*>(t->value.data()),
             static_cast<std::streamsize>(t->value.size() * sizeof(double)));
  }
  if (!os) throw Error("checkpoint: write failed for '" + path + "'");
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("checkpoint: cannot open '" + path + "'");
  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw Error("checkpoint: '" + path + "' is not a checkpoint file");
  }
  const std::uint64_t hlen = read_u64(is);
  std::string hs(hlen, '\0');
  is.read(hs.data(), static_cast<std::streamsize>(hlen));
  if (!is) throw Error("checkpoint: truncated header in '" + path + "'");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(hs);
  } catch (const nlohmann::json::exception& e) {
    throw Error("checkpoint: bad header in '" + path + "': " + e.what());
  }

  Checkpoint ckpt;
  ckpt.kind = header.at("kind").get<std::string>();
  ckpt.config = header.at("config");
  for (const auto& entry : header.at("tensors")) {
    const auto rows = entry.at("rows").get<Eigen::Index>();
    const auto cols = entry.at("cols").get<Eigen::Index>();
    ad::Matrix m(rows, cols);
    is.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
    if (!is) throw Error("checkpoint: truncated tensor data in '" + path + "'");
    ckpt.tensors.emplace_back(entry.at("name").get<std::string>(), std::move(m));
  }
  return ckpt;
}

void restore_params(ParamStore& params, const Checkpoint& ckpt) {
  for (const auto& [name, m] : ckpt.tensors) {
    Tensor& t = params.at(name);
    if (t.value.rows() != m.rows() || t.value.cols() != m.cols()) {
      throw Error("checkpoint: shape mismatch for tensor '" + name + "'");
    }
    t.value = m;
  }
}

}  // namespace f2r
