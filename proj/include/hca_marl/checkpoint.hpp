#pragma once

// Binary checkpoint bundle.
//
//   "HCAC"            4 magic bytes
//   u32 version       currently 1
//   u32 record_count
//   record_count x {
//     u32 name_length, name bytes (UTF-8)
//     u32 kind        0 = value network, 1 = Gaussian actor, 2 = categorical actor
//     u32 activation  0 = tanh, 1 = relu, 2 = identity
//     u32 size_count, size_count x u32 layer size
//     f64 parameters  per layer: weights row-major (out x in), then biases
//     f64 log_std     Gaussian actors only, one per action dimension
//   }
//
// All integers and floats are little-endian.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "hca_marl/error.hpp"
#include "hca_marl/nn.hpp"
#include "hca_marl/policy.hpp"

namespace hca_marl {

inline constexpr char kCheckpointMagic[4] = {'H', 'C', 'A', 'C'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class NetworkKind : std::uint32_t { value = 0, gaussian_actor = 1, categorical_actor = 2 };

struct CheckpointRecord {
  std::string name;
  NetworkKind kind = NetworkKind::value;
  Mlp net;
  Vector log_std;

  friend bool operator==(const CheckpointRecord& a, const CheckpointRecord& b) {
    return a.name == b.name && a.kind == b.kind && a.net == b.net && a.log_std == b.log_std;
  }
};

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

inline void put_u32(std::string& out, std::uint32_t v) {
  char b[4];
  std::memcpy(b, &v, 4);
  out.append(b, 4);
}

inline void put_f64(std::string& out, double v) {
  char b[8];
  std::memcpy(b, &v, 8);
  out.append(b, 8);
}

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }

  double f64() {
    double v;
    std::memcpy(&v, take(8), 8);
    return v;
  }

  std::string str(std::size_t n) { return std::string(take(n), n); }

  bool at_end() const { return pos_ == bytes_.size(); }

 private:
  const char* take(std::size_t n) {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated at byte " + std::to_string(pos_));
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline std::string encode_checkpoint(const std::vector<CheckpointRecord>& records) {
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(records.size()));
  for (const auto& r : records) {
    detail::put_u32(out, static_cast<std::uint32_t>(r.name.size()));
    out += r.name;
    detail::put_u32(out, static_cast<std::uint32_t>(r.kind));
    detail::put_u32(out, static_cast<std::uint32_t>(r.net.activation()));
    detail::put_u32(out, static_cast<std::uint32_t>(r.net.layer_sizes().size()));
    for (std::size_t s : r.net.layer_sizes()) detail::put_u32(out, static_cast<std::uint32_t>(s));
    for (std::size_t l = 0; l < r.net.layer_count(); ++l) {
      const Matrix& w = r.net.weights()[l];
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) detail::put_f64(out, w(i, j));
      }
      for (Eigen::Index i = 0; i < r.net.biases()[l].size(); ++i) detail::put_f64(out, r.net.biases()[l][i]);
    }
    if (r.kind == NetworkKind::gaussian_actor) {
      if (r.log_std.size() != static_cast<Eigen::Index>(r.net.output_dim())) {
        throw ShapeError("Gaussian record '" + r.name + "' has mismatched log_std length");
      }
      for (Eigen::Index i = 0; i < r.log_std.size(); ++i) detail::put_f64(out, r.log_std[i]);
    }
  }
  return out;
}

inline std::vector<CheckpointRecord> decode_checkpoint(const std::string& bytes) {
  detail::Reader in(bytes);
  if (in.str(4) != std::string(kCheckpointMagic, 4)) throw CheckpointError("bad checkpoint magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
  }
  const std::uint32_t count = in.u32();
  std::vector<CheckpointRecord> records;
  for (std::uint32_t k = 0; k < count; ++k) {
    CheckpointRecord r;
    r.name = in.str(in.u32());
    const std::uint32_t kind = in.u32();
    if (kind > 2) throw CheckpointError("record '" + r.name + "' has unknown kind " + std::to_string(kind));
    r.kind = static_cast<NetworkKind>(kind);
    const std::uint32_t act = in.u32();
    if (act > 2) throw CheckpointError("record '" + r.name + "' has unknown activation");
    const std::uint32_t n_sizes = in.u32();
    if (n_sizes < 2 || n_sizes > 64) throw CheckpointError("record '" + r.name + "' has invalid layer count");
    std::vector<std::size_t> sizes;
    for (std::uint32_t i = 0; i < n_sizes; ++i) {
      const std::uint32_t s = in.u32();
      if (s == 0 || s > (1u << 20)) throw CheckpointError("record '" + r.name + "' has invalid layer size");
      sizes.push_back(s);
    }
    r.net = Mlp(sizes, static_cast<Activation>(act));
    for (std::size_t l = 0; l < r.net.layer_count(); ++l) {
      Matrix& w = r.net.weights()[l];
      for (Eigen::Index i = 0; i < w.rows(); ++i) {
        for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = in.f64();
      }
      for (Eigen::Index i = 0; i < r.net.biases()[l].size(); ++i) r.net.biases()[l][i] = in.f64();
    }
    if (r.kind == NetworkKind::gaussian_actor) {
      r.log_std.resize(static_cast<Eigen::Index>(r.net.output_dim()));
      for (Eigen::Index i = 0; i < r.log_std.size(); ++i) r.log_std[i] = in.f64();
    }
    if (!r.net.all_finite() || !r.log_std.allFinite()) {
      throw CheckpointError("record '" + r.name + "' contains non-finite parameters");
    }
    records.push_back(std::move(r));
  }
  if (!in.at_end()) throw CheckpointError("trailing bytes after last checkpoint record");
  return records;
}

inline void save_checkpoint(const std::filesystem::path& path, const std::vector<CheckpointRecord>& records) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw CheckpointError("cannot open '" + path.string() + "' for writing");
  const std::string bytes = encode_checkpoint(records);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw CheckpointError("write to '" + path.string() + "' failed");
}

inline std::vector<CheckpointRecord> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw CheckpointError("cannot open checkpoint '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

inline CheckpointRecord actor_record(std::string name, const PolicyHead& head) {
  if (const auto* g = std::get_if<GaussianPolicyHead>(&head)) {
    return {std::move(name), NetworkKind::gaussian_actor, g->mean_net, g->log_std};
  }
  return {std::move(name), NetworkKind::categorical_actor, std::get<CategoricalPolicyHead>(head).logit_net, {}};
}

inline PolicyHead head_from_record(const CheckpointRecord& r) {
  switch (r.kind) {
    case NetworkKind::gaussian_actor: {
      GaussianPolicyHead g;
      g.mean_net = r.net;
      g.log_std = r.log_std;
      return g;
    }
    case NetworkKind::categorical_actor: return CategoricalPolicyHead(r.net);
    case NetworkKind::value: break;
  }
  throw CheckpointError("record '" + r.name + "' is a value network, not an actor");
}

}  // namespace hca_marl
