#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <boost/crc.hpp>
#include <nlohmann/json.hpp>

#include "orcdf/error.hpp"
#include "orcdf/io.hpp"
#include "orcdf/training.hpp"

namespace orcdf {

// Layout (all integers little-endian):
//   "ORCD" | u32 version | u64 n, n bytes of config JSON | u32 tensor count |
//   per tensor: u32 n, name | u64 rows | u64 cols | rows*cols f64 row-major |
//   u32 CRC-32 of everything before it.

inline constexpr char kCheckpointMagic[4] = {'O', 'R', 'C', 'D'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Matrix value;
};

struct Checkpoint {
  nlohmann::json config;
  std::vector<NamedTensor> tensors;

  const Matrix& tensor(std::string_view name) const {
    for (const auto& t : tensors) {
      if (t.name == name) return t.value;
    }
    throw DataError("checkpoint: missing tensor '" + std::string(name) + "'");
  }
};

namespace detail {

inline void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

inline void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xffu));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint64_t uint(int width) {
    need(static_cast<std::size_t>(width));
    std::uint64_t v = 0;
    for (int i = 0; i < width; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes_[pos_ + static_cast<std::size_t>(i)])) << (8 * i);
    }
    pos_ += static_cast<std::size_t>(width);
    return v;
  }

  std::string_view take(std::size_t n) {
    need(n);
    const auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

  std::size_t pos() const noexcept { return pos_; }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw DataError("checkpoint: truncated file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

inline std::uint32_t crc32(std::string_view bytes) {
  boost::crc_32_type crc;
  crc.process_bytes(bytes.data(), bytes.size());
  return crc.checksum();
}

}  // namespace detail

inline std::string serialize(const Checkpoint& c) {
  std::string out(kCheckpointMagic, 4);
  detail::put_u32(out, kCheckpointVersion);
  const std::string cfg = c.config.dump();
  detail::put_u64(out, cfg.size());
  out += cfg;
  detail::put_u32(out, static_cast<std::uint32_t>(c.tensors.size()));
  for (const auto& t : c.tensors) {
    detail::put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    detail::put_u64(out, static_cast<std::uint64_t>(t.value.rows()));
    detail::put_u64(out, static_cast<std::uint64_t>(t.value.cols()));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) detail::put_u64(out, std::bit_cast<std::uint64_t>(t.value.data()[i]));
  }
  detail::put_u32(out, detail::crc32(out));
  return out;
}

inline Checkpoint deserialize(std::string_view bytes) {
  if (bytes.size() < 4 + 4 + 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const std::string_view body = bytes.substr(0, bytes.size() - 4);
  detail::Reader tail(bytes.substr(bytes.size() - 4));
  if (tail.uint(4) != detail::crc32(body)) throw DataError("checkpoint: checksum mismatch");

  detail::Reader r(body);
  r.take(4);
  const auto version = r.uint(4);
  if (version != kCheckpointVersion) throw DataError("checkpoint: unsupported version " + std::to_string(version));
  Checkpoint c;
  const auto cfg_len = r.uint(8);
  try {
    c.config = nlohmann::json::parse(r.take(cfg_len));
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config JSON: ") + e.what());
  }
  const auto count = r.uint(4);
  for (std::uint64_t k = 0; k < count; ++k) {
    NamedTensor t;
    t.name = std::string(r.take(r.uint(4)));
    const auto rows = r.uint(8);
    const auto cols = r.uint(8);
    if (cols != 0 && rows > (body.size() - r.pos()) / 8 / cols) throw DataError("checkpoint: tensor larger than file");
    t.value.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index i = 0; i < t.value.size(); ++i) t.value.data()[i] = std::bit_cast<double>(r.uint(8));
    c.tensors.push_back(std::move(t));
  }
  if (r.pos() != body.size()) throw DataError("checkpoint: trailing bytes");
  return c;
}

inline void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) { atomic_write(path, serialize(c)); }

inline Checkpoint load_checkpoint(const std::filesystem::path& path) { return deserialize(read_file(path)); }

// ---------------------------------------------------------------------------
// TrainedModel <-> Checkpoint.

inline Checkpoint to_checkpoint(const TrainedModel& m, const nlohmann::json& extra = nlohmann::json::object()) {
  Checkpoint c;
  c.config = {{"train", m.config.to_json()},
              {"n_students", m.net->n_students()},
              {"n_exercises", m.net->n_exercises()},
              {"n_concepts", m.net->n_concepts()},
              {"best_epoch", m.best_epoch},
              {"best_valid_auc", m.best_valid_auc}};
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& e : m.history) hist.push_back({e.epoch, e.train_loss, e.valid_auc, e.valid_acc});
  c.config["history"] = hist;
  c.config["run"] = extra;
  for (Tensor* t : m.net->parameters()) c.tensors.push_back({t->name, t->value});
  c.tensors.push_back({"q", m.q.to_dense()});
  c.tensors.push_back({"snapshot.latent", m.latent});
  c.tensors.push_back({"snapshot.concept", m.concept_emb});
  return c;
}

inline TrainedModel from_checkpoint(const Checkpoint& c) {
  TrainedModel m;
  try {
    m.config = TrainConfig::from_json(c.config.at("train"));
    const Matrix& qd = c.tensor("q");
    QMatrix q(static_cast<std::int32_t>(qd.rows()), static_cast<std::int32_t>(qd.cols()));
    for (Eigen::Index e = 0; e < qd.rows(); ++e) {
      for (Eigen::Index k = 0; k < qd.cols(); ++k) {
        if (qd(e, k) != 0.0) q.set(static_cast<std::int32_t>(e), static_cast<std::int32_t>(k));
      }
    }
    m.q = q;
    m.net = std::make_unique<Network>(m.config, q, c.config.at("n_students").get<std::int32_t>());
    for (Tensor* t : m.net->parameters()) {
      const Matrix& v = c.tensor(t->name);
      if (v.rows() != t->value.rows() || v.cols() != t->value.cols()) {
        throw DataError("checkpoint: tensor '" + t->name + "' has the wrong shape");
      }
      t->value = v;
    }
    m.latent = c.tensor("snapshot.latent");
    m.concept_emb = c.tensor("snapshot.concept");
    m.best_epoch = c.config.at("best_epoch").get<int>();
    const auto& auc = c.config.at("best_valid_auc");
    m.best_valid_auc = auc.is_null() ? std::numeric_limits<double>::quiet_NaN() : auc.get<double>();
    for (const auto& e : c.config.at("history")) {
      auto num = [](const nlohmann::json& j) {
        return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>();
      };
      m.history.push_back({e.at(0).get<int>(), num(e.at(1)), num(e.at(2)), num(e.at(3))});
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad config: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("checkpoint: bad config: ") + e.what());
  }
  return m;
}

}  // namespace orcdf
