// Copyright 2026 The Flowtune Authors
// SPDX-License-Identifier: Apache-2.0

#include "flowtune/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace flowtune {

namespace {

constexpr char kMagic[8] = {'F', 'L', 'O', 'W', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kVersion = 1;

// Explicit little-endian byte order, independent of host endianness.
void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }

void put_f64(std::string& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

void put_vec(std::string& out, const std::vector<double>& v) {
  put_u64(out, v.size());
  for (double x : v) put_f64(out, x);
}

class Reader {
 public:
  explicit Reader(std::string data) : data_(std::move(data)) {}

  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 8;
    return v;
  }

  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) {
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    }
    pos_ += 4;
    return v;
  }

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(static_cast<unsigned char>(data_[pos_++]));
  }

  double f64() { return std::bit_cast<double>(u64()); }

  std::vector<double> vec() {
    const std::uint64_t n = u64();
    if (n > (data_.size() - pos_) / 8) throw IoError("checkpoint: truncated vector");
    std::vector<double> v(n);
    for (std::uint64_t i = 0; i < n; ++i) v[i] = f64();
    return v;
  }

  void raw(char* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, data_.data() + pos_, n);
    pos_ += n;
  }

  bool done() const { return pos_ == data_.size(); }

 private:
  void need(std::size_t n) {
    if (data_.size() - pos_ < n) throw IoError("checkpoint: truncated file");
  }

  std::string data_;
  std::size_t pos_ = 0;
};

void put_series(std::string& out, const PvSeries& s) { put_vec(out, s.values()); }

PvSeries read_series(Reader& r) {
  PvSeries s;
  s.restore(r.vec());
  return s;
}

}  // namespace

bool Checkpoint::operator==(const Checkpoint& other) const {
  const auto series_eq = [](const PvSeries& a, const PvSeries& b) {
    return a.values() == b.values();
  };
  return flow.variant == other.flow.variant &&
         flow.max_retrievals == other.flow.max_retrievals && policies == other.policies &&
         series_eq(pv.answer_f1, other.pv.answer_f1) &&
         series_eq(pv.support_f1, other.pv.support_f1) &&
         series_eq(pv.sufficiency, other.pv.sufficiency) &&
         series_eq(pv.pairs_per_episode, other.pv.pairs_per_episode) &&
         series_eq(pv.dpo_loss, other.pv.dpo_loss) && episodes_seen == other.episodes_seen &&
         gate_best == other.gate_best && gate_has_record == other.gate_has_record &&
         config_hash == other.config_hash;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::string out;
  out.append(kMagic, sizeof(kMagic));
  put_u32(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(ckpt.flow.variant));
  put_u32(out, static_cast<std::uint32_t>(ckpt.flow.max_retrievals));
  put_u64(out, ckpt.episodes_seen);
  put_f64(out, ckpt.gate_best);
  put_u8(out, ckpt.gate_has_record ? 1 : 0);
  put_u64(out, ckpt.config_hash);

  for (const NodePolicy& p : ckpt.policies.policies) {
    put_u8(out, static_cast<std::uint8_t>(p.role));
    put_vec(out, p.weights);
    put_vec(out, p.ref_weights);
    put_f64(out, p.opt.alpha);
    put_f64(out, p.opt.epsilon);
    put_vec(out, p.opt.w1);
    put_vec(out, p.opt.theta);
    put_vec(out, p.opt.grad_abs_sum);
    put_vec(out, p.opt.grad_abs_max);
    put_vec(out, p.opt.reward);
  }

  put_series(out, ckpt.pv.answer_f1);
  put_series(out, ckpt.pv.support_f1);
  put_series(out, ckpt.pv.sufficiency);
  put_series(out, ckpt.pv.pairs_per_episode);
  put_series(out, ckpt.pv.dpo_loss);

  const std::filesystem::path target(path);
  const std::filesystem::path tmp = target.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot open for writing: " + tmp.string());
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw IoError("short write: " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) throw IoError("rename failed: " + ec.message());
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open checkpoint: " + path);
  std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(std::move(data));

  char magic[8];
  r.raw(magic, sizeof(magic));
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: bad magic");
  }
  const std::uint32_t version = r.u32();
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }

  Checkpoint ckpt;
  const std::uint8_t variant = r.u8();
  if (variant > static_cast<std::uint8_t>(FlowVariant::Full)) {
    throw IoError("checkpoint: bad flow variant");
  }
  ckpt.flow.variant = static_cast<FlowVariant>(variant);
  ckpt.flow.max_retrievals = static_cast<int>(r.u32());
  ckpt.episodes_seen = r.u64();
  ckpt.gate_best = r.f64();
  ckpt.gate_has_record = r.u8() != 0;
  ckpt.config_hash = r.u64();

  for (int i = 0; i < kNumRoles; ++i) {
    NodePolicy& p = ckpt.policies.policies[static_cast<std::size_t>(i)];
    const std::uint8_t role = r.u8();
    if (role != static_cast<std::uint8_t>(i)) throw IoError("checkpoint: roles out of order");
    p.role = static_cast<NodeRole>(role);
    p.weights = r.vec();
    p.ref_weights = r.vec();
    p.opt.alpha = r.f64();
    p.opt.epsilon = r.f64();
    p.opt.w1 = r.vec();
    p.opt.theta = r.vec();
    p.opt.grad_abs_sum = r.vec();
    p.opt.grad_abs_max = r.vec();
    p.opt.reward = r.vec();
  }

  ckpt.pv.answer_f1 = read_series(r);
  ckpt.pv.support_f1 = read_series(r);
  ckpt.pv.sufficiency = read_series(r);
  ckpt.pv.pairs_per_episode = read_series(r);
  ckpt.pv.dpo_loss = read_series(r);

  if (!r.done()) throw IoError("checkpoint: trailing bytes");
  return ckpt;
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace flowtune
