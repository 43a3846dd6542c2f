// Copyright 2026 The MuseBar Authors
// SPDX-License-Identifier: Apache-2.0

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <nlohmann/json.hpp>

#include "musebar/error.hpp"
#include "musebar/model.hpp"

namespace musebar {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[4] = {'M', 'B', 'C', 'K'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint8_t kDtypeF32 = 0;

template <typename U>
void put(std::string& out, U value) {
  char buf[sizeof(U)];
  std::memcpy(buf, &value, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string& data) : data_(data) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v;
    std::memcpy(&v, data_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  void need(std::size_t n) const {
    if (data_.size() - pos_ < n) throw Error("checkpoint is truncated at byte " + std::to_string(pos_));
  }
  const std::string& data_;
  std::size_t pos_ = 0;
};

}  // namespace

void save_checkpoint(const Params& params, const ModelConfig& config, const std::string& path) {
  std::string out(kMagic, 4);
  put<std::uint32_t>(out, kVersion);
  const std::string cfg = config.to_json();
  put<std::uint64_t>(out, cfg.size());
  out += cfg;
  std::uint32_t n = 0;
  params.visit([&n](const std::string&, const MatrixT<float>&, ParamGroup) { ++n; });
  put<std::uint32_t>(out, n);
  // Directory entry: name, dtype, rank, dims, byte offset from the start of the data block.
  std::uint64_t offset = 0;
  params.visit([&out, &offset](const std::string& name, const MatrixT<float>& m, ParamGroup) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint8_t>(out, kDtypeF32);
    put<std::uint8_t>(out, 2);
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.rows()));
    put<std::uint64_t>(out, static_cast<std::uint64_t>(m.cols()));
    put<std::uint64_t>(out, offset);
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(float);
  });
  params.visit([&out](const std::string&, const MatrixT<float>& m, ParamGroup) {
    out.append(reinterpret_cast<const char*>(m.data()), static_cast<std::size_t>(m.size()) * sizeof(float));
  });
  const std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write checkpoint " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error("cannot write checkpoint " + path);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot move checkpoint into place: " + path);
}

std::pair<Params, ModelConfig> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open checkpoint " + path);
  const std::string data((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(data);
  if (r.bytes(4) != std::string(kMagic, 4)) throw Error("not a checkpoint (bad magic): " + path);
  const auto version = r.get<std::uint32_t>();
  if (version != kVersion) throw Error("unsupported checkpoint version " + std::to_string(version));
  const auto cfg_len = r.get<std::uint64_t>();
  if (cfg_len > r.remaining()) throw Error("checkpoint is truncated (config)");
  const ModelConfig config = ModelConfig::from_json(r.bytes(static_cast<std::size_t>(cfg_len)));
  config.validate();

  Params params = init_params<float>(config, 0);
  std::uint32_t expected = 0;
  params.visit([&expected](const std::string&, const MatrixT<float>&, ParamGroup) { ++expected; });
  const auto n = r.get<std::uint32_t>();
  if (n != expected) throw Error("checkpoint tensor count " + std::to_string(n) + " does not match config");
  std::uint64_t offset = 0;
  params.visit([&r, &offset](const std::string& name, const MatrixT<float>& m, ParamGroup) {
    const auto len = r.get<std::uint32_t>();
    const std::string stored = r.bytes(len);
    const auto dtype = r.get<std::uint8_t>();
    const auto rank = r.get<std::uint8_t>();
    if (dtype != kDtypeF32 || rank != 2) throw Error("checkpoint tensor " + stored + " has unsupported dtype or rank");
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    const auto at = r.get<std::uint64_t>();
    if (stored != name || rows != static_cast<std::uint64_t>(m.rows()) ||
        cols != static_cast<std::uint64_t>(m.cols()) || at != offset) {
      throw Error("checkpoint tensor directory mismatch at " + name);
    }
    offset += static_cast<std::uint64_t>(m.size()) * sizeof(float);
  });
  params.visit([&r](const std::string&, MatrixT<float>& m, ParamGroup) {
    const std::string raw = r.bytes(static_cast<std::size_t>(m.size()) * sizeof(float));
    std::memcpy(m.data(), raw.data(), raw.size());
  });
  if (r.remaining() != 0) throw Error("checkpoint has trailing bytes");
  return {std::move(params), config};
}

Params load_checkpoint(const std::string& path, const ModelConfig& expected) {
  auto [params, stored] = load_checkpoint(path);
  if (!(stored == expected)) {
    const auto a = nlohmann::ordered_json::parse(stored.to_json());
    const auto b = nlohmann::ordered_json::parse(expected.to_json());
    for (const auto& [key, value] : b.items()) {
      if (a.at(key) != value) {
        throw Error("checkpoint config mismatch: " + key + " is " + a.at(key).dump() + ", expected " + value.dump());
      }
    }
    throw Error("checkpoint config mismatch");
  }
  return std::move(params);
}

}  // namespace musebar
