#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <type_traits>
#include <vector>

#include "sprl/common/errors.h"
#include "sprl/nn/params.h"

namespace sprl {

// Versioned binary parameter container.
//   header: magic "SPRL", format version u32, 64-bit flag u32
//   records: name length u32 + UTF-8 name, rank u32, dims u64 each,
//            raw little-endian values
// Optimizer state rides along as extra records named "<param>#m" /
// "<param>#v", and the shared step counter as "#step"; loaders that only
// want weights can ignore the '#' records.
namespace ckpt {

inline constexpr char kMagic[4] = {'S', 'P', 'R', 'L'};
inline constexpr uint32_t kVersion = 1;

inline void put_u32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
inline void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}

template <class S>
void put_values(std::string& out, const std::vector<S>& values) {
  static_assert(sizeof(S) == 4 || sizeof(S) == 8);
  for (S v : values) {
    typename std::conditional<sizeof(S) == 4, uint32_t, uint64_t>::type bits;
    std::memcpy(&bits, &v, sizeof(S));
    if constexpr (sizeof(S) == 4)
      put_u32(out, bits);
    else
      put_u64(out, bits);
  }
}

class Reader {
 public:
  explicit Reader(const std::string& path) : path_(path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("checkpoint: cannot open '" + path + "'");
    buf_.assign(std::istreambuf_iterator<char>(in),
                std::istreambuf_iterator<char>());
  }

  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(uint8_t(buf_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= uint64_t(uint8_t(buf_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string bytes(size_t n) {
    need(n);
    std::string s = buf_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  template <class S>
  std::vector<S> values(size_t n) {
    std::vector<S> out(n);
    for (size_t i = 0; i < n; ++i) {
      if constexpr (sizeof(S) == 4) {
        uint32_t bits = u32();
        std::memcpy(&out[i], &bits, 4);
      } else {
        uint64_t bits = u64();
        std::memcpy(&out[i], &bits, 8);
      }
    }
    return out;
  }
  bool eof() const { return pos_ >= buf_.size(); }

 private:
  void need(size_t n) {
    if (pos_ + n > buf_.size())
      throw IoError("checkpoint: truncated file '" + path_ + "'");
  }
  std::string path_;
  std::string buf_;
  size_t pos_ = 0;
};

template <class S>
void append_record(std::string& out, const std::string& name,
                   const Tensor<S>& t) {
  put_u32(out, uint32_t(name.size()));
  out.append(name);
  put_u32(out, 2);  // rank
  put_u64(out, uint64_t(t.rows));
  put_u64(out, uint64_t(t.cols));
  put_values(out, t.data);
}

}  // namespace ckpt

template <class S>
void save_checkpoint(const std::string& path, const ParamSet<S>& ps) {
  std::string out;
  out.append(ckpt::kMagic, 4);
  ckpt::put_u32(out, ckpt::kVersion);
  ckpt::put_u32(out, sizeof(S) == 8 ? 1 : 0);
  for (const auto& p : ps.all()) {
    ckpt::append_record(out, p.name, p.value);
    ckpt::append_record(out, p.name + "#m", p.m);
    ckpt::append_record(out, p.name + "#v", p.v);
  }
  Tensor<S> step(1, 1, S(ps.step_count()));
  ckpt::append_record(out, "#step", step);

  std::string tmp = path + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("checkpoint: cannot write '" + tmp + "'");
    f.write(out.data(), std::streamsize(out.size()));
    if (!f) throw IoError("checkpoint: write failed for '" + tmp + "'");
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0)
    throw IoError("checkpoint: cannot move '" + tmp + "' to '" + path + "'");
}

// Fills an already-constructed ParamSet (shapes must match). Optimizer
// moments and the step counter are restored when present.
template <class S>
void load_checkpoint(const std::string& path, ParamSet<S>& ps) {
  ckpt::Reader r(path);
  if (r.bytes(4) != std::string(ckpt::kMagic, 4))
    throw IoError("checkpoint: bad magic in '" + path + "'");
  uint32_t version = r.u32();
  if (version != ckpt::kVersion)
    throw IoError("checkpoint: unsupported version " +
                  std::to_string(version) + " in '" + path + "'");
  uint32_t wide = r.u32();
  if ((sizeof(S) == 8) != (wide == 1))
    throw IoError("checkpoint: precision mismatch in '" + path + "'");

  size_t loaded = 0;
  while (!r.eof()) {
    std::string name = r.bytes(r.u32());
    uint32_t rank = r.u32();
    uint64_t n = 1;
    std::vector<uint64_t> dims(rank);
    for (uint32_t i = 0; i < rank; ++i) {
      dims[i] = r.u64();
      n *= dims[i];
    }
    std::vector<S> values = r.template values<S>(n);

    if (name == "#step") {
      ps.set_step_count(int64_t(values.at(0)));
      continue;
    }
    std::string base = name;
    Tensor<S> Param<S>::* field = &Param<S>::value;
    if (auto hash = name.find('#'); hash != std::string::npos) {
      base = name.substr(0, hash);
      std::string suffix = name.substr(hash + 1);
      if (suffix == "m")
        field = &Param<S>::m;
      else if (suffix == "v")
        field = &Param<S>::v;
      else
        throw IoError("checkpoint: unknown record '" + name + "'");
    }
    if (!ps.has(base))
      throw IoError("checkpoint: unexpected parameter '" + base + "' in '" +
                    path + "'");
    Param<S>& p = ps.at(base);
    Tensor<S>& dst = p.*field;
    if (rank != 2 || dims[0] != uint64_t(dst.rows) ||
        dims[1] != uint64_t(dst.cols))
      throw IoError("checkpoint: shape mismatch for '" + name + "'");
    dst.data = std::move(values);
    if (field == &Param<S>::value) ++loaded;
  }
  if (loaded != ps.count())
    throw IoError("checkpoint: '" + path + "' is missing parameters");
}

}  // namespace sprl
