#include "usfgan/checkpoint.hpp"

#include <cstring>
#include <fstream>
#include <unordered_map>

namespace usfgan::nn {

namespace {

constexpr char kMagic[4] = {'U', 'S', 'C', 'K'};
constexpr uint32_t kVersion = 1;

void put_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void put_i64(std::ostream& os, int64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i)
    b[i] = static_cast<unsigned char>(static_cast<uint64_t>(v) >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_str(std::ostream& os, const std::string& s) {
  put_u32(os, static_cast<uint32_t>(s.size()));
  os.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_f64s(std::ostream& os, const std::vector<double>& v) {
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(double)));
}

struct Reader {
  std::ifstream is;
  std::string path;

  void read(void* dst, size_t n) {
    is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    if (is.gcount() != static_cast<std::streamsize>(n))
      throw DataError("checkpoint truncated: " + path);
  }
  uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(b[i]) << (8 * i);
    return v;
  }
  int64_t i64() {
    unsigned char b[8];
    read(b, 8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(b[i]) << (8 * i);
    return static_cast<int64_t>(v);
  }
  std::string str() {
    std::string s(u32(), '\0');
    if (!s.empty()) read(s.data(), s.size());
    return s;
  }
  std::vector<double> f64s(size_t n) {
    std::vector<double> v(n);
    if (n) read(v.data(), n * sizeof(double));
    return v;
  }
};

Reader open_checkpoint(const std::string& path) {
  Reader r;
  r.path = path;
  r.is.open(path, std::ios::binary);
  if (!r.is) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  r.is.read(magic, 4);
  if (r.is.gcount() != 4 || std::memcmp(magic, kMagic, 4) != 0)
    throw DataError("not a checkpoint file: " + path);
  if (r.u32() != kVersion)
    throw DataError("unsupported checkpoint version: " + path);
  return r;
}

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<Parameter<double>*>& params,
                     const CheckpointMeta& meta) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw DataError("cannot write checkpoint: " + path);
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_i64(os, meta.iteration);
  put_str(os, meta.config);
  put_u32(os, static_cast<uint32_t>(params.size()));
  for (const auto* p : params) {
    const auto& st = *p->tensor.storage();
    put_str(os, p->name);
    put_i64(os, st.shape.d0);
    put_i64(os, st.shape.d1);
    put_i64(os, st.shape.d2);
    put_i64(os, p->step);
    put_f64s(os, st.val);
    if (p->m.empty()) {
      std::vector<double> zeros(st.val.size(), 0.0);
      put_f64s(os, zeros);
      put_f64s(os, zeros);
    } else {
      put_f64s(os, p->m);
      put_f64s(os, p->v);
    }
  }
  if (!os) throw DataError("cannot write checkpoint: " + path);
}

CheckpointMeta load_checkpoint(const std::string& path,
                               const std::vector<Parameter<double>*>& params) {
  Reader r = open_checkpoint(path);
  CheckpointMeta meta;
  meta.iteration = r.i64();
  meta.config = r.str();
  const uint32_t n = r.u32();
  if (n != params.size())
    throw DataError("checkpoint parameter count mismatch: " + path);

  std::unordered_map<std::string, Parameter<double>*> by_name;
  for (auto* p : params) by_name[p->name] = p;

  for (uint32_t i = 0; i < n; ++i) {
    const std::string name = r.str();
    Shape shape{r.i64(), r.i64(), r.i64()};
    const int64_t step = r.i64();
    auto it = by_name.find(name);
    if (it == by_name.end())
      throw DataError("checkpoint parameter mismatch: " + name);
    Parameter<double>* p = it->second;
    if (!(p->tensor.shape() == shape))
      throw DataError("checkpoint parameter mismatch: " + name);
    const size_t count = static_cast<size_t>(shape.numel());
    p->tensor.storage()->val = r.f64s(count);
    p->m = r.f64s(count);
    p->v = r.f64s(count);
    p->step = step;
    p->tensor.storage()->grad.clear();
  }
  return meta;
}

CheckpointMeta peek_checkpoint(const std::string& path) {
  Reader r = open_checkpoint(path);
  CheckpointMeta meta;
  meta.iteration = r.i64();
  meta.config = r.str();
  return meta;
}

}  // namespace usfgan::nn
