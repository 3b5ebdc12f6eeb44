#include "pgp/checkpoint.hpp"

#include <bit>
#include <cstdint>
#include <cstring>

#include "pgp/dataset.hpp"
#include "pgp/error.hpp"

namespace pgp::checkpoint {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'P', 'G', 'P', 'C', 'K', 'P', 'T', '\0'};

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, unsigned version) : bytes_(bytes), version_(version) {}
  void set_version(unsigned v) { version_ = v; }

  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint32_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError(version_, "truncated file");
  }
  const std::string& bytes_;
  std::size_t pos_ = 0;
  unsigned version_;
};

}  // namespace

std::string serialize(const model::ModelSpec& spec, const model::Params& params) {
  std::string out(kMagic, sizeof(kMagic));
  put<std::uint32_t>(out, kFormatVersion);
  put_string(out, spec.fingerprint());
  std::uint32_t count = 0;
  params.visit([&](const std::string&, const num::Matrix&) { ++count; });
  put<std::uint32_t>(out, count);
  params.visit([&](const std::string& name, const num::Matrix& m) {
    put_string(out, name);
    put<std::uint64_t>(out, m.rows());
    put<std::uint64_t>(out, m.cols());
    for (double v : m.data()) put<double>(out, v);
  });
  return out;
}

model::Params deserialize(const std::string& bytes, const model::ModelSpec& spec) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw CheckpointError(0, "not a checkpoint (bad magic)");
  }
  const std::string body = bytes.substr(sizeof(kMagic));
  Reader r(body, 0);
  const auto version = r.get<std::uint32_t>();
  r.set_version(version);
  if (version != kFormatVersion) {
    throw CheckpointError(version, "unsupported version; this build reads v" + std::to_string(kFormatVersion));
  }
  const std::string stored = r.get_string();
  if (stored != spec.fingerprint()) {
    throw CheckpointError(version, "model mismatch: checkpoint has [" + stored + "], config expects [" +
                                       spec.fingerprint() + "]");
  }
  model::Params p = model::init_params(spec, 0);
  const auto count = r.get<std::uint32_t>();
  std::uint32_t seen = 0;
  p.visit([&](const std::string& name, num::Matrix& m) {
    if (seen++ >= count) throw CheckpointError(version, "missing parameter " + name);
    const std::string got = r.get_string();
    const auto rows = r.get<std::uint64_t>();
    const auto cols = r.get<std::uint64_t>();
    if (got != name || rows != m.rows() || cols != m.cols()) {
      throw CheckpointError(version, "parameter " + got + " " + std::to_string(rows) + "x" + std::to_string(cols) +
                                         " does not match " + name + " " + num::shape_str(m));
    }
    for (double& v : m.data()) v = r.get<double>();
  });
  if (seen != count || !r.done()) throw CheckpointError(version, "unexpected trailing parameters");
  return p;
}

void save(const std::filesystem::path& path, const model::ModelSpec& spec, const model::Params& params) {
  dataset::write_text(path, serialize(spec, params));
}

model::Params load(const std::filesystem::path& path, const model::ModelSpec& spec) {
  return deserialize(dataset::read_text(path), spec);
}

}  // namespace pgp::checkpoint
