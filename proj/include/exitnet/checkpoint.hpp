#pragma once

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "exitnet/errors.hpp"
#include "exitnet/model.hpp"

namespace exitnet {

inline std::string isc_transform_name(IscTransform t) {
  return t == IscTransform::linear ? "linear" : "identity";
}

inline IscTransform isc_transform_from_name(const std::string& s) {
  if (s == "identity") return IscTransform::identity;
  if (s == "linear") return IscTransform::linear;
  throw ConfigError("unknown isc_transform: " + s);
}

/// Canonical key=value rendering of a ModelConfig, one key per line, fixed
/// order. Embedded in checkpoints so a file is self-describing.
inline std::string model_config_to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "input_dim=" << cfg.input_dim << "\n";
  os << "num_classes=" << cfg.num_classes << "\n";
  os << "k=" << cfg.k << "\n";
  os << "block_widths=";
  for (std::size_t i = 0; i < cfg.block_widths.size(); ++i) {
    if (i) os << ",";
    os << cfg.block_widths[i];
  }
  os << "\n";
  os << "head_hidden=" << cfg.head_hidden << "\n";
  os << "isc_enabled=" << (cfg.isc_enabled ? 1 : 0) << "\n";
  os << "isc_transform=" << isc_transform_name(cfg.isc_transform) << "\n";
  return os.str();
}

inline ModelConfig model_config_from_text(const std::string& text) {
  ModelConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw FormatError("model config: missing '=' in line: " + line);
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    if (key == "input_dim")
      cfg.input_dim = std::stoi(val);
    else if (key == "num_classes")
      cfg.num_classes = std::stoi(val);
    else if (key == "k")
      cfg.k = std::stoi(val);
    else if (key == "block_widths") {
      cfg.block_widths.clear();
      std::istringstream vs(val);
      std::string tok;
      while (std::getline(vs, tok, ','))
        cfg.block_widths.push_back(std::stoi(tok));
    } else if (key == "head_hidden")
      cfg.head_hidden = std::stoi(val);
    else if (key == "isc_enabled")
      cfg.isc_enabled = (val == "1" || val == "true");
    else if (key == "isc_transform")
      cfg.isc_transform = isc_transform_from_name(val);
    else
      throw FormatError("model config: unknown key: " + key);
  }
  cfg.validate();
  return cfg;
}

namespace detail {

constexpr char kCheckpointMagic[8] = {'M', 'E', 'X', 'N', 'E', 'T', 'C', 'K'};
constexpr std::uint32_t kCheckpointVersion = 1;

inline void write_bytes(std::ostream& os, const void* p, std::size_t n) {
  os.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  write_bytes(os, b, 4);
}

inline void write_i64(std::ostream& os, std::int64_t v) {
  auto u = static_cast<std::uint64_t>(v);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  write_bytes(os, b, 8);
}

inline void write_f64(std::ostream& os, double v) {
  std::uint64_t u;
  std::memcpy(&u, &v, 8);
  write_i64(os, static_cast<std::int64_t>(u));
}

struct ByteReader {
  std::istream& is;
  std::string where;
  std::size_t offset = 0;

  void read(void* p, std::size_t n) {
    is.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
    if (static_cast<std::size_t>(is.gcount()) != n)
      throw FormatError(where + ": truncated at byte offset " +
                        std::to_string(offset) + " (wanted " +
                        std::to_string(n) + " more bytes)");
    offset += n;
  }

  std::uint32_t u32() {
    unsigned char b[4];
    read(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(b[i]) << (8 * i);
    return v;
  }

  std::int64_t i64() {
    unsigned char b[8];
    read(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
    return static_cast<std::int64_t>(v);
  }

  double f64() {
    std::uint64_t u = static_cast<std::uint64_t>(i64());
    double d;
    std::memcpy(&d, &u, 8);
    return d;
  }

  std::string str(std::size_t n) {
    std::string s(n, '\0');
    if (n) read(s.data(), n);
    return s;
  }
};

}  // namespace detail

inline void save_checkpoint(const MultiExitModel& model,
                            const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw FormatError("cannot open for write: " + path);
  detail::write_bytes(os, detail::kCheckpointMagic, 8);
  detail::write_u32(os, detail::kCheckpointVersion);
  std::string cfg_text = model_config_to_text(model.config());
  detail::write_u32(os, static_cast<std::uint32_t>(cfg_text.size()));
  detail::write_bytes(os, cfg_text.data(), cfg_text.size());
  detail::write_u32(os, static_cast<std::uint32_t>(model.params().size()));
  for (const auto& p : model.params()) {
    detail::write_u32(os, static_cast<std::uint32_t>(p.name.size()));
    detail::write_bytes(os, p.name.data(), p.name.size());
    detail::write_u32(os, static_cast<std::uint32_t>(p.tensor.rank()));
    for (int d = 0; d < p.tensor.rank(); ++d)
      detail::write_i64(os, p.tensor.dim(d));
    const double* v = p.tensor.data();
    for (int i = 0; i < p.tensor.size(); ++i) detail::write_f64(os, v[i]);
  }
  os.flush();
  if (!os) throw FormatError("write failed: " + path);
}

inline MultiExitModel load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open: " + path);
  detail::ByteReader r{is, path};
  std::string magic = r.str(8);
  if (std::memcmp(magic.data(), detail::kCheckpointMagic, 8) != 0)
    throw FormatError(path + ": bad magic, not a checkpoint file");
  std::uint32_t version = r.u32();
  if (version != detail::kCheckpointVersion)
    throw FormatError(path + ": unsupported checkpoint version " +
                      std::to_string(version));
  std::uint32_t cfg_len = r.u32();
  ModelConfig cfg = model_config_from_text(r.str(cfg_len));
  // Rebuild with a fixed seed, then overwrite every value from the file.
  MultiExitModel model = MultiExitModel::build(cfg, 0);
  std::uint32_t n = r.u32();
  if (n != model.params().size())
    throw FormatError(path + ": parameter count mismatch (file has " +
                      std::to_string(n) + ", config implies " +
                      std::to_string(model.params().size()) + ")");
  for (std::uint32_t pi = 0; pi < n; ++pi) {
    std::uint32_t name_len = r.u32();
    std::string name = r.str(name_len);
    const auto& expect = model.params()[pi];
    if (name != expect.name)
      throw FormatError(path + ": parameter " + std::to_string(pi) +
                        " named '" + name + "', expected '" + expect.name +
                        "'");
    std::uint32_t ndim = r.u32();
    if (static_cast<int>(ndim) != expect.tensor.rank())
      throw FormatError(path + ": " + name + " rank mismatch");
    std::int64_t count = 1;
    for (std::uint32_t d = 0; d < ndim; ++d) {
      std::int64_t dim = r.i64();
      if (dim != expect.tensor.dim(static_cast<int>(d)))
        throw FormatError(path + ": " + name + " shape mismatch");
      count *= dim;
    }
    Tensor dst = expect.tensor;  // shared buffer
    double* v = dst.data();
    for (std::int64_t i = 0; i < count; ++i) v[i] = r.f64();
  }
  return model;
}

}  // namespace exitnet
