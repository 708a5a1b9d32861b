#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "exitnet/checkpoint.hpp"
#include "exitnet/dataset.hpp"
#include "exitnet/errors.hpp"
#include "exitnet/model.hpp"
#include "exitnet/train.hpp"

namespace exitnet {

/// Everything one reproducible run needs: dataset recipe, architecture, and
/// training schedule. Round-trips through a plain key=value file.
struct RunConfig {
  // dataset
  DatasetKind dataset = DatasetKind::synthetic_easy_hard;
  std::string idx_images;
  std::string idx_labels;
  int n_train = 10000;
  int n_val = 2000;
  int n_test = 2000;
  int input_dim = 16;
  int classes = 10;
  double difficulty_mix = 0.3;
  std::uint64_t data_seed = 7;
  // architecture
  int k = 5;
  std::vector<int> block_widths = {64, 64, 64, 64, 64};
  int head_hidden = 0;
  bool isc = false;
  IscTransform isc_transform = IscTransform::identity;
  // training
  bool ge = true;
  bool ofa = true;
  std::vector<double> lambda;  // empty = all ones
  double alpha = 0.5;
  double temperature = 2.0;
  double lr0 = 0.1;
  double momentum = 0.9;
  double weight_decay = 1e-4;
  int phase1_epochs = 40;
  int phase2_epochs = 20;
  std::vector<double> lr_drop_points = {0.5, 0.75};
  int batch_size = 64;
  std::uint64_t seed = 1;

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.input_dim = input_dim;
    mc.num_classes = classes;
    mc.k = k;
    mc.block_widths = block_widths;
    mc.head_hidden = head_hidden;
    mc.isc_enabled = isc;
    mc.isc_transform = isc_transform;
    return mc;
  }

  TrainConfig train_config() const {
    TrainConfig tc;
    tc.lambda = lambda;
    tc.alpha = alpha;
    tc.temperature = temperature;
    tc.ge_enabled = ge;
    tc.isc_enabled = isc;
    tc.ofa_enabled = ofa;
    tc.lr0 = lr0;
    tc.momentum = momentum;
    tc.weight_decay = weight_decay;
    tc.phase1_epochs = phase1_epochs;
    tc.phase2_epochs = phase2_epochs;
    tc.lr_drop_points = lr_drop_points;
    tc.batch_size = batch_size;
    tc.seed = seed;
    return tc;
  }

  DatasetSpec dataset_spec() const {
    DatasetSpec ds;
    ds.kind = dataset;
    ds.idx_images = idx_images;
    ds.idx_labels = idx_labels;
    ds.n_train = n_train;
    ds.n_val = n_val;
    ds.n_test = n_test;
    ds.input_dim = input_dim;
    ds.classes = classes;
    ds.difficulty_mix = difficulty_mix;
    ds.seed = data_seed;
    return ds;
  }

  void validate() const {
    model_config().validate();
    train_config().validate(k);
    dataset_spec().validate();
  }
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) out.push_back(std::stoi(tok));
  return out;
}

inline std::vector<double> parse_double_list(const std::string& s) {
  std::vector<double> out;
  std::istringstream is(s);
  std::string tok;
  while (std::getline(is, tok, ','))
    if (!tok.empty()) out.push_back(std::stod(tok));
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& s) {
  if (s == "1" || s == "true") return true;
  if (s == "0" || s == "false") return false;
  throw ConfigError("config: " + key + " must be 0/1/true/false, got " + s);
}

template <typename T>
inline std::string join_list(const std::vector<T>& xs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) os << ",";
    if constexpr (std::is_same_v<T, double>)
      os << fmt_double(xs[i]);
    else
      os << xs[i];
  }
  return os.str();
}

inline std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace detail

inline void apply_config_line(RunConfig& cfg, const std::string& key,
                              const std::string& val) {
  try {
    if (key == "dataset") cfg.dataset = dataset_kind_from_name(val);
    else if (key == "idx_images") cfg.idx_images = val;
    else if (key == "idx_labels") cfg.idx_labels = val;
    else if (key == "n_train") cfg.n_train = std::stoi(val);
    else if (key == "n_val") cfg.n_val = std::stoi(val);
    else if (key == "n_test") cfg.n_test = std::stoi(val);
    else if (key == "input_dim") cfg.input_dim = std::stoi(val);
    else if (key == "classes") cfg.classes = std::stoi(val);
    else if (key == "difficulty_mix") cfg.difficulty_mix = std::stod(val);
    else if (key == "data_seed") cfg.data_seed = std::stoull(val);
    else if (key == "k") cfg.k = std::stoi(val);
    else if (key == "block_widths") cfg.block_widths = detail::parse_int_list(val);
    else if (key == "head_hidden") cfg.head_hidden = std::stoi(val);
    else if (key == "isc") cfg.isc = detail::parse_bool(key, val);
    else if (key == "isc_transform") cfg.isc_transform = isc_transform_from_name(val);
    else if (key == "ge") cfg.ge = detail::parse_bool(key, val);
    else if (key == "ofa") cfg.ofa = detail::parse_bool(key, val);
    else if (key == "lambda") cfg.lambda = detail::parse_double_list(val);
    else if (key == "alpha") cfg.alpha = std::stod(val);
    else if (key == "temperature") cfg.temperature = std::stod(val);
    else if (key == "lr0") cfg.lr0 = std::stod(val);
    else if (key == "momentum") cfg.momentum = std::stod(val);
    else if (key == "weight_decay") cfg.weight_decay = std::stod(val);
    else if (key == "phase1_epochs") cfg.phase1_epochs = std::stoi(val);
    else if (key == "phase2_epochs") cfg.phase2_epochs = std::stoi(val);
    else if (key == "lr_drop_points") cfg.lr_drop_points = detail::parse_double_list(val);
    else if (key == "batch_size") cfg.batch_size = std::stoi(val);
    else if (key == "seed") cfg.seed = std::stoull(val);
    else throw ConfigError("config: unknown key: " + key);
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: bad value for " + key + ": " + val);
  } catch (const std::out_of_range&) {
    throw ConfigError("config: value out of range for " + key + ": " + val);
  }
}

/// key=value assignment, as accepted in config files and --set overrides.
inline void apply_config_assignment(RunConfig& cfg, const std::string& line) {
  auto eq = line.find('=');
  if (eq == std::string::npos)
    throw ConfigError("config: expected key=value, got: " + line);
  apply_config_line(cfg, detail::trim(line.substr(0, eq)),
                    detail::trim(line.substr(eq + 1)));
}

/// Plain-text config: key=value per line, blank lines and # comments ignored.
inline RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    std::string t = detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    apply_config_assignment(cfg, t);
  }
  return cfg;
}

inline RunConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

/// Canonical echo: every key, fixed order, normalized values. Identical
/// configs serialize to identical bytes.
inline std::string serialize_config(const RunConfig& cfg) {
  std::ostringstream os;
  os << "dataset=" << dataset_kind_name(cfg.dataset) << "\n";
  if (!cfg.idx_images.empty()) os << "idx_images=" << cfg.idx_images << "\n";
  if (!cfg.idx_labels.empty()) os << "idx_labels=" << cfg.idx_labels << "\n";
  os << "n_train=" << cfg.n_train << "\n";
  os << "n_val=" << cfg.n_val << "\n";
  os << "n_test=" << cfg.n_test << "\n";
  os << "input_dim=" << cfg.input_dim << "\n";
  os << "classes=" << cfg.classes << "\n";
  os << "difficulty_mix=" << fmt_double(cfg.difficulty_mix) << "\n";
  os << "data_seed=" << cfg.data_seed << "\n";
  os << "k=" << cfg.k << "\n";
  os << "block_widths=" << detail::join_list(cfg.block_widths) << "\n";
  os << "head_hidden=" << cfg.head_hidden << "\n";
  os << "isc=" << (cfg.isc ? 1 : 0) << "\n";
  os << "isc_transform=" << isc_transform_name(cfg.isc_transform) << "\n";
  os << "ge=" << (cfg.ge ? 1 : 0) << "\n";
  os << "ofa=" << (cfg.ofa ? 1 : 0) << "\n";
  if (!cfg.lambda.empty()) os << "lambda=" << detail::join_list(cfg.lambda) << "\n";
  os << "alpha=" << fmt_double(cfg.alpha) << "\n";
  os << "temperature=" << fmt_double(cfg.temperature) << "\n";
  os << "lr0=" << fmt_double(cfg.lr0) << "\n";
  os << "momentum=" << fmt_double(cfg.momentum) << "\n";
  os << "weight_decay=" << fmt_double(cfg.weight_decay) << "\n";
  os << "phase1_epochs=" << cfg.phase1_epochs << "\n";
  os << "phase2_epochs=" << cfg.phase2_epochs << "\n";
  os << "lr_drop_points=" << detail::join_list(cfg.lr_drop_points) << "\n";
  os << "batch_size=" << cfg.batch_size << "\n";
  os << "seed=" << cfg.seed << "\n";
  return os.str();
}

}  // namespace exitnet
