// Copyright 2026 The CREAM Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cream/counterfactual.hpp"
#include "cream/error.hpp"
#include "cream/eval.hpp"
#include "cream/rng.hpp"
#include "cream/synthgen.hpp"
#include "cream/views.hpp"

// Experiment runner behind the `cream` command line tool. Every command is a
// function of one ExperimentConfig; all randomness derives from its seed.

namespace cream::cli {

namespace fs = std::filesystem;
using json = nlohmann::json;

enum ExitCode : int { kOk = 0, kConfigError = 2, kIoFailure = 3, kNumericFailure = 4 };

struct ExperimentConfig {
  synth::GenSpec gen;
  cf::TrainConfig train;
  std::vector<double> alpha_sweep;
  std::vector<double> fusion_sweep;
  std::size_t attack_budget = eval::kUnlimitedBudget;
  std::size_t workers = 1;
  bool sweep_reuse = false;
  std::string out_dir = "out";
  std::optional<std::string> data_dir;
  std::optional<std::string> checkpoint;

  std::uint64_t seed() const { return gen.seed; }
  void set_seed(std::uint64_t s) {
    gen.seed = s;
    train.seed = s;
  }
  fs::path data_path() const { return data_dir ? fs::path(*data_dir) : fs::path(out_dir); }
  fs::path checkpoint_path() const {
    return checkpoint ? fs::path(*checkpoint) : fs::path(out_dir) / "model.ckpt";
  }
};

// ---------------------------------------------------------------------------
// Config file: `key = value` per line, `#` starts a comment.

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline double parse_real(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double x = 0.0;
  try {
    x = std::stod(v, &used);
  } catch (const std::exception&) {
    throw SpecError(key, "expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(x)) throw SpecError(key, "expected a number, got '" + v + "'");
  return x;
}

inline std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw SpecError(key, "expected a non-negative integer, got '" + v + "'");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw SpecError(key, "integer out of range: '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw SpecError(key, "expected true or false, got '" + v + "'");
}

inline std::vector<double> parse_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_real(key, trim(item)));
  if (out.empty()) throw SpecError(key, "expected a comma-separated list");
  return out;
}

inline std::string format_list(const std::vector<double>& v) {
  std::ostringstream os;
  os << std::setprecision(17);
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

}  // namespace detail

inline void apply_key(ExperimentConfig& c, const std::string& key, const std::string& value) {
  using namespace detail;
  if (key == "seed") c.set_seed(parse_uint(key, value));
  else if (key == "n_classes") c.gen.n_classes = static_cast<int>(parse_uint(key, value));
  else if (key == "n_train") c.gen.n_train = parse_uint(key, value);
  else if (key == "n_valid") c.gen.n_valid = parse_uint(key, value);
  else if (key == "n_test") c.gen.n_test = parse_uint(key, value);
  else if (key == "rho") c.gen.rho = parse_real(key, value);
  else if (key == "pool_size") c.gen.pool_size = parse_uint(key, value);
  else if (key == "decorrelate_test") c.gen.decorrelate_test = parse_bool(key, value);
  else if (key == "alpha") c.train.alpha = parse_real(key, value);
  else if (key == "fusion_fraction") c.train.fusion_fraction = parse_real(key, value);
  else if (key == "epochs") c.train.epochs = parse_uint(key, value);
  else if (key == "lr") c.train.lr = parse_real(key, value);
  else if (key == "embed_dim") c.train.embed_dim = parse_uint(key, value);
  else if (key == "max_len") c.train.max_len = parse_uint(key, value);
  else if (key == "objective") {
    if (value == "counterfactual") c.train.objective = cf::Objective::kCounterfactual;
    else if (value == "combined_only") c.train.objective = cf::Objective::kCombinedOnly;
    else throw SpecError(key, "expected counterfactual or combined_only, got '" + value + "'");
  } else if (key == "alpha_sweep") c.alpha_sweep = parse_list(key, value);
  else if (key == "fusion_sweep") c.fusion_sweep = parse_list(key, value);
  else if (key == "attack_budget") c.attack_budget = value == "all" ? eval::kUnlimitedBudget : parse_uint(key, value);
  else if (key == "workers") c.workers = parse_uint(key, value);
  else if (key == "sweep_reuse") c.sweep_reuse = parse_bool(key, value);
  else if (key == "out_dir") c.out_dir = value;
  else if (key == "data_dir") c.data_dir = value;
  else if (key == "checkpoint") c.checkpoint = value;
  else throw SpecError(key, "unknown configuration key");
}

inline void validate(const ExperimentConfig& c) {
  synth::validate(c.gen);
  c.train.validate();
  for (double a : c.alpha_sweep) {
    if (!(a >= 0.0 && a <= 1.0)) throw SpecError("alpha_sweep", "values must lie in [0, 1]");
  }
  for (double f : c.fusion_sweep) {
    if (!(f >= 0.0 && f <= 1.0)) throw SpecError("fusion_sweep", "values must lie in [0, 1]");
  }
  if (c.workers == 0) throw SpecError("workers", "must be positive");
}

inline ExperimentConfig parse_config(std::string_view text) {
  ExperimentConfig c;
  bool has_seed = false;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string body = detail::trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw SpecError("line " + std::to_string(lineno), "expected 'key = value'");
    }
    const std::string key = detail::trim(std::string_view(body).substr(0, eq));
    apply_key(c, key, detail::trim(std::string_view(body).substr(eq + 1)));
    has_seed |= key == "seed";
  }
  if (!has_seed) throw SpecError("seed", "missing; every experiment needs a root seed");
  return c;
}

inline std::string read_file(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  os.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!os) throw IoError("failed writing " + path.string());
}

/// Canonical text of the effective configuration; input to the digest.
inline std::string canonical(const ExperimentConfig& c) {
  std::map<std::string, std::string> kv;
  auto real = [](double x) {
    std::ostringstream os;
    os << std::setprecision(17) << x;
    return os.str();
  };
  kv["seed"] = std::to_string(c.seed());
  kv["n_classes"] = std::to_string(c.gen.n_classes);
  kv["n_train"] = std::to_string(c.gen.n_train);
  kv["n_valid"] = std::to_string(c.gen.n_valid);
  kv["n_test"] = std::to_string(c.gen.n_test);
  kv["rho"] = real(c.gen.rho);
  kv["pool_size"] = std::to_string(c.gen.pool_size);
  kv["decorrelate_test"] = c.gen.decorrelate_test ? "true" : "false";
  kv["alpha"] = real(c.train.alpha);
  kv["fusion_fraction"] = real(c.train.fusion_fraction);
  kv["epochs"] = std::to_string(c.train.epochs);
  kv["lr"] = real(c.train.lr);
  kv["embed_dim"] = std::to_string(c.train.embed_dim);
  kv["max_len"] = std::to_string(c.train.max_len);
  kv["objective"] = std::string(cf::to_string(c.train.objective));
  kv["alpha_sweep"] = detail::format_list(c.alpha_sweep);
  kv["fusion_sweep"] = detail::format_list(c.fusion_sweep);
  kv["attack_budget"] = c.attack_budget == eval::kUnlimitedBudget ? "all" : std::to_string(c.attack_budget);
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

/// FNV-1a 64 of the canonical configuration, as 16 hex digits. Paths and
/// worker counts are excluded: they do not change results.
inline std::string config_digest(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : canonical(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------------------
// JSONL datasets: {"id": string, "code": string, "label": integer} per line.

inline std::string to_jsonl(const Dataset& data) {
  std::string out;
  for (const auto& s : data) {
    json j;
    j["id"] = s.id;
    j["code"] = s.code;
    j["label"] = s.label;
    out += j.dump();
    out += '\n';
  }
  return out;
}

inline Dataset parse_jsonl(std::string_view text, int n_classes, const std::string& name = "dataset") {
  Dataset data;
  std::set<std::string> ids;
  std::istringstream in{std::string(text)};
  std::string line;
  for (int lineno = 1; std::getline(in, line); ++lineno) {
    if (detail::trim(line).empty()) continue;
    const std::string where = name + ":" + std::to_string(lineno);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw SpecError(where, std::string("malformed JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("code") || !j.contains("label") ||
        !j["id"].is_string() || !j["code"].is_string() || !j["label"].is_number_integer()) {
      throw SpecError(where, "expected {\"id\": string, \"code\": string, \"label\": integer}");
    }
    CodeSample s{j["id"].get<std::string>(), j["code"].get<std::string>(), j["label"].get<int>()};
    if (s.label < 0 || s.label >= n_classes) throw SpecError(where, "label out of range");
    if (!ids.insert(s.id).second) throw SpecError(where, "duplicate id " + s.id);
    data.push_back(std::move(s));
  }
  return data;
}

inline Dataset load_dataset(const fs::path& path, int n_classes) {
  return parse_jsonl(read_file(path), n_classes, path.filename().string());
}

struct DatasetFiles {
  static constexpr const char* kTrain = "train.jsonl";
  static constexpr const char* kValid = "valid.jsonl";
  static constexpr const char* kTest = "test.jsonl";
  static constexpr const char* kTransformed = "test_transformed.jsonl";
  static constexpr const char* kManifest = "manifest.json";
};

// ---------------------------------------------------------------------------
// Commands

inline void cmd_gen(const ExperimentConfig& c) {
  validate(c);
  const synth::Splits splits = synth::generate_dataset(c.gen);
  const std::vector<std::string> pool = views::identifier_pool(splits.train);
  const views::TransformedSet transformed =
      views::build_transformed_set(splits.test, pool, stream_seed(c.seed(), Stream::kTransform));

  const fs::path dir = c.data_path();
  write_file(dir / DatasetFiles::kTrain, to_jsonl(splits.train));
  write_file(dir / DatasetFiles::kValid, to_jsonl(splits.valid));
  write_file(dir / DatasetFiles::kTest, to_jsonl(splits.test));
  write_file(dir / DatasetFiles::kTransformed, to_jsonl(transformed.samples));

  json manifest;
  manifest["seed"] = c.seed();
  manifest["config_digest"] = config_digest(c);
  manifest["files"] = {DatasetFiles::kTrain, DatasetFiles::kValid, DatasetFiles::kTest,
                       DatasetFiles::kTransformed};
  manifest["class_pools"] = splits.class_pools;
  json maps = json::array();
  for (std::size_t i = 0; i < transformed.samples.size(); ++i) {
    maps.push_back({{"id", transformed.samples[i].id}, {"map", transformed.maps[i]}});
  }
  manifest["rename_maps"] = std::move(maps);
  write_file(dir / DatasetFiles::kManifest, manifest.dump(2) + "\n");
}

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

/// Train on the generated splits; the log gets one CSV row per epoch as soon
/// as the epoch finishes, so it survives a numeric failure.
inline cf::TrainedModel train_from_files(const ExperimentConfig& c, const fs::path& log_path) {
  validate(c);
  const Dataset train = load_dataset(c.data_path() / DatasetFiles::kTrain, c.gen.n_classes);
  const Dataset valid = load_dataset(c.data_path() / DatasetFiles::kValid, c.gen.n_classes);

  if (log_path.has_parent_path()) fs::create_directories(log_path.parent_path());
  std::ofstream log(log_path, std::ios::binary);
  if (!log) throw IoError("cannot write " + log_path.string());
  log << "epoch,mean_l_f,mean_l_r,mean_l_t,valid_accuracy\n";
  log.flush();

  cf::TrainObserver obs;
  obs.on_epoch = [&](const cf::EpochRecord& r) {
    log << r.epoch << ',' << format_real(r.mean_l_f) << ',' << format_real(r.mean_l_r) << ','
        << format_real(r.mean_l_t) << ',' << format_real(r.valid_accuracy) << '\n';
    log.flush();
  };
  return cf::train(train, valid, c.train, c.gen.n_classes, obs);
}

inline void cmd_train(const ExperimentConfig& c) {
  const cf::TrainedModel m = train_from_files(c, fs::path(c.out_dir) / "train_log.csv");
  const fs::path ckpt = c.checkpoint_path();
  if (ckpt.has_parent_path()) fs::create_directories(ckpt.parent_path());
  cf::save_checkpoint(ckpt.string(), m);
}

struct EvalReport {
  eval::MetricsReport metrics;
  eval::RobustnessReport robustness;
};

inline EvalReport evaluate_files(const ExperimentConfig& c, const cf::TrainedModel& m, double alpha) {
  const Dataset test = load_dataset(c.data_path() / DatasetFiles::kTest, m.n_classes);
  const Dataset transformed = load_dataset(c.data_path() / DatasetFiles::kTransformed, m.n_classes);
  EvalReport r;
  r.metrics = eval::evaluate(m, test, alpha, c.workers);
  r.robustness = eval::robustness(m, test, transformed, alpha, c.workers);
  return r;
}

inline json report_json(const ExperimentConfig& c, const EvalReport& r, std::optional<double> asr) {
  json j;
  j["accuracy"] = r.metrics.accuracy;
  j["macro_f1"] = r.metrics.macro_f1;
  j["per_class_f1"] = r.metrics.per_class_f1;
  j["acc_original"] = r.robustness.acc_original;
  j["acc_transformed"] = r.robustness.acc_transformed;
  j["gap"] = r.robustness.gap;
  j["asr"] = asr ? json(*asr) : json(nullptr);
  j["config_digest"] = config_digest(c);
  return j;
}

inline void cmd_eval(const ExperimentConfig& c) {
  validate(c);
  const cf::TrainedModel m = cf::load_checkpoint(c.checkpoint_path().string());
  const EvalReport r = evaluate_files(c, m, c.train.alpha);
  const fs::path out(c.out_dir);
  write_file(out / "report.json", report_json(c, r, std::nullopt).dump(2) + "\n");
  std::ostringstream row;
  row << "config_digest,alpha,accuracy,macro_f1,acc_original,acc_transformed,gap\n"
      << config_digest(c) << ',' << format_real(c.train.alpha) << ',' << format_real(r.metrics.accuracy) << ','
      << format_real(r.metrics.macro_f1) << ',' << format_real(r.robustness.acc_original) << ','
      << format_real(r.robustness.acc_transformed) << ',' << format_real(r.robustness.gap) << '\n';
  write_file(out / "report.csv", row.str());
}

/// One row per (alpha, fusion_fraction). Each fusion fraction trains one
/// model; alpha only affects inference, so the alphas share it.
inline void cmd_sweep(const ExperimentConfig& c) {
  validate(c);
  const std::vector<double> alphas = c.alpha_sweep.empty() ? std::vector<double>{c.train.alpha} : c.alpha_sweep;
  const std::vector<double> fractions =
      c.fusion_sweep.empty() ? std::vector<double>{c.train.fusion_fraction} : c.fusion_sweep;
  const fs::path out(c.out_dir);
  std::ostringstream csv;
  csv << "alpha,fusion_fraction,acc_original,acc_transformed,gap\n";
  for (std::size_t fi = 0; fi < fractions.size(); ++fi) {
    ExperimentConfig cell = c;
    cell.train.fusion_fraction = fractions[fi];
    const fs::path ckpt = out / "sweep" / ("fusion_" + std::to_string(fi) + ".ckpt");
    cf::TrainedModel m;
    if (c.sweep_reuse && fs::exists(ckpt)) {
      m = cf::load_checkpoint(ckpt.string());
      if (m.config != cell.train) throw SpecError("sweep_reuse", "cached checkpoint " + ckpt.string() +
                                                                     " was trained with a different config");
    } else {
      m = train_from_files(cell, out / "sweep" / ("fusion_" + std::to_string(fi) + "_log.csv"));
      cf::save_checkpoint(ckpt.string(), m);
    }
    for (double alpha : alphas) {
      const EvalReport r = evaluate_files(cell, m, alpha);
      csv << format_real(alpha) << ',' << format_real(fractions[fi]) << ','
          << format_real(r.robustness.acc_original) << ',' << format_real(r.robustness.acc_transformed) << ','
          << format_real(r.robustness.gap) << '\n';
    }
  }
  write_file(out / "sweep.csv", csv.str());
}

inline void cmd_attack(const ExperimentConfig& c) {
  validate(c);
  const cf::TrainedModel m = cf::load_checkpoint(c.checkpoint_path().string());
  const Dataset train = load_dataset(c.data_path() / DatasetFiles::kTrain, m.n_classes);
  const Dataset test = load_dataset(c.data_path() / DatasetFiles::kTest, m.n_classes);
  const eval::AttackResult r = eval::attack_suite(m, test, views::identifier_pool(train), c.train.alpha,
                                                  c.attack_budget, stream_seed(c.seed(), Stream::kAttack),
                                                  c.workers);
  json j;
  j["n_attacked"] = r.n_attacked;
  j["n_flipped"] = r.n_flipped;
  j["asr"] = r.asr ? json(*r.asr) : json(nullptr);
  j["config_digest"] = config_digest(c);
  write_file(fs::path(c.out_dir) / "attack.json", j.dump(2) + "\n");
}

/// Run `command` and map library errors onto exit codes. Messages go to `err`.
inline int run(const std::string& command, const ExperimentConfig& c, std::ostream& err) {
  try {
    if (command == "gen") cmd_gen(c);
    else if (command == "train") cmd_train(c);
    else if (command == "eval") cmd_eval(c);
    else if (command == "sweep") cmd_sweep(c);
    else if (command == "attack") cmd_attack(c);
    else {
      err << "unknown command: " << command << "\n";
      return kConfigError;
    }
    return kOk;
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << "\n";
    return kIoFailure;
  } catch (const NumericError& e) {
    err << "error: " << e.what() << "\n";
    return kNumericFailure;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }
}

}  // namespace cream::cli
