#include <algorithm>
#include <charconv>
#include <functional>
#include <fstream>
#include <map>
#include <sstream>

#include "cxr/error.hpp"
#include "cxr/pipeline.hpp"

namespace cxr {

nn::NetworkSpec NetConfig::build() const {
  std::vector<nn::ConvBlock> blocks;
  for (std::size_t w : block_widths) blocks.push_back({convs_per_block, w});
  return nn::NetworkSpec::vgg_style({3, input_size, input_size}, blocks, head_widths, 3, freeze_below);
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& v) {
  T out{};
  const auto* end = v.data() + v.size();
  const auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) fail_usage("config " + key + ": cannot parse \"" + v + "\"");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  fail_usage("config " + key + ": expected true/false, got \"" + v + "\"");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& v) {
  std::vector<std::size_t> out;
  std::istringstream in(v);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = [] {
    std::map<std::string, Setter> t;
    auto real = [&t](const std::string& k, std::function<double&(PipelineConfig&)> ref) {
      t[k] = [ref](PipelineConfig& c, const std::string& key, const std::string& v) {
        ref(c) = parse_number<double>(key, v);
      };
    };
    auto integer = [&t](const std::string& k, std::function<int&(PipelineConfig&)> ref) {
      t[k] = [ref](PipelineConfig& c, const std::string& key, const std::string& v) {
        ref(c) = parse_number<int>(key, v);
      };
    };
    auto count = [&t](const std::string& k, std::function<std::size_t&(PipelineConfig&)> ref) {
      t[k] = [ref](PipelineConfig& c, const std::string& key, const std::string& v) {
        ref(c) = parse_number<std::size_t>(key, v);
      };
    };
    auto path = [&t](const std::string& k, std::function<std::filesystem::path&(PipelineConfig&)> ref) {
      t[k] = [ref](PipelineConfig& c, const std::string&, const std::string& v) { ref(c) = v; };
    };

    real("preprocess.threshold_fraction", [](PipelineConfig& c) -> double& { return c.preprocess.threshold_fraction; });
    integer("preprocess.morph_radius", [](PipelineConfig& c) -> int& { return c.preprocess.morph_radius; });
    integer("preprocess.connectivity", [](PipelineConfig& c) -> int& { return c.preprocess.connectivity; });
    integer("preprocess.bilateral_radius", [](PipelineConfig& c) -> int& { return c.preprocess.bilateral_radius; });
    real("preprocess.sigma_space", [](PipelineConfig& c) -> double& { return c.preprocess.sigma_space; });
    real("preprocess.sigma_range", [](PipelineConfig& c) -> double& { return c.preprocess.sigma_range; });
    integer("preprocess.equalize_bins", [](PipelineConfig& c) -> int& { return c.preprocess.equalize_bins; });
    real("preprocess.max_blob_fraction", [](PipelineConfig& c) -> double& { return c.preprocess.max_blob_fraction; });
    t["preprocess.fill_value"] = [](PipelineConfig& c, const std::string& key, const std::string& v) {
      if (v == "image-minimum") {
        c.preprocess.fill = FillPolicy::image_minimum;
      } else if (v == "zero") {
        c.preprocess.fill = FillPolicy::zero;
      } else {
        fail_usage("config " + key + ": expected image-minimum or zero");
      }
    };

    t["augment.enabled"] = [](PipelineConfig& c, const std::string& key, const std::string& v) {
      c.augment_enabled = parse_bool(key, v);
    };
    real("augment.shear_max", [](PipelineConfig& c) -> double& { return c.augment.shear_max; });
    real("augment.zoom_min", [](PipelineConfig& c) -> double& { return c.augment.zoom_min; });
    real("augment.zoom_max", [](PipelineConfig& c) -> double& { return c.augment.zoom_max; });
    real("augment.rotation_max", [](PipelineConfig& c) -> double& { return c.augment.rotation_max; });
    real("augment.shift_max", [](PipelineConfig& c) -> double& { return c.augment.shift_max; });
    real("augment.hflip_prob", [](PipelineConfig& c) -> double& { return c.augment.hflip_prob; });

    real("optimizer.learning_rate", [](PipelineConfig& c) -> double& { return c.optimizer.learning_rate; });
    real("optimizer.beta1", [](PipelineConfig& c) -> double& { return c.optimizer.beta1; });
    real("optimizer.beta2", [](PipelineConfig& c) -> double& { return c.optimizer.beta2; });
    real("optimizer.epsilon", [](PipelineConfig& c) -> double& { return c.optimizer.epsilon; });
    count("optimizer.batch_size", [](PipelineConfig& c) -> std::size_t& { return c.batch_size; });
    count("optimizer.max_epochs", [](PipelineConfig& c) -> std::size_t& { return c.max_epochs; });

    integer("schedule.patience", [](PipelineConfig& c) -> int& { return c.schedule.patience; });
    real("schedule.factor", [](PipelineConfig& c) -> double& { return c.schedule.factor; });
    real("schedule.min_lr", [](PipelineConfig& c) -> double& { return c.schedule.min_lr; });

    real("split.test_fraction", [](PipelineConfig& c) -> double& { return c.split.test_fraction; });
    real("split.val_fraction", [](PipelineConfig& c) -> double& { return c.split.val_fraction; });
    t["split.seed"] = [](PipelineConfig& c, const std::string& key, const std::string& v) {
      c.seed = parse_number<std::uint64_t>(key, v);
    };
    t["run.seed"] = t["split.seed"];
    t["run.threads"] = [](PipelineConfig& c, const std::string& key, const std::string& v) {
      c.threads = parse_number<unsigned>(key, v);
    };

    count("net.input_size", [](PipelineConfig& c) -> std::size_t& { return c.net.input_size; });
    count("net.convs_per_block", [](PipelineConfig& c) -> std::size_t& { return c.net.convs_per_block; });
    t["net.block_widths"] = [](PipelineConfig& c, const std::string& key, const std::string& v) {
      c.net.block_widths = parse_list(key, v);
    };
    t["net.head_widths"] = [](PipelineConfig& c, const std::string& key, const std::string& v) {
      c.net.head_widths = parse_list(key, v);
    };
    integer("net.freeze_below", [](PipelineConfig& c) -> int& { return c.net.freeze_below; });

    path("paths.manifest", [](PipelineConfig& c) -> std::filesystem::path& { return c.paths.manifest; });
    path("paths.samples", [](PipelineConfig& c) -> std::filesystem::path& { return c.paths.samples; });
    path("paths.checkpoints", [](PipelineConfig& c) -> std::filesystem::path& { return c.paths.checkpoints; });
    path("paths.reports", [](PipelineConfig& c) -> std::filesystem::path& { return c.paths.reports; });
    return t;
  }();
  return table;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) fail_usage("unknown config key \"" + key + "\"");
  it->second(*this, key, value);
}

void PipelineConfig::validate() const {
  preprocess.validate();
  augment.validate();
  schedule.validate();
  if (!(optimizer.learning_rate > 0.0)) fail_usage("optimizer.learning_rate must be > 0");
  if (batch_size == 0) fail_usage("optimizer.batch_size must be >= 1");
  if (max_epochs == 0) fail_usage("optimizer.max_epochs must be >= 1");
  if (!(split.test_fraction > 0.0 && split.test_fraction < 1.0) ||
      !(split.val_fraction > 0.0 && split.val_fraction < 1.0)) {
    fail_usage("split fractions must lie in (0,1)");
  }
  if (net.block_widths.empty()) fail_usage("net.block_widths must name at least one block");
  if (net.convs_per_block == 0) fail_usage("net.convs_per_block must be >= 1");
  const std::size_t div = std::size_t{1} << net.block_widths.size();
  if (net.input_size == 0 || net.input_size % div != 0) {
    fail_usage("net.input_size must be a positive multiple of 2^(number of blocks)");
  }
  if (paths.samples.empty() || paths.reports.empty()) fail_usage("paths must be non-empty");
  net.build();
}

namespace {

PipelineConfig parse_lines(const std::string& text, std::vector<std::string>* keys_seen) {
  PipelineConfig cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) fail_usage("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    cfg.set(key, trim(t.substr(eq + 1)));
    if (keys_seen) keys_seen->push_back(key);
  }
  return cfg;
}

}  // namespace

PipelineConfig parse_config(const std::string& text) { return parse_lines(text, nullptr); }

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail_usage("cannot open config " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  std::vector<std::string> keys;
  PipelineConfig cfg = parse_lines(buf.str(), &keys);
  // Relative paths written in the file are relative to the file itself.
  const std::filesystem::path base = path.parent_path();
  auto rebase = [&](const std::string& key, std::filesystem::path& p) {
    if (std::find(keys.begin(), keys.end(), key) != keys.end() && p.is_relative()) p = base / p;
  };
  rebase("paths.manifest", cfg.paths.manifest);
  rebase("paths.samples", cfg.paths.samples);
  rebase("paths.checkpoints", cfg.paths.checkpoints);
  rebase("paths.reports", cfg.paths.reports);
  return cfg;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& [k, _] : setters()) keys.push_back(k);
  return keys;
}

}  // namespace cxr
