#include "mmtf/config.hpp"

#include <charconv>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "mmtf/errors.hpp"

namespace mmtf {

std::string_view fusion_name(Fusion f) {
  return f == Fusion::kEarly ? "early" : "late";
}

std::string_view branches_name(Branches b) {
  switch (b) {
    case Branches::kBoth: return "both";
    case Branches::kViltOnly: return "vilt_only";
    case Branches::kVaultOnly: return "vault_only";
  }
  return "?";
}

std::string_view modality_name(ModalityMask m) {
  switch (m) {
    case ModalityMask::kBoth: return "both";
    case ModalityMask::kTextOnly: return "text_only";
    case ModalityMask::kImageOnly: return "image_only";
  }
  return "?";
}

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for config key '" +
                    std::string(key) + "'");
}

std::size_t parse_size(std::string_view key, std::string_view value) {
  std::size_t out = 0;
  const auto v = trim(value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, value);
  }
  return out;
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto v = trim(value);
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || v.empty()) {
    bad_value(key, value);
  }
  return out;
}

double parse_double(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (v.empty()) bad_value(key, value);
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (end != v.c_str() + v.size()) bad_value(key, value);
  return out;
}

std::vector<double> parse_list(std::string_view key, std::string_view value) {
  std::vector<double> out;
  const auto v = trim(value);
  if (v.empty() || v == "none") return out;
  std::size_t start = 0;
  while (start <= v.size()) {
    const auto comma = v.find(',', start);
    const auto piece = v.substr(start, comma == std::string::npos ? std::string::npos
                                                                  : comma - start);
    out.push_back(parse_double(key, piece));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

bool parse_switch(std::string_view key, std::string_view value) {
  const auto v = trim(value);
  if (v == "on" || v == "true" || v == "1") return true;
  if (v == "off" || v == "false" || v == "0") return false;
  bad_value(key, value);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& key, const std::string& why) {
    throw ConfigError("config key '" + key + "': " + why);
  };
  if (train_batch == 0) fail("train.batch", "must be positive");
  if (eval_batch == 0) fail("train.eval_batch", "must be positive");
  if (!(learning_rate > 0.0)) fail("train.learning_rate", "must be positive");
  if (epochs == 0) fail("train.epochs", "must be positive");
  if (max_length < 3) fail("model.max_length", "must be at least 3");
  if (!(d0_dropout >= 0.0 && d0_dropout < 1.0)) fail("head.d0_dropout", "must lie in [0, 1)");
  for (double r : msd_rates) {
    if (!(r >= 0.0 && r < 1.0)) fail("head.msd_rates", "rates must lie in [0, 1)");
  }
  if (msd && msd_rates.empty()) fail("head.msd_rates", "empty while msd is on");
  if (model.hidden == 0 || model.heads == 0 || model.hidden % model.heads != 0) {
    fail("model.heads", "hidden width must be divisible by heads");
  }
  if (model.mlp == 0) fail("model.mlp", "must be positive");
  if (model.late_width == 0) fail("model.late_width", "must be positive");
  if (!(model.ln_eps > 0.0)) fail("model.ln_eps", "must be positive");
  if (!(model.block_dropout >= 0.0 && model.block_dropout < 1.0)) {
    fail("model.block_dropout", "must lie in [0, 1)");
  }
  if (model.patch == 0 || model.image_height % model.patch != 0 ||
      model.image_width % model.patch != 0) {
    fail("data.patch", "must tile the image exactly");
  }
  if (model.channels == 0) fail("data.channels", "must be positive");
}

EncodingConfig TrainConfig::encoding() const {
  return EncodingConfig{max_length, model.image_height, model.image_width,
                        model.patch, model.channels};
}

std::vector<std::pair<std::string, std::string>> TrainConfig::to_key_values() const {
  std::string rates;
  for (std::size_t i = 0; i < msd_rates.size(); ++i) {
    if (i) rates += ",";
    rates += format_double(msd_rates[i]);
  }
  if (rates.empty()) rates = "none";
  return {
      {"task", std::string(task_name(task))},
      {"seed", std::to_string(seed)},
      {"train.batch", std::to_string(train_batch)},
      {"train.eval_batch", std::to_string(eval_batch)},
      {"train.learning_rate", format_double(learning_rate)},
      {"train.epochs", std::to_string(epochs)},
      {"head.d0_dropout", format_double(d0_dropout)},
      {"head.msd", msd ? "on" : "off"},
      {"head.msd_rates", rates},
      {"model.fusion", std::string(fusion_name(fusion))},
      {"model.branches", std::string(branches_name(branches))},
      {"model.modality", std::string(modality_name(modality))},
      {"model.max_length", std::to_string(max_length)},
      {"model.hidden", std::to_string(model.hidden)},
      {"model.heads", std::to_string(model.heads)},
      {"model.mlp", std::to_string(model.mlp)},
      {"model.layers", std::to_string(model.layers)},
      {"model.aux_layers", std::to_string(model.aux_layers)},
      {"model.block_dropout", format_double(model.block_dropout)},
      {"model.ln_eps", format_double(model.ln_eps)},
      {"model.late_width", std::to_string(model.late_width)},
      {"data.image_height", std::to_string(model.image_height)},
      {"data.image_width", std::to_string(model.image_width)},
      {"data.patch", std::to_string(model.patch)},
      {"data.channels", std::to_string(model.channels)},
  };
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [k, v] : to_key_values()) out += k + " = " + v + "\n";
  return out;
}

void TrainConfig::set(std::string_view raw_key, std::string_view value) {
  const std::string key = trim(raw_key);
  if (key == "task") {
    try {
      task = parse_task(trim(value));
    } catch (const ConfigError&) {
      bad_value(key, value);
    }
  } else if (key == "seed") {
    seed = parse_u64(key, value);
  } else if (key == "train.batch") {
    train_batch = parse_size(key, value);
  } else if (key == "train.eval_batch") {
    eval_batch = parse_size(key, value);
  } else if (key == "train.learning_rate") {
    learning_rate = parse_double(key, value);
  } else if (key == "train.epochs") {
    epochs = parse_size(key, value);
  } else if (key == "head.d0_dropout") {
    d0_dropout = parse_double(key, value);
  } else if (key == "head.msd") {
    msd = parse_switch(key, value);
  } else if (key == "head.msd_rates") {
    msd_rates = parse_list(key, value);
  } else if (key == "model.fusion") {
    const auto v = trim(value);
    if (v == "early") fusion = Fusion::kEarly;
    else if (v == "late") fusion = Fusion::kLate;
    else bad_value(key, value);
  } else if (key == "model.branches") {
    const auto v = trim(value);
    if (v == "both") branches = Branches::kBoth;
    else if (v == "vilt_only") branches = Branches::kViltOnly;
    else if (v == "vault_only") branches = Branches::kVaultOnly;
    else bad_value(key, value);
  } else if (key == "model.modality") {
    const auto v = trim(value);
    if (v == "both") modality = ModalityMask::kBoth;
    else if (v == "text_only") modality = ModalityMask::kTextOnly;
    else if (v == "image_only") modality = ModalityMask::kImageOnly;
    else bad_value(key, value);
  } else if (key == "model.max_length") {
    max_length = parse_size(key, value);
  } else if (key == "model.hidden") {
    model.hidden = parse_size(key, value);
  } else if (key == "model.heads") {
    model.heads = parse_size(key, value);
  } else if (key == "model.mlp") {
    model.mlp = parse_size(key, value);
  } else if (key == "model.layers") {
    model.layers = parse_size(key, value);
  } else if (key == "model.aux_layers") {
    model.aux_layers = parse_size(key, value);
  } else if (key == "model.block_dropout") {
    model.block_dropout = parse_double(key, value);
  } else if (key == "model.ln_eps") {
    model.ln_eps = parse_double(key, value);
  } else if (key == "model.late_width") {
    model.late_width = parse_size(key, value);
  } else if (key == "data.image_height") {
    model.image_height = parse_size(key, value);
  } else if (key == "data.image_width") {
    model.image_width = parse_size(key, value);
  } else if (key == "data.patch") {
    model.patch = parse_size(key, value);
  } else if (key == "data.channels") {
    model.channels = parse_size(key, value);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  return from_text(text, TrainConfig{});
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path) {
  return from_file(path, TrainConfig{});
}

TrainConfig TrainConfig::from_text(std::string_view text, const TrainConfig& base) {
  TrainConfig cfg = base;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key = value, got '" + body + "'");
    }
    cfg.set(body.substr(0, eq), body.substr(eq + 1));
  }
  return cfg;
}

TrainConfig TrainConfig::from_file(const std::filesystem::path& path,
                                   const TrainConfig& base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str(), base);
}

TrainConfig desk_preset(Task task) {
  TrainConfig cfg;
  cfg.task = task;
  switch (task) {
    case Task::kSentiment:
      cfg.train_batch = 4;
      cfg.d0_dropout = 0.5;
      break;
    case Task::kEmotion:
      cfg.train_batch = 8;
      cfg.d0_dropout = 0.5;
      break;
    case Task::kDesire:
    case Task::kBinaryDesire:
      cfg.train_batch = 8;
      cfg.d0_dropout = 0.7;
      break;
  }
  return cfg;
}

TrainConfig full_scale_preset(Task task) {
  TrainConfig cfg = desk_preset(task);
  switch (task) {
    case Task::kSentiment: cfg.learning_rate = 3e-3; break;
    case Task::kEmotion: cfg.learning_rate = 2.99e-3; break;
    case Task::kDesire:
    case Task::kBinaryDesire: cfg.learning_rate = 3.1e-3; break;
  }
  cfg.model.hidden = 768;
  cfg.model.heads = 12;
  cfg.model.mlp = 3072;
  cfg.model.layers = 12;
  cfg.model.aux_layers = 12;
  cfg.model.late_width = 768;
  cfg.model.ln_eps = 1e-12;
  cfg.model.image_height = 224;
  cfg.model.image_width = 224;
  cfg.model.patch = 32;
  cfg.model.channels = 3;
  return cfg;
}

TrainConfig full_scale_low_lr_preset(Task task) {
  TrainConfig cfg = full_scale_preset(task);
  cfg.learning_rate = 3e-5;
  return cfg;
}

}  // namespace mmtf
