#include "mmtf/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

#include "json.hpp"
#include "mmtf/errors.hpp"
#include "mmtf/random.hpp"

namespace mmtf {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr std::array<Task, 3> kStoredTasks = {Task::kSentiment, Task::kEmotion,
                                              Task::kDesire};

std::optional<std::size_t>& stored_label(MultimodalExample& ex, Task task) {
  switch (task) {
    case Task::kSentiment: return ex.sentiment;
    case Task::kEmotion: return ex.emotion;
    default: return ex.desire;
  }
}

std::string require_string(const json& record, const char* field) {
  auto it = record.find(field);
  if (it == record.end() || !it->is_string()) {
    throw std::runtime_error(std::string("missing string field '") + field + "'");
  }
  return it->get<std::string>();
}

MultimodalExample parse_record(const std::string& line) {
  const json record = json::parse(line);
  if (!record.is_object()) throw std::runtime_error("record is not an object");
  MultimodalExample ex;
  ex.id = require_string(record, "id");
  ex.title = require_string(record, "title");
  ex.caption = require_string(record, "caption");
  ex.image_path = require_string(record, "image_path");
  auto labels = record.find("labels");
  if (labels == record.end()) return ex;
  if (!labels->is_object()) throw std::runtime_error("'labels' must be an object");
  for (const auto& [key, value] : labels->items()) {
    Task task = Task::kSentiment;
    try {
      task = parse_task(key);
    } catch (const ConfigError&) {
      throw std::runtime_error("unknown label field '" + key + "'");
    }
    if (task == Task::kBinaryDesire) {
      throw std::runtime_error("binary_desire is derived from desire, not stored");
    }
    if (value.is_null()) continue;
    if (!value.is_string()) {
      throw std::runtime_error("label '" + key + "' must be a string");
    }
    stored_label(ex, task) =
        LabelVocabulary::for_task(task).index_of(value.get<std::string>());
  }
  return ex;
}

}  // namespace

std::optional<std::size_t> MultimodalExample::label(Task task) const {
  switch (task) {
    case Task::kSentiment: return sentiment;
    case Task::kEmotion: return emotion;
    case Task::kDesire: return desire;
    case Task::kBinaryDesire:
      if (!desire) return std::nullopt;
      return binarize_desire(*desire);
  }
  return std::nullopt;
}

fs::path split_file(const fs::path& dataset_dir, std::string_view split) {
  return dataset_dir / (std::string(split) + ".jsonl");
}

std::vector<MultimodalExample> load_records(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open dataset file " + path.string());
  std::vector<MultimodalExample> examples;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(),
                    [](unsigned char c) { return std::isspace(c); })) {
      continue;
    }
    try {
      examples.push_back(parse_record(line));
    } catch (const LabelError& e) {
      throw LabelError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " +
                       e.what());
    }
  }
  return examples;
}

std::vector<MultimodalExample> load_dataset(const fs::path& path, Task task) {
  auto examples = load_records(path);
  const fs::path root = path.parent_path();
  for (const auto& ex : examples) {
    if (!ex.label(task)) {
      throw FormatError("record " + ex.id + " has no " +
                        std::string(task_name(task == Task::kBinaryDesire
                                                  ? Task::kDesire
                                                  : task)) +
                        " label");
    }
    if (tokenize(ex.title).empty() && tokenize(ex.caption).empty()) {
      throw FormatError("record " + ex.id + " has empty title and caption");
    }
    if (!fs::is_regular_file(root / ex.image_path)) {
      throw FormatError("record " + ex.id + ": image not found at " +
                        (root / ex.image_path).string());
    }
  }
  return examples;
}

std::string record_to_line(const MultimodalExample& ex) {
  json record;
  record["id"] = ex.id;
  record["title"] = ex.title;
  record["caption"] = ex.caption;
  record["image_path"] = ex.image_path;
  json labels = json::object();
  for (Task t : kStoredTasks) {
    const auto value = ex.label(t);
    if (value) labels[std::string(task_name(t))] = LabelVocabulary::for_task(t).name(*value);
  }
  record["labels"] = std::move(labels);
  return record.dump();
}

void write_records(const fs::path& path,
                   const std::vector<MultimodalExample>& examples) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write dataset file " + path.string());
  for (const auto& ex : examples) out << record_to_line(ex) << '\n';
  if (!out) throw FormatError("write failed for " + path.string());
}

TokenVocabulary build_vocab(const std::vector<MultimodalExample>& examples) {
  if (examples.empty()) {
    throw ContractError("cannot build a vocabulary from an empty training set");
  }
  std::vector<std::string> texts;
  texts.reserve(examples.size() * 2);
  for (const auto& ex : examples) {
    texts.push_back(ex.title);
    texts.push_back(ex.caption);
  }
  return TokenVocabulary::build(texts);
}

GrayImage read_pgm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open image " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  auto fail = [&path](const std::string& why) {
    return FormatError("bad PGM " + path.string() + ": " + why);
  };
  auto skip_space = [&] {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
  };
  auto read_number = [&]() -> std::size_t {
    skip_space();
    std::size_t value = 0;
    std::size_t digits = 0;
    while (pos < bytes.size() &&
           std::isdigit(static_cast<unsigned char>(bytes[pos]))) {
      value = value * 10 + static_cast<std::size_t>(bytes[pos] - '0');
      ++pos;
      if (++digits > 9) throw fail("header number too large");
    }
    if (digits == 0) throw fail("expected a header number");
    return value;
  };
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') {
    throw fail("magic is not P5");
  }
  pos = 2;
  GrayImage image;
  image.width = read_number();
  image.height = read_number();
  const std::size_t maxval = read_number();
  if (maxval != 255) throw fail("maxval must be 255, got " + std::to_string(maxval));
  if (image.width == 0 || image.height == 0) throw fail("zero image dimension");
  if (pos >= bytes.size() ||
      !std::isspace(static_cast<unsigned char>(bytes[pos]))) {
    throw fail("missing separator before payload");
  }
  ++pos;
  const std::size_t n = image.width * image.height;
  if (bytes.size() - pos < n) {
    throw fail("truncated payload (" + std::to_string(bytes.size() - pos) +
               " of " + std::to_string(n) + " bytes)");
  }
  image.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                      bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return image;
}

void write_pgm(const fs::path& path, const GrayImage& image) {
  if (image.pixels.size() != image.width * image.height) {
    throw ContractError("image buffer does not match its dimensions");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write image " + path.string());
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(image.pixels.data()),
            static_cast<std::streamsize>(image.pixels.size()));
  if (!out) throw FormatError("write failed for " + path.string());
}

Tensor load_image(const fs::path& path) { return image_tensor(read_pgm(path)); }

Tensor image_tensor(const GrayImage& image) {
  std::vector<double> values(image.pixels.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    values[i] = static_cast<double>(image.pixels[i]) / 255.0;
  }
  return Tensor::from({image.height, image.width}, std::move(values));
}

std::string file_checksum(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

namespace {

std::vector<std::vector<std::string>> parse_csv(const std::string& text,
                                                const fs::path& path) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false;
  std::size_t line = 1;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      row.push_back(std::move(field));
      field.clear();
      if (!(row.size() == 1 && row[0].empty())) rows.push_back(std::move(row));
      row.clear();
      ++line;
    } else {
      field.push_back(c);
    }
  }
  if (quoted) {
    throw ParseError(path.string() + ":" + std::to_string(line) +
                     ": unterminated quoted field");
  }
  if (!field.empty() || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

std::size_t import_msed_csv(const fs::path& csv_path,
                            const fs::path& output_path) {
  std::ifstream in(csv_path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + csv_path.string());
  const std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  const auto rows = parse_csv(text, csv_path);
  if (rows.empty()) throw ParseError(csv_path.string() + ":1: empty CSV");

  const std::map<std::string, std::string> aliases = {
      {"id", "id"},           {"sample_id", "id"},     {"title", "title"},
      {"caption", "caption"}, {"text", "caption"},     {"image", "image"},
      {"image_path", "image"}, {"image_id", "image"},  {"img", "image"},
      {"sentiment", "sentiment"}, {"emotion", "emotion"}, {"desire", "desire"}};
  std::map<std::string, std::size_t> column;
  for (std::size_t i = 0; i < rows[0].size(); ++i) {
    auto it = aliases.find(lower(rows[0][i]));
    if (it != aliases.end()) column.emplace(it->second, i);
  }
  for (const char* required : {"title", "caption", "image"}) {
    if (!column.count(required)) {
      throw ParseError(csv_path.string() + ":1: missing '" +
                       std::string(required) + "' column");
    }
  }

  const fs::path csv_dir = fs::absolute(csv_path).parent_path();
  const fs::path out_dir = fs::absolute(output_path).parent_path();
  std::vector<MultimodalExample> examples;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    auto cell = [&](const std::string& key) -> std::string {
      auto it = column.find(key);
      if (it == column.end() || it->second >= row.size()) return {};
      return row[it->second];
    };
    MultimodalExample ex;
    ex.id = column.count("id") ? cell("id") : std::to_string(r);
    ex.title = cell("title");
    ex.caption = cell("caption");
    fs::path image = cell("image");
    if (image.extension() != ".pgm") image.replace_extension(".pgm");
    ex.image_path = (csv_dir / image).lexically_normal().lexically_relative(out_dir).generic_string();
    try {
      for (Task t : kStoredTasks) {
        const std::string value = cell(std::string(task_name(t)));
        if (!value.empty()) {
          stored_label(ex, t) = LabelVocabulary::for_task(t).index_of(value);
        }
      }
    } catch (const LabelError& e) {
      throw LabelError(csv_path.string() + ":" + std::to_string(r + 1) + ": " +
                       e.what());
    }
    examples.push_back(std::move(ex));
  }
  write_records(output_path, examples);
  return examples.size();
}

}  // namespace mmtf
