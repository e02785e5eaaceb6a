#include "mmtf/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "json.hpp"
#include "mmtf/dataset.hpp"
#include "mmtf/errors.hpp"
#include "mmtf/random.hpp"

namespace mmtf {

namespace {

using json = nlohmann::ordered_json;

const std::vector<std::string> kFiller = {
    "the",   "a",     "day",    "photo", "today", "just",   "look",  "this",
    "my",    "new",   "with",   "at",    "from",  "time",   "some",  "again",
    "here",  "after", "people", "city",  "shot",  "moment", "view",  "week"};

constexpr std::size_t kBlock = 6;

std::string join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

template <typename T>
void shuffle(std::vector<T>& v, RandomStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

std::string make_title(std::size_t group, RandomStream& rng) {
  std::vector<std::string> words;
  const std::size_t sig = 2;
  for (std::size_t i = 0; i < sig; ++i) {
    words.push_back(signature_token(group, rng.below(kSignatureTokensPerGroup)));
  }
  const std::size_t filler = 1 + rng.below(3);
  for (std::size_t i = 0; i < filler; ++i) words.push_back(kFiller[rng.below(kFiller.size())]);
  shuffle(words, rng);
  return join(words);
}

std::string make_caption(RandomStream& rng) {
  std::vector<std::string> words;
  const std::size_t n = 3 + rng.below(4);
  for (std::size_t i = 0; i < n; ++i) words.push_back(kFiller[rng.below(kFiller.size())]);
  return join(words);
}

// Noise background in [0, 0.35], bright block in [0.8, 1] inside quadrant
// `member` (0 top-left, 1 top-right, 2 bottom-left, 3 bottom-right).
GrayImage make_image(std::size_t size, std::size_t member, RandomStream& rng) {
  GrayImage img;
  img.height = img.width = size;
  img.pixels.resize(size * size);
  for (auto& p : img.pixels) p = static_cast<std::uint8_t>(rng.below(90));
  const std::size_t half = size / 2;
  const std::size_t block = std::min(kBlock, half);
  const std::size_t slack = half - block;
  const std::size_t top = (member / 2) * half + rng.below(slack + 1);
  const std::size_t left = (member % 2) * half + rng.below(slack + 1);
  for (std::size_t r = top; r < top + block; ++r) {
    for (std::size_t c = left; c < left + block; ++c) {
      img.pixels[r * size + c] = static_cast<std::uint8_t>(204 + rng.below(52));
    }
  }
  return img;
}

MultimodalExample with_label(MultimodalExample ex, Task task, std::size_t label,
                             RandomStream& rng) {
  switch (task) {
    case Task::kSentiment: ex.sentiment = label; break;
    case Task::kEmotion: ex.emotion = label; break;
    case Task::kDesire: ex.desire = label; break;
    case Task::kBinaryDesire: {
      // desire (0) -> one of the six desire classes, not-desire (1) -> none.
      const std::size_t none = LabelVocabulary::for_task(Task::kDesire).size() - 1;
      ex.desire = label == 0 ? rng.below(none) : none;
      break;
    }
  }
  return ex;
}

}  // namespace

ClassGrid ClassGrid::for_classes(std::size_t k) {
  if (k < 2) throw ContractError("class grid needs at least 2 classes");
  ClassGrid g;
  g.classes = k;
  if (k == 2) {
    g.groups = g.members = 2;
    g.parity = true;
    return g;
  }
  g.members = static_cast<std::size_t>(std::ceil(std::sqrt(static_cast<double>(k))));
  g.groups = (k + g.members - 1) / g.members;
  if (g.members > 4) throw ContractError("class grid supports at most 16 classes");
  return g;
}

std::size_t ClassGrid::label(std::size_t group, std::size_t member) const {
  if (parity) return (group + member) % 2;
  return group * members + member;
}

std::vector<std::pair<std::size_t, std::size_t>> ClassGrid::cells(std::size_t c) const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t m = 0; m < members; ++m) {
      if (label(g, m) == c) out.emplace_back(g, m);
    }
  }
  return out;
}

std::string signature_token(std::size_t group, std::size_t j) {
  return "sig" + std::to_string(group) + static_cast<char>('a' + j);
}

void SyntheticSpec::validate() const {
  const std::size_t k = LabelVocabulary::for_task(task).size();
  if (n_train == 0 || n_val == 0 || n_test == 0) {
    throw ConfigError("synthetic split sizes must be positive");
  }
  if (!class_balance.empty()) {
    if (class_balance.size() != k) {
      throw ConfigError("class balance lists " + std::to_string(class_balance.size()) +
                        " weights for " + std::to_string(k) + " classes");
    }
    double total = 0.0;
    for (double w : class_balance) {
      if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("class weights must be >= 0");
      total += w;
    }
    if (!(total > 0.0)) throw ConfigError("class weights sum to zero");
  }
  if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) {
    throw ConfigError("noise rate must lie in [0, 1]");
  }
  if (image_size < 8 || image_size % 2 != 0) {
    throw ConfigError("synthetic image size must be even and at least 8");
  }
}

std::vector<std::size_t> class_counts(const SyntheticSpec& spec, std::size_t n) {
  const std::size_t k = LabelVocabulary::for_task(spec.task).size();
  std::vector<double> w = spec.class_balance;
  if (w.empty()) w.assign(k, 1.0);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> counts(k);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < k; ++c) {
    const double exact = static_cast<double>(n) * w[c] / total;
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    assigned += counts[c];
    remainders.emplace_back(exact - std::floor(exact), c);
  }
  // Largest remainder first, lower class index on ties.
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < n; ++i, ++assigned) ++counts[remainders[i].second];
  return counts;
}

std::vector<SyntheticItem> synthesize_split(const SyntheticSpec& spec,
                                            std::string_view split) {
  spec.validate();
  const auto it = std::find(kSplitNames.begin(), kSplitNames.end(), split);
  if (it == kSplitNames.end()) {
    throw ContractError("unknown split '" + std::string(split) + "'");
  }
  const std::size_t sizes[3] = {spec.n_train, spec.n_val, spec.n_test};
  const std::size_t n = sizes[it - kSplitNames.begin()];
  const std::size_t k = LabelVocabulary::for_task(spec.task).size();
  const ClassGrid grid = ClassGrid::for_classes(k);
  RandomStream rng(spec.seed, "synthetic." + std::string(split));
  const auto counts = class_counts(spec, n);

  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < k; ++c) labels.insert(labels.end(), counts[c], c);
  shuffle(labels, rng);
  const auto n_noisy =
      static_cast<std::size_t>(std::llround(spec.noise_rate * static_cast<double>(n)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  shuffle(order, rng);
  std::vector<bool> noisy(n, false);
  for (std::size_t i = 0; i < n_noisy; ++i) noisy[order[i]] = true;

  std::vector<SyntheticItem> items;
  items.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto cells = grid.cells(labels[i]);
    auto [group, member] = cells[rng.below(cells.size())];
    if (noisy[i]) {
      // Move one modality to another cell so it disagrees with the label.
      if (rng.below(2) == 0 && grid.groups > 1) {
        group = (group + 1 + rng.below(grid.groups - 1)) % grid.groups;
      } else {
        member = (member + 1 + rng.below(grid.members - 1)) % grid.members;
      }
    }
    char name[32];
    std::snprintf(name, sizeof name, "%s-%05zu", std::string(split).c_str(), i);
    MultimodalExample ex;
    ex.id = name;
    ex.title = make_title(group, rng);
    ex.caption = make_caption(rng);
    ex.image_path = "images/" + ex.id + ".pgm";
    GrayImage image = make_image(spec.image_size, member, rng);
    items.push_back({with_label(std::move(ex), spec.task, labels[i], rng), std::move(image)});
  }
  return items;
}

SyntheticSummary generate_synthetic(const SyntheticSpec& spec,
                                    const std::filesystem::path& dir) {
  spec.validate();
  const std::size_t k = LabelVocabulary::for_task(spec.task).size();
  const ClassGrid grid = ClassGrid::for_classes(k);
  std::filesystem::create_directories(dir / "images");

  SyntheticSummary summary;
  json files = json::object();
  const std::size_t sizes[3] = {spec.n_train, spec.n_val, spec.n_test};
  for (std::size_t s = 0; s < 3; ++s) {
    summary.counts.push_back(class_counts(spec, sizes[s]));
    std::vector<MultimodalExample> records;
    for (auto& item : synthesize_split(spec, kSplitNames[s])) {
      write_pgm(dir / item.example.image_path, item.image);
      records.push_back(std::move(item.example));
    }
    const auto path = split_file(dir, kSplitNames[s]);
    write_records(path, records);
    files[path.filename().string()] = file_checksum(path);
  }

  // Combined digest of every image, in file-name order.
  std::vector<std::filesystem::path> images;
  for (const auto& e : std::filesystem::directory_iterator(dir / "images")) {
    images.push_back(e.path());
  }
  std::sort(images.begin(), images.end());
  std::string digests;
  for (const auto& p : images) digests += p.filename().string() + ":" + file_checksum(p) + "\n";
  char images_digest[17];
  std::snprintf(images_digest, sizeof images_digest, "%016llx",
                static_cast<unsigned long long>(fnv1a64(digests)));

  json manifest;
  manifest["generator"] = "synthetic-conjunction";
  manifest["seed"] = spec.seed;
  manifest["task"] = std::string(task_name(spec.task));
  manifest["classes"] = k;
  manifest["groups"] = grid.groups;
  manifest["members"] = grid.members;
  manifest["parity"] = grid.parity;
  manifest["n_train"] = spec.n_train;
  manifest["n_val"] = spec.n_val;
  manifest["n_test"] = spec.n_test;
  manifest["class_balance"] = spec.class_balance;
  manifest["noise_rate"] = spec.noise_rate;
  manifest["image_size"] = spec.image_size;
  manifest["class_counts"] = summary.counts;
  manifest["files"] = files;
  manifest["images"] = images.size();
  manifest["images_checksum"] = images_digest;

  summary.manifest = dir / "manifest.json";
  std::ofstream out(summary.manifest, std::ios::trunc);
  out << manifest.dump(2) << "\n";
  if (!out) throw Error("cannot write " + summary.manifest.string());
  return summary;
}

}  // namespace mmtf
