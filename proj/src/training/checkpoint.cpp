#include "mmtf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mmtf/errors.hpp"
#include "mmtf/random.hpp"

namespace mmtf {

namespace {

constexpr std::string_view kMagic = "MMTFCKPT";

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

class Writer {
 public:
  template <typename T>
  void pod(T value) {
    char raw[sizeof(T)];
    std::memcpy(raw, &value, sizeof(T));
    bytes_.append(raw, sizeof(T));
  }
  void str(std::string_view s) {
    pod<std::uint64_t>(s.size());
    bytes_.append(s);
  }
  void raw(std::string_view s) { bytes_.append(s); }
  std::string& bytes() { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string_view bytes, std::string source)
      : bytes_(bytes), source_(std::move(source)) {}

  template <typename T>
  T pod() {
    need(sizeof(T));
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string str() {
    const auto n = pod<std::uint64_t>();
    need(n);
    std::string s(bytes_.substr(pos_, n));
    pos_ += n;
    return s;
  }
  std::string_view raw(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) {
      throw FormatError(source_ + ": checkpoint truncated");
    }
  }
  std::string_view bytes_;
  std::string source_;
  std::size_t pos_ = 0;
};

void write_vocab(Writer& w, const TokenVocabulary& vocab) {
  w.pod<std::uint64_t>(vocab.size());
  for (const auto& t : vocab.tokens()) w.str(t);
}

TokenVocabulary read_vocab(Reader& r) {
  const auto n = r.pod<std::uint64_t>();
  std::vector<std::string> tokens;
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.str());
  return TokenVocabulary::from_tokens(std::move(tokens));
}

}  // namespace

Checkpoint capture(const MmtfModel& model, std::size_t epoch, double val_loss) {
  Checkpoint c;
  c.config = model.config();
  c.epoch = epoch;
  c.val_loss = val_loss;
  c.vilt_vocab = model.vilt_vocab();
  c.vault_vocab = model.vault_vocab();
  c.rng_states = model.rng_states();
  for (const auto& e : model.parameters().entries()) {
    c.parameters.push_back(
        {e.name, e.tensor.shape(), {e.tensor.data().begin(), e.tensor.data().end()}});
  }
  return c;
}

std::unique_ptr<MmtfModel> restore_model(const Checkpoint& checkpoint) {
  auto model = std::make_unique<MmtfModel>(checkpoint.config, checkpoint.vilt_vocab,
                                           checkpoint.vault_vocab);
  auto& entries = model->parameters().entries();
  if (entries.size() != checkpoint.parameters.size()) {
    throw ContractError("checkpoint holds " +
                        std::to_string(checkpoint.parameters.size()) +
                        " tensors, model has " + std::to_string(entries.size()));
  }
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& blob = checkpoint.parameters[i];
    Tensor t = entries[i].tensor;
    if (blob.name != entries[i].name || blob.shape != t.shape()) {
      throw ContractError("checkpoint tensor '" + blob.name + "' " +
                          shape_to_string(blob.shape) + " does not match '" +
                          entries[i].name + "' " + shape_to_string(t.shape()));
    }
    std::copy(blob.values.begin(), blob.values.end(), t.mutable_data().begin());
  }
  model->restore_rng_states(checkpoint.rng_states);
  return model;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& c) {
  Writer w;
  w.raw(kMagic);
  w.pod<std::uint32_t>(kCheckpointVersion);
  w.str(c.config.to_text());
  w.pod<std::uint64_t>(c.epoch);
  w.pod<double>(c.val_loss);
  write_vocab(w, c.vilt_vocab);
  write_vocab(w, c.vault_vocab);
  w.pod<std::uint64_t>(c.rng_states.size());
  for (const auto& [name, state] : c.rng_states) {
    w.str(name);
    w.str(state);
  }
  w.pod<std::uint64_t>(c.parameters.size());
  for (const auto& p : c.parameters) {
    w.str(p.name);
    w.pod<std::uint64_t>(p.shape.size());
    for (std::size_t d : p.shape) w.pod<std::uint64_t>(d);
    for (double v : p.values) w.pod<double>(v);
  }
  const std::uint64_t digest = fnv1a64(w.bytes());
  w.pod<std::uint64_t>(digest);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write checkpoint " + path.string());
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  if (!out) throw Error("short write to " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path.string());
  const std::string bytes{std::istreambuf_iterator<char>(in),
                          std::istreambuf_iterator<char>()};
  const std::string source = path.string();
  if (bytes.size() < kMagic.size() + sizeof(std::uint64_t) ||
      std::string_view(bytes).substr(0, kMagic.size()) != kMagic) {
    throw FormatError(source + ": not a checkpoint file");
  }
  const std::string_view body(bytes.data(), bytes.size() - sizeof(std::uint64_t));
  std::uint64_t stored = 0;
  std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
  if (stored != fnv1a64(body)) throw FormatError(source + ": checkpoint digest mismatch");

  Reader r(body, source);
  r.raw(kMagic.size());
  const auto version = r.pod<std::uint32_t>();
  if (version != kCheckpointVersion) {
    throw FormatError(source + ": unsupported checkpoint version " +
                      std::to_string(version));
  }
  Checkpoint c;
  c.config = TrainConfig::from_text(r.str());
  c.epoch = r.pod<std::uint64_t>();
  c.val_loss = r.pod<double>();
  c.vilt_vocab = read_vocab(r);
  c.vault_vocab = read_vocab(r);
  const auto n_states = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_states; ++i) {
    std::string name = r.str();
    c.rng_states[name] = r.str();
  }
  const auto n_params = r.pod<std::uint64_t>();
  for (std::uint64_t i = 0; i < n_params; ++i) {
    ParameterBlob p;
    p.name = r.str();
    const auto rank = r.pod<std::uint64_t>();
    for (std::uint64_t k = 0; k < rank; ++k) p.shape.push_back(r.pod<std::uint64_t>());
    const std::size_t n = shape_numel(p.shape);
    p.values.reserve(n);
    for (std::size_t k = 0; k < n; ++k) p.values.push_back(r.pod<double>());
    c.parameters.push_back(std::move(p));
  }
  if (!r.done()) throw FormatError(source + ": trailing bytes in checkpoint");
  return c;
}

}  // namespace mmtf
