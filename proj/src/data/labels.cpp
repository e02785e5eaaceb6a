#include "mmtf/labels.hpp"

#include <algorithm>
#include <cctype>

#include "mmtf/errors.hpp"

namespace mmtf {

namespace {

std::string canonical(std::string_view label) {
  std::string out;
  for (char c : label) {
    const auto u = static_cast<unsigned char>(c);
    if (c == ' ' || c == '_') {
      out.push_back('-');
    } else {
      out.push_back(static_cast<char>(std::tolower(u)));
    }
  }
  // MSED's own statistics table spells this class "social-contract".
  if (out == "social-contract") out = "social-contact";
  if (out == "not-desired") out = "not-desire";
  return out;
}

constexpr std::size_t kDesireNone = 6;

}  // namespace

std::string_view task_name(Task task) {
  switch (task) {
    case Task::kSentiment: return "sentiment";
    case Task::kEmotion: return "emotion";
    case Task::kDesire: return "desire";
    case Task::kBinaryDesire: return "binary_desire";
  }
  return "?";
}

Task parse_task(std::string_view name) {
  for (Task t : kAllTasks) {
    if (task_name(t) == name) return t;
  }
  throw ConfigError("unknown task '" + std::string(name) +
                    "' (expected sentiment, emotion, desire or binary_desire)");
}

const LabelVocabulary& LabelVocabulary::for_task(Task task) {
  static const LabelVocabulary sentiment(
      Task::kSentiment, {"positive", "neutral", "negative"});
  static const LabelVocabulary emotion(
      Task::kEmotion,
      {"happiness", "sad", "neutral", "disgust", "anger", "fear"});
  static const LabelVocabulary desire(
      Task::kDesire, {"vengeance", "curiosity", "social-contact", "family",
                      "tranquility", "romance", "none"});
  static const LabelVocabulary binary(Task::kBinaryDesire,
                                      {"desire", "not-desire"});
  switch (task) {
    case Task::kSentiment: return sentiment;
    case Task::kEmotion: return emotion;
    case Task::kDesire: return desire;
    case Task::kBinaryDesire: return binary;
  }
  throw ContractError("unknown task");
}

const std::string& LabelVocabulary::name(std::size_t index) const {
  if (index >= labels_.size()) {
    throw LabelError("label index " + std::to_string(index) + " outside [0, " +
                     std::to_string(labels_.size()) + ") for task " +
                     std::string(task_name(task_)));
  }
  return labels_[index];
}

std::size_t LabelVocabulary::index_of(std::string_view label) const {
  const std::string key = canonical(label);
  auto it = std::find(labels_.begin(), labels_.end(), key);
  if (it == labels_.end()) {
    throw LabelError("label '" + std::string(label) +
                     "' is not in the " + std::string(task_name(task_)) +
                     " vocabulary");
  }
  return static_cast<std::size_t>(it - labels_.begin());
}

std::size_t binarize_desire(std::size_t desire_index) {
  const auto& desire = LabelVocabulary::for_task(Task::kDesire);
  desire.name(desire_index);  // range check
  return desire_index == kDesireNone ? 1 : 0;
}

std::string_view binarize_desire(std::string_view desire_label) {
  const auto& desire = LabelVocabulary::for_task(Task::kDesire);
  const auto& binary = LabelVocabulary::for_task(Task::kBinaryDesire);
  return binary.name(binarize_desire(desire.index_of(desire_label)));
}

}  // namespace mmtf
