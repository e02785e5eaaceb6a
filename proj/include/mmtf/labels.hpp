#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace mmtf {

enum class Task { kSentiment, kEmotion, kDesire, kBinaryDesire };

inline constexpr std::array<Task, 4> kAllTasks = {
    Task::kSentiment, Task::kEmotion, Task::kDesire, Task::kBinaryDesire};

std::string_view task_name(Task task);
// Accepts "sentiment", "emotion", "desire", "binary_desire".
Task parse_task(std::string_view name);

// Ordered label set of one task. Label index == position in labels().
class LabelVocabulary {
 public:
  static const LabelVocabulary& for_task(Task task);

  Task task() const { return task_; }
  const std::vector<std::string>& labels() const { return labels_; }
  std::size_t size() const { return labels_.size(); }
  const std::string& name(std::size_t index) const;
  // Case-insensitive; spaces and underscores count as '-'. Throws LabelError.
  std::size_t index_of(std::string_view label) const;

 private:
  LabelVocabulary(Task task, std::vector<std::string> labels)
      : task_(task), labels_(std::move(labels)) {}
  Task task_;
  std::vector<std::string> labels_;
};

// 7-class desire index -> binary index ("none" -> not-desire, rest -> desire).
std::size_t binarize_desire(std::size_t desire_index);
std::string_view binarize_desire(std::string_view desire_label);

}  // namespace mmtf
