#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "skipthink/artifact_io.hpp"

namespace skipthink {

enum class TaskKind { object_swap, last_letter, arithmetic, imported };

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);

struct Sample {
  std::string id;
  std::string question;
  std::string answer;     // normalized: choice letter / integer string / word
  std::string rationale;  // raw text; joining steps with '\n' reproduces it
  TaskKind kind = TaskKind::imported;
  std::vector<std::string> steps;  // derived via split_rationale
};

struct TaskConfig {
  TaskKind kind = TaskKind::object_swap;
  int count = 2200;
  uint64_t seed = 1;
  // object_swap
  int entities = 3;
  int swaps = 3;
  // last_letter
  int words = 3;
  // arithmetic
  int terms = 4;
  int max_operand = 40;
};

// splits on '\n', drops whitespace-only lines; throws "data" when nothing
// remains
std::vector<std::string> split_rationale(const std::string& raw);

// deterministic constructors; the generators draw their arguments from the
// seeded pools and call these, tests can call them directly
Sample make_object_swap(const std::vector<std::string>& names,
                        const std::vector<std::string>& colors,
                        const std::vector<std::pair<int, int>>& swap_pairs,
                        int asked, const std::vector<int>& choice_order,
                        const std::string& id);
Sample make_last_letter(const std::vector<std::string>& words,
                        const std::string& id);
// terms[0] is the start amount; later terms are signed deltas
Sample make_arithmetic(const std::string& subject, const std::string& item,
                       const std::vector<std::string>& donors,
                       const std::vector<long long>& terms,
                       const std::string& id);

std::vector<Sample> generate(const TaskConfig& cfg);

// answer as it appears after the answer marker: "(B)" / "62" / "nbl"
std::string answer_presentation(const Sample& s);
std::string answer_line(const Sample& s);  // "<answer> " + presentation

// scans for the "<answer>" marker; nullopt when absent; never throws on
// arbitrary model output
std::optional<std::string> extract_answer(const std::string& text,
                                          TaskKind kind);

struct Dataset {
  json header;  // null when the file has no provenance header line
  std::vector<Sample> samples;
};

void save_dataset(const std::string& path, const std::vector<Sample>& samples,
                  const json& header = nullptr);
Dataset load_dataset(const std::string& path);

// seed-stable split: ranks ids by hashing each id over a seed-keyed basis and
// holds out the first n_dev as dev; input order is preserved within each part
std::pair<std::vector<Sample>, std::vector<Sample>> hash_split(
    const std::vector<Sample>& samples, int n_dev, uint64_t seed);

}  // namespace skipthink
