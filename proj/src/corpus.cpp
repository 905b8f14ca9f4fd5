#include "skipthink/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <set>
#include <sstream>

namespace skipthink {

namespace {

const std::vector<std::string> kNamePool = {
    "Ann", "Bob", "Cal", "Dee", "Eli", "Fay", "Gus", "Hal",
    "Ida", "Jan", "Kim", "Lou", "Mae", "Ned", "Ora", "Pam",
    "Rex", "Sal", "Tia", "Uma", "Vic", "Wes", "Yul", "Zoe"};

const std::vector<std::string> kColorPool = {
    "red",  "blue", "pink", "gold", "teal", "gray", "lime", "cyan",
    "plum", "rust", "jade", "navy", "ruby", "sand", "mint", "rose"};

const std::vector<std::string> kItemPool = {"plums", "pears",  "coins",
                                            "books", "shells", "cards",
                                            "stamps", "stones"};

constexpr const char* kAnswerMarker = "<answer>";

std::string sample_id(TaskKind kind, uint64_t seed, int index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%05d", index);
  return to_string(kind) + "-" + std::to_string(seed) + "-" + buf;
}

// draw k distinct items from pool
std::vector<std::string> draw_distinct(Rng& rng,
                                       const std::vector<std::string>& pool,
                                       int k) {
  if (k > static_cast<int>(pool.size()))
    fail("config", "pool too small: need " + std::to_string(k));
  std::vector<int> idx(pool.size());
  for (size_t i = 0; i < pool.size(); ++i) idx[i] = static_cast<int>(i);
  rng.shuffle(idx);
  std::vector<std::string> out;
  for (int i = 0; i < k; ++i) out.push_back(pool[idx[i]]);
  return out;
}

std::string join_steps(const std::vector<std::string>& steps) {
  std::string out;
  for (size_t i = 0; i < steps.size(); ++i) {
    if (i) out += '\n';
    out += steps[i];
  }
  return out;
}

Sample finish(std::string id, std::string question, std::string answer,
              std::vector<std::string> steps, TaskKind kind) {
  Sample s;
  s.id = std::move(id);
  s.question = std::move(question);
  s.answer = std::move(answer);
  s.rationale = join_steps(steps);
  s.steps = std::move(steps);
  s.kind = kind;
  if (s.answer.empty()) fail("contract", s.id + ": empty answer");
  if (s.rationale.empty()) fail("contract", s.id + ": empty rationale");
  return s;
}

bool is_blank(const std::string& s) {
  return std::all_of(s.begin(), s.end(),
                     [](unsigned char c) { return std::isspace(c); });
}

}  // namespace

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::object_swap: return "object_swap";
    case TaskKind::last_letter: return "last_letter";
    case TaskKind::arithmetic: return "arithmetic";
    case TaskKind::imported: return "imported";
  }
  fail("contract", "bad task kind");
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "object_swap") return TaskKind::object_swap;
  if (s == "last_letter") return TaskKind::last_letter;
  if (s == "arithmetic") return TaskKind::arithmetic;
  if (s == "imported") return TaskKind::imported;
  fail("data", "unknown task kind '" + s + "'");
}

std::vector<std::string> split_rationale(const std::string& raw) {
  std::vector<std::string> steps;
  size_t start = 0;
  while (start <= raw.size()) {
    size_t nl = raw.find('\n', start);
    size_t end = (nl == std::string::npos) ? raw.size() : nl;
    std::string line = raw.substr(start, end - start);
    if (!line.empty() && !is_blank(line)) steps.push_back(line);
    if (nl == std::string::npos) break;
    start = nl + 1;
  }
  if (steps.empty()) fail("data", "rationale has no non-empty lines");
  return steps;
}

Sample make_object_swap(const std::vector<std::string>& names,
                        const std::vector<std::string>& colors,
                        const std::vector<std::pair<int, int>>& swap_pairs,
                        int asked, const std::vector<int>& choice_order,
                        const std::string& id) {
  const int n = static_cast<int>(names.size());
  if (n < 2 || static_cast<int>(colors.size()) != n)
    fail("contract", id + ": need matching names/colors, at least 2");
  if (asked < 0 || asked >= n) fail("contract", id + ": bad asked entity");
  if (static_cast<int>(choice_order.size()) != n)
    fail("contract", id + ": bad choice order");
  if (swap_pairs.empty()) fail("contract", id + ": need at least one swap");

  std::vector<int> held(n);
  for (int e = 0; e < n; ++e) held[e] = e;

  auto bindings = [&] {
    std::string s;
    for (int e = 0; e < n; ++e) {
      if (e) s += ", ";
      s += names[e] + "-" + colors[held[e]];
    }
    return s;
  };

  // Every step cites its referents verbatim: swaps are numbered in the
  // question so step k can quote "Swap k: A and B" instead of counting
  // unnumbered sentences, and the closing step spells out the lookup the
  // answer needs.  Small character-level students learn anchored copying
  // long before they learn to count or chain unanchored lookups.
  std::vector<std::string> steps;
  steps.push_back("Start: " + bindings() + ".");

  // The question states the initial bindings in the same shape the rationale
  // uses, so the teacher's opening restatement is verbatim-redundant: a
  // student that drops that step can still source every binding from here.
  std::string q = "Start: " + bindings() + ". ";
  int num = 1;
  for (auto [i, j] : swap_pairs) {
    if (i < 0 || i >= n || j < 0 || j >= n || i == j)
      fail("contract", id + ": bad swap pair");
    std::string swap_txt = "Swap " + std::to_string(num++) + ": " + names[i] +
                           " and " + names[j] + ".";
    q += swap_txt + " ";
    std::swap(held[i], held[j]);
    steps.push_back(swap_txt + " " + bindings() + ".");
  }
  q += "Choices:";
  for (int c = 0; c < n; ++c) {
    q += " " + colors[choice_order[c]] + "(";
    q += static_cast<char>('A' + c);
    q += ")";
  }
  q += ". Now: " + names[asked] + "?";

  int final_color = held[asked];
  int pos = -1;
  for (int c = 0; c < n; ++c)
    if (choice_order[c] == final_color) pos = c;
  if (pos < 0) fail("contract", id + ": choice order misses final color");
  // The conclusion reuses three cue shapes verbatim — the question's
  // "Now: <name>", the bindings' "<name>-<color>", and the choices'
  // "<color>(<letter>)" — so each of its decisions is a copy that *follows*
  // its cue text; nothing has to be looked up backwards.
  steps.push_back("Now: " + names[asked] + "-" + colors[final_color] + "(" +
                  static_cast<char>('A' + pos) + ").");
  // Closing summary in the teacher's usual style: it restates the final
  // bindings and the chosen letter, all copied from the lines above, and
  // decides nothing new — the one step a student can legitimately skip once
  // its answer survives the step's absence.
  steps.push_back("So the final colors are " + bindings() +
                  ", and the answer is (" +
                  std::string(1, static_cast<char>('A' + pos)) + ").");
  std::string answer(1, static_cast<char>('a' + pos));
  return finish(id, q, answer, steps, TaskKind::object_swap);
}

Sample make_last_letter(const std::vector<std::string>& words,
                        const std::string& id) {
  if (words.empty()) fail("contract", id + ": need at least one word");
  std::string q = "Concatenate the last letters of the words:";
  std::string result;
  std::vector<std::string> steps;
  for (size_t i = 0; i < words.size(); ++i) {
    if (words[i].empty()) fail("contract", id + ": empty word");
    q += (i ? ", " : " ") + words[i];
    char last = static_cast<char>(
        std::tolower(static_cast<unsigned char>(words[i].back())));
    result += last;
    steps.push_back("The last letter of " + words[i] + " is " +
                    std::string(1, last) + ".");
  }
  q += ".";
  steps.push_back("Concatenated: " + result + ".");
  return finish(id, q, result, steps, TaskKind::last_letter);
}

Sample make_arithmetic(const std::string& subject, const std::string& item,
                       const std::vector<std::string>& donors,
                       const std::vector<long long>& terms,
                       const std::string& id) {
  if (terms.size() < 2) fail("contract", id + ": need at least two terms");
  if (donors.size() + 1 < terms.size())
    fail("contract", id + ": need a donor per gain");

  std::string q = subject + " had " + std::to_string(terms[0]) + " " + item + ". ";
  std::vector<std::string> steps;
  long long run = terms[0];
  for (size_t i = 1; i < terms.size(); ++i) {
    long long d = terms[i];
    long long next = run + d;
    if (d >= 0) {
      q += donors[i - 1] + " gave " + subject + " " + std::to_string(d) + " " +
           item + ". ";
      steps.push_back(std::to_string(run) + " + " + std::to_string(d) + " = " +
                      std::to_string(next) + ".");
    } else {
      q += subject + " lost " + std::to_string(-d) + " " + item + ". ";
      steps.push_back(std::to_string(run) + " - " + std::to_string(-d) +
                      " = " + std::to_string(next) + ".");
    }
    run = next;
  }
  q += "How many " + item + " does " + subject + " have?";
  steps.push_back("So " + subject + " has " + std::to_string(run) + " " + item +
                  ".");
  return finish(id, q, std::to_string(run), steps, TaskKind::arithmetic);
}

std::vector<Sample> generate(const TaskConfig& cfg) {
  if (cfg.count < 1) fail("config", "sample count must be positive");
  Rng rng(cfg.seed);
  std::vector<Sample> out;
  out.reserve(cfg.count);
  for (int i = 0; i < cfg.count; ++i) {
    std::string id = sample_id(cfg.kind, cfg.seed, i);
    switch (cfg.kind) {
      case TaskKind::object_swap: {
        if (cfg.entities < 2 || cfg.swaps < 1)
          fail("config", "object_swap needs >=2 entities, >=1 swaps");
        if (cfg.entities > 8)
          fail("config", "object_swap supports at most 8 entities");
        auto names = draw_distinct(rng, kNamePool, cfg.entities);
        // Within one sample every color must end in a different letter, so the
        // short suffix a reader scans before "(" is unambiguous.  The pool has
        // eight distinct final letters, hence the entity cap above.
        auto colors = draw_distinct(rng, kColorPool, cfg.entities);
        auto finals_clash = [&colors] {
          std::set<char> seen;
          for (const auto& c : colors) seen.insert(c.back());
          return seen.size() != colors.size();
        };
        while (finals_clash()) colors = draw_distinct(rng, kColorPool, cfg.entities);
        std::vector<std::pair<int, int>> pairs;
        for (int k = 0; k < cfg.swaps; ++k) {
          int a = rng.index(cfg.entities);
          int b = rng.index(cfg.entities - 1);
          if (b >= a) ++b;
          pairs.emplace_back(a, b);
        }
        int asked = rng.index(cfg.entities);
        std::vector<int> order(cfg.entities);
        for (int c = 0; c < cfg.entities; ++c) order[c] = c;
        rng.shuffle(order);
        out.push_back(make_object_swap(names, colors, pairs, asked, order, id));
        break;
      }
      case TaskKind::last_letter: {
        if (cfg.words < 1) fail("config", "last_letter needs >=1 words");
        std::vector<std::string> words;
        for (int k = 0; k < cfg.words; ++k)
          words.push_back(kNamePool[rng.index(kNamePool.size())]);
        out.push_back(make_last_letter(words, id));
        break;
      }
      case TaskKind::arithmetic: {
        if (cfg.terms < 2 || cfg.max_operand < 1)
          fail("config", "arithmetic needs >=2 terms, positive operands");
        auto people = draw_distinct(rng, kNamePool, cfg.terms);
        std::string subject = people[0];
        std::vector<std::string> donors(people.begin() + 1, people.end());
        std::string item = kItemPool[rng.index(kItemPool.size())];
        std::vector<long long> terms;
        long long run = 1 + static_cast<long long>(rng.below(cfg.max_operand));
        terms.push_back(run);
        for (int k = 1; k < cfg.terms; ++k) {
          long long x = 1 + static_cast<long long>(rng.below(cfg.max_operand));
          bool minus = rng.below(2) == 1 && run - x >= 0;
          long long d = minus ? -x : x;
          terms.push_back(d);
          run += d;
        }
        out.push_back(make_arithmetic(subject, item, donors, terms, id));
        break;
      }
      case TaskKind::imported:
        fail("config", "cannot generate imported samples");
    }
  }
  return out;
}

std::string answer_presentation(const Sample& s) {
  if (s.kind == TaskKind::object_swap) {
    std::string out = "(";
    out += static_cast<char>(
        std::toupper(static_cast<unsigned char>(s.answer[0])));
    out += ")";
    return out;
  }
  return s.answer;
}

std::string answer_line(const Sample& s) {
  return std::string(kAnswerMarker) + " " + answer_presentation(s);
}

namespace {

std::string canonical_int(const std::string& digits, bool negative) {
  size_t i = 0;
  while (i + 1 < digits.size() && digits[i] == '0') ++i;
  std::string v = digits.substr(i);
  if (v == "0") return "0";
  return negative ? "-" + v : v;
}

}  // namespace

std::optional<std::string> extract_answer(const std::string& text,
                                          TaskKind kind) {
  size_t pos = text.find(kAnswerMarker);
  if (pos == std::string::npos) return std::nullopt;
  std::string tail = text.substr(pos + std::string(kAnswerMarker).size());
  size_t nl = tail.find('\n');
  if (nl != std::string::npos) tail = tail.substr(0, nl);
  size_t b = 0;
  while (b < tail.size() && tail[b] == ' ') ++b;
  tail = tail.substr(b);
  if (tail.empty()) return std::nullopt;

  switch (kind) {
    case TaskKind::object_swap: {
      char c = tail[0] == '(' && tail.size() > 1 ? tail[1] : tail[0];
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (c < 'a' || c > 'z') return std::nullopt;
      return std::string(1, c);
    }
    case TaskKind::arithmetic: {
      for (size_t i = 0; i < tail.size(); ++i) {
        bool neg = tail[i] == '-' && i + 1 < tail.size() &&
                   std::isdigit(static_cast<unsigned char>(tail[i + 1]));
        if (neg || std::isdigit(static_cast<unsigned char>(tail[i]))) {
          size_t j = i + (neg ? 1 : 0);
          std::string digits;
          while (j < tail.size() &&
                 std::isdigit(static_cast<unsigned char>(tail[j])))
            digits += tail[j++];
          return canonical_int(digits, neg);
        }
      }
      return std::nullopt;
    }
    case TaskKind::last_letter:
    case TaskKind::imported: {
      std::string word;
      for (char c : tail) {
        if (std::isalpha(static_cast<unsigned char>(c)))
          word += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        else
          break;
      }
      if (word.empty()) return std::nullopt;
      return word;
    }
  }
  return std::nullopt;
}

void save_dataset(const std::string& path, const std::vector<Sample>& samples,
                  const json& header) {
  std::ostringstream out;
  if (!header.is_null()) out << header.dump() << '\n';
  for (const Sample& s : samples) {
    json j;
    j["id"] = s.id;
    j["question"] = s.question;
    j["answer"] = s.answer;
    j["rationale"] = s.rationale;
    j["task_kind"] = to_string(s.kind);
    out << j.dump() << '\n';
  }
  write_file(path, out.str());
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail("io", "cannot open " + path);
  Dataset ds;
  ds.header = nullptr;
  std::string line;
  int lineno = 0;
  std::set<std::string> seen;
  auto where = [&](const std::string& what) {
    return path + ":" + std::to_string(lineno) + ": " + what;
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      fail("data", where(std::string("bad json: ") + e.what()));
    }
    if (!j.is_object()) fail("data", where("record is not an object"));
    if (lineno == 1 && j.contains("artifact")) {
      ds.header = j;
      continue;
    }
    Sample s;
    for (const char* f : {"id", "question", "answer", "rationale", "task_kind"}) {
      if (!j.contains(f)) fail("data", where("missing field '" + std::string(f) + "'"));
      if (!j.at(f).is_string())
        fail("data", where("field '" + std::string(f) + "' is not a string"));
    }
    s.id = j.at("id").get<std::string>();
    s.question = j.at("question").get<std::string>();
    s.answer = j.at("answer").get<std::string>();
    s.rationale = j.at("rationale").get<std::string>();
    try {
      s.kind = task_kind_from_string(j.at("task_kind").get<std::string>());
      if (s.answer.empty()) fail("data", "empty field 'answer'");
      if (s.rationale.empty()) fail("data", "empty field 'rationale'");
      s.steps = split_rationale(s.rationale);
    } catch (const Error& e) {
      fail("data", where(e.what()));
    }
    if (!seen.insert(s.id).second) fail("data", where("duplicate id " + s.id));
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

std::pair<std::vector<Sample>, std::vector<Sample>> hash_split(
    const std::vector<Sample>& samples, int n_dev, uint64_t seed) {
  if (n_dev < 0 || n_dev > static_cast<int>(samples.size()))
    fail("config", "dev size out of range");
  // seed first: a trailing seed would only get one round of FNV diffusion,
  // leaving the ranking (and so the split) identical across nearby seeds
  std::vector<std::pair<uint64_t, std::string>> ranked;
  for (const Sample& s : samples)
    ranked.emplace_back(fnv1a64(s.id, fnv1a64_u64(seed)), s.id);
  std::sort(ranked.begin(), ranked.end());
  std::set<std::string> dev_ids;
  for (int i = 0; i < n_dev; ++i) dev_ids.insert(ranked[i].second);
  std::vector<Sample> train, dev;
  for (const Sample& s : samples)
    (dev_ids.count(s.id) ? dev : train).push_back(s);
  return {train, dev};
}

}  // namespace skipthink
