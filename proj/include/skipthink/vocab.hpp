#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace skipthink {

// Character-level vocabulary with reserved control tokens.
//
// Char tokens: ids 0..94 are printable ASCII bytes 32..126, id 95 is '\n'.
// Control ids follow and never collide with char ids.  decode() renders
// controls with the spellings below; encode() maps raw text only, so
// encode(decode(ids)) is the identity for any text free of those spellings.
class Vocabulary {
 public:
  static constexpr int kMaxStages = 10;  // stage tags [0] .. [9]

  static constexpr int kChars = 96;
  static constexpr int kStage0 = kChars;                 // "[m]"
  static constexpr int kAnswerTag = kStage0 + kMaxStages;  // "[answer]"
  static constexpr int kSkipTag = kAnswerTag + 1;          // "[skip]"
  static constexpr int kThought = kSkipTag + 1;            // "[thought]"
  static constexpr int kBegin = kThought + 1;              // "<begin>"
  static constexpr int kEndChunk = kBegin + 1;             // "<eoc>"
  static constexpr int kEndSeq = kEndChunk + 1;            // "<eos>"
  static constexpr int kAnswerMark = kEndSeq + 1;          // "<answer>"
  static constexpr int kSize = kAnswerMark + 1;

  static int size() { return kSize; }
  static int stage_tag(int m);          // throws "contract" if m out of range
  static bool is_control(int id) { return id >= kChars && id < kSize; }
  static bool is_char(int id) { return id >= 0 && id < kChars; }

  // -1 when the byte has no token
  static int char_id(char c);

  // throws "data" naming the offending byte when text is not encodable
  static std::vector<int> encode(std::string_view text);
  static std::string decode(const std::vector<int>& ids);
  static std::string token_spelling(int id);

  // stable fingerprint of the id<->spelling table; stored in checkpoints
  static uint64_t table_hash();
};

}  // namespace skipthink
