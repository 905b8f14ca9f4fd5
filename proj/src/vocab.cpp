#include "skipthink/vocab.hpp"

#include <sstream>

#include "skipthink/common.hpp"

namespace skipthink {

int Vocabulary::stage_tag(int m) {
  if (m < 0 || m >= kMaxStages)
    fail("contract", "stage tag out of range: " + std::to_string(m));
  return kStage0 + m;
}

int Vocabulary::char_id(char c) {
  unsigned char u = static_cast<unsigned char>(c);
  if (u >= 32 && u <= 126) return u - 32;
  if (c == '\n') return 95;
  return -1;
}

std::vector<int> Vocabulary::encode(std::string_view text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (size_t i = 0; i < text.size(); ++i) {
    int id = char_id(text[i]);
    if (id < 0)
      fail("data", "unencodable byte 0x" +
                       to_hex(static_cast<unsigned char>(text[i])) +
                       " at offset " + std::to_string(i));
    out.push_back(id);
  }
  return out;
}

std::string Vocabulary::token_spelling(int id) {
  if (id < 0 || id >= kSize)
    fail("contract", "token id out of range: " + std::to_string(id));
  if (id < 95) return std::string(1, static_cast<char>(id + 32));
  if (id == 95) return "\n";
  if (id >= kStage0 && id < kStage0 + kMaxStages)
    return "[" + std::to_string(id - kStage0) + "]";
  switch (id) {
    case kAnswerTag: return "[answer]";
    case kSkipTag: return "[skip]";
    case kThought: return "[thought]";
    case kBegin: return "<begin>";
    case kEndChunk: return "<eoc>";
    case kEndSeq: return "<eos>";
    case kAnswerMark: return "<answer>";
    default: break;
  }
  fail("contract", "unmapped token id " + std::to_string(id));
}

std::string Vocabulary::decode(const std::vector<int>& ids) {
  std::string out;
  out.reserve(ids.size());
  for (int id : ids) out += token_spelling(id);
  return out;
}

uint64_t Vocabulary::table_hash() {
  std::ostringstream spec;
  for (int id = 0; id < kSize; ++id) spec << id << '=' << token_spelling(id) << ';';
  return fnv1a64(spec.str());
}

}  // namespace skipthink
