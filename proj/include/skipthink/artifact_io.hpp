#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "skipthink/common.hpp"

namespace skipthink {

// ordered_json keeps insertion order so re-serialization is byte-stable
using json = nlohmann::ordered_json;

// throws "exists" unless force; callers overwrite deterministically when forced
void require_fresh(const std::string& path, bool force);

// First line of every JSONL artifact (or "provenance" object of JSON
// artifacts): names the artifact and records an FNV-1a-64 content hash of
// each input file so downstream steps can verify what produced what.
json provenance_header(
    const std::string& artifact,
    const std::vector<std::pair<std::string, std::string>>& inputs,
    uint64_t seed);

// re-hashes recorded inputs; returns one message per mismatch/missing file
std::vector<std::string> verify_provenance(const json& header);

}  // namespace skipthink
