#include "skipthink/artifact_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace skipthink {

std::string to_hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return std::string(buf);
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail("io", "cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  if (!in.good() && !in.eof()) fail("io", "read failed: " + path);
  return ss.str();
}

void write_file(const std::string& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail("io", "cannot write " + path);
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out.good()) fail("io", "write failed: " + path);
}

uint64_t hash_file(const std::string& path) {
  std::string bytes = read_file(path);
  return fnv1a64(bytes);
}

void require_fresh(const std::string& path, bool force) {
  if (!force && std::filesystem::exists(path)) fail("exists", path);
}

json provenance_header(const std::string& artifact,
                       const std::vector<std::pair<std::string, std::string>>& inputs,
                       uint64_t seed) {
  json h;
  h["artifact"] = artifact;
  h["schema"] = 1;
  h["seed"] = seed;
  json in = json::object();
  for (const auto& [role, path] : inputs) {
    json e;
    e["path"] = path;
    e["fnv64"] = to_hex(hash_file(path));
    in[role] = e;
  }
  h["inputs"] = in;
  return h;
}

std::vector<std::string> verify_provenance(const json& header) {
  std::vector<std::string> problems;
  if (!header.contains("inputs")) return problems;
  for (auto& [role, e] : header.at("inputs").items()) {
    const std::string path = e.at("path").get<std::string>();
    const std::string want = e.at("fnv64").get<std::string>();
    std::string got;
    try {
      got = to_hex(hash_file(path));
    } catch (const Error&) {
      problems.push_back(role + ": missing input " + path);
      continue;
    }
    if (got != want)
      problems.push_back(role + ": hash mismatch for " + path + " (recorded " +
                         want + ", found " + got + ")");
  }
  return problems;
}

}  // namespace skipthink
