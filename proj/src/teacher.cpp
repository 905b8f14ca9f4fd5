#include "skipthink/teacher.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <thread>

#include <httplib.h>

namespace skipthink {

TeacherEndpoint endpoint_from_env() {
  const char* ep = std::getenv("SKIPTHINK_TEACHER_ENDPOINT");
  if (!ep || !*ep)
    fail("config", "SKIPTHINK_TEACHER_ENDPOINT is not set");
  std::string spec = ep;
  if (spec.rfind("http://", 0) == 0) spec = spec.substr(7);
  TeacherEndpoint out;
  size_t slash = spec.find('/');
  if (slash != std::string::npos) {
    out.path = spec.substr(slash);
    spec = spec.substr(0, slash);
  }
  size_t colon = spec.find(':');
  if (colon == std::string::npos || colon + 1 >= spec.size())
    fail("config", "endpoint needs host:port, got '" + std::string(ep) + "'");
  out.host = spec.substr(0, colon);
  try {
    out.port = std::stoi(spec.substr(colon + 1));
  } catch (const std::exception&) {
    fail("config", "bad endpoint port in '" + std::string(ep) + "'");
  }
  if (const char* tok = std::getenv("SKIPTHINK_TEACHER_TOKEN")) out.token = tok;
  return out;
}

TeacherClient::TeacherClient(TeacherEndpoint ep, TeacherOptions opt)
    : ep_(std::move(ep)), opt_(opt) {
  if (ep_.host.empty() || ep_.port <= 0)
    fail("config", "teacher endpoint needs host and port");
  if (opt_.max_attempts < 1) fail("config", "max_attempts must be >= 1");
}

void TeacherClient::audit(const json& entry) {
  if (opt_.audit_path.empty()) return;
  std::ofstream out(opt_.audit_path, std::ios::app);
  if (!out) fail("io", "cannot append to " + opt_.audit_path);
  out << entry.dump() << "\n";
}

std::string TeacherClient::complete(const TeacherRequest& req) {
  if (req.prompt.empty()) fail("contract", "empty teacher prompt");
  if (req.temperature < 0) fail("contract", "negative temperature");
  if (req.max_tokens <= 0) fail("contract", "max_tokens must be positive");

  json body;
  body["prompt"] = req.prompt;
  body["temperature"] = req.temperature;
  body["max_tokens"] = req.max_tokens;
  const std::string payload = body.dump();

  std::string last_error;
  for (int attempt = 1; attempt <= opt_.max_attempts; ++attempt) {
    if (attempt > 1) {
      long long delay = static_cast<long long>(opt_.backoff_ms)
                        << (attempt - 2);
      delay = std::min<long long>(delay, opt_.backoff_cap_ms);
      std::this_thread::sleep_for(std::chrono::milliseconds(delay));
    }
    httplib::Client cli(ep_.host, ep_.port);
    httplib::Headers headers;
    if (!ep_.token.empty())
      headers.emplace("Authorization", "Bearer " + ep_.token);
    auto res = cli.Post(ep_.path, headers, payload, "application/json");

    json entry;
    entry["attempt"] = attempt;
    entry["prompt"] = req.prompt;
    if (!res) {
      entry["error"] = "no response";
      audit(entry);
      last_error = "no response from " + ep_.host + ":" +
                   std::to_string(ep_.port);
      continue;  // transient
    }
    entry["status"] = res->status;
    entry["body"] = res->body;
    audit(entry);

    if (res->status == 401 || res->status == 403)
      fail("auth", "teacher endpoint rejected the token (" +
                       std::to_string(res->status) + ")");
    if (res->status >= 500) {
      last_error = "server error " + std::to_string(res->status);
      continue;  // transient
    }
    if (res->status != 200)
      fail("protocol", "unexpected status " + std::to_string(res->status));

    json reply;
    try {
      reply = json::parse(res->body);
    } catch (const nlohmann::json::exception&) {
      fail("protocol", "reply is not json");
    }
    if (!reply.contains("completion") || !reply["completion"].is_string())
      fail("protocol", "reply missing field 'completion'");
    std::string text = reply["completion"].get<std::string>();
    if (text.empty()) fail("empty", "teacher returned an empty completion");
    return text;
  }
  fail("network", "teacher unreachable after " +
                      std::to_string(opt_.max_attempts) + " attempts: " +
                      last_error);
}

std::string TeacherClient::rationale(const TeacherRequest& req) {
  std::string text = complete(req);
  if (static_cast<int>(text.size()) > opt_.char_budget) {
    json entry;
    entry["event"] = "truncate";
    entry["from"] = text.size();
    entry["to"] = opt_.char_budget;
    audit(entry);
    text.resize(opt_.char_budget);
  }
  return text;
}

std::string teacher_prompt(const std::vector<Sample>& exemplars,
                           const std::string& question) {
  if (question.empty()) fail("contract", "empty question");
  std::string out;
  for (const Sample& ex : exemplars) {
    if (ex.rationale.empty())
      fail("data", ex.id + ": exemplar without rationale");
    out += "Q: " + ex.question + "\n";
    out += "A: " + answer_presentation(ex) + "\n";
    out += "R: " + ex.rationale + "\n\n";
  }
  out += "Q: " + question + "\nA:";
  return out;
}

std::string oracle_rationale(const Sample& s) {
  if (s.kind == TaskKind::imported)
    fail("data", s.id + ": imported sample has no gold rationale");
  if (s.steps.empty()) fail("data", s.id + ": sample has no steps");
  std::string out;
  for (size_t i = 0; i < s.steps.size(); ++i) {
    if (i) out += "\n";
    out += s.steps[i];
  }
  return out;
}

}  // namespace skipthink
