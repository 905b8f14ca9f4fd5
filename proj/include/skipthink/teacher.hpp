#pragma once

#include <string>
#include <vector>

#include "skipthink/common.hpp"
#include "skipthink/corpus.hpp"

namespace skipthink {

struct TeacherRequest {
  std::string prompt;
  double temperature = 0.7;
  int max_tokens = 128;
};

struct TeacherEndpoint {
  std::string host;
  int port = 0;
  std::string path = "/v1/complete";
  std::string token;  // optional bearer token
};

// reads SKIPTHINK_TEACHER_ENDPOINT ("host:port[/path]") and
// SKIPTHINK_TEACHER_TOKEN
TeacherEndpoint endpoint_from_env();

struct TeacherOptions {
  int max_attempts = 3;
  int backoff_ms = 200;      // doubles per retry
  int backoff_cap_ms = 2000;
  int char_budget = 512;     // rationale() truncates beyond this
  std::string audit_path;    // empty = no audit log
};

// Thin client for a completion endpoint: prompt in, sampled text out.
// Transient failures (connect errors, 5xx) retry with bounded exponential
// backoff; auth failures never retry.  Every request and raw response is
// appended to the audit log when one is configured.
class TeacherClient {
 public:
  TeacherClient(TeacherEndpoint ep, TeacherOptions opt = {});

  // completion text verbatim
  std::string complete(const TeacherRequest& req);
  // completion capped at the char budget; truncations are audited
  std::string rationale(const TeacherRequest& req);

 private:
  void audit(const json& entry);

  TeacherEndpoint ep_;
  TeacherOptions opt_;
};

// Few-shot prompt with answer placed before rationale in every exemplar,
// so the completion after the final answer line is the rationale.
std::string teacher_prompt(const std::vector<Sample>& exemplars,
                           const std::string& question);

// gold rationale of a generated sample: join of its steps
std::string oracle_rationale(const Sample& s);

}  // namespace skipthink
