#include <doctest.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

#include "skipthink/teacher.hpp"
#include "util.hpp"

// util.hpp drags in Eigen; keep it ahead of httplib.h, whose transitive
// <resolv.h> defines a `_res` macro that corrupts Eigen's kernel sources.
#include <httplib.h>

using namespace skipthink;
using testutil::error_kind;
using testutil::TempDir;

namespace {

// loopback completion endpoint running on a background thread
struct StubServer {
  httplib::Server svr;
  std::thread th;
  int port = 0;

  void start() {
    port = svr.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    th = std::thread([this] { svr.listen_after_bind(); });
    svr.wait_until_ready();
  }

  ~StubServer() {
    svr.stop();
    if (th.joinable()) th.join();
  }

  TeacherEndpoint endpoint(std::string token = "") const {
    TeacherEndpoint ep;
    ep.host = "127.0.0.1";
    ep.port = port;
    ep.token = std::move(token);
    return ep;
  }
};

TeacherOptions fast_opts() {
  TeacherOptions opt;
  opt.backoff_ms = 1;
  opt.backoff_cap_ms = 2;
  return opt;
}

// bind-then-close without listen, so later connects are refused immediately
int free_port() {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  REQUIRE(fd >= 0);
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = 0;
  REQUIRE(::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) == 0);
  socklen_t len = sizeof addr;
  REQUIRE(::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
  int port = ntohs(addr.sin_port);
  ::close(fd);
  return port;
}

std::vector<json> read_jsonl(const std::string& path) {
  std::vector<json> out;
  std::string text = read_file(path);
  size_t pos = 0;
  while (pos < text.size()) {
    size_t nl = text.find('\n', pos);
    if (nl == std::string::npos) nl = text.size();
    if (nl > pos) out.push_back(json::parse(text.substr(pos, nl - pos)));
    pos = nl + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("the client marshals the request and returns the completion") {
  StubServer stub;
  std::string seen_auth, seen_prompt;
  double seen_temp = -1;
  int seen_max = -1;
  stub.svr.Post("/v1/complete", [&](const httplib::Request& req,
                                    httplib::Response& res) {
    seen_auth = req.get_header_value("Authorization");
    json body = json::parse(req.body);
    seen_prompt = body.at("prompt").get<std::string>();
    seen_temp = body.at("temperature").get<double>();
    seen_max = body.at("max_tokens").get<int>();
    json reply;
    reply["completion"] = "got:" + seen_prompt;
    res.set_content(reply.dump(), "application/json");
  });
  stub.start();

  TeacherClient cli(stub.endpoint("sek"), fast_opts());
  TeacherRequest req;
  req.prompt = "hello world";
  req.temperature = 0.25;
  req.max_tokens = 77;
  CHECK(cli.complete(req) == "got:hello world");
  CHECK(seen_auth == "Bearer sek");
  CHECK(seen_prompt == "hello world");
  CHECK(seen_temp == doctest::Approx(0.25));
  CHECK(seen_max == 77);
}

TEST_CASE("server errors retry with backoff until the endpoint recovers") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.svr.Post("/v1/complete", [&](const httplib::Request&,
                                    httplib::Response& res) {
    if (++hits <= 2) {
      res.status = 500;
      res.set_content("busy", "text/plain");
    } else {
      res.set_content("{\"completion\":\"ok\"}", "application/json");
    }
  });
  stub.start();

  TeacherClient cli(stub.endpoint(), fast_opts());
  TeacherRequest req;
  req.prompt = "p";
  CHECK(cli.complete(req) == "ok");
  CHECK(hits.load() == 3);
}

TEST_CASE("auth rejections never retry") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.svr.Post("/v1/complete", [&](const httplib::Request&,
                                    httplib::Response& res) {
    ++hits;
    res.status = 401;
    res.set_content("denied", "text/plain");
  });
  stub.start();

  TeacherClient cli(stub.endpoint("bad"), fast_opts());
  TeacherRequest req;
  req.prompt = "p";
  CHECK(error_kind([&] { cli.complete(req); }) == "auth");
  CHECK(hits.load() == 1);
}

TEST_CASE("malformed replies map to protocol and empty errors") {
  StubServer stub;
  std::string body;
  stub.svr.Post("/v1/complete", [&](const httplib::Request&,
                                    httplib::Response& res) {
    res.set_content(body, "application/json");
  });
  stub.start();
  TeacherClient cli(stub.endpoint(), fast_opts());
  TeacherRequest req;
  req.prompt = "p";

  body = "{\"text\":\"x\"}";
  CHECK(error_kind([&] { cli.complete(req); }) == "protocol");
  try {
    cli.complete(req);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("completion") != std::string::npos);
  }

  body = "not json at all";
  CHECK(error_kind([&] { cli.complete(req); }) == "protocol");

  body = "{\"completion\":42}";
  CHECK(error_kind([&] { cli.complete(req); }) == "protocol");

  body = "{\"completion\":\"\"}";
  CHECK(error_kind([&] { cli.complete(req); }) == "empty");
}

TEST_CASE("unexpected statuses are protocol errors, not retries") {
  StubServer stub;
  std::atomic<int> hits{0};
  stub.svr.Post("/v1/complete", [&](const httplib::Request&,
                                    httplib::Response& res) {
    ++hits;
    res.status = 404;
    res.set_content("gone", "text/plain");
  });
  stub.start();
  TeacherClient cli(stub.endpoint(), fast_opts());
  TeacherRequest req;
  req.prompt = "p";
  CHECK(error_kind([&] { cli.complete(req); }) == "protocol");
  CHECK(hits.load() == 1);
}

TEST_CASE("an unreachable endpoint exhausts its attempts") {
  TempDir tmp;
  TeacherEndpoint ep;
  ep.host = "127.0.0.1";
  ep.port = free_port();  // nobody is listening here any more
  TeacherOptions opt = fast_opts();
  opt.max_attempts = 2;
  opt.audit_path = tmp.file("audit.jsonl");
  TeacherClient cli(ep, opt);
  TeacherRequest req;
  req.prompt = "p";

  CHECK(error_kind([&] { cli.complete(req); }) == "network");
  try {
    cli.complete(req);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("2 attempts") != std::string::npos);
  }

  auto entries = read_jsonl(opt.audit_path);
  REQUIRE(entries.size() >= 2);
  CHECK(entries[0].at("attempt") == 1);
  CHECK(entries[0].at("error") == "no response");
  CHECK(entries[1].at("attempt") == 2);
}

TEST_CASE("rationales are truncated to the char budget and audited") {
  StubServer stub;
  stub.svr.Post("/v1/complete", [&](const httplib::Request&,
                                    httplib::Response& res) {
    json reply;
    reply["completion"] = std::string(600, 'x');
    res.set_content(reply.dump(), "application/json");
  });
  stub.start();

  TempDir tmp;
  TeacherOptions opt = fast_opts();
  opt.char_budget = 100;
  opt.audit_path = tmp.file("audit.jsonl");
  TeacherClient cli(stub.endpoint(), opt);
  TeacherRequest req;
  req.prompt = "p";

  CHECK(cli.rationale(req) == std::string(100, 'x'));

  auto entries = read_jsonl(opt.audit_path);
  REQUIRE(entries.size() == 2);
  CHECK(entries[0].at("attempt") == 1);
  CHECK(entries[0].at("status") == 200);
  CHECK(entries[1].at("event") == "truncate");
  CHECK(entries[1].at("from") == 600);
  CHECK(entries[1].at("to") == 100);

  // a short completion leaves no truncate entry behind
  TempDir tmp2;
  TeacherOptions opt2 = fast_opts();
  opt2.char_budget = 10000;
  opt2.audit_path = tmp2.file("audit.jsonl");
  TeacherClient cli2(stub.endpoint(), opt2);
  CHECK(cli2.rationale(req) == std::string(600, 'x'));
  CHECK(read_jsonl(opt2.audit_path).size() == 1);
}

TEST_CASE("request validation happens before any network traffic") {
  TeacherEndpoint ep;
  ep.host = "127.0.0.1";
  ep.port = 9;  // never contacted
  TeacherOptions opt = fast_opts();
  opt.max_attempts = 1;
  TeacherClient cli(ep, opt);

  TeacherRequest req;
  req.prompt = "";
  CHECK(error_kind([&] { cli.complete(req); }) == "contract");
  req.prompt = "p";
  req.temperature = -0.1;
  CHECK(error_kind([&] { cli.complete(req); }) == "contract");
  req.temperature = 0.5;
  req.max_tokens = 0;
  CHECK(error_kind([&] { cli.complete(req); }) == "contract");

  TeacherEndpoint bad;
  CHECK(error_kind([&] { TeacherClient c(bad); }) == "config");
  TeacherOptions zero;
  zero.max_attempts = 0;
  CHECK(error_kind([&] { TeacherClient c(ep, zero); }) == "config");
}

TEST_CASE("endpoint parsing from the environment") {
  setenv("SKIPTHINK_TEACHER_ENDPOINT", "127.0.0.1:8080/v1/x", 1);
  unsetenv("SKIPTHINK_TEACHER_TOKEN");
  TeacherEndpoint ep = endpoint_from_env();
  CHECK(ep.host == "127.0.0.1");
  CHECK(ep.port == 8080);
  CHECK(ep.path == "/v1/x");
  CHECK(ep.token.empty());

  setenv("SKIPTHINK_TEACHER_ENDPOINT", "http://teacher:5000", 1);
  setenv("SKIPTHINK_TEACHER_TOKEN", "tok123", 1);
  ep = endpoint_from_env();
  CHECK(ep.host == "teacher");
  CHECK(ep.port == 5000);
  CHECK(ep.path == "/v1/complete");
  CHECK(ep.token == "tok123");

  setenv("SKIPTHINK_TEACHER_ENDPOINT", "hostonly", 1);
  CHECK(error_kind([&] { endpoint_from_env(); }) == "config");
  setenv("SKIPTHINK_TEACHER_ENDPOINT", "host:", 1);
  CHECK(error_kind([&] { endpoint_from_env(); }) == "config");
  setenv("SKIPTHINK_TEACHER_ENDPOINT", "host:abc", 1);
  CHECK(error_kind([&] { endpoint_from_env(); }) == "config");
  unsetenv("SKIPTHINK_TEACHER_ENDPOINT");
  CHECK(error_kind([&] { endpoint_from_env(); }) == "config");
  unsetenv("SKIPTHINK_TEACHER_TOKEN");
}

TEST_CASE("few-shot prompts put the answer line before the rationale") {
  Sample ex = make_last_letter({"Ada"}, "e1");
  std::string got = teacher_prompt({ex}, "Next?");
  std::string want =
      "Q: " + ex.question + "\n" +
      "A: a\n" +
      "R: The last letter of Ada is a.\nConcatenated: a.\n\n" +
      "Q: Next?\nA:";
  CHECK(got == want);

  // answer shown before rationale in every exemplar
  size_t a_pos = got.find("\nA: a\n");
  size_t r_pos = got.find("\nR: ");
  REQUIRE(a_pos != std::string::npos);
  REQUIRE(r_pos != std::string::npos);
  CHECK(a_pos < r_pos);
  CHECK(got.rfind("\nA:") == got.size() - 3);

  Sample bare = ex;
  bare.rationale.clear();
  CHECK(error_kind([&] { teacher_prompt({bare}, "q"); }) == "data");
  CHECK(error_kind([&] { teacher_prompt({ex}, ""); }) == "contract");
}

TEST_CASE("gold rationales are the step join for every generated task") {
  for (TaskKind kind : {TaskKind::object_swap, TaskKind::last_letter,
                        TaskKind::arithmetic}) {
    TaskConfig cfg;
    cfg.kind = kind;
    cfg.count = 30;
    cfg.seed = 17;
    for (const Sample& s : generate(cfg)) {
      CHECK(oracle_rationale(s) == s.rationale);
    }
  }
  Sample imported;
  imported.id = "imp";
  imported.kind = TaskKind::imported;
  CHECK(error_kind([&] { oracle_rationale(imported); }) == "data");
}
