#pragma once

#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <string>

#include "skipthink/common.hpp"
#include "skipthink/net.hpp"
#include "skipthink/vocab.hpp"

namespace testutil {

// Scratch directory removed on destruction.
struct TempDir {
  std::filesystem::path path;

  TempDir() {
    std::string tmpl =
        (std::filesystem::temp_directory_path() / "skipthink-test-XXXXXX")
            .string();
    char* made = ::mkdtemp(tmpl.data());
    REQUIRE(made != nullptr);
    path = made;
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const {
    return (path / name).string();
  }
};

// Small architecture that keeps unit-test training runs fast.
inline skipthink::NetConfig tiny_arch(int context = 256) {
  skipthink::NetConfig a;
  a.n_layer = 1;
  a.d_model = 16;
  a.n_head = 2;
  a.d_ff = 32;
  a.context = context;
  a.vocab = skipthink::Vocabulary::kSize;
  a.init_std = 0.08;
  return a;
}

// Runs f and reports the kind of the Error it throws ("" when it does not).
template <class F>
std::string error_kind(F&& f) {
  try {
    f();
  } catch (const skipthink::Error& e) {
    return e.kind();
  } catch (...) {
    return "<non-Error exception>";
  }
  return "";
}

}  // namespace testutil
