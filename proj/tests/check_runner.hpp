#pragma once

// PASS/FAIL runner shared by the slow desk-scale binaries.
// Arguments: [--known-red 5,6] [check numbers...]; exits nonzero only when a
// check fails that is not listed as known red.

#include <chrono>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace checks {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

struct Check {
  int id;
  const char* name;
  std::function<Outcome()> fn;
};

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline int run_checks(const char* label, const std::vector<Check>& all, int argc, char** argv) {
  std::set<int> selected, known_red;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--known-red" && i + 1 < argc) {
      std::stringstream list(argv[++i]);
      for (std::string item; std::getline(list, item, ',');) known_red.insert(std::stoi(item));
    } else {
      selected.insert(std::stoi(arg));
    }
  }

  std::vector<int> unexpected, red;
  for (const auto& c : all) {
    if (!selected.empty() && !selected.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.fn();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << "exception: " << e.what();
    }
    if (!o.pass) (known_red.count(c.id) ? red : unexpected).push_back(c.id);
    std::printf("%s  %s %d (%s, %.1f s): %s\n", o.pass ? "PASS" : "FAIL", label, c.id, c.name, seconds_since(t0),
                o.detail.str().c_str());
    std::fflush(stdout);
  }
  auto join = [](const std::vector<int>& v) {
    std::string out;
    for (int id : v) out += (out.empty() ? "" : ",") + std::to_string(id);
    return out.empty() ? std::string("none") : out;
  };
  std::printf("summary (%s): known red and failing: %s; unexpected failures: %s\n", label, join(red).c_str(),
              join(unexpected).c_str());
  return unexpected.empty() ? 0 : 1;
}

}  // namespace checks
