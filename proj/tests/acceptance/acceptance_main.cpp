// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.
// Arguments select criteria by number.

#include <cstdio>
#include <cstdlib>
#include <set>

#include "acceptance.hpp"

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));
  bool all = true;
  for (const auto& c : acceptance::criteria()) {
    if (!only.empty() && !only.count(c.id)) continue;
    acceptance::Result r = acceptance::run(c);
    all = all && r.pass;
    std::printf("%s criterion %d: %s (%zu instances, %.2f s)\n", r.pass ? "PASS" : "FAIL", r.id, r.title.c_str(),
                r.instances, r.seconds);
    if (!r.note.empty()) std::printf("    %s\n", r.note.c_str());
    for (const auto& f : r.failures) std::printf("    %s\n", f.c_str());
    if (r.failure_count > r.failures.size())
      std::printf("    ... %zu more failures\n", r.failure_count - r.failures.size());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
