#include <algorithm>
#include <chrono>
#include <cstdio>
#include <exception>
#include <iostream>
#include <set>
#include <string>

#include "criteria.hpp"

namespace lipspline::acceptance {

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace lipspline::acceptance

int main(int argc, char** argv) {
  using namespace lipspline::acceptance;
  std::vector<Criterion> all;
  for (auto&& group : {numerics_criteria(), learning_criteria(), imaging_criteria()})
    all.insert(all.end(), group.begin(), group.end());
  std::sort(all.begin(), all.end(), [](const Criterion& a, const Criterion& b) { return a.id < b.id; });

  std::set<std::string> wanted(argv + 1, argv + argc);
  if (wanted.count("--list")) {
    for (const auto& c : all) std::cout << c.id << ' ' << c.slug << '\n';
    return 0;
  }

  int failures = 0;
  int ran = 0;
  for (const auto& c : all) {
    if (!wanted.empty() && !wanted.count(std::to_string(c.id)) && !wanted.count(c.slug)) continue;
    ++ran;
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (c.budget > 0 && seconds > c.budget) {
      v.pass = false;
      v.detail += " over_budget=" + std::to_string(c.budget) + "s";
    }
    char head[64];
    std::snprintf(head, sizeof head, "%s [%02d %s]", v.pass ? "PASS" : "FAIL", c.id, c.slug.c_str());
    char tail[32];
    std::snprintf(tail, sizeof tail, " (%.1f s)", seconds);
    std::cout << head << ' ' << v.detail << tail << std::endl;
    failures += v.pass ? 0 : 1;
  }
  if (ran == 0) {
    std::cerr << "no criterion matches the arguments\n";
    return 2;
  }
  return failures == 0 ? 0 : 1;
}
