#pragma once

#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace lipspline::acceptance {

struct Verdict {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  std::string slug;
  /// Wall-clock limit in seconds; 0 means unbounded.
  double budget;
  std::function<Verdict()> run;
};

std::vector<Criterion> numerics_criteria();
std::vector<Criterion> learning_criteria();
std::vector<Criterion> imaging_criteria();

/// Space-separated "key=value" pairs.
class Detail {
 public:
  template <typename T>
  Detail& add(const std::string& key, const T& value) {
    if (!first_) os_ << ' ';
    first_ = false;
    os_ << key << '=' << value;
    return *this;
  }
  std::string str() const { return os_.str(); }

 private:
  std::ostringstream os_;
  bool first_ = true;
};

double median(std::vector<double> v);

}  // namespace lipspline::acceptance
