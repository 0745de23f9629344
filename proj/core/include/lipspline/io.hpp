#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace lipspline {

/// Writes `content` to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

/// Accumulates CSV text; numbers are written with round-trip precision.
class CsvWriter {
 public:
  explicit CsvWriter(const std::vector<std::string>& header);
  CsvWriter& cell(const std::string& v);
  CsvWriter& cell(double v);
  CsvWriter& cell(long long v);
  CsvWriter& cell(std::size_t v) { return cell(static_cast<long long>(v)); }
  CsvWriter& cell(int v) { return cell(static_cast<long long>(v)); }
  CsvWriter& blank() { return cell(std::string()); }
  void end_row();
  const std::string& str() const noexcept { return text_; }

 private:
  void sep();
  std::string text_;
  std::size_t columns_;
  std::size_t filled_ = 0;
};

std::string format_double(double v);

}  // namespace lipspline
