#include "lipspline/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

#include "lipspline/error.hpp"

namespace lipspline {

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) throw Error("failed writing " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw Error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

CsvWriter::CsvWriter(const std::vector<std::string>& header) : columns_(header.size()) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (i) text_ += ',';
    text_ += header[i];
  }
  text_ += '\n';
}

void CsvWriter::sep() {
  if (filled_ >= columns_) throw Error("csv row has more cells than the header");
  if (filled_) text_ += ',';
  ++filled_;
}

CsvWriter& CsvWriter::cell(const std::string& v) {
  sep();
  text_ += v;
  return *this;
}

CsvWriter& CsvWriter::cell(double v) {
  sep();
  text_ += format_double(v);
  return *this;
}

CsvWriter& CsvWriter::cell(long long v) {
  sep();
  text_ += std::to_string(v);
  return *this;
}

void CsvWriter::end_row() {
  if (filled_ != columns_) throw Error("csv row has fewer cells than the header");
  text_ += '\n';
  filled_ = 0;
}

}  // namespace lipspline
