#include "mirpairs/csvio.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace mirpairs {
namespace csvio {

std::string format_number(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void CsvWriter::add_comment(const std::string& key, const std::string& value) {
  comments_.push_back("# " + key + "=" + value);
}

void CsvWriter::set_header(const std::vector<std::string>& columns) {
  if (columns.empty()) throw std::invalid_argument("csv: empty header");
  header_ = columns;
}

void CsvWriter::add_row(const std::vector<double>& values) {
  if (values.size() != header_.size())
    throw std::invalid_argument("csv: row width does not match header");
  rows_.push_back(values);
}

std::string CsvWriter::str() const {
  std::string out;
  for (const std::string& c : comments_) {
    out += c;
    out += '\n';
  }
  for (std::size_t i = 0; i < header_.size(); ++i) {
    if (i > 0) out += ',';
    out += header_[i];
  }
  out += '\n';
  for (const auto& row : rows_) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i > 0) out += ',';
      out += format_number(row[i]);
    }
    out += '\n';
  }
  return out;
}

void CsvWriter::write_file(const std::string& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("csv: cannot open '" + path + "' for writing");
  out << str();
  if (!out) throw std::runtime_error("csv: write to '" + path + "' failed");
}

}  // namespace csvio
}  // namespace mirpairs
