#pragma once

#include <string>
#include <vector>

// Small CSV emitter shared by the command-line tools: '#'-prefixed
// provenance lines (tool version, seed, config hash), one header row, then
// numeric rows printed with %.10g so files stay diff-stable across runs.

namespace mirpairs {
namespace csvio {

std::string format_number(double v);  // %.10g

class CsvWriter {
 public:
  // Provenance comments are written first, in insertion order.
  void add_comment(const std::string& key, const std::string& value);
  void set_header(const std::vector<std::string>& columns);
  void add_row(const std::vector<double>& values);  // size must match the header

  std::string str() const;
  void write_file(const std::string& path) const;  // throws std::runtime_error

 private:
  std::vector<std::string> comments_;
  std::vector<std::string> header_;
  std::vector<std::vector<double>> rows_;
};

}  // namespace csvio
}  // namespace mirpairs
