#pragma once

#include <fstream>
#include <span>
#include <string>
#include <vector>

namespace prmi {

/// Minimal CSV emitter; numbers are written with 17 significant digits so
/// files round-trip doubles exactly.
class CsvWriter {
 public:
  explicit CsvWriter(const std::string& path);

  void header(const std::vector<std::string>& names);
  void row(std::span<const double> values);
  void raw_row(const std::vector<std::string>& cells);

 private:
  std::ofstream out_;
  std::string path_;
};

}  // namespace prmi
