#include "prmi/csv.hpp"

#include <charconv>

#include "prmi/errors.hpp"

namespace prmi {

CsvWriter::CsvWriter(const std::string& path) : out_(path), path_(path) {
  if (!out_) throw FormatError("cannot open " + path + " for writing");
}

void CsvWriter::header(const std::vector<std::string>& names) { raw_row(names); }

void CsvWriter::row(std::span<const double> values) {
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out_.put(',');
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), values[i], std::chars_format::general, 17);
    out_.write(buf, end - buf);
  }
  out_.put('\n');
  if (!out_) throw FormatError("write failed: " + path_);
}

void CsvWriter::raw_row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out_.put(',');
    out_ << cells[i];
  }
  out_.put('\n');
  if (!out_) throw FormatError("write failed: " + path_);
}

}  // namespace prmi
