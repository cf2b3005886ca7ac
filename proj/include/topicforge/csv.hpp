#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace topicforge {

// RFC-4180 table. Quoted fields may contain separators, doubled quotes and
// line breaks. `lines[i]` is the 1-based physical line where row i starts.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> lines;

  std::optional<std::size_t> column(std::string_view name) const;
};

CsvTable parse_csv(std::string_view text);
CsvTable read_csv_file(const std::string& path);

std::string csv_escape(std::string_view field);
std::string csv_row(const std::vector<std::string>& fields);

}  // namespace topicforge
