#pragma once

#include <istream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace alt {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name, or nullopt.
  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }
};

std::vector<std::string> split_csv_line(const std::string& line);

// Reads a whole CSV with a header row. Blank lines are skipped, CR stripped.
// Throws DataError if the stream is bad or has no header.
CsvTable read_csv(std::istream& in);
CsvTable read_csv_file(const std::string& path);

std::optional<double> parse_double(const std::string& s);
std::optional<long long> parse_int(const std::string& s);

}  // namespace alt
