#pragma once

#include "degrade/errors.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <vector>

namespace degrade::detail {

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

inline std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    auto field = line.substr(start, comma == std::string_view::npos ? line.npos : comma - start);
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t' || field.back() == '\r'))
      field.remove_suffix(1);
    fields.emplace_back(field);
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

// Lines starting with '#' before the header are handed back through `comments`.
inline CsvTable read_csv(const std::filesystem::path& path,
                         std::vector<std::string>* comments = nullptr) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  CsvTable table;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header && line.front() == '#') {
      if (comments) comments->push_back(line);
      continue;
    }
    auto fields = split_csv_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size())
      throw ValidationError(path.filename().string() + ":" + std::to_string(lineno) +
                            ": expected " + std::to_string(table.header.size()) + " fields");
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(lineno);
  }
  if (!have_header) throw ValidationError(path.string() + ": empty file");
  return table;
}

inline double parse_double(const std::string& text, const std::string& context) {
  double value = 0.0;
  const char* first = text.data();
  const char* last = first + text.size();
  if (!text.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) throw ValidationError(context + ": bad number '" + text + "'");
  return value;
}

inline long parse_long(const std::string& text, const std::string& context) {
  long value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw ValidationError(context + ": bad integer '" + text + "'");
  return value;
}

}  // namespace degrade::detail
