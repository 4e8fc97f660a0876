#include "output.hpp"

#include <algorithm>
#include <ostream>

#include "options.hpp"

namespace stc::cli {
namespace {

std::string cell(const io::Json& v) {
  if (v.is_string()) return v.get<std::string>();
  std::string s = io::dump_line(v);
  if (s.size() > 48) s = s.substr(0, 45) + "...";
  return s;
}

void flatten(const io::Json& v, const std::string& prefix,
             std::vector<std::pair<std::string, std::string>>& rows) {
  if (v.is_object() && !v.empty()) {
    for (const auto& [k, x] : v.items())
      flatten(x, prefix.empty() ? k : prefix + "." + k, rows);
    return;
  }
  rows.emplace_back(prefix, cell(v));
}

void print_table(std::ostream& out,
                 const std::vector<std::vector<std::string>>& rows) {
  if (rows.empty()) return;
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& r : rows)
    for (std::size_t i = 0; i < r.size(); ++i)
      width[i] = std::max(width[i], r[i].size());
  for (const auto& r : rows) {
    std::string line;
    for (std::size_t i = 0; i < r.size(); ++i) {
      line += r[i];
      if (i + 1 < r.size()) line += std::string(width[i] - r[i].size() + 2, ' ');
    }
    out << line << '\n';
  }
}

}  // namespace

Format parse_format(const std::string& name) {
  if (name == "json") return Format::Json;
  if (name == "jsonl") return Format::Jsonl;
  if (name == "table") return Format::Table;
  throw UsageError("output_format must be json, jsonl or table, not '" + name +
                   "'");
}

void print_records(std::ostream& out, Format format,
                   const std::vector<io::Json>& records) {
  switch (format) {
    case Format::Json:
      out << io::Json(records).dump(2, ' ', false,
                                    io::Json::error_handler_t::replace)
          << '\n';
      return;
    case Format::Jsonl:
      for (const io::Json& r : records) out << io::dump_line(r) << '\n';
      return;
    case Format::Table: {
      if (records.empty()) return;
      std::vector<std::string> keys;
      for (const auto& [k, v] : records.front().items())
        if (v.is_primitive()) keys.push_back(k);
      std::vector<std::vector<std::string>> rows{keys};
      for (const io::Json& r : records) {
        std::vector<std::string> row;
        for (const std::string& k : keys)
          row.push_back(r.contains(k) ? cell(r.at(k)) : "");
        rows.push_back(std::move(row));
      }
      print_table(out, rows);
      return;
    }
  }
}

void print_object(std::ostream& out, Format format, const io::Json& object) {
  switch (format) {
    case Format::Json:
      out << object.dump(2, ' ', false, io::Json::error_handler_t::replace)
          << '\n';
      return;
    case Format::Jsonl:
      out << io::dump_line(object) << '\n';
      return;
    case Format::Table: {
      std::vector<std::pair<std::string, std::string>> flat;
      flatten(object, "", flat);
      std::vector<std::vector<std::string>> rows;
      for (auto& [k, v] : flat) rows.push_back({k, v});
      print_table(out, rows);
      return;
    }
  }
}

}  // namespace stc::cli
