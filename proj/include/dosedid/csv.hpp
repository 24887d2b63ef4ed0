#pragma once

// Minimal RFC-4180 style CSV reading/writing. Numbers are written in the
// shortest form that parses back to the same double.

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <unordered_map>
#include <vector>

#include "dosedid/errors.hpp"

namespace dosedid::csv {

struct Table {
  std::string source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> find(std::string_view column) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == column) return i;
    return std::nullopt;
  }

  std::size_t require(std::string_view column) const {
    auto idx = find(column);
    if (!idx)
      throw Error("panel_core", ErrorKind::MissingColumn,
                  source + ": missing column '" + std::string(column) + "'");
    return *idx;
  }
};

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

// Lines starting with '#' are comments (output files carry a '#' header block).
inline Table read(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("panel_core", ErrorKind::Io, "cannot open '" + path + "'");
  Table t;
  t.source = path;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r" || line[0] == '#') continue;
    auto fields = split_line(line);
    if (!have_header) {
      if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) fields[0].erase(0, 3);
      t.header = std::move(fields);
      have_header = true;
    } else {
      if (fields.size() < t.header.size()) fields.resize(t.header.size());
      t.rows.push_back(std::move(fields));
    }
  }
  if (!have_header) throw Error("panel_core", ErrorKind::Io, "'" + path + "' is empty");
  return t;
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty() || s == "NA" || s == "nan" || s == "NaN") return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::optional<long> parse_int(std::string_view s) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  long v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

inline std::string format(double v) {
  if (std::isnan(v)) return "NA";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

inline std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
  return out;
}

class Writer {
 public:
  explicit Writer(const std::string& path) : out_(path), path_(path) {
    if (!out_) throw Error("report", ErrorKind::Io, "cannot write '" + path + "'");
  }

  void comment(const std::string& text) { out_ << "# " << text << '\n'; }

  template <typename... Cells>
  void row(const Cells&... cells) {
    bool first = true;
    ((emit(cells, first)), ...);
    out_ << '\n';
  }

  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << quote(cells[i]);
    out_ << '\n';
  }

 private:
  void emit(const std::string& s, bool& first) { sep(first), out_ << quote(s); }
  void emit(const char* s, bool& first) { sep(first), out_ << quote(s); }
  void emit(double v, bool& first) { sep(first), out_ << format(v); }
  void emit(int v, bool& first) { sep(first), out_ << v; }
  void emit(long v, bool& first) { sep(first), out_ << v; }
  void emit(std::size_t v, bool& first) { sep(first), out_ << v; }
  void sep(bool& first) {
    if (!first) out_ << ',';
    first = false;
  }

  std::ofstream out_;
  std::string path_;
};

}  // namespace dosedid::csv
