#pragma once

// Columnar text output: '#'-prefixed metadata lines, one header row, then
// comma-separated records. Numbers use the shortest round-trip form so that
// identical runs produce identical bytes.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#ifndef MECHCLUSTER_VERSION
#define MECHCLUSTER_VERSION "0.0.0"
#endif

namespace mechcluster::harness {

inline std::string format_number(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Provenance {
  std::string command;
  std::string config_hash;
  std::vector<std::string> notes;  // extra "# key: value" lines
};

class TableWriter {
 public:
  TableWriter(const std::filesystem::path& path, const Provenance& prov, std::vector<std::string> columns)
      : path_(path), out_(path), width_(columns.size()) {
    if (!out_) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
    out_ << "# mechcluster " << MECHCLUSTER_VERSION << "\n";
    out_ << "# command: " << prov.command << "\n";
    out_ << "# config_hash: " << prov.config_hash << "\n";
    for (const auto& n : prov.notes) out_ << "# " << n << "\n";
    write_fields(columns);
  }

  /// Mixed row: strings pass through, doubles are formatted.
  class Row {
   public:
    Row& operator<<(double v) {
      fields_.push_back(format_number(v));
      return *this;
    }
    Row& operator<<(std::size_t v) {
      fields_.push_back(std::to_string(v));
      return *this;
    }
    Row& operator<<(std::string v) {
      fields_.push_back(std::move(v));
      return *this;
    }
    Row& operator<<(const char* v) { return *this << std::string(v); }
    Row& operator<<(bool v) { return *this << std::string(v ? "1" : "0"); }

   private:
    friend class TableWriter;
    std::vector<std::string> fields_;
  };

  void write(const Row& row) {
    if (row.fields_.size() != width_) {
      throw std::logic_error("TableWriter: row width mismatch in " + path_.string());
    }
    write_fields(row.fields_);
  }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("error writing '" + path_.string() + "'");
  }

 private:
  void write_fields(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i) out_ << ',';
      out_ << fields[i];
    }
    out_ << '\n';
  }

  std::filesystem::path path_;
  std::ofstream out_;
  std::size_t width_;
};

/// Joins durations as "a;b;c" so a whole schedule fits in one CSV field.
inline std::string join_numbers(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += ';';
    out += format_number(values[i]);
  }
  return out;
}

}  // namespace mechcluster::harness
