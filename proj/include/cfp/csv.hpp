#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "cfp/errors.hpp"

namespace cfp {

// Comma separated output with 17 significant digits so values round-trip exactly.
class CsvWriter {
 public:
  CsvWriter(const std::string& path, std::initializer_list<std::string> header) : out_(path) {
    if (!out_) throw Error("cannot open " + path + " for writing");
    bool first = true;
    for (const auto& h : header) {
      if (!first) out_ << ',';
      out_ << h;
      first = false;
    }
    out_ << '\n';
  }

  CsvWriter& num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return field(buf);
  }
  CsvWriter& str(const std::string& s) { return field(s); }
  void end_row() {
    out_ << '\n';
    first_ = true;
  }

 private:
  CsvWriter& field(const std::string& s) {
    if (!first_) out_ << ',';
    out_ << s;
    first_ = false;
    return *this;
  }
  std::ofstream out_;
  bool first_ = true;
};

}  // namespace cfp
