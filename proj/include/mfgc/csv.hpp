#pragma once

#include <cstdio>
#include <ostream>
#include <span>
#include <string>
#include <vector>

namespace mfgc {

// Canonical double formatting: shortest round-trippable decimal via %.17g
// trimmed, so identical values always print identical bytes.
inline std::string fmt_double(double v) {
  char buf[40];
  // %.17g always round-trips; prefer the shorter %.15g / %.16g when they do.
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    double back = 0.0;
    std::sscanf(buf, "%lf", &back);
    if (back == v || (v != v && back != back)) break;
  }
  return buf;
}

class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {}

  void comment(const std::string& text) { os_ << "# " << text << "\n"; }

  void header(std::span<const std::string> names) {
    for (std::size_t i = 0; i < names.size(); ++i)
      os_ << (i ? "," : "") << names[i];
    os_ << "\n";
  }
  void header(std::initializer_list<std::string> names) {
    header(std::span<const std::string>(names.begin(), names.size()));
  }

  CsvWriter& field(double v) { return raw(fmt_double(v)); }
  CsvWriter& field(int v) { return raw(std::to_string(v)); }
  CsvWriter& field(long v) { return raw(std::to_string(v)); }
  CsvWriter& field(const std::string& v) { return raw(v); }
  CsvWriter& field(bool v) { return raw(v ? "1" : "0"); }
  void endrow() {
    os_ << "\n";
    first_ = true;
  }

 private:
  CsvWriter& raw(const std::string& s) {
    if (!first_) os_ << ",";
    first_ = false;
    os_ << s;
    return *this;
  }
  std::ostream& os_;
  bool first_ = true;
};

}  // namespace mfgc
