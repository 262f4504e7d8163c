#pragma once

#include <initializer_list>
#include <limits>
#include <locale>
#include <ostream>
#include <string>
#include <string_view>

namespace msdwr {

/// Minimal CSV emitter: comma separated, '.' decimal point, round-trip
/// precision for doubles so repeated runs give identical bytes.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& os) : os_(os) {
    os_.imbue(std::locale::classic());
    os_.precision(std::numeric_limits<double>::max_digits10);
  }

  void header(std::initializer_list<std::string_view> cols) {
    bool first = true;
    for (auto c : cols) {
      if (!first) os_ << ',';
      os_ << c;
      first = false;
    }
    os_ << '\n';
  }

  template <class... Ts>
  void row(const Ts&... cells) {
    bool first = true;
    ((put(cells, first)), ...);
    os_ << '\n';
  }

  // Incremental form for rows of variable width.
  template <class T>
  CsvWriter& cell(const T& v) {
    put(v, first_);
    return *this;
  }
  void end_row() {
    os_ << '\n';
    first_ = true;
  }

 private:
  template <class T>
  void put(const T& v, bool& first) {
    if (!first) os_ << ',';
    first = false;
    os_ << v;
  }

  std::ostream& os_;
  bool first_ = true;
};

}  // namespace msdwr
