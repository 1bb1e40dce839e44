#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace finfre::csv {

// Streaming RFC-4180 reader: quoted fields, doubled quotes, embedded line
// breaks, LF or CRLF record terminators.
class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  // Next record, or nullopt at end of input. Throws DataError on an
  // unterminated quoted field.
  std::optional<std::vector<std::string>> next();

  // 1-based physical line where the last returned record started.
  std::size_t line() const { return record_line_; }

 private:
  std::istream& in_;
  std::size_t line_ = 1;
  std::size_t record_line_ = 0;
};

std::string escape_field(std::string_view field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace finfre::csv
