#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace vtree {

/// Malformed input file. `record()` is the 1-based record (row) number, or 0
/// when the error concerns the file as a whole (header, empty file).
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& what, std::size_t record = 0)
      : std::runtime_error(record == 0 ? what : "record " + std::to_string(record) + ": " + what),
        record_(record) {}

  std::size_t record() const { return record_; }

 private:
  std::size_t record_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace vtree
