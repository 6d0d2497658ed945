#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sparse_evo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArchitecture : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidConfig : public Error {
 public:
  using Error::Error;
};

/// Raised by addition_distribution when every similarity is zero.
class DegenerateSimilarity : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss during training.
class TrainingDivergence : public Error {
 public:
  TrainingDivergence(int epoch, std::size_t batch)
      : Error("training diverged: non-finite loss at epoch " +
              std::to_string(epoch) + ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  int epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  int epoch_;
  std::size_t batch_;
};

/// CSV / JSON input problems. Row and column are 1-based; 0 means unknown.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t row = 0,
             std::size_t column = 0)
      : Error(format(what, row, column)), row_(row), column_(column) {}

  std::size_t row() const noexcept { return row_; }
  std::size_t column() const noexcept { return column_; }

 private:
  static std::string format(const std::string& what, std::size_t row,
                            std::size_t column) {
    std::string msg = what;
    if (row != 0) msg += " (row " + std::to_string(row);
    if (row != 0 && column != 0) msg += ", column " + std::to_string(column);
    if (row != 0) msg += ")";
    return msg;
  }

  std::size_t row_;
  std::size_t column_;
};

}  // namespace sparse_evo
