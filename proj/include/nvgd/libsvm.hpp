#pragma once

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "nvgd/types.hpp"

namespace nvgd {

/// One LIBSVM row: binary label and (1-based index, value) pairs with strictly increasing index.
struct SparseRow {
  int label = 0;
  std::vector<std::pair<std::size_t, double>> entries;

  bool operator==(const SparseRow&) const = default;
};

struct SparseDataset {
  std::vector<SparseRow> rows;
  std::size_t num_features = 0;

  bool operator==(const SparseDataset&) const = default;
};

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Parses `<label> <idx>:<val> ...` lines. Labels 1 and +1 map to 1; 0, -1 and 2 map to 0.
/// Blank lines are skipped. num_features is the largest index seen unless overridden.
SparseDataset parse_libsvm(std::istream& in, std::optional<std::size_t> num_features = {});

/// Writes labels as 0/1 and values with round-trip precision.
void write_libsvm(std::ostream& out, const SparseDataset& data);

struct DenseDataset {
  Eigen::MatrixXd features;  // N x F
  Eigen::VectorXd labels;    // N, entries 0/1
};

DenseDataset to_dense(const SparseDataset& data);

/// Shuffled index split; the first returned set has round(test_fraction * N) elements.
struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};
SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed);

DenseDataset select_rows(const DenseDataset& data, const std::vector<std::size_t>& rows);

/// Standardizes every column of both sets with the train mean and standard deviation
/// (constant columns are only centered), then appends a column of ones.
void standardize_and_add_bias(DenseDataset& train, DenseDataset& test);

}  // namespace nvgd
