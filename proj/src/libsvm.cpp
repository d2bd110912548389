#include "nvgd/libsvm.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "nvgd/random.hpp"

namespace nvgd {

namespace {

int normalize_label(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto* end = tok.data() + tok.size();
  const char* begin = tok.data();
  if (!tok.empty() && tok.front() == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end) throw ParseError(line, "non-numeric label '" + std::string(tok) + "'");
  if (v == 1.0) return 1;
  if (v == 0.0 || v == -1.0 || v == 2.0) return 0;
  throw ParseError(line, "label '" + std::string(tok) + "' is not one of 1, +1, 0, -1, 2");
}

}  // namespace

SparseDataset parse_libsvm(std::istream& in, std::optional<std::size_t> num_features) {
  SparseDataset data;
  std::string text;
  std::size_t line_no = 0;
  std::size_t max_index = 0;
  while (std::getline(in, text)) {
    ++line_no;
    std::istringstream tokens(text);
    std::string tok;
    if (!(tokens >> tok)) continue;
    SparseRow row;
    row.label = normalize_label(tok, line_no);
    while (tokens >> tok) {
      const auto colon = tok.find(':');
      if (colon == std::string::npos || colon == 0 || colon + 1 == tok.size())
        throw ParseError(line_no, "malformed pair '" + tok + "'");
      std::size_t index = 0;
      auto [iptr, iec] = std::from_chars(tok.data(), tok.data() + colon, index);
      if (iec != std::errc() || iptr != tok.data() + colon || index == 0)
        throw ParseError(line_no, "bad feature index in '" + tok + "'");
      double value = 0.0;
      const char* vbegin = tok.data() + colon + 1;
      const char* vend = tok.data() + tok.size();
      auto [vptr, vec] = std::from_chars(vbegin, vend, value);
      if (vec != std::errc() || vptr != vend || !std::isfinite(value))
        throw ParseError(line_no, "non-numeric value in '" + tok + "'");
      if (!row.entries.empty() && index <= row.entries.back().first)
        throw ParseError(line_no, "feature index " + std::to_string(index) + " is not increasing");
      row.entries.emplace_back(index, value);
      max_index = std::max(max_index, index);
    }
    data.rows.push_back(std::move(row));
  }
  if (num_features) {
    if (*num_features < max_index)
      throw std::invalid_argument("num_features override " + std::to_string(*num_features) +
                                  " is below the largest index " + std::to_string(max_index));
    data.num_features = *num_features;
  } else {
    data.num_features = max_index;
  }
  return data;
}

void write_libsvm(std::ostream& out, const SparseDataset& data) {
  char buf[64];
  for (const auto& row : data.rows) {
    out << row.label;
    for (const auto& [index, value] : row.entries) {
      std::snprintf(buf, sizeof buf, "%.17g", value);
      out << ' ' << index << ':' << buf;
    }
    out << '\n';
  }
}

DenseDataset to_dense(const SparseDataset& data) {
  DenseDataset d;
  const auto n = static_cast<Eigen::Index>(data.rows.size());
  d.features = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(data.num_features));
  d.labels.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& row = data.rows[static_cast<std::size_t>(i)];
    d.labels[i] = row.label;
    for (const auto& [index, value] : row.entries)
      d.features(i, static_cast<Eigen::Index>(index - 1)) = value;
  }
  return d;
}

SplitIndices split_indices(std::size_t n, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction >= 0.0 && test_fraction < 1.0))
    throw std::invalid_argument("test fraction must lie in [0, 1)");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(n)));
  SplitIndices s;
  s.test.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  return s;
}

DenseDataset select_rows(const DenseDataset& data, const std::vector<std::size_t>& rows) {
  DenseDataset out;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), data.features.cols());
  out.labels.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(rows[i]);
    out.features.row(static_cast<Eigen::Index>(i)) = data.features.row(r);
    out.labels[static_cast<Eigen::Index>(i)] = data.labels[r];
  }
  return out;
}

void standardize_and_add_bias(DenseDataset& train, DenseDataset& test) {
  if (train.features.rows() == 0) throw std::invalid_argument("cannot standardize an empty training set");
  const Eigen::RowVectorXd mean = train.features.colwise().mean();
  Eigen::RowVectorXd sd =
      ((train.features.rowwise() - mean).array().square().colwise().sum() /
       static_cast<double>(train.features.rows()))
          .sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j)
    if (!(sd[j] > 0.0)) sd[j] = 1.0;
  auto apply = [&](DenseDataset& set) {
    Eigen::MatrixXd z((set.features.rowwise() - mean).array().rowwise() / sd.array());
    Eigen::MatrixXd with_bias(z.rows(), z.cols() + 1);
    with_bias << z, Eigen::VectorXd::Ones(z.rows());
    set.features = std::move(with_bias);
  };
  apply(train);
  apply(test);
}

}  // namespace nvgd
