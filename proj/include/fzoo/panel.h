#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "fzoo/errors.h"

namespace fzoo {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// A balanced T x N panel of periodic excess returns (decimal per period).
///
/// Rows are periods in ascending label order, columns are named series.
/// Instances are immutable once constructed; every constructor path goes
/// through validation.
class ReturnPanel {
 public:
  ReturnPanel(std::vector<std::string> periods, std::vector<std::string> names,
              MatrixXd returns);

  std::size_t num_periods() const noexcept { return periods_.size(); }
  std::size_t num_series() const noexcept { return names_.size(); }

  const std::vector<std::string>& periods() const noexcept { return periods_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const MatrixXd& returns() const noexcept { return returns_; }

  bool contains(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;  // throws kUnknownName
  std::vector<std::size_t> indices_of(const std::vector<std::string>& names) const;

  Eigen::Ref<const VectorXd> column(const std::string& name) const {
    return returns_.col(static_cast<Eigen::Index>(index_of(name)));
  }

 private:
  std::vector<std::string> periods_;
  std::vector<std::string> names_;
  MatrixXd returns_;
  std::map<std::string, std::size_t> index_;
};

struct CsvOptions {
  char delimiter = ',';
  // Name of the period column; empty means "first column".
  std::string period_column;
};

ReturnPanel load_panel(const std::string& path, const CsvOptions& options = {});
ReturnPanel parse_panel(const std::string& text, const CsvOptions& options = {},
                        const std::string& source = "<memory>");

// Writes with 17 significant digits, so a reload reproduces every double exactly.
void write_panel(const ReturnPanel& panel, const std::string& path);
std::string format_panel(const ReturnPanel& panel);

/// One-way trading cost per series, in basis points per period.
struct CostSchedule {
  std::map<std::string, double> bps;
};

CostSchedule load_costs(const std::string& path);
ReturnPanel adjust_costs(const ReturnPanel& panel, const CostSchedule& costs);

struct PeriodRange {
  std::optional<std::string> from;  // inclusive
  std::optional<std::string> to;    // inclusive
};

ReturnPanel subset(const ReturnPanel& panel,
                   const std::optional<std::vector<std::string>>& names,
                   const PeriodRange& range = {});

// Row selection by position, preserving the given order (repeats allowed).
ReturnPanel take_rows(const ReturnPanel& panel, const std::vector<std::size_t>& rows);

// Column-wise concatenation of two panels over identical periods.
ReturnPanel concat_columns(const ReturnPanel& left, const ReturnPanel& right);

/// k contiguous, disjoint folds covering [0, T). Earliest periods in fold 0.
struct FoldSplit {
  std::size_t num_periods = 0;
  std::vector<std::vector<std::size_t>> folds;

  // Positions outside fold `f`, in ascending order.
  std::vector<std::size_t> complement(std::size_t f) const;
};

FoldSplit split_folds(std::size_t num_periods, std::size_t k);
inline FoldSplit split_folds(const ReturnPanel& panel, std::size_t k) {
  return split_folds(panel.num_periods(), k);
}

}  // namespace fzoo
