#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <filesystem>
#include <string>
#include <vector>

namespace sigmaforge {

/// Ordinal day labels. Either ISO dates or integers; ordering is numeric when
/// every label parses as an integer and lexicographic otherwise.
using DayIndex = std::vector<std::string>;

/// Labels "0", "1", ..., "n-1".
DayIndex integer_index(std::size_t n, std::size_t start = 0);

namespace detail {

class LabeledSeries {
 public:
  const DayIndex& index() const noexcept { return index_; }
  const Eigen::VectorXd& values() const noexcept { return values_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(values_.size()); }
  double operator[](std::size_t i) const { return values_[static_cast<Eigen::Index>(i)]; }

 protected:
  LabeledSeries() = default;
  LabeledSeries(DayIndex index, Eigen::VectorXd values, const char* what);

  DayIndex index_;
  Eigen::VectorXd values_;
};

}  // namespace detail

/// Dimensionless returns x_t. Finite, strictly increasing index, length >= 1.
class ReturnSeries : public detail::LabeledSeries {
 public:
  ReturnSeries() = default;
  ReturnSeries(DayIndex index, Eigen::VectorXd values);
  explicit ReturnSeries(Eigen::VectorXd values);

  ReturnSeries slice(std::size_t begin, std::size_t length) const;
};

/// Volatilities sigma_t on the same scale as returns. Non-negative.
class VolSeries : public detail::LabeledSeries {
 public:
  VolSeries() = default;
  VolSeries(DayIndex index, Eigen::VectorXd values);
  explicit VolSeries(Eigen::VectorXd values);

  VolSeries slice(std::size_t begin, std::size_t length) const;
};

struct IntradayDay {
  std::string date;
  std::vector<std::string> timestamps;
  std::vector<double> prices;
};

/// Intraday prices grouped by calendar day, days in ascending order and
/// timestamps strictly increasing within each day.
struct IntradayBars {
  std::vector<IntradayDay> days;
};

struct Range {
  std::size_t begin = 0;
  std::size_t length = 0;
  std::size_t end() const noexcept { return begin + length; }
};

/// Contiguous train < valid < test partition; test is the suffix.
struct DatasetSplit {
  Range train;
  Range valid;
  Range test;
};

struct SummaryStats {
  double mean = 0;
  double median = 0;
  double std = 0;
  double skewness = 0;
  double kurtosis = 0;  // raw (non-excess)
};

struct RealizedVol {
  VolSeries rv;
  ReturnSeries returns;
  std::vector<std::string> dropped_days;
};

struct DailyData {
  ReturnSeries returns;
  VolSeries rv;
};

/// values[t] = ln(p[t+1] / p[t]). Labels are 0..n-2.
ReturnSeries compute_log_returns(const Eigen::Ref<const Eigen::VectorXd>& prices);

/// Per-day RV = sqrt(sum of squared intraday log returns). The daily return is
/// the close-to-close log return; the first retained day uses its own open.
/// Days with fewer than two prices are dropped and listed in `dropped_days`.
RealizedVol compute_realized_vol(const IntradayBars& bars);

DatasetSplit split_series(std::size_t length, std::size_t valid_len, std::size_t test_len);

SummaryStats summary_stats(const ReturnSeries& returns);

/// Groups `timestamp,price` rows by the calendar date prefix (first 10 chars)
/// and sorts each day by timestamp.
IntradayBars read_intraday_csv(const std::filesystem::path& path);

/// Header `date,return,rv`.
DailyData read_daily_csv(const std::filesystem::path& path);
void write_daily_csv(const std::filesystem::path& path, const ReturnSeries& returns,
                     const VolSeries& rv);
std::string daily_csv_text(const ReturnSeries& returns, const VolSeries& rv);

/// Bit-stable decimal form with 17 significant digits.
std::string format_double(double x);

/// Forecast CSV with header `date,sigma_hat`.
std::string forecast_csv_text(const VolSeries& forecast);
void write_forecast_csv(const std::filesystem::path& path, const VolSeries& forecast);
VolSeries read_forecast_csv(const std::filesystem::path& path);

}  // namespace sigmaforge
