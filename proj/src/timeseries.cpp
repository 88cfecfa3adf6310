#include "sigmaforge/timeseries.hpp"

#include "csv_util.hpp"
#include "sigmaforge/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

namespace sigmaforge {

namespace detail {

bool parse_double(const std::string& field, double& out) {
  if (field.empty()) return false;
  char* end = nullptr;
  out = std::strtod(field.c_str(), &end);
  return end == field.c_str() + field.size();
}

namespace {

bool parse_int(const std::string& s, long long& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

void check_increasing(const DayIndex& index, const char* what) {
  if (index.size() < 2) return;
  std::vector<long long> numeric(index.size());
  bool all_int = true;
  for (std::size_t i = 0; i < index.size() && all_int; ++i) all_int = parse_int(index[i], numeric[i]);
  for (std::size_t i = 1; i < index.size(); ++i) {
    bool ok = all_int ? numeric[i] > numeric[i - 1] : index[i] > index[i - 1];
    if (!ok) {
      fail(ErrorKind::InvalidInput, std::string(what) + " index not strictly increasing at '" +
                                        index[i] + "'");
    }
  }
}

}  // namespace

LabeledSeries::LabeledSeries(DayIndex index, Eigen::VectorXd values, const char* what)
    : index_(std::move(index)), values_(std::move(values)) {
  if (values_.size() < 1) fail(ErrorKind::InsufficientData, std::string(what) + " is empty");
  if (index_.size() != size()) fail(ErrorKind::Shape, std::string(what) + " index/value length mismatch");
  if (!values_.allFinite()) fail(ErrorKind::NonFinite, std::string(what) + " contains NaN or Inf");
  check_increasing(index_, what);
}

}  // namespace detail

DayIndex integer_index(std::size_t n, std::size_t start) {
  DayIndex out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = std::to_string(start + i);
  return out;
}

ReturnSeries::ReturnSeries(DayIndex index, Eigen::VectorXd values)
    : LabeledSeries(std::move(index), std::move(values), "return series") {}

ReturnSeries::ReturnSeries(Eigen::VectorXd values)
    : ReturnSeries(integer_index(static_cast<std::size_t>(values.size())), Eigen::VectorXd(values)) {}

ReturnSeries ReturnSeries::slice(std::size_t begin, std::size_t length) const {
  if (begin + length > size()) fail(ErrorKind::Shape, "slice out of range");
  return ReturnSeries(DayIndex(index_.begin() + begin, index_.begin() + begin + length),
                      values_.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(length)));
}

VolSeries::VolSeries(DayIndex index, Eigen::VectorXd values)
    : LabeledSeries(std::move(index), std::move(values), "volatility series") {
  if ((values_.array() < 0.0).any()) fail(ErrorKind::InvalidInput, "volatility series has negative values");
}

VolSeries::VolSeries(Eigen::VectorXd values)
    : VolSeries(integer_index(static_cast<std::size_t>(values.size())), Eigen::VectorXd(values)) {}

VolSeries VolSeries::slice(std::size_t begin, std::size_t length) const {
  if (begin + length > size()) fail(ErrorKind::Shape, "slice out of range");
  return VolSeries(DayIndex(index_.begin() + begin, index_.begin() + begin + length),
                   values_.segment(static_cast<Eigen::Index>(begin), static_cast<Eigen::Index>(length)));
}

ReturnSeries compute_log_returns(const Eigen::Ref<const Eigen::VectorXd>& prices) {
  if (prices.size() < 2) fail(ErrorKind::InsufficientData, "need at least two prices");
  if (!(prices.array() > 0.0).all() || !prices.allFinite())
    fail(ErrorKind::InvalidInput, "prices must be finite and positive");
  const Eigen::Index n = prices.size() - 1;
  Eigen::VectorXd r = (prices.tail(n).array() / prices.head(n).array()).log();
  return ReturnSeries(std::move(r));
}

RealizedVol compute_realized_vol(const IntradayBars& bars) {
  if (bars.days.empty()) fail(ErrorKind::InsufficientData, "no intraday observations");
  DayIndex dates;
  std::vector<double> rv;
  std::vector<double> ret;
  std::vector<std::string> dropped;
  double prev_close = 0.0;
  for (const auto& day : bars.days) {
    if (day.prices.size() < 2) {
      dropped.push_back(day.date);
      continue;
    }
    for (double p : day.prices) {
      if (!(p > 0.0) || !std::isfinite(p)) fail(ErrorKind::InvalidInput, "non-positive price on " + day.date);
    }
    double ss = 0.0;
    for (std::size_t i = 1; i < day.prices.size(); ++i) {
      const double r = std::log(day.prices[i] / day.prices[i - 1]);
      ss += r * r;
    }
    const double close = day.prices.back();
    const double reference = dates.empty() ? day.prices.front() : prev_close;
    dates.push_back(day.date);
    rv.push_back(std::sqrt(ss));
    ret.push_back(std::log(close / reference));
    prev_close = close;
  }
  if (dates.empty()) fail(ErrorKind::InsufficientData, "no day has at least two prices");
  return RealizedVol{VolSeries(dates, Eigen::Map<Eigen::VectorXd>(rv.data(), static_cast<Eigen::Index>(rv.size()))),
                     ReturnSeries(dates, Eigen::Map<Eigen::VectorXd>(ret.data(), static_cast<Eigen::Index>(ret.size()))),
                     std::move(dropped)};
}

DatasetSplit split_series(std::size_t length, std::size_t valid_len, std::size_t test_len) {
  if (length <= valid_len + test_len) {
    fail(ErrorKind::InsufficientData, "series of length " + std::to_string(length) +
                                          " cannot hold valid=" + std::to_string(valid_len) +
                                          " and test=" + std::to_string(test_len));
  }
  const std::size_t train_len = length - valid_len - test_len;
  return DatasetSplit{{0, train_len}, {train_len, valid_len}, {train_len + valid_len, test_len}};
}

SummaryStats summary_stats(const ReturnSeries& returns) {
  const auto& x = returns.values();
  const auto n = static_cast<double>(x.size());
  if (x.size() < 4) fail(ErrorKind::InsufficientData, "summary statistics need at least four points");
  SummaryStats s;
  s.mean = x.mean();
  const Eigen::ArrayXd c = x.array() - s.mean;
  const double m2 = c.square().mean();
  const double scale = x.cwiseAbs().maxCoeff();
  if (!(m2 > 1e-28 * scale * scale)) fail(ErrorKind::Degenerate, "zero variance");
  const double m3 = c.cube().mean();
  const double m4 = c.square().square().mean();
  s.std = std::sqrt(m2 * n / (n - 1.0));
  s.skewness = m3 / std::pow(m2, 1.5);
  s.kurtosis = m4 / (m2 * m2);

  std::vector<double> sorted(x.data(), x.data() + x.size());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  s.median = sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  return s;
}

IntradayBars read_intraday_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::InsufficientData, path.string() + " is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "timestamp" || header[1] != "price")
    fail(ErrorKind::InvalidInput, path.string() + ": expected header 'timestamp,price'");

  std::map<std::string, std::vector<std::pair<std::string, double>>> by_day;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    double price = 0.0;
    if (fields.size() < 2 || fields[0].size() < 10 || !detail::parse_double(fields[1], price))
      fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    if (!(price > 0.0)) fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": non-positive price");
    by_day[fields[0].substr(0, 10)].emplace_back(fields[0], price);
  }

  IntradayBars bars;
  for (auto& [date, rows] : by_day) {
    std::sort(rows.begin(), rows.end());
    IntradayDay day{date, {}, {}};
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (i > 0 && rows[i].first == rows[i - 1].first)
        fail(ErrorKind::InvalidInput, "duplicate timestamp " + rows[i].first);
      day.timestamps.push_back(rows[i].first);
      day.prices.push_back(rows[i].second);
    }
    bars.days.push_back(std::move(day));
  }
  return bars;
}

DailyData read_daily_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::InsufficientData, path.string() + " is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 3 || header[0] != "date" || header[1] != "return" || header[2] != "rv")
    fail(ErrorKind::InvalidInput, path.string() + ": expected header 'date,return,rv'");

  DayIndex dates;
  std::vector<double> ret, rv;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    double r = 0.0, v = 0.0;
    if (fields.size() < 3 || !detail::parse_double(fields[1], r) || !detail::parse_double(fields[2], v))
      fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    dates.push_back(fields[0]);
    ret.push_back(r);
    rv.push_back(v);
  }
  if (dates.empty()) fail(ErrorKind::InsufficientData, path.string() + " has no rows");
  const auto n = static_cast<Eigen::Index>(dates.size());
  return DailyData{ReturnSeries(dates, Eigen::Map<Eigen::VectorXd>(ret.data(), n)),
                   VolSeries(dates, Eigen::Map<Eigen::VectorXd>(rv.data(), n))};
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string daily_csv_text(const ReturnSeries& returns, const VolSeries& rv) {
  if (returns.size() != rv.size() || returns.index() != rv.index())
    fail(ErrorKind::Shape, "returns and rv must share an index");
  std::ostringstream out;
  out << "date,return,rv\n";
  for (std::size_t i = 0; i < returns.size(); ++i)
    out << returns.index()[i] << ',' << format_double(returns[i]) << ',' << format_double(rv[i]) << '\n';
  return out.str();
}

void write_daily_csv(const std::filesystem::path& path, const ReturnSeries& returns, const VolSeries& rv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << daily_csv_text(returns, rv);
}

std::string forecast_csv_text(const VolSeries& forecast) {
  std::ostringstream out;
  out << "date,sigma_hat\n";
  for (std::size_t i = 0; i < forecast.size(); ++i) out << forecast.index()[i] << ',' << format_double(forecast[i]) << '\n';
  return out.str();
}

void write_forecast_csv(const std::filesystem::path& path, const VolSeries& forecast) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::Io, "cannot write " + path.string());
  out << forecast_csv_text(forecast);
}

VolSeries read_forecast_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::Io, "cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::InsufficientData, path.string() + " is empty");
  auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header[0] != "date" || header[1] != "sigma_hat")
    fail(ErrorKind::InvalidInput, path.string() + ": expected header 'date,sigma_hat'");
  DayIndex dates;
  std::vector<double> values;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    auto fields = detail::split_csv_line(line);
    double v = 0.0;
    if (fields.size() < 2 || !detail::parse_double(fields[1], v))
      fail(ErrorKind::InvalidInput, path.string() + ":" + std::to_string(line_no) + ": malformed row");
    dates.push_back(fields[0]);
    values.push_back(v);
  }
  if (dates.empty()) fail(ErrorKind::InsufficientData, path.string() + " has no rows");
  return VolSeries(dates, Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size())));
}

}  // namespace sigmaforge
