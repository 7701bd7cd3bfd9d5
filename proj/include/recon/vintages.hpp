#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace recon {

struct ReconConfig;

/// Calendar quarter. Ordered and convertible to a contiguous integer index.
struct Quarter {
  int year = 0;
  int quarter = 1;  // 1..4

  static Quarter parse(std::string_view text);  // "YYYYQn"
  static Quarter from_index(int index);
  int index() const { return year * 4 + (quarter - 1); }
  std::string str() const;
  Quarter next() const { return from_index(index() + 1); }

  friend bool operator==(const Quarter&, const Quarter&) = default;
  friend auto operator<=>(const Quarter& a, const Quarter& b) { return a.index() <=> b.index(); }
};

struct VintageKey {
  int series = 0;   // 0 or 1
  Quarter period;
  int release = 1;  // ordinal position in the release schedule, >= 1

  friend bool operator==(const VintageKey&, const VintageKey&) = default;
  friend auto operator<=>(const VintageKey& a, const VintageKey& b) {
    if (auto c = a.series <=> b.series; c != 0) return c;
    if (auto c = a.period <=> b.period; c != 0) return c;
    return a.release <=> b.release;
  }
};

struct VintageObservation {
  VintageKey key;
  double value = 0.0;
};

/// Ragged set of release-indexed observations for two series. Absent
/// (series, period, release) triples are missing values.
class VintagePanel {
 public:
  VintagePanel(std::vector<VintageObservation> observations, Quarter first, Quarter last);

  const std::map<VintageKey, double>& observations() const { return obs_; }
  Quarter first_period() const { return first_; }
  Quarter last_period() const { return last_; }
  int num_periods() const { return last_.index() - first_.index() + 1; }
  /// Sorted distinct release indices present for a series.
  const std::vector<int>& releases(int series) const { return releases_.at(static_cast<std::size_t>(series)); }
  int max_release(int series) const;
  std::size_t size() const { return obs_.size(); }

 private:
  std::map<VintageKey, double> obs_;
  Quarter first_;
  Quarter last_;
  std::array<std::vector<int>, 2> releases_;
};

/// T x 2l grid; column order is series 0 releases 1..l, then series 1
/// releases 1..l. Missing entries are NaN in `values` and true in `missing`.
struct ObservationMatrix {
  Eigen::MatrixXd values;
  Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing;
  Quarter first_period;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  bool observed(Eigen::Index t, Eigen::Index j) const { return !missing(t, j); }
  Eigen::Index count_observed() const { return (!missing).count(); }
  /// Builds from a value grid where NaN marks missing entries.
  static ObservationMatrix from_values(Eigen::MatrixXd values, Quarter first = {2000, 1});
};

VintagePanel parse_vintage_csv(std::string_view text);
VintagePanel read_vintage_csv(const std::string& path);
/// Rows sorted by (series, period, release); values printed round-trip exact.
std::string serialize_vintage_csv(const VintagePanel& panel);

ObservationMatrix to_observation_matrix(const VintagePanel& panel, const ReconConfig& config);
/// Inverse of to_observation_matrix: every unmasked cell becomes one observation.
VintagePanel to_panel(const ObservationMatrix& obs, int releases);

}  // namespace recon
