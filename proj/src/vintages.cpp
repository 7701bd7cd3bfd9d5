#include "recon/vintages.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>

#include "recon/config.hpp"
#include "recon/error.hpp"

namespace recon {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= line.size(); ++i) {
    if (i == line.size() || line[i] == ',') {
      out.push_back(trim(line.substr(start, i - start)));
      start = i + 1;
    }
  }
  return out;
}

template <class Int>
bool parse_int(std::string_view s, Int& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

}  // namespace

Quarter Quarter::parse(std::string_view text) {
  text = trim(text);
  const auto q = text.find_first_of("Qq");
  Quarter out;
  if (q == std::string_view::npos || q != 4 || q + 2 != text.size() ||
      !parse_int(text.substr(0, q), out.year) || !parse_int(text.substr(q + 1), out.quarter) ||
      out.quarter < 1 || out.quarter > 4) {
    throw InputError("malformed period '" + std::string(text) + "' (expected YYYYQn)");
  }
  return out;
}

Quarter Quarter::from_index(int index) {
  Quarter q;
  q.year = index >= 0 ? index / 4 : -((-index + 3) / 4);
  q.quarter = index - q.year * 4 + 1;
  return q;
}

std::string Quarter::str() const { return std::to_string(year) + "Q" + std::to_string(quarter); }

VintagePanel::VintagePanel(std::vector<VintageObservation> observations, Quarter first, Quarter last)
    : first_(first), last_(last) {
  if (last_ < first_) throw InputError("period range is empty");
  std::array<std::set<int>, 2> seen;
  for (const auto& o : observations) {
    if (o.key.series != 0 && o.key.series != 1)
      throw InputError("series must be 0 or 1, got " + std::to_string(o.key.series));
    if (o.key.release < 1) throw InputError("release index must be >= 1");
    if (o.key.period < first_ || last_ < o.key.period)
      throw InputError("period " + o.key.period.str() + " outside panel range");
    if (!std::isfinite(o.value)) throw InputError("non-finite value at " + o.key.period.str());
    if (!obs_.emplace(o.key, o.value).second) {
      throw InputError("duplicate observation (series " + std::to_string(o.key.series) + ", " +
                       o.key.period.str() + ", release " + std::to_string(o.key.release) + ")");
    }
    seen[static_cast<std::size_t>(o.key.series)].insert(o.key.release);
  }
  for (std::size_t s = 0; s < 2; ++s) releases_[s].assign(seen[s].begin(), seen[s].end());
}

int VintagePanel::max_release(int series) const {
  const auto& r = releases(series);
  return r.empty() ? 0 : r.back();
}

VintagePanel parse_vintage_csv(std::string_view text) {
  std::vector<VintageObservation> rows;
  std::set<VintageKey> keys;
  bool header_seen = false;
  bool any_row = false;
  Quarter lo{std::numeric_limits<int>::max() / 8, 1};
  Quarter hi{std::numeric_limits<int>::min() / 8, 1};
  std::size_t line_no = 0;

  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB && static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }

  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(pos, end - pos));
    pos = end + 1;
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    const auto where = " on line " + std::to_string(line_no);
    if (!header_seen) {
      if (fields.size() != 4 || fields[0] != "series" || fields[1] != "period" ||
          fields[2] != "release" || fields[3] != "value") {
        throw InputError("expected header 'series,period,release,value'" + where);
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != 4) throw InputError("expected 4 fields" + where);
    VintageKey key;
    if (!parse_int(fields[0], key.series) || (key.series != 0 && key.series != 1))
      throw InputError("series must be 0 or 1" + where);
    try {
      key.period = Quarter::parse(fields[1]);
    } catch (const InputError& e) {
      throw InputError(e.what() + where);
    }
    if (!parse_int(fields[2], key.release)) throw InputError("malformed release index" + where);
    if (key.release < 1) throw InputError("release index must be >= 1" + where);
    if (!keys.insert(key).second) {
      throw InputError("duplicate (series,period,release) (" + std::string(fields[0]) + "," +
                       std::string(fields[1]) + "," + std::string(fields[2]) + ")" + where);
    }
    any_row = true;
    lo = std::min(lo, key.period);
    hi = std::max(hi, key.period);
    if (fields[3] == "NA") continue;
    double value = 0.0;
    if (!parse_double(fields[3], value))
      throw InputError("non-numeric value '" + std::string(fields[3]) + "'" + where);
    rows.push_back({key, value});
  }
  if (!header_seen) throw InputError("empty input: missing header");
  if (!any_row) throw InputError("empty panel");
  return VintagePanel(std::move(rows), lo, hi);
}

VintagePanel read_vintage_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_vintage_csv(ss.str());
}

std::string serialize_vintage_csv(const VintagePanel& panel) {
  std::string out = "series,period,release,value\n";
  for (const auto& [key, value] : panel.observations()) {
    out += std::to_string(key.series);
    out += ',';
    out += key.period.str();
    out += ',';
    out += std::to_string(key.release);
    out += ',';
    out += format_double(value);
    out += '\n';
  }
  return out;
}

ObservationMatrix ObservationMatrix::from_values(Eigen::MatrixXd values, Quarter first) {
  ObservationMatrix m;
  m.missing = values.array().isNaN();
  m.values = std::move(values);
  m.first_period = first;
  return m;
}

ObservationMatrix to_observation_matrix(const VintagePanel& panel, const ReconConfig& config) {
  const int l = config.l;
  for (int s = 0; s < 2; ++s) {
    if (panel.max_release(s) > l) {
      throw InputError("series " + std::to_string(s) + " has release " +
                       std::to_string(panel.max_release(s)) + " but config l = " + std::to_string(l));
    }
  }
  const int rows = panel.num_periods();
  Eigen::MatrixXd values =
      Eigen::MatrixXd::Constant(rows, 2 * l, std::numeric_limits<double>::quiet_NaN());
  const int base = panel.first_period().index();
  for (const auto& [key, value] : panel.observations()) {
    values(key.period.index() - base, key.series * l + (key.release - 1)) = value;
  }
  return ObservationMatrix::from_values(std::move(values), panel.first_period());
}

VintagePanel to_panel(const ObservationMatrix& obs, int releases) {
  if (obs.cols() != 2 * releases) throw InputError("observation matrix must have 2l columns");
  std::vector<VintageObservation> rows;
  for (Eigen::Index t = 0; t < obs.rows(); ++t) {
    const Quarter period = Quarter::from_index(obs.first_period.index() + static_cast<int>(t));
    for (Eigen::Index j = 0; j < obs.cols(); ++j) {
      if (!obs.observed(t, j)) continue;
      rows.push_back({{static_cast<int>(j / releases), period, static_cast<int>(j % releases) + 1},
                      obs.values(t, j)});
    }
  }
  const Quarter last = Quarter::from_index(obs.first_period.index() + static_cast<int>(obs.rows()) - 1);
  return VintagePanel(std::move(rows), obs.first_period, last);
}

}  // namespace recon
