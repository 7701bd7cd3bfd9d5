#include "recon/config.hpp"

#include <cmath>
#include <fstream>

#include "recon/error.hpp"

namespace recon {

using nlohmann::json;

std::string to_string(CrossMode mode) {
  switch (mode) {
    case CrossMode::none: return "none";
    case CrossMode::contemporaneous: return "contemporaneous";
    case CrossMode::unrestricted: return "unrestricted";
  }
  return "none";
}

CrossMode parse_cross_mode(const std::string& text) {
  if (text == "none") return CrossMode::none;
  if (text == "contemporaneous") return CrossMode::contemporaneous;
  if (text == "unrestricted") return CrossMode::unrestricted;
  throw InputError("unknown cross mode '" + text + "' (none|contemporaneous|unrestricted)");
}

void ReconConfig::validate() const {
  if (l < 1) throw InputError("config: l must be >= 1");
  if (p < 1) throw InputError("config: p must be >= 1");
  for (int s = 0; s < 2; ++s) {
    const auto& labels = release_labels[static_cast<std::size_t>(s)];
    if (!labels.empty() && static_cast<int>(labels.size()) != l)
      throw InputError("config: release_labels must have l entries per series");
  }
}

std::string ReconConfig::release_label(int series, int release) const {
  const auto& labels = release_labels[static_cast<std::size_t>(series)];
  if (!labels.empty()) return labels[static_cast<std::size_t>(release - 1)];
  return "release " + std::to_string(release);
}

namespace {

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad value for '") + key + "': " + e.what());
  }
}

void reject_unknown_keys(const json& j, std::initializer_list<const char*> known, const char* what) {
  if (!j.is_object()) throw InputError(std::string(what) + ": expected a JSON object");
  for (const auto& item : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || item.key() == k;
    if (!ok) throw InputError(std::string(what) + ": unknown key '" + item.key() + "'");
  }
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw InputError(path + ": " + e.what());
  }
}

Eigen::VectorXd vector_from_json(const json& j, Eigen::Index n, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != n)
    throw InputError(std::string(what) + ": expected an array of length " + std::to_string(n));
  Eigen::VectorXd v(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!j[static_cast<std::size_t>(i)].is_number())
      throw InputError(std::string(what) + ": non-numeric entry");
    v(i) = j[static_cast<std::size_t>(i)].get<double>();
  }
  return v;
}

Eigen::MatrixXd matrix_from_json(const json& j, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != rows)
    throw InputError(std::string(what) + ": expected " + std::to_string(rows) + " rows");
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    m.row(r) = vector_from_json(j[static_cast<std::size_t>(r)], cols, what).transpose();
  return m;
}

json vector_to_json(const Eigen::VectorXd& v) { return json(std::vector<double>(v.data(), v.data() + v.size())); }

json matrix_to_json(const Eigen::MatrixXd& m) {
  json out = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_to_json(m.row(r).transpose()));
  return out;
}

Eigen::Index cross_block_size(CrossMode mode, int l) {
  switch (mode) {
    case CrossMode::none: return 0;
    case CrossMode::contemporaneous: return l;
    case CrossMode::unrestricted: return static_cast<Eigen::Index>(l) * l;
  }
  return 0;
}

}  // namespace

ReconConfig config_from_json(const json& j) {
  reject_unknown_keys(j, {"l", "p", "center", "spillovers", "cross_news", "cross_noise",
                          "restrict_final_news", "release_labels"},
                      "config");
  ReconConfig c;
  c.l = get_or(j, "l", c.l);
  c.p = get_or(j, "p", c.p);
  c.center = get_or(j, "center", c.center);
  c.spillovers = get_or(j, "spillovers", c.spillovers);
  c.cross_news = parse_cross_mode(get_or<std::string>(j, "cross_news", "none"));
  c.cross_noise = parse_cross_mode(get_or<std::string>(j, "cross_noise", "none"));
  c.restrict_final_news = get_or(j, "restrict_final_news", c.restrict_final_news);
  if (j.contains("release_labels")) {
    const auto& labels = j.at("release_labels");
    if (!labels.is_array() || labels.size() != 2)
      throw InputError("config: release_labels must be a pair of string lists");
    for (std::size_t s = 0; s < 2; ++s) c.release_labels[s] = labels[s].get<std::vector<std::string>>();
  }
  c.validate();
  return c;
}

json to_json(const ReconConfig& c) {
  json j = {{"l", c.l},
            {"p", c.p},
            {"center", c.center},
            {"spillovers", c.spillovers},
            {"cross_news", to_string(c.cross_news)},
            {"cross_noise", to_string(c.cross_noise)},
            {"restrict_final_news", c.restrict_final_news}};
  if (!c.release_labels[0].empty() || !c.release_labels[1].empty())
    j["release_labels"] = {c.release_labels[0], c.release_labels[1]};
  return j;
}

ReconConfig read_config_file(const std::string& path) { return config_from_json(read_json_file(path)); }

ParamVector ParamVector::zeros(const ReconConfig& config) {
  ParamVector p;
  p.rho = Eigen::VectorXd::Zero(config.p);
  p.sigma_news = Eigen::MatrixXd::Zero(2, config.l);
  p.sigma_noise = Eigen::MatrixXd::Zero(2, config.l);
  if (config.center) p.mean = 0.0;
  if (config.spillovers) p.ts_diag = Eigen::VectorXd::Zero(4 * config.l);
  if (config.cross_news != CrossMode::none) p.psi = Eigen::MatrixXd::Zero(config.l, config.l);
  if (config.cross_noise != CrossMode::none) p.phi = Eigen::MatrixXd::Zero(config.l, config.l);
  return p;
}

void ParamVector::validate(const ReconConfig& config) const {
  const int l = config.l;
  if (rho.size() != config.p) throw InputError("params: rho must have p entries");
  if (sigma_news.rows() != 2 || sigma_news.cols() != l) throw InputError("params: sigma_news must be 2 x l");
  if (sigma_noise.rows() != 2 || sigma_noise.cols() != l) throw InputError("params: sigma_noise must be 2 x l");
  if (config.center != mean.has_value()) throw InputError("params: mean present iff config.center");
  if (config.spillovers != ts_diag.has_value()) throw InputError("params: ts_diag present iff spillovers");
  if (ts_diag && ts_diag->size() != 4 * l) throw InputError("params: ts_diag must have 4l entries");
  if ((config.cross_news != CrossMode::none) != psi.has_value())
    throw InputError("params: psi present iff cross_news");
  if ((config.cross_noise != CrossMode::none) != phi.has_value())
    throw InputError("params: phi present iff cross_noise");
  if (psi && (psi->rows() != l || psi->cols() != l)) throw InputError("params: psi must be l x l");
  if (phi && (phi->rows() != l || phi->cols() != l)) throw InputError("params: phi must be l x l");
  const auto off_diagonal_zero = [](const Eigen::MatrixXd& m) {
    return (m - Eigen::MatrixXd(m.diagonal().asDiagonal())).cwiseAbs().maxCoeff() == 0.0;
  };
  if (psi && config.cross_news == CrossMode::contemporaneous && !off_diagonal_zero(*psi))
    throw InputError("params: contemporaneous psi must be diagonal");
  if (phi && config.cross_noise == CrossMode::contemporaneous && !off_diagonal_zero(*phi))
    throw InputError("params: contemporaneous phi must be diagonal");

  bool finite = rho.allFinite() && std::isfinite(sigma_e) && sigma_news.allFinite() && sigma_noise.allFinite();
  if (mean) finite = finite && std::isfinite(*mean);
  if (ts_diag) finite = finite && ts_diag->allFinite();
  if (psi) finite = finite && psi->allFinite();
  if (phi) finite = finite && phi->allFinite();
  if (!finite) throw InputError("params: non-finite values");
  if (sigma_e < 0 || (sigma_news.array() < 0).any() || (sigma_noise.array() < 0).any())
    throw InputError("params: scales must be nonnegative");
}

double ParamVector::truth_innovation_variance() const {
  return sigma_e * sigma_e + sigma_news.squaredNorm();
}

ParamVector params_from_json(const json& j, const ReconConfig& config) {
  reject_unknown_keys(j, {"rho", "sigma_e", "sigma_news", "sigma_noise", "mean", "ts_diag", "psi", "phi"},
                      "params");
  const int l = config.l;
  ParamVector p = ParamVector::zeros(config);
  if (!j.contains("rho") || !j.contains("sigma_e") || !j.contains("sigma_news") || !j.contains("sigma_noise"))
    throw InputError("params: rho, sigma_e, sigma_news and sigma_noise are required");
  p.rho = vector_from_json(j.at("rho"), config.p, "rho");
  p.sigma_e = get_or(j, "sigma_e", 0.0);
  p.sigma_news = matrix_from_json(j.at("sigma_news"), 2, l, "sigma_news");
  p.sigma_noise = matrix_from_json(j.at("sigma_noise"), 2, l, "sigma_noise");
  if (config.center) p.mean = get_or(j, "mean", 0.0);
  if (config.spillovers && j.contains("ts_diag")) p.ts_diag = vector_from_json(j.at("ts_diag"), 4 * l, "ts_diag");
  if (config.cross_news != CrossMode::none && j.contains("psi")) p.psi = matrix_from_json(j.at("psi"), l, l, "psi");
  if (config.cross_noise != CrossMode::none && j.contains("phi")) p.phi = matrix_from_json(j.at("phi"), l, l, "phi");
  p.validate(config);
  return p;
}

json to_json(const ParamVector& p, const ReconConfig& config) {
  (void)config;
  json j = {{"rho", vector_to_json(p.rho)},
            {"sigma_e", p.sigma_e},
            {"sigma_news", matrix_to_json(p.sigma_news)},
            {"sigma_noise", matrix_to_json(p.sigma_noise)}};
  if (p.mean) j["mean"] = *p.mean;
  if (p.ts_diag) j["ts_diag"] = vector_to_json(*p.ts_diag);
  if (p.psi) j["psi"] = matrix_to_json(*p.psi);
  if (p.phi) j["phi"] = matrix_to_json(*p.phi);
  return j;
}

ParamVector read_params_file(const std::string& path, const ReconConfig& config) {
  return params_from_json(read_json_file(path), config);
}

Eigen::Index theta_size(const ReconConfig& c) {
  Eigen::Index n = 2 * (1 + 2 * c.l) + (c.p - 1);
  if (c.center) n += 1;
  if (c.spillovers) n += 4 * c.l;
  n += cross_block_size(c.cross_news, c.l);
  n += cross_block_size(c.cross_noise, c.l);
  return n;
}

namespace {

void pack_cross(Eigen::VectorXd& flat, Eigen::Index& k, const Eigen::MatrixXd& m, CrossMode mode) {
  const Eigen::Index l = m.rows();
  if (mode == CrossMode::contemporaneous) {
    for (Eigen::Index i = 0; i < l; ++i) flat(k++) = m(i, i);
  } else if (mode == CrossMode::unrestricted) {
    for (Eigen::Index i = 0; i < l; ++i)
      for (Eigen::Index j = 0; j < l; ++j) flat(k++) = m(i, j);
  }
}

Eigen::MatrixXd unpack_cross(const Eigen::VectorXd& flat, Eigen::Index& k, int l, CrossMode mode) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(l, l);
  if (mode == CrossMode::contemporaneous) {
    for (int i = 0; i < l; ++i) m(i, i) = flat(k++);
  } else {
    for (int i = 0; i < l; ++i)
      for (int j = 0; j < l; ++j) m(i, j) = flat(k++);
  }
  return m;
}

}  // namespace

Eigen::VectorXd theta_pack(const ParamVector& p, const ReconConfig& c) {
  p.validate(c);
  Eigen::VectorXd flat(theta_size(c));
  Eigen::Index k = 0;
  for (int i = 0; i < c.p; ++i) flat(k++) = p.rho(i);
  flat(k++) = p.sigma_e;
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < c.l; ++i) flat(k++) = p.sigma_news(s, i);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < c.l; ++i) flat(k++) = p.sigma_noise(s, i);
  if (c.center) flat(k++) = *p.mean;
  if (c.spillovers) {
    flat.segment(k, 4 * c.l) = *p.ts_diag;
    k += 4 * c.l;
  }
  if (p.psi) pack_cross(flat, k, *p.psi, c.cross_news);
  if (p.phi) pack_cross(flat, k, *p.phi, c.cross_noise);
  return flat;
}

ParamVector theta_unpack(const Eigen::Ref<const Eigen::VectorXd>& flat_ref, const ReconConfig& c) {
  if (flat_ref.size() != theta_size(c)) {
    throw InputError("theta length " + std::to_string(flat_ref.size()) + " does not match layout length " +
                     std::to_string(theta_size(c)));
  }
  const Eigen::VectorXd flat = flat_ref;
  ParamVector p = ParamVector::zeros(c);
  Eigen::Index k = 0;
  for (int i = 0; i < c.p; ++i) p.rho(i) = flat(k++);
  p.sigma_e = flat(k++);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < c.l; ++i) p.sigma_news(s, i) = flat(k++);
  for (int s = 0; s < 2; ++s)
    for (int i = 0; i < c.l; ++i) p.sigma_noise(s, i) = flat(k++);
  if (c.center) p.mean = flat(k++);
  if (c.spillovers) {
    p.ts_diag = flat.segment(k, 4 * c.l);
    k += 4 * c.l;
  }
  if (c.cross_news != CrossMode::none) p.psi = unpack_cross(flat, k, c.l, c.cross_news);
  if (c.cross_noise != CrossMode::none) p.phi = unpack_cross(flat, k, c.l, c.cross_noise);
  return p;
}

std::vector<std::string> theta_names(const ReconConfig& c) {
  std::vector<std::string> names;
  const auto sr = [](int s, int i) { return std::to_string(s) + "_" + std::to_string(i); };
  for (int i = 1; i <= c.p; ++i) names.push_back("rho_" + std::to_string(i));
  names.push_back("sigma_e");
  for (int s = 0; s < 2; ++s)
    for (int i = 1; i <= c.l; ++i) names.push_back("sigma_news_" + sr(s, i));
  for (int s = 0; s < 2; ++s)
    for (int i = 1; i <= c.l; ++i) names.push_back("sigma_noise_" + sr(s, i));
  if (c.center) names.push_back("mean");
  if (c.spillovers) {
    for (const char* block : {"news", "noise"})
      for (int s = 0; s < 2; ++s)
        for (int i = 1; i <= c.l; ++i) names.push_back(std::string("ts_") + block + "_" + sr(s, i));
  }
  const auto cross = [&](const char* tag, CrossMode mode) {
    if (mode == CrossMode::contemporaneous) {
      for (int i = 1; i <= c.l; ++i) names.push_back(std::string(tag) + "_" + sr(i, i));
    } else if (mode == CrossMode::unrestricted) {
      for (int i = 1; i <= c.l; ++i)
        for (int j = 1; j <= c.l; ++j) names.push_back(std::string(tag) + "_" + sr(i, j));
    }
  };
  cross("psi", c.cross_news);
  cross("phi", c.cross_noise);
  return names;
}

double companion_spectral_radius(const Eigen::VectorXd& rho) {
  const Eigen::Index p = rho.size();
  if (p == 1) return std::abs(rho(0));
  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(p, p);
  companion.row(0) = rho.transpose();
  companion.bottomLeftCorner(p - 1, p - 1).setIdentity();
  return companion.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_stationary(const Eigen::VectorXd& rho) { return companion_spectral_radius(rho) < 1.0; }

}  // namespace recon
