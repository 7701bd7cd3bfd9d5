#include "recon/filter.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "recon/error.hpp"

namespace recon {

namespace {

constexpr double kRankRel = 1e-10;

struct InnovationFactor {
  Eigen::MatrixXd F_inv;
  Eigen::MatrixXd null_basis;
  double log_det = 0.0;
  int rank = 0;
};

InnovationFactor factor_innovation(const Eigen::MatrixXd& F, bool allow_singular) {
  const Eigen::Index n = F.rows();
  InnovationFactor out;
  out.null_basis.resize(n, 0);
  if (n == 0) return out;
  if (!F.allFinite()) throw DegenerateParameterError("innovation covariance is not finite");

  const double scale = F.diagonal().cwiseAbs().maxCoeff();
  Eigen::LLT<Eigen::MatrixXd> llt(F);
  if (llt.info() == Eigen::Success) {
    const Eigen::VectorXd d = llt.matrixLLT().diagonal();
    if (d.minCoeff() * d.minCoeff() > kRankRel * scale) {
      out.F_inv = llt.solve(Eigen::MatrixXd::Identity(n, n));
      out.F_inv = 0.5 * (out.F_inv + out.F_inv.transpose());
      out.log_det = 2.0 * d.array().log().sum();
      out.rank = static_cast<int>(n);
      return out;
    }
  }
  if (!allow_singular) throw DegenerateParameterError("innovation covariance is not positive definite");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(F);
  const Eigen::VectorXd& lambda = eig.eigenvalues();
  const double top = lambda.maxCoeff();
  const double threshold = kRankRel * std::max(top, 0.0);
  std::vector<Eigen::Index> keep, drop;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (top > 1e-300 && lambda(i) > threshold) keep.push_back(i);
    else drop.push_back(i);
  }
  out.F_inv = Eigen::MatrixXd::Zero(n, n);
  for (const auto i : keep) {
    out.F_inv += eig.eigenvectors().col(i) * eig.eigenvectors().col(i).transpose() / lambda(i);
    out.log_det += std::log(lambda(i));
  }
  out.null_basis.resize(n, static_cast<Eigen::Index>(drop.size()));
  for (std::size_t k = 0; k < drop.size(); ++k) out.null_basis.col(static_cast<Eigen::Index>(k)) = eig.eigenvectors().col(drop[k]);
  out.rank = static_cast<int>(keep.size());
  return out;
}

void symmetrize(Eigen::MatrixXd& P) { P = 0.5 * (P + P.transpose()); }

void check_dims(const StateSpaceModel& model, const ObservationMatrix& obs) {
  if (obs.cols() != model.n()) {
    throw InputError("observation matrix has " + std::to_string(obs.cols()) + " columns, model expects " +
                     std::to_string(model.n()));
  }
  if (obs.rows() < 1) throw InputError("observation matrix has no periods");
}

}  // namespace

FilterCovariances filter_covariances(const StateSpaceModel& model, const ObservationMatrix& obs) {
  check_dims(model, obs);
  const auto T_len = static_cast<std::size_t>(obs.rows());
  const int m = model.m();
  const Eigen::MatrixXd RRt = model.RRt();

  FilterCovariances cov;
  cov.observed.resize(T_len);
  cov.Zt.resize(T_len);
  cov.P_pred.resize(T_len);
  cov.P_filt.resize(T_len);
  cov.F_inv.resize(T_len);
  cov.gain.resize(T_len);
  cov.null_basis.resize(T_len);
  cov.log_det.resize(T_len);
  cov.rank.resize(T_len);

  Eigen::MatrixXd P = model.P1;
  for (std::size_t t = 0; t < T_len; ++t) {
    auto& idx = cov.observed[t];
    for (Eigen::Index j = 0; j < obs.cols(); ++j)
      if (obs.observed(static_cast<Eigen::Index>(t), j)) idx.push_back(static_cast<int>(j));
    const auto n_t = static_cast<Eigen::Index>(idx.size());

    Eigen::MatrixXd Zt(n_t, m);
    for (Eigen::Index k = 0; k < n_t; ++k) Zt.row(k) = model.Z.row(idx[static_cast<std::size_t>(k)]);
    cov.P_pred[t] = P;

    if (n_t == 0) {
      cov.P_filt[t] = P;
      cov.gain[t].resize(m, 0);
      cov.F_inv[t].resize(0, 0);
      cov.null_basis[t].resize(0, 0);
    } else {
      const Eigen::MatrixXd ZP = Zt * P;
      Eigen::MatrixXd F = ZP * Zt.transpose();
      symmetrize(F);
      auto factor = factor_innovation(F, true);
      cov.gain[t] = ZP.transpose() * factor.F_inv;
      Eigen::MatrixXd Pf = P - cov.gain[t] * ZP;
      symmetrize(Pf);
      cov.P_filt[t] = std::move(Pf);
      cov.F_inv[t] = std::move(factor.F_inv);
      cov.null_basis[t] = std::move(factor.null_basis);
      cov.log_det[t] = factor.log_det;
      cov.rank[t] = factor.rank;
    }
    cov.Zt[t] = std::move(Zt);
    P = model.T * cov.P_filt[t] * model.T.transpose() + RRt;
    symmetrize(P);
  }
  return cov;
}

FilterResult kalman_filter(const StateSpaceModel& model, const ObservationMatrix& obs, FilterCovariances cov,
                           bool homogeneous) {
  check_dims(model, obs);
  const std::size_t T_len = cov.periods();
  if (T_len != static_cast<std::size_t>(obs.rows())) throw InputError("covariance pass does not match data");

  FilterResult res;
  res.predicted_mean.resize(T_len);
  res.filtered_mean.resize(T_len);
  res.innovations.resize(T_len);
  const double log2pi = std::log(2.0 * std::numbers::pi);

  Eigen::VectorXd a = homogeneous ? Eigen::VectorXd::Zero(model.m()) : model.a1;
  for (std::size_t t = 0; t < T_len; ++t) {
    res.predicted_mean[t] = a;
    const auto& idx = cov.observed[t];
    Eigen::VectorXd v(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t k = 0; k < idx.size(); ++k) v(static_cast<Eigen::Index>(k)) = obs.values(static_cast<Eigen::Index>(t), idx[k]);
    if (v.size() > 0) {
      v -= cov.Zt[t] * a;
      if (cov.null_basis[t].cols() > 0) {
        const double off_support = (cov.null_basis[t].transpose() * v).cwiseAbs().maxCoeff();
        if (off_support > 1e-7 * (1.0 + v.cwiseAbs().maxCoeff())) {
          throw DegenerateParameterError("data lie outside the support of a singular innovation covariance");
        }
      }
      res.loglik -= 0.5 * (cov.rank[t] * log2pi + cov.log_det[t] + v.dot(cov.F_inv[t] * v));
      a += cov.gain[t] * v;
    }
    res.filtered_mean[t] = a;
    res.innovations[t] = std::move(v);
    a = model.T * a;
    if (!homogeneous) a += model.c;
  }
  if (!std::isfinite(res.loglik)) throw DegenerateParameterError("log-likelihood is not finite");
  res.cov = std::move(cov);
  return res;
}

FilterResult kalman_filter(const StateSpaceModel& model, const ObservationMatrix& obs) {
  return kalman_filter(model, obs, filter_covariances(model, obs));
}

namespace {

void check_pair(const StateSpaceModel& model, const FilterResult& f) {
  if (f.periods() == 0 || f.cov.periods() != f.periods()) throw InputError("smoother: empty filter result");
  if (f.predicted_mean.front().size() != model.m() || f.cov.P_pred.front().rows() != model.m())
    throw InputError("smoother: filter result does not match model state dimension");
  for (std::size_t t = 0; t < f.periods(); ++t) {
    if (f.cov.Zt[t].rows() > 0 && f.cov.Zt[t].cols() != model.m())
      throw InputError("smoother: filter result does not match model");
  }
}

}  // namespace

SmootherResult kalman_smoother(const StateSpaceModel& model, const FilterResult& f) {
  check_pair(model, f);
  const std::size_t T_len = f.periods();
  const int m = model.m();
  SmootherResult out;
  out.mean.resize(T_len);
  out.cov.resize(T_len);

  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  Eigen::MatrixXd N = Eigen::MatrixXd::Zero(m, m);
  const Eigen::MatrixXd Tt = model.T.transpose();
  for (std::size_t i = T_len; i-- > 0;) {
    const auto& Zt = f.cov.Zt[i];
    const auto& P = f.cov.P_pred[i];
    if (Zt.rows() > 0) {
      // L_t = T (I - gain Z_t)
      const Eigen::MatrixXd L = model.T - model.T * f.cov.gain[i] * Zt;
      r = Zt.transpose() * (f.cov.F_inv[i] * f.innovations[i]) + L.transpose() * r;
      N = Zt.transpose() * f.cov.F_inv[i] * Zt + L.transpose() * N * L;
    } else {
      r = Tt * r;
      N = Tt * N * model.T;
    }
    symmetrize(N);
    out.mean[i] = f.predicted_mean[i] + P * r;
    Eigen::MatrixXd V = P - P * N * P;
    symmetrize(V);
    out.cov[i] = std::move(V);
  }
  return out;
}

Eigen::MatrixXd smoothed_state_means(const StateSpaceModel& model, const FilterResult& f) {
  check_pair(model, f);
  const std::size_t T_len = f.periods();
  const int m = model.m();
  Eigen::MatrixXd out(static_cast<Eigen::Index>(T_len), m);
  Eigen::VectorXd r = Eigen::VectorXd::Zero(m);
  const Eigen::MatrixXd Tt = model.T.transpose();
  Eigen::VectorXd Ttr(m);
  for (std::size_t i = T_len; i-- > 0;) {
    const auto& Zt = f.cov.Zt[i];
    Ttr.noalias() = Tt * r;
    if (Zt.rows() > 0) {
      const Eigen::VectorXd u = f.cov.F_inv[i] * f.innovations[i] - f.cov.gain[i].transpose() * Ttr;
      r = Ttr;
      r.noalias() += Zt.transpose() * u;
    } else {
      r = Ttr;
    }
    out.row(static_cast<Eigen::Index>(i)).noalias() = (f.predicted_mean[i] + f.cov.P_pred[i] * r).transpose();
  }
  return out;
}

std::string filter_result_csv(const StateSpaceModel& model, const FilterResult& f, const SmootherResult& s,
                              Quarter first_period) {
  std::ostringstream out;
  out.precision(17);
  out << "period,observed,truth_predicted,truth_filtered,truth_filtered_sd,truth_smoothed,truth_smoothed_sd";
  for (int j = 0; j < model.n(); ++j) out << ",innovation_" << j;
  out << '\n';
  for (std::size_t t = 0; t < f.periods(); ++t) {
    out << Quarter::from_index(first_period.index() + static_cast<int>(t)).str() << ','
        << f.cov.observed[t].size() << ',' << f.predicted_mean[t](0) << ',' << f.filtered_mean[t](0) << ','
        << std::sqrt(std::max(0.0, f.cov.P_filt[t](0, 0))) << ',' << s.mean[t](0) << ','
        << std::sqrt(std::max(0.0, s.cov[t](0, 0)));
    std::vector<double> innov(static_cast<std::size_t>(model.n()), std::nan(""));
    for (std::size_t k = 0; k < f.cov.observed[t].size(); ++k)
      innov[static_cast<std::size_t>(f.cov.observed[t][k])] = f.innovations[t](static_cast<Eigen::Index>(k));
    for (double v : innov) {
      out << ',';
      if (std::isnan(v)) out << "NA";
      else out << v;
    }
    out << '\n';
  }
  return out.str();
}

SteadyState steady_state(const StateSpaceModel& model) {
  const Eigen::MatrixXd RRt = model.RRt();
  const Eigen::MatrixXd& Z = model.Z;
  Eigen::MatrixXd P = model.P1;
  SteadyState ss;
  for (int it = 1; it <= 10000; ++it) {
    const Eigen::MatrixXd ZP = Z * P;
    Eigen::MatrixXd F = ZP * Z.transpose();
    symmetrize(F);
    const auto factor = factor_innovation(F, false);
    const Eigen::MatrixXd gain = ZP.transpose() * factor.F_inv;
    Eigen::MatrixXd Pf = P - gain * ZP;
    symmetrize(Pf);
    Eigen::MatrixXd P_next = model.T * Pf * model.T.transpose() + RRt;
    symmetrize(P_next);
    const double change = (P_next - P).cwiseAbs().maxCoeff();
    P = std::move(P_next);
    if (change < 1e-12) {
      ss.iterations = it;
      const Eigen::MatrixXd ZPs = Z * P;
      ss.Sigma_a = ZPs * Z.transpose();
      symmetrize(ss.Sigma_a);
      const auto f = factor_innovation(ss.Sigma_a, false);
      ss.K = ZPs.transpose() * f.F_inv;
      ss.P_predicted = P;
      ss.P_filtered = P - ss.K * ZPs;
      symmetrize(ss.P_filtered);
      return ss;
    }
  }
  throw NumericalError("steady_state: Riccati iteration did not converge in 10000 iterations");
}

std::vector<ReleaseWeight> kalman_gain_weights(const StateSpaceModel& model) {
  const SteadyState ss = steady_state(model);
  const int l = model.layout.l;
  std::vector<ReleaseWeight> out;
  for (int j = 0; j < model.n(); ++j) out.push_back({j / l, j % l + 1, ss.K(0, j)});
  return out;
}

Eigen::MatrixXd rank1_inverse_update(const Eigen::MatrixXd& A_inv, const Eigen::MatrixXd& B) {
  if (A_inv.rows() != A_inv.cols() || B.rows() != A_inv.rows() || B.cols() != A_inv.cols())
    throw InputError("rank1_inverse_update: dimension mismatch");
  if (B.size() > 0 && B.cwiseAbs().maxCoeff() > 0.0) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(B);
    const auto& sv = svd.singularValues();
    if (sv.size() > 1 && sv(1) > 1e-10 * sv(0)) throw InputError("rank1_inverse_update: B is not rank one");
  }
  const double denom = 1.0 + (B * A_inv).trace();
  if (std::abs(denom) < 1e-12) throw NumericalError("rank1_inverse_update: 1 + tr(B A^-1) is zero");
  return A_inv - (A_inv * B * A_inv) / denom;
}

}  // namespace recon
