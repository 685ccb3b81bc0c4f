#include "genefield/model.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace genefield {

namespace {

constexpr double kLog2 = 0.6931471805599453094172321214581766;

void check_gene_dims(Index model_genes, Index other_genes, const char* what) {
  if (model_genes != other_genes) {
    throw std::invalid_argument(std::string("gene dimension mismatch between model (") +
                                std::to_string(model_genes) + ") and " + what + " (" +
                                std::to_string(other_genes) + ")");
  }
}

}  // namespace

namespace detail {

double log_sinhc_half(double x) {
  x = std::abs(x);
  if (x < 1e-3) {
    // log 2 + x^2/24 - x^4/2880 + O(x^6)
    double x2 = x * x;
    return kLog2 + x2 / 24.0 - x2 * x2 / 2880.0;
  }
  if (x > 30.0) {
    // 2 sinh(x/2) = e^{x/2}(1 - e^{-x})
    return 0.5 * x - std::log(0.5 * x) + std::log1p(-std::exp(-x));
  }
  return std::log(2.0 * std::sinh(0.5 * x) / (0.5 * x));
}

double log_sinhc_half_dlog_ratio(double x) {
  x = std::abs(x);
  if (x < 1e-3) {
    // phi'(x) = x/12 - x^3/720 + O(x^5)
    return 1.0 / 12.0 - x * x / 720.0;
  }
  double coth_half = (x > 700.0) ? 1.0 : 1.0 / std::tanh(0.5 * x);
  return (0.5 * coth_half - 1.0 / x) / x;
}

}  // namespace detail

SufficientStatistics sufficient_statistics(const GeneExpressionMatrix& expr,
                                           const SpatialGraph& graph) {
  if (expr.n_spots() != graph.n_spots) {
    throw std::invalid_argument("sufficient_statistics: expression has " +
                                std::to_string(expr.n_spots()) + " spots but graph has " +
                                std::to_string(graph.n_spots));
  }
  const Matrix& s = expr.values;
  SufficientStatistics stats;
  stats.n_spots = expr.n_spots();
  stats.m = s.colwise().mean();

  Matrix c = s.transpose() * s;
  stats.c_intra = 0.5 * (c + c.transpose()).eval();

  stats.c_shells.reserve(graph.shells.size());
  for (const SparseMatrix& shell : graph.shells) {
    Matrix ck = s.transpose() * (shell * s);
    stats.c_shells.push_back(0.5 * (ck + ck.transpose()).eval());
  }
  return stats;
}

double sphere_log_volume(Index n) {
  if (n < 1) throw std::invalid_argument("sphere_log_volume: n must be >= 1");
  double half = 0.5 * static_cast<double>(n);
  return kLog2 + half * std::log(M_PI) - std::lgamma(half);
}

EffectiveField effective_field(const InteractionModel& model, const Vector& m) {
  check_gene_dims(model.n_genes(), m.size(), "mean vector");
  Matrix field = 2.0 * (model.g_intra + model.g_intra.transpose());
  for (std::size_t k = 0; k < model.g_shells.size(); ++k) {
    field += model.q_shells[k] * (model.g_shells[k] + model.g_shells[k].transpose());
  }
  double norm = (field * m).norm();
  return {std::move(field), norm};
}

double log_partition(const InteractionModel& model, const Vector& m, Index n_spots) {
  check_gene_dims(model.n_genes(), m.size(), "mean vector");
  if (n_spots < 1) throw std::invalid_argument("log_partition: n_spots must be >= 1");
  const double s = static_cast<double>(n_spots);

  Matrix b = model.g_intra;
  for (std::size_t k = 0; k < model.g_shells.size(); ++k) {
    b += (0.5 * model.q_shells[k]) * model.g_shells[k];
  }
  double quad = m.dot(b * m);
  double field_norm = effective_field(model, m).norm;
  return -s * quad + sphere_log_volume(model.n_genes()) + s * detail::log_sinhc_half(field_norm);
}

double nll(const SufficientStatistics& stats, const InteractionModel& model) {
  check_gene_dims(model.n_genes(), stats.n_genes(), "statistics");
  if (model.g_shells.size() != stats.c_shells.size()) {
    throw std::invalid_argument("nll: model has " + std::to_string(model.g_shells.size()) +
                                " shells but statistics have " +
                                std::to_string(stats.c_shells.size()));
  }
  double value = log_partition(model, stats.m, stats.n_spots);
  value -= model.g_intra.cwiseProduct(stats.c_intra).sum();
  for (std::size_t k = 0; k < model.g_shells.size(); ++k) {
    value -= model.g_shells[k].cwiseProduct(stats.c_shells[k]).sum();
  }
  return value;
}

double NllGradient::inf_norm(bool include_intra) const {
  double norm = 0.0;
  if (include_intra && d_g_intra.size() > 0) norm = d_g_intra.cwiseAbs().maxCoeff();
  for (const Matrix& d : d_g_shells) norm = std::max(norm, d.cwiseAbs().maxCoeff());
  return norm;
}

bool NllGradient::all_finite() const {
  if (!d_g_intra.allFinite()) return false;
  for (const Matrix& d : d_g_shells) {
    if (!d.allFinite()) return false;
  }
  return true;
}

NllGradient nll_grad(const SufficientStatistics& stats, const InteractionModel& model) {
  check_gene_dims(model.n_genes(), stats.n_genes(), "statistics");
  if (model.g_shells.size() != stats.c_shells.size()) {
    throw std::invalid_argument("nll_grad: shell count mismatch");
  }
  const double s = static_cast<double>(stats.n_spots);
  const Vector& m = stats.m;

  EffectiveField field = effective_field(model, m);
  Vector v = field.matrix * m;
  // S * phi'(H') * dH'/dg flows through ratio = phi'(H')/H', finite at 0
  double ratio = detail::log_sinhc_half_dlog_ratio(field.norm);
  Matrix mm = m * m.transpose();
  Matrix outer = v * m.transpose() + m * v.transpose();

  NllGradient grad;
  grad.d_g_intra = -s * mm + (2.0 * s * ratio) * outer - stats.c_intra;
  grad.d_g_shells.reserve(model.g_shells.size());
  for (std::size_t k = 0; k < model.g_shells.size(); ++k) {
    double q = model.q_shells[k];
    grad.d_g_shells.push_back((-0.5 * q * s) * mm + (q * s * ratio) * outer - stats.c_shells[k]);
  }
  return grad;
}

OneGeneDerivatives one_gene_derivatives(double g11, double m, double q, Index n_spots,
                                        double c_exp) {
  if (n_spots < 1) throw std::invalid_argument("one_gene_derivatives: n_spots must be >= 1");
  const double s = static_cast<double>(n_spots);
  const double a = q * std::abs(m);
  const double x = a * g11;

  // logp = (q/2) S g m^2 - log V_{S^0} - S log(2 sinh|x| / |x|) + g c_exp
  double logp = 0.5 * q * s * g11 * m * m - sphere_log_volume(1) -
                s * detail::log_sinhc_half(2.0 * std::abs(x)) + g11 * c_exp;

  // Langevin term: a coth(ag) - 1/g, odd in g, bounded by a in magnitude
  double langevin;  // coth(x) - 1/x
  double ax = std::abs(x);
  if (ax < 1e-4) {
    langevin = x / 3.0 - x * x * x / 45.0;
  } else if (ax > 700.0) {
    langevin = (x > 0 ? 1.0 : -1.0) - 1.0 / x;
  } else {
    langevin = 1.0 / std::tanh(x) - 1.0 / x;
  }
  double d1 = 0.5 * q * s * m * m - s * a * langevin + c_exp;

  double d2;
  if (a == 0.0) {
    d2 = (g11 == 0.0) ? 0.0 : -s / (g11 * g11);
  } else if (ax < 1e-3) {
    // a^2 (1/sinh^2 x - 1/x^2) = a^2 (-1/3 + x^2/15 + O(x^4))
    d2 = s * a * a * (-1.0 / 3.0 + x * x / 15.0);
  } else {
    double sinh_term = (ax > 350.0) ? 0.0 : a / std::sinh(x);
    d2 = s * (sinh_term * sinh_term - 1.0 / (g11 * g11));
  }
  return {logp, d1, d2};
}

bool one_gene_root_exists(double c_exp, double q, double m, Index n_spots) {
  const double s = static_cast<double>(n_spots);
  return std::abs(c_exp + 0.5 * q * s * m * m) < s * q * std::abs(m);
}

}  // namespace genefield
