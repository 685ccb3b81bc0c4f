#pragma once

#include "genefield/types.hpp"

namespace genefield {

/// C' = s^T s, C^(k) = s^T J^(k) s, m = column means, S = spot count.
/// Throws std::invalid_argument when the expression row count does not match
/// the graph's spot count.
SufficientStatistics sufficient_statistics(const GeneExpressionMatrix& expr,
                                           const SpatialGraph& graph);

/// log surface volume of the unit sphere S^{n-1}: log(2 pi^{n/2} / Gamma(n/2)).
/// Evaluated through lgamma, stable for n up to at least 1e5. Throws on n < 1.
double sphere_log_volume(Index n);

struct EffectiveField {
  Matrix matrix;  // 2(g' + g'^T) + sum_k q_k (g^(k) + g^(k)^T)
  double norm;    // L2 norm of matrix * m
};

EffectiveField effective_field(const InteractionModel& model, const Vector& m);

/// Mean-field log partition function:
///   -S * m^T (g' + sum_k (q_k/2) g^(k)) m
///   + sphere_log_volume(N)
///   + S * log(2 sinh(H'/2) / (H'/2))
/// with H' the effective field norm. The H' -> 0 removable singularity is
/// evaluated by series, and large H' goes through a log-space form, so the
/// value is finite for any finite model.
double log_partition(const InteractionModel& model, const Vector& m, Index n_spots);

/// Negative log-likelihood under the mean-field approximation:
///   L = log_partition - Tr(g' C') - sum_k Tr(g^(k) C^(k))
double nll(const SufficientStatistics& stats, const InteractionModel& model);

struct NllGradient {
  Matrix d_g_intra;
  std::vector<Matrix> d_g_shells;

  double inf_norm(bool include_intra = true) const;
  bool all_finite() const;
};

/// Analytic gradient of nll on the symmetric parameter subspace. Each output
/// is symmetric; entry (a,b) is the partial derivative with respect to the
/// stored matrix entry, matching a central finite difference taken through
/// InteractionModel::make (which splits a single-entry bump across the
/// symmetric pair).
NllGradient nll_grad(const SufficientStatistics& stats, const InteractionModel& model);

struct OneGeneDerivatives {
  double logp;  // one-gene log-likelihood objective at coupling g11; nll = -logp
  double d1;    // d logp / d g11
  double d2;    // d^2 logp / d g11^2 (negative: logp is concave, -logp convex)
};

/// One-gene closed forms:
///   logp = (q/2) S g m^2 - log V_{S^0} - S log((e^x - e^-x)/x) + g c_exp,  x = q|m g|
///   d1   = (q/2) S m^2 - S (q|m| coth(q|m|g) - 1/g) + c_exp
///   d2   = -S (-q^2 m^2 / sinh^2(q|m|g) + 1/g^2)
/// g11 = 0 is handled by the series limits d1 = (q/2) S m^2 + c_exp and
/// d2 = -S q^2 m^2 / 3.
OneGeneDerivatives one_gene_derivatives(double g11, double m, double q, Index n_spots,
                                        double c_exp);

/// Diagnostic: d1 has exactly one sign change on R iff
/// |c_exp + (q/2) S m^2| < S q |m|.
bool one_gene_root_exists(double c_exp, double q, double m, Index n_spots);

namespace detail {
// phi(x) = log(2 sinh(x/2) / (x/2)),  phi(0) = log 2
double log_sinhc_half(double x);
// phi'(x) / x, finite at x = 0 (limit 1/12)
double log_sinhc_half_dlog_ratio(double x);
}  // namespace detail

}  // namespace genefield
