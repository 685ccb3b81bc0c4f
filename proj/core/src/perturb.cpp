#include "genefield/perturb.hpp"

#include "genefield/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <stdexcept>

namespace genefield {

namespace {

Index gene_index(const GeneExpressionMatrix& expr, const std::string& name) {
  auto it = std::find(expr.gene_names.begin(), expr.gene_names.end(), name);
  if (it == expr.gene_names.end()) {
    throw std::invalid_argument("gene '" + name + "' not found in the expression panel");
  }
  return static_cast<Index>(it - expr.gene_names.begin());
}

Index spot_index(const GeneExpressionMatrix& expr, const std::string& id) {
  auto it = std::find(expr.spot_ids.begin(), expr.spot_ids.end(), id);
  if (it == expr.spot_ids.end()) {
    throw std::invalid_argument("spot '" + id + "' not found in the dataset");
  }
  return static_cast<Index>(it - expr.spot_ids.begin());
}

}  // namespace

std::string ShellClassification::label(int code) {
  if (code == kShellPerturbed) return "perturbed";
  if (code == kShellUnperturbed) return "unperturbed";
  return "neighbor" + std::to_string(code);
}

ShellClassification neighbor_shells_by_distance(const Matrix& coords, Index center,
                                                const std::vector<double>& radii) {
  if (coords.cols() != 2) throw std::invalid_argument("neighbor_shells: coords must be S x 2");
  if (center < 0 || center >= coords.rows()) {
    throw std::invalid_argument("neighbor_shells: center out of range");
  }
  for (std::size_t j = 1; j < radii.size(); ++j) {
    if (!(radii[j] > radii[j - 1])) {
      throw std::invalid_argument("neighbor_shells: radii must be strictly increasing");
    }
  }
  ShellClassification cls;
  cls.n_shells = static_cast<int>(radii.size());
  cls.shell_of_spot.assign(static_cast<std::size_t>(coords.rows()), kShellUnperturbed);
  cls.shell_of_spot[static_cast<std::size_t>(center)] = kShellPerturbed;
  for (Index i = 0; i < coords.rows(); ++i) {
    if (i == center) continue;
    double d = (coords.row(i) - coords.row(center)).norm();
    if (d <= 0.0) continue;  // coincident spots are not neighbors
    for (std::size_t j = 0; j < radii.size(); ++j) {
      if (d < radii[j]) {
        cls.shell_of_spot[static_cast<std::size_t>(i)] = static_cast<int>(j) + 1;
        break;
      }
    }
  }
  return cls;
}

std::vector<std::string> derive_signature(const GeneExpressionMatrix& expr,
                                          const std::string& marker_gene, int top_n) {
  const Index marker = gene_index(expr, marker_gene);
  if (top_n < 1 || top_n >= expr.n_genes()) {
    throw std::invalid_argument("derive_signature: top_n must be in [1, n_genes)");
  }

  std::vector<Index> positive, zero;
  for (Index i = 0; i < expr.n_spots(); ++i) {
    (expr.values(i, marker) > 0.0 ? positive : zero).push_back(i);
  }
  if (positive.empty()) {
    throw std::invalid_argument("derive_signature: no spot expresses marker '" + marker_gene + "'");
  }

  Vector mean_pos = Vector::Zero(expr.n_genes());
  for (Index i : positive) mean_pos += expr.values.row(i).transpose();
  mean_pos /= static_cast<double>(positive.size());
  Vector mean_zero = Vector::Zero(expr.n_genes());
  if (!zero.empty()) {
    for (Index i : zero) mean_zero += expr.values.row(i).transpose();
    mean_zero /= static_cast<double>(zero.size());
  }

  std::vector<Index> order;
  for (Index g = 0; g < expr.n_genes(); ++g) {
    if (g != marker) order.push_back(g);
  }
  Vector diff = mean_pos - mean_zero;
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (diff(a) != diff(b)) return diff(a) > diff(b);
    return a < b;
  });

  std::vector<std::string> signature;
  for (int t = 0; t < top_n; ++t) {
    signature.push_back(expr.gene_names[static_cast<std::size_t>(order[static_cast<std::size_t>(t)])]);
  }
  return signature;
}

Vector signature_score(const GeneExpressionMatrix& expr, const std::vector<std::string>& genes) {
  if (genes.empty()) throw std::invalid_argument("signature_score: empty gene set");
  Vector score = Vector::Zero(expr.n_spots());
  for (const std::string& g : genes) score += expr.values.col(gene_index(expr, g));
  return score / static_cast<double>(genes.size());
}

PerturbationResult run_knockout(const GeneExpressionMatrix& expr, const SpatialGraph& graph,
                                const InteractionModel& model, const PerturbationSpec& spec,
                                const GenerateConfig& gen_config, const std::vector<double>& radii,
                                const std::vector<std::string>& signature_genes) {
  expr.validate();
  if (!graph.coordinates) {
    throw std::invalid_argument("run_knockout: graph carries no spot coordinates");
  }
  if (signature_genes.empty()) throw std::invalid_argument("run_knockout: empty signature");
  const Index gene = gene_index(expr, spec.gene);

  Index target;
  if (spec.target_spot) {
    target = spot_index(expr, *spec.target_spot);
    if (!(expr.values(target, gene) > 0.0)) {
      throw std::invalid_argument("run_knockout: spot '" + *spec.target_spot +
                                  "' does not express gene '" + spec.gene + "'");
    }
  } else {
    std::vector<Index> positive;
    for (Index i = 0; i < expr.n_spots(); ++i) {
      if (expr.values(i, gene) > 0.0) positive.push_back(i);
    }
    if (positive.empty()) {
      throw std::invalid_argument("run_knockout: no spot expresses gene '" + spec.gene + "'");
    }
    Rng rng(spec.seed);
    target = positive[static_cast<std::size_t>(rng.next_below(positive.size()))];
  }

  PerturbationResult result;
  result.before = expr;
  result.target_spot = target;
  result.target_gene = gene;
  result.signature_genes = signature_genes;
  result.shells = neighbor_shells_by_distance(*graph.coordinates, target, radii);

  GeneExpressionMatrix modified = expr;
  modified.values(target, gene) = 0.0;
  modified.sphere_normalized = false;  // the zeroed row is re-projected by generate
  FreezeMask mask = FreezeMask::none(expr.n_spots(), expr.n_genes());
  mask.frozen(target, gene) = true;

  // per-step signature means per shell group
  std::vector<Index> signature_cols;
  for (const std::string& g : signature_genes) signature_cols.push_back(gene_index(expr, g));
  std::vector<std::vector<Index>> group_spots;  // indexed by code + 1 (unperturbed first)
  group_spots.resize(static_cast<std::size_t>(result.shells.n_shells) + 2);
  for (Index i = 0; i < expr.n_spots(); ++i) {
    int code = result.shells.shell_of_spot[static_cast<std::size_t>(i)];
    group_spots[static_cast<std::size_t>(code + 1)].push_back(i);
  }
  auto observer = [&](int, const Matrix& values) {
    for (int code = -1; code <= result.shells.n_shells; ++code) {
      const auto& spots = group_spots[static_cast<std::size_t>(code + 1)];
      if (spots.empty()) continue;
      double total = 0.0;
      for (Index i : spots) {
        for (Index c : signature_cols) total += values(i, c);
      }
      double mean = total / (static_cast<double>(spots.size()) *
                             static_cast<double>(signature_cols.size()));
      result.score_trace[ShellClassification::label(code)].push_back(mean);
    }
  };

  GenerateResult gen = generate(model, graph, gen_config, modified, &mask, observer);
  result.after = std::move(gen.expr);
  result.hamiltonian_trace = std::move(gen.hamiltonian_trace);
  result.delta = result.after.values - result.before.values;
  return result;
}

std::vector<RankedGene> delta_rankings(const PerturbationResult& result,
                                       const std::vector<int>& group_a,
                                       const std::vector<int>& group_b) {
  auto collect = [&](const std::vector<int>& codes, const char* which) {
    std::set<int> wanted(codes.begin(), codes.end());
    std::vector<Index> spots;
    for (std::size_t i = 0; i < result.shells.shell_of_spot.size(); ++i) {
      if (wanted.count(result.shells.shell_of_spot[i])) spots.push_back(static_cast<Index>(i));
    }
    if (spots.empty()) {
      throw std::invalid_argument(std::string("delta_rankings: group ") + which +
                                  " selects no spots");
    }
    return spots;
  };
  std::vector<Index> spots_a = collect(group_a, "a");
  std::vector<Index> spots_b = collect(group_b, "b");

  auto group_mean = [&](const std::vector<Index>& spots) {
    Vector mean = Vector::Zero(result.delta.cols());
    for (Index i : spots) mean += result.delta.row(i).transpose();
    return (mean / static_cast<double>(spots.size())).eval();
  };
  Vector score = group_mean(spots_a) - group_mean(spots_b);

  std::vector<Index> order(static_cast<std::size_t>(score.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](Index a, Index b) {
    if (score(a) != score(b)) return score(a) > score(b);
    return a < b;
  });

  std::vector<RankedGene> ranking;
  ranking.reserve(order.size());
  for (Index g : order) {
    ranking.push_back({result.before.gene_names[static_cast<std::size_t>(g)], score(g)});
  }
  return ranking;
}

stats::TestResult validate_against_observed(const std::vector<RankedGene>& predicted,
                                            const std::vector<RankedGene>& observed) {
  if (predicted.size() != observed.size()) {
    throw std::invalid_argument("validate_against_observed: rankings differ in size");
  }
  std::map<std::string, double> obs;
  for (const RankedGene& r : observed) obs.emplace(r.gene, r.score);
  std::vector<double> x, y;
  x.reserve(predicted.size());
  y.reserve(predicted.size());
  for (const RankedGene& r : predicted) {
    auto it = obs.find(r.gene);
    if (it == obs.end()) {
      throw std::invalid_argument("validate_against_observed: gene '" + r.gene +
                                  "' missing from the observed ranking");
    }
    x.push_back(r.score);
    y.push_back(it->second);
  }
  return stats::spearman(x, y);
}

std::vector<bool> exclude_proximal(const Matrix& coords, const std::vector<Index>& centers,
                                   double distance) {
  std::vector<bool> keep(static_cast<std::size_t>(coords.rows()), true);
  for (Index i = 0; i < coords.rows(); ++i) {
    for (Index c : centers) {
      if ((coords.row(i) - coords.row(c)).norm() < distance) {
        keep[static_cast<std::size_t>(i)] = false;
        break;
      }
    }
  }
  return keep;
}

GeneExpressionMatrix filter_spots(const GeneExpressionMatrix& expr, const std::vector<bool>& keep) {
  if (keep.size() != static_cast<std::size_t>(expr.n_spots())) {
    throw std::invalid_argument("filter_spots: mask length mismatch");
  }
  GeneExpressionMatrix out;
  out.gene_names = expr.gene_names;
  out.sphere_normalized = expr.sphere_normalized;
  out.provenance = expr.provenance;
  out.provenance.push_back("filter_spots");
  Index kept = static_cast<Index>(std::count(keep.begin(), keep.end(), true));
  out.values.resize(kept, expr.n_genes());
  out.spot_ids.reserve(static_cast<std::size_t>(kept));
  Index row = 0;
  for (Index i = 0; i < expr.n_spots(); ++i) {
    if (!keep[static_cast<std::size_t>(i)]) continue;
    out.values.row(row++) = expr.values.row(i);
    out.spot_ids.push_back(expr.spot_ids[static_cast<std::size_t>(i)]);
  }
  return out;
}

}  // namespace genefield
