#include "cli.hpp"

#include "genefield/graph.hpp"
#include "genefield/harness.hpp"
#include "genefield/io.hpp"
#include "genefield/model.hpp"
#include "genefield/perturb.hpp"
#include "genefield/rng.hpp"
#include "genefield/version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace genefield::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string timestamp_utc() {
  auto now = std::chrono::system_clock::now();
  std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

json make_report(json config, json results, json warnings) {
  json report;
  report["version"] = kVersion;
  report["config"] = std::move(config);
  report["results"] = std::move(results);
  report["warnings"] = std::move(warnings);
  report["timestamp"] = timestamp_utc();
  return report;
}

void write_json(const fs::path& path, const json& value) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << value.dump(2) << '\n';
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> parts;
  std::string current;
  for (char c : text) {
    if (c == ',') {
      parts.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  parts.push_back(current);
  return parts;
}

std::vector<double> parse_double_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  for (const std::string& part : split_list(text)) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw std::runtime_error(flag + ": cannot parse '" + part + "' as a number");
    }
  }
  return values;
}

// ---- shared flag groups ---------------------------------------------------

struct GraphFlags {
  double radius = 0.0;
  int knn = 0;
  int khops = 1;

  void attach(CLI::App* cmd, bool require_one = true) {
    auto* r = cmd->add_option("--radius", radius, "radius-graph threshold in micrometers");
    auto* k = cmd->add_option("--knn", knn, "k-nearest-neighbor graph with union symmetrization");
    r->excludes(k);
    k->excludes(r);
    cmd->add_option("--khops", khops, "number of hop shells derived from the base graph")
        ->default_val(1)
        ->check(CLI::PositiveNumber);
    require = require_one;
  }

  GraphConfig config() const {
    GraphConfig cfg;
    if (radius > 0.0 && knn > 0) throw std::runtime_error("--radius and --knn are exclusive");
    if (radius > 0.0) {
      cfg.method = GraphConfig::Method::radius;
      cfg.radius = radius;
    } else if (knn > 0) {
      cfg.method = GraphConfig::Method::knn;
      cfg.k = knn;
    } else if (require) {
      throw std::runtime_error("one of --radius or --knn is required");
    }
    cfg.max_shell = khops;
    return cfg;
  }

  json echo() const {
    json j;
    j["radius"] = radius;
    j["knn"] = knn;
    j["khops"] = khops;
    return j;
  }

 private:
  bool require = true;
};

struct NormalizeFlags {
  int min_cells = 100;
  bool no_cpm = false;
  bool no_log1p = false;
  bool no_sphere = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--min-cells", min_cells, "keep genes detected in at least this many spots")
        ->default_val(100)
        ->check(CLI::NonNegativeNumber);
    cmd->add_flag("--no-cpm", no_cpm, "skip counts-per-million scaling");
    cmd->add_flag("--no-log1p", no_log1p, "skip the natural-log transform");
    cmd->add_flag("--no-sphere", no_sphere, "skip unit-sphere row projection");
  }

  io::NormalizationConfig config() const {
    io::NormalizationConfig cfg;
    cfg.min_cells_per_gene = min_cells;
    cfg.cpm = !no_cpm;
    cfg.log1p = !no_log1p;
    cfg.sphere_project = !no_sphere;
    return cfg;
  }

  json echo() const {
    json j;
    j["min_cells"] = min_cells;
    j["cpm"] = !no_cpm;
    j["log1p"] = !no_log1p;
    j["sphere_project"] = !no_sphere;
    return j;
  }
};

io::DatasetFormat parse_format(const std::string& format) {
  if (format == "dense-csv") return io::DatasetFormat::dense_csv;
  if (format == "mtx") return io::DatasetFormat::matrix_market;
  throw std::runtime_error("--format must be dense-csv or mtx");
}

// optional bounding-box spot filter (applied before normalization)
struct BboxFlags {
  std::string spec;

  void attach(CLI::App* cmd) {
    cmd->add_option("--bbox", spec, "keep spots inside x0,y0,x1,y1 (requires coordinates)");
  }

  void apply(io::RawDataset& raw, std::vector<std::string>* warnings) const {
    if (spec.empty()) return;
    std::vector<double> box = parse_double_list(spec, "--bbox");
    if (box.size() != 4) throw std::runtime_error("--bbox expects x0,y0,x1,y1");
    if (!raw.coordinates) throw std::runtime_error("--bbox requires a coordinates file");
    std::vector<Index> kept;
    for (Index i = 0; i < raw.counts.rows(); ++i) {
      double x = (*raw.coordinates)(i, 0), y = (*raw.coordinates)(i, 1);
      if (x >= box[0] && y >= box[1] && x <= box[2] && y <= box[3]) kept.push_back(i);
    }
    if (kept.empty()) throw std::runtime_error("--bbox excludes every spot");
    io::RawDataset filtered;
    filtered.counts.resize(static_cast<Index>(kept.size()), raw.counts.cols());
    filtered.coordinates = Matrix(static_cast<Index>(kept.size()), 2);
    for (std::size_t r = 0; r < kept.size(); ++r) {
      filtered.counts.row(static_cast<Index>(r)) = raw.counts.row(kept[r]);
      filtered.coordinates->row(static_cast<Index>(r)) = raw.coordinates->row(kept[r]);
      filtered.spot_ids.push_back(raw.spot_ids[static_cast<std::size_t>(kept[r])]);
    }
    filtered.gene_names = raw.gene_names;
    if (warnings && kept.size() < raw.spot_ids.size()) {
      warnings->push_back("bbox filter kept " + std::to_string(kept.size()) + " of " +
                          std::to_string(raw.spot_ids.size()) + " spots");
    }
    raw = std::move(filtered);
  }
};

Matrix subset_coordinates(const io::RawDataset& raw, const std::vector<std::string>& spot_ids) {
  if (!raw.coordinates) throw std::runtime_error("dataset has no coordinates");
  std::map<std::string, Index> position;
  for (std::size_t i = 0; i < raw.spot_ids.size(); ++i) {
    position[raw.spot_ids[i]] = static_cast<Index>(i);
  }
  Matrix coords(static_cast<Index>(spot_ids.size()), 2);
  for (std::size_t i = 0; i < spot_ids.size(); ++i) {
    coords.row(static_cast<Index>(i)) = raw.coordinates->row(position.at(spot_ids[i]));
  }
  return coords;
}

json fit_config_echo(const FitConfig& cfg) {
  json j;
  j["learning_rate"] = cfg.learning_rate;
  j["max_epochs"] = cfg.max_epochs;
  j["grad_tolerance"] = cfg.grad_tolerance;
  j["init_scheme"] = cfg.init_scheme == InitScheme::zeros ? "zeros" : "uniform";
  j["init_scale"] = cfg.init_scale;
  j["seed"] = cfg.seed;
  return j;
}

json generate_config_echo(const GenerateConfig& cfg) {
  json j;
  j["step_size"] = cfg.step_size;
  j["max_steps"] = cfg.max_steps;
  j["change_tolerance"] = cfg.change_tolerance;
  j["seed"] = cfg.seed;
  return j;
}

int parse_shell_label(const std::string& label) {
  if (label == "perturbed") return kShellPerturbed;
  if (label == "unperturbed") return kShellUnperturbed;
  if (label.rfind("neighbor", 0) == 0) {
    int shell = std::stoi(label.substr(8));
    if (shell >= 1) return shell;
  }
  throw std::runtime_error("unknown shell group '" + label + "'");
}

std::vector<RankedGene> load_ranking_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::vector<RankedGene> ranking;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || (line_no == 1 && line.rfind("gene,", 0) == 0)) continue;
    std::vector<std::string> fields = split_list(line);
    if (fields.size() != 2) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) +
                               ": expected 'gene,score'");
    }
    ranking.push_back({fields[0], std::stod(fields[1])});
  }
  return ranking;
}

// ---- infer ----------------------------------------------------------------

struct InferOptions {
  std::string counts, coords, format = "dense-csv", out;
  GraphFlags graph;
  NormalizeFlags norm;
  BboxFlags bbox;
  double lr = 1e-2, grad_tol = 1e-6, init_scale = 0.1;
  int epochs = 1000;
  std::string init = "zeros";
  std::uint64_t seed = 0;
};

int run_infer(const InferOptions& opt) {
  std::vector<std::string> warnings;
  io::RawDataset raw = io::load_dataset(opt.counts, opt.coords, parse_format(opt.format));
  opt.bbox.apply(raw, &warnings);
  GeneExpressionMatrix expr = io::normalize(raw, opt.norm.config());
  SpatialGraph graph = build_graph(subset_coordinates(raw, expr.spot_ids), opt.graph.config());

  FitConfig fit_cfg;
  fit_cfg.learning_rate = opt.lr;
  fit_cfg.max_epochs = opt.epochs;
  fit_cfg.grad_tolerance = opt.grad_tol;
  fit_cfg.init_scheme = (opt.init == "uniform") ? InitScheme::uniform : InitScheme::zeros;
  fit_cfg.init_scale = opt.init_scale;
  fit_cfg.seed = opt.seed;
  FitResult result = fit(expr, graph, fit_cfg);

  json meta;
  meta["artifact_version"] = kVersion;
  meta["seed"] = opt.seed;
  meta["fit_config"] = fit_config_echo(fit_cfg);
  meta["normalization"] = opt.norm.echo();
  meta["normalization_provenance"] = expr.provenance;
  meta["graph"] = opt.graph.echo();
  meta["n_spots"] = expr.n_spots();
  meta["timestamp"] = timestamp_utc();
  io::save_model(result.model, result.trace, opt.out, meta);

  std::cout << "fitted " << expr.n_genes() << " genes on " << expr.n_spots() << " spots, "
            << result.trace.entries.size() - 1 << " epochs, final nll "
            << io::format_double(result.trace.entries.back().nll) << "\n";
  return 0;
}

// ---- simulate ---------------------------------------------------------------

struct SimulateOptions {
  std::string model_dir, coords, init, freeze, out;
  int grid = 0;
  GraphFlags graph;
  int steps = 500;
  double step_size = 1e-2, tol = 1e-7;
  std::uint64_t seed = 0;
};

// coordinates CSV (spot_id,x,y) without a counts file
std::pair<std::vector<std::string>, Matrix> load_coords_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  std::size_t line_no = 0;
  std::vector<std::string> ids;
  std::vector<std::pair<double, double>> points;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> fields = split_list(line);
    if (line_no == 1) {
      if (fields.size() != 3 || fields[0] != "spot_id") {
        throw std::runtime_error(path + ":1: expected header 'spot_id,x,y'");
      }
      continue;
    }
    if (fields.size() != 3) {
      throw std::runtime_error(path + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    ids.push_back(fields[0]);
    points.emplace_back(std::stod(fields[1]), std::stod(fields[2]));
  }
  Matrix coords(static_cast<Index>(points.size()), 2);
  for (std::size_t r = 0; r < points.size(); ++r) {
    coords(static_cast<Index>(r), 0) = points[r].first;
    coords(static_cast<Index>(r), 1) = points[r].second;
  }
  return {std::move(ids), std::move(coords)};
}

int run_simulate(const SimulateOptions& opt) {
  std::vector<std::string> warnings;
  io::LoadedModel loaded = io::load_model(opt.model_dir);

  SpatialGraph graph;
  std::vector<std::string> spot_ids;
  if (opt.grid > 0) {
    GraphConfig cfg;
    cfg.method = GraphConfig::Method::radius;
    cfg.radius = 1.5;  // unit lattice: 8-neighborhood
    cfg.max_shell = opt.graph.khops;
    graph = build_graph(grid_coordinates(opt.grid), cfg);
  } else if (!opt.coords.empty()) {
    auto [ids, coords] = load_coords_csv(opt.coords);
    graph = build_graph(coords, opt.graph.config());
    spot_ids = std::move(ids);
  } else {
    throw std::runtime_error("simulate needs --grid N or --coords FILE");
  }

  GenerateConfig gen_cfg;
  gen_cfg.max_steps = opt.steps;
  gen_cfg.step_size = opt.step_size;
  gen_cfg.change_tolerance = opt.tol;
  gen_cfg.seed = opt.seed;

  std::optional<GeneExpressionMatrix> init;
  if (!opt.init.empty()) {
    init = io::load_expression_csv(opt.init);
    if (init->gene_names != loaded.model.gene_names) {
      throw std::runtime_error("--init gene panel does not match the model");
    }
  }

  FreezeMask mask = FreezeMask::none(graph.n_spots, loaded.model.n_genes());
  bool has_mask = false;
  if (!opt.freeze.empty()) {
    if (!init) {
      throw std::runtime_error("--freeze requires --init (frozen values come from the initial matrix)");
    }
    std::ifstream in(opt.freeze);
    if (!in) throw std::runtime_error("cannot open '" + opt.freeze + "'");
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty() || (line_no == 1 && line.rfind("spot_id,", 0) == 0)) continue;
      std::vector<std::string> fields = split_list(line);
      if (fields.size() != 3) {
        throw std::runtime_error(opt.freeze + ":" + std::to_string(line_no) +
                                 ": expected 'spot_id,gene,value'");
      }
      auto spot_it = std::find(init->spot_ids.begin(), init->spot_ids.end(), fields[0]);
      if (spot_it == init->spot_ids.end()) {
        throw std::runtime_error(opt.freeze + ": unknown spot '" + fields[0] + "'");
      }
      auto gene_it = std::find(init->gene_names.begin(), init->gene_names.end(), fields[1]);
      if (gene_it == init->gene_names.end()) {
        throw std::runtime_error(opt.freeze + ": unknown gene '" + fields[1] + "'");
      }
      Index si = static_cast<Index>(spot_it - init->spot_ids.begin());
      Index gi = static_cast<Index>(gene_it - init->gene_names.begin());
      init->values(si, gi) = std::stod(fields[2]);
      mask.frozen(si, gi) = true;
      has_mask = true;
    }
    init->sphere_normalized = false;
  }

  GenerateResult result = generate(loaded.model, graph, gen_cfg, init,
                                   has_mask ? &mask : nullptr);
  if (!spot_ids.empty() && !init) result.expr.spot_ids = spot_ids;
  io::save_expression_csv(opt.out, result.expr);

  json config;
  config["model"] = opt.model_dir;
  config["grid"] = opt.grid;
  config["coords"] = opt.coords;
  config["init"] = opt.init;
  config["freeze"] = opt.freeze;
  config["generate"] = generate_config_echo(gen_cfg);
  config["khops"] = opt.graph.khops;
  json results;
  results["steps_run"] = result.hamiltonian_trace.size() - 1;
  results["hamiltonian_initial"] = result.hamiltonian_trace.front();
  results["hamiltonian_final"] = result.hamiltonian_trace.back();
  results["n_spots"] = graph.n_spots;
  write_json(opt.out + ".meta.json", make_report(config, results, warnings));

  std::cout << "generated " << graph.n_spots << " spots x " << loaded.model.n_genes()
            << " genes to " << opt.out << "\n";
  return 0;
}

// ---- perturb ----------------------------------------------------------------

struct PerturbOptions {
  std::string counts, coords, format = "dense-csv", model_dir, gene, target = "random";
  std::string radii = "15,30", marker, observed, group_a = "perturbed,neighbor1",
              group_b = "unperturbed", exclude_spots, out;
  GraphFlags graph;
  NormalizeFlags norm;
  BboxFlags bbox;
  int signature_top = 25, steps = 500;
  double step_size = 1e-2, tol = 1e-7, exclude_distance = 0.0;
  std::uint64_t seed = 0;
};

int run_perturb(const PerturbOptions& opt) {
  std::vector<std::string> warnings;
  io::RawDataset raw = io::load_dataset(opt.counts, opt.coords, parse_format(opt.format));
  opt.bbox.apply(raw, &warnings);
  GeneExpressionMatrix expr = io::normalize(raw, opt.norm.config());
  Matrix coords = subset_coordinates(raw, expr.spot_ids);

  if (!opt.exclude_spots.empty()) {
    std::vector<Index> centers;
    for (const std::string& id : split_list(opt.exclude_spots)) {
      auto it = std::find(expr.spot_ids.begin(), expr.spot_ids.end(), id);
      if (it == expr.spot_ids.end()) throw std::runtime_error("--exclude-spots: unknown spot '" + id + "'");
      centers.push_back(static_cast<Index>(it - expr.spot_ids.begin()));
    }
    std::vector<bool> keep = exclude_proximal(coords, centers, opt.exclude_distance);
    Index kept = static_cast<Index>(std::count(keep.begin(), keep.end(), true));
    Matrix kept_coords(kept, 2);
    Index row = 0;
    for (Index i = 0; i < coords.rows(); ++i) {
      if (keep[static_cast<std::size_t>(i)]) kept_coords.row(row++) = coords.row(i);
    }
    warnings.push_back("excluded " + std::to_string(coords.rows() - kept) +
                       " spots near the exclusion list");
    expr = filter_spots(expr, keep);
    coords = std::move(kept_coords);
  }

  io::LoadedModel loaded = io::load_model(opt.model_dir);
  if (loaded.model.gene_names != expr.gene_names) {
    throw std::runtime_error(
        "gene panel mismatch between the normalized dataset and the model; "
        "use the same counts file and --min-cells as at training time");
  }
  SpatialGraph graph = build_graph(coords, opt.graph.config());

  std::string marker = opt.marker.empty() ? opt.gene : opt.marker;
  std::vector<std::string> signature = derive_signature(expr, marker, opt.signature_top);

  PerturbationSpec spec;
  spec.gene = opt.gene;
  if (opt.target != "random") spec.target_spot = opt.target;
  spec.seed = Rng::derive(opt.seed, 7);

  GenerateConfig gen_cfg;
  gen_cfg.max_steps = opt.steps;
  gen_cfg.step_size = opt.step_size;
  gen_cfg.change_tolerance = opt.tol;
  gen_cfg.seed = opt.seed;

  std::vector<double> radii = parse_double_list(opt.radii, "--radii");
  PerturbationResult result = run_knockout(expr, graph, loaded.model, spec, gen_cfg, radii, signature);

  std::vector<int> group_a, group_b;
  for (const std::string& label : split_list(opt.group_a)) group_a.push_back(parse_shell_label(label));
  for (const std::string& label : split_list(opt.group_b)) group_b.push_back(parse_shell_label(label));
  std::vector<RankedGene> ranking = delta_rankings(result, group_a, group_b);

  fs::create_directories(opt.out);
  io::save_expression_csv(fs::path(opt.out) / "before.csv", result.before);
  io::save_expression_csv(fs::path(opt.out) / "after.csv", result.after);
  GeneExpressionMatrix delta = result.before;
  delta.values = result.delta;
  delta.sphere_normalized = false;
  io::save_expression_csv(fs::path(opt.out) / "delta.csv", delta);

  {
    std::ofstream ranks(fs::path(opt.out) / "rankings.csv");
    ranks << "gene,score\n";
    for (const RankedGene& r : ranking) ranks << r.gene << ',' << io::format_double(r.score) << '\n';
  }
  {
    std::ofstream trace(fs::path(opt.out) / "score_trace.csv");
    trace << "step";
    std::vector<std::string> groups;
    for (const auto& [label, values] : result.score_trace) groups.push_back(label);
    for (const std::string& g : groups) trace << ',' << g;
    trace << '\n';
    std::size_t steps = result.score_trace.begin()->second.size();
    for (std::size_t s = 0; s < steps; ++s) {
      trace << s;
      for (const std::string& g : groups) trace << ',' << io::format_double(result.score_trace.at(g)[s]);
      trace << '\n';
    }
  }

  json config;
  config["counts"] = opt.counts;
  config["coords"] = opt.coords;
  config["format"] = opt.format;
  config["model"] = opt.model_dir;
  config["gene"] = opt.gene;
  config["target"] = opt.target;
  config["radii"] = radii;
  config["signature_marker"] = marker;
  config["signature_top"] = opt.signature_top;
  config["marker_positive_rule"] = "value > 0";
  config["group_a"] = opt.group_a;
  config["group_b"] = opt.group_b;
  config["generate"] = generate_config_echo(gen_cfg);
  config["graph"] = opt.graph.echo();
  config["normalization"] = opt.norm.echo();
  config["seed"] = opt.seed;

  json results;
  results["target_spot"] = result.before.spot_ids[static_cast<std::size_t>(result.target_spot)];
  results["target_gene"] = opt.gene;
  results["signature"] = result.signature_genes;
  results["steps_run"] = result.hamiltonian_trace.size() - 1;
  results["hamiltonian_initial"] = result.hamiltonian_trace.front();
  results["hamiltonian_final"] = result.hamiltonian_trace.back();
  json shell_counts = json::object();
  json shell_map = json::object();
  for (std::size_t i = 0; i < result.shells.shell_of_spot.size(); ++i) {
    std::string label = ShellClassification::label(result.shells.shell_of_spot[i]);
    shell_counts[label] = shell_counts.value(label, 0) + 1;
    shell_map[result.before.spot_ids[i]] = label;
  }
  results["shell_counts"] = shell_counts;
  results["shells"] = shell_map;

  if (!opt.observed.empty()) {
    std::vector<RankedGene> observed = load_ranking_csv(opt.observed);
    stats::TestResult validation = validate_against_observed(ranking, observed);
    results["validation_rho"] = validation.statistic;
    results["validation_p"] = validation.p_value;
  } else {
    results["validation_rho"] = nullptr;
    results["validation_p"] = nullptr;
    warnings.push_back("no --observed ranking given; validation rho/p not computed");
  }

  write_json(fs::path(opt.out) / "report.json", make_report(config, results, warnings));
  std::cout << "knockout of '" << opt.gene << "' in spot '"
            << result.before.spot_ids[static_cast<std::size_t>(result.target_spot)] << "' written to "
            << opt.out << "\n";
  return 0;
}

// ---- selfcheck ----------------------------------------------------------------

struct SelfcheckOptions {
  int genes = 4, grid = 20, steps = 500, repeats = 10, perms = 1000, epochs = 1000;
  double scale = 0.1, step_size = 1e-2, lr = 1e-2;
  std::uint64_t seed = 0;
  std::string out;
};

int run_selfcheck(const SelfcheckOptions& opt) {
  SelfConsistencyConfig cfg;
  cfg.n_genes = opt.genes;
  cfg.grid_side = opt.grid;
  cfg.coupling_scale = opt.scale;
  cfg.generation.max_steps = opt.steps;
  cfg.generation.step_size = opt.step_size;
  cfg.fit.learning_rate = opt.lr;
  cfg.fit.max_epochs = opt.epochs;
  cfg.n_repeats = opt.repeats;
  cfg.n_permutations = opt.perms;
  cfg.master_seed = opt.seed;

  ConsistencyReport report = self_consistency(cfg);

  json config;
  config["genes"] = opt.genes;
  config["grid"] = opt.grid;
  config["scale"] = opt.scale;
  config["steps"] = opt.steps;
  config["repeats"] = opt.repeats;
  config["perms"] = opt.perms;
  config["seed"] = opt.seed;
  config["generate"] = generate_config_echo(cfg.generation);
  config["fit"] = fit_config_echo(cfg.fit);
  config["graph"] = "grid lattice, unit spacing, radius 1.5";

  json repeats = json::array();
  int significant = 0;
  for (const ConsistencyRepeat& r : report.repeats) {
    json j;
    j["degenerate"] = r.degenerate;
    if (!r.degenerate) {
      j["rho_fitted"] = r.rho_fitted;
      j["p_fitted"] = r.p_fitted;
      j["p_perm_fitted"] = r.p_perm_fitted;
      j["rho_raw"] = r.rho_raw;
      j["p_raw"] = r.p_raw;
      j["p_perm_raw"] = r.p_perm_raw;
      if (r.p_perm_fitted < 0.05) ++significant;
    }
    repeats.push_back(j);
  }
  json results;
  results["repeats"] = repeats;
  results["median_rho_fitted"] = report.median_rho_fitted;
  results["median_rho_raw"] = report.median_rho_raw;
  results["n_perm_significant"] = significant;

  write_json(opt.out, make_report(config, results, json::array()));
  std::cout << "selfcheck: median fitted rho " << io::format_double(report.median_rho_fitted)
            << ", median raw rho " << io::format_double(report.median_rho_raw) << ", "
            << significant << "/" << opt.repeats << " repeats significant\n";
  return 0;
}

// ---- consistency ----------------------------------------------------------------

struct ConsistencyOptions {
  std::string counts, coords, format = "dense-csv", split = "parity", out;
  GraphFlags graph;
  NormalizeFlags norm;
  double lr = 1e-2;
  int epochs = 1000, shuffles = 1000;
  std::string init = "uniform";
  double init_scale = 0.1;
  std::uint64_t seed = 0;
};

int run_consistency(const ConsistencyOptions& opt) {
  std::vector<std::string> warnings;
  std::vector<std::string> count_files = split_list(opt.counts);
  std::vector<std::string> coord_files = split_list(opt.coords);
  if (count_files.size() != coord_files.size()) {
    throw std::runtime_error("--counts and --coords must list the same number of files");
  }

  io::DatasetFormat format = parse_format(opt.format);
  std::vector<io::RawDataset> datasets;
  for (std::size_t f = 0; f < count_files.size(); ++f) {
    datasets.push_back(io::load_dataset(count_files[f], coord_files[f], format));
  }

  GeneExpressionMatrix expr;
  SpatialGraph graph;
  SplitSpec split;

  if (opt.split == "parity") {
    if (datasets.size() != 1) throw std::runtime_error("--split parity expects exactly one file");
    expr = io::normalize(datasets[0], opt.norm.config());
    graph = build_graph(subset_coordinates(datasets[0], expr.spot_ids), opt.graph.config());
    split.mode = SplitSpec::Mode::parity;
  } else if (opt.split == "by-file") {
    if (datasets.size() < 2) throw std::runtime_error("--split by-file needs at least two files");
    // intersect gene panels in first-file order
    std::vector<std::string> genes;
    for (const std::string& g : datasets[0].gene_names) {
      bool everywhere = true;
      for (std::size_t f = 1; f < datasets.size(); ++f) {
        const auto& names = datasets[f].gene_names;
        if (std::find(names.begin(), names.end(), g) == names.end()) {
          everywhere = false;
          break;
        }
      }
      if (everywhere) genes.push_back(g);
    }
    if (genes.empty()) throw std::runtime_error("no gene is shared by all files");
    std::size_t total_genes = 0;
    for (const auto& d : datasets) total_genes = std::max(total_genes, d.gene_names.size());
    if (genes.size() < total_genes) {
      warnings.push_back("gene intersection kept " + std::to_string(genes.size()) + " genes");
    }

    Index total_spots = 0;
    for (const auto& d : datasets) total_spots += d.counts.rows();
    io::RawDataset combined;
    combined.counts.resize(total_spots, static_cast<Index>(genes.size()));
    combined.coordinates = Matrix(total_spots, 2);
    combined.gene_names = genes;
    std::vector<Eigen::Triplet<double>> base_triplets;
    Index offset = 0;
    std::vector<std::uint8_t> in_a;
    for (std::size_t f = 0; f < datasets.size(); ++f) {
      const io::RawDataset& d = datasets[f];
      if (!d.coordinates) throw std::runtime_error(count_files[f] + ": coordinates required");
      std::vector<Index> cols;
      for (const std::string& g : genes) {
        auto it = std::find(d.gene_names.begin(), d.gene_names.end(), g);
        cols.push_back(static_cast<Index>(it - d.gene_names.begin()));
      }
      for (Index r = 0; r < d.counts.rows(); ++r) {
        for (std::size_t c = 0; c < cols.size(); ++c) {
          combined.counts(offset + r, static_cast<Index>(c)) = d.counts(r, cols[c]);
        }
        combined.coordinates->row(offset + r) = d.coordinates->row(r);
        combined.spot_ids.push_back("f" + std::to_string(f) + ":" +
                                    d.spot_ids[static_cast<std::size_t>(r)]);
        in_a.push_back(f == 0 ? 1 : 0);
      }
      SpatialGraph file_graph = build_graph(*d.coordinates, opt.graph.config());
      const SparseMatrix& base = file_graph.base();
      for (int outer = 0; outer < base.outerSize(); ++outer) {
        for (SparseMatrix::InnerIterator it(base, outer); it; ++it) {
          base_triplets.emplace_back(static_cast<int>(it.row() + offset),
                                     static_cast<int>(it.col() + offset), 1.0);
        }
      }
      offset += d.counts.rows();
    }

    GeneExpressionMatrix normalized = io::normalize(combined, opt.norm.config());
    // normalization may drop genes but never spots, so masks stay aligned
    SparseMatrix base(total_spots, total_spots);
    base.setFromTriplets(base_triplets.begin(), base_triplets.end());
    base.makeCompressed();
    graph = khop_shells(base, opt.graph.khops);
    graph.coordinates = *combined.coordinates;
    expr = std::move(normalized);
    split.mode = SplitSpec::Mode::masks;
    split.in_part_a = std::move(in_a);
  } else {
    throw std::runtime_error("--split must be parity or by-file");
  }

  FitConfig fit_cfg;
  fit_cfg.learning_rate = opt.lr;
  fit_cfg.max_epochs = opt.epochs;
  fit_cfg.init_scheme = (opt.init == "zeros") ? InitScheme::zeros : InitScheme::uniform;
  fit_cfg.init_scale = opt.init_scale;
  fit_cfg.seed = opt.seed;

  SplitConsistencyReport report =
      split_consistency(expr, graph, split, fit_cfg, opt.shuffles, opt.seed);

  json config;
  config["counts"] = count_files;
  config["coords"] = coord_files;
  config["format"] = opt.format;
  config["split"] = opt.split;
  config["graph"] = opt.graph.echo();
  config["normalization"] = opt.norm.echo();
  config["fit"] = fit_config_echo(fit_cfg);
  config["shuffles"] = opt.shuffles;
  config["seed"] = opt.seed;

  json results;
  results["final_rho"] = report.final_rho;
  results["final_p"] = report.final_p;
  results["rho_curve"] = report.rho_curve;
  results["n_spots_a"] = report.n_spots_a;
  results["n_spots_b"] = report.n_spots_b;
  json null_summary;
  null_summary["mean"] = report.shuffled_null.mean;
  null_summary["q025"] = report.shuffled_null.q025;
  null_summary["q95"] = report.shuffled_null.q95;
  null_summary["q975"] = report.shuffled_null.q975;
  null_summary["p_empirical"] = report.shuffled_null.p_empirical;
  results["shuffled_null"] = null_summary;
  results["mwu_U"] = report.mwu_observed_vs_shuffled.statistic;
  results["mwu_p"] = report.mwu_observed_vs_shuffled.p_value;

  write_json(opt.out, make_report(config, results, warnings));
  std::cout << "consistency: final rho " << io::format_double(report.final_rho) << " (null q95 "
            << io::format_double(report.shuffled_null.q95) << ")\n";
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"spatial gene-gene coupling inference, generation and perturbation"};
  app.require_subcommand(1);

  InferOptions infer_opt;
  CLI::App* infer_cmd = app.add_subcommand("infer", "fit coupling matrices to a dataset");
  infer_cmd->add_option("--counts", infer_opt.counts, "counts file")->required();
  infer_cmd->add_option("--coords", infer_opt.coords, "coordinates CSV (spot_id,x,y)")->required();
  infer_cmd->add_option("--format", infer_opt.format, "dense-csv or mtx")->default_val("dense-csv");
  infer_opt.graph.attach(infer_cmd);
  infer_opt.norm.attach(infer_cmd);
  infer_opt.bbox.attach(infer_cmd);
  infer_cmd->add_option("--lr", infer_opt.lr, "learning rate")->default_val(1e-2);
  infer_cmd->add_option("--epochs", infer_opt.epochs, "max epochs")->default_val(1000);
  infer_cmd->add_option("--grad-tol", infer_opt.grad_tol, "gradient stop tolerance")->default_val(1e-6);
  infer_cmd->add_option("--init", infer_opt.init, "zeros or uniform")->default_val("zeros");
  infer_cmd->add_option("--init-scale", infer_opt.init_scale, "uniform init amplitude")->default_val(0.1);
  infer_cmd->add_option("--seed", infer_opt.seed, "seed")->default_val(0);
  infer_cmd->add_option("--out", infer_opt.out, "output model directory")->required();

  SimulateOptions sim_opt;
  CLI::App* sim_cmd = app.add_subcommand("simulate", "generate an expression field from a model");
  sim_cmd->add_option("--model", sim_opt.model_dir, "model directory")->required();
  auto* sim_coords = sim_cmd->add_option("--coords", sim_opt.coords, "coordinates CSV");
  auto* sim_grid = sim_cmd->add_option("--grid", sim_opt.grid, "side of a unit-spaced lattice");
  sim_coords->excludes(sim_grid);
  sim_grid->excludes(sim_coords);
  sim_opt.graph.attach(sim_cmd, false);
  sim_cmd->add_option("--steps", sim_opt.steps, "max ascent steps")->default_val(500);
  sim_cmd->add_option("--step-size", sim_opt.step_size, "ascent step size")->default_val(1e-2);
  sim_cmd->add_option("--tol", sim_opt.tol, "per-entry change stop tolerance")->default_val(1e-7);
  sim_cmd->add_option("--seed", sim_opt.seed, "seed")->default_val(0);
  sim_cmd->add_option("--init", sim_opt.init, "initial expression CSV (default: noise)");
  sim_cmd->add_option("--freeze", sim_opt.freeze, "freeze list CSV (spot_id,gene,value)");
  sim_cmd->add_option("--out", sim_opt.out, "output expression CSV")->required();

  PerturbOptions pert_opt;
  CLI::App* pert_cmd = app.add_subcommand("perturb", "in-silico knockout workflow");
  pert_cmd->add_option("--counts", pert_opt.counts, "counts file")->required();
  pert_cmd->add_option("--coords", pert_opt.coords, "coordinates CSV")->required();
  pert_cmd->add_option("--format", pert_opt.format, "dense-csv or mtx")->default_val("dense-csv");
  pert_cmd->add_option("--model", pert_opt.model_dir, "model directory")->required();
  pert_cmd->add_option("--gene", pert_opt.gene, "gene to knock out")->required();
  pert_cmd->add_option("--target", pert_opt.target, "spot id, or 'random'")->default_val("random");
  pert_cmd->add_option("--radii", pert_opt.radii, "neighbor shell radii")->default_val("15,30");
  pert_cmd->add_option("--signature-marker", pert_opt.marker, "marker gene (default: --gene)");
  pert_cmd->add_option("--signature-top", pert_opt.signature_top, "signature size")->default_val(25);
  pert_cmd->add_option("--steps", pert_opt.steps, "max relaxation steps")->default_val(500);
  pert_cmd->add_option("--step-size", pert_opt.step_size, "ascent step size")->default_val(1e-2);
  pert_cmd->add_option("--tol", pert_opt.tol, "per-entry change stop tolerance")->default_val(1e-7);
  pert_cmd->add_option("--seed", pert_opt.seed, "seed")->default_val(0);
  pert_cmd->add_option("--group-a", pert_opt.group_a, "ranking group A shell labels")
      ->default_val("perturbed,neighbor1");
  pert_cmd->add_option("--group-b", pert_opt.group_b, "ranking group B shell labels")
      ->default_val("unperturbed");
  pert_cmd->add_option("--observed", pert_opt.observed, "observed ranking CSV (gene,score)");
  pert_cmd->add_option("--exclude-spots", pert_opt.exclude_spots, "spot ids to trim around");
  pert_cmd->add_option("--exclude-distance", pert_opt.exclude_distance,
                       "trim radius for --exclude-spots");
  pert_opt.graph.attach(pert_cmd);
  pert_opt.norm.attach(pert_cmd);
  pert_opt.bbox.attach(pert_cmd);
  pert_cmd->add_option("--out", pert_opt.out, "output directory")->required();

  SelfcheckOptions self_opt;
  CLI::App* self_cmd = app.add_subcommand("selfcheck", "simulate-then-infer self-consistency");
  self_cmd->add_option("--genes", self_opt.genes, "gene count")->default_val(4);
  self_cmd->add_option("--grid", self_opt.grid, "lattice side")->default_val(20);
  self_cmd->add_option("--scale", self_opt.scale, "ground-truth coupling scale")->default_val(0.1);
  self_cmd->add_option("--steps", self_opt.steps, "generation steps")->default_val(500);
  self_cmd->add_option("--step-size", self_opt.step_size, "generation step size")->default_val(1e-2);
  self_cmd->add_option("--repeats", self_opt.repeats, "number of repeats")->default_val(10);
  self_cmd->add_option("--perms", self_opt.perms, "permutation-null size")->default_val(1000);
  self_cmd->add_option("--lr", self_opt.lr, "fit learning rate")->default_val(1e-2);
  self_cmd->add_option("--epochs", self_opt.epochs, "fit epochs")->default_val(1000);
  self_cmd->add_option("--seed", self_opt.seed, "master seed")->default_val(0);
  self_cmd->add_option("--out", self_opt.out, "output report JSON")->required();

  ConsistencyOptions cons_opt;
  CLI::App* cons_cmd = app.add_subcommand("consistency", "split / cross-sample consistency");
  cons_cmd->add_option("--counts", cons_opt.counts, "comma-separated counts files")->required();
  cons_cmd->add_option("--coords", cons_opt.coords, "comma-separated coordinate files")->required();
  cons_cmd->add_option("--format", cons_opt.format, "dense-csv or mtx")->default_val("dense-csv");
  cons_cmd->add_option("--split", cons_opt.split, "parity or by-file")->default_val("parity");
  cons_opt.graph.attach(cons_cmd);
  cons_opt.norm.attach(cons_cmd);
  cons_cmd->add_option("--lr", cons_opt.lr, "fit learning rate")->default_val(1e-2);
  cons_cmd->add_option("--epochs", cons_opt.epochs, "fit epochs")->default_val(1000);
  cons_cmd->add_option("--init", cons_opt.init, "zeros or uniform")->default_val("uniform");
  cons_cmd->add_option("--init-scale", cons_opt.init_scale, "uniform init amplitude")->default_val(0.1);
  cons_cmd->add_option("--shuffles", cons_opt.shuffles, "shuffled-null size")->default_val(1000);
  cons_cmd->add_option("--seed", cons_opt.seed, "seed")->default_val(0);
  cons_cmd->add_option("--out", cons_opt.out, "output report JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help() << std::flush;
    return 2;
  }

  try {
    if (infer_cmd->parsed()) return run_infer(infer_opt);
    if (sim_cmd->parsed()) return run_simulate(sim_opt);
    if (pert_cmd->parsed()) return run_perturb(pert_opt);
    if (self_cmd->parsed()) return run_selfcheck(self_opt);
    if (cons_cmd->parsed()) return run_consistency(cons_opt);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  std::cerr << "no subcommand given\n";
  return 2;
}

}  // namespace genefield::cli
