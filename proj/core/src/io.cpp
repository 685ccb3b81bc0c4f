#include "genefield/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <system_error>

namespace genefield::io {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& msg) { throw std::runtime_error(msg); }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string current;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(current);
      current.clear();
    } else if (c != '\r') {
      current += c;
    }
  }
  fields.push_back(current);
  return fields;
}

double parse_double(const std::string& text, const std::string& file, std::size_t line,
                    std::size_t column) {
  double value = 0.0;
  const char* begin = text.data();
  const char* end = begin + text.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    fail(file + ":" + std::to_string(line) + ": column " + std::to_string(column) +
         ": cannot parse '" + text + "' as a number");
  }
  return value;
}

std::vector<std::string> read_lines(const fs::path& path) {
  std::ifstream in(path);
  if (!in) fail("cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

void check_unique(const std::vector<std::string>& names, const std::string& what,
                  const std::string& file) {
  std::set<std::string> seen;
  for (const std::string& n : names) {
    if (!seen.insert(n).second) fail(file + ": duplicate " + what + " '" + n + "'");
  }
}

struct DenseCsv {
  std::vector<std::string> row_ids;
  std::vector<std::string> col_names;
  Matrix values;
};

DenseCsv load_dense_csv(const fs::path& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail(path.string() + ": empty file");

  DenseCsv out;
  std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() < 2) fail(path.string() + ":1: header needs a spot-id column and genes");
  out.col_names.assign(header.begin() + 1, header.end());
  check_unique(out.col_names, "gene name", path.string());

  std::vector<std::vector<double>> rows;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::vector<std::string> fields = split_csv_line(lines[li]);
    if (fields.size() != header.size()) {
      fail(path.string() + ":" + std::to_string(li + 1) + ": expected " +
           std::to_string(header.size()) + " fields, found " + std::to_string(fields.size()));
    }
    out.row_ids.push_back(fields[0]);
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t c = 1; c < fields.size(); ++c) {
      row.push_back(parse_double(fields[c], path.string(), li + 1, c + 1));
    }
    rows.push_back(std::move(row));
  }
  check_unique(out.row_ids, "spot id", path.string());

  out.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(out.col_names.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out.values(static_cast<Index>(r), static_cast<Index>(c)) = rows[r][c];
    }
  }
  return out;
}

std::vector<std::string> read_name_file(const fs::path& path) {
  std::vector<std::string> names;
  for (std::string& line : read_lines(path)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (!line.empty()) names.push_back(line);
  }
  return names;
}

DenseCsv load_matrix_market(const fs::path& path) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty() || lines[0].rfind("%%MatrixMarket", 0) != 0) {
    fail(path.string() + ":1: missing MatrixMarket banner");
  }
  {
    std::istringstream banner(lines[0]);
    std::string tag, object, format, field, symmetry;
    banner >> tag >> object >> format >> field >> symmetry;
    if (object != "matrix" || format != "coordinate" ||
        (field != "real" && field != "integer") || symmetry != "general") {
      fail(path.string() + ":1: only 'matrix coordinate real|integer general' is supported");
    }
  }

  std::size_t li = 1;
  while (li < lines.size() && (lines[li].empty() || lines[li][0] == '%')) ++li;
  if (li >= lines.size()) fail(path.string() + ": missing size line");

  std::istringstream sizes(lines[li]);
  Index rows = 0, cols = 0;
  std::size_t nnz = 0;
  if (!(sizes >> rows >> cols >> nnz)) fail(path.string() + ":" + std::to_string(li + 1) + ": bad size line");

  DenseCsv out;
  out.values = Matrix::Zero(rows, cols);
  std::size_t seen = 0;
  for (++li; li < lines.size(); ++li) {
    if (lines[li].empty() || lines[li][0] == '%') continue;
    std::istringstream entry(lines[li]);
    Index r = 0, c = 0;
    double v = 0.0;
    if (!(entry >> r >> c >> v)) {
      fail(path.string() + ":" + std::to_string(li + 1) + ": cannot parse coordinate entry");
    }
    if (r < 1 || r > rows || c < 1 || c > cols) {
      fail(path.string() + ":" + std::to_string(li + 1) + ": index out of range");
    }
    out.values(r - 1, c - 1) += v;  // duplicates accumulate
    ++seen;
  }
  if (seen != nnz) {
    fail(path.string() + ": header declares " + std::to_string(nnz) + " entries, found " +
         std::to_string(seen));
  }

  fs::path dir = path.parent_path();
  out.col_names = read_name_file(dir / "genes.txt");
  out.row_ids = read_name_file(dir / "spots.txt");
  if (static_cast<Index>(out.col_names.size()) != cols) {
    fail((dir / "genes.txt").string() + ": " + std::to_string(out.col_names.size()) +
         " names for " + std::to_string(cols) + " columns");
  }
  if (static_cast<Index>(out.row_ids.size()) != rows) {
    fail((dir / "spots.txt").string() + ": " + std::to_string(out.row_ids.size()) +
         " names for " + std::to_string(rows) + " rows");
  }
  check_unique(out.col_names, "gene name", (dir / "genes.txt").string());
  check_unique(out.row_ids, "spot id", (dir / "spots.txt").string());
  return out;
}

Matrix load_coordinates(const fs::path& path, const std::vector<std::string>& spot_ids) {
  std::vector<std::string> lines = read_lines(path);
  if (lines.empty()) fail(path.string() + ": empty file");
  std::vector<std::string> header = split_csv_line(lines[0]);
  if (header.size() != 3 || header[0] != "spot_id" || header[1] != "x" || header[2] != "y") {
    fail(path.string() + ":1: expected header 'spot_id,x,y'");
  }
  std::map<std::string, std::pair<double, double>> by_id;
  for (std::size_t li = 1; li < lines.size(); ++li) {
    if (lines[li].empty()) continue;
    std::vector<std::string> fields = split_csv_line(lines[li]);
    if (fields.size() != 3) {
      fail(path.string() + ":" + std::to_string(li + 1) + ": expected 3 fields");
    }
    double x = parse_double(fields[1], path.string(), li + 1, 2);
    double y = parse_double(fields[2], path.string(), li + 1, 3);
    if (!by_id.emplace(fields[0], std::make_pair(x, y)).second) {
      fail(path.string() + ": duplicate spot id '" + fields[0] + "'");
    }
  }
  Matrix coords(static_cast<Index>(spot_ids.size()), 2);
  for (std::size_t i = 0; i < spot_ids.size(); ++i) {
    auto it = by_id.find(spot_ids[i]);
    if (it == by_id.end()) {
      fail(path.string() + ": no coordinates for spot '" + spot_ids[i] + "'");
    }
    coords(static_cast<Index>(i), 0) = it->second.first;
    coords(static_cast<Index>(i), 1) = it->second.second;
  }
  return coords;
}

void write_named_matrix(const fs::path& path, const Matrix& m,
                        const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << "gene";
  for (const std::string& n : names) out << ',' << n;
  out << '\n';
  for (Index r = 0; r < m.rows(); ++r) {
    out << names[static_cast<std::size_t>(r)];
    for (Index c = 0; c < m.cols(); ++c) out << ',' << format_double(m(r, c));
    out << '\n';
  }
}

Matrix read_named_matrix(const fs::path& path, const std::vector<std::string>& expected_names) {
  DenseCsv csv = load_dense_csv(path);
  if (csv.col_names != expected_names || csv.row_ids != expected_names) {
    fail(path.string() + ": gene-name mismatch against meta.json");
  }
  return csv.values;
}

}  // namespace

std::string format_double(double value) {
  char buffer[32];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) fail("format_double: conversion failed");
  return std::string(buffer, ptr);
}

void RawDataset::validate() const {
  if (static_cast<Index>(spot_ids.size()) != counts.rows()) {
    fail("RawDataset: spot id count does not match matrix rows");
  }
  if (static_cast<Index>(gene_names.size()) != counts.cols()) {
    fail("RawDataset: gene name count does not match matrix columns");
  }
  for (Index r = 0; r < counts.rows(); ++r) {
    for (Index c = 0; c < counts.cols(); ++c) {
      double v = counts(r, c);
      if (!std::isfinite(v) || v < 0.0) {
        fail("RawDataset: invalid count " + format_double(v) + " at spot '" +
             spot_ids[static_cast<std::size_t>(r)] + "', gene '" +
             gene_names[static_cast<std::size_t>(c)] + "'");
      }
    }
  }
  if (coordinates && (coordinates->rows() != counts.rows() || coordinates->cols() != 2)) {
    fail("RawDataset: coordinates must be S x 2");
  }
}

RawDataset load_dataset(const fs::path& counts_path, const fs::path& coords_path,
                        DatasetFormat format) {
  DenseCsv csv = (format == DatasetFormat::dense_csv) ? load_dense_csv(counts_path)
                                                      : load_matrix_market(counts_path);
  RawDataset raw;
  raw.counts = std::move(csv.values);
  raw.spot_ids = std::move(csv.row_ids);
  raw.gene_names = std::move(csv.col_names);
  if (!coords_path.empty()) raw.coordinates = load_coordinates(coords_path, raw.spot_ids);
  raw.validate();
  return raw;
}

GeneExpressionMatrix normalize(const RawDataset& raw, const NormalizationConfig& config) {
  raw.validate();
  GeneExpressionMatrix expr;
  expr.spot_ids = raw.spot_ids;

  // 1. keep genes detected in at least min_cells_per_gene spots
  std::vector<Index> kept;
  for (Index c = 0; c < raw.counts.cols(); ++c) {
    Index detected = (raw.counts.col(c).array() > 0.0).count();
    if (detected >= config.min_cells_per_gene) kept.push_back(c);
  }
  if (kept.empty()) {
    fail("normalize: no gene is detected in at least " +
         std::to_string(config.min_cells_per_gene) + " spots");
  }
  expr.values.resize(raw.counts.rows(), static_cast<Index>(kept.size()));
  for (std::size_t c = 0; c < kept.size(); ++c) {
    expr.values.col(static_cast<Index>(c)) = raw.counts.col(kept[c]);
    expr.gene_names.push_back(raw.gene_names[static_cast<std::size_t>(kept[c])]);
  }
  expr.provenance.push_back("filter_genes(min_cells=" + std::to_string(config.min_cells_per_gene) +
                            "): kept " + std::to_string(kept.size()) + " of " +
                            std::to_string(raw.counts.cols()));

  // 2. counts per million
  if (config.cpm) {
    Index zero_rows = 0;
    for (Index r = 0; r < expr.values.rows(); ++r) {
      double total = expr.values.row(r).sum();
      if (total > 0.0) {
        expr.values.row(r) *= 1e6 / total;
      } else {
        ++zero_rows;
      }
    }
    std::string note = "cpm(target=1e6)";
    if (zero_rows > 0) note += ": " + std::to_string(zero_rows) + " all-zero spots left unscaled";
    expr.provenance.push_back(note);
  }

  // 3. natural-log transform
  if (config.log1p) {
    expr.values = expr.values.unaryExpr([](double v) { return std::log1p(v); });
    expr.provenance.push_back("log1p(base=e)");
  }

  // 4. unit-sphere projection (idempotent: rows already on the sphere pass through)
  if (config.sphere_project) {
    for (Index r = 0; r < expr.values.rows(); ++r) {
      double norm = expr.values.row(r).norm();
      if (norm == 0.0) {
        fail("normalize: spot '" + expr.spot_ids[static_cast<std::size_t>(r)] +
             "' is all-zero and cannot be projected onto the sphere");
      }
      if (std::abs(norm - 1.0) > 1e-12) expr.values.row(r) /= norm;
    }
    expr.sphere_normalized = true;
    expr.provenance.push_back("sphere_project");
  }

  expr.validate();
  return expr;
}

void save_model(const InteractionModel& model, const FitTrace& trace, const fs::path& dir,
                const json& extra_meta) {
  model.validate();
  fs::create_directories(dir);
  write_named_matrix(dir / "g_intra.csv", model.g_intra, model.gene_names);
  for (std::size_t k = 0; k < model.g_shells.size(); ++k) {
    write_named_matrix(dir / ("g_shell" + std::to_string(k + 1) + ".csv"), model.g_shells[k],
                       model.gene_names);
  }

  json meta;
  meta["gene_names"] = model.gene_names;
  meta["n_shells"] = model.g_shells.size();
  json q = json::array();
  for (double v : model.q_shells) q.push_back(v);
  meta["q_shells"] = q;
  for (auto it = extra_meta.begin(); it != extra_meta.end(); ++it) meta[it.key()] = it.value();
  std::ofstream meta_out(dir / "meta.json");
  if (!meta_out) fail("cannot write '" + (dir / "meta.json").string() + "'");
  meta_out << meta.dump(2) << '\n';

  std::ofstream trace_out(dir / "trace.csv");
  if (!trace_out) fail("cannot write '" + (dir / "trace.csv").string() + "'");
  trace_out << "epoch,nll,grad_inf_norm\n";
  for (const FitTraceEntry& e : trace.entries) {
    trace_out << e.epoch << ',' << format_double(e.nll) << ',' << format_double(e.grad_inf_norm)
              << '\n';
  }
}

LoadedModel load_model(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.json");
  if (!meta_in) fail("cannot open '" + (dir / "meta.json").string() + "'");
  json meta = json::parse(meta_in, nullptr, true);

  LoadedModel loaded;
  loaded.meta = meta;
  std::vector<std::string> names = meta.at("gene_names").get<std::vector<std::string>>();
  std::size_t n_shells = meta.at("n_shells").get<std::size_t>();
  std::vector<double> q = meta.at("q_shells").get<std::vector<double>>();
  if (q.size() != n_shells) fail((dir / "meta.json").string() + ": q_shells length mismatch");

  Matrix g_intra = read_named_matrix(dir / "g_intra.csv", names);
  std::vector<Matrix> g_shells;
  for (std::size_t k = 0; k < n_shells; ++k) {
    g_shells.push_back(read_named_matrix(dir / ("g_shell" + std::to_string(k + 1) + ".csv"), names));
  }
  loaded.model = InteractionModel::make(std::move(g_intra), std::move(g_shells), std::move(q),
                                        std::move(names));

  fs::path trace_path = dir / "trace.csv";
  if (fs::exists(trace_path)) {
    std::vector<std::string> lines = read_lines(trace_path);
    for (std::size_t li = 1; li < lines.size(); ++li) {
      if (lines[li].empty()) continue;
      std::vector<std::string> fields = split_csv_line(lines[li]);
      if (fields.size() != 3) fail(trace_path.string() + ":" + std::to_string(li + 1) + ": expected 3 fields");
      FitTraceEntry entry;
      entry.epoch = static_cast<int>(parse_double(fields[0], trace_path.string(), li + 1, 1));
      entry.nll = parse_double(fields[1], trace_path.string(), li + 1, 2);
      entry.grad_inf_norm = parse_double(fields[2], trace_path.string(), li + 1, 3);
      loaded.trace.entries.push_back(entry);
    }
  }
  return loaded;
}

void save_expression_csv(const fs::path& path, const GeneExpressionMatrix& expr) {
  std::ofstream out(path);
  if (!out) fail("cannot write '" + path.string() + "'");
  out << "spot_id";
  for (const std::string& g : expr.gene_names) out << ',' << g;
  out << '\n';
  for (Index r = 0; r < expr.values.rows(); ++r) {
    out << expr.spot_ids[static_cast<std::size_t>(r)];
    for (Index c = 0; c < expr.values.cols(); ++c) out << ',' << format_double(expr.values(r, c));
    out << '\n';
  }
}

GeneExpressionMatrix load_expression_csv(const fs::path& path) {
  DenseCsv csv = load_dense_csv(path);
  GeneExpressionMatrix expr;
  expr.values = std::move(csv.values);
  expr.spot_ids = std::move(csv.row_ids);
  expr.gene_names = std::move(csv.col_names);
  expr.validate();
  return expr;
}

}  // namespace genefield::io
