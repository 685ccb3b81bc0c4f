#pragma once

#include "genefield/infer.hpp"
#include "genefield/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace genefield::io {

struct RawDataset {
  Matrix counts;  // S x N, nonnegative
  std::vector<std::string> spot_ids;
  std::vector<std::string> gene_names;
  std::optional<Matrix> coordinates;  // S x 2

  void validate() const;
};

enum class DatasetFormat { dense_csv, matrix_market };

struct NormalizationConfig {
  bool cpm = true;    // rescale each spot to 1e6 total counts
  bool log1p = true;  // natural log
  int min_cells_per_gene = 100;
  bool sphere_project = true;  // divide each row by its L2 norm
};

/// Dense CSV: header row carries gene names (first cell is the spot-id column
/// label), each data row is spot id + values. Matrix market: coordinate
/// format with genes.txt / spots.txt sidecars next to the file. Coordinates
/// CSV has columns spot_id,x,y and is joined by spot id; an empty coords_path
/// skips coordinates.
RawDataset load_dataset(const std::filesystem::path& counts_path,
                        const std::filesystem::path& coords_path, DatasetFormat format);

/// Fixed-order pipeline: min-cells gene filter, CPM, log1p, sphere projection
/// (each step switchable). Provenance records every applied step.
GeneExpressionMatrix normalize(const RawDataset& raw, const NormalizationConfig& config);

/// Writes g_intra.csv, g_shell<k>.csv, meta.json, trace.csv into dir.
/// extra_meta is merged into meta.json (fit config echo, provenance, seed...).
void save_model(const InteractionModel& model, const FitTrace& trace,
                const std::filesystem::path& dir,
                const nlohmann::json& extra_meta = nlohmann::json::object());

struct LoadedModel {
  InteractionModel model;
  FitTrace trace;
  nlohmann::json meta;
};

LoadedModel load_model(const std::filesystem::path& dir);

/// Expression matrix in the dense-CSV layout (full round-trip precision).
void save_expression_csv(const std::filesystem::path& path, const GeneExpressionMatrix& expr);
GeneExpressionMatrix load_expression_csv(const std::filesystem::path& path);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double value);

}  // namespace genefield::io
