#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "frk/geometry.hpp"

namespace frk::app {

/// Header-keyed CSV table of raw cells.
struct Table {
  std::filesystem::path source;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> lines;  // file line of each row

  /// Column index or -1.
  int col(const std::string& name) const;
  /// Parsed number, or nullopt for an empty cell; io error naming file and line otherwise.
  std::optional<double> number(std::size_t row, int col) const;
  double required(std::size_t row, int col, const std::string& what) const;
  std::string where(std::size_t row) const;
};

Table read_csv(const std::filesystem::path& path);
/// Every column name must be one of `allowed`.
void check_columns(const Table& t, const std::vector<std::string>& allowed);

/// Writes to a temporary file next to `path`, then renames it into place.
void write_atomic(const std::filesystem::path& path, const std::string& content);
void write_atomic_binary(const std::filesystem::path& path, const std::string& bytes);
std::string read_file(const std::filesystem::path& path);

/// Shortest text that reads back to the same double.
std::string fmt(double v);

/// One observation: point or rectangle footprint, optional time bin and size.
struct DataRow {
  Support geom;
  double z = 0.0;
  std::optional<double> k;
};

std::vector<DataRow> read_data(const std::filesystem::path& path);
std::string format_data(const std::vector<DataRow>& rows);

struct Region {
  int id = 0;
  Support geom;
};
std::vector<Region> read_regions(const std::filesystem::path& path);

/// Withheld truth per BAU.
struct TruthRow {
  int id = 0;
  Point centre;
  int t = 0;
  double latent = 0.0;
  double mu = 0.0;
  std::optional<double> pi;
  std::optional<double> k;
  bool observed = false;
};

std::vector<TruthRow> read_truth(const std::filesystem::path& path);
std::string format_truth(const std::vector<TruthRow>& rows);

}  // namespace frk::app
