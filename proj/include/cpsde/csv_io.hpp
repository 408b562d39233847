#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "cpsde/paths.hpp"

namespace cpsde {

/// Shortest decimal text that round-trips to the same double.
std::string format_double(double v);

/// Columns sample_id, step, t, x_0..x_{d-1}; header row; steps contiguous per sample.
void write_path_csv(std::ostream& out, const PathBatch& batch);
void write_path_csv(const std::filesystem::path& file, const PathBatch& batch);
PathBatch read_path_csv(std::istream& in);
PathBatch read_path_csv(const std::filesystem::path& file);

/// One index per line.
void write_index_file(const std::filesystem::path& file, const std::vector<std::size_t>& indices);
std::vector<std::size_t> read_index_file(const std::filesystem::path& file);

}  // namespace cpsde
