#include "cpsde/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, std::size_t line) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("line " + std::to_string(line) + ": cannot parse number '" + s + "'");
  return v;
}

std::size_t parse_index(const std::string& s, std::size_t line) {
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw IoError("line " + std::to_string(line) + ": cannot parse index '" + s + "'");
  return v;
}

void strip_cr(std::string& line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_path_csv(std::ostream& out, const PathBatch& batch) {
  out << "sample_id,step,t";
  for (std::size_t c = 0; c < batch.channels(); ++c) out << ",x_" << c;
  out << '\n';
  for (std::size_t i = 0; i < batch.size(); ++i) {
    for (std::size_t k = 0; k < batch.n_steps(); ++k) {
      out << i << ',' << k << ',' << format_double(batch.grid().time(k));
      for (std::size_t c = 0; c < batch.channels(); ++c) out << ',' << format_double(batch.at(i, k, c));
      out << '\n';
    }
  }
}

void write_path_csv(const std::filesystem::path& file, const PathBatch& batch) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
  write_path_csv(out, batch);
  if (!out) throw IoError("failed writing '" + file.string() + "'");
}

PathBatch read_path_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IoError("path CSV is empty");
  strip_cr(line);
  const auto header = split(line);
  if (header.size() < 4 || header[0] != "sample_id" || header[1] != "step" || header[2] != "t")
    throw IoError("path CSV header must be sample_id,step,t,x_0,...");
  const std::size_t channels = header.size() - 3;
  for (std::size_t c = 0; c < channels; ++c)
    if (header[3 + c] != "x_" + std::to_string(c)) throw IoError("unexpected column '" + header[3 + c] + "'");

  std::vector<double> values;
  std::vector<double> times;
  std::size_t n_steps = 0;
  std::size_t samples = 0;
  std::size_t expect_sample = 0;
  std::size_t expect_step = 0;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (line.empty()) continue;
    const auto f = split(line);
    if (f.size() != header.size()) throw IoError("line " + std::to_string(lineno) + ": wrong field count");
    const std::size_t sample = parse_index(f[0], lineno);
    const std::size_t step = parse_index(f[1], lineno);
    const double t = parse_double(f[2], lineno);
    if (step == 0 && sample == expect_sample + 1 && samples > 0) {
      if (n_steps == 0) n_steps = expect_step;
      if (expect_step != n_steps) throw IoError("sample " + std::to_string(expect_sample) + " has wrong length");
      expect_sample = sample;
      expect_step = 0;
    }
    if (sample != expect_sample || step != expect_step)
      throw IoError("line " + std::to_string(lineno) + ": steps must be contiguous per sample");
    if (sample == 0) times.push_back(t);
    else if (step >= times.size() || std::abs(times[step] - t) > 1e-9 * (1.0 + std::abs(t)))
      throw IoError("line " + std::to_string(lineno) + ": samples do not share a time grid");
    for (std::size_t c = 0; c < channels; ++c) values.push_back(parse_double(f[3 + c], lineno));
    samples = sample + 1;
    ++expect_step;
  }
  if (samples == 0) throw IoError("path CSV has no data rows");
  if (n_steps == 0) n_steps = expect_step;
  if (expect_step != n_steps) throw IoError("last sample has wrong length");
  if (n_steps < 2) throw IoError("paths need at least 2 steps");

  const double dt = times[1] - times[0];
  for (std::size_t k = 1; k < n_steps; ++k)
    if (std::abs((times[k] - times[0]) - dt * static_cast<double>(k)) > 1e-9 * (1.0 + std::abs(times[k])))
      throw IoError("time column is not a uniform grid");
  return PathBatch(TimeGrid(times[0], dt, n_steps), Tensor({samples, n_steps, channels}, std::move(values)));
}

PathBatch read_path_csv(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  return read_path_csv(in);
}

void write_index_file(const std::filesystem::path& file, const std::vector<std::size_t>& indices) {
  std::ofstream out(file);
  if (!out) throw IoError("cannot open '" + file.string() + "' for writing");
  for (std::size_t i : indices) out << i << '\n';
  if (!out) throw IoError("failed writing '" + file.string() + "'");
}

std::vector<std::size_t> read_index_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw IoError("cannot open '" + file.string() + "'");
  std::vector<std::size_t> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    strip_cr(line);
    if (!line.empty()) out.push_back(parse_index(line, lineno));
  }
  return out;
}

}  // namespace cpsde
