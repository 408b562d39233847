#include "cpsde/checkpoint.hpp"

#include <fstream>

#include "cpsde/errors.hpp"

namespace cpsde {
namespace {

nlohmann::json values_json(const Tensor& t) { return nlohmann::json(std::vector<double>(t.data().begin(), t.data().end())); }

Tensor tensor_from(const Shape& shape, const nlohmann::json& values, const std::string& name) {
  auto v = values.get<std::vector<double>>();
  if (v.size() != shape_size(shape))
    throw IoError("checkpoint entry '" + name + "' has " + std::to_string(v.size()) + " values for shape " +
                  shape_string(shape));
  return Tensor(shape, std::move(v));
}

}  // namespace

nlohmann::json store_to_json(const ParamStore& store, bool with_optimizer_state) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, e] : store) {
    nlohmann::json entry{{"shape", e.value.shape()}, {"values", values_json(e.value)}};
    if (with_optimizer_state) {
      entry["moment1"] = values_json(e.moment1);
      entry["moment2"] = values_json(e.moment2);
    }
    params[name] = std::move(entry);
  }
  nlohmann::json doc{{"format_version", kCheckpointFormatVersion}, {"params", std::move(params)}};
  if (with_optimizer_state) doc["step_count"] = store.step_count();
  return doc;
}

ParamStore store_from_json(const nlohmann::json& doc) {
  try {
    const int version = doc.at("format_version").get<int>();
    if (version != kCheckpointFormatVersion)
      throw IoError("unsupported checkpoint format_version " + std::to_string(version));
    ParamStore store;
    for (const auto& [name, entry] : doc.at("params").items()) {
      const Shape shape = entry.at("shape").get<Shape>();
      ParamEntry& e = store.add(name, tensor_from(shape, entry.at("values"), name));
      if (entry.contains("moment1")) e.moment1 = tensor_from(shape, entry.at("moment1"), name);
      if (entry.contains("moment2")) e.moment2 = tensor_from(shape, entry.at("moment2"), name);
    }
    store.set_step_count(doc.value("step_count", std::uint64_t{0}));
    return store;
  } catch (const nlohmann::json::exception& ex) {
    throw IoError(std::string("malformed checkpoint: ") + ex.what());
  }
}

void save_checkpoint(const std::filesystem::path& path, const ParamStore& store) {
  write_json_file(path, store_to_json(store));
}

ParamStore load_checkpoint(const std::filesystem::path& path) { return store_from_json(read_json_file(path)); }

void write_json_file(const std::filesystem::path& path, const nlohmann::json& doc) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << doc.dump(1) << '\n';
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& ex) {
    throw IoError("cannot parse '" + path.string() + "': " + ex.what());
  }
}

}  // namespace cpsde
