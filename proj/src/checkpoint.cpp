#include "ppgbench/core_data.hpp"
#include "ppgbench/errors.hpp"
#include "ppgbench/models.hpp"
#include "text_util.hpp"

#include <json.hpp>

namespace ppgbench::models {

using nlohmann::json;

namespace {

void write_arrays(const std::vector<nn::NamedArray>& arrays, const std::string& kind,
                  const std::filesystem::path& dir, json& index) {
    for (const auto& a : arrays) {
        const std::string file = a.name + ".f32le";
        std::string blob;
        blob.reserve(a.values.size() * 4);
        for (double v : a.values) data::append_f32le(blob, static_cast<float>(v));
        detail::write_file(dir / file, blob);
        index.push_back({{"name", a.name}, {"kind", kind}, {"shape", a.shape}, {"file", file}, {"offset", 0}});
    }
}

std::string read_or_load_error(const std::filesystem::path& path) {
    try {
        return detail::read_file(path);
    } catch (const LoadError&) {
        throw;
    } catch (const ValidationError& e) {
        throw LoadError(e.what(), path.filename().string());
    }
}

void read_arrays(std::vector<nn::NamedArray>& arrays, const std::string& kind, const std::filesystem::path& dir,
                 const json& index) {
    for (auto& a : arrays) {
        const json* entry = nullptr;
        for (const auto& e : index)
            if (e.at("name") == a.name && e.at("kind") == kind) entry = &e;
        if (!entry) throw LoadError("checkpoint is missing " + kind, a.name);
        if (entry->at("shape").get<std::vector<std::size_t>>() != a.shape)
            throw LoadError("checkpoint shape mismatch", a.name);
        const auto blob = read_or_load_error(dir / entry->at("file").get<std::string>());
        const auto offset = entry->at("offset").get<std::size_t>();
        if (blob.size() < offset || blob.size() - offset != a.values.size() * 4)
            throw LoadError("blob size mismatch", a.name);
        for (std::size_t i = 0; i < a.values.size(); ++i) a.values[i] = data::read_f32le(blob.data() + offset + 4 * i);
    }
}

} // namespace

void save_checkpoint(const Model& model, const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    const auto& s = model.spec();
    json spec = {{"architecture", to_string(s.architecture)},
                 {"width_multiplier", s.width_multiplier},
                 {"input_channels", s.input_channels},
                 {"seed", s.seed}};
    detail::write_file(dir / "spec.json", spec.dump(2) + "\n");
    json index = json::array();
    write_arrays(model.parameters(), "parameter", dir, index);
    write_arrays(model.buffers(), "buffer", dir, index);
    detail::write_file(dir / "index.json", json{{"arrays", index}}.dump(2) + "\n");
}

Model load_checkpoint(const std::filesystem::path& dir) {
    ModelSpec spec;
    json index;
    try {
        const auto j = json::parse(read_or_load_error(dir / "spec.json"));
        spec.architecture = parse_architecture(j.at("architecture").get<std::string>());
        spec.width_multiplier = j.at("width_multiplier").get<double>();
        spec.input_channels = j.at("input_channels").get<std::size_t>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        index = json::parse(read_or_load_error(dir / "index.json")).at("arrays");
    } catch (const json::exception& e) {
        throw LoadError(std::string("corrupt checkpoint: ") + e.what());
    }
    Model m = build_model(spec);
    try {
        read_arrays(m.parameters(), "parameter", dir, index);
        read_arrays(m.buffers(), "buffer", dir, index);
    } catch (const json::exception& e) {
        throw LoadError(std::string("corrupt checkpoint index: ") + e.what());
    }
    return m;
}

} // namespace ppgbench::models
