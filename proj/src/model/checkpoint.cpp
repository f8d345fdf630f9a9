#include "dctnet/model/checkpoint.hpp"

#include <algorithm>
#include <fstream>
#include <nlohmann/json.hpp>

#include "dctnet/error.hpp"
#include "dctnet/serialize.hpp"

namespace dctnet::model {

namespace fs = std::filesystem;

void save_checkpoint(const fs::path& dir, DctNet& model, int step) {
    fs::create_directories(dir);
    const nn::ParameterList list = model.parameters();
    nlohmann::json manifest;
    manifest["config"] = model.config();
    manifest["step"] = step;
    manifest["parameters"] = nlohmann::json::array();
    manifest["buffers"] = nlohmann::json::array();
    for (const auto& p : list.params) {
        save_tensor(dir / (p.name + ".tensor"), p.tensor);
        manifest["parameters"].push_back(p.name);
    }
    for (const auto& b : list.buffers) {
        save_tensor(dir / (b.name + ".tensor"),
                    Tensor::from_data({static_cast<int>(b.values->size())}, *b.values));
        manifest["buffers"].push_back(b.name);
    }
    std::ofstream os(dir / "manifest.json");
    if (!os) throw DataError("cannot write " + (dir / "manifest.json").string());
    os << manifest.dump(2) << '\n';
}

LoadedCheckpoint load_checkpoint(const fs::path& dir) {
    const fs::path path = dir / "manifest.json";
    std::ifstream is(path);
    if (!is) throw DataError("no checkpoint manifest at " + path.string());
    nlohmann::json manifest;
    try {
        manifest = nlohmann::json::parse(is);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError(path.string() + ": " + e.what(), e.byte);
    }
    LoadedCheckpoint out;
    try {
        out.model = std::make_unique<DctNet>(manifest.at("config").get<ModelConfig>());
        out.step = manifest.at("step").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    nn::ParameterList list = out.model->parameters();
    for (auto& p : list.params) {
        const Tensor t = load_tensor(dir / (p.name + ".tensor"));
        if (t.shape() != p.tensor.shape()) {
            throw DataError("checkpoint tensor " + p.name + " has shape " + shape_str(t.shape()) + ", model expects " +
                            shape_str(p.tensor.shape()));
        }
        std::copy(t.data().begin(), t.data().end(), p.tensor.data().begin());
    }
    for (auto& b : list.buffers) {
        const Tensor t = load_tensor(dir / (b.name + ".tensor"));
        if (t.numel() != b.values->size()) throw DataError("checkpoint buffer " + b.name + " has the wrong length");
        std::copy(t.data().begin(), t.data().end(), b.values->begin());
    }
    return out;
}

}  // namespace dctnet::model
