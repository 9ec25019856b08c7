#include "civae/serialize.hpp"

#include <cstdio>
#include <fstream>

#include "civae/errors.hpp"

namespace civae {

nlohmann::json tensor_to_json(const Tensor& t) {
    return nlohmann::json{{"shape", t.shape}, {"data", t.data}};
}

Tensor tensor_from_json(const nlohmann::json& j) {
    try {
        return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                      j.at("data").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed tensor record: ") + e.what());
    }
}

nlohmann::json mlp_to_json(const models::MlpNet& net) {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : net.layers) {
        layers.push_back(nlohmann::json{{"weight", tensor_to_json(l.weight)},
                                        {"bias", tensor_to_json(l.bias)},
                                        {"act", models::to_string(l.act)}});
    }
    return nlohmann::json{{"layers", layers}};
}

models::MlpNet mlp_from_json(const nlohmann::json& j) {
    models::MlpNet net;
    try {
        for (const auto& lj : j.at("layers")) {
            models::MlpLayer l;
            l.weight = tensor_from_json(lj.at("weight"));
            l.bias = tensor_from_json(lj.at("bias"));
            l.act = models::activation_from_string(lj.at("act").get<std::string>());
            net.layers.push_back(std::move(l));
        }
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed network record: ") + e.what());
    }
    if (net.layers.empty()) throw DataError("network record holds no layers");
    return net;
}

void write_json_file(const std::string& path, const nlohmann::json& j) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw DataError("cannot open " + tmp + " for writing");
        os << j.dump(1);
        os << "\n";
        if (!os) throw DataError("write failed for " + tmp);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0)
        throw DataError("cannot move " + tmp + " to " + path);
}

nlohmann::json read_json_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw DataError("cannot open " + path);
    try {
        return nlohmann::json::parse(is);
    } catch (const nlohmann::json::exception& e) {
        throw DataError("cannot parse " + path + ": " + e.what());
    }
}

} // namespace civae
