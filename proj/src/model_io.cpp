#include "fixpoint/model_io.hpp"

#include <cmath>
#include <fstream>

#include "json.hpp"

namespace fixpoint {

using nlohmann::json;

void write_model(const SaliencyModel& model, const std::filesystem::path& path) {
    model.validate();
    json doc;
    doc["format"] = "fixpoint-model";
    doc["version"] = 1;
    doc["weights"] = model.weights;
    doc["blur_sigma"] = model.blur_sigma;
    doc["log_blur_sigma"] = std::log(model.blur_sigma);
    doc["center_weight"] = model.center_weight;
    doc["lambda"] = model.lambda;
    doc["epsilon"] = model.epsilon;
    doc["training_split"] = model.training_split;
    json features = json::array();
    for (const auto& m : model.feature_meta) {
        features.push_back({{"name", m.name},
                            {"group", m.group},
                            {"rf_size", m.rf_size},
                            {"rf_stride", m.rf_stride},
                            {"rf_offset", m.rf_offset},
                            {"degenerate", m.degenerate}});
    }
    doc["features"] = std::move(features);
    doc["stats"] = {{"fingerprint", model.stats.fingerprint},
                    {"names", model.stats.names},
                    {"mean", model.stats.mean},
                    {"stddev", model.stats.stddev}};
    std::ofstream out(path);
    if (!out) throw Error("cannot write " + path.string());
    out << doc.dump(2) << '\n';
}

SaliencyModel read_model(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open " + path.string());
    SaliencyModel model;
    try {
        const json doc = json::parse(in);
        if (doc.value("format", "") != "fixpoint-model") throw Error(path.string() + ": not a model file");
        if (doc.at("version").get<int>() != 1) throw Error(path.string() + ": unsupported model version");
        model.weights = doc.at("weights").get<std::vector<double>>();
        model.blur_sigma = doc.at("blur_sigma").get<double>();
        model.center_weight = doc.at("center_weight").get<double>();
        model.lambda = doc.at("lambda").get<double>();
        model.epsilon = doc.at("epsilon").get<double>();
        model.training_split = doc.value("training_split", "");
        for (const auto& f : doc.at("features")) {
            FeatureMeta m;
            m.name = f.at("name").get<std::string>();
            m.group = f.at("group").get<std::string>();
            m.rf_size = f.at("rf_size").get<std::uint32_t>();
            m.rf_stride = f.at("rf_stride").get<std::uint32_t>();
            m.rf_offset = f.at("rf_offset").get<std::int32_t>();
            m.degenerate = f.at("degenerate").get<bool>();
            model.feature_meta.push_back(std::move(m));
        }
        const auto& st = doc.at("stats");
        model.stats.fingerprint = st.at("fingerprint").get<std::string>();
        model.stats.names = st.at("names").get<std::vector<std::string>>();
        model.stats.mean = st.at("mean").get<std::vector<double>>();
        model.stats.stddev = st.at("stddev").get<std::vector<double>>();
    } catch (const json::exception& e) {
        throw Error(path.string() + ": malformed model file: " + e.what());
    }
    model.validate();
    return model;
}

}  // namespace fixpoint
