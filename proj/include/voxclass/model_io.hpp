#pragma once

// Model files: one JSON document per trained model.
//
//   {
//     "format": "voxclass-model", "version": 1,
//     "task": "gender", "labels": ["M", "F"],
//     "feature_scale": "log", "epsilon": ...,
//     "frequencies": {"indices": [...], "hz": [...]},
//     "spectral": {...},
//     "classes": [{"prior": 0.5, "mean": [...], "covariance": [[...], ...]}, ...],
//     "fingerprint": "...", "config": "<JSON text>"
//   }
//
// Doubles are written with 17 significant digits, so a save/load round trip
// reproduces every parameter bit for bit.

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "error.hpp"
#include "eval.hpp"
#include "frequency_set.hpp"
#include "gda.hpp"
#include "spectra.hpp"
#include "tasks.hpp"

namespace voxclass {

inline constexpr int kModelFormatVersion = 1;

inline nlohmann::json model_to_json(const ClassModel& model) {
    const auto& info = model.info();
    nlohmann::json classes = nlohmann::json::array();
    for (const auto& c : model.classes()) {
        std::vector<double> mean(c.mean.data(), c.mean.data() + c.mean.size());
        nlohmann::json cov = nlohmann::json::array();
        for (Eigen::Index r = 0; r < c.covariance.rows(); ++r) {
            std::vector<double> row(static_cast<std::size_t>(c.covariance.cols()));
            for (Eigen::Index k = 0; k < c.covariance.cols(); ++k)
                row[static_cast<std::size_t>(k)] = c.covariance(r, k);
            cov.push_back(row);
        }
        classes.push_back({{"prior", c.prior}, {"mean", mean}, {"covariance", cov}});
    }
    return {{"format", "voxclass-model"},
            {"version", kModelFormatVersion},
            {"task", to_string(info.task)},
            {"labels", info.labels},
            {"feature_scale", to_string(info.feature_scale)},
            {"epsilon", model.epsilon()},
            {"frequencies", {{"indices", info.frequencies.indices()}, {"hz", info.frequencies.frequencies_hz()}}},
            {"spectral", to_json(info.spectral)},
            {"classes", classes},
            {"fingerprint", info.fingerprint},
            {"config", info.config}};
}

inline ClassModel model_from_json(const nlohmann::json& j) {
    try {
        if (j.at("format").get<std::string>() != "voxclass-model")
            throw ModelCorruptError("not a voxclass model");
        if (j.at("version").get<int>() != kModelFormatVersion)
            throw ModelCorruptError("unsupported model version " + std::to_string(j.at("version").get<int>()));
        ModelInfo info;
        info.task = parse_task(j.at("task").get<std::string>());
        info.labels = j.at("labels").get<std::vector<std::string>>();
        info.feature_scale = parse_feature_scale(j.at("feature_scale").get<std::string>());
        info.spectral = spectral_config_from_json(j.at("spectral"));
        info.frequencies =
            FrequencySet(info.spectral.grid, j.at("frequencies").at("indices").get<std::vector<std::size_t>>());
        info.fingerprint = j.at("fingerprint").get<std::string>();
        info.config = j.at("config").get<std::string>();
        const auto d = static_cast<Eigen::Index>(info.frequencies.size());

        std::vector<GaussianClass> classes;
        for (const auto& jc : j.at("classes")) {
            GaussianClass c;
            c.prior = jc.at("prior").get<double>();
            const auto mean = jc.at("mean").get<std::vector<double>>();
            const auto cov = jc.at("covariance").get<std::vector<std::vector<double>>>();
            if (static_cast<Eigen::Index>(mean.size()) != d || static_cast<Eigen::Index>(cov.size()) != d)
                throw ModelCorruptError("class parameters do not match the frequency count");
            c.mean = Eigen::Map<const Eigen::VectorXd>(mean.data(), d);
            c.covariance.resize(d, d);
            for (Eigen::Index r = 0; r < d; ++r) {
                if (static_cast<Eigen::Index>(cov[static_cast<std::size_t>(r)].size()) != d)
                    throw ModelCorruptError("covariance row has the wrong length");
                for (Eigen::Index k = 0; k < d; ++k)
                    c.covariance(r, k) = cov[static_cast<std::size_t>(r)][static_cast<std::size_t>(k)];
            }
            classes.push_back(std::move(c));
        }
        if (classes.size() != task_cardinality(info.task))
            throw ModelCorruptError("class count does not match the task");
        return ClassModel(std::move(info), std::move(classes), j.at("epsilon").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ModelCorruptError(std::string("malformed model: ") + e.what());
    } catch (const GridError& e) {
        throw ModelCorruptError(std::string("malformed model: ") + e.what());
    } catch (const ConfigError& e) {
        throw ModelCorruptError(std::string("malformed model: ") + e.what());
    } catch (const FormatError& e) {
        throw ModelCorruptError(std::string("malformed model: ") + e.what());
    }
}

inline std::string serialize_model(const ClassModel& model) { return model_to_json(model).dump(2) + "\n"; }

inline ClassModel parse_model(std::string_view text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ModelCorruptError(std::string("model is not valid JSON: ") + e.what());
    }
    return model_from_json(j);
}

inline void save_model(const std::filesystem::path& path, const ClassModel& model) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << serialize_model(model);
    if (!out)
        throw IoError("short write to " + path.string());
}

inline ClassModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw IoError("cannot open model " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_model(ss.str());
}

/// Selection plus fit on every subject of `population`, with the spectral
/// configuration and effective settings recorded in the model.
inline TrainedModel train_task(const SpectralCorpus& corpus, Task task, Population population, std::size_t d,
                               const EvalConfig& config) {
    const auto members = population_members(corpus, population);
    const SubjectLabels labels = true_labels(corpus);
    const TrainingSet train = build_training_set(corpus, members, task, labels, config.feature_scale);
    TrainedModel trained = train_model(train, task, d, SelectionMode::optimized, config, config.select.seed);

    const nlohmann::json effective = {{"task", to_string(task)},
                                      {"population", to_string(population)},
                                      {"d", d},
                                      {"subjects", members.size()},
                                      {"select", to_json(config.select)},
                                      {"feature_scale", to_string(config.feature_scale)},
                                      {"spectral", to_json(corpus.config)}};
    ModelInfo info = trained.model.info();
    info.spectral = corpus.config;
    info.config = effective.dump();
    info.fingerprint = fingerprint_of(effective);
    trained.model = ClassModel(std::move(info), trained.model.classes(), trained.model.epsilon());
    return trained;
}

}  // namespace voxclass
