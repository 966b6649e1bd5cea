#pragma once

// Streaming classification sessions, independent of any transport.
//
// A registry holds one immutable model per task, loaded once and shared by
// every session. A session owns, per requested task, a ring of the last 10
// per-chunk posteriors; each incoming 0.1 s chunk yields an instant
// posterior and the arithmetic mean over the ring. Silent chunks are
// reported but never enter the ring.

#include <atomic>
#include <cmath>
#include <cstdint>
#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "../error.hpp"
#include "../eval.hpp"
#include "../gda.hpp"
#include "../model_io.hpp"
#include "../spectra.hpp"
#include "../tasks.hpp"

namespace voxclass::service {

inline constexpr std::size_t kRingCapacity = 10;

/// Client-visible protocol violation; becomes an `error` frame.
class ProtocolError : public Error {
public:
    ProtocolError(std::string code, const std::string& what) : Error(what), code_(std::move(code)) {}
    const std::string& code() const { return code_; }

private:
    std::string code_;
};

inline nlohmann::json model_info_json(const ClassModel& model) {
    const auto& info = model.info();
    return {{"task", to_string(info.task)},
            {"d", info.frequencies.size()},
            {"frequencies_hz", info.frequencies.frequencies_hz()},
            {"labels", info.labels},
            {"fingerprint", info.fingerprint}};
}

class ModelRegistry {
public:
    /// All models must agree on the segment length, since one chunk feeds every task.
    void add(std::shared_ptr<const ClassModel> model) {
        if (!model)
            throw ConfigError("null model");
        const Task task = model->info().task;
        if (!models_.empty() && models_.begin()->second->info().spectral.delta != model->info().spectral.delta)
            throw ConfigError("models disagree on the segment length");
        if (model->info().labels.size() != model->n_classes())
            throw ConfigError("model labels missing");
        models_[task] = std::move(model);
    }

    void add(ClassModel model) { add(std::make_shared<const ClassModel>(std::move(model))); }

    std::shared_ptr<const ClassModel> find(Task task) const {
        const auto it = models_.find(task);
        return it == models_.end() ? nullptr : it->second;
    }

    std::vector<Task> tasks() const {
        std::vector<Task> out;
        for (const auto& [t, _] : models_)
            out.push_back(t);
        return out;
    }

    bool empty() const { return models_.empty(); }

    double delta() const { return models_.empty() ? 0.1 : models_.begin()->second->info().spectral.delta; }

    nlohmann::json info(Task task) const {
        const auto m = find(task);
        if (!m)
            throw ProtocolError("unknown_task", "no model loaded for task '" + std::string(to_string(task)) + "'");
        return model_info_json(*m);
    }

    nlohmann::json info(std::string_view task_name) const {
        Task task;
        try {
            task = parse_task(task_name);
        } catch (const Error&) {
            throw ProtocolError("unknown_task", "unknown task '" + std::string(task_name) + "'");
        }
        return info(task);
    }

    nlohmann::json all_info() const {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [_, m] : models_)
            arr.push_back(model_info_json(*m));
        return {{"models", arr}};
    }

private:
    std::map<Task, std::shared_ptr<const ClassModel>> models_;
};

/// Fixed-capacity window of posteriors; the mean covers exactly its contents.
class PosteriorRing {
public:
    explicit PosteriorRing(std::size_t capacity = kRingCapacity) : capacity_(capacity) {}

    void push(Posterior p) {
        ring_.push_back(std::move(p));
        while (ring_.size() > capacity_)
            ring_.pop_front();
    }

    std::size_t size() const { return ring_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return ring_.empty(); }
    const std::deque<Posterior>& contents() const { return ring_; }

    Posterior mean() const {
        std::vector<Posterior> v(ring_.begin(), ring_.end());
        return average_posteriors(v);
    }

private:
    std::size_t capacity_;
    std::deque<Posterior> ring_;
};

struct TaskResult {
    Task task = Task::gender;
    Posterior instant;
    Posterior averaged;
    std::size_t map = 0;
    std::string map_label;
    std::size_t ring_size = 0;
};

struct ChunkResult {
    std::size_t chunk_index = 0;
    bool silent = false;
    double rms = 0.0;
    std::vector<TaskResult> tasks;
};

struct SessionOptions {
    double silence_rms = 3e-4;  // chunks quieter than this (full scale 1.0) are gated out
};

inline std::string new_session_id() {
    static std::atomic<std::uint64_t> counter{0};
    static const std::uint64_t salt = [] {
        std::random_device rd;
        return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
    }();
    return hex64(splitmix64(salt ^ counter.fetch_add(1)));
}

class Session {
public:
    Session(const ModelRegistry& registry, std::span<const std::string> task_names, double sample_rate,
            SessionOptions options = {})
        : id_(new_session_id()), sample_rate_(sample_rate), options_(options) {
        if (task_names.empty())
            throw ProtocolError("bad_start", "start frame requests no tasks");
        if (!(sample_rate > 0.0) || !std::isfinite(sample_rate))
            throw ProtocolError("bad_start", "sample_rate must be positive");
        for (const auto& name : task_names) {
            Task t;
            try {
                t = parse_task(name);
            } catch (const Error&) {
                throw ProtocolError("unknown_task", "unknown task '" + name + "'");
            }
            auto model = registry.find(t);
            if (!model)
                throw ProtocolError("unknown_task", "no model loaded for task '" + name + "'");
            for (const auto& e : entries_)
                if (e.model->info().task == t)
                    throw ProtocolError("bad_start", "task '" + name + "' requested twice");
            if (sample_rate < 2.0 * model->info().spectral.f_max)
                throw ProtocolError("bad_start", "sample rate " + std::to_string(sample_rate) +
                                                     " Hz cannot represent the model's band");
            entries_.push_back({std::move(model), PosteriorRing{}});
        }
        delta_ = entries_.front().model->info().spectral.delta;
        chunk_samples_ = static_cast<std::size_t>(std::llround(delta_ * sample_rate));
    }

    const std::string& id() const { return id_; }
    double sample_rate() const { return sample_rate_; }
    std::size_t chunk_samples() const { return chunk_samples_; }
    std::size_t chunks_seen() const { return next_index_; }

    std::vector<Task> tasks() const {
        std::vector<Task> out;
        for (const auto& e : entries_)
            out.push_back(e.model->info().task);
        return out;
    }

    const PosteriorRing& ring(Task t) const {
        for (const auto& e : entries_)
            if (e.model->info().task == t)
                return e.ring;
        throw ProtocolError("unknown_task", "task not in this session");
    }

    ChunkResult ingest(std::span<const std::int16_t> pcm) {
        std::vector<double> samples(pcm.size());
        for (std::size_t i = 0; i < pcm.size(); ++i)
            samples[i] = pcm16_to_amplitude(pcm[i]);
        return ingest(std::span<const double>(samples));
    }

    ChunkResult ingest(std::span<const double> samples) {
        const auto n = static_cast<long long>(samples.size());
        if (std::llabs(n - static_cast<long long>(chunk_samples_)) > 1)
            throw ProtocolError("bad_chunk", "chunk has " + std::to_string(samples.size()) + " samples, expected " +
                                                 std::to_string(chunk_samples_) + " +- 1");
        ChunkResult out;
        out.chunk_index = next_index_++;
        out.rms = rms(samples);
        if (!(out.rms > options_.silence_rms)) {
            out.silent = true;
            return out;
        }
        std::map<std::string, LogSpectrum> cache;  // keyed by spectral config
        for (auto& e : entries_) {
            const auto& model = *e.model;
            const auto key = to_json(model.info().spectral).dump();
            auto it = cache.find(key);
            if (it == cache.end()) {
                try {
                    it = cache.emplace(key, analyze_chunk(samples, sample_rate_, model.info().spectral, analyzer_)).first;
                } catch (const SilenceError&) {
                    out.silent = true;
                    out.tasks.clear();
                    return out;
                }
            }
            const LogSpectrum& spec = it->second;
            TaskResult r;
            r.task = model.info().task;
            r.instant = posterior(model, extract_features(spec, model.info().frequencies, model.info().feature_scale));
            e.ring.push(r.instant);
            r.averaged = e.ring.mean();
            r.map = map_class(r.averaged);
            r.map_label = model.info().labels[r.map];
            r.ring_size = e.ring.size();
            out.tasks.push_back(std::move(r));
        }
        return out;
    }

private:
    struct Entry {
        std::shared_ptr<const ClassModel> model;
        PosteriorRing ring;
    };

    std::string id_;
    double sample_rate_;
    SessionOptions options_;
    double delta_ = 0.1;
    std::size_t chunk_samples_ = 0;
    std::size_t next_index_ = 0;
    std::vector<Entry> entries_;
    SpectrumAnalyzer analyzer_{Window::hann, SpectrumKind::power};
};

// ---------------------------------------------------------------------------
// Frame encoding

inline nlohmann::json probability_map(const ClassModel& model, const Posterior& p) {
    nlohmann::json m = nlohmann::json::object();
    for (std::size_t c = 0; c < p.probs.size(); ++c)
        m[model.info().labels[c]] = p.probs[c];
    return m;
}

inline nlohmann::json error_frame(std::string_view code, std::string_view message) {
    return {{"type", "error"}, {"code", code}, {"message", message}};
}

/// Transport-independent protocol state machine for one connection: text
/// frames in, text frames out; binary frames carry PCM.
class Connection {
public:
    explicit Connection(const ModelRegistry& registry, SessionOptions options = {})
        : registry_(registry), options_(options) {}

    const Session* session() const { return session_ ? &*session_ : nullptr; }

    std::vector<nlohmann::json> on_text(std::string_view text) {
        nlohmann::json msg;
        try {
            msg = nlohmann::json::parse(text);
        } catch (const nlohmann::json::exception&) {
            return {error_frame("bad_json", "frame is not valid JSON")};
        }
        if (!msg.is_object() || !msg.contains("type") || !msg["type"].is_string())
            return {error_frame("bad_frame", "frame has no string 'type' field")};
        const std::string type = msg["type"];
        try {
            if (type == "start")
                return {on_start(msg)};
            if (type == "model_info") {
                if (!msg.contains("task") || !msg["task"].is_string())
                    return {error_frame("bad_frame", "model_info needs a 'task' string")};
                auto info = registry_.info(msg["task"].get<std::string>());
                info["type"] = "model_info";
                return {info};
            }
            if (type == "chunk_meta")
                return {};  // optional client annotation; the server keeps its own counter
            return {error_frame("bad_frame", "unknown frame type '" + type + "'")};
        } catch (const ProtocolError& e) {
            return {error_frame(e.code(), e.what())};
        }
    }

    std::vector<nlohmann::json> on_binary(std::span<const std::uint8_t> bytes) {
        if (!session_)
            return {error_frame("no_session", "audio received before a start frame")};
        if (bytes.size() % 2 != 0)
            return {error_frame("bad_chunk", "binary frame has an odd number of bytes")};
        std::vector<std::int16_t> pcm(bytes.size() / 2);
        for (std::size_t i = 0; i < pcm.size(); ++i)
            pcm[i] = static_cast<std::int16_t>(static_cast<std::uint16_t>(bytes[2 * i]) |
                                               static_cast<std::uint16_t>(bytes[2 * i + 1]) << 8);
        ChunkResult r;
        try {
            r = session_->ingest(std::span<const std::int16_t>(pcm));
        } catch (const ProtocolError& e) {
            return {error_frame(e.code(), e.what())};
        } catch (const Error& e) {
            return {error_frame("pipeline", e.what())};
        }
        std::vector<nlohmann::json> out;
        out.push_back({{"type", "chunk_meta"},
                       {"session_id", session_->id()},
                       {"chunk_index", r.chunk_index},
                       {"samples", pcm.size()},
                       {"rms", r.rms}});
        if (r.silent) {
            out.push_back({{"type", "silence"}, {"session_id", session_->id()}, {"chunk_index", r.chunk_index}});
            return out;
        }
        for (const auto& t : r.tasks) {
            const auto model = registry_.find(t.task);
            out.push_back({{"type", "posterior"},
                           {"session_id", session_->id()},
                           {"chunk_index", r.chunk_index},
                           {"task", to_string(t.task)},
                           {"instant", probability_map(*model, t.instant)},
                           {"averaged", probability_map(*model, t.averaged)},
                           {"map_label", t.map_label},
                           {"ring_size", t.ring_size}});
        }
        return out;
    }

private:
    nlohmann::json on_start(const nlohmann::json& msg) {
        if (session_)
            throw ProtocolError("bad_start", "session already started on this connection");
        if (!msg.contains("tasks") || !msg["tasks"].is_array())
            throw ProtocolError("bad_start", "start needs a 'tasks' array");
        std::vector<std::string> names;
        for (const auto& t : msg["tasks"]) {
            if (!t.is_string())
                throw ProtocolError("bad_start", "task names must be strings");
            names.push_back(t.get<std::string>());
        }
        double rate = 48000.0;
        if (msg.contains("sample_rate")) {
            if (!msg["sample_rate"].is_number())
                throw ProtocolError("bad_start", "sample_rate must be a number");
            rate = msg["sample_rate"].get<double>();
        }
        session_.emplace(registry_, names, rate, options_);
        std::vector<std::string> tasks;
        for (Task t : session_->tasks())
            tasks.emplace_back(to_string(t));
        return {{"type", "start"},
                {"session_id", session_->id()},
                {"tasks", tasks},
                {"sample_rate", session_->sample_rate()},
                {"chunk_samples", session_->chunk_samples()},
                {"ring_capacity", kRingCapacity}};
    }

    const ModelRegistry& registry_;
    SessionOptions options_;
    std::optional<Session> session_;
};

}  // namespace voxclass::service
