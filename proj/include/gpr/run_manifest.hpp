#pragma once

#include <chrono>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "gpr/io_util.hpp"
#include "gpr/version.hpp"

namespace gpr {

/// Reproducibility record emitted once per CLI run, next to the outputs.
struct RunManifest {
    std::string command;
    uint64_t seed = 0;
    unsigned threads = 0;
    std::string config_file;
    std::map<std::string, std::string> resolved;  // flag -> value after config merge
    std::map<std::string, std::string> inputs;
    std::map<std::string, std::string> outputs;
    std::vector<std::pair<std::string, double>> timings_ms;  // stage order preserved

    void add_timing(const std::string& stage, double ms) { timings_ms.emplace_back(stage, ms); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["tool_version"] = VERSION;
        j["command"] = command;
        j["seed"] = seed;
        j["threads"] = threads;
        j["config_file"] = config_file;
        j["resolved"] = resolved;
        j["inputs"] = inputs;
        j["outputs"] = outputs;
        nlohmann::json t = nlohmann::json::array();
        for (const auto& [stage, ms] : timings_ms) {
            t.push_back({{"stage", stage}, {"ms", ms}});
        }
        j["timings_ms"] = t;
        return j;
    }

    void save(const std::string& path) const { write_file(path, to_json().dump(2) + "\n"); }
};

/// Wall-clock stage timer feeding the manifest.
class StageTimer {
public:
    StageTimer(RunManifest& manifest, std::string stage)
        : manifest_(manifest), stage_(std::move(stage)),
          start_(std::chrono::steady_clock::now()) {}

    ~StageTimer() {
        const auto elapsed = std::chrono::steady_clock::now() - start_;
        manifest_.add_timing(
            stage_, std::chrono::duration_cast<std::chrono::duration<double, std::milli>>(elapsed)
                        .count());
    }

private:
    RunManifest& manifest_;
    std::string stage_;
    std::chrono::steady_clock::time_point start_;
};

}  // namespace gpr
