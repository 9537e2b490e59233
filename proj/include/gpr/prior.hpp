#pragma once

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <regex>
#include <semaphore>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/io_util.hpp"

namespace gpr {

enum class PriorStatus { Parsed, FallbackUnavailable };

/// Coordinate prior for one query: either a parsed (lat, lon) or a marker
/// that no usable prior exists.
struct PriorEstimate {
    std::optional<GeoPoint> location;  // set iff status == Parsed
    PriorStatus status = PriorStatus::FallbackUnavailable;
    std::string raw_text;
    std::string provider_tag;

    static PriorEstimate parsed(GeoPoint loc, std::string text, std::string tag) {
        return {loc, PriorStatus::Parsed, std::move(text), std::move(tag)};
    }
    static PriorEstimate unavailable(std::string text, std::string tag) {
        return {std::nullopt, PriorStatus::FallbackUnavailable, std::move(text), std::move(tag)};
    }
};

/// Pulls a coordinate pair out of free-form generator text.
///
/// Numeric tokens are matched, in order, by the pattern
///     [-+]?\d*\.\d+|\d+
/// Note the alternation: a sign only binds to decimal numbers; a bare
/// integer matches unsigned, so "-74" yields the token "74". Consecutive
/// token pairs are then tried right to left as (lat, lon); the last pair
/// that survives coordinate normalization wins. Generators that reason
/// step by step put the answer last, which is why the scan starts there.
inline PriorEstimate extract_coordinates(const std::string& text, std::string provider_tag = "") {
    static const std::regex number_pattern(R"([-+]?\d*\.\d+|\d+)");

    std::vector<double> tokens;
    auto begin = std::sregex_iterator(text.begin(), text.end(), number_pattern);
    for (auto it = begin; it != std::sregex_iterator(); ++it) {
        tokens.push_back(std::strtod(it->str().c_str(), nullptr));
    }

    for (size_t i = tokens.size(); i >= 2; --i) {
        if (auto loc = GeoPoint::try_normalized(tokens[i - 2], tokens[i - 1])) {
            return PriorEstimate::parsed(*loc, text, std::move(provider_tag));
        }
    }
    return PriorEstimate::unavailable(text, std::move(provider_tag));
}

/// Source of priors for queries. File-backed providers never touch the
/// network; remote providers issue one HTTP request per query.
class PriorProvider {
public:
    virtual ~PriorProvider() = default;
    virtual PriorEstimate get_prior(uint64_t query_id,
                                    std::span<const unsigned char> image = {}) = 0;
    virtual std::string tag() const = 0;
    /// Queries whose transport retries were exhausted (remote providers only).
    virtual uint64_t transport_exhaustions() const { return 0; }
};

// ---- file-backed priors -------------------------------------------------------

struct PriorFileStats {
    uint64_t entries = 0;
    uint64_t parse_failures = 0;  // lines whose text yielded no usable pair
};

/// Immutable id-keyed prior table loaded from a delimited text file.
///
/// Per line (tab-separated when the line contains a tab, else comma):
///   id, lat, lon [, free-text]   -> stored pre-parsed
///   id <DELIM> response-text     -> run through extract_coordinates
/// Lines without a leading integer id are rejected.
class FilePriorProvider : public PriorProvider {
public:
    static std::shared_ptr<FilePriorProvider> load(const std::string& path,
                                                   PriorFileStats* stats = nullptr) {
        auto provider = std::make_shared<FilePriorProvider>();
        // basename only: results must not vary with where the inputs live
        provider->tag_ = "file:" + std::filesystem::path(path).filename().string();
        const std::string data = read_file(path);
        size_t line_no = 0;
        for (std::string_view line : split(data, '\n')) {
            ++line_no;
            if (trim(line).empty()) continue;
            const char delim = line.find('\t') != std::string_view::npos ? '\t' : ',';
            auto fields = split(line, delim);
            auto id = parse_u64(fields[0]);
            if (!id) {
                raise(Errc::ParseError,
                      path + ":" + std::to_string(line_no) + ": expected integer query id");
            }

            PriorEstimate est = PriorEstimate::unavailable("", provider->tag_);
            bool structured = false;
            if (fields.size() >= 3) {
                auto lat = parse_double(fields[1]);
                auto lon = parse_double(fields[2]);
                if (lat && lon) {
                    if (auto loc = GeoPoint::try_normalized(*lat, *lon)) {
                        std::string rest;
                        for (size_t f = 3; f < fields.size(); ++f) {
                            if (f > 3) rest += delim;
                            rest += std::string(fields[f]);
                        }
                        est = PriorEstimate::parsed(*loc, std::string(trim(rest)), provider->tag_);
                        structured = true;
                    }
                }
            }
            if (!structured) {
                if (fields.size() < 2) {
                    raise(Errc::ParseError,
                          path + ":" + std::to_string(line_no) + ": missing coordinate fields");
                }
                const size_t text_pos = line.find(delim) + 1;
                est = extract_coordinates(std::string(trim(line.substr(text_pos))),
                                          provider->tag_);
            }
            if (est.status == PriorStatus::FallbackUnavailable) ++provider->stats_.parse_failures;
            ++provider->stats_.entries;
            provider->table_[*id] = std::move(est);
        }
        if (stats) *stats = provider->stats_;
        return provider;
    }

    PriorEstimate get_prior(uint64_t query_id, std::span<const unsigned char> = {}) override {
        auto it = table_.find(query_id);
        if (it == table_.end()) {
            // MissingQueryId is a soft condition: the pipeline degrades to a
            // global search rather than failing the query
            return PriorEstimate::unavailable("", tag_);
        }
        return it->second;
    }

    std::string tag() const override { return tag_; }
    const PriorFileStats& stats() const { return stats_; }
    const std::map<uint64_t, PriorEstimate>& table() const { return table_; }

private:
    std::map<uint64_t, PriorEstimate> table_;
    PriorFileStats stats_;
    std::string tag_;
};

/// Strict raw-responses reader: one "query_id <TAB> response-text" per line.
inline std::vector<std::pair<uint64_t, std::string>> load_raw_responses(const std::string& path) {
    std::vector<std::pair<uint64_t, std::string>> out;
    const std::string data = read_file(path);
    size_t line_no = 0;
    for (std::string_view line : split(data, '\n')) {
        ++line_no;
        if (trim(line).empty()) continue;
        const size_t tab = line.find('\t');
        if (tab == std::string_view::npos) {
            raise(Errc::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected 'id<TAB>response'");
        }
        auto id = parse_u64(line.substr(0, tab));
        if (!id) {
            raise(Errc::ParseError,
                  path + ":" + std::to_string(line_no) + ": expected integer query id");
        }
        out.emplace_back(*id, std::string(trim(line.substr(tab + 1))));
    }
    return out;
}

/// Writes parsed priors as "id<TAB>lat<TAB>lon" lines (ids ascending).
/// Unavailable estimates are omitted; downstream lookup treats the missing
/// id as Fallback-Unavailable.
inline void write_prior_file(const std::map<uint64_t, PriorEstimate>& table,
                             const std::string& path) {
    std::string out;
    for (const auto& [id, est] : table) {
        if (est.status != PriorStatus::Parsed) continue;
        out += std::to_string(id);
        out += '\t';
        out += format_double(est.location->lat());
        out += '\t';
        out += format_double(est.location->lon());
        out += '\n';
    }
    write_file(path, out);
}

// ---- remote priors ------------------------------------------------------------

struct RemotePriorConfig {
    std::string url;                    // e.g. https://host:443/v1/chat/completions
    std::string model;
    std::string prompt_template_path;
    std::string auth_env;               // env var holding the bearer token; may be empty
    double timeout_s = 30.0;
    uint32_t retries = 2;               // retries after the first attempt
    uint32_t in_flight_cap = 4;
    uint32_t initial_backoff_ms = 250;
};

namespace detail {

inline std::string base64_encode(std::span<const unsigned char> data) {
    static const char tbl[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
    std::string out;
    out.reserve((data.size() + 2) / 3 * 4);
    size_t i = 0;
    for (; i + 3 <= data.size(); i += 3) {
        const uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8) | data[i + 2];
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out.push_back(tbl[v & 63]);
    }
    const size_t rem = data.size() - i;
    if (rem == 1) {
        const uint32_t v = uint32_t(data[i]) << 16;
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out += "==";
    } else if (rem == 2) {
        const uint32_t v = (uint32_t(data[i]) << 16) | (uint32_t(data[i + 1]) << 8);
        out.push_back(tbl[(v >> 18) & 63]);
        out.push_back(tbl[(v >> 12) & 63]);
        out.push_back(tbl[(v >> 6) & 63]);
        out += "=";
    }
    return out;
}

}  // namespace detail

}  // namespace gpr
