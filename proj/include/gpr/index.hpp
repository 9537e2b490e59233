#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/parallel.hpp"
#include "gpr/partition.hpp"
#include "gpr/store.hpp"

namespace gpr {

struct Candidate {
    uint64_t id = 0;
    float score = 0.0f;  // L2-squared distance, lower is better
    GeoPoint location;
};

inline bool candidate_order(const Candidate& a, const Candidate& b) {
    if (a.score != b.score) return a.score < b.score;
    return a.id < b.id;  // deterministic tie-break
}

/// Sum of squared component differences, accumulated in f64 and rounded to
/// f32 once at the end. High-dimensional descriptors (d up to 16k) lose
/// precision if summed in f32.
inline float l2_squared(std::span<const float> u, std::span<const float> v) {
    if (u.size() != v.size()) {
        raise(Errc::LengthMismatch, "vector lengths " + std::to_string(u.size()) + " vs " +
                                        std::to_string(v.size()));
    }
    double acc = 0.0;
    for (size_t i = 0; i < u.size(); ++i) {
        const double d = double(u[i]) - double(v[i]);
        acc += d * d;
    }
    return float(acc);
}

/// Flat exact-search index over one submap: ids in ascending order, vectors
/// gathered into contiguous rows, geotags alongside.
class SubmapIndex {
public:
    SubmapIndex(uint32_t submap_id, uint32_t dimension) : submap_id_(submap_id), dim_(dimension) {}

    static SubmapIndex from_ids(const StoreHandle& store, uint32_t submap_id,
                                const std::vector<uint64_t>& sorted_ids) {
        SubmapIndex idx(submap_id, store.dimension());
        idx.row_ids_ = sorted_ids;
        idx.locations_.reserve(sorted_ids.size());
        idx.vectors_.reserve(sorted_ids.size() * size_t(store.dimension()));
        for (uint64_t id : sorted_ids) {
            auto ord = store.find_ordinal(id);
            if (!ord) raise(Errc::UnknownId, "partition references unknown id " + std::to_string(id));
            idx.locations_.push_back(store.location_at(*ord));
            auto row = store.vector_at(*ord);
            idx.vectors_.insert(idx.vectors_.end(), row.begin(), row.end());
        }
        return idx;
    }

    uint32_t submap_id() const { return submap_id_; }
    uint32_t dimension() const { return dim_; }
    size_t size() const { return row_ids_.size(); }
    uint64_t row_id(size_t row) const { return row_ids_[row]; }
    GeoPoint row_location(size_t row) const { return locations_[row]; }
    std::span<const float> row_vector(size_t row) const {
        return {vectors_.data() + row * size_t(dim_), size_t(dim_)};
    }

private:
    uint32_t submap_id_;
    uint32_t dim_;
    std::vector<uint64_t> row_ids_;
    std::vector<GeoPoint> locations_;
    std::vector<float> vectors_;
};

namespace detail {

// Keeps the p smallest (score, id) pairs seen so far; max-heap on the
// current worst element.
struct TopP {
    explicit TopP(size_t p) : p(p) {}

    void offer(float score, size_t row) {
        if (heap.size() < p) {
            heap.emplace_back(score, row);
            std::push_heap(heap.begin(), heap.end());
        } else if (std::pair<float, size_t>(score, row) < heap.front()) {
            std::pop_heap(heap.begin(), heap.end());
            heap.back() = {score, row};
            std::push_heap(heap.begin(), heap.end());
        }
    }

    size_t p;
    std::vector<std::pair<float, size_t>> heap;  // (score, row), max on top
};

}  // namespace detail

/// Exact top-p search under L2-squared. Scans the rows in cache-friendly
/// tiles, keeps a per-tile heap of size p, and merges tiles by (score, id).
/// Output is ascending by (score, id) and identical for any thread count.
inline std::vector<Candidate> search(const SubmapIndex& index, std::span<const float> query,
                                     uint32_t p, unsigned threads = 0) {
    if (query.size() != index.dimension()) {
        raise(Errc::DimensionMismatch, "query dimension " + std::to_string(query.size()) +
                                           ", index dimension " +
                                           std::to_string(index.dimension()));
    }
    if (p == 0) raise(Errc::SpecInvalid, "top-p must be >= 1");

    const size_t n = index.size();
    if (n == 0) return {};

    const size_t tile = 4096;
    const size_t n_tiles = (n + tile - 1) / tile;
    std::vector<detail::TopP> tops(n_tiles, detail::TopP(p));

    parallel_blocks(n, tile, threads, [&](size_t t, size_t begin, size_t end) {
        detail::TopP& top = tops[t];
        for (size_t row = begin; row < end; ++row) {
            const auto v = index.row_vector(row);
            double acc = 0.0;
            for (size_t i = 0; i < v.size(); ++i) {
                const double d = double(query[i]) - double(v[i]);
                acc += d * d;
            }
            top.offer(float(acc), row);
        }
    });

    std::vector<std::pair<float, size_t>> merged;
    merged.reserve(std::min(n, n_tiles * size_t(p)));
    for (auto& t : tops) {
        merged.insert(merged.end(), t.heap.begin(), t.heap.end());
    }
    // row index ascends with id inside a submap, so (score, row) ordering is
    // exactly (score, id) ordering
    std::sort(merged.begin(), merged.end());
    if (merged.size() > p) merged.resize(p);

    std::vector<Candidate> out;
    out.reserve(merged.size());
    for (const auto& [score, row] : merged) {
        out.push_back({index.row_id(row), score, index.row_location(row)});
    }
    return out;
}

/// One index per submap, in partition order. The partition must have been
/// built from this exact store.
inline std::vector<SubmapIndex> build_indexes(const StoreHandle& store, const Partition& partition,
                                              unsigned threads = 0) {
    (void)threads;
    if (partition.store_fingerprint != store.fingerprint()) {
        raise(Errc::FingerprintMismatch,
              "partition was built from a different store (fingerprint mismatch)");
    }
    std::vector<SubmapIndex> indexes;
    indexes.reserve(partition.submaps.size());
    size_t total = 0;
    for (const auto& s : partition.submaps) {
        indexes.push_back(SubmapIndex::from_ids(store, s.submap_id, s.member_ids));
        total += s.member_ids.size();
    }
    if (total != store.size()) {
        raise(Errc::InconsistentEngine,
              "partition covers " + std::to_string(total) + " of " +
                  std::to_string(store.size()) + " records");
    }
    return indexes;
}

/// Whole-store index (ids ascending), for unpartitioned search.
inline SubmapIndex build_global_index(const StoreHandle& store) {
    std::vector<uint64_t> ids;
    ids.reserve(size_t(store.size()));
    for (size_t i = 0; i < store.size(); ++i) ids.push_back(store.id_at(i));
    std::sort(ids.begin(), ids.end());
    return SubmapIndex::from_ids(store, 0, ids);
}

/// Exact global top-p over a family of disjoint indexes: per-index top-p
/// merged by (score, id). Equivalent to scanning one concatenated index.
inline std::vector<Candidate> search_all(const std::vector<SubmapIndex>& indexes,
                                         std::span<const float> query, uint32_t p,
                                         unsigned threads = 0) {
    std::vector<Candidate> merged;
    for (const auto& idx : indexes) {
        auto part = search(idx, query, p, threads);
        merged.insert(merged.end(), part.begin(), part.end());
    }
    std::sort(merged.begin(), merged.end(), candidate_order);
    if (merged.size() > p) merged.resize(p);
    return merged;
}

}  // namespace gpr
