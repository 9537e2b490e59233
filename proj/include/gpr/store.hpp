#pragma once

#include <bit>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <fcntl.h>
#include <sys/mman.h>
#include <sys/stat.h>
#include <unistd.h>

#include "gpr/errors.hpp"
#include "gpr/geo.hpp"
#include "gpr/io_util.hpp"

namespace gpr {

// On-disk layout, all little-endian:
//   bytes 0-7   magic "GPRSTORE"
//   u32         version = 1
//   u32         dimension d
//   u64         record count N
//   32 bytes    extractor tag (NUL padded)
//   N x (u64 id, f64 lat, f64 lon)
//   N x d f32   vector block, contiguous rows in write order
inline constexpr char STORE_MAGIC[8] = {'G', 'P', 'R', 'S', 'T', 'O', 'R', 'E'};
inline constexpr uint32_t STORE_VERSION = 1;
inline constexpr size_t STORE_HEADER_BYTES = 56;
inline constexpr size_t STORE_META_STRIDE = 24;

static_assert(std::endian::native == std::endian::little,
              "zero-copy store reads assume a little-endian host");

struct DescriptorRecord {
    uint64_t id = 0;
    std::vector<float> vector;
    GeoPoint location;
    std::string source_tag;
};

struct StoreHeader {
    uint32_t format_version = STORE_VERSION;
    uint32_t dimension = 0;
    uint64_t record_count = 0;
    std::string extractor_tag;
};

namespace detail {

inline std::string encode_header(uint32_t dimension, uint64_t count, const std::string& tag) {
    std::string out;
    out.reserve(STORE_HEADER_BYTES);
    out.append(STORE_MAGIC, 8);
    put_u32(out, STORE_VERSION);
    put_u32(out, dimension);
    put_u64(out, count);
    std::string padded = tag.substr(0, 32);
    padded.resize(32, '\0');
    out += padded;
    return out;
}

}  // namespace detail

/// Writes records to `path` in the binary store layout. All records must
/// share `dimension`, carry unique ids, and hold only finite components.
inline StoreHeader write_store(const std::vector<DescriptorRecord>& records, uint32_t dimension,
                               const std::string& path, const std::string& extractor_tag = "") {
    if (dimension == 0) raise(Errc::DimensionMismatch, "store dimension must be >= 1");

    std::unordered_map<uint64_t, size_t> seen;
    seen.reserve(records.size());
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (r.vector.size() != dimension) {
            raise(Errc::DimensionMismatch,
                  "record id " + std::to_string(r.id) + " has dimension " +
                      std::to_string(r.vector.size()) + ", store dimension is " +
                      std::to_string(dimension));
        }
        if (!seen.emplace(r.id, i).second) {
            raise(Errc::DuplicateId, "duplicate record id " + std::to_string(r.id));
        }
        for (float v : r.vector) {
            if (!std::isfinite(v)) {
                raise(Errc::SpecInvalid,
                      "record id " + std::to_string(r.id) + " has a non-finite component");
            }
        }
    }

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) raise(Errc::IoFailure, "cannot create " + path);

    out << detail::encode_header(dimension, records.size(), extractor_tag);

    std::string meta;
    meta.reserve(records.size() * STORE_META_STRIDE);
    for (const auto& r : records) {
        put_u64(meta, r.id);
        put_f64(meta, r.location.lat());
        put_f64(meta, r.location.lon());
    }
    out.write(meta.data(), std::streamsize(meta.size()));

    std::string row;
    for (const auto& r : records) {
        row.clear();
        row.reserve(size_t(dimension) * 4);
        for (float v : r.vector) put_f32(row, v);
        out.write(row.data(), std::streamsize(row.size()));
    }
    out.flush();
    if (!out) raise(Errc::IoFailure, "write failed: " + path);

    StoreHeader h;
    h.dimension = dimension;
    h.record_count = records.size();
    h.extractor_tag = extractor_tag.substr(0, 32);
    return h;
}

/// Read-only, memory-mapped view of a store file. Immutable once opened;
/// any number of threads may read concurrently.
class StoreHandle {
public:
    static StoreHandle open(const std::string& path) {
        int fd = ::open(path.c_str(), O_RDONLY);
        if (fd < 0) raise(Errc::IoFailure, "cannot open " + path);

        struct stat st{};
        if (::fstat(fd, &st) != 0) {
            ::close(fd);
            raise(Errc::IoFailure, "stat failed: " + path);
        }
        const size_t file_size = size_t(st.st_size);
        if (file_size < STORE_HEADER_BYTES) {
            ::close(fd);
            raise(Errc::TruncatedFile, path + ": shorter than store header");
        }

        void* map = ::mmap(nullptr, file_size, PROT_READ, MAP_PRIVATE, fd, 0);
        ::close(fd);
        if (map == MAP_FAILED) raise(Errc::IoFailure, "mmap failed: " + path);

        StoreHandle h;
        h.map_.reset(new Mapping{map, file_size});
        h.path_ = path;

        const auto* bytes = h.bytes();
        if (std::memcmp(bytes, STORE_MAGIC, 8) != 0) {
            raise(Errc::BadMagic, path + ": not a GPRSTORE file");
        }
        h.header_.format_version = get_u32(bytes + 8);
        if (h.header_.format_version != STORE_VERSION) {
            raise(Errc::UnsupportedVersion,
                  path + ": store version " + std::to_string(h.header_.format_version));
        }
        h.header_.dimension = get_u32(bytes + 12);
        h.header_.record_count = get_u64(bytes + 16);
        if (h.header_.dimension == 0) raise(Errc::ParseError, path + ": header dimension is 0");

        const char* tag = reinterpret_cast<const char*>(bytes + 24);
        size_t tag_len = 0;
        while (tag_len < 32 && tag[tag_len] != '\0') ++tag_len;
        h.header_.extractor_tag.assign(tag, tag_len);

        const uint64_t n = h.header_.record_count;
        const uint64_t expected =
            STORE_HEADER_BYTES + n * STORE_META_STRIDE + n * uint64_t(h.header_.dimension) * 4;
        if (file_size != expected) {
            raise(Errc::TruncatedFile, path + ": file size " + std::to_string(file_size) +
                                           " does not match header (expected " +
                                           std::to_string(expected) + ")");
        }

        h.by_id_.reserve(size_t(n));
        for (size_t i = 0; i < n; ++i) {
            if (!h.by_id_.emplace(h.id_at(i), i).second) {
                raise(Errc::DuplicateId,
                      path + ": duplicate id " + std::to_string(h.id_at(i)));
            }
        }
        return h;
    }

    uint32_t dimension() const { return header_.dimension; }
    uint64_t size() const { return header_.record_count; }
    const StoreHeader& header() const { return header_; }
    const std::string& path() const { return path_; }

    uint64_t id_at(size_t ordinal) const {
        return get_u64(bytes() + STORE_HEADER_BYTES + ordinal * STORE_META_STRIDE);
    }

    GeoPoint location_at(size_t ordinal) const {
        const auto* p = bytes() + STORE_HEADER_BYTES + ordinal * STORE_META_STRIDE;
        return GeoPoint::normalized(get_f64(p + 8), get_f64(p + 16));
    }

    /// Zero-copy view of one descriptor row.
    std::span<const float> vector_at(size_t ordinal) const {
        const auto* base = bytes() + STORE_HEADER_BYTES + size() * STORE_META_STRIDE;
        // rows are 4-byte aligned in the mapping; see layout comment above
        const float* row = reinterpret_cast<const float*>(base) + ordinal * size_t(dimension());
        return {row, size_t(dimension())};
    }

    std::optional<size_t> find_ordinal(uint64_t id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) return std::nullopt;
        return it->second;
    }

    DescriptorRecord record_at(size_t ordinal) const {
        DescriptorRecord r;
        r.id = id_at(ordinal);
        r.location = location_at(ordinal);
        auto row = vector_at(ordinal);
        r.vector.assign(row.begin(), row.end());
        r.source_tag = header_.extractor_tag;
        return r;
    }

    DescriptorRecord get(uint64_t id) const {
        auto ord = find_ordinal(id);
        if (!ord) raise(Errc::UnknownId, "no record with id " + std::to_string(id));
        return record_at(*ord);
    }

    /// Hash of the raw 56-byte header; partitions remember it to detect
    /// being applied to a different store.
    uint64_t fingerprint() const { return fnv1a64(bytes(), STORE_HEADER_BYTES); }

    /// Hash of the full payload (metadata + vectors), for inspect/round-trip checks.
    uint64_t content_checksum() const {
        return fnv1a64(bytes() + STORE_HEADER_BYTES, map_->size - STORE_HEADER_BYTES);
    }

private:
    struct Mapping {
        void* addr = nullptr;
        size_t size = 0;
        ~Mapping() {
            if (addr != nullptr && addr != MAP_FAILED) ::munmap(addr, size);
        }
    };

    const unsigned char* bytes() const { return static_cast<const unsigned char*>(map_->addr); }

    std::shared_ptr<Mapping> map_;
    StoreHeader header_;
    std::string path_;
    std::unordered_map<uint64_t, size_t> by_id_;
};

}  // namespace gpr
