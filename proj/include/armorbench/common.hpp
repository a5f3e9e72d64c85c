#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

namespace armorbench {

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Error taxonomy. Every failure mode carries a message naming the offending
// input; callers catch the specific type when they need to distinguish.
// ---------------------------------------------------------------------------

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : Error { using Error::Error; };
struct FormatError : Error { using Error::Error; };
struct ShapeError : Error { using Error::Error; };
struct IndexError : Error { using Error::Error; };
struct InputError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };
struct DependencyError : Error { using Error::Error; };
struct TrainingError : Error { using Error::Error; };
struct AttackError : Error { using Error::Error; };
struct DegenerateGeometryError : AttackError { using AttackError::AttackError; };

// Container-file load failures, kept distinct so callers can tell a wrong
// file apart from a damaged one.
struct BadMagicError : FormatError { using FormatError::FormatError; };
struct VersionMismatchError : FormatError { using FormatError::FormatError; };
struct TruncatedBlobError : FormatError { using FormatError::FormatError; };

// ---------------------------------------------------------------------------
// Deterministic randomness. mt19937_64 is bit-exact across platforms; the
// value mappings below are ours so no implementation-defined distribution
// sneaks into reproducible runs.
// ---------------------------------------------------------------------------

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // Uniform in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased draw from [0, n).
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = n * (UINT64_MAX / n);
        std::uint64_t v;
        do {
            v = gen_();
        } while (v >= limit);
        return v % n;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[below(i)]);
        }
    }

private:
    std::mt19937_64 gen_;
};

// Stable sub-seed derivation so each pipeline stage gets an independent
// stream from one global seed.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 1469598103934665603ull ^ seed;
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 1099511628211ull;
    }
    // splitmix64 finalizer
    h += 0x9e3779b97f4a7c15ull;
    h = (h ^ (h >> 30)) * 0xbf58476d1ce4e5b9ull;
    h = (h ^ (h >> 27)) * 0x94d049bb133111ebull;
    return h ^ (h >> 31);
}

// ---------------------------------------------------------------------------
// Index-ordered parallelism: results are written by index, so the outcome is
// identical for any thread count.
// ---------------------------------------------------------------------------

template <typename Fn>
void parallel_for(std::size_t n, int threads, Fn&& fn) {
    if (threads <= 1 || n <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    const std::size_t nthreads = std::min<std::size_t>(threads, n);
    // One exception slot per worker; the lowest-index worker's exception wins
    // so failures surface deterministically regardless of thread count.
    std::vector<std::exception_ptr> errors(nthreads);
    std::vector<std::thread> pool;
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t) {
        pool.emplace_back([&, t] {
            try {
                for (std::size_t i = t; i < n; i += nthreads) fn(i);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        });
    }
    for (auto& th : pool) th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Little-endian blob packing shared by all container files.
// ---------------------------------------------------------------------------

class BlobWriter {
public:
    void put_u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_u64(std::uint64_t v) {
        for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void put_i32(std::int32_t v) { put_u32(static_cast<std::uint32_t>(v)); }
    void put_i64(std::int64_t v) { put_u64(static_cast<std::uint64_t>(v)); }
    void put_f32(float v) { put_u32(std::bit_cast<std::uint32_t>(v)); }
    void put_f32(std::span<const float> v) {
        for (float x : v) put_f32(x);
    }
    void put_f64(double v) { put_u64(std::bit_cast<std::uint64_t>(v)); }
    void put_f64(std::span<const double> v) {
        for (double x : v) put_f64(x);
    }

    const std::vector<std::uint8_t>& bytes() const { return bytes_; }

private:
    std::vector<std::uint8_t> bytes_;
};

class BlobReader {
public:
    explicit BlobReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t get_u32() {
        need(4);
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 4;
        return v;
    }
    std::uint64_t get_u64() {
        need(8);
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
        pos_ += 8;
        return v;
    }
    std::int32_t get_i32() { return static_cast<std::int32_t>(get_u32()); }
    std::int64_t get_i64() { return static_cast<std::int64_t>(get_u64()); }
    float get_f32() { return std::bit_cast<float>(get_u32()); }
    void get_f32(std::span<float> out) {
        for (float& x : out) x = get_f32();
    }
    double get_f64() { return std::bit_cast<double>(get_u64()); }
    void get_f64(std::span<double> out) {
        for (double& x : out) x = get_f64();
    }

    std::size_t remaining() const { return bytes_.size() - pos_; }

    void expect_end() const {
        if (pos_ != bytes_.size())
            throw FormatError("container blob has " + std::to_string(remaining()) + " trailing bytes");
    }

private:
    void need(std::size_t n) const {
        if (pos_ + n > bytes_.size()) throw TruncatedBlobError("container blob truncated");
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

// ---------------------------------------------------------------------------
// Container file: 4-byte magic, u32 LE version, u64 LE metadata length, UTF-8
// JSON metadata, raw payload blob. Every serialized artifact uses this frame.
// ---------------------------------------------------------------------------

struct Container {
    json meta;
    std::vector<std::uint8_t> blob;
};

inline void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("short write to " + path.string());
}

inline std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

inline std::vector<std::uint8_t> encode_container(const char magic[4], std::uint32_t version,
                                                  const json& meta,
                                                  std::span<const std::uint8_t> blob) {
    const std::string meta_str = meta.dump();
    BlobWriter header;
    header.put_u32(version);
    header.put_u64(meta_str.size());

    std::vector<std::uint8_t> bytes;
    bytes.reserve(4 + header.bytes().size() + meta_str.size() + blob.size());
    bytes.insert(bytes.end(), magic, magic + 4);
    bytes.insert(bytes.end(), header.bytes().begin(), header.bytes().end());
    bytes.insert(bytes.end(), meta_str.begin(), meta_str.end());
    bytes.insert(bytes.end(), blob.begin(), blob.end());
    return bytes;
}

inline void write_container(const std::filesystem::path& path, const char magic[4],
                            std::uint32_t version, const json& meta,
                            std::span<const std::uint8_t> blob) {
    write_file_bytes(path, encode_container(magic, version, meta, blob));
}

inline Container decode_container(std::span<const std::uint8_t> bytes, const char magic[4],
                                  std::uint32_t expected_version, const std::string& what) {
    if (bytes.size() < 4 || std::memcmp(bytes.data(), magic, 4) != 0)
        throw BadMagicError(what + ": bad magic, expected '" + std::string(magic, magic + 4) + "'");
    BlobReader header(bytes.subspan(4));
    std::uint32_t version = 0;
    std::uint64_t meta_len = 0;
    try {
        version = header.get_u32();
        meta_len = header.get_u64();
    } catch (const TruncatedBlobError&) {
        throw TruncatedBlobError(what + ": truncated header");
    }
    if (version != expected_version)
        throw VersionMismatchError(what + ": version " + std::to_string(version) + ", expected " +
                                   std::to_string(expected_version));
    const std::size_t meta_off = 4 + 12;
    if (meta_off + meta_len > bytes.size()) throw TruncatedBlobError(what + ": truncated metadata");

    Container c;
    try {
        c.meta = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(meta_off),
                             bytes.begin() + static_cast<std::ptrdiff_t>(meta_off + meta_len));
    } catch (const json::parse_error& e) {
        throw FormatError(what + ": metadata is not valid JSON: " + e.what());
    }
    c.blob.assign(bytes.begin() + static_cast<std::ptrdiff_t>(meta_off + meta_len), bytes.end());
    return c;
}

inline Container read_container(const std::filesystem::path& path, const char magic[4],
                                std::uint32_t expected_version) {
    return decode_container(read_file_bytes(path), magic, expected_version, path.string());
}

}  // namespace armorbench
