#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <istream>
#include <limits>
#include <malloc.h>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace srgt {

// ---------------------------------------------------------------------------
// Error hierarchy. The CLI maps these to exit codes (config 2, io 3,
// divergence 4), so library code should throw the most specific type.
// ---------------------------------------------------------------------------

struct error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct config_error : error {
    using error::error;
};

struct io_error : error {
    using error::error;
};

// Malformed on-disk data (bad magic, version, truncation, non-finite payload).
struct format_error : io_error {
    using io_error::io_error;
};

struct divergence_error : error {
    using error::error;
};

// ---------------------------------------------------------------------------
// Flow-field feature table. Order is fixed; serialized files carry the names
// so readers can verify.
// ---------------------------------------------------------------------------

inline constexpr int kNumFeatures = 13;

enum Feature : int {
    F_UX = 0,
    F_UY = 1,
    F_P = 2,
    F_T = 3,
    F_Y_H2 = 4,
    F_Y_O2 = 5,
    F_Y_O = 6,
    F_Y_H = 7,
    F_Y_OH = 8,
    F_Y_HO2 = 9,
    F_Y_H2O2 = 10,
    F_Y_H2O = 11,
    F_Y_N2 = 12,
};

inline constexpr int kFirstSpecies = F_Y_H2;
inline constexpr int kNumSpecies = 9;

inline const std::vector<std::string>& feature_names() {
    static const std::vector<std::string> names = {
        "u_x", "u_y", "P", "T", "Y_H2", "Y_O2", "Y_O", "Y_H", "Y_OH",
        "Y_HO2", "Y_H2O2", "Y_H2O", "Y_N2"};
    return names;
}

// ---------------------------------------------------------------------------
// Little-endian binary IO. x86 is little-endian but the encode/decode is
// explicit so the formats stay well-defined.
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void write_raw(std::ostream& os, T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T read_raw(std::istream& is, const char* what) {
    unsigned char buf[sizeof(T)];
    is.read(reinterpret_cast<char*>(buf), sizeof(T));
    if (!is || is.gcount() != static_cast<std::streamsize>(sizeof(T)))
        throw format_error(std::string("truncated file while reading ") + what);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
}

}  // namespace detail

inline void write_u16(std::ostream& os, uint16_t v) { detail::write_raw(os, v); }
inline void write_u32(std::ostream& os, uint32_t v) { detail::write_raw(os, v); }
inline void write_u64(std::ostream& os, uint64_t v) { detail::write_raw(os, v); }
inline void write_f64(std::ostream& os, double v) { detail::write_raw(os, v); }

inline uint16_t read_u16(std::istream& is, const char* what = "u16") {
    return detail::read_raw<uint16_t>(is, what);
}
inline uint32_t read_u32(std::istream& is, const char* what = "u32") {
    return detail::read_raw<uint32_t>(is, what);
}
inline uint64_t read_u64(std::istream& is, const char* what = "u64") {
    return detail::read_raw<uint64_t>(is, what);
}
inline double read_f64(std::istream& is, const char* what = "f64") {
    return detail::read_raw<double>(is, what);
}

inline void write_f64_array(std::ostream& os, const double* v, size_t n) {
    os.write(reinterpret_cast<const char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_f64_array(std::istream& is, double* v, size_t n, const char* what) {
    is.read(reinterpret_cast<char*>(v), static_cast<std::streamsize>(n * sizeof(double)));
    if (!is || is.gcount() != static_cast<std::streamsize>(n * sizeof(double)))
        throw format_error(std::string("truncated file while reading ") + what);
}

inline void write_magic(std::ostream& os, const char magic[9]) {
    os.write(magic, 8);
}

inline void expect_magic(std::istream& is, const char magic[9], const char* what) {
    char buf[8];
    is.read(buf, 8);
    if (!is || is.gcount() != 8)
        throw format_error(std::string("truncated file while reading magic of ") + what);
    if (std::memcmp(buf, magic, 8) != 0)
        throw format_error(std::string("bad magic bytes, not a ") + what + " file");
}

// ---------------------------------------------------------------------------
// Deterministic RNG helpers. std::mt19937_64 has a pinned sequence, but the
// standard distributions do not, so the draws are built by hand.
// ---------------------------------------------------------------------------

using Rng = std::mt19937_64;

inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives a decorrelated child seed, e.g. one RNG stream per snapshot/sample.
inline uint64_t derive_seed(uint64_t base, uint64_t stream) {
    uint64_t s = base + 0x632be59bd9b4e019ULL * (stream + 1);
    return splitmix64(s);
}

// Uniform in [0, 1).
inline double uniform_double(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double uniform_range(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform_double(rng);
}

// Unbiased integer in [0, n) by rejection.
inline uint64_t uniform_below(Rng& rng, uint64_t n) {
    if (n == 0) throw config_error("uniform_below: n must be positive");
    const uint64_t limit = std::numeric_limits<uint64_t>::max() - std::numeric_limits<uint64_t>::max() % n;
    uint64_t x;
    do {
        x = rng();
    } while (x >= limit);
    return x % n;
}

template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (size_t i = v.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

// Raises the glibc mmap/trim thresholds so the large activation buffers the
// training loop churns through are recycled from the heap instead of being
// mapped and zeroed anew on every step.
inline void tune_allocator() {
#ifdef __GLIBC__
    mallopt(M_MMAP_THRESHOLD, 32 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 256 * 1024 * 1024);
#endif
}

// Worker-thread cap: SRGT_THREADS env var if set, hardware concurrency otherwise.
inline int num_threads() {
    if (const char* env = std::getenv("SRGT_THREADS")) {
        const int n = std::atoi(env);
        if (n >= 1) return n;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
}

}  // namespace srgt
