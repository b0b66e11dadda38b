#pragma once

#include <cstdint>
#include <cstring>
#include <string>

namespace lmc {

// FNV-1a 64-bit. Used for dataset content ids, config hashes and checkpoint
// checksums; stable across platforms for identical byte streams.
class Fnv1a {
public:
    static constexpr uint64_t kOffset = 0xcbf29ce484222325ull;
    static constexpr uint64_t kPrime = 0x100000001b3ull;

    void update(const void* data, size_t n) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < n; ++i) {
            state_ ^= p[i];
            state_ *= kPrime;
        }
    }
    void update(const std::string& s) { update(s.data(), s.size()); }
    template <typename T>
    void update_pod(const T& v) {
        static_assert(std::is_trivially_copyable_v<T>);
        update(&v, sizeof(T));
    }
    uint64_t digest() const { return state_; }

private:
    uint64_t state_ = kOffset;
};

inline uint64_t fnv1a(const void* data, size_t n) {
    Fnv1a h;
    h.update(data, n);
    return h.digest();
}
inline uint64_t fnv1a(const std::string& s) { return fnv1a(s.data(), s.size()); }

std::string hex_hash(uint64_t h);

// splitmix64 finalizer; used to derive independent RNG streams from
// (seed, counter) pairs so shuffles are counter-based and replayable.
inline uint64_t mix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}
inline uint64_t mix_seed(uint64_t seed, uint64_t counter) {
    return mix64(mix64(seed) ^ mix64(counter * 0xd6e8feb86659fd93ull + 1));
}

}  // namespace lmc
