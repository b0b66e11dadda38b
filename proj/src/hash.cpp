#include "lmc/hash.hpp"

#include <cstdio>

namespace lmc {

std::string hex_hash(uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace lmc
