#include "sadepth/rng.hpp"

#include <cmath>
#include <cstring>
#include <sstream>
#include <stdexcept>

namespace sadepth {

namespace {
uint64_t splitmix64(uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
} // namespace

double Rng::normal() {
    if (has_spare_) {
        has_spare_ = false;
        return spare_;
    }
    // Box-Muller; u1 in (0,1] to keep the log finite.
    double u1 = 1.0 - uniform();
    double u2 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 2.0 * 3.14159265358979323846 * u2;
    spare_ = r * std::sin(theta);
    has_spare_ = true;
    return r * std::cos(theta);
}

Rng Rng::fork(uint64_t stream) const {
    Rng child(splitmix64(seed_base_ ^ splitmix64(stream + 0x51ab5e1fULL)));
    child.seed_base_ = splitmix64(seed_base_ ^ splitmix64(stream + 0x51ab5e1fULL));
    return child;
}

std::string Rng::serialize() const {
    std::ostringstream os;
    uint64_t spare_bits = 0;
    static_assert(sizeof(spare_bits) == sizeof(spare_));
    std::memcpy(&spare_bits, &spare_, sizeof(spare_bits));
    os << gen_ << " " << (has_spare_ ? 1 : 0) << " " << spare_bits << " " << seed_base_;
    return os.str();
}

Rng Rng::deserialize(const std::string& s) {
    Rng r;
    std::istringstream is(s);
    is >> r.gen_;
    int hs = 0;
    uint64_t spare_bits = 0;
    is >> hs >> spare_bits >> r.seed_base_;
    if (!is) throw std::runtime_error("Rng::deserialize: malformed state string");
    std::memcpy(&r.spare_, &spare_bits, sizeof(spare_bits));
    r.has_spare_ = hs != 0;
    return r;
}

} // namespace sadepth
