#include "physlaw/rng.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace physlaw {

uint64_t hash_mix(uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

uint64_t seed_from(uint64_t master, std::string_view tag, uint64_t salt) {
  uint64_t h = 0xcbf29ce484222325ull;  // fnv-1a over the tag
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ull;
  }
  return hash_mix(master ^ hash_mix(h ^ hash_mix(salt)));
}

double Rng::uniform01() {
  return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
}

double Rng::normal(double mean, double stddev) {
  if (has_spare_) {
    has_spare_ = false;
    return mean + stddev * spare_;
  }
  double u1 = 0.0;
  do {
    u1 = uniform01();
  } while (u1 <= 0.0);
  const double u2 = uniform01();
  const double r = std::sqrt(-2.0 * std::log(u1));
  const double theta = 2.0 * M_PI * u2;
  spare_ = r * std::sin(theta);
  has_spare_ = true;
  return mean + stddev * r * std::cos(theta);
}

int64_t Rng::uniform_int(int64_t lo, int64_t hi) {
  if (lo > hi) throw std::invalid_argument("uniform_int: empty range");
  const uint64_t span = static_cast<uint64_t>(hi - lo) + 1;
  // modulo bias is irrelevant at our ranges but rejection is cheap
  const uint64_t limit = UINT64_MAX - UINT64_MAX % span;
  uint64_t v = 0;
  do {
    v = gen_();
  } while (v >= limit);
  return lo + static_cast<int64_t>(v % span);
}

std::string Rng::save_state() const {
  std::ostringstream os;
  os << gen_ << " " << (has_spare_ ? 1 : 0) << " ";
  os.precision(17);
  os << spare_;
  return os.str();
}

void Rng::restore_state(const std::string& s) {
  std::istringstream is(s);
  int spare_flag = 0;
  is >> gen_ >> spare_flag >> spare_;
  if (!is) throw std::invalid_argument("Rng::restore_state: malformed state");
  has_spare_ = spare_flag != 0;
}

}  // namespace physlaw
