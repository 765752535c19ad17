#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace oncosurv::util {

// ---- strings ----

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string join(const std::vector<std::string>& parts, std::string_view sep);
bool starts_with(std::string_view s, std::string_view prefix);

// Round-trip-exact decimal form for doubles (CSV cells, hashes).
std::string format_double(double v);

// ---- FNV-1a 64-bit ----

inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ULL) {
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

// ---- calendar dates ----

struct Date {
    int y = 1970;
    unsigned m = 1;
    unsigned d = 1;

    bool operator==(const Date&) const = default;
    auto operator<=>(const Date&) const = default;
};

// Strict YYYY-MM-DD with calendar validation.
std::optional<Date> parse_date(std::string_view iso);
std::string format_date(const Date& d);

// Days since 1970-01-01 (proleptic Gregorian).
long days_from_civil(const Date& d);
Date civil_from_days(long z);

inline long days_between(const Date& from, const Date& to) {
    return days_from_civil(to) - days_from_civil(from);
}

inline Date add_days(const Date& d, long n) { return civil_from_days(days_from_civil(d) + n); }

// ---- deterministic RNG ----

// splitmix64 finalizer; used to derive independent stream seeds.
inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// mt19937_64 with hand-rolled distributions so sequences are pinned by this
// code alone, not by the standard library's distribution internals.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    std::uint64_t u64() { return eng_(); }

    // uniform in [0, 1)
    double uniform() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

    // uniform integer in [0, n); n > 0
    std::size_t uniform_int(std::size_t n) { return static_cast<std::size_t>(uniform() * static_cast<double>(n)); }

    bool bernoulli(double p) { return uniform() < p; }

    double normal();  // Box-Muller, one value per call

    // Weibull(shape k, scale lambda); optional proportional-hazard multiplier c
    double weibull(double shape, double scale, double hazard_multiplier = 1.0);

    double exponential(double rate);

    template <class T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::swap(v[i - 1], v[uniform_int(i)]);
        }
    }

    Rng fork(std::uint64_t stream) { return Rng(mix64(eng_() ^ mix64(stream))); }

  private:
    std::mt19937_64 eng_;
};

}  // namespace oncosurv::util
