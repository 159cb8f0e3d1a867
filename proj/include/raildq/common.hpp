#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

namespace raildq {

// Thrown when an input document violates its schema. Carries the offending
// id/field so callers can report actionable messages.
class SchemaError : public std::runtime_error {
public:
    SchemaError(std::string what, std::string id = {}, std::string field = {})
        : std::runtime_error(compose(what, id, field)), id_(std::move(id)), field_(std::move(field)) {}

    const std::string& id() const { return id_; }
    const std::string& field() const { return field_; }

private:
    static std::string compose(const std::string& what, const std::string& id, const std::string& field) {
        std::string msg = what;
        if (!id.empty()) msg += " (id: " + id + ")";
        if (!field.empty()) msg += " [field: " + field + "]";
        return msg;
    }
    std::string id_;
    std::string field_;
};

// Thrown when a caller breaks an API contract (e.g. applies a masked-out
// action). Never silently corrected.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

// Deterministic 64-bit generator (splitmix64 core). We roll our own uniform
// helpers because std distributions are not pinned across library versions
// and reproducibility of episodes is a hard requirement.
class Rng {
public:
    explicit Rng(std::uint64_t seed = 0x9e3779b97f4a7c15ULL) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in [0, n). Rejection sampling keeps it exactly uniform.
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) throw ContractViolation("next_below(0)");
        std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int next_int(int lo, int hi) {  // inclusive range
        return lo + static_cast<int>(next_below(static_cast<std::uint64_t>(hi - lo + 1)));
    }

    // Derive an independent stream; used to give each component its own rng.
    Rng split(std::uint64_t tag) {
        Rng child(next_u64() ^ (tag * 0xd1342543de82ef95ULL + 0x2545f4914f6cdd1dULL));
        return child;
    }

private:
    std::uint64_t state_;
};

// Shortest decimal text that round-trips a double exactly (17 significant
// digits is always enough for IEEE binary64).
inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

// Partial Fisher-Yates: draws k distinct indices uniformly from [0, n).
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (std::size_t i = 0; i < k; ++i) {
        std::size_t j = i + static_cast<std::size_t>(rng.next_below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
}

}  // namespace raildq
