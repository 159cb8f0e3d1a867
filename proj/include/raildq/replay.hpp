#pragma once

#include <array>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "raildq/qmodel.hpp"

namespace raildq {

// Rewards scale by this divisor in the per-step scheme to keep outputs small.
inline constexpr double kRewardScale = 15000.0;

enum class RewardClass { Deadlock = 0, Normal = 1, Best = 2 };
const char* to_string(RewardClass c);

struct Experience {
    std::vector<double> state;
    ActionFlags mask{};
    int action_taken = 0;
    QVector y_target{};  // network output captured at decision time, then edited
    int episode = 0;
    std::string train;
};

// Fixed quota split of a training batch across the three stores, keyed by
// the rule id.
struct MemoryRule {
    int id = 11;
    int deadlock_quota = 12;
    int normal_quota = 12;
    int best_quota = 12;
    int batch_size() const { return deadlock_quota + normal_quota + best_quota; }
};
MemoryRule memory_rule(int id);

// Three unbounded stores with (state, mask)-key dedup: a key lives only in
// the highest-ranked store that ever received it (best > normal > deadlock).
class TripartiteMemory {
public:
    void store(const Experience& e, RewardClass cls);
    std::vector<Experience> sample(const MemoryRule& rule, Rng& rng) const;
    // The best store restarts whenever a strictly better weighted delay shows up.
    void clear_best();

    std::size_t size(RewardClass cls) const { return stores_[static_cast<int>(cls)].size(); }
    const std::vector<Experience>& items(RewardClass cls) const { return stores_[static_cast<int>(cls)]; }
    bool keys_disjoint() const;

    static std::string dedup_key(const Experience& e);

private:
    void erase_at(int store, std::size_t pos);

    std::array<std::vector<Experience>, 3> stores_;
    std::unordered_map<std::string, std::pair<int, std::size_t>> index_;
};

// Single random-replacement store: exceeding `cap` triggers a uniformly
// random cut down to `keep`.
class BoundedMemory {
public:
    BoundedMemory(std::size_t cap = 4096, std::size_t keep = 2048) : cap_(cap), keep_(keep) {}

    void store(Experience e, Rng& rng);
    std::vector<Experience> sample(std::size_t count, Rng& rng) const;
    void clear() { items_.clear(); }
    std::size_t size() const { return items_.size(); }
    const std::vector<Experience>& items() const { return items_; }

private:
    std::size_t cap_, keep_;
    std::vector<Experience> items_;
};

// Shared quota arithmetic: wants per store, shortfall redistributed to the
// remaining stores proportionally to their quotas (largest remainder, then
// store order).
std::array<std::size_t, 3> distribute_quotas(const std::array<std::size_t, 3>& want,
                                             const std::array<std::size_t, 3>& avail);

// Terminal-class reward editing. Deadlock episodes only touch (and only
// keep) the experiences of deadlocked trains; best episodes reward the taken
// action and penalize the other allowed ones.
std::vector<Experience> assign_terminal_rewards(std::vector<Experience> episode_experiences, RewardClass cls,
                                                const std::set<std::string>& deadlocked_trains);

// Per-step target: r when terminal, else r plus the discounted best next q
// over the allowed actions.
double build_q_target(double reward, bool terminal, double gamma, const QAgent& model,
                      const std::vector<double>& next_state, const ActionFlags& next_mask);

struct HoldRecord {
    double hold_time = 0.0;
    double weight = 1.0;                     // the held train's priority weight
    double cumulative_weighted_delay = 0.0;  // network-wide, when the hold was taken
};

// A hold's reward is settled when the train moves or is re-held: the delay
// it accrued in between plus the backlog at the hold, negated and scaled.
double deferred_hold_reward(const HoldRecord& record, double resume_time);

double step_reward(double cumulative_weighted_delay, double produced_weighted_delay);

std::string memory_snapshot_csv(const TripartiteMemory& memory);

}  // namespace raildq
