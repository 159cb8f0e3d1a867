#include "raildq/replay.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <functional>
#include <sstream>

namespace raildq {

const char* to_string(RewardClass c) {
    switch (c) {
        case RewardClass::Deadlock: return "deadlock";
        case RewardClass::Normal: return "normal";
        case RewardClass::Best: return "best";
    }
    return "?";
}

MemoryRule memory_rule(int id) {
    switch (id) {
        case 11: return {11, 12, 12, 12};
        case 12: return {12, 13, 6, 13};
        case 13: return {13, 6, 6, 20};
        case 14: return {14, 16, 0, 16};
        case 15: return {15, 8, 0, 24};
    }
    throw ContractViolation("unknown memory rule " + std::to_string(id));
}

std::string TripartiteMemory::dedup_key(const Experience& e) {
    std::string key;
    key.reserve(e.state.size() * sizeof(double) + e.mask.size());
    for (double v : e.state) {
        char buf[sizeof(double)];
        std::memcpy(buf, &v, sizeof(double));
        key.append(buf, sizeof(double));
    }
    for (bool b : e.mask) key.push_back(b ? '\1' : '\0');
    return key;
}

void TripartiteMemory::erase_at(int store, std::size_t pos) {
    auto& vec = stores_[store];
    index_.erase(dedup_key(vec[pos]));
    if (pos + 1 != vec.size()) {
        vec[pos] = std::move(vec.back());
        index_[dedup_key(vec[pos])] = {store, pos};
    }
    vec.pop_back();
}

void TripartiteMemory::store(const Experience& e, RewardClass cls) {
    int rank = static_cast<int>(cls);
    std::string key = dedup_key(e);
    auto it = index_.find(key);
    if (it != index_.end()) {
        auto [cur_store, cur_pos] = it->second;
        if (cur_store > rank) return;  // already held with a higher reward
        if (cur_store == rank) {
            stores_[cur_store][cur_pos] = e;  // refresh in place
            return;
        }
        erase_at(cur_store, cur_pos);
    }
    stores_[rank].push_back(e);
    index_[key] = {rank, stores_[rank].size() - 1};
}

std::array<std::size_t, 3> distribute_quotas(const std::array<std::size_t, 3>& want,
                                             const std::array<std::size_t, 3>& avail) {
    std::array<std::size_t, 3> take{};
    std::size_t shortfall = 0;
    for (int i = 0; i < 3; ++i) {
        take[i] = std::min(want[i], avail[i]);
        shortfall += want[i] - take[i];
    }
    while (shortfall > 0) {
        std::array<std::size_t, 3> spare{};
        double weight_sum = 0.0;
        for (int i = 0; i < 3; ++i) {
            spare[i] = avail[i] - take[i];
            if (spare[i] > 0) weight_sum += static_cast<double>(want[i]);
        }
        bool any_spare = spare[0] + spare[1] + spare[2] > 0;
        if (!any_spare) break;

        std::array<std::size_t, 3> extra{};
        std::size_t assigned = 0;
        if (weight_sum > 0.0) {
            std::array<double, 3> frac{};
            for (int i = 0; i < 3; ++i) {
                if (spare[i] == 0) continue;
                double share = static_cast<double>(shortfall) * static_cast<double>(want[i]) / weight_sum;
                extra[i] = std::min(spare[i], static_cast<std::size_t>(share));
                frac[i] = share - std::floor(share);
                assigned += extra[i];
            }
            // Largest remainder, then store order, for the leftover units.
            while (assigned < shortfall) {
                int pick = -1;
                for (int i = 0; i < 3; ++i) {
                    if (extra[i] >= spare[i]) continue;
                    if (pick < 0 || frac[i] > frac[pick]) pick = i;
                }
                if (pick < 0) break;
                ++extra[pick];
                frac[pick] = -1.0;
                ++assigned;
            }
        } else {
            // All remaining quotas are zero; fall back to store order.
            for (int i = 0; i < 3 && assigned < shortfall; ++i) {
                std::size_t grab = std::min(spare[i], shortfall - assigned);
                extra[i] = grab;
                assigned += grab;
            }
        }
        if (assigned == 0) break;
        for (int i = 0; i < 3; ++i) take[i] += extra[i];
        shortfall -= assigned;
    }
    return take;
}

std::vector<Experience> TripartiteMemory::sample(const MemoryRule& rule, Rng& rng) const {
    std::array<std::size_t, 3> want{static_cast<std::size_t>(rule.deadlock_quota),
                                    static_cast<std::size_t>(rule.normal_quota),
                                    static_cast<std::size_t>(rule.best_quota)};
    std::array<std::size_t, 3> avail{stores_[0].size(), stores_[1].size(), stores_[2].size()};
    std::array<std::size_t, 3> take = distribute_quotas(want, avail);

    std::vector<Experience> batch;
    batch.reserve(take[0] + take[1] + take[2]);
    for (int s = 0; s < 3; ++s) {
        for (std::size_t idx : sample_without_replacement(stores_[s].size(), take[s], rng))
            batch.push_back(stores_[s][idx]);
    }
    return batch;
}

void TripartiteMemory::clear_best() {
    for (const Experience& e : stores_[static_cast<int>(RewardClass::Best)]) index_.erase(dedup_key(e));
    stores_[static_cast<int>(RewardClass::Best)].clear();
}

bool TripartiteMemory::keys_disjoint() const {
    std::size_t total = stores_[0].size() + stores_[1].size() + stores_[2].size();
    if (index_.size() != total) return false;
    for (int s = 0; s < 3; ++s) {
        for (std::size_t i = 0; i < stores_[s].size(); ++i) {
            auto it = index_.find(dedup_key(stores_[s][i]));
            if (it == index_.end() || it->second != std::make_pair(s, i)) return false;
        }
    }
    return true;
}

void BoundedMemory::store(Experience e, Rng& rng) {
    items_.push_back(std::move(e));
    if (items_.size() > cap_) {
        auto keep_idx = sample_without_replacement(items_.size(), keep_, rng);
        std::sort(keep_idx.begin(), keep_idx.end());
        std::vector<Experience> kept;
        kept.reserve(keep_);
        for (std::size_t i : keep_idx) kept.push_back(std::move(items_[i]));
        items_ = std::move(kept);
    }
}

std::vector<Experience> BoundedMemory::sample(std::size_t count, Rng& rng) const {
    std::vector<Experience> out;
    for (std::size_t idx : sample_without_replacement(items_.size(), count, rng)) out.push_back(items_[idx]);
    return out;
}

std::vector<Experience> assign_terminal_rewards(std::vector<Experience> episode_experiences, RewardClass cls,
                                                const std::set<std::string>& deadlocked_trains) {
    std::vector<Experience> kept;
    kept.reserve(episode_experiences.size());
    for (Experience& e : episode_experiences) {
        std::size_t a = static_cast<std::size_t>(e.action_taken);
        switch (cls) {
            case RewardClass::Deadlock:
                if (!deadlocked_trains.count(e.train)) continue;  // untouched and not stored
                e.y_target[a] = -3.0;
                break;
            case RewardClass::Normal:
                e.y_target[a] = -1.0;
                break;
            case RewardClass::Best:
                e.y_target[a] = 1.0;
                for (std::size_t o = 0; o < kActionCount; ++o)
                    if (o != a && e.mask[o]) e.y_target[o] = -1.0;
                break;
        }
        kept.push_back(std::move(e));
    }
    return kept;
}

double build_q_target(double reward, bool terminal, double gamma, const QAgent& model,
                      const std::vector<double>& next_state, const ActionFlags& next_mask) {
    if (terminal) return reward;
    QVector q = model.q_values(next_state);
    bool any = false;
    double best = 0.0;
    for (std::size_t a = 0; a < kActionCount; ++a) {
        if (!next_mask[a]) continue;
        if (!any || q[a] > best) best = q[a];
        any = true;
    }
    if (!any)
        for (std::size_t a = 0; a < kActionCount; ++a) best = std::max(best, q[a]);
    return reward + gamma * best;
}

double deferred_hold_reward(const HoldRecord& record, double resume_time) {
    double accrued = record.weight * (resume_time - record.hold_time);
    return -(accrued + record.cumulative_weighted_delay) / kRewardScale;
}

double step_reward(double cumulative_weighted_delay, double produced_weighted_delay) {
    return -(cumulative_weighted_delay + produced_weighted_delay) / kRewardScale;
}

std::string memory_snapshot_csv(const TripartiteMemory& memory) {
    std::ostringstream os;
    os << "store,episode,train,action,y0,y1,y2,y3,y4,key_hash\n";
    for (RewardClass cls : {RewardClass::Deadlock, RewardClass::Normal, RewardClass::Best}) {
        for (const Experience& e : memory.items(cls)) {
            os << to_string(cls) << ',' << e.episode << ',' << e.train << ',' << e.action_taken;
            for (double y : e.y_target) os << ',' << format_double(y);
            os << ',' << std::hash<std::string>{}(TripartiteMemory::dedup_key(e)) << '\n';
        }
    }
    return os.str();
}

}  // namespace raildq
