#include "raildq/encoding.hpp"

#include <algorithm>
#include <sstream>

namespace raildq {

namespace {

double length_class(double length_ft) {
    if (length_ft <= 4000.0) return 1.0;
    if (length_ft <= 8000.0) return 2.0;
    return 3.0;
}

// Most important occupant: lowest priority number, then instance order.
const Train* primary_occupant(const std::vector<const Train*>& occ) {
    const Train* best = nullptr;
    for (const Train* t : occ)
        if (!best || t->priority < best->priority) best = t;
    return best;
}

void append_slot(std::vector<double>& out, const SimState& sim, const Train& self,
                 const std::string& resource) {
    const Network& net = sim.network();
    const Resource& r = net.resource(resource);

    double description;
    if (r.status.mode == ResourceStatus::Mode::Failed && sim.clock() >= r.status.failed_from_s &&
        sim.clock() < r.status.failed_until_s) {
        double remaining = r.status.failed_until_s - sim.clock();
        description = remaining < 900.0 ? 3.0 : remaining < 3600.0 ? 4.0 : 5.0;
    } else if (r.status.mode == ResourceStatus::Mode::BlockedUntilTrain) {
        description = 2.0;
    } else {
        description = r.kind == ResourceKind::Track ? 0.0 : 1.0;
    }

    std::vector<const Train*> others;
    for (const Train& t : sim.trains()) {
        if (t.arrived || t.id == self.id) continue;
        if (std::find(t.occupation.begin(), t.occupation.end(), resource) != t.occupation.end())
            others.push_back(&t);
    }
    const Train* occ = primary_occupant(others);

    out.push_back(description);
    out.push_back(static_cast<double>(others.size()));
    out.push_back(occ ? static_cast<double>(occ->priority) : 0.0);
    out.push_back(occ ? (occ->direction == self.direction ? 2.0 : 1.0) : 0.0);
    out.push_back(self.length_ft <= r.length_ft ? 1.0 : 0.0);
    out.push_back(static_cast<double>(parallel_count(net, resource)));
}

void append_absent(std::vector<double>& out) {
    for (int i = 0; i < kFeaturesPerSlot; ++i) out.push_back(kAbsentValue);
}

bool destination_equivalent(const Network& net, const Train& t, const std::string& res) {
    if (res == t.destination) return true;
    const Resource& a = net.resource(res);
    const Resource& b = net.resource(t.destination);
    return !a.parallel_group.empty() && a.parallel_group == b.parallel_group;
}

}  // namespace

std::vector<double> encode_local(const SimState& sim, const std::string& train_id, const LocalWindow& w) {
    const Train& t = sim.train(train_id);
    if (t.arrived) throw ContractViolation("encode_local on arrived train " + train_id);
    const Network& net = sim.network();

    std::vector<double> out;
    out.reserve(local_state_size(w));

    // Backward block: right-aligned so the nearest crossed resource sits last.
    int have = std::min<int>(w.backward, static_cast<int>(t.crossed.size()));
    for (int i = 0; i < w.backward - have; ++i) append_absent(out);
    for (int i = have; i > 0; --i) append_slot(out, sim, t, t.crossed[t.crossed.size() - i]);

    append_slot(out, sim, t, t.head());

    // Forward best chain; stops at the destination or the end of the line.
    std::string cur = t.head();
    int emitted = 0;
    for (int i = 0; i < w.forward; ++i) {
        if (net.successors(cur, t.direction).empty()) break;
        cur = best_next(net, sim.running_times(), t.id, cur, t.direction);
        append_slot(out, sim, t, cur);
        ++emitted;
        if (destination_equivalent(net, t, cur)) break;
    }
    for (int i = emitted; i < w.forward; ++i) append_absent(out);

    auto reach = reachable_next(net, sim.running_times(), t.id, t.head(), t.direction,
                                static_cast<std::size_t>(w.reachable));
    for (const std::string& r : reach) append_slot(out, sim, t, r);
    for (std::size_t i = reach.size(); i < static_cast<std::size_t>(w.reachable); ++i) append_absent(out);

    return out;
}

std::vector<double> encode_local_history(const SimState& sim, const std::string& train_id, const LocalWindow& w,
                                         int history_depth) {
    if (w.forward != sim.window().forward || w.backward != sim.window().backward ||
        w.reachable != sim.window().reachable)
        throw ContractViolation("history window must match the simulation's recording window");
    if (history_depth < 1) throw ContractViolation("history_depth must be >= 1");

    std::vector<double> current = encode_local(sim, train_id, w);
    std::size_t cols = current.size();
    std::vector<double> out;
    out.reserve(cols * static_cast<std::size_t>(history_depth));
    out.insert(out.end(), current.begin(), current.end());

    const Train& t = sim.train(train_id);
    std::vector<const std::vector<double>*> rows;
    for (auto it = t.past_states.rbegin(); it != t.past_states.rend(); ++it) {
        if (rows.size() + 1 >= static_cast<std::size_t>(history_depth)) break;
        if (*it == current) continue;
        bool dup = false;
        for (const auto* seen : rows)
            if (*seen == *it) { dup = true; break; }
        if (!dup) rows.push_back(&*it);
    }
    for (const auto* row : rows) out.insert(out.end(), row->begin(), row->end());
    for (std::size_t filled = 1 + rows.size(); filled < static_cast<std::size_t>(history_depth); ++filled)
        out.insert(out.end(), cols, kAbsentValue);
    return out;
}

const char* to_string(GlobalVariant v) {
    switch (v) {
        case GlobalVariant::S0: return "S0";
        case GlobalVariant::S1: return "S1";
        case GlobalVariant::S2: return "S2";
        case GlobalVariant::S3: return "S3";
        case GlobalVariant::S4: return "S4";
        case GlobalVariant::S5: return "S5";
    }
    return "?";
}

GlobalVariant global_variant_from_string(const std::string& s) {
    if (s == "S0") return GlobalVariant::S0;
    if (s == "S1") return GlobalVariant::S1;
    if (s == "S2") return GlobalVariant::S2;
    if (s == "S3") return GlobalVariant::S3;
    if (s == "S4") return GlobalVariant::S4;
    if (s == "S5") return GlobalVariant::S5;
    throw SchemaError("unknown state variant '" + s + "'");
}

std::size_t global_state_size(GlobalVariant variant, std::size_t resource_count, std::size_t train_count) {
    switch (variant) {
        case GlobalVariant::S0: return resource_count;
        case GlobalVariant::S1:
        case GlobalVariant::S2:
        case GlobalVariant::S3: return 3 * (resource_count + 1);
        case GlobalVariant::S4: return 4 * resource_count;
        case GlobalVariant::S5: return 3 * (resource_count + train_count);
    }
    return 0;
}

GlobalState encode_global(const SimState& sim, const std::string& deciding_train, GlobalVariant variant,
                          const GlobalEncodingOptions& opts) {
    const Network& net = sim.network();
    std::size_t n_res = net.size();
    std::size_t deciding_idx = sim.train_index(deciding_train);
    const Train& deciding = sim.trains()[deciding_idx];

    auto base_value = [&](const Train& t) {
        auto it = opts.base_values.find(t.id);
        if (it != opts.base_values.end()) return it->second;
        return 3.0 * static_cast<double>(sim.train_index(t.id) + 1);
    };

    // Per resource: the most important occupant, if any.
    std::vector<const Train*> column(n_res, nullptr);
    for (const Train& t : sim.trains()) {
        if (t.arrived) continue;
        for (const std::string& res : t.occupation) {
            std::size_t i = net.index_of(res);
            if (!column[i] || t.priority < column[i]->priority) column[i] = &t;
        }
    }

    GlobalState g;
    g.variant = variant;
    switch (variant) {
        case GlobalVariant::S0: {
            g.rows = 1;
            g.cols = n_res;
            g.values.assign(n_res, 0.0);
            for (std::size_t i = 0; i < n_res; ++i) {
                if (!column[i]) continue;
                double v = base_value(*column[i]);
                if (column[i]->id == deciding_train) v += 2.0;
                g.values[i] = v;
            }
            break;
        }
        case GlobalVariant::S1:
        case GlobalVariant::S2:
        case GlobalVariant::S3: {
            g.rows = 3;
            g.cols = n_res + 1;
            g.values.assign(g.rows * g.cols, 0.0);
            for (std::size_t i = 0; i < n_res; ++i) {
                const Train* t = column[i];
                if (!t) continue;
                g.values[0 * g.cols + i] = static_cast<double>(t->priority);
                g.values[1 * g.cols + i] = t->direction == Direction::LeftToRight ? 1.0 : 2.0;
                g.values[2 * g.cols + i] = length_class(t->length_ft);
            }
            double marker;
            if (variant == GlobalVariant::S1) {
                marker = base_value(deciding);
            } else {
                marker = static_cast<double>(net.index_of(deciding.head()) + 1);
                if (variant == GlobalVariant::S3) marker /= 10.0;
            }
            for (std::size_t r = 0; r < 3; ++r) g.values[r * g.cols + n_res] = marker;
            break;
        }
        case GlobalVariant::S4: {
            g.rows = 4;
            g.cols = n_res;
            g.values.assign(g.rows * g.cols, 0.0);
            for (std::size_t i = 0; i < n_res; ++i) {
                const Train* t = column[i];
                if (!t) continue;
                g.values[0 * g.cols + i] = static_cast<double>(t->priority);
                g.values[1 * g.cols + i] = t->direction == Direction::LeftToRight ? 1.0 : 2.0;
                g.values[2 * g.cols + i] = length_class(t->length_ft);
            }
            double marker = base_value(deciding);
            for (std::size_t i = 0; i < n_res; ++i) g.values[3 * g.cols + i] = marker;
            break;
        }
        case GlobalVariant::S5: {
            std::size_t n_trains =
                opts.max_trains > 0 ? static_cast<std::size_t>(opts.max_trains) : sim.trains().size();
            if (deciding_idx >= n_trains)
                throw ContractViolation("deciding train index exceeds the one-hot width");
            g.rows = 3;
            g.cols = n_res + n_trains;
            g.values.assign(g.rows * g.cols, 0.0);
            for (std::size_t i = 0; i < n_res; ++i) {
                const Train* t = column[i];
                if (!t) continue;
                g.values[0 * g.cols + i] = static_cast<double>(t->priority);
                g.values[1 * g.cols + i] = t->direction == Direction::LeftToRight ? 1.0 : 2.0;
                g.values[2 * g.cols + i] = length_class(t->length_ft);
            }
            for (std::size_t r = 0; r < 3; ++r) g.values[r * g.cols + n_res + deciding_idx] = 1.0;
            break;
        }
    }
    return g;
}

ActionMask build_action_mask(const SimState& sim, const std::string& train_id) {
    return sim.action_mask(train_id);
}

std::string encoding_csv_row(int episode, int step, const std::string& train, const std::string& variant,
                             const std::vector<double>& values) {
    std::ostringstream os;
    os << episode << ',' << step << ',' << train << ',' << variant;
    for (double v : values) os << ',' << format_double(v);
    os << '\n';
    return os.str();
}

}  // namespace raildq
