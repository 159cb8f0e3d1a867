#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "raildq/simcore.hpp"

// Crossing analysis between opposing trains. The line is viewed as a chain
// of cells (parallel groups or lone resources). Two opposing trains that
// must both fully traverse the corridor of cells between them can only pass
// where a run of multi-branch cells lets one of them wait clear of the other
// (or where one of them finishes and leaves the line). When no such meet
// exists for some opposing set, the configuration can never complete.

namespace raildq {

namespace {

struct TrainPos {
    const Train* t = nullptr;
    std::string head;
};

class DeadlockAnalyzer {
public:
    DeadlockAnalyzer(const SimState& sim, std::map<std::string, std::string> head_override)
        : sim_(sim), net_(sim.network()) {
        for (const Train& t : sim.trains()) {
            if (t.arrived) continue;
            TrainPos p;
            p.t = &t;
            auto it = head_override.find(t.id);
            p.head = it != head_override.end() ? it->second : t.head();
            trains_.push_back(p);
        }
    }

    DeadlockReport analyze() const {
        DeadlockReport report;
        for (std::size_t i = 0; i < trains_.size(); ++i) {
            for (std::size_t j = i + 1; j < trains_.size(); ++j) {
                const TrainPos& a = trains_[i];
                const TrainPos& b = trains_[j];
                if (a.t->direction == b.t->direction) continue;
                if (pair_doomed(a, b)) {
                    report.deadlock = true;
                    report.trains.insert(a.t->id);
                    report.trains.insert(b.t->id);
                }
            }
        }
        // One train against two opposing ones: individually crossable meets
        // can still be jointly infeasible when both opponents need the same
        // pocket of parallel resources.
        for (const TrainPos& solo : trains_) {
            std::vector<const TrainPos*> duo;
            for (const TrainPos& other : trains_)
                if (other.t->direction != solo.t->direction) duo.push_back(&other);
            if (duo.size() < 2) continue;
            for (std::size_t i = 0; i < duo.size(); ++i) {
                for (std::size_t j = i + 1; j < duo.size(); ++j) {
                    if (joint_doomed(solo, *duo[i], *duo[j])) {
                        report.deadlock = true;
                        report.trains.insert(solo.t->id);
                        report.trains.insert(duo[i]->t->id);
                        report.trains.insert(duo[j]->t->id);
                    }
                }
            }
        }
        return report;
    }

private:
    std::string cell_of(const std::string& res) const {
        const Resource& r = net_.resource(res);
        return r.parallel_group.empty() ? res : r.parallel_group;
    }

    std::vector<std::string> cell_members(const std::string& cell) const {
        if (net_.has_resource(cell)) {
            const Resource& r = net_.resource(cell);
            if (r.parallel_group.empty()) return {cell};
        }
        // cell is a group id: collect members in document order
        std::vector<std::string> out;
        for (const Resource& r : net_.resources())
            if (r.parallel_group == cell) out.push_back(r.id);
        return out;
    }

    std::vector<std::string> next_cells(const std::string& cell, Direction d) const {
        std::vector<std::string> out;
        for (const std::string& m : cell_members(cell)) {
            for (const std::string& s : net_.successors(m, d)) {
                std::string c = cell_of(s);
                if (c == cell) continue;
                if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
            }
        }
        return out;
    }

    // Chain of cells from `from` (inclusive) to `to` (inclusive) along d.
    // Empty result when `to` is not ahead on a unique path.
    std::vector<std::string> corridor(const std::string& from, Direction d, const std::string& to) const {
        std::vector<std::string> cells{from};
        if (from == to) return cells;
        std::string cur = from;
        for (std::size_t step = 0; step < net_.size(); ++step) {
            auto nxt = next_cells(cur, d);
            if (nxt.size() != 1) return {};
            cur = nxt.front();
            cells.push_back(cur);
            if (cur == to) return cells;
        }
        return {};
    }

    // Branches that can host one side of a meet.
    std::vector<double> usable_lengths(const std::string& cell) const {
        std::vector<double> lens;
        for (const std::string& m : cell_members(cell)) {
            const Resource& r = net_.resource(m);
            if (r.status.mode == ResourceStatus::Mode::Failed &&
                !std::isfinite(r.status.failed_until_s))
                continue;  // permanent outage never clears
            if (r.kind == ResourceKind::StationRoute && !r.parallel_group.empty() &&
                net_.route_exclusion(r.parallel_group))
                continue;  // siblings are disabled while one route is held
            lens.push_back(r.length_ft);
        }
        std::sort(lens.begin(), lens.end(), std::greater<double>());
        return lens;
    }

    struct Run {
        std::string first_cell;
        std::vector<std::vector<double>> cell_lengths;  // usable branch lengths per cell, desc
        double single_capacity = 0.0;                   // best lane while one branch stays open
    };

    std::vector<Run> runs_in(const std::vector<std::string>& cells) const {
        std::vector<Run> runs;
        Run cur;
        auto flush = [&]() {
            if (!cur.cell_lengths.empty()) runs.push_back(cur);
            cur = {};
        };
        for (const std::string& c : cells) {
            auto lens = usable_lengths(c);
            if (lens.size() >= 2) {
                if (cur.cell_lengths.empty()) cur.first_cell = c;
                cur.single_capacity += lens[0];
                cur.cell_lengths.push_back(lens);
            } else {
                flush();
            }
        }
        flush();
        return runs;
    }

    static bool single_fit(const Run& run, double length) { return run.single_capacity >= length; }

    // Two waiting trains inside one run: end-to-end along the lane, or side
    // by side where cells have a third branch.
    static bool duo_fit(const Run& run, double l1, double l2) {
        std::size_t n = run.cell_lengths.size();
        std::vector<double> prefix(n + 1, 0.0);
        for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + run.cell_lengths[i][0];
        for (std::size_t split = 0; split <= n; ++split) {
            double head = prefix[split], tail = prefix[n] - prefix[split];
            if ((head >= l1 && tail >= l2) || (head >= l2 && tail >= l1)) return true;
        }
        double second = 0.0;
        for (const auto& lens : run.cell_lengths)
            if (lens.size() >= 3) second += lens[1];
        return second >= std::min(l1, l2) && prefix[n] >= std::max(l1, l2);
    }

    struct PairMeets {
        bool conflict = false;           // both trains must fully cross the corridor
        bool waiver = false;             // one train ends inside a multi-branch end cell
        std::vector<Run> solo_runs;      // runs where the first train fits
        std::vector<Run> other_runs;     // runs where the second train fits
        bool feasible() const { return !conflict || waiver || !solo_runs.empty() || !other_runs.empty(); }
    };

    std::optional<PairMeets> pair_meets(const TrainPos& a, const TrainPos& b) const {
        std::vector<std::string> cells = corridor(cell_of(a.head), a.t->direction, cell_of(b.head));
        if (cells.empty()) return std::nullopt;  // not converging
        std::size_t L = cells.size() - 1;

        auto index_of_cell = [&](const std::string& cell) -> std::optional<std::size_t> {
            for (std::size_t i = 0; i < cells.size(); ++i)
                if (cells[i] == cell) return i;
            return std::nullopt;
        };
        auto dest_a = index_of_cell(cell_of(a.t->destination));
        auto dest_b = index_of_cell(cell_of(b.t->destination));

        PairMeets pm;
        // A destination strictly inside the corridor clears the line for the
        // opponent; same for B.
        if (dest_a && *dest_a < L) return pm;
        if (dest_b && *dest_b > 0) return pm;
        pm.conflict = true;

        if (dest_a && *dest_a == L && usable_lengths(cells[L]).size() >= 2) pm.waiver = true;
        if (dest_b && *dest_b == 0 && usable_lengths(cells[0]).size() >= 2) pm.waiver = true;

        for (const Run& run : runs_in(cells)) {
            if (single_fit(run, a.t->length_ft)) pm.solo_runs.push_back(run);
            if (single_fit(run, b.t->length_ft)) pm.other_runs.push_back(run);
        }
        return pm;
    }

    bool pair_doomed(const TrainPos& a, const TrainPos& b) const {
        auto pm = pair_meets(a, b);
        if (!pm) {
            // Walk from the other side before concluding they never face off.
            auto rev = pair_meets(b, a);
            return rev && !rev->feasible();
        }
        return !pm->feasible();
    }

    bool joint_doomed(const TrainPos& solo, const TrainPos& d1, const TrainPos& d2) const {
        auto p1 = pair_meets(solo, d1);
        if (!p1) p1 = pair_meets(d1, solo);
        auto p2 = pair_meets(solo, d2);
        if (!p2) p2 = pair_meets(d2, solo);
        if (!p1 || !p2) return false;            // some pair never meets
        if (!p1->feasible() || !p2->feasible()) return false;  // already reported pairwise
        if (!p1->conflict || !p2->conflict) return false;
        if (p1->waiver || p2->waiver) return false;
        if (!p1->solo_runs.empty() || !p2->solo_runs.empty()) return false;  // solo can park for a pass

        // Both opponents must park. Any combination of distinct runs works;
        // a shared run must hold both at once.
        for (const Run& r1 : p1->other_runs) {
            for (const Run& r2 : p2->other_runs) {
                if (r1.first_cell != r2.first_cell) return false;
                if (duo_fit(r1, d1.t->length_ft, d2.t->length_ft)) return false;
            }
        }
        return true;
    }

    const SimState& sim_;
    const Network& net_;
    std::vector<TrainPos> trains_;
};

}  // namespace

DeadlockReport SimState::detect_deadlock() const {
    DeadlockAnalyzer analyzer(*this, {});
    return analyzer.analyze();
}

bool SimState::move_would_deadlock(const std::string& train_id, const std::string& resource) const {
    DeadlockAnalyzer analyzer(*this, {{train_id, resource}});
    return analyzer.analyze().deadlock;
}

}  // namespace raildq
