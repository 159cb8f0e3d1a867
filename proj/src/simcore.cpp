#include "raildq/simcore.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "raildq/encoding.hpp"

namespace raildq {

using nlohmann::json;

double weight_for_priority(int priority) {
    static constexpr double kWeights[5] = {20.0, 10.0, 5.0, 2.0, 1.0};
    if (priority < 1 || priority > 5) throw ContractViolation("priority out of range");
    return kWeights[priority - 1];
}

double class_speed_ftps(double train_length_ft) {
    if (train_length_ft <= 4000.0) return 80.0;
    if (train_length_ft <= 8000.0) return 60.0;
    return 40.0;
}

const char* to_string(TerminalClass c) {
    switch (c) {
        case TerminalClass::AllArrived: return "all_arrived";
        case TerminalClass::Deadlock: return "deadlock";
        case TerminalClass::HorizonExceeded: return "horizon_exceeded";
    }
    return "?";
}

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SchemaError("unknown key '" + it.key() + "' in " + where, "", it.key());
    }
}

}  // namespace

Instance load_instance(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("instance document is not valid JSON: ") + e.what());
    }
    reject_unknown_keys(doc, {"trains", "start_time_s", "running_times"}, "instance document");
    if (!doc.contains("trains")) throw SchemaError("missing 'trains'", "", "trains");

    Instance inst;
    inst.start_time_s = doc.value("start_time_s", 0.0);
    for (const json& jt : doc["trains"]) {
        reject_unknown_keys(jt, {"id", "priority", "length_ft", "direction", "origin", "destination", "schedule"},
                            "train");
        TrainSpec t;
        t.id = jt.at("id").get<std::string>();
        t.priority = jt.at("priority").get<int>();
        if (t.priority < 1 || t.priority > 5) throw SchemaError("priority must be in 1..5", t.id, "priority");
        t.length_ft = jt.at("length_ft").get<double>();
        if (!(t.length_ft > 0.0)) throw SchemaError("length_ft must be positive", t.id, "length_ft");
        t.direction = direction_from_string(jt.at("direction").get<std::string>());
        t.origin = jt.at("origin").get<std::string>();
        t.destination = jt.at("destination").get<std::string>();
        for (const json& js : jt.at("schedule")) {
            reject_unknown_keys(js, {"resource", "time_s"}, "schedule entry");
            t.schedule.push_back({js.at("resource").get<std::string>(), js.at("time_s").get<double>()});
        }
        inst.trains.push_back(std::move(t));
    }
    if (doc.contains("running_times")) {
        for (const json& jr : doc["running_times"]) {
            reject_unknown_keys(jr, {"train", "resource", "seconds"}, "running time entry");
            inst.running_times.set(jr.at("train").get<std::string>(), jr.at("resource").get<std::string>(),
                                   jr.at("seconds").get<double>());
        }
    }
    return inst;
}

std::string serialize_instance(const Instance& inst) {
    json doc;
    doc["start_time_s"] = inst.start_time_s;
    doc["trains"] = json::array();
    for (const TrainSpec& t : inst.trains) {
        json jt{{"id", t.id},       {"priority", t.priority},
                {"length_ft", t.length_ft}, {"direction", to_string(t.direction)},
                {"origin", t.origin},       {"destination", t.destination}};
        jt["schedule"] = json::array();
        for (const ScheduleEntry& s : t.schedule)
            jt["schedule"].push_back(json{{"resource", s.resource}, {"time_s", s.time_s}});
        doc["trains"].push_back(std::move(jt));
    }
    doc["running_times"] = json::array();
    for (const auto& [train, resource, seconds] : inst.running_times.entries_sorted())
        doc["running_times"].push_back(json{{"train", train}, {"resource", resource}, {"seconds", seconds}});
    return doc.dump(2);
}

RunningTimeTable complete_running_times(const Network& net, const Instance& inst) {
    RunningTimeTable rt;
    for (const TrainSpec& t : inst.trains) {
        double speed = class_speed_ftps(t.length_ft);
        for (const Resource& r : net.resources()) {
            if (inst.running_times.has(t.id, r.id))
                rt.set(t.id, r.id, inst.running_times.seconds(t.id, r.id));
            else
                rt.set(t.id, r.id, r.length_ft / speed);
        }
    }
    return rt;
}

SimState::SimState(const Network& net, const Instance& inst, LocalWindow window)
    : net_(&net), rt_(complete_running_times(net, inst)), window_(window), start_time_(inst.start_time_s) {
    clock_ = start_time_;
    double max_len = 0.0;
    for (const TrainSpec& spec : inst.trains) {
        if (train_index_.count(spec.id)) throw SchemaError("duplicate train id", spec.id);
        if (!net.has_resource(spec.origin)) throw SchemaError("unknown origin resource", spec.id, "origin");
        if (!net.has_resource(spec.destination))
            throw SchemaError("unknown destination resource", spec.id, "destination");

        Train t;
        t.id = spec.id;
        t.priority = spec.priority;
        t.length_ft = spec.length_ft;
        t.direction = spec.direction;
        t.origin = spec.origin;
        t.destination = spec.destination;
        for (const ScheduleEntry& s : spec.schedule) {
            if (!net.has_resource(s.resource)) throw SchemaError("unknown schedule resource", spec.id, "schedule");
            t.scheduled_exit[s.resource] = s.time_s;
        }
        auto dit = t.scheduled_exit.find(spec.destination);
        if (dit == t.scheduled_exit.end())
            throw SchemaError("schedule lacks destination exit time", spec.id, "schedule");
        t.scheduled_destination_exit = dit->second;

        // Long trains occupy predecessors of the origin until the whole
        // length is covered (or the line ends behind them).
        t.occupation.push_back(spec.origin);
        double covered = net.resource(spec.origin).length_ft;
        std::string tail = spec.origin;
        while (covered < t.length_ft) {
            const auto& preds = net.successors(tail, reversed(t.direction));
            if (preds.empty()) break;
            std::string prev = best_next(net, rt_, t.id, tail, reversed(t.direction));
            t.occupation.push_back(prev);
            covered += net.resource(prev).length_ft;
            tail = prev;
        }

        t.next_event_time = start_time_ + rt_.seconds(t.id, spec.origin);
        t.moving = true;
        max_len = std::max(max_len, t.length_ft);
        train_index_[t.id] = trains_.size();
        trains_.push_back(std::move(t));
    }
    horizon_s_ = max_len > 8000.0 ? 14400.0 : 7200.0;

    // Initial occupations must be pairwise disjoint.
    std::map<std::string, std::string> seen;
    for (const Train& t : trains_) {
        for (const std::string& r : t.occupation) {
            auto [it, fresh] = seen.emplace(r, t.id);
            if (!fresh)
                throw SchemaError("placement conflict on resource " + r + " between " + it->second + " and " + t.id,
                                  t.id, "origin");
        }
    }
}

std::size_t SimState::train_index(const std::string& id) const {
    auto it = train_index_.find(id);
    if (it == train_index_.end()) throw SchemaError("unknown train", id);
    return it->second;
}

std::vector<const Train*> SimState::occupants(const std::string& resource) const {
    std::vector<const Train*> out;
    for (const Train& t : trains_) {
        if (t.arrived) continue;
        if (std::find(t.occupation.begin(), t.occupation.end(), resource) != t.occupation.end()) out.push_back(&t);
    }
    return out;
}

bool SimState::occupied_by_other(const std::string& resource, const std::string& train_id) const {
    for (const Train* t : occupants(resource))
        if (t->id != train_id) return true;
    return false;
}

bool SimState::enterable(const std::string& train_id, const std::string& resource, EnterOptions opts) const {
    const Train& t = train(train_id);
    const Resource& r = net_->resource(resource);

    if (!opts.ignore_status) {
        if (r.status.mode == ResourceStatus::Mode::Failed) {
            if (clock_ >= r.status.failed_from_s && clock_ < r.status.failed_until_s) return false;
        } else if (r.status.mode == ResourceStatus::Mode::BlockedUntilTrain &&
                   r.status.blocking_train != train_id) {
            bool lifted = true;
            if (train_index_.count(r.status.blocking_train)) {
                const Train& blocker = train(r.status.blocking_train);
                lifted = blocker.arrived ||
                         std::find(blocker.crossed.begin(), blocker.crossed.end(), resource) != blocker.crossed.end();
            }
            if (!lifted) return false;
        }
    }

    auto occ = occupants(resource);
    switch (r.kind) {
        case ResourceKind::StoppingPoint:
            if (!occ.empty()) return false;
            break;
        case ResourceKind::StationRoute: {
            if (!occ.empty()) return false;
            if (!r.parallel_group.empty() && net_->route_exclusion(r.parallel_group)) {
                for (const std::string& sibling : net_->group_members(resource)) {
                    if (sibling == resource) continue;
                    if (!occupants(sibling).empty()) return false;
                }
            }
            break;
        }
        case ResourceKind::Track: {
            if (!occ.empty()) {
                for (const Train* o : occ)
                    if (o->direction != t.direction) return false;
                if (t.length_ft > r.length_ft) return false;  // trailing train must fit entirely
            }
            if (!opts.ignore_headway) {
                auto it = headway_ledger_.find({resource, static_cast<int>(t.direction)});
                if (it != headway_ledger_.end() && clock_ < it->second + net_->headway_s()) return false;
            }
            break;
        }
    }
    return true;
}

SimState::Candidates SimState::candidates(const std::string& train_id) const {
    const Train& t = train(train_id);
    Candidates c;
    if (!net_->successors(t.head(), t.direction).empty()) {
        c.best = best_next(*net_, rt_, t.id, t.head(), t.direction);
        c.reachable = reachable_next(*net_, rt_, t.id, t.head(), t.direction,
                                     static_cast<std::size_t>(window_.reachable));
    }
    return c;
}

ActionMask SimState::action_mask(const std::string& train_id) const {
    ActionMask m;
    Candidates c = candidates(train_id);
    if (!c.best.empty()) m.allowed[1] = enterable(train_id, c.best);
    for (std::size_t k = 0; k < c.reachable.size() && k < 3; ++k)
        m.allowed[2 + k] = enterable(train_id, c.reachable[k]);
    return m;
}

bool SimState::all_window_free(const Train& t) const {
    // Forward: the chain of best resources the encoder sees.
    std::string cur = t.head();
    for (int i = 0; i < window_.forward; ++i) {
        if (net_->successors(cur, t.direction).empty()) break;
        std::string nxt = best_next(*net_, rt_, t.id, cur, t.direction);
        if (occupied_by_other(nxt, t.id)) return false;
        cur = nxt;
    }
    // Backward: the resources the train recently crossed.
    int lb = window_.backward;
    for (auto it = t.crossed.rbegin(); it != t.crossed.rend() && lb > 0; ++it, --lb)
        if (occupied_by_other(*it, t.id)) return false;
    return true;
}

void SimState::record_analysis(Train& t) {
    t.analysis_state = encode_local(*this, t.id, window_);
}

void SimState::log_step(const Train& t, int action, const std::string& resource, bool auto_applied, bool forced) {
    step_log_.push_back({step_counter_++, clock_, t.id, action, resource, auto_applied, forced});
}

void SimState::settle(Train& t) {
    t.moving = false;
    while (t.occupation.size() > 1) {
        double without_tail = 0.0;
        for (std::size_t i = 0; i + 1 < t.occupation.size(); ++i)
            without_tail += net_->resource(t.occupation[i]).length_ft;
        if (without_tail >= t.length_ft)
            t.occupation.pop_back();
        else
            break;
    }
    bool at_destination = t.head() == t.destination;
    if (!at_destination) {
        const Resource& head = net_->resource(t.head());
        const Resource& dest = net_->resource(t.destination);
        at_destination = !head.parallel_group.empty() && head.parallel_group == dest.parallel_group;
    }
    if (at_destination) {
        t.crossed.push_back(t.head());
        t.arrived = true;
        t.exit_time = clock_;
        t.occupation.clear();
    }
}

NextEvent SimState::next_decision() {
    if (finished_) throw ContractViolation("next_decision on finished episode");
    if (!pending_decision_.empty()) throw ContractViolation("apply_action is owed for " + pending_decision_);
    for (;;) {
        Train* next = nullptr;
        for (Train& t : trains_) {
            if (t.arrived) continue;
            if (!next || t.next_event_time < next->next_event_time ||
                (t.next_event_time == next->next_event_time && t.id < next->id))
                next = &t;
        }
        if (!next) {
            finished_ = true;
            return Terminal{make_outcome(TerminalClass::AllArrived)};
        }
        if (next->next_event_time > start_time_ + horizon_s_) {
            finished_ = true;
            return Terminal{make_outcome(TerminalClass::HorizonExceeded)};
        }
        clock_ = next->next_event_time;
        Train& t = *next;
        settle(t);
        if (t.arrived) continue;

        record_analysis(t);
        DeadlockReport dl = detect_deadlock();
        if (dl.deadlock) {
            finished_ = true;
            return Terminal{make_outcome(TerminalClass::Deadlock, dl.trains)};
        }

        Candidates c = candidates(t.id);
        bool at_control_point = net_->is_control_point(t.head());
        if (!at_control_point) {
            if (!c.best.empty() && enterable(t.id, c.best, {.ignore_headway = true})) {
                apply_go(t, 1, c.best, false, true);
                return AutoApplied{t.id, 1, c.best};
            }
            apply_hold(t, true);
            return AutoApplied{t.id, 0, t.head()};
        }

        if (!c.best.empty() && all_window_free(t) && enterable(t.id, c.best, {.ignore_headway = true})) {
            apply_go(t, 1, c.best, false, true);
            return AutoApplied{t.id, 1, c.best};
        }
        ActionMask mask = action_mask(t.id);
        bool any_go = mask.allowed[1] || mask.allowed[2] || mask.allowed[3] || mask.allowed[4];
        if (!any_go) {
            apply_hold(t, true);
            return AutoApplied{t.id, 0, t.head()};
        }
        pending_decision_ = t.id;
        return DecisionRequest{t.id, mask};
    }
}

double SimState::apply_action(const std::string& train_id, int action) {
    if (!pending_decision_.empty() && pending_decision_ != train_id)
        throw ContractViolation("apply_action for " + train_id + " while " + pending_decision_ + " is pending");
    if (action < 0 || action > 4) throw ContractViolation("action out of range");
    Train& t = trains_[train_index(train_id)];
    if (t.analysis_state.empty()) record_analysis(t);
    ActionMask mask = action_mask(train_id);
    if (!mask.allowed[static_cast<std::size_t>(action)])
        throw ContractViolation("action " + std::to_string(action) + " is masked out for " + train_id);
    bool forced = !pending_decision_.empty() && forced_move_check(train_id) && action != 0;
    pending_decision_.clear();
    if (action == 0) {
        apply_hold(t, false);
    } else {
        Candidates c = candidates(train_id);
        std::string res = action == 1 ? c.best : c.reachable[static_cast<std::size_t>(action - 2)];
        apply_go(t, action, res, forced, false);
    }
    return t.next_event_time - clock_;
}

bool SimState::forced_move_check(const std::string& train_id) const {
    const Train& t = train(train_id);
    if (t.hold_streak.count != 3) return false;
    if (t.hold_streak.resource != t.head()) return false;
    if (t.hold_streak.fingerprint != t.analysis_state) return false;
    ActionMask m = action_mask(train_id);
    return m.allowed[1] || m.allowed[2] || m.allowed[3] || m.allowed[4];
}

int SimState::forced_action(const std::string& train_id) const {
    ActionMask m = action_mask(train_id);
    for (int a = 1; a <= 4; ++a)
        if (m.allowed[static_cast<std::size_t>(a)]) return a;
    throw ContractViolation("no go action available for " + train_id);
}

void SimState::apply_go(Train& t, int action, const std::string& resource, bool forced, bool auto_applied) {
    double entry = clock_;
    const Resource& r = net_->resource(resource);
    if (r.kind == ResourceKind::Track) {
        auto key = std::make_pair(resource, static_cast<int>(t.direction));
        auto it = headway_ledger_.find(key);
        if (it != headway_ledger_.end()) entry = std::max(entry, it->second + net_->headway_s());
        headway_ledger_[key] = entry;
    }
    t.crossed.push_back(t.head());
    t.occupation.push_front(resource);
    t.next_event_time = entry + rt_.seconds(t.id, resource);
    t.moving = true;
    t.hold_streak = {};
    t.last_hold_time = std::numeric_limits<double>::quiet_NaN();
    log_step(t, action, resource, auto_applied, forced);
    t.past_states.push_back(t.analysis_state);
    if (t.past_states.size() > 32) t.past_states.pop_front();
}

void SimState::apply_hold(Train& t, bool auto_applied) {
    if (t.hold_streak.count > 0 && t.hold_streak.resource == t.head() &&
        t.hold_streak.fingerprint == t.analysis_state) {
        if (t.hold_streak.count < 3) ++t.hold_streak.count;
    } else {
        t.hold_streak = {t.head(), t.analysis_state, 1};
    }
    if (std::isnan(t.last_hold_time)) t.last_hold_time = clock_;
    t.next_event_time = hold_wakeup_time(t);
    t.moving = false;
    log_step(t, 0, t.head(), auto_applied, false);
    t.past_states.push_back(t.analysis_state);
    if (t.past_states.size() > 32) t.past_states.pop_front();
}

double SimState::hold_wakeup_time(const Train& t) const {
    double cand = std::numeric_limits<double>::infinity();
    bool known = false;
    Candidates c = candidates(t.id);
    if (!c.best.empty()) {
        const Resource& r = net_->resource(c.best);
        if (r.status.mode == ResourceStatus::Mode::Failed && clock_ >= r.status.failed_from_s &&
            clock_ < r.status.failed_until_s) {
            cand = r.status.failed_until_s;
            known = true;
        } else if (r.kind == ResourceKind::Track && enterable(t.id, c.best, {.ignore_headway = true})) {
            auto it = headway_ledger_.find({c.best, static_cast<int>(t.direction)});
            if (it != headway_ledger_.end() && clock_ < it->second + net_->headway_s()) {
                cand = it->second + net_->headway_s();
                known = true;
            }
        }
        if (!known) {
            // A mid-traversal occupant exposes its scheduled exit.
            for (const Train* o : occupants(c.best)) {
                if (o->id != t.id && o->moving && o->head() == c.best) {
                    cand = std::min(cand, o->next_event_time);
                    known = true;
                }
            }
        }
    }
    if (!known) {
        double other = std::numeric_limits<double>::infinity();
        for (const Train& o : trains_)
            if (!o.arrived && o.id != t.id) other = std::min(other, o.next_event_time);
        cand = (std::isfinite(other) ? other : clock_) + kEpsilonTime;
    }
    return std::max(cand, clock_ + kEpsilonTime);
}

double SimState::remaining_free_running(const Train& t, double at_time) const {
    if (t.arrived) return 0.0;
    double rem = 0.0;
    std::string cur = t.head();
    if (t.moving && at_time <= t.next_event_time) rem += t.next_event_time - at_time;

    auto is_destination = [&](const std::string& res) {
        if (res == t.destination) return true;
        const Resource& a = net_->resource(res);
        const Resource& b = net_->resource(t.destination);
        return !a.parallel_group.empty() && a.parallel_group == b.parallel_group;
    };
    if (is_destination(cur)) return rem;
    for (std::size_t step = 0; step < net_->size(); ++step) {
        if (net_->successors(cur, t.direction).empty()) break;
        cur = best_next(*net_, rt_, t.id, cur, t.direction);
        rem += rt_.seconds(t.id, cur);
        if (is_destination(cur)) break;
    }
    return rem;
}

double SimState::delay_so_far(const Train& t, double at_time) const {
    if (t.arrived) return std::max(0.0, t.exit_time - t.scheduled_destination_exit);
    double projected_exit = at_time + remaining_free_running(t, at_time);
    return std::max(0.0, projected_exit - t.scheduled_destination_exit);
}

double SimState::weighted_delay_at(double t) const {
    double total = 0.0;
    for (const Train& tr : trains_) total += weight_for_priority(tr.priority) * delay_so_far(tr, t);
    return total;
}

EpisodeOutcome SimState::make_outcome(TerminalClass cls, std::set<std::string> deadlocked) const {
    EpisodeOutcome o;
    o.terminal_class = cls;
    double eval_t = cls == TerminalClass::HorizonExceeded ? start_time_ + horizon_s_ : clock_;
    for (const Train& t : trains_) o.per_train_delay[t.id] = delay_so_far(t, eval_t);
    if (cls == TerminalClass::Deadlock) {
        o.weighted_delay = std::numeric_limits<double>::infinity();
    } else {
        double total = 0.0;
        for (const Train& t : trains_) total += weight_for_priority(t.priority) * o.per_train_delay[t.id];
        o.weighted_delay = total;
    }
    o.deadlocked_trains = std::move(deadlocked);
    o.step_log = step_log_;
    return o;
}

double weighted_delay(const EpisodeOutcome& outcome) { return outcome.weighted_delay; }

std::string step_log_csv(const std::vector<StepRecord>& log, int episode) {
    std::ostringstream os;
    os << "episode,step,clock_s,train,action,resource\n";
    for (const StepRecord& s : log)
        os << episode << ',' << s.step << ',' << format_double(s.clock_s) << ',' << s.train << ',' << s.action << ','
           << s.resource << '\n';
    return os.str();
}

}  // namespace raildq
