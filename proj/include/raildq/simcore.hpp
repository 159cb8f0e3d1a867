#pragma once

#include <array>
#include <cmath>
#include <deque>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "raildq/topology.hpp"

namespace raildq {

// Priority 1 is the most important class and carries the largest delay
// weight.
double weight_for_priority(int priority);

// Free-running fallback when an instance omits a (train, resource) pair:
// resource length divided by the class speed of the train.
double class_speed_ftps(double train_length_ft);

struct ScheduleEntry {
    std::string resource;
    double time_s = 0.0;  // scheduled exit time
};

struct TrainSpec {
    std::string id;
    int priority = 5;
    double length_ft = 0.0;
    Direction direction = Direction::LeftToRight;
    std::string origin;
    std::string destination;
    std::vector<ScheduleEntry> schedule;
};

struct Instance {
    std::vector<TrainSpec> trains;
    double start_time_s = 0.0;
    RunningTimeTable running_times;  // explicit entries from the document
};

Instance load_instance(const std::string& json_text);
std::string serialize_instance(const Instance& inst);

// Explicit entries plus length-class defaults for every (train, resource)
// pair, so lookups never miss during a simulation.
RunningTimeTable complete_running_times(const Network& net, const Instance& inst);

struct HoldStreak {
    std::string resource;
    std::vector<double> fingerprint;  // encoded local state at the held decisions
    int count = 0;                    // capped at 3
};

struct Train {
    std::string id;
    int priority = 5;
    double length_ft = 0.0;
    Direction direction = Direction::LeftToRight;
    std::string origin, destination;
    std::map<std::string, double> scheduled_exit;
    double scheduled_destination_exit = 0.0;

    std::deque<std::string> occupation;  // head first, contiguous
    std::vector<std::string> crossed;    // fully traversed resources, oldest first
    double next_event_time = 0.0;
    bool moving = false;  // traversing toward next_event_time
    bool arrived = false;
    double exit_time = std::numeric_limits<double>::quiet_NaN();
    HoldStreak hold_streak;
    double last_hold_time = std::numeric_limits<double>::quiet_NaN();

    // State the simulator computed when this train was last analyzed; feeds
    // the hold streak and the per-train state history.
    std::vector<double> analysis_state;
    std::deque<std::vector<double>> past_states;  // most recent last, bounded

    const std::string& head() const { return occupation.front(); }
};

enum class TerminalClass { AllArrived, Deadlock, HorizonExceeded };
const char* to_string(TerminalClass c);

struct StepRecord {
    int step = 0;
    double clock_s = 0.0;
    std::string train;
    int action = 0;        // 0 hold, 1 best, 2..4 reachable
    std::string resource;  // entered resource, or the resource held at
    bool auto_applied = false;
    bool forced = false;
};

struct EpisodeOutcome {
    TerminalClass terminal_class = TerminalClass::AllArrived;
    double weighted_delay = 0.0;  // +inf when the episode deadlocked
    std::map<std::string, double> per_train_delay;
    std::set<std::string> deadlocked_trains;
    std::vector<StepRecord> step_log;
};

struct ActionMask {
    std::array<bool, 5> allowed{true, false, false, false, false};
    int allowed_count() const {
        int n = 0;
        for (bool b : allowed) n += b ? 1 : 0;
        return n;
    }
};

struct DecisionRequest {
    std::string train;
    ActionMask mask;
};
struct AutoApplied {
    std::string train;
    int action = 0;
    std::string resource;
};
struct Terminal {
    EpisodeOutcome outcome;
};
using NextEvent = std::variant<DecisionRequest, AutoApplied, Terminal>;

struct DeadlockReport {
    bool deadlock = false;
    std::set<std::string> trains;
};

// How many of the encoder's window slots the automatic-move rule inspects.
struct LocalWindow {
    int forward = 3;    // lf
    int backward = 2;   // lb
    int reachable = 3;  // n_r
};

// Deterministic event-driven dispatch state for one episode. Single-threaded;
// distinct instances may run concurrently.
class SimState {
public:
    SimState(const Network& net, const Instance& inst, LocalWindow window = {});

    const Network& network() const { return *net_; }
    const RunningTimeTable& running_times() const { return rt_; }
    const LocalWindow& window() const { return window_; }
    double clock() const { return clock_; }
    double start_time() const { return start_time_; }
    double horizon_s() const { return horizon_s_; }

    const std::vector<Train>& trains() const { return trains_; }
    const Train& train(const std::string& id) const { return trains_[train_index(id)]; }
    Train& train_mut(const std::string& id) { return trains_[train_index(id)]; }
    std::size_t train_index(const std::string& id) const;

    bool finished() const { return finished_; }
    const std::vector<StepRecord>& step_log() const { return step_log_; }

    // Advances to the earliest pending event. Applies automatic moves/holds
    // itself; hands genuine choices back to the caller as a DecisionRequest.
    NextEvent next_decision();

    // Applies an agent-chosen action for the train returned by the last
    // DecisionRequest. Throws ContractViolation if the mask forbids it.
    // Returns the seconds until the train is analyzed again.
    double apply_action(const std::string& train_id, int action);

    // True when the train has been held three consecutive times in the same
    // resource with the same state and a go action is available now.
    bool forced_move_check(const std::string& train_id) const;
    int forced_action(const std::string& train_id) const;  // lowest allowed go action

    // Flow-based analysis of the current configuration: deadlock when some
    // set of opposing trains can no longer cross anywhere ahead.
    DeadlockReport detect_deadlock() const;
    // Would moving this train into the resource create such a configuration?
    bool move_would_deadlock(const std::string& train_id, const std::string& resource) const;

    // Candidate next resources: [0] best, [1..] reachable (may be empty).
    struct Candidates {
        std::string best;                    // empty when no successor exists
        std::vector<std::string> reachable;  // at most window().reachable entries
    };
    Candidates candidates(const std::string& train_id) const;

    struct EnterOptions {
        bool ignore_headway = false;
        bool ignore_status = false;
    };
    bool enterable(const std::string& train_id, const std::string& resource,
                   EnterOptions opts = {}) const;
    ActionMask action_mask(const std::string& train_id) const;

    double weighted_delay_now() const { return weighted_delay_at(clock_); }
    double weighted_delay_at(double t) const;
    double delay_so_far(const Train& t, double at_time) const;
    double remaining_free_running(const Train& t, double at_time) const;

    EpisodeOutcome make_outcome(TerminalClass cls, std::set<std::string> deadlocked = {}) const;

    static constexpr double kEpsilonTime = 1.0;  // re-analysis increment for held trains

private:
    friend class DeadlockAnalyzer;

    void settle(Train& t);
    void apply_go(Train& t, int action, const std::string& resource, bool forced, bool auto_applied);
    void apply_hold(Train& t, bool auto_applied);
    double hold_wakeup_time(const Train& t) const;
    bool all_window_free(const Train& t) const;
    bool occupied_by_other(const std::string& resource, const std::string& train_id) const;
    std::vector<const Train*> occupants(const std::string& resource) const;
    void record_analysis(Train& t);
    void log_step(const Train& t, int action, const std::string& resource, bool auto_applied, bool forced);

    const Network* net_;
    RunningTimeTable rt_;
    LocalWindow window_;
    std::vector<Train> trains_;
    std::map<std::string, std::size_t> train_index_;
    double clock_ = 0.0;
    double start_time_ = 0.0;
    double horizon_s_ = 7200.0;
    bool finished_ = false;
    // last same-direction entry time onto each track
    std::map<std::pair<std::string, int>, double> headway_ledger_;
    std::vector<StepRecord> step_log_;
    int step_counter_ = 0;
    std::string pending_decision_;  // train owed an apply_action call
};

// Episode-level weighted delay over final per-train delays.
double weighted_delay(const EpisodeOutcome& outcome);

std::string step_log_csv(const std::vector<StepRecord>& log, int episode);

}  // namespace raildq
