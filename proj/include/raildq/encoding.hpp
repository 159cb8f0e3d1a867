#pragma once

#include <map>
#include <string>
#include <vector>

#include "raildq/simcore.hpp"

namespace raildq {

inline constexpr int kFeaturesPerSlot = 6;
inline constexpr double kAbsentValue = 9.0;

inline std::size_t local_state_size(const LocalWindow& w) {
    return static_cast<std::size_t>(w.forward + w.backward + 1 + w.reachable) * kFeaturesPerSlot;
}

// Per-train window encoding. Slot order: backward (nearest crossed last),
// current, forward best chain (nearest first), reachable. Absent slots are
// six 9s. Features per slot:
//   1. resource description: 0 track, 1 stopping point or station route,
//      2 blocked, 3/4/5 active failure by remaining outage (<15 min, <60 min,
//      longer)
//   2. number of other trains on the resource
//   3. priority of the most important other occupant (1 outranks 5; 0 if none)
//   4. that occupant relative to this train: 1 crossing, 2 follower, 0 none
//   5. 1 if this train fits inside the resource, else 0
//   6. number of parallel siblings
std::vector<double> encode_local(const SimState& sim, const std::string& train_id, const LocalWindow& w);

// history_depth rows, flattened row-major. Row 0 is the current encoding;
// later rows are the most recent past states that differ from it (and from
// each other), padded with all-9 rows. The window must match the one the
// simulation records with.
std::vector<double> encode_local_history(const SimState& sim, const std::string& train_id, const LocalWindow& w,
                                         int history_depth);

enum class GlobalVariant { S0, S1, S2, S3, S4, S5 };
const char* to_string(GlobalVariant v);
GlobalVariant global_variant_from_string(const std::string& s);

struct GlobalEncodingOptions {
    // Value shown for each train in S0/S1/S4; defaults to 3*(1-based index),
    // which keeps value and value+2 collision-free across trains.
    std::map<std::string, double> base_values;
    // One-hot width for S5; 0 means the instance's train count.
    int max_trains = 0;
};

struct GlobalState {
    GlobalVariant variant = GlobalVariant::S0;
    std::size_t rows = 1, cols = 0;
    std::vector<double> values;  // row-major
};

// Whole-line state in network-file resource order. The deciding train is
// marked per variant (S0: value+2, S1..S3: trailing column, S4: fourth row,
// S5: trailing one-hot columns).
GlobalState encode_global(const SimState& sim, const std::string& deciding_train, GlobalVariant variant,
                          const GlobalEncodingOptions& opts = {});

std::size_t global_state_size(GlobalVariant variant, std::size_t resource_count, std::size_t train_count);

// Action feasibility for the next decision of this train. allowed[0] (halt)
// is always true; go entries require the target to be enterable right now.
ActionMask build_action_mask(const SimState& sim, const std::string& train_id);

std::string encoding_csv_row(int episode, int step, const std::string& train, const std::string& variant,
                             const std::vector<double>& values);

}  // namespace raildq
