#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "raildq/common.hpp"

namespace raildq {

enum class ResourceKind { StoppingPoint, Track, StationRoute };

enum class Direction { LeftToRight, RightToLeft };

inline Direction reversed(Direction d) {
    return d == Direction::LeftToRight ? Direction::RightToLeft : Direction::LeftToRight;
}

const char* to_string(ResourceKind k);
const char* to_string(Direction d);
ResourceKind resource_kind_from_string(const std::string& s);
Direction direction_from_string(const std::string& s);

// Availability of a resource independent of train occupation. Free is the
// normal case; the other two model dispatcher-imposed blocks and outages.
struct ResourceStatus {
    enum class Mode { Free, BlockedUntilTrain, Failed };
    Mode mode = Mode::Free;
    std::string blocking_train;     // BlockedUntilTrain: available only to this train
    double failed_from_s = 0.0;     // Failed: unavailable inside [from, until)
    double failed_until_s = 0.0;
};

struct Resource {
    std::string id;
    ResourceKind kind = ResourceKind::Track;
    double length_ft = 0.0;
    std::string parallel_group;  // empty when ungrouped
    ResourceStatus status;
};

// Static railway model. Immutable after load (statuses may be configured
// before a simulation starts); safe to share read-only across episodes.
class Network {
public:
    std::size_t size() const { return resources_.size(); }
    bool has_resource(const std::string& id) const { return index_.count(id) != 0; }
    std::size_t index_of(const std::string& id) const;
    const Resource& resource(const std::string& id) const { return resources_[index_of(id)]; }
    const Resource& resource_at(std::size_t i) const { return resources_[i]; }
    const std::vector<Resource>& resources() const { return resources_; }

    const std::vector<std::string>& successors(const std::string& id, Direction d) const;
    bool is_control_point(const std::string& id) const;
    double headway_s() const { return headway_s_; }

    // Members of the resource's parallel group (including itself); a single
    // element when ungrouped.
    std::vector<std::string> group_members(const std::string& id) const;
    bool route_exclusion(const std::string& group) const;

    // Scenario setup hook; must not be called while simulations share this
    // network.
    void set_status(const std::string& id, const ResourceStatus& st);

    friend Network load_network(const std::string& json_text);
    friend std::string serialize_network(const Network& net);

private:
    std::vector<Resource> resources_;  // document order; also fixes encoder column order
    std::unordered_map<std::string, std::size_t> index_;
    std::vector<std::vector<std::string>> succ_lr_, succ_rl_;
    std::vector<bool> control_point_;
    std::unordered_map<std::string, std::vector<std::string>> groups_;
    std::unordered_map<std::string, bool> route_exclusion_;
    double headway_s_ = 120.0;
};

// Parses and validates a network document; throws SchemaError with the
// offending id/field on violation (unknown keys, dangling adjacency, ...).
Network load_network(const std::string& json_text);
std::string serialize_network(const Network& net);

// Free running times per (train, resource). Entries are explicit; instance
// loading materializes defaults for pairs the document omits.
class RunningTimeTable {
public:
    void set(const std::string& train, const std::string& resource, double seconds);
    bool has(const std::string& train, const std::string& resource) const;
    double seconds(const std::string& train, const std::string& resource) const;
    std::size_t entry_count() const { return entries_.size(); }
    std::vector<std::tuple<std::string, std::string, double>> entries_sorted() const;

private:
    static std::string key(const std::string& t, const std::string& r) { return t + '\x1f' + r; }
    std::unordered_map<std::string, double> entries_;
};

// Successor with minimal free running time for this train; ties broken by
// lowest resource id. Throws when the resource has no successor (terminal).
std::string best_next(const Network& net, const RunningTimeTable& rt, const std::string& train,
                      const std::string& at, Direction dir);

// Successors other than the best one, ascending by free running time,
// truncated to max_count. Empty when only the best exists.
std::vector<std::string> reachable_next(const Network& net, const RunningTimeTable& rt,
                                        const std::string& train, const std::string& at,
                                        Direction dir, std::size_t max_count = 3);

// |parallel group| - 1, or 0 for ungrouped resources.
std::size_t parallel_count(const Network& net, const std::string& id);

}  // namespace raildq
