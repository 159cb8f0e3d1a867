#include "raildq/topology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "json.hpp"

namespace raildq {

using nlohmann::json;

const char* to_string(ResourceKind k) {
    switch (k) {
        case ResourceKind::StoppingPoint: return "stopping_point";
        case ResourceKind::Track: return "track";
        case ResourceKind::StationRoute: return "station_route";
    }
    return "?";
}

const char* to_string(Direction d) {
    return d == Direction::LeftToRight ? "left_to_right" : "right_to_left";
}

ResourceKind resource_kind_from_string(const std::string& s) {
    if (s == "stopping_point") return ResourceKind::StoppingPoint;
    if (s == "track") return ResourceKind::Track;
    if (s == "station_route") return ResourceKind::StationRoute;
    throw SchemaError("unknown resource kind '" + s + "'", "", "kind");
}

Direction direction_from_string(const std::string& s) {
    if (s == "left_to_right") return Direction::LeftToRight;
    if (s == "right_to_left") return Direction::RightToLeft;
    throw SchemaError("unknown direction '" + s + "'", "", "direction");
}

std::size_t Network::index_of(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw SchemaError("unknown resource", id);
    return it->second;
}

const std::vector<std::string>& Network::successors(const std::string& id, Direction d) const {
    std::size_t i = index_of(id);
    return d == Direction::LeftToRight ? succ_lr_[i] : succ_rl_[i];
}

bool Network::is_control_point(const std::string& id) const { return control_point_[index_of(id)]; }

std::vector<std::string> Network::group_members(const std::string& id) const {
    const Resource& r = resource(id);
    if (r.parallel_group.empty()) return {id};
    return groups_.at(r.parallel_group);
}

bool Network::route_exclusion(const std::string& group) const {
    auto it = route_exclusion_.find(group);
    return it != route_exclusion_.end() && it->second;
}

void Network::set_status(const std::string& id, const ResourceStatus& st) {
    resources_[index_of(id)].status = st;
}

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        if (!allowed.count(it.key()))
            throw SchemaError("unknown key '" + it.key() + "' in " + where, "", it.key());
    }
}

void push_edge(std::vector<std::string>& list, const std::string& to) {
    if (std::find(list.begin(), list.end(), to) == list.end()) list.push_back(to);
}

}  // namespace

Network load_network(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw SchemaError(std::string("network document is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw SchemaError("network document must be a JSON object");
    reject_unknown_keys(doc, {"resources", "adjacency", "control_points", "headway_s", "route_exclusion"},
                        "network document");
    if (!doc.contains("resources")) throw SchemaError("missing 'resources'", "", "resources");
    if (!doc.contains("adjacency")) throw SchemaError("missing 'adjacency'", "", "adjacency");
    if (!doc.contains("headway_s")) throw SchemaError("missing 'headway_s'", "", "headway_s");

    Network net;
    net.headway_s_ = doc["headway_s"].get<double>();
    if (!(net.headway_s_ >= 0.0) || !std::isfinite(net.headway_s_))
        throw SchemaError("headway_s must be finite and non-negative", "", "headway_s");

    for (const json& jr : doc["resources"]) {
        reject_unknown_keys(jr, {"id", "kind", "length_ft", "parallel_group"}, "resource");
        Resource r;
        r.id = jr.at("id").get<std::string>();
        r.kind = resource_kind_from_string(jr.at("kind").get<std::string>());
        r.length_ft = jr.at("length_ft").get<double>();
        if (!(r.length_ft > 0.0) || !std::isfinite(r.length_ft))
            throw SchemaError("length_ft must be positive and finite", r.id, "length_ft");
        if (jr.contains("parallel_group")) r.parallel_group = jr["parallel_group"].get<std::string>();
        if (net.index_.count(r.id)) throw SchemaError("duplicate resource id", r.id);
        net.index_[r.id] = net.resources_.size();
        net.resources_.push_back(std::move(r));
    }
    if (net.resources_.empty()) throw SchemaError("network has no resources", "", "resources");

    std::size_t n = net.resources_.size();
    net.succ_lr_.assign(n, {});
    net.succ_rl_.assign(n, {});
    net.control_point_.assign(n, false);

    for (const json& je : doc["adjacency"]) {
        reject_unknown_keys(je, {"from", "to", "direction"}, "adjacency entry");
        std::string from = je.at("from").get<std::string>();
        std::string to = je.at("to").get<std::string>();
        Direction d = direction_from_string(je.at("direction").get<std::string>());
        if (!net.index_.count(from)) throw SchemaError("dangling adjacency", from, "from");
        if (!net.index_.count(to)) throw SchemaError("dangling adjacency", to, "to");
        std::size_t fi = net.index_[from], ti = net.index_[to];
        // Store the edge and its mirror so both directions stay consistent.
        if (d == Direction::LeftToRight) {
            push_edge(net.succ_lr_[fi], to);
            push_edge(net.succ_rl_[ti], from);
        } else {
            push_edge(net.succ_rl_[fi], to);
            push_edge(net.succ_lr_[ti], from);
        }
    }

    if (doc.contains("control_points")) {
        for (const json& jc : doc["control_points"]) {
            std::string id = jc.get<std::string>();
            if (!net.index_.count(id)) throw SchemaError("unknown control point", id, "control_points");
            net.control_point_[net.index_[id]] = true;
        }
    }

    for (const Resource& r : net.resources_)
        if (!r.parallel_group.empty()) net.groups_[r.parallel_group].push_back(r.id);

    if (doc.contains("route_exclusion")) {
        const json& jx = doc["route_exclusion"];
        if (!jx.is_object()) throw SchemaError("route_exclusion must map group ids to booleans", "", "route_exclusion");
        for (auto it = jx.begin(); it != jx.end(); ++it) {
            if (!net.groups_.count(it.key()))
                throw SchemaError("route_exclusion references unknown group", it.key(), "route_exclusion");
            net.route_exclusion_[it.key()] = it.value().get<bool>();
        }
    }
    return net;
}

std::string serialize_network(const Network& net) {
    json doc;
    doc["resources"] = json::array();
    for (const Resource& r : net.resources_) {
        json jr{{"id", r.id}, {"kind", to_string(r.kind)}, {"length_ft", r.length_ft}};
        if (!r.parallel_group.empty()) jr["parallel_group"] = r.parallel_group;
        doc["resources"].push_back(std::move(jr));
    }
    doc["adjacency"] = json::array();
    for (const Resource& r : net.resources_) {
        for (const std::string& to : net.succ_lr_[net.index_.at(r.id)])
            doc["adjacency"].push_back(json{{"from", r.id}, {"to", to}, {"direction", "left_to_right"}});
    }
    doc["control_points"] = json::array();
    for (const Resource& r : net.resources_)
        if (net.control_point_[net.index_.at(r.id)]) doc["control_points"].push_back(r.id);
    doc["headway_s"] = net.headway_s_;
    doc["route_exclusion"] = json::object();
    for (const auto& [group, flag] : net.route_exclusion_) doc["route_exclusion"][group] = flag;
    return doc.dump(2);
}

void RunningTimeTable::set(const std::string& train, const std::string& resource, double seconds) {
    if (!(seconds > 0.0) || !std::isfinite(seconds))
        throw SchemaError("running time must be positive and finite", train + "/" + resource, "seconds");
    entries_[key(train, resource)] = seconds;
}

bool RunningTimeTable::has(const std::string& train, const std::string& resource) const {
    return entries_.count(key(train, resource)) != 0;
}

double RunningTimeTable::seconds(const std::string& train, const std::string& resource) const {
    auto it = entries_.find(key(train, resource));
    if (it == entries_.end())
        throw SchemaError("missing running time", train + "/" + resource);
    return it->second;
}

std::vector<std::tuple<std::string, std::string, double>> RunningTimeTable::entries_sorted() const {
    std::vector<std::tuple<std::string, std::string, double>> out;
    out.reserve(entries_.size());
    for (const auto& [k, v] : entries_) {
        std::size_t sep = k.find('\x1f');
        out.emplace_back(k.substr(0, sep), k.substr(sep + 1), v);
    }
    std::sort(out.begin(), out.end());
    return out;
}

namespace {

std::vector<std::pair<double, std::string>> ranked_successors(const Network& net, const RunningTimeTable& rt,
                                                              const std::string& train, const std::string& at,
                                                              Direction dir) {
    std::vector<std::pair<double, std::string>> ranked;
    for (const std::string& s : net.successors(at, dir)) ranked.emplace_back(rt.seconds(train, s), s);
    std::sort(ranked.begin(), ranked.end());  // (time, id): lowest id wins ties
    return ranked;
}

}  // namespace

std::string best_next(const Network& net, const RunningTimeTable& rt, const std::string& train,
                      const std::string& at, Direction dir) {
    auto ranked = ranked_successors(net, rt, train, at, dir);
    if (ranked.empty()) throw std::runtime_error("no successor for train " + train + " at " + at);
    return ranked.front().second;
}

std::vector<std::string> reachable_next(const Network& net, const RunningTimeTable& rt,
                                        const std::string& train, const std::string& at,
                                        Direction dir, std::size_t max_count) {
    auto ranked = ranked_successors(net, rt, train, at, dir);
    std::vector<std::string> out;
    for (std::size_t i = 1; i < ranked.size() && out.size() < max_count; ++i) out.push_back(ranked[i].second);
    return out;
}

std::size_t parallel_count(const Network& net, const std::string& id) {
    return net.group_members(id).size() - 1;
}

}  // namespace raildq
