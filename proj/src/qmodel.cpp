#include "raildq/qmodel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace raildq {

namespace {

void init_tensor(std::vector<double>& w, std::size_t fan_in, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (double& v : w) v = (rng.next_double() * 2.0 - 1.0) * bound;
}

void write_tensor(std::ostream& os, const std::vector<double>& w) {
    for (std::size_t i = 0; i < w.size(); ++i) {
        if (i) os << ' ';
        os << format_double(w[i]);
    }
    os << '\n';
}

std::vector<double> read_tensor(std::istream& is, std::size_t expected) {
    std::string line;
    if (!std::getline(is, line)) throw SchemaError("model file truncated");
    std::istringstream ls(line);
    std::vector<double> out;
    out.reserve(expected);
    double v;
    while (ls >> v) out.push_back(v);
    if (out.size() != expected)
        throw SchemaError("tensor has " + std::to_string(out.size()) + " values, expected " +
                          std::to_string(expected));
    return out;
}

}  // namespace

DeepQ::DeepQ(std::size_t input, std::size_t hidden, double learning_rate)
    : input_(input), hidden_(hidden), lr_(learning_rate) {
    w1_.assign(hidden_ * input_, 0.0);
    b1_.assign(hidden_, 0.0);
    w2_.assign(hidden_ * hidden_, 0.0);
    b2_.assign(hidden_, 0.0);
    w3_.assign(kActionCount * hidden_, 0.0);
    b3_.assign(kActionCount, 0.0);
}

DeepQ::DeepQ(std::size_t input, std::size_t hidden, double learning_rate, Rng& init_rng)
    : DeepQ(input, hidden, learning_rate) {
    init_tensor(w1_, input_, init_rng);
    init_tensor(b1_, input_, init_rng);
    init_tensor(w2_, hidden_, init_rng);
    init_tensor(b2_, hidden_, init_rng);
    init_tensor(w3_, hidden_, init_rng);
    init_tensor(b3_, hidden_, init_rng);
}

QVector DeepQ::q_values(const std::vector<double>& state) const {
    if (state.size() != input_) throw ContractViolation("state size mismatch: " + std::to_string(state.size()) +
                                                        " vs input " + std::to_string(input_));
    std::vector<double> h1(hidden_), h2(hidden_);
    for (std::size_t o = 0; o < hidden_; ++o) {
        double z = b1_[o];
        const double* row = &w1_[o * input_];
        for (std::size_t i = 0; i < input_; ++i) z += row[i] * state[i];
        h1[o] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t o = 0; o < hidden_; ++o) {
        double z = b2_[o];
        const double* row = &w2_[o * hidden_];
        for (std::size_t i = 0; i < hidden_; ++i) z += row[i] * h1[i];
        h2[o] = z > 0.0 ? z : 0.0;
    }
    QVector q{};
    for (std::size_t o = 0; o < kActionCount; ++o) {
        double z = b3_[o];
        const double* row = &w3_[o * hidden_];
        for (std::size_t i = 0; i < hidden_; ++i) z += row[i] * h2[i];
        q[o] = z;
    }
    return q;
}

struct DeepQ::Gradients {
    std::vector<double> w1, b1, w2, b2, w3, b3;
};

void DeepQ::backward(const TrainSample& sample, double inv_n, Gradients& g, double& loss_acc) const {
    if (sample.state.size() != input_) throw ContractViolation("sample state size mismatch");
    std::vector<double> h1(hidden_), h2(hidden_);
    std::vector<double> z1(hidden_), z2(hidden_);
    for (std::size_t o = 0; o < hidden_; ++o) {
        double z = b1_[o];
        const double* row = &w1_[o * input_];
        for (std::size_t i = 0; i < input_; ++i) z += row[i] * sample.state[i];
        z1[o] = z;
        h1[o] = z > 0.0 ? z : 0.0;
    }
    for (std::size_t o = 0; o < hidden_; ++o) {
        double z = b2_[o];
        const double* row = &w2_[o * hidden_];
        for (std::size_t i = 0; i < hidden_; ++i) z += row[i] * h1[i];
        z2[o] = z;
        h2[o] = z > 0.0 ? z : 0.0;
    }
    QVector q{};
    QVector dq{};
    for (std::size_t o = 0; o < kActionCount; ++o) {
        double z = b3_[o];
        const double* row = &w3_[o * hidden_];
        for (std::size_t i = 0; i < hidden_; ++i) z += row[i] * h2[i];
        q[o] = z;
        if (sample.mask[o]) {
            double err = q[o] - sample.y_target[o];
            loss_acc += err * err * inv_n;
            dq[o] = 2.0 * err * inv_n;
        }
    }
    std::vector<double> dh2(hidden_, 0.0), dh1(hidden_, 0.0);
    for (std::size_t o = 0; o < kActionCount; ++o) {
        if (dq[o] == 0.0) continue;
        g.b3[o] += dq[o];
        double* grow = &g.w3[o * hidden_];
        const double* row = &w3_[o * hidden_];
        for (std::size_t i = 0; i < hidden_; ++i) {
            grow[i] += dq[o] * h2[i];
            dh2[i] += dq[o] * row[i];
        }
    }
    for (std::size_t o = 0; o < hidden_; ++o) {
        if (z2[o] <= 0.0 || dh2[o] == 0.0) continue;
        g.b2[o] += dh2[o];
        double* grow = &g.w2[o * hidden_];
        const double* row = &w2_[o * hidden_];
        for (std::size_t i = 0; i < hidden_; ++i) {
            grow[i] += dh2[o] * h1[i];
            dh1[i] += dh2[o] * row[i];
        }
    }
    for (std::size_t o = 0; o < hidden_; ++o) {
        if (z1[o] <= 0.0 || dh1[o] == 0.0) continue;
        g.b1[o] += dh1[o];
        double* grow = &g.w1[o * input_];
        for (std::size_t i = 0; i < input_; ++i) grow[i] += dh1[o] * sample.state[i];
    }
}

double DeepQ::train_step(const std::vector<TrainSample>& batch) {
    if (batch.empty()) return 0.0;
    Gradients g{std::vector<double>(w1_.size(), 0.0), std::vector<double>(b1_.size(), 0.0),
                std::vector<double>(w2_.size(), 0.0), std::vector<double>(b2_.size(), 0.0),
                std::vector<double>(w3_.size(), 0.0), std::vector<double>(b3_.size(), 0.0)};
    double loss_acc = 0.0;
    double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const TrainSample& s : batch) backward(s, inv_n, g, loss_acc);
    if (!std::isfinite(loss_acc)) throw NonFiniteLoss("training loss is not finite");

    auto apply = [this](std::vector<double>& w, const std::vector<double>& gw) {
        for (std::size_t i = 0; i < w.size(); ++i) w[i] -= lr_ * gw[i];
    };
    apply(w1_, g.w1);
    apply(b1_, g.b1);
    apply(w2_, g.w2);
    apply(b2_, g.b2);
    apply(w3_, g.w3);
    apply(b3_, g.b3);
    for (const auto* t : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_})
        for (double v : *t)
            if (!std::isfinite(v)) throw NonFiniteLoss("parameter became non-finite");
    return loss_acc;
}

double DeepQ::loss(const std::vector<TrainSample>& batch) const {
    if (batch.empty()) return 0.0;
    double acc = 0.0;
    double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const TrainSample& s : batch) {
        QVector q = q_values(s.state);
        for (std::size_t o = 0; o < kActionCount; ++o) {
            if (!s.mask[o]) continue;
            double err = q[o] - s.y_target[o];
            acc += err * err * inv_n;
        }
    }
    return acc;
}

std::size_t DeepQ::parameter_count() const {
    return w1_.size() + b1_.size() + w2_.size() + b2_.size() + w3_.size() + b3_.size();
}

double DeepQ::get_parameter(std::size_t i) const {
    for (const auto* t : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) {
        if (i < t->size()) return (*t)[i];
        i -= t->size();
    }
    throw ContractViolation("parameter index out of range");
}

void DeepQ::set_parameter(std::size_t i, double v) {
    for (auto* t : {&w1_, &b1_, &w2_, &b2_, &w3_, &b3_}) {
        if (i < t->size()) {
            (*t)[i] = v;
            return;
        }
        i -= t->size();
    }
    throw ContractViolation("parameter index out of range");
}

void DeepQ::save(std::ostream& os) const {
    os << "raildq-model v1 deep " << input_ << ' ' << hidden_ << ' ' << hidden_ << ' ' << kActionCount << '\n';
    os << format_double(lr_) << '\n';
    write_tensor(os, w1_);
    write_tensor(os, b1_);
    write_tensor(os, w2_);
    write_tensor(os, b2_);
    write_tensor(os, w3_);
    write_tensor(os, b3_);
}

DeepQ DeepQ::load(std::istream& is, const std::string& header) {
    std::istringstream hs(header);
    std::string magic, version, kind;
    std::size_t in, h1, h2, out;
    if (!(hs >> magic >> version >> kind >> in >> h1 >> h2 >> out) || magic != "raildq-model" ||
        version != "v1" || kind != "deep" || h1 != h2 || out != kActionCount)
        throw SchemaError("bad deep model header: " + header);
    std::string lr_line;
    if (!std::getline(is, lr_line)) throw SchemaError("model file truncated");
    DeepQ m(in, h1, std::strtod(lr_line.c_str(), nullptr));
    m.w1_ = read_tensor(is, h1 * in);
    m.b1_ = read_tensor(is, h1);
    m.w2_ = read_tensor(is, h1 * h1);
    m.b2_ = read_tensor(is, h1);
    m.w3_ = read_tensor(is, kActionCount * h1);
    m.b3_ = read_tensor(is, kActionCount);
    return m;
}

LinearQ::LinearQ(std::size_t input, double learning_rate, double discount)
    : input_(input), lr_(learning_rate), discount_(discount) {}

std::vector<long long> LinearQ::quantize(const std::vector<double>& state) {
    std::vector<long long> q(state.size());
    for (std::size_t i = 0; i < state.size(); ++i) q[i] = std::llround(state[i]);
    return q;
}

std::string LinearQ::key_of(const std::vector<double>& state) const {
    if (state.size() != input_) throw ContractViolation("state size mismatch for table lookup");
    std::ostringstream os;
    for (long long v : quantize(state)) os << v << ',';
    return os.str();
}

QVector LinearQ::q_values(const std::vector<double>& state) const {
    auto it = table_.find(key_of(state));
    if (it == table_.end()) return QVector{};
    return it->second;
}

double LinearQ::train_step(const std::vector<TrainSample>& batch) {
    double pre = loss(batch);
    for (const TrainSample& s : batch) {
        QVector& q = table_[key_of(s.state)];
        for (std::size_t o = 0; o < kActionCount; ++o)
            if (s.mask[o]) q[o] += lr_ * (s.y_target[o] - q[o]);
    }
    if (!std::isfinite(pre)) throw NonFiniteLoss("table loss is not finite");
    return pre;
}

double LinearQ::loss(const std::vector<TrainSample>& batch) const {
    if (batch.empty()) return 0.0;
    double acc = 0.0;
    double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const TrainSample& s : batch) {
        QVector q = q_values(s.state);
        for (std::size_t o = 0; o < kActionCount; ++o) {
            if (!s.mask[o]) continue;
            double err = q[o] - s.y_target[o];
            acc += err * err * inv_n;
        }
    }
    return acc;
}

void LinearQ::save(std::ostream& os) const {
    os << "raildq-model v1 linear " << input_ << '\n';
    os << format_double(lr_) << ' ' << format_double(discount_) << '\n';
    std::vector<std::pair<std::string, const QVector*>> rows;
    rows.reserve(table_.size());
    for (const auto& [k, v] : table_) rows.emplace_back(k, &v);
    std::sort(rows.begin(), rows.end());
    os << rows.size() << '\n';
    for (const auto& [k, v] : rows) {
        os << k;
        for (double x : *v) os << ' ' << format_double(x);
        os << '\n';
    }
}

LinearQ LinearQ::load(std::istream& is, const std::string& header) {
    std::istringstream hs(header);
    std::string magic, version, kind;
    std::size_t in;
    if (!(hs >> magic >> version >> kind >> in) || magic != "raildq-model" || version != "v1" || kind != "linear")
        throw SchemaError("bad linear model header: " + header);
    double lr, gamma;
    if (!(is >> lr >> gamma)) throw SchemaError("model file truncated");
    std::size_t count;
    if (!(is >> count)) throw SchemaError("model file truncated");
    std::string rest;
    std::getline(is, rest);
    LinearQ m(in, lr, gamma);
    for (std::size_t i = 0; i < count; ++i) {
        std::string line;
        if (!std::getline(is, line)) throw SchemaError("model file truncated");
        std::size_t sep = line.rfind(',');
        if (sep == std::string::npos) throw SchemaError("bad table row: " + line);
        std::string key = line.substr(0, sep + 1);
        std::istringstream vs(line.substr(sep + 1));
        QVector q{};
        for (double& x : q)
            if (!(vs >> x)) throw SchemaError("bad table row: " + line);
        m.table_[key] = q;
    }
    return m;
}

int select_action(const QVector& q, const ActionFlags& allowed, Policy& policy) {
    int count = 0;
    for (bool a : allowed) count += a ? 1 : 0;
    if (count == 0) throw ContractViolation("select_action with empty mask");
    double theta = policy.rng.next_double();
    if (theta < policy.epsilon) {
        int pick = static_cast<int>(policy.rng.next_below(static_cast<std::uint64_t>(count)));
        for (int a = 0; a < static_cast<int>(kActionCount); ++a) {
            if (!allowed[static_cast<std::size_t>(a)]) continue;
            if (pick-- == 0) return a;
        }
    }
    int best = -1;
    for (int a = 0; a < static_cast<int>(kActionCount); ++a) {
        if (!allowed[static_cast<std::size_t>(a)]) continue;
        if (best < 0 || q[static_cast<std::size_t>(a)] > q[static_cast<std::size_t>(best)]) best = a;
    }
    return best;
}

void decay(Policy& policy) {
    policy.epsilon = std::max(policy.floor, policy.epsilon / policy.decay_divisor);
}

QVector apply_mask(const QVector& q, const ActionFlags& allowed) {
    QVector out{};
    for (std::size_t i = 0; i < kActionCount; ++i) out[i] = allowed[i] ? q[i] : 0.0;
    return out;
}

void save_model(const QAgent& agent, std::ostream& os) { agent.save(os); }

void save_model_file(const QAgent& agent, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write model file " + path);
    agent.save(os);
}

std::unique_ptr<QAgent> load_model(std::istream& is) {
    std::string header;
    if (!std::getline(is, header)) throw SchemaError("empty model file");
    std::istringstream hs(header);
    std::string magic, version, kind;
    hs >> magic >> version >> kind;
    if (magic != "raildq-model" || version != "v1") throw SchemaError("bad model header: " + header);
    if (kind == "deep") return std::make_unique<DeepQ>(DeepQ::load(is, header));
    if (kind == "linear") return std::make_unique<LinearQ>(LinearQ::load(is, header));
    throw SchemaError("unknown model kind: " + kind);
}

std::unique_ptr<QAgent> load_model_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read model file " + path);
    return load_model(is);
}

}  // namespace raildq
