#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "raildq/common.hpp"

namespace raildq {

inline constexpr std::size_t kActionCount = 5;

using QVector = std::array<double, kActionCount>;
using ActionFlags = std::array<bool, kActionCount>;

struct TrainSample {
    std::vector<double> state;
    QVector y_target{};
    ActionFlags mask{};  // loss counts only unmasked slots
};

class NonFiniteLoss : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Common face of the two q-function implementations so the training loop is
// agnostic: observe -> q-vector -> select -> learn.
class QAgent {
public:
    virtual ~QAgent() = default;
    virtual std::size_t input_size() const = 0;
    virtual QVector q_values(const std::vector<double>& state) const = 0;
    // One stochastic-gradient step on the masked mean squared error; returns
    // the pre-step loss. Empty batches are a no-op returning 0.
    virtual double train_step(const std::vector<TrainSample>& batch) = 0;
    virtual double loss(const std::vector<TrainSample>& batch) const = 0;
    virtual const char* kind() const = 0;
    virtual void save(std::ostream& os) const = 0;
};

// input -> 60 -> 60 -> 5 feed-forward net, rectifier hidden activations,
// identity output, hand-rolled backpropagation, plain SGD.
class DeepQ : public QAgent {
public:
    DeepQ(std::size_t input, std::size_t hidden = 60, double learning_rate = 0.01);
    DeepQ(std::size_t input, std::size_t hidden, double learning_rate, Rng& init_rng);

    std::size_t input_size() const override { return input_; }
    std::size_t hidden_size() const { return hidden_; }
    double learning_rate() const { return lr_; }

    QVector q_values(const std::vector<double>& state) const override;
    double train_step(const std::vector<TrainSample>& batch) override;
    double loss(const std::vector<TrainSample>& batch) const override;
    const char* kind() const override { return "deep"; }
    void save(std::ostream& os) const override;
    static DeepQ load(std::istream& is, const std::string& header);

    // Flat parameter access for gradient verification.
    std::size_t parameter_count() const;
    double get_parameter(std::size_t i) const;
    void set_parameter(std::size_t i, double v);

private:
    struct Gradients;
    void backward(const TrainSample& sample, double inv_n, Gradients& g, double& loss_acc) const;

    std::size_t input_, hidden_;
    double lr_;
    // row-major [out x in]
    std::vector<double> w1_, b1_, w2_, b2_, w3_, b3_;
};

// Table over integer-quantized encodings; unseen keys read as five zeros.
class LinearQ : public QAgent {
public:
    LinearQ(std::size_t input, double learning_rate = 0.01, double discount = 1.0);

    std::size_t input_size() const override { return input_; }
    QVector q_values(const std::vector<double>& state) const override;
    double train_step(const std::vector<TrainSample>& batch) override;
    double loss(const std::vector<TrainSample>& batch) const override;
    const char* kind() const override { return "linear"; }
    void save(std::ostream& os) const override;
    static LinearQ load(std::istream& is, const std::string& header);

    std::size_t table_size() const { return table_.size(); }
    double discount() const { return discount_; }

    static std::vector<long long> quantize(const std::vector<double>& state);

private:
    std::string key_of(const std::vector<double>& state) const;

    std::size_t input_;
    double lr_;
    double discount_;
    std::unordered_map<std::string, QVector> table_;
};

// Epsilon-greedy exploration schedule: epsilon divided by a fixed factor
// after each episode, never below the floor.
struct Policy {
    double epsilon = 1.0;
    double decay_divisor = 1.00075;
    double floor = 1e-4;
    Rng rng{0x5eedULL};
};

// Draw theta ~ U(0,1); explore uniformly over allowed actions when theta <
// epsilon, otherwise pick the allowed argmax (ties to the lowest index).
int select_action(const QVector& q, const ActionFlags& allowed, Policy& policy);

void decay(Policy& policy);

QVector apply_mask(const QVector& q, const ActionFlags& allowed);

void save_model(const QAgent& agent, std::ostream& os);
void save_model_file(const QAgent& agent, const std::string& path);
std::unique_ptr<QAgent> load_model(std::istream& is);
std::unique_ptr<QAgent> load_model_file(const std::string& path);

}  // namespace raildq
