#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace etlsched {

// row-major dense matrix; all learned parameters are 64-bit reals
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> a;

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), a(static_cast<size_t>(r) * c, 0.0) {}
    double& at(int r, int c) { return a[static_cast<size_t>(r) * cols + c]; }
    double at(int r, int c) const { return a[static_cast<size_t>(r) * cols + c]; }
};

// Two-layer embedding (relu then sigmoid) with a linear Q head:
//   h = sigmoid(W2 * relu(W1*s + b1) + b2),  Q = W3*h + b3.
// The sigmoid on the second layer can be swapped for relu via sigmoid_embed
// (an ablation knob); the head is always linear so Q values stay unbounded.
struct QNetwork {
    Matrix w1, w2, w3;
    std::vector<double> b1, b2, b3;
    bool sigmoid_embed = true;

    int in_dim() const { return w1.cols; }
    int hidden1() const { return w1.rows; }
    int hidden2() const { return w2.rows; }
    int out_dim() const { return w3.rows; }

    // He-style fan-in init for the relu layer, Xavier for the rest, zero biases
    static QNetwork init(int in_dim, int h1, int h2, int out_dim, std::uint64_t seed,
                         bool sigmoid_embed = true);
};

std::vector<double> embed(std::span<const double> s, const QNetwork& net);
std::vector<double> q_values(std::span<const double> s, const QNetwork& net);

struct TrainSample {
    std::vector<double> s;
    int a = 0;
    double y = 0.0;
};

struct Gradients {
    Matrix w1, w2, w3;
    std::vector<double> b1, b2, b3;

    static Gradients zeros_like(const QNetwork& net);
};

// mean squared TD error over the batch; gradients flow only through each
// sample's selected action. Returns the loss. Throws NumericError if a
// non-finite value shows up.
double backward(std::span<const TrainSample> batch, const QNetwork& net, Gradients& out);

// central finite differences over every parameter; returns the max over
// parameters of |analytic - numeric| / max(1, |numeric|)
double grad_check(const QNetwork& net, std::span<const TrainSample> batch, double fd_step);

// adaptive-moment optimizer (bias-corrected first/second moments)
struct AdamState {
    Gradients m, v;
    long step = 0;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static AdamState init(const QNetwork& net, double lr);
};

void optimizer_step(QNetwork& net, const Gradients& g, AdamState& opt);

// "qnet-v1" checkpoint: shape header plus row-major arrays
nlohmann::ordered_json qnetwork_to_json(const QNetwork& net);
QNetwork qnetwork_from_json(const nlohmann::json& j);
void save_qnetwork(const QNetwork& net, const std::string& path);
QNetwork load_qnetwork(const std::string& path);

} // namespace etlsched
