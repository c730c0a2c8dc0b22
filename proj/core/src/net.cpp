#include "etlsched/net.hpp"

#include <cmath>
#include <fstream>

#include "etlsched/errors.hpp"
#include "etlsched/rng.hpp"

namespace etlsched {

namespace {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// y = M*x + b
void affine(const Matrix& m, std::span<const double> x, const std::vector<double>& b,
            std::vector<double>& y) {
    y.resize(m.rows);
    for (int r = 0; r < m.rows; ++r) {
        double acc = b[r];
        const double* row = &m.a[static_cast<size_t>(r) * m.cols];
        for (int c = 0; c < m.cols; ++c) acc += row[c] * x[c];
        y[r] = acc;
    }
}

struct ForwardPass {
    std::vector<double> z1, r1, z2, h, q;
};

void forward(std::span<const double> s, const QNetwork& net, ForwardPass& f) {
    if (static_cast<int>(s.size()) != net.in_dim())
        throw std::invalid_argument("state dimension does not match network input");
    affine(net.w1, s, net.b1, f.z1);
    f.r1.resize(f.z1.size());
    for (size_t i = 0; i < f.z1.size(); ++i) f.r1[i] = f.z1[i] > 0.0 ? f.z1[i] : 0.0;
    affine(net.w2, f.r1, net.b2, f.z2);
    f.h.resize(f.z2.size());
    if (net.sigmoid_embed)
        for (size_t i = 0; i < f.z2.size(); ++i) f.h[i] = sigmoid(f.z2[i]);
    else
        for (size_t i = 0; i < f.z2.size(); ++i) f.h[i] = f.z2[i] > 0.0 ? f.z2[i] : 0.0;
    affine(net.w3, f.h, net.b3, f.q);
}

void fill_uniform(Matrix& m, double limit, Rng& rng) {
    for (double& v : m.a) v = rng.uniform(-limit, limit);
}

} // namespace

QNetwork QNetwork::init(int in_dim, int h1, int h2, int out_dim, std::uint64_t seed,
                        bool sigmoid_embed) {
    if (in_dim < 1 || h1 < 1 || h2 < 1 || out_dim < 1)
        throw ConfigError("network dimensions must be positive");
    QNetwork net;
    net.sigmoid_embed = sigmoid_embed;
    net.w1 = Matrix(h1, in_dim);
    net.w2 = Matrix(h2, h1);
    net.w3 = Matrix(out_dim, h2);
    net.b1.assign(h1, 0.0);
    net.b2.assign(h2, 0.0);
    net.b3.assign(out_dim, 0.0);
    Rng rng(seed);
    fill_uniform(net.w1, std::sqrt(6.0 / in_dim), rng);            // He-style, relu layer
    fill_uniform(net.w2, std::sqrt(6.0 / (h1 + h2)), rng);         // Xavier
    fill_uniform(net.w3, std::sqrt(6.0 / (h2 + out_dim)), rng);    // Xavier
    return net;
}

std::vector<double> embed(std::span<const double> s, const QNetwork& net) {
    ForwardPass f;
    forward(s, net, f);
    return f.h;
}

std::vector<double> q_values(std::span<const double> s, const QNetwork& net) {
    ForwardPass f;
    forward(s, net, f);
    return f.q;
}

Gradients Gradients::zeros_like(const QNetwork& net) {
    Gradients g;
    g.w1 = Matrix(net.w1.rows, net.w1.cols);
    g.w2 = Matrix(net.w2.rows, net.w2.cols);
    g.w3 = Matrix(net.w3.rows, net.w3.cols);
    g.b1.assign(net.b1.size(), 0.0);
    g.b2.assign(net.b2.size(), 0.0);
    g.b3.assign(net.b3.size(), 0.0);
    return g;
}

double backward(std::span<const TrainSample> batch, const QNetwork& net, Gradients& out) {
    if (batch.empty()) throw std::invalid_argument("backward: empty batch");
    out = Gradients::zeros_like(net);

    const int h1 = net.hidden1();
    const int h2 = net.hidden2();
    const double inv_batch = 1.0 / static_cast<double>(batch.size());

    double loss = 0.0;
    ForwardPass f;
    std::vector<double> gh(h2), gz2(h2), gr1(h1);
    for (const TrainSample& sample : batch) {
        if (!std::isfinite(sample.y)) throw NumericError("backward: non-finite target");
        if (sample.a < 0 || sample.a >= net.out_dim())
            throw std::invalid_argument("backward: action index out of range");
        forward(sample.s, net, f);

        const double err = sample.y - f.q[sample.a];
        loss += err * err * inv_batch;

        // dL/dq[a] for the squared error, averaged over the batch; the other
        // head rows receive no gradient
        const double gq = -2.0 * err * inv_batch;

        // head: dW3 = gq * e_a h^T, gh = W3^T (gq e_a) = gq * row_a(W3)
        double* w3row = &out.w3.a[static_cast<size_t>(sample.a) * h2];
        const double* w3net = &net.w3.a[static_cast<size_t>(sample.a) * h2];
        for (int c = 0; c < h2; ++c) {
            w3row[c] += gq * f.h[c];
            gh[c] = gq * w3net[c];
        }
        out.b3[sample.a] += gq;

        // through the embedding activation
        if (net.sigmoid_embed)
            for (int i = 0; i < h2; ++i) gz2[i] = gh[i] * f.h[i] * (1.0 - f.h[i]);
        else
            for (int i = 0; i < h2; ++i) gz2[i] = f.z2[i] > 0.0 ? gh[i] : 0.0;

        for (int r = 0; r < h2; ++r) {
            double* w2row = &out.w2.a[static_cast<size_t>(r) * h1];
            for (int c = 0; c < h1; ++c) w2row[c] += gz2[r] * f.r1[c];
            out.b2[r] += gz2[r];
        }

        // gr1 = W2^T gz2, then through relu
        for (int c = 0; c < h1; ++c) gr1[c] = 0.0;
        for (int r = 0; r < h2; ++r) {
            const double* w2net = &net.w2.a[static_cast<size_t>(r) * h1];
            for (int c = 0; c < h1; ++c) gr1[c] += w2net[c] * gz2[r];
        }
        for (int r = 0; r < h1; ++r) {
            const double gz1 = f.z1[r] > 0.0 ? gr1[r] : 0.0;
            if (gz1 == 0.0) continue;
            double* w1row = &out.w1.a[static_cast<size_t>(r) * net.in_dim()];
            for (int c = 0; c < net.in_dim(); ++c) w1row[c] += gz1 * sample.s[c];
            out.b1[r] += gz1;
        }
    }
    if (!std::isfinite(loss)) throw NumericError("backward: non-finite loss");
    return loss;
}

namespace {

double batch_loss(const QNetwork& net, std::span<const TrainSample> batch) {
    double loss = 0.0;
    ForwardPass f;
    for (const TrainSample& sample : batch) {
        forward(sample.s, net, f);
        const double err = sample.y - f.q[sample.a];
        loss += err * err;
    }
    return loss / static_cast<double>(batch.size());
}

// iterate matching (analytic gradient, mutable parameter) pairs
template <typename Fn>
void for_each_param(QNetwork& net, const Gradients& g, Fn&& fn) {
    for (size_t i = 0; i < net.w1.a.size(); ++i) fn(net.w1.a[i], g.w1.a[i]);
    for (size_t i = 0; i < net.b1.size(); ++i) fn(net.b1[i], g.b1[i]);
    for (size_t i = 0; i < net.w2.a.size(); ++i) fn(net.w2.a[i], g.w2.a[i]);
    for (size_t i = 0; i < net.b2.size(); ++i) fn(net.b2[i], g.b2[i]);
    for (size_t i = 0; i < net.w3.a.size(); ++i) fn(net.w3.a[i], g.w3.a[i]);
    for (size_t i = 0; i < net.b3.size(); ++i) fn(net.b3[i], g.b3[i]);
}

} // namespace

double grad_check(const QNetwork& net, std::span<const TrainSample> batch, double fd_step) {
    Gradients analytic;
    backward(batch, net, analytic);

    QNetwork probe = net;
    double max_rel = 0.0;
    for_each_param(probe, analytic, [&](double& param, double grad) {
        const double saved = param;
        param = saved + fd_step;
        const double up = batch_loss(probe, batch);
        param = saved - fd_step;
        const double down = batch_loss(probe, batch);
        param = saved;
        const double numeric = (up - down) / (2.0 * fd_step);
        const double rel = std::abs(grad - numeric) / std::max(1.0, std::abs(numeric));
        max_rel = std::max(max_rel, rel);
    });
    return max_rel;
}

AdamState AdamState::init(const QNetwork& net, double lr) {
    AdamState st;
    st.m = Gradients::zeros_like(net);
    st.v = Gradients::zeros_like(net);
    st.lr = lr;
    return st;
}

void optimizer_step(QNetwork& net, const Gradients& g, AdamState& opt) {
    opt.step += 1;
    const double bc1 = 1.0 - std::pow(opt.beta1, opt.step);
    const double bc2 = 1.0 - std::pow(opt.beta2, opt.step);

    auto update = [&](double& param, double grad, double& m, double& v) {
        m = opt.beta1 * m + (1.0 - opt.beta1) * grad;
        v = opt.beta2 * v + (1.0 - opt.beta2) * grad * grad;
        const double step = opt.lr * (m / bc1) / (std::sqrt(v / bc2) + opt.eps);
        param -= step;
        if (!std::isfinite(param)) throw NumericError("optimizer produced a non-finite parameter");
    };

    for (size_t i = 0; i < net.w1.a.size(); ++i) update(net.w1.a[i], g.w1.a[i], opt.m.w1.a[i], opt.v.w1.a[i]);
    for (size_t i = 0; i < net.b1.size(); ++i) update(net.b1[i], g.b1[i], opt.m.b1[i], opt.v.b1[i]);
    for (size_t i = 0; i < net.w2.a.size(); ++i) update(net.w2.a[i], g.w2.a[i], opt.m.w2.a[i], opt.v.w2.a[i]);
    for (size_t i = 0; i < net.b2.size(); ++i) update(net.b2[i], g.b2[i], opt.m.b2[i], opt.v.b2[i]);
    for (size_t i = 0; i < net.w3.a.size(); ++i) update(net.w3.a[i], g.w3.a[i], opt.m.w3.a[i], opt.v.w3.a[i]);
    for (size_t i = 0; i < net.b3.size(); ++i) update(net.b3[i], g.b3[i], opt.m.b3[i], opt.v.b3[i]);
}

static nlohmann::ordered_json matrix_to_json(const Matrix& m) {
    return {{"rows", m.rows}, {"cols", m.cols}, {"data", m.a}};
}

static Matrix matrix_from_json(const nlohmann::json& j) {
    Matrix m(j.at("rows").get<int>(), j.at("cols").get<int>());
    m.a = j.at("data").get<std::vector<double>>();
    if (m.a.size() != static_cast<size_t>(m.rows) * m.cols)
        throw ConfigError("checkpoint matrix shape mismatch");
    return m;
}

nlohmann::ordered_json qnetwork_to_json(const QNetwork& net) {
    nlohmann::ordered_json j;
    j["schema"] = "qnet-v1";
    j["shape"] = {{"in", net.in_dim()}, {"h1", net.hidden1()}, {"h2", net.hidden2()}, {"out", net.out_dim()}};
    j["sigmoid_embed"] = net.sigmoid_embed;
    j["w1"] = matrix_to_json(net.w1);
    j["b1"] = net.b1;
    j["w2"] = matrix_to_json(net.w2);
    j["b2"] = net.b2;
    j["w3"] = matrix_to_json(net.w3);
    j["b3"] = net.b3;
    return j;
}

QNetwork qnetwork_from_json(const nlohmann::json& j) {
    if (j.value("schema", "") != "qnet-v1") throw ConfigError("expected schema qnet-v1");
    QNetwork net;
    net.sigmoid_embed = j.value("sigmoid_embed", true);
    net.w1 = matrix_from_json(j.at("w1"));
    net.b1 = j.at("b1").get<std::vector<double>>();
    net.w2 = matrix_from_json(j.at("w2"));
    net.b2 = j.at("b2").get<std::vector<double>>();
    net.w3 = matrix_from_json(j.at("w3"));
    net.b3 = j.at("b3").get<std::vector<double>>();
    if (net.w1.rows != static_cast<int>(net.b1.size()) ||
        net.w2.rows != static_cast<int>(net.b2.size()) ||
        net.w3.rows != static_cast<int>(net.b3.size()) || net.w2.cols != net.w1.rows ||
        net.w3.cols != net.w2.rows)
        throw ConfigError("checkpoint shapes are inconsistent");
    return net;
}

void save_qnetwork(const QNetwork& net, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open checkpoint for writing: " + path);
    out << qnetwork_to_json(net).dump(2) << "\n";
}

QNetwork load_qnetwork(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open checkpoint: " + path);
    nlohmann::json j;
    in >> j;
    return qnetwork_from_json(j);
}

} // namespace etlsched
