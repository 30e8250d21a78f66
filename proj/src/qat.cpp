// SPDX-License-Identifier: Apache-2.0
// ----------------------------------------------------------------------------
// Copyright 2026 The nhot Authors
//
// Licensed under the Apache License, Version 2.0 (the "License"); you may not
// use this file except in compliance with the License. You may obtain a copy
// of the License at:
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.
// ----------------------------------------------------------------------------

#include "nhot/qat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <ostream>
#include <random>
#include <set>

#include "nhot/error.hpp"

namespace nhot {

namespace {

struct BatchState {
    std::vector<Matrix<double>> inputs;      // A_l, input to layer l
    std::vector<Matrix<double>> pre_act;     // Z_l
    std::vector<Matrix<double>> post_relu;   // H_l, hidden layers only
    std::vector<QuantParams> act_params;     // per hidden layer, when quantizing
};

struct ForwardSetup {
    std::span<const Matrix<double>> weights;
    const Network* net = nullptr;
    int activation_bits = 0;
    std::vector<ActivationRange>* ranges = nullptr;
    bool calibrate = false;
    double ema_decay = 0.99;
};

Matrix<double> gather_rows(const Matrix<double>& x, std::span<const std::size_t> rows)
{
    Matrix<double> out(rows.size(), x.cols);
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < x.cols; ++c)
            out(r, c) = x(rows[r], c);
    return out;
}

// Z = A W^T + b
Matrix<double> affine(const Matrix<double>& a, const Matrix<double>& w, const std::vector<double>& bias)
{
    Matrix<double> z(a.rows, w.rows);
    for (std::size_t s = 0; s < a.rows; ++s) {
        for (std::size_t j = 0; j < w.rows; ++j) {
            double acc = 0.0;
            for (std::size_t i = 0; i < w.cols; ++i)
                acc += a(s, i) * w(j, i);
            z(s, j) = acc + bias[j];
        }
    }
    return z;
}

BatchState forward(const ForwardSetup& setup, Matrix<double> input)
{
    const auto& layers = setup.net->layers;
    BatchState st;
    st.inputs.push_back(std::move(input));
    for (std::size_t l = 0; l < layers.size(); ++l) {
        auto z = affine(st.inputs.back(), setup.weights[l], layers[l].bias);
        if (l + 1 == layers.size()) {
            st.pre_act.push_back(std::move(z));
            break;
        }
        Matrix<double> h(z.rows, z.cols);
        for (std::size_t k = 0; k < z.data.size(); ++k)
            h.data[k] = std::max(z.data[k], 0.0);

        Matrix<double> a = h;
        if (setup.activation_bits > 0) {
            auto& range = (*setup.ranges)[l];
            if (setup.calibrate) {
                const auto [lo, hi] = std::minmax_element(h.data.begin(), h.data.end());
                range.observe(*lo, *hi, setup.ema_decay);
            }
            const auto params = range.params(setup.activation_bits);
            for (auto& v : a.data)
                v = uniform_quantize(v, params);
            st.act_params.push_back(params);
        }
        st.pre_act.push_back(std::move(z));
        st.post_relu.push_back(std::move(h));
        st.inputs.push_back(std::move(a));
    }
    return st;
}

// Mean softmax cross-entropy; writes dLoss/dlogits into `grad`.
double softmax_xent(const Matrix<double>& logits, std::span<const int> labels, Matrix<double>& grad)
{
    grad = Matrix<double>(logits.rows, logits.cols);
    const double inv_batch = 1.0 / static_cast<double>(logits.rows);
    double loss = 0.0;
    for (std::size_t s = 0; s < logits.rows; ++s) {
        double top = logits(s, 0);
        for (std::size_t c = 1; c < logits.cols; ++c)
            top = std::max(top, logits(s, c));
        double denom = 0.0;
        for (std::size_t c = 0; c < logits.cols; ++c)
            denom += std::exp(logits(s, c) - top);
        const double log_denom = std::log(denom) + top;
        loss += log_denom - logits(s, static_cast<std::size_t>(labels[s]));
        for (std::size_t c = 0; c < logits.cols; ++c) {
            const double p = std::exp(logits(s, c) - log_denom);
            const double target = static_cast<int>(c) == labels[s] ? 1.0 : 0.0;
            grad(s, c) = (p - target) * inv_batch;
        }
    }
    return loss * inv_batch;
}

std::size_t argmax_row(const Matrix<double>& m, std::size_t row)
{
    std::size_t best = 0;
    for (std::size_t c = 1; c < m.cols; ++c)
        if (m(row, c) > m(row, best))
            best = c;
    return best;
}

std::vector<Matrix<double>> master_weights(const Network& net)
{
    std::vector<Matrix<double>> w;
    for (const auto& l : net.layers)
        w.push_back(l.weight);
    return w;
}

} // namespace

// ---- schedule and STE ----------------------------------------------------------

double cosine_lr(double epoch, double initial_rate, double period)
{
    if (!(period > 0.0))
        throw InvalidArgument("cosine period must be positive");
    if (!(epoch >= 0.0))
        throw InvalidArgument("epoch must be non-negative");
    return initial_rate * (1.0 + std::cos(epoch / period * std::numbers::pi));
}

double ste_backward(double upstream, double x, const QuantParams& params)
{
    return (x >= params.lower && x <= params.upper) ? upstream : 0.0;
}

std::vector<double> ste_backward(std::span<const double> upstream, std::span<const double> x,
                                 const QuantParams& params)
{
    if (upstream.size() != x.size())
        throw InvalidArgument("gradient and input sizes differ");
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = ste_backward(upstream[i], x[i], params);
    return out;
}

// ---- data ----------------------------------------------------------------------

Dataset make_toy_dataset(std::uint64_t seed, std::size_t size, double separation)
{
    if (size < 4)
        throw InvalidArgument("toy dataset needs at least 2 samples per class");
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> noise(0.0, 1.0);

    const std::size_t per_class0 = size / 2;
    std::vector<std::array<double, 2>> points(size);
    std::vector<int> labels(size);
    for (std::size_t i = 0; i < size; ++i) {
        const int label = i < per_class0 ? 0 : 1;
        const double cx = (label == 0 ? -0.5 : 0.5) * separation;
        points[i] = {cx + noise(rng), noise(rng)};
        labels[i] = label;
    }
    std::vector<std::size_t> order(size);
    for (std::size_t i = 0; i < size; ++i)
        order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);

    const std::size_t train = size * 4 / 5;
    Dataset d;
    d.train_x = Matrix<double>(train, 2);
    d.test_x = Matrix<double>(size - train, 2);
    for (std::size_t k = 0; k < size; ++k) {
        const auto& p = points[order[k]];
        auto& x = k < train ? d.train_x : d.test_x;
        const auto row = k < train ? k : k - train;
        x(row, 0) = p[0];
        x(row, 1) = p[1];
        (k < train ? d.train_y : d.test_y).push_back(labels[order[k]]);
    }
    return d;
}

// ---- network -------------------------------------------------------------------

Network Network::mlp(std::span<const std::size_t> widths, std::uint64_t seed)
{
    if (widths.size() < 2)
        throw InvalidArgument("network needs at least an input and an output width");
    std::mt19937_64 rng(seed);
    Network net;
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
        const auto in = widths[l];
        const auto out = widths[l + 1];
        if (in == 0 || out == 0)
            throw InvalidArgument("layer widths must be positive");
        const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
        std::uniform_real_distribution<double> init(-limit, limit);
        DenseLayer layer{Matrix<double>(out, in), std::vector<double>(out, 0.0)};
        for (auto& w : layer.weight.data)
            w = init(rng);
        net.layers.push_back(std::move(layer));
    }
    return net;
}

void ActivationRange::observe(double batch_min, double batch_max, double decay)
{
    if (!initialized) {
        lower = batch_min;
        upper = batch_max;
        initialized = true;
        return;
    }
    lower = decay * lower + (1.0 - decay) * batch_min;
    upper = decay * upper + (1.0 - decay) * batch_max;
}

QuantParams ActivationRange::params(int bits) const
{
    if (!initialized)
        throw InvalidArgument("activation range used before calibration");
    // A dead layer (all zeros) still needs a usable step.
    const double top = upper > lower ? upper : lower + 1e-6;
    return QuantParams::affine(lower, top, bits);
}

std::vector<ProjectedLayer> project_weights(const Network& net, const Codebook& codebook)
{
    std::vector<ProjectedLayer> out;
    out.reserve(net.layers.size());
    for (const auto& layer : net.layers) {
        ProjectedLayer p;
        p.weight = Matrix<double>(layer.weight.rows, layer.weight.cols);
        double max_abs = 0.0;
        for (double w : layer.weight.data)
            max_abs = std::max(max_abs, std::fabs(w));
        if (max_abs > 0.0) {
            p.params = QuantParams::symmetric_range(max_abs, codebook.bit_width());
            p.quantized = true;
            for (std::size_t k = 0; k < layer.weight.data.size(); ++k)
                p.weight.data[k] = project(layer.weight.data[k], codebook, p.params).value(p.params.scale);
        }
        out.push_back(std::move(p));
    }
    return out;
}

// ---- training ------------------------------------------------------------------

void validate(const TrainConfig& c)
{
    if (c.epochs_warmup < 0 || c.epochs_total < c.epochs_warmup)
        throw InvalidArgument("need 0 <= epochs_warmup <= epochs_total");
    if (c.batch_size < 1)
        throw InvalidArgument("batch_size must be positive");
    if (c.minibatches_per_epoch < 0)
        throw InvalidArgument("minibatches_per_epoch must be >= 0");
    if (!(c.initial_rate > 0.0) || !(c.cosine_period > 0.0))
        throw InvalidArgument("learning rate and cosine period must be positive");
    if (c.weight_decay < 0.0)
        throw InvalidArgument("weight decay must be non-negative");
    if (c.activation_bits < 0 || c.activation_bits == 1 || c.activation_bits > 16)
        throw InvalidArgument("activation bits must be 0 (off) or in [2, 16]");
    if (!(c.ema_decay >= 0.0 && c.ema_decay < 1.0))
        throw InvalidArgument("ema_decay must be in [0, 1)");
    if (c.weight_quant) {
        const auto& q = *c.weight_quant;
        if (q.mode == Mode::uniform)
            throw InvalidArgument("weight quantization mode must be a shift-term codebook");
        gen_codebook(q.bits, q.terms, q.mode); // validates b and n
    }
}

double evaluate(const Network& net, const Matrix<double>& x, std::span<const int> y, int activation_bits,
                std::span<const ActivationRange> ranges, const Codebook* weight_codebook)
{
    if (x.rows == 0 || x.rows != y.size())
        throw InvalidArgument("evaluation set is empty or mislabelled");
    std::vector<Matrix<double>> weights;
    if (weight_codebook) {
        for (auto& p : project_weights(net, *weight_codebook))
            weights.push_back(std::move(p.weight));
    } else {
        weights = master_weights(net);
    }
    std::vector<ActivationRange> frozen(ranges.begin(), ranges.end());
    if (activation_bits > 0 && frozen.size() + 1 < net.layers.size())
        throw InvalidArgument("missing activation ranges");
    ForwardSetup setup{weights, &net, activation_bits, &frozen, false, 0.0};
    const auto st = forward(setup, x);
    const auto& logits = st.pre_act.back();
    std::size_t correct = 0;
    for (std::size_t s = 0; s < logits.rows; ++s)
        if (static_cast<int>(argmax_row(logits, s)) == y[s])
            ++correct;
    return static_cast<double>(correct) / static_cast<double>(logits.rows);
}

TrainResult train_two_stage(Network net, const Dataset& data, const TrainConfig& config, const TrainObserver& observer)
{
    validate(config);
    if (data.train_x.rows == 0 || data.train_x.rows != data.train_y.size())
        throw InvalidArgument("training set is empty or mislabelled");
    if (net.layers.empty() || net.inputs() != data.train_x.cols)
        throw InvalidArgument("network input width does not match the data");

    std::optional<Codebook> codebook;
    if (config.weight_quant)
        codebook = gen_codebook(config.weight_quant->bits, config.weight_quant->terms, config.weight_quant->mode);

    const std::size_t n_train = data.train_x.rows;
    const std::size_t batch = static_cast<std::size_t>(config.batch_size);
    const std::size_t steps = config.minibatches_per_epoch > 0 ? static_cast<std::size_t>(config.minibatches_per_epoch)
                                                               : (n_train + batch - 1) / batch;

    TrainResult result;
    result.activation_ranges.resize(net.layers.size() - 1);
    std::mt19937_64 rng(config.seed);
    std::vector<std::size_t> order(n_train);
    for (std::size_t i = 0; i < n_train; ++i)
        order[i] = i;

    for (int epoch = 1; epoch <= config.epochs_total; ++epoch) {
        const int stage = epoch <= config.epochs_warmup ? 1 : 2;
        const int stage_start = stage == 1 ? 1 : config.epochs_warmup + 1;
        const int schedule_epoch = config.restart_schedule_per_stage ? epoch - stage_start : epoch - 1;
        const double lr = cosine_lr(schedule_epoch, config.initial_rate, config.cosine_period);
        const bool quantize_weights = stage == 2 && codebook.has_value();
        const bool calibrate = config.activation_bits > 0 && (stage == 1 || config.epochs_warmup == 0);

        std::shuffle(order.begin(), order.end(), rng);
        double loss_sum = 0.0;
        for (std::size_t t = 0; t < steps; ++t) {
            std::vector<std::size_t> rows(batch);
            for (std::size_t k = 0; k < batch; ++k)
                rows[k] = order[(t * batch + k) % n_train];
            const auto x = gather_rows(data.train_x, rows);
            std::vector<int> y(batch);
            for (std::size_t k = 0; k < batch; ++k)
                y[k] = data.train_y[rows[k]];

            std::vector<ProjectedLayer> projection;
            std::vector<Matrix<double>> weights;
            BatchState st;
            try {
                if (quantize_weights) {
                    projection = project_weights(net, *codebook);
                    for (const auto& p : projection)
                        weights.push_back(p.weight);
                } else {
                    weights = master_weights(net);
                }
                ForwardSetup setup{weights, &net, config.activation_bits, &result.activation_ranges, calibrate,
                                   config.ema_decay};
                st = forward(setup, x);
            } catch (const InvalidInput&) {
                // Overflowed weights or activations reach the quantizers before the loss.
                throw TrainingDiverged("weights or activations are not finite", epoch);
            }
            if (observer.on_forward)
                observer.on_forward(stage, net, weights, projection);

            Matrix<double> grad;
            const double loss = softmax_xent(st.pre_act.back(), y, grad);
            if (!std::isfinite(loss))
                throw TrainingDiverged("loss is not finite", epoch);
            loss_sum += loss;

            for (std::size_t l = net.layers.size(); l-- > 0;) {
                const auto& a = st.inputs[l];
                auto& layer = net.layers[l];
                Matrix<double> dw(layer.weight.rows, layer.weight.cols);
                std::vector<double> db(layer.bias.size(), 0.0);
                for (std::size_t s = 0; s < grad.rows; ++s) {
                    for (std::size_t j = 0; j < grad.cols; ++j) {
                        const double g = grad(s, j);
                        db[j] += g;
                        for (std::size_t i = 0; i < a.cols; ++i)
                            dw(j, i) += g * a(s, i);
                    }
                }

                if (l > 0) {
                    Matrix<double> prev(grad.rows, a.cols);
                    const auto& w = weights[l];
                    for (std::size_t s = 0; s < grad.rows; ++s) {
                        for (std::size_t i = 0; i < a.cols; ++i) {
                            double acc = 0.0;
                            for (std::size_t j = 0; j < grad.cols; ++j)
                                acc += grad(s, j) * w(j, i);
                            if (config.activation_bits > 0)
                                acc = ste_backward(acc, st.post_relu[l - 1](s, i), st.act_params[l - 1]);
                            prev(s, i) = st.pre_act[l - 1](s, i) > 0.0 ? acc : 0.0;
                        }
                    }
                    grad = std::move(prev);
                }

                // Straight-through: the projected weights' gradient lands on the masters.
                for (std::size_t k = 0; k < layer.weight.data.size(); ++k)
                    layer.weight.data[k] -= lr * (dw.data[k] + config.weight_decay * layer.weight.data[k]);
                for (std::size_t j = 0; j < layer.bias.size(); ++j)
                    layer.bias[j] -= lr * db[j];
            }
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.stage = stage;
        rec.lr = lr;
        rec.train_loss = loss_sum / static_cast<double>(steps);
        if (!std::isfinite(rec.train_loss))
            throw TrainingDiverged("loss is not finite", epoch);
        rec.test_accuracy = data.test_x.rows == 0
                                ? 0.0
                                : evaluate(net, data.test_x, data.test_y, config.activation_bits,
                                           result.activation_ranges, quantize_weights ? &*codebook : nullptr);
        result.log.push_back(rec);
    }
    result.network = std::move(net);
    return result;
}

TrainResult train_single_stage(Network net, const Dataset& data, const TrainConfig& config,
                               const TrainObserver& observer)
{
    auto single = config;
    single.epochs_warmup = 0;
    return train_two_stage(std::move(net), data, single, observer);
}

nlohmann::json to_json(const EpochRecord& r)
{
    return {{"epoch", r.epoch},
            {"stage", r.stage},
            {"lr", r.lr},
            {"train_loss", r.train_loss},
            {"test_accuracy", r.test_accuracy}};
}

void write_metrics(std::ostream& out, std::span<const EpochRecord> log)
{
    for (const auto& r : log)
        out << to_json(r).dump() << '\n';
}

// ---- demo ----------------------------------------------------------------------

DemoConfig demo_config_from_json(const nlohmann::json& doc)
{
    static const std::set<std::string> known = {
        "epochs_warmup", "epochs_total", "minibatches_per_epoch", "batch_size",   "initial_rate",
        "cosine_period", "weight_decay", "seed",                  "weight_quant", "b_a",
        "ema_decay",     "restart_schedule_per_stage", "dataset_size", "pretrain_epochs", "hidden"};
    if (!doc.is_object())
        throw InvalidArgument("training config must be a JSON object");
    for (const auto& [key, _] : doc.items())
        if (!known.contains(key))
            throw InvalidArgument("unknown training config key '" + key + "'");

    DemoConfig c;
    auto& t = c.train;
    try {
        t.epochs_warmup = doc.value("epochs_warmup", t.epochs_warmup);
        t.epochs_total = doc.value("epochs_total", t.epochs_total);
        t.minibatches_per_epoch = doc.value("minibatches_per_epoch", t.minibatches_per_epoch);
        t.batch_size = doc.value("batch_size", t.batch_size);
        t.initial_rate = doc.value("initial_rate", t.initial_rate);
        t.cosine_period = doc.value("cosine_period", t.cosine_period);
        t.weight_decay = doc.value("weight_decay", t.weight_decay);
        t.seed = doc.value("seed", t.seed);
        t.activation_bits = doc.value("b_a", t.activation_bits);
        t.ema_decay = doc.value("ema_decay", t.ema_decay);
        t.restart_schedule_per_stage = doc.value("restart_schedule_per_stage", t.restart_schedule_per_stage);
        c.dataset_size = doc.value("dataset_size", c.dataset_size);
        c.pretrain_epochs = doc.value("pretrain_epochs", c.pretrain_epochs);
        if (doc.contains("hidden"))
            c.hidden = doc.at("hidden").get<std::vector<std::size_t>>();
        t.weight_quant = WeightQuantConfig{};
        if (doc.contains("weight_quant")) {
            const auto& q = doc.at("weight_quant");
            if (q.is_null()) {
                t.weight_quant.reset();
            } else {
                t.weight_quant->bits = q.value("b", t.weight_quant->bits);
                t.weight_quant->terms = q.value("n", t.weight_quant->terms);
                t.weight_quant->mode = parse_mode(q.value("mode", std::string("nhot")));
            }
        }
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("bad training config: ") + e.what());
    }
    validate(t);
    if (c.pretrain_epochs < 0)
        throw InvalidArgument("pretrain_epochs must be >= 0");
    return c;
}

nlohmann::json to_json(const DemoConfig& c)
{
    const auto& t = c.train;
    nlohmann::json j = {{"epochs_warmup", t.epochs_warmup},
                        {"epochs_total", t.epochs_total},
                        {"minibatches_per_epoch", t.minibatches_per_epoch},
                        {"batch_size", t.batch_size},
                        {"initial_rate", t.initial_rate},
                        {"cosine_period", t.cosine_period},
                        {"weight_decay", t.weight_decay},
                        {"seed", t.seed},
                        {"b_a", t.activation_bits},
                        {"ema_decay", t.ema_decay},
                        {"restart_schedule_per_stage", t.restart_schedule_per_stage},
                        {"dataset_size", c.dataset_size},
                        {"pretrain_epochs", c.pretrain_epochs},
                        {"hidden", c.hidden}};
    if (t.weight_quant)
        j["weight_quant"] = {{"b", t.weight_quant->bits},
                             {"n", t.weight_quant->terms},
                             {"mode", std::string(to_string(t.weight_quant->mode))}};
    else
        j["weight_quant"] = nullptr;
    return j;
}

DemoReport run_demo(const DemoConfig& config, bool single_stage, const TrainObserver& observer)
{
    validate(config.train);
    const auto data = make_toy_dataset(config.train.seed, config.dataset_size);

    std::vector<std::size_t> widths{data.train_x.cols};
    widths.insert(widths.end(), config.hidden.begin(), config.hidden.end());
    widths.push_back(2);
    auto net = Network::mlp(widths, config.train.seed);

    TrainConfig plain = config.train;
    plain.weight_quant.reset();
    plain.activation_bits = 0;

    if (config.pretrain_epochs > 0) {
        TrainConfig pre = plain;
        pre.epochs_warmup = 0;
        pre.epochs_total = config.pretrain_epochs;
        pre.cosine_period = static_cast<double>(config.pretrain_epochs);
        pre.seed = config.train.seed + 0x9e3779b97f4a7c15ULL;
        net = train_two_stage(std::move(net), data, pre).network;
    }

    TrainConfig float_schedule = plain;
    if (single_stage)
        float_schedule.epochs_warmup = 0;

    DemoReport report;
    report.float_run = train_two_stage(net, data, float_schedule);
    report.quantized_run = single_stage ? train_single_stage(net, data, config.train, observer)
                                        : train_two_stage(net, data, config.train, observer);
    report.float_accuracy = report.float_run.log.empty() ? 0.0 : report.float_run.log.back().test_accuracy;
    report.quantized_accuracy =
        report.quantized_run.log.empty() ? 0.0 : report.quantized_run.log.back().test_accuracy;
    return report;
}

} // namespace nhot
