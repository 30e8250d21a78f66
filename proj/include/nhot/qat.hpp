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

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "nhot/codebook.hpp"
#include "nhot/codec.hpp"
#include "nhot/datapath.hpp"

namespace nhot {

/// l0 * (1 + cos(epoch * pi / period)). Throws InvalidArgument for
/// period <= 0 or epoch < 0.
double cosine_lr(double epoch, double initial_rate, double period);

/// Clipped straight-through gradient: upstream where m <= x <= M, else 0.
double ste_backward(double upstream, double x, const QuantParams& params);
std::vector<double> ste_backward(std::span<const double> upstream, std::span<const double> x,
                                 const QuantParams& params);

// ---- data ----------------------------------------------------------------------

struct Dataset {
    Matrix<double> train_x; // samples x features
    std::vector<int> train_y;
    Matrix<double> test_x;
    std::vector<int> test_y;
};

/// Two isotropic unit-variance Gaussian blobs in 2-D whose means are
/// `separation` standard deviations apart; half the samples per class,
/// shuffled, first 80% train. Requires size >= 4.
Dataset make_toy_dataset(std::uint64_t seed, std::size_t size, double separation = 4.0);

// ---- network -------------------------------------------------------------------

struct DenseLayer {
    Matrix<double> weight; // out x in
    std::vector<double> bias;
};

/// Dense stack; ReLU after every layer but the last.
struct Network {
    std::vector<DenseLayer> layers;

    /// Glorot-uniform weights, zero biases.
    static Network mlp(std::span<const std::size_t> widths, std::uint64_t seed);

    std::size_t inputs() const { return layers.front().weight.cols; }
    std::size_t outputs() const { return layers.back().weight.rows; }
};

struct WeightQuantConfig {
    int bits = 6;
    int terms = 2;
    Mode mode = Mode::nhot;
};

struct TrainConfig {
    int epochs_warmup = 10;
    int epochs_total = 20;
    int minibatches_per_epoch = 0; // 0: one pass over the training set
    int batch_size = 32;
    double initial_rate = 0.02;    // l_{-1}
    double cosine_period = 10.0;   // lambda
    double weight_decay = 1e-4;
    std::uint64_t seed = 1;
    std::optional<WeightQuantConfig> weight_quant;
    int activation_bits = 8;       // 0 disables activation quantization
    double ema_decay = 0.99;
    bool restart_schedule_per_stage = true;
};

void validate(const TrainConfig& config);

/// Running range of one quantized activation site.
struct ActivationRange {
    double lower = 0.0;
    double upper = 0.0;
    bool initialized = false;

    void observe(double batch_min, double batch_max, double decay);
    QuantParams params(int bits) const;
};

/// Forward-pass weights of one layer under symmetric n-hot projection.
struct ProjectedLayer {
    Matrix<double> weight;
    QuantParams params;
    bool quantized = false; // false when the master layer is all zeros
};

/// Project every layer's master weights onto the codebook with a symmetric
/// max-abs range. Masters are read, never written.
std::vector<ProjectedLayer> project_weights(const Network& net, const Codebook& codebook);

struct EpochRecord {
    int epoch = 0; // 1-based, global
    int stage = 1; // 1 activation quantization, 2 weight quantization
    double lr = 0.0;
    double train_loss = 0.0;
    double test_accuracy = 0.0;
};

nlohmann::json to_json(const EpochRecord& record);
/// One JSON object per line.
void write_metrics(std::ostream& out, std::span<const EpochRecord> log);

/// Called once per minibatch after the forward pass, before the update.
struct TrainObserver {
    std::function<void(int stage, const Network& masters, std::span<const Matrix<double>> forward_weights,
                        std::span<const ProjectedLayer> projection)>
        on_forward;
};

struct TrainResult {
    Network network; // full-precision masters
    std::vector<EpochRecord> log;
    std::vector<ActivationRange> activation_ranges;
};

/// Stage 1 (epochs 1..warmup): quantized activations, full-precision weights.
/// Stage 2 (warmup+1..total): quantized activations and projected weights.
/// SGD with weight decay on the masters, straight-through gradients through
/// both quantizers, cosine learning rate. Throws TrainingDiverged on a
/// non-finite loss.
TrainResult train_two_stage(Network net, const Dataset& data, const TrainConfig& config,
                            const TrainObserver& observer = {});

/// Both quantizers active from the first epoch.
TrainResult train_single_stage(Network net, const Dataset& data, const TrainConfig& config,
                               const TrainObserver& observer = {});

/// Test accuracy of `net` with optional quantizers. Ranges must be
/// initialized for every hidden layer when activation_bits > 0.
double evaluate(const Network& net, const Matrix<double>& x, std::span<const int> y, int activation_bits,
                std::span<const ActivationRange> ranges, const Codebook* weight_codebook);

// ---- demo ----------------------------------------------------------------------

struct DemoConfig {
    TrainConfig train;
    std::size_t dataset_size = 1000;
    int pretrain_epochs = 20;
    std::vector<std::size_t> hidden = {16, 16};
};

DemoConfig demo_config_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const DemoConfig& config);

struct DemoReport {
    double float_accuracy = 0.0;     // pretrained, fine-tuned without quantizers
    double quantized_accuracy = 0.0; // pretrained, fine-tuned under the chosen schedule
    TrainResult float_run;
    TrainResult quantized_run;
};

/// Pretrain in full precision, then fine-tune two copies under the same
/// schedule: one without quantizers, one with them (two-stage or single-stage).
/// `observer` watches the quantized run only.
DemoReport run_demo(const DemoConfig& config, bool single_stage = false, const TrainObserver& observer = {});

} // namespace nhot
