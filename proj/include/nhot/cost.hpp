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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "nhot/codec.hpp"

namespace nhot {

enum class LayerKind { conv, depthwise, deconv, dense, other };

std::string_view to_string(LayerKind kind) noexcept;
LayerKind parse_layer_kind(std::string_view text);

/// How a layer's weights are stored and multiplied.
struct WeightScheme {
    enum class Kind { uniform, pot, nhot };

    Kind kind = Kind::uniform;
    int bits = 8;  // b_w for uniform, b for pot / nhot
    int terms = 1; // n; 1 for pot, unused for uniform

    static WeightScheme uniform(int bits) { return {Kind::uniform, bits, 1}; }
    static WeightScheme pot(int bits) { return {Kind::pot, bits, 1}; }
    static WeightScheme nhot(int bits, int terms) { return {Kind::nhot, bits, terms}; }

    /// "uniform:8", "pot:8", "nhot:8:2"
    static WeightScheme parse(std::string_view text);
    std::string to_string() const;

    friend bool operator==(const WeightScheme&, const WeightScheme&) = default;
};

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::other;
    std::uint64_t macs = 0;
    std::uint64_t weight_count = 0;
    std::uint64_t unquantized_bytes = 0;
    int b_a = 8;
    WeightScheme weight_scheme;
    /// Measured average of active shift terms per weight, if known.
    std::optional<double> mean_terms;
};

/// uniform: macs * b_a * b_w; nhot: macs * b_a * n; pot: macs * b_a.
std::uint64_t bitops(const LayerSpec& layer);

/// ceil(log2(D)) with D the number of distinct signed values the scheme can store.
int storage_bits_per_weight(const WeightScheme& scheme);

struct LayerCost {
    std::string name;
    std::uint64_t bitops = 0;
    std::optional<double> effective_bitops;
    int bits_per_weight = 0;
    std::uint64_t storage_bits = 0;
};

struct CostTotals {
    std::uint64_t bitops = 0;
    std::uint64_t storage_bits = 0;

    double storage_bytes() const noexcept { return static_cast<double>(storage_bits) / 8.0; }
};

struct CostReport {
    std::vector<LayerCost> layers;
    CostTotals totals;
    WeightScheme baseline;
    CostTotals baseline_totals;
    double bitops_ratio = 1.0;  // totals / baseline
    double storage_ratio = 1.0;
};

/// Per-layer and total cost, and the same model re-costed with every layer's
/// weights stored under `baseline`. Throws InvalidArgument on an empty list.
CostReport model_report(std::span<const LayerSpec> layers, const WeightScheme& baseline);

/// Average active terms per element of an n-hot tensor (zero counts as 0).
double mean_terms(const QuantizedTensor& qt);

std::vector<LayerSpec> layers_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const LayerSpec& layer);
nlohmann::json to_json(const CostReport& report);

} // namespace nhot
