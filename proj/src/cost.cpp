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

#include "nhot/cost.hpp"

#include <bit>
#include <charconv>
#include <set>
#include <type_traits>

#include "nhot/codebook.hpp"
#include "nhot/error.hpp"

namespace nhot {

namespace {

std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t out;
    if (__builtin_mul_overflow(a, b, &out))
        throw InvalidArgument("cost overflows 64 bits");
    return out;
}

std::uint64_t checked_add(std::uint64_t a, std::uint64_t b)
{
    std::uint64_t out;
    if (__builtin_add_overflow(a, b, &out))
        throw InvalidArgument("cost overflows 64 bits");
    return out;
}

int parse_int(std::string_view text, std::string_view whole)
{
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size())
        throw InvalidArgument("bad integer in weight scheme '" + std::string(whole) + "'");
    return v;
}

void validate(const WeightScheme& s)
{
    switch (s.kind) {
    case WeightScheme::Kind::uniform:
        if (s.bits < 1 || s.bits > 32)
            throw InvalidArgument("uniform bit width must be in [1, 32]");
        break;
    case WeightScheme::Kind::pot:
        if (s.bits < 1 || s.bits > 32)
            throw InvalidArgument("pot bit width must be in [1, 32]");
        break;
    case WeightScheme::Kind::nhot:
        if (s.bits < 2 || s.bits > 16 || s.terms < 1 || s.terms > s.bits)
            throw InvalidArgument("nhot scheme needs 2 <= b <= 16 and 1 <= n <= b");
        break;
    }
}

void validate(const LayerSpec& l)
{
    if (l.b_a < 1)
        throw InvalidArgument("layer '" + l.name + "': activation bit width must be >= 1");
    validate(l.weight_scheme);
    if (l.mean_terms && (*l.mean_terms < 0.0 || *l.mean_terms > l.weight_scheme.terms))
        throw InvalidArgument("layer '" + l.name + "': mean_terms out of range");
}

int ceil_log2(std::uint64_t d) { return d <= 1 ? 0 : static_cast<int>(std::bit_width(d - 1)); }

CostTotals totals_under(std::span<const LayerSpec> layers, const WeightScheme* override_scheme)
{
    CostTotals t;
    for (auto layer : layers) {
        if (override_scheme) {
            layer.weight_scheme = *override_scheme;
            layer.mean_terms.reset();
        }
        t.bitops = checked_add(t.bitops, bitops(layer));
        const auto bits = checked_add(checked_mul(layer.weight_count, static_cast<std::uint64_t>(
                                                                          storage_bits_per_weight(layer.weight_scheme))),
                                      checked_mul(layer.unquantized_bytes, 8));
        t.storage_bits = checked_add(t.storage_bits, bits);
    }
    return t;
}

template <typename T>
T required(const nlohmann::json& obj, const char* key, std::size_t index)
{
    if (!obj.contains(key))
        throw InvalidArgument("layer " + std::to_string(index) + ": missing key '" + key + "'");
    if constexpr (std::is_unsigned_v<T>) {
        if (!obj.at(key).is_number_unsigned())
            throw InvalidArgument("layer " + std::to_string(index) + ": '" + key + "' must be a non-negative integer");
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InvalidArgument("layer " + std::to_string(index) + ": bad value for '" + key + "'");
    }
}

WeightScheme scheme_from_json(const nlohmann::json& j, std::size_t index)
{
    if (j.is_string())
        return WeightScheme::parse(j.get<std::string>());
    if (!j.is_object())
        throw InvalidArgument("layer " + std::to_string(index) + ": weight_scheme must be a string or object");
    const auto type = required<std::string>(j, "type", index);
    if (type == "uniform")
        return WeightScheme::uniform(required<int>(j, "b_w", index));
    if (type == "pot")
        return WeightScheme::pot(required<int>(j, "b", index));
    if (type == "nhot")
        return WeightScheme::nhot(required<int>(j, "b", index), required<int>(j, "n", index));
    throw InvalidArgument("layer " + std::to_string(index) + ": unknown weight scheme type '" + type + "'");
}

nlohmann::json totals_json(const CostTotals& t)
{
    return {{"bitops", t.bitops}, {"storage_bits", t.storage_bits}, {"storage_bytes", t.storage_bytes()}};
}

} // namespace

std::string_view to_string(LayerKind kind) noexcept
{
    switch (kind) {
    case LayerKind::conv: return "conv";
    case LayerKind::depthwise: return "depthwise";
    case LayerKind::deconv: return "deconv";
    case LayerKind::dense: return "dense";
    case LayerKind::other: return "other";
    }
    return "?";
}

LayerKind parse_layer_kind(std::string_view text)
{
    if (text == "conv") return LayerKind::conv;
    if (text == "depthwise") return LayerKind::depthwise;
    if (text == "deconv") return LayerKind::deconv;
    if (text == "dense") return LayerKind::dense;
    if (text == "other") return LayerKind::other;
    throw InvalidArgument("unknown layer kind '" + std::string(text) + "'");
}

WeightScheme WeightScheme::parse(std::string_view text)
{
    const auto first = text.find(':');
    if (first == std::string_view::npos)
        throw InvalidArgument("weight scheme '" + std::string(text) + "' needs the form kind:bits[:terms]");
    const auto kind = text.substr(0, first);
    auto rest = text.substr(first + 1);
    const auto second = rest.find(':');

    WeightScheme s;
    if (kind == "nhot") {
        if (second == std::string_view::npos)
            throw InvalidArgument("nhot scheme needs nhot:b:n");
        s = nhot(parse_int(rest.substr(0, second), text), parse_int(rest.substr(second + 1), text));
    } else if (second != std::string_view::npos) {
        throw InvalidArgument("weight scheme '" + std::string(text) + "' has too many fields");
    } else if (kind == "uniform") {
        s = uniform(parse_int(rest, text));
    } else if (kind == "pot") {
        s = pot(parse_int(rest, text));
    } else {
        throw InvalidArgument("unknown weight scheme '" + std::string(kind) + "'");
    }
    validate(s);
    return s;
}

std::string WeightScheme::to_string() const
{
    switch (kind) {
    case Kind::uniform: return "uniform:" + std::to_string(bits);
    case Kind::pot: return "pot:" + std::to_string(bits);
    case Kind::nhot: return "nhot:" + std::to_string(bits) + ":" + std::to_string(terms);
    }
    return "?";
}

std::uint64_t bitops(const LayerSpec& layer)
{
    validate(layer);
    const auto per_mac = [&]() -> std::uint64_t {
        switch (layer.weight_scheme.kind) {
        case WeightScheme::Kind::uniform: return static_cast<std::uint64_t>(layer.weight_scheme.bits);
        case WeightScheme::Kind::nhot: return static_cast<std::uint64_t>(layer.weight_scheme.terms);
        case WeightScheme::Kind::pot: return 1;
        }
        return 0;
    }();
    return checked_mul(checked_mul(layer.macs, static_cast<std::uint64_t>(layer.b_a)), per_mac);
}

int storage_bits_per_weight(const WeightScheme& scheme)
{
    validate(scheme);
    std::uint64_t magnitudes = 0; // including zero
    switch (scheme.kind) {
    case WeightScheme::Kind::uniform:
        magnitudes = std::uint64_t{1} << scheme.bits;
        break;
    case WeightScheme::Kind::pot:
        magnitudes = static_cast<std::uint64_t>(scheme.bits) + 1;
        break;
    case WeightScheme::Kind::nhot:
        magnitudes = gen_codebook(scheme.bits, scheme.terms, Mode::nhot).size();
        break;
    }
    return ceil_log2(2 * (magnitudes - 1) + 1);
}

CostReport model_report(std::span<const LayerSpec> layers, const WeightScheme& baseline)
{
    if (layers.empty())
        throw InvalidArgument("cost report needs at least one layer");
    validate(baseline);

    CostReport report;
    report.baseline = baseline;
    for (const auto& layer : layers) {
        LayerCost c;
        c.name = layer.name;
        c.bitops = bitops(layer);
        c.bits_per_weight = storage_bits_per_weight(layer.weight_scheme);
        c.storage_bits = checked_add(checked_mul(layer.weight_count, static_cast<std::uint64_t>(c.bits_per_weight)),
                                     checked_mul(layer.unquantized_bytes, 8));
        if (layer.mean_terms && layer.weight_scheme.kind != WeightScheme::Kind::uniform)
            c.effective_bitops = static_cast<double>(layer.macs) * layer.b_a * *layer.mean_terms;
        report.layers.push_back(std::move(c));
    }
    report.totals = totals_under(layers, nullptr);
    report.baseline_totals = totals_under(layers, &baseline);
    report.bitops_ratio = report.baseline_totals.bitops == 0
                              ? 1.0
                              : static_cast<double>(report.totals.bitops) / static_cast<double>(report.baseline_totals.bitops);
    report.storage_ratio = report.baseline_totals.storage_bits == 0
                               ? 1.0
                               : static_cast<double>(report.totals.storage_bits) /
                                     static_cast<double>(report.baseline_totals.storage_bits);
    return report;
}

double mean_terms(const QuantizedTensor& qt)
{
    if (qt.codebook.mode == Mode::uniform)
        throw Unsupported("uniform tensors have no shift-term codes");
    if (qt.elements.empty())
        return 0.0;
    const auto book = gen_codebook(qt.codebook.bit_width, qt.codebook.num_terms, qt.codebook.mode);
    double total = 0.0;
    for (const auto& e : qt.elements)
        total += static_cast<double>(book.code_at(e.index).size());
    return total / static_cast<double>(qt.elements.size());
}

std::vector<LayerSpec> layers_from_json(const nlohmann::json& doc)
{
    static const std::set<std::string> known = {"name",          "kind", "macs",          "weight_count",
                                                "unquantized_bytes", "b_a",  "weight_scheme", "mean_terms"};
    if (!doc.is_array())
        throw InvalidArgument("layer document must be a JSON array");
    std::vector<LayerSpec> layers;
    for (std::size_t i = 0; i < doc.size(); ++i) {
        const auto& obj = doc[i];
        if (!obj.is_object())
            throw InvalidArgument("layer " + std::to_string(i) + " is not an object");
        for (const auto& [key, _] : obj.items())
            if (!known.contains(key))
                throw InvalidArgument("layer " + std::to_string(i) + ": unknown key '" + key + "'");
        LayerSpec l;
        l.name = required<std::string>(obj, "name", i);
        l.kind = parse_layer_kind(required<std::string>(obj, "kind", i));
        l.macs = required<std::uint64_t>(obj, "macs", i);
        l.weight_count = required<std::uint64_t>(obj, "weight_count", i);
        l.unquantized_bytes = obj.contains("unquantized_bytes") ? required<std::uint64_t>(obj, "unquantized_bytes", i) : 0;
        l.b_a = required<int>(obj, "b_a", i);
        l.weight_scheme = scheme_from_json(obj.at("weight_scheme"), i);
        if (obj.contains("mean_terms"))
            l.mean_terms = required<double>(obj, "mean_terms", i);
        validate(l);
        layers.push_back(std::move(l));
    }
    return layers;
}

nlohmann::json to_json(const LayerSpec& layer)
{
    nlohmann::json j = {{"name", layer.name},
                        {"kind", std::string(to_string(layer.kind))},
                        {"macs", layer.macs},
                        {"weight_count", layer.weight_count},
                        {"unquantized_bytes", layer.unquantized_bytes},
                        {"b_a", layer.b_a},
                        {"weight_scheme", layer.weight_scheme.to_string()}};
    if (layer.mean_terms)
        j["mean_terms"] = *layer.mean_terms;
    return j;
}

nlohmann::json to_json(const CostReport& report)
{
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& c : report.layers) {
        nlohmann::json j = {{"name", c.name},
                            {"bitops", c.bitops},
                            {"bits_per_weight", c.bits_per_weight},
                            {"storage_bits", c.storage_bits}};
        if (c.effective_bitops)
            j["effective_bitops"] = *c.effective_bitops;
        layers.push_back(std::move(j));
    }
    return {{"layers", std::move(layers)},
            {"totals", totals_json(report.totals)},
            {"baseline", {{"scheme", report.baseline.to_string()}, {"totals", totals_json(report.baseline_totals)}}},
            {"ratios", {{"bitops", report.bitops_ratio}, {"storage", report.storage_ratio}}}};
}

} // namespace nhot
