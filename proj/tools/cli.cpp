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

#include "cli.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "nhot/codebook.hpp"
#include "nhot/codec.hpp"
#include "nhot/cost.hpp"
#include "nhot/datapath.hpp"
#include "nhot/error.hpp"
#include "nhot/qat.hpp"

namespace nhot::cli {

namespace {

using nlohmann::json;

// Thrown for a verification mismatch; maps to exit code 1.
struct VerificationFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

json code_json(const NhotCode& code)
{
    json terms = json::array();
    for (const auto& t : code.terms)
        terms.push_back({{"sign", to_int(t.sign)}, {"exponent", t.exponent}});
    return terms;
}

struct CodebookArgs {
    int bits = 8;
    int terms = 2;
    std::string mode = "nhot";
    bool json = false;
};

void cmd_codebook(const CodebookArgs& a, std::ostream& out)
{
    const auto mode = parse_mode(a.mode);
    const auto book = gen_codebook(a.bits, a.terms, mode);
    const auto additive = count_additive(a.bits, a.terms);
    std::optional<std::uint64_t> nhot_count;
    if (a.bits >= 3)
        nhot_count = count_nhot(a.bits, 2);
    const double frac = std::ldexp(1.0, -(a.bits - 1));

    if (a.json) {
        json levels = json::array();
        for (std::size_t i = 0; i < book.size(); ++i) {
            json level = {{"magnitude", book.magnitudes()[i]}, {"fraction", book.magnitudes()[i] * frac}};
            if (book.has_codes())
                level["code"] = code_json(book.code_at(i));
            levels.push_back(std::move(level));
        }
        json doc = {{"mode", std::string(to_string(mode))},
                    {"bits", a.bits},
                    {"terms", a.terms},
                    {"count", book.size()},
                    {"signed_count", book.signed_level_count()},
                    {"count_additive", additive},
                    {"count_nhot_n2", nhot_count ? json(*nhot_count) : json(nullptr)},
                    {"levels", std::move(levels)}};
        out << doc.dump(2) << '\n';
        return;
    }

    out << "mode " << to_string(mode) << ", b=" << a.bits << ", n=" << a.terms << '\n';
    out << "count " << book.size() << " magnitudes (" << book.signed_level_count() << " signed values)\n";
    out << "count_additive(" << a.bits << "," << a.terms << ") = " << additive << '\n';
    if (nhot_count)
        out << "count_nhot(" << a.bits << ",2) = " << *nhot_count << '\n';
    out << "magnitude\tfraction\tcode\n";
    for (std::size_t i = 0; i < book.size(); ++i) {
        out << book.magnitudes()[i] << '\t' << std::setprecision(10) << book.magnitudes()[i] * frac << '\t'
            << (book.has_codes() ? to_string(book.code_at(i)) : std::string("-")) << '\n';
    }
}

struct QuantizeArgs {
    std::string in, out;
    int bits = 8;
    int terms = 2;
    std::string mode = "nhot";
    std::string convention = "sign-magnitude";
    bool affine = false;
    bool json = false;
};

void cmd_quantize(const QuantizeArgs& a, std::ostream& out)
{
    const auto mode = parse_mode(a.mode);
    const auto tensor = unpack_float_tensor(read_file(a.in));
    RangePolicy policy = range_policy::SymmetricMaxAbs{a.convention == "signed-range" ? ScaleConvention::signed_range
                                                                                        : ScaleConvention::sign_magnitude};
    if (a.affine)
        policy = range_policy::AffineMinMax{};
    const auto qt = quantize_tensor(tensor, CodebookRef{mode, a.bits, a.terms}, policy);
    const auto bytes = pack(qt);
    write_file(a.out, bytes);

    const auto restored = dequantize(qt);
    const double mse = mean_squared_error(tensor.values, restored.values);
    const int width = element_bits(level_count(qt));
    if (a.json) {
        out << json{{"elements", qt.elements.size()},
                    {"mode", std::string(to_string(mode))},
                    {"bits", a.bits},
                    {"terms", a.terms},
                    {"scale", qt.params.scale},
                    {"lower", qt.params.lower},
                    {"upper", qt.params.upper},
                    {"mse", mse},
                    {"element_bits", width},
                    {"file_bytes", bytes.size()}}
                   .dump(2)
            << '\n';
        return;
    }
    out << "quantized " << qt.elements.size() << " elements (" << to_string(mode) << ", b=" << a.bits
        << ", n=" << a.terms << ")\n"
        << "scale " << std::setprecision(17) << qt.params.scale << ", range [" << qt.params.lower << ", "
        << qt.params.upper << "]\n"
        << "mse " << mse << '\n'
        << "element bits " << width << ", file " << bytes.size() << " bytes\n";
}

struct DequantizeArgs {
    std::string in, out;
    bool json = false;
};

void cmd_dequantize(const DequantizeArgs& a, std::ostream& out)
{
    const auto qt = unpack(read_file(a.in));
    const auto tensor = dequantize(qt);
    write_file(a.out, pack_float_tensor(tensor));
    if (a.json)
        out << json{{"elements", tensor.values.size()}, {"shape", tensor.shape}}.dump() << '\n';
    else
        out << "dequantized " << tensor.values.size() << " elements\n";
}

struct SimulateArgs {
    int bits = 8;
    int terms = 2;
    std::string mode = "nhot";
    int activation_bits = 8;
    bool exhaustive = false;
    std::uint64_t seed = 1;
    std::uint64_t trials = 100000;
    std::optional<std::int64_t> trace_weight;
    std::int64_t trace_activation = 1;
    bool json = false;
};

void cmd_simulate(const SimulateArgs& a, std::ostream& out)
{
    const auto mode = parse_mode(a.mode);
    if (mode == Mode::uniform)
        throw InvalidArgument("simulate needs a shift-term codebook, not uniform");
    if (a.activation_bits < 1 || a.activation_bits > 24)
        throw InvalidArgument("activation bits must be in [1, 24]");
    const auto book = gen_codebook(a.bits, a.terms, mode);

    if (a.trace_weight) {
        const auto w = *a.trace_weight;
        const auto magnitude = static_cast<std::uint32_t>(w < 0 ? -w : w);
        const auto p = plan(book.code_of(magnitude), a.terms, w < 0 ? Sign::negative : Sign::positive);
        const auto r = shift_add_multiply(a.trace_activation, p, a.activation_bits);
        out << "step\tsign\tshift\tpartial\n";
        write_trace(out, r.trace);
        if (r.product != a.trace_activation * w)
            throw VerificationFailed("trace product does not match the integer product");
        return;
    }

    std::uint64_t checked = 0, mismatches = 0;
    auto check = [&](std::int64_t activation, std::uint32_t index, Sign sign) {
        const auto magnitude = static_cast<std::int64_t>(book.magnitudes()[index]);
        const auto r = shift_add_multiply(activation, plan(book.code_at(index), a.terms, sign), a.activation_bits);
        const std::int64_t golden = activation * (to_int(sign) * magnitude);
        ++checked;
        if (r.product != golden)
            ++mismatches;
    };

    const std::int64_t top = std::int64_t{1} << a.activation_bits;
    if (a.exhaustive) {
        for (std::uint32_t i = 0; i < book.size(); ++i) {
            for (Sign sign : {Sign::positive, Sign::negative}) {
                if (i == 0 && sign == Sign::negative)
                    continue;
                for (std::int64_t act = 0; act < top; ++act)
                    check(act, i, sign);
            }
        }
    } else {
        std::mt19937_64 rng(a.seed);
        std::uniform_int_distribution<std::int64_t> pick_act(0, top - 1);
        std::uniform_int_distribution<std::uint32_t> pick_idx(0, static_cast<std::uint32_t>(book.size() - 1));
        for (std::uint64_t t = 0; t < a.trials; ++t) {
            const auto idx = pick_idx(rng);
            const Sign sign = (rng() & 1u) && idx != 0 ? Sign::negative : Sign::positive;
            check(pick_act(rng), idx, sign);
        }
    }

    if (a.json) {
        out << json{{"mode", std::string(to_string(mode))},
                    {"bits", a.bits},
                    {"terms", a.terms},
                    {"activation_bits", a.activation_bits},
                    {"signed_values", book.signed_level_count()},
                    {"checked", checked},
                    {"mismatches", mismatches}}
                   .dump()
            << '\n';
    } else {
        out << "checked " << checked << " products over " << book.signed_level_count() << " signed values, "
            << mismatches << " mismatches\n";
    }
    if (mismatches != 0)
        throw VerificationFailed(std::to_string(mismatches) + " shift-add results differ from integer products");
}

struct CostArgs {
    std::string layers;
    std::string baseline = "uniform:8";
    bool json = false;
};

void cmd_cost(const CostArgs& a, std::ostream& out)
{
    std::ifstream in(a.layers);
    if (!in)
        throw std::runtime_error("cannot open " + a.layers);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
    const auto layers = layers_from_json(doc);
    const auto report = model_report(layers, WeightScheme::parse(a.baseline));
    if (a.json) {
        out << to_json(report).dump(2) << '\n';
        return;
    }
    out << "layer\tbitops\tbits/weight\tstorage_bits\n";
    for (const auto& l : report.layers)
        out << l.name << '\t' << l.bitops << '\t' << l.bits_per_weight << '\t' << l.storage_bits << '\n';
    out << "total\t" << report.totals.bitops << "\t-\t" << report.totals.storage_bits << '\n';
    out << "baseline " << report.baseline.to_string() << "\t" << report.baseline_totals.bitops << "\t-\t"
        << report.baseline_totals.storage_bits << '\n';
    out << std::setprecision(6) << "bitops ratio " << report.bitops_ratio << ", storage ratio " << report.storage_ratio
        << '\n';
}

struct TrainArgs {
    std::string config;
    std::string metrics = "-";
    bool single_stage = false;
};

void cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err)
{
    std::ifstream in(a.config);
    if (!in)
        throw std::runtime_error("cannot open " + a.config);
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("invalid JSON: ") + e.what(), e.byte);
    }
    const auto config = demo_config_from_json(doc);
    const auto report = run_demo(config, a.single_stage);

    std::ostream* summary = &out;
    if (a.metrics == "-") {
        write_metrics(out, report.quantized_run.log);
        summary = &err;
    } else {
        std::ofstream log(a.metrics, std::ios::trunc);
        if (!log)
            throw std::runtime_error("cannot open " + a.metrics + " for writing");
        write_metrics(log, report.quantized_run.log);
    }
    *summary << json{{"schedule", a.single_stage ? "single-stage" : "two-stage"},
                     {"float_accuracy", report.float_accuracy},
                     {"quantized_accuracy", report.quantized_accuracy}}
                    .dump()
             << '\n';
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err)
{
    CLI::App app{"n-hot powers-of-two quantization toolkit", "nhot"};
    app.require_subcommand(1);

    CodebookArgs cb;
    auto* codebook = app.add_subcommand("codebook", "print levels, canonical codes and counts");
    codebook->add_option("--bits,-b", cb.bits, "bit width b")->required();
    codebook->add_option("--terms,-n", cb.terms, "max shift terms n")->required();
    codebook->add_option("--mode,-m", cb.mode, "uniform | pot | one-hot | additive | nhot");
    codebook->add_flag("--json", cb.json);

    QuantizeArgs qa;
    auto* quantize = app.add_subcommand("quantize", "quantize an NHFT float tensor into an NHQT file");
    quantize->add_option("--in", qa.in)->required();
    quantize->add_option("--out", qa.out)->required();
    quantize->add_option("--bits,-b", qa.bits)->required();
    quantize->add_option("--terms,-n", qa.terms)->required();
    quantize->add_option("--mode,-m", qa.mode);
    quantize->add_option("--convention", qa.convention)->check(CLI::IsMember({"sign-magnitude", "signed-range"}));
    quantize->add_flag("--affine", qa.affine, "min/max range (uniform mode only)");
    quantize->add_flag("--json", qa.json);

    DequantizeArgs da;
    auto* dequant = app.add_subcommand("dequantize", "expand an NHQT file back into an NHFT float tensor");
    dequant->add_option("--in", da.in)->required();
    dequant->add_option("--out", da.out)->required();
    dequant->add_flag("--json", da.json);

    SimulateArgs sa;
    auto* simulate = app.add_subcommand("simulate", "check the shift-add multiplier against integer products");
    simulate->add_option("--bits,-b", sa.bits)->required();
    simulate->add_option("--terms,-n", sa.terms)->required();
    simulate->add_option("--mode,-m", sa.mode);
    simulate->add_option("--activation-bits", sa.activation_bits);
    auto* exhaustive = simulate->add_flag("--exhaustive", sa.exhaustive);
    simulate->add_option("--seed", sa.seed)->excludes(exhaustive);
    simulate->add_option("--trials", sa.trials)->excludes(exhaustive);
    simulate->add_option("--trace", sa.trace_weight, "dump the step trace for this signed weight level");
    simulate->add_option("--activation", sa.trace_activation, "activation used with --trace");
    simulate->add_flag("--json", sa.json);

    CostArgs ca;
    auto* cost = app.add_subcommand("cost", "bitOPs and storage report for a layer list");
    cost->add_option("--layers", ca.layers)->required();
    cost->add_option("--baseline", ca.baseline);
    cost->add_flag("--json", ca.json);

    TrainArgs ta;
    auto* train = app.add_subcommand("train-demo", "two-stage fine-tuning on a synthetic task");
    train->add_option("--config", ta.config)->required();
    train->add_option("--metrics", ta.metrics, "metrics log path, '-' for stdout");
    train->add_flag("--single-stage", ta.single_stage);

    std::vector<std::string> argv_storage;
    argv_storage.reserve(args.size() + 1);
    argv_storage.push_back("nhot");
    argv_storage.insert(argv_storage.end(), args.begin(), args.end());
    std::vector<const char*> argv;
    for (const auto& s : argv_storage)
        argv.push_back(s.c_str());

    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return success;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return success;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    }

    try {
        if (codebook->parsed())
            cmd_codebook(cb, out);
        else if (quantize->parsed())
            cmd_quantize(qa, out);
        else if (dequant->parsed())
            cmd_dequantize(da, out);
        else if (simulate->parsed())
            cmd_simulate(sa, out);
        else if (cost->parsed())
            cmd_cost(ca, out);
        else if (train->parsed())
            cmd_train(ta, out, err);
    } catch (const InvalidArgument& e) {
        err << "error: " << e.what() << '\n';
        return usage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return failure;
    }
    return success;
}

} // namespace nhot::cli
