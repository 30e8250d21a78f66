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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <random>
#include <string>

#include "nhot/codebook.hpp"
#include "nhot/codec.hpp"
#include "nhot/cost.hpp"
#include "nhot/datapath.hpp"
#include "nhot/error.hpp"
#include "nhot/qat.hpp"
#include "oracles.hpp"

using namespace nhot;

namespace {

struct Verdict {
    bool ok = true;
    std::string detail;

    void require(bool cond, const std::string& what)
    {
        if (!cond && ok) {
            ok = false;
            detail = what;
        }
    }
};

int failures = 0;

void criterion(const char* id, const char* title, double budget_s, const std::function<Verdict()>& body)
{
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
        v = body();
    } catch (const std::exception& e) {
        v.ok = false;
        v.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (v.ok && secs >= budget_s) {
        v.ok = false;
        v.detail = "over the " + std::to_string(budget_s) + " s budget";
    }
    failures += v.ok ? 0 : 1;
    std::printf("[%s] %s %s (%.3f s)%s%s\n", v.ok ? "PASS" : "FAIL", id, title, secs, v.detail.empty() ? "" : ": ",
                v.detail.c_str());
    std::fflush(stdout);
}

std::vector<std::int64_t> signed_values(const Codebook& book)
{
    std::vector<std::int64_t> out;
    for (auto m : book.magnitudes()) {
        out.push_back(m);
        if (m != 0)
            out.push_back(-static_cast<std::int64_t>(m));
    }
    return out;
}

LayerSpec layer(std::uint64_t macs, int b_a, WeightScheme scheme)
{
    LayerSpec l;
    l.name = "l";
    l.kind = LayerKind::conv;
    l.macs = macs;
    l.weight_count = macs / 7 + 1;
    l.b_a = b_a;
    l.weight_scheme = scheme;
    return l;
}

Verdict counting()
{
    Verdict v;
    v.require(count_additive(8, 2) == 37, "count_additive(8,2) != 37");
    v.require(count_nhot(8, 2) == 58, "count_nhot(8,2) != 58");
    v.require(count_nhot(3, 2) == 8, "count_nhot(3,2) != 8");
    for (int b = 3; b <= 12; ++b) {
        const auto brute = oracle::nhot_values(b, 2);
        const auto book = gen_codebook(b, 2, Mode::nhot);
        v.require(count_nhot(b, 2) == brute.size() && book.size() == brute.size(),
                  "count_nhot disagrees with enumeration at b=" + std::to_string(b));
    }
    v.detail = v.ok ? "37, 58, 8; b=3..12 match enumeration" : v.detail;
    return v;
}

Verdict recoding()
{
    Verdict v;
    const auto code = decompose(28, 6, 2);
    v.require(to_string(code) == "+2^5 -2^2", "decompose(28) = " + to_string(code));
    std::size_t checked = 0;
    for (int b = 2; b <= 12; ++b) {
        const auto book = gen_codebook(b, 2, Mode::nhot);
        for (auto m : book.magnitudes()) {
            const auto c = decompose(m, b, 2);
            v.require(c.size() <= 2, "more than two terms for " + std::to_string(m));
            std::int64_t sum = 0;
            for (const auto& t : c.terms)
                sum += to_int(t.sign) * (std::int64_t{1} << t.exponent);
            v.require(sum == m, "decompose does not round-trip " + std::to_string(m));
            ++checked;
        }
    }
    if (v.ok)
        v.detail = "28 = +2^5 -2^2; " + std::to_string(checked) + " magnitudes round-trip";
    return v;
}

Verdict datapath()
{
    Verdict v;
    const auto book = gen_codebook(8, 2, Mode::nhot);
    const auto values = signed_values(book);
    v.require(values.size() == 115, "expected 115 signed values");
    std::size_t mismatches = 0, checked = 0;
    for (auto w : values) {
        const auto p = plan(book.code_of(static_cast<std::uint32_t>(std::llabs(w))), 2,
                            w < 0 ? Sign::negative : Sign::positive);
        for (std::int64_t a = 0; a < 256; ++a) {
            mismatches += shift_add_multiply(a, p, 8).product != a * w;
            ++checked;
        }
    }
    v.require(mismatches == 0, std::to_string(mismatches) + " mismatches");
    if (v.ok)
        v.detail = std::to_string(checked) + " products, 0 mismatches";
    return v;
}

Verdict bitops_ratio()
{
    Verdict v;
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<std::uint64_t> macs(1, 1ULL << 40);
    std::uniform_int_distribution<int> bits(1, 16);
    for (int i = 0; i < 1000; ++i) {
        const auto m = macs(rng);
        const int b_a = bits(rng);
        const double r = static_cast<double>(bitops(layer(m, b_a, WeightScheme::nhot(8, 2)))) /
                         static_cast<double>(bitops(layer(m, b_a, WeightScheme::uniform(8))));
        v.require(r == 0.25, "ratio " + std::to_string(r));
    }
    const double table = 0.697 / 2.79;
    v.require(std::fabs(0.25 - table) / table <= 0.005, "table ratio outside 0.5%");
    if (v.ok)
        v.detail = "0.25 exactly on 1000 random layers; reference 0.697/2.79 = " + std::to_string(table) +
                   "; 75% fewer bitOPs";
    return v;
}

Verdict storage()
{
    Verdict v;
    const int u8 = storage_bits_per_weight(WeightScheme::uniform(8));
    const int u6 = storage_bits_per_weight(WeightScheme::uniform(6));
    const int n82 = storage_bits_per_weight(WeightScheme::nhot(8, 2));
    const int n32 = storage_bits_per_weight(WeightScheme::nhot(3, 2));
    v.require(u8 == 9 && u6 == 7 && n82 == 7 && n32 == 4,
              "got " + std::to_string(u8) + "/" + std::to_string(u6) + "/" + std::to_string(n82) + "/" +
                  std::to_string(n32));
    v.require(n82 == u6, "nhot 8/2 and uniform 6 model sizes differ");
    if (v.ok)
        v.detail = "9/7/7/4 bits per weight";
    return v;
}

Verdict projection()
{
    Verdict v;
    struct Config {
        int b, n;
        Mode mode;
    };
    std::mt19937_64 rng(99);
    std::size_t ties = 0;
    for (const auto c : {Config{5, 2, Mode::nhot}, Config{8, 2, Mode::nhot}, Config{8, 2, Mode::additive},
                         Config{8, 1, Mode::one_hot}}) {
        const auto book = gen_codebook(c.b, c.n, c.mode);
        const auto params = QuantParams::symmetric_range(1.0, c.b);
        const auto& mags = book.magnitudes();
        std::uniform_real_distribution<double> real(-1.25, 1.25);
        std::uniform_int_distribution<std::size_t> pick(0, mags.size() - 2);
        std::bernoulli_distribution coin(0.5);
        for (int i = 0; i < 100000; ++i) {
            double x;
            if (i % 10 == 0) {
                // exact midpoint between neighbouring levels
                const auto k = pick(rng);
                x = (static_cast<double>(mags[k]) + static_cast<double>(mags[k + 1])) / 2 * params.scale;
                if (coin(rng))
                    x = -x;
                ++ties;
            } else {
                x = real(rng);
            }
            const auto got = project(x, book, params);
            const auto want = oracle::nearest_signed_level(std::clamp(x, params.lower, params.upper) / params.scale, mags);
            if (to_int(got.sign) != want.sign || got.magnitude != want.magnitude) {
                v.require(false, "mismatch at x=" + std::to_string(x) + " for b=" + std::to_string(c.b));
                return v;
            }
        }
    }
    v.detail = "4 x 100000 projections match, " + std::to_string(ties) + " exact ties";
    return v;
}

Verdict round_trips()
{
    Verdict v;
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> ndim(1, 3), extent(1, 9), bits(2, 10), which(0, 5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 1000; ++t) {
        Tensor x;
        const int d = ndim(rng);
        for (int k = 0; k < d; ++k)
            x.shape.push_back(static_cast<std::uint32_t>(extent(rng)));
        x.values.resize(element_count(x.shape));
        const double spread = std::exp(gauss(rng));
        for (auto& e : x.values)
            e = spread * gauss(rng);

        const int b = bits(rng);
        QuantizedTensor qt;
        int kind = which(rng);
        if (kind == 0 && x.values.size() < 2)
            kind = 1; // min/max needs two distinct values
        switch (kind) {
        case 0: qt = quantize_tensor(x, CodebookRef{Mode::uniform, b, 1}, range_policy::AffineMinMax{}); break;
        case 1: qt = quantize_tensor(x, CodebookRef{Mode::uniform, b, 1}); break;
        case 2: qt = quantize_tensor(x, CodebookRef{Mode::pot, b, 1}); break;
        case 3: qt = quantize_tensor(x, CodebookRef{Mode::additive, b, 2}); break;
        case 4:
            qt = quantize_tensor(x, CodebookRef{Mode::nhot, b, 2},
                                 range_policy::SymmetricMaxAbs{ScaleConvention::signed_range});
            break;
        default: qt = quantize_tensor(x, CodebookRef{Mode::nhot, b, std::min(b, 3)}); break;
        }
        const auto bytes = pack(qt);
        const auto back = unpack(bytes);
        v.require(back == qt && pack(back) == bytes, "pack/unpack differs on tensor " + std::to_string(t));
        const auto again = quantize_tensor(dequantize(qt), qt.codebook, range_policy::Explicit{qt.params});
        v.require(again == qt, "quantize/dequantize/quantize differs on tensor " + std::to_string(t));
        if (!v.ok)
            return v;
    }
    v.detail = "1000 tensors bit-exact";
    return v;
}

Verdict mse_ordering()
{
    Verdict v;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int t = 0; t < 20; ++t) {
        Tensor x;
        x.shape = {10000};
        for (int i = 0; i < 10000; ++i)
            x.values.push_back(gauss(rng));
        auto mse = [&](Mode m, int n) {
            return mean_squared_error(x.values, dequantize(quantize_tensor(x, CodebookRef{m, 8, n})).values);
        };
        const double nh = mse(Mode::nhot, 2), add = mse(Mode::additive, 2), one = mse(Mode::one_hot, 1);
        v.require(nh <= add && add <= one, "ordering violated on tensor " + std::to_string(t));
        if (t == 0 && v.ok) {
            char buf[160];
            std::snprintf(buf, sizeof buf, "20 tensors; first: nhot %.3g <= additive %.3g <= one-hot %.3g", nh, add,
                          one);
            v.detail = buf;
        }
    }
    return v;
}

Verdict cosine()
{
    Verdict v;
    const double l0 = 0.02, period = 20.0;
    v.require(cosine_lr(0, l0, period) == 2 * l0, "epoch 0");
    v.require(std::fabs(cosine_lr(period / 2, l0, period) - l0) <= 1e-12 * l0, "epoch lambda/2");
    v.require(std::fabs(cosine_lr(period, l0, period)) <= 1e-12 * l0, "epoch lambda");
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> epoch(0.0, 3 * period);
    for (int i = 0; i < 100; ++i) {
        const double e = epoch(rng);
        const double want = l0 * (1.0 + std::cos(std::numbers::pi * e / period));
        const double got = cosine_lr(e, l0, period);
        v.require(std::fabs(got - want) <= 1e-12 * std::max(std::fabs(want), 1e-300) || got == want,
                  "epoch " + std::to_string(e));
    }
    if (v.ok)
        v.detail = "0, lambda/2, lambda and 100 random epochs";
    return v;
}

DemoConfig demo(std::uint64_t seed)
{
    DemoConfig c;
    c.train.seed = seed;
    c.train.weight_quant = WeightQuantConfig{6, 2, Mode::nhot};
    c.train.activation_bits = 8;
    return c;
}

Verdict qat_smoke()
{
    Verdict v;
    const auto book = gen_codebook(6, 2, Mode::nhot);
    std::size_t stage1 = 0, stage2 = 0, bad1 = 0, bad2 = 0;
    TrainObserver obs;
    obs.on_forward = [&](int stage, const Network& masters, std::span<const Matrix<double>> fwd,
                         std::span<const ProjectedLayer> projection) {
        for (std::size_t l = 0; l < masters.layers.size(); ++l) {
            if (stage == 1) {
                bad1 += fwd[l].data != masters.layers[l].weight.data;
                continue;
            }
            const double scale = projection[l].params.scale;
            for (double w : fwd[l].data) {
                const auto m = static_cast<std::uint32_t>(std::llround(std::fabs(w) / scale));
                bad2 += !book.contains(m) || static_cast<double>(m) * scale != std::fabs(w);
            }
        }
        (stage == 1 ? stage1 : stage2) += 1;
    };
    const auto r = run_demo(demo(1), false, obs);
    v.require(r.quantized_accuracy >= r.float_accuracy - 0.02, "quantized accuracy more than 2 points below float");
    v.require(stage1 > 0 && bad1 == 0, "stage-1 forward weights differ from masters");
    v.require(stage2 > 0 && bad2 == 0, std::to_string(bad2) + " stage-2 weights outside the codebook");

    char buf[200];
    std::snprintf(buf, sizeof buf, "float %.3f, two-stage %.3f; %zu + %zu minibatches checked", r.float_accuracy,
                  r.quantized_accuracy, stage1, stage2);
    if (v.ok)
        v.detail = buf;

    std::printf("       seed  float  two-stage  single-stage\n");
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto two = run_demo(demo(seed));
        const auto one = run_demo(demo(seed), true);
        std::printf("       %4llu  %.3f  %.3f      %.3f\n", static_cast<unsigned long long>(seed), two.float_accuracy,
                    two.quantized_accuracy, one.quantized_accuracy);
    }
    return v;
}

} // namespace

int main()
{
    criterion("AC1", "codebook counts", 1.0, counting);
    criterion("AC2", "canonical recoding", 1.0, recoding);
    criterion("AC3", "shift-add datapath, exhaustive b=8 n=2 b_a=8", 5.0, datapath);
    criterion("AC4", "bitOPs ratio", 1.0, bitops_ratio);
    criterion("AC5", "storage bits per weight", 1.0, storage);
    criterion("AC6", "projection vs linear-scan oracle", 10.0, projection);
    criterion("AC7", "codec round-trips", 10.0, round_trips);
    criterion("AC8", "MSE ordering nhot <= additive <= one-hot", 5.0, mse_ordering);
    criterion("AC9", "cosine learning-rate schedule", 1.0, cosine);
    criterion("AC10", "two-stage QAT smoke test", 60.0, qat_smoke);
    std::printf("%s: %d of 10 criteria failed\n", failures ? "FAILED" : "OK", failures);
    return failures ? 1 : 0;
}
