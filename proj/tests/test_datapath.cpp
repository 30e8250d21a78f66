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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>
#include <sstream>

#include "nhot/datapath.hpp"
#include "nhot/error.hpp"
#include "oracles.hpp"

using namespace nhot;

namespace {

QuantizedTensor random_weights(std::mt19937_64& rng, std::uint32_t rows, std::uint32_t cols, CodebookRef ref)
{
    const auto book = gen_codebook(ref.bit_width, ref.num_terms, ref.mode);
    QuantizedTensor qt;
    qt.shape = {rows, cols};
    qt.codebook = ref;
    qt.params = QuantParams::symmetric_range(1.0, ref.bit_width);
    qt.elements.resize(std::size_t{rows} * cols);
    for (auto& e : qt.elements) {
        e.index = static_cast<std::uint32_t>(rng() % book.size());
        e.sign = (e.index != 0 && (rng() & 1)) ? Sign::negative : Sign::positive;
    }
    return qt;
}

} // namespace

TEST_CASE("plan layout")
{
    const auto p = plan(decompose(28, 6, 2), 2);
    REQUIRE(p.slots.size() == 2);
    CHECK(p.slots[0] == ShiftSlot{true, Sign::positive, 5});
    CHECK(p.slots[1] == ShiftSlot{true, Sign::negative, 2});

    const auto zero = plan(NhotCode{}, 2);
    CHECK(zero.slots == std::vector<ShiftSlot>(2));
    CHECK(zero.active_slots() == 0);

    const auto single = plan(decompose(16, 6, 2), 2);
    CHECK(single.slots[0] == ShiftSlot{true, Sign::positive, 4});
    CHECK_FALSE(single.slots[1].active);

    CHECK_THROWS_AS(plan(decompose(28, 6, 2), 1), InvalidArgument);

    const auto negated = plan(decompose(28, 6, 2), 2, Sign::negative);
    CHECK(negated.weight_value() == -28);
}

TEST_CASE("shift_add_multiply examples")
{
    const auto p = plan(decompose(28, 6, 2), 2);
    CHECK(shift_add_multiply(1, p, 8).product == 28);

    const auto r = shift_add_multiply(200, p, 8);
    CHECK(r.product == 5600);
    REQUIRE(r.trace.steps.size() == 2);
    CHECK(r.trace.steps[0].operand == 200);
    CHECK(r.trace.steps[0].partial == 6400);
    CHECK(r.trace.steps[1].operand == -200);
    CHECK(r.trace.steps[1].partial == 5600);
    CHECK(r.trace.slots_charged == 2);
    CHECK(r.trace.result == 5600);

    std::ostringstream dump;
    write_trace(dump, r.trace);
    CHECK(dump.str() == "0\t+\t5\t6400\n1\t-\t2\t5600\n");
}

TEST_CASE("shift_add_multiply range checks")
{
    const auto p = plan(decompose(5, 4, 2), 2);
    CHECK_THROWS_AS(shift_add_multiply(256, p, 8), InvalidArgument);
    CHECK_THROWS_AS(shift_add_multiply(-1, p, 8), InvalidArgument);
    CHECK_THROWS_AS(shift_add_multiply(1, p, 0), InvalidArgument);
    CHECK(shift_add_multiply(255, p, 8).product == 255 * 5);
}

TEST_CASE("exhaustive equivalence for b=8, n=2, 8-bit activations")
{
    const auto book = gen_codebook(8, 2, Mode::nhot);
    std::size_t checked = 0;
    for (std::size_t i = 0; i < book.size(); ++i) {
        for (Sign s : {Sign::positive, Sign::negative}) {
            if (i == 0 && s == Sign::negative)
                continue;
            const auto p = plan(book.code_at(i), 2, s);
            const std::int64_t w = to_int(s) * static_cast<std::int64_t>(book.magnitudes()[i]);
            for (std::int64_t a = 0; a < 256; ++a) {
                const auto r = shift_add_multiply(a, p, 8);
                REQUIRE(r.product == a * w);
                REQUIRE(r.trace.steps.size() <= 2);
                ++checked;
            }
        }
    }
    CHECK(checked == 115 * 256);
}

TEST_CASE("sign symmetry and trace soundness")
{
    for (int b : {4, 6, 8}) {
        for (int n : {1, 2, 3}) {
            const auto book = gen_codebook(b, n, Mode::nhot);
            for (std::size_t i = 0; i < book.size(); ++i) {
                const auto pos = plan(book.code_at(i), n, Sign::positive);
                const auto neg = plan(book.code_at(i), n, Sign::negative);
                for (std::int64_t a : {0, 1, 7, 100, 255}) {
                    const auto rp = shift_add_multiply(a, pos, 8);
                    const auto rn = shift_add_multiply(a, neg, 8);
                    CHECK(rn.product == -rp.product);
                    CHECK(static_cast<int>(rp.trace.steps.size()) <= n);
                    std::int64_t replay = 0;
                    for (const auto& s : rp.trace.steps) {
                        replay += s.operand << s.shift;
                        CHECK(replay == s.partial);
                    }
                    CHECK(replay == rp.trace.result);
                }
            }
        }
    }
}

TEST_CASE("matmul: identity weights pass activations through")
{
    const auto book = gen_codebook(8, 2, Mode::nhot);
    QuantizedTensor eye;
    eye.shape = {4, 4};
    eye.codebook = {Mode::nhot, 8, 2};
    eye.params = QuantParams::symmetric_range(1.0, 8);
    eye.elements.resize(16);
    for (std::uint32_t i = 0; i < 4; ++i)
        eye.elements[i * 4 + i] = {Sign::positive, static_cast<std::uint32_t>(*book.index_of(1))};
    Matrix<std::int64_t> act(3, 4);
    for (std::size_t k = 0; k < act.data.size(); ++k)
        act.data[k] = static_cast<std::int64_t>(k * 17 % 256);
    const auto out = matmul_shift_add(act, eye, 8);
    CHECK(out.values == act);
    CHECK(out.scale == eye.params.scale);
    CHECK(out.charged_steps == 3 * 4 * 4 * 2);
}

TEST_CASE("matmul: 1x1x1 reduces to a single multiply")
{
    const auto book = gen_codebook(6, 2, Mode::nhot);
    QuantizedTensor w;
    w.shape = {1, 1};
    w.codebook = {Mode::nhot, 6, 2};
    w.params = QuantParams::symmetric_range(1.0, 6);
    w.elements = {{Sign::negative, static_cast<std::uint32_t>(*book.index_of(28))}};
    Matrix<std::int64_t> a(1, 1, 200);
    CHECK(matmul_shift_add(a, w, 8).values(0, 0) == shift_add_multiply(200, plan(decompose(28, 6, 2), 2, Sign::negative), 8).product);
    CHECK(matmul_shift_add(a, w, 8).values(0, 0) == -5600);
}

TEST_CASE("matmul matches golden integer product")
{
    std::mt19937_64 rng(5);
    for (CodebookRef ref : {CodebookRef{Mode::nhot, 8, 2}, CodebookRef{Mode::additive, 8, 2},
                            CodebookRef{Mode::pot, 8, 1}, CodebookRef{Mode::nhot, 6, 3}}) {
        const auto w = random_weights(rng, 16, 16, ref);
        Matrix<std::int64_t> a(16, 16);
        for (auto& v : a.data)
            v = static_cast<std::int64_t>(rng() % 256);
        const auto got = matmul_shift_add(a, w, 8);
        const auto want = oracle::golden_matmul(a.data, integer_levels(w), 16, 16, 16);
        CHECK(got.values.data == want);
    }
}

TEST_CASE("matmul swapped roles matches golden product")
{
    std::mt19937_64 rng(6);
    const auto act = random_weights(rng, 5, 7, {Mode::nhot, 8, 2});
    Matrix<std::int64_t> w(7, 3);
    for (auto& v : w.data)
        v = static_cast<std::int64_t>(rng() % 511) - 255;
    const auto got = matmul_shift_add(act, w, 8);
    CHECK(got.values.data == oracle::golden_matmul(integer_levels(act), w.data, 5, 7, 3));
    CHECK(got.scale == act.params.scale);
}

TEST_CASE("matmul errors")
{
    std::mt19937_64 rng(8);
    const auto w = random_weights(rng, 4, 2, {Mode::nhot, 8, 2});
    CHECK_THROWS_AS(matmul_shift_add(Matrix<std::int64_t>(2, 3), w, 8), InvalidArgument);
    Matrix<std::int64_t> big(1, 4, 300);
    CHECK_THROWS_AS(matmul_shift_add(big, w, 8), InvalidArgument);

    auto uniform = w;
    uniform.codebook = {Mode::uniform, 8, 2};
    CHECK_THROWS_AS(matmul_shift_add(Matrix<std::int64_t>(1, 4), uniform, 8), Unsupported);

    auto rank3 = w;
    rank3.shape = {2, 2, 2};
    CHECK_THROWS_AS(matmul_shift_add(Matrix<std::int64_t>(1, 2), rank3, 8), InvalidArgument);
}
