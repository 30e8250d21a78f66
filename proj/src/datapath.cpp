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

#include "nhot/datapath.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>

#include "nhot/error.hpp"

namespace nhot {

namespace {

void check_operand_bits(int bits)
{
    if (bits < 1 || bits > 32)
        throw InvalidArgument("operand bit width must be in [1, 32], got " + std::to_string(bits));
}

// Selector + shifter + accumulator. `operand_sign` is the sign of the
// uniform operand; it combines with each slot's sign at the selector.
MultiplyResult run_slots(std::int64_t magnitude, Sign operand_sign, const ShiftPlan& plan, int operand_bits)
{
    const int width = operand_bits + plan.max_shift() + 2;
    const std::int64_t limit = std::int64_t{1} << (width - 1);

    MultiplyResult out;
    out.trace.slots_charged = static_cast<int>(plan.slots.size());
    std::int64_t acc = 0;
    int step = 0;
    for (const auto& slot : plan.slots) {
        if (!slot.active)
            continue;
        const Sign selected = operand_sign == Sign::positive ? slot.sign : flip(slot.sign);
        const std::int64_t operand = selected == Sign::positive ? magnitude : -magnitude;
        acc += operand * (std::int64_t{1} << slot.shift);
        if (acc >= limit || acc < -limit)
            throw std::overflow_error("shift-add accumulator overflow");
        out.trace.steps.push_back({step++, slot.sign, slot.shift, operand, acc});
    }
    out.trace.result = acc;
    out.product = acc;
    return out;
}

std::vector<ShiftPlan> plans_for(const QuantizedTensor& qt)
{
    if (qt.codebook.mode == Mode::uniform)
        throw Unsupported("uniform tensors have no shift-term codes; use an integer multiplier");
    if (!qt.params.symmetric)
        throw InvalidArgument("shift-add operands need symmetric quantization");
    const auto book = gen_codebook(qt.codebook.bit_width, qt.codebook.num_terms, qt.codebook.mode);
    std::vector<ShiftPlan> plans;
    plans.reserve(qt.elements.size());
    for (const auto& e : qt.elements) {
        if (e.index >= book.size())
            throw OutOfRange("codebook index " + std::to_string(e.index) + " out of range");
        plans.push_back(plan(book.code_at(e.index), qt.codebook.num_terms, e.sign));
    }
    return plans;
}

void check_rank2(const QuantizedTensor& qt, const char* what)
{
    if (qt.shape.size() != 2)
        throw InvalidArgument(std::string(what) + " must be a rank-2 tensor");
    if (element_count(qt.shape) != qt.elements.size())
        throw InvalidArgument(std::string(what) + " shape does not match its element count");
}

} // namespace

int ShiftPlan::active_slots() const noexcept
{
    return static_cast<int>(std::count_if(slots.begin(), slots.end(), [](const ShiftSlot& s) { return s.active; }));
}

int ShiftPlan::max_shift() const noexcept
{
    int m = 0;
    for (const auto& s : slots)
        if (s.active)
            m = std::max(m, s.shift);
    return m;
}

std::int64_t ShiftPlan::weight_value() const noexcept
{
    std::int64_t v = 0;
    for (const auto& s : slots)
        if (s.active)
            v += to_int(s.sign) * (std::int64_t{1} << s.shift);
    return v;
}

ShiftPlan plan(const NhotCode& code, int n, Sign external)
{
    if (n < 1)
        throw InvalidArgument("plan needs at least one slot");
    if (static_cast<int>(code.size()) > n)
        throw InvalidArgument("code has " + std::to_string(code.size()) + " terms but only " + std::to_string(n) +
                              " slots");
    ShiftPlan p;
    p.slots.resize(static_cast<std::size_t>(n));
    for (std::size_t i = 0; i < code.size(); ++i) {
        const auto& t = code.terms[i];
        p.slots[i] = {true, external == Sign::positive ? t.sign : flip(t.sign), t.exponent};
    }
    return p;
}

MultiplyResult shift_add_multiply(std::int64_t activation, const ShiftPlan& plan, int activation_bits)
{
    check_operand_bits(activation_bits);
    if (activation < 0 || activation >= (std::int64_t{1} << activation_bits))
        throw InvalidArgument("activation " + std::to_string(activation) + " outside [0, 2^" +
                              std::to_string(activation_bits) + ")");
    return run_slots(activation, Sign::positive, plan, activation_bits);
}

void write_trace(std::ostream& out, const MacTrace& trace)
{
    for (const auto& s : trace.steps)
        out << s.step << '\t' << (s.sign == Sign::positive ? '+' : '-') << '\t' << s.shift << '\t' << s.partial
            << '\n';
}

ShiftAddOutput matmul_shift_add(const Matrix<std::int64_t>& activations, const QuantizedTensor& weights,
                                int activation_bits)
{
    check_operand_bits(activation_bits);
    check_rank2(weights, "weights");
    const std::size_t inner = weights.shape[0];
    const std::size_t cols = weights.shape[1];
    if (activations.cols != inner)
        throw InvalidArgument("dimension mismatch: activations have " + std::to_string(activations.cols) +
                              " columns, weights have " + std::to_string(inner) + " rows");
    const auto plans = plans_for(weights);
    const std::int64_t top = std::int64_t{1} << activation_bits;
    for (auto a : activations.data)
        if (a < 0 || a >= top)
            throw InvalidArgument("activation " + std::to_string(a) + " out of range");

    ShiftAddOutput out;
    out.values = Matrix<std::int64_t>(activations.rows, cols);
    out.scale = weights.params.scale;
    for (std::size_t r = 0; r < activations.rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            std::int64_t acc = 0;
            for (std::size_t k = 0; k < inner; ++k) {
                const auto res = run_slots(activations(r, k), Sign::positive, plans[k * cols + c], activation_bits);
                acc += res.product;
                out.active_steps += res.trace.steps.size();
                out.charged_steps += static_cast<std::uint64_t>(res.trace.slots_charged);
            }
            out.values(r, c) = acc;
        }
    }
    return out;
}

ShiftAddOutput matmul_shift_add(const QuantizedTensor& activations, const Matrix<std::int64_t>& weights,
                                int weight_bits)
{
    check_operand_bits(weight_bits);
    check_rank2(activations, "activations");
    const std::size_t rows = activations.shape[0];
    const std::size_t inner = activations.shape[1];
    if (weights.rows != inner)
        throw InvalidArgument("dimension mismatch: activations have " + std::to_string(inner) +
                              " columns, weights have " + std::to_string(weights.rows) + " rows");
    const auto plans = plans_for(activations);
    const std::int64_t top = std::int64_t{1} << weight_bits;
    for (auto w : weights.data)
        if (w <= -top || w >= top)
            throw InvalidArgument("weight " + std::to_string(w) + " out of range");

    ShiftAddOutput out;
    out.values = Matrix<std::int64_t>(rows, weights.cols);
    out.scale = activations.params.scale;
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < weights.cols; ++c) {
            std::int64_t acc = 0;
            for (std::size_t k = 0; k < inner; ++k) {
                const std::int64_t w = weights(k, c);
                const auto res = run_slots(w < 0 ? -w : w, w < 0 ? Sign::negative : Sign::positive,
                                           plans[r * inner + k], weight_bits);
                acc += res.product;
                out.active_steps += res.trace.steps.size();
                out.charged_steps += static_cast<std::uint64_t>(res.trace.slots_charged);
            }
            out.values(r, c) = acc;
        }
    }
    return out;
}

std::vector<std::int64_t> integer_levels(const QuantizedTensor& qt)
{
    if (!qt.params.symmetric)
        throw InvalidArgument("integer levels need a symmetric quantizer");
    const auto book = gen_codebook(qt.codebook.bit_width, qt.codebook.num_terms, qt.codebook.mode);
    std::vector<std::int64_t> out;
    out.reserve(qt.elements.size());
    for (const auto& e : qt.elements) {
        if (e.index >= book.size())
            throw OutOfRange("codebook index " + std::to_string(e.index) + " out of range");
        out.push_back(to_int(e.sign) * static_cast<std::int64_t>(book.magnitudes()[e.index]));
    }
    return out;
}

} // namespace nhot
