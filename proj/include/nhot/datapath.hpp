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

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "nhot/codebook.hpp"
#include "nhot/codec.hpp"

namespace nhot {

/// Row-major dense matrix.
template <typename T>
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<T> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, T fill = T{}) : rows(r), cols(c), data(r * c, fill) {}

    T& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    const T& operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

/// One selector/shifter slot. Inactive slots are padding and add nothing.
struct ShiftSlot {
    bool active = false;
    Sign sign = Sign::positive;
    int shift = 0;

    friend bool operator==(const ShiftSlot&, const ShiftSlot&) = default;
};

/// Fixed n-slot schedule for one weight, precomputed offline.
struct ShiftPlan {
    std::vector<ShiftSlot> slots;

    int active_slots() const noexcept;
    int max_shift() const noexcept;
    /// sum of sign * 2^shift over active slots
    std::int64_t weight_value() const noexcept;

    friend bool operator==(const ShiftPlan&, const ShiftPlan&) = default;
};

/// Lay a canonical code out over n slots. `external` is the weight's sign
/// bit and flips every term. Throws InvalidArgument if the code has more than
/// n terms.
ShiftPlan plan(const NhotCode& code, int n, Sign external = Sign::positive);

struct MacStep {
    int step = 0;
    Sign sign = Sign::positive;
    int shift = 0;
    std::int64_t operand = 0; // selected +activation or -activation
    std::int64_t partial = 0; // accumulator after this step
};

struct MacTrace {
    std::vector<MacStep> steps; // active slots only
    int slots_charged = 0;      // always n: padding costs a cycle in hardware
    std::int64_t result = 0;
};

struct MultiplyResult {
    std::int64_t product = 0;
    MacTrace trace;
};

/// Multiply an unsigned activation in [0, 2^activation_bits) by a planned
/// weight using only sign selection, shifts and additions.
///
/// The accumulator is modelled as a two's-complement register of
/// activation_bits + max_shift + 2 bits; a partial sum outside it throws
/// std::overflow_error (cannot happen for in-range inputs).
MultiplyResult shift_add_multiply(std::int64_t activation, const ShiftPlan& plan, int activation_bits);

/// Tab-separated trace, one line per step: step, sign, shift, partial.
void write_trace(std::ostream& out, const MacTrace& trace);

struct ShiftAddOutput {
    Matrix<std::int64_t> values;
    double scale = 1.0; // real output = values * scale * (scale of the uniform operand)
    std::uint64_t active_steps = 0;
    std::uint64_t charged_steps = 0;
};

/// activations (R x K, unsigned, < 2^activation_bits) times weights
/// (quantized, shape [K, N]). Each product goes through shift_add_multiply;
/// each output accumulates over k in order. Uniform weights throw Unsupported.
ShiftAddOutput matmul_shift_add(const Matrix<std::int64_t>& activations, const QuantizedTensor& weights,
                                int activation_bits);

/// Swapped roles: n-hot activations (shape [R, K]) times signed uniform
/// integer weights (K x N, |w| < 2^weight_bits). The weight magnitude goes
/// through the shifter and its sign drives the selector.
ShiftAddOutput matmul_shift_add(const QuantizedTensor& activations, const Matrix<std::int64_t>& weights,
                                int weight_bits);

/// Signed integer levels sign * magnitude of a quantized tensor, in element order.
std::vector<std::int64_t> integer_levels(const QuantizedTensor& qt);

} // namespace nhot
