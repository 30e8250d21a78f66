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
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "nhot/codebook.hpp"

namespace nhot {

/// How a symmetric range [-M, M] maps onto the quantizer step.
///
/// sign_magnitude spends a sign bit plus b magnitude bits, so the magnitude
/// range [0, M] is divided into 2^b steps. signed_range applies the affine
/// step (M - m) / 2^b to the full signed range, i.e. b bits in total.
enum class ScaleConvention : std::uint8_t { sign_magnitude = 0, signed_range = 1 };

/// Range limits, bit width and step size. Construct through the factories;
/// they validate M > m and a positive finite scale.
struct QuantParams {
    double lower = 0.0;  // m
    double upper = 0.0;  // M
    int bit_width = 0;
    double scale = 0.0;  // alpha
    bool symmetric = false;
    ScaleConvention convention = ScaleConvention::sign_magnitude;

    /// alpha = (M - m) / 2^b.
    static QuantParams affine(double lower, double upper, int bit_width);

    /// m = -M. alpha = M / 2^b (sign_magnitude) or 2M / 2^b (signed_range).
    static QuantParams symmetric_range(double max_abs, int bit_width,
                                       ScaleConvention convention = ScaleConvention::sign_magnitude);

    friend bool operator==(const QuantParams&, const QuantParams&) = default;
};

/// Projection result. `magnitude` is an integer level; sign of zero is always +.
struct SignedLevel {
    Sign sign = Sign::positive;
    std::uint32_t magnitude = 0;

    double value(double scale) const noexcept { return to_int(sign) * static_cast<double>(magnitude) * scale; }

    friend bool operator==(const SignedLevel&, const SignedLevel&) = default;
};

/// Nearest signed codebook level to x.
///
/// x is clamped to [m, M] and divided by alpha; distances are measured on
/// that scaled axis. On an exact midpoint the smaller magnitude wins. Params
/// must be symmetric and share the codebook's bit width.
SignedLevel project(double x, const Codebook& codebook, const QuantParams& params);

/// Same search returning the position in `codebook.magnitudes()`.
std::size_t project_index(double x, const Codebook& codebook, const QuantParams& params, Sign& sign);

/// round((clamp(x, m, M) - m) / alpha) * alpha + m.
double uniform_quantize(double x, const QuantParams& params);

/// Integer step index behind uniform_quantize, in [0, 2^b].
std::uint32_t uniform_level_index(double x, const QuantParams& params);

/// Dense real tensor, row-major.
struct Tensor {
    std::vector<std::uint32_t> shape;
    std::vector<double> values;

    friend bool operator==(const Tensor&, const Tensor&) = default;
};

std::size_t element_count(std::span<const std::uint32_t> shape);

struct CodebookRef {
    Mode mode = Mode::nhot;
    int bit_width = 8;
    int num_terms = 2;

    friend bool operator==(const CodebookRef&, const CodebookRef&) = default;
};

/// One quantized element: sign plus an index into the level table. For the
/// affine uniform quantizer the index is the step count from m and the sign
/// is always +.
struct ElementCode {
    Sign sign = Sign::positive;
    std::uint32_t index = 0;

    friend bool operator==(const ElementCode&, const ElementCode&) = default;
};

struct QuantizedTensor {
    std::vector<std::uint32_t> shape;
    QuantParams params;
    CodebookRef codebook;
    std::vector<ElementCode> elements;

    friend bool operator==(const QuantizedTensor&, const QuantizedTensor&) = default;
};

namespace range_policy {
/// M = max|x|, m = -M.
struct SymmetricMaxAbs {
    ScaleConvention convention = ScaleConvention::sign_magnitude;
};
/// m = min x, M = max x. Only valid for mode=uniform.
struct AffineMinMax {};
/// Caller-supplied limits.
struct Explicit {
    QuantParams params;
};
} // namespace range_policy

using RangePolicy = std::variant<range_policy::SymmetricMaxAbs, range_policy::AffineMinMax, range_policy::Explicit>;

QuantParams compute_params(std::span<const double> data, int bit_width, const RangePolicy& policy);

QuantizedTensor quantize_tensor(const Tensor& data, CodebookRef codebook,
                                const RangePolicy& policy = range_policy::SymmetricMaxAbs{});

/// Same as above but reuses an already generated codebook.
QuantizedTensor quantize_tensor(const Tensor& data, const Codebook& codebook, const RangePolicy& policy);

Tensor dequantize(const QuantizedTensor& qt);

/// Number of distinct element codes for the tensor's quantizer.
std::uint32_t level_count(const QuantizedTensor& qt);

/// Width in bits of one packed element, ceil(log2(level_count)).
int element_bits(std::uint32_t level_count);

/// Unsigned field value for an element: 0 for zero, 2i-1 for +level i, 2i for
/// -level i. Affine uniform elements use the step index directly.
std::uint32_t encode_element(const ElementCode& e, bool affine);
ElementCode decode_element(std::uint32_t field, bool affine);

std::vector<std::uint8_t> pack(const QuantizedTensor& qt);
QuantizedTensor unpack(std::span<const std::uint8_t> bytes);

/// Float tensor container ("NHFT"), f32 payload.
std::vector<std::uint8_t> pack_float_tensor(const Tensor& tensor);
Tensor unpack_float_tensor(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> read_file(const std::string& path);
void write_file(const std::string& path, std::span<const std::uint8_t> bytes);

double mean_squared_error(std::span<const double> a, std::span<const double> b);

} // namespace nhot
