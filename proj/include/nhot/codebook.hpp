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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nhot {

enum class Sign : std::int8_t { positive = 1, negative = -1 };

constexpr int to_int(Sign s) noexcept { return static_cast<int>(s); }
constexpr Sign flip(Sign s) noexcept { return s == Sign::positive ? Sign::negative : Sign::positive; }

/// One signed power-of-two term, value sign * 2^exponent.
struct PotTerm {
    Sign sign = Sign::positive;
    int exponent = 0;

    std::int64_t value() const noexcept
    {
        return to_int(sign) * (std::int64_t{1} << exponent);
    }

    friend bool operator==(const PotTerm&, const PotTerm&) = default;
};

/// Sum of up to n signed power-of-two terms with strictly decreasing exponents.
/// An empty term list is the value zero.
struct NhotCode {
    std::vector<PotTerm> terms;

    std::int64_t value() const noexcept;
    std::size_t size() const noexcept { return terms.size(); }
    std::size_t negative_terms() const noexcept;

    friend bool operator==(const NhotCode&, const NhotCode&) = default;
};

std::string to_string(const NhotCode& code);

enum class Mode : std::uint8_t { uniform = 0, pot = 1, one_hot = 2, additive = 3, nhot = 4 };

std::string_view to_string(Mode mode) noexcept;

/// Accepts "uniform", "pot", "one-hot" (or "onehot"), "additive", "nhot".
/// Throws InvalidArgument on anything else.
Mode parse_mode(std::string_view text);

/// Raw enum check for values read from files.
bool is_valid_mode(std::uint8_t raw) noexcept;

/// Representable non-negative integer magnitudes for (b, n, mode).
///
/// Signed values are the mirror image through an external sign bit. For every
/// mode except uniform each magnitude carries its canonical shift-term code.
/// The deployed real value of a magnitude is `magnitude * scale`; the
/// fractional [0, 2) view used when plotting levels is `magnitude * 2^-(b-1)`.
class Codebook {
public:
    int bit_width() const noexcept { return bit_width_; }
    int num_terms() const noexcept { return num_terms_; }
    Mode mode() const noexcept { return mode_; }

    const std::vector<std::uint32_t>& magnitudes() const noexcept { return magnitudes_; }
    std::size_t size() const noexcept { return magnitudes_.size(); }
    std::uint32_t max_magnitude() const noexcept { return magnitudes_.back(); }

    bool has_codes() const noexcept { return !codes_.empty(); }
    bool contains(std::uint32_t magnitude) const noexcept { return index_of(magnitude).has_value(); }

    std::optional<std::size_t> index_of(std::uint32_t magnitude) const noexcept;

    /// Canonical code for `magnitude`. Throws NotInCodebook if absent and
    /// Unsupported for uniform codebooks.
    const NhotCode& code_of(std::uint32_t magnitude) const;
    const NhotCode& code_at(std::size_t index) const;

    /// Number of distinct signed values: zero plus both signs of every
    /// nonzero magnitude.
    std::size_t signed_level_count() const noexcept { return 2 * (magnitudes_.size() - 1) + 1; }

    friend bool operator==(const Codebook&, const Codebook&) = default;

private:
    friend Codebook gen_codebook(int, int, Mode);

    int bit_width_ = 0;
    int num_terms_ = 0;
    Mode mode_ = Mode::uniform;
    std::vector<std::uint32_t> magnitudes_;
    std::vector<NhotCode> codes_;
};

/// {2^i : 0 <= i < b}, increasing. Throws InvalidArgument for b < 1 or b > 63.
std::vector<std::uint64_t> gen_pot_values(int b);

/// Build the magnitude codebook. Requires 2 <= b <= 16 and 1 <= n <= b.
///
/// nhot enumerates 1..n distinct signed terms with exponents 0..b and keeps
/// values in [1, 2^b - 1]; the extra exponent b only ever appears as the
/// minuend of a run of ones. additive uses positive terms over 0..b-1,
/// one-hot and pot use single positive terms, uniform is every integer.
Codebook gen_codebook(int b, int n, Mode mode);

/// C(b,n) + C(b,n-1) + ... + C(b,0).
std::uint64_t count_additive(int b, int n);

/// count_additive(b, 2) plus the b-m+1 placements of every run of m >= 3
/// ones. Only n = 2 has a closed form; other n throw Unsupported.
std::uint64_t count_nhot(int b, int n = 2);

/// Canonical signed decomposition of `magnitude` with at most n terms.
///
/// Among all representations the one with the fewest terms wins, then the
/// one with the fewest negative terms, then the lexicographically greatest
/// exponent sequence. Throws NotInCodebook when no <= n term form exists.
NhotCode decompose(std::uint32_t magnitude, int b, int n);

/// Extended PoT levels on the fractional [0, 1] scale: zero plus
/// 2^0, 2^-1, ..., 2^-(2^b - 2), i.e. 2^b values in total. Not an integer
/// codebook: the small levels have no integer-magnitude embedding.
std::vector<double> pot_extended_levels(int b);

} // namespace nhot
