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

#include "nhot/codebook.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <sstream>

#include "nhot/error.hpp"

namespace nhot {

namespace {

constexpr int kMaxCodebookBits = 16;

// Strict "a is preferred over b" ordering for equal-valued codes.
bool canonical_before(const NhotCode& a, const NhotCode& b)
{
    if (a.size() != b.size())
        return a.size() < b.size();
    const auto neg_a = a.negative_terms();
    const auto neg_b = b.negative_terms();
    if (neg_a != neg_b)
        return neg_a < neg_b;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a.terms[i].exponent != b.terms[i].exponent)
            return a.terms[i].exponent > b.terms[i].exponent;
    }
    return false;
}

struct SearchSpace {
    int max_exponent;
    int max_terms;
    bool allow_negative;
};

// Visits every non-empty list of distinct terms with exponents drawn from
// max_exponent down to 0, in decreasing exponent order.
void enumerate_terms(const SearchSpace& space, const std::function<void(const NhotCode&)>& visit)
{
    NhotCode current;
    std::function<void(int)> recurse = [&](int exponent) {
        if (!current.terms.empty())
            visit(current);
        if (static_cast<int>(current.size()) == space.max_terms)
            return;
        for (int e = exponent; e >= 0; --e) {
            current.terms.push_back({Sign::positive, e});
            recurse(e - 1);
            if (space.allow_negative) {
                current.terms.back().sign = Sign::negative;
                recurse(e - 1);
            }
            current.terms.pop_back();
        }
    };
    recurse(space.max_exponent);
}

SearchSpace search_space(int b, int n, Mode mode)
{
    switch (mode) {
    case Mode::nhot:
        return {b, n, true};
    case Mode::additive:
        return {b - 1, n, false};
    case Mode::one_hot:
    case Mode::pot:
        return {b - 1, 1, false};
    case Mode::uniform:
        break;
    }
    throw InvalidArgument("no term search space for uniform mode");
}

void check_bits_terms(int b, int n)
{
    if (b < 2 || b > kMaxCodebookBits)
        throw InvalidArgument("bit width must be in [2, " + std::to_string(kMaxCodebookBits) + "], got " + std::to_string(b));
    if (n < 1)
        throw InvalidArgument("number of terms must be >= 1, got " + std::to_string(n));
    if (n > b)
        throw InvalidArgument("number of terms " + std::to_string(n) + " exceeds bit width " + std::to_string(b));
}

} // namespace

std::int64_t NhotCode::value() const noexcept
{
    std::int64_t v = 0;
    for (const auto& t : terms)
        v += t.value();
    return v;
}

std::size_t NhotCode::negative_terms() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(terms.begin(), terms.end(), [](const PotTerm& t) { return t.sign == Sign::negative; }));
}

std::string to_string(const NhotCode& code)
{
    if (code.terms.empty())
        return "0";
    std::ostringstream out;
    for (std::size_t i = 0; i < code.size(); ++i) {
        const auto& t = code.terms[i];
        if (i > 0)
            out << ' ';
        out << (t.sign == Sign::positive ? '+' : '-') << "2^" << t.exponent;
    }
    return out.str();
}

std::string_view to_string(Mode mode) noexcept
{
    switch (mode) {
    case Mode::uniform: return "uniform";
    case Mode::pot: return "pot";
    case Mode::one_hot: return "one-hot";
    case Mode::additive: return "additive";
    case Mode::nhot: return "nhot";
    }
    return "?";
}

Mode parse_mode(std::string_view text)
{
    if (text == "uniform") return Mode::uniform;
    if (text == "pot") return Mode::pot;
    if (text == "one-hot" || text == "onehot" || text == "one_hot") return Mode::one_hot;
    if (text == "additive") return Mode::additive;
    if (text == "nhot" || text == "n-hot") return Mode::nhot;
    throw InvalidArgument("unknown mode '" + std::string(text) + "'");
}

bool is_valid_mode(std::uint8_t raw) noexcept
{
    return raw <= static_cast<std::uint8_t>(Mode::nhot);
}

std::optional<std::size_t> Codebook::index_of(std::uint32_t magnitude) const noexcept
{
    auto it = std::lower_bound(magnitudes_.begin(), magnitudes_.end(), magnitude);
    if (it == magnitudes_.end() || *it != magnitude)
        return std::nullopt;
    return static_cast<std::size_t>(it - magnitudes_.begin());
}

const NhotCode& Codebook::code_of(std::uint32_t magnitude) const
{
    auto idx = index_of(magnitude);
    if (!idx)
        throw NotInCodebook("magnitude " + std::to_string(magnitude) + " is not in the " + std::string(to_string(mode_)) +
                            " codebook (b=" + std::to_string(bit_width_) + ", n=" + std::to_string(num_terms_) + ")");
    return code_at(*idx);
}

const NhotCode& Codebook::code_at(std::size_t index) const
{
    if (!has_codes())
        throw Unsupported("uniform codebooks carry no shift-term codes");
    if (index >= codes_.size())
        throw OutOfRange("codebook index " + std::to_string(index) + " out of range");
    return codes_[index];
}

std::vector<std::uint64_t> gen_pot_values(int b)
{
    if (b < 1 || b > 63)
        throw InvalidArgument("bit width must be in [1, 63], got " + std::to_string(b));
    std::vector<std::uint64_t> values;
    values.reserve(static_cast<std::size_t>(b));
    for (int i = 0; i < b; ++i)
        values.push_back(std::uint64_t{1} << i);
    return values;
}

Codebook gen_codebook(int b, int n, Mode mode)
{
    check_bits_terms(b, n);
    if (!is_valid_mode(static_cast<std::uint8_t>(mode)))
        throw InvalidArgument("unknown mode");

    Codebook book;
    book.bit_width_ = b;
    book.num_terms_ = n;
    book.mode_ = mode;

    const std::int64_t limit = (std::int64_t{1} << b) - 1;

    if (mode == Mode::uniform) {
        book.magnitudes_.resize(static_cast<std::size_t>(limit) + 1);
        for (std::int64_t v = 0; v <= limit; ++v)
            book.magnitudes_[static_cast<std::size_t>(v)] = static_cast<std::uint32_t>(v);
        return book;
    }

    std::map<std::uint32_t, NhotCode> best;
    best.emplace(0u, NhotCode{});
    enumerate_terms(search_space(b, n, mode), [&](const NhotCode& code) {
        const auto v = code.value();
        if (v < 1 || v > limit)
            return;
        auto [it, inserted] = best.try_emplace(static_cast<std::uint32_t>(v), code);
        if (!inserted && canonical_before(code, it->second))
            it->second = code;
    });

    book.magnitudes_.reserve(best.size());
    book.codes_.reserve(best.size());
    for (auto& [magnitude, code] : best) {
        book.magnitudes_.push_back(magnitude);
        book.codes_.push_back(std::move(code));
    }
    return book;
}

std::uint64_t count_additive(int b, int n)
{
    if (b < 0 || b > 62)
        throw InvalidArgument("bit width must be in [0, 62], got " + std::to_string(b));
    if (n < 0)
        throw InvalidArgument("number of terms must be >= 0, got " + std::to_string(n));
    if (n > b)
        throw InvalidArgument("number of terms " + std::to_string(n) + " exceeds bit width " + std::to_string(b));

    std::uint64_t total = 0;
    std::uint64_t binom = 1; // C(b, 0)
    for (int k = 0; k <= n; ++k) {
        total += binom;
        binom = binom * static_cast<std::uint64_t>(b - k) / static_cast<std::uint64_t>(k + 1);
    }
    return total;
}

std::uint64_t count_nhot(int b, int n)
{
    if (n != 2)
        throw Unsupported("closed-form n-hot count only exists for n = 2; enumerate with gen_codebook instead");
    if (b < 3)
        throw InvalidArgument("closed-form n-hot count requires b >= 3, got " + std::to_string(b));
    std::uint64_t total = count_additive(b, 2);
    for (int run = 3; run <= b; ++run)
        total += static_cast<std::uint64_t>(b - run + 1);
    return total;
}

NhotCode decompose(std::uint32_t magnitude, int b, int n)
{
    check_bits_terms(b, n);
    const std::int64_t limit = (std::int64_t{1} << b) - 1;
    if (magnitude > limit)
        throw InvalidArgument("magnitude " + std::to_string(magnitude) + " exceeds 2^" + std::to_string(b) + " - 1");
    if (magnitude == 0)
        return {};

    std::optional<NhotCode> best;
    enumerate_terms({b, n, true}, [&](const NhotCode& code) {
        if (code.value() != static_cast<std::int64_t>(magnitude))
            return;
        if (!best || canonical_before(code, *best))
            best = code;
    });
    if (!best)
        throw NotInCodebook("magnitude " + std::to_string(magnitude) + " has no representation with " +
                            std::to_string(n) + " signed power-of-two terms");
    return *best;
}

std::vector<double> pot_extended_levels(int b)
{
    if (b < 1 || b > 10)
        throw InvalidArgument("extended PoT levels need 1 <= b <= 10, got " + std::to_string(b));
    const int nonzero = (1 << b) - 1;
    std::vector<double> levels;
    levels.reserve(static_cast<std::size_t>(nonzero) + 1);
    levels.push_back(0.0);
    for (int k = nonzero - 1; k >= 0; --k)
        levels.push_back(std::ldexp(1.0, -k));
    return levels;
}

} // namespace nhot
