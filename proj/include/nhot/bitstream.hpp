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
#include <span>
#include <vector>

namespace nhot {

/// MSB-first bit writer. Each field's most significant bit goes out first and
/// bytes fill from their high bit down; the tail is zero-padded.
class BitWriter {
public:
    void write(std::uint32_t value, int width)
    {
        for (int bit = width - 1; bit >= 0; --bit) {
            if (used_ == 0)
                bytes_.push_back(0);
            if ((value >> bit) & 1u)
                bytes_.back() |= static_cast<std::uint8_t>(0x80u >> used_);
            used_ = (used_ + 1) & 7;
        }
    }

    const std::vector<std::uint8_t>& bytes() const noexcept { return bytes_; }
    std::vector<std::uint8_t> take() && { return std::move(bytes_); }

private:
    std::vector<std::uint8_t> bytes_;
    int used_ = 0; // bits already used in the last byte, 0 means start a new byte
};

/// Counterpart of BitWriter. The caller checks `remaining_bits()` first.
class BitReader {
public:
    explicit BitReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint32_t read(int width)
    {
        std::uint32_t value = 0;
        for (int i = 0; i < width; ++i) {
            const auto byte = bytes_[position_ >> 3];
            const auto bit = (byte >> (7 - (position_ & 7))) & 1u;
            value = (value << 1) | bit;
            ++position_;
        }
        return value;
    }

    std::size_t bit_position() const noexcept { return position_; }
    std::size_t remaining_bits() const noexcept { return bytes_.size() * 8 - position_; }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t position_ = 0;
};

} // namespace nhot
