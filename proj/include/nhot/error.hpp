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
#include <stdexcept>
#include <string>

namespace nhot {

/// Bad argument to an operation: out-of-range bit width, n > b, unknown mode.
class InvalidArgument : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Magnitude has no representation in the requested codebook.
class NotInCodebook : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Non-finite or otherwise unusable real-valued input.
class InvalidInput : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Zero-width quantization range.
class DegenerateRange : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Element code outside the level table.
class OutOfRange : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Operation defined by the format but not implemented for these parameters.
class Unsupported : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// Malformed container file. `offset()` is the byte position of the problem.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& what, std::size_t offset)
        : std::runtime_error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

/// Loss became NaN/inf during training.
class TrainingDiverged : public std::runtime_error {
public:
    TrainingDiverged(const std::string& what, int epoch)
        : std::runtime_error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}

    int epoch() const noexcept { return epoch_; }

private:
    int epoch_;
};

} // namespace nhot
