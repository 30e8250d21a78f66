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

#include "nhot/codec.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>

#include "nhot/bitstream.hpp"
#include "nhot/error.hpp"

namespace nhot {

namespace {

constexpr std::uint16_t kFormatVersion = 1;
constexpr std::uint8_t kFlagSymmetric = 0x01;
constexpr std::uint8_t kFlagSignedRange = 0x02;
constexpr std::uint8_t kKnownFlags = kFlagSymmetric | kFlagSignedRange;

void check_bit_width(int b)
{
    if (b < 2 || b > 16)
        throw InvalidArgument("bit width must be in [2, 16], got " + std::to_string(b));
}

void check_finite(double x)
{
    if (!std::isfinite(x))
        throw InvalidInput("non-finite input value");
}

// ---- little-endian byte helpers ---------------------------------------------

class ByteSink {
public:
    void u8(std::uint8_t v) { bytes.push_back(v); }
    void u16(std::uint16_t v)
    {
        for (int i = 0; i < 2; ++i)
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v)
    {
        for (int i = 0; i < 4; ++i)
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u64(std::uint64_t v)
    {
        for (int i = 0; i < 8; ++i)
            bytes.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
    void raw(std::span<const std::uint8_t> data) { bytes.insert(bytes.end(), data.begin(), data.end()); }

    std::vector<std::uint8_t> bytes;
};

class ByteSource {
public:
    explicit ByteSource(std::span<const std::uint8_t> data) : data_(data) {}

    std::size_t offset() const noexcept { return pos_; }
    std::size_t remaining() const noexcept { return data_.size() - pos_; }

    std::span<const std::uint8_t> take(std::size_t count, const char* what)
    {
        if (remaining() < count)
            throw FormatError(std::string("truncated input reading ") + what, pos_);
        auto out = data_.subspan(pos_, count);
        pos_ += count;
        return out;
    }

    std::uint64_t uint(std::size_t width, const char* what)
    {
        auto b = take(width, what);
        std::uint64_t v = 0;
        for (std::size_t i = 0; i < width; ++i)
            v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
        return v;
    }

    std::uint8_t u8(const char* what) { return static_cast<std::uint8_t>(uint(1, what)); }
    std::uint16_t u16(const char* what) { return static_cast<std::uint16_t>(uint(2, what)); }
    std::uint32_t u32(const char* what) { return static_cast<std::uint32_t>(uint(4, what)); }
    float f32(const char* what) { return std::bit_cast<float>(u32(what)); }
    double f64(const char* what) { return std::bit_cast<double>(uint(8, what)); }

private:
    std::span<const std::uint8_t> data_;
    std::size_t pos_ = 0;
};

void expect_magic(ByteSource& in, const char (&magic)[5])
{
    auto got = in.take(4, "magic");
    if (std::memcmp(got.data(), magic, 4) != 0)
        throw FormatError(std::string("bad magic, expected ") + magic, 0);
}

std::uint16_t read_version(ByteSource& in)
{
    const auto at = in.offset();
    const auto version = in.u16("version");
    if (version != kFormatVersion)
        throw FormatError("unsupported version " + std::to_string(version), at);
    return version;
}

std::vector<std::uint32_t> read_shape(ByteSource& in)
{
    const auto at = in.offset();
    const auto ndim = in.u8("ndim");
    if (ndim == 0)
        throw FormatError("tensor has no dimensions", at);
    std::vector<std::uint32_t> shape(ndim);
    std::uint64_t total = 1;
    for (auto& d : shape) {
        const auto dim_at = in.offset();
        d = in.u32("dimension");
        if (d == 0)
            throw FormatError("zero-length dimension", dim_at);
        total *= d;
        if (total > (std::uint64_t{1} << 40))
            throw FormatError("tensor too large", dim_at);
    }
    return shape;
}

void write_shape(ByteSink& out, std::span<const std::uint32_t> shape)
{
    if (shape.empty() || shape.size() > 255)
        throw InvalidArgument("tensor rank must be in [1, 255]");
    out.u8(static_cast<std::uint8_t>(shape.size()));
    for (auto d : shape)
        out.u32(d);
}

void check_shape(std::span<const std::uint32_t> shape, std::size_t values)
{
    if (shape.empty())
        throw InvalidArgument("tensor shape is empty");
    for (auto d : shape)
        if (d == 0)
            throw InvalidArgument("tensor shape has a zero dimension");
    if (element_count(shape) != values)
        throw InvalidArgument("tensor shape does not match its element count");
}

bool is_affine(const QuantizedTensor& qt) { return !qt.params.symmetric; }

Codebook codebook_for(const CodebookRef& ref)
{
    return gen_codebook(ref.bit_width, ref.num_terms, ref.mode);
}

} // namespace

// ---- QuantParams ---------------------------------------------------------------

QuantParams QuantParams::affine(double lower, double upper, int bit_width)
{
    check_bit_width(bit_width);
    check_finite(lower);
    check_finite(upper);
    if (!(upper > lower))
        throw DegenerateRange("quantization range must satisfy M > m");
    QuantParams p;
    p.bit_width = bit_width;
    p.lower = lower;
    p.scale = (upper - lower) / std::ldexp(1.0, bit_width);
    if (!(p.scale > 0.0) || !std::isfinite(p.scale))
        throw DegenerateRange("quantization step is not positive");
    // Keep M on the step grid so the stored (alpha, m) pair reproduces it.
    p.upper = lower + std::ldexp(p.scale, bit_width);
    p.symmetric = false;
    return p;
}

QuantParams QuantParams::symmetric_range(double max_abs, int bit_width, ScaleConvention convention)
{
    check_bit_width(bit_width);
    check_finite(max_abs);
    if (!(max_abs > 0.0))
        throw DegenerateRange("symmetric range needs max|x| > 0");
    QuantParams p;
    p.bit_width = bit_width;
    p.symmetric = true;
    p.convention = convention;
    p.upper = max_abs;
    p.lower = -max_abs;
    p.scale = convention == ScaleConvention::sign_magnitude ? std::ldexp(max_abs, -bit_width)
                                                            : std::ldexp(max_abs, 1 - bit_width);
    if (!(p.scale > 0.0))
        throw DegenerateRange("quantization step underflows");
    return p;
}

// ---- projection ----------------------------------------------------------------

std::size_t project_index(double x, const Codebook& codebook, const QuantParams& params, Sign& sign)
{
    check_finite(x);
    if (!params.symmetric)
        throw InvalidArgument("codebook projection requires symmetric params");
    if (codebook.bit_width() != params.bit_width)
        throw InvalidArgument("codebook and params disagree on bit width");

    const double scaled = std::clamp(x, params.lower, params.upper) / params.scale;
    const double target = std::fabs(scaled);
    const auto& mags = codebook.magnitudes();

    auto it = std::lower_bound(mags.begin(), mags.end(), target,
                               [](std::uint32_t m, double t) { return static_cast<double>(m) < t; });
    std::size_t index;
    if (it == mags.end()) {
        index = mags.size() - 1;
    } else if (it == mags.begin()) {
        index = 0;
    } else {
        const double hi = *it;
        const double lo = *(it - 1);
        index = static_cast<std::size_t>(it - mags.begin());
        if (!(hi - target < target - lo))
            --index; // midpoint goes to the smaller magnitude
    }
    sign = (scaled < 0.0 && index != 0) ? Sign::negative : Sign::positive;
    return index;
}

SignedLevel project(double x, const Codebook& codebook, const QuantParams& params)
{
    Sign sign;
    const auto index = project_index(x, codebook, params, sign);
    return {sign, codebook.magnitudes()[index]};
}

std::uint32_t uniform_level_index(double x, const QuantParams& params)
{
    check_finite(x);
    const double clamped = std::clamp(x, params.lower, params.upper);
    const double steps = std::round((clamped - params.lower) / params.scale);
    const double top = std::ldexp(1.0, params.bit_width);
    return static_cast<std::uint32_t>(std::clamp(steps, 0.0, top));
}

double uniform_quantize(double x, const QuantParams& params)
{
    const auto index = uniform_level_index(x, params);
    const double q = static_cast<double>(index) * params.scale + params.lower;
    return std::clamp(q, params.lower, params.upper);
}

// ---- tensors -------------------------------------------------------------------

std::size_t element_count(std::span<const std::uint32_t> shape)
{
    std::size_t n = 1;
    for (auto d : shape)
        n *= d;
    return n;
}

QuantParams compute_params(std::span<const double> data, int bit_width, const RangePolicy& policy)
{
    if (data.empty())
        throw InvalidArgument("cannot derive a range from an empty tensor");
    for (double v : data)
        check_finite(v);

    if (const auto* fixed = std::get_if<range_policy::Explicit>(&policy)) {
        if (fixed->params.bit_width != bit_width)
            throw InvalidArgument("explicit params disagree on bit width");
        return fixed->params;
    }
    if (const auto* sym = std::get_if<range_policy::SymmetricMaxAbs>(&policy)) {
        double max_abs = 0.0;
        for (double v : data)
            max_abs = std::max(max_abs, std::fabs(v));
        if (max_abs == 0.0)
            throw DegenerateRange("tensor is all zeros; supply explicit limits");
        return QuantParams::symmetric_range(max_abs, bit_width, sym->convention);
    }
    const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
    if (*lo == *hi)
        throw DegenerateRange("tensor has zero range; supply explicit limits");
    return QuantParams::affine(*lo, *hi, bit_width);
}

QuantizedTensor quantize_tensor(const Tensor& data, CodebookRef ref, const RangePolicy& policy)
{
    return quantize_tensor(data, gen_codebook(ref.bit_width, ref.num_terms, ref.mode), policy);
}

QuantizedTensor quantize_tensor(const Tensor& data, const Codebook& codebook, const RangePolicy& policy)
{
    check_shape(data.shape, data.values.size());

    QuantizedTensor qt;
    qt.shape = data.shape;
    qt.codebook = {codebook.mode(), codebook.bit_width(), codebook.num_terms()};
    qt.params = compute_params(data.values, codebook.bit_width(), policy);
    qt.elements.resize(data.values.size());

    if (!qt.params.symmetric) {
        if (codebook.mode() != Mode::uniform)
            throw InvalidArgument("affine ranges are only supported for the uniform quantizer");
        for (std::size_t i = 0; i < data.values.size(); ++i)
            qt.elements[i] = {Sign::positive, uniform_level_index(data.values[i], qt.params)};
        return qt;
    }

    for (std::size_t i = 0; i < data.values.size(); ++i) {
        Sign sign;
        const auto index = project_index(data.values[i], codebook, qt.params, sign);
        qt.elements[i] = {sign, static_cast<std::uint32_t>(index)};
    }
    return qt;
}

Tensor dequantize(const QuantizedTensor& qt)
{
    check_shape(qt.shape, qt.elements.size());
    Tensor out;
    out.shape = qt.shape;
    out.values.resize(qt.elements.size());

    if (is_affine(qt)) {
        const std::uint32_t top = level_count(qt);
        for (std::size_t i = 0; i < qt.elements.size(); ++i) {
            const auto& e = qt.elements[i];
            if (e.index >= top || e.sign != Sign::positive)
                throw OutOfRange("element " + std::to_string(i) + " has an invalid uniform step index");
            out.values[i] = static_cast<double>(e.index) * qt.params.scale + qt.params.lower;
        }
        return out;
    }

    const auto book = codebook_for(qt.codebook);
    const auto& mags = book.magnitudes();
    for (std::size_t i = 0; i < qt.elements.size(); ++i) {
        const auto& e = qt.elements[i];
        if (e.index >= mags.size())
            throw OutOfRange("element " + std::to_string(i) + " has codebook index " + std::to_string(e.index) +
                             " >= " + std::to_string(mags.size()));
        out.values[i] = SignedLevel{e.sign, mags[e.index]}.value(qt.params.scale);
    }
    return out;
}

std::uint32_t level_count(const QuantizedTensor& qt)
{
    if (is_affine(qt))
        return (std::uint32_t{1} << qt.codebook.bit_width) + 1;
    if (qt.codebook.mode == Mode::uniform)
        return 2 * ((std::uint32_t{1} << qt.codebook.bit_width) - 1) + 1;
    return static_cast<std::uint32_t>(codebook_for(qt.codebook).signed_level_count());
}

int element_bits(std::uint32_t levels)
{
    if (levels <= 1)
        return 1;
    return std::bit_width(levels - 1);
}

std::uint32_t encode_element(const ElementCode& e, bool affine)
{
    if (affine || e.index == 0)
        return e.index;
    return e.sign == Sign::positive ? 2 * e.index - 1 : 2 * e.index;
}

ElementCode decode_element(std::uint32_t field, bool affine)
{
    if (affine || field == 0)
        return {Sign::positive, field};
    return (field & 1u) ? ElementCode{Sign::positive, (field + 1) / 2} : ElementCode{Sign::negative, field / 2};
}

// ---- containers ----------------------------------------------------------------

std::vector<std::uint8_t> pack(const QuantizedTensor& qt)
{
    check_shape(qt.shape, qt.elements.size());
    const bool affine = is_affine(qt);
    const auto levels = level_count(qt);
    const int width = element_bits(levels);

    ByteSink out;
    out.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("NHQT"), 4));
    out.u16(kFormatVersion);
    out.u8(static_cast<std::uint8_t>(qt.codebook.mode));
    out.u8(static_cast<std::uint8_t>(qt.codebook.bit_width));
    out.u8(static_cast<std::uint8_t>(qt.codebook.num_terms));
    std::uint8_t flags = 0;
    if (qt.params.symmetric)
        flags |= kFlagSymmetric;
    if (qt.params.convention == ScaleConvention::signed_range)
        flags |= kFlagSignedRange;
    out.u8(flags);
    out.f64(qt.params.scale);
    out.f64(qt.params.lower);
    write_shape(out, qt.shape);

    BitWriter bits;
    for (std::size_t i = 0; i < qt.elements.size(); ++i) {
        const auto field = encode_element(qt.elements[i], affine);
        if (field >= levels)
            throw OutOfRange("element " + std::to_string(i) + " does not fit the level table");
        bits.write(field, width);
    }
    out.raw(bits.bytes());
    return std::move(out.bytes);
}

QuantizedTensor unpack(std::span<const std::uint8_t> bytes)
{
    ByteSource in(bytes);
    expect_magic(in, "NHQT");
    read_version(in);

    QuantizedTensor qt;
    const auto mode_at = in.offset();
    const auto raw_mode = in.u8("mode");
    if (!is_valid_mode(raw_mode))
        throw FormatError("unknown mode " + std::to_string(raw_mode), mode_at);
    qt.codebook.mode = static_cast<Mode>(raw_mode);

    const auto b_at = in.offset();
    qt.codebook.bit_width = in.u8("bit width");
    if (qt.codebook.bit_width < 2 || qt.codebook.bit_width > 16)
        throw FormatError("bit width out of range", b_at);
    const auto n_at = in.offset();
    qt.codebook.num_terms = in.u8("term count");
    if (qt.codebook.num_terms < 1 || qt.codebook.num_terms > qt.codebook.bit_width)
        throw FormatError("term count out of range", n_at);

    const auto flags_at = in.offset();
    const auto flags = in.u8("flags");
    if (flags & ~kKnownFlags)
        throw FormatError("unknown flag bits", flags_at);

    const auto scale_at = in.offset();
    const double scale = in.f64("scale");
    if (!std::isfinite(scale) || !(scale > 0.0))
        throw FormatError("scale must be positive and finite", scale_at);
    const auto offset_at = in.offset();
    const double lower = in.f64("offset");
    if (!std::isfinite(lower))
        throw FormatError("offset must be finite", offset_at);

    auto& p = qt.params;
    p.bit_width = qt.codebook.bit_width;
    p.scale = scale;
    p.lower = lower;
    p.symmetric = (flags & kFlagSymmetric) != 0;
    p.convention = (flags & kFlagSignedRange) ? ScaleConvention::signed_range : ScaleConvention::sign_magnitude;
    if (p.symmetric) {
        if (!(lower < 0.0))
            throw FormatError("symmetric range needs a negative offset", offset_at);
        p.upper = -lower;
    } else {
        if (qt.codebook.mode != Mode::uniform)
            throw FormatError("affine range with a non-uniform codebook", flags_at);
        if (p.convention != ScaleConvention::sign_magnitude)
            throw FormatError("scale convention flag on an affine range", flags_at);
        p.upper = lower + std::ldexp(scale, p.bit_width);
    }

    qt.shape = read_shape(in);
    const auto count = element_count(qt.shape);
    const bool affine = !p.symmetric;
    const auto levels = level_count(qt);
    const int width = element_bits(levels);
    const std::size_t payload_bytes = (count * static_cast<std::size_t>(width) + 7) / 8;
    const auto payload_at = in.offset();
    if (in.remaining() < payload_bytes)
        throw FormatError("truncated payload: need " + std::to_string(payload_bytes) + " bytes, have " +
                              std::to_string(in.remaining()),
                          bytes.size());
    if (in.remaining() > payload_bytes)
        throw FormatError("trailing bytes after payload", payload_at + payload_bytes);

    BitReader reader(in.take(payload_bytes, "payload"));
    qt.elements.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        const auto bit_at = reader.bit_position();
        const auto field = reader.read(width);
        if (field >= levels)
            throw FormatError("element " + std::to_string(i) + " code " + std::to_string(field) + " out of range",
                              payload_at + bit_at / 8);
        qt.elements[i] = decode_element(field, affine);
    }
    return qt;
}

std::vector<std::uint8_t> pack_float_tensor(const Tensor& tensor)
{
    check_shape(tensor.shape, tensor.values.size());
    ByteSink out;
    out.raw(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>("NHFT"), 4));
    out.u16(kFormatVersion);
    write_shape(out, tensor.shape);
    for (double v : tensor.values)
        out.f32(static_cast<float>(v));
    return std::move(out.bytes);
}

Tensor unpack_float_tensor(std::span<const std::uint8_t> bytes)
{
    ByteSource in(bytes);
    expect_magic(in, "NHFT");
    read_version(in);
    Tensor t;
    t.shape = read_shape(in);
    const auto count = element_count(t.shape);
    const auto payload_at = in.offset();
    if (in.remaining() < count * 4)
        throw FormatError("truncated payload", bytes.size());
    if (in.remaining() > count * 4)
        throw FormatError("trailing bytes after payload", payload_at + count * 4);
    t.values.resize(count);
    for (auto& v : t.values) {
        const auto at = in.offset();
        const float f = in.f32("value");
        if (!std::isfinite(f))
            throw FormatError("non-finite value", at);
        v = f;
    }
    return t;
}

std::vector<std::uint8_t> read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw std::runtime_error("cannot open " + path);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::string& path, std::span<const std::uint8_t> bytes)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw std::runtime_error("cannot open " + path + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out)
        throw std::runtime_error("failed writing " + path);
}

double mean_squared_error(std::span<const double> a, std::span<const double> b)
{
    if (a.size() != b.size() || a.empty())
        throw InvalidArgument("mean squared error needs equal non-empty inputs");
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / static_cast<double>(a.size());
}

} // namespace nhot
