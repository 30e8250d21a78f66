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

#include <filesystem>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cli.hpp"
#include "nhot/codec.hpp"

namespace fs = std::filesystem;

namespace {

struct Outcome {
    int code;
    std::string out;
    std::string err;
};

Outcome run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = nhot::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

struct TempDir {
    fs::path path;
    TempDir()
    {
        path = fs::temp_directory_path() / ("nhot_cli_" + std::to_string(std::random_device{}()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_text(const std::string& path, const std::string& text)
{
    std::ofstream(path, std::ios::binary) << text;
}

} // namespace

TEST_CASE("codebook counts")
{
    const auto r = run({"codebook", "-b", "8", "-n", "2"});
    CHECK(r.code == 0);
    CHECK(r.out.find("count 58 magnitudes") != std::string::npos);

    const auto small = run({"codebook", "--bits", "3", "--terms", "2", "--mode", "nhot"});
    CHECK(small.code == 0);
    CHECK(small.out.find("7\t1.75\t+2^3 -2^0") != std::string::npos);

    const auto add = run({"codebook", "-b", "8", "-n", "2", "-m", "additive"});
    CHECK(add.out.find("count 37 magnitudes") != std::string::npos);
}

TEST_CASE("codebook json is stable and complete")
{
    const auto a = run({"codebook", "-b", "5", "-n", "2", "--json"});
    const auto b = run({"codebook", "-b", "5", "-n", "2", "--json"});
    REQUIRE(a.code == 0);
    CHECK(a.out == b.out);
    const auto j = nlohmann::json::parse(a.out);
    CHECK(j["count"] == 22);
    CHECK(j["levels"].size() == 22);
    CHECK(j["levels"][0]["magnitude"] == 0);
}

TEST_CASE("usage errors exit with 2")
{
    CHECK(run({}).code == 2);
    CHECK(run({"codebook", "-b", "8"}).code == 2);
    CHECK(run({"codebook", "-b", "8", "-n", "2", "--frobnicate"}).code == 2);
    CHECK(run({"codebook", "-b", "8", "-n", "2", "-m", "ternary"}).code == 2);
    CHECK(run({"codebook", "-b", "40", "-n", "2"}).code == 2);
    CHECK(run({"simulate", "-b", "8", "-n", "2", "--exhaustive", "--trials", "3"}).code == 2);
    CHECK(run({"launch"}).code == 2);
}

TEST_CASE("exhaustive simulation agrees with integer products")
{
    const auto r = run({"simulate", "-b", "8", "-n", "2", "--exhaustive", "--json"});
    CHECK(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["mismatches"] == 0);
    CHECK(j["checked"] == 115 * 256);
}

TEST_CASE("randomised simulation and trace")
{
    CHECK(run({"simulate", "-b", "6", "-n", "2", "--seed", "9", "--trials", "2000"}).code == 0);
    const auto t = run({"simulate", "-b", "8", "-n", "2", "--trace", "28", "--activation", "200"});
    CHECK(t.code == 0);
    CHECK(t.out.find("5600") != std::string::npos);
}

TEST_CASE("quantize and dequantize through files")
{
    TempDir dir;
    nhot::Tensor t;
    t.shape = {4, 5};
    for (int i = 0; i < 20; ++i)
        t.values.push_back(0.1f * static_cast<float>(i - 9));
    {
        std::ofstream f(dir.file("w.nhft"), std::ios::binary);
        const auto bytes = nhot::pack_float_tensor(t);
        f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    }

    auto q = run({"quantize", "--in", dir.file("w.nhft"), "--out", dir.file("w.nhqt"), "-b", "6", "-n", "2", "--json"});
    REQUIRE(q.code == 0);
    const auto info = nlohmann::json::parse(q.out);
    CHECK(info["elements"] == 20);
    CHECK(info["mse"].get<double>() < 1e-3);

    auto d = run({"dequantize", "--in", dir.file("w.nhqt"), "--out", dir.file("back.nhft")});
    REQUIRE(d.code == 0);
    std::ifstream in(dir.file("back.nhft"), std::ios::binary);
    const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), {});
    const auto back = nhot::unpack_float_tensor(bytes);
    CHECK(back.shape == t.shape);
    const auto expected = nhot::dequantize(nhot::quantize_tensor(t, nhot::CodebookRef{nhot::Mode::nhot, 6, 2}));
    CHECK(back.values == expected.values);
}

TEST_CASE("malformed files exit with 1")
{
    TempDir dir;
    write_text(dir.file("short.nhqt"), "NHQT\x01");
    const auto r = run({"dequantize", "--in", dir.file("short.nhqt"), "--out", dir.file("o.nhft")});
    CHECK(r.code == 1);
    CHECK_FALSE(r.err.empty());
    CHECK(run({"dequantize", "--in", dir.file("missing.nhqt"), "--out", dir.file("o.nhft")}).code == 1);
}

TEST_CASE("cost report")
{
    TempDir dir;
    write_text(dir.file("layers.json"),
               R"([{"name":"fc","kind":"dense","macs":1000,"weight_count":1000,"unquantized_bytes":0,)"
               R"("b_a":8,"weight_scheme":"nhot:8:2"}])");
    const auto r = run({"cost", "--layers", dir.file("layers.json"), "--json"});
    REQUIRE(r.code == 0);
    const auto j = nlohmann::json::parse(r.out);
    CHECK(j["totals"]["bitops"] == 16000);
    CHECK(j["baseline"]["totals"]["bitops"] == 64000);
    CHECK(j["ratios"]["bitops"] == 0.25);
    CHECK(j["layers"][0]["bits_per_weight"] == 7);

    write_text(dir.file("bad.json"), R"([{"name":"fc","kind":"dense","macs":-1}])");
    CHECK(run({"cost", "--layers", dir.file("bad.json")}).code != 0);
}

TEST_CASE("train demo")
{
    TempDir dir;
    write_text(dir.file("cfg.json"),
               R"({"epochs_warmup":2,"epochs_total":4,"dataset_size":200,"pretrain_epochs":3})");
    const auto r = run({"train-demo", "--config", dir.file("cfg.json"), "--metrics", dir.file("m.jsonl")});
    REQUIRE(r.code == 0);
    std::ifstream in(dir.file("m.jsonl"));
    std::string line;
    int lines = 0;
    while (std::getline(in, line)) {
        CHECK(nlohmann::json::parse(line)["epoch"] == ++lines);
    }
    CHECK(lines == 4);
    const auto summary = nlohmann::json::parse(r.out);
    CHECK(summary.contains("float_accuracy"));
    CHECK(summary.contains("quantized_accuracy"));

    write_text(dir.file("bad.json"), R"({"epochs":3})");
    CHECK(run({"train-demo", "--config", dir.file("bad.json")}).code == 2);
}
