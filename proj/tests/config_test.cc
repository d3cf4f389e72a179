/* Copyright 2026 The moesim Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <gtest/gtest.h>

#include <cstdio>
#include <fstream>

#include "moesim/config.h"
#include "test_support.h"

namespace moesim {
namespace {

std::string config_error(const std::string& text, ErrorCode want) {
  try {
    parse_config(text, "cfg.json");
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), want) << e.what();
    return e.what();
  }
  ADD_FAILURE() << "accepted: " << text;
  return "";
}

TEST(Config, Defaults) {
  const ExperimentConfig c = parse_config("{}");
  EXPECT_EQ(c.preset, "moe-gpt3-s");
  EXPECT_EQ(c.model.model_dim(), 768);
  EXPECT_EQ(c.batch.tokens, 16384);
  EXPECT_EQ(c.pipeline.partitions, 1);
  EXPECT_FALSE(c.pipeline.adaptive);
  EXPECT_EQ(c.strategy.mode, StrategyMode::kNone);
  EXPECT_EQ(c.output.trace_format, TraceFormat::kJsonl);
}

TEST(Config, PresetsAndDimensions) {
  ExperimentConfig c = parse_config(R"({"model": {"preset": "moe-bert-l"}})");
  EXPECT_EQ(c.model.model_dim(), 1024);
  EXPECT_EQ(c.model.hidden_dim(), 4096);
  c = parse_config(R"({"model": {"preset": "moe-gpt3-xl", "num_nodes": 8}})");
  EXPECT_EQ(c.model.num_experts(), 64);
  EXPECT_EQ(c.model.num_nodes(), 8);
  c = parse_config(
      R"({"model": {"model_dim": 16, "hidden_dim": 64, "num_experts": 4, "num_nodes": 2,
                    "element_bytes": 4}})");
  EXPECT_EQ(c.preset, "");
  EXPECT_EQ(c.model.element_bytes(), 4);
  config_error(R"({"model": {"preset": "gpt5"}})", ErrorCode::kConfig);
  config_error(R"({"model": {"num_experts": 6, "num_nodes": 4}})",
               ErrorCode::kConfig);
}

TEST(Config, UnknownKeysNamePath) {
  EXPECT_NE(config_error(R"({"hardware": {"w_compp": 1}})", ErrorCode::kConfig)
                .find("hardware.w_compp: unknown key"),
            std::string::npos);
  EXPECT_NE(config_error(R"({"bogus": 1})", ErrorCode::kConfig).find("bogus"),
            std::string::npos);
}

TEST(Config, SyntaxErrorsHaveLocation) {
  const std::string msg =
      config_error("{\n  \"seed\": 3,\n  oops\n}", ErrorCode::kParse);
  EXPECT_EQ(msg.rfind("cfg.json:3:", 0), 0u) << msg;
}

TEST(Config, RangeErrors) {
  EXPECT_NE(config_error(R"({"hardware": {"w_comp": -1}})", ErrorCode::kConfig)
                .find("hardware.w_comp: must be > 0"),
            std::string::npos);
  config_error(R"({"hardware": {"slowdown": {"compute": {"collective": 1.5}}}})",
               ErrorCode::kConfig);
  config_error(R"({"hardware": {"slowdown": {"compute": {"compute": 0.5}}}})",
               ErrorCode::kConfig);
  config_error(R"({"pipeline": {"partitions": 0}})", ErrorCode::kConfig);
  config_error(R"({"batch": {"tokens": "many"}})", ErrorCode::kConfig);
  config_error(R"({"strategy": "S9"})", ErrorCode::kConfig);
  config_error(R"({"strategy": "S2", "reuse": false})", ErrorCode::kConfig);
  config_error(R"({"output": {"trace_format": "svg"}})", ErrorCode::kConfig);
}

TEST(Config, HardwareSections) {
  const ExperimentConfig c = parse_config(R"({
    "hardware": {
      "w_comp": 2e14, "w_comm": 1e10, "w_mem": 5e9,
      "launch_overhead": {"compute": 1e-5, "copy": 0},
      "compute_saturation": 512,
      "slowdown": {"compute": {"collective+copy": 0.7},
                   "collective": {"compute": 0.9}}
    }})");
  const HardwareProfile& hw = c.hardware;
  EXPECT_EQ(hw.w_comp, 2e14);
  EXPECT_EQ(hw.launch(StreamKind::kCompute), 1e-5);
  EXPECT_EQ(hw.launch(StreamKind::kCopy), 0.0);
  EXPECT_EQ(hw.compute_saturation, 512);
  EXPECT_EQ(hw.slowdown.sigma_all(), 0.7);
  EXPECT_EQ(hw.slowdown.sigma_comm(), 1.0);
  EXPECT_EQ(hw.slowdown.mu_comp(), 0.9);
}

TEST(Config, HardwareRoundTrip) {
  testing::Gen gen(17);
  for (int i = 0; i < 50; ++i) {
    const HardwareProfile hw = gen.profile();
    nlohmann::json doc;
    doc["hardware"] = nlohmann::json::parse(hardware_to_json(hw).dump());
    const HardwareProfile back = parse_config(doc.dump()).hardware;
    EXPECT_EQ(back.w_comp, hw.w_comp);
    EXPECT_EQ(back.w_comm, hw.w_comm);
    EXPECT_EQ(back.w_mem, hw.w_mem);
    EXPECT_EQ(back.compute_saturation, hw.compute_saturation);
    for (StreamKind k : kAllStreams) {
      EXPECT_EQ(back.launch(k), hw.launch(k));
      for (unsigned bits = 0; bits < 8; ++bits) {
        const KindSet s = KindSet::from_bits(bits);
        EXPECT_EQ(back.slowdown.factor(k, s), hw.slowdown.factor(k, s));
      }
    }
  }
}

TEST(Config, PipelineBatchAndSweep) {
  const ExperimentConfig c = parse_config(R"({
    "batch": {"tokens": 8192,
              "workload": {"seed": 4, "iterations": 10, "min": 2048,
                           "max": 4096, "step": 1024, "distribution": "zipf"}},
    "pipeline": {"partitions": "adaptive", "candidates": [1, 2, 4],
                 "trials": 2, "noise": 0.1},
    "strategy": "auto", "seed": 11,
    "sweep": {"partitions": [2], "batches": [4096], "strategies": ["S1", "auto"]},
    "output": {"trace_path": "t.json", "trace_format": "trace-event"}
  })");
  EXPECT_EQ(c.batch.tokens, 8192);
  ASSERT_TRUE(c.batch.workload.has_value());
  EXPECT_EQ(c.batch.workload->iterations, 10);
  EXPECT_EQ(c.batch.workload->distribution, WorkloadDistribution::kZipf);
  EXPECT_TRUE(c.pipeline.adaptive);
  EXPECT_EQ(c.pipeline.candidates, (std::vector<Count>{1, 2, 4}));
  EXPECT_EQ(c.pipeline.trials, 2);
  EXPECT_EQ(c.strategy.mode, StrategyMode::kAuto);
  EXPECT_EQ(c.seed, 11u);
  EXPECT_EQ(c.sweep.strategies.size(), 2u);
  EXPECT_EQ(c.output.trace_format, TraceFormat::kTraceEvent);

  EXPECT_EQ(parse_config(R"({"reuse": true})").strategy.mode,
            StrategyMode::kAuto);
  EXPECT_EQ(parse_config(R"({"strategy": "s3"})").strategy.name(), "S3");
}

TEST(Config, LoadFromFile) {
  const std::string path = ::testing::TempDir() + "moesim_cfg.json";
  {
    std::ofstream f(path);
    f << R"({"batch": {"tokens": 1234}})";
  }
  EXPECT_EQ(load_config(path).batch.tokens, 1234);
  std::remove(path.c_str());
  try {
    load_config(path);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kIo);
  }
}

}  // namespace
}  // namespace moesim
