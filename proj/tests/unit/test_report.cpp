// Copyright 2026 The LatentFP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "latentfp/report.hpp"
#include "test_util.hpp"

namespace latentfp {
namespace {

SweepRow sample_row() {
  SweepRow r;
  r.pc_range = "48:64";
  r.sigma = 0.1;
  r.d_phi = 16;
  r.attack = "jpeg,jpeg_quality=70";
  r.metric = "robust";
  r.accuracy = 0.96;
  r.bit_accuracy = 0.9975;
  r.frechet_distance = 1.0 / 3.0;
  r.ssim_mean = 0.91;
  r.ssim_std = 0.02;
  r.mean_alpha_error = 0.125;
  r.trials = 500;
  r.failed_decodes = 1;
  r.wall_time_s = 12.5;
  return r;
}

TEST(Report, CsvRoundTripIsExact) {
  SweepReport rep;
  rep.rows.push_back(sample_row());
  SweepRow odd = sample_row();
  odd.attack = "say \"hi\", twice";
  odd.status = "error: bad, very bad";
  odd.mean_alpha_error = std::numeric_limits<double>::quiet_NaN();
  rep.rows.push_back(odd);
  const SweepReport back = parse_csv(to_csv(rep));
  ASSERT_EQ(back.rows.size(), 2u);
  EXPECT_EQ(back.rows[0], rep.rows[0]);
  EXPECT_EQ(back.rows[1].attack, odd.attack);
  EXPECT_EQ(back.rows[1].status, odd.status);
  EXPECT_TRUE(std::isnan(back.rows[1].mean_alpha_error));
  EXPECT_EQ(to_csv(back), to_csv(rep));
}

TEST(Report, CsvHeaderAndFieldCount) {
  const std::string text = to_csv({{sample_row()}, true});
  std::istringstream is(text);
  std::string header, line;
  std::getline(is, header);
  std::getline(is, line);
  EXPECT_EQ(header, report_csv_header());
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15);  // one inside the quoted attack
  EXPECT_THROW(parse_csv("nope\n"), std::runtime_error);
  EXPECT_THROW(parse_csv(report_csv_header() + "\n1,2,3\n"), std::runtime_error);
  EXPECT_THROW(parse_csv_line("48:64,x,16,a,l2,1,1,1,1,0,0,1,0,ok,0"), std::runtime_error);
}

TEST(Report, FileRoundTrip) {
  const auto dir = testing::temp_dir("report");
  SweepReport rep;
  rep.rows = {sample_row(), sample_row()};
  rep.rows[1].metric = "l2";
  write_csv(rep, dir / "r.csv");
  EXPECT_EQ(read_csv(dir / "r.csv").rows, rep.rows);
  EXPECT_THROW(read_csv(dir / "none.csv"), std::runtime_error);
}

TEST(Report, EmptyTableHasHeaderOnly) {
  const std::string t = render_table({});
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 2);  // header and rule
  EXPECT_NE(t.find("Att."), std::string::npos);
  EXPECT_NE(t.find("FD"), std::string::npos);
}

TEST(Report, OneRowTable) {
  const std::string t = render_table({{sample_row()}, true});
  EXPECT_EQ(std::count(t.begin(), t.end(), '\n'), 3);
  EXPECT_NE(t.find("0.960"), std::string::npos);
  EXPECT_NE(t.find("0.910 +- 0.020"), std::string::npos);
  EXPECT_EQ(t.find("partial"), std::string::npos);
}

TEST(Report, FailedAndPartialAreVisible) {
  SweepReport rep{{sample_row()}, false};
  rep.rows[0].status = "error: boom";
  const std::string t = render_table(rep);
  EXPECT_NE(t.find("(error: boom)"), std::string::npos);
  EXPECT_NE(t.find("(partial report)"), std::string::npos);
}

TEST(Report, JsonHasEveryColumnAndNullForNan) {
  SweepReport rep{{sample_row()}, true};
  rep.rows[0].frechet_distance = std::numeric_limits<double>::quiet_NaN();
  const auto j = nlohmann::json::parse(to_json(rep));
  EXPECT_TRUE(j["complete"].get<bool>());
  const auto& row = j["rows"][0];
  EXPECT_TRUE(row["frechet_distance"].is_null());
  EXPECT_EQ(row["trials"].get<int>(), 500);
  std::istringstream head(report_csv_header());
  std::string col;
  while (std::getline(head, col, ',')) EXPECT_TRUE(row.contains(col)) << col;
}

TEST(Report, RenderWritesTableAndScatter) {
  const auto dir = testing::temp_dir("render");
  render_report({{sample_row()}, true}, dir);
  std::ifstream svg(dir / "report.svg");
  std::stringstream ss;
  ss << svg.rdbuf();
  EXPECT_EQ(ss.str().rfind("<svg", 0), 0u);
  EXPECT_NE(ss.str().find("<circle"), std::string::npos);
  EXPECT_TRUE(std::filesystem::exists(dir / "report.txt"));
}

}  // namespace
}  // namespace latentfp
