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

#include "latentfp/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace latentfp {
namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool in_quotes = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (in_quotes) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        in_quotes = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || *end != '\0') throw std::runtime_error("report CSV: bad number '" + s + "'");
  return v;
}

std::string escape_xml(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string report_csv_header() {
  return "pc_range,sigma,d_phi,attack,metric,accuracy,bit_accuracy,frechet_distance,ssim_mean,"
         "ssim_std,mean_alpha_error,trials,failed_decodes,status,wall_time_s";
}

std::string to_csv_line(const SweepRow& r) {
  std::ostringstream os;
  os << quote(r.pc_range) << ',' << fmt(r.sigma) << ',' << r.d_phi << ',' << quote(r.attack) << ','
     << quote(r.metric) << ',' << fmt(r.accuracy) << ',' << fmt(r.bit_accuracy) << ','
     << fmt(r.frechet_distance) << ',' << fmt(r.ssim_mean) << ',' << fmt(r.ssim_std) << ','
     << fmt(r.mean_alpha_error) << ',' << r.trials << ',' << r.failed_decodes << ','
     << quote(r.status) << ',' << fmt(r.wall_time_s);
  return os.str();
}

SweepRow parse_csv_line(const std::string& line) {
  const auto f = split_csv(line);
  if (f.size() != 15) throw std::runtime_error("report CSV: expected 15 fields");
  SweepRow r;
  r.pc_range = f[0];
  r.sigma = parse_double(f[1]);
  r.d_phi = std::stoi(f[2]);
  r.attack = f[3];
  r.metric = f[4];
  r.accuracy = parse_double(f[5]);
  r.bit_accuracy = parse_double(f[6]);
  r.frechet_distance = parse_double(f[7]);
  r.ssim_mean = parse_double(f[8]);
  r.ssim_std = parse_double(f[9]);
  r.mean_alpha_error = parse_double(f[10]);
  r.trials = std::stoi(f[11]);
  r.failed_decodes = std::stoi(f[12]);
  r.status = f[13];
  r.wall_time_s = parse_double(f[14]);
  return r;
}

std::string to_csv(const SweepReport& report) {
  std::string out = report_csv_header() + "\n";
  for (const SweepRow& r : report.rows) out += to_csv_line(r) + "\n";
  return out;
}

SweepReport parse_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != report_csv_header())
    throw std::runtime_error("report CSV: missing or unexpected header");
  SweepReport rep;
  while (std::getline(is, line))
    if (!line.empty()) rep.rows.push_back(parse_csv_line(line));
  return rep;
}

void write_csv(const SweepReport& report, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << to_csv(report);
}

SweepReport read_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_csv(ss.str());
}

std::string to_json(const SweepReport& report) {
  nlohmann::json j;
  j["complete"] = report.complete;
  j["rows"] = nlohmann::json::array();
  for (const SweepRow& r : report.rows) {
    auto num = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
    j["rows"].push_back({{"pc_range", r.pc_range},
                         {"sigma", r.sigma},
                         {"d_phi", r.d_phi},
                         {"attack", r.attack},
                         {"metric", r.metric},
                         {"accuracy", num(r.accuracy)},
                         {"bit_accuracy", num(r.bit_accuracy)},
                         {"frechet_distance", num(r.frechet_distance)},
                         {"ssim_mean", num(r.ssim_mean)},
                         {"ssim_std", num(r.ssim_std)},
                         {"mean_alpha_error", num(r.mean_alpha_error)},
                         {"trials", r.trials},
                         {"failed_decodes", r.failed_decodes},
                         {"status", r.status},
                         {"wall_time_s", r.wall_time_s}});
  }
  return j.dump(2);
}

std::string render_table(const SweepReport& report) {
  const std::vector<std::string> head = {"PC",  "sigma", "d_phi", "attack", "metric", "Att.",
                                         "bit", "FD",    "SSIM",  "|e_a|",  "time(s)"};
  std::vector<std::vector<std::string>> cells;
  auto fixed = [](double v, int p) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(p) << v;
    return os.str();
  };
  for (const SweepRow& r : report.rows) {
    cells.push_back({r.pc_range, fixed(r.sigma, 3), std::to_string(r.d_phi), r.attack, r.metric,
                     fixed(r.accuracy, 3), fixed(r.bit_accuracy, 3), fixed(r.frechet_distance, 3),
                     fixed(r.ssim_mean, 3) + " +- " + fixed(r.ssim_std, 3),
                     fixed(r.mean_alpha_error, 3), fixed(r.wall_time_s, 1)});
    if (r.status != "ok") cells.back()[5] += " (" + r.status + ")";
  }
  std::vector<std::size_t> width(head.size());
  for (std::size_t c = 0; c < head.size(); ++c) {
    width[c] = head[c].size();
    for (const auto& row : cells) width[c] = std::max(width[c], row[c].size());
  }
  std::ostringstream os;
  auto line = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c)
      os << (c ? "  " : "") << std::left << std::setw(int(width[c])) << row[c];
    os << '\n';
  };
  line(head);
  std::size_t total = 0;
  for (std::size_t w : width) total += w + 2;
  os << std::string(total - 2, '-') << '\n';
  for (const auto& row : cells) line(row);
  if (!report.complete) os << "(partial report)\n";
  return os.str();
}

std::string render_scatter_svg(const SweepReport& report) {
  constexpr double kW = 480, kH = 360, kPad = 48;
  double fd_max = 0;
  for (const SweepRow& r : report.rows)
    if (std::isfinite(r.frechet_distance)) fd_max = std::max(fd_max, r.frechet_distance);
  if (fd_max <= 0) fd_max = 1;
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kH - kPad << "\" x2=\"" << kW - kPad / 2 << "\" y2=\""
     << kH - kPad << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << kPad << "\" y1=\"" << kPad / 2 << "\" x2=\"" << kPad << "\" y2=\""
     << kH - kPad << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << kW / 2 << "\" y=\"" << kH - 10 << "\" font-size=\"12\">Frechet distance (max "
     << fd_max << ")</text>\n";
  os << "<text x=\"12\" y=\"" << kH / 2 << "\" font-size=\"12\" transform=\"rotate(-90 12 " << kH / 2
     << ")\">attribution accuracy</text>\n";
  for (const SweepRow& r : report.rows) {
    if (!std::isfinite(r.accuracy) || !std::isfinite(r.frechet_distance)) continue;
    const double x = kPad + (kW - 1.5 * kPad) * r.frechet_distance / fd_max;
    const double y = kH - kPad - (kH - 1.5 * kPad) * r.accuracy;
    os << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"3\" fill=\"steelblue\"/>\n";
    os << "<text x=\"" << x + 4 << "\" y=\"" << y - 4 << "\" font-size=\"9\">"
       << escape_xml(r.pc_range + " s=" + fmt(r.sigma) + " " + r.attack + " " + r.metric)
       << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

void render_report(const SweepReport& report, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream(dir / "report.txt") << render_table(report);
  std::ofstream(dir / "report.svg") << render_scatter_svg(report);
}

}  // namespace latentfp
