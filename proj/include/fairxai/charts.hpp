/*
 * Copyright 2026 The fairxai Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// SVG 1.1 charts rendered from results.json. Output depends only on the
// report: fixed canvas sizes, coordinates printed with 2 decimals, no
// timestamps or ids derived from the environment.

#pragma once

#include <cmath>
#include <filesystem>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "fairxai/common.hpp"
#include "fairxai/report.hpp"

namespace fairxai::charts {

namespace detail {

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string num(double v) {
  auto s = fmt::format("{:.2f}", v);
  return s == "-0.00" ? "0.00" : s;
}

inline std::string open_svg(int w, int h) {
  return fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{0}\" height=\"{1}\" "
      "viewBox=\"0 0 {0} {1}\" font-family=\"Helvetica, Arial, sans-serif\">\n"
      "<rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"#ffffff\"/>\n",
      w, h);
}

inline std::string text(double x, double y, std::string_view s, int size = 12,
                        std::string_view anchor = "middle", std::string_view fill = "#222222") {
  return fmt::format("<text x=\"{}\" y=\"{}\" font-size=\"{}\" text-anchor=\"{}\" fill=\"{}\">{}</text>\n",
                     num(x), num(y), size, anchor, fill, xml_escape(s));
}

// White to a saturated colour, t in [0, 1].
inline std::string ramp(double t, int r, int g, int b) {
  t = std::clamp(t, 0.0, 1.0);
  auto mix = [t](int c) { return static_cast<int>(std::lround(255.0 + (c - 255.0) * t)); };
  return fmt::format("#{:02x}{:02x}{:02x}", mix(r), mix(g), mix(b));
}

inline std::string file_token(std::string_view s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace detail

/// 2x2 grid: rows are the true class, columns the predicted class.
inline std::string confusion_svg(std::string_view title, const nlohmann::json& classification) {
  using namespace detail;
  const double tn = classification["TN"].get<double>();
  const double fp = classification["FP"].get<double>();
  const double fn = classification["FN"].get<double>();
  const double tp = classification["TP"].get<double>();
  const double max = std::max({tn, fp, fn, tp, 1.0});
  std::string s = open_svg(360, 320);
  s += text(180, 28, title, 15);
  const double x0 = 110;
  const double y0 = 70;
  const double c = 110;
  const std::array<std::array<double, 2>, 2> grid = {{{tn, fp}, {fn, tp}}};
  const std::array<std::string_view, 2> names = {"Not Depressed", "Depressed"};
  for (int r = 0; r < 2; ++r) {
    for (int col = 0; col < 2; ++col) {
      const double v = grid[r][col];
      const double x = x0 + col * c;
      const double y = y0 + r * c;
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#444444\"/>\n",
                       num(x), num(y), num(c), num(c), ramp(v / max, 33, 102, 172));
      s += text(x + c / 2, y + c / 2 + 6, fmt::format("{}", static_cast<long long>(v)), 20,
                "middle", v / max > 0.6 ? "#ffffff" : "#222222");
    }
    s += text(x0 - 8, y0 + r * c + c / 2 + 4, names[static_cast<std::size_t>(r)], 11, "end");
    s += text(x0 + r * c + c / 2, y0 + 2 * c + 18, names[static_cast<std::size_t>(r)], 11);
  }
  s += text(x0 + c, y0 + 2 * c + 40, "Predicted", 12);
  s += fmt::format("<text x=\"20\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\" "
                   "transform=\"rotate(-90 20 {})\">True</text>\n",
                   num(y0 + c), num(y0 + c));
  return s + "</svg>\n";
}

/// Radar over (Δ Accuracy, Δ Eq. Opportunity, DI) with one polygon per
/// variant. Gaps use a 0..1 radius; DI uses 0..2 with parity at mid-radius.
/// An undefined DI is drawn as a hatched sector and contributes no vertex.
inline std::string radar_svg(std::string_view attribute, const nlohmann::json& results) {
  using namespace detail;
  const double cx = 200;
  const double cy = 210;
  const double radius = 130;
  const std::array<std::string_view, 3> axes = {report::kDeltaAcc, report::kDeltaEo, report::kDi};
  auto angle = [](std::size_t i) {
    return -std::numbers::pi / 2 + static_cast<double>(i) * 2 * std::numbers::pi / 3;
  };
  std::string s = open_svg(400, 420);
  s += "<defs><pattern id=\"hatch\" width=\"8\" height=\"8\" patternUnits=\"userSpaceOnUse\" "
       "patternTransform=\"rotate(45)\"><line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"8\" "
       "stroke=\"#999999\" stroke-width=\"2\"/></pattern></defs>\n";
  s += text(200, 28, fmt::format("Fairness radar: {}", attribute), 15);
  for (int ring = 1; ring <= 4; ++ring) {
    std::string pts;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const double r = radius * ring / 4.0;
      pts += fmt::format("{},{} ", num(cx + r * std::cos(angle(i))), num(cy + r * std::sin(angle(i))));
    }
    pts.pop_back();
    s += fmt::format("<polygon points=\"{}\" fill=\"none\" stroke=\"#dddddd\"/>\n", pts);
  }
  for (std::size_t i = 0; i < axes.size(); ++i) {
    const double ex = cx + radius * std::cos(angle(i));
    const double ey = cy + radius * std::sin(angle(i));
    s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#bbbbbb\"/>\n", num(cx),
                     num(cy), num(ex), num(ey));
    const double lx = cx + (radius + 22) * std::cos(angle(i));
    const double ly = cy + (radius + 22) * std::sin(angle(i)) + 4;
    s += text(lx, ly, i == 2 ? std::string(axes[i]) + " (0-2)" : std::string(axes[i]), 11);
  }
  const std::array<std::string_view, 2> colours = {"#1f77b4", "#d62728"};
  int legend = 0;
  for (const auto& variant : report::variant_order(results)) {
    const auto& f = results["variants"][variant]["fairness"][std::string(attribute)];
    const auto colour = colours[static_cast<std::size_t>(legend) % colours.size()];
    std::string pts;
    bool di_undefined = false;
    for (std::size_t i = 0; i < axes.size(); ++i) {
      const auto& v = f[std::string(axes[i])];
      if (v.is_null()) {
        if (i == 2) di_undefined = true;
        continue;
      }
      const double scaled = i == 2 ? std::min(v.get<double>(), 2.0) / 2.0 : std::min(v.get<double>(), 1.0);
      pts += fmt::format("{},{} ", num(cx + radius * scaled * std::cos(angle(i))),
                         num(cy + radius * scaled * std::sin(angle(i))));
    }
    if (!pts.empty()) pts.pop_back();
    const auto shape = di_undefined ? "polyline" : "polygon";
    s += fmt::format("<{} points=\"{}\" fill=\"{}\" fill-opacity=\"{}\" stroke=\"{}\" stroke-width=\"2\"/>\n",
                     shape, pts, di_undefined ? "none" : colour, di_undefined ? "0" : "0.15", colour);
    if (di_undefined) {
      const double a0 = angle(2) - 0.3;
      const double a1 = angle(2) + 0.3;
      const double r = radius * (0.45 + 0.15 * legend);
      s += fmt::format(
          "<path d=\"M {} {} L {} {} A {} {} 0 0 1 {} {} Z\" fill=\"url(#hatch)\" stroke=\"{}\"/>\n",
          num(cx), num(cy), num(cx + r * std::cos(a0)), num(cy + r * std::sin(a0)), num(r), num(r),
          num(cx + r * std::cos(a1)), num(cy + r * std::sin(a1)), colour);
    }
    const double ly = 380 + 16 * legend;
    s += fmt::format("<rect x=\"20\" y=\"{}\" width=\"12\" height=\"12\" fill=\"{}\"/>\n", num(ly - 10), colour);
    s += text(38, ly, di_undefined ? variant + " (DI undefined)" : variant, 12, "start");
    ++legend;
  }
  return s + "</svg>\n";
}

/// Rows are the seven modality configurations, columns the text-embedding
/// sources. Colour encodes ΔEO; the cell text gives accuracy and ΔEO.
inline std::string heatmap_svg(const nlohmann::json& ablation) {
  using namespace detail;
  const auto& sources = ablation["sources"];
  const auto& rows = ablation["rows"];
  const double left = 130;
  const double top = 70;
  const double cw = 150;
  const double ch = 44;
  const int w = static_cast<int>(left + cw * static_cast<double>(sources.size()) + 30);
  const int h = static_cast<int>(top + ch * static_cast<double>(rows.size()) + 60);
  std::string s = open_svg(w, h);
  s += text(w / 2.0, 28, "Ablation: accuracy (text) and ΔEO (colour)", 15);
  for (std::size_t c = 0; c < sources.size(); ++c) {
    s += text(left + cw * static_cast<double>(c) + cw / 2, top - 12, sources[c].get<std::string>(), 12);
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double y = top + ch * static_cast<double>(r);
    s += text(left - 10, y + ch / 2 + 4, rows[r]["config"].get<std::string>(), 12, "end");
    for (std::size_t c = 0; c < sources.size(); ++c) {
      const double x = left + cw * static_cast<double>(c);
      const auto& cell = rows[r]["cells"][sources[c].get<std::string>()];
      std::string fill = "#eeeeee";
      std::string label = "skipped";
      if (cell["skipped"].is_null()) {
        const auto& eo = cell["delta_eo"];
        fill = eo.is_null() ? "#eeeeee" : ramp(eo.get<double>(), 200, 40, 40);
        label = fmt::format("acc {} / ΔEO {}{}", report::cell(cell["accuracy"]), report::cell(eo),
                            cell["collapsed"].get<bool>() ? "*" : "");
      }
      s += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"#ffffff\"/>\n",
                       num(x), num(y), num(cw), num(ch), fill);
      s += text(x + cw / 2, y + ch / 2 + 4, label, 11);
    }
  }
  s += text(left, h - 20, "* collapsed: single-class predictions, ΔEO is vacuous", 11, "start");
  return s + "</svg>\n";
}

/// Writes every chart for a report into `dir`; returns the file names in
/// creation order.
inline std::vector<std::string> emit_charts(const nlohmann::json& results,
                                            const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& body) {
    write_text_file(dir / name, body);
    files.push_back(name);
  };
  const std::string pipeline = results["pipeline"].get<std::string>();
  const auto variants = report::variant_order(results);
  for (const auto& v : variants) {
    emit(fmt::format("confusion_{}_{}.svg", pipeline, v),
         confusion_svg(fmt::format("{} pipeline, {}", pipeline, v),
                       results["variants"][v]["classification"]));
  }
  if (!variants.empty()) {
    for (const auto& [attr, _] : results["variants"][variants.front()]["fairness"].items()) {
      emit(fmt::format("radar_{}.svg", detail::file_token(attr)), radar_svg(attr, results));
    }
  }
  if (results.contains("ablation") && !results["ablation"].is_null()) {
    emit("ablation_heatmap.svg", heatmap_svg(results["ablation"]));
  }
  return files;
}

}  // namespace fairxai::charts
