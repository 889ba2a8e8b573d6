#include "dfl/plot.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dfl/runner.hpp"

namespace dfl {
namespace {

namespace fs = std::filesystem;

constexpr double kWidth = 640, kHeight = 400;
constexpr double kLeft = 64, kRight = 150, kTop = 40, kBottom = 50;
constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

std::string xml_escape(const std::string& s) {
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

std::string px(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string file_part(const std::string& s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

}  // namespace

std::vector<Chart> collect_charts(std::span<const fs::path> summaries) {
  if (summaries.empty()) throw std::invalid_argument("plot needs at least one summary");
  struct Group {
    std::vector<std::string> metrics;
    std::string first_file;
    std::map<std::string, Chart> charts;  // by metric
  };
  std::map<std::pair<std::string, std::string>, Group> groups;

  for (const auto& path : summaries) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument(path.string() + ": " + e.what());
    }
    for (const char* key : {"dataset", "attack", "aggregator", "pnr", "metrics"}) {
      if (!j.contains(key)) throw std::invalid_argument(path.string() + ": missing '" + key + "'");
    }
    const std::string dataset = j["dataset"], attack = j["attack"], aggregator = j["aggregator"];
    const double pnr = j["pnr"];
    std::vector<std::string> metrics;
    for (const auto& [name, v] : j["metrics"].items()) metrics.push_back(name);
    std::sort(metrics.begin(), metrics.end());

    auto [it, fresh] = groups.try_emplace({dataset, attack});
    Group& g = it->second;
    if (fresh) {
      g.metrics = metrics;
      g.first_file = path.string();
    } else if (g.metrics != metrics) {
      throw std::invalid_argument("mismatched metric sets for " + dataset + "/" + attack + ": " + path.string() +
                                  " vs " + g.first_file);
    }
    for (const auto& m : metrics) {
      Chart& c = g.charts[m];
      c.dataset = dataset;
      c.attack = attack;
      c.metric = m;
      const auto& stat = j["metrics"][m];
      auto& pts = c.series[aggregator];
      if (std::any_of(pts.begin(), pts.end(), [&](const ChartPoint& p) { return p.pnr == pnr; })) {
        throw std::invalid_argument("duplicate point " + aggregator + " at pnr " + format_double(pnr) + " in " +
                                    dataset + "/" + attack);
      }
      if (stat["mean"].is_null()) continue;
      pts.push_back({pnr, stat["mean"].get<double>(), stat["std"].is_null() ? 0.0 : stat["std"].get<double>()});
      std::sort(pts.begin(), pts.end(), [](const auto& a, const auto& b) { return a.pnr < b.pnr; });
    }
  }

  std::vector<Chart> out;
  for (auto& [key, g] : groups) {
    for (auto& [m, c] : g.charts) out.push_back(std::move(c));
  }
  return out;
}

std::string render_svg(const Chart& chart) {
  const double pw = kWidth - kLeft - kRight, ph = kHeight - kTop - kBottom;
  double y_max = 1.0;
  if (chart.metric == "test_loss") {
    y_max = 0.0;
    for (const auto& [name, pts] : chart.series) {
      for (const auto& p : pts) y_max = std::max(y_max, p.mean + p.std);
    }
    y_max = y_max > 0 ? y_max * 1.1 : 1.0;
  }
  auto x_of = [&](double pnr) { return kLeft + pw * std::clamp(pnr, 0.0, 1.0); };
  auto y_of = [&](double v) { return kTop + ph * (1.0 - std::clamp(v / y_max, 0.0, 1.0)); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << px(kLeft) << "\" y=\"22\" font-size=\"14\">" << xml_escape(chart.dataset) << " / "
    << xml_escape(chart.attack) << ": " << xml_escape(chart.metric) << "</text>\n";

  // axes and grid
  s << "<g stroke=\"#999\" stroke-width=\"1\">\n";
  for (int i = 0; i <= 5; ++i) {
    const double gx = x_of(i / 5.0), gy = y_of(y_max * i / 5.0);
    s << "<line x1=\"" << px(gx) << "\" y1=\"" << px(kTop + ph) << "\" x2=\"" << px(gx) << "\" y2=\""
      << px(kTop + ph + 4) << "\"/>\n";
    s << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(gy) << "\" x2=\"" << px(kLeft + pw) << "\" y2=\"" << px(gy)
      << "\" stroke=\"#eee\"/>\n";
  }
  s << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop) << "\" x2=\"" << px(kLeft) << "\" y2=\""
    << px(kTop + ph) << "\"/>\n";
  s << "<line x1=\"" << px(kLeft) << "\" y1=\"" << px(kTop + ph) << "\" x2=\"" << px(kLeft + pw) << "\" y2=\""
    << px(kTop + ph) << "\"/>\n";
  s << "</g>\n";
  for (int i = 0; i <= 5; ++i) {
    s << "<text class=\"tick\" x=\"" << px(x_of(i / 5.0)) << "\" y=\"" << px(kTop + ph + 16)
      << "\" text-anchor=\"middle\">" << format_double(i / 5.0) << "</text>\n";
    char lbl[32];
    std::snprintf(lbl, sizeof lbl, "%.3g", y_max * i / 5.0);
    s << "<text class=\"tick\" x=\"" << px(kLeft - 6) << "\" y=\"" << px(y_of(y_max * i / 5.0) + 4)
      << "\" text-anchor=\"end\">" << lbl << "</text>\n";
  }
  s << "<text x=\"" << px(kLeft + pw / 2) << "\" y=\"" << px(kHeight - 12)
    << "\" text-anchor=\"middle\">poisoned node ratio</text>\n";
  s << "<text transform=\"translate(16," << px(kTop + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
    << xml_escape(chart.metric) << "</text>\n";

  int idx = 0;
  for (const auto& [name, pts] : chart.series) {
    const char* color = kPalette[idx % std::size(kPalette)];
    s << "<g class=\"series\" data-aggregator=\"" << xml_escape(name) << "\" stroke=\"" << color << "\" fill=\""
      << color << "\">\n";
    if (pts.size() > 1) {
      s << "<polyline fill=\"none\" stroke-width=\"2\" points=\"";
      for (std::size_t i = 0; i < pts.size(); ++i) {
        s << (i ? " " : "") << px(x_of(pts[i].pnr)) << "," << px(y_of(pts[i].mean));
      }
      s << "\"/>\n";
    }
    for (const auto& p : pts) {
      const double x = x_of(p.pnr);
      s << "<line class=\"errorbar\" x1=\"" << px(x) << "\" y1=\"" << px(y_of(p.mean - p.std)) << "\" x2=\""
        << px(x) << "\" y2=\"" << px(y_of(p.mean + p.std)) << "\"/>\n";
      s << "<circle cx=\"" << px(x) << "\" cy=\"" << px(y_of(p.mean)) << "\" r=\"3.5\"/>\n";
      s << "<text class=\"value\" data-aggregator=\"" << xml_escape(name) << "\" data-pnr=\""
        << format_double(p.pnr) << "\" data-std=\"" << format_double(p.std) << "\" x=\"" << px(x + 5) << "\" y=\""
        << px(y_of(p.mean) - 5) << "\" stroke=\"none\" font-size=\"9\">" << format_double(p.mean) << "</text>\n";
    }
    const double ly = kTop + 10 + 18.0 * idx;
    s << "<rect x=\"" << px(kWidth - kRight + 14) << "\" y=\"" << px(ly - 8) << "\" width=\"10\" height=\"10\"/>\n";
    s << "<text x=\"" << px(kWidth - kRight + 30) << "\" y=\"" << px(ly + 1) << "\" stroke=\"none\" fill=\"black\">"
      << xml_escape(name) << "</text>\n";
    s << "</g>\n";
    ++idx;
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<fs::path> plot(std::span<const fs::path> summaries, const fs::path& out_dir) {
  const auto charts = collect_charts(summaries);
  fs::create_directories(out_dir);
  std::vector<fs::path> out;
  for (const auto& c : charts) {
    const fs::path p = out_dir / (file_part(c.dataset) + "_" + file_part(c.attack) + "_" + file_part(c.metric) + ".svg");
    std::ofstream f(p, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + p.string());
    f << render_svg(c);
    out.push_back(p);
  }
  return out;
}

}  // namespace dfl
