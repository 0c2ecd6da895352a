#include "nape/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>

#include "nape/errors.hpp"

namespace nape {

namespace {

using nlohmann::json;

std::string shortest(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

// JSON has no inf/nan; keep them readable as strings.
json number(double v) {
  if (std::isfinite(v)) return v;
  return shortest(v);
}

const char* relation_name(Relation r) {
  switch (r) {
    case Relation::at_most:
      return "<=";
    case Relation::at_least:
      return ">=";
    case Relation::within:
      return "within";
  }
  return "?";
}

std::ofstream open(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

std::string escape_xml(const std::string& s) {
  std::string o;
  for (char ch : s) {
    switch (ch) {
      case '<':
        o += "&lt;";
        break;
      case '>':
        o += "&gt;";
        break;
      case '&':
        o += "&amp;";
        break;
      default:
        o += ch;
    }
  }
  return o;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick_label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

}  // namespace

Check Check::at_most(std::string name, double value, double bound) {
  return {std::move(name), value, bound, Relation::at_most, bound, value <= bound};
}

Check Check::at_least(std::string name, double value, double bound) {
  return {std::move(name), value, bound, Relation::at_least, bound, value >= bound};
}

Check Check::within(std::string name, double value, double target, double tolerance) {
  return {std::move(name), value, tolerance, Relation::within, target, std::abs(value - target) <= tolerance};
}

Check Check::flag(std::string name, bool ok) {
  return {std::move(name), ok ? 1.0 : 0.0, 1.0, Relation::at_least, 1.0, ok};
}

bool ExperimentResult::passed() const {
  return !error && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass; });
}

json ExperimentResult::to_json() const {
  json j;
  j["verdict"] = error ? "ERROR" : (passed() ? "PASS" : "FAIL");
  if (classification) j["classification"] = *classification;
  if (error) j["error"] = *error;
  json checks_j = json::array();
  for (const Check& c : checks) {
    json e{{"name", c.name},
           {"value", number(c.value)},
           {"tolerance", number(c.tolerance)},
           {"relation", relation_name(c.relation)},
           {"pass", c.pass}};
    if (c.relation == Relation::within) e["target"] = number(c.target);
    checks_j.push_back(std::move(e));
  }
  j["checks"] = std::move(checks_j);
  j["values"] = values;
  j["artifacts"] = artifacts;
  return j;
}

int RunReport::exit_code() const {
  int code = 0;
  for (const ExperimentResult& e : experiments) {
    if (e.error) return 3;
    if (!e.passed()) code = 1;
  }
  return code;
}

json RunReport::to_json() const {
  json j;
  j["config"] = config;
  j["subcommand"] = subcommand;
  j["provenance"] = {{"library", "nape"},
                     {"version", library_version()},
                     {"seed", seed},
                     {"refine", refine},
                     {"compiler", __VERSION__}};
  json ex = json::object();
  for (const ExperimentResult& e : experiments) ex[e.name] = e.to_json();
  j["experiments"] = std::move(ex);
  const int code = exit_code();
  j["verdict"] = code == 0 ? "PASS" : (code == 1 ? "FAIL" : "ERROR");
  return j;
}

json RunReport::timing_json() const {
  json j = json::object();
  double total = 0.0;
  for (const ExperimentResult& e : experiments) {
    j[e.name] = e.seconds;
    total += e.seconds;
  }
  j["total"] = total;
  return j;
}

const char* library_version() { return "0.1.0"; }

void write_csv(const std::filesystem::path& path, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& columns) {
  if (header.size() != columns.size()) throw std::invalid_argument("csv header and column count differ");
  const std::size_t rows = columns.empty() ? 0 : columns.front().size();
  for (const auto& c : columns)
    if (c.size() != rows) throw std::invalid_argument("csv columns differ in length");
  std::ofstream out = open(path);
  for (std::size_t k = 0; k < header.size(); ++k) out << (k ? "," : "") << header[k];
  out << '\n';
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t k = 0; k < columns.size(); ++k) out << (k ? "," : "") << shortest(columns[k][r]);
    out << '\n';
  }
}

void write_svg_plot(const std::filesystem::path& path, const PlotSpec& spec, const std::vector<Series>& series) {
  constexpr double W = 640, H = 420, left = 70, right = 150, top = 40, bottom = 50;
  const double pw = W - left - right, ph = H - top - bottom;
  auto ty = [&](double y) { return spec.log_y ? std::log10(y) : y; };
  auto usable = [&](double x, double y) { return std::isfinite(x) && std::isfinite(y) && (!spec.log_y || y > 0.0); };

  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = x0, y1 = -x0;
  for (const Series& s : series)
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      if (!usable(s.x[i], s.y[i])) continue;
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, ty(s.y[i]));
      y1 = std::max(y1, ty(s.y[i]));
    }
  if (!(x0 <= x1)) x0 = 0, x1 = 1, y0 = 0, y1 = 1;
  if (x1 == x0) x0 -= 0.5, x1 += 0.5;
  if (y1 == y0) y0 -= 0.5, y1 += 0.5;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto py = [&](double y) { return top + (1.0 - (ty(y) - y0) / (y1 - y0)) * ph; };

  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
  std::ofstream out = open(path);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
      << escape_xml(spec.title) << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
    const double X = left + pw * k / 4.0, Y = top + ph * (1.0 - k / 4.0);
    out << "<text x=\"" << fmt(X) << "\" y=\"" << fmt(top + ph + 16) << "\" text-anchor=\"middle\">" << tick_label(fx)
        << "</text>\n";
    out << "<text x=\"" << fmt(left - 6) << "\" y=\"" << fmt(Y + 4) << "\" text-anchor=\"end\">"
        << tick_label(spec.log_y ? std::pow(10.0, fy) : fy) << "</text>\n";
  }
  out << "<text x=\"" << fmt(left + pw / 2) << "\" y=\"" << fmt(H - 10) << "\" text-anchor=\"middle\">"
      << escape_xml(spec.xlabel) << "</text>\n";
  out << "<text transform=\"translate(16," << fmt(top + ph / 2) << ") rotate(-90)\" text-anchor=\"middle\">"
      << escape_xml(spec.ylabel + (spec.log_y ? " (log)" : "")) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const Series& s = series[k];
    const char* color = colors[k % std::size(colors)];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i)
      if (usable(s.x[i], s.y[i])) out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i])) << ' ';
    out << "\"/>\n";
    const double ly = top + 14 + 16 * static_cast<double>(k);
    out << "<line x1=\"" << fmt(left + pw + 10) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\"" << fmt(left + pw + 30)
        << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(left + pw + 34) << "\" y=\"" << fmt(ly) << "\">" << escape_xml(s.label) << "</text>\n";
  }
  out << "</svg>\n";
}

}  // namespace nape
