#ifndef RLM_IO_HPP_
#define RLM_IO_HPP_

// Trace CSV, run-summary JSON and single-series SVG plots.

#include "rlm/solver.hpp"

#include <json.hpp>

#include <charconv>
#include <fstream>
#include <iomanip>
#include <map>

namespace rlm {

/// Shortest decimal string that parses back to exactly `v`.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::invalid_argument("not a number: '" + s + "'");
  return v;
}

inline constexpr const char* kTraceHeader = "iter,f,grad_norm,lambda,mu,rho,step_norm,successful,sub_iters,wall_ms";

inline void write_trace_csv(std::ostream& os, const std::vector<IterRecord>& trace) {
  os << kTraceHeader << '\n';
  for (const auto& r : trace) {
    os << r.k << ',' << format_double(r.f) << ',' << format_double(r.grad_norm) << ',' << format_double(r.lambda) << ','
       << format_double(r.mu) << ',' << format_double(r.rho) << ',' << format_double(r.step_norm) << ','
       << (r.successful ? 1 : 0) << ',' << r.sub_iters << ',' << format_double(r.wall_ms) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell.push_back(c);
    }
  }
  out.push_back(cell);
  return out;
}

/// One numeric column of a CSV file with a header row.
inline std::vector<double> read_csv_column(std::istream& is, const std::string& column) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("empty CSV input");
  const auto header = split_csv_line(line);
  std::size_t col = header.size();
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) col = i;
  if (col == header.size()) throw std::runtime_error("CSV has no column '" + column + "'");
  std::vector<double> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (col >= cells.size()) throw std::runtime_error("short CSV row");
    out.push_back(parse_double(cells[col]));
  }
  return out;
}

inline std::vector<IterRecord> read_trace_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) throw std::runtime_error("not a trace CSV");
  std::vector<IterRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 10) throw std::runtime_error("malformed trace row");
    IterRecord r;
    r.k = std::stoi(c[0]);
    r.f = parse_double(c[1]);
    r.grad_norm = parse_double(c[2]);
    r.lambda = parse_double(c[3]);
    r.mu = parse_double(c[4]);
    r.rho = parse_double(c[5]);
    r.step_norm = parse_double(c[6]);
    r.successful = c[7] == "1";
    r.sub_iters = std::stoi(c[8]);
    r.wall_ms = parse_double(c[9]);
    out.push_back(r);
  }
  return out;
}

/// JSON numbers cannot be nan/inf; those go out as strings.
inline nlohmann::json json_number(double v) {
  if (std::isfinite(v)) return v;
  return format_double(v);
}

inline nlohmann::json summary_to_json(const RunSummary& s) {
  nlohmann::json j;
  j["status"] = to_string(s.status);
  j["iters"] = s.iters;
  j["succ_iters"] = s.successful_iters;
  j["final_f"] = json_number(s.final_f);
  j["final_grad"] = json_number(s.final_grad_norm);
  j["wall_ms"] = json_number(s.wall_ms);
  if (!s.message.empty()) j["message"] = s.message;
  std::vector<double> grads;
  for (const auto& r : s.trace) grads.push_back(r.grad_norm);
  grads.push_back(s.final_grad_norm);
  try {
    const OrderEstimate est = estimate_order(grads, 4);
    j["order_q"] = json_number(est.q);
    j["order_c"] = json_number(est.c);
  } catch (const InsufficientData&) {
  }
  return j;
}

// ---------------------------------------------------------------------------
// SVG

enum class XAxis { Iteration, WallMs };

/// Standalone single-polyline SVG.  The y axis is log10 unless some value is
/// nonpositive, in which case it falls back to linear and says so in the
/// picture.
inline std::string render_svg(const std::vector<double>& xs, const std::vector<double>& ys, const std::string& x_label,
                              const std::string& y_label) {
  if (xs.empty() || xs.size() != ys.size()) throw ContractViolation("render_svg: need matching non-empty series");
  bool log_scale = true;
  for (double y : ys)
    if (!(y > 0.0)) log_scale = false;
  std::vector<double> ty(ys.size());
  for (std::size_t i = 0; i < ys.size(); ++i) ty[i] = log_scale ? std::log10(ys[i]) : ys[i];

  const double W = 640, H = 400, L = 70, R = 20, T = 30, B = 50;
  double xmin = *std::min_element(xs.begin(), xs.end()), xmax = *std::max_element(xs.begin(), xs.end());
  double ymin = *std::min_element(ty.begin(), ty.end()), ymax = *std::max_element(ty.begin(), ty.end());
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) {
    ymax += 0.5;
    ymin -= 0.5;
  }
  auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - ymin) / (ymax - ymin) * (H - T - B); };
  auto num = [](double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(2) << v;
    return os.str();
  };

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
     << ' ' << H << "\">\n";
  os << "<rect x=\"0\" y=\"0\" width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << (W + L) / 2 << "\" y=\"" << H - 10 << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
  os << "<text x=\"15\" y=\"" << (H - B + T) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 15 "
     << (H - B + T) / 2 << ")\">" << (log_scale ? "log10 " : "") << y_label << "</text>\n";
  os << "<text x=\"" << L - 5 << "\" y=\"" << num(py(ymax)) << "\" text-anchor=\"end\">" << num(ymax) << "</text>\n";
  os << "<text x=\"" << L - 5 << "\" y=\"" << num(py(ymin)) << "\" text-anchor=\"end\">" << num(ymin) << "</text>\n";
  os << "<text x=\"" << L << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\">" << num(xmin) << "</text>\n";
  os << "<text x=\"" << W - R << "\" y=\"" << H - B + 15 << "\" text-anchor=\"middle\">" << num(xmax) << "</text>\n";
  if (!log_scale)
    os << "<text class=\"warning\" x=\"" << W - R << "\" y=\"" << T - 10
       << "\" text-anchor=\"end\" fill=\"red\">warning: nonpositive values, linear scale</text>\n";
  os << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"1.5\" points=\"";
  for (std::size_t i = 0; i < xs.size(); ++i) os << (i ? " " : "") << num(px(xs[i])) << ',' << num(py(ty[i]));
  os << "\"/>\n</svg>\n";
  return os.str();
}

/// Plot one trace column (f, grad_norm, lambda, mu, rho, step_norm).
inline std::string emit_svg(const std::vector<IterRecord>& trace, const std::string& y_column, XAxis x_axis = XAxis::Iteration) {
  if (trace.empty()) throw ContractViolation("emit_svg: empty trace");
  static const std::map<std::string, double IterRecord::*> columns = {
      {"f", &IterRecord::f},         {"grad_norm", &IterRecord::grad_norm}, {"lambda", &IterRecord::lambda},
      {"mu", &IterRecord::mu},       {"rho", &IterRecord::rho},             {"step_norm", &IterRecord::step_norm},
      {"wall_ms", &IterRecord::wall_ms}};
  const auto it = columns.find(y_column);
  if (it == columns.end()) throw ContractViolation("emit_svg: unknown column '" + y_column + "'");
  std::vector<double> xs, ys;
  for (const auto& r : trace) {
    xs.push_back(x_axis == XAxis::Iteration ? static_cast<double>(r.k) : r.wall_ms);
    ys.push_back(r.*(it->second));
  }
  return render_svg(xs, ys, x_axis == XAxis::Iteration ? "iteration" : "wall_ms", y_column);
}

inline void emit_svg(const std::vector<IterRecord>& trace, const std::string& y_column, const std::string& path,
                     XAxis x_axis = XAxis::Iteration) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path);
  os << emit_svg(trace, y_column, x_axis);
}

}  // namespace rlm

#endif  // RLM_IO_HPP_
