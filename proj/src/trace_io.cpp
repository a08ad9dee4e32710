#include <limits>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "hierfl/errors.hpp"
#include "hierfl/hierfavg.hpp"

namespace hierfl {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

void write_trace_csv(std::ostream& out, const RunTrace& trace) {
  out << kTraceHeader << '\n';
  for (const auto& r : trace.records) {
    out << r.k << ',' << to_string(r.event) << ',' << format_double(r.global_loss) << ','
        << format_double(r.test_accuracy) << ',' << format_double(r.deviation) << ','
        << format_double(r.grad_norm_sq) << ',' << format_double(r.eta) << '\n';
  }
}

namespace {

double parse_double(const std::string& field, std::size_t line) {
  if (field == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (field == "inf") return std::numeric_limits<double>::infinity();
  if (field == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(field.data(), field.data() + field.size(), v);
  if (res.ec != std::errc() || res.ptr != field.data() + field.size()) {
    throw FormatError("trace line " + std::to_string(line) + ": bad number '" + field + "'");
  }
  return v;
}

}  // namespace

std::vector<TraceRecord> read_trace_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTraceHeader) {
    throw FormatError("trace: missing or unexpected header (want '" + std::string(kTraceHeader) + "')");
  }
  std::vector<TraceRecord> out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (fields.size() != 7) {
      throw FormatError("trace line " + std::to_string(lineno) + ": expected 7 columns, got " +
                        std::to_string(fields.size()));
    }
    TraceRecord r;
    long k = 0;
    const auto res = std::from_chars(fields[0].data(), fields[0].data() + fields[0].size(), k);
    if (res.ec != std::errc() || res.ptr != fields[0].data() + fields[0].size()) {
      throw FormatError("trace line " + std::to_string(lineno) + ": bad k '" + fields[0] + "'");
    }
    r.k = k;
    r.event = parse_trace_event(fields[1]);
    r.global_loss = parse_double(fields[2], lineno);
    r.test_accuracy = parse_double(fields[3], lineno);
    r.deviation = parse_double(fields[4], lineno);
    r.grad_norm_sq = parse_double(fields[5], lineno);
    r.eta = parse_double(fields[6], lineno);
    if (!out.empty() && r.k <= out.back().k) {
      throw FormatError("trace line " + std::to_string(lineno) + ": k is not increasing");
    }
    out.push_back(r);
  }
  return out;
}

}  // namespace hierfl
