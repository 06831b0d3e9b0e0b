#include "greybox/trace.h"

#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace greybox {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

std::string join(const Vector& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ';';
    out += format_double(v(i));
  }
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw std::runtime_error("trace: cannot parse number '" + s + "'");
  return v;
}

Vector split(const std::string& s) {
  std::vector<double> values;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto end = s.find(';', start);
    const std::string part = s.substr(start, end == std::string::npos ? std::string::npos : end - start);
    if (!part.empty()) values.push_back(parse_double(part));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return Eigen::Map<Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
}

}  // namespace

std::string trace_header() {
  return "replication,iteration,x,tag,y,best_so_far,regret,cumulative_cost,acquisition";
}

std::string format_trace_row(const TraceRow& row) {
  std::string out = std::to_string(row.replication) + "," + std::to_string(row.iteration) + "," + join(row.x) + ",";
  if (row.tag) out += std::to_string(*row.tag);
  out += "," + join(row.y) + "," + format_double(row.best_so_far) + "," + format_double(row.regret) + "," +
         format_double(row.cumulative_cost) + ",";
  if (row.acquisition) out += format_double(*row.acquisition);
  return out;
}

void write_trace_csv(const std::string& path, const std::vector<TraceRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write trace file '" + path + "'");
  out << trace_header() << "\n";
  for (const TraceRow& r : rows) out << format_trace_row(r) << "\n";
  if (!out) throw std::runtime_error("error writing trace file '" + path + "'");
}

std::vector<TraceRow> read_trace_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open trace file '" + path + "'");
  std::string line;
  std::getline(in, line);
  if (line != trace_header()) throw std::runtime_error("unexpected trace header in '" + path + "'");
  std::vector<TraceRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (!line.empty() && line.back() == ',') f.emplace_back();
    if (f.size() != 9) throw std::runtime_error("malformed trace row in '" + path + "'");
    TraceRow r;
    r.replication = std::stoi(f[0]);
    r.iteration = std::stoi(f[1]);
    r.x = split(f[2]);
    if (!f[3].empty()) r.tag = std::stoi(f[3]);
    r.y = split(f[4]);
    r.best_so_far = parse_double(f[5]);
    r.regret = parse_double(f[6]);
    r.cumulative_cost = parse_double(f[7]);
    if (!f[8].empty()) r.acquisition = parse_double(f[8]);
    rows.push_back(std::move(r));
  }
  return rows;
}

}  // namespace greybox
