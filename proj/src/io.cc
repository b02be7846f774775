// Copyright 2026 The qtraj Authors
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


#include "qtraj/io.h"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <system_error>

#include "json.hpp"

static_assert(std::endian::native == std::endian::little, "file formats assume a little-endian host");

namespace qtraj {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  if (ec != std::errc()) throw std::runtime_error("format_double: conversion failed");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text == "inf" || text == "+inf") return kInfinity;
  if (text == "-inf") return -kInfinity;
  if (!text.empty() && text.front() == '+') text.remove_prefix(1);
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("not a number: '" + std::string(text) + "'");
  }
  return x;
}

namespace {

std::uint64_t parse_u64(std::string_view text) {
  std::uint64_t x = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), x);
  if (ec != std::errc() || ptr != text.data() + text.size() || text.empty()) {
    throw std::invalid_argument("not an unsigned integer: '" + std::string(text) + "'");
  }
  return x;
}

class Writer {
 public:
  explicit Writer(std::string_view magic) : out_(magic) {}
  template <typename T>
  void put(T v) {
    char b[sizeof(T)];
    std::memcpy(b, &v, sizeof(T));
    out_.append(b, sizeof(T));
  }
  void put_doubles(std::span<const double> v) {
    out_.append(reinterpret_cast<const char*>(v.data()), v.size_bytes());
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  Reader(std::string_view bytes, const std::string& name) : bytes_(bytes), name_(name) {}

  void expect_magic(std::string_view magic) {
    if (bytes_.substr(0, magic.size()) != magic) fail("bad magic, expected " + std::string(magic));
    pos_ = magic.size();
  }
  template <typename T>
  T get(const char* what) {
    if (bytes_.size() - pos_ < sizeof(T)) fail(std::string("truncated while reading ") + what);
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  void get_doubles(std::vector<double>& out, std::uint64_t n) {
    const std::uint64_t remaining = bytes_.size() - pos_;
    if (n > remaining / sizeof(double)) {
      fail("payload truncated: need " + std::to_string(n) + " values, have " +
           std::to_string(remaining / sizeof(double)));
    }
    out.resize(n);
    std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
    pos_ += n * sizeof(double);
  }
  void expect_end() {
    if (pos_ != bytes_.size()) fail(std::to_string(bytes_.size() - pos_) + " trailing bytes");
  }
  [[noreturn]] void fail(const std::string& msg) const {
    throw FormatError(name_ + ": byte offset " + std::to_string(pos_) + ": " + msg);
  }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view bytes_;
  std::string name_;
  std::size_t pos_ = 0;
};

std::uint64_t checked_product(std::uint64_t a, std::uint64_t b, const Reader& r) {
  if (a != 0 && b > std::numeric_limits<std::uint64_t>::max() / a / sizeof(double)) {
    r.fail("dimensions overflow");
  }
  return a * b;
}

// Splits text into lines, remembering 1-based line numbers.
struct Line {
  std::size_t number;
  std::string_view text;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t number = 1;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({number++, line});
    if (nl == std::string_view::npos) break;
    text.remove_prefix(nl + 1);
  }
  return lines;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> parts;
  while (true) {
    const auto p = s.find(sep);
    parts.push_back(s.substr(0, p));
    if (p == std::string_view::npos) break;
    s.remove_prefix(p + 1);
  }
  return parts;
}

[[noreturn]] void line_fail(const std::string& name, std::size_t line, const std::string& msg) {
  throw FormatError(name + ": line " + std::to_string(line) + ": " + msg);
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, std::string_view bytes) {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::filesystem::remove(tmp);
      throw std::runtime_error("write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------- records

std::string encode_records(const RecordSet& records) {
  records.validate();
  Writer w("QTRJREC1");
  w.put<std::uint32_t>(kRecordVersion);
  w.put<std::uint64_t>(records.n_traj);
  w.put<std::uint64_t>(records.n_steps);
  w.put<double>(records.cal.dt);
  w.put<double>(records.cal.I0);
  w.put<double>(records.cal.I1);
  w.put<double>(records.cal.sigma);
  w.put<double>(records.cal.T1);
  w.put<double>(records.x0);
  w.put<std::uint64_t>(records.master_seed);
  w.put_doubles(records.currents);
  return w.take();
}

std::string encode_records_text(const RecordSet& records) {
  records.validate();
  std::string out = "# n_traj=" + std::to_string(records.n_traj) + " n_steps=" + std::to_string(records.n_steps) +
                    " dt_us=" + format_double(records.cal.dt) + " I0=" + format_double(records.cal.I0) +
                    " I1=" + format_double(records.cal.I1) + " sigma=" + format_double(records.cal.sigma) +
                    " T1_us=" + format_double(records.cal.T1) + " x0=" + format_double(records.x0) +
                    " master_seed=" + std::to_string(records.master_seed) + "\n";
  for (std::uint64_t i = 0; i < records.n_traj; ++i) {
    const auto row = records.record(i);
    for (std::size_t k = 0; k < row.size(); ++k) {
      if (k) out += ',';
      out += format_double(row[k]);
    }
    out += '\n';
  }
  return out;
}

namespace {

RecordSet decode_records_text(std::string_view text, const std::string& name) {
  const auto lines = split_lines(text);
  if (lines.empty() || lines[0].text.substr(0, 1) != "#") line_fail(name, 1, "missing '#' header line");
  std::map<std::string, std::string, std::less<>> header;
  for (auto tok : split(lines[0].text.substr(1), ' ')) {
    if (tok.empty()) continue;
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) line_fail(name, 1, "header token without '=': " + std::string(tok));
    header[std::string(tok.substr(0, eq))] = std::string(tok.substr(eq + 1));
  }
  RecordSet r;
  auto need = [&](const char* key) -> const std::string& {
    auto it = header.find(key);
    if (it == header.end()) line_fail(name, 1, std::string("header lacks ") + key);
    return it->second;
  };
  try {
    r.n_traj = parse_u64(need("n_traj"));
    r.n_steps = parse_u64(need("n_steps"));
    r.cal.dt = parse_double(need("dt_us"));
    r.cal.I0 = parse_double(need("I0"));
    r.cal.I1 = parse_double(need("I1"));
    r.cal.sigma = parse_double(need("sigma"));
    r.cal.T1 = parse_double(need("T1_us"));
    r.x0 = parse_double(need("x0"));
    r.master_seed = parse_u64(need("master_seed"));
  } catch (const std::invalid_argument& e) {
    line_fail(name, 1, e.what());
  }
  std::size_t row = 0;
  r.currents.reserve(r.n_traj * r.n_steps);
  for (std::size_t li = 1; li < lines.size(); ++li) {
    const auto& line = lines[li];
    if (line.text.empty()) continue;
    if (row >= r.n_traj) line_fail(name, line.number, "more rows than n_traj");
    const auto fields = split(line.text, ',');
    if (fields.size() != r.n_steps) {
      line_fail(name, line.number,
                "expected " + std::to_string(r.n_steps) + " values, found " + std::to_string(fields.size()));
    }
    for (auto f : fields) {
      try {
        r.currents.push_back(parse_double(f));
      } catch (const std::invalid_argument& e) {
        line_fail(name, line.number, e.what());
      }
    }
    ++row;
  }
  if (row != r.n_traj) {
    line_fail(name, lines.back().number, "expected " + std::to_string(r.n_traj) + " rows, found " +
                                             std::to_string(row));
  }
  try {
    r.validate();
  } catch (const std::exception& e) {
    throw FormatError(name + ": " + e.what());
  }
  return r;
}

}  // namespace

RecordSet decode_records(std::string_view bytes, const std::string& name) {
  if (bytes.substr(0, 1) == "#") return decode_records_text(bytes, name);
  Reader in(bytes, name);
  in.expect_magic("QTRJREC1");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kRecordVersion) in.fail("unsupported version " + std::to_string(version));
  RecordSet r;
  r.n_traj = in.get<std::uint64_t>("n_traj");
  r.n_steps = in.get<std::uint64_t>("n_steps");
  r.cal.dt = in.get<double>("dt_us");
  r.cal.I0 = in.get<double>("I0");
  r.cal.I1 = in.get<double>("I1");
  r.cal.sigma = in.get<double>("sigma");
  r.cal.T1 = in.get<double>("T1_us");
  r.x0 = in.get<double>("x0");
  r.master_seed = in.get<std::uint64_t>("master_seed");
  const auto header_end = in.pos();
  in.get_doubles(r.currents, checked_product(r.n_traj, r.n_steps, in));
  in.expect_end();
  try {
    r.validate();
  } catch (const std::exception& e) {
    throw FormatError(name + ": byte offset " + std::to_string(header_end) + ": " + e.what());
  }
  return r;
}

void write_records(const std::filesystem::path& path, const RecordSet& records, bool text) {
  write_file_atomic(path, text ? encode_records_text(records) : encode_records(records));
}

RecordSet read_records(const std::filesystem::path& path) { return decode_records(read_file(path), path.string()); }

// ---------------------------------------------------------------- ensembles

std::string encode_ensemble(const EnsembleFile& file) {
  const auto& e = file.ensemble;
  if (e.values.size() != e.n_traj * e.n_slices()) throw std::invalid_argument("encode_ensemble: size mismatch");
  Writer w("QTRJENS1");
  w.put<std::uint32_t>(kEnsembleVersion);
  w.put<std::uint64_t>(e.n_traj);
  w.put<std::uint64_t>(e.n_steps);
  w.put<double>(e.dt);
  w.put<std::uint64_t>(file.master_seed);
  w.put_doubles(e.values);
  return w.take();
}

EnsembleFile decode_ensemble(std::string_view bytes, const std::string& name) {
  Reader in(bytes, name);
  in.expect_magic("QTRJENS1");
  const auto version = in.get<std::uint32_t>("version");
  if (version != kEnsembleVersion) in.fail("unsupported version " + std::to_string(version));
  EnsembleFile f;
  auto& e = f.ensemble;
  e.n_traj = in.get<std::uint64_t>("n_traj");
  e.n_steps = in.get<std::uint64_t>("n_steps");
  e.dt = in.get<double>("dt_us");
  f.master_seed = in.get<std::uint64_t>("master_seed");
  if (e.n_steps == std::numeric_limits<std::uint64_t>::max()) in.fail("n_steps out of range");
  if (!(e.dt > 0.0) || !std::isfinite(e.dt)) in.fail("dt_us must be positive and finite");
  const auto start = in.pos();
  in.get_doubles(e.values, checked_product(e.n_traj, e.n_steps + 1, in));
  in.expect_end();
  for (std::size_t i = 0; i < e.values.size(); ++i) {
    const double v = e.values[i];
    if (!(v >= 0.0 && v <= 1.0)) {
      throw FormatError(name + ": byte offset " + std::to_string(start + i * sizeof(double)) +
                        ": value outside [0,1]");
    }
  }
  return f;
}

void write_ensemble(const std::filesystem::path& path, const EnsembleFile& file) {
  write_file_atomic(path, encode_ensemble(file));
}

EnsembleFile read_ensemble(const std::filesystem::path& path) {
  return decode_ensemble(read_file(path), path.string());
}

// ---------------------------------------------------------------- histograms

std::string encode_snapshot(const DistributionSnapshot& s) {
  s.validate();
  std::string out;
  out += "# t_us=" + format_double(s.t) + "\n";
  out += "# mass0=" + format_double(s.mass0) + "\n";
  out += "# mass1=" + format_double(s.mass1) + "\n";
  out += "# mass0_error=" + format_double(s.mass0_error) + "\n";
  out += "# mass1_error=" + format_double(s.mass1_error) + "\n";
  out += "# bin_width=" + format_double(s.bin_width) + "\n";
  for (std::size_t k = 0; k < s.n_bins; ++k) {
    out += format_double(s.bin_center(k)) + "," + format_double(s.density[k]) + "," + format_double(s.errors[k]) +
           "\n";
  }
  return out;
}

DistributionSnapshot decode_snapshot(std::string_view text, const std::string& name) {
  std::map<std::string, double, std::less<>> header;
  std::vector<double> density, errors;
  std::vector<std::size_t> row_lines;
  for (const auto& line : split_lines(text)) {
    if (line.text.empty()) continue;
    if (line.text.front() == '#') {
      auto body = line.text.substr(1);
      while (!body.empty() && body.front() == ' ') body.remove_prefix(1);
      const auto eq = body.find('=');
      if (eq == std::string_view::npos) line_fail(name, line.number, "header line without '='");
      try {
        header[std::string(body.substr(0, eq))] = parse_double(body.substr(eq + 1));
      } catch (const std::invalid_argument& e) {
        line_fail(name, line.number, e.what());
      }
      continue;
    }
    const auto fields = split(line.text, ',');
    if (fields.size() != 3) line_fail(name, line.number, "expected bin_center,density,error");
    try {
      parse_double(fields[0]);
      density.push_back(parse_double(fields[1]));
      errors.push_back(parse_double(fields[2]));
    } catch (const std::invalid_argument& e) {
      line_fail(name, line.number, e.what());
    }
    row_lines.push_back(line.number);
  }
  for (const char* key : {"t_us", "mass0", "mass1"}) {
    if (!header.count(key)) throw FormatError(name + ": missing '# " + key + "=' header");
  }
  if (density.empty()) throw FormatError(name + ": no histogram rows");
  DistributionSnapshot s;
  s.n_bins = density.size();
  s.bin_width = header.count("bin_width") ? header["bin_width"] : 1.0 / static_cast<double>(s.n_bins);
  s.density = std::move(density);
  s.errors = std::move(errors);
  s.t = header["t_us"];
  s.mass0 = header["mass0"];
  s.mass1 = header["mass1"];
  s.mass0_error = header.count("mass0_error") ? header["mass0_error"] : 0.0;
  s.mass1_error = header.count("mass1_error") ? header["mass1_error"] : 0.0;
  for (std::size_t k = 0; k < s.n_bins; ++k) {
    if (!(s.density[k] >= 0.0) || !(s.errors[k] >= 0.0)) {
      line_fail(name, row_lines[k], "density and error must be >= 0");
    }
  }
  try {
    s.validate();
  } catch (const std::exception& e) {
    throw FormatError(name + ": " + e.what());
  }
  return s;
}

void write_snapshot(const std::filesystem::path& path, const DistributionSnapshot& snapshot) {
  write_file_atomic(path, encode_snapshot(snapshot));
}

DistributionSnapshot read_snapshot(const std::filesystem::path& path) {
  return decode_snapshot(read_file(path), path.string());
}

// ---------------------------------------------------------------- fit reports

std::string encode_fit_report(std::span<const FitResult> results) {
  nlohmann::ordered_json slices = nlohmann::ordered_json::array();
  for (const auto& r : results) {
    nlohmann::ordered_json s;
    s["t_us"] = r.t;
    s["tau_best"] = r.tau_best;
    s["chi2_min"] = r.chi2_min;
    s["tau_err_dchi2_100"] = r.tau_error;
    s["tau_err_dchi2_1"] = r.tau_error_dchi2_1;
    s["n_bins"] = r.n_bins;
    s["minimum_at_edge"] = r.minimum_at_edge;
    s["error_open_ended"] = r.error_open_ended;
    slices.push_back(std::move(s));
  }
  nlohmann::ordered_json root;
  root["slices"] = std::move(slices);
  return root.dump(2) + "\n";
}

std::vector<FitResult> decode_fit_report(std::string_view text, const std::string& name) {
  nlohmann::json root;
  try {
    root = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(name + ": byte offset " + std::to_string(e.byte) + ": " + e.what());
  }
  std::vector<FitResult> out;
  try {
    for (const auto& s : root.at("slices")) {
      FitResult r;
      r.t = s.at("t_us").get<double>();
      r.tau_best = s.at("tau_best").get<double>();
      r.chi2_min = s.at("chi2_min").get<double>();
      r.tau_error = s.at("tau_err_dchi2_100").get<double>();
      r.tau_error_dchi2_1 = s.at("tau_err_dchi2_1").get<double>();
      r.n_bins = s.at("n_bins").get<std::size_t>();
      r.minimum_at_edge = s.value("minimum_at_edge", false);
      r.error_open_ended = s.value("error_open_ended", false);
      out.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(name + ": " + e.what());
  }
  return out;
}

}  // namespace qtraj
