#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "cfuq/harness.hpp"

namespace cfuq::harness {

std::string format_number(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return ec == std::errc{} ? std::string(buf.data(), end) : "nan";
}

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

double parse_double(std::string_view field, std::size_t line) {
  double v = 0;
  if (!field.empty() && field.front() == '+') field.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc{} || ptr != field.data() + field.size()) {
    throw SchemaError("not a number: '" + std::string(field) + "'", line);
  }
  return v;
}

}  // namespace

std::optional<std::size_t> CsvTable::index(const std::string& column) const {
  for (std::size_t i = 0; i < header.size(); ++i)
    if (header[i] == column) return i;
  return std::nullopt;
}

void CsvTable::require(std::span<const std::string> columns) const {
  std::string missing;
  for (const auto& c : columns) {
    if (!index(c)) missing += (missing.empty() ? "" : ", ") + c;
  }
  if (!missing.empty()) throw SchemaError("missing columns: " + missing, 1);
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const auto i = index(name);
  if (!i) throw SchemaError("missing columns: " + name, 1);
  std::vector<double> out(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) out[r] = rows[r][*i];
  return out;
}

CsvTable read_csv(std::istream& in) {
  CsvTable t;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (t.header.empty()) {
      for (auto f : fields) t.header.emplace_back(f);
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw SchemaError("expected " + std::to_string(t.header.size()) + " fields, got " +
                            std::to_string(fields.size()),
                        lineno);
    }
    std::vector<double> row(fields.size());
    for (std::size_t i = 0; i < fields.size(); ++i) row[i] = parse_double(fields[i], lineno);
    t.rows.push_back(std::move(row));
    t.lines.push_back(lineno);
  }
  if (t.header.empty()) throw SchemaError("empty file: no header row");
  return t;
}

CsvTable read_csv_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_csv(in);
}

Trajectory read_leader_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const std::array<std::string, 4> cols{"time", "position", "speed", "accel"};
  t.require(cols);
  if (t.rows.size() < 2) throw SchemaError("leader trajectory needs at least 2 samples");
  const std::size_t it = *t.index("time"), ix = *t.index("position"),
                    iv = *t.index("speed"), ia = *t.index("accel");
  Trajectory traj;
  traj.reserve(t.rows.size());
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    TrajectorySample<double> s{row[it], row[ix], row[iv], row[ia]};
    if (!std::isfinite(s.time) || !std::isfinite(s.position) || !std::isfinite(s.speed) ||
        !std::isfinite(s.accel))
      throw SchemaError("non-finite value", t.lines[r]);
    if (s.speed < 0) throw SchemaError("negative speed", t.lines[r]);
    traj.push_back(s);
  }
  const double dt0 = traj[1].time - traj[0].time;
  if (!(dt0 > 0)) throw SchemaError("time must be strictly increasing", t.lines[1]);
  for (std::size_t r = 1; r < traj.size(); ++r) {
    const double dt = traj[r].time - traj[r - 1].time;
    if (!(dt > 0)) throw SchemaError("time must be strictly increasing", t.lines[r]);
    if (std::abs(dt - dt0) > 1e-6 * dt0) throw SchemaError("non-uniform sampling", t.lines[r]);
  }
  return traj;
}

Trajectory load_leader(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  try {
    return read_leader_csv(in);
  } catch (const SchemaError& e) {
    throw SchemaError(path.string() + ": " + e.what());
  }
}

void write_leader_csv(std::ostream& os, std::span<const TrajectorySample<double>> traj) {
  os << "time,position,speed,accel\n";
  for (const auto& s : traj) {
    os << format_number(s.time) << ',' << format_number(s.position) << ','
       << format_number(s.speed) << ',' << format_number(s.accel) << '\n';
  }
}

void write_follower_csv(std::ostream& os, std::span<const FollowerSample> samples) {
  os << "time,position,speed,accel,jerk,demanded_accel\n";
  for (const auto& s : samples) {
    os << format_number(s.time) << ',' << format_number(s.position) << ','
       << format_number(s.speed) << ',' << format_number(s.accel) << ','
       << format_number(s.jerk) << ',' << format_number(s.demanded_accel) << '\n';
  }
}

std::vector<FollowerSample> read_follower_csv(std::istream& in) {
  const CsvTable t = read_csv(in);
  const std::array<std::string, 6> cols{"time", "position", "speed", "accel", "jerk",
                                        "demanded_accel"};
  t.require(cols);
  std::array<std::size_t, 6> idx{};
  for (std::size_t i = 0; i < cols.size(); ++i) idx[i] = *t.index(cols[i]);
  std::vector<FollowerSample> out;
  out.reserve(t.rows.size());
  for (const auto& row : t.rows) {
    out.push_back({row[idx[0]], row[idx[1]], row[idx[2]], row[idx[3]], row[idx[4]], row[idx[5]]});
  }
  return out;
}

}  // namespace cfuq::harness
