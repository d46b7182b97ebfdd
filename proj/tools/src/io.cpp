#include "hpot/tools/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "hpot/errors.hpp"

namespace hpot::tools {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line);
}

// Reads the header and checks it against the expected column list.
void expect_header(std::istream& in, const std::string& source, const std::vector<std::string>& columns) {
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty file, expected header");
  const auto got = split_csv_line(line);
  if (got != columns) {
    std::string want;
    for (const auto& c : columns) want += (want.empty() ? "" : ",") + c;
    throw InputError(source + ": header must be '" + want + "'");
  }
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path.string() + "'");
  return in;
}

template <class Fn>
void for_each_row(std::istream& in, const std::string& source, std::size_t columns, Fn&& fn) {
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != columns)
      throw InputError(where(source, lineno) + ": expected " + std::to_string(columns) + " fields, got " +
                       std::to_string(fields.size()));
    fn(fields, where(source, lineno));
  }
}

}  // namespace

std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text, std::string_view what) {
  text = trim(text);
  if (text == "nan" || text == "NaN") return std::nan("");
  if (text == "inf") return INFINITY;
  if (text == "-inf") return -INFINITY;
  double v = 0.0;
  const char* first = text.data();
  if (!text.empty() && text.front() == '+') ++first;
  const auto res = std::from_chars(first, text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw InputError(std::string(what) + ": '" + std::string(text) + "' is not a number");
  return v;
}

long long parse_int(std::string_view text, std::string_view what) {
  text = trim(text);
  long long v = 0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size() || text.empty())
    throw InputError(std::string(what) + ": '" + std::string(text) + "' is not an integer");
  return v;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.emplace_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ConflictObservation> read_conflicts(std::istream& in, const std::string& source, IngestReport& report) {
  expect_header(in, source, {"site_id", "cycle_id", "pet_s"});
  std::vector<ConflictObservation> out;
  for_each_row(in, source, 3, [&](const std::vector<std::string>& f, const std::string& at) {
    ++report.rows;
    if (f[0].empty() || f[1].empty()) throw InputError(at + ": empty site_id or cycle_id");
    const double pet = parse_double(f[2], at + ": pet_s");
    if (!std::isfinite(pet)) throw InputError(at + ": pet_s must be finite");
    if (pet <= 0.0) {
      ++report.rejected_nonpositive;
      return;
    }
    if (pet > kMaxPet) {
      ++report.rejected_above_max;
      return;
    }
    ++report.accepted;
    out.push_back({f[0], f[1], pet});
  });
  return out;
}

std::vector<ConflictObservation> read_conflicts(const std::filesystem::path& path, IngestReport& report) {
  auto in = open_or_throw(path);
  return read_conflicts(in, path.string(), report);
}

void write_conflicts(std::ostream& out, std::span<const ConflictObservation> rows) {
  out << "site_id,cycle_id,pet_s\n";
  for (const auto& r : rows) out << r.site_id << ',' << r.cycle_id << ',' << fmt(r.pet) << '\n';
}

std::vector<CycleRecord> read_cycles(std::istream& in, const std::string& source) {
  expect_header(in, source, {"site_id", "cycle_id", "volume", "shockwave_area", "platoon_ratio"});
  std::vector<CycleRecord> out;
  for_each_row(in, source, 5, [&](const std::vector<std::string>& f, const std::string& at) {
    if (f[0].empty() || f[1].empty()) throw InputError(at + ": empty site_id or cycle_id");
    CycleRecord c;
    c.site_id = f[0];
    c.cycle_id = f[1];
    c.volume = parse_double(f[2], at + ": volume");
    c.shockwave_area = parse_double(f[3], at + ": shockwave_area");
    c.platoon_ratio = parse_double(f[4], at + ": platoon_ratio");
    if (!std::isfinite(c.volume) || !std::isfinite(c.shockwave_area) || !std::isfinite(c.platoon_ratio))
      throw InputError(at + ": covariates must be finite");
    out.push_back(std::move(c));
  });
  return out;
}

std::vector<CycleRecord> read_cycles(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_cycles(in, path.string());
}

void write_cycles(std::ostream& out, std::span<const CycleRecord> rows) {
  out << "site_id,cycle_id,volume,shockwave_area,platoon_ratio\n";
  for (const auto& r : rows)
    out << r.site_id << ',' << r.cycle_id << ',' << fmt(r.volume) << ',' << fmt(r.shockwave_area) << ','
        << fmt(r.platoon_ratio) << '\n';
}

std::vector<CrashRecord> read_crashes(std::istream& in, const std::string& source) {
  expect_header(in, source, {"site_id", "year", "count"});
  std::vector<CrashRecord> out;
  for_each_row(in, source, 3, [&](const std::vector<std::string>& f, const std::string& at) {
    CrashRecord r{f[0], parse_int(f[1], at + ": year"), parse_int(f[2], at + ": count")};
    if (r.count < 0) throw InputError(at + ": negative crash count");
    for (const auto& prev : out)
      if (prev.site_id == r.site_id && prev.year == r.year)
        throw InputError(at + ": duplicate (site_id, year) = (" + r.site_id + ", " + f[1] + ")");
    out.push_back(std::move(r));
  });
  return out;
}

std::vector<CrashRecord> read_crashes(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  return read_crashes(in, path.string());
}

void write_crashes(std::ostream& out, std::span<const CrashRecord> rows) {
  out << "site_id,year,count\n";
  for (const auto& r : rows) out << r.site_id << ',' << r.year << ',' << r.count << '\n';
}

// ---------------------------------------------------------------------------

std::vector<SiteSummary> summarize_sites(const Dataset& data) {
  std::vector<SiteSummary> out;
  for (std::size_t s = 0; s < data.sites.size(); ++s) {
    SiteSummary r;
    r.site = data.sites[s];
    r.cycles = data.site_cycles[s].size();
    const auto vals = data.site_values(s);
    r.conflicts = vals.size();
    if (!vals.empty()) {
      // Stored values are negated PET.
      r.pet_min = -*std::max_element(vals.begin(), vals.end());
      r.pet_max = -*std::min_element(vals.begin(), vals.end());
      double sum = 0.0;
      for (double v : vals) sum -= v;
      r.pet_mean = sum / static_cast<double>(vals.size());
    } else {
      r.pet_min = r.pet_max = r.pet_mean = std::nan("");
    }
    out.push_back(r);
  }
  return out;
}

void write_site_summary(std::ostream& out, std::span<const SiteSummary> rows) {
  out << "site_id,n_cycles,n_conflicts,pet_min,pet_max,pet_mean\n";
  for (const auto& r : rows)
    out << r.site << ',' << r.cycles << ',' << r.conflicts << ',' << fmt(r.pet_min) << ',' << fmt(r.pet_max) << ','
        << fmt(r.pet_mean) << '\n';
}

Dataset ingest(const std::filesystem::path& conflicts, const std::filesystem::path& cycles, IngestReport& report) {
  auto cyc = read_cycles(cycles);
  const auto obs = read_conflicts(conflicts, report);
  return Dataset::build(std::move(cyc), obs);
}

std::string read_text(const std::filesystem::path& path) {
  auto in = open_or_throw(path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw InputError("cannot write '" + path.string() + "'");
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw InputError("write failed for '" + path.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace hpot::tools
