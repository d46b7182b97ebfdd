#pragma once

// CSV schemas, number formatting and the per-site ingestion summary.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "hpot/hierarchy.hpp"

namespace hpot::tools {

// Shortest text that parses back to the same double.
std::string fmt(double v);
double parse_double(std::string_view text, std::string_view what);
long long parse_int(std::string_view text, std::string_view what);

// Splits on commas; surrounding whitespace and a trailing '\r' are dropped.
std::vector<std::string> split_csv_line(std::string_view line);

inline constexpr double kMaxPet = 4.0;

struct IngestReport {
  std::size_t rows = 0;
  std::size_t accepted = 0;
  std::size_t rejected_nonpositive = 0;
  std::size_t rejected_above_max = 0;
  std::size_t rejected() const { return rejected_nonpositive + rejected_above_max; }
};

struct CrashRecord {
  std::string site_id;
  long long year = 0;
  long long count = 0;
};

// conflicts.csv: site_id,cycle_id,pet_s. Rows with pet <= 0 or pet > 4 are
// counted and skipped; malformed rows are InputErrors naming file and line.
std::vector<ConflictObservation> read_conflicts(std::istream& in, const std::string& source, IngestReport& report);
std::vector<ConflictObservation> read_conflicts(const std::filesystem::path& path, IngestReport& report);
void write_conflicts(std::ostream& out, std::span<const ConflictObservation> rows);

// cycles.csv: site_id,cycle_id,volume,shockwave_area,platoon_ratio.
std::vector<CycleRecord> read_cycles(std::istream& in, const std::string& source);
std::vector<CycleRecord> read_cycles(const std::filesystem::path& path);
void write_cycles(std::ostream& out, std::span<const CycleRecord> rows);

// crashes.csv: site_id,year,count.
std::vector<CrashRecord> read_crashes(std::istream& in, const std::string& source);
std::vector<CrashRecord> read_crashes(const std::filesystem::path& path);
void write_crashes(std::ostream& out, std::span<const CrashRecord> rows);

struct SiteSummary {
  std::string site;
  std::size_t cycles = 0;
  std::size_t conflicts = 0;
  double pet_min = 0.0;
  double pet_max = 0.0;
  double pet_mean = 0.0;
};

std::vector<SiteSummary> summarize_sites(const Dataset& data);
void write_site_summary(std::ostream& out, std::span<const SiteSummary> rows);

// Reads and validates both tables into a Dataset.
Dataset ingest(const std::filesystem::path& conflicts, const std::filesystem::path& cycles, IngestReport& report);

std::string read_text(const std::filesystem::path& path);
// Writes via a temporary file in the same directory, then renames.
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace hpot::tools
