#pragma once

// Artifact plumbing shared by the pipelines: RFC-4180 CSV with fixed
// 17-significant-digit floats, SHA-256 file hashes and the staircase SVG.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sltrl {

// "%.17g"; round-trips every finite double. Non-finite values print as
// "nan", "inf", "-inf".
std::string format_double(double x);
double parse_double(const std::string& s);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Column index by name; throws IoError when absent.
  std::size_t column(const std::string& name) const;
};

// Quotes a field when it contains a comma, quote, CR or LF.
std::string csv_escape(const std::string& field);
// LF line endings, header first.
std::string to_csv(const CsvTable& table);
// Throws IoError on malformed input (unterminated quote, ragged rows).
CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

std::string read_text(const std::filesystem::path& path);

// Lower-case hex SHA-256.
std::string sha256_hex(const std::string& data);
std::string sha256_file(const std::filesystem::path& path);

struct StaircasePoint {
  std::int64_t checkpoint = 0;
  double regret = 0.0;
  std::optional<double> llc;
  std::string phase;
};

struct PhaseBand {
  std::string label;  // "P1", "P2", "P3"
  std::int64_t first_step = 0;
  std::int64_t last_step = 0;
};

// Dual-axis chart on a log-x axis (checkpoint + 1): regret on the left axis,
// LLC estimates on the right, phase bands shaded. Each band is a <rect> with
// data-phase, data-first-step and data-last-step attributes.
std::string staircase_svg(const std::vector<StaircasePoint>& points,
                          const std::vector<PhaseBand>& bands);

// Reads the band attributes back out of a chart produced above.
std::vector<PhaseBand> parse_svg_bands(const std::string& svg);

}  // namespace sltrl
