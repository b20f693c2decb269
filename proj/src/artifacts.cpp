#include "sltrl/artifacts.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <regex>
#include <sstream>

#include "sltrl/errors.hpp"

namespace sltrl {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 40> buf{};
  std::snprintf(buf.data(), buf.size(), "%.17g", x);
  return buf.data();
}

double parse_double(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  // from_chars keeps subnormals that stod rejects as out of range
  double v = 0.0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || end != s.data() + s.size()) {
    throw IoError("not a number: '" + s + "'");
  }
  return v;
}

std::size_t CsvTable::column(const std::string& name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw IoError("csv column '" + name + "' missing");
  return static_cast<std::size_t>(it - header.begin());
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

namespace {
void append_row(std::string& out, const std::vector<std::string>& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) out += ',';
    out += csv_escape(row[i]);
  }
  out += '\n';
}
}  // namespace

std::string to_csv(const CsvTable& table) {
  std::string out;
  append_row(out, table.header);
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size()) throw IoError("csv row width differs from header");
    append_row(out, row);
  }
  return out;
}

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::vector<std::string> record;
  std::string field;
  bool quoted = false, in_quotes = false, any = false;
  std::size_t i = 0;
  auto end_field = [&] {
    record.push_back(field);
    field.clear();
    quoted = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
    any = false;
  };
  while (i < text.size()) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      ++i;
      continue;
    }
    any = true;
    if (c == '"') {
      if (!field.empty() || quoted) throw IoError("csv: stray quote");
      in_quotes = quoted = true;
    } else if (c == ',') {
      end_field();
    } else if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') {
      end_record();
      ++i;
    } else if (c == '\n') {
      end_record();
    } else {
      if (quoted) throw IoError("csv: text after closing quote");
      field += c;
    }
    ++i;
  }
  if (in_quotes) throw IoError("csv: unterminated quoted field");
  if (any) end_record();
  if (records.empty()) throw IoError("csv: no header");
  CsvTable t;
  t.header = std::move(records.front());
  for (std::size_t r = 1; r < records.size(); ++r) {
    if (records[r].size() != t.header.size()) {
      throw IoError("csv: row " + std::to_string(r) + " has " + std::to_string(records[r].size()) +
                    " fields, expected " + std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(records[r]));
  }
  return t;
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CsvTable read_csv(const std::filesystem::path& path) {
  try {
    return parse_csv(read_text(path));
  } catch (const IoError& e) {
    throw IoError(path.string() + ": " + e.what());
  }
}

std::string sha256_hex(const std::string& data) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), data.data(), data.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), md.data(), &len) != 1) {
    throw IoError("sha256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int k = 0; k < len; ++k) {
    out += kHex[md[k] >> 4];
    out += kHex[md[k] & 0xF];
  }
  return out;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_text(path)); }

namespace {

constexpr double kW = 900, kH = 480, kLeft = 70, kRight = 70, kTop = 40, kBottom = 50;

std::string fmt(double x) {
  std::array<char, 32> buf{};
  std::snprintf(buf.data(), buf.size(), "%.2f", x);
  return buf.data();
}

std::string band_color(const std::string& label) {
  if (label == "P1") return "#f4d35e";
  if (label == "P2") return "#8ecae6";
  if (label == "P3") return "#90be6d";
  return "#dddddd";
}

}  // namespace

std::string staircase_svg(const std::vector<StaircasePoint>& points,
                          const std::vector<PhaseBand>& bands) {
  if (points.empty()) throw IoError("staircase_svg: no metrics");
  const double pw = kW - kLeft - kRight, ph = kH - kTop - kBottom;
  const double xmax = std::log10(static_cast<double>(points.back().checkpoint) + 1.0);
  const double span = std::max(xmax, 1e-9);
  auto X = [&](std::int64_t step) {
    return kLeft + pw * std::log10(static_cast<double>(step) + 1.0) / span;
  };
  double rmax = 0.0;
  for (const auto& p : points) rmax = std::max(rmax, p.regret);
  rmax = rmax > 0.0 ? rmax * 1.05 : 1.0;
  double lmin = 0.0, lmax = 0.0;
  bool have_llc = false;
  for (const auto& p : points) {
    if (!p.llc) continue;
    have_llc = true;
    lmin = std::min(lmin, *p.llc);
    lmax = std::max(lmax, *p.llc);
  }
  if (lmax <= lmin) lmax = lmin + 1.0;
  lmax += 0.05 * (lmax - lmin);
  auto YR = [&](double r) { return kTop + ph * (1.0 - r / rmax); };
  auto YL = [&](double l) { return kTop + ph * (1.0 - (l - lmin) / (lmax - lmin)); };

  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kW << "\" height=\"" << kH
    << "\" viewBox=\"0 0 " << kW << ' ' << kH << "\">\n";
  s << "<rect x=\"0\" y=\"0\" width=\"" << kW << "\" height=\"" << kH << "\" fill=\"white\"/>\n";
  for (const auto& b : bands) {
    const double x0 = X(b.first_step), x1 = std::max(X(b.last_step), x0 + 1.0);
    s << "<rect class=\"phase-band\" data-phase=\"" << b.label << "\" data-first-step=\""
      << b.first_step << "\" data-last-step=\"" << b.last_step << "\" x=\"" << fmt(x0)
      << "\" y=\"" << kTop << "\" width=\"" << fmt(x1 - x0) << "\" height=\"" << ph
      << "\" fill=\"" << band_color(b.label) << "\" fill-opacity=\"0.35\"/>\n";
    s << "<text x=\"" << fmt(x0 + 3) << "\" y=\"" << kTop + 14 << "\" font-size=\"11\">" << b.label
      << "</text>\n";
  }
  s << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << pw << "\" height=\"" << ph
    << "\" fill=\"none\" stroke=\"black\"/>\n";

  // x ticks at powers of ten of (checkpoint + 1)
  for (int e = 0; e <= static_cast<int>(std::floor(xmax)); ++e) {
    const double x = kLeft + pw * e / span;
    s << "<line x1=\"" << fmt(x) << "\" y1=\"" << kTop + ph << "\" x2=\"" << fmt(x) << "\" y2=\""
      << kTop + ph + 5 << "\" stroke=\"black\"/>";
    s << "<text x=\"" << fmt(x) << "\" y=\"" << kTop + ph + 18
      << "\" font-size=\"11\" text-anchor=\"middle\">1e" << e << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double r = rmax * k / 4.0, y = YR(r);
    s << "<text x=\"" << kLeft - 6 << "\" y=\"" << fmt(y + 4)
      << "\" font-size=\"11\" text-anchor=\"end\" fill=\"#c1121f\">" << fmt(r) << "</text>\n";
    if (have_llc) {
      const double l = lmin + (lmax - lmin) * k / 4.0;
      s << "<text x=\"" << kLeft + pw + 6 << "\" y=\"" << fmt(YL(l) + 4)
        << "\" font-size=\"11\" fill=\"#003049\">" << fmt(l) << "</text>\n";
    }
  }
  s << "<text x=\"" << kLeft + pw / 2 << "\" y=\"" << kH - 10
    << "\" font-size=\"12\" text-anchor=\"middle\">checkpoint (log scale)</text>\n";
  s << "<text x=\"14\" y=\"" << kTop + ph / 2 << "\" font-size=\"12\" fill=\"#c1121f\" "
    << "transform=\"rotate(-90 14 " << kTop + ph / 2 << ")\" text-anchor=\"middle\">regret</text>\n";
  if (have_llc) {
    s << "<text x=\"" << kW - 14 << "\" y=\"" << kTop + ph / 2
      << "\" font-size=\"12\" fill=\"#003049\" transform=\"rotate(90 " << kW - 14 << ' '
      << kTop + ph / 2 << ")\" text-anchor=\"middle\">LLC estimate</text>\n";
  }

  s << "<polyline class=\"regret\" fill=\"none\" stroke=\"#c1121f\" stroke-width=\"1.5\" points=\"";
  for (const auto& p : points) s << fmt(X(p.checkpoint)) << ',' << fmt(YR(p.regret)) << ' ';
  s << "\"/>\n";
  if (have_llc) {
    s << "<polyline class=\"llc\" fill=\"none\" stroke=\"#003049\" stroke-width=\"1.5\" points=\"";
    for (const auto& p : points) {
      if (p.llc) s << fmt(X(p.checkpoint)) << ',' << fmt(YL(*p.llc)) << ' ';
    }
    s << "\"/>\n";
    for (const auto& p : points) {
      if (p.llc) {
        s << "<circle cx=\"" << fmt(X(p.checkpoint)) << "\" cy=\"" << fmt(YL(*p.llc))
          << "\" r=\"3\" fill=\"#003049\"/>\n";
      }
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::vector<PhaseBand> parse_svg_bands(const std::string& svg) {
  static const std::regex re(
      "data-phase=\"([^\"]*)\" data-first-step=\"(-?[0-9]+)\" data-last-step=\"(-?[0-9]+)\"");
  std::vector<PhaseBand> out;
  for (auto it = std::sregex_iterator(svg.begin(), svg.end(), re); it != std::sregex_iterator();
       ++it) {
    out.push_back(PhaseBand{(*it)[1].str(), std::stoll((*it)[2].str()), std::stoll((*it)[3].str())});
  }
  return out;
}

}  // namespace sltrl
