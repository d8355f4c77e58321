#include "nvstrain/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <vector>

#include <fmt/format.h>

namespace nvstrain::io {

namespace {

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

ParseError::ParseError(const std::string& source, std::size_t line, const std::string& what)
    : std::runtime_error(fmt::format("{}:{}: {}", source, line, what)), line_(line) {}

double round_sig(double v) {
  if (!std::isfinite(v) || v == 0.0) return v;
  const std::string s = fmt::format("{:.{}g}", v, kSignificantDigits);
  return std::strtod(s.c_str(), nullptr);
}

std::string format_number(double v) { return fmt::format("{}", round_sig(v)); }

SpectrumSamples parse_spectrum_csv(std::istream& in, const std::string& source) {
  SpectrumSamples s;
  std::string raw;
  std::size_t lineno = 0;
  bool have_header = false;
  bool with_sigma = false;
  while (std::getline(in, raw)) {
    ++lineno;
    const auto line = trim(raw);
    if (!have_header) {
      if (line == "nu_ghz,pl") {
        with_sigma = false;
      } else if (line == "nu_ghz,pl,sigma") {
        with_sigma = true;
      } else {
        throw ParseError(source, lineno,
                         fmt::format("expected header 'nu_ghz,pl[,sigma]', got '{}'", line));
      }
      have_header = true;
      continue;
    }
    if (line.empty()) continue;
    const auto fields = split(line, ',');
    const std::size_t expected = with_sigma ? 3 : 2;
    if (fields.size() != expected) {
      throw ParseError(source, lineno,
                       fmt::format("expected {} fields, got {}", expected, fields.size()));
    }
    double vals[3] = {0.0, 0.0, 0.0};
    for (std::size_t k = 0; k < expected; ++k) {
      const auto f = trim(fields[k]);
      const auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), vals[k]);
      if (ec != std::errc() || ptr != f.data() + f.size() || !std::isfinite(vals[k])) {
        throw ParseError(source, lineno, fmt::format("invalid number '{}'", f));
      }
    }
    if (!s.nu.empty() && !(vals[0] > s.nu.back())) {
      throw ParseError(source, lineno,
                       fmt::format("frequency {} is not greater than the previous {}", vals[0],
                                   s.nu.back()));
    }
    if (with_sigma && !(vals[2] > 0.0)) {
      throw ParseError(source, lineno, "sigma must be positive");
    }
    s.nu.push_back(vals[0]);
    s.pl.push_back(vals[1]);
    if (with_sigma) s.sigma.push_back(vals[2]);
  }
  if (!have_header) throw ParseError(source, 1, "empty file");
  return s;
}

SpectrumSamples read_spectrum_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  return parse_spectrum_csv(in, path.string());
}

void write_spectrum_csv(std::ostream& out, const SpectrumSamples& s) {
  out << (s.sigma.empty() ? "nu_ghz,pl\n" : "nu_ghz,pl,sigma\n");
  for (std::size_t i = 0; i < s.size(); ++i) {
    out << format_number(s.nu[i]) << ',' << format_number(s.pl[i]);
    if (!s.sigma.empty()) out << ',' << format_number(s.sigma[i]);
    out << '\n';
  }
}

void write_spectrum_csv(const std::filesystem::path& path, const SpectrumSamples& s) {
  std::ostringstream os;
  write_spectrum_csv(os, s);
  write_text(path, os.str());
}

void write_fidelity_csv(std::ostream& out, std::span<const FidelityPoint> curve) {
  out << "n_avg,fidelity\n";
  for (const auto& p : curve) {
    out << format_number(p.n_avg) << ',' << format_number(p.fidelity) << '\n';
  }
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error(fmt::format("cannot write {}", path.string()));
  out << text;
  if (!out) throw std::runtime_error(fmt::format("write failed for {}", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(fmt::format("cannot open {}", path.string()));
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace nvstrain::io
