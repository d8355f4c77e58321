#pragma once

// Spectrum CSV and fixed-precision number formatting shared by the CLI.
//
// CSV layout: header `nu_ghz,pl` or `nu_ghz,pl,sigma`, one sample per line,
// `.` decimal separator, LF line endings.

#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>

#include "nvstrain/geometry.hpp"
#include "nvstrain/spectrum.hpp"

namespace nvstrain::io {

inline constexpr int kSignificantDigits = 12;

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what);
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// Rounds to kSignificantDigits significant digits.
double round_sig(double v);
// Shortest text for round_sig(v).
std::string format_number(double v);

SpectrumSamples parse_spectrum_csv(std::istream& in, const std::string& source = "<stream>");
SpectrumSamples read_spectrum_csv(const std::filesystem::path& path);

void write_spectrum_csv(std::ostream& out, const SpectrumSamples& s);
void write_spectrum_csv(const std::filesystem::path& path, const SpectrumSamples& s);

void write_fidelity_csv(std::ostream& out, std::span<const FidelityPoint> curve);

// Writes text to a file, throwing std::runtime_error when it cannot be opened.
void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

}  // namespace nvstrain::io
