#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

namespace mvt {

// Little-endian f64 payload blocks shared by checkpoints and train state.
// Text fields use %.17g, which round-trips doubles bitwise through strtod.
void write_f64_block(std::ostream& os, const std::vector<double>& values);
void read_f64_block(std::istream& is, std::vector<double>& values);

std::string fmt17(double v);

std::uint64_t parse_u64_field(const std::string& key, const std::string& text);
double parse_f64_field(const std::string& key, const std::string& text);

}  // namespace mvt
