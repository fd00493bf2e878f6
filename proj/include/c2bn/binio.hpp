#pragma once

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>

#include "c2bn/matrix.hpp"

// Little-endian primitives shared by the checkpoint and dataset formats.
// Readers throw FormatError on a short read.
namespace c2bn::binio {

void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
void write_string(std::ostream& out, std::string_view s);
void write_matrix(std::ostream& out, const Matrix& m);

std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);
std::string read_string(std::istream& in);
Matrix read_matrix(std::istream& in);

void write_magic(std::ostream& out, std::string_view magic);
// Throws FormatError naming `what` when the bytes differ.
void expect_magic(std::istream& in, std::string_view magic, std::string_view what);

}  // namespace c2bn::binio
