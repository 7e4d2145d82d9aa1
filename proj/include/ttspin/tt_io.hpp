#pragma once

// Binary container for trains.
//
//   bytes 0..7   "TTSPIN1\0"
//   u32          kind: 0 vector, 1 operator
//   u32          scalar: 1 complex double (the only one written)
//   u64          order N
//   u64[N]       modes (vector) or rows then cols (operator, 2N values)
//   u64[N+1]     ranks
//   f64 pairs    core entries (re, im) in storage order, site by site
//
// All integers and doubles are little-endian regardless of the host.
// Orthogonality centres are not stored; loaded trains carry none.

#include <filesystem>
#include <iosfwd>
#include <variant>

#include "ttspin/tt.hpp"

namespace ttspin {

using AnyTrain = std::variant<TTVector, TTOperator>;

void write_tt(std::ostream& os, const TTVector& t);
void write_tt(std::ostream& os, const TTOperator& a);
/// Throws Error(io) on a truncated or malformed stream.
AnyTrain read_tt(std::istream& is);

void save_tt(const std::filesystem::path& path, const AnyTrain& t);
AnyTrain load_tt(const std::filesystem::path& path);

} // namespace ttspin
