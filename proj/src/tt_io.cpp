#include "ttspin/tt_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>

namespace ttspin {

namespace {

constexpr std::array<char, 8> kMagic{'T', 'T', 'S', 'P', 'I', 'N', '1', '\0'};
constexpr std::uint32_t kVector = 0;
constexpr std::uint32_t kOperator = 1;
constexpr std::uint32_t kComplex = 1;
// Refuse headers that would make us allocate absurd amounts before the
// stream runs dry.
constexpr std::uint64_t kMaxOrder = 1u << 20;
constexpr std::uint64_t kMaxEntries = std::uint64_t{1} << 32;

template <class U>
void put(std::ostream& os, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t k = 0; k < sizeof(U); ++k) {
    b[k] = static_cast<unsigned char>(v >> (8 * k));
  }
  os.write(reinterpret_cast<const char*>(b), sizeof b);
}

void put_double(std::ostream& os, double d) {
  put(os, std::bit_cast<std::uint64_t>(d));
}

template <class U>
U get(std::istream& is) {
  unsigned char b[sizeof(U)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof b)) {
    throw Error(ErrorCode::io, "train container is truncated");
  }
  U v = 0;
  for (std::size_t k = 0; k < sizeof(U); ++k) v |= U(b[k]) << (8 * k);
  return v;
}

double get_double(std::istream& is) {
  return std::bit_cast<double>(get<std::uint64_t>(is));
}

void write_header(std::ostream& os, std::uint32_t kind, std::size_t order) {
  os.write(kMagic.data(), kMagic.size());
  put<std::uint32_t>(os, kind);
  put<std::uint32_t>(os, kComplex);
  put<std::uint64_t>(os, order);
}

void write_cores(std::ostream& os, const TTVector& t) {
  for (Index r : t.ranks()) put<std::uint64_t>(os, static_cast<std::uint64_t>(r));
  for (const Core& c : t.cores()) {
    const Vector& d = c.data();
    for (Index k = 0; k < d.size(); ++k) {
      put_double(os, d[k].real());
      put_double(os, d[k].imag());
    }
  }
  if (!os) throw Error(ErrorCode::io, "failed to write train container");
}

std::vector<Index> get_sizes(std::istream& is, std::size_t n, const char* what) {
  std::vector<Index> out(n);
  for (auto& v : out) {
    const auto raw = get<std::uint64_t>(is);
    if (raw == 0 || raw > kMaxEntries) {
      throw Error(ErrorCode::io, std::string("train container has a bad ") + what);
    }
    v = static_cast<Index>(raw);
  }
  return out;
}

} // namespace

void write_tt(std::ostream& os, const TTVector& t) {
  write_header(os, kVector, t.order());
  for (Index m : t.modes()) put<std::uint64_t>(os, static_cast<std::uint64_t>(m));
  write_cores(os, t);
}

void write_tt(std::ostream& os, const TTOperator& a) {
  write_header(os, kOperator, a.order());
  for (Index m : a.rows()) put<std::uint64_t>(os, static_cast<std::uint64_t>(m));
  for (Index m : a.cols()) put<std::uint64_t>(os, static_cast<std::uint64_t>(m));
  write_cores(os, a.as_vector());
}

AnyTrain read_tt(std::istream& is) {
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) {
    throw Error(ErrorCode::io, "not a train container (bad magic)");
  }
  const auto kind = get<std::uint32_t>(is);
  if (kind != kVector && kind != kOperator) {
    throw Error(ErrorCode::io, "train container has unknown kind " + std::to_string(kind));
  }
  const auto scalar = get<std::uint32_t>(is);
  if (scalar != kComplex) {
    throw Error(ErrorCode::io,
                "train container has unsupported scalar type " + std::to_string(scalar));
  }
  const auto order = get<std::uint64_t>(is);
  if (order == 0 || order > kMaxOrder) {
    throw Error(ErrorCode::io, "train container has a bad order");
  }
  const std::size_t n = static_cast<std::size_t>(order);

  std::vector<Index> rows, cols, modes;
  if (kind == kVector) {
    modes = get_sizes(is, n, "mode size");
  } else {
    rows = get_sizes(is, n, "row size");
    cols = get_sizes(is, n, "column size");
    modes.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
      if (rows[k] > Index(kMaxEntries) / cols[k]) {
        throw Error(ErrorCode::io, "train container has a bad mode size");
      }
      modes[k] = rows[k] * cols[k];
    }
  }
  const std::vector<Index> ranks = get_sizes(is, n + 1, "rank");
  if (ranks.front() != 1 || ranks.back() != 1) {
    throw Error(ErrorCode::io, "train container has boundary ranks other than 1");
  }

  std::vector<Core> cores;
  cores.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const Index l = ranks[k], m = modes[k], r = ranks[k + 1];
    if (l > Index(kMaxEntries) / m || l * m > Index(kMaxEntries) / r) {
      throw Error(ErrorCode::io, "train container core is too large");
    }
    Vector d(l * m * r);
    for (Index e = 0; e < d.size(); ++e) {
      const double re = get_double(is);
      const double im = get_double(is);
      d[e] = Complex(re, im);
    }
    cores.emplace_back(l, m, r, std::move(d));
  }
  TTVector t(std::move(cores));
  if (kind == kVector) return t;
  return TTOperator(std::move(t), std::move(rows), std::move(cols));
}

void save_tt(const std::filesystem::path& path, const AnyTrain& t) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorCode::io, "cannot open " + path.string() + " for writing");
  std::visit([&](const auto& x) { write_tt(os, x); }, t);
  os.close();
  if (!os) throw Error(ErrorCode::io, "failed to write " + path.string());
}

AnyTrain load_tt(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorCode::io, "cannot open " + path.string());
  AnyTrain t = read_tt(is);
  if (is.peek() != std::char_traits<char>::eof()) {
    throw Error(ErrorCode::io, path.string() + " has trailing bytes");
  }
  return t;
}

} // namespace ttspin
