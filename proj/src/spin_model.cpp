#include "ttspin/spin_model.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace ttspin {

namespace {

constexpr std::array<std::string_view, 24> kSpinHalfIsotopes = {
    "1H",    "3H",    "3He",   "13C",   "15N",   "19F",   "29Si",  "31P",
    "57Fe",  "77Se",  "89Y",   "103Rh", "107Ag", "109Ag", "111Cd", "113Cd",
    "117Sn", "119Sn", "125Te", "129Xe", "183W",  "195Pt", "199Hg", "207Pb",
};

[[noreturn]] void schema_error(const std::string& what) {
  throw Error(ErrorCode::schema, what);
}

std::pair<std::size_t, std::size_t> line_and_column(std::string_view text,
                                                    std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t k = 0; k < byte && k < text.size(); ++k) {
    if (text[k] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

void reject_unknown(const nlohmann::json& obj, const std::string& where,
                    std::initializer_list<std::string_view> allowed) {
  for (const auto& [key, _] : obj.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      schema_error(where + ": unknown field '" + key + "'");
    }
  }
}

const nlohmann::json& require(const nlohmann::json& obj,
                              const std::string& where, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    schema_error(where + ": missing field '" + key + "'");
  }
  return *it;
}

double require_number(const nlohmann::json& obj, const std::string& where,
                      const char* key) {
  const auto& v = require(obj, where, key);
  if (!v.is_number()) schema_error(where + "." + key + ": expected a number");
  return v.get<double>();
}

std::string require_string(const nlohmann::json& obj, const std::string& where,
                           const char* key) {
  const auto& v = require(obj, where, key);
  if (!v.is_string()) schema_error(where + "." + key + ": expected a string");
  return v.get<std::string>();
}

std::size_t require_index(const nlohmann::json& obj, const std::string& where,
                          const char* key) {
  const auto& v = require(obj, where, key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    schema_error(where + "." + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

} // namespace

bool is_spin_half_isotope(std::string_view isotope) {
  return std::find(kSpinHalfIsotopes.begin(), kSpinHalfIsotopes.end(),
                   isotope) != kSpinHalfIsotopes.end();
}

void validate(const SpinSystem& sys) {
  if (sys.spins.empty()) schema_error("spins: at least one spin is required");
  for (std::size_t k = 0; k < sys.spins.size(); ++k) {
    const Spin& s = sys.spins[k];
    if (!is_spin_half_isotope(s.isotope)) {
      schema_error("spins[" + std::to_string(k) + "].isotope: '" + s.isotope +
                   "' is not a supported spin-1/2 isotope");
    }
    if (!std::isfinite(s.offset_hz)) {
      schema_error("spins[" + std::to_string(k) + "].offset_hz: not finite");
    }
  }
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (std::size_t k = 0; k < sys.couplings.size(); ++k) {
    const Coupling& c = sys.couplings[k];
    const std::string where = "couplings[" + std::to_string(k) + "]";
    if (c.i >= sys.spins.size() || c.j >= sys.spins.size()) {
      schema_error(where + ": spin index out of range");
    }
    if (c.i == c.j) schema_error(where + ": i and j must differ");
    if (!std::isfinite(c.j_hz)) schema_error(where + ".j_hz: not finite");
    const auto key = std::minmax(c.i, c.j);
    if (!seen.insert(key).second) {
      schema_error(where + ": pair (" + std::to_string(key.first) + ", " +
                   std::to_string(key.second) + ") listed twice");
    }
  }
  if (!(sys.damping_mu > 0.0) || !std::isfinite(sys.damping_mu)) {
    schema_error("damping_mu: must be a positive number");
  }
}

SpinSystem parse_spin_system(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text.begin(), json_text.end());
  } catch (const nlohmann::json::parse_error& e) {
    const auto [line, col] = line_and_column(json_text, e.byte);
    schema_error("malformed JSON at line " + std::to_string(line) +
                 ", column " + std::to_string(col) + ": " + e.what());
  }
  if (!doc.is_object()) schema_error("top level: expected an object");
  reject_unknown(doc, "top level", {"spins", "couplings", "damping_mu"});

  SpinSystem sys;
  const auto& spins = require(doc, "top level", "spins");
  if (!spins.is_array()) schema_error("spins: expected an array");
  for (std::size_t k = 0; k < spins.size(); ++k) {
    const std::string where = "spins[" + std::to_string(k) + "]";
    const auto& s = spins[k];
    if (!s.is_object()) schema_error(where + ": expected an object");
    reject_unknown(s, where, {"label", "isotope", "offset_hz"});
    Spin spin;
    spin.label = s.contains("label") ? require_string(s, where, "label")
                                     : "S" + std::to_string(k);
    spin.isotope = require_string(s, where, "isotope");
    spin.offset_hz = require_number(s, where, "offset_hz");
    sys.spins.push_back(std::move(spin));
  }
  if (doc.contains("couplings")) {
    const auto& cs = doc["couplings"];
    if (!cs.is_array()) schema_error("couplings: expected an array");
    for (std::size_t k = 0; k < cs.size(); ++k) {
      const std::string where = "couplings[" + std::to_string(k) + "]";
      const auto& c = cs[k];
      if (!c.is_object()) schema_error(where + ": expected an object");
      reject_unknown(c, where, {"i", "j", "j_hz"});
      sys.couplings.push_back({require_index(c, where, "i"),
                               require_index(c, where, "j"),
                               require_number(c, where, "j_hz")});
    }
  }
  sys.damping_mu = require_number(doc, "top level", "damping_mu");
  validate(sys);
  return sys;
}

SpinSystem load_spin_system(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error(ErrorCode::io, "cannot open spin system file " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_spin_system(buf.str());
}

std::string to_json(const SpinSystem& sys) {
  nlohmann::json doc;
  doc["spins"] = nlohmann::json::array();
  for (const Spin& s : sys.spins) {
    doc["spins"].push_back(
        {{"label", s.label}, {"isotope", s.isotope}, {"offset_hz", s.offset_hz}});
  }
  doc["couplings"] = nlohmann::json::array();
  for (const Coupling& c : sys.couplings) {
    doc["couplings"].push_back({{"i", c.i}, {"j", c.j}, {"j_hz", c.j_hz}});
  }
  doc["damping_mu"] = sys.damping_mu;
  return doc.dump(2);
}

SpinSystem synthetic_backbone(std::size_t spins, std::uint64_t seed) {
  struct Site {
    const char* name;
    const char* isotope;
    double center_hz;
    double spread_hz;
  };
  // Offsets at 600 MHz relative to per-isotope carriers (4.7, 120, 100 ppm).
  static constexpr std::array<Site, 5> kResidue = {{
      {"N", "15N", 0.0, 600.0},
      {"H", "1H", 2160.0, 300.0},
      {"CA", "13C", -6790.0, 500.0},
      {"HA", "1H", -240.0, 200.0},
      {"C", "13C", 11318.0, 300.0},
  }};
  enum { kN, kH, kCA, kHA, kC };

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  SpinSystem sys;
  sys.damping_mu = 15.0;
  const std::size_t residues = (spins + kResidue.size() - 1) / kResidue.size();
  for (std::size_t r = 0; r < residues; ++r) {
    for (const Site& s : kResidue) {
      sys.spins.push_back({std::string(s.name) + std::to_string(r + 1),
                           s.isotope, s.center_hz + s.spread_hz * unit(rng)});
    }
  }
  sys.spins.resize(spins);

  auto couple = [&](std::size_t a, std::size_t b, double j) {
    if (a < spins && b < spins) sys.couplings.push_back({a, b, j});
  };
  for (std::size_t r = 0; r < residues; ++r) {
    const std::size_t base = r * kResidue.size();
    couple(base + kN, base + kH, -92.0);
    couple(base + kN, base + kCA, -11.0);
    couple(base + kCA, base + kHA, 140.0);
    couple(base + kCA, base + kC, 55.0);
    couple(base + kH, base + kHA, 7.0);
    if (r > 0) {
      const std::size_t prev = base - kResidue.size();
      couple(prev + kC, base + kN, -15.0);
      couple(prev + kCA, base + kN, 7.0);
    }
  }
  validate(sys);
  return sys;
}

// ---------------------------------------------------------------- operators

namespace spin_half {

Matrix identity() { return Matrix::Identity(2, 2); }

Matrix sx() {
  Matrix m(2, 2);
  m << 0.0, 0.5, 0.5, 0.0;
  return m;
}

Matrix sy() {
  Matrix m(2, 2);
  m << Complex(0.0, 0.0), Complex(0.0, -0.5), Complex(0.0, 0.5),
      Complex(0.0, 0.0);
  return m;
}

Matrix sz() {
  Matrix m(2, 2);
  m << 0.5, 0.0, 0.0, -0.5;
  return m;
}

Matrix splus() { return sx() + Complex(0.0, 1.0) * sy(); }
Matrix sminus() { return sx() - Complex(0.0, 1.0) * sy(); }

} // namespace spin_half

LocalOperator LocalOperator::of(OpKind kind) {
  switch (kind) {
  case OpKind::identity: return {kind, spin_half::identity()};
  case OpKind::sx: return {kind, spin_half::sx()};
  case OpKind::sy: return {kind, spin_half::sy()};
  case OpKind::sz: return {kind, spin_half::sz()};
  case OpKind::splus: return {kind, spin_half::splus()};
  case OpKind::sminus: return {kind, spin_half::sminus()};
  case OpKind::custom: break;
  }
  throw Error(ErrorCode::invalid_argument,
              "LocalOperator::of needs a tagged kind, use custom()");
}

LocalOperator LocalOperator::custom(Matrix m) {
  return {OpKind::custom, std::move(m)};
}

void validate(const CPOperatorSum& sum) {
  const Index dim = sum.local_dim();
  for (std::size_t t = 0; t < sum.terms.size(); ++t) {
    const CPTerm& term = sum.terms[t];
    if (term.factors.empty()) {
      throw Error(ErrorCode::invalid_structure,
                  "term " + std::to_string(t) + " has no factors");
    }
    for (const auto& [site, op] : term.factors) {
      if (site >= sum.sites) {
        throw Error(ErrorCode::invalid_structure,
                    "term " + std::to_string(t) + " refers to site " +
                        std::to_string(site) + " beyond the chain");
      }
      if (op.matrix.rows() != dim || op.matrix.cols() != dim) {
        throw Error(ErrorCode::mode_mismatch,
                    "term " + std::to_string(t) + " has a factor of size " +
                        std::to_string(op.matrix.rows()) + "x" +
                        std::to_string(op.matrix.cols()) + ", expected " +
                        std::to_string(dim));
      }
    }
  }
}

CPOperatorSum hamiltonian_terms(const SpinSystem& sys) {
  validate(sys);
  CPOperatorSum sum;
  sum.space = Space::hilbert;
  sum.sites = sys.size();
  for (std::size_t k = 0; k < sys.size(); ++k) {
    sum.terms.push_back(
        {kTwoPi * sys.spins[k].offset_hz, {{k, LocalOperator::of(OpKind::sz)}}});
  }
  for (const Coupling& c : sys.couplings) {
    const Complex coeff = kTwoPi * c.j_hz;
    const bool strong = sys.spins[c.i].isotope == sys.spins[c.j].isotope;
    if (strong) {
      for (OpKind k : {OpKind::sx, OpKind::sy, OpKind::sz}) {
        sum.terms.push_back(
            {coeff, {{c.i, LocalOperator::of(k)}, {c.j, LocalOperator::of(k)}}});
      }
    } else {
      sum.terms.push_back({coeff,
                           {{c.i, LocalOperator::of(OpKind::sz)},
                            {c.j, LocalOperator::of(OpKind::sz)}}});
    }
  }
  return sum;
}

TTOperator term_to_tt(const CPOperatorSum& sum, std::size_t term) {
  const CPTerm& t = sum.terms.at(term);
  const Index dim = sum.local_dim();
  std::vector<Matrix> factors(sum.sites, Matrix::Identity(dim, dim));
  for (const auto& [site, op] : t.factors) factors.at(site) = op.matrix;
  factors.front() *= t.coeff;
  return TTOperator::product(factors);
}

namespace {

/// Builds an operator train from per-site block tables: blocks[n][a][b].
TTOperator from_blocks(const std::vector<std::vector<std::vector<Matrix>>>& blocks) {
  std::vector<Core> cores;
  std::vector<Index> modes;
  for (const auto& table : blocks) {
    const Index left = static_cast<Index>(table.size());
    const Index right = static_cast<Index>(table.front().size());
    const Index dim = table[0][0].rows();
    Core c(left, dim * dim, right);
    for (Index a = 0; a < left; ++a)
      for (Index b = 0; b < right; ++b)
        for (Index p = 0; p < dim; ++p)
          for (Index o = 0; o < dim; ++o) c(a, o + dim * p, b) = table[a][b](o, p);
    cores.push_back(std::move(c));
    modes.push_back(dim);
  }
  return TTOperator(TTVector(std::move(cores)), modes, modes);
}

} // namespace

TTOperator analytic_total_sz(std::size_t n) {
  if (n < 2) {
    throw Error(ErrorCode::invalid_argument,
                "analytic_total_sz needs at least two spins");
  }
  const Matrix one = spin_half::identity();
  const Matrix z = spin_half::sz();
  const Matrix zero = Matrix::Zero(2, 2);
  std::vector<std::vector<std::vector<Matrix>>> blocks;
  blocks.push_back({{z, one}});
  for (std::size_t k = 1; k + 1 < n; ++k) {
    blocks.push_back({{one, zero}, {z, one}});
  }
  blocks.push_back({{one}, {z}});
  return from_blocks(blocks);
}

TTOperator analytic_zz_chain(std::size_t n) {
  if (n < 2) {
    throw Error(ErrorCode::invalid_argument,
                "analytic_zz_chain needs at least two spins");
  }
  const Matrix one = spin_half::identity();
  const Matrix z = spin_half::sz();
  const Matrix zero = Matrix::Zero(2, 2);
  std::vector<std::vector<std::vector<Matrix>>> blocks;
  blocks.push_back({{zero, z, one}});
  for (std::size_t k = 1; k + 1 < n; ++k) {
    blocks.push_back({{one, zero, zero}, {z, one, zero}, {zero, z, one}});
  }
  blocks.push_back({{one}, {z}, {zero}});
  return from_blocks(blocks);
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i)
    for (Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

Vector vec_rows(const Matrix& m) {
  Vector v(m.size());
  for (Index r = 0; r < m.rows(); ++r)
    for (Index c = 0; c < m.cols(); ++c) v[r * m.cols() + c] = m(r, c);
  return v;
}

CPOperatorSum commutation_superoperator(const CPOperatorSum& hilbert) {
  if (hilbert.space != Space::hilbert) {
    throw Error(ErrorCode::invalid_argument,
                "commutation_superoperator expects Hilbert-space terms");
  }
  validate(hilbert);
  const Matrix one = spin_half::identity();
  CPOperatorSum out;
  out.space = Space::liouville;
  out.sites = hilbert.sites;
  out.terms.reserve(2 * hilbert.terms.size());
  for (const CPTerm& t : hilbert.terms) {
    CPTerm left{t.coeff, {}};
    CPTerm right{-t.coeff, {}};
    for (const auto& [site, op] : t.factors) {
      left.factors.emplace(site, LocalOperator::custom(kron(op.matrix, one)));
      right.factors.emplace(
          site, LocalOperator::custom(kron(one, op.matrix.transpose())));
    }
    out.terms.push_back(std::move(left));
    out.terms.push_back(std::move(right));
  }
  return out;
}

TTVector detection_state(const SpinSystem& sys, std::string_view isotope) {
  const std::size_t n = sys.size();
  std::vector<bool> match(n);
  bool any = false;
  for (std::size_t k = 0; k < n; ++k) {
    match[k] = sys.spins[k].isotope == isotope;
    any = any || match[k];
  }
  if (!any) {
    throw Error(ErrorCode::invalid_argument,
                "no spin of isotope " + std::string(isotope) + " in the system");
  }
  const Vector one = vec_rows(spin_half::identity());
  const Vector plus = vec_rows(spin_half::splus());
  const Vector zero = Vector::Zero(4);
  if (n == 1) return TTVector::product(std::vector<Vector>{plus});

  auto local = [&](std::size_t k) { return match[k] ? plus : zero; };
  auto put = [](Core& c, Index a, Index b, const Vector& v) {
    for (Index i = 0; i < v.size(); ++i) c(a, i, b) = v[i];
  };
  std::vector<Core> cores;
  Core first(1, 4, 2);
  put(first, 0, 0, local(0));
  put(first, 0, 1, one);
  cores.push_back(std::move(first));
  for (std::size_t k = 1; k + 1 < n; ++k) {
    Core c(2, 4, 2);
    put(c, 0, 0, one);
    put(c, 1, 0, local(k));
    put(c, 1, 1, one);
    cores.push_back(std::move(c));
  }
  Core last(2, 4, 1);
  put(last, 0, 0, one);
  put(last, 1, 0, local(n - 1));
  cores.push_back(std::move(last));
  return TTVector(std::move(cores));
}

} // namespace ttspin
