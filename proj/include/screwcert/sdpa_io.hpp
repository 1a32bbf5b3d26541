#pragma once

// SDPA sparse format (.dat-s).
//
//   m
//   nBlocks
//   block sizes (negative: diagonal / LP block)
//   c_1 ... c_m
//   matno blkno i j value      (1-indexed, i <= j, matno 0 is F_0)
//
// SDPA pairs   (P) min c'x  s.t.  sum_i F_i x_i - F_0 >= 0
//              (D) max F_0.Y  s.t.  F_i.Y = c_i,  Y >= 0.
// A ConicProblem (min C.X s.t. A_i.X = b_i, X in K) is written as (D) with
// Y = X, F_i = A_i, c = b and F_0 = -C, so the SDPA optimum is the negated
// internal objective. Free variables become pairs x+ - x- at the end of the
// LP block; a comment line "*free_pairs <n>" records how many.
//
// Numbers are written with 17 significant digits, so text -> SdpaData ->
// text is exact. Off-diagonal PSD entries carry the svec factor sqrt(2), so
// ConicProblem -> SdpaData -> ConicProblem is exact up to that rescaling.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Sparse>

#include "screwcert/sdp.hpp"

namespace screwcert::sdp {

class SdpaFormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SdpaEntry {
  int mat = 0;
  int block = 1;
  int i = 1;
  int j = 1;
  double value = 0.0;
  bool operator==(const SdpaEntry&) const = default;
};

struct SdpaData {
  int m = 0;
  std::vector<int> blocks;
  std::vector<double> c;
  std::vector<SdpaEntry> entries;
  int free_pairs = 0;  // trailing LP-block pairs that encode free variables
  bool operator==(const SdpaData&) const = default;
};

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string to_text(const SdpaData& d) {
  std::ostringstream os;
  if (d.free_pairs > 0) os << "*free_pairs " << d.free_pairs << '\n';
  os << d.m << '\n' << d.blocks.size() << '\n';
  for (size_t k = 0; k < d.blocks.size(); ++k) os << (k ? " " : "") << d.blocks[k];
  os << '\n';
  for (size_t k = 0; k < d.c.size(); ++k) os << (k ? " " : "") << format_double(d.c[k]);
  os << '\n';
  for (const auto& e : d.entries) {
    os << e.mat << ' ' << e.block << ' ' << e.i << ' ' << e.j << ' ' << format_double(e.value) << '\n';
  }
  return os.str();
}

inline SdpaData parse_sdpa(const std::string& text) {
  SdpaData d;
  std::istringstream is(text);
  std::string line;
  std::vector<std::string> body;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty() && (line[0] == '"' || line[0] == '*')) {
      std::istringstream cs(line.substr(1));
      std::string key;
      if (cs >> key && key == "free_pairs" && !(cs >> d.free_pairs)) {
        throw SdpaFormatError("sdpa: malformed free_pairs comment");
      }
      continue;
    }
    // Separators allowed by the format.
    for (char& ch : line) {
      if (ch == ',' || ch == '(' || ch == ')' || ch == '{' || ch == '}') ch = ' ';
    }
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    body.push_back(line);
  }
  auto tokens_of = [](const std::string& s) {
    std::istringstream ss(s);
    std::vector<std::string> t;
    std::string w;
    while (ss >> w) t.push_back(w);
    return t;
  };
  auto num = [](const std::string& s) {
    size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(s, &used);
    } catch (const std::exception&) {
      throw SdpaFormatError("sdpa: bad number '" + s + "'");
    }
    if (used != s.size()) throw SdpaFormatError("sdpa: bad number '" + s + "'");
    return v;
  };
  auto integer = [&](const std::string& s) {
    const double v = num(s);
    if (v != std::floor(v)) throw SdpaFormatError("sdpa: expected an integer, got '" + s + "'");
    return static_cast<int>(v);
  };
  if (body.size() < 4) throw SdpaFormatError("sdpa: truncated header");
  d.m = integer(tokens_of(body[0]).at(0));
  const int nb = integer(tokens_of(body[1]).at(0));
  const auto bt = tokens_of(body[2]);
  if (nb < 1 || static_cast<int>(bt.size()) < nb) throw SdpaFormatError("sdpa: block structure");
  for (int k = 0; k < nb; ++k) d.blocks.push_back(integer(bt[static_cast<size_t>(k)]));
  for (int b : d.blocks) {
    if (b == 0) throw SdpaFormatError("sdpa: zero block size");
  }
  const auto ct = tokens_of(body[3]);
  if (static_cast<int>(ct.size()) < d.m) throw SdpaFormatError("sdpa: objective vector too short");
  for (int k = 0; k < d.m; ++k) d.c.push_back(num(ct[static_cast<size_t>(k)]));
  for (size_t l = 4; l < body.size(); ++l) {
    const auto t = tokens_of(body[l]);
    if (t.size() != 5) throw SdpaFormatError("sdpa: entry line needs 5 fields");
    SdpaEntry e{integer(t[0]), integer(t[1]), integer(t[2]), integer(t[3]), num(t[4])};
    if (e.mat < 0 || e.mat > d.m) throw SdpaFormatError("sdpa: matrix number out of range");
    if (e.block < 1 || e.block > nb) throw SdpaFormatError("sdpa: block number out of range");
    const int side = std::abs(d.blocks[static_cast<size_t>(e.block - 1)]);
    if (e.i < 1 || e.j < 1 || e.i > side || e.j > side) throw SdpaFormatError("sdpa: index out of range");
    if (d.blocks[static_cast<size_t>(e.block - 1)] < 0 && e.i != e.j) {
      throw SdpaFormatError("sdpa: off-diagonal entry in an LP block");
    }
    d.entries.push_back(e);
  }
  return d;
}

namespace detail {

/// (block, i, j) of each svec coordinate in a PSD block of side n, i <= j, 1-indexed.
inline std::vector<std::pair<int, int>> svec_positions(int n) {
  std::vector<std::pair<int, int>> out;
  for (int j = 0; j < n; ++j) {
    for (int i = j; i < n; ++i) out.emplace_back(j + 1, i + 1);
  }
  return out;
}

}  // namespace detail

inline SdpaData to_sdpa(const ConicProblem& p) {
  p.validate();
  SdpaData d;
  d.m = p.num_constraints();
  for (int n : p.cones.psd) d.blocks.push_back(n);
  const int lp = p.cones.nonneg + 2 * p.cones.free;
  if (lp > 0) d.blocks.push_back(-lp);
  d.free_pairs = p.cones.free;
  d.c.assign(p.b.data(), p.b.data() + p.b.size());

  // Column -> (block, i, j, scale, sign of the split copy).
  struct Slot {
    int block, i, j;
    double scale;
    int pair;  // LP index of the minus copy, 0 if none
  };
  std::vector<Slot> slots;
  int blk = 1;
  for (int n : p.cones.psd) {
    for (const auto& [i, j] : detail::svec_positions(n)) slots.push_back({blk, i, j, i == j ? 1.0 : 1.0 / kSqrt2, 0});
    ++blk;
  }
  for (int k = 0; k < p.cones.nonneg; ++k) slots.push_back({blk, k + 1, k + 1, 1.0, 0});
  for (int k = 0; k < p.cones.free; ++k) {
    const int plus = p.cones.nonneg + 2 * k + 1;
    slots.push_back({blk, plus, plus, 1.0, plus + 1});
  }

  auto emit = [&](int mat, int col, double v) {
    if (v == 0.0) return;
    const Slot& s = slots[static_cast<size_t>(col)];
    const double val = s.scale == 1.0 ? v : v * s.scale;
    d.entries.push_back({mat, s.block, s.i, s.j, val});
    if (s.pair) d.entries.push_back({mat, s.block, s.pair, s.pair, -val});
  };
  for (int col = 0; col < p.num_variables(); ++col) emit(0, col, -p.c(col));
  for (int r = 0; r < p.A.outerSize(); ++r) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(p.A, r); it; ++it) {
      emit(r + 1, static_cast<int>(it.col()), it.value());
    }
  }
  std::stable_sort(d.entries.begin(), d.entries.end(), [](const SdpaEntry& a, const SdpaEntry& b) {
    return std::tie(a.mat, a.block, a.i, a.j) < std::tie(b.mat, b.block, b.i, b.j);
  });
  return d;
}

inline ConicProblem from_sdpa(const SdpaData& d) {
  ConicProblem p;
  int lp = 0;
  std::vector<int> offset;
  int off = 0;
  for (size_t k = 0; k < d.blocks.size(); ++k) {
    const int b = d.blocks[k];
    offset.push_back(off);
    if (b > 0) {
      p.cones.psd.push_back(b);
      off += svec_size(b);
    } else {
      if (k + 1 != d.blocks.size() || lp > 0) throw SdpaFormatError("sdpa: the LP block must be the last block");
      lp = -b;
    }
  }
  if (d.free_pairs < 0 || 2 * d.free_pairs > lp) throw SdpaFormatError("sdpa: free_pairs exceeds the LP block");
  p.cones.nonneg = lp - 2 * d.free_pairs;
  p.cones.free = d.free_pairs;
  const int n = p.cones.dim();
  p.c = Eigen::VectorXd::Zero(n);
  p.b = Eigen::Map<const Eigen::VectorXd>(d.c.data(), static_cast<Eigen::Index>(d.c.size()));
  std::vector<Eigen::Triplet<double>> trip;
  for (const auto& e : d.entries) {
    const int b = d.blocks[static_cast<size_t>(e.block - 1)];
    int col = 0;
    double v = e.value;
    if (b > 0) {
      col = offset[static_cast<size_t>(e.block - 1)] + svec_index(b, std::max(e.i, e.j) - 1, std::min(e.i, e.j) - 1);
      if (e.i != e.j) v *= kSqrt2;
    } else {
      const int k = e.i - 1;
      if (k < p.cones.nonneg) {
        col = p.cones.nonneg_offset() + k;
      } else {
        const int q = k - p.cones.nonneg;
        if (q % 2 == 1) continue;  // minus copy of a free variable
        col = p.cones.free_offset() + q / 2;
      }
    }
    if (e.mat == 0) {
      p.c(col) += -v;
    } else {
      trip.emplace_back(e.mat - 1, col, v);
    }
  }
  p.A.resize(d.m, n);
  p.A.setFromTriplets(trip.begin(), trip.end());
  p.A.makeCompressed();
  return p;
}

inline void export_sdpa(const ConicProblem& p, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("export_sdpa: cannot open " + path.string());
  f << to_text(to_sdpa(p));
  if (!f) throw std::runtime_error("export_sdpa: write failed for " + path.string());
}

inline SdpaData read_sdpa(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("read_sdpa: cannot open " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_sdpa(ss.str());
}

inline ConicProblem import_sdpa(const std::filesystem::path& path) { return from_sdpa(read_sdpa(path)); }

}  // namespace screwcert::sdp
