#include "epigeo/five_point.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>

namespace epigeo {

namespace {

// --- small polynomial helpers for the minimal solver -----------------------
//
// E(x, y, z) = x B0 + y B1 + z B2 + B3 over the nullspace basis. The ten
// cubic constraints (det E = 0 and E E^T E - 1/2 tr(E E^T) E = 0) are
// expanded over 20 monomials ordered so that the first ten carry all terms
// of degree >= 2 in (x, y):
//
//   x^3, y^3, x^2 y, x y^2, x^2 z, x^2, y^2 z, y^2, x y z, x y |
//   x z^2, x z, x, y z^2, y z, y, z^3, z^2, z, 1

using Poly1 = std::array<double, 4>;    // x, y, z, 1
using Poly2 = std::array<double, 10>;   // xx, xy, xz, yy, yz, zz, x, y, z, 1
using Poly3 = std::array<double, 20>;

struct Exp3 {
  int x, y, z;
};

constexpr std::array<Exp3, 4> kExp1 = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}, {0, 0, 0}}};
constexpr std::array<Exp3, 10> kExp2 = {{{2, 0, 0},
                                         {1, 1, 0},
                                         {1, 0, 1},
                                         {0, 2, 0},
                                         {0, 1, 1},
                                         {0, 0, 2},
                                         {1, 0, 0},
                                         {0, 1, 0},
                                         {0, 0, 1},
                                         {0, 0, 0}}};
constexpr std::array<Exp3, 20> kExp3 = {{{3, 0, 0}, {0, 3, 0}, {2, 1, 0}, {1, 2, 0},
                                         {2, 0, 1}, {2, 0, 0}, {0, 2, 1}, {0, 2, 0},
                                         {1, 1, 1}, {1, 1, 0}, {1, 0, 2}, {1, 0, 1},
                                         {1, 0, 0}, {0, 1, 2}, {0, 1, 1}, {0, 1, 0},
                                         {0, 0, 3}, {0, 0, 2}, {0, 0, 1}, {0, 0, 0}}};

int p3_index(int dx, int dy, int dz) {
  for (int i = 0; i < 20; ++i) {
    if (kExp3[i].x == dx && kExp3[i].y == dy && kExp3[i].z == dz) return i;
  }
  return -1;
}

Poly2 mul11(const Poly1 &a, const Poly1 &b) {
  Poly2 out{};
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      const int dx = kExp1[i].x + kExp1[j].x;
      const int dy = kExp1[i].y + kExp1[j].y;
      const int dz = kExp1[i].z + kExp1[j].z;
      for (int m = 0; m < 10; ++m) {
        if (kExp2[m].x == dx && kExp2[m].y == dy && kExp2[m].z == dz) {
          out[m] += a[i] * b[j];
          break;
        }
      }
    }
  }
  return out;
}

Poly3 mul21(const Poly2 &a, const Poly1 &b) {
  Poly3 out{};
  for (int i = 0; i < 10; ++i) {
    for (int j = 0; j < 4; ++j) {
      const int idx = p3_index(kExp2[i].x + kExp1[j].x, kExp2[i].y + kExp1[j].y,
                               kExp2[i].z + kExp1[j].z);
      out[idx] += a[i] * b[j];
    }
  }
  return out;
}

Poly2 sub2(const Poly2 &a, const Poly2 &b) {
  Poly2 out;
  for (int i = 0; i < 10; ++i) out[i] = a[i] - b[i];
  return out;
}

// Univariate polynomial in z, ascending coefficients.
struct PolyZ {
  std::vector<double> c;

  int degree() const { return static_cast<int>(c.size()) - 1; }

  double eval(double z) const {
    double acc = 0.0;
    for (int i = degree(); i >= 0; --i) acc = acc * z + c[i];
    return acc;
  }
};

PolyZ pz_sub(const PolyZ &a, const PolyZ &b) {
  PolyZ out;
  out.c.resize(std::max(a.c.size(), b.c.size()), 0.0);
  for (size_t i = 0; i < a.c.size(); ++i) out.c[i] += a.c[i];
  for (size_t i = 0; i < b.c.size(); ++i) out.c[i] -= b.c[i];
  return out;
}

PolyZ pz_mul(const PolyZ &a, const PolyZ &b) {
  PolyZ out;
  out.c.assign(a.c.size() + b.c.size() - 1, 0.0);
  for (size_t i = 0; i < a.c.size(); ++i) {
    for (size_t j = 0; j < b.c.size(); ++j) out.c[i + j] += a.c[i] * b.c[j];
  }
  return out;
}

PolyZ pz_shift(const PolyZ &a) {  // multiply by z
  PolyZ out;
  out.c.assign(a.c.size() + 1, 0.0);
  for (size_t i = 0; i < a.c.size(); ++i) out.c[i + 1] = a.c[i];
  return out;
}

PolyZ pz_add(const PolyZ &a, const PolyZ &b) {
  PolyZ out;
  out.c.resize(std::max(a.c.size(), b.c.size()), 0.0);
  for (size_t i = 0; i < a.c.size(); ++i) out.c[i] += a.c[i];
  for (size_t i = 0; i < b.c.size(); ++i) out.c[i] += b.c[i];
  return out;
}

// One eliminated constraint row expressed as x kx(z) + y ky(z) + k1(z) = 0.
struct RowKLM {
  PolyZ x, y, one;
};

// Builds <row_a> - z <row_b> from the reduced constraint matrix. Columns of
// m10 follow the second monomial block.
RowKLM make_klm(const Eigen::Matrix<double, 10, 10> &m10, int row_a, int row_b) {
  auto x_part = [&](int r) {
    return PolyZ{{m10(r, 2), m10(r, 1), m10(r, 0)}};
  };
  auto y_part = [&](int r) {
    return PolyZ{{m10(r, 5), m10(r, 4), m10(r, 3)}};
  };
  auto one_part = [&](int r) {
    return PolyZ{{m10(r, 9), m10(r, 8), m10(r, 7), m10(r, 6)}};
  };
  RowKLM out;
  out.x = pz_sub(x_part(row_a), pz_shift(x_part(row_b)));
  out.y = pz_sub(y_part(row_a), pz_shift(y_part(row_b)));
  out.one = pz_sub(one_part(row_a), pz_shift(one_part(row_b)));
  return out;
}

std::vector<double> real_roots(const PolyZ &poly) {
  // Trim negligible leading coefficients before building the companion
  // matrix.
  double max_abs = 0.0;
  for (double v : poly.c) max_abs = std::max(max_abs, std::abs(v));
  if (!(max_abs > 0.0)) return {};
  int deg = poly.degree();
  while (deg > 0 && std::abs(poly.c[deg]) < 1e-12 * max_abs) --deg;
  if (deg < 1) return {};

  Eigen::MatrixXd companion = Eigen::MatrixXd::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -poly.c[i] / poly.c[deg];

  PolyZ deriv;
  deriv.c.resize(deg);
  for (int i = 1; i <= deg; ++i) deriv.c[i - 1] = i * poly.c[i];

  Eigen::EigenSolver<Eigen::MatrixXd> es(companion, /*computeEigenvectors=*/false);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) {
    const auto ev = es.eigenvalues()[i];
    if (std::abs(ev.imag()) < 1e-8 * (1.0 + std::abs(ev.real()))) {
      double z = ev.real();
      // A few Newton steps sharpen eigenvalue roots noticeably.
      for (int it = 0; it < 4; ++it) {
        const double f = poly.eval(z);
        const double fp = deriv.eval(z);
        if (!(std::abs(fp) > 0.0)) break;
        const double next = z - f / fp;
        if (!std::isfinite(next) || std::abs(poly.eval(next)) >= std::abs(f)) break;
        z = next;
      }
      roots.push_back(z);
    }
  }
  return roots;
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

void RansacConfig::validate() const {
  if (!(threshold > 0.0)) {
    throw Error(ErrorCode::invalid_input, "RANSAC threshold must be positive");
  }
  if (!(confidence > 0.0) || !(confidence < 1.0)) {
    throw Error(ErrorCode::invalid_input, "RANSAC confidence must be in (0, 1)");
  }
  if (max_iterations < 1) {
    throw Error(ErrorCode::invalid_input, "max_iterations must be >= 1");
  }
}

int RansacResult::inlier_count() const {
  return static_cast<int>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

MinimalSolution solve_essential_minimal(std::span<const NormalizedCoord> x1,
                                        std::span<const NormalizedCoord> x2) {
  if (x1.size() != x2.size()) {
    throw Error(ErrorCode::invalid_input, "correspondence count mismatch");
  }
  const int n = static_cast<int>(x1.size());
  if (n < 5) {
    throw Error(ErrorCode::insufficient_data, "five correspondences required");
  }
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      if (x1[i].x == x1[j].x && x1[i].y == x1[j].y && x2[i].x == x2[j].x &&
          x2[i].y == x2[j].y) {
        throw Error(ErrorCode::degenerate_configuration,
                    "duplicate correspondence in minimal sample");
      }
    }
  }

  // Epipolar constraint matrix, E vectorized row-major.
  Eigen::MatrixXd q(n, 9);
  for (int i = 0; i < n; ++i) {
    const Vec3 a = x1[i].hom();
    const Vec3 b = x2[i].hom();
    q.row(i) << b.x() * a.x(), b.x() * a.y(), b.x(), b.y() * a.x(),
        b.y() * a.y(), b.y(), a.x(), a.y(), 1.0;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(q, Eigen::ComputeFullV);
  const auto &sv = svd.singularValues();
  if (sv(4) < 1e-12 * sv(0)) {
    throw Error(ErrorCode::degenerate_configuration,
                "rank-deficient epipolar constraint matrix");
  }

  // Mix the nullspace basis with a fixed generic rotation. Structured
  // motions (pure translation in particular) can leave the true solution
  // with a zero coefficient on the affine basis vector, i.e. at infinity in
  // the (x, y, z, 1) chart; mixing removes such alignments.
  static const Eigen::Matrix4d mix = [] {
    Eigen::Matrix4d m;
    m << 0.8147, 0.6324, 0.9575, 0.9572,  //
        0.9058, 0.0975, 0.9649, 0.4854,   //
        0.1270, 0.2785, 0.1576, 0.8003,   //
        0.9134, 0.5469, 0.9706, 0.1419;
    return Eigen::Matrix4d(
        Eigen::HouseholderQR<Eigen::Matrix4d>(m).householderQ());
  }();

  std::array<Mat3, 4> basis;
  for (int b = 0; b < 4; ++b) {
    Mat3 acc = Mat3::Zero();
    for (int j = 0; j < 4; ++j) {
      const Eigen::VectorXd v = svd.matrixV().col(5 + j);
      // Map is column-major; transpose restores row-major vectorization.
      acc += mix(j, b) * Eigen::Map<const Mat3>(v.data()).transpose();
    }
    basis[b] = acc;
  }

  // Entries of E(x, y, z) as linear polynomials.
  std::array<std::array<Poly1, 3>, 3> e;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) {
      e[r][c] = {basis[0](r, c), basis[1](r, c), basis[2](r, c), basis[3](r, c)};
    }
  }

  Eigen::Matrix<double, 10, 20> constraints;
  constraints.setZero();

  // det(E) = 0.
  {
    const Poly2 m01 = sub2(mul11(e[1][1], e[2][2]), mul11(e[1][2], e[2][1]));
    const Poly2 m02 = sub2(mul11(e[1][2], e[2][0]), mul11(e[1][0], e[2][2]));
    const Poly2 m03 = sub2(mul11(e[1][0], e[2][1]), mul11(e[1][1], e[2][0]));
    const Poly3 det = [&] {
      Poly3 acc{};
      const Poly3 t0 = mul21(m01, e[0][0]);
      const Poly3 t1 = mul21(m02, e[0][1]);
      const Poly3 t2 = mul21(m03, e[0][2]);
      for (int i = 0; i < 20; ++i) acc[i] = t0[i] + t1[i] + t2[i];
      return acc;
    }();
    for (int i = 0; i < 20; ++i) constraints(9, i) = det[i];
  }

  // E E^T E - 1/2 tr(E E^T) E = 0, nine entries.
  {
    std::array<std::array<Poly2, 3>, 3> eet;
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        Poly2 acc{};
        for (int k = 0; k < 3; ++k) {
          const Poly2 p = mul11(e[r][k], e[c][k]);
          for (int i = 0; i < 10; ++i) acc[i] += p[i];
        }
        eet[r][c] = acc;
      }
    }
    Poly2 half_trace{};
    for (int i = 0; i < 10; ++i) {
      half_trace[i] = 0.5 * (eet[0][0][i] + eet[1][1][i] + eet[2][2][i]);
    }
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        Poly2 lam = eet[r][c];
        if (r == c) {
          for (int i = 0; i < 10; ++i) lam[i] -= half_trace[i];
        }
        Poly3 acc{};
        for (int k = 0; k < 3; ++k) {
          Poly2 lrk = eet[r][k];
          if (r == k) {
            for (int i = 0; i < 10; ++i) lrk[i] -= half_trace[i];
          }
          const Poly3 p = mul21(lrk, e[k][c]);
          for (int i = 0; i < 20; ++i) acc[i] += p[i];
        }
        for (int i = 0; i < 20; ++i) constraints(3 * r + c, i) = acc[i];
      }
    }
  }

  // Gauss-Jordan elimination of the degree->=2 block.
  const Eigen::Matrix<double, 10, 10> a1 = constraints.leftCols<10>();
  Eigen::FullPivLU<Eigen::Matrix<double, 10, 10>> lu(a1);
  if (lu.rank() < 10) {
    throw Error(ErrorCode::degenerate_configuration,
                "degenerate five-point configuration");
  }
  const Eigen::Matrix<double, 10, 10> m10 = lu.solve(constraints.rightCols<10>());

  const RowKLM k = make_klm(m10, 4, 5);
  const RowKLM l = make_klm(m10, 6, 7);
  const RowKLM m = make_klm(m10, 8, 9);

  const PolyZ p1 = pz_sub(pz_mul(k.y, l.one), pz_mul(k.one, l.y));
  const PolyZ p2 = pz_sub(pz_mul(k.one, l.x), pz_mul(k.x, l.one));
  const PolyZ p3 = pz_sub(pz_mul(k.x, l.y), pz_mul(k.y, l.x));
  const PolyZ n_poly =
      pz_add(pz_add(pz_mul(p1, m.x), pz_mul(p2, m.y)), pz_mul(p3, m.one));

  // Evaluates the ten constraint polynomials and their Jacobian at (x, y, z).
  auto constraint_residuals = [&constraints](const Vec3 &xyz,
                                             Eigen::Matrix<double, 10, 1> *r,
                                             Eigen::Matrix<double, 10, 3> *jac) {
    std::array<double, 20> mono;
    std::array<std::array<double, 20>, 3> dmono{};
    auto powi = [](double v, int e) {
      double acc = 1.0;
      for (int i = 0; i < e; ++i) acc *= v;
      return acc;
    };
    for (int i = 0; i < 20; ++i) {
      const int a = kExp3[i].x, b = kExp3[i].y, c = kExp3[i].z;
      mono[i] = powi(xyz.x(), a) * powi(xyz.y(), b) * powi(xyz.z(), c);
      dmono[0][i] = a > 0 ? a * powi(xyz.x(), a - 1) * powi(xyz.y(), b) *
                                powi(xyz.z(), c)
                          : 0.0;
      dmono[1][i] = b > 0 ? b * powi(xyz.x(), a) * powi(xyz.y(), b - 1) *
                                powi(xyz.z(), c)
                          : 0.0;
      dmono[2][i] = c > 0 ? c * powi(xyz.x(), a) * powi(xyz.y(), b) *
                                powi(xyz.z(), c - 1)
                          : 0.0;
    }
    for (int row = 0; row < 10; ++row) {
      double acc = 0.0;
      Vec3 dacc = Vec3::Zero();
      for (int i = 0; i < 20; ++i) {
        acc += constraints(row, i) * mono[i];
        dacc.x() += constraints(row, i) * dmono[0][i];
        dacc.y() += constraints(row, i) * dmono[1][i];
        dacc.z() += constraints(row, i) * dmono[2][i];
      }
      (*r)(row) = acc;
      if (jac != nullptr) jac->row(row) = dacc.transpose();
    }
  };

  MinimalSolution out;
  for (double z : real_roots(n_poly)) {
    // Least-squares (x, y) from all three eliminated rows; a single 2x2
    // minor degrades near clustered roots.
    Eigen::Matrix<double, 3, 2> rows;
    rows << k.x.eval(z), k.y.eval(z), l.x.eval(z), l.y.eval(z), m.x.eval(z),
        m.y.eval(z);
    Eigen::Vector3d rhs(-k.one.eval(z), -l.one.eval(z), -m.one.eval(z));
    const Eigen::Vector2d xy = rows.colPivHouseholderQr().solve(rhs);
    if (!xy.allFinite()) continue;
    Vec3 xyz(xy.x(), xy.y(), z);

    // Gauss-Newton polish on the full constraint system.
    Eigen::Matrix<double, 10, 1> res;
    Eigen::Matrix<double, 10, 3> jac;
    constraint_residuals(xyz, &res, &jac);
    for (int it = 0; it < 6; ++it) {
      const Vec3 step = jac.colPivHouseholderQr().solve(-res);
      const Vec3 next = xyz + step;
      Eigen::Matrix<double, 10, 1> res_next;
      constraint_residuals(next, &res_next, &jac);
      if (!next.allFinite() || res_next.norm() >= res.norm()) {
        constraint_residuals(xyz, &res, &jac);
        break;
      }
      xyz = next;
      res = res_next;
    }

    const Mat3 cand =
        xyz.x() * basis[0] + xyz.y() * basis[1] + xyz.z() * basis[2] + basis[3];
    if (!(cand.norm() > 1e-12) || !cand.allFinite()) continue;
    const EssentialMatrix em = EssentialMatrix::unit_frobenius(cand);

    // Structural sanity on the normalized candidate.
    if (std::abs(em.m.determinant()) >= 1e-8) continue;
    const Mat3 trace_constraint = em.m * em.m.transpose() * em.m -
                                  0.5 * (em.m * em.m.transpose()).trace() * em.m;
    if (trace_constraint.cwiseAbs().maxCoeff() >= 1e-6) continue;

    // A minimal sample is interpolated exactly; larger sets are fit in the
    // least-squares sense and keep their residual.
    if (n == 5) {
      double max_residual = 0.0;
      for (int i = 0; i < 5; ++i) {
        max_residual = std::max(max_residual, epipolar_residual(em, x1[i], x2[i]));
      }
      if (max_residual >= 1e-8) continue;
    }

    // Polished clustered roots can land on the same solution.
    bool duplicate = false;
    for (const EssentialMatrix &prev : out.candidates) {
      if (std::min((prev.m - em.m).norm(), (prev.m + em.m).norm()) < 1e-9) {
        duplicate = true;
        break;
      }
    }
    if (!duplicate) out.candidates.push_back(em);
  }
  return out;
}

RansacResult ransac_essential(std::span<const Correspondence> matches,
                              const CameraIntrinsics &k1,
                              const CameraIntrinsics &k2,
                              const RansacConfig &cfg) {
  cfg.validate();
  const int n = static_cast<int>(matches.size());
  if (n < 5) {
    throw Error(ErrorCode::insufficient_data,
                "RANSAC needs at least 5 matches, got " + std::to_string(n));
  }

  std::vector<NormalizedCoord> x1(n), x2(n);
  for (int i = 0; i < n; ++i) {
    x1[i] = normalize_pixel(k1, matches[i].view1);
    x2[i] = normalize_pixel(k2, matches[i].view2);
  }

  // Truncated-quadratic (MSAC) score: sum of min(r^2, T^2). Counting alone
  // lets a drifted model win by capturing one extra borderline outlier.
  const double t_sq = cfg.threshold * cfg.threshold;
  auto score_model = [&](const EssentialMatrix &cand, int *count_out,
                         double *rms_out) {
    int count = 0;
    double sq_sum = 0.0;
    double msac = 0.0;
    for (int i = 0; i < n; ++i) {
      const double r = epipolar_residual(cand, x1[i], x2[i]);
      const double r_sq = r * r;
      msac += std::min(r_sq, t_sq);
      if (r <= cfg.threshold) {
        ++count;
        sq_sum += r_sq;
      }
    }
    *count_out = count;
    *rms_out = count > 0 ? std::sqrt(sq_sum / count) : 0.0;
    return msac;
  };

  bool have_best = false;
  EssentialMatrix best_e;
  int best_count = 0;
  double best_rms = 0.0;
  double best_score = 0.0;
  int iterations = 0;

  for (int it = 0; it < cfg.max_iterations; ++it) {
    iterations = it + 1;

    // Per-iteration sample stream depends only on (seed, iteration index).
    std::mt19937_64 rng(splitmix64(cfg.seed ^ (0x9E3779B97F4A7C15ULL *
                                               static_cast<std::uint64_t>(it + 1))));
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::array<int, 5> idx{};
    for (int j = 0; j < 5;) {
      const int candidate = pick(rng);
      bool dup = false;
      for (int p = 0; p < j; ++p) dup = dup || idx[p] == candidate;
      if (!dup) idx[j++] = candidate;
    }

    std::array<NormalizedCoord, 5> s1, s2;
    for (int j = 0; j < 5; ++j) {
      s1[j] = x1[idx[j]];
      s2[j] = x2[idx[j]];
    }

    MinimalSolution sols;
    try {
      sols = solve_essential_minimal(s1, s2);
    } catch (const Error &) {
      continue;
    }

    for (const EssentialMatrix &cand : sols.candidates) {
      int count = 0;
      double rms = 0.0;
      const double msac = score_model(cand, &count, &rms);
      if (count < 5) continue;
      if (!have_best || msac < best_score) {
        have_best = true;
        best_e = cand;
        best_count = count;
        best_rms = rms;
        best_score = msac;
      }
    }

    if (have_best) {
      const double w = static_cast<double>(best_count) / n;
      const double p_sample = std::pow(w, 5);
      if (p_sample >= 1.0) break;
      const double needed =
          std::log(1.0 - cfg.confidence) / std::log(1.0 - p_sample);
      if (static_cast<double>(iterations) >= needed) break;
    }
  }

  if (!have_best) {
    throw Error(ErrorCode::estimation_failure,
                "no model with at least 5 inliers found");
  }

  // Polish: refit on the consensus set (the solver accepts n >= 5 via a
  // least-squares nullspace) and keep the result when it scores at least as
  // well. A minimal-sample model can drift within the threshold band; the
  // refit pins it down.
  {
    std::vector<NormalizedCoord> in1, in2;
    for (int i = 0; i < n; ++i) {
      if (epipolar_residual(best_e, x1[i], x2[i]) <= cfg.threshold) {
        in1.push_back(x1[i]);
        in2.push_back(x2[i]);
      }
    }
    if (in1.size() >= 5) {
      try {
        const MinimalSolution refit = solve_essential_minimal(in1, in2);
        for (const EssentialMatrix &cand : refit.candidates) {
          int count = 0;
          double rms = 0.0;
          const double msac = score_model(cand, &count, &rms);
          if (count < 5) continue;
          if (msac < best_score) {
            best_e = cand;
            best_count = count;
            best_rms = rms;
            best_score = msac;
          }
        }
      } catch (const Error &) {
      }
    }
  }

  RansacResult result;
  result.essential = best_e;
  result.inlier_mask.resize(n);
  double sq_sum = 0.0;
  int count = 0;
  for (int i = 0; i < n; ++i) {
    const double r = epipolar_residual(best_e, x1[i], x2[i]);
    result.inlier_mask[i] = r <= cfg.threshold;
    if (result.inlier_mask[i]) {
      sq_sum += r * r;
      ++count;
    }
  }
  result.iterations_used = iterations;
  result.inlier_residual_rms = count > 0 ? std::sqrt(sq_sum / count) : 0.0;
  return result;
}

TriangulatedPoint triangulate(const NormalizedCoord &p1,
                              const NormalizedCoord &p2, const PoseSE3 &pose) {
  if (!(pose.t.norm() > 1e-12)) {
    throw Error(ErrorCode::no_intersection, "zero baseline");
  }
  Eigen::Matrix<double, 3, 4> cam1 = Eigen::Matrix<double, 3, 4>::Zero();
  cam1.leftCols<3>() = Mat3::Identity();
  Eigen::Matrix<double, 3, 4> cam2;
  cam2.leftCols<3>() = pose.R;
  cam2.col(3) = pose.t;

  Eigen::Matrix4d a;
  a.row(0) = p1.x * cam1.row(2) - cam1.row(0);
  a.row(1) = p1.y * cam1.row(2) - cam1.row(1);
  a.row(2) = p2.x * cam2.row(2) - cam2.row(0);
  a.row(3) = p2.y * cam2.row(2) - cam2.row(1);

  Eigen::JacobiSVD<Eigen::Matrix4d> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d xh = svd.matrixV().col(3);
  const double w = xh(3);
  if (std::abs(w) <= 1e-12 * xh.head<3>().norm()) {
    throw Error(ErrorCode::no_intersection, "rays do not intersect");
  }
  TriangulatedPoint out;
  out.point = xh.head<3>() / w;
  out.depth1 = out.point.z();
  out.depth2 = (pose.R * out.point + pose.t).z();
  return out;
}

PoseSE3 decompose_essential(const EssentialMatrix &e,
                            std::span<const NormalizedCoord> x1,
                            std::span<const NormalizedCoord> x2) {
  if (x1.empty() || x1.size() != x2.size()) {
    throw Error(ErrorCode::ambiguous_decomposition,
                "decomposition needs at least one inlier correspondence");
  }
  Eigen::JacobiSVD<Mat3> svd(e.m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 u = svd.matrixU();
  Mat3 v = svd.matrixV();
  if (u.determinant() < 0.0) u = -u;
  if (v.determinant() < 0.0) v = -v;

  Mat3 w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Mat3 r1 = u * w * v.transpose();
  const Mat3 r2 = u * w.transpose() * v.transpose();
  const Vec3 t = u.col(2);

  const PoseSE3 candidates[4] = {
      {r1, t}, {r1, -t}, {r2, t}, {r2, -t}};

  int best = -1;
  int best_votes = -1;
  int second_votes = -1;
  for (int c = 0; c < 4; ++c) {
    int votes = 0;
    for (size_t i = 0; i < x1.size(); ++i) {
      try {
        const TriangulatedPoint tp = triangulate(x1[i], x2[i], candidates[c]);
        if (tp.depth1 > 0.0 && tp.depth2 > 0.0 && std::isfinite(tp.depth1) &&
            std::isfinite(tp.depth2)) {
          ++votes;
        }
      } catch (const Error &) {
      }
    }
    if (votes > best_votes) {
      second_votes = best_votes;
      best_votes = votes;
      best = c;
    } else if (votes > second_votes) {
      second_votes = votes;
    }
  }

  if (best_votes <= 0 || best_votes == second_votes) {
    throw Error(ErrorCode::ambiguous_decomposition,
                "cheirality vote failed to disambiguate the pose");
  }
  PoseSE3 pose = candidates[best];
  pose.t.normalize();
  return pose;
}

PoseSE3 decompose_essential(const EssentialMatrix &e,
                            std::span<const Correspondence> matches,
                            const CameraIntrinsics &k1,
                            const CameraIntrinsics &k2) {
  std::vector<NormalizedCoord> x1(matches.size()), x2(matches.size());
  for (size_t i = 0; i < matches.size(); ++i) {
    x1[i] = normalize_pixel(k1, matches[i].view1);
    x2[i] = normalize_pixel(k2, matches[i].view2);
  }
  return decompose_essential(e, x1, x2);
}

}  // namespace epigeo
