#include "celldrain/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "celldrain/lp.hpp"

namespace celldrain {

namespace {

constexpr double kDirDedupeTol = 1e-10;
constexpr double kRedundancyTol = 1e-9;

double support_raw(const Eigen::MatrixXd& a, const Eigen::VectorXd& b,
                   const Eigen::VectorXd& direction) {
  const LpResult r = solve_lp_max(direction, a, b);
  switch (r.status) {
    case LpResult::Status::kOptimal:
      return r.value;
    case LpResult::Status::kUnbounded:
      return std::numeric_limits<double>::infinity();
    default:
      throw EmptySetError("support query on an empty set");
  }
}

// Collects unique unit directions, merging near-parallel ones.
class DirectionSet {
 public:
  explicit DirectionSet(int dim) : dim_(dim) {}

  void add(const Eigen::VectorXd& d) {
    const double n = d.norm();
    if (n < 1e-14) return;
    Eigen::VectorXd u = d / n;
    for (const auto& e : dirs_) {
      if (e.dot(u) > 1.0 - kDirDedupeTol) return;
    }
    dirs_.push_back(std::move(u));
  }

  const std::vector<Eigen::VectorXd>& dirs() const { return dirs_; }
  Eigen::MatrixXd matrix() const {
    Eigen::MatrixXd m(dirs_.size(), dim_);
    for (std::size_t i = 0; i < dirs_.size(); ++i) m.row(i) = dirs_[i].transpose();
    return m;
  }

 private:
  int dim_;
  std::vector<Eigen::VectorXd> dirs_;
};

}  // namespace

Polytope::Polytope(Eigen::MatrixXd a, Eigen::VectorXd b)
    : a_(std::move(a)), b_(std::move(b)) {
  if (a_.rows() == 0 || a_.rows() != b_.size()) {
    throw std::invalid_argument("polytope needs matching, nonempty A and b");
  }
  for (Eigen::Index i = 0; i < a_.rows(); ++i) {
    const double n = a_.row(i).norm();
    if (n < 1e-14) throw std::invalid_argument("polytope has a zero row");
    a_.row(i) /= n;
    b_[i] /= n;
  }
  const LpResult feas =
      solve_lp_max(Eigen::VectorXd::Zero(a_.cols()), a_, b_);
  if (feas.status != LpResult::Status::kOptimal) {
    throw EmptySetError("polytope is empty");
  }
  feasible_ = feas.x;
}

Polytope Polytope::box(const Eigen::VectorXd& lo, const Eigen::VectorXd& hi) {
  const int n = static_cast<int>(lo.size());
  if (hi.size() != n) throw std::invalid_argument("box bounds dimension mismatch");
  for (int j = 0; j < n; ++j) {
    if (!(lo[j] <= hi[j])) throw EmptySetError("box has inverted bounds");
  }
  Eigen::MatrixXd a(2 * n, n);
  Eigen::VectorXd b(2 * n);
  a.topRows(n) = Eigen::MatrixXd::Identity(n, n);
  a.bottomRows(n) = -Eigen::MatrixXd::Identity(n, n);
  b.head(n) = hi;
  b.tail(n) = -lo;
  return Polytope(std::move(a), std::move(b));
}

Polytope Polytope::singleton(const Eigen::VectorXd& point) {
  return box(point, point);
}

bool Polytope::contains(const Eigen::VectorXd& x, double tol) const {
  if (x.size() != dim()) throw std::invalid_argument("contains: dimension mismatch");
  return ((a_ * x - b_).array() <= tol).all();
}

double support(const Polytope& p, const Eigen::VectorXd& direction) {
  if (direction.size() != p.dim()) {
    throw std::invalid_argument("support: dimension mismatch");
  }
  if (direction.norm() < 1e-14) {
    throw std::invalid_argument("support: zero direction");
  }
  return support_raw(p.a(), p.b(), direction);
}

Polytope minkowski_sum(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("minkowski_sum: dimension mismatch");

  DirectionSet normals(p.dim());
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) normals.add(p.a().row(i).transpose());
  for (Eigen::Index i = 0; i < q.num_rows(); ++i) normals.add(q.a().row(i).transpose());

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  for (const auto& d : normals.dirs()) {
    const double h = support(p, d) + support(q, d);
    if (std::isfinite(h)) {
      rows.push_back(d);
      offs.push_back(h);
    }
  }
  if (rows.empty()) {
    throw std::invalid_argument("minkowski_sum: unbounded in every merged normal");
  }
  Eigen::MatrixXd a(rows.size(), p.dim());
  Eigen::VectorXd b(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a.row(i) = rows[i].transpose();
    b[i] = offs[i];
  }
  return remove_redundancy(Polytope(std::move(a), std::move(b)));
}

Polytope pontryagin_diff(const Polytope& p, const Polytope& q) {
  if (p.dim() != q.dim()) throw std::invalid_argument("pontryagin_diff: dimension mismatch");

  Eigen::VectorXd b = p.b();
  int worst_row = 0;
  double worst_offset = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < p.num_rows(); ++i) {
    const double h = support(q, p.a().row(i).transpose());
    if (!std::isfinite(h)) {
      throw OverTightenedError("pontryagin_diff: subtrahend unbounded along a face normal",
                               static_cast<int>(i));
    }
    b[i] -= h;
    if (b[i] < worst_offset) {
      worst_offset = b[i];
      worst_row = static_cast<int>(i);
    }
  }
  try {
    return Polytope(p.a(), std::move(b));
  } catch (const EmptySetError&) {
    throw OverTightenedError("pontryagin_diff emptied the set", worst_row);
  }
}

Polytope linear_map(const Eigen::MatrixXd& m, const Polytope& p) {
  const int k = static_cast<int>(m.rows());
  const int n = static_cast<int>(m.cols());
  if (n != p.dim()) throw std::invalid_argument("linear_map: dimension mismatch");

  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  lu.setThreshold(1e-12);
  if (lu.rank() < k) throw std::invalid_argument("linear_map: rank-deficient map");

  if (k == n) {
    // Invertible square map: exact preimage substitution.
    const Eigen::MatrixXd m_inv = lu.inverse();
    return Polytope(p.a() * m_inv, p.b());
  }

  // Lower-dimensional image: support sampling. Exact for 1-D targets.
  DirectionSet dirs(k);
  for (int j = 0; j < k; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
    e[j] = 1.0;
    dirs.add(e);
    dirs.add(-e);
  }
  if (k == 2) {
    for (int j = 0; j < 64; ++j) {
      const double th = 2.0 * M_PI * j / 64.0;
      dirs.add(Eigen::Vector2d(std::cos(th), std::sin(th)));
    }
  } else if (k > 2) {
    // Diagonal fan: all sign patterns, normalized.
    for (int mask = 0; mask < (1 << k); ++mask) {
      Eigen::VectorXd d(k);
      for (int j = 0; j < k; ++j) d[j] = (mask >> j) & 1 ? 1.0 : -1.0;
      dirs.add(d / d.norm());
    }
  }

  std::vector<Eigen::VectorXd> rows;
  std::vector<double> offs;
  for (const auto& d : dirs.dirs()) {
    const double h = support(p, m.transpose() * d);
    if (std::isfinite(h)) {
      rows.push_back(d);
      offs.push_back(h);
    }
  }
  if (rows.empty()) throw std::invalid_argument("linear_map: unbounded image");
  Eigen::MatrixXd a(rows.size(), k);
  Eigen::VectorXd b(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    a.row(i) = rows[i].transpose();
    b[i] = offs[i];
  }
  return remove_redundancy(Polytope(std::move(a), std::move(b)));
}

Polytope cartesian_product(const Polytope& p, const Polytope& q) {
  const int np = p.dim();
  const int nq = q.dim();
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(p.num_rows() + q.num_rows(), np + nq);
  Eigen::VectorXd b(p.num_rows() + q.num_rows());
  a.topLeftCorner(p.num_rows(), np) = p.a();
  a.bottomRightCorner(q.num_rows(), nq) = q.a();
  b.head(p.num_rows()) = p.b();
  b.tail(q.num_rows()) = q.b();
  return Polytope(std::move(a), std::move(b));
}

Polytope remove_redundancy(const Polytope& p) {
  Eigen::MatrixXd a = p.a();
  Eigen::VectorXd b = p.b();

  Eigen::Index i = 0;
  while (i < a.rows() && a.rows() > 1) {
    Eigen::MatrixXd rest_a(a.rows() - 1, a.cols());
    Eigen::VectorXd rest_b(a.rows() - 1);
    rest_a << a.topRows(i), a.bottomRows(a.rows() - i - 1);
    rest_b << b.head(i), b.tail(a.rows() - i - 1);

    const LpResult r = solve_lp_max(a.row(i).transpose(), rest_a, rest_b);
    const bool redundant =
        r.status == LpResult::Status::kOptimal && r.value <= b[i] + kRedundancyTol;
    if (redundant) {
      a = rest_a;
      b = rest_b;
    } else {
      ++i;
    }
  }
  return Polytope(std::move(a), std::move(b));
}

Eigen::VectorXd chebyshev_center(const Polytope& p) {
  const int n = p.dim();
  Eigen::MatrixXd a(p.num_rows(), n + 1);
  a.leftCols(n) = p.a();
  a.col(n).setOnes();  // rows are unit-norm, so the radius enters with 1
  Eigen::VectorXd c = Eigen::VectorXd::Zero(n + 1);
  c[n] = 1.0;
  const LpResult r = solve_lp_max(c, a, p.b());
  if (r.status != LpResult::Status::kOptimal) {
    throw std::invalid_argument("chebyshev_center requires a bounded set");
  }
  return r.x.head(n);
}

RpiResult compute_mrpi(const Eigen::MatrixXd& a_k, const Polytope& w_set,
                       double epsilon, int s_cap) {
  const int n = static_cast<int>(a_k.rows());
  if (a_k.cols() != n) throw std::invalid_argument("compute_mrpi: a_k must be square");
  if (w_set.dim() != n) throw std::invalid_argument("compute_mrpi: dimension mismatch");
  if (!(epsilon > 0.0)) throw std::invalid_argument("compute_mrpi: epsilon must be positive");

  const double rho = a_k.eigenvalues().cwiseAbs().maxCoeff();
  if (!(rho < 1.0)) {
    throw std::invalid_argument("compute_mrpi: a_k is not Schur-stable");
  }

  auto h_w = [&](const Eigen::VectorXd& d) {
    return d.norm() < 1e-14 ? 0.0 : support(w_set, d);
  };

  // Degenerate disturbance set {0}: the tube collapses to the origin.
  {
    double radius = 0.0;
    for (int j = 0; j < n; ++j) {
      Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
      e[j] = 1.0;
      radius = std::max({radius, h_w(e), h_w(-e)});
    }
    if (radius <= 1e-12) {
      return RpiResult{Polytope::singleton(Eigen::VectorXd::Zero(n)), 1, 0.0, 0.0};
    }
  }
  if ((w_set.b().array() <= 1e-12).any()) {
    throw std::invalid_argument("compute_mrpi: w_set must contain the origin in its interior");
  }

  // Truncation search: smallest s with a_k^s W inside alpha(s) W and
  // alpha(s) <= eps / (eps + M(s)).
  std::vector<Eigen::MatrixXd> powers;  // a_k^0 .. a_k^s
  powers.push_back(Eigen::MatrixXd::Identity(n, n));
  Eigen::VectorXd sum_pos = Eigen::VectorXd::Zero(n);
  Eigen::VectorXd sum_neg = Eigen::VectorXd::Zero(n);

  int s = 0;
  double alpha = 0.0;
  double m_of_s = 0.0;
  for (;;) {
    // Accumulate the interval-hull bound M(s) with the term for power s.
    const Eigen::MatrixXd& a_pow = powers.back();
    for (int j = 0; j < n; ++j) {
      sum_pos[j] += h_w(a_pow.row(j).transpose());
      sum_neg[j] += h_w(-a_pow.row(j).transpose());
    }
    ++s;
    powers.push_back(a_pow * a_k);

    alpha = 0.0;
    for (Eigen::Index i = 0; i < w_set.num_rows(); ++i) {
      const Eigen::VectorXd d =
          powers.back().transpose() * w_set.a().row(i).transpose();
      alpha = std::max(alpha, h_w(d) / w_set.b()[i]);  // h_w(0) = 0: nilpotent ok
    }
    m_of_s = std::max(sum_pos.maxCoeff(), sum_neg.maxCoeff());
    if (alpha <= epsilon / (epsilon + m_of_s)) break;
    if (s >= s_cap) {
      throw ConvergenceError("compute_mrpi: truncation index exceeded cap");
    }
  }

  // Output directions: the axes plus the transpose-orbit of the axes, which
  // keeps the polyhedral outer approximation tight where invariance needs it.
  DirectionSet dirs(n);
  const int orbit_depth = std::min(s, 25);
  for (int j = 0; j < n; ++j) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e[j] = 1.0;
    for (const double sign : {1.0, -1.0}) {
      Eigen::VectorXd d = sign * e;
      dirs.add(d);
      for (int k = 1; k <= orbit_depth; ++k) {
        d = a_k.transpose() * d;
        dirs.add(d);
      }
    }
  }

  auto h_fs = [&](const Eigen::VectorXd& d) {
    double h = 0.0;
    for (int i = 0; i < s; ++i) h += h_w(powers[i].transpose() * d);
    return h;
  };

  const double scale = 1.0 / (1.0 - alpha);
  Eigen::MatrixXd ra = dirs.matrix();
  Eigen::VectorXd rb(ra.rows());
  for (Eigen::Index i = 0; i < ra.rows(); ++i) {
    rb[i] = scale * h_fs(ra.row(i).transpose());
  }

  {
    const Polytope pruned = remove_redundancy(Polytope(ra, rb));
    ra = pruned.a();
    rb = pruned.b();
  }

  // Invariance repair: lift offsets until every face satisfies
  // h_R(a_k' d) + h_W(d) <= b. Monotone and bounded; normally converges in
  // one or two sweeps because the orbit directions are already present.
  const double b_budget = 1e6 * (rb.cwiseAbs().maxCoeff() + 1.0);
  bool changed = true;
  int sweeps = 0;
  while (changed) {
    if (++sweeps > 200) {
      throw ConvergenceError("compute_mrpi: invariance repair did not converge");
    }
    changed = false;
    for (Eigen::Index i = 0; i < ra.rows(); ++i) {
      const Eigen::VectorXd d = ra.row(i).transpose();
      const double lhs = support_raw(ra, rb, a_k.transpose() * d) + h_w(d);
      if (lhs > rb[i] + 1e-13 * std::max(1.0, std::abs(rb[i]))) {
        rb[i] = lhs;
        changed = true;
        if (rb[i] > b_budget) {
          throw ConvergenceError("compute_mrpi: invariance repair diverged");
        }
      }
    }
  }
  rb *= 1.0 + 1e-9;

  Polytope r_set(std::move(ra), std::move(rb));

  // Checked postcondition: Definition-1 containment, row by row.
  for (Eigen::Index i = 0; i < r_set.num_rows(); ++i) {
    const Eigen::VectorXd d = r_set.a().row(i).transpose();
    const Eigen::VectorXd mapped = a_k.transpose() * d;
    const double h_r = mapped.norm() < 1e-14
                           ? 0.0
                           : support_raw(r_set.a(), r_set.b(), mapped);
    if (h_r + h_w(d) > r_set.b()[i] + 1e-9) {
      throw ConvergenceError("compute_mrpi: invariance verification failed");
    }
  }

  return RpiResult{std::move(r_set), s, alpha, alpha * m_of_s / (1.0 - alpha)};
}

}  // namespace celldrain
