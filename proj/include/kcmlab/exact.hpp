#pragma once

// Exact computations on the full state space {0,1}^region: the KCM generator,
// its spectral gap, mean hitting times of {origin empty}, Dirichlet forms and
// the proxy-function lower bound on E_mu(tau0).
//
// States are bitmasks: bit i holds the value of region site i (1 = occupied).
// All spectral work is done on the symmetrized matrix
// S = D^{1/2} (-L) D^{-1/2}, D = diag(mu), which is symmetric by reversibility.

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <cmath>
#include <deque>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "kcmlab/constraints.hpp"

namespace kcmlab {

inline constexpr std::size_t kMaxGeneratorSites = 14;

/// Sparse generator of the KCM on a finite region with a fixed exterior.
class GeneratorOperator {
 public:
  GeneratorOperator(const UpdateFamily& family, const Region& region, const Exterior& exterior, double q)
      : region_(region), q_(q) {
    if (!(q > 0.0 && q < 1.0)) throw Error("q must lie in (0, 1)");
    n_ = region.size();
    if (n_ > kMaxGeneratorSites)
      throw Error("state space 2^" + std::to_string(n_) + " exceeds the cap 2^" + std::to_string(kMaxGeneratorSites));
    dim_ = std::size_t{1} << n_;
    const ConstraintTable table(family, region, exterior);
    auto o = region.index_of(kOrigin);
    origin_ = o == Region::npos ? -1 : static_cast<int>(o);

    const double p = 1.0 - q;
    mu_.resize(static_cast<Eigen::Index>(dim_));
    cx_.assign(dim_, 0);
    std::vector<std::uint8_t> values(n_);
    std::vector<Eigen::Triplet<double>> entries;
    for (std::size_t s = 0; s < dim_; ++s) {
      int ones = 0;
      for (std::size_t i = 0; i < n_; ++i) {
        values[i] = static_cast<std::uint8_t>((s >> i) & 1u);
        ones += values[i];
      }
      mu_[static_cast<Eigen::Index>(s)] = std::pow(p, ones) * std::pow(q, static_cast<int>(n_) - ones);
      double out = 0.0;
      for (std::size_t i = 0; i < n_; ++i) {
        if (!table.satisfied(i, values)) continue;
        cx_[s] |= std::uint32_t{1} << i;
        const double rate = values[i] ? q : p;
        entries.emplace_back(static_cast<int>(s), static_cast<int>(s ^ (std::size_t{1} << i)), rate);
        out += rate;
      }
      if (out > 0.0) entries.emplace_back(static_cast<int>(s), static_cast<int>(s), -out);
    }
    L_.resize(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
    L_.setFromTriplets(entries.begin(), entries.end());
    L_.makeCompressed();
  }

  const Region& region() const { return region_; }
  double q() const { return q_; }
  std::size_t sites() const { return n_; }
  std::size_t dim() const { return dim_; }
  /// Index of the origin among region sites, or -1.
  int origin() const { return origin_; }
  const Eigen::SparseMatrix<double, Eigen::RowMajor>& matrix() const { return L_; }
  const Eigen::VectorXd& mu() const { return mu_; }
  /// Bit i set iff c_i holds in state s.
  std::uint32_t constraints(std::size_t s) const { return cx_[s]; }
  bool in_target(std::size_t s) const { return origin_ >= 0 && ((s >> origin_) & 1u) == 0; }
  std::size_t all_occupied() const { return dim_ - 1; }

 private:
  Region region_;
  double q_;
  std::size_t n_ = 0, dim_ = 0;
  int origin_ = -1;
  Eigen::SparseMatrix<double, Eigen::RowMajor> L_;
  Eigen::VectorXd mu_;
  std::vector<std::uint32_t> cx_;
};

inline GeneratorOperator build_generator(const UpdateFamily& family, const Region& region, const Exterior& exterior,
                                         double q) {
  return GeneratorOperator(family, region, exterior, q);
}

/// Connected components of the transition graph (symmetric by reversibility).
inline std::vector<int> components(const GeneratorOperator& gen, int* count = nullptr) {
  std::vector<int> comp(gen.dim(), -1);
  int c = 0;
  const auto& L = gen.matrix();
  std::vector<std::size_t> stack;
  for (std::size_t s0 = 0; s0 < gen.dim(); ++s0) {
    if (comp[s0] >= 0) continue;
    comp[s0] = c;
    stack.assign(1, s0);
    while (!stack.empty()) {
      auto s = stack.back();
      stack.pop_back();
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(L, static_cast<Eigen::Index>(s)); it; ++it) {
        auto t = static_cast<std::size_t>(it.col());
        if (t != s && comp[t] < 0) {
          comp[t] = c;
          stack.push_back(t);
        }
      }
    }
    ++c;
  }
  if (count) *count = c;
  return comp;
}

struct GapResult {
  double gap = 0.0;
  double t_rel = 0.0;
  double residual = 0.0;  // ||S v - gap v|| for the unit eigenvector v
  std::size_t component_size = 0;
  int component_count = 0;
  std::string method;
};

namespace detail {

/// Symmetrized -L restricted to the listed states.
inline Eigen::SparseMatrix<double> symmetrized(const GeneratorOperator& gen, const std::vector<std::size_t>& states,
                                               const std::vector<int>& local) {
  const auto& L = gen.matrix();
  const auto& mu = gen.mu();
  std::vector<Eigen::Triplet<double>> entries;
  for (std::size_t a = 0; a < states.size(); ++a) {
    auto s = states[a];
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(L, static_cast<Eigen::Index>(s)); it; ++it) {
      auto t = static_cast<std::size_t>(it.col());
      if (local[t] < 0) continue;
      double v = -it.value() * std::sqrt(mu[static_cast<Eigen::Index>(s)] / mu[static_cast<Eigen::Index>(t)]);
      entries.emplace_back(static_cast<int>(a), local[t], v);
    }
  }
  Eigen::SparseMatrix<double> S(static_cast<Eigen::Index>(states.size()), static_cast<Eigen::Index>(states.size()));
  S.setFromTriplets(entries.begin(), entries.end());
  // Average with the transpose to remove rounding asymmetry.
  Eigen::SparseMatrix<double> St = S.transpose();
  return 0.5 * (S + St);
}

/// Smallest eigenpair of the symmetric PSD matrix S on the orthogonal
/// complement of the unit vector `null`, by Lanczos with full
/// reorthogonalization.
inline std::pair<double, Eigen::VectorXd> lanczos_smallest(const Eigen::SparseMatrix<double>& S,
                                                           const Eigen::VectorXd& null, double tol,
                                                           std::size_t max_iter) {
  const auto n = S.rows();
  max_iter = std::min<std::size_t>(max_iter, static_cast<std::size_t>(n - 1));
  // The basis grows on demand so large, quickly converging runs stay small.
  Eigen::MatrixXd V(n, static_cast<Eigen::Index>(std::min<std::size_t>(max_iter + 1, 128)));
  std::vector<double> alpha, beta;
  Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(n, 1.0, 2.0).cwiseSqrt();
  for (Eigen::Index i = 0; i < n; ++i) v[i] += std::sin(3.0 * static_cast<double>(i));
  v -= null.dot(v) * null;
  v.normalize();
  V.col(0) = v;
  double best = 0.0;
  Eigen::VectorXd best_vec;
  for (std::size_t k = 0; k < max_iter; ++k) {
    Eigen::VectorXd w = S * V.col(static_cast<Eigen::Index>(k));
    alpha.push_back(w.dot(V.col(static_cast<Eigen::Index>(k))));
    // Full reorthogonalization (twice) against the basis and the null vector.
    for (int pass = 0; pass < 2; ++pass) {
      auto basis = V.leftCols(static_cast<Eigen::Index>(k + 1));
      w -= basis * (basis.transpose() * w);
      w -= null.dot(w) * null;
    }
    double b = w.norm();
    const auto m = static_cast<Eigen::Index>(alpha.size());
    if ((k + 1) % 10 == 0 || b < 1e-13 || k + 1 == max_iter) {
      Eigen::VectorXd diag = Eigen::Map<const Eigen::VectorXd>(alpha.data(), m);
      Eigen::VectorXd sub = Eigen::Map<const Eigen::VectorXd>(beta.data(), m - 1);
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es;
      es.computeFromTridiagonal(diag, sub);
      best = es.eigenvalues()[0];
      best_vec = V.leftCols(m) * es.eigenvectors().col(0);
      best_vec.normalize();
      double res = (S * best_vec - best * best_vec).norm();
      if (res <= tol * std::max(1.0, std::abs(best)) || b < 1e-13) return {best, best_vec};
    }
    if (b < 1e-13) break;
    beta.push_back(b);
    if (static_cast<Eigen::Index>(k + 1) >= V.cols())
      V.conservativeResize(Eigen::NoChange, static_cast<Eigen::Index>(std::min<std::size_t>(2 * V.cols(), max_iter + 1)));
    V.col(static_cast<Eigen::Index>(k + 1)) = w / b;
  }
  return {best, best_vec};
}

}  // namespace detail

inline constexpr std::size_t kDenseGapLimit = 2048;

/// Smallest nonzero eigenvalue of -L on the ergodic component of the
/// all-occupied state.
inline GapResult spectral_gap(const GeneratorOperator& gen, double tol = 1e-10) {
  GapResult r;
  auto comp = components(gen, &r.component_count);
  const int target = comp[gen.all_occupied()];
  std::vector<std::size_t> states;
  std::vector<int> local(gen.dim(), -1);
  for (std::size_t s = 0; s < gen.dim(); ++s)
    if (comp[s] == target) {
      local[s] = static_cast<int>(states.size());
      states.push_back(s);
    }
  r.component_size = states.size();
  if (states.size() < 2) throw Error("ergodic component of the all-occupied state is a single state; no gap");
  auto S = detail::symmetrized(gen, states, local);
  Eigen::VectorXd null(static_cast<Eigen::Index>(states.size()));
  for (std::size_t a = 0; a < states.size(); ++a) null[static_cast<Eigen::Index>(a)] = std::sqrt(gen.mu()[static_cast<Eigen::Index>(states[a])]);
  null.normalize();

  Eigen::VectorXd vec;
  if (states.size() <= kDenseGapLimit) {
    Eigen::MatrixXd dense = Eigen::MatrixXd(S);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(dense);
    if (es.info() != Eigen::Success) throw Error("dense eigensolver failed");
    // The component is irreducible, so 0 is simple and sits first.
    r.gap = es.eigenvalues()[1];
    vec = es.eigenvectors().col(1);
    r.method = "dense";
  } else {
    auto [val, v] = detail::lanczos_smallest(S, null, tol, 3000);
    r.gap = val;
    vec = v;
    r.method = "lanczos";
  }
  r.residual = (S * vec - r.gap * vec).norm();
  if (r.residual > std::max(tol, 1e-8) * std::max(1.0, r.gap))
    throw Error("eigensolver did not converge (residual " + std::to_string(r.residual) + ")");
  if (!(r.gap > 0.0)) throw Error("computed gap is not positive");
  r.t_rel = 1.0 / r.gap;
  return r;
}

struct HittingTimes {
  std::vector<double> per_state;  // E_omega(tau0); 0 on the target
  double e_mu_tau0 = 0.0;
  double residual = 0.0;  // max_i |((-L_A) u - 1)_i| / (||L_A||_inf ||u||_inf + 1)
};

/// Mean hitting time of A = {origin empty} from every state.
inline HittingTimes mean_hitting(const GeneratorOperator& gen) {
  if (gen.origin() < 0) throw Error("origin not in region");
  const auto dim = gen.dim();
  const auto& L = gen.matrix();
  // Backward search from A over reversed edges (the graph is symmetric).
  std::vector<char> reach(dim, 0);
  std::deque<std::size_t> queue;
  for (std::size_t s = 0; s < dim; ++s)
    if (gen.in_target(s)) {
      reach[s] = 1;
      queue.push_back(s);
    }
  while (!queue.empty()) {
    auto s = queue.front();
    queue.pop_front();
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(L, static_cast<Eigen::Index>(s)); it; ++it) {
      auto t = static_cast<std::size_t>(it.col());
      if (!reach[t]) {
        reach[t] = 1;
        queue.push_back(t);
      }
    }
  }
  std::vector<std::size_t> unreachable;
  for (std::size_t s = 0; s < dim; ++s)
    if (!reach[s]) unreachable.push_back(s);
  if (!unreachable.empty()) {
    std::string list;
    for (std::size_t k = 0; k < std::min<std::size_t>(unreachable.size(), 8); ++k)
      list += (k ? "," : "") + std::to_string(unreachable[k]);
    throw Error(std::to_string(unreachable.size()) + " state(s) cannot reach the target, e.g. masks " + list);
  }

  std::vector<std::size_t> states;
  std::vector<int> local(dim, -1);
  for (std::size_t s = 0; s < dim; ++s)
    if (!gen.in_target(s)) {
      local[s] = static_cast<int>(states.size());
      states.push_back(s);
    }
  HittingTimes out;
  out.per_state.assign(dim, 0.0);
  if (states.empty()) return out;
  auto S = detail::symmetrized(gen, states, local);
  const auto m = static_cast<Eigen::Index>(states.size());
  Eigen::VectorXd rhs(m), sqrt_mu(m);
  for (Eigen::Index a = 0; a < m; ++a) {
    sqrt_mu[a] = std::sqrt(gen.mu()[static_cast<Eigen::Index>(states[static_cast<std::size_t>(a)])]);
    rhs[a] = sqrt_mu[a];
  }
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> solver(S);
  if (solver.info() != Eigen::Success) throw Error("factorization of the killed generator failed");
  Eigen::VectorXd w = solver.solve(rhs);
  Eigen::VectorXd u = w.cwiseQuotient(sqrt_mu);

  // Residual in the original (unsymmetrized) system.
  double res = 0.0, norm_l = 0.0;
  for (Eigen::Index a = 0; a < m; ++a) {
    auto s = states[static_cast<std::size_t>(a)];
    double row = 0.0, abs_row = 0.0;
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(L, static_cast<Eigen::Index>(s)); it; ++it) {
      auto t = static_cast<std::size_t>(it.col());
      abs_row += std::abs(it.value());
      if (local[t] >= 0) row -= it.value() * u[local[t]];
    }
    norm_l = std::max(norm_l, abs_row);
    res = std::max(res, std::abs(row - 1.0));
  }
  out.residual = res / (norm_l * u.cwiseAbs().maxCoeff() + 1.0);
  if (!(out.residual <= 1e-10)) throw Error("hitting-time solve residual " + std::to_string(out.residual) + " above 1e-10");
  for (Eigen::Index a = 0; a < m; ++a) {
    auto s = states[static_cast<std::size_t>(a)];
    out.per_state[s] = u[a];
    out.e_mu_tau0 += gen.mu()[static_cast<Eigen::Index>(s)] * u[a];
  }
  return out;
}

/// Real function on the state space of a generator.
struct TestFunctionTable {
  std::vector<double> values;
  bool normalized = false;    // mu(f^2) == 1
  bool vanishes_on_target = false;

  static TestFunctionTable from_values(const GeneratorOperator& gen, std::vector<double> v) {
    if (v.size() != gen.dim()) throw Error("test function size differs from state-space size");
    TestFunctionTable f{std::move(v)};
    f.refresh(gen);
    return f;
  }

  void refresh(const GeneratorOperator& gen) {
    double m2 = 0.0;
    bool vanish = gen.origin() >= 0;
    for (std::size_t s = 0; s < values.size(); ++s) {
      if (!std::isfinite(values[s])) throw Error("test function has a non-finite value");
      m2 += gen.mu()[static_cast<Eigen::Index>(s)] * values[s] * values[s];
      if (gen.in_target(s) && values[s] != 0.0) vanish = false;
    }
    normalized = std::abs(m2 - 1.0) < 1e-12;
    vanishes_on_target = vanish;
  }

  /// Rescaled so that mu(f^2) = 1.
  TestFunctionTable normalized_copy(const GeneratorOperator& gen) const {
    double m2 = 0.0;
    for (std::size_t s = 0; s < values.size(); ++s) m2 += gen.mu()[static_cast<Eigen::Index>(s)] * values[s] * values[s];
    if (!(m2 > 0.0)) throw Error("cannot normalize the zero function");
    auto out = *this;
    for (auto& v : out.values) v /= std::sqrt(m2);
    out.refresh(gen);
    return out;
  }
};

/// Indicator of "no empty site in the region".
inline TestFunctionTable no_empties_indicator(const GeneratorOperator& gen) {
  std::vector<double> v(gen.dim(), 0.0);
  v[gen.all_occupied()] = 1.0;
  return TestFunctionTable::from_values(gen, std::move(v));
}

/// Indicator of the complement of {origin empty}.
inline TestFunctionTable origin_occupied_indicator(const GeneratorOperator& gen) {
  std::vector<double> v(gen.dim(), 0.0);
  for (std::size_t s = 0; s < gen.dim(); ++s) v[s] = gen.in_target(s) ? 0.0 : 1.0;
  return TestFunctionTable::from_values(gen, std::move(v));
}

struct DirichletResult {
  double dirichlet = 0.0;
  double variance = 0.0;
  double mean = 0.0;
  std::optional<double> poincare_ratio;  // Var / D when D > 0
};

/// D(f) = sum_omega mu(omega) sum_x c_x(omega) p q (f(omega^{x,1}) - f(omega^{x,0}))^2.
inline DirichletResult dirichlet_form(const GeneratorOperator& gen, const TestFunctionTable& f) {
  if (f.values.size() != gen.dim()) throw Error("test function size differs from state-space size");
  const double q = gen.q(), p = 1.0 - q;
  DirichletResult r;
  double m2 = 0.0;
  for (std::size_t s = 0; s < gen.dim(); ++s) {
    const double w = gen.mu()[static_cast<Eigen::Index>(s)];
    r.mean += w * f.values[s];
    m2 += w * f.values[s] * f.values[s];
    const auto c = gen.constraints(s);
    for (std::size_t i = 0; i < gen.sites(); ++i) {
      if (!((c >> i) & 1u)) continue;
      const double diff = f.values[s | (std::size_t{1} << i)] - f.values[s & ~(std::size_t{1} << i)];
      r.dirichlet += w * p * q * diff * diff;
    }
  }
  r.variance = std::max(0.0, m2 - r.mean * r.mean);
  if (r.dirichlet > 0.0) r.poincare_ratio = r.variance / r.dirichlet;
  return r;
}

struct ProxyPoint {
  double T = 0.0;
  double bound = 0.0;
  bool holds = false;
};

struct ProxyReport {
  double mean = 0.0;       // mu(phi) after normalization
  double dirichlet = 0.0;  // D(phi) after normalization
  double e_mu_tau0 = 0.0;
  ProxyPoint at_t_star;
  double figure = 0.0;  // mu(phi)^4 / D(phi)
  double slack = 0.0;   // E_mu(tau0) - bound(T*)
  std::vector<ProxyPoint> grid;
  bool all_hold = false;
};

/// T |m| (|m| e^{-T D} - (T D)^{1/2}).
inline double proxy_bound(double T, double m, double D) {
  return T * std::abs(m) * (std::abs(m) * std::exp(-T * D) - std::sqrt(T * D));
}

/// 20 geometric points from T*/100 to 100 T*.
inline std::vector<double> default_proxy_grid(double t_star) {
  std::vector<double> g;
  for (int k = 0; k < 20; ++k) g.push_back(t_star * std::pow(10.0, -2.0 + 4.0 * k / 19.0));
  return g;
}

/// Checks E_mu(tau0) >= bound(T) for every T (tolerance `tol` relative to
/// max(1, E_mu(tau0))). An empty grid means the default grid around T*.
inline ProxyReport check_proxy_bound(const GeneratorOperator& gen, const TestFunctionTable& phi,
                                     std::vector<double> grid = {}, double tol = 1e-9) {
  if (!phi.vanishes_on_target) throw Error("test function does not vanish on {origin empty}");
  auto f = phi.normalized_copy(gen);
  auto d = dirichlet_form(gen, f);
  if (!(d.dirichlet > 0.0)) throw Error("D(phi) = 0: test function is constant on the dynamics");
  ProxyReport rep;
  rep.mean = d.mean;
  rep.dirichlet = d.dirichlet;
  rep.e_mu_tau0 = mean_hitting(gen).e_mu_tau0;
  const double t_star = d.mean * d.mean / (16.0 * d.dirichlet);
  const double slack_tol = tol * std::max(1.0, rep.e_mu_tau0);
  auto point = [&](double T) {
    ProxyPoint pt{T, proxy_bound(T, d.mean, d.dirichlet), false};
    pt.holds = pt.bound <= rep.e_mu_tau0 + slack_tol;
    return pt;
  };
  rep.at_t_star = point(t_star);
  rep.figure = std::pow(d.mean, 4) / d.dirichlet;
  rep.slack = rep.e_mu_tau0 - rep.at_t_star.bound;
  if (grid.empty()) grid = default_proxy_grid(t_star);
  rep.all_hold = rep.at_t_star.holds;
  for (double T : grid) {
    rep.grid.push_back(point(T));
    rep.all_hold = rep.all_hold && rep.grid.back().holds;
  }
  return rep;
}

/// Row `from` of exp(t L), by eigendecomposition of the symmetrized generator.
inline std::vector<double> transition_row(const GeneratorOperator& gen, std::size_t from, double t) {
  if (gen.dim() > 4096) throw Error("transition_row is limited to 4096 states");
  std::vector<std::size_t> states(gen.dim());
  std::vector<int> local(gen.dim());
  for (std::size_t s = 0; s < gen.dim(); ++s) {
    states[s] = s;
    local[s] = static_cast<int>(s);
  }
  Eigen::MatrixXd S = Eigen::MatrixXd(detail::symmetrized(gen, states, local));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(S);
  const auto& V = es.eigenvectors();
  Eigen::VectorXd decay = (-t * es.eigenvalues().array()).exp();
  Eigen::VectorXd row = V * decay.cwiseProduct(V.row(static_cast<Eigen::Index>(from)).transpose());
  std::vector<double> out(gen.dim());
  const auto& mu = gen.mu();
  for (std::size_t s = 0; s < gen.dim(); ++s)
    out[s] = std::max(0.0, row[static_cast<Eigen::Index>(s)] *
                               std::sqrt(mu[static_cast<Eigen::Index>(s)] / mu[static_cast<Eigen::Index>(from)]));
  return out;
}

struct ExactReport {
  GapResult gap;
  HittingTimes hitting;
  bool ratio_check = false;  // q E_mu(tau0) <= T_rel
};

inline ExactReport exact_report(const GeneratorOperator& gen) {
  ExactReport r;
  r.gap = spectral_gap(gen);
  r.hitting = mean_hitting(gen);
  r.ratio_check = gen.q() * r.hitting.e_mu_tau0 <= r.gap.t_rel;
  return r;
}

inline nlohmann::json to_json(const ExactReport& r) {
  return {{"gap", r.gap.gap},
          {"t_rel", r.gap.t_rel},
          {"e_mu_tau0", r.hitting.e_mu_tau0},
          {"ratio_check", r.ratio_check},
          {"residuals", {{"gap", r.gap.residual}, {"hitting", r.hitting.residual}}},
          {"component_size", r.gap.component_size},
          {"components", r.gap.component_count},
          {"method", r.gap.method}};
}

}  // namespace kcmlab
