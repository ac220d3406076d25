#pragma once

// Benchmark harness: problem instances, method dispatch, error metrics and
// CSV emission for the tables and figures.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <memory>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "oscil/baselines.hpp"
#include "oscil/error.hpp"
#include "oscil/hbvm.hpp"
#include "oscil/linalg.hpp"
#include "oscil/polybasis.hpp"
#include "oscil/problems.hpp"
#include "oscil/truncation.hpp"

namespace oscil {

inline constexpr std::string_view kCsvHeader = "N,time_s,e_q,e_p,e_H,rate_q,rate_p,rate_H,s0,s,k";

struct RunConfig {
  std::string problem = "duffing";
  std::string method = "shbvm";
  std::size_t N = 1000;
  std::optional<double> t_end;  // problem default when absent
  std::optional<double> nu;
  std::optional<double> omega;  // absent means auto
  double u = kUnitRoundoff;
  std::string out_path;
};

struct BenchRecord {
  std::string problem;
  std::string method;
  std::size_t N = 0;
  double t_end = 0.0;
  double wall_time_s = 0.0;
  double e_q = 0.0;
  double e_p = 0.0;  // velocity error for second-order problems
  double e_y = 0.0;  // first-order (q, p) variables
  double e_H = 0.0;  // relative
  double e_H_abs = 0.0;
  std::optional<SpectralParams> params;
  std::optional<double> rate_q, rate_p, rate_H;
  bool rate_generalized = false;
};

// ---------------------------------------------------------------------------
// Problems

/// A benchmark problem in first-order form plus what is needed to score it.
struct ProblemInstance {
  std::string name;
  HamiltonianSystem sys;
  Vector y0;
  double t_end = 1.0;
  std::optional<SecondOrderProblem> second_order;
  std::function<Vector(double)> exact;  // first-order state at t, when known
};

inline ProblemInstance duffing_instance(double kappa = 7.0, double beta = 500.0) {
  ProblemInstance p;
  p.name = "duffing";
  p.second_order = duffing(kappa, beta);
  p.sys = to_first_order(*p.second_order);
  p.y0 = to_scaled_state(p.second_order->A, p.second_order->q0, p.second_order->v0);
  p.t_end = 20.0;
  const double a = p.second_order->A(0, 0);
  p.exact = [kappa, beta, a](double t) {
    const auto [q, v] = duffing_exact(t, kappa, beta);
    return Vector{q, v / a};
  };
  return p;
}

inline ProblemInstance fpu_instance() {
  ProblemInstance p;
  p.name = "fpu";
  p.second_order = fpu_default();
  p.sys = to_first_order(*p.second_order);
  p.y0 = to_scaled_state(p.second_order->A, p.second_order->q0, p.second_order->v0);
  p.t_end = 10.0;
  return p;
}

inline ProblemInstance nls_instance(std::size_t r = 20, double kappa = std::numbers::pi / 10.0) {
  ProblemInstance p;
  p.name = "nls";
  p.sys = nls(r, kappa);
  p.y0 = nls_exact(0.0, r, kappa);
  p.t_end = 5.0;
  p.exact = [r, kappa](double t) { return nls_exact(t, r, kappa); };
  return p;
}

inline ProblemInstance make_problem(std::string_view name) {
  if (name == "duffing") return duffing_instance();
  if (name == "fpu") return fpu_instance();
  if (name == "nls") return nls_instance();
  throw Error(ErrorKind::UnknownProblem, std::string(name));
}

// ---------------------------------------------------------------------------
// Methods

struct MethodSpec {
  enum class Kind { StormerVerlet, Gautschi, Deuflhard, Gauss, Shbvm };
  Kind kind = Kind::Shbvm;
  std::size_t stages = 0;  // Gauss only

  [[nodiscard]] bool classical() const noexcept {
    return kind == Kind::StormerVerlet || kind == Kind::Gautschi || kind == Kind::Deuflhard;
  }
};

/// sv, gautschi, deuflhard, gauss-<s>, shbvm
inline MethodSpec parse_method(std::string_view name) {
  MethodSpec m;
  if (name == "sv") {
    m.kind = MethodSpec::Kind::StormerVerlet;
  } else if (name == "gautschi") {
    m.kind = MethodSpec::Kind::Gautschi;
  } else if (name == "deuflhard") {
    m.kind = MethodSpec::Kind::Deuflhard;
  } else if (name == "shbvm") {
    m.kind = MethodSpec::Kind::Shbvm;
  } else if (name.starts_with("gauss-") && name.size() > 6) {
    std::size_t s = 0;
    for (char c : name.substr(6)) {
      if (c < '0' || c > '9') throw Error(ErrorKind::UnknownMethod, std::string(name));
      s = 10 * s + static_cast<std::size_t>(c - '0');
      if (s > 512) throw Error(ErrorKind::UnknownMethod, std::string(name));
    }
    if (s == 0) throw Error(ErrorKind::UnknownMethod, std::string(name));
    m.kind = MethodSpec::Kind::Gauss;
    m.stages = s;
  } else {
    throw Error(ErrorKind::UnknownMethod, std::string(name));
  }
  return m;
}

// ---------------------------------------------------------------------------
// Errors

struct ErrorSummary {
  double e_q = 0.0;
  double e_p = 0.0;
  double e_y = 0.0;
  double e_H = 0.0;
  double e_H_abs = 0.0;
};

/// Streaming maxima of the state and Hamiltonian errors. States are
/// first-order (q, p); when a velocity map A is given, e_p is measured in
/// q' = A p. The first Hamiltonian value seen is taken as H(y0).
class ErrorAccumulator {
 public:
  explicit ErrorAccumulator(std::size_t half_dim, const DenseMatrix* velocity_map = nullptr)
      : m_(half_dim), velocity_map_(velocity_map) {}

  void add_energy(double h) {
    if (!h0_) {
      h0_ = h;
      return;
    }
    const double d = std::abs(h - *h0_);
    s_.e_H_abs = std::max(s_.e_H_abs, d);
    s_.e_H = std::max(s_.e_H, *h0_ != 0.0 ? d / std::abs(*h0_) : d);
  }

  void add_state(std::span<const double> y, std::span<const double> ref) {
    if (y.size() != ref.size() || y.size() != 2 * m_) {
      throw Error(ErrorKind::DimensionMismatch, "state and reference sizes differ");
    }
    Vector dp(m_);
    for (std::size_t i = 0; i < m_; ++i) {
      s_.e_q = std::max(s_.e_q, std::abs(y[i] - ref[i]));
      dp[i] = y[m_ + i] - ref[m_ + i];
    }
    for (std::size_t i = 0; i < 2 * m_; ++i) s_.e_y = std::max(s_.e_y, std::abs(y[i] - ref[i]));
    if (velocity_map_) dp = *velocity_map_ * std::span<const double>(dp);
    for (double d : dp) s_.e_p = std::max(s_.e_p, std::abs(d));
  }

  [[nodiscard]] const ErrorSummary& summary() const noexcept { return s_; }

 private:
  std::size_t m_;
  const DenseMatrix* velocity_map_;
  std::optional<double> h0_;
  ErrorSummary s_;
};

/// Errors of a trajectory against a reference on the same time grid.
inline ErrorSummary compute_errors(const std::vector<Vector>& traj, const std::vector<Vector>& ref,
                                   const ScalarFn& hamiltonian, const DenseMatrix* velocity_map = nullptr) {
  if (traj.size() != ref.size()) throw Error(ErrorKind::DimensionMismatch, "trajectory lengths differ");
  if (traj.empty()) return {};
  if (traj.front().size() % 2 != 0) throw Error(ErrorKind::DimensionMismatch, "state size must be even");
  ErrorAccumulator acc(traj.front().size() / 2, velocity_map);
  for (std::size_t n = 0; n < traj.size(); ++n) {
    acc.add_state(traj[n], ref[n]);
    if (hamiltonian) acc.add_energy(hamiltonian(traj[n]));
  }
  return acc.summary();
}

// ---------------------------------------------------------------------------
// References

/// Reference first-order state at step n, or nothing if step n is not sampled.
using ReferenceFn = std::function<std::optional<Vector>(std::size_t)>;

/// Reference runs for problems without a closed-form solution, keyed by
/// (grid points, refinement).
class ReferenceCache {
 public:
  std::shared_ptr<const std::vector<Vector>> get(const ProblemInstance& p, double T, std::size_t points,
                                                 std::size_t refine) {
    const Key key{p.name, T, points, refine};
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    auto traj = std::make_shared<const std::vector<Vector>>(reference_trajectory(p.sys, p.y0, T, points, refine));
    cache_.emplace(key, traj);
    return traj;
  }

 private:
  using Key = std::tuple<std::string, double, std::size_t, std::size_t>;
  std::map<Key, std::shared_ptr<const std::vector<Vector>>> cache_;
};

inline constexpr std::size_t kReferenceRefinement = 8;
inline constexpr std::size_t kReferenceSamples = 1000;

/// Closed-form problems are compared at every step. Otherwise SHBVM runs are
/// compared at every step against an h/8 run, and other methods on a grid of
/// gcd(N, 1000) points against a reference with 8 substeps per grid interval.
inline ReferenceFn make_reference(const ProblemInstance& p, double T, std::size_t N, bool every_step,
                                  ReferenceCache& cache) {
  const double h = T / static_cast<double>(N);
  if (p.exact) {
    return [exact = p.exact, h](std::size_t n) -> std::optional<Vector> { return exact(static_cast<double>(n) * h); };
  }
  const std::size_t points = every_step ? N : std::gcd(N, kReferenceSamples);
  const std::size_t stride = N / points;
  auto ref = cache.get(p, T, points, kReferenceRefinement);
  return [ref, stride](std::size_t n) -> std::optional<Vector> {
    if (n % stride != 0) return std::nullopt;
    return (*ref)[n / stride];
  };
}

// ---------------------------------------------------------------------------
// Runs

namespace detail {

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

inline void run_classical(const ProblemInstance& p, const MethodSpec& method, double h, std::size_t N,
                          const ReferenceFn& ref, ErrorAccumulator& acc) {
  const SecondOrderProblem& p2 = *p.second_order;
  const LUFactorization a_lu = lu_factor(p2.A);
  std::optional<TrigKernel> kernel;
  if (method.kind != MethodSpec::Kind::StormerVerlet) kernel.emplace(h, p2.A);
  Vector q = p2.q0, v = p2.v0;
  const auto observe = [&](std::size_t n) {
    acc.add_energy(second_order_energy(p2, q, v));
    if (auto r = ref(n)) {
      Vector y = q;
      const Vector pv = lu_solve(a_lu, v);
      y.insert(y.end(), pv.begin(), pv.end());
      acc.add_state(y, *r);
    }
  };
  observe(0);
  for (std::size_t n = 1; n <= N; ++n) {
    State2 next;
    switch (method.kind) {
      case MethodSpec::Kind::StormerVerlet: next = stormer_verlet_step(q, v, h, p2); break;
      case MethodSpec::Kind::Gautschi: next = gautschi_step(q, v, h, p2, *kernel); break;
      default: next = deuflhard_step(q, v, h, p2, *kernel); break;
    }
    q = std::move(next.first);
    v = std::move(next.second);
    if (!all_finite(q) || !all_finite(v)) throw StepFailure(ErrorKind::SolverDiverged, n, "non-finite state");
    observe(n);
  }
}

}  // namespace detail

inline BenchRecord run_solve(const ProblemInstance& p, const RunConfig& cfg, ReferenceCache& cache) {
  if (cfg.N < 1) throw Error(ErrorKind::DimensionMismatch, "N must be >= 1");
  const MethodSpec method = parse_method(cfg.method);
  if (method.classical() && !p.second_order) {
    throw Error(ErrorKind::UnknownMethod, cfg.method + " needs a second-order problem, " + p.name + " is not");
  }
  BenchRecord rec;
  rec.problem = p.name;
  rec.method = cfg.method;
  rec.N = cfg.N;
  rec.t_end = cfg.t_end.value_or(p.t_end);
  if (!(rec.t_end > 0.0)) throw Error(ErrorKind::DimensionMismatch, "t_end must be positive");
  const double h = rec.t_end / static_cast<double>(cfg.N);

  HamiltonianSystem sys = p.sys;
  if (cfg.nu) sys.nu = *cfg.nu;
  if (cfg.omega) sys.omega = *cfg.omega;

  const ReferenceFn ref = make_reference(p, rec.t_end, cfg.N, method.kind == MethodSpec::Kind::Shbvm, cache);
  const DenseMatrix* velocity_map = p.second_order ? &p.second_order->A : nullptr;
  ErrorAccumulator acc(sys.half_dim, velocity_map);

  const auto start = std::chrono::steady_clock::now();
  if (method.classical()) {
    detail::run_classical(p, method, h, cfg.N, ref, acc);
  } else {
    const SpectralParams params = method.kind == MethodSpec::Kind::Gauss
                                      ? fixed_params(method.stages, method.stages, sys.omega * h)
                                      : select_params(sys.omega, h, sys.nu, cfg.u);
    rec.params = params;
    integrate_observed(sys, p.y0, h, cfg.N, params, [&](std::size_t n, std::span<const double> y) {
      if (sys.hamiltonian) acc.add_energy(sys.hamiltonian(y));
      if (auto r = ref(n)) acc.add_state(y, *r);
    });
  }
  rec.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const ErrorSummary& e = acc.summary();
  rec.e_q = e.e_q;
  rec.e_p = e.e_p;
  rec.e_y = e.e_y;
  rec.e_H = e.e_H;
  rec.e_H_abs = e.e_H_abs;
  return rec;
}

inline BenchRecord run_solve(const RunConfig& cfg) {
  ReferenceCache cache;
  return run_solve(make_problem(cfg.problem), cfg, cache);
}

// ---------------------------------------------------------------------------
// CSV

inline std::string format_real(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline void write_csv_header(std::ostream& os) { os << kCsvHeader << '\n'; }

inline void write_csv_row(std::ostream& os, const BenchRecord& r) {
  const auto opt = [](const std::optional<double>& x) { return x ? format_real(*x) : std::string(); };
  os << r.N << ',' << format_real(r.wall_time_s) << ',' << format_real(r.e_q) << ',' << format_real(r.e_p) << ','
     << format_real(r.e_H) << ',' << opt(r.rate_q) << ',' << opt(r.rate_p) << ',' << opt(r.rate_H) << ',';
  if (r.params) {
    os << r.params->s0 << ',' << r.params->s << ',' << r.params->k;
  } else {
    os << ",,";
  }
  os << '\n';
}

/// Observed order between two runs; log2 of the ratio for an exact halving.
inline std::optional<double> observed_rate(double e_coarse, double e_fine, std::size_t n_coarse, std::size_t n_fine) {
  if (!(e_coarse > 0.0) || !(e_fine > 0.0) || n_fine <= n_coarse) return std::nullopt;
  if (n_fine == 2 * n_coarse) return std::log2(e_coarse / e_fine);
  return std::log(e_coarse / e_fine) / std::log(static_cast<double>(n_fine) / static_cast<double>(n_coarse));
}

/// Fills the rate columns of consecutive rows of one method.
inline void fill_rates(std::vector<BenchRecord>& rows) {
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const BenchRecord& c = rows[i - 1];
    BenchRecord& f = rows[i];
    f.rate_q = observed_rate(c.e_q, f.e_q, c.N, f.N);
    f.rate_p = observed_rate(c.e_p, f.e_p, c.N, f.N);
    f.rate_H = observed_rate(c.e_H, f.e_H, c.N, f.N);
    f.rate_generalized = f.N != 2 * c.N;
  }
}

// ---------------------------------------------------------------------------
// Tables

struct TableRowSet {
  std::string method;
  std::vector<std::size_t> desk;
  std::vector<std::size_t> full;
};

struct TableSpec {
  std::string id;
  std::string problem;
  std::vector<TableRowSet> rows;
};

inline std::vector<std::size_t> steps_range(std::size_t first, std::size_t last, std::size_t step) {
  std::vector<std::size_t> out;
  for (std::size_t n = first; n <= last; n += step) out.push_back(n);
  return out;
}

inline std::vector<std::size_t> dyadic(std::size_t first, std::size_t count) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < count; ++i) out.push_back(first << i);
  return out;
}

inline const std::vector<TableSpec>& table_specs() {
  static const std::vector<TableSpec> specs = {
      {"duffing-classical",
       "duffing",
       {{"sv", dyadic(1250000, 2), dyadic(1250000, 5)},
        {"gautschi", dyadic(1250000, 2), dyadic(1250000, 5)},
        {"deuflhard", dyadic(625000, 2), dyadic(625000, 5)}}},
      {"duffing-gauss",
       "duffing",
       {{"gauss-1", dyadic(1250000, 2), dyadic(1250000, 5)},
        {"gauss-2", dyadic(200000, 2), dyadic(200000, 4)},
        {"gauss-3", dyadic(25000, 2), dyadic(25000, 4)},
        {"gauss-4", dyadic(12500, 2), dyadic(12500, 4)}}},
      {"duffing-shbvm", "duffing", {{"shbvm", steps_range(800, 1500, 100), steps_range(800, 1500, 100)}}},
      {"fpu-classical",
       "fpu",
       {{"sv", dyadic(160000, 2), dyadic(160000, 5)},
        {"gautschi", dyadic(10000, 3), dyadic(10000, 8)},
        {"deuflhard", dyadic(10000, 3), dyadic(10000, 8)}}},
      {"fpu-gauss",
       "fpu",
       {{"gauss-1", dyadic(320000, 2), dyadic(320000, 4)},
        {"gauss-2", dyadic(40000, 2), dyadic(40000, 6)},
        {"gauss-3", dyadic(10000, 2), dyadic(10000, 6)},
        {"gauss-4", dyadic(10000, 2), dyadic(10000, 5)}}},
      {"fpu-shbvm", "fpu", {{"shbvm", steps_range(500, 1500, 100), steps_range(500, 1500, 100)}}},
      {"nls-gauss",
       "nls",
       {{"gauss-1", dyadic(16000, 2), dyadic(16000, 7)},
        {"gauss-2", dyadic(4000, 2), dyadic(4000, 7)},
        {"gauss-3", dyadic(20000, 2), dyadic(20000, 7)},
        {"gauss-4", dyadic(1000, 2), dyadic(1000, 6)}}},
      {"nls-shbvm", "nls", {{"shbvm", steps_range(200, 500, 50), steps_range(200, 500, 50)}}},
  };
  return specs;
}

inline const TableSpec& find_table(std::string_view id) {
  for (const TableSpec& t : table_specs())
    if (t.id == id) return t;
  throw Error(ErrorKind::UnknownTable, std::string(id));
}

struct TableBlock {
  std::string method;
  std::vector<BenchRecord> rows;
};

/// Called after each finished row.
using RowCallback = std::function<void(const BenchRecord&)>;

inline std::vector<TableBlock> run_table(std::string_view id, bool full_scale, const RowCallback& on_row = {}) {
  const TableSpec& spec = find_table(id);
  const ProblemInstance p = make_problem(spec.problem);
  ReferenceCache cache;
  std::vector<TableBlock> blocks;
  for (const TableRowSet& set : spec.rows) {
    TableBlock block;
    block.method = set.method;
    for (std::size_t n : full_scale ? set.full : set.desk) {
      RunConfig cfg;
      cfg.problem = spec.problem;
      cfg.method = set.method;
      cfg.N = n;
      block.rows.push_back(run_solve(p, cfg, cache));
      if (on_row) on_row(block.rows.back());
    }
    fill_rates(block.rows);
    blocks.push_back(std::move(block));
  }
  return blocks;
}

/// One CSV block per method, each introduced by a `# method=<name>` line.
inline void write_table(std::ostream& os, const std::vector<TableBlock>& blocks) {
  for (const TableBlock& b : blocks) {
    os << "# method=" << b.method << '\n';
    write_csv_header(os);
    for (const BenchRecord& r : b.rows) write_csv_row(os, r);
  }
}

// ---------------------------------------------------------------------------
// Figures

inline const std::vector<std::string>& figure_ids() {
  static const std::vector<std::string> ids = {"g-bound", "phi-u", "time-vs-N"};
  return ids;
}

/// (|int_0^1 P_s(c) cos(x c) dc|, |int_0^1 P_s(c) sin(x c) dc|) by Gauss quadrature.
inline std::pair<double, double> legendre_fourier_integrals(std::size_t s, double x, std::size_t k = 64) {
  const QuadratureRule rule = gauss_rule(k);
  Vector p(s + 1);
  double ic = 0.0, is = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    legendre_all(s + 1, rule.nodes[i], p);
    ic += rule.weights[i] * p[s] * std::cos(x * rule.nodes[i]);
    is += rule.weights[i] * p[s] * std::sin(x * rule.nodes[i]);
  }
  return {std::abs(ic), std::abs(is)};
}

inline constexpr std::size_t kFigureMaxIndex = 40;

inline void run_figure(std::string_view id, std::ostream& os, double u = kUnitRoundoff) {
  if (id == "g-bound") {
    os << "omega_h,s,int_cos,int_sin,g\n";
    for (double x : {1.0, 5.0, 10.0}) {
      for (std::size_t s = 0; s <= kFigureMaxIndex; ++s) {
        const auto [ic, is] = legendre_fourier_integrals(s, x);
        os << format_real(x) << ',' << s << ',' << format_real(ic) << ',' << format_real(is) << ','
           << format_real(g_bound(s, x)) << '\n';
      }
    }
  } else if (id == "phi-u") {
    os << "omega_h,phi_u\n";
    os << format_real(0.1) << ',' << phi_u(0.1, u) << '\n';
    for (int i = 1; i <= 200; ++i) {
      const double x = 0.5 * i;
      os << format_real(x) << ',' << phi_u(x, u) << '\n';
    }
  } else if (id == "time-vs-N") {
    os << "N,time_s\n";
    const ProblemInstance p = make_problem("duffing");
    ReferenceCache cache;
    for (std::size_t n : steps_range(800, 1500, 100)) {
      RunConfig cfg;
      cfg.N = n;
      cfg.u = u;
      const BenchRecord r = run_solve(p, cfg, cache);
      os << n << ',' << format_real(r.wall_time_s) << '\n';
    }
  } else {
    throw Error(ErrorKind::UnknownFigure, std::string(id));
  }
}

/// `params` command: the selected triple for omega*h and nu.
inline void params_command(double omega_h, double nu, std::ostream& os, double u = kUnitRoundoff) {
  const SpectralParams p = select_params(omega_h, 1.0, nu, u);
  os << "omega_h,nu,u,s0,s,k\n"
     << format_real(omega_h) << ',' << format_real(nu) << ',' << format_real(u) << ',' << p.s0 << ',' << p.s << ','
     << p.k << '\n';
}

}  // namespace oscil
