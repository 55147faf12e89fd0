#pragma once

// Shared numeric utilities: intervals, deterministic RNG, Gauss-Legendre
// quadrature, bracketed root finding, and a small thread pool helper.

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace hjhom {

inline constexpr double kInf = 1e300;

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double width() const { return hi - lo; }
  double mid() const { return 0.5 * (lo + hi); }
  bool contains(double x, double tol = 0.0) const {
    return x >= lo - tol && x <= hi + tol;
  }
  bool contains(const Interval& other, double tol = 0.0) const {
    return other.lo >= lo - tol && other.hi <= hi + tol;
  }
  bool intersects(const Interval& other, double tol = 0.0) const {
    return other.hi >= lo - tol && other.lo <= hi + tol;
  }
  double clamp(double x) const { return x < lo ? lo : (x > hi ? hi : x); }
};

struct RangeExtrema {
  double min_value = 0.0;
  double max_value = 0.0;
};

// Deterministic 64-bit generator (splitmix64).  Used everywhere randomness is
// needed so runs are reproducible across platforms from a single seed.
class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0,1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * uniform(); }

  // Stateless hash of (seed, index), for per-cell i.i.d. draws that do not
  // depend on traversal order.
  static uint64_t hash(uint64_t seed, uint64_t index) {
    SplitMix64 g(seed ^ (0x632be59bd9b4e019ULL * (index + 1)));
    g.next();
    return g.next();
  }

  static double hash_uniform(uint64_t seed, uint64_t index) {
    return static_cast<double>(hash(seed, index) >> 11) * 0x1.0p-53;
  }

 private:
  uint64_t state_;
};

// Nodes and weights of the n-point Gauss-Legendre rule on [-1,1].
// Computed once per n and cached.
struct GaussRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussRule& gauss_legendre(int n);

// Integral of f over [a,b] with the n-point rule.
double gauss_integrate(const std::function<double(double)>& f, double a,
                       double b, int n = 64);

// Integral over [a,b] split at the interior points in `cuts` (sorted or not),
// one Gauss panel per subinterval.
double gauss_integrate_split(const std::function<double(double)>& f, double a,
                             double b, std::vector<double> cuts, int n = 64);

// Root of f on [a,b] assuming f(a) and f(b) straddle zero.  Bisection with a
// secant refinement; |result - root| <= tol on the abscissa.
double find_root(const std::function<double(double)>& f, double a, double b,
                 double tol = 1e-13);

// Minimizer of a unimodal f on [a,b] via golden-section search.
double golden_min(const std::function<double(double)>& f, double a, double b,
                  double tol = 1e-12);

// Runs fn(i) for i in [0,n) across `workers` threads.  Exceptions from tasks
// are rethrown on the calling thread.  workers <= 1 runs inline.
void parallel_for(std::size_t n, int workers,
                  const std::function<void(std::size_t)>& fn);

// Error type for violated structural assumptions (malformed Hamiltonian,
// inadmissible request, solver breakdown).  `invariant` names the check that
// failed, machine-readably.
class InvariantError : public std::runtime_error {
 public:
  InvariantError(std::string invariant, const std::string& message)
      : std::runtime_error(message), invariant_(std::move(invariant)) {}
  const std::string& invariant() const { return invariant_; }

 private:
  std::string invariant_;
};

inline void require(bool cond, const std::string& invariant,
                    const std::string& message) {
  if (!cond) throw InvariantError(invariant, message);
}

}  // namespace hjhom
