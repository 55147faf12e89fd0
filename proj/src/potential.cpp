#include "hjhom/potential.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"

namespace hjhom {

namespace {

// Smooth bump on (0,1), max 1 at t = 1/2, C-infinity with all derivatives
// vanishing at the edges.
double bump(double t) {
  if (t <= 0.0 || t >= 1.0) return 0.0;
  return std::exp(1.0 - 1.0 / (4.0 * t * (1.0 - t)));
}

int64_t cell_index(double y) { return (int64_t)std::floor(y); }

}  // namespace

double PotentialPath::value_at(double y) const {
  if (values.empty()) return 0.0;
  double t = (y - window.lo) / h;
  if (t <= 0) return values.front();
  std::size_t i = (std::size_t)t;
  if (i + 1 >= values.size()) return values.back();
  double w = t - (double)i;
  return (1.0 - w) * values[i] + w * values[i + 1];
}

double PotentialPath::min_value() const {
  return *std::min_element(values.begin(), values.end());
}

double PotentialPath::max_value() const {
  return *std::max_element(values.begin(), values.end());
}

PotentialModelPtr PotentialModel::cosine(double mbar) {
  require(mbar > 0, "schema", "cosine potential needs mbar > 0");
  auto m = std::shared_ptr<PotentialModel>(new PotentialModel());
  m->variant_ = Variant::PeriodicAnalytic;
  m->mbar_ = mbar;
  return m;
}

PotentialModelPtr PotentialModel::random_phase_cosine(double mbar,
                                                      uint64_t seed) {
  require(mbar > 0, "schema", "random_phase potential needs mbar > 0");
  auto m = std::shared_ptr<PotentialModel>(new PotentialModel());
  m->variant_ = Variant::RandomPhase;
  m->mbar_ = mbar;
  m->seed_ = seed;
  m->phase_ = SplitMix64::hash_uniform(seed, 0);
  return m;
}

PotentialModelPtr PotentialModel::block_random(double depth_lo,
                                               double depth_hi,
                                               uint64_t seed) {
  require(depth_hi > 0 && depth_hi >= depth_lo && depth_lo >= 0, "schema",
          "block_random depth range must satisfy 0 <= lo <= hi, hi > 0");
  auto m = std::shared_ptr<PotentialModel>(new PotentialModel());
  m->variant_ = Variant::BlockRandom;
  m->mbar_ = depth_hi;
  m->depth_lo_ = depth_lo;
  m->depth_hi_ = depth_hi;
  m->seed_ = seed;
  return m;
}

PotentialModelPtr PotentialModel::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const std::exception& e) {
    throw InvariantError("schema", std::string("invalid JSON: ") + e.what());
  }
  std::string variant = j.value("variant", "");
  if (variant == "cosine") {
    require(j.contains("mbar"), "schema", "cosine spec needs mbar");
    return cosine(j["mbar"].get<double>());
  }
  if (variant == "random_phase") {
    require(j.contains("base") && j.contains("seed"), "schema",
            "random_phase spec needs base and seed");
    const auto& base = j["base"];
    require(base.value("variant", "") == "cosine", "schema",
            "random_phase base must be a cosine spec");
    return random_phase_cosine(base["mbar"].get<double>(),
                               j["seed"].get<uint64_t>());
  }
  if (variant == "block_random") {
    require(j.contains("depth_dist") && j["depth_dist"].contains("uniform") &&
                j.contains("seed"),
            "schema", "block_random spec needs depth_dist.uniform and seed");
    const auto& u = j["depth_dist"]["uniform"];
    return block_random(u[0].get<double>(), u[1].get<double>(),
                        j["seed"].get<uint64_t>());
  }
  throw InvariantError("schema", "unknown potential variant: " + variant);
}

std::string PotentialModel::to_json() const {
  nlohmann::json j;
  switch (variant_) {
    case Variant::PeriodicAnalytic:
      j["variant"] = "cosine";
      j["mbar"] = mbar_;
      break;
    case Variant::RandomPhase:
      j["variant"] = "random_phase";
      j["base"] = {{"variant", "cosine"}, {"mbar", mbar_}};
      j["seed"] = seed_;
      break;
    case Variant::BlockRandom:
      j["variant"] = "block_random";
      j["depth_dist"] = {{"uniform", {depth_lo_, depth_hi_}}};
      j["seed"] = seed_;
      break;
  }
  if (mirrored_) j["mirrored"] = true;
  return j.dump();
}

double PotentialModel::eval(double y) const {
  if (mirrored_) y = -y;
  switch (variant_) {
    case Variant::PeriodicAnalytic:
      return -0.5 * mbar_ * (1.0 - std::cos(2.0 * M_PI * y));
    case Variant::RandomPhase: {
      double z = y + phase_;
      return -0.5 * mbar_ * (1.0 - std::cos(2.0 * M_PI * z));
    }
    case Variant::BlockRandom: {
      int64_t i = cell_index(y);
      double d = depth_lo_ + (depth_hi_ - depth_lo_) *
                                 SplitMix64::hash_uniform(seed_, (uint64_t)i);
      return -d * bump(y - (double)i);
    }
  }
  return 0.0;
}

PotentialModelPtr PotentialModel::reflected() const {
  auto m = std::shared_ptr<PotentialModel>(new PotentialModel(*this));
  m->mirrored_ = !mirrored_;
  return m;
}

PotentialPath PotentialModel::sample_path(uint64_t seed, Interval window,
                                          double h, double range_tol) const {
  require(h > 0, "schema", "sample_path needs h > 0");
  PotentialPath path;
  path.window = window;
  path.h = h;
  path.seed = seed;
  path.mbar = mbar_;
  std::size_t n = (std::size_t)std::ceil(window.width() / h) + 1;
  path.values.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    double y = window.lo + (double)i * h;
    double v = eval(std::min(y, window.hi));
    path.values.push_back(std::min(0.0, std::max(-mbar_, v)));
  }
  require(path.min_value() <= -mbar_ + range_tol &&
              path.max_value() >= -range_tol,
          "window_range", "window under-resolves oscillation");
  return path;
}

ExpectedValue PotentialModel::expected_functional(
    const std::function<double(double)>& g, const std::vector<double>& y_cuts,
    int cells) const {
  ExpectedValue out;
  if (periodic()) {
    auto integrand = [&](double y) { return g(eval(y)); };
    std::vector<double> cuts;
    for (double c : y_cuts) {
      double t = std::fmod(c, 1.0);
      if (t < 0) t += 1.0;
      cuts.push_back(t);
    }
    out.value = gauss_integrate_split(integrand, 0.0, 1.0, cuts, 256);
    out.std_error = 0.0;
    return out;
  }
  // BlockRandom: i.i.d. cell integrals.
  std::vector<double> cell_means(cells);
  double sum = 0.0;
  for (int i = 0; i < cells; ++i) {
    double a = (double)i;
    cell_means[i] =
        gauss_integrate([&](double y) { return g(eval(y)); }, a, a + 1.0, 64);
    sum += cell_means[i];
  }
  double mean = sum / cells;
  double var = 0.0;
  for (double c : cell_means) var += (c - mean) * (c - mean);
  var /= std::max(1, cells - 1);
  out.value = mean;
  out.std_error = std::sqrt(var / cells);
  return out;
}

std::vector<double> PotentialModel::level_crossings(Interval window,
                                                    double c) const {
  std::vector<double> out;
  if (c <= -mbar_ || c >= 0.0) return out;
  // Dense scan, then bisection on the analytic evaluation.
  int n = std::max(512, (int)std::ceil(window.width() * 4096));
  n = std::min(n, 4 << 20);
  double h = window.width() / n;
  double prev_y = window.lo;
  double prev_s = eval(prev_y) - c;
  for (int i = 1; i <= n; ++i) {
    double y = window.lo + i * h;
    double s = eval(y) - c;
    if (prev_s == 0.0) {
      // Node exactly on the level: transversal iff neighbors straddle.
      double before = eval(prev_y - h) - c;
      if (before * s < 0) out.push_back(prev_y);
    } else if (prev_s * s < 0) {
      out.push_back(find_root([&](double t) { return eval(t) - c; }, prev_y, y,
                              1e-13));
    }
    prev_y = y;
    prev_s = s;
  }
  return out;
}

std::vector<PotentialModel::Extremum> PotentialModel::extrema(
    Interval window) const {
  std::vector<Extremum> out;
  int n = std::max(512, (int)std::ceil(window.width() * 2048));
  n = std::min(n, 4 << 20);
  double h = window.width() / n;
  // Track the sign of the last nonzero sample difference: a symmetric window
  // puts two equal samples astride an extremum, so a single difference may be
  // exactly zero there.
  int last_sign = 0;
  double dir_lo = window.lo;
  double prev_y = window.lo;
  double prev_v = eval(prev_y);
  for (int i = 1; i <= n; ++i) {
    double y = window.lo + i * h;
    double v = eval(y);
    double d = v - prev_v;
    int s = (d > 0.0) - (d < 0.0);
    if (s != 0) {
      if (last_sign != 0 && s != last_sign) {
        bool is_max = last_sign > 0;
        double yy =
            is_max
                ? golden_min([&](double t) { return -eval(t); }, dir_lo, y,
                             1e-13)
                : golden_min([&](double t) { return eval(t); }, dir_lo, y,
                             1e-13);
        // Golden section stalls ~sqrt(eps) from a quadratic bottom; polish
        // the position with parabola-vertex steps.
        for (int pass = 0; pass < 2; ++pass) {
          double vm = eval(yy - h), vc = eval(yy), vp = eval(yy + h);
          double d2 = vm - 2.0 * vc + vp;
          if (d2 == 0.0 || (is_max ? d2 > 0.0 : d2 < 0.0)) break;
          double shift = 0.5 * (vm - vp) / d2 * h;
          if (!(std::abs(shift) < h)) break;
          yy += shift;
        }
        out.push_back({yy, eval(yy), is_max});
      }
      last_sign = s;
      dir_lo = prev_y;
    }
    prev_y = y;
    prev_v = v;
  }
  return out;
}

RangeExtrema PotentialModel::range_on(double a, double b) const {
  RangeExtrema r{std::min(eval(a), eval(b)), std::max(eval(a), eval(b))};
  for (const auto& e : extrema({a, b})) {
    r.min_value = std::min(r.min_value, e.value);
    r.max_value = std::max(r.max_value, e.value);
  }
  return r;
}

std::vector<double> path_level_crossings(const PotentialPath& path, double c) {
  std::vector<double> out;
  const auto& v = path.values;
  for (std::size_t i = 0; i + 1 < v.size(); ++i) {
    double s0 = v[i] - c, s1 = v[i + 1] - c;
    if (s0 == 0.0) {
      if (i > 0 && (v[i - 1] - c) * s1 < 0)
        out.push_back(path.window.lo + i * path.h);
      continue;
    }
    if (s0 * s1 < 0) {
      // Linear interpolant root, bisected to 1e-10 h.
      double a = path.window.lo + i * path.h;
      double b = a + path.h;
      auto f = [&](double y) { return path.value_at(y) - c; };
      out.push_back(find_root(f, a, b, 1e-10 * path.h));
    }
  }
  return out;
}

MollifyResult mollify(const PotentialPath& path, double eps) {
  require(eps > 0, "schema", "mollify needs eps > 0");
  MollifyResult res;
  res.path = path;
  auto& v = res.path.values;
  std::size_t n = path.values.size();
  int half = std::max(1, (int)std::ceil(4.0 * eps / path.h));
  std::vector<double> kernel(2 * half + 1);
  double total = 0.0;
  for (int k = -half; k <= half; ++k) {
    double x = k * path.h / eps;
    kernel[k + half] = std::exp(-0.5 * x * x);
    total += kernel[k + half];
  }
  for (double& w : kernel) w /= total;
  std::vector<double> smoothed(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    for (int k = -half; k <= half; ++k) {
      int64_t j = (int64_t)i + k;
      if (j < 0) j = 0;
      if (j >= (int64_t)n) j = n - 1;
      acc += kernel[k + half] * path.values[j];
    }
    smoothed[i] = acc;
  }
  double sup_diff = 0.0, vmax = -kInf;
  for (std::size_t i = 0; i < n; ++i) {
    sup_diff = std::max(sup_diff, std::abs(smoothed[i] - path.values[i]));
    vmax = std::max(vmax, smoothed[i]);
  }
  for (double& x : smoothed) x -= vmax;
  v = std::move(smoothed);
  res.shift = vmax;
  res.sup_diff = sup_diff;
  return res;
}

bool crossings_well_separated(const std::vector<double>& crossings, double h) {
  for (std::size_t i = 0; i + 1 < crossings.size(); ++i)
    if (crossings[i + 1] - crossings[i] <= 10.0 * h) return false;
  return true;
}

}  // namespace hjhom
