// SPDX-License-Identifier: Apache-2.0
#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sparsedist/sparsedist.hpp"

namespace sparsedist::cli {
namespace {

constexpr const char* kCtx = "cli";

/// Bad flags or unreadable input files; reported with exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Writes to a file when a path is given, to the fallback stream otherwise.
class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (path.empty() || path == "-") return;
    file_.open(path, std::ios::binary);
    if (!file_) throw UsageError("cannot open '" + path + "' for writing");
    os_ = &file_;
  }
  std::ostream& operator*() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

std::string read_text(const std::string& path) {
  std::ostringstream ss;
  if (path == "-") {
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open '" + path + "'");
  ss << in.rdbuf();
  return ss.str();
}

Json read_json(const std::string& path) {
  try {
    return Json::parse(read_text(path));
  } catch (const Json::parse_error& e) {
    throw Error(Errc::parse, std::string("malformed JSON: ") + e.what(), path);
  }
}

struct Table {
  std::vector<std::string> header;
  Matrix rows;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, sep)) out.push_back(cell);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

/// Headered numeric CSV.
Table read_csv(const std::string& path) {
  std::istringstream in(read_text(path));
  std::string line;
  Table t;
  std::vector<std::vector<double>> values;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto cells = split(line, ',');
    if (t.header.empty()) {
      t.header = std::move(cells);
      continue;
    }
    if (cells.size() != t.header.size()) {
      throw Error(Errc::parse,
                  "line " + std::to_string(line_no) + " has " +
                      std::to_string(cells.size()) + " fields, expected " +
                      std::to_string(t.header.size()),
                  path);
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (c.empty() || end != c.c_str() + c.size() || !std::isfinite(v)) {
        throw Error(Errc::parse,
                    "line " + std::to_string(line_no) + ": '" + c +
                        "' is not a finite number",
                    path);
      }
      row.push_back(v);
    }
    values.push_back(std::move(row));
  }
  if (t.header.empty()) throw Error(Errc::parse, "empty CSV", path);
  t.rows.resize(static_cast<Eigen::Index>(values.size()),
                static_cast<Eigen::Index>(t.header.size()));
  for (std::size_t i = 0; i < values.size(); ++i) {
    for (std::size_t k = 0; k < values[i].size(); ++k) {
      t.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) =
          values[i][k];
    }
  }
  return t;
}

/// Accepts a decimal number or a ratio such as 4/3.
double parse_alpha_text(const std::string& s) {
  const auto slash = s.find('/');
  const auto number = [&](const std::string& part) {
    char* end = nullptr;
    const double v = std::strtod(part.c_str(), &end);
    if (part.empty() || end != part.c_str() + part.size()) {
      throw UsageError("cannot parse alpha '" + s + "'");
    }
    return v;
  };
  if (slash == std::string::npos) return number(s);
  return number(s.substr(0, slash)) / number(s.substr(slash + 1));
}

Alpha checked_alpha(double a) {
  detail::require(std::isfinite(a), Errc::domain, "alpha must be finite",
                  kCtx);
  if (a < 1.0) {
    throw Error(Errc::unsupported,
                "alpha = " + fmt(a) +
                    " is out of the implemented range (alpha >= 1)",
                kCtx);
  }
  return Alpha(a);
}

Alpha checked_alpha(const std::string& s) {
  return checked_alpha(parse_alpha_text(s));
}

Alpha json_alpha(const Json& j) {
  if (j.is_string()) return checked_alpha(j.get<std::string>());
  if (!j.is_number()) throw Error(Errc::parse, "alpha must be a number", kCtx);
  return checked_alpha(j.get<double>());
}

Json vector_json(const Vector& v) { return detail::vector_to_json(v); }
Json matrix_json(const Matrix& m) { return detail::matrix_to_json(m); }

void write_json(std::ostream& os, const Json& j) { os << j.dump(2) << '\n'; }

/// Square matrix from a flag list: one value (times the identity of size
/// n_hint) or k*k values in row-major order.
Matrix matrix_from_list(const std::vector<double>& v, int n_hint,
                        const char* flag) {
  if (v.size() == 1) {
    return v[0] * Matrix::Identity(std::max(n_hint, 1), std::max(n_hint, 1));
  }
  const auto k = static_cast<int>(std::lround(std::sqrt(double(v.size()))));
  if (k * k != static_cast<int>(v.size())) {
    throw UsageError(std::string(flag) +
                     " needs 1 value or k*k values in row-major order");
  }
  Matrix m(k, k);
  for (int i = 0; i < k; ++i) {
    for (int c = 0; c < k; ++c) m(i, c) = v[static_cast<std::size_t>(i * k + c)];
  }
  return m;
}

// ---------------------------------------------------------------------------
// Density flags shared by make and sample
// ---------------------------------------------------------------------------

struct DensityFlags {
  std::string family;
  std::string alpha;
  std::string kernel;
  std::vector<double> mu;
  std::vector<double> sigma;
  std::vector<double> scores;
  double b = 0.0;
  double kappa = 1.0;
  double sigma2 = 0.0;
  CLI::Option* b_opt = nullptr;
  CLI::Option* kappa_opt = nullptr;
  CLI::Option* sigma2_opt = nullptr;
};

void add_density_flags(CLI::App* app, DensityFlags& f) {
  app->add_option("--family", f.family,
                  "beta_gaussian, truncated_parabola, triangular, "
                  "truncated_gaussian, location_scale, sparse_poisson, "
                  "sparse_integer_gaussian or finite");
  app->add_option("--alpha", f.alpha, "entropic index, e.g. 2 or 4/3");
  app->add_option("--mu", f.mu, "location (comma-separated for N > 1)")
      ->delimiter(',');
  app->add_option("--sigma", f.sigma,
                  "scale: variance, or N*N row-major covariance entries")
      ->delimiter(',');
  f.b_opt = app->add_option("--b", f.b, "triangular half-width parameter");
  f.kappa_opt = app->add_option("--kappa", f.kappa, "kernel or truncation shape");
  f.sigma2_opt = app->add_option("--sigma2", f.sigma2,
                                 "truncated Gaussian variance");
  app->add_option("--kernel", f.kernel, "location_scale kernel: cubic, "
                                        "quadratic or gaussian");
  app->add_option("--scores", f.scores, "finite family scores")
      ->delimiter(',');
}

Json density_json_from_flags(const DensityFlags& f) {
  if (f.family.empty()) throw UsageError("--family is required");
  const Family fam = parse_family(f.family);
  Json j;
  j["family"] = f.family;
  if (!f.alpha.empty()) j["alpha"] = checked_alpha(f.alpha).value();
  const auto need = [&](bool ok, const char* flag) {
    if (!ok) {
      throw UsageError(std::string(flag) + " is required for family " +
                       f.family);
    }
  };
  const auto scalar_mu = [&]() -> double {
    if (f.mu.empty()) return 0.0;
    if (f.mu.size() != 1) throw UsageError("--mu must be a scalar here");
    return f.mu[0];
  };
  const auto scalar_sigma = [&]() -> double {
    need(!f.sigma.empty(), "--sigma");
    if (f.sigma.size() != 1) throw UsageError("--sigma must be a scalar here");
    return f.sigma[0];
  };
  switch (fam) {
    case Family::beta_gaussian:
    case Family::truncated_parabola: {
      need(!f.sigma.empty(), "--sigma");
      const Matrix sigma = matrix_from_list(
          f.sigma, f.mu.empty() ? 1 : static_cast<int>(f.mu.size()), "--sigma");
      Vector mu = Vector::Zero(sigma.rows());
      if (!f.mu.empty()) {
        if (static_cast<Eigen::Index>(f.mu.size()) != sigma.rows()) {
          throw UsageError("--mu and --sigma dimensions differ");
        }
        mu = Eigen::Map<const Vector>(f.mu.data(), sigma.rows());
      }
      j["mu"] = vector_json(mu);
      j["sigma"] = matrix_json(sigma);
      break;
    }
    case Family::triangular:
      need(f.b_opt->count() > 0, "--b");
      j["mu"] = scalar_mu();
      j["b"] = f.b;
      break;
    case Family::truncated_gaussian:
      need(f.sigma2_opt->count() > 0, "--sigma2");
      need(f.kappa_opt->count() > 0, "--kappa");
      j["kappa"] = f.kappa;
      j["mu"] = scalar_mu();
      j["sigma2"] = f.sigma2;
      break;
    case Family::location_scale:
      need(!f.kernel.empty(), "--kernel");
      j["kernel"] = f.kernel;
      if (f.kappa_opt->count() > 0) j["kappa"] = f.kappa;
      j["mu"] = scalar_mu();
      j["sigma"] = scalar_sigma();
      break;
    case Family::sparse_poisson:
    case Family::sparse_integer_gaussian:
      j["mu"] = scalar_mu();
      break;
    case Family::finite:
      need(!f.scores.empty(), "--scores");
      j["scores"] = f.scores;
      break;
  }
  return j;
}

DensityParams load_density(const std::string& path) {
  const Json j = read_json(path);
  if (j.is_object() && j.contains("alpha")) json_alpha(j["alpha"]);
  return from_json(j);
}

// ---------------------------------------------------------------------------
// Subcommands
// ---------------------------------------------------------------------------

struct MakeCmd {
  DensityFlags flags;
  std::string output;
  void run(std::ostream& out) const {
    const DensityParams d = from_json(density_json_from_flags(flags));
    Sink sink(output, out);
    write_json(*sink, to_json(d));
  }
};

struct PdfCmd {
  std::string density;
  std::vector<double> at;
  std::vector<double> grid;
  std::string output;
  void run(std::ostream& out) const {
    const DensityParams d = load_density(density);
    const int n = density_dim(d);
    std::vector<double> points;
    if (!grid.empty()) {
      if (grid.size() != 3 || n != 1) {
        throw UsageError("--grid takes lo,hi,count for univariate densities");
      }
      const auto count = static_cast<long>(grid[2]);
      if (count < 2 || static_cast<double>(count) != grid[2]) {
        throw UsageError("--grid count must be an integer >= 2");
      }
      for (long i = 0; i < count; ++i) {
        points.push_back(grid[0] + (grid[1] - grid[0]) * double(i) /
                                       double(count - 1));
      }
    }
    if (!at.empty()) {
      if (at.size() % static_cast<std::size_t>(n) != 0) {
        throw UsageError("--at needs a multiple of " + std::to_string(n) +
                         " values");
      }
      points.insert(points.end(), at.begin(), at.end());
    }
    if (points.empty()) throw UsageError("give --at or --grid");
    Sink sink(output, out);
    for (int k = 0; k < n; ++k) *sink << (k ? "," : "") << "t_" << (k + 1);
    *sink << ",p\n";
    for (std::size_t i = 0; i < points.size(); i += static_cast<std::size_t>(n)) {
      const std::span<const double> t(points.data() + i,
                                      static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) *sink << (k ? "," : "") << fmt(t[k]);
      *sink << ',' << fmt(pdf(d, t)) << '\n';
    }
  }
};

struct SampleCmd {
  DensityFlags flags;
  std::string density;
  int n = 0;
  std::uint64_t seed = 0;
  std::string output;
  void run(std::ostream& out) const {
    const DensityParams d = density.empty()
                                ? from_json(density_json_from_flags(flags))
                                : load_density(density);
    const auto* bg = std::get_if<BetaGaussianParams>(&d.record);
    detail::require(bg != nullptr, Errc::unsupported,
                    "sampling is implemented for beta-Gaussian families",
                    "sample");
    RngState rng(seed);
    const Matrix s = sample_beta_gaussian(*bg, n, rng);
    Sink sink(output, out);
    write_samples_csv(*sink, s);
  }
};

struct FitCmd {
  std::string input;
  std::string alpha;
  std::string output;
  void run(std::ostream& out) const {
    const Alpha a = checked_alpha(alpha);
    const Table t = read_csv(input);
    const auto fit = fit_moment_matching(t.rows, a);
    Sink sink(output, out);
    write_json(*sink, to_json(wrap(fit)));
  }
};

struct LossCmd {
  std::string density;
  std::vector<double> score_mu;
  std::vector<double> score_sigma;
  std::string alpha;
  double y = 0.0;
  CLI::Option* y_opt = nullptr;
  bool hessian = false;
  std::string output;

  void run(std::ostream& out) const {
    Json j;
    if (y_opt->count() > 0) {
      if (score_mu.size() != 1 || score_sigma.size() != 1) {
        throw UsageError("point loss needs scalar --score-mu and --score-sigma");
      }
      if (!density.empty()) throw UsageError("--y and --density exclude each other");
      const Alpha a = checked_alpha(alpha.empty() ? std::string("1") : alpha);
      const auto [d_mu, d_s] = point_loss_gradient(score_mu[0], score_sigma[0],
                                                   y, a);
      j["alpha"] = a.value();
      j["loss"] = point_loss(score_mu[0], score_sigma[0], y, a);
      j["d_mu"] = d_mu;
      j["d_sigma2"] = d_s;
    } else {
      if (density.empty()) throw UsageError("give --density or --y");
      if (score_sigma.empty()) throw UsageError("--score-sigma is required");
      const DensityParams d = load_density(density);
      const auto* target = std::get_if<BetaGaussianParams>(&d.record);
      detail::require(target != nullptr, Errc::unsupported,
                      "Fenchel-Young loss needs a beta-Gaussian target",
                      "loss");
      const int n = target->dim();
      const Matrix sf = matrix_from_list(score_sigma, n, "--score-sigma");
      Vector mf = Vector::Zero(n);
      if (!score_mu.empty()) {
        if (static_cast<int>(score_mu.size()) != n) {
          throw UsageError("--score-mu dimension differs from the density");
        }
        mf = Eigen::Map<const Vector>(score_mu.data(), n);
      }
      if (!alpha.empty() &&
          checked_alpha(alpha).value() != target->alpha.value()) {
        throw UsageError("--alpha differs from the density's alpha");
      }
      const Vector theta = to_canonical(mf, spd_decompose(sf));
      const auto ev = fy_gradient_hessian(theta, expected_statistics(*target),
                                          target->alpha, hessian);
      j["alpha"] = target->alpha.value();
      j["loss"] = ev.loss;
      j["theta"] = vector_json(theta);
      j["gradient"] = vector_json(ev.gradient);
      if (ev.hessian) j["hessian"] = matrix_json(*ev.hessian);
    }
    Sink sink(output, out);
    write_json(*sink, j);
  }
};

struct RegressCmd {
  std::string input;
  int synthetic = 0;
  std::vector<double> truth{2.0, 0.0, 0.5, 0.1};
  std::uint64_t seed = 0;
  std::string alpha;
  double holdout = 0.1;
  int steps = 200;
  std::string output;

  static Json model_json(const HeteroscedasticModel& m) {
    Json j;
    j["w_mu"] = m.w_mu;
    j["b_mu"] = m.b_mu;
    j["w_sigma"] = m.w_sigma;
    j["b_sigma"] = m.b_sigma;
    return j;
  }

  void run(std::ostream& out) const {
    const Alpha a = checked_alpha(alpha);
    if (input.empty() == (synthetic == 0)) {
      throw UsageError("give exactly one of --input and --synthetic");
    }
    if (!(holdout >= 0.0 && holdout < 1.0)) {
      throw UsageError("--holdout must be in [0, 1)");
    }
    std::vector<double> x, y;
    if (!input.empty()) {
      const Table t = read_csv(input);
      const auto col = [&](const char* name, Eigen::Index fallback) {
        const auto it = std::find(t.header.begin(), t.header.end(), name);
        return it == t.header.end() ? fallback
                                    : static_cast<Eigen::Index>(it - t.header.begin());
      };
      if (t.rows.cols() < 2) throw Error(Errc::parse, "need x and y columns", input);
      const Eigen::Index cx = col("x", 0), cy = col("y", 1);
      for (Eigen::Index i = 0; i < t.rows.rows(); ++i) {
        x.push_back(t.rows(i, cx));
        y.push_back(t.rows(i, cy));
      }
    } else {
      if (truth.size() != 4) throw UsageError("--truth takes 4 values");
      RngState rng(seed);
      auto d = synthetic_regression_data({truth[0], truth[1], truth[2], truth[3]},
                                         a, synthetic, rng);
      x = std::move(d.x);
      y = std::move(d.y);
    }

    // The largest-x points are held out, so the test set is an
    // extrapolation in x.
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t i, std::size_t k) { return x[i] < x[k]; });
    const auto n_hold = static_cast<std::size_t>(
        std::floor(holdout * static_cast<double>(x.size())));
    std::vector<char> held(x.size(), 0);
    for (std::size_t i = x.size() - n_hold; i < x.size(); ++i) held[order[i]] = 1;
    std::vector<double> xt, yt, xh, yh;
    for (std::size_t i = 0; i < x.size(); ++i) {
      (held[i] ? xh : xt).push_back(x[i]);
      (held[i] ? yh : yt).push_back(y[i]);
    }
    detail::require(xt.size() >= 4, Errc::domain,
                    "need at least 4 training points", "regress");

    // least-squares start for the mean, residual scale for sigma
    const double nt = static_cast<double>(xt.size());
    const double mx = std::accumulate(xt.begin(), xt.end(), 0.0) / nt;
    const double my = std::accumulate(yt.begin(), yt.end(), 0.0) / nt;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < xt.size(); ++i) {
      sxx += (xt[i] - mx) * (xt[i] - mx);
      sxy += (xt[i] - mx) * (yt[i] - my);
    }
    HeteroscedasticModel init;
    init.w_mu = sxx > 0.0 ? sxy / sxx : 0.0;
    init.b_mu = my - init.w_mu * mx;
    double rss = 0.0;
    for (std::size_t i = 0; i < xt.size(); ++i) {
      const double r = yt[i] - init.mean(xt[i]);
      rss += r * r;
    }
    init.b_sigma = rss > 0.0 ? std::sqrt(rss / nt) : 1.0;

    HeteroscedasticOptions opt;
    opt.steps = steps;
    const auto fit = heteroscedastic_fit(xt, yt, a, init, opt);
    opt.fix_w_sigma = true;
    const auto base = heteroscedastic_fit(xt, yt, a, init, opt);

    Json j = model_json(fit.model);
    j["alpha"] = a.value();
    j["n_train"] = xt.size();
    j["n_heldout"] = xh.size();
    j["iterations"] = fit.iterations;
    j["train_loss"] = fit.train_loss;
    j["heldout_loss"] = xh.empty() ? Json(nullptr)
                                   : Json(mean_regression_loss(fit.model, xh, yh, a));
    Json jb = model_json(base.model);
    jb["train_loss"] = base.train_loss;
    jb["heldout_loss"] = xh.empty() ? Json(nullptr)
                                    : Json(mean_regression_loss(base.model, xh, yh, a));
    j["baseline"] = std::move(jb);
    Sink sink(output, out);
    write_json(*sink, j);
  }
};

struct AttentionCmd {
  std::string input;
  std::string output;

  void run(std::ostream& out) const {
    constexpr const char* ctx = "attention-demo";
    const Json j = read_json(input);
    detail::require(j.is_object(), Errc::parse, "input must be a JSON object",
                    ctx);
    for (const char* key : {"alpha", "mu", "sigma", "basis"}) {
      detail::require(j.contains(key), Errc::parse,
                      (std::string("missing field '") + key + "'").c_str(), ctx);
    }
    const Alpha a = json_alpha(j["alpha"]);
    QuadraticScore s{detail::json_vector(j["mu"], ctx),
                     spd_decompose(detail::json_matrix(j["sigma"], ctx)), a};
    const Json& jb = j["basis"];
    detail::require(jb.is_array() && !jb.empty(), Errc::parse,
                    "basis must be a non-empty array", ctx);
    AttentionBasis basis;
    for (const auto& c : jb) {
      detail::require(c.is_object() && c.contains("mu") && c.contains("sigma"),
                      Errc::parse, "basis entries need 'mu' and 'sigma'", ctx);
      basis.components.push_back(
          {detail::json_vector(c["mu"], ctx),
           spd_decompose(detail::json_matrix(c["sigma"], ctx))});
    }
    const auto res = attention(s, basis, true);
    Json o;
    o["r"] = vector_json(res.r);
    o["jacobian"] = matrix_json(*res.jacobian);
    if (j.contains("H")) {
      const Matrix h = json_rows(j["H"], ctx);
      const double lambda = j.contains("lambda")
                                ? detail::json_number(j, "lambda", ctx)
                                : 0.1;
      Matrix loc;
      if (j.contains("locations")) {
        const Json& jl = j["locations"];
        detail::require(jl.is_array() && !jl.empty(), Errc::parse,
                        "locations must be a non-empty array", ctx);
        loc = jl[0].is_number() ? Matrix(detail::json_vector(jl, ctx))
                                : json_rows(jl, ctx);
      } else {
        detail::require(s.dim() == 1, Errc::parse,
                        "2-d attention needs explicit 'locations'", ctx);
        // t_l = l / L, l = 1..L
        loc.resize(h.cols(), 1);
        for (Eigen::Index l = 0; l < h.cols(); ++l) {
          loc(l, 0) = static_cast<double>(l + 1) / static_cast<double>(h.cols());
        }
      }
      detail::require(loc.cols() == s.dim(), Errc::shape_mismatch,
                      "locations must match the score dimension", ctx);
      const Matrix b = fit_value_function(h, loc, basis, lambda);
      o["context"] = vector_json(context(b, res.r));
    }
    Sink sink(output, out);
    write_json(*sink, o);
  }

  /// Rectangular matrix from an array of equal-length numeric rows.
  static Matrix json_rows(const Json& j, const char* ctx) {
    detail::require(j.is_array() && !j.empty() && j[0].is_array(), Errc::parse,
                    "expected an array of rows", ctx);
    const auto rows = static_cast<Eigen::Index>(j.size());
    const auto cols = static_cast<Eigen::Index>(j[0].size());
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i) {
      const Json& row = j[static_cast<std::size_t>(i)];
      detail::require(row.is_array() &&
                          static_cast<Eigen::Index>(row.size()) == cols,
                      Errc::parse, "rows must have equal length", ctx);
      for (Eigen::Index k = 0; k < cols; ++k) {
        const Json& v = row[static_cast<std::size_t>(k)];
        detail::require(v.is_number(), Errc::parse, "entries must be numbers",
                        ctx);
        m(i, k) = v.get<double>();
      }
    }
    return m;
  }
};

std::vector<double> grid_points(double lo, double hi, double h) {
  if (!(h > 0.0) || !(hi > lo)) throw UsageError("grid needs t-max > t-min and h > 0");
  const auto steps = static_cast<long>(std::floor((hi - lo) / h + 1e-9));
  std::vector<double> t;
  for (long i = 0; i <= steps; ++i) t.push_back(lo + double(i) * h);
  return t;
}

struct FusedmaxCmd {
  std::string score = "parabola";
  double sigma = 1.0;
  double gamma = 1.0;
  std::string mode = "rof";
  double grid_h = 1e-2;
  double t_min = -3.0;
  double t_max = 3.0;
  std::string output;
  std::string summary;

  void run(std::ostream& out) const {
    const EvenScore f = EvenScore::from_name(score, sigma);
    const std::vector<double> t = grid_points(t_min, t_max, grid_h);
    std::vector<double> p(t.size());
    Json j;
    j["mode"] = mode;
    j["gamma"] = gamma;
    if (mode == "rof") {
      const auto d = rof_fusedmax_closed(f, gamma);
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = d.pdf(t[i]);
      j["a"] = d.a;
      j["b"] = d.b;
      j["tau"] = d.tau;
    } else if (mode == "sobolev") {
      const auto d = sobolev_smooth(f, gamma);
      for (std::size_t i = 0; i < t.size(); ++i) p[i] = d.pdf(t[i]);
      j["b"] = d.b;
      j["tau"] = d.tau;
      j["C"] = d.C;
    } else if (mode == "discrete") {
      std::vector<double> scores(t.size());
      for (std::size_t i = 0; i < t.size(); ++i) scores[i] = f.f(t[i]);
      const std::vector<double> u = tv_denoise(scores, gamma / grid_h);
      const double tau = detail::sparsemax_threshold(u, 1.0 / grid_h);
      double top = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        p[i] = std::max(u[i] - tau, 0.0);
        top = std::max(top, p[i]);
      }
      // half-widths read off the grid: support and top plateau
      double a = 0.0, b = 0.0;
      for (std::size_t i = 0; i < t.size(); ++i) {
        if (p[i] > 0.0) b = std::max(b, std::abs(t[i]));
        if (p[i] >= top - 1e-12 * top) a = std::max(a, std::abs(t[i]));
      }
      j["a"] = a;
      j["b"] = b;
      j["tau"] = tau;
      j["h"] = grid_h;
    } else {
      throw UsageError("--mode must be rof, sobolev or discrete");
    }
    {
      Sink sink(output, out);
      *sink << "t,p\n";
      for (std::size_t i = 0; i < t.size(); ++i) {
        *sink << fmt(t[i]) << ',' << fmt(p[i]) << '\n';
      }
    }
    if (!summary.empty()) {
      Sink sink(summary, out);
      write_json(*sink, j);
    }
  }
};

struct FigureCmd {
  std::string name;
  int n = 10000;
  std::uint64_t seed = 0;
  std::string output;

  void run(std::ostream& out) const {
    Sink sink(output, out);
    std::ostream& os = *sink;
    if (name == "beta-gaussian-1d") {
      beta_gaussian_1d(os);
    } else if (name == "moment-matching") {
      moment_matching(os);
    } else if (name == "fusedmax") {
      fusedmax(os);
    } else if (name == "regression") {
      regression(os);
    } else {
      throw UsageError("unknown figure '" + name +
                       "'; use beta-gaussian-1d, moment-matching, fusedmax "
                       "or regression");
    }
  }

  static constexpr double kAlphas[] = {1.0, 4.0 / 3.0, 1.5, 2.0};

  // univariate curves at sigma^2 = 1 for the implemented alpha >= 1
  static void beta_gaussian_1d(std::ostream& os) {
    std::vector<BetaGaussianParams> ps;
    for (double a : kAlphas) ps.push_back(make_beta_gaussian(Alpha(a), 0.0, 1.0));
    os << "t,alpha_1,alpha_4_3,alpha_3_2,alpha_2\n";
    for (double t : grid_points(-4.0, 4.0, 0.01)) {
      os << fmt(t);
      for (const auto& p : ps) {
        os << ',' << fmt(beta_gaussian_pdf(p, std::span<const double>(&t, 1)));
      }
      os << '\n';
    }
  }

  // truth and moment-matched fit for isotropic and anisotropic 2-d cases
  void moment_matching(std::ostream& os) const {
    const std::pair<const char*, Matrix> cases[] = {
        {"isotropic", Matrix::Identity(2, 2)},
        {"anisotropic", (Matrix(2, 2) << 0.6, 0.4, 0.4, 0.48).finished()}};
    os << "case,alpha,kind,mu_1,mu_2,sigma_11,sigma_12,sigma_22,tau\n";
    std::uint64_t stream = 0;
    for (const auto& [label, sigma] : cases) {
      for (double a : {4.0 / 3.0, 1.5, 2.0}) {
        const auto truth =
            make_beta_gaussian(Alpha(a), Vector::Zero(2), spd_decompose(sigma));
        RngState rng = RngState(seed).derive(stream++);
        const auto fit =
            fit_moment_matching(sample_beta_gaussian(truth, n, rng), Alpha(a));
        for (const auto* p : {&truth, &fit}) {
          const Matrix& s = p->sigma.matrix();
          os << label << ',' << fmt(a) << ',' << (p == &truth ? "truth" : "fit")
             << ',' << fmt(p->mu(0)) << ',' << fmt(p->mu(1)) << ','
             << fmt(s(0, 0)) << ',' << fmt(s(0, 1)) << ',' << fmt(s(1, 1))
             << ',' << fmt(p->tau) << '\n';
        }
      }
    }
  }

  // ROF (top) and Sobolev (bottom) panels, both scores, several gamma
  static void fusedmax(std::ostream& os) {
    const std::vector<double> t = grid_points(-3.0, 3.0, 0.01);
    os << "method,score,gamma,t,p\n";
    for (const char* method : {"rof", "sobolev"}) {
      for (const char* score : {"abs", "parabola"}) {
        const EvenScore f = EvenScore::from_name(score, 1.0);
        for (double g : {0.1, 0.5, 1.0, 2.0}) {
          std::function<double(double)> pdf_at;
          if (std::string(method) == "rof") {
            pdf_at = [d = rof_fusedmax_closed(f, g)](double x) { return d.pdf(x); };
          } else {
            pdf_at = [d = sobolev_smooth(f, g)](double x) { return d.pdf(x); };
          }
          for (double x : t) {
            os << method << ',' << score << ',' << fmt(g) << ',' << fmt(x) << ','
               << fmt(pdf_at(x)) << '\n';
          }
        }
      }
    }
  }

  // synthetic data, fitted mean and support band (+-2 sd for alpha = 1)
  void regression(std::ostream& os) const {
    const HeteroscedasticModel truth{2.0, 0.0, 0.5, 0.1};
    os << "alpha,kind,x,y,lower,upper\n";
    std::uint64_t stream = 0;
    for (double a : kAlphas) {
      const Alpha alpha(a);
      RngState rng = RngState(seed).derive(stream++);
      const auto d = synthetic_regression_data(truth, alpha, n, rng);
      const auto fit = heteroscedastic_fit(d.x, d.y, alpha, {0.0, 0.0, 0.0, 1.0});
      for (std::size_t i = 0; i < d.x.size(); ++i) {
        os << fmt(a) << ",data," << fmt(d.x[i]) << ',' << fmt(d.y[i]) << ",,\n";
      }
      const double r = alpha.is_shannon() ? 2.0 : beta_gaussian_radius(1, alpha);
      const double stretch =
          alpha.is_shannon() ? 1.0 : 1.0 - beta_gaussian_det_exponent(1, alpha);
      for (double x : grid_points(0.0, 1.0, 0.01)) {
        const double m = fit.model.mean(x);
        const double half = r * std::pow(std::abs(fit.model.scale(x)), stretch);
        os << fmt(a) << ",fit," << fmt(x) << ',' << fmt(m) << ','
           << fmt(m - half) << ',' << fmt(m + half) << '\n';
      }
    }
  }
};

void write_error(std::ostream& err, std::string_view code,
                 const std::string& message, const std::string& context) {
  Json j;
  j["code"] = code;
  j["message"] = message;
  j["context"] = context;
  err << j.dump() << '\n';
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Sparse continuous distributions: densities, samplers, "
               "Fenchel-Young losses, continuous attention and fusedmax.",
               "sparsedist"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Expand all help");

  MakeCmd make;
  auto* c_make = app.add_subcommand("make", "Build a density and print its JSON");
  add_density_flags(c_make, make.flags);
  c_make->add_option("-o,--output", make.output, "output file (default stdout)");

  PdfCmd pdf_cmd;
  auto* c_pdf = app.add_subcommand("pdf", "Evaluate a density as CSV");
  c_pdf->add_option("--density", pdf_cmd.density, "density JSON file, - for stdin")
      ->required();
  c_pdf->add_option("--at", pdf_cmd.at, "points, N values per point")
      ->delimiter(',');
  c_pdf->add_option("--grid", pdf_cmd.grid, "lo,hi,count (univariate)")
      ->delimiter(',');
  c_pdf->add_option("-o,--output", pdf_cmd.output, "output file (default stdout)");

  SampleCmd sample;
  auto* c_sample = app.add_subcommand("sample", "Draw samples as CSV");
  add_density_flags(c_sample, sample.flags);
  c_sample->add_option("--density", sample.density,
                       "density JSON file instead of family flags");
  c_sample->add_option("-n", sample.n, "number of samples")
      ->required()
      ->check(CLI::NonNegativeNumber);
  c_sample->add_option("--seed", sample.seed, "RNG seed")->capture_default_str();
  c_sample->add_option("-o,--output", sample.output, "output file (default stdout)");

  FitCmd fit;
  auto* c_fit = app.add_subcommand("fit", "Moment-match a beta-Gaussian to CSV samples");
  c_fit->add_option("--input", fit.input, "samples CSV, one point per row")
      ->required();
  c_fit->add_option("--alpha", fit.alpha, "entropic index")->required();
  c_fit->add_option("-o,--output", fit.output, "output file (default stdout)");

  LossCmd loss;
  auto* c_loss = app.add_subcommand(
      "loss", "Fenchel-Young loss of a quadratic score, or the point loss");
  c_loss->add_option("--density", loss.density, "beta-Gaussian target JSON");
  c_loss->add_option("--score-mu", loss.score_mu, "score location")
      ->delimiter(',');
  c_loss->add_option("--score-sigma", loss.score_sigma,
                     "score scale: variance or N*N row-major entries")
      ->delimiter(',');
  c_loss->add_option("--alpha", loss.alpha, "entropic index");
  loss.y_opt = c_loss->add_option("--y", loss.y, "point target (cross-Omega loss)");
  c_loss->add_flag("--hessian", loss.hessian, "also report the Hessian (N <= 2)");
  c_loss->add_option("-o,--output", loss.output, "output file (default stdout)");

  RegressCmd reg;
  auto* c_reg = app.add_subcommand("regress", "Heteroscedastic beta-Gaussian regression");
  c_reg->add_option("--input", reg.input, "CSV with columns x,y");
  c_reg->add_option("--synthetic", reg.synthetic,
                    "generate this many points from --truth instead")
      ->check(CLI::PositiveNumber);
  c_reg->add_option("--truth", reg.truth, "w_mu,b_mu,w_sigma,b_sigma")
      ->delimiter(',')
      ->capture_default_str();
  c_reg->add_option("--seed", reg.seed, "RNG seed for --synthetic")
      ->capture_default_str();
  c_reg->add_option("--alpha", reg.alpha, "entropic index")->required();
  c_reg->add_option("--holdout", reg.holdout,
                    "fraction of largest-x points held out")
      ->capture_default_str();
  c_reg->add_option("--steps", reg.steps, "Newton iterations")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_reg->add_option("-o,--output", reg.output, "output file (default stdout)");

  AttentionCmd att;
  auto* c_att = app.add_subcommand(
      "attention-demo",
      "Continuous attention r and Jacobian from JSON {alpha, mu, sigma, basis, "
      "H?, lambda?, locations?}");
  c_att->add_option("--input", att.input, "JSON file, - for stdin")->required();
  c_att->add_option("-o,--output", att.output, "output file (default stdout)");

  FusedmaxCmd fm;
  auto* c_fm = app.add_subcommand("fusedmax-demo",
                                  "Fusedmax density of an even score as CSV");
  c_fm->add_option("--score", fm.score, "parabola or abs")
      ->check(CLI::IsMember({"parabola", "abs"}))
      ->capture_default_str();
  c_fm->add_option("--sigma", fm.sigma, "score scale")->capture_default_str();
  c_fm->add_option("--gamma", fm.gamma, "regularization strength")
      ->capture_default_str();
  c_fm->add_option("--mode", fm.mode, "rof, sobolev or discrete")
      ->check(CLI::IsMember({"rof", "sobolev", "discrete"}))
      ->capture_default_str();
  c_fm->add_option("--grid-h", fm.grid_h, "grid spacing")->capture_default_str();
  c_fm->add_option("--t-min", fm.t_min, "grid start")->capture_default_str();
  c_fm->add_option("--t-max", fm.t_max, "grid end")->capture_default_str();
  c_fm->add_option("-o,--output", fm.output, "CSV file (default stdout)");
  c_fm->add_option("--summary", fm.summary, "JSON file for {a, b, tau, C}");

  FigureCmd fig;
  auto* c_fig = app.add_subcommand("figure", "Emit plot data as CSV");
  c_fig->add_option("--name", fig.name,
                    "beta-gaussian-1d, moment-matching, fusedmax or regression")
      ->required();
  c_fig->add_option("-n", fig.n, "samples per panel (sampling figures)")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  c_fig->add_option("--seed", fig.seed, "RNG seed")->capture_default_str();
  c_fig->add_option("-o,--output", fig.output, "output file (default stdout)");

  std::vector<const char*> argv{"sparsedist"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what(), "sparsedist");
    return 2;
  }

  try {
    if (c_make->parsed()) make.run(out);
    else if (c_pdf->parsed()) pdf_cmd.run(out);
    else if (c_sample->parsed()) sample.run(out);
    else if (c_fit->parsed()) fit.run(out);
    else if (c_loss->parsed()) loss.run(out);
    else if (c_reg->parsed()) reg.run(out);
    else if (c_att->parsed()) att.run(out);
    else if (c_fm->parsed()) fm.run(out);
    else if (c_fig->parsed()) fig.run(out);
  } catch (const UsageError& e) {
    write_error(err, "usage", e.what(), app.get_subcommands().front()->get_name());
    return 2;
  } catch (const Error& e) {
    write_error(err, errc_name(e.code()), e.what(), e.context());
    return e.code() == Errc::parse ? 2 : 1;
  } catch (const Json::exception& e) {
    write_error(err, "parse", e.what(), app.get_subcommands().front()->get_name());
    return 2;
  }
  return 0;
}

}  // namespace sparsedist::cli
