// SPDX-License-Identifier: Apache-2.0
//
// JSON (de)serialization of DensityParams. Cached fields are written for
// inspection and recomputed on read; a stored cache that disagrees with the
// recomputation is rejected.
#pragma once

#include <cmath>
#include <string>

#include "json.hpp"
#include "sparsedist/densities.hpp"

namespace sparsedist {

using Json = nlohmann::json;

namespace detail {

inline Json matrix_to_json(const Matrix& m) {
  Json rows = Json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

inline Json vector_to_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

inline double json_number(const Json& j, const char* key, const char* ctx) {
  require(j.contains(key), Errc::parse,
          (std::string("missing field '") + key + "'").c_str(), ctx);
  require(j.at(key).is_number(), Errc::parse,
          (std::string("field '") + key + "' must be a number").c_str(), ctx);
  return j.at(key).get<double>();
}

/// Accepts a number (1-d) or an array.
inline Vector json_vector(const Json& j, const char* ctx) {
  if (j.is_number()) return Vector::Constant(1, j.get<double>());
  require(j.is_array() && !j.empty(), Errc::parse,
          "expected a number or a non-empty array", ctx);
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    require(j[i].is_number(), Errc::parse, "array entries must be numbers", ctx);
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return v;
}

/// Accepts a number (1x1) or an array of equal-length rows.
inline Matrix json_matrix(const Json& j, const char* ctx) {
  if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
  require(j.is_array() && !j.empty(), Errc::parse,
          "expected a number or an array of rows", ctx);
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Json& row = j[static_cast<std::size_t>(i)];
    require(row.is_array() && static_cast<Eigen::Index>(row.size()) == n,
            Errc::parse, "matrix must be square", ctx);
    for (Eigen::Index k = 0; k < n; ++k) {
      require(row[static_cast<std::size_t>(k)].is_number(), Errc::parse,
              "matrix entries must be numbers", ctx);
      m(i, k) = row[static_cast<std::size_t>(k)].get<double>();
    }
  }
  return m;
}

inline void check_cached(const Json& j, const char* key, double value,
                         const char* ctx) {
  if (!j.contains(key) || !std::isfinite(value)) return;
  const double stored = json_number(j, key, ctx);
  const double scale = std::max(1.0, std::abs(value));
  require(std::abs(stored - value) <= 1e-9 * scale, Errc::parse,
          (std::string("cached field '") + key +
           "' is inconsistent with the parameters")
              .c_str(),
          ctx);
}

}  // namespace detail

inline Json to_json(const DensityParams& d) {
  Json j;
  j["family"] = std::string(family_name(d.family));
  j["alpha"] = density_alpha(d).value();
  std::visit(
      [&](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, BetaGaussianParams>) {
          j["mu"] = detail::vector_to_json(r.mu);
          j["sigma"] = detail::matrix_to_json(r.sigma.matrix());
          if (!r.is_gaussian()) {
            j["radius"] = r.radius;
            j["tau"] = r.tau;
          }
          j["sigma_tilde"] = detail::matrix_to_json(r.sigma_tilde.matrix());
        } else if constexpr (std::is_same_v<T, TriangularParams>) {
          j["mu"] = r.mu;
          j["b"] = r.b;
          j["tau"] = r.tau;
        } else if constexpr (std::is_same_v<T, TruncatedGaussianParams>) {
          j["kappa"] = r.kappa;
          j["mu"] = r.mu;
          j["sigma2"] = r.sigma2;
          if (std::isfinite(r.a)) j["a"] = r.a;
          j["tau"] = r.tau;
        } else if constexpr (std::is_same_v<T, LocationScaleParams>) {
          detail::require(r.kernel.name != "custom", Errc::unsupported,
                          "custom kernels cannot be serialized", "to_json");
          j["kernel"] = r.kernel.name;
          if (r.kernel.name == "gaussian") j["kappa"] = r.kernel.kappa;
          j["mu"] = r.mu;
          j["sigma"] = r.sigma;
          j["a"] = r.a;
          j["tau"] = r.tau;
        } else if constexpr (std::is_same_v<T, IntegerParams>) {
          j["mu"] = r.mu;
          j["tau"] = r.tau;
          j["t_min"] = r.t_min;
          j["t_max"] = r.t_max;
          j["pmf"] = r.pmf;
        } else {
          j["scores"] = r.scores;
          j["probs"] = r.probs.probs;
        }
      },
      d.record);
  return j;
}

/// Rebuilds a density from its JSON form. Base parameters are required;
/// cached fields are optional and cross-checked.
inline DensityParams from_json(const Json& j) {
  constexpr const char* kCtx = "from_json";
  detail::require(j.is_object(), Errc::parse, "density must be a JSON object",
                  kCtx);
  detail::require(j.contains("family") && j["family"].is_string(), Errc::parse,
                  "missing string field 'family'", kCtx);
  const Family fam = parse_family(j["family"].get<std::string>());
  const auto alpha_or = [&](double dflt) {
    return j.contains("alpha") ? detail::json_number(j, "alpha", kCtx) : dflt;
  };
  DensityParams d{fam, TriangularParams{}};
  switch (fam) {
    case Family::beta_gaussian:
    case Family::truncated_parabola: {
      detail::require(j.contains("mu") && j.contains("sigma"), Errc::parse,
                      "beta-Gaussian needs 'mu' and 'sigma'", kCtx);
      Vector mu = detail::json_vector(j["mu"], kCtx);
      SpdMatrix sigma = spd_decompose(detail::json_matrix(j["sigma"], kCtx));
      if (fam == Family::truncated_parabola) {
        detail::require(alpha_or(2.0) == 2.0, Errc::parse,
                        "truncated_parabola has alpha = 2", kCtx);
        d = make_truncated_paraboloid(std::move(mu), std::move(sigma));
      } else {
        d = wrap(make_beta_gaussian(Alpha(alpha_or(1.0)), std::move(mu),
                                    std::move(sigma)));
      }
      const auto& bg = d.as<BetaGaussianParams>();
      detail::check_cached(j, "radius", bg.radius, kCtx);
      detail::check_cached(j, "tau", bg.tau, kCtx);
      break;
    }
    case Family::triangular:
      d = wrap(make_triangular(detail::json_number(j, "mu", kCtx),
                               detail::json_number(j, "b", kCtx)));
      detail::check_cached(j, "tau", density_tau(d), kCtx);
      break;
    case Family::truncated_gaussian:
      d = wrap(make_truncated_gaussian(detail::json_number(j, "kappa", kCtx),
                                       detail::json_number(j, "mu", kCtx),
                                       detail::json_number(j, "sigma2", kCtx)));
      detail::check_cached(j, "tau", density_tau(d), kCtx);
      break;
    case Family::location_scale: {
      detail::require(j.contains("kernel") && j["kernel"].is_string(),
                      Errc::parse, "location_scale needs 'kernel'", kCtx);
      const double kappa = j.contains("kappa")
                               ? detail::json_number(j, "kappa", kCtx)
                               : 1.0;
      d = wrap(make_location_scale(
          ScaleKernel::from_name(j["kernel"].get<std::string>(), kappa),
          detail::json_number(j, "mu", kCtx),
          detail::json_number(j, "sigma", kCtx)));
      detail::check_cached(j, "tau", density_tau(d), kCtx);
      break;
    }
    case Family::sparse_poisson:
      d = wrap(make_sparse_poisson(detail::json_number(j, "mu", kCtx)));
      detail::check_cached(j, "tau", density_tau(d), kCtx);
      break;
    case Family::sparse_integer_gaussian:
      d = wrap(make_sparse_integer_gaussian(detail::json_number(j, "mu", kCtx)));
      detail::check_cached(j, "tau", density_tau(d), kCtx);
      break;
    case Family::finite: {
      detail::require(j.contains("scores") && j["scores"].is_array(),
                      Errc::parse, "finite needs 'scores'", kCtx);
      std::vector<double> scores;
      for (const auto& v : j["scores"]) {
        detail::require(v.is_number(), Errc::parse, "scores must be numbers",
                        kCtx);
        scores.push_back(v.get<double>());
      }
      d = wrap(make_finite(std::move(scores), Alpha(alpha_or(2.0))));
      break;
    }
  }
  return d;
}

}  // namespace sparsedist
