#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "roi10d/tsdf.hpp"

namespace roi10d {

inline Eigen::VectorXd normalize_latent(const Eigen::VectorXd& v) {
  const double norm = v.norm();
  if (norm <= 1e-12) throw std::domain_error("normalize_latent: near-zero vector");
  return v / norm;
}

namespace detail {

inline void require_unit(const Eigen::VectorXd& s, const char* who) {
  if (std::abs(s.norm() - 1.0) > 1e-9)
    throw std::domain_error(std::string(who) + ": input must be a unit vector");
}

}  // namespace detail

// Geodesic interpolation on the unit sphere. Endpoints are returned
// bit-exactly; an antipodal pair has no unique arc and is rejected.
inline Eigen::VectorXd slerp(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double t) {
  detail::require_unit(a, "slerp");
  detail::require_unit(b, "slerp");
  if (a.size() != b.size()) throw std::domain_error("slerp: dimension mismatch");
  if (t < 0.0 || t > 1.0) throw std::domain_error("slerp: t outside [0, 1]");
  if (t == 0.0) return a;
  if (t == 1.0) return b;
  const double dot = std::clamp(a.dot(b), -1.0, 1.0);
  if (dot <= -1.0 + 1e-12) throw std::domain_error("slerp: antipodal inputs");
  const double angle = std::acos(dot);
  if (angle < 1e-9) return ((1.0 - t) * a + t * b).normalized();
  const double inv_sin = 1.0 / std::sin(angle);
  return (std::sin((1.0 - t) * angle) * inv_sin) * a + (std::sin(t * angle) * inv_sin) * b;
}

// Angle between the lines spanned by two unit codes: arccos(2<s,s*>^2 - 1),
// evaluated through the chord length so values near 0 and pi stay accurate.
inline double shape_loss(const Eigen::VectorXd& s, const Eigen::VectorXd& s_star) {
  detail::require_unit(s, "shape_loss");
  detail::require_unit(s_star, "shape_loss");
  if (s.size() != s_star.size()) throw std::domain_error("shape_loss: dimension mismatch");
  const double chord = std::min((s - s_star).norm(), (s + s_star).norm());
  return 4.0 * std::asin(std::min(1.0, 0.5 * chord));
}

class WeiszfeldNonConvergence : public std::runtime_error {
 public:
  WeiszfeldNonConvergence(std::string message, Eigen::VectorXd iterate)
      : std::runtime_error(std::move(message)), last_iterate(std::move(iterate)) {}
  Eigen::VectorXd last_iterate;
};

inline double median_objective(const std::vector<Eigen::VectorXd>& points,
                               const Eigen::VectorXd& y) {
  double sum = 0.0;
  for (const auto& p : points) sum += (p - y).norm();
  return sum;
}

// Geometric median by the Weiszfeld fixed point. When the iterate lands on a
// data point, that point is left out of the weighted mean and the iterate is
// kept only if the remaining pull is too weak to move it (the standard
// singularity rule, with a damped escape step otherwise).
inline Eigen::VectorXd weiszfeld_median(const std::vector<Eigen::VectorXd>& points,
                                        double tol = 1e-10, int max_iter = 1000,
                                        std::vector<Eigen::VectorXd>* trace = nullptr) {
  if (points.empty()) throw std::domain_error("weiszfeld_median: no points");
  const auto dim = points.front().size();
  for (const auto& p : points)
    if (p.size() != dim) throw std::domain_error("weiszfeld_median: dimension mismatch");

  Eigen::VectorXd y = Eigen::VectorXd::Zero(dim);
  for (const auto& p : points) y += p;
  y /= static_cast<double>(points.size());
  if (trace) trace->push_back(y);

  for (int iter = 0; iter < max_iter; ++iter) {
    Eigen::VectorXd weighted = Eigen::VectorXd::Zero(dim);
    Eigen::VectorXd pull = Eigen::VectorXd::Zero(dim);
    double weight_sum = 0.0;
    int coincident = 0;
    for (const auto& p : points) {
      const double d = (p - y).norm();
      if (d <= 1e-12) {
        ++coincident;
        continue;
      }
      weighted += p / d;
      pull += (p - y) / d;
      weight_sum += 1.0 / d;
    }
    if (coincident > 0) {
      const double pull_norm = pull.norm();
      if (pull_norm <= static_cast<double>(coincident)) return y;  // optimal
      if (weight_sum <= 0.0) return y;  // all points coincide
      const Eigen::VectorXd t = weighted / weight_sum;
      const double damping = std::min(1.0, coincident / pull_norm);
      const Eigen::VectorXd next = (1.0 - damping) * t + damping * y;
      if (trace) trace->push_back(next);
      if ((next - y).norm() < tol) return next;
      y = next;
      continue;
    }
    const Eigen::VectorXd next = weighted / weight_sum;
    if (trace) trace->push_back(next);
    if ((next - y).norm() < tol) return next;
    y = next;
  }
  throw WeiszfeldNonConvergence("weiszfeld_median: no convergence after " +
                                    std::to_string(max_iter) + " iterations",
                                y);
}

// Median of unit codes: ambient geometric median re-projected to the sphere.
inline Eigen::VectorXd latent_median(const std::vector<Eigen::VectorXd>& latents,
                                     double tol = 1e-10, int max_iter = 1000) {
  for (const auto& s : latents) detail::require_unit(s, "latent_median");
  return normalize_latent(weiszfeld_median(latents, tol, max_iter));
}

struct AeLoss {
  double reconstruction = 0.0;  // mean absolute voxel error
  double latent_norm = 0.0;     // distance of the raw code from the sphere
  double smoothness = 0.0;      // mean forward-difference total variation
  double total() const { return reconstruction + latent_norm + smoothness; }
};

inline AeLoss tsdf_ae_loss(const TsdfGrid& reconstruction, const Eigen::VectorXd& latent_prenorm,
                           const TsdfGrid& target) {
  if (!reconstruction.same_lattice(target))
    throw std::domain_error("tsdf_ae_loss: grids have different dims");
  const Eigen::Vector3i d = reconstruction.dims();

  AeLoss loss;
  double abs_sum = 0.0;
  for (std::size_t i = 0; i < reconstruction.voxel_count(); ++i)
    abs_sum += std::abs(static_cast<double>(reconstruction.values()[i]) - target.values()[i]);
  loss.reconstruction = abs_sum / static_cast<double>(reconstruction.voxel_count());

  loss.latent_norm = std::abs(latent_prenorm.norm() - 1.0);

  double tv_sum = 0.0;
  std::size_t tv_terms = 0;
  for (int k = 0; k < d.z(); ++k)
    for (int j = 0; j < d.y(); ++j)
      for (int i = 0; i < d.x(); ++i) {
        const double v = reconstruction.at(i, j, k);
        if (i + 1 < d.x()) { tv_sum += std::abs(reconstruction.at(i + 1, j, k) - v); ++tv_terms; }
        if (j + 1 < d.y()) { tv_sum += std::abs(reconstruction.at(i, j + 1, k) - v); ++tv_terms; }
        if (k + 1 < d.z()) { tv_sum += std::abs(reconstruction.at(i, j, k + 1) - v); ++tv_terms; }
      }
  loss.smoothness = tv_terms > 0 ? tv_sum / static_cast<double>(tv_terms) : 0.0;
  return loss;
}

inline const std::vector<std::string>& codebook_class_tags() {
  static const std::vector<std::string> tags = {"SmallCar", "Car", "LargeCar", "SUV"};
  return tags;
}

struct CodebookEntry {
  std::string id;
  Eigen::VectorXd latent;
  std::string class_tag;
  TsdfGrid tsdf;
};

// Stands in for the decoder: maps a latent code to the stored grid of the
// nearest entry on the sphere. Ties go to the lower index.
struct Codebook {
  std::vector<CodebookEntry> entries;

  const CodebookEntry& nearest(const Eigen::VectorXd& query) const {
    if (entries.empty()) throw std::domain_error("codebook: empty");
    detail::require_unit(query, "codebook");
    int best = 0;
    double best_angle = std::numeric_limits<double>::infinity();
    for (int i = 0; i < static_cast<int>(entries.size()); ++i) {
      const double angle =
          std::acos(std::clamp(query.dot(entries[i].latent), -1.0, 1.0));
      if (angle < best_angle) {
        best_angle = angle;
        best = i;
      }
    }
    return entries[best];
  }
};

inline const TsdfGrid& latent_to_tsdf(const Eigen::VectorXd& s, const Codebook& codebook) {
  return codebook.nearest(s).tsdf;
}

inline void validate_class_tag(const std::string& tag) {
  const auto& tags = codebook_class_tags();
  if (std::find(tags.begin(), tags.end(), tag) == tags.end())
    throw std::domain_error("unknown class tag: " + tag);
}

// Codebook on disk: <dir>/index.json plus one grid file per entry.
inline void write_codebook(const Codebook& codebook, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json index = nlohmann::json::array();
  for (const auto& entry : codebook.entries) {
    validate_class_tag(entry.class_tag);
    detail::require_unit(entry.latent, "write_codebook");
    nlohmann::json item;
    item["id"] = entry.id;
    item["latent"] = std::vector<double>(entry.latent.data(),
                                         entry.latent.data() + entry.latent.size());
    item["class_tag"] = entry.class_tag;
    index.push_back(item);
    write_tsdf(entry.tsdf, (fs::path(dir) / (entry.id + ".tsdf")).string());
  }
  std::ofstream out(fs::path(dir) / "index.json");
  if (!out) throw std::runtime_error("cannot write codebook index in " + dir);
  out << index.dump(2) << "\n";
}

inline Codebook load_codebook(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream in(fs::path(dir) / "index.json");
  if (!in) throw std::runtime_error("cannot open codebook index in " + dir);
  nlohmann::json index;
  in >> index;
  Codebook codebook;
  for (const auto& item : index) {
    CodebookEntry entry{item.at("id").get<std::string>(), Eigen::VectorXd(),
                        item.at("class_tag").get<std::string>(), TsdfGrid()};
    validate_class_tag(entry.class_tag);
    const auto latent = item.at("latent").get<std::vector<double>>();
    entry.latent = Eigen::Map<const Eigen::VectorXd>(latent.data(),
                                                     static_cast<Eigen::Index>(latent.size()));
    detail::require_unit(entry.latent, "load_codebook");
    entry.tsdf = read_tsdf((fs::path(dir) / (entry.id + ".tsdf")).string());
    codebook.entries.push_back(std::move(entry));
  }
  if (codebook.entries.empty()) throw std::runtime_error("codebook index is empty: " + dir);
  return codebook;
}

}  // namespace roi10d
