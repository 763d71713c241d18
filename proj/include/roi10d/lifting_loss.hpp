#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

#include <Eigen/Core>

#include "roi10d/camera.hpp"
#include "roi10d/lifting.hpp"
#include "roi10d/quaternion.hpp"
#include "roi10d/rect.hpp"

namespace roi10d {

// Mean over the eight corner distances in metric space.
inline double corner_loss(const Box3D& pred, const Box3D& target) {
  double sum = 0.0;
  for (int i = 0; i < 8; ++i) sum += (pred.corners[i] - target.corners[i]).norm();
  return sum / 8.0;
}

// Corner-loss value plus its gradient split into the four lifting components.
struct LossBreakdown {
  double total = 0.0;
  Eigen::Vector4d grad_q = Eigen::Vector4d::Zero();   // (w, x, y, z), tangent-projected
  Eigen::Vector2d grad_uv = Eigen::Vector2d::Zero();  // pixels
  double grad_z = 0.0;                                // meters
  Eigen::Vector3d grad_whl = Eigen::Vector3d::Zero();  // per extent deviation

  // Euclidean norms of the blocks, ordered (q, uv, z, whl).
  Eigen::Vector4d magnitudes() const {
    return Eigen::Vector4d(grad_q.norm(), grad_uv.norm(), std::abs(grad_z), grad_whl.norm());
  }
};

namespace detail {

// Left quaternion multiplication as a 4x4 matrix on (w,x,y,z) coefficients.
inline Eigen::Matrix4d left_product_matrix(const Quaternion& q) {
  Eigen::Matrix4d L;
  L << q.w, -q.x, -q.y, -q.z,
       q.x, q.w, -q.z, q.y,
       q.y, q.z, q.w, -q.x,
       q.z, -q.y, q.x, q.w;
  return L;
}

// d(view_rotation(r))/dr as a 4x3 matrix; r must be unit with 1 + r_z > 0.
inline Eigen::Matrix<double, 4, 3> view_rotation_jacobian(const Eigen::Vector3d& r) {
  const double beta = 1.0 / std::sqrt(2.0 * (1.0 + r.z()));
  const double dbeta = -beta * beta * beta;
  Eigen::Matrix<double, 4, 3> J = Eigen::Matrix<double, 4, 3>::Zero();
  J(2, 0) = beta;   // d(qy)/d(rx)
  J(1, 1) = -beta;  // d(qx)/d(ry)
  const Eigen::Vector4d n(1.0 + r.z(), -r.y(), r.x(), 0.0);
  J.col(2) = dbeta * n;
  J(0, 2) += beta;
  return J;
}

}  // namespace detail

// Analytic gradient of corner_loss(lift(params), target) with respect to the
// ten lifting parameters. The chain rule runs through the full instantiation,
// including the dependency of the egocentric rotation on the centroid ray.
// At coincident corners the subgradient 0 is returned.
inline LossBreakdown corner_loss_grad(const LiftParams& params, const Box3D& target,
                                      const ExtentStats& stats, const CameraIntrinsics& K) {
  const Quaternion q_allo = params.q_allo.normalized();
  const Eigen::Vector3d extents = stats.resolve(params.extent_dev);
  const Eigen::Vector3d half = 0.5 * extents;
  const Eigen::Vector3d d = K.pixel_direction(params.u, params.v);
  const double n = d.norm();
  const Eigen::Vector3d ray = d / n;
  const Quaternion q_view = view_rotation(ray);
  const Quaternion q_ego = q_view * q_allo;
  const Eigen::Matrix3d R = q_ego.matrix();
  const Eigen::Vector3d t = params.z * d;

  LossBreakdown out;
  Eigen::Vector4d grad_q_ego = Eigen::Vector4d::Zero();
  std::array<Eigen::Vector3d, 8> corner_grads;
  Eigen::Vector3d g_sum = Eigen::Vector3d::Zero();

  for (int i = 0; i < 8; ++i) {
    const Eigen::Vector3d offset = corner_sign(i).cwiseProduct(half);
    const Eigen::Vector3d diff = R * offset + t - target.corners[i];
    const double dist = diff.norm();
    out.total += dist / 8.0;
    const Eigen::Vector3d g = dist > 0.0 ? Eigen::Vector3d(diff / (8.0 * dist))
                                         : Eigen::Vector3d::Zero();
    corner_grads[i] = g;
    g_sum += g;
    grad_q_ego += rotate_jacobian_wrt_quaternion(q_ego, offset).transpose() * g;
    // extents enter through the rotated offset only
    for (int k = 0; k < 3; ++k)
      out.grad_whl[k] += corner_sign(i)[k] * 0.5 * stats.stddev()[k] * g.dot(R.col(k));
  }

  out.grad_z = g_sum.dot(d);

  // dq_ego/dq_allo = L(q_view); project onto the tangent space at q_allo.
  out.grad_q = detail::left_product_matrix(q_view).transpose() * grad_q_ego;
  out.grad_q -= out.grad_q.dot(q_allo.coeffs()) * q_allo.coeffs();

  // centroid: translation part plus the ray-induced rotation change
  const Eigen::Matrix3d ray_jac = (Eigen::Matrix3d::Identity() - ray * ray.transpose()) / n;
  const Eigen::Matrix<double, 4, 3> view_jac = detail::view_rotation_jacobian(ray);
  for (int axis = 0; axis < 2; ++axis) {
    Eigen::Vector3d dd = Eigen::Vector3d::Zero();
    dd[axis] = axis == 0 ? 1.0 / K.fx : 1.0 / K.fy;
    const Eigen::Vector4d dq_view = view_jac * (ray_jac * dd);
    const Quaternion dq_ego_q =
        Quaternion(dq_view[0], dq_view[1], dq_view[2], dq_view[3]) * q_allo;
    out.grad_uv[axis] =
        g_sum.dot(params.z * dd) + grad_q_ego.dot(dq_ego_q.coeffs());
  }

  return out;
}

// -------------------------------------------------------------------------
// Separate-term baseline loss
// -------------------------------------------------------------------------

struct WeightingScheme {
  enum class Variant { kUniform, kKendall };
  Variant variant = Variant::kUniform;
  // Kendall log-variance state per term, ordered (rotation, centroid, depth, extents).
  Eigen::Vector4d log_variance = Eigen::Vector4d::Zero();

  static WeightingScheme uniform() { return {}; }
  static WeightingScheme kendall(const Eigen::Vector4d& s = Eigen::Vector4d::Zero()) {
    WeightingScheme w;
    w.variant = Variant::kKendall;
    w.log_variance = s;
    if (!s.allFinite()) throw std::domain_error("WeightingScheme: log-variances must be finite");
    return w;
  }
};

struct SeparateTermLoss {
  double total = 0.0;
  // raw terms, ordered (rotation, centroid, depth, extents)
  Eigen::Vector4d terms = Eigen::Vector4d::Zero();
  // d(total)/d(log_variance_i); zero for the uniform variant
  Eigen::Vector4d log_variance_grad = Eigen::Vector4d::Zero();
};

// Baseline loss over the individual regression targets. The centroid term is
// measured in RoI-normalized coordinates, the rotation term is the
// sign-invariant quaternion distance, depth and extent terms are L1.
inline SeparateTermLoss separate_term_loss(const LiftParams& params,
                                           const LiftParams& target, const Rect2D& roi,
                                           const WeightingScheme& scheme) {
  if (!roi.valid()) throw std::domain_error("separate_term_loss: invalid RoI");
  SeparateTermLoss out;
  const Eigen::Vector4d qd = params.q_allo.coeffs() - target.q_allo.coeffs();
  const Eigen::Vector4d qs = params.q_allo.coeffs() + target.q_allo.coeffs();
  out.terms[0] = std::min(qd.norm(), qs.norm());
  out.terms[1] = std::abs(params.u - target.u) / roi.width() +
                 std::abs(params.v - target.v) / roi.height();
  out.terms[2] = std::abs(params.z - target.z);
  out.terms[3] = (params.extent_dev - target.extent_dev).cwiseAbs().sum();

  if (scheme.variant == WeightingScheme::Variant::kUniform) {
    out.total = out.terms.sum();
  } else {
    for (int i = 0; i < 4; ++i) {
      const double wi = std::exp(-scheme.log_variance[i]);
      out.total += wi * out.terms[i] + scheme.log_variance[i];
      out.log_variance_grad[i] = 1.0 - wi * out.terms[i];
    }
  }
  return out;
}

// Gradient of separate_term_loss w.r.t. (q, u, v, z, dev); L1 subgradients
// are 0 at kinks. Used by the optimizer warm-up phase.
inline LossBreakdown separate_term_grad(const LiftParams& params, const LiftParams& target,
                                        const Rect2D& roi, const WeightingScheme& scheme) {
  LossBreakdown g;
  const SeparateTermLoss val = separate_term_loss(params, target, roi, scheme);
  g.total = val.total;
  Eigen::Vector4d w = Eigen::Vector4d::Ones();
  if (scheme.variant == WeightingScheme::Variant::kKendall)
    w = (-scheme.log_variance).array().exp();

  const Eigen::Vector4d qd = params.q_allo.coeffs() - target.q_allo.coeffs();
  const Eigen::Vector4d qs = params.q_allo.coeffs() + target.q_allo.coeffs();
  const Eigen::Vector4d branch = qd.norm() <= qs.norm() ? qd : qs;
  if (branch.norm() > 0.0) g.grad_q = w[0] * branch.normalized();
  g.grad_q -= g.grad_q.dot(params.q_allo.coeffs()) * params.q_allo.coeffs();

  const auto sign = [](double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); };
  g.grad_uv[0] = w[1] * sign(params.u - target.u) / roi.width();
  g.grad_uv[1] = w[1] * sign(params.v - target.v) / roi.height();
  g.grad_z = w[2] * sign(params.z - target.z);
  for (int k = 0; k < 3; ++k)
    g.grad_whl[k] = w[3] * sign(params.extent_dev[k] - target.extent_dev[k]);
  return g;
}

// -------------------------------------------------------------------------
// Controlled single-instance optimization
// -------------------------------------------------------------------------

struct OptimizerConfig {
  int max_iters = 2000;
  double step = 1e-2;        // base step for all parameter groups
  double momentum = 0.9;
  int warm_up_steps = 500;   // separate-term phase before the corner loss
  double divergence_loss = 1e6;
  double stop_loss = -1.0;   // early stop when corner loss drops below; <0 disables
  WeightingScheme warm_up_scheme = WeightingScheme::uniform();
};

struct OptimIterRecord {
  int iter = 0;
  double loss = 0.0;                // corner loss, also during warm-up
  Eigen::Vector4d grad_magnitudes;  // (q, uv, z, whl)
  LiftParams params;
};

struct OptimTrace {
  std::vector<OptimIterRecord> records;
  int warm_up_steps = 0;
  bool diverged = false;

  double final_loss() const { return records.empty() ? 0.0 : records.back().loss; }

  // iteration, loss, four gradient magnitudes, ten parameter values
  void to_csv(std::ostream& os) const {
    os << "iter,loss,grad_q,grad_uv,grad_z,grad_whl,qw,qx,qy,qz,u,v,z,dw,dh,dl\n";
    for (const auto& r : records) {
      os << r.iter << ',' << r.loss;
      for (int i = 0; i < 4; ++i) os << ',' << r.grad_magnitudes[i];
      os << ',' << r.params.q_allo.w << ',' << r.params.q_allo.x << ',' << r.params.q_allo.y
         << ',' << r.params.q_allo.z << ',' << r.params.u << ',' << r.params.v << ','
         << r.params.z << ',' << r.params.extent_dev[0] << ',' << r.params.extent_dev[1] << ','
         << r.params.extent_dev[2] << '\n';
    }
  }
};

namespace detail {

// Optimizer state: quaternion plus (u, v) in RoI units, depth in log-space
// (keeps z positive), extent deviations raw.
struct OptimState {
  Quaternion q;
  Eigen::Matrix<double, 6, 1> x;  // (u_roi, v_roi, log z, dw, dh, dl)

  static OptimState from_params(const LiftParams& p, const Rect2D& roi) {
    OptimState s;
    s.q = p.q_allo.normalized();
    s.x[0] = (p.u - roi.left) / roi.width();
    s.x[1] = (p.v - roi.top) / roi.height();
    s.x[2] = std::log(p.z);
    s.x.tail<3>() = p.extent_dev;
    return s;
  }

  LiftParams to_params(const Rect2D& roi, const Eigen::VectorXd& shape) const {
    LiftParams p;
    p.q_allo = q;
    p.u = roi.left + x[0] * roi.width();
    p.v = roi.top + x[1] * roi.height();
    p.z = std::exp(x[2]);
    p.extent_dev = x.tail<3>();
    p.shape = shape;
    return p;
  }
};

inline Eigen::Matrix<double, 10, 1> to_optimizer_gradient(const LossBreakdown& g,
                                                          const Rect2D& roi, double z) {
  Eigen::Matrix<double, 10, 1> v;
  v.head<4>() = g.grad_q;
  v[4] = g.grad_uv[0] * roi.width();
  v[5] = g.grad_uv[1] * roi.height();
  v[6] = g.grad_z * z;  // chain through z = exp(log z)
  v.tail<3>() = g.grad_whl;
  return v;
}

inline OptimState apply_step(const OptimState& s, const Eigen::Matrix<double, 10, 1>& delta) {
  OptimState out = s;
  Eigen::Vector4d qc = s.q.coeffs() + delta.head<4>();
  out.q = Quaternion(qc[0], qc[1], qc[2], qc[3]).normalized();
  out.x += delta.tail<6>();
  return out;
}

}  // namespace detail

// First-order descent on the corner loss (with an optional separate-term
// warm-up phase), momentum plus a monotone backtracking guard: any proposal
// that would increase the current objective resets the velocity and halves
// the trial step, so accepted iterates never increase the objective.
inline OptimTrace optimize_instance(const LiftParams& init, const Box3D& target,
                                    const ExtentStats& stats, const CameraIntrinsics& K,
                                    const Rect2D& roi, const OptimizerConfig& config) {
  init.validate(stats);
  if (!roi.valid()) throw std::domain_error("optimize_instance: invalid RoI");

  // Target parameters for the warm-up objective, recovered from the box.
  const BoxPose target_pose = target.recover_pose();
  LiftParams target_params;
  const Eigen::Vector2d target_uv = K.project(target_pose.center);
  target_params.u = target_uv.x();
  target_params.v = target_uv.y();
  target_params.z = target_pose.center.z();
  target_params.q_allo =
      ego_to_allo(target_pose.rotation, target_pose.center.normalized());
  target_params.extent_dev = stats.deviation_of(target_pose.extents);
  target_params.shape = init.shape;

  detail::OptimState state = detail::OptimState::from_params(init, roi);
  Eigen::Matrix<double, 10, 1> velocity = Eigen::Matrix<double, 10, 1>::Zero();
  double step_scale = 1.0;

  OptimTrace trace;
  trace.warm_up_steps = std::min(config.warm_up_steps, config.max_iters);

  // out-of-range trial states (e.g. depth underflow) count as rejected proposals
  const auto corner_objective = [&](const detail::OptimState& s) {
    try {
      return corner_loss(lift(s.to_params(roi, init.shape), stats, K), target);
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };
  const auto warm_objective = [&](const detail::OptimState& s) {
    try {
      return separate_term_loss(s.to_params(roi, init.shape), target_params, roi,
                                config.warm_up_scheme)
          .total;
    } catch (const std::domain_error&) {
      return std::numeric_limits<double>::infinity();
    }
  };

  const auto record = [&](int iter) {
    OptimIterRecord rec;
    rec.iter = iter;
    rec.params = state.to_params(roi, init.shape);
    const LossBreakdown bd = corner_loss_grad(rec.params, target, stats, K);
    rec.loss = bd.total;
    rec.grad_magnitudes = bd.magnitudes();
    trace.records.push_back(rec);
    return bd.total;
  };

  double loss = record(0);
  if (loss > config.divergence_loss) {
    trace.diverged = true;
    return trace;
  }
  for (int iter = 1; iter <= config.max_iters; ++iter) {
    const bool warm = iter <= trace.warm_up_steps;
    const LiftParams cur = state.to_params(roi, init.shape);
    const LossBreakdown g =
        warm ? separate_term_grad(cur, target_params, roi, config.warm_up_scheme)
             : corner_loss_grad(cur, target, stats, K);
    const Eigen::Matrix<double, 10, 1> grad =
        detail::to_optimizer_gradient(g, roi, cur.z);
    const double obj_cur = warm ? warm_objective(state) : g.total;

    for (int attempt = 0; attempt < 40; ++attempt) {
      const Eigen::Matrix<double, 10, 1> v_trial =
          config.momentum * velocity - config.step * step_scale * grad;
      const detail::OptimState trial = detail::apply_step(state, v_trial);
      const double obj_trial = warm ? warm_objective(trial) : corner_objective(trial);
      if (obj_trial <= obj_cur + 1e-12) {
        state = trial;
        velocity = v_trial;
        step_scale = std::min(1.0, step_scale * 1.2);
        break;
      }
      velocity.setZero();
      step_scale *= 0.5;
    }

    loss = record(iter);
    if (loss > config.divergence_loss) {
      trace.diverged = true;
      break;
    }
    if (config.stop_loss >= 0.0 && loss <= config.stop_loss) break;
  }
  return trace;
}

}  // namespace roi10d
