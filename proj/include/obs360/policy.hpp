#pragma once

#include "obs360/oracles.hpp"
#include "obs360/qoe.hpp"
#include "obs360/sim.hpp"
#include "obs360/types.hpp"

#include <map>
#include <memory>
#include <optional>
#include <string>

namespace obs360 {

// One revealed segment as seen by the update rule: the gradient of its
// objective at the decision actually taken, the hindsight optimum, and
// the decision itself.
struct JCandidate {
  int segment = 0;  // 1-based
  Eigen::VectorXd gradient;
  Eigen::VectorXd optimum;
  Eigen::VectorXd actual;
};

// Among freshly revealed segments, the one whose first-order regret bound
// -g_j . (r*_j - r_j) is largest (i.e. the argmin of the negated form).
// Ties go to the smallest segment index.
int compute_J(const std::vector<JCandidate>& candidates);

// One mirror-descent step from r_base along grad with step size alpha:
// minimizes -grad . (r - r_base) + |r - r_base|^2 / (2 alpha) over the
// feasible set. Separable, so solved per coordinate: over the hull this
// clips r_base + alpha * grad; over the discrete ladder each coordinate
// picks the level with the smallest per-coordinate objective, ties broken
// toward the lower level.
Eigen::VectorXd ogd_update(const Eigen::Ref<const Eigen::VectorXd>& r_base,
                           const Eigen::Ref<const Eigen::VectorXd>& grad, double alpha,
                           const BitrateLadder& ladder);

// Limits each tile to at most one ladder level of change per segment.
// Discrete ladders only.
Eigen::VectorXd rate_limit(const Eigen::Ref<const Eigen::VectorXd>& r_new,
                           const Eigen::Ref<const Eigen::VectorXd>& r_prev,
                           const BitrateLadder& ladder);

struct PolicyOptions {
  double alpha = 1.0;
  bool horizon_schedule = false;  // alpha = alpha0 * I^(-1/gamma)
  double alpha0 = 1.0;
  double gamma = 2.0;
  bool level_rate_limit = true;     // ignored in convex mode
  int r0_level = 0;                 // 1-based ladder level; 0 = median
  OptimizeMethod oracle = OptimizeMethod::Auto;

  double effective_alpha(int segment_count) const;
};

// Online bitrate selection under delayed, batched feedback: when new
// realizations arrive, take one projected-gradient step from the archived
// decision of the most binding revealed segment; otherwise repeat the
// previous decision.
class Obs360Policy : public Policy {
 public:
  Obs360Policy(const BitrateLadder& ladder, const QoEParams& params, int tiles,
               int segment_count, const PolicyOptions& options);

  Eigen::VectorXd decide(int segment, const std::vector<Revelation>& revealed) override;
  std::string name() const override;

  double alpha() const { return alpha_; }
  const Eigen::VectorXd& initial_decision() const { return r0_; }

 private:
  struct Archived {
    Eigen::VectorXd decision;
    Eigen::VectorXd gradient;
    Eigen::VectorXd optimum;
  };

  BitrateLadder ladder_;
  QoEParams params_;
  PolicyOptions options_;
  double alpha_;
  Eigen::VectorXd r0_;
  Eigen::VectorXd last_;
  std::map<int, Archived> archive_;
  int next_segment_ = 1;
};

// Fixed ladder level for every tile of every segment.
class ConstantPolicy : public Policy {
 public:
  ConstantPolicy(const BitrateLadder& ladder, int tiles, int level_index0);
  Eigen::VectorXd decide(int segment, const std::vector<Revelation>& revealed) override;
  std::string name() const override;

 private:
  Eigen::VectorXd decision_;
  std::string name_;
};

// Largest uniform level that fits the most recently observed capacity,
// i.e. K * R <= dbar of the newest revealed segment. Starts like the
// default policy until the first realization arrives.
class GreedyCapacityPolicy : public Policy {
 public:
  GreedyCapacityPolicy(const BitrateLadder& ladder, int tiles);
  Eigen::VectorXd decide(int segment, const std::vector<Revelation>& revealed) override;
  std::string name() const override { return "greedy-capacity"; }

 private:
  BitrateLadder ladder_;
  int tiles_;
  std::optional<double> last_dbar_;
  int last_revealed_ = 0;
};

// Builds a policy from its CLI name: "obs360", "obs360-unlimited",
// "constant:<level|median>", "greedy-capacity".
std::unique_ptr<Policy> make_policy(const std::string& name, const BitrateLadder& ladder,
                                    const QoEParams& params, int tiles, int segment_count,
                                    const PolicyOptions& options);

}  // namespace obs360
