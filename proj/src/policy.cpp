#include "obs360/policy.hpp"

#include <cmath>

namespace obs360 {

int compute_J(const std::vector<JCandidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("compute_J: no candidates");
  int best = 0;
  double best_value = 0.0;
  for (size_t c = 0; c < candidates.size(); ++c) {
    const JCandidate& cand = candidates[c];
    const double value = -cand.gradient.dot(cand.optimum - cand.actual);
    if (best == 0 || value < best_value ||
        (value == best_value && cand.segment < best)) {
      best = cand.segment;
      best_value = value;
    }
  }
  return best;
}

Eigen::VectorXd ogd_update(const Eigen::Ref<const Eigen::VectorXd>& r_base,
                           const Eigen::Ref<const Eigen::VectorXd>& grad, double alpha,
                           const BitrateLadder& ladder) {
  if (r_base.size() != grad.size())
    throw std::invalid_argument("ogd_update: r_base and grad lengths differ");
  if (!(alpha > 0)) throw std::invalid_argument("ogd_update: alpha must be > 0");

  const int K = static_cast<int>(r_base.size());
  Eigen::VectorXd r(K);
  if (ladder.convex_mode) {
    for (int k = 0; k < K; ++k) r(k) = ladder.clamp_hull(r_base(k) + alpha * grad(k));
    return r;
  }
  for (int k = 0; k < K; ++k) {
    double best = ladder.level(0);
    double best_obj = -grad(k) * (best - r_base(k)) +
                      (best - r_base(k)) * (best - r_base(k)) / (2.0 * alpha);
    for (int l = 1; l < ladder.size(); ++l) {
      const double x = ladder.level(l);
      const double obj =
          -grad(k) * (x - r_base(k)) + (x - r_base(k)) * (x - r_base(k)) / (2.0 * alpha);
      if (obj < best_obj) {  // strict: equal objectives keep the lower level
        best = x;
        best_obj = obj;
      }
    }
    r(k) = best;
  }
  return r;
}

Eigen::VectorXd rate_limit(const Eigen::Ref<const Eigen::VectorXd>& r_new,
                           const Eigen::Ref<const Eigen::VectorXd>& r_prev,
                           const BitrateLadder& ladder) {
  if (r_new.size() != r_prev.size())
    throw std::invalid_argument("rate_limit: vector lengths differ");
  if (ladder.convex_mode)
    throw std::invalid_argument("rate_limit: needs a discrete ladder");
  Eigen::VectorXd r(r_new.size());
  for (int k = 0; k < r_new.size(); ++k) {
    const int target = ladder.level_index(r_new(k));
    const int prev = ladder.level_index(r_prev(k));
    int limited = target;
    if (target > prev + 1) limited = prev + 1;
    else if (target < prev - 1) limited = prev - 1;
    r(k) = ladder.level(limited);
  }
  return r;
}

double PolicyOptions::effective_alpha(int segment_count) const {
  if (!horizon_schedule) {
    if (!(alpha > 0)) throw std::invalid_argument("PolicyOptions: alpha must be > 0");
    return alpha;
  }
  return horizon_step_size(alpha0, gamma, segment_count);
}

namespace {

Eigen::VectorXd default_decision(const BitrateLadder& ladder, int tiles, int r0_level) {
  if (tiles < 1) throw std::invalid_argument("policy: tiles must be >= 1");
  int idx = ladder.median_index();
  if (r0_level != 0) {
    if (r0_level < 1 || r0_level > ladder.size())
      throw std::invalid_argument("policy: r0_level outside the ladder");
    idx = r0_level - 1;
  }
  return Eigen::VectorXd::Constant(tiles, ladder.level(idx));
}

}  // namespace

Obs360Policy::Obs360Policy(const BitrateLadder& ladder, const QoEParams& params, int tiles,
                           int segment_count, const PolicyOptions& options)
    : ladder_(ladder), params_(params), options_(options),
      alpha_(options.effective_alpha(segment_count)),
      r0_(default_decision(ladder, tiles, options.r0_level)), last_(r0_) {
  params_.validate();
}

std::string Obs360Policy::name() const {
  return options_.level_rate_limit && !ladder_.convex_mode ? "obs360" : "obs360-unlimited";
}

Eigen::VectorXd Obs360Policy::decide(int segment, const std::vector<Revelation>& revealed) {
  if (segment != next_segment_)
    throw std::invalid_argument("Obs360Policy: decisions must be requested in order");
  ++next_segment_;

  std::vector<JCandidate> fresh;
  fresh.reserve(revealed.size());
  for (const Revelation& rev : revealed) {
    auto it = archive_.find(rev.segment);
    if (it == archive_.end() || rev.segment >= segment)
      throw std::invalid_argument("Obs360Policy: revelation for an undecided segment");
    Archived& entry = it->second;
    entry.gradient = per_segment_subgradient(entry.decision, rev.context, params_);
    entry.optimum =
        per_segment_optimum(rev.context, params_, ladder_, options_.oracle).decision;
    fresh.push_back({rev.segment, entry.gradient, entry.optimum, entry.decision});
  }

  Eigen::VectorXd r = last_;
  if (!fresh.empty()) {
    const int J = compute_J(fresh);
    const Archived& pivot = archive_.at(J);
    r = ogd_update(pivot.decision, pivot.gradient, alpha_, ladder_);
  }
  if (options_.level_rate_limit && !ladder_.convex_mode) r = rate_limit(r, last_, ladder_);

  archive_[segment] = Archived{r, {}, {}};
  last_ = r;
  return r;
}

ConstantPolicy::ConstantPolicy(const BitrateLadder& ladder, int tiles, int level_index0) {
  if (level_index0 < 0 || level_index0 >= ladder.size())
    throw std::invalid_argument("ConstantPolicy: level outside the ladder");
  decision_ = Eigen::VectorXd::Constant(tiles, ladder.level(level_index0));
  name_ = "constant:" + std::to_string(level_index0 + 1);
}

Eigen::VectorXd ConstantPolicy::decide(int, const std::vector<Revelation>&) {
  return decision_;
}

std::string ConstantPolicy::name() const { return name_; }

GreedyCapacityPolicy::GreedyCapacityPolicy(const BitrateLadder& ladder, int tiles)
    : ladder_(ladder), tiles_(tiles) {
  if (tiles < 1) throw std::invalid_argument("policy: tiles must be >= 1");
}

Eigen::VectorXd GreedyCapacityPolicy::decide(int, const std::vector<Revelation>& revealed) {
  for (const Revelation& rev : revealed) {
    if (rev.segment > last_revealed_) {
      last_revealed_ = rev.segment;
      last_dbar_ = rev.context.mean_capacity_mbps;
    }
  }
  if (!last_dbar_.has_value())
    return Eigen::VectorXd::Constant(tiles_, ladder_.level(ladder_.median_index()));
  int pick = 0;
  for (int l = 0; l < ladder_.size(); ++l)
    if (tiles_ * ladder_.level(l) <= *last_dbar_) pick = l;
  return Eigen::VectorXd::Constant(tiles_, ladder_.level(pick));
}

std::unique_ptr<Policy> make_policy(const std::string& name, const BitrateLadder& ladder,
                                    const QoEParams& params, int tiles, int segment_count,
                                    const PolicyOptions& options) {
  if (name == "obs360") return std::make_unique<Obs360Policy>(ladder, params, tiles, segment_count, options);
  if (name == "obs360-unlimited") {
    PolicyOptions opts = options;
    opts.level_rate_limit = false;
    return std::make_unique<Obs360Policy>(ladder, params, tiles, segment_count, opts);
  }
  if (name == "greedy-capacity") return std::make_unique<GreedyCapacityPolicy>(ladder, tiles);
  if (name.rfind("constant:", 0) == 0) {
    const std::string arg = name.substr(9);
    int level0;
    if (arg == "median") {
      level0 = ladder.median_index();
    } else {
      try {
        size_t pos = 0;
        level0 = std::stoi(arg, &pos) - 1;
        if (pos != arg.size()) throw std::invalid_argument(arg);
      } catch (const std::exception&) {
        throw std::invalid_argument("policy: bad constant level '" + arg + "'");
      }
    }
    return std::make_unique<ConstantPolicy>(ladder, tiles, level0);
  }
  throw std::invalid_argument("policy: unknown policy '" + name + "'");
}

}  // namespace obs360
