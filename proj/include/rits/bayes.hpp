#pragma once

#include "rits/core.hpp"
#include "rits/rng.hpp"

#include <Eigen/Cholesky>

#include <span>
#include <vector>

namespace rits {

/// Multivariate normal over regression coefficients, stored as mean and
/// precision. The intercept lives in coordinate 0 (see Covariates).
struct GaussianPosterior {
  Vector mean;
  Matrix precision;

  Eigen::Index dim() const noexcept { return mean.size(); }
};

/// N(0, I) in dimension d.
GaussianPosterior init_prior(Eigen::Index d);

/// Informative prior; precision must be symmetric positive definite.
GaussianPosterior init_prior(Vector mean, Matrix precision);

/// Conjugate update with one observation y at regressor x:
///   precision' = precision + x x^T / sigma0_sq
///   mean'      = precision'^{-1} (x y / sigma0_sq + precision mean)
/// The solve goes through a Cholesky factorization.
GaussianPosterior update(const GaussianPosterior& post, const Vector& x, double y, double sigma0_sq);
GaussianPosterior update(const GaussianPosterior& post, const Covariates& x, double y,
                         double sigma0_sq);

/// Draws from one posterior. Factorizes the precision once.
class PosteriorSampler {
 public:
  explicit PosteriorSampler(const GaussianPosterior& post);

  /// d x M matrix; column j is one draw. Consumes d*M standard normals from
  /// rng in column-major order.
  Matrix draw(int M, Rng& rng) const;

 private:
  Vector mean_;
  Eigen::LLT<Matrix> llt_;
};

/// M i.i.d. draws from N(mean, precision^{-1}), as columns.
Matrix sample(const GaussianPosterior& post, int M, Rng& rng);

/// Efficacy and safety posteriors for every arm.
struct PosteriorBank {
  std::vector<GaussianPosterior> efficacy;
  std::vector<GaussianPosterior> safety;
  double sigma0_sq = 1.0;
  int observations = 0;  // records absorbed so far

  static PosteriorBank prior(int arms, Eigen::Index d, double sigma0_sq);

  int arms() const noexcept { return static_cast<int>(efficacy.size()); }
  Eigen::Index dim() const noexcept { return efficacy.empty() ? 0 : efficacy.front().dim(); }

  /// Updates the allocated arm's two posteriors with the record's outcomes.
  void absorb(const ParticipantRecord& record);
};

/// Applies every record in order. Every record must carry both outcomes.
PosteriorBank update_batch(PosteriorBank bank, std::span<const ParticipantRecord> records);

}  // namespace rits
