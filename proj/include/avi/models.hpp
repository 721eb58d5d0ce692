#pragma once

#include <string>
#include <utility>
#include <vector>

#include "avi/distributions.hpp"
#include "avi/estimators.hpp"
#include "avi/matrix.hpp"
#include "avi/rng.hpp"

namespace avi {

struct Dataset {
    Matrix features;             // n x d
    std::vector<double> labels;  // entries in {-1, +1}
    std::string name;

    int n() const { return features.rows; }
    int d() const { return features.cols; }
};

/// Loads a numeric CSV with one label column (selected by header name or
/// 0-based index). A non-numeric first row is treated as a header. Rows whose
/// label is `positive_label` map to +1; with `negative_label` set, other
/// labels are dropped, otherwise they map to -1.
Dataset load_csv(const std::string& path, const std::string& label_column,
                 const std::string& positive_label, const std::string& negative_label = "");

/// Keeps `n` rows chosen by a seeded shuffle.
Dataset subsample(const Dataset& ds, int n, std::uint64_t seed);

/// Columns shifted and scaled to mean 0, variance 1 (n-denominator);
/// constant columns become zeros.
Dataset standardize(const Dataset& ds);

/// Bayesian logistic regression joint density p(x, z) up to a constant:
/// sum_n log sigmoid(y_n <z, x_n>) - ||z||^2 / (2 prior_scale^2).
struct LogRegTarget {
    Dataset dataset;
    double prior_scale = 1.0;

    TargetContract contract() const;
};

double log_sigmoid(double t);

/// Single-sample gradient estimate of the alpha-ELBO L_alpha (ascent
/// direction) via the doubly-reparameterized form with the stopped density
/// parameter. Optimizers maximize L_alpha by descending its negation.
GradEstimate alpha_elbo_grad(const TargetContract& joint, const DiagonalGaussian& q, AlphaParam alpha,
                             std::span<const double> eps);

struct AlphaElboEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::int64_t n_samples = 0;
    std::int64_t nonfinite_count = 0;
};

/// Monte Carlo estimate of L_alpha with its standard error. Parallel over
/// fixed sample blocks; deterministic for a given stream.
AlphaElboEstimate alpha_elbo_estimate(const TargetContract& joint, const DiagonalGaussian& q,
                                      AlphaParam alpha, std::int64_t n_samples, const RngStream& rng);

}  // namespace avi
