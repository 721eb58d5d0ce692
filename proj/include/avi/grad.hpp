#pragma once

#include <vector>

namespace avi {

/// A gradient sample in the flattened parameter space of a variational
/// family. Layout: [mu (d entries, omitted when the mean is frozen)] then
/// [sigma (d) | scale-matrix entries].
struct GradEstimate {
    std::vector<double> values;
    int n_samples_averaged = 1;

    int size() const { return static_cast<int>(values.size()); }
    double norm_sq() const {
        double s = 0.0;
        for (double v : values) s += v * v;
        return s;
    }
};

}  // namespace avi
