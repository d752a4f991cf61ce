#pragma once

#include "hyphy/common.hpp"

namespace hyphy {

enum class Origin { real, synthetic };

/// Real-valued feature rows with integer labels in [0, C) and class-prior estimates.
struct LabeledDataset {
    MatD rows;                // n x d, one sample per row
    std::vector<int> labels;  // length n
    Origin origin = Origin::real;
    VecD prior_estimates;     // length C, nonnegative, sums to 1

    Eigen::Index size() const { return rows.rows(); }
    Eigen::Index dim() const { return rows.cols(); }

    void validate() const {
        if (rows.rows() != Eigen::Index(labels.size()))
            throw std::invalid_argument("LabeledDataset: label count mismatch");
        const int c = static_cast<int>(prior_estimates.size());
        for (int y : labels)
            if (y < 0 || (c > 0 && y >= c)) throw std::invalid_argument("LabeledDataset: label out of range");
        if (c > 0) {
            if ((prior_estimates.array() < -1e-12).any() ||
                std::abs(prior_estimates.sum() - 1.0) > 1e-9)
                throw std::invalid_argument("LabeledDataset: priors must be nonnegative and sum to 1");
        }
    }

    /// pi_hat[i] = |D_i| / N, stored in prior_estimates.
    void estimate_priors(int c_classes) {
        prior_estimates = VecD::Zero(c_classes);
        for (int y : labels) prior_estimates[y] += 1.0;
        if (!labels.empty()) prior_estimates /= double(labels.size());
    }
};

}  // namespace hyphy
