#pragma once

// Classical item analysis on contextual scores: scales built from top words,
// item-total correlations, and Cronbach's alpha.

#include <Eigen/Dense>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "textpsy/score_matrix.hpp"

namespace textpsy::items {

struct Scale {
    std::string id;
    std::vector<Eigen::Index> items;  // column indices into the score matrix
};

struct ScaleAssignment {
    std::vector<Scale> scales;
    std::string source;

    // Throws DataError: items shared between scales, out-of-range indices,
    // or fewer than two items in a scale.
    void validate(Eigen::Index n_columns) const;
};

// One scale per listed factor: the m columns with the largest |loading|,
// skipping words already claimed by an earlier factor.
ScaleAssignment scales_from_loadings(const Eigen::MatrixXd& loadings, const std::vector<std::string>& words,
                                     const std::vector<Eigen::Index>& factors, std::size_t m);

struct ItemStat {
    std::string scale;
    std::string word;
    double within = 0.0;
    std::optional<double> between;  // absent with a single scale
};

struct ScaleStat {
    std::string scale;
    std::optional<double> alpha;   // absent when the total is constant
    std::string comparison_scale;  // target of the between correlations
    bool constant_total = false;
};

struct ItemTotalReport {
    std::vector<ItemStat> items;
    std::vector<ScaleStat> scales;
};

// within = r(item, own total), between = r(item, total of the next scale,
// cyclically). With `corrected`, the item is left out of its own total.
ItemTotalReport item_total(const ScoreMatrix& y, const ScaleAssignment& scales, bool corrected = false);

// alpha = J/(J-1) * (1 - sum var_j / var_total), (N-1) denominators.
double cronbach_alpha(const ScoreMatrix& y, const std::vector<Eigen::Index>& scale);

// `scale,word,within,between` rows, then a blank line and `scale,alpha` rows.
std::string report_to_csv(const ItemTotalReport& report);

}  // namespace textpsy::items
