#pragma once

// Self-contained SVG figures: scree plots, scatter-matrix grids with density
// diagonals, and density overlays.

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace textpsy::plot {

struct Series {
    std::string name;
    std::vector<double> values;
};

// Gaussian kernel density on `grid`; bandwidth 0.9 min(sd, IQR/1.34) n^-1/5.
std::vector<double> kde(const std::vector<double>& sample, const std::vector<double>& grid);
double silverman_bandwidth(const std::vector<double>& sample);

// Observed eigenvalues against the parallel-analysis reference, by rank.
std::string scree_svg(const std::vector<double>& observed, const std::vector<double>& reference,
                      const std::string& title);

// Lower-triangle scatter grid of the columns of `data`, densities on the diagonal.
std::string scatter_density_svg(const Eigen::MatrixXd& data, const std::vector<std::string>& names,
                                const std::string& title);

// One density curve per series on shared axes.
std::string density_overlay_svg(const std::vector<Series>& series, const std::string& title);

}  // namespace textpsy::plot
