#ifndef GPLOCALIZE_FIELD_HPP
#define GPLOCALIZE_FIELD_HPP

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/gp_core.hpp"
#include "gplocalize/localize.hpp"

namespace gplocalize {

/// Ground-truth field sampled on a regular grid. `origin` is the lower-left
/// corner; value (r, c) sits at the cell center
/// origin + ((c + 0.5) * cell_size.x, (r + 0.5) * cell_size.y).
struct FieldGrid {
    Eigen::Vector2d origin = Eigen::Vector2d::Zero();
    Eigen::Vector2d cell_size = Eigen::Vector2d::Ones();
    Eigen::MatrixXd values; // rows x cols
    double noise_sd = 0.0;

    Eigen::Index rows() const { return values.rows(); }
    Eigen::Index cols() const { return values.cols(); }
    Eigen::Vector2d lower() const { return origin; }
    Eigen::Vector2d upper() const;
    Eigen::Vector2d cell_center(Eigen::Index r, Eigen::Index c) const;
    /// Cell centers in row-major order.
    std::vector<Location> cell_centers() const;
    bool contains(const Eigen::Vector2d& x) const;

    void validate() const;
};

constexpr std::size_t kSynthesisCap = 4096;

/// One noise-free prior draw at the cell centers of a rows x cols grid;
/// h.noise_var is ignored here. `noise_sd` only affects field_measure().
FieldGrid synthesize_field(int rows, int cols, const Hyperparams& h, std::uint64_t seed,
                           const Eigen::Vector2d& origin = Eigen::Vector2d::Zero(),
                           const Eigen::Vector2d& cell_size = Eigen::Vector2d::Ones(),
                           double noise_sd = 0.0, std::size_t cap = kSynthesisCap);

/// Noise-free bilinear interpolation between cell centers. Within half a
/// cell of the outer edge the nearest centers are used (constant
/// extrapolation). Throws std::invalid_argument outside the grid.
double field_value(const FieldGrid& field, const Eigen::Vector2d& x);

/// field_value() plus N(0, noise_sd^2).
double field_measure(const FieldGrid& field, const Eigen::Vector2d& x, Rng& rng);

/// Text format: a header line
///   origin_x,origin_y,cell_w,cell_h,rows,cols,noise_sd
/// a line with those seven numbers, then `rows` lines of `cols` values,
/// row 0 first (the row nearest the origin).
void save_field_csv(const FieldGrid& field, const std::string& path);
FieldGrid load_field_csv(const std::string& path);
FieldGrid parse_field_csv(const std::string& text);

/// Shortest round-trip decimal form of a double.
std::string format_double(double v);

} // namespace gplocalize

#endif // GPLOCALIZE_FIELD_HPP
