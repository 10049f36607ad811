#include "gplocalize/field.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "gplocalize/errors.hpp"

namespace gplocalize {

Eigen::Vector2d FieldGrid::upper() const {
    return origin + Eigen::Vector2d(cell_size.x() * static_cast<double>(cols()),
                                    cell_size.y() * static_cast<double>(rows()));
}

Eigen::Vector2d FieldGrid::cell_center(Eigen::Index r, Eigen::Index c) const {
    return origin + Eigen::Vector2d((static_cast<double>(c) + 0.5) * cell_size.x(),
                                    (static_cast<double>(r) + 0.5) * cell_size.y());
}

std::vector<Location> FieldGrid::cell_centers() const {
    std::vector<Location> out;
    out.reserve(static_cast<std::size_t>(rows() * cols()));
    for (Eigen::Index r = 0; r < rows(); ++r)
        for (Eigen::Index c = 0; c < cols(); ++c) out.emplace_back(cell_center(r, c));
    return out;
}

bool FieldGrid::contains(const Eigen::Vector2d& x) const {
    const Eigen::Vector2d hi = upper();
    return x.x() >= origin.x() && x.y() >= origin.y() && x.x() <= hi.x() && x.y() <= hi.y();
}

void FieldGrid::validate() const {
    if (rows() < 1 || cols() < 1) throw std::invalid_argument("field grid must have at least one cell");
    if (!(cell_size.x() > 0.0) || !(cell_size.y() > 0.0) || !cell_size.allFinite())
        throw std::invalid_argument("field cell size must be positive");
    if (!origin.allFinite()) throw std::invalid_argument("field origin must be finite");
    if (!values.allFinite()) throw std::invalid_argument("field values must be finite");
    if (!(noise_sd >= 0.0) || !std::isfinite(noise_sd))
        throw std::invalid_argument("field noise_sd must be non-negative");
}

FieldGrid synthesize_field(int rows, int cols, const Hyperparams& h, std::uint64_t seed,
                           const Eigen::Vector2d& origin, const Eigen::Vector2d& cell_size,
                           double noise_sd, std::size_t cap) {
    if (rows < 1 || cols < 1) throw std::invalid_argument("synthesize_field: empty grid");
    if (static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) > cap) {
        throw std::invalid_argument("synthesize_field: " + std::to_string(rows) + "x" +
                                    std::to_string(cols) + " exceeds the cap of " +
                                    std::to_string(cap) + " cells");
    }
    if (h.dim() != 2) throw std::invalid_argument("synthesize_field: hyperparameters must be 2-D");
    FieldGrid f;
    f.origin = origin;
    f.cell_size = cell_size;
    f.noise_sd = noise_sd;
    f.values = Eigen::MatrixXd::Zero(rows, cols);
    f.validate();
    Hyperparams smooth = h;
    smooth.noise_var = 0.0;
    const auto centers = f.cell_centers();
    const auto draw = sample_gp_prior(centers, smooth, seed);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) f.values(r, c) = draw[static_cast<std::size_t>(r * cols + c)];
    return f;
}

namespace {

// fractional cell index along one axis, clamped to the outermost centers
void axis_weights(double x, double origin, double size, Eigen::Index n, Eigen::Index& i0,
                  Eigen::Index& i1, double& frac) {
    const double u = std::clamp((x - origin) / size - 0.5, 0.0, static_cast<double>(n - 1));
    i0 = static_cast<Eigen::Index>(std::floor(u));
    i1 = std::min(i0 + 1, n - 1);
    frac = u - static_cast<double>(i0);
}

} // namespace

double field_value(const FieldGrid& field, const Eigen::Vector2d& x) {
    if (!field.contains(x)) {
        std::ostringstream msg;
        msg << "field_value: (" << x.x() << ", " << x.y() << ") lies outside the grid";
        throw std::invalid_argument(msg.str());
    }
    Eigen::Index c0, c1, r0, r1;
    double fx, fy;
    axis_weights(x.x(), field.origin.x(), field.cell_size.x(), field.cols(), c0, c1, fx);
    axis_weights(x.y(), field.origin.y(), field.cell_size.y(), field.rows(), r0, r1, fy);
    const auto& v = field.values;
    const double bottom = (1.0 - fx) * v(r0, c0) + fx * v(r0, c1);
    const double top = (1.0 - fx) * v(r1, c0) + fx * v(r1, c1);
    return (1.0 - fy) * bottom + fy * top;
}

double field_measure(const FieldGrid& field, const Eigen::Vector2d& x, Rng& rng) {
    const double v = field_value(field, x);
    std::normal_distribution<double> n01(0.0, 1.0);
    return v + field.noise_sd * n01(rng);
}

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

void save_field_csv(const FieldGrid& field, const std::string& path) {
    field.validate();
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << "origin_x,origin_y,cell_w,cell_h,rows,cols,noise_sd\n";
    out << format_double(field.origin.x()) << ',' << format_double(field.origin.y()) << ','
        << format_double(field.cell_size.x()) << ',' << format_double(field.cell_size.y()) << ','
        << field.rows() << ',' << field.cols() << ',' << format_double(field.noise_sd) << '\n';
    for (Eigen::Index r = 0; r < field.rows(); ++r) {
        for (Eigen::Index c = 0; c < field.cols(); ++c) {
            if (c) out << ',';
            out << format_double(field.values(r, c));
        }
        out << '\n';
    }
    if (!out) throw std::runtime_error("failed writing " + path);
}

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream in(line);
    while (std::getline(in, cell, ',')) out.push_back(trim(cell));
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_number(const std::string& s, std::size_t line) {
    double v = 0.0;
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end || !std::isfinite(v))
        throw ParseError("'" + s + "' is not a finite number", line);
    return v;
}

long parse_count(const std::string& s, std::size_t line) {
    long v = 0;
    const char* end = s.data() + s.size();
    const auto res = std::from_chars(s.data(), end, v);
    if (s.empty() || res.ec != std::errc() || res.ptr != end || v < 1)
        throw ParseError("'" + s + "' is not a positive integer", line);
    return v;
}

} // namespace

FieldGrid parse_field_csv(const std::string& text) {
    std::istringstream in(text);
    std::string raw;
    std::size_t line = 0;
    auto next = [&](const char* what) {
        while (std::getline(in, raw)) {
            ++line;
            raw = trim(raw);
            if (!raw.empty()) return raw;
        }
        throw ParseError(std::string("unexpected end of file, expected ") + what, line + 1);
    };

    const auto header = split_commas(next("the header"));
    const std::vector<std::string> want{"origin_x", "origin_y", "cell_w", "cell_h", "rows", "cols", "noise_sd"};
    if (header != want) throw ParseError("header must be origin_x,origin_y,cell_w,cell_h,rows,cols,noise_sd", line);

    const auto meta = split_commas(next("the grid geometry"));
    if (meta.size() != 7) throw ParseError("geometry line needs 7 values", line);
    FieldGrid f;
    f.origin = Eigen::Vector2d(parse_number(meta[0], line), parse_number(meta[1], line));
    f.cell_size = Eigen::Vector2d(parse_number(meta[2], line), parse_number(meta[3], line));
    const long rows = parse_count(meta[4], line);
    const long cols = parse_count(meta[5], line);
    f.noise_sd = parse_number(meta[6], line);
    if (!(f.cell_size.x() > 0.0 && f.cell_size.y() > 0.0)) throw ParseError("cell size must be positive", line);
    if (f.noise_sd < 0.0) throw ParseError("noise_sd must be non-negative", line);
    if (rows > 100000 || cols > 100000 || rows * cols > 100000000L) throw ParseError("grid is too large", line);

    f.values.resize(rows, cols);
    for (long r = 0; r < rows; ++r) {
        const auto cells = split_commas(next("a row of values"));
        if (static_cast<long>(cells.size()) != cols) {
            throw ParseError("expected " + std::to_string(cols) + " values, found " +
                                 std::to_string(cells.size()),
                             line);
        }
        for (long c = 0; c < cols; ++c) f.values(r, c) = parse_number(cells[static_cast<std::size_t>(c)], line);
    }
    while (std::getline(in, raw)) {
        ++line;
        if (!trim(raw).empty()) throw ParseError("trailing content after the last row", line);
    }
    return f;
}

FieldGrid load_field_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open field file " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_field_csv(ss.str());
}

} // namespace gplocalize
