#ifndef GPLOCALIZE_BINARY_IO_HPP
#define GPLOCALIZE_BINARY_IO_HPP

#include <bit>
#include <cstdint>
#include <cstring>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gplocalize/errors.hpp"

namespace gplocalize::binary {

static_assert(std::endian::native == std::endian::little,
              "snapshots are written in host order and assume little-endian");

template <typename T>
void put(std::vector<std::uint8_t>& out, T value) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&value);
    out.insert(out.end(), p, p + sizeof(T));
}

inline void put_doubles(std::vector<std::uint8_t>& out, const double* data, std::size_t n) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(data);
    out.insert(out.end(), p, p + n * sizeof(double));
}

template <typename Derived>
void put_dense(std::vector<std::uint8_t>& out, const Eigen::DenseBase<Derived>& m) {
    // column-major
    const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic> tmp = m;
    put_doubles(out, tmp.data(), static_cast<std::size_t>(tmp.size()));
}

class Reader {
public:
    Reader(std::span<const std::uint8_t> bytes, std::size_t& offset)
        : bytes_(bytes), offset_(offset) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + offset_, sizeof(T));
        offset_ += sizeof(T);
        return value;
    }

    void get_doubles(double* dst, std::size_t n) {
        need(n * sizeof(double));
        std::memcpy(dst, bytes_.data() + offset_, n * sizeof(double));
        offset_ += n * sizeof(double);
    }

    Eigen::MatrixXd get_matrix(Eigen::Index rows, Eigen::Index cols) {
        Eigen::MatrixXd m(rows, cols);
        get_doubles(m.data(), static_cast<std::size_t>(m.size()));
        return m;
    }

    Eigen::VectorXd get_vector(Eigen::Index n) {
        Eigen::VectorXd v(n);
        get_doubles(v.data(), static_cast<std::size_t>(n));
        return v;
    }

    void expect_magic(const char (&magic)[9]) {
        need(8);
        if (std::memcmp(bytes_.data() + offset_, magic, 8) != 0)
            throw ParseError(std::string("bad snapshot magic, expected ") + magic, 0);
        offset_ += 8;
    }

private:
    void need(std::size_t n) const {
        if (offset_ + n > bytes_.size()) throw ParseError("truncated snapshot", 0);
    }

    std::span<const std::uint8_t> bytes_;
    std::size_t& offset_;
};

inline void put_magic(std::vector<std::uint8_t>& out, const char (&magic)[9]) {
    out.insert(out.end(), magic, magic + 8);
}

} // namespace gplocalize::binary

#endif // GPLOCALIZE_BINARY_IO_HPP
