#ifndef QCL_KERNEL_MATRIX_HPP
#define QCL_KERNEL_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include <Eigen/Dense>

#include "core.hpp"

namespace qcl {

enum class KernelKind { retarded, advanced, symmetric };

inline const char* to_string(KernelKind kind) noexcept
{
    switch (kind) {
    case KernelKind::retarded: return "retarded";
    case KernelKind::advanced: return "advanced";
    case KernelKind::symmetric: return "symmetric";
    }
    return "unknown";
}

/// Dense two-time kernel K(t_i, t_j) on a TimeGrid.
///
/// The constructor enforces the structural invariant of the tag: retarded
/// kernels vanish strictly above the diagonal, advanced kernels strictly
/// below it, and symmetric kernels agree with their transpose to 1e-12
/// (relative to the entry magnitude).
class KernelMatrix {
public:
    KernelMatrix(TimeGrid grid, Eigen::MatrixXd values, KernelKind kind)
        : grid_(std::move(grid)), values_(std::move(values)), kind_(kind)
    {
        const auto n = static_cast<Eigen::Index>(grid_.size());
        if (values_.rows() != n || values_.cols() != n) {
            throw InvalidArgument("grid-mismatch", "kernel dimensions do not match the grid");
        }
        if (!values_.allFinite()) {
            throw NumericalError("non-finite", "kernel contains non-finite entries");
        }
        switch (kind_) {
        case KernelKind::retarded:
            for (Eigen::Index j = 1; j < n; ++j)
                for (Eigen::Index i = 0; i < j; ++i)
                    if (values_(i, j) != 0.0)
                        throw InvalidArgument("kernel-not-retarded", "retarded kernel has support above the diagonal");
            break;
        case KernelKind::advanced:
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = j + 1; i < n; ++i)
                    if (values_(i, j) != 0.0)
                        throw InvalidArgument("kernel-not-advanced", "advanced kernel has support below the diagonal");
            break;
        case KernelKind::symmetric:
            for (Eigen::Index j = 0; j < n; ++j)
                for (Eigen::Index i = j + 1; i < n; ++i) {
                    const double a = values_(i, j);
                    const double b = values_(j, i);
                    if (std::abs(a - b) > 1e-12 * std::max({1.0, std::abs(a), std::abs(b)}))
                        throw InvalidArgument("non-symmetric", "symmetric kernel is not symmetric");
                }
            break;
        }
    }

    const TimeGrid& grid() const noexcept { return grid_; }
    const Eigen::MatrixXd& values() const noexcept { return values_; }
    KernelKind kind() const noexcept { return kind_; }
    std::size_t size() const noexcept { return grid_.size(); }

    double operator()(std::size_t i, std::size_t j) const
    {
        return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }

    /// Leading n×n block on the first n grid points.
    KernelMatrix restrict_prefix(std::size_t n) const
    {
        const auto m = static_cast<Eigen::Index>(n);
        return KernelMatrix(grid_.prefix(n), values_.topLeftCorner(m, m), kind_);
    }

private:
    TimeGrid grid_;
    Eigen::MatrixXd values_;
    KernelKind kind_;
};

inline void require_kind(const KernelMatrix& k, KernelKind kind, const char* code)
{
    if (k.kind() != kind) {
        throw InvalidArgument(code, std::string("expected a ") + to_string(kind) + " kernel, got " + to_string(k.kind()));
    }
}

/// Trapezoidal weights on the first i+1 points: dt/2 at both ends, dt inside.
inline double trapezoid_weight(std::size_t j, std::size_t i, double dt) noexcept
{
    if (i == 0) return 0.0;
    return (j == 0 || j == i) ? 0.5 * dt : dt;
}

} // namespace qcl

#endif
