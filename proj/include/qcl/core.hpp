#ifndef QCL_CORE_HPP
#define QCL_CORE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

namespace qcl {

/// Base of every error thrown by the library. `code()` is a short kebab-case
/// tag (e.g. "invalid-range") that callers can match on.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Precondition violations on arguments (bad grids, asymmetric kernels, ...).
class InvalidArgument : public Error {
public:
    using Error::Error;
};

/// Configuration documents that fail to parse or validate.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Numerical failures: divergence, non-PSD kernels beyond tolerance.
class NumericalError : public Error {
public:
    NumericalError(std::string code, const std::string& message,
                   std::optional<std::size_t> realization = std::nullopt)
        : Error(std::move(code), message), realization_(realization) {}

    std::optional<std::size_t> realization() const noexcept { return realization_; }

private:
    std::optional<std::size_t> realization_;
};

/// Uniform grid t_i = t_start + i*dt on [t_start, t_end]. dt is always
/// derived from the endpoints and the point count.
class TimeGrid {
public:
    TimeGrid(double t_start, double t_end, std::size_t n_points)
        : t_start_(t_start), t_end_(t_end), n_points_(n_points)
    {
        if (!std::isfinite(t_start) || !std::isfinite(t_end) || !(t_end > t_start)) {
            throw InvalidArgument("invalid-range", "time grid requires t_end > t_start");
        }
        if (n_points < 2) {
            throw InvalidArgument("too-few-points", "time grid requires at least 2 points");
        }
    }

    double t_start() const noexcept { return t_start_; }
    double t_end() const noexcept { return t_end_; }
    std::size_t size() const noexcept { return n_points_; }
    double dt() const noexcept { return (t_end_ - t_start_) / static_cast<double>(n_points_ - 1); }

    double operator[](std::size_t i) const noexcept
    {
        return t_start_ + static_cast<double>(i) * dt();
    }

    std::vector<double> points() const
    {
        std::vector<double> t(n_points_);
        for (std::size_t i = 0; i < n_points_; ++i) t[i] = (*this)[i];
        return t;
    }

    /// First `n` points of this grid as a grid of its own.
    TimeGrid prefix(std::size_t n) const
    {
        if (n < 2 || n > n_points_) {
            throw InvalidArgument("too-few-points", "prefix length must lie in [2, size()]");
        }
        return TimeGrid(t_start_, (*this)[n - 1], n);
    }

    friend bool operator==(const TimeGrid& a, const TimeGrid& b) noexcept
    {
        return a.t_start_ == b.t_start_ && a.t_end_ == b.t_end_ && a.n_points_ == b.n_points_;
    }

private:
    double t_start_;
    double t_end_;
    std::size_t n_points_;
};

inline TimeGrid make_grid(double t_start, double t_end, std::size_t n_points)
{
    return TimeGrid(t_start, t_end, n_points);
}

namespace detail {

inline std::uint64_t splitmix64_finalize(std::uint64_t z) noexcept
{
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

} // namespace detail

/// Per-realization seed. For a fixed master the map index -> seed is a
/// bijection (odd-constant stride followed by the splitmix64 finalizer), so
/// distinct indices never collide.
inline std::uint64_t derive_seed(std::uint64_t master_seed, std::uint64_t index) noexcept
{
    const std::uint64_t base = detail::splitmix64_finalize(master_seed ^ 0x6A09E667F3BCC909ULL);
    return detail::splitmix64_finalize(base + 0x9E3779B97F4A7C15ULL * (index + 1));
}

struct RunConfig {
    std::uint64_t master_seed = 42;
    std::size_t n_realizations = 1;
    std::size_t threads = 1;

    void validate() const
    {
        if (n_realizations < 1) throw ConfigError("schema", "realizations must be >= 1");
        if (threads < 1) throw ConfigError("schema", "threads must be >= 1");
    }
};

/// Neumaier-compensated accumulator.
class CompensatedSum {
public:
    void add(double x) noexcept
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x)) {
            comp_ += (sum_ - t) + x;
        } else {
            comp_ += (x - t) + sum_;
        }
        sum_ = t;
    }

    double value() const noexcept { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Runs fn(i) for i in [0, count) on up to `threads` workers. Work items are
/// independent; every result is written by index, so output does not depend on
/// scheduling. If several items throw, the exception of the lowest index wins.
template <typename Fn>
void parallel_for(std::size_t count, std::size_t threads, Fn&& fn)
{
    threads = std::max<std::size_t>(1, std::min(threads, count));
    if (threads == 1) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }

    std::vector<std::exception_ptr> errors(threads);
    std::vector<std::size_t> error_index(threads, count);
    std::vector<std::thread> pool;
    pool.reserve(threads);
    for (std::size_t w = 0; w < threads; ++w) {
        pool.emplace_back([&, w] {
            for (std::size_t i = w; i < count; i += threads) {
                try {
                    fn(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                    error_index[w] = i;
                    return;
                }
            }
        });
    }
    for (auto& t : pool) t.join();

    std::size_t first = count;
    std::exception_ptr err;
    for (std::size_t w = 0; w < threads; ++w) {
        if (errors[w] && error_index[w] < first) {
            first = error_index[w];
            err = errors[w];
        }
    }
    if (err) std::rethrow_exception(err);
}

} // namespace qcl

#endif
