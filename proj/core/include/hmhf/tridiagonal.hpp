#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "hmhf/errors.hpp"

namespace hmhf {

/// Thomas algorithm for a tridiagonal system. Row i reads
///   sub[i] x[i-1] + diag[i] x[i] + super[i] x[i+1] = rhs[i],
/// with sub[0] and super[n-1] ignored. No pivoting: intended for the
/// diagonally dominant systems produced by (I - alpha Delta_m).
inline std::vector<double> solve_tridiagonal(std::span<const double> sub,
                                             std::span<const double> diag,
                                             std::span<const double> super,
                                             std::span<const double> rhs)
{
    const std::size_t n = diag.size();
    if (n == 0 || sub.size() != n || super.size() != n || rhs.size() != n)
    {
        throw ContractViolation("solve_tridiagonal: inconsistent band sizes");
    }

    std::vector<double> c_prime(n);
    std::vector<double> x(n);

    if (diag[0] == 0.0)
    {
        throw SolverError("solve_tridiagonal: zero pivot in row 0");
    }
    c_prime[0] = super[0] / diag[0];
    x[0] = rhs[0] / diag[0];

    // Forward sweep
    for (std::size_t i = 1; i < n; ++i)
    {
        const double pivot = diag[i] - sub[i] * c_prime[i - 1];
        if (pivot == 0.0)
        {
            throw SolverError("solve_tridiagonal: zero pivot");
        }
        const double factor = 1.0 / pivot;
        c_prime[i] = super[i] * factor;
        x[i] = (rhs[i] - sub[i] * x[i - 1]) * factor;
    }

    // Back substitution
    for (std::size_t ip = n - 1; ip > 0; --ip)
    {
        x[ip - 1] -= c_prime[ip - 1] * x[ip];
    }
    return x;
}

}  // namespace hmhf
