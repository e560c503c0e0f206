#ifndef CONDROT_STATISTICS_HPP
#define CONDROT_STATISTICS_HPP

#include <cstdint>
#include <span>

#include <boost/math/special_functions/gamma.hpp>

#include "errors.hpp"

namespace condrot {

struct ChiSquareResult {
    double statistic = 0;
    int dof = 0;
    double p_value = 1;
};

/**
 * Pearson goodness-of-fit of observed counts against cell probabilities.
 * Cells with zero expected probability are excluded from the statistic; any
 * count landing in one makes the p-value zero.
 */
inline ChiSquareResult chi_square_gof(std::span<const std::uint64_t> observed, std::span<const double> probabilities) {
    if (observed.size() != probabilities.size() || observed.empty()) {
        throw InputError("chi_square_gof: size mismatch");
    }
    double total = 0;
    for (auto n : observed) {
        total += static_cast<double>(n);
    }
    ChiSquareResult out;
    int cells = 0;
    bool impossible = false;
    for (std::size_t i = 0; i < observed.size(); ++i) {
        double expected = probabilities[i] * total;
        if (probabilities[i] <= 1e-15) {
            impossible = impossible || observed[i] > 0;
            continue;
        }
        double d = static_cast<double>(observed[i]) - expected;
        out.statistic += d * d / expected;
        ++cells;
    }
    out.dof = cells - 1;
    if (impossible) {
        out.p_value = 0;
    } else if (out.dof <= 0) {
        out.p_value = 1;
    } else {
        out.p_value = boost::math::gamma_q(0.5 * out.dof, 0.5 * out.statistic);
    }
    return out;
}

}

#endif
