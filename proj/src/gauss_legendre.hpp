#pragma once

#include <cmath>
#include <functional>

namespace aatk::detail {

constexpr double GL8_X[8] = {-0.9602898564975363, -0.7966664774136267,
                             -0.5255324099163290, -0.1834346424956498,
                             0.1834346424956498,  0.5255324099163290,
                             0.7966664774136267,  0.9602898564975363};
constexpr double GL8_W[8] = {0.1012285362903763, 0.2223810344533745,
                            0.3137066458778873, 0.3626837833783620,
                            0.3626837833783620, 0.3137066458778873,
                            0.2223810344533745, 0.1012285362903763};

inline double gl8_line(const std::function<double(double)>& f, double a, double b,
                       int segments) {
    double acc = 0.0;
    const double h = (b - a) / segments;
    for (int sgm = 0; sgm < segments; ++sgm) {
        const double mid = a + (sgm + 0.5) * h;
        for (int g = 0; g < 8; ++g) acc += GL8_W[g] * f(mid + 0.5 * h * GL8_X[g]);
    }
    return acc * 0.5 * h;
}

}  // namespace aatk::detail
