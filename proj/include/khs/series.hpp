#pragma once
// Time series of a scalar observable recorded at integer kick counts.

#include <cstdint>
#include <vector>

namespace khs {

struct SpreadSeries {
    std::vector<long long> times;  // kick counts s
    std::vector<double> values;
};

}  // namespace khs
