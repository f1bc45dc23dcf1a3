#pragma once

#include <span>

namespace tsevo {

// Percentile by linear interpolation between order statistics (the
// "linear" method of numpy.percentile). `q` is in [0, 100]. Empty input
// yields NaN. This is the single percentile definition used by both the
// congestion detector and the evolution signal extractor.
double percentile(std::span<const double> values, double q);

}  // namespace tsevo
