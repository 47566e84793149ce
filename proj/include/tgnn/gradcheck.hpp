#pragma once

#include <cstdint>
#include <string>

namespace tgnn {

struct GradcheckReport {
    double max_relative_error = 0.0;
    std::size_t nodes = 0;
    std::size_t scalars = 0;  // parameter entries checked
    double seconds = 0.0;
};

// Full-model check on a fixed toy instance: 8 nodes of two types,
// d = d' = 4, perceptron metric, two schemas (one of depth 2), frozen trees,
// walk pairs and negatives. Compares every parameter entry against central
// differences.
GradcheckReport full_model_gradcheck(std::uint64_t seed = 0, double eps = 1e-5);

} // namespace tgnn
