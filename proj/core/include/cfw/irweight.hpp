#pragma once

#include "cfw/sparse.hpp"

namespace cfw {

struct Bm25Params {
    double k1 = 1.2;
    double b = 0.75;
};

// out[i,f] = icm[i,f] * ln(n_items / df(f)). Sparsity pattern preserved.
FeatureMatrix tf_idf(const FeatureMatrix& icm);

// Plus-one smoothed idf, so weights stay nonnegative even for ubiquitous
// features. Items with an empty feature row contribute nothing.
FeatureMatrix bm25(const FeatureMatrix& icm, const Bm25Params& p = {});

}  // namespace cfw
