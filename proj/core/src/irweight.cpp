#include "cfw/irweight.hpp"

#include <cmath>
#include <stdexcept>

namespace cfw {

FeatureMatrix tf_idf(const FeatureMatrix& icm) {
    if (icm.nnz() == 0) throw std::invalid_argument("tf_idf on empty matrix");
    const double n = static_cast<double>(icm.rows());
    std::vector<double> idf(static_cast<std::size_t>(icm.cols()), 0.0);
    for (Index f = 0; f < icm.cols(); ++f) {
        auto df = icm.col_nnz(f);
        if (df > 0) idf[f] = std::log(n / static_cast<double>(df));
    }
    auto entries = icm.entries();
    for (auto& e : entries) e.value *= idf[e.col];
    return FeatureMatrix(icm.rows(), icm.cols(), std::move(entries));
}

FeatureMatrix bm25(const FeatureMatrix& icm, const Bm25Params& p) {
    if (icm.nnz() == 0) throw std::invalid_argument("bm25 on empty matrix");
    if (p.k1 <= 0 || p.b < 0 || p.b > 1)
        throw std::invalid_argument("bm25 requires k1 > 0 and 0 <= b <= 1");
    const double n = static_cast<double>(icm.rows());

    std::vector<double> idf(static_cast<std::size_t>(icm.cols()), 0.0);
    for (Index f = 0; f < icm.cols(); ++f) {
        double df = static_cast<double>(icm.col_nnz(f));
        if (df > 0) idf[f] = std::log((n - df + 0.5) / (df + 0.5) + 1.0);
    }

    std::vector<double> len(static_cast<std::size_t>(icm.rows()), 0.0);
    double total_len = 0.0;
    std::size_t n_nonempty = 0;
    for (Index i = 0; i < icm.rows(); ++i) {
        for (double v : icm.row_values(i)) len[i] += v;
        if (icm.row_nnz(i) > 0) {
            total_len += len[i];
            ++n_nonempty;
        }
    }
    const double avg_len = total_len / static_cast<double>(n_nonempty);

    auto entries = icm.entries();
    for (auto& e : entries) {
        double tf = e.value;
        double norm = p.k1 * (1.0 - p.b + p.b * len[e.row] / avg_len);
        e.value = idf[e.col] * tf * (p.k1 + 1.0) / (tf + norm);
    }
    return FeatureMatrix(icm.rows(), icm.cols(), std::move(entries));
}

}  // namespace cfw
