#include "cfw/sparse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <stdexcept>

namespace cfw {

SparseMatrix::SparseMatrix(Index rows, Index cols, std::vector<Entry> entries)
    : rows_(rows), cols_(cols) {
    if (rows < 0 || cols < 0)
        throw std::invalid_argument("negative matrix dimension");
    for (const auto& e : entries) {
        if (e.row < 0 || e.row >= rows || e.col < 0 || e.col >= cols)
            throw std::invalid_argument(
                "entry (" + std::to_string(e.row) + "," + std::to_string(e.col) +
                ") outside " + std::to_string(rows) + "x" + std::to_string(cols));
        if (!std::isfinite(e.value))
            throw std::invalid_argument("non-finite value at (" +
                                        std::to_string(e.row) + "," +
                                        std::to_string(e.col) + ")");
    }
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    for (std::size_t i = 1; i < entries.size(); ++i) {
        if (entries[i].row == entries[i - 1].row &&
            entries[i].col == entries[i - 1].col)
            throw std::invalid_argument("duplicate entry (" +
                                        std::to_string(entries[i].row) + "," +
                                        std::to_string(entries[i].col) + ")");
    }

    csr_ptr_.assign(static_cast<std::size_t>(rows) + 1, 0);
    csr_indices_.resize(entries.size());
    csr_values_.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        csr_indices_[i] = entries[i].col;
        csr_values_[i] = entries[i].value;
        ++csr_ptr_[static_cast<std::size_t>(entries[i].row) + 1];
    }
    for (std::size_t r = 0; r < static_cast<std::size_t>(rows); ++r)
        csr_ptr_[r + 1] += csr_ptr_[r];

    // Column-major copy.
    std::stable_sort(entries.begin(), entries.end(),
                     [](const Entry& a, const Entry& b) { return a.col < b.col; });
    csc_ptr_.assign(static_cast<std::size_t>(cols) + 1, 0);
    csc_indices_.resize(entries.size());
    csc_values_.resize(entries.size());
    for (std::size_t i = 0; i < entries.size(); ++i) {
        csc_indices_[i] = entries[i].row;
        csc_values_[i] = entries[i].value;
        ++csc_ptr_[static_cast<std::size_t>(entries[i].col) + 1];
    }
    for (std::size_t c = 0; c < static_cast<std::size_t>(cols); ++c)
        csc_ptr_[c + 1] += csc_ptr_[c];
}

std::span<const Index> SparseMatrix::row_indices(Index r) const {
    auto begin = csr_ptr_[r];
    return {csr_indices_.data() + begin, csr_ptr_[r + 1] - begin};
}

std::span<const double> SparseMatrix::row_values(Index r) const {
    auto begin = csr_ptr_[r];
    return {csr_values_.data() + begin, csr_ptr_[r + 1] - begin};
}

std::span<const Index> SparseMatrix::col_indices(Index c) const {
    auto begin = csc_ptr_[c];
    return {csc_indices_.data() + begin, csc_ptr_[c + 1] - begin};
}

std::span<const double> SparseMatrix::col_values(Index c) const {
    auto begin = csc_ptr_[c];
    return {csc_values_.data() + begin, csc_ptr_[c + 1] - begin};
}

double SparseMatrix::at(Index r, Index c) const {
    auto idx = row_indices(r);
    auto it = std::lower_bound(idx.begin(), idx.end(), c);
    if (it == idx.end() || *it != c) return 0.0;
    return row_values(r)[static_cast<std::size_t>(it - idx.begin())];
}

std::vector<Entry> SparseMatrix::entries() const {
    std::vector<Entry> out;
    out.reserve(nnz());
    for (Index r = 0; r < rows_; ++r) {
        auto idx = row_indices(r);
        auto val = row_values(r);
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.push_back({r, idx[i], val[i]});
    }
    return out;
}

std::vector<Entry> SparseMatrix::entries_col_major() const {
    std::vector<Entry> out;
    out.reserve(nnz());
    for (Index c = 0; c < cols_; ++c) {
        auto idx = col_indices(c);
        auto val = col_values(c);
        for (std::size_t i = 0; i < idx.size(); ++i)
            out.push_back({idx[i], c, val[i]});
    }
    return out;
}

SimilarityMatrix::SimilarityMatrix(Index n_items, std::vector<Entry> entries,
                                   bool diagonal_excluded)
    : diagonal_excluded_(diagonal_excluded) {
    if (diagonal_excluded) {
        for (const auto& e : entries)
            if (e.row == e.col)
                throw std::invalid_argument("diagonal entry (" +
                                            std::to_string(e.row) +
                                            ") in diagonal-excluded similarity");
    }
    m_ = SparseMatrix(n_items, n_items, std::move(entries));
}

SparseMatrix transpose(const SparseMatrix& m) {
    std::vector<Entry> out;
    out.reserve(m.nnz());
    for (const auto& e : m.entries()) out.push_back({e.col, e.row, e.value});
    return SparseMatrix(m.cols(), m.rows(), std::move(out));
}

SimilarityMatrix prune_topk(const SimilarityMatrix& s, Index k) {
    if (k < 1) throw std::invalid_argument("prune_topk requires k >= 1");
    const auto& m = s.matrix();
    std::vector<Entry> kept;
    for (Index c = 0; c < m.cols(); ++c) {
        auto idx = m.col_indices(c);
        auto val = m.col_values(c);
        std::vector<std::size_t> order(idx.size());
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        auto better = [&](std::size_t a, std::size_t b) {
            if (val[a] != val[b]) return val[a] > val[b];
            return idx[a] < idx[b];
        };
        std::size_t keep = std::min<std::size_t>(order.size(), static_cast<std::size_t>(k));
        std::partial_sort(order.begin(), order.begin() + keep, order.end(), better);
        for (std::size_t i = 0; i < keep; ++i)
            kept.push_back({idx[order[i]], c, val[order[i]]});
    }
    return SimilarityMatrix(s.n_items(), std::move(kept), s.diagonal_excluded());
}

std::vector<double> sparse_dot_row(const SparseMatrix& m, Index row,
                                   const SimilarityMatrix& s) {
    if (row < 0 || row >= m.rows())
        throw std::out_of_range("row " + std::to_string(row) + " out of range");
    if (m.cols() != s.n_items())
        throw std::invalid_argument("dimension mismatch in sparse_dot_row");
    std::vector<double> out(static_cast<std::size_t>(s.n_items()), 0.0);
    auto idx = m.row_indices(row);
    auto val = m.row_values(row);
    const auto& sm = s.matrix();
    for (std::size_t i = 0; i < idx.size(); ++i) {
        auto sj = sm.row_indices(idx[i]);
        auto sv = sm.row_values(idx[i]);
        for (std::size_t t = 0; t < sj.size(); ++t)
            out[static_cast<std::size_t>(sj[t])] += val[i] * sv[t];
    }
    return out;
}

void write_similarity_tsv(const std::string& path, const SimilarityMatrix& s) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    for (const auto& e : s.matrix().entries()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%d\t%d\t%.17g\n", e.row, e.col, e.value);
        f << buf;
    }
    if (!f) throw std::runtime_error("write failed: " + path);
}

SimilarityMatrix read_similarity_tsv(const std::string& path, Index n_items,
                                     bool diagonal_excluded) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::vector<Entry> entries;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        Entry e;
        if (std::sscanf(line.c_str(), "%d\t%d\t%lf", &e.row, &e.col, &e.value) != 3)
            throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                     ": malformed similarity line");
        entries.push_back(e);
    }
    return SimilarityMatrix(n_items, std::move(entries), diagonal_excluded);
}

}  // namespace cfw
