#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cfw {

using Index = std::int32_t;

struct Entry {
    Index row;
    Index col;
    double value;

    friend bool operator==(const Entry&, const Entry&) = default;
};

/// Sparse matrix kept in both row-major (CSR) and column-major (CSC)
/// orientation. Immutable after construction, safe to share across threads.
class SparseMatrix {
public:
    SparseMatrix() = default;

    // Throws std::invalid_argument on duplicate (row, col) pairs,
    // out-of-range indices or non-finite values.
    SparseMatrix(Index rows, Index cols, std::vector<Entry> entries);

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    std::size_t nnz() const { return csr_values_.size(); }

    std::span<const Index> row_indices(Index r) const;
    std::span<const double> row_values(Index r) const;
    std::span<const Index> col_indices(Index c) const;
    std::span<const double> col_values(Index c) const;

    std::size_t row_nnz(Index r) const { return row_indices(r).size(); }
    std::size_t col_nnz(Index c) const { return col_indices(c).size(); }

    // Value at (r, c), 0.0 when absent. Binary search over the row.
    double at(Index r, Index c) const;

    // Entries in row-major order.
    std::vector<Entry> entries() const;

    // Entries in column-major order.
    std::vector<Entry> entries_col_major() const;

private:
    Index rows_ = 0;
    Index cols_ = 0;
    std::vector<std::size_t> csr_ptr_{0};
    std::vector<Index> csr_indices_;
    std::vector<double> csr_values_;
    std::vector<std::size_t> csc_ptr_{0};
    std::vector<Index> csc_indices_;
    std::vector<double> csc_values_;
};

// Users x items interaction matrix (URM) and items x features content
// matrix (ICM) share the storage type; their invariants are enforced by
// the loaders in ingest.hpp.
using InteractionMatrix = SparseMatrix;
using FeatureMatrix = SparseMatrix;

/// Item-item similarity scores. Column j holds the neighbors of item j.
class SimilarityMatrix {
public:
    SimilarityMatrix() = default;

    // Throws if diagonal_excluded and an (i, i) entry is present.
    SimilarityMatrix(Index n_items, std::vector<Entry> entries,
                     bool diagonal_excluded = true);

    Index n_items() const { return m_.rows(); }
    bool diagonal_excluded() const { return diagonal_excluded_; }
    const SparseMatrix& matrix() const { return m_; }

private:
    SparseMatrix m_;
    bool diagonal_excluded_ = true;
};

SparseMatrix transpose(const SparseMatrix& m);

// Keep the k largest scores of every column, ties broken by lower row index.
SimilarityMatrix prune_topk(const SimilarityMatrix& s, Index k);

// out[j] = sum_i m[row,i] * s[i,j]. Throws std::out_of_range on bad row,
// std::invalid_argument on dimension mismatch.
std::vector<double> sparse_dot_row(const SparseMatrix& m, Index row,
                                   const SimilarityMatrix& s);

void write_similarity_tsv(const std::string& path, const SimilarityMatrix& s);
SimilarityMatrix read_similarity_tsv(const std::string& path, Index n_items,
                                     bool diagonal_excluded = true);

}  // namespace cfw
