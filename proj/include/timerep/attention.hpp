#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "timerep/errors.hpp"
#include "timerep/matrix.hpp"
#include "timerep/tape.hpp"

namespace timerep {

/// Additive logit for hidden keys. Large and finite so a fully masked row
/// still produces numbers rather than NaN.
inline constexpr double kMaskLogit = -1e9;

struct AttentionResult {
    Matrix context;  // n_queries x d_value
    Matrix weights;  // n_queries x n_keys, rows sum to 1
};

/// Additive mask row replicated for every query: 0 where `key_visible`, kMaskLogit elsewhere.
inline Matrix key_mask(const std::vector<bool>& key_visible, std::size_t n_queries) {
    Matrix m(n_queries, key_visible.size());
    for (std::size_t q = 0; q < n_queries; ++q)
        for (std::size_t k = 0; k < key_visible.size(); ++k)
            m(q, k) = key_visible[k] ? 0.0 : kMaskLogit;
    return m;
}

/// softmax(Q K^T / sqrt(d_k) + mask) V. An empty `key_visible` means every key is visible.
inline AttentionResult attention(const Matrix& queries, const Matrix& keys, const Matrix& values,
                                 const std::vector<bool>& key_visible = {}) {
    if (queries.cols() != keys.cols())
        throw DimensionError("attention: query and key widths differ");
    if (keys.rows() != values.rows())
        throw DimensionError("attention: key and value sequence lengths differ");
    if (!key_visible.empty() && key_visible.size() != keys.rows())
        throw DimensionError("attention: mask length differs from key count");
    Matrix logits = matmul_nt(queries, keys);
    const double inv = 1.0 / std::sqrt(static_cast<double>(queries.cols()));
    for (auto& v : logits.data()) v *= inv;
    if (!key_visible.empty()) logits += key_mask(key_visible, queries.rows());
    AttentionResult r;
    r.weights = ad::softmax_rows(logits);
    r.context = matmul(r.weights, values);
    return r;
}

/// Splits the columns of Q, K and V into `n_heads` equal blocks, attends per
/// head and concatenates the head contexts.
inline std::vector<AttentionResult> multi_head_attention(const Matrix& queries, const Matrix& keys,
                                                         const Matrix& values, std::size_t n_heads,
                                                         const std::vector<bool>& key_visible = {}) {
    if (n_heads == 0 || queries.cols() % n_heads || values.cols() % n_heads)
        throw DimensionError("multi_head_attention: widths not divisible by head count");
    auto block = [](const Matrix& m, std::size_t h, std::size_t w) {
        Matrix out(m.rows(), w);
        for (std::size_t r = 0; r < m.rows(); ++r)
            for (std::size_t c = 0; c < w; ++c) out(r, c) = m(r, h * w + c);
        return out;
    };
    const std::size_t dk = queries.cols() / n_heads;
    const std::size_t dv = values.cols() / n_heads;
    std::vector<AttentionResult> out;
    for (std::size_t h = 0; h < n_heads; ++h)
        out.push_back(attention(block(queries, h, dk), block(keys, h, dk), block(values, h, dv),
                                key_visible));
    return out;
}

namespace ad {

struct AttentionVars {
    Var context;
    Var weights;
};

inline AttentionVars attention(Var queries, Var keys, Var values, const Matrix& additive_mask = {}) {
    if (queries.cols() != keys.cols())
        throw DimensionError("attention: query and key widths differ");
    if (keys.rows() != values.rows())
        throw DimensionError("attention: key and value sequence lengths differ");
    Var logits = scale(matmul_nt(queries, keys), 1.0 / std::sqrt(static_cast<double>(queries.cols())));
    Var weights = softmax_rows(logits, additive_mask);
    return {matmul(weights, values), weights};
}

}  // namespace ad
}  // namespace timerep
