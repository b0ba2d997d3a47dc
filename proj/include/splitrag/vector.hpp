#pragma once

#include <cmath>
#include <map>
#include <string>

namespace splitrag {

// Sparse real vector keyed by term. Ordered keys make every iteration, and
// therefore every floating-point sum, deterministic.
using SparseVector = std::map<std::string, double>;

inline double dot(const SparseVector& a, const SparseVector& b) {
    double s = 0.0;
    auto ia = a.begin();
    auto ib = b.begin();
    while (ia != a.end() && ib != b.end()) {
        if (ia->first < ib->first) {
            ++ia;
        } else if (ib->first < ia->first) {
            ++ib;
        } else {
            s += ia->second * ib->second;
            ++ia;
            ++ib;
        }
    }
    return s;
}

inline double norm(const SparseVector& v) { return std::sqrt(dot(v, v)); }

inline SparseVector normalized(SparseVector v) {
    double n = norm(v);
    if (n > 0.0) {
        for (auto& [k, w] : v) w /= n;
    }
    return v;
}

// Cosine similarity; 0 when either side is the zero vector.
inline double cosine(const SparseVector& a, const SparseVector& b) {
    double na = norm(a);
    double nb = norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot(a, b) / (na * nb);
}

}  // namespace splitrag
