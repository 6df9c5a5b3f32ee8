#pragma once

// Small dense linear algebra: dynamic matrices over double / complex<double>,
// LU factorisation, eigenvalues (LAPACK dgeev behind the scenes), Jacobi-based
// singular values for condition numbers, and a few polynomial helpers.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

extern "C" {
void dgeev_(const char* jobvl, const char* jobvr, const int* n, double* a, const int* lda,
            double* wr, double* wi, double* vl, const int* ldvl, double* vr, const int* ldvr,
            double* work, const int* lwork, int* info);
}

namespace etdf {

using Complex = std::complex<double>;
using Vector = std::vector<double>;
using CVector = std::vector<Complex>;

template <typename T>
class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, T value = T{})
        : rows_(rows), cols_(cols), a_(rows * cols, value) {}

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = T{1};
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    T& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    const T& operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    T* data() { return a_.data(); }
    const T* data() const { return a_.data(); }

    Mat& operator+=(const Mat& o) {
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
        return *this;
    }
    Mat& operator*=(T s) {
        for (auto& v : a_) v *= s;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, T s) { return a *= s; }
    friend Mat operator*(T s, Mat a) { return a *= s; }

    friend Mat operator*(const Mat& a, const Mat& b) {
        Mat c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const T aik = a(i, k);
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    friend std::vector<T> operator*(const Mat& a, const std::vector<T>& x) {
        std::vector<T> y(a.rows_, T{});
        for (std::size_t i = 0; i < a.rows_; ++i) {
            T s{};
            for (std::size_t j = 0; j < a.cols_; ++j) s += a(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<T> a_;
};

using Matrix = Mat<double>;
using CMatrix = Mat<Complex>;

template <typename T>
Mat<T> transpose(const Mat<T>& a) {
    Mat<T> t(a.cols(), a.rows());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
    return t;
}

// x yᵀ
template <typename T>
Mat<T> outer(const std::vector<T>& x, const std::vector<T>& y) {
    Mat<T> m(x.size(), y.size());
    for (std::size_t i = 0; i < x.size(); ++i)
        for (std::size_t j = 0; j < y.size(); ++j) m(i, j) = x[i] * y[j];
    return m;
}

template <typename T>
T dot(const std::vector<T>& a, const std::vector<T>& b) {
    T s{};
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const Vector& v) { return std::sqrt(dot(v, v)); }

inline double norm_inf(const Vector& v) {
    double m = 0;
    for (double x : v) m = std::max(m, std::abs(x));
    return m;
}

template <typename T>
double frobenius_norm(const Mat<T>& a) {
    double s = 0;
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) s += std::norm(Complex(a(i, j)));
    return std::sqrt(s);
}

inline CMatrix to_complex(const Matrix& a) {
    CMatrix c(a.rows(), a.cols());
    for (std::size_t i = 0; i < a.rows(); ++i)
        for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j);
    return c;
}

// ============================================================================
// LU factorisation with partial pivoting (Doolittle), real or complex
// ============================================================================

template <typename T>
struct Lu {
    Mat<T> lu;
    std::vector<std::size_t> piv;
    int sign = 1;
    bool singular = false;

    T det() const {
        T d = (sign > 0) ? T{1} : T{-1};
        for (std::size_t i = 0; i < lu.rows(); ++i) d *= lu(i, i);
        return d;
    }

    std::vector<T> solve(std::vector<T> b) const {
        const std::size_t n = lu.rows();
        if (singular) throw std::runtime_error("lu: singular matrix in solve");
        for (std::size_t i = 0; i < n; ++i) std::swap(b[i], b[piv[i]]);
        for (std::size_t i = 1; i < n; ++i)
            for (std::size_t j = 0; j < i; ++j) b[i] -= lu(i, j) * b[j];
        for (std::size_t i = n; i-- > 0;) {
            for (std::size_t j = i + 1; j < n; ++j) b[i] -= lu(i, j) * b[j];
            b[i] /= lu(i, i);
        }
        return b;
    }
};

template <typename T>
Lu<T> lu_factor(Mat<T> a) {
    const std::size_t n = a.rows();
    Lu<T> f;
    f.piv.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        std::size_t p = k;
        double best = std::abs(Complex(a(k, k)));
        for (std::size_t i = k + 1; i < n; ++i) {
            const double m = std::abs(Complex(a(i, k)));
            if (m > best) {
                best = m;
                p = i;
            }
        }
        f.piv[k] = p;
        if (p != k) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a(k, j), a(p, j));
            f.sign = -f.sign;
        }
        if (best == 0.0) {
            f.singular = true;
            continue;
        }
        const T pivot = a(k, k);
        for (std::size_t i = k + 1; i < n; ++i) {
            a(i, k) /= pivot;
            const T lik = a(i, k);
            for (std::size_t j = k + 1; j < n; ++j) a(i, j) -= lik * a(k, j);
        }
    }
    f.lu = std::move(a);
    return f;
}

template <typename T>
T determinant(const Mat<T>& a) {
    auto f = lu_factor(a);
    return f.singular ? T{} : f.det();
}

template <typename T>
std::vector<T> solve(const Mat<T>& a, std::vector<T> b) {
    return lu_factor(a).solve(std::move(b));
}

// ============================================================================
// Eigenvalues (nonsymmetric, dense) via LAPACK dgeev
// ============================================================================
// Row-major storage passed straight to column-major LAPACK means dgeev sees Aᵀ,
// which has the same eigenvalues; its right eigenvectors are left eigenvectors
// of A, which is exactly what the adjoint computation needs.

inline CVector eigenvalues(const Matrix& a) {
    const int n = static_cast<int>(a.rows());
    if (n == 0) return {};
    std::vector<double> work_a(a.data(), a.data() + std::size_t(n) * n);
    std::vector<double> wr(n), wi(n);
    int info = 0, lwork = -1;
    double wkopt = 0;
    const char no = 'N';
    dgeev_(&no, &no, &n, work_a.data(), &n, wr.data(), wi.data(), nullptr, &n, nullptr, &n, &wkopt,
           &lwork, &info);
    lwork = static_cast<int>(wkopt);
    std::vector<double> work(static_cast<std::size_t>(lwork));
    dgeev_(&no, &no, &n, work_a.data(), &n, wr.data(), wi.data(), nullptr, &n, nullptr, &n,
           work.data(), &lwork, &info);
    if (info != 0) throw std::runtime_error("dgeev failed, info=" + std::to_string(info));
    CVector ev(n);
    for (int i = 0; i < n; ++i) ev[i] = Complex(wr[i], wi[i]);
    return ev;
}

// Left eigenvector of a for the (simple, real) eigenvalue closest to lambda_near;
// returned normalised to unit 2-norm.
inline Vector left_eigenvector(const Matrix& a, double lambda_near) {
    const int n = static_cast<int>(a.rows());
    std::vector<double> work_a(a.data(), a.data() + std::size_t(n) * n);
    std::vector<double> wr(n), wi(n), vr(std::size_t(n) * n);
    int info = 0, lwork = -1;
    double wkopt = 0;
    const char no = 'N', yes = 'V';
    dgeev_(&no, &yes, &n, work_a.data(), &n, wr.data(), wi.data(), nullptr, &n, vr.data(), &n,
           &wkopt, &lwork, &info);
    lwork = static_cast<int>(wkopt);
    std::vector<double> work(static_cast<std::size_t>(lwork));
    // Row-major input = Aᵀ in LAPACK's eyes; VR columns are right eigenvectors
    // of Aᵀ, i.e. left eigenvectors of A.
    dgeev_(&no, &yes, &n, work_a.data(), &n, wr.data(), wi.data(), nullptr, &n, vr.data(), &n,
           work.data(), &lwork, &info);
    if (info != 0) throw std::runtime_error("dgeev failed, info=" + std::to_string(info));
    int best = 0;
    double bestd = std::numeric_limits<double>::infinity();
    for (int i = 0; i < n; ++i) {
        const double d = std::abs(Complex(wr[i], wi[i]) - lambda_near);
        if (d < bestd) {
            bestd = d;
            best = i;
        }
    }
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = vr[std::size_t(best) * n + i];  // column `best`
    const double s = norm2(v);
    for (auto& x : v) x /= s;
    return v;
}

// ============================================================================
// Singular values via one-sided Jacobi on AᵀA (small matrices only)
// ============================================================================

inline Vector singular_values(const Matrix& a) {
    const std::size_t n = a.cols();
    Matrix s = transpose(a) * a;
    for (int sweep = 0; sweep < 60; ++sweep) {
        double off = 0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += s(p, q) * s(p, q);
        if (off < 1e-30 * (1.0 + frobenius_norm(s))) break;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                if (s(p, q) == 0.0) continue;
                const double theta = 0.5 * std::atan2(2 * s(p, q), s(q, q) - s(p, p));
                const double c = std::cos(theta), sn = std::sin(theta);
                for (std::size_t k = 0; k < n; ++k) {
                    const double skp = s(k, p), skq = s(k, q);
                    s(k, p) = c * skp - sn * skq;
                    s(k, q) = sn * skp + c * skq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double spk = s(p, k), sqk = s(q, k);
                    s(p, k) = c * spk - sn * sqk;
                    s(q, k) = sn * spk + c * sqk;
                }
            }
    }
    Vector sv(n);
    for (std::size_t i = 0; i < n; ++i) sv[i] = std::sqrt(std::max(0.0, s(i, i)));
    std::sort(sv.begin(), sv.end(), std::greater<>());
    return sv;
}

inline double condition_number(const Matrix& a) {
    const Vector sv = singular_values(a);
    if (sv.empty() || sv.back() == 0.0) return std::numeric_limits<double>::infinity();
    return sv.front() / sv.back();
}

// ============================================================================
// Polynomial and spectrum helpers
// ============================================================================

// Monic polynomial with the given roots; roots must be closed under conjugation.
// Returns real coefficients [a_0, ..., a_{n-1}] of λⁿ + a_{n-1}λⁿ⁻¹ + ... + a_0.
inline Vector poly_from_roots(const CVector& roots) {
    CVector c(roots.size() + 1, Complex{});
    c[0] = 1.0;  // ascending coefficients, p = 1
    std::size_t deg = 0;
    for (const Complex r : roots) {
        ++deg;
        // p <- p * (λ - r):  c[k] = c[k-1] - r * c[k]
        for (std::size_t k = deg;; --k) {
            c[k] = (k > 0 ? c[k - 1] : Complex{}) - r * c[k];
            if (k == 0) break;
        }
    }
    double scale = 0;
    for (const auto& v : c) scale = std::max(scale, std::abs(v));
    Vector out(roots.size());
    for (std::size_t k = 0; k < roots.size(); ++k) {
        if (std::abs(c[k].imag()) > 1e-10 * std::max(1.0, scale))
            throw std::invalid_argument("poly_from_roots: roots not closed under conjugation");
        out[k] = c[k].real();
    }
    return out;
}

// Greedy nearest matching between two complex multisets; returns the largest
// pairing distance (infinity if sizes differ and `require_equal_size`).
inline double greedy_match_distance(CVector a, CVector b, bool require_equal_size = true) {
    if (require_equal_size && a.size() != b.size())
        return std::numeric_limits<double>::infinity();
    double worst = 0;
    while (!a.empty() && !b.empty()) {
        std::size_t bi = 0, bj = 0;
        double best = std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i < a.size(); ++i)
            for (std::size_t j = 0; j < b.size(); ++j) {
                const double d = std::abs(a[i] - b[j]);
                if (d < best) {
                    best = d;
                    bi = i;
                    bj = j;
                }
            }
        worst = std::max(worst, best);
        a.erase(a.begin() + static_cast<std::ptrdiff_t>(bi));
        b.erase(b.begin() + static_cast<std::ptrdiff_t>(bj));
    }
    return worst;
}

// Sort key for deterministic output of complex lists.
inline void sort_complex(CVector& v) {
    std::sort(v.begin(), v.end(), [](const Complex& x, const Complex& y) {
        if (x.real() != y.real()) return x.real() < y.real();
        return x.imag() < y.imag();
    });
}

}  // namespace etdf
