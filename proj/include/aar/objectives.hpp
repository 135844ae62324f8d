#pragma once

// Smooth objectives used by the solvers: a quadratic model, the student's-t
// regression loss, and a sigmoid nonlinear least-squares loss, plus the binary
// datasets the latter two are built from.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "aar/errors.hpp"
#include "aar/linalg.hpp"

namespace aar {

/// Callable bundle for a smooth f with an L-Lipschitz gradient.
/// Immutable after construction; evaluation is thread-safe.
struct Objective {
    std::string name;
    Eigen::Index dim = 0;
    double lipschitz = 0.0;
    std::function<double(const Vector&)> value;
    std::function<Vector(const Vector&)> gradient;
    /// Closed-form Hessian when available (quadratic, ST, NLS).
    std::function<DenseMatrix(const Vector&)> hessian;

    bool has_hessian() const { return static_cast<bool>(hessian); }
};

/// Feature rows u_i with binary labels v_i.
struct Dataset {
    DenseMatrix features;  // n_samples x d
    Vector labels;         // entries in {0, 1}

    Eigen::Index samples() const { return features.rows(); }
    Eigen::Index dim() const { return features.cols(); }
};

inline void validate(const Dataset& data) {
    if (data.samples() == 0 || data.dim() == 0) throw InputError("dataset is empty");
    if (data.labels.size() != data.samples()) throw InputError("dataset: label count does not match row count");
    for (Eigen::Index i = 0; i < data.labels.size(); ++i) {
        if (data.labels(i) != 0.0 && data.labels(i) != 1.0) throw InputError("dataset: labels must be 0 or 1");
    }
    if (!data.features.allFinite()) throw InputError("dataset: non-finite feature");
}

/// f(x) = 1/2 (x - s)^T B (x - s) - b^T (x - s) with L = lambda_max(B).
inline Objective make_quadratic(const DenseMatrix& hess, const Vector& linear, const Vector& shift) {
    if (hess.rows() != hess.cols() || hess.rows() == 0) throw InputError("quadratic: B must be square and nonempty");
    if (linear.size() != hess.rows() || shift.size() != hess.rows()) {
        throw InputError("quadratic: b and shift must match the dimension of B");
    }
    if (!is_symmetric(hess)) throw InputError("quadratic: B is not symmetric");
    const double lmin = min_eigenvalue(hess);
    if (!(lmin > 0.0)) throw InputError("quadratic: B is not positive definite");

    auto B = std::make_shared<const DenseMatrix>(hess);
    auto b = std::make_shared<const Vector>(linear);
    auto s = std::make_shared<const Vector>(shift);

    Objective obj;
    obj.name = "quadratic";
    obj.dim = hess.rows();
    obj.lipschitz = max_eigenvalue(hess);
    obj.value = [B, b, s](const Vector& x) {
        const Vector d = x - *s;
        return 0.5 * d.dot(*B * d) - b->dot(d);
    };
    obj.gradient = [B, b, s](const Vector& x) -> Vector { return *B * (x - *s) - *b; };
    obj.hessian = [B](const Vector&) -> DenseMatrix { return *B; };
    return obj;
}

namespace detail {

inline double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

inline void require_dim(const Vector& x, Eigen::Index dim, const char* who) {
    if (x.size() != dim) {
        throw InputError(std::string(who) + ": expected dimension " + std::to_string(dim) + ", got " +
                         std::to_string(x.size()));
    }
}

}  // namespace detail

/// Student's-t loss (1/n) sum log(1 + (u_i^T x - v_i)^2 / mu) + (lambda/2)||x||^2.
inline Objective make_student_t(const Dataset& data, double mu = 20.0, double lambda = 1e-2) {
    if (data.samples() == 0) throw InputError("student_t: empty dataset");
    validate(data);
    if (!(mu > 0.0)) throw InputError("student_t: mu must be positive");
    if (!(lambda >= 0.0)) throw InputError("student_t: lambda must be nonnegative");

    auto d = std::make_shared<const Dataset>(data);
    const double n = static_cast<double>(data.samples());
    const double unorm = spectral_norm(data.features);

    Objective obj;
    obj.name = "student_t";
    obj.dim = data.dim();
    obj.lipschitz = 2.0 / (mu * n) * unorm * unorm + lambda;
    obj.value = [d, mu, lambda, n](const Vector& x) {
        detail::require_dim(x, d->dim(), "student_t");
        const Vector r = d->features * x - d->labels;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < r.size(); ++i) sum += std::log1p(r(i) * r(i) / mu);
        return sum / n + 0.5 * lambda * x.squaredNorm();
    };
    obj.gradient = [d, mu, lambda, n](const Vector& x) -> Vector {
        detail::require_dim(x, d->dim(), "student_t");
        const Vector r = d->features * x - d->labels;
        const Vector w = r.unaryExpr([mu](double t) { return 2.0 * t / (mu + t * t); });
        return d->features.transpose() * w / n + lambda * x;
    };
    obj.hessian = [d, mu, lambda, n](const Vector& x) -> DenseMatrix {
        const Vector r = d->features * x - d->labels;
        const Vector w = r.unaryExpr([mu](double t) {
            const double q = mu + t * t;
            return 2.0 * (mu - t * t) / (q * q);
        });
        DenseMatrix h = d->features.transpose() * w.asDiagonal() * d->features / n;
        h.diagonal().array() += lambda;
        return h;
    };
    return obj;
}

/// Sigmoid least squares (1/n) sum (psi(u_i^T x) - v_i)^2 + (lambda/2)||x||^2.
inline Objective make_nls(const Dataset& data, double lambda = 1e-2) {
    if (data.samples() == 0) throw InputError("nls: empty dataset");
    validate(data);
    if (!(lambda >= 0.0)) throw InputError("nls: lambda must be nonnegative");

    auto d = std::make_shared<const Dataset>(data);
    const double n = static_cast<double>(data.samples());
    const double unorm = spectral_norm(data.features);

    Objective obj;
    obj.name = "nls";
    obj.dim = data.dim();
    obj.lipschitz = unorm * unorm / (6.0 * n) + lambda;
    obj.value = [d, lambda, n](const Vector& x) {
        detail::require_dim(x, d->dim(), "nls");
        const Vector z = d->features * x;
        double sum = 0.0;
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double e = detail::sigmoid(z(i)) - d->labels(i);
            sum += e * e;
        }
        return sum / n + 0.5 * lambda * x.squaredNorm();
    };
    obj.gradient = [d, lambda, n](const Vector& x) -> Vector {
        detail::require_dim(x, d->dim(), "nls");
        const Vector z = d->features * x;
        Vector w(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double s = detail::sigmoid(z(i));
            w(i) = 2.0 * (s - d->labels(i)) * s * (1.0 - s);
        }
        return d->features.transpose() * w / n + lambda * x;
    };
    obj.hessian = [d, lambda, n](const Vector& x) -> DenseMatrix {
        const Vector z = d->features * x;
        Vector w(z.size());
        for (Eigen::Index i = 0; i < z.size(); ++i) {
            const double s = detail::sigmoid(z(i));
            const double ds = s * (1.0 - s);
            w(i) = 2.0 * (ds * ds + (s - d->labels(i)) * ds * (1.0 - 2.0 * s));
        }
        DenseMatrix h = d->features.transpose() * w.asDiagonal() * d->features / n;
        h.diagonal().array() += lambda;
        return h;
    };
    return obj;
}

/// Seeded standard-normal draws; the single source of randomness in the library.
class NormalSampler {
public:
    explicit NormalSampler(std::uint64_t seed) : engine_(seed) {}

    double operator()() { return dist_(engine_); }

    Vector vector(Eigen::Index n) {
        Vector v(n);
        for (Eigen::Index i = 0; i < n; ++i) v(i) = (*this)();
        return v;
    }

    DenseMatrix matrix(Eigen::Index rows, Eigen::Index cols) {
        DenseMatrix m(rows, cols);
        // Row-major fill so sample i depends only on draws made for rows <= i.
        for (Eigen::Index i = 0; i < rows; ++i)
            for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = (*this)();
        return m;
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

/// Gaussian features labelled by the side of a random hyperplane.
inline Dataset synth_dataset(Eigen::Index n_samples, Eigen::Index dim, std::uint64_t seed) {
    if (n_samples < 1 || dim < 1) throw InputError("synth_dataset: n_samples and dim must be >= 1");
    NormalSampler rng(seed);
    const Vector normal = rng.vector(dim);
    Dataset data;
    data.features = rng.matrix(n_samples, dim);
    data.labels = (data.features * normal).unaryExpr([](double t) { return t > 0.0 ? 1.0 : 0.0; });
    return data;
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

inline std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) return std::nullopt;
    if (s.front() == '+') s.remove_prefix(1);
    double out = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(out)) return std::nullopt;
    return out;
}

}  // namespace detail

/// Parses header-less `label,f1,f2,...` rows (LF or CRLF).
inline Dataset parse_csv(std::istream& in) {
    std::vector<double> labels;
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string_view content = detail::trim(line);
        if (content.empty()) continue;

        std::vector<double> fields;
        std::size_t start = 0;
        while (true) {
            const std::size_t comma = content.find(',', start);
            const std::string_view cell =
                content.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start);
            const auto parsed = detail::parse_double(cell);
            if (!parsed) throw ParseError(line_no, "malformed field '" + std::string(cell) + "'");
            fields.push_back(*parsed);
            if (comma == std::string_view::npos) break;
            start = comma + 1;
        }
        if (fields.size() < 2) throw ParseError(line_no, "expected a label and at least one feature");
        if (fields[0] != 0.0 && fields[0] != 1.0) throw ParseError(line_no, "label must be 0 or 1");
        if (width == 0) {
            width = fields.size() - 1;
        } else if (fields.size() - 1 != width) {
            throw ParseError(line_no, "expected " + std::to_string(width) + " features, got " +
                                          std::to_string(fields.size() - 1));
        }
        labels.push_back(fields[0]);
        rows.emplace_back(fields.begin() + 1, fields.end());
    }
    if (rows.empty()) throw ParseError(line_no == 0 ? 1 : line_no, "no data rows");

    Dataset data;
    data.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(width));
    data.labels.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        data.labels(static_cast<Eigen::Index>(i)) = labels[i];
        for (std::size_t j = 0; j < width; ++j)
            data.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
    return data;
}

inline Dataset load_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open dataset '" + path + "'");
    return parse_csv(in);
}

}  // namespace aar
