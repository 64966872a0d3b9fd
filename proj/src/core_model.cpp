#include "lockin/core_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <utility>

namespace lockin {

// ---------------------------------------------------------------------------
// DriftFunction
// ---------------------------------------------------------------------------

DriftFunction::DriftFunction(std::size_t dim, std::string label, EvalFn eval,
                             std::optional<JacobianFn> jacobian)
    : dim_(dim), label_(std::move(label)), eval_(std::move(eval)), jacobian_(std::move(jacobian))
{
    if (dim_ == 0) {
        throw InvalidArgument("drift dimension must be positive");
    }
    if (!eval_) {
        throw InvalidArgument("drift evaluation function is empty");
    }
}

void DriftFunction::eval_into(const Vec& x, Vec& out) const
{
    out.resize(static_cast<Eigen::Index>(dim_));
    eval_(x, out);
}

Vec DriftFunction::eval(const Vec& x) const
{
    if (static_cast<std::size_t>(x.size()) != dim_) {
        throw InvalidArgument("state has wrong dimension for drift '" + label_ + "'");
    }
    Vec out(static_cast<Eigen::Index>(dim_));
    eval_(x, out);
    return out;
}

void DriftFunction::jacobian_into(const Vec& x, Mat& out) const
{
    if (jacobian_) {
        out.resize(static_cast<Eigen::Index>(dim_), static_cast<Eigen::Index>(dim_));
        (*jacobian_)(x, out);
    } else {
        out = finite_difference_jacobian(x);
    }
}

Mat DriftFunction::jacobian(const Vec& x) const
{
    if (static_cast<std::size_t>(x.size()) != dim_) {
        throw InvalidArgument("state has wrong dimension for drift '" + label_ + "'");
    }
    Mat out;
    jacobian_into(x, out);
    return out;
}

Mat DriftFunction::finite_difference_jacobian(const Vec& x) const
{
    const auto d = static_cast<Eigen::Index>(dim_);
    Mat J(d, d);
    Vec xp = x;
    Vec xm = x;
    Vec fp(d);
    Vec fm(d);
    for (Eigen::Index i = 0; i < d; ++i) {
        const double h = std::max(1e-6, 1e-6 * std::abs(x[i]));
        xp[i] = x[i] + h;
        xm[i] = x[i] - h;
        eval_(xp, fp);
        eval_(xm, fm);
        // actual spacing, not 2h, to absorb representation error in x +- h
        J.col(i) = (fp - fm) / (xp[i] - xm[i]);
        xp[i] = x[i];
        xm[i] = x[i];
    }
    return J;
}

namespace {

double require_param(const ScenarioSpec& s, const std::string& key)
{
    auto it = s.params.find(key);
    if (it == s.params.end()) {
        throw InvalidArgument("scenario '" + s.name + "' requires parameter '" + key + "'");
    }
    return it->second;
}

double param_or(const ScenarioSpec& s, const std::string& key, double fallback)
{
    auto it = s.params.find(key);
    return it == s.params.end() ? fallback : it->second;
}

DriftFunction make_affine(const std::string& label, Mat A, Vec b)
{
    const auto d = static_cast<std::size_t>(A.rows());
    return DriftFunction(
        d, label, [A, b](const Vec& x, Vec& out) { out.noalias() = A * x + b; },
        [A](const Vec&, Mat& out) { out = A; });
}

} // namespace

DriftFunction make_drift(const ScenarioSpec& scenario)
{
    const std::string& name = scenario.name;
    if (name == "linear-1d") {
        const double a = param_or(scenario, "a", 1.0);
        if (!(a > 0.0)) {
            throw InvalidArgument("linear-1d requires rate a > 0");
        }
        std::ostringstream label;
        label << "linear-1d(a=" << a << ")";
        return DriftFunction(
            1, label.str(), [a](const Vec& x, Vec& out) { out[0] = -a * x[0]; },
            [a](const Vec&, Mat& out) { out(0, 0) = -a; });
    }
    if (name == "double-well-1d") {
        return DriftFunction(
            1, "double-well-1d",
            [](const Vec& x, Vec& out) { out[0] = x[0] - x[0] * x[0] * x[0]; },
            [](const Vec& x, Mat& out) { out(0, 0) = 1.0 - 3.0 * x[0] * x[0]; });
    }
    if (name == "spiral-2d") {
        const double sigma = require_param(scenario, "sigma");
        const double omega = param_or(scenario, "omega", 0.0);
        if (!(sigma > 0.0)) {
            throw InvalidArgument("spiral-2d requires sigma > 0");
        }
        Mat A(2, 2);
        A << -sigma, omega, -omega, -sigma;
        std::ostringstream label;
        label << "spiral-2d(sigma=" << sigma << ",omega=" << omega << ")";
        return make_affine(label.str(), A, Vec::Zero(2));
    }
    if (name == "polynomial") {
        if (scenario.coeffs.empty()) {
            throw InvalidArgument("polynomial scenario requires at least one coefficient");
        }
        if (!scenario.matrix.empty() || !scenario.offset.empty()) {
            throw InvalidArgument("polynomial scenario is 1-D; matrix/offset are not accepted");
        }
        std::vector<double> c = scenario.coeffs;
        auto eval = [c](const Vec& x, Vec& out) {
            double acc = 0.0;
            for (auto it = c.rbegin(); it != c.rend(); ++it) {
                acc = acc * x[0] + *it;
            }
            out[0] = acc;
        };
        auto jac = [c](const Vec& x, Mat& out) {
            double acc = 0.0;
            for (std::size_t k = c.size(); k-- > 1;) {
                acc = acc * x[0] + static_cast<double>(k) * c[k];
            }
            out(0, 0) = acc;
        };
        return DriftFunction(1, "polynomial", eval, jac);
    }
    if (name == "affine") {
        const std::size_t d = scenario.matrix.size();
        if (d == 0) {
            throw InvalidArgument("affine scenario requires a non-empty matrix");
        }
        Mat A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
        for (std::size_t i = 0; i < d; ++i) {
            if (scenario.matrix[i].size() != d) {
                throw InvalidArgument("affine scenario: matrix row " + std::to_string(i) +
                                      " has length " + std::to_string(scenario.matrix[i].size()) +
                                      ", expected " + std::to_string(d));
            }
            for (std::size_t j = 0; j < d; ++j) {
                A(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = scenario.matrix[i][j];
            }
        }
        Vec b = Vec::Zero(static_cast<Eigen::Index>(d));
        if (!scenario.offset.empty()) {
            if (scenario.offset.size() != d) {
                throw InvalidArgument("affine scenario: offset length " +
                                      std::to_string(scenario.offset.size()) +
                                      " does not match dimension " + std::to_string(d));
            }
            for (std::size_t i = 0; i < d; ++i) {
                b[static_cast<Eigen::Index>(i)] = scenario.offset[i];
            }
        }
        return make_affine("affine", A, b);
    }
    throw InvalidArgument("unknown scenario '" + name + "'");
}

// ---------------------------------------------------------------------------
// StepSchedule
// ---------------------------------------------------------------------------

StepSchedule StepSchedule::power(double mu)
{
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw InvalidArgument("mu out of (0,1]");
    }
    StepSchedule s;
    s.kind_ = ScheduleKind::Power;
    s.mu_ = mu;
    return s;
}

StepSchedule StepSchedule::constant_then_power(double constant, double mu)
{
    if (!(mu > 0.0 && mu <= 1.0)) {
        throw InvalidArgument("mu out of (0,1]");
    }
    if (!(constant > 0.0 && constant <= 1.0)) {
        throw InvalidArgument("constant step out of (0,1]");
    }
    StepSchedule s;
    s.kind_ = ScheduleKind::ConstantThenPower;
    s.mu_ = mu;
    s.constant_ = constant;
    return s;
}

StepSchedule StepSchedule::explicit_list(std::vector<double> values)
{
    if (values.empty()) {
        throw InvalidArgument("explicit step list is empty");
    }
    for (double v : values) {
        if (!(v > 0.0 && v <= 1.0)) {
            throw InvalidArgument("explicit step values must lie in (0,1]");
        }
    }
    StepSchedule s;
    s.kind_ = ScheduleKind::ExplicitList;
    s.values_ = std::move(values);
    return s;
}

std::string StepSchedule::label() const
{
    std::ostringstream os;
    switch (kind_) {
    case ScheduleKind::Power:
        os << "power(mu=" << mu_ << ")";
        break;
    case ScheduleKind::ConstantThenPower:
        os << "constant-then-power(c=" << constant_ << ",mu=" << mu_ << ")";
        break;
    case ScheduleKind::ExplicitList:
        os << "explicit-list(n=" << values_.size() << ")";
        break;
    }
    return os.str();
}

std::optional<std::size_t> StepSchedule::length() const
{
    if (kind_ == ScheduleKind::ExplicitList) {
        return values_.size();
    }
    return std::nullopt;
}

double StepSchedule::step(std::size_t n) const
{
    switch (kind_) {
    case ScheduleKind::Power:
        return mu_ == 1.0 ? 1.0 / static_cast<double>(n + 1)
                          : std::pow(static_cast<double>(n + 1), -mu_);
    case ScheduleKind::ConstantThenPower: {
        const double p = mu_ == 1.0 ? 1.0 / static_cast<double>(n + 1)
                                    : std::pow(static_cast<double>(n + 1), -mu_);
        return std::min(constant_, p);
    }
    case ScheduleKind::ExplicitList:
        if (n >= values_.size()) {
            throw InvalidArgument("step index " + std::to_string(n) +
                                  " beyond explicit list of length " +
                                  std::to_string(values_.size()));
        }
        return values_[n];
    }
    return 0.0;
}

double step_at(const StepSchedule& s, std::size_t n) { return s.step(n); }

double time_of(const StepSchedule& s, std::size_t n)
{
    double t = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        t = t + s.step(k);
    }
    return t;
}

Timeline::Timeline(const StepSchedule& schedule, std::size_t n_max) : schedule_(schedule)
{
    if (auto len = schedule.length(); len && n_max > *len) {
        throw InvalidArgument("timeline horizon " + std::to_string(n_max) +
                              " exceeds explicit list length " + std::to_string(*len));
    }
    steps_.resize(n_max + 1);
    times_.resize(n_max + 1);
    double t = 0.0;
    for (std::size_t n = 0; n <= n_max; ++n) {
        times_[n] = t;
        // the final entry of a finite list has no step after it
        const bool defined = !schedule.length() || n < *schedule.length();
        steps_[n] = defined ? schedule.step(n) : 0.0;
        t = t + steps_[n];
    }
}

std::optional<std::size_t> Timeline::first_index_at_or_after(double t) const
{
    auto it = std::lower_bound(times_.begin(), times_.end(), t);
    if (it == times_.end()) {
        return std::nullopt;
    }
    return static_cast<std::size_t>(it - times_.begin());
}

// ---------------------------------------------------------------------------
// NoiseModel
// ---------------------------------------------------------------------------

NoiseModel::NoiseModel(NoiseKind kind, std::size_t dim, double scale, double cutoff)
    : kind_(kind), dim_(dim), scale_(scale), cutoff_(cutoff)
{
    if (dim_ == 0) {
        throw InvalidArgument("noise dimension must be positive");
    }
    const double sqrt_d = std::sqrt(static_cast<double>(dim_));
    switch (kind_) {
    case NoiseKind::Laplace:
        // Union bound over coordinates: Pr{|M| > u} <= d exp(-u / (b sqrt d)).
        c1_ = static_cast<double>(dim_);
        c2_ = 1.0 / (scale_ * sqrt_d);
        break;
    case NoiseKind::BoundedUniform:
        // |M| <= w sqrt d, and e * exp(-u / (w sqrt d)) >= 1 below that bound.
        c1_ = std::exp(1.0);
        c2_ = 1.0 / (scale_ * sqrt_d);
        break;
    case NoiseKind::TruncatedGaussian:
        c1_ = std::exp(1.0);
        c2_ = 1.0 / (cutoff_ * sqrt_d);
        break;
    case NoiseKind::Zero:
        c1_ = 1.0;
        c2_ = std::numeric_limits<double>::max();
        break;
    }
}

NoiseModel NoiseModel::laplace(std::size_t dim, double scale)
{
    if (!(scale > 0.0)) {
        throw InvalidArgument("laplace scale must be positive");
    }
    return NoiseModel(NoiseKind::Laplace, dim, scale, 0.0);
}

NoiseModel NoiseModel::bounded_uniform(std::size_t dim, double half_width)
{
    if (!(half_width > 0.0)) {
        throw InvalidArgument("uniform half-width must be positive");
    }
    return NoiseModel(NoiseKind::BoundedUniform, dim, half_width, 0.0);
}

NoiseModel NoiseModel::truncated_gaussian(std::size_t dim, double sigma, double cutoff)
{
    if (!(sigma > 0.0) || !(cutoff > 0.0)) {
        throw InvalidArgument("truncated gaussian needs sigma > 0 and cutoff > 0");
    }
    return NoiseModel(NoiseKind::TruncatedGaussian, dim, sigma, cutoff);
}

NoiseModel NoiseModel::zero(std::size_t dim) { return NoiseModel(NoiseKind::Zero, dim, 0.0, 0.0); }

std::string NoiseModel::label() const
{
    std::ostringstream os;
    switch (kind_) {
    case NoiseKind::Laplace:
        os << "laplace(b=" << scale_ << ")";
        break;
    case NoiseKind::BoundedUniform:
        os << "bounded-uniform(w=" << scale_ << ")";
        break;
    case NoiseKind::TruncatedGaussian:
        os << "truncated-gaussian(sigma=" << scale_ << ",cutoff=" << cutoff_ << ")";
        break;
    case NoiseKind::Zero:
        os << "zero";
        break;
    }
    return os.str();
}

double NoiseModel::tail_c1(const Vec&) const { return c1_; }
double NoiseModel::tail_c2(const Vec&) const { return c2_; }

std::optional<double> NoiseModel::norm_bound() const
{
    const double sqrt_d = std::sqrt(static_cast<double>(dim_));
    switch (kind_) {
    case NoiseKind::BoundedUniform:
        return scale_ * sqrt_d;
    case NoiseKind::TruncatedGaussian:
        return cutoff_ * sqrt_d;
    case NoiseKind::Zero:
        return 0.0;
    case NoiseKind::Laplace:
        break;
    }
    return std::nullopt;
}

void NoiseModel::sample_into(const Vec&, RngStream& rng, Vec& out) const
{
    out.resize(static_cast<Eigen::Index>(dim_));
    for (Eigen::Index i = 0; i < out.size(); ++i) {
        switch (kind_) {
        case NoiseKind::Laplace: {
            // inverse CDF on a symmetric uniform
            const double u = rng.uniform_open() - 0.5;
            out[i] = u < 0.0 ? scale_ * std::log1p(2.0 * u) : -scale_ * std::log1p(-2.0 * u);
            break;
        }
        case NoiseKind::BoundedUniform:
            out[i] = scale_ * (2.0 * rng.uniform_open() - 1.0);
            break;
        case NoiseKind::TruncatedGaussian: {
            double z = 0.0;
            do {
                z = scale_ * rng.normal();
            } while (std::abs(z) > cutoff_);
            out[i] = z;
            break;
        }
        case NoiseKind::Zero:
            out[i] = 0.0;
            break;
        }
    }
}

Vec sample_noise(const NoiseModel& m, const Vec& state, RngStream& rng)
{
    Vec out;
    m.sample_into(state, rng, out);
    return out;
}

} // namespace lockin
