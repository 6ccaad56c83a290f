#include <algorithm>
#include <cmath>

#include "pkgain/synth.hpp"

namespace pkgain {

namespace {

void project_simplex(VectorXd& v) {
    VectorXd u = v;
    std::sort(u.data(), u.data() + u.size(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (Index i = 0; i < u.size(); ++i) {
        cum += u(i);
        const double t = (cum - 1.0) / static_cast<double>(i + 1);
        if (u(i) - t > 0) theta = t;
    }
    v = (v.array() - theta).max(0.0);
}

}  // namespace

VectorXd simplex_qp(const MatrixXd& G, const VectorXd& e, double tau) {
    const Index k = G.cols();
    VectorXd lam = VectorXd::Zero(k);
    Index best = 0;
    e.maxCoeff(&best);
    lam(best) = 1.0;
    if (k == 1) return lam;
    const MatrixXd Q = G.transpose() * G / tau;
    const double L = std::max(1e-300, Eigen::SelfAdjointEigenSolver<MatrixXd>(Q, Eigen::EigenvaluesOnly).eigenvalues().maxCoeff());
    VectorXd y = lam, prev = lam;
    double t = 1.0;
    for (int it = 0; it < 20000; ++it) {
        const VectorXd grad = Q * y - e;
        VectorXd next = y - grad / L;
        project_simplex(next);
        const double tn = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        y = next + ((t - 1.0) / tn) * (next - prev);
        prev = next;
        t = tn;
        if (it % 20 == 19) {
            // Frank-Wolfe gap at the current iterate
            const VectorXd g = Q * prev - e;
            const double gap = g.dot(prev) - g.minCoeff();
            if (gap <= 1e-13 * (1.0 + std::abs(prev.dot(Q * prev)) + e.cwiseAbs().maxCoeff())) break;
        }
    }
    return prev;
}

namespace {

struct Plane {
    VectorXd y;  // where the linearization was taken
    double v;    // its value at y
    VectorXd g;
};

}  // namespace

BundleResult bundle_minimize(const Oracle& f, VectorXd x0, const BundleOptions& opt) {
    BundleResult res;
    res.x = std::move(x0);
    OracleResult fx = f(res.x);
    ++res.evaluations;
    res.value = fx.value;
    if (!std::isfinite(fx.value)) return res;
    res.trace.push_back({0, fx.value, opt.tau0, true});
    if (fx.value < opt.target) {
        res.reached_target = true;
        return res;
    }

    std::vector<Plane> bundle;
    for (auto& [v, g] : fx.planes) bundle.push_back({res.x, v, g});
    double tau = opt.tau0;
    const Index n = res.x.size();

    for (int it = 1; it <= opt.max_iterations; ++it) {
        res.iterations = it;
        const Index k = static_cast<Index>(bundle.size());
        MatrixXd G(n, k);
        VectorXd e(k);
        for (Index i = 0; i < k; ++i) {
            const Plane& p = bundle[static_cast<std::size_t>(i)];
            const VectorXd dx = res.x - p.y;
            const double t = p.v + p.g.dot(dx) - res.value;
            e(i) = std::min(t, -opt.downshift * dx.squaredNorm());
            if (dx.squaredNorm() == 0.0) e(i) = std::min(0.0, p.v - res.value);
            G.col(i) = p.g;
        }
        const VectorXd lam = simplex_qp(G, e, tau);
        const VectorXd d = -(G * lam) / tau;
        const double model = (e + G.transpose() * d).maxCoeff();
        const double pred = -model;
        if (!(pred > opt.tol * (1.0 + std::abs(res.value)))) {
            res.converged = true;
            break;
        }

        const VectorXd y = res.x + d;
        OracleResult fy = f(y);
        ++res.evaluations;
        const double rho = std::isfinite(fy.value) ? (res.value - fy.value) / pred : -std::numeric_limits<double>::infinity();

        if (rho >= opt.gamma_accept) {
            res.x = y;
            res.value = fy.value;
            if (rho >= opt.gamma_good) tau = std::max(tau * 0.5, 1e-10);
            res.trace.push_back({it, res.value, tau, true});
            // keep the aggregate plane and the active ones
            std::vector<Plane> kept;
            for (Index i = 0; i < k; ++i)
                if (lam(i) > 1e-10) kept.push_back(bundle[static_cast<std::size_t>(i)]);
            bundle = std::move(kept);
            for (auto& [v, g] : fy.planes) bundle.push_back({y, v, g});
            if (res.value < opt.target) {
                res.reached_target = true;
                break;
            }
        } else {
            // aggregate plane, then the cutting planes at y
            Plane agg{res.x, res.value + lam.dot(e), G * lam};
            std::vector<Plane> kept;
            kept.push_back(std::move(agg));
            for (Index i = 0; i < k; ++i)
                if (lam(i) > 1e-10) kept.push_back(bundle[static_cast<std::size_t>(i)]);
            if (std::isfinite(fy.value)) {
                double new_model = model;
                for (auto& [v, g] : fy.planes) {
                    const double dx2 = d.squaredNorm();
                    const double t = v + g.dot(res.x - y) - res.value;
                    const double ei = std::min(t, -opt.downshift * dx2);
                    new_model = std::max(new_model, ei + g.dot(d));
                    kept.push_back({y, v, g});
                }
                // proximity control: tighten when the new cuts barely improved the model
                const double rho_tilde = -new_model / pred;
                if (rho_tilde >= opt.gamma_good) tau *= 2.0;
            } else {
                tau *= 4.0;
            }
            bundle = std::move(kept);
        }
        if (bundle.size() > opt.max_planes) bundle.erase(bundle.begin() + 1, bundle.begin() + 1 + (bundle.size() - opt.max_planes));
        if (tau > 1e14) {
            res.converged = true;
            break;
        }
    }
    return res;
}

}  // namespace pkgain
