#include <boost/math/tools/minima.hpp>

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>

#include "pkgain/norms.hpp"

namespace pkgain {

double sigma_max(const System& G, double omega) {
    if (std::isinf(omega)) return max_singular_value(G.D.cast<std::complex<double>>());
    return max_singular_value(freq_response(G, omega));
}

namespace {

// Imaginary-axis eigenvalues j*w of this matrix are exactly the frequencies
// where gamma is a singular value of G(jw).
MatrixXd hamiltonian(const System& G, double gamma) {
    const Index n = G.states(), m = G.inputs(), p = G.outputs();
    const MatrixXd R = G.D.transpose() * G.D - gamma * gamma * MatrixXd::Identity(m, m);
    const MatrixXd S = G.D * G.D.transpose() - gamma * gamma * MatrixXd::Identity(p, p);
    const Eigen::PartialPivLU<MatrixXd> Rlu(R), Slu(S);
    const MatrixXd RiDtC = Rlu.solve(G.D.transpose() * G.C);
    const MatrixXd RiBt = Rlu.solve(G.B.transpose());
    MatrixXd H(2 * n, 2 * n);
    H.topLeftCorner(n, n) = G.A - G.B * RiDtC;
    H.topRightCorner(n, n) = -gamma * G.B * RiBt;
    H.bottomLeftCorner(n, n) = gamma * G.C.transpose() * Slu.solve(G.C);
    H.bottomRightCorner(n, n) = -G.A.transpose() + G.C.transpose() * G.D * RiBt;
    return H;
}

std::vector<double> crossing_frequencies(const System& G, double gamma) {
    const MatrixXd H = hamiltonian(G, gamma);
    Eigen::EigenSolver<MatrixXd> es(H, false);
    const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
    std::vector<double> ws;
    for (Index k = 0; k < es.eigenvalues().size(); ++k) {
        const auto l = es.eigenvalues()(k);
        if (std::abs(l.real()) <= 1e-7 * std::max(scale, std::abs(l)) && l.imag() >= 0.0) ws.push_back(l.imag());
    }
    std::sort(ws.begin(), ws.end());
    return ws;
}

struct Probe {
    double gain = 0.0;
    double omega = 0.0;
};

void consider(const System& G, double w, Probe& best) {
    const double s = sigma_max(G, w);
    if (s > best.gain) best = {s, w};
}

Probe initial_lower_bound(const System& G) {
    Probe best{sigma_max(G, std::numeric_limits<double>::infinity()), std::numeric_limits<double>::infinity()};
    consider(G, 0.0, best);
    Eigen::EigenSolver<MatrixXd> es(G.A, false);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (Index k = 0; k < es.eigenvalues().size(); ++k) {
        const auto l = es.eigenvalues()(k);
        consider(G, std::abs(l), best);
        if (std::abs(l.imag()) > 0) consider(G, std::abs(l.imag()), best);
        lo = std::min(lo, std::abs(l));
        hi = std::max(hi, std::abs(l));
    }
    if (hi > 0) {
        const int N = 40;
        const double a = std::log10(lo) - 2, b = std::log10(hi) + 2;
        for (int i = 0; i <= N; ++i) consider(G, std::pow(10.0, a + (b - a) * i / N), best);
    }
    return best;
}

double maximize_on(const System& G, double a, double b, double& at) {
    auto neg = [&](double w) { return -sigma_max(G, w); };
    const auto r = boost::math::tools::brent_find_minima(neg, a, b, 40);
    at = r.first;
    return -r.second;
}

}  // namespace

NormCertificate hinf_norm(const System& G, double tol) {
    NormCertificate cert;
    cert.kind = NormKind::hinf;
    if (G.is_static()) {
        cert.value = cert.lower = cert.upper = sigma_max(G, 0.0);
        cert.peak_frequency = 0.0;
        return cert;
    }
    const auto h = is_hurwitz(G.A);
    if (!h.stable) throw NotHurwitzError("hinf_norm: A is not Hurwitz", h.abscissa);

    Probe best = initial_lower_bound(G);
    double lb = best.gain, ub = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < 100; ++iter) {
        const double gamma = std::max(lb * (1.0 + 2.0 * tol), 1e-300);
        const auto ws = crossing_frequencies(G, gamma);
        for (double w : ws) cert.grid.push_back(w);
        if (ws.empty()) {
            ub = gamma;
            break;
        }
        Probe next = best;
        for (std::size_t k = 0; k < ws.size(); ++k) {
            consider(G, ws[k], next);
            const double left = k == 0 ? 0.0 : ws[k - 1];
            consider(G, 0.5 * (left + ws[k]), next);
        }
        if (next.gain < gamma) {
            ub = gamma;
            break;
        }
        best = next;
        lb = best.gain;
    }
    if (!std::isfinite(ub)) throw QuadratureError("hinf_norm: level-set iteration did not converge");
    cert.lower = lb;
    cert.upper = ub;
    cert.value = 0.5 * (lb + ub);
    cert.abs_error_bound = 0.5 * (ub - lb);
    cert.peak_frequency = best.omega;
    cert.nodes = cert.grid.size();
    return cert;
}

std::vector<std::pair<double, double>> hinf_near_active(const System& G, double peak, double fraction) {
    std::vector<std::pair<double, double>> out;
    const double inf = std::numeric_limits<double>::infinity();
    if (G.is_static()) {
        out.emplace_back(0.0, sigma_max(G, 0.0));
        return out;
    }
    const double level = fraction * peak;
    const double dgain = sigma_max(G, inf);
    std::vector<double> ws;
    if (level > dgain * (1.0 + 1e-12)) ws = crossing_frequencies(G, level);

    // Intervals of the frequency axis bracketed by level crossings.
    std::vector<double> edges{0.0};
    for (double w : ws)
        if (w > edges.back()) edges.push_back(w);
    const double wmax = std::max({1.0, edges.back(), G.A.cwiseAbs().maxCoeff()}) * 1e3;
    edges.push_back(wmax);

    for (std::size_t k = 0; k + 1 < edges.size(); ++k) {
        const double a = edges[k], b = edges[k + 1];
        // Coarse samples so that several maxima in one interval are not merged.
        const int N = 16;
        std::vector<double> pts;
        for (int i = 0; i <= N; ++i) {
            const double t = static_cast<double>(i) / N;
            pts.push_back(a > 0 ? a * std::pow(b / a, t) : b * (std::pow(10.0, 6.0 * t) - 1.0) / (1e6 - 1.0));
        }
        for (int i = 1; i < N; ++i) {
            const double s0 = sigma_max(G, pts[i - 1]), s1 = sigma_max(G, pts[i]), s2 = sigma_max(G, pts[i + 1]);
            if (s1 >= s0 && s1 >= s2 && s1 >= level * 0.999) {
                double at = pts[i];
                const double v = maximize_on(G, pts[i - 1], pts[i + 1], at);
                if (v >= level) out.emplace_back(at, v);
            }
        }
        const double s0 = sigma_max(G, pts[0]), s1 = sigma_max(G, pts[1]);
        if (a == 0.0 && s0 >= s1 && s0 >= level) out.emplace_back(0.0, s0);
    }
    if (dgain >= level) out.emplace_back(inf, dgain);

    std::sort(out.begin(), out.end(), [](const auto& x, const auto& y) { return x.second > y.second; });
    std::vector<std::pair<double, double>> uniq;
    for (const auto& c : out) {
        bool dup = false;
        for (const auto& u : uniq)
            dup = dup || (c.first == u.first) ||
                  (std::isfinite(c.first) && std::isfinite(u.first) &&
                   std::abs(c.first - u.first) <= 1e-6 * std::max(1.0, u.first));
        if (!dup) uniq.push_back(c);
    }
    return uniq;
}

}  // namespace pkgain
