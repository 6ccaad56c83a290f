// Acceptance suite: one PASS/FAIL line per criterion, with timings.

#include <chrono>
#include <cstdio>
#include <functional>
#include <sstream>

#include "pkgain/norms.hpp"
#include "pkgain/qp.hpp"
#include "pkgain/scenario.hpp"
#include "pkgain/transforms.hpp"
#include "support.hpp"

using namespace testing;

namespace {

std::string scenario_path(const std::string& name) { return std::string(PKGAIN_SCENARIO_DIR) + "/" + name; }

struct Outcome {
    bool pass = true;
    std::vector<std::string> notes;

    void check(bool ok, const std::string& what) {
        pass = pass && ok;
        notes.push_back(std::string(ok ? "ok    " : "FAILED") + "  " + what);
    }
};

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof buf, f, a);
    return buf;
}

template <typename... Args>
std::string fmt(const char* f, Args... a) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a...);
    return buf;
}

bool near(double value, double ref, double tol) { return std::abs(value - ref) <= tol; }

// --- 1, 2: the projection example -------------------------------------------------

struct Example7 {
    Scenario sc = read_scenario(scenario_path("example7.scn"));
    std::map<std::string, NormQuery> q = sc.norm_queries();

    double n1(double rho) {
        sc.set_parameter("rho", rho);
        return peak_gain_norm(channel(sc.plant(q.at("pkgn").plant), q.at("pkgn").sel), 1e-6).value;
    }
    double n2(double rho) {
        sc.set_parameter("rho", rho);
        return hinf_norm(channel(sc.plant(q.at("hinf").plant), q.at("hinf").sel)).value;
    }
};

Outcome norm_reproduction() {
    Outcome o;
    Example7 e;
    const double tol = 0.005;
    const struct {
        double rho, pk, hi;
    } refs[] = {{0.499, 0.9988, 1.2597}, {0.434, 0.8687, 0.9995}};
    for (const auto& r : refs) {
        const double pk = e.n1(r.rho), hi = e.n2(r.rho);
        o.check(near(pk, r.pk, tol), fmt("rho=%.3f  pk_gn(G_tilde)=%.6f  ref %.4f", r.rho, pk, r.pk));
        o.check(near(hi, r.hi, tol), fmt("rho=%.3f  hinf(G_hat)=%.6f  ref %.4f", r.rho, hi, r.hi));
    }
    return o;
}

Outcome crossover() {
    Outcome o;
    Example7 e;
    double lo = 0.434, hi = 0.499;
    o.check(e.n2(lo) < 1.0 && e.n2(hi) >= 1.0, "circle-criterion norm crosses 1 inside (0.434, 0.499)");
    while (hi - lo > 1e-7) {
        const double mid = 0.5 * (lo + hi);
        (e.n2(mid) >= 1.0 ? hi : lo) = mid;
    }
    const double rho = hi;
    const double n1 = e.n1(rho), n2 = e.n2(rho);
    o.check(rho > 0.434 && rho < 0.499 && n1 < 1.0 && n2 >= 1.0,
            fmt("rho=%.7f  n1=pk_gn=%.6f < 1 <= n2=hinf=%.6f", rho, n1, n2));
    // the whole band [rho, 0.499) has the property
    bool band = true;
    for (int k = 0; k <= 20; ++k) {
        const double r = rho + (0.499 - 1e-9 - rho) * k / 20.0;
        band = band && e.n1(r) < 1.0 && e.n2(r) >= 1.0;
    }
    o.check(band, fmt("n1 < 1 <= n2 on the band [%.5f, 0.499)", rho));
    return o;
}

// --- 3, 4: attractor norms ---------------------------------------------------------

Outcome attractor_norm() {
    Outcome o;
    const Scenario sc = read_scenario(scenario_path("two_attractor.scn"));
    const System H0 = channel(sc.plant("H0"), {"p", "q"});
    const double full = peak_gain_norm(H0).value;
    // Phi acts only through q3 -> p1: the effective SISO channel.
    const System reduced(H0.A, H0.B.col(0), H0.C.row(2), H0.D.block(2, 0, 1, 1));
    const double siso = peak_gain_norm(reduced).value;
    const bool full_ok = near(full, 2.0759, 0.02), siso_ok = near(siso, 2.0759, 0.02);
    o.check(full_ok || siso_ok, fmt("full 3x3 channel %.6f, reduced q3<-p1 channel %.6f, ref 2.0759", full, siso));
    o.notes.push_back(std::string("chosen channel: ") + (full_ok ? "full 3x3 p->q" : siso_ok ? "reduced q3<-p1" : "none"));
    return o;
}

Outcome fixture_norm() {
    Outcome o;
    const Scenario sc = read_scenario(scenario_path("mimo_attractor.scn"));
    const System T = channel(sc.plant("H_tilde_Kstar"), {"p", "q"});
    const auto c = peak_gain_norm(T);
    o.check(near(c.value, 5.34, 0.1) && c.value < 6.67,
            fmt("pk_gn(F_l(H_tilde, K*)) = %.6f +- %.1e, ref 5.34, threshold 6.67", c.value, c.abs_error_bound));
    o.check(is_hurwitz(T.A).stable, "closed loop Hurwitz");
    return o;
}

// --- 5: synthesis ------------------------------------------------------------------

Outcome synthesis() {
    Outcome o;
    const Scenario sc = read_scenario(scenario_path("mimo_attractor.scn"));
    for (const std::string name : {"pk-h", "h2h"}) {
        ProgramSettings ps = sc.program(name);
        ps.options.restarts = 5;
        ps.options.max_iterations = 500;
        const SynthesisResult r = solve_mixed(ps.spec, sc.controller_structure(), sc.controller_initial(), ps.options);
        const double slack =
            std::isnan(r.constraint) ? std::numeric_limits<double>::infinity() : r.bound * (1.0 + 1e-6) - r.constraint;
        const Certificate c = certify(ps.kind, r.objective, r.objective_error, ps.spec.threshold, slack, r.abscissae);
        if (name == "pk-h")
            o.check(c.pass && r.objective + r.objective_error < 6.67,
                    fmt("pk-h: pk_gn %.6f + %.1e vs 6.67, H-inf constraint %.4f <= %.4f, status %s", r.objective,
                        r.objective_error, r.constraint, r.bound, to_string(r.status).c_str()));
        else
            o.check(!c.pass, fmt("h2h: no L2 certificate below %.4f (status %s, best objective %.4g)", ps.spec.threshold,
                                 to_string(r.status).c_str(), r.objective));
    }
    return o;
}

// --- 6: equilibria -----------------------------------------------------------------

Outcome equilibria() {
    Outcome o;
    {
        const Scenario sc = read_scenario(scenario_path("two_attractor.scn"));
        const SimulationSettings s = sc.simulation();
        const auto rep = find_equilibria(sc.loop(s, std::nullopt), s.equilibria);
        std::ostringstream found;
        bool plus = false, minus = false, origin = false;
        for (const auto& e : rep.equilibria) {
            found << " (" << fmt("%.4f, %.4f, %.4f", e.x(0), e.x(1), e.x(2)) << ")";
            if (e.x.norm() < 1e-8) origin = !e.stable;
            const bool flat = std::abs(e.x(0)) < 0.01 && std::abs(e.x(1)) < 0.01;
            plus = plus || (flat && near(e.x(2), 2.963, 0.01) && e.stable);
            minus = minus || (flat && near(e.x(2), -2.963, 0.01) && e.stable);
        }
        o.check(origin, "two-attractor: origin is an unstable equilibrium");
        o.check(plus && minus, "two-attractor: stable equilibria (0, 0, +-2.963) +- 0.01; found" + found.str());
    }
    {
        const Scenario sc = read_scenario(scenario_path("mimo_attractor.scn"));
        SimulationSettings s = sc.simulation();
        s.controller = "fixed";
        const auto rep = find_equilibria(sc.loop(s, std::nullopt), s.equilibria);
        const VectorXd ref = (VectorXd(5) << 2.98, -0.0420, -2.94, -237.94, 0).finished();
        int matched = 0;
        for (const VectorXd& r : {VectorXd(ref), VectorXd(-ref)})
            for (const auto& e : rep.equilibria) {
                bool ok = e.x.size() == 5;
                for (Index i = 0; ok && i < 5; ++i) ok = std::abs(e.x(i) - r(i)) <= 0.01 * std::abs(r(i)) + 1e-9;
                if (ok) {
                    ++matched;
                    break;
                }
            }
        o.check(matched == 2, fmt("K* closed loop: %d of 2 equilibria +-(2.98, -0.0420, -2.94, -237.94, 0) within 1%%",
                                  matched));
    }
    {
        const Scenario sc = read_scenario(scenario_path("mimo_attractor.scn"));
        const auto eig = sc.plant("H").sys.A.eigenvalues();
        int found = 0;
        std::ostringstream all;
        for (Index i = 0; i < eig.size(); ++i) {
            all << " " << fmt("%.4f%+.4fi", eig(i).real(), eig(i).imag());
            if (std::abs(eig(i).real() - 0.1422) < 5e-5 && std::abs(std::abs(eig(i).imag()) - 3.0189) < 5e-5) ++found;
        }
        o.check(found == 2, "open-loop eigenvalues" + all.str() + ", ref 0.1422 +- 3.0189i");
    }
    return o;
}

// --- 7: property suites ------------------------------------------------------------

Plant isharp(Index k) {
    MatrixXd D = MatrixXd::Zero(2 * k, 2 * k);
    D.topRightCorner(k, k).setIdentity();
    D.bottomLeftCorner(k, k).setIdentity();
    return Plant(System::gain(D), make_groups({{"w", k}, {"u", k}}), make_groups({{"z", k}, {"y", k}}));
}

double refined_grid_hinf(const System& G) {
    double best = dense_grid_hinf(G, 20000, 1e-3, 1e3);
    double wbest = 0;
    for (int k = 0; k <= 20000; ++k) {
        const double w = 1e-3 * std::pow(1e6, k / 20000.0);
        const double s = max_singular_value(freq_response(G, w));
        if (s >= best) best = s, wbest = w;
    }
    if (wbest > 0)
        for (int k = -2000; k <= 2000; ++k) {
            const double w = wbest * std::pow(1e6, k / (20000.0 * 2000.0));
            best = std::max(best, max_singular_value(freq_response(G, w)));
        }
    return best;
}

Outcome properties() {
    Outcome o;
    std::mt19937 rng(2024);
    const int N = 100;

    int bracket = 0, left = 0;
    for (int i = 0; i < N; ++i) {
        const System G = random_stable(rng, 1 + i % 5, 1 + i % 3, 1 + (i / 3) % 3, i % 2 == 0);
        const auto c = peak_gain_norm(G);
        const auto [lo, hi] = chain_bounds(G);
        bracket += lo <= c.value + c.abs_error_bound && c.value - c.abs_error_bound <= hi;
        left += hinf_norm(G).value <= (c.value + c.abs_error_bound) * std::sqrt(static_cast<double>(G.outputs()));
    }
    o.check(bracket == N, fmt("chain bounds bracket pk_gn on %d/%d systems", bracket, N));
    o.check(left == N, fmt("hinf <= pk_gn * sqrt(m) on %d/%d systems", left, N));

    double star = 0;
    for (int i = 0; i < N; ++i) {
        const Index k = 1 + i % 3;
        const Plant M(random_stable(rng, 1 + i % 4, 2 * k, 2 * k), make_groups({{"w", k}, {"u", k}}),
                      make_groups({{"z", k}, {"y", k}}));
        const Plant R = star_product(M, isharp(k));
        for (double w : {0.0, 0.7, 3.1}) star = std::max(star, max_abs_diff(freq_response(R.sys, w), freq_response(M.sys, w)));
        const double s2 = std::sqrt(2.0);
        MatrixXd Bm(2 * k, 2 * k);
        Bm << -MatrixXd::Identity(k, k), s2 * MatrixXd::Identity(k, k), -s2 * MatrixXd::Identity(k, k),
            MatrixXd::Identity(k, k);
        const Plant Bp(System::gain(Bm), make_groups({{"w", k}, {"u", k}}), make_groups({{"z", k}, {"y", k}}));
        star = std::max(star, (star_product(Bp, Bp).sys.D - isharp(k).sys.D).cwiseAbs().maxCoeff());
    }
    o.check(star <= 1e-10, fmt("star product M*I# = M and B*B = I#: worst deviation %.2e", star));

    double pk_rel = 0, hi_rel = 0;
    for (int i = 0; i < N; ++i) {
        const System G = random_stable(rng, 1 + i % 4, 1 + i % 2, 1 + (i / 2) % 2, i % 3 == 0, 0.5);
        const double pk = peak_gain_norm(G, 1e-8).value;
        const double oracle = trapezoid_row_l1(G, 2e-4, 80.0).maxCoeff();
        pk_rel = std::max(pk_rel, std::abs(pk - oracle) / oracle);
        const double hi = hinf_norm(G, 1e-10).value;
        const double grid = refined_grid_hinf(G);
        hi_rel = std::max(hi_rel, std::abs(hi - grid) / hi);
    }
    o.check(pk_rel <= 1e-3, fmt("pk_gn vs trapezoid oracle: worst relative gap %.2e", pk_rel));
    o.check(hi_rel <= 1e-4, fmt("hinf vs dense frequency grid: worst relative gap %.2e", hi_rel));

    {
        const auto cs = ControllerStructure::fixed_order(1, 1, 1);
        double worst_h = 0, worst_p = 0;
        int checked = 0;
        while (checked < N) {
            System S = random_stable(rng, 3, 3, 3, true, 0.5);
            S.D(2, 2) = 0;
            const Plant P(S, make_groups({{"p", 2}, {"u", 1}}), make_groups({{"q", 2}, {"y", 1}}));
            const VectorXd x = random_matrix(rng, cs.parameter_count(), 1, 0.3).col(0);
            if (spectral_abscissa(feedback_lft(P, cs.realize(x)).sys.A) >= -0.05) continue;
            VectorXd e = random_matrix(rng, x.size(), 1).col(0).normalized();
            const auto h = eval_hinf_subgrad(P, {"p", "q"}, cs, x);
            const double hh = 1e-6;
            const double fdh = (hinf_norm(closed_loop(P, {"p", "q"}, cs, x + hh * e), 1e-12).value -
                                hinf_norm(closed_loop(P, {"p", "q"}, cs, x - hh * e), 1e-12).value) /
                               (2 * hh);
            worst_h = std::max(worst_h, std::abs(fdh - h.gradient.dot(e)) / (1.0 + std::abs(fdh)));
            const auto p = eval_pkgn_subgrad(P, {"p", "q"}, cs, x);
            const double hp = 1e-4;
            const double fdp = (peak_gain_norm(closed_loop(P, {"p", "q"}, cs, x + hp * e), 1e-10).value -
                                peak_gain_norm(closed_loop(P, {"p", "q"}, cs, x - hp * e), 1e-10).value) /
                               (2 * hp);
            worst_p = std::max(worst_p, std::abs(fdp - p.gradient.dot(e)) / (1.0 + std::abs(fdp)));
            ++checked;
        }
        o.check(worst_h <= 1e-4, fmt("hinf subgradient vs central differences: worst %.2e", worst_h));
        o.check(worst_p <= 1e-3, fmt("pk_gn subgradient vs central differences: worst %.2e", worst_p));
    }

    {
        MatrixXd L;
        VectorXd b;
        example7_qp(L, b);
        std::normal_distribution<double> Nd(0, 10);
        double kkt = 0, sector = -1e300;
        for (int k = 0; k < 10000; ++k) {
            const MatrixXd R = random_matrix(rng, 2, 2);
            const MatrixXd H = k % 2 ? MatrixXd(MatrixXd::Identity(2, 2)) : MatrixXd(R * R.transpose() + 0.3 * MatrixXd::Identity(2, 2));
            const Eigen::Vector2d x(Nd(rng), Nd(rng));
            const auto s = qp_projection(H, L, b, x);
            kkt = std::max(kkt, kkt_residual(H, L, b, x, s));
            sector = std::max(sector, s.v.dot(H * s.v - x));
        }
        o.check(kkt < 1e-8 && sector <= 1e-10,
                fmt("qp projection on 10^4 samples: KKT residual %.2e, sector max %.2e", kkt, sector));

        const auto pb = pwa_polytope_bound(example7_pieces(), example7_S());
        bool bprime = pb.B_prime.size() == 3;
        for (const Eigen::Vector2d v : {Eigen::Vector2d(0, 0), Eigen::Vector2d(0, 1), Eigen::Vector2d(1, 1)}) {
            bool hit = false;
            for (const auto& w : pb.B_prime) hit = hit || (w - v).cwiseAbs().maxCoeff() < 1e-12;
            bprime = bprime && hit;
        }
        const bool t_ok = pb.T.rows() == 2 && pb.T.cols() == 2 && (pb.T - mat({{2, -1}, {0, 1}})).cwiseAbs().maxCoeff() < 1e-12;
        o.check(bprime && t_ok, "polytope pipeline: B' = co{(0,0),(0,1),(1,1)}, T = [2 -1; 0 1]");
        std::normal_distribution<double> N1(0, 1);
        std::uniform_real_distribution<double> E(-2, 6);
        double worst = -1e300;
        for (int k = 0; k < 10000; ++k) {
            Eigen::Vector2d x(N1(rng), N1(rng));
            x *= std::pow(10.0, E(rng));
            const VectorXd p = qp_projection(MatrixXd::Identity(2, 2), L, b, x).v;
            const double slack = (pb.T * p).cwiseAbs().maxCoeff() - (example7_S() * x).cwiseAbs().maxCoeff() - pb.k;
            worst = std::max(worst, slack / (1.0 + x.cwiseAbs().maxCoeff()));
        }
        o.check(worst <= 1e-12, fmt("|phi(x)|_box <= |x|_tri + k (k = %.4f) on 10^4 samples up to 1e6: worst %.2e",
                                    pb.k, worst));
    }
    return o;
}

// --- 8: loop equivalence -----------------------------------------------------------

double rms(const Trajectory& a, const Trajectory& b) {
    if (a.t.size() != b.t.size()) return std::numeric_limits<double>::infinity();
    double s = 0;
    std::size_t m = 0;
    for (std::size_t k = 0; k < a.t.size(); ++k) {
        s += (a.x[k] - b.x[k]).squaredNorm();
        m += static_cast<std::size_t>(a.x[k].size());
    }
    return std::sqrt(s / static_cast<double>(m));
}

// Sector (c - r, c + r) per component: phi(q) = c q + r tanh(q) with a bounded wiggle.
Nonlinearity random_sector_map(std::mt19937& rng, Index n, VectorXd& c) {
    std::uniform_real_distribution<double> U(-0.5, 0.5);
    c.resize(n);
    VectorXd r(n);
    for (Index i = 0; i < n; ++i) c(i) = U(rng), r(i) = 0.3 + 0.5 * (U(rng) + 0.5);
    Nonlinearity phi;
    phi.nq = phi.np = n;
    phi.tag = "random_sector";
    phi.eval = [c, r](double, const VectorXd& q) -> VectorXd {
        return (c.array() * q.array() + r.array() * q.array().tanh() + 0.2 * (3 * q.array()).sin()).matrix();
    };
    return phi;
}

Outcome loop_equivalence() {
    Outcome o;
    std::mt19937 rng(77);
    SimOptions opt;
    opt.dt_out = 0.05;
    opt.tol = 1e-11;
    double worst_center = 0, worst_poly = 0;
    int drawn = 0;
    for (int i = 0; i < 10; ++drawn) {
        const Index n = 3 + drawn % 2, m = 2;
        LureLoop L;
        L.plant = Plant(random_stable(rng, n, m, m, false, 0.3), make_groups({{"p", m}}), make_groups({{"q", m}}));
        VectorXd c;
        L.phi = random_sector_map(rng, m, c);
        L.x0 = random_matrix(rng, n, 1).col(0);
        const Trajectory ref = simulate(L, 20.0, opt);
        // loops that blow up exponentially are not compared in absolute terms
        if (ref.diverged || ref.sup_x > 1e3) continue;
        ++i;

        LureLoop C = L;
        const MatrixXd Cm = c.asDiagonal();
        C.plant = sector_shift(L.plant, Cm);
        C.phi = L.phi + linear_nonlinearity(MatrixXd(-Cm));
        worst_center = std::max(worst_center, rms(ref, simulate(C, 20.0, opt)));

        MatrixXd T = random_matrix(rng, m, m) + 2.0 * MatrixXd::Identity(m, m);
        const MatrixXd S = random_matrix(rng, m + 1, m);
        const PolyhedralChange X(T, S);
        LureLoop P = L;
        P.plant = polyhedral_transform(L.plant, X);
        P.phi = transform_nonlinearity(L.phi, X);
        worst_poly = std::max(worst_poly, rms(ref, simulate(P, 20.0, opt)));
    }
    o.check(worst_center < 1e-6,
            fmt("centered loops on 10 bounded random instances (%d drawn): worst RMS %.2e", drawn, worst_center));
    o.check(worst_poly < 1e-6, fmt("polyhedral-transform loops on the same instances: worst RMS %.2e", worst_poly));

    // the projection example itself
    const Scenario sc = read_scenario(scenario_path("example7.scn"));
    LureLoop L;
    L.plant = sc.plant("G_rho");
    L.phi = sc.nonlinearity();
    L.x0 = Eigen::Vector2d(3.0, -2.0);
    const PolyhedralChange X(example7_T(), example7_S());
    LureLoop P = L;
    P.plant = polyhedral_transform(L.plant, X);
    P.phi = transform_nonlinearity(L.phi, X);
    const double r7 = rms(simulate(L, 20.0, opt), simulate(P, 20.0, opt));
    o.check(r7 < 1e-6, fmt("projection example with T = [2 -1; 0 1]: RMS %.2e", r7));
    return o;
}

// --- 9: qualitative behavior ------------------------------------------------------

Outcome qualitative() {
    Outcome o;
    {
        const Scenario sc = read_scenario(scenario_path("chua.scn"));
        const SimulationSettings s = sc.simulation();
        const Trajectory tr = simulate(sc.loop(s, std::nullopt), 500.0, s.options);
        const Settling st = settling(tr);
        o.check(!tr.diverged && tr.sup_x < 100 && !st.settled,
                fmt("Chua over T=500: sup|x| = %.3f, final-window spread %.3f, bounded and not settling", tr.sup_x,
                    st.spread));
    }
    {
        const Scenario sc = read_scenario(scenario_path("two_attractor.scn"));
        const SimulationSettings s = sc.simulation();
        const LureLoop L = sc.loop(s, std::nullopt);
        const Trajectory tr = simulate(L, s.t_end, s.options);
        const Settling st = settling(tr);
        o.check(!tr.diverged && st.settled,
                fmt("two-attractor from (0.1, 0.1, 3): converges to x3 = %.4f", st.x_end(2)));
        LureLoop M = L;
        M.x0 = -L.x0;
        const Settling sm = settling(simulate(M, s.t_end, s.options));
        o.check(sm.settled && sm.x_end(2) < 0, fmt("mirrored start converges to x3 = %.4f", sm.x_end(2)));
    }
    {
        const Scenario sc = read_scenario(scenario_path("mimo_attractor.scn"));
        SimulationSettings s = sc.simulation();
        s.controller = "none";
        LureLoop open = sc.loop(s, std::nullopt);
        open.x0 = Eigen::Vector3d(1, 1, 1);
        const Trajectory near0 = simulate(open, 200.0, s.options);
        const Settling sn = settling(near0);
        o.check(!near0.diverged && !sn.settled,
                fmt("uncontrolled MIMO near the origin: bounded double-scroll regime (sup|x| = %.3f)", near0.sup_x));
        open.x0 = Eigen::Vector3d(10, 10, 10);
        const Trajectory far = simulate(open, 500.0, s.options);
        o.check(far.diverged, fmt("uncontrolled MIMO from (10, 10, 10): diverges (t = %.2f)", far.t_diverged));

        s.controller = "fixed";
        LureLoop closed = sc.loop(s, std::nullopt);
        closed.x0 = Eigen::Vector3d(1, 1, 1);
        // the lag in K* has a time constant of 940 s
        const Trajectory tr = simulate(closed, 30000.0, s.options);
        const Settling st = settling(tr);
        o.check(!tr.diverged && st.settled,
                fmt("K* closed loop from (1, 1, 1): converges by T = 30000 to x1 = %.4f, sup|x| = %.3f", st.x_end(0),
                    tr.sup_x));
        closed.x0 = Eigen::Vector3d(10, 10, 10);
        const Trajectory tf = simulate(closed, 2000.0, s.options);
        o.check(!tf.diverged, fmt("K* closed loop from (10, 10, 10): bounded, sup|x| = %.3f", tf.sup_x));
    }
    return o;
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* name;
        double budget;  // seconds
        std::function<Outcome()> run;
    };
    const std::vector<Criterion> criteria{
        {1, "example7 norm reproduction", 5, norm_reproduction},
        {2, "example7 crossover band", 20, crossover},
        {3, "attractor norm of H0", 5, attractor_norm},
        {4, "fixture-controller norm", 10, fixture_norm},
        {5, "synthesis feasibility", 600, synthesis},
        {6, "equilibria", 60, equilibria},
        {7, "property suites", 120, properties},
        {8, "loop equivalence", 60, loop_equivalence},
        {9, "Chua and attractor behavior", 60, qualitative},
    };
    int failed = 0;
    for (const auto& c : criteria) {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = c.run();
        } catch (const std::exception& e) {
            o.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        o.check(secs < c.budget, fmt("runtime %.2f s (budget %.0f s)", secs, c.budget));
        failed += !o.pass;
        std::printf("%s  %d. %s (%.2f s)\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs);
        for (const auto& n : o.notes) std::printf("        %s\n", n.c_str());
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
