#pragma once

// Certified H-infinity and peak-to-peak (L1) norms of stable LTI systems.

#include <string>
#include <utility>
#include <vector>

#include "pkgain/io.hpp"
#include "pkgain/lti.hpp"

namespace pkgain {

enum class NormKind { hinf, pk_gn, row_l1 };

std::string to_string(NormKind k);
NormKind norm_kind_from_string(const std::string& s);

/// The true norm lies in [value - abs_error_bound, value + abs_error_bound].
struct NormCertificate {
    NormKind kind = NormKind::pk_gn;
    double value = 0.0;
    double abs_error_bound = 0.0;
    double horizon_T = 0.0;     // peak-gain only
    std::vector<double> grid;   // march nodes (peak-gain) or candidate frequencies (hinf)
    std::size_t nodes = 0;
    double lower = 0.0;         // bracketing interval for hinf
    double upper = 0.0;
    double peak_frequency = 0.0;
    Index row = 0;              // active row for peak-gain
    std::vector<double> row_values;
};

Json certificate_to_json(const NormCertificate& c, bool with_grid = false);

inline constexpr double kHinfDefaultTol = 1e-6;
inline constexpr double kPkgnDefaultTol = 1e-4;

/// Level-set iteration on the Hamiltonian imaginary-axis test. Relative
/// tolerance: value is within tol * (1 + value) of the true norm.
NormCertificate hinf_norm(const System& G, double tol = kHinfDefaultTol);

/// Local maximizers of sigma_max(G(jw)) whose value is at least
/// `fraction * peak` (w >= 0, sorted by decreasing gain).
std::vector<std::pair<double, double>> hinf_near_active(const System& G, double peak, double fraction = 0.99);

double sigma_max(const System& G, double omega);

/// Absolute tolerance on max_i sum_j (|g0_ij|_1 + |d_ij|).
NormCertificate peak_gain_norm(const System& G, double tol = kPkgnDefaultTol);
NormCertificate row_l1(const System& G, Index i, double tol = kPkgnDefaultTol);

/// L1 mass of one impulse-response entry together with the sign structure
/// used by gradient computations.
struct EntryL1 {
    double value = 0.0;        // centred estimate of int |c_i e^{At} b_j| dt
    double error = 0.0;
    std::vector<double> roots; // sign changes of c_i e^{At} b_j, increasing
    int first_sign = 0;        // sign on [0, roots[0]); alternates afterwards
};

struct PeakGainAnalysis {
    std::vector<std::vector<EntryL1>> entries;  // [row][col]
    VectorXd row_values;                        // sum_j (L1 + |d_ij|)
    VectorXd row_errors;
    double horizon_T = 0.0;
    std::size_t nodes = 0;
    std::vector<double> grid;
};

/// Per-entry analysis over the requested rows (all rows when empty).
PeakGainAnalysis peak_gain_analysis(const System& G, double tol, const std::vector<Index>& rows = {});

/// (m^{-1/2} ||G||_inf, (2n+1) p^{1/2} ||G||_inf), with 2n in place of
/// 2n+1 when D = 0. m counts outputs and p counts inputs.
std::pair<double, double> chain_bounds(const System& G, double tol = kHinfDefaultTol);

/// Induced l_inf -> l_inf matrix norm.
double max_row_sum(const MatrixXd& D);

}  // namespace pkgain
