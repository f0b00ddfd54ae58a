#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tpbs/matrix.hpp"
#include "tpbs/model.hpp"

namespace tpbs {

/// The factorization DE = s^T Z s with Z = A0 o A1 (Hadamard).
///
/// A0_{rs} = cos(v_r, v_s) prod_n cos(g_{n,r}, g_{n,s}) and
/// A1_{rs} = sum_n <g'_{n,r}, g'_{n,s}> / <g_{n,r}, g_{n,s}>. Entries whose
/// ratio would divide by an inner product of magnitude <= tol are marked in
/// `degenerate` and hold NaN in A1 and Z.
struct DeDecomposition {
    std::vector<double> s;
    Matrix a0;
    Matrix a1;
    Matrix z;
    std::vector<std::uint8_t> degenerate;  // R x R, row-major
    bool any_degenerate = false;

    bool is_degenerate(std::size_t r, std::size_t k) const { return degenerate[r * s.size() + k] != 0; }
    /// s^T Z s; NaN if any pair is degenerate.
    double quadratic_value() const;
    /// Eigenvalues of the symmetric part of Z, ascending. Empty if degenerate.
    std::vector<double> z_eigenvalues() const;
};

struct LdeConfig {
    double rho = 0.1;
    Matrix points;  // one training point per row, in [0, 1]^N
};

/// Interval Grams for every (box, dimension), built once per point set so the
/// training loop only pays for the contractions.
class LdePlan {
public:
    LdePlan() = default;
    LdePlan(const std::vector<SplineSpace>& spaces, const LdeConfig& cfg);

    std::size_t num_boxes() const { return boxes_; }
    std::size_t input_dim() const { return dims_; }
    double rho() const { return rho_; }

    const BandedGram& value_gram(std::size_t box, std::size_t n) const { return g0_[box * dims_ + n]; }
    const BandedGram& deriv_gram(std::size_t box, std::size_t n) const { return g1_[box * dims_ + n]; }

    /// Single box covering [0, 1]^N; used for the global energy.
    static LdePlan global(const std::vector<SplineSpace>& spaces);

private:
    std::size_t boxes_ = 0;
    std::size_t dims_ = 0;
    double rho_ = 0.0;
    std::vector<BandedGram> g0_;
    std::vector<BandedGram> g1_;
};

/// Closed-form DE(g) = int_{[0,1]^N} ||grad g||_F^2 assembled as
///   sum_{r,k} (v_r . v_k) sum_q <g'_{q,r}, g'_{q,k}> prod_{n != q} <g_{n,r}, g_{n,k}>.
double dirichlet_energy(const TpbsModel& model);

DeDecomposition de_decomposition(const TpbsModel& model, double tol_den = 1e-12);

/// Sum over training points of the Dirichlet energy restricted to the
/// clipped l-infinity box of radius rho around each point.
double local_dirichlet_energy(const TpbsModel& model, const LdeConfig& cfg);

/// Per-box contributions, in point order.
std::vector<double> local_dirichlet_energy_per_box(const TpbsModel& model, const LdeConfig& cfg);

/// scale * sum_{b in boxes} E_b, with the gradient accumulated into `grad`
/// (scaled likewise) when non-null. An empty `boxes` span means every box.
double planned_energy(const TpbsModel& model, const LdePlan& plan, std::span<const std::size_t> boxes,
                      double scale, ParamGrad* grad);

ParamGrad grad_dirichlet_energy(const TpbsModel& model);
ParamGrad grad_local_dirichlet_energy(const TpbsModel& model, const LdeConfig& cfg);

}  // namespace tpbs
