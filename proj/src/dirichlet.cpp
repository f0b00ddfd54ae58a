#include "tpbs/dirichlet.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "tpbs/error.hpp"
#include "tpbs/parallel.hpp"

namespace tpbs {

LdePlan::LdePlan(const std::vector<SplineSpace>& spaces, const LdeConfig& cfg)
    : boxes_(cfg.points.rows), dims_(spaces.size()), rho_(cfg.rho) {
    require(cfg.rho > 0.0, ErrorKind::InvalidArgument, "LDE radius rho must be positive");
    if (boxes_ > 0)
        require(cfg.points.cols == dims_, ErrorKind::Dimension,
                "LDE points have " + std::to_string(cfg.points.cols) + " coordinates but the model has " +
                    std::to_string(dims_) + " inputs");
    g0_.reserve(boxes_ * dims_);
    g1_.reserve(boxes_ * dims_);
    for (std::size_t m = 0; m < boxes_; ++m) {
        for (std::size_t n = 0; n < dims_; ++n) {
            const double x = cfg.points(m, n);
            if (!(x >= 0.0 && x <= 1.0)) {
                std::ostringstream msg;
                msg << "LDE point " << m << " coordinate " << n << " = " << x << " outside [0, 1]";
                fail(ErrorKind::Domain, msg.str());
            }
            const double a = std::max(0.0, x - cfg.rho);
            const double b = std::min(1.0, x + cfg.rho);
            g0_.push_back(gram(spaces[n], a, b, 0));
            g1_.push_back(gram(spaces[n], a, b, 1));
        }
    }
}

LdePlan LdePlan::global(const std::vector<SplineSpace>& spaces) {
    LdePlan plan;
    plan.boxes_ = 1;
    plan.dims_ = spaces.size();
    plan.rho_ = 0.5;
    for (const auto& s : spaces) {
        plan.g0_.push_back(gram(s, 0.0, 1.0, 0));
        plan.g1_.push_back(gram(s, 0.0, 1.0, 1));
    }
    return plan;
}

namespace {

// (G c)_i for rows in [row_begin, row_end); other rows of `out` are untouched
// and never read by the callers.
void band_multiply_rows(const BandedGram& g, const double* c, double* out) {
    const int w = g.bandwidth + 1;
    for (int i = g.row_begin; i < g.row_end; ++i) {
        const double* row = g.band.data() + static_cast<std::size_t>(i) * w;
        double acc = row[0] * c[i];
        for (int o = 1; o <= g.bandwidth && i + o < g.size; ++o) acc += row[o] * c[i + o];
        for (int o = 1; o <= g.bandwidth && i - o >= 0; ++o)
            acc += g.band[static_cast<std::size_t>(i - o) * w + o] * c[i - o];
        out[i] = acc;
    }
}

/// Pair matrices P_{rk} = <g_r, g_k> for one dimension and one Gram, plus the
/// products H = G C needed by the gradient.
void contract(const TpbsModel& model, int n, const BandedGram& g, std::vector<double>& h, Matrix& p) {
    const int R = model.rank();
    const int K = model.space(n).num_basis;
    const auto block = model.dim_block(n);
    h.resize(static_cast<std::size_t>(R) * K);
    for (int r = 0; r < R; ++r) band_multiply_rows(g, block.data() + r * K, h.data() + r * K);
    const int lo = g.row_begin, hi = g.row_end;
    for (int r = 0; r < R; ++r) {
        const double* cr = block.data() + r * K;
        for (int k = r; k < R; ++k) {
            const double* hk = h.data() + k * K;
            double acc = 0.0;
            for (int i = lo; i < hi; ++i) acc += cr[i] * hk[i];
            p(r, k) = acc;
            p(k, r) = acc;
        }
    }
}

Matrix output_gram(const TpbsModel& model) {
    const int R = model.rank();
    Matrix v(R, R);
    for (int r = 0; r < R; ++r)
        for (int k = r; k < R; ++k) {
            const auto a = model.out_vector(r);
            const auto b = model.out_vector(k);
            double acc = 0.0;
            for (std::size_t m = 0; m < a.size(); ++m) acc += a[m] * b[m];
            v(r, k) = acc;
            v(k, r) = acc;
        }
    return v;
}

/// Scratch space for one worker evaluating boxes.
struct BoxWork {
    std::vector<Matrix> p0, p1;
    std::vector<std::vector<double>> h0, h1;
    std::vector<Matrix> w0, w1;
    Matrix t;
    std::vector<double> pre_a, pre_s, suf_b, suf_u;

    BoxWork(int dims, int rank)
        : p0(dims, Matrix(rank, rank)), p1(dims, Matrix(rank, rank)), h0(dims), h1(dims),
          w0(dims, Matrix(rank, rank)), w1(dims, Matrix(rank, rank)), t(rank, rank),
          pre_a(dims + 1), pre_s(dims + 1), suf_b(dims + 1), suf_u(dims + 1) {}
};

/// Energy of one box; when `grad` is set, adds scale * dE/dtheta into it.
double box_energy(const TpbsModel& model, const LdePlan& plan, std::size_t box, const Matrix& vgram,
                  BoxWork& wk, double scale, ParamGrad* grad) {
    const int N = model.input_dim();
    const int R = model.rank();
    for (int n = 0; n < N; ++n) {
        contract(model, n, plan.value_gram(box, n), wk.h0[n], wk.p0[n]);
        contract(model, n, plan.deriv_gram(box, n), wk.h1[n], wk.p1[n]);
    }
    double energy = 0.0;
    auto& A = wk.pre_a;
    auto& S = wk.pre_s;
    auto& B = wk.suf_b;
    auto& U = wk.suf_u;
    for (int r = 0; r < R; ++r) {
        for (int k = r; k < R; ++k) {
            // Prefix: A_j = prod_{m<j} P0_m, S_j = sum_{q<j} P1_q prod_{m<j, m!=q} P0_m.
            A[0] = 1.0;
            S[0] = 0.0;
            for (int n = 0; n < N; ++n) {
                const double a0 = wk.p0[n](r, k);
                const double a1 = wk.p1[n](r, k);
                S[n + 1] = S[n] * a0 + A[n] * a1;
                A[n + 1] = A[n] * a0;
            }
            const double trk = S[N];
            wk.t(r, k) = trk;
            wk.t(k, r) = trk;
            const double weight = (r == k) ? 1.0 : 2.0;
            energy += weight * vgram(r, k) * trk;
            if (!grad) continue;
            // Suffix: B_j = prod_{m>j} P0_m, U_j = sum_{q>j} P1_q prod_{m>j, m!=q} P0_m.
            B[N - 1] = 1.0;
            U[N - 1] = 0.0;
            for (int n = N - 1; n > 0; --n) {
                const double a0 = wk.p0[n](r, k);
                const double a1 = wk.p1[n](r, k);
                U[n - 1] = U[n] * a0 + B[n] * a1;
                B[n - 1] = B[n] * a0;
            }
            const double vrk = vgram(r, k);
            for (int n = 0; n < N; ++n) {
                const double d0 = vrk * (S[n] * B[n] + A[n] * U[n]);
                const double d1 = vrk * (A[n] * B[n]);
                wk.w0[n](r, k) = d0;
                wk.w0[n](k, r) = d0;
                wk.w1[n](r, k) = d1;
                wk.w1[n](k, r) = d1;
            }
        }
    }
    if (!grad) return energy;

    // dE/dv_r = 2 sum_k T_rk v_k.
    const int M = model.output_dim();
    for (int r = 0; r < R; ++r) {
        for (int k = 0; k < R; ++k) {
            const double f = 2.0 * scale * wk.t(r, k);
            const auto vk = model.out_vector(k);
            for (int m = 0; m < M; ++m) grad->out[static_cast<std::size_t>(r) * M + m] += f * vk[m];
        }
    }
    // dE/dc_{n,r} = 2 sum_k (W0_n[r,k] G0 c_k + W1_n[r,k] G1 c_k).
    for (int n = 0; n < N; ++n) {
        const int K = model.space(n).num_basis;
        const BandedGram& g0 = plan.value_gram(box, n);
        const BandedGram& g1 = plan.deriv_gram(box, n);
        double* gblock = grad->coeffs.data() + model.dim_offset(n);
        for (int r = 0; r < R; ++r) {
            double* gr = gblock + r * K;
            for (int k = 0; k < R; ++k) {
                const double f0 = 2.0 * scale * wk.w0[n](r, k);
                const double f1 = 2.0 * scale * wk.w1[n](r, k);
                const double* h0 = wk.h0[n].data() + k * K;
                const double* h1 = wk.h1[n].data() + k * K;
                for (int i = g0.row_begin; i < g0.row_end; ++i) gr[i] += f0 * h0[i];
                for (int i = g1.row_begin; i < g1.row_end; ++i) gr[i] += f1 * h1[i];
            }
        }
    }
    return energy;
}

}  // namespace

double planned_energy(const TpbsModel& model, const LdePlan& plan, std::span<const std::size_t> boxes,
                      double scale, ParamGrad* grad) {
    require(plan.input_dim() == static_cast<std::size_t>(model.input_dim()), ErrorKind::Dimension,
            "energy plan dimension differs from the model's input dimension");
    std::vector<std::size_t> all;
    if (boxes.empty()) {
        all.resize(plan.num_boxes());
        for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
        boxes = all;
    }
    const Matrix vgram = output_gram(model);
    const std::size_t count = boxes.size();
    std::vector<double> per_box(count, 0.0);
    const std::size_t chunks = chunk_count(count);
    std::vector<ParamGrad> partial(grad ? chunks : 0);
    parallel_chunks(count, [&](std::size_t chunk, std::size_t begin, std::size_t end) {
        BoxWork wk(model.input_dim(), model.rank());
        ParamGrad* g = nullptr;
        if (grad) {
            partial[chunk] = model.zero_grad();
            g = &partial[chunk];
        }
        for (std::size_t i = begin; i < end; ++i) per_box[i] = box_energy(model, plan, boxes[i], vgram, wk, scale, g);
    });
    double total = 0.0;
    for (double e : per_box) total += e;
    if (grad)
        for (const auto& pg : partial) grad->axpy(1.0, pg);
    return scale * total;
}

double dirichlet_energy(const TpbsModel& model) {
    const LdePlan plan = LdePlan::global(model.spaces());
    return planned_energy(model, plan, {}, 1.0, nullptr);
}

ParamGrad grad_dirichlet_energy(const TpbsModel& model) {
    const LdePlan plan = LdePlan::global(model.spaces());
    ParamGrad g = model.zero_grad();
    planned_energy(model, plan, {}, 1.0, &g);
    return g;
}

double local_dirichlet_energy(const TpbsModel& model, const LdeConfig& cfg) {
    if (cfg.points.rows == 0) return 0.0;
    const LdePlan plan(model.spaces(), cfg);
    return planned_energy(model, plan, {}, 1.0, nullptr);
}

std::vector<double> local_dirichlet_energy_per_box(const TpbsModel& model, const LdeConfig& cfg) {
    std::vector<double> out;
    if (cfg.points.rows == 0) return out;
    const LdePlan plan(model.spaces(), cfg);
    out.reserve(plan.num_boxes());
    for (std::size_t m = 0; m < plan.num_boxes(); ++m) {
        const std::size_t one[1] = {m};
        out.push_back(planned_energy(model, plan, one, 1.0, nullptr));
    }
    return out;
}

ParamGrad grad_local_dirichlet_energy(const TpbsModel& model, const LdeConfig& cfg) {
    ParamGrad g = model.zero_grad();
    if (cfg.points.rows == 0) return g;
    const LdePlan plan(model.spaces(), cfg);
    planned_energy(model, plan, {}, 1.0, &g);
    return g;
}

double DeDecomposition::quadratic_value() const {
    if (any_degenerate) return std::numeric_limits<double>::quiet_NaN();
    const std::size_t R = s.size();
    double total = 0.0;
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < R; ++k) total += s[r] * z(r, k) * s[k];
    return total;
}

std::vector<double> DeDecomposition::z_eigenvalues() const {
    if (any_degenerate) return {};
    const std::size_t R = s.size();
    Eigen::MatrixXd zm(R, R);
    for (std::size_t r = 0; r < R; ++r)
        for (std::size_t k = 0; k < R; ++k) zm(r, k) = 0.5 * (z(r, k) + z(k, r));
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(zm, Eigen::EigenvaluesOnly);
    const auto& ev = solver.eigenvalues();
    return std::vector<double>(ev.data(), ev.data() + ev.size());
}

DeDecomposition de_decomposition(const TpbsModel& model, double tol_den) {
    const int N = model.input_dim();
    const int R = model.rank();
    const LdePlan plan = LdePlan::global(model.spaces());
    std::vector<Matrix> p0(N, Matrix(R, R)), p1(N, Matrix(R, R));
    std::vector<double> scratch;
    for (int n = 0; n < N; ++n) {
        contract(model, n, plan.value_gram(0, n), scratch, p0[n]);
        contract(model, n, plan.deriv_gram(0, n), scratch, p1[n]);
    }
    const Matrix vgram = output_gram(model);

    DeDecomposition d;
    d.s.assign(R, 0.0);
    d.a0 = Matrix(R, R);
    d.a1 = Matrix(R, R);
    d.z = Matrix(R, R);
    d.degenerate.assign(static_cast<std::size_t>(R) * R, 0);

    for (int r = 0; r < R; ++r) {
        double s = std::sqrt(vgram(r, r));
        for (int n = 0; n < N; ++n) s *= std::sqrt(std::max(0.0, p0[n](r, r)));
        if (!(s > 0.0)) {
            std::ostringstream msg;
            msg << "component " << r << " has a zero factor or output vector; "
                << "the s^T Z s decomposition is unavailable (the energy itself is still defined)";
            fail(ErrorKind::Degenerate, msg.str());
        }
        d.s[r] = s;
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    for (int r = 0; r < R; ++r) {
        for (int k = 0; k < R; ++k) {
            double a0 = vgram(r, k) / std::sqrt(vgram(r, r) * vgram(k, k));
            double a1 = 0.0;
            bool degenerate = false;
            for (int n = 0; n < N; ++n) {
                const double pk = p0[n](r, k);
                a0 *= pk / std::sqrt(p0[n](r, r) * p0[n](k, k));
                if (std::abs(pk) <= tol_den) {
                    degenerate = true;
                } else {
                    a1 += p1[n](r, k) / pk;
                }
            }
            d.a0(r, k) = a0;
            if (degenerate) {
                d.degenerate[static_cast<std::size_t>(r) * R + k] = 1;
                d.any_degenerate = true;
                d.a1(r, k) = nan;
                d.z(r, k) = nan;
            } else {
                d.a1(r, k) = a1;
                d.z(r, k) = a0 * a1;
            }
        }
    }
    return d;
}

}  // namespace tpbs
