#include "aatk/phase_space.hpp"

#include <cmath>
#include <random>

namespace aatk {

namespace {

Vec fd_gradient(const std::function<double(const Vec&)>& f, const Vec& z) {
    const double h = 1e-5 * (1.0 + inf_norm(z));
    Vec g(z.size());
    Vec w = z;
    for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double zi = z[i];
        w[i] = zi + 2 * h;
        const double f2p = f(w);
        w[i] = zi + h;
        const double f1p = f(w);
        w[i] = zi - h;
        const double f1m = f(w);
        w[i] = zi - 2 * h;
        const double f2m = f(w);
        w[i] = zi;
        g[i] = (-f2p + 8 * f1p - 8 * f1m + f2m) / (12 * h);
    }
    return g;
}

}  // namespace

Vec field_gradient(const ScalarField& f, const Vec& z) {
    Vec g = f.gradient ? f.gradient(z) : fd_gradient(f.value, z);
    if (!all_finite(g))
        throw EvaluationError("non-finite gradient of '" + f.label + "'");
    return g;
}

double gradient_fd_residual(const ScalarField& f, const Vec& z) {
    const Vec ga = field_gradient(f, z);
    const Vec gf = fd_gradient(f.value, z);
    const double scale = 1.0 + std::max(inf_norm(ga), inf_norm(gf));
    return inf_norm(ga - gf) / scale;
}

// -- SymplecticModel ------------------------------------------------------------

SymplecticModel::SymplecticModel(int dim) : dim_(dim) {
    require(dim >= 2 && dim % 2 == 0, "symplectic model: dimension must be even and >= 2");
}

SymplecticModel::SymplecticModel(int dim, std::function<Mat(const Vec&)> omega_at)
    : dim_(dim), omega_at_(std::move(omega_at)) {
    require(dim >= 2 && dim % 2 == 0, "symplectic model: dimension must be even and >= 2");
}

Mat SymplecticModel::omega(const Vec& z) const {
    if (canonical()) {
        const int n2 = n();
        Mat w = Mat::Zero(dim_, dim_);
        for (int i = 0; i < n2; ++i) {
            w(i, n2 + i) = 1.0;
            w(n2 + i, i) = -1.0;
        }
        return w;
    }
    return omega_at_(z);
}

Mat SymplecticModel::poisson(const Vec& z) const {
    if (canonical()) return omega(z);  // P = omega^{-T} = omega here
    const Mat w = omega(z);
    Eigen::FullPivLU<Mat> lu(w.transpose());
    if (!lu.isInvertible())
        throw DegeneracyError("symplectic form singular at evaluation point");
    return lu.inverse();
}

Vec SymplecticModel::poisson_apply(const Vec& z, const Vec& w) const {
    if (canonical()) {
        const int n2 = n();
        Vec out(dim_);
        for (int i = 0; i < n2; ++i) {
            out[i] = w[n2 + i];
            out[n2 + i] = -w[i];
        }
        return out;
    }
    return poisson(z) * w;
}

double SymplecticModel::liouville_pairing(const Vec& z, const Vec& tangent) const {
    if (liouville_) return liouville_(z, tangent);
    if (!canonical())
        throw ChartFailureError(
            "action integrals need a Liouville primitive; supply one with "
            "set_liouville for non-canonical models");
    const int n2 = n();
    double s = 0.0;
    for (int i = 0; i < n2; ++i) s += z[n2 + i] * tangent[i];  // p . dq
    return s;
}

bool SymplecticModel::has_liouville() const { return canonical() || bool(liouville_); }

void SymplecticModel::set_liouville(std::function<double(const Vec&, const Vec&)> theta) {
    liouville_ = std::move(theta);
}

void SymplecticModel::validate_at(const Vec& z) const {
    const Mat w = omega(z);
    require(w.rows() == dim_ && w.cols() == dim_, "omega_at: wrong matrix size");
    if ((w + w.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw InvalidInputError("omega_at is not antisymmetric");
    Eigen::JacobiSVD<Mat> svd(w);
    if (svd.singularValues()(dim_ - 1) <= 1e-12)
        throw DegeneracyError("omega_at is degenerate");
}

double SymplecticModel::closedness_residual(const Vec& z, int triples, unsigned seed) const {
    if (canonical()) return 0.0;
    std::mt19937 rng(seed);
    std::uniform_int_distribution<int> pick(0, dim_ - 1);
    const double h = 1e-4 * (1.0 + inf_norm(z));
    auto domega = [&](int d, int i, int j) {
        Vec zp = z, zm = z;
        zp[d] += h;
        zm[d] -= h;
        return (omega(zp)(i, j) - omega(zm)(i, j)) / (2 * h);
    };
    double worst = 0.0;
    for (int t = 0; t < triples; ++t) {
        int i = pick(rng), j = pick(rng), l = pick(rng);
        if (i == j || j == l || i == l) { --t; continue; }
        const double r = domega(i, j, l) + domega(j, l, i) + domega(l, i, j);
        worst = std::max(worst, std::fabs(r));
    }
    return worst;
}

// -- HamiltonianSystem ------------------------------------------------------------

HamiltonianSystem::HamiltonianSystem(SymplecticModel model, IntegralSet integrals,
                                     std::optional<Box> region)
    : model_(std::move(model)), integrals_(std::move(integrals)), region_(std::move(region)) {
    require(integrals_.k() >= 1, "system: needs at least one integral");
    require(integrals_.k() <= model_.n(),
            "system: more integrals than degrees of freedom");
    for (const auto& f : integrals_.funcs)
        require(bool(f.value), "system: integral '" + f.label + "' has no evaluator");
    if (region_) {
        require(region_->lo.size() == dim() && region_->hi.size() == dim(),
                "system: region box dimension mismatch");
    }
}

void HamiltonianSystem::check_point(const Vec& z) const {
    if (z.size() != dim())
        throw InvalidInputError("phase point has dimension " + std::to_string(z.size()) +
                                ", system expects " + std::to_string(dim()));
    if (!all_finite(z)) throw InvalidInputError("phase point has non-finite entries");
}

Vec HamiltonianSystem::level(const Vec& z) const {
    check_point(z);
    Vec r(k());
    for (int i = 0; i < k(); ++i) r[i] = integrals_[i].value(z);
    if (!all_finite(r)) throw EvaluationError("integral evaluation returned non-finite value");
    return r;
}

Mat HamiltonianSystem::level_jacobian(const Vec& z) const {
    check_point(z);
    Mat J(k(), dim());
    for (int i = 0; i < k(); ++i) J.row(i) = field_gradient(integrals_[i], z).transpose();
    return J;
}

Vec HamiltonianSystem::hvf(int lam, const Vec& z) const {
    require(lam >= 0 && lam < k(), "hvf: integral index out of range");
    return model_.poisson_apply(z, field_gradient(integrals_[lam], z));
}

Vec HamiltonianSystem::hvf_combined(const Vec& w, const Vec& z) const {
    require(w.size() == k(), "hvf_combined: weight count mismatch");
    Vec g = Vec::Zero(dim());
    for (int i = 0; i < k(); ++i)
        if (w[i] != 0.0) g += w[i] * field_gradient(integrals_[i], z);
    return model_.poisson_apply(z, g);
}

Mat HamiltonianSystem::hvf_matrix(const Vec& z) const {
    Mat T(dim(), k());
    for (int i = 0; i < k(); ++i) T.col(i) = hvf(i, z);
    return T;
}

// -- operations ----------------------------------------------------------------

double poisson_bracket(const SymplecticModel& model, const ScalarField& f,
                       const ScalarField& g, const Vec& z) {
    if (z.size() != model.dim())
        throw InvalidInputError("poisson_bracket: point dimension mismatch");
    const Vec gf = field_gradient(f, z);
    const Vec gg = field_gradient(g, z);
    if (model.canonical()) {
        // term-by-term form keeps {f,g} == -{g,f} exact in floating point
        const int n = model.n();
        double acc = 0.0;
        for (int i = 0; i < n; ++i) acc += gf[i] * gg[n + i] - gf[n + i] * gg[i];
        return acc;
    }
    return gf.dot(model.poisson(z) * gg);
}

Vec hamiltonian_vector_field(const SymplecticModel& model, const ScalarField& F,
                             const Vec& z) {
    if (z.size() != model.dim())
        throw InvalidInputError("hamiltonian_vector_field: point dimension mismatch");
    return model.poisson_apply(z, field_gradient(F, z));
}

InvolutionReport check_involution(const SymplecticModel& model, const IntegralSet& S,
                                  const std::vector<Vec>& samples, double tol) {
    require(!samples.empty(), "check_involution: no sample points");
    const int k = S.k();
    InvolutionReport rep;
    rep.max_abs = Mat::Zero(k, k);
    rep.tol = tol;
    for (int i = 0; i < k; ++i)
        for (int j = i + 1; j < k; ++j) {
            double worst = 0.0;
            for (const Vec& z : samples)
                worst = std::max(worst, std::fabs(poisson_bracket(model, S[i], S[j], z)));
            rep.max_abs(i, j) = rep.max_abs(j, i) = worst;
            if (worst > rep.worst) {
                rep.worst = worst;
                rep.worst_i = i;
                rep.worst_j = j;
            }
        }
    rep.pass = rep.worst <= tol;
    return rep;
}

RegularityResult check_regularity(const IntegralSet& S, const Vec& z, double tol) {
    Mat J(S.k(), z.size());
    for (int i = 0; i < S.k(); ++i) J.row(i) = field_gradient(S[i], z).transpose();
    Eigen::JacobiSVD<Mat> svd(J);
    const Vec sv = svd.singularValues();
    RegularityResult res;
    res.sigma_max = sv.size() ? sv(0) : 0.0;
    res.sigma_min = sv.size() ? sv(sv.size() - 1) : 0.0;
    // the absolute floor keeps saddle points (whole gradient ~ 0 up to
    // rounding) at rank zero
    const double cut = tol * std::max(res.sigma_max, 1.0 + inf_norm(z));
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > cut) ++res.rank;
    return res;
}

HamiltonianSystem extend_time_dependent(const TimeDependentHamiltonian& H, int n) {
    require(bool(H.value), "extend_time_dependent: H has no evaluator");
    require(n >= 1, "extend_time_dependent: n must be positive");
    const int N = n + 1;             // extended degrees of freedom
    const int dim = 2 * N;
    auto split = [n, N](const Vec& ze, double& t, Vec& z2n) {
        t = ze[0];
        z2n.resize(2 * n);
        for (int i = 0; i < n; ++i) {
            z2n[i] = ze[1 + i];          // q_i
            z2n[n + i] = ze[N + 1 + i];  // p_i
        }
    };
    ScalarField F1;
    F1.label = "F1";
    F1.value = [H, split, N](const Vec& ze) {
        double t;
        Vec z2n;
        split(ze, t, z2n);
        return ze[N] + H.value(t, z2n);  // p_t + H(t,q,p)
    };
    F1.gradient = [H, split, n, N, dim](const Vec& ze) {
        double t;
        Vec z2n;
        split(ze, t, z2n);
        Vec gH;
        if (H.gradient) {
            gH = H.gradient(t, z2n);
        } else {
            gH.resize(2 * n + 1);
            const double h = 1e-5 * (1.0 + std::max(std::fabs(t), inf_norm(z2n)));
            auto fd = [&](auto&& eval) {
                return (-eval(2.0) + 8 * eval(1.0) - 8 * eval(-1.0) + eval(-2.0)) / (12 * h);
            };
            gH[0] = fd([&](double c) { return H.value(t + c * h, z2n); });
            for (int i = 0; i < 2 * n; ++i) {
                gH[1 + i] = fd([&](double c) {
                    Vec w = z2n;
                    w[i] += c * h;
                    return H.value(t, w);
                });
            }
        }
        Vec g = Vec::Zero(dim);
        g[0] = gH[0];                                     // d/dt
        for (int i = 0; i < n; ++i) g[1 + i] = gH[1 + i]; // d/dq_i
        g[N] = 1.0;                                       // d/dp_t
        for (int i = 0; i < n; ++i) g[N + 1 + i] = gH[1 + n + i];
        return g;
    };
    IntegralSet set;
    set.funcs.push_back(std::move(F1));
    return HamiltonianSystem(SymplecticModel(dim), std::move(set));
}

}  // namespace aatk
