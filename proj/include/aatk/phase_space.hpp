#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "aatk/types.hpp"

namespace aatk {

/// A smooth function on phase space with an optional analytic gradient.
/// When `gradient` is empty, 4th-order central differences with step
/// h = 1e-5 * (1 + |z|) are used instead.
struct ScalarField {
    std::string label;
    std::function<double(const Vec&)> value;
    std::function<Vec(const Vec&)> gradient;
};

/// Evaluate the gradient of a field (analytic if present, else finite
/// differences). Throws EvaluationError on non-finite results.
Vec field_gradient(const ScalarField& f, const Vec& z);

/// Max relative deviation between the field's gradient and a fresh
/// finite-difference estimate at z. Used to validate supplied gradients.
double gradient_fd_residual(const ScalarField& f, const Vec& z);

/// The symplectic structure. The default is the constant canonical matrix
/// [[0, I], [-I, 0]] in (q_1..q_n, p_1..p_n) ordering; a position-dependent
/// omega_at(z) may be supplied instead.
class SymplecticModel {
public:
    explicit SymplecticModel(int dim);
    SymplecticModel(int dim, std::function<Mat(const Vec&)> omega_at);

    int dim() const { return dim_; }
    int n() const { return dim_ / 2; }
    bool canonical() const { return !omega_at_; }

    Mat omega(const Vec& z) const;
    /// Poisson tensor P with {f,g} = grad(f)^T P grad(g); the canonical
    /// bracket {q1,p1} = +1 fixes P = omega^{-T}.
    Mat poisson(const Vec& z) const;
    /// P(z) * w without forming P in the canonical case.
    Vec poisson_apply(const Vec& z, const Vec& w) const;

    /// Pairing of the Liouville primitive (d theta = omega) with a tangent
    /// vector; defaults to p . dq for the canonical model. Empty for custom
    /// models unless set_liouville is called; action integrals require it.
    double liouville_pairing(const Vec& z, const Vec& tangent) const;
    bool has_liouville() const;
    void set_liouville(std::function<double(const Vec&, const Vec&)> theta);

    /// Check antisymmetry (1e-12) and nondegeneracy at z.
    void validate_at(const Vec& z) const;
    /// Finite-difference exterior-derivative residual max over coordinate
    /// triples sampled with the given seed (exact 0 for constant models).
    double closedness_residual(const Vec& z, int triples, unsigned seed) const;

private:
    int dim_;
    std::function<Mat(const Vec&)> omega_at_;
    std::function<double(const Vec&, const Vec&)> liouville_;
};

struct IntegralSet {
    std::vector<ScalarField> funcs;

    int k() const { return static_cast<int>(funcs.size()); }
    const ScalarField& operator[](int i) const { return funcs[i]; }
};

/// Coordinate box used as a region hint.
struct Box {
    Vec lo, hi;
    bool contains(const Vec& z) const {
        for (Eigen::Index i = 0; i < z.size(); ++i)
            if (z[i] < lo[i] || z[i] > hi[i]) return false;
        return true;
    }
};

/// The system under analysis: a symplectic model plus k <= n integrals
/// in involution. Immutable after construction; all methods are pure.
class HamiltonianSystem {
public:
    HamiltonianSystem(SymplecticModel model, IntegralSet integrals,
                      std::optional<Box> region = std::nullopt);

    int dim() const { return model_.dim(); }
    int n() const { return model_.n(); }
    int k() const { return integrals_.k(); }
    const SymplecticModel& model() const { return model_; }
    const IntegralSet& integrals() const { return integrals_; }
    const std::optional<Box>& region() const { return region_; }

    /// The level map pi(z) = (F_1(z), ..., F_k(z)).
    Vec level(const Vec& z) const;
    /// k x 2n Jacobian of the level map (rows are gradients).
    Mat level_jacobian(const Vec& z) const;
    /// Hamiltonian vector field of integral lam at z.
    Vec hvf(int lam, const Vec& z) const;
    /// P(z) * sum_lam w_lam grad F_lam -- the field of the combination.
    Vec hvf_combined(const Vec& w, const Vec& z) const;
    /// 2n x k matrix whose columns are hvf(0..k-1, z).
    Mat hvf_matrix(const Vec& z) const;

    void check_point(const Vec& z) const;

private:
    SymplecticModel model_;
    IntegralSet integrals_;
    std::optional<Box> region_;
};

// -- operations ----------------------------------------------------------------

/// {f,g}(z). Antisymmetric in (f,g) with identical arithmetic for the
/// canonical model.
double poisson_bracket(const SymplecticModel& model, const ScalarField& f,
                       const ScalarField& g, const Vec& z);

/// The unique field with omega * theta = -grad F. Residual below 1e-10
/// by construction; throws DegeneracyError if omega(z) is singular.
Vec hamiltonian_vector_field(const SymplecticModel& model, const ScalarField& F,
                             const Vec& z);

struct InvolutionReport {
    Mat max_abs;       // k x k, entry (i,j) = max |{F_i,F_j}| over samples
    double worst = 0;
    int worst_i = -1, worst_j = -1;
    double tol = 0;
    bool pass = true;
};

InvolutionReport check_involution(const SymplecticModel& model, const IntegralSet& S,
                                  const std::vector<Vec>& samples, double tol);

struct RegularityResult {
    int rank = 0;
    double sigma_min = 0;
    double sigma_max = 0;
};

/// Numerical rank of the level-map Jacobian at z; singular values below
/// tol * sigma_max count as zero.
RegularityResult check_regularity(const IntegralSet& S, const Vec& z,
                                  double tol = 1e-8);

/// A time-dependent Hamiltonian H(t, q, p) on n degrees of freedom.
/// `gradient`, when given, returns the 2n+1 partials ordered
/// (dH/dt, dH/dq_1.., dH/dp_1..); otherwise finite differences are used.
struct TimeDependentHamiltonian {
    std::function<double(double, const Vec&)> value;
    std::function<Vec(double, const Vec&)> gradient;
};

/// Autonomous extension on 2(n+1) dimensions with coordinates
/// (q0 = t, q1..qn, p0 = p_t, p1..pn) and the single integral
/// F1 = p0 + H(q0, q, p). Its flow reproduces the non-autonomous
/// dynamics at unit time rate; the t-direction is never compact.
HamiltonianSystem extend_time_dependent(const TimeDependentHamiltonian& H, int n);

}  // namespace aatk
