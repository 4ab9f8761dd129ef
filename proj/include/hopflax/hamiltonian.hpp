#ifndef HOPFLAX_HAMILTONIAN_HPP
#define HOPFLAX_HAMILTONIAN_HPP

#include <functional>

#include "hopflax/core.hpp"

namespace hopflax {

// Evaluation functors shared by every call site (public evaluation and the
// solvers' inlined hot loops), so all paths produce identical bits.

struct IsotropicConjugate {
    double gamma; // H(p) = |p|^2 / (2*gamma)  =>  H*(q) = gamma*|q|^2 / 2
    double operator()(double qx, double qy) const { return 0.5 * gamma * (qx * qx + qy * qy); }
};

struct AnisotropicConjugate {
    double m11, m12, m22; // H*(q) = q^T M_inv q / 2, M_inv SPD
    double operator()(double qx, double qy) const {
        return 0.5 * (m11 * qx * qx + 2.0 * m12 * qx * qy + m22 * qy * qy);
    }
};

struct CustomConjugate {
    const std::function<double(Vec2)>* fn;
    double operator()(double qx, double qy) const { return (*fn)(Vec2{qx, qy}); }
};

/// Legendre conjugate H* used by every scheme. The built-in family is
/// quadratic (all the convergence tests use H(p) = |p|^2/2, which is its own
/// conjugate); arbitrary strictly convex, strongly coercive conjugates can be
/// registered via the custom constructor. Boundedness of the second and third
/// derivatives of H* is the caller's obligation, not checked at runtime.
class ConjugateHamiltonian {
public:
    enum class Kind { quadratic_isotropic, quadratic_anisotropic, custom };

    static ConjugateHamiltonian quadratic(double gamma = 1.0) {
        if (!(gamma > 0.0)) throw Error("ConjugateHamiltonian: gamma must be positive");
        ConjugateHamiltonian h;
        h.kind_ = Kind::quadratic_isotropic;
        h.gamma_ = gamma;
        return h;
    }

    static ConjugateHamiltonian anisotropic(double m11, double m12, double m22) {
        if (!(m11 > 0.0) || !(m11 * m22 - m12 * m12 > 0.0))
            throw Error("ConjugateHamiltonian: M_inv must be symmetric positive definite");
        ConjugateHamiltonian h;
        h.kind_ = Kind::quadratic_anisotropic;
        h.m11_ = m11;
        h.m12_ = m12;
        h.m22_ = m22;
        return h;
    }

    static ConjugateHamiltonian custom(std::function<double(Vec2)> fn) {
        ConjugateHamiltonian h;
        h.kind_ = Kind::custom;
        h.custom_ = std::move(fn);
        return h;
    }

    Kind kind() const { return kind_; }
    double gamma() const { return gamma_; }

    /// Calls fn with the concrete evaluation functor, letting hot loops
    /// inline the quadratic cases.
    template <class Fn>
    decltype(auto) dispatch(Fn&& fn) const {
        switch (kind_) {
        case Kind::quadratic_isotropic:
            return fn(IsotropicConjugate{gamma_});
        case Kind::quadratic_anisotropic:
            return fn(AnisotropicConjugate{m11_, m12_, m22_});
        default:
            return fn(CustomConjugate{&custom_});
        }
    }

private:
    Kind kind_ = Kind::quadratic_isotropic;
    double gamma_ = 1.0;
    double m11_ = 1.0, m12_ = 0.0, m22_ = 1.0;
    std::function<double(Vec2)> custom_;
};

inline double eval_conjugate(const ConjugateHamiltonian& h, Vec2 q) {
    return h.dispatch([&](auto conj) { return conj(q.x, q.y); });
}

} // namespace hopflax

#endif
