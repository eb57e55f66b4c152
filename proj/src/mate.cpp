#include "gridengine/mate.hpp"

#include <cmath>

namespace gridengine {

MateLinkSolution mate_link_solve(std::span<const TheveninEquivalent> equivalents, Complex z_link)
{
    if (equivalents.size() != 2) {
        throw Error(ErrorKind::InvalidValue,
                    "a MATE link couples exactly two equivalents, got " + std::to_string(equivalents.size()));
    }
    const auto& a = equivalents[0];
    const auto& b = equivalents[1];
    for (const auto* eq : {&a, &b}) {
        if (!(std::abs(eq->z_th) > 0.0)) {
            throw Error(ErrorKind::InvalidValue, "Thévenin impedance of \"" + eq->subsystem + "\" is zero");
        }
    }
    const Complex total = a.z_th + b.z_th + z_link;
    if (std::abs(total) < kMinLinkImpedance) {
        throw Error(ErrorKind::Singular, "total link impedance is below 1e-12 pu");
    }
    MateLinkSolution out;
    out.i_link = (a.e_open - b.e_open) / total;
    out.v_first = a.e_open - a.z_th * out.i_link;
    out.v_second = b.e_open + b.z_th * out.i_link;
    return out;
}

TheveninEquivalent thevenin_from_admittance(const ComplexSparse& y, std::span<const Complex> injections,
                                            int boundary, std::string subsystem)
{
    if (boundary < 0 || boundary >= y.rows()) {
        throw Error(ErrorKind::InvalidValue, "boundary index out of range");
    }
    const auto factors = ComplexFactorization::factorize(y);
    const auto v = factors.solve(injections);
    std::vector<Complex> unit(static_cast<std::size_t>(y.rows()), Complex{});
    unit[static_cast<std::size_t>(boundary)] = 1.0;
    const auto z = factors.solve(std::span<const Complex>(unit));
    return {std::move(subsystem), std::to_string(boundary), v[static_cast<std::size_t>(boundary)],
            z[static_cast<std::size_t>(boundary)]};
}

std::vector<Complex> mate_star_solve(const MultiPortEquivalent& hub, std::span<const TheveninEquivalent> leaves,
                                     std::span<const Complex> z_link)
{
    const auto n = static_cast<Eigen::Index>(leaves.size());
    if (hub.z.rows() != n || hub.z.cols() != n || static_cast<Eigen::Index>(hub.e_open.size()) != n ||
        static_cast<Eigen::Index>(z_link.size()) != n) {
        throw Error(ErrorKind::InvalidValue, "hub ports, leaves and link impedances must have the same count");
    }
    if (n == 0) {
        return {};
    }
    Eigen::MatrixXcd a = hub.z;
    Eigen::VectorXcd rhs(n);
    for (Eigen::Index k = 0; k < n; ++k) {
        a(k, k) += leaves[static_cast<std::size_t>(k)].z_th + z_link[static_cast<std::size_t>(k)];
        rhs[k] = hub.e_open[static_cast<std::size_t>(k)] - leaves[static_cast<std::size_t>(k)].e_open;
    }
    const Eigen::FullPivLU<Eigen::MatrixXcd> lu(a);
    if (!lu.isInvertible()) {
        throw Error(ErrorKind::Singular, "MATE link equations are singular");
    }
    const Eigen::VectorXcd i = lu.solve(rhs);
    for (Eigen::Index k = 0; k < n; ++k) {
        if (!detail::is_finite(i[k])) {
            throw Error(ErrorKind::Singular, "MATE link currents are not finite");
        }
    }
    return std::vector<Complex>(i.data(), i.data() + n);
}

}  // namespace gridengine
