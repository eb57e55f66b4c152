#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "gridengine/linear.hpp"

namespace gridengine {

inline constexpr double kMinLinkImpedance = 1e-12;

/// Single-port Thévenin equivalent of a subsystem seen from its boundary bus.
struct TheveninEquivalent {
    std::string subsystem;
    std::string boundary_bus;
    Complex e_open;  // boundary voltage with zero link current, pu
    Complex z_th;    // pu
};

struct MateLinkSolution {
    /// Current flowing from the first subsystem through the link into the second.
    Complex i_link;
    /// Boundary voltages, in the order of the equivalents.
    Complex v_first;
    Complex v_second;
};

/// i_link = (e₁ − e₂)/(z₁ + z₂ + z_link), v₁ = e₁ − z₁·i_link,
/// v₂ = e₂ + z₂·i_link. Needs exactly two equivalents with |z_th| > 0;
/// throws Singular when |z₁ + z₂ + z_link| < kMinLinkImpedance.
MateLinkSolution mate_link_solve(std::span<const TheveninEquivalent> equivalents, Complex z_link);

/// Thévenin equivalent of a linear network Y·v = i at one bus: e_open from
/// the given injections, z_th from a unit-current solve.
TheveninEquivalent thevenin_from_admittance(const ComplexSparse& y, std::span<const Complex> injections,
                                            int boundary, std::string subsystem = {});

/// Multi-port equivalent of a hub subsystem with several ports.
struct MultiPortEquivalent {
    std::vector<Complex> e_open;
    Eigen::MatrixXcd z;  // port impedance matrix
};

/// Star coupling: leaf k is linked to hub port k through z_link[k]. Returns
/// the link currents (hub → leaf). Solves
/// (Z_hub + diag(z_leaf + z_link))·i = e_hub − e_leaf.
std::vector<Complex> mate_star_solve(const MultiPortEquivalent& hub, std::span<const TheveninEquivalent> leaves,
                                     std::span<const Complex> z_link);

}  // namespace gridengine
