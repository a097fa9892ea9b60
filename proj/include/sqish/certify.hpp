// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference certification of the activation kernels and of whole
// networks.

#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "sqish/gradcheck.hpp"
#include "sqish/loss.hpp"
#include "sqish/network.hpp"

namespace sqish {

/**
 * One report per analytic derivative: the input gradient of every kind plus
 * the parameter gradients of PReLU, Swish and Sqish. x ~ U[-10, 10); Sqish
 * parameters are redrawn per point from a in [-0.5, 0.9], beta and gamma in
 * [0.1, 10]. Points within 1e-3 of a kink are redrawn.
 */
std::vector<GradCheckReport> certify_activations(std::size_t points, std::uint64_t seed, GradTolerance tol = {});

/// Same checks for the vectorized kernels (double precision) against the
/// scalar reference, reported as "<kind>.array".
std::vector<GradCheckReport> certify_array_kernels(std::size_t points, std::uint64_t seed);

/**
 * Compares every analytic parameter gradient of `net` (including activation
 * parameters) for softmax cross-entropy on (x, labels) against central
 * differences of the loss. The network is restored before returning.
 */
GradCheckReport check_network_gradients(Network<double>& net, const Tensor<double>& x, std::span<const int> labels,
                                        GradTolerance tol = {1e-5, 1e-8, 1e-4});

/// dL/dx from the network against central differences on every input element.
GradCheckReport check_input_gradient(const Network<double>& net, const Tensor<double>& x, std::span<const int> labels,
                                     GradTolerance tol = {1e-5, 1e-8, 1e-4});

}  // namespace sqish
