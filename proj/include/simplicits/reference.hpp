#pragma once

#include "simplicits/mlp.hpp"
#include "simplicits/reduced_sim.hpp"

// Straightforward serial implementations kept as test and benchmark baselines
// for the chunked kernels. They build explicit per-point matrices instead of
// exploiting the block structure of the basis.
namespace simplicits::reference {

/// Point-by-point forward pass with scalar loops.
MatrixX forward(const SkinningField& net, std::span<const Vec3> X);

/// 3 x 12n block with x_i - X_i = B_i z, built directly from w_j and [X_i; 1].
MatrixX basis_block(const CubatureSet& cub, std::size_t i);

/// 9 x 12n block with vec(F_i) = vec(I) + J_i z (column-major vec).
MatrixX jacobian_block(const CubatureSet& cub, std::size_t i);

/// sum_i m_i B_i^T B_i with explicit blocks.
MatrixX mass_matrix(const CubatureSet& cub);

/// Objective, gradient and Hessian of the step objective using explicit B_i
/// and J_i. Same quantities as ReducedSim::assemble.
Assembly assemble(const ReducedSim& sim, const VectorX& z, const StepContext& ctx);

} // namespace simplicits::reference
