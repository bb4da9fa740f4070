// Recovery instance directories:
//   instance.json      metadata (n, m, rank, p, seed, noise, operator)
//   m_star.txt         ground truth, matrix text format
//   y.txt, omega.txt   observations and noise, vector text format
//   measurements.txt   Gaussian sensing only: p x (n m), row i = vec(A_i)
//   weights.txt        weighted observation only
//   mask.txt           Bernoulli mask only (0/1 entries)

#pragma once

#include <string>

#include "lowrank/sampling.hpp"

namespace lowrank {

void save_instance(const RecoveryInstance& inst, const std::string& dir);
RecoveryInstance load_instance(const std::string& dir);

}  // namespace lowrank
