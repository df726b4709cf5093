#pragma once

#include <string>

#include "mgnet/data_io.hpp"
#include "mgnet/model.hpp"

namespace mgnet {

// A trained run: projection factor, graph and parameters. Everything needed
// to reproduce forward passes bit-for-bit on the same cohort.
struct ModelCheckpoint {
  Matrix u1;     // empty when the run skipped the projection (no-U1 ablation)
  Matrix a_hat;
  ModelParams params;
  std::string config_echo;  // one-line JSON
};

Checkpoint pack_model(const ModelCheckpoint &mc);
ModelCheckpoint unpack_model(const Checkpoint &c);

}  // namespace mgnet
