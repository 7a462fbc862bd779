#pragma once

#include <string>

#include "dg/guidance.hpp"
#include "dg/mlp.hpp"

namespace dg {

// Checkpoint container: one JSON header line (architecture, schedule build
// parameters, seed, conditioning metadata), then one DTNS block per
// parameter tensor in declaration order. Parameters are stored f32, so a
// save/load round trip is bit-exact; the schedule is rebuilt from its
// build parameters rather than stored lossily.

void save_denoiser(const std::string& path, const MlpDenoiser& m);
MlpDenoiser load_denoiser(const std::string& path);

void save_classifier(const std::string& path, const GuidanceClassifier& clf);
GuidanceClassifier load_classifier(const std::string& path);

}  // namespace dg
