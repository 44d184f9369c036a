#pragma once

#include <string>

#include "agos/config.hpp"
#include "agos/dataio.hpp"

namespace agos {

// Each kind trains the relevant model variants on the given dataset and
// writes <out_dir>/<kind>.csv with one row per variant: identifier, OA mean
// and population std over cfg.runs seeded runs, wall-clock seconds.
// Covariance additionally writes one CxC matrix CSV per fusion variant.
enum class ExperimentKind {
  Ablate,
  SweepGrains,
  SweepAlpha,
  DdcVariants,
  FusionCompare,
  Covariance,
};

ExperimentKind experiment_kind_from_name(const std::string& name);
std::string experiment_name(ExperimentKind kind);

Csv run_experiment(ExperimentKind kind, const DatasetManifest& full, const TrainConfig& cfg,
                   const std::string& out_dir);

}  // namespace agos
