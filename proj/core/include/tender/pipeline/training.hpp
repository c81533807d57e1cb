#pragma once

#include <vector>

#include "tender/nn/model.hpp"
#include "tender/nn/train.hpp"
#include "tender/pipeline/config.hpp"
#include "tender/pipeline/report.hpp"

namespace tender::pipeline {

struct TrainingOutcome {
  nn::Model model;
  nn::TrainResult result;
  std::vector<RunResult> runs;  // one per checkpoint, or the final epoch when there are none
};

// Trains `arch` on generate_classifier_samples(train.samples) with a seeded
// stratified split. Checkpoint weights go to <train.out_dir>/<arch>-e<N>.tndr
// and each run's metrics.json/history.csv to <train.out_dir>/<arch>-e<N>/.
TrainingOutcome train_on_synthetic(const PipelineConfig& config, nn::Arch arch,
                                   const nn::EpochCallback& on_epoch = {});

}  // namespace tender::pipeline
