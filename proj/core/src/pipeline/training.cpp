#include "tender/pipeline/training.hpp"

#include "tender/pipeline/synthetic.hpp"

namespace tender::pipeline {

TrainingOutcome train_on_synthetic(const PipelineConfig& config, nn::Arch arch, const nn::EpochCallback& on_epoch) {
  const std::size_t size = config.model.input_size;
  const auto samples = generate_classifier_samples(config.train_data.samples, size, config.train.seed);
  const auto all = nn::make_dataset(samples.images, samples.labels, size);
  const auto split = nn::stratified_split(all, config.train_data.test_fraction, config.train.seed);

  nn::Model model(nn::build_model(arch, size, config.model.preset));
  nn::TrainConfig tc = config.train;
  tc.checkpoint_dir = config.train_data.out_dir;
  auto result = nn::train_model(model, split.train, split.test, tc, on_epoch);

  std::vector<RunResult> runs;
  const std::string name(nn::to_string(arch));
  auto history_until = [&](int epoch) {
    std::vector<nn::HistoryRow> rows;
    for (const auto& h : result.history) {
      if (h.epoch <= epoch) rows.push_back(h);
    }
    return rows;
  };
  for (const auto& cp : result.checkpoints) runs.push_back({arch, cp.epoch, cp.test_metrics, history_until(cp.epoch)});
  if (runs.empty()) {
    runs.push_back({arch, tc.epochs, nn::evaluate_model(model, split.test), result.history});
  }
  for (const auto& r : runs) write_run(r, config.train_data.out_dir / (name + "-e" + std::to_string(r.epochs)));
  return {std::move(model), std::move(result), std::move(runs)};
}

}  // namespace tender::pipeline
