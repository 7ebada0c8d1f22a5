#pragma once

// JSON run report for a simplification job.

#include <string>

#include <json.hpp>

#include "gpsimp/simplify.hpp"

namespace gpsimp {

inline constexpr int kReportSchemaVersion = 1;

struct RunReport {
  std::string input_path;
  std::string output_path;
  SimplifyConfig config;
  NeighborhoodParams neighborhood;  // radius resolved
  double variation_seconds = 0.0;
  const SimplifyResult* result = nullptr;

  nlohmann::json to_json(bool include_timings = true) const {
    using nlohmann::json;
    const SimplifyResult& r = *result;
    json cfg = {
        {"input", input_path},
        {"output", output_path},
        {"count", config.target_count ? json(*config.target_count) : json(nullptr)},
        {"ratio", config.ratio ? json(*config.ratio) : json(nullptr)},
        {"kernel", to_string(config.kernel.family)},
        {"neighbors", neighborhood.neighbor_count},
        {"radius", neighborhood.radius.value_or(0.0)},
        {"eigenpairs", config.kernel.eigenpairs},
        {"graph_neighbors", config.kernel.graph_neighbors},
        {"opt_count", config.opt_count},
        {"rounds", config.rounds},
        {"seed", config.seed},
        {"subsample", config.working_subsample ? json(*config.working_subsample) : json(nullptr)},
    };
    const HyperparameterFit& f = r.fit;
    json out = {
        {"schema_version", kReportSchemaVersion},
        {"config", cfg},
        {"seed", config.seed},
        {"input_size", r.input_size},
        {"working_size", r.working_size},
        {"output_size", r.indices.size()},
        {"ratio", static_cast<double>(r.indices.size()) / static_cast<double>(r.input_size)},
        {"init_count", r.init_count},
        {"batch_size", r.batch_size},
        {"iterations", r.iterations},
        {"hyperparameters",
         {{"variance", f.spec.variance},
          {"lengthscale", f.spec.lengthscale},
          {"smoothness", f.spec.smoothness},
          {"noise", f.noise},
          {"log_likelihood", f.log_likelihood},
          {"initial_log_likelihood", f.initial_log_likelihood},
          {"evaluations", f.evaluations}}},
        {"lml_trace", f.trace},
        {"metric_note", "distances in eval output are cloud-to-cloud, not mesh-to-mesh"},
    };
    if (include_timings) {
      out["timings"] = {{"variation", variation_seconds},
                        {"basis", r.timings.basis},
                        {"optimization", r.timings.optimization},
                        {"selection", r.timings.selection}};
    }
    return out;
  }
};

}  // namespace gpsimp
