// gpsimp: command-line front end.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
// Thread count: GPSIMP_NUM_THREADS (default: OpenMP runtime default).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "gpsimp/gpsimp.hpp"
#include "run_report.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

gpsimp::RigidTransform read_init_json(const fs::path& path) {
  json j;
  try {
    j = json::parse(gpsimp::read_file_bytes(path));
  } catch (const json::exception& e) {
    throw gpsimp::Error(gpsimp::ErrorKind::MalformedRecord, "init transform: " + std::string(e.what()));
  }
  gpsimp::RigidTransform t;
  try {
    const auto& r = j.at("rotation");
    const auto& tr = j.at("translation");
    if (r.size() != 3 || tr.size() != 3) throw std::out_of_range("shape");
    for (int i = 0; i < 3; ++i) {
      if (r[i].size() != 3) throw std::out_of_range("shape");
      for (int c = 0; c < 3; ++c) t.rotation(i, c) = r[i][c].get<double>();
      t.translation[i] = tr[i].get<double>();
    }
  } catch (const std::exception&) {
    throw gpsimp::Error(gpsimp::ErrorKind::MalformedRecord,
                        "init transform needs \"rotation\" (3x3 rows) and \"translation\" (3 values)");
  }
  const Eigen::Matrix3d& rot = t.rotation;
  if ((rot.transpose() * rot - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() > 1e-6 || rot.determinant() < 0.0)
    throw gpsimp::Error(gpsimp::ErrorKind::InvalidArgument, "init rotation is not a proper rotation");
  return t;
}

json transform_json(const gpsimp::RigidTransform& t) {
  json rot = json::array();
  for (int i = 0; i < 3; ++i) rot.push_back({t.rotation(i, 0), t.rotation(i, 1), t.rotation(i, 2)});
  return {{"rotation", rot}, {"translation", {t.translation[0], t.translation[1], t.translation[2]}}};
}

std::string variation_csv(const gpsimp::VariationField& field) {
  std::string out = "index,sigma_n\n";
  out.reserve(field.values.size() * 24);
  for (std::size_t i = 0; i < field.values.size(); ++i) {
    out += std::to_string(i);
    out += ',';
    gpsimp::detail::append_double(out, field.values[i]);
    out += '\n';
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Feature-preserving point cloud simplification with Gaussian processes", "gpsimp"};
  app.require_subcommand(1);

  // simplify
  auto* simp = app.add_subcommand("simplify", "Select a feature-preserving subset of a cloud");
  std::string s_in, s_out, s_kernel = "manifold", s_report;
  std::optional<double> s_ratio;
  std::optional<std::size_t> s_count, s_subsample;
  std::size_t s_neighbors = 25, s_eigenpairs = 500;
  std::uint64_t s_seed = 0;
  bool s_no_timings = false, s_ascii = false;
  simp->add_option("--input", s_in, "Input cloud (.ply or .xyz)")->required();
  simp->add_option("--output", s_out, "Output cloud")->required();
  auto* ratio_opt = simp->add_option("--ratio", s_ratio, "Target size as a fraction of the input");
  auto* count_opt = simp->add_option("--count", s_count, "Target size in points");
  ratio_opt->excludes(count_opt);
  simp->add_option("--kernel", s_kernel, "Covariance family")
      ->check(CLI::IsMember({"euclidean", "manifold"}))
      ->capture_default_str();
  simp->add_option("--subsample", s_subsample, "Random working-set size");
  simp->add_option("--neighbors", s_neighbors, "Neighbours per surface-variation ball")->capture_default_str();
  simp->add_option("--eigenpairs", s_eigenpairs, "Laplacian eigenpairs (manifold kernel)")->capture_default_str();
  simp->add_option("--seed", s_seed, "Random seed")->capture_default_str();
  simp->add_option("--report", s_report, "Write a JSON run report");
  simp->add_flag("--no-timings", s_no_timings, "Leave wall-clock timings out of the report");
  simp->add_flag("--ascii", s_ascii, "Write ASCII PLY");

  // variation
  auto* var = app.add_subcommand("variation", "Per-point surface variation");
  std::string v_in, v_out;
  std::size_t v_neighbors = 25;
  var->add_option("--input", v_in)->required();
  var->add_option("--output", v_out, ".csv (index,sigma_n) or .ply with a sigma_n property")->required();
  var->add_option("--neighbors", v_neighbors)->capture_default_str();

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluation metrics");
  ev->require_subcommand(1);
  auto* ev_h = ev->add_subcommand("hausdorff", "Cloud-to-cloud Hausdorff distances");
  std::string h_a, h_b;
  bool h_json = false;
  ev_h->add_option("--a", h_a)->required();
  ev_h->add_option("--b", h_b)->required();
  ev_h->add_flag("--json", h_json);
  auto* ev_v = ev->add_subcommand("variation", "Mean surface variation of a cloud");
  std::string ev_in;
  bool ev_json = false;
  std::size_t ev_neighbors = 25;
  ev_v->add_option("--input", ev_in)->required();
  ev_v->add_option("--neighbors", ev_neighbors)->capture_default_str();
  ev_v->add_flag("--json", ev_json);

  // register
  auto* reg = app.add_subcommand("register", "Point-to-point ICP of source onto target");
  std::string r_src, r_tgt, r_init, r_out;
  std::size_t r_iter = 50;
  double r_tol = 1e-8;
  reg->add_option("--source", r_src)->required();
  reg->add_option("--target", r_tgt)->required();
  reg->add_option("--max-iter", r_iter)->capture_default_str();
  reg->add_option("--tol", r_tol)->capture_default_str();
  reg->add_option("--init-json", r_init, "{\"rotation\": [[..],[..],[..]], \"translation\": [..]}");
  reg->add_option("--output", r_out, "Write the registered source cloud");

  // synth
  auto* syn = app.add_subcommand("synth", "Generate a synthetic cloud");
  std::string y_shape, y_out;
  std::size_t y_n = 0;
  double y_noise = 0.0;
  std::uint64_t y_seed = 0;
  bool y_ascii = false;
  syn->add_option("--shape", y_shape)
      ->required()
      ->check(CLI::IsMember({"cube", "sphere", "spiked-plane"}));
  syn->add_option("--n", y_n)->required();
  syn->add_option("--noise", y_noise, "Noise std as a fraction of the bounding-box diagonal")->capture_default_str();
  syn->add_option("--seed", y_seed)->capture_default_str();
  syn->add_option("--output", y_out)->required();
  syn->add_flag("--ascii", y_ascii);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "gpsimp: " << e.what() << "\n";
    std::cerr << app.help();
    return 1;
  }

  gpsimp::configure_threads();

  try {
    if (*simp) {
      if (!s_ratio && !s_count) throw UsageError("simplify needs --ratio or --count");
      using clock = std::chrono::steady_clock;
      gpsimp::PointCloud cloud = gpsimp::read_cloud_file(s_in);

      gpsimp::NeighborhoodParams np;
      np.neighbor_count = s_neighbors;
      auto t0 = clock::now();
      gpsimp::VariationField field = gpsimp::surface_variation_field(cloud, np);
      const double t_var = std::chrono::duration<double>(clock::now() - t0).count();

      gpsimp::SimplifyConfig cfg;
      cfg.target_count = s_count;
      cfg.ratio = s_ratio;
      cfg.working_subsample = s_subsample;
      cfg.seed = s_seed;
      cfg.kernel.family =
          s_kernel == "euclidean" ? gpsimp::KernelFamily::EuclideanMatern : gpsimp::KernelFamily::ManifoldMatern;
      cfg.kernel.eigenpairs = s_eigenpairs;
      gpsimp::SimplifyResult res = gpsimp::simplify(cloud, field, cfg);

      gpsimp::write_cloud_file(s_out, res.cloud, gpsimp::format_for_path(s_out, s_ascii));
      if (!s_report.empty()) {
        gpsimp::RunReport rep{s_in, s_out, cfg, field.params, t_var, &res};
        gpsimp::write_file_atomic(s_report, rep.to_json(!s_no_timings).dump(2) + "\n");
      }
      std::cout << res.indices.size() << " of " << res.input_size << " points written to " << s_out << "\n";
    } else if (*var) {
      gpsimp::PointCloud cloud = gpsimp::read_cloud_file(v_in);
      gpsimp::NeighborhoodParams np;
      np.neighbor_count = v_neighbors;
      gpsimp::VariationField field = gpsimp::surface_variation_field(cloud, np);
      auto ext = fs::path(v_out).extension().string();
      if (ext == ".csv") {
        gpsimp::write_file_atomic(v_out, variation_csv(field));
      } else {
        gpsimp::write_cloud_file(v_out, cloud.with_attribute({"sigma_n", field.values}));
      }
    } else if (*ev) {
      if (*ev_h) {
        gpsimp::HausdorffReport h = gpsimp::hausdorff(gpsimp::read_cloud_file(h_a), gpsimp::read_cloud_file(h_b));
        if (h_json) {
          json j = {{"metric", "cloud-to-cloud"},       {"mean_a_to_b", h.mean_a_to_b},
                    {"max_a_to_b", h.max_a_to_b},       {"mean_b_to_a", h.mean_b_to_a},
                    {"max_b_to_a", h.max_b_to_a},       {"symmetric_mean", h.symmetric_mean},
                    {"symmetric_max", h.symmetric_max}};
          std::cout << j.dump(2) << "\n";
        } else {
          std::cout << "mean_a_to_b " << fmt_double(h.mean_a_to_b) << "\nmax_a_to_b " << fmt_double(h.max_a_to_b)
                    << "\nmean_b_to_a " << fmt_double(h.mean_b_to_a) << "\nmax_b_to_a " << fmt_double(h.max_b_to_a)
                    << "\nsymmetric_mean " << fmt_double(h.symmetric_mean) << "\nsymmetric_max "
                    << fmt_double(h.symmetric_max) << "\n";
        }
      } else {
        gpsimp::NeighborhoodParams np;
        np.neighbor_count = ev_neighbors;
        const double v = gpsimp::mean_surface_variation(gpsimp::read_cloud_file(ev_in), np);
        if (ev_json)
          std::cout << json{{"mean_surface_variation", v}}.dump(2) << "\n";
        else
          std::cout << fmt_double(v) << "\n";
      }
    } else if (*reg) {
      gpsimp::PointCloud src = gpsimp::read_cloud_file(r_src);
      gpsimp::PointCloud tgt = gpsimp::read_cloud_file(r_tgt);
      gpsimp::RigidTransform init = r_init.empty() ? gpsimp::RigidTransform{} : read_init_json(r_init);
      auto t0 = std::chrono::steady_clock::now();
      gpsimp::IcpResult icp = gpsimp::icp_point_to_point(src, tgt, init, r_iter, r_tol);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      json j = transform_json(icp.transform);
      j["inlier_rmse"] = icp.inlier_rmse;
      j["rmse"] = icp.rmse;
      j["iterations"] = icp.iterations;
      j["converged"] = icp.converged;
      j["degenerate"] = icp.degenerate;
      j["seconds"] = secs;
      if (!r_out.empty()) gpsimp::write_cloud_file(r_out, gpsimp::transform_cloud(src, icp.transform));
      std::cout << j.dump(2) << "\n";
      if (icp.degenerate) {
        std::cerr << "gpsimp: DegenerateCorrespondences: cross-covariance is rank deficient; returned the initial transform\n";
        return 3;
      }
    } else if (*syn) {
      gpsimp::PointCloud c = gpsimp::generate_synthetic(gpsimp::parse_shape(y_shape), y_n, y_noise, y_seed);
      gpsimp::write_cloud_file(y_out, c, gpsimp::format_for_path(y_out, y_ascii));
    }
  } catch (const UsageError& e) {
    std::cerr << "gpsimp: " << e.what() << "\n";
    return 1;
  } catch (const gpsimp::Error& e) {
    std::cerr << "gpsimp: " << gpsimp::to_string(e.kind()) << ": " << e.what() << "\n";
    return gpsimp::is_numerical(e.kind()) ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "gpsimp: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
