#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <fmt/ostream.h>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "json.hpp"

#include <krigmorph/krigmorph.hpp>

namespace krigmorph::cli {
namespace {

namespace fs = std::filesystem;

/// Bad flags or inputs detected before any work starts.
class UsageError : public Error {
public:
  using Error::Error;
};

struct SelectOptions {
  std::string surface;
  std::vector<std::string> meshes;
  std::string kernel = "gaussian";
  double theta = 0.0;
  std::optional<long long> max_nodes;
  std::optional<double> variance_tol;
  std::optional<std::string> fixed;
  long long chunk = static_cast<long long>(kDefaultChunk);
  std::string out;
};

struct ApplyOptions {
  std::string param;
  std::string disp;
  std::string mesh_id;
  std::string mesh;
  std::string out;
};

struct VarianceOptions {
  std::string param;
  std::string mesh;
  std::string out;
};

struct InfoOptions {
  std::string param;
};

void require_file(const std::string &path, const char *flag) {
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) {
    throw UsageError(std::string(flag) + ": no such file '" + path + "'");
  }
}

void require_writable(const std::string &path, const char *flag) {
  const fs::path p(path);
  const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) {
    throw UsageError(std::string(flag) + ": directory '" + dir.string() +
                     "' does not exist");
  }
  if (fs::is_directory(p, ec)) {
    throw UsageError(std::string(flag) + ": '" + path + "' is a directory");
  }
}

void require_mesh_extension(const std::string &path, const char *flag) {
  try {
    format_from_path(path);
  } catch (const ConfigError &e) {
    throw UsageError(std::string(flag) + ": " + e.what());
  }
}

Mesh load_mesh(const std::string &path) {
  try {
    return read_mesh(path);
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::optional<FixedGeometry> load_fixed(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open '" + path + "'");
  }
  try {
    return fixed_geometry_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception &e) {
    throw ParseError(path + ": " + e.what());
  } catch (const ConfigError &e) {
    throw ParseError(path + ": " + e.what());
  }
}

Parametrization load_param(const std::string &path) {
  try {
    return mprm::load(path);
  } catch (const ParseError &e) {
    throw ParseError(path + ": " + e.what());
  }
}

int cmd_select(const SelectOptions &opt, std::ostream &out,
               spdlog::logger &log) {
  if (!(opt.theta > 0.0)) {
    throw UsageError("theta must be positive");
  }
  if (!opt.max_nodes && !opt.variance_tol) {
    throw UsageError("at least one of --max-nodes or --variance-tol is required");
  }
  if (opt.max_nodes && *opt.max_nodes <= 0) {
    throw UsageError("max-nodes must be positive");
  }
  if (opt.variance_tol) {
    if (!(*opt.variance_tol >= 0.0)) {
      throw UsageError("variance-tol must be non-negative");
    }
    // kappa(0) = 1 bounds every posterior variance.
    if (*opt.variance_tol >= 1.0) {
      throw UsageError("variance-tol must be below kappa(0) = 1, otherwise no "
                       "node can be selected");
    }
  }
  if (opt.chunk <= 0) {
    throw UsageError("chunk must be positive");
  }
  require_file(opt.surface, "--surface");
  require_mesh_extension(opt.surface, "--surface");
  for (const auto &m : opt.meshes) {
    require_file(m, "--mesh");
    require_mesh_extension(m, "--mesh");
  }
  if (opt.fixed) {
    require_file(*opt.fixed, "--fixed");
  }
  require_writable(opt.out, "--out");

  std::vector<std::string> ids{fs::path(opt.surface).stem().string()};
  for (const auto &m : opt.meshes) {
    const auto id = fs::path(m).stem().string();
    if (std::find(ids.begin(), ids.end(), id) != ids.end()) {
      throw UsageError("duplicate mesh id '" + id + "' (from " + m + ")");
    }
    ids.push_back(id);
  }

  KernelSpec kernel(parse_kernel_family(opt.kernel), opt.theta,
                    opt.fixed ? load_fixed(*opt.fixed) : std::nullopt);
  const Mesh surface = load_mesh(opt.surface);
  log.info("surface '{}': {} candidate points", surface.id,
           surface.point_count());

  StopCriteria stop;
  if (opt.max_nodes) {
    stop.max_nodes = static_cast<std::size_t>(*opt.max_nodes);
  }
  stop.variance_tol = opt.variance_tol;

  Parametrization param = build_parametrization(kernel, surface.points, stop);
  log.info("selected {} nodes, jitter {}", param.node_count(),
           param.chol.jitter);

  const auto chunk = static_cast<std::size_t>(opt.chunk);
  param.add_mesh(surface.id, surface.points, chunk);
  for (const auto &path : opt.meshes) {
    const Mesh mesh = load_mesh(path);
    log.info("mesh '{}': {} points", mesh.id, mesh.point_count());
    param.add_mesh(mesh.id, mesh.points, chunk);
  }
  mprm::save(param, opt.out);

  fmt::print(out, "{:>5} {:>8} {:>24} {:>24} {:>24} {:>24}\n", "step",
             "index", "x", "y", "z", "variance");
  for (std::size_t s = 0; s < param.selection_trace.size(); ++s) {
    const auto &step = param.selection_trace[s];
    const auto &x = param.nodes[s];
    fmt::print(out, "{:>5} {:>8} {:>24.17g} {:>24.17g} {:>24.17g} {:>24.17g}\n",
               s + 1, step.index, x.x(), x.y(), x.z(), step.variance);
  }
  fmt::print(out, "nodes: {}\n", param.node_count());
  fmt::print(out, "final max residual variance: {:.17g}\n",
             param.final_max_variance);
  fmt::print(out, "wrote {}\n", opt.out);
  return kExitOk;
}

int cmd_apply(const ApplyOptions &opt, std::ostream &out,
              spdlog::logger &log) {
  require_file(opt.param, "--param");
  require_file(opt.disp, "--disp");
  require_file(opt.mesh, "--mesh");
  require_mesh_extension(opt.mesh, "--mesh");
  require_writable(opt.out, "--out");

  const Parametrization param = load_param(opt.param);
  const MeshWeights *block = param.find_mesh(opt.mesh_id);
  if (block == nullptr) {
    std::string known;
    for (const auto &m : param.meshes) {
      known += (known.empty() ? "" : ", ") + m.id;
    }
    throw UsageError("unknown mesh-id '" + opt.mesh_id + "' (available: " +
                     known + ")");
  }
  DisplacementVector d = [&] {
    try {
      return read_displacements_csv(opt.disp);
    } catch (const ParseError &e) {
      throw ParseError(opt.disp + ": " + e.what());
    }
  }();
  if (d.rows() != static_cast<Eigen::Index>(param.node_count())) {
    throw UsageError("displacement file has " + std::to_string(d.rows()) +
                     " rows but the parametrization has " +
                     std::to_string(param.node_count()) + " nodes");
  }
  const Mesh mesh = load_mesh(opt.mesh);
  if (static_cast<Eigen::Index>(mesh.point_count()) != block->point_count()) {
    throw UsageError("mesh '" + opt.mesh + "' has " +
                     std::to_string(mesh.point_count()) +
                     " points but weight block '" + block->id + "' expects " +
                     std::to_string(block->point_count()));
  }
  const Mesh moved = displace_points(mesh, apply_weights(block->weights, d));
  write_mesh(moved, opt.out, format_from_path(opt.mesh),
             [&](std::string_view w) { log.warn("{}", w); });
  fmt::print(out, "morphed {} points of '{}' -> {}\n", moved.point_count(),
             block->id, opt.out);
  return kExitOk;
}

int cmd_variance(const VarianceOptions &opt, std::ostream &out,
                 spdlog::logger &) {
  require_file(opt.param, "--param");
  require_file(opt.mesh, "--mesh");
  require_mesh_extension(opt.mesh, "--mesh");
  require_writable(opt.out, "--out");
  if (fs::path(opt.out).extension() != ".vtk") {
    throw UsageError("--out: variance output needs a .vtk file to carry the "
                     "scalar field");
  }
  const Parametrization param = load_param(opt.param);
  Mesh mesh = load_mesh(opt.mesh);
  const Vector var = param.variance(mesh.points);
  mesh.set_field("variance", std::vector<double>(var.data(),
                                                 var.data() + var.size()));
  write_mesh(mesh, opt.out, MeshFormat::vtk_legacy_ascii);
  fmt::print(out, "variance: min {:.6g} max {:.6g} over {} points -> {}\n",
             var.minCoeff(), var.maxCoeff(), mesh.point_count(), opt.out);
  return kExitOk;
}

int cmd_info(const InfoOptions &opt, std::ostream &out, spdlog::logger &) {
  require_file(opt.param, "--param");
  const Parametrization param = load_param(opt.param);
  fmt::print(out, "kernel: {}\n", to_string(param.kernel.family()));
  fmt::print(out, "theta: {}\n", param.kernel.theta());
  if (param.kernel.fixed()) {
    fmt::print(out, "fixed: {} primitives\n",
               param.kernel.fixed()->primitives().size());
  } else {
    fmt::print(out, "fixed: none\n");
  }
  fmt::print(out, "nodes: {}\n", param.node_count());
  fmt::print(out, "jitter: {}\n", param.chol.jitter);
  if (!param.selection_trace.empty()) {
    fmt::print(out, "final selection variance: {:.17g}\n",
               param.selection_trace.back().variance);
  }
  fmt::print(out, "final max residual variance: {:.17g}\n",
             param.final_max_variance);
  std::size_t bytes = 0;
  for (const auto &m : param.meshes) {
    fmt::print(out, "mesh {}: {} points\n", m.id, m.point_count());
    bytes += static_cast<std::size_t>(m.weights.size()) * 8;
  }
  fmt::print(out, "weight payload bytes: {}\n", bytes);
  return kExitOk;
}

std::shared_ptr<spdlog::logger> make_logger(std::ostream &err,
                                            const std::string &level) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
  auto log = std::make_shared<spdlog::logger>("krigmorph", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::from_str(level));
  return log;
}

} // namespace

int run(int argc, const char *const *argv, std::ostream &out,
        std::ostream &err) {
  CLI::App app{"Kriging-based mesh morphing parametrization"};
  app.require_subcommand(1);
  app.fallthrough();

  std::string log_level = "warn";
  app.add_option("--log-level", log_level, "Log verbosity")
      ->check(CLI::IsMember({"error", "warn", "info", "debug"}));

  SelectOptions sel;
  auto *select = app.add_subcommand(
      "select", "Select morphing nodes and precompute weight matrices");
  select->add_option("--surface", sel.surface, "Surface mesh (candidates)")
      ->required();
  select->add_option("--mesh", sel.meshes,
                     "Additional mesh to morph (repeatable)");
  select->add_option("--kernel", sel.kernel, "Covariance family")
      ->check(CLI::IsMember({"gaussian", "matern32", "matern52"}));
  select->add_option("--theta", sel.theta, "Influence radius")->required();
  select->add_option("--max-nodes", sel.max_nodes, "Node budget");
  select->add_option("--variance-tol", sel.variance_tol,
                     "Stop when the largest variance falls below this");
  select->add_option("--fixed", sel.fixed, "Fixed geometry JSON");
  select->add_option("--chunk", sel.chunk, "Weight assembly block size");
  select->add_option("--out", sel.out, "Parametrization file")->required();

  ApplyOptions app_opt;
  auto *apply = app.add_subcommand("apply", "Morph a mesh with node displacements");
  apply->add_option("--param", app_opt.param, "Parametrization file")->required();
  apply->add_option("--disp", app_opt.disp, "Node displacements CSV")->required();
  apply->add_option("--mesh-id", app_opt.mesh_id, "Weight block id")->required();
  apply->add_option("--mesh", app_opt.mesh, "Mesh to morph")->required();
  apply->add_option("--out", app_opt.out, "Morphed mesh")->required();

  VarianceOptions var;
  auto *variance = app.add_subcommand(
      "variance", "Write the posterior variance field of a mesh");
  variance->add_option("--param", var.param, "Parametrization file")->required();
  variance->add_option("--mesh", var.mesh, "Mesh to evaluate")->required();
  variance->add_option("--out", var.out, "VTK output")->required();

  InfoOptions info_opt;
  auto *info = app.add_subcommand("info", "Summarize a parametrization file");
  info->add_option("--param", info_opt.param, "Parametrization file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success &e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError &e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  auto log = make_logger(err, log_level);
  try {
    if (*select) {
      return cmd_select(sel, out, *log);
    }
    if (*apply) {
      return cmd_apply(app_opt, out, *log);
    }
    if (*variance) {
      return cmd_variance(var, out, *log);
    }
    return cmd_info(info_opt, out, *log);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError &e) {
    err << "parse error: " << e.what() << '\n';
    return kExitParse;
  } catch (const NumericalError &e) {
    err << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const Error &e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
}

} // namespace krigmorph::cli
