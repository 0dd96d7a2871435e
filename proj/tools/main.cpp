#include <cstdio>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "rebama/config.hpp"
#include "rebama/error.hpp"
#include "rebama/eval.hpp"
#include "rebama/game.hpp"
#include "rebama/neural.hpp"
#include "rebama/projection.hpp"
#include "rebama/run.hpp"
#include "rebama/trainer.hpp"

namespace {

using namespace rebama;

constexpr int kExitValidation = 1;
constexpr int kExitRuntime = 2;

Eigen::VectorXd parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (item.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("'" + item + "' is not a number");
    }
  }
  if (values.empty()) throw ValidationError("empty vector");
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

std::string format_vector(const Eigen::VectorXd& v) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) out += (i ? ", " : "") + format_double(v[i]);
  return out;
}

struct TrainArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<bool> baseline;
  std::optional<int> episodes;
  std::string out;
  bool quiet = false;
};

int cmd_train(const TrainArgs& args) {
  RunConfig rc = parse_run_config(args.config);
  if (args.seed) rc.trainer.seed = *args.seed;
  if (args.baseline) rc.trainer.baseline = *args.baseline;
  if (args.episodes) rc.trainer.episodes = *args.episodes;
  if (!args.out.empty()) rc.output_dir = args.out;
  validate(rc.trainer, rc.scenario);
  const auto dir = resolve_output(rc.output_dir);
  rc.output_dir = dir;

  const auto outcome = run_training(rc, dir, [&](const EpisodeMetrics& m) {
    if (args.quiet) return;
    std::printf("episode %4d  reward %10.4f  u_c %9.4f  u_s %9.4f  critic %.4g\n", m.episode,
                m.mean_reward, m.mean_u_c, m.mean_u_s, m.critic_loss);
    std::fflush(stdout);
  });
  std::printf("wrote %s (%zu episodes)\n", (dir / "metrics.csv").string().c_str(),
              outcome.log.size());
  return 0;
}

struct EvalArgs {
  std::string checkpoint;
  std::string scenario;
  double noise = 1.0;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string projection = "dykstra";
  std::string out = "report.json";
};

int cmd_evaluate(const EvalArgs& args) {
  EvalOptions options;
  options.noise_sigma = args.noise;
  options.seeds = args.seeds;
  options.projection =
      args.projection == "closed_form" ? ProjectionMethod::closed_form : ProjectionMethod::dykstra;
  const auto path = resolve_output(args.out);
  const EvalReport report = run_evaluation(args.checkpoint, args.scenario, options, path);
  for (const auto& run : report.runs) {
    std::printf("seed %llu  reward %10.4f  u_c %9.4f  u_s %9.4f\n",
                static_cast<unsigned long long>(run.seed), run.mean_reward, run.mean_u_c,
                run.mean_u_s);
  }
  std::printf("mean     reward %10.4f  u_c %9.4f  u_s %9.4f\n", report.mean_reward,
              report.mean_u_c, report.mean_u_s);
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

struct CompareArgs {
  std::string a;
  std::string b;
  std::string label_a = "A";
  std::string label_b = "B";
  std::string out = "comparison.csv";
};

int cmd_compare(const CompareArgs& args) {
  const EvalReport a = report_from_json(read_text_file(args.a));
  const EvalReport b = report_from_json(read_text_file(args.b));
  const auto rows = compare(a, b);
  std::cout << format_comparison(rows, args.label_a, args.label_b);
  const auto path = resolve_output(args.out);
  write_text_file(path, comparison_csv(rows));
  std::printf("wrote %s\n", path.string().c_str());
  return 0;
}

struct GradcheckArgs {
  int cases = 100;
  std::uint64_t seed = 0;
  int width = 4;
  int height = 4;
  double tolerance = 1e-4;
};

int cmd_gradcheck(const GradcheckArgs& args) {
  if (args.cases < 1) throw ValidationError("--cases must be >= 1");
  GridConfig gc{args.width, args.height, std::vector<int>(static_cast<std::size_t>(args.width) * args.height, 1)};
  const RegionGrid grid = build_grid(gc);
  const ObservationLayout layout(grid, 48, 1.0);
  const int obs = layout.dimension();
  const int padded = padded_action_size(grid);
  const int critic_in = layout.state_dimension(grid.size()) + grid.size() * (padded + 3);
  const AdversaryBox box;

  struct Net {
    const char* name;
    int input;
    int output;
    Head head;
  };
  const Net nets[] = {
      {"region policy", obs, padded, Head::softmax(2)},
      {"adversary policy", obs, 3,
       Head::bounded(Eigen::Map<const Eigen::Vector3d>(box.lower.data()),
                     Eigen::Map<const Eigen::Vector3d>(box.upper.data()))},
      {"critic", critic_in, 1, Head::linear()},
  };

  std::mt19937_64 rng(args.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const Eigen::MatrixXd masks = action_masks(grid);
  bool ok = true;
  for (const auto& spec : nets) {
    double worst_param = 0.0;
    double worst_input = 0.0;
    int skipped = 0;
    for (int c = 0; c < args.cases; ++c) {
      Mlp net(spec.input, spec.output, spec.head);
      net.initialize(rng);
      Eigen::MatrixXd x(spec.input, 2);
      Eigen::MatrixXd up(spec.output, 2);
      for (Eigen::Index k = 0; k < x.size(); ++k) x(k) = normal(rng);
      for (Eigen::Index k = 0; k < up.size(); ++k) up(k) = normal(rng);
      Eigen::MatrixXd mask;
      if (spec.head.kind == HeadKind::softmax_blocks) {
        mask.resize(padded, 2);
        mask.col(0) = masks.col(static_cast<Eigen::Index>(c % grid.size()));
        mask.col(1) = masks.col(static_cast<Eigen::Index>((c * 7 + 3) % grid.size()));
      }
      const GradientCheck r = check_gradients(net, x, up, mask);
      worst_param = std::max(worst_param, r.max_parameter_error);
      worst_input = std::max(worst_input, r.max_input_error);
      skipped += r.skipped_kinks;
    }
    const bool pass = worst_param <= args.tolerance && worst_input <= args.tolerance;
    ok = ok && pass;
    std::printf("%-17s max rel error  params %.3e  inputs %.3e  (kink probes skipped %d)  %s\n",
                spec.name, worst_param, worst_input, skipped, pass ? "ok" : "FAIL");
  }
  if (!ok) throw NumericError("gradient check exceeded tolerance");
  return 0;
}

struct ProjectArgs {
  std::string point;
  std::vector<int> simplex;
  std::string lower;
  std::string upper;
};

int cmd_project(const ProjectArgs& args) {
  const Eigen::VectorXd a = parse_vector(args.point);
  if (!args.simplex.empty()) {
    const SimplexProduct domain{args.simplex};
    if (domain.dimension() != a.size()) {
      throw ValidationError("point has " + std::to_string(a.size()) + " entries, simplex blocks sum to " +
                            std::to_string(domain.dimension()));
    }
    std::printf("dykstra      %s\n", format_vector(project(a, domain, ProjectionMethod::dykstra)).c_str());
    std::printf("closed form  %s\n",
                format_vector(project(a, domain, ProjectionMethod::closed_form)).c_str());
    return 0;
  }
  if (args.lower.empty() || args.upper.empty()) {
    throw ValidationError("give either --simplex or both --lower and --upper");
  }
  const Box box{parse_vector(args.lower), parse_vector(args.upper)};
  if (box.lower.size() != a.size() || box.upper.size() != a.size()) {
    throw ValidationError("box bounds and point differ in length");
  }
  std::printf("dykstra      %s\n", format_vector(project(a, box, ProjectionMethod::dykstra)).c_str());
  std::printf("closed form  %s\n", format_vector(project(a, box, ProjectionMethod::closed_form)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust multi-agent rebalancing and charging for electric fleets"};
  app.require_subcommand(1);

  TrainArgs train;
  auto* t = app.add_subcommand("train", "Train region and adversary policies");
  t->add_option("--config", train.config, "Run configuration file")->required()->check(CLI::ExistingFile);
  t->add_option("--seed", train.seed, "Override trainer.seed");
  t->add_option("--baseline", train.baseline, "Disable the adversary (true/false)");
  t->add_option("--episodes", train.episodes, "Override trainer.episodes");
  t->add_option("--out", train.out, "Output directory (relative paths honor REBAMA_OUTPUT_ROOT)");
  t->add_flag("--quiet", train.quiet, "No per-episode progress lines");

  EvalArgs eval;
  auto* e = app.add_subcommand("evaluate", "Evaluate a checkpoint under observation noise");
  e->add_option("--checkpoint", eval.checkpoint)->required()->check(CLI::ExistingFile);
  e->add_option("--scenario", eval.scenario)->required()->check(CLI::ExistingFile);
  e->add_option("--noise", eval.noise, "Noise standard deviation")->capture_default_str();
  e->add_option("--seeds", eval.seeds, "Comma-separated seeds")->delimiter(',')->capture_default_str();
  e->add_option("--projection", eval.projection)
      ->check(CLI::IsMember({"dykstra", "closed_form"}))
      ->capture_default_str();
  e->add_option("--out", eval.out, "Report path (.json; a .csv is written beside it)")
      ->capture_default_str();

  CompareArgs cmp;
  auto* c = app.add_subcommand("compare", "Compare two evaluation reports");
  c->add_option("--a", cmp.a, "Report A (numerator side)")->required()->check(CLI::ExistingFile);
  c->add_option("--b", cmp.b, "Report B (reference)")->required()->check(CLI::ExistingFile);
  c->add_option("--label-a", cmp.label_a)->capture_default_str();
  c->add_option("--label-b", cmp.label_b)->capture_default_str();
  c->add_option("--out", cmp.out, "CSV output path")->capture_default_str();

  GradcheckArgs gc;
  auto* g = app.add_subcommand("gradcheck", "Finite-difference check of all three networks");
  g->add_option("--cases", gc.cases)->capture_default_str();
  g->add_option("--seed", gc.seed)->capture_default_str();
  g->add_option("--width", gc.width)->capture_default_str();
  g->add_option("--height", gc.height)->capture_default_str();
  g->add_option("--tolerance", gc.tolerance)->capture_default_str();

  ProjectArgs pr;
  auto* p = app.add_subcommand("project", "Project a point onto a simplex product or a box");
  p->add_option("--point", pr.point, "Comma-separated coordinates")->required();
  p->add_option("--simplex", pr.simplex, "Block sizes, e.g. 3,3")->delimiter(',');
  p->add_option("--lower", pr.lower, "Box lower bounds");
  p->add_option("--upper", pr.upper, "Box upper bounds");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return kExitValidation;
  }

  try {
    if (*t) return cmd_train(train);
    if (*e) return cmd_evaluate(eval);
    if (*c) return cmd_compare(cmp);
    if (*g) return cmd_gradcheck(gc);
    if (*p) return cmd_project(pr);
  } catch (const ValidationError& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitValidation;
  } catch (const std::exception& err) {
    std::fprintf(stderr, "error: %s\n", err.what());
    return kExitRuntime;
  }
  return 0;
}
