// Command-line driver: synth, describe, diff, match, eval, run.

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "seqlcd/seqlcd.hpp"

namespace {

struct Flags {
  std::string config;
  std::string ref;
  std::string test;
  std::string descriptor;
  std::string latents_ref;
  std::string latents_test;
  std::string out;
  std::string candidates;
  std::string matrix;
  std::optional<unsigned> threads;
  std::optional<std::uint64_t> seed;
  std::optional<int> d_thresh;
};

void add_run_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "JSON config file; flags override its values");
  cmd->add_option("--ref", f.ref, "reference manifest");
  cmd->add_option("--test", f.test, "test manifest");
  cmd->add_option("--descriptor", f.descriptor, "descriptor kind")->check(CLI::IsMember({"sad", "latent"}));
  cmd->add_option("--latents-ref", f.latents_ref, "latent file for the reference manifest");
  cmd->add_option("--latents-test", f.latents_test, "latent file for the test manifest");
  cmd->add_option("--threads", f.threads, "worker threads (0 = auto)");
  cmd->add_option("--d-thresh", f.d_thresh, "frame tolerance for a correct match");
}

seqlcd::RunConfig resolve(const Flags& f) {
  seqlcd::RunConfig c = f.config.empty() ? seqlcd::RunConfig{} : seqlcd::load_run_config(f.config);
  if (!f.ref.empty()) c.ref_manifest = f.ref;
  if (!f.test.empty()) c.test_manifest = f.test;
  if (!f.descriptor.empty()) c.descriptor = f.descriptor == "sad" ? seqlcd::DescriptorKind::Sad : seqlcd::DescriptorKind::Latent;
  if (!f.latents_ref.empty()) c.latents_ref = f.latents_ref;
  if (!f.latents_test.empty()) c.latents_test = f.latents_test;
  if (!f.out.empty()) c.out_dir = f.out;
  if (f.threads) c.threads = *f.threads;
  if (f.d_thresh) c.d_thresh = *f.d_thresh;
  return c;
}

int cmd_describe(const Flags& f) {
  seqlcd::RunConfig c = resolve(f);
  if (c.ref_manifest.empty() == c.test_manifest.empty())
    throw seqlcd::Error("describe: give exactly one of --ref or --test");
  if (f.out.empty()) throw seqlcd::Error("describe: --out file is required");
  const std::string path = c.ref_manifest.empty() ? c.test_manifest : c.ref_manifest;
  const auto m = seqlcd::load_manifest(path, seqlcd::ConditionSet(c.conditions), true);
  seqlcd::write_latents(seqlcd::describe_manifest(path, m, c.sad, c.threads), f.out);
  return 0;
}

int cmd_diff(const Flags& f) {
  seqlcd::RunConfig c = resolve(f);
  if (c.out_dir.empty()) throw seqlcd::Error("diff: --out directory is required");
  auto r = seqlcd::load_inputs(c);
  r.raw = seqlcd::compute_difference_matrix(r.ref_desc, r.test_desc, seqlcd::default_metric(c.descriptor), c.threads);
  r.enhanced = seqlcd::enhance_local(r.raw, c.enhance, c.threads);
  std::filesystem::create_directories(c.out_dir);
  seqlcd::write_matrices(r, c.out_dir);
  return 0;
}

int cmd_match(const Flags& f) {
  seqlcd::RunConfig c = resolve(f);
  if (c.out_dir.empty()) throw seqlcd::Error("match: --out directory is required");
  seqlcd::DifferenceMatrix enhanced;
  if (!f.matrix.empty()) {
    c.matcher.validate();
    enhanced = seqlcd::matrix_from_binary(seqlcd::read_file(f.matrix), true);
  } else {
    auto r = seqlcd::load_inputs(c);
    enhanced = seqlcd::enhance_local(
        seqlcd::compute_difference_matrix(r.ref_desc, r.test_desc, seqlcd::default_metric(c.descriptor), c.threads),
        c.enhance, c.threads);
  }
  const auto candidates = seqlcd::search_matches(enhanced, c.matcher, c.threads);
  std::filesystem::create_directories(c.out_dir);
  seqlcd::write_file((std::filesystem::path(c.out_dir) / "candidates.csv").string(),
                     seqlcd::candidates_to_csv(candidates));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequence-matching loop closure detection"};
  app.require_subcommand(1);
  Flags f;

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-condition dataset");
  synth->add_option("--config", f.config, "synth config JSON")->required();
  synth->add_option("--out", f.out, "output directory")->required();
  synth->add_option("--seed", f.seed, "override world.seed");
  synth->add_option("--threads", f.threads, "worker threads (0 = auto)");

  auto* describe = app.add_subcommand("describe", "write SAD descriptors of a manifest in the latent file format");
  add_run_flags(describe, f);
  describe->add_option("--out", f.out, "output descriptor file");

  auto* diff = app.add_subcommand("diff", "write raw and enhanced difference matrices");
  add_run_flags(diff, f);
  diff->add_option("--out", f.out, "output directory");

  auto* match = app.add_subcommand("match", "write best route candidates");
  add_run_flags(match, f);
  match->add_option("--out", f.out, "output directory");
  match->add_option("--matrix", f.matrix, "enhanced matrix dump to match instead of recomputing");

  auto* eval = app.add_subcommand("eval", "score a candidates CSV against ground truth");
  add_run_flags(eval, f);
  eval->add_option("--candidates", f.candidates, "candidates CSV (T,ref_index,V,S)")->required();
  eval->add_option("--out", f.out, "output directory");

  auto* run = app.add_subcommand("run", "full pipeline: describe, diff, enhance, match, eval");
  add_run_flags(run, f);
  run->add_option("--out", f.out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      auto cfg = seqlcd::synth_config_from_json(seqlcd::detail::parse_json_file(f.config), f.seed);
      if (f.threads) cfg.threads = *f.threads;
      for (const auto& m : seqlcd::cmd_synth(cfg, f.out)) std::cout << m << "\n";
      return 0;
    }
    if (describe->parsed()) return cmd_describe(f);
    if (diff->parsed()) return cmd_diff(f);
    if (match->parsed()) return cmd_match(f);
    if (eval->parsed()) {
      const auto report = seqlcd::cmd_eval(resolve(f), f.candidates, &std::cerr);
      if (f.out.empty()) std::cout << seqlcd::report_to_json(report).dump(2) << "\n";
      return 0;
    }
    if (run->parsed()) {
      const auto r = seqlcd::cmd_run(resolve(f), &std::cerr);
      std::cout << "auc " << (r.report.auc ? seqlcd::format_double(*r.report.auc) : "n/a") << "\n"
                << "recall_at_full_precision " << seqlcd::format_double(r.report.recall_at_full_precision) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
