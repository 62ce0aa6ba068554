// adjprior: command line front end for the adjacency-prior toolkit.
// Exit codes: 0 success, 1 I/O failure, 2 validation failure, 3 violations
// found by `adjacency check`.

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adjprior/adjprior.hpp"

namespace fs = std::filesystem;
using namespace adjprior;

namespace {

// Hard labels from any volume kind: prob maps and logits decode by argmax.
LabelMap load_as_labels(const std::string& path) {
  LoadedVolume v = load_volume(path);
  if (v.is_label()) return std::get<LabelMap>(std::move(v.data));
  if (v.is_prob()) return argmax_labels(std::get<ProbMap>(v.data));
  return argmax_labels(softmax(std::get<LogitMap>(v.data)));
}

// Probabilities from any volume kind: labelmaps promote via one-hot,
// logits via softmax.
ProbMap load_as_probs(const std::string& path) {
  LoadedVolume v = load_volume(path);
  if (v.is_prob()) return std::get<ProbMap>(std::move(v.data));
  if (v.is_label()) return one_hot(std::get<LabelMap>(v.data));
  return softmax(std::get<LogitMap>(v.data));
}

int count_allowed_pairs(const std::vector<double>& m, int nc) {
  int allowed = 0;
  for (int b = 0; b < nc; ++b)
    for (int c = b + 1; c < nc; ++c)
      allowed += m[static_cast<std::size_t>(b) * nc + c] > 0.0;
  return allowed;
}

void run_adjacency_build(const std::vector<std::string>& inputs,
                         const std::string& out, bool counts) {
  std::vector<BinaryAdj> subjects;
  AdjCounts summed;
  for (const std::string& path : inputs) {
    LabelMap lab = load_labelmap(path);
    if (!subjects.empty() && lab.num_classes != summed.num_classes)
      throw validation_error("num_classes mismatch: " + inputs.front() +
                             " has " + std::to_string(summed.num_classes) +
                             " classes but " + path + " has " +
                             std::to_string(lab.num_classes));
    AdjCounts a = hard_adjacency(lab);
    if (subjects.empty()) summed = AdjCounts(lab.num_classes);
    for (std::size_t k = 0; k < summed.m.size(); ++k) summed.m[k] += a.m[k];
    subjects.push_back(binarize(a));
  }
  int allowed = 0;
  if (counts) {
    save_prior_counts(summed, static_cast<int>(subjects.size()), out);
    allowed = count_allowed_pairs(summed.m, summed.num_classes);
  } else {
    PriorAdj prior = aggregate_prior(subjects);
    save_prior(prior, out);
    allowed = count_allowed_pairs(prior.m, prior.num_classes);
  }
  std::cout << "subjects " << subjects.size() << "\n";
  std::cout << "allowed_pairs " << allowed << "\n";
}

int run_adjacency_check(const std::string& pred, const std::string& prior_path,
                        double threshold) {
  LabelMap lab = load_as_labels(pred);
  PriorAdj prior = load_prior(prior_path);
  auto report = violation_report(lab, prior, threshold);
  for (const Violation& v : report)
    std::cout << "violation " << v.label_b << " " << v.label_c << " "
              << v.contact_pairs << "\n";
  return report.empty() ? 0 : 3;
}

void run_metrics(const std::string& gt_path, const std::string& pred_path,
                 const std::string& out, bool csv) {
  LabelMap gt = load_labelmap(gt_path);
  LabelMap pred = load_as_labels(pred_path);
  save_report(evaluate(gt, pred), out,
              csv ? ReportFormat::csv : ReportFormat::json);
}

void run_loss(const std::string& gt_path, const std::string& pred_path,
              const std::string& prior_path, LossConfig cfg) {
  LabelMap gt = load_labelmap(gt_path);
  ProbMap pred = load_as_probs(pred_path);
  PriorAdj prior = load_prior(prior_path);
  LossTerms t = total_loss_terms(pred, one_hot(gt), prior, cfg);
  std::cout << "total " << format_double(t.total) << "\n";
  std::cout << "seg " << format_double(t.seg) << "\n";
  std::cout << "dice " << format_double(t.dice) << "\n";
  std::cout << "ce " << format_double(t.ce) << "\n";
  std::cout << "nonadj " << format_double(t.nonadj) << "\n";
}

void run_postprocess(const std::string& in, const std::string& out) {
  save_volume(postprocess_all(load_labelmap(in)), out);
}

void run_phantom(const PhantomSpec& spec, const std::string& out_dir) {
  fs::create_directories(out_dir);
  auto [gt, logits] = generate_phantom(spec);
  save_volume(gt, (fs::path(out_dir) / "gt.avol").string(), kRngAlgorithm);
  save_volume(logits, (fs::path(out_dir) / "logits.avol").string(),
              kRngAlgorithm);
  save_phantom_spec(spec, (fs::path(out_dir) / "spec.json").string());
}

void run_refine(const std::string& logits_path, const std::string& gt_path,
                const std::string& prior_path, const RefineConfig& cfg,
                const std::string& out, const std::string& trace_path) {
  LoadedVolume lv = load_volume(logits_path);
  if (!lv.is_logit())
    throw validation_error(logits_path + ": expected a logit volume");
  LogitMap z0 = std::get<LogitMap>(std::move(lv.data));
  LabelMap gt = load_labelmap(gt_path);
  PriorAdj prior = load_prior(prior_path);
  RefineResult res = refine(z0, gt, prior, cfg);
  save_volume(res.prob, out);
  if (!trace_path.empty()) save_trace_csv(res.trace, trace_path);
}

int run_gradcheck_cmd(std::uint64_t seed) {
  GradCheckResult r = run_gradcheck(seed, 20);
  std::cout << "seg_sum " << format_double(r.seg_sum) << "\n";
  std::cout << "seg_product " << format_double(r.seg_product) << "\n";
  std::cout << "nonadj " << format_double(r.nonadj) << "\n";
  std::cout << "total_logits " << format_double(r.total_logits) << "\n";
  return r.pass() ? 0 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"anatomical adjacency prior toolkit"};
  app.require_subcommand(1);
  int exit_code = 0;

  // adjacency build / check
  CLI::App* adjacency =
      app.add_subcommand("adjacency", "adjacency matrix operations");
  adjacency->require_subcommand(1);

  auto* build = adjacency->add_subcommand(
      "build", "aggregate a probabilistic prior from labelmaps");
  std::vector<std::string> build_inputs;
  std::string build_out;
  bool build_counts = false;
  build->add_option("--inputs", build_inputs, "labelmap volumes (.avol)")
      ->required()
      ->expected(-1);
  build->add_option("--out", build_out, "output prior JSON")->required();
  build->add_flag("--counts", build_counts,
                  "write summed raw contact counts instead of frequencies");
  build->callback(
      [&] { run_adjacency_build(build_inputs, build_out, build_counts); });

  auto* check = adjacency->add_subcommand(
      "check", "report contacts the prior disallows (exit 3 when found)");
  std::string check_pred, check_prior;
  double check_threshold = 0.0;
  check->add_option("--pred", check_pred,
                    "prediction volume (label, prob, or logit)")
      ->required();
  check->add_option("--prior", check_prior, "prior JSON")->required();
  check->add_option("--threshold", check_threshold,
                    "prior values <= threshold count as forbidden");
  check->callback([&] {
    exit_code = run_adjacency_check(check_pred, check_prior, check_threshold);
  });

  // metrics
  auto* metrics = app.add_subcommand("metrics", "per-label evaluation report");
  std::string metrics_gt, metrics_pred, metrics_out;
  bool metrics_csv = false;
  metrics->add_option("--gt", metrics_gt, "ground-truth labelmap")->required();
  metrics->add_option("--pred", metrics_pred,
                      "prediction volume (label, prob, or logit)")
      ->required();
  metrics->add_option("--out", metrics_out, "output report path")->required();
  metrics->add_flag("--csv", metrics_csv, "write CSV instead of JSON");
  metrics->callback(
      [&] { run_metrics(metrics_gt, metrics_pred, metrics_out, metrics_csv); });

  // loss
  auto* loss = app.add_subcommand("loss", "print loss terms of a prediction");
  std::string loss_gt, loss_pred, loss_prior;
  LossConfig loss_cfg;
  std::string loss_mode = "sum";
  loss->add_option("--gt", loss_gt, "ground-truth labelmap")->required();
  loss->add_option("--pred", loss_pred,
                   "prediction volume (labelmaps promote via one-hot)")
      ->required();
  loss->add_option("--prior", loss_prior, "prior JSON")->required();
  loss->add_option("--lambda", loss_cfg.lambda, "penalty weight");
  loss->add_option("--combine", loss_mode,
                   "dice and cross-entropy combination: sum or product")
      ->check(CLI::IsMember({"sum", "product"}));
  loss->callback([&] {
    loss_cfg.combine_mode =
        loss_mode == "product" ? CombineMode::product : CombineMode::sum;
    run_loss(loss_gt, loss_pred, loss_prior, loss_cfg);
  });

  // postprocess
  auto* post = app.add_subcommand(
      "postprocess", "keep largest components and fill enclosed holes");
  std::string post_in, post_out;
  post->add_option("--in", post_in, "input labelmap")->required();
  post->add_option("--out", post_out, "output labelmap")->required();
  post->callback([&] { run_postprocess(post_in, post_out); });

  // phantom
  auto* phantom = app.add_subcommand(
      "phantom", "generate a synthetic ground truth with noisy logits");
  PhantomSpec spec;
  std::vector<int> phantom_dims{48};
  std::string phantom_out;
  phantom->add_option("--seed", spec.seed, "generator seed");
  phantom->add_option("--dims", phantom_dims,
                      "grid extent (one value for a cube, or three)")
      ->expected(1, 3);
  phantom->add_option("--classes", spec.num_classes,
                      "class count including background (>= 3)");
  phantom->add_option("--sigma", spec.noise_sigma, "logit noise stddev");
  phantom->add_option("--gain", spec.logit_gain, "one-hot logit scale");
  phantom->add_option("--out", phantom_out, "output directory")->required();
  phantom->callback([&] {
    if (phantom_dims.size() == 1)
      spec.dims = {phantom_dims[0], phantom_dims[0], phantom_dims[0]};
    else if (phantom_dims.size() == 3)
      spec.dims = {phantom_dims[0], phantom_dims[1], phantom_dims[2]};
    else
      throw validation_error("--dims takes one or three values");
    run_phantom(spec, phantom_out);
  });

  // refine
  auto* ref = app.add_subcommand(
      "refine", "two-phase gradient descent on logits under the prior");
  std::string ref_logits, ref_gt, ref_prior, ref_out, ref_trace;
  RefineConfig ref_cfg;
  ref->add_option("--logits", ref_logits, "initial logit volume")->required();
  ref->add_option("--gt", ref_gt, "target labelmap")->required();
  ref->add_option("--prior", ref_prior, "prior JSON")->required();
  ref->add_option("--lambda", ref_cfg.loss.lambda, "penalty weight");
  ref->add_option("--phase1", ref_cfg.phase1_steps,
                  "steps on the segmentation loss alone");
  ref->add_option("--phase2", ref_cfg.phase2_steps,
                  "steps on the combined loss");
  ref->add_option("--lr", ref_cfg.learning_rate, "step size");
  ref->add_option("--out", ref_out, "refined probability volume")->required();
  ref->add_option("--trace", ref_trace, "per-step loss trace CSV");
  ref->callback([&] {
    run_refine(ref_logits, ref_gt, ref_prior, ref_cfg, ref_out, ref_trace);
  });

  // gradcheck
  auto* gc = app.add_subcommand(
      "gradcheck", "verify analytic gradients against finite differences");
  std::uint64_t gc_seed = kGradCheckDefaultSeed;
  gc->add_option("--seed", gc_seed, "instance generator seed");
  gc->callback([&] { exit_code = run_gradcheck_cmd(gc_seed); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const io_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const validation_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
