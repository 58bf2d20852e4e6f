// SPDX-License-Identifier: Apache-2.0
#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "augflat/augment.hpp"
#include "augflat/checkpoint.hpp"
#include "augflat/duality.hpp"
#include "augflat/flatness.hpp"
#include "augflat/harness.hpp"
#include "augflat/jacobian.hpp"
#include "augflat/linalg.hpp"
#include "augflat/numerics.hpp"
#include "augflat/robustness.hpp"

namespace {

using namespace augflat;

std::vector<double> parse_doubles(const std::string& csv) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos < csv.size()) {
    size_t next = csv.find(',', pos);
    if (next == std::string::npos) next = csv.size();
    out.push_back(std::stod(csv.substr(pos, next - pos)));
    pos = next + 1;
  }
  return out;
}

// "1..5" or "1,3,5".
std::vector<int> parse_severities(const std::string& s) {
  std::vector<int> out;
  size_t dots = s.find("..");
  if (dots != std::string::npos) {
    int lo = std::stoi(s.substr(0, dots));
    int hi = std::stoi(s.substr(dots + 2));
    for (int v = lo; v <= hi; ++v) out.push_back(v);
    return out;
  }
  for (double v : parse_doubles(s)) out.push_back(static_cast<int>(v));
  return out;
}

nlohmann::json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return nlohmann::json::parse(in);
}

void write_json(const std::string& path, const nlohmann::json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << j.dump(2) << '\n';
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  double idx = std::ceil(q * static_cast<double>(v.size())) - 1.0;
  auto i = static_cast<size_t>(std::max(0.0, idx));
  return v[std::min(i, v.size() - 1)];
}

Eigen::VectorXd ball_point(Eigen::Index dim, double radius, Rng& rng) {
  Eigen::VectorXd u = rng.normal_vector(dim);
  double nrm = u.norm();
  if (nrm == 0.0) return Eigen::VectorXd::Zero(dim);
  double frac = std::pow(rng.uniform(), 1.0 / static_cast<double>(dim));
  return u * (radius * frac / nrm);
}

int cmd_train(const std::string& config_path, const std::string& out_ckpt) {
  nlohmann::json j = read_json(config_path);
  nnet::ModelArch arch = nnet::arch_from_json(j.at("model"));
  harness::TrainConfig tc = harness::train_config_from_json(j.value("train", nlohmann::json::object()));

  const nlohmann::json& ds = j.at("dataset");
  nnet::Dataset data;
  if (ds.contains("path")) {
    data = nnet::load_auto(ds["path"].get<std::string>(),
                           nnet::pixel_scale_from_string(ds.value("scale", std::string("unit"))));
  } else {
    data = harness::make_synthetic(harness::synthetic_from_json(ds), ds.value("seed", 0ULL));
  }

  nnet::Model model(arch);
  harness::TrainResult tr = harness::train(model, data, tc);
  nnet::save_checkpoint(out_ckpt, model, tr.params, tc.dtype, tc.seed);

  std::printf("epochs_run %zu early_stopped %d\n", tr.epoch_loss.size(), tr.early_stopped ? 1 : 0);
  std::printf("final_loss %.6g train_error %.4f\n",
              tr.epoch_loss.empty() ? 0.0 : tr.epoch_loss.back(),
              nnet::dataset_error(model, tr.params, data));
  std::printf("checkpoint %s\n", out_ckpt.c_str());
  return 0;
}

int cmd_duality_check(const std::string& model_path, const std::string& data_path,
                      const std::string& scale, double gamma, int samples, uint64_t seed,
                      double diam, const std::string& report_path) {
  nnet::Checkpoint ck = nnet::load_checkpoint(model_path);
  nnet::Model model(ck.arch);
  nnet::Dataset d = nnet::load_auto(data_path, nnet::pixel_scale_from_string(scale));

  duality::CompensatoryRadius in_rad = duality::compensatory_input_radius(model, ck.params, d, gamma);
  duality::CompensatoryRadius pa_rad = duality::compensatory_param_radius(model, ck.params, d, gamma);

  struct PointCache {
    Eigen::MatrixXd jx, jtheta, pinv_jx, pinv_jtheta;
  };
  std::map<Eigen::Index, PointCache> cache;
  auto cached = [&](Eigen::Index i) -> PointCache& {
    auto it = cache.find(i);
    if (it != cache.end()) return it->second;
    const Eigen::VectorXd& x = d.samples[static_cast<size_t>(i)].x;
    nnet::JacobianPair jp = nnet::jacobian_pair(model, ck.params, x);
    PointCache pc;
    pc.jx = jp.jx;
    pc.jtheta = jp.jtheta;
    pc.pinv_jx = linalg::pinv(jp.jx);
    pc.pinv_jtheta = linalg::pinv(jp.jtheta);
    return cache.emplace(i, std::move(pc)).first->second;
  };

  Rng rng(seed);
  Eigen::Index p = model.param_count();
  Eigen::Index n_in = d.input_dim;
  int viol_in = 0, viol_pa = 0;
  std::vector<double> res_in, res_pa;
  res_in.reserve(static_cast<size_t>(samples));
  res_pa.reserve(static_cast<size_t>(samples));

  for (int k = 0; k < samples; ++k) {
    Eigen::Index i = static_cast<Eigen::Index>(k) % d.size();
    const Eigen::VectorXd& x = d.samples[static_cast<size_t>(i)].x;
    PointCache& pc = cached(i);

    Eigen::VectorXd big_delta = ball_point(p, gamma, rng);
    Eigen::VectorXd delta_t = pc.pinv_jx * (pc.jtheta * big_delta);
    if (delta_t.norm() > in_rad.radius + 1e-8) ++viol_in;
    res_in.push_back(duality::duality_residual(model, ck.params, x, delta_t, big_delta));

    Eigen::VectorXd delta = ball_point(n_in, gamma, rng);
    Eigen::VectorXd big_delta_tr = pc.pinv_jtheta * (pc.jx * delta);
    if (big_delta_tr.norm() > pa_rad.radius + 1e-8) ++viol_pa;
    res_pa.push_back(duality::duality_residual(model, ck.params, x, delta, big_delta_tr));
  }

  if (diam <= 0.0) diam = 2.0 * ck.params.norm();
  double gth = gamma / in_rad.worst_ratio;
  double log_count = duality::covering_log10_count(diam, gth, p);

  std::ofstream csv(report_path);
  if (!csv) throw std::runtime_error("cannot open " + report_path);
  csv << "kind,key,value\n";
  for (const auto& [idx, r] : in_rad.per_point)
    csv << "ratio_param_to_input," << idx << ',' << format_double("%.9g", r) << '\n';
  for (const auto& [idx, r] : pa_rad.per_point)
    csv << "ratio_input_to_param," << idx << ',' << format_double("%.9g", r) << '\n';
  csv << "bound,input_radius," << format_double("%.9g", in_rad.radius) << '\n';
  csv << "bound,param_radius," << format_double("%.9g", pa_rad.radius) << '\n';
  csv << "check,samples," << samples << '\n';
  csv << "check,violations_param_to_input," << viol_in << '\n';
  csv << "check,violations_input_to_param," << viol_pa << '\n';
  csv << "residual_param_to_input,p50," << format_double("%.9g", quantile(res_in, 0.5)) << '\n';
  csv << "residual_param_to_input,p90," << format_double("%.9g", quantile(res_in, 0.9)) << '\n';
  csv << "residual_param_to_input,max," << format_double("%.9g", quantile(res_in, 1.0)) << '\n';
  csv << "residual_input_to_param,p50," << format_double("%.9g", quantile(res_pa, 0.5)) << '\n';
  csv << "residual_input_to_param,p90," << format_double("%.9g", quantile(res_pa, 0.9)) << '\n';
  csv << "residual_input_to_param,max," << format_double("%.9g", quantile(res_pa, 1.0)) << '\n';
  csv << "covering,diam_theta," << format_double("%.9g", diam) << '\n';
  csv << "covering,gamma_theta," << format_double("%.9g", gth) << '\n';
  csv << "covering,log10_count," << format_double("%.9g", log_count) << '\n';

  std::printf("violations %d/%d (param->input), %d/%d (input->param)\n", viol_in, samples, viol_pa,
              samples);
  std::printf("report %s\n", report_path.c_str());
  return (viol_in + viol_pa) == 0 ? 0 : 1;
}

int cmd_psa_ecdf(const std::string& aug_path, const std::string& data_path,
                 const std::string& scale, const std::string& thresholds_csv, double gamma_star,
                 int n, uint64_t seed, const std::string& out_path) {
  augment::AugmentationConfig aug = augment::config_from_json(read_json(aug_path));
  nnet::Dataset d = nnet::load_auto(data_path, nnet::pixel_scale_from_string(scale));
  std::vector<double> thresholds = parse_doubles(thresholds_csv);
  augment::PsaReport rep = augment::psa_score(aug, d, thresholds, gamma_star, n, seed);

  std::ofstream csv(out_path);
  if (!csv) throw std::runtime_error("cannot open " + out_path);
  csv << "kind,key,value\n";
  for (const auto& [t, f] : rep.ecdf_at)
    csv << "ecdf," << format_double("%.9g", t) << ',' << format_double("%.9g", f) << '\n';
  csv << "quantile,gamma_a_hat," << format_double("%.9g", rep.gamma_a_hat) << '\n';
  csv << "compliance,gamma_star," << format_double("%.9g", rep.gamma_star) << '\n';
  csv << "compliance,compliant," << (rep.compliant ? 1 : 0) << '\n';

  std::printf("%s gamma_a_hat %.6g compliant %d\n", augment::describe(aug).c_str(),
              rep.gamma_a_hat, rep.compliant ? 1 : 0);
  return 0;
}

nlohmann::json flatness_to_json(const flatness::FlatnessReport& r) {
  return {{"mu_pac_bayes", r.pac.mu},
          {"sigma_star", r.pac.sigma_star},
          {"pac_stderr", r.pac.mc_stderr},
          {"pac_saturated", r.pac.saturated},
          {"lpf", r.lpf.value},
          {"lpf_stderr", r.lpf.mc_stderr},
          {"eps_sharp", r.sharp.value},
          {"b_hat", r.bflat.b_hat},
          {"b_stderr", r.bflat.mc_stderr},
          {"b_saturated", r.bflat.saturated}};
}

int cmd_flatness(const std::string& model_path, const std::string& data_path,
                 const std::string& scale, const std::string& preset, uint64_t seed,
                 const std::string& loss, const std::string& out_path) {
  nnet::Checkpoint ck = nnet::load_checkpoint(model_path);
  nnet::Model model(ck.arch);
  nnet::Dataset d = nnet::load_auto(data_path, nnet::pixel_scale_from_string(scale));
  flatness::FlatnessConfig cfg =
      preset == "inet" ? flatness::inet_preset() : flatness::cifar_preset();
  cfg.seed = seed;
  nnet::LossKind kind = loss == "mse" ? nnet::LossKind::Mse : nnet::LossKind::CrossEntropy;
  flatness::FlatnessReport rep = flatness::evaluate(model, ck.params, d, cfg, kind);
  write_json(out_path, flatness_to_json(rep));
  std::printf("mu %.6g lpf %.6g eps_sharp %.6g b_hat %.6g\n", rep.pac.mu, rep.lpf.value,
              rep.sharp.value, rep.bflat.b_hat);
  return 0;
}

int cmd_attack(const std::string& model_path, const std::string& data_path,
               const std::string& scale, const std::string& preset, uint64_t seed,
               const std::string& loss, const std::string& out_path) {
  nnet::Checkpoint ck = nnet::load_checkpoint(model_path);
  nnet::Model model(ck.arch);
  nnet::Dataset d = nnet::load_auto(data_path, nnet::pixel_scale_from_string(scale));
  robustness::AttackConfig cfg = robustness::attack_preset(preset);
  nnet::LossKind kind = loss == "mse" ? nnet::LossKind::Mse : nnet::LossKind::CrossEntropy;

  Eigen::Index wrong = 0;
  int infeasible = 0;
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const nnet::Sample& s = d.samples[static_cast<size_t>(i)];
    Eigen::VectorXd xa = robustness::pgd_attack(model, ck.params, s.x, s.y, cfg, d.scale,
                                                seed_mix(seed, static_cast<uint64_t>(i)), kind);
    if (!robustness::attack_feasible(s.x, xa, cfg, d.scale)) ++infeasible;
    if (nnet::predict(nnet::forward(model, ck.params, xa)) != s.y) ++wrong;
  }
  double adv_err = 100.0 * static_cast<double>(wrong) / static_cast<double>(d.size());
  double clean_err = nnet::dataset_error(model, ck.params, d);

  write_json(out_path,
             {{"preset", preset},
              {"norm", cfg.norm == robustness::AttackNorm::L2 ? "l2" : "linf"},
              {"eps", cfg.eps},
              {"alpha", cfg.alpha},
              {"steps", cfg.steps},
              {"random_start", cfg.random_start},
              {"clean_error", clean_err},
              {"adversarial_error", adv_err},
              {"feasibility_violations", infeasible}});
  std::printf("clean %.4f adversarial %.4f infeasible %d\n", clean_err, adv_err, infeasible);
  return infeasible == 0 ? 0 : 1;
}

int cmd_corrupt(const std::string& data_path, const std::string& scale, const std::string& kinds_csv,
                const std::string& severities_str, uint64_t seed, const std::string& out_dir) {
  nnet::Dataset d = nnet::load_auto(data_path, nnet::pixel_scale_from_string(scale));
  std::vector<robustness::CorruptionKind> kinds;
  if (kinds_csv == "all") {
    kinds = robustness::all_corruptions();
  } else {
    size_t pos = 0;
    while (pos < kinds_csv.size()) {
      size_t next = kinds_csv.find(',', pos);
      if (next == std::string::npos) next = kinds_csv.size();
      kinds.push_back(robustness::corruption_from_string(kinds_csv.substr(pos, next - pos)));
      pos = next + 1;
    }
  }
  std::vector<int> severities = parse_severities(severities_str);

  std::filesystem::create_directories(out_dir);
  std::filesystem::path in(data_path);
  bool csv_format = in.extension() == ".csv";
  for (robustness::CorruptionKind k : kinds) {
    for (int sev : severities) {
      robustness::CorruptionSpec spec{k, sev};
      nnet::Dataset c =
          robustness::corrupt_dataset(d, spec, seed_mix(seed, static_cast<uint64_t>(k), sev));
      std::string stem =
          in.stem().string() + "+" + robustness::to_string(k) + "@" + std::to_string(sev);
      std::filesystem::path out = std::filesystem::path(out_dir) / stem;
      if (csv_format) {
        nnet::save_csv(c, out.string() + ".csv");
      } else {
        nnet::save_idx(c, out.string(), out.string() + ".labels");
      }
      std::printf("wrote %s\n", out.string().c_str());
    }
  }
  return 0;
}

int cmd_run_experiment(const std::string& config_path, const std::string& out_dir) {
  harness::ExperimentConfig cfg = harness::experiment_from_json(read_json(config_path));
  std::vector<harness::RunRecord> records = harness::run_experiment(cfg, out_dir);
  int failed = 0;
  for (const harness::RunRecord& r : records) {
    if (r.error.empty()) {
      std::printf("%s/s%llu: train %.4f test %.4f mce %.4f\n", r.arm.c_str(),
                  static_cast<unsigned long long>(r.seed), r.train_error, r.test_error,
                  r.robust.mce);
    } else {
      std::printf("%s/s%llu: FAILED: %s\n", r.arm.c_str(),
                  static_cast<unsigned long long>(r.seed), r.error.c_str());
      ++failed;
    }
  }
  std::printf("reports in %s\n", out_dir.c_str());
  return failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Augmentation, flat-minima, and robustness toolkit"};
  app.require_subcommand(1);

  std::string config, out, model_path, data_path, report, aug_path, kinds = "all";
  std::string scale = "unit", preset = "cifar", loss = "ce", thresholds = "0.01,0.05,0.1,0.5";
  std::string severities = "1..5";
  double gamma = 0.01, gamma_star = 0.05, diam = 0.0;
  int samples = 10000, n = 10000;
  uint64_t seed = 0;

  CLI::App* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", config, "JSON with model, train, dataset")->required();
  train->add_option("--out", out, "Checkpoint output path")->required();

  CLI::App* dual = app.add_subcommand("duality-check", "Verify compensatory perturbation bounds");
  dual->add_option("--model", model_path)->required();
  dual->add_option("--data", data_path)->required();
  dual->add_option("--scale", scale, "unit or byte");
  dual->add_option("--gamma", gamma, "Perturbation radius");
  dual->add_option("--samples", samples, "Sampled perturbations per direction");
  dual->add_option("--seed", seed);
  dual->add_option("--diam", diam, "Parameter-space diameter (0: 2*||theta||)");
  dual->add_option("--report", report, "CSV output path")->required();

  CLI::App* psa = app.add_subcommand("psa-ecdf", "Augmentation distance eCDF and compliance");
  psa->add_option("--aug", aug_path, "Augmentation config JSON")->required();
  psa->add_option("--data", data_path)->required();
  psa->add_option("--scale", scale);
  psa->add_option("--thresholds", thresholds, "Comma-separated gamma grid");
  psa->add_option("--gamma-star", gamma_star, "Compliance radius");
  psa->add_option("--n", n, "Distance draws");
  psa->add_option("--seed", seed);
  psa->add_option("--out", out, "CSV output path")->required();

  CLI::App* flat = app.add_subcommand("flatness", "Flatness metrics for a checkpoint");
  flat->add_option("--model", model_path)->required();
  flat->add_option("--data", data_path)->required();
  flat->add_option("--scale", scale);
  flat->add_option("--preset", preset)->check(CLI::IsMember({"cifar", "inet"}));
  flat->add_option("--seed", seed);
  flat->add_option("--loss", loss)->check(CLI::IsMember({"ce", "mse"}));
  flat->add_option("--out", out, "JSON output path")->required();

  CLI::App* atk = app.add_subcommand("attack", "PGD attack evaluation");
  atk->add_option("--model", model_path)->required();
  atk->add_option("--data", data_path)->required();
  atk->add_option("--scale", scale);
  atk->add_option("--preset", preset)->check(CLI::IsMember(robustness::attack_preset_names()));
  atk->add_option("--seed", seed);
  atk->add_option("--loss", loss)->check(CLI::IsMember({"ce", "mse"}));
  atk->add_option("--out", out, "JSON output path")->required();

  CLI::App* cor = app.add_subcommand("corrupt", "Write corrupted dataset copies");
  cor->add_option("--data", data_path)->required();
  cor->add_option("--scale", scale);
  cor->add_option("--kinds", kinds, "Comma-separated kinds or 'all'");
  cor->add_option("--severities", severities, "e.g. 1..5 or 1,3,5");
  cor->add_option("--seed", seed);
  cor->add_option("--out-dir", out)->required();

  CLI::App* exp = app.add_subcommand("run-experiment", "Train and evaluate all arms");
  exp->add_option("--config", config, "Experiment JSON")->required();
  exp->add_option("--out-dir", out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(config, out);
    if (dual->parsed())
      return cmd_duality_check(model_path, data_path, scale, gamma, samples, seed, diam, report);
    if (psa->parsed())
      return cmd_psa_ecdf(aug_path, data_path, scale, thresholds, gamma_star, n, seed, out);
    if (flat->parsed())
      return cmd_flatness(model_path, data_path, scale, preset, seed, loss, out);
    if (atk->parsed()) return cmd_attack(model_path, data_path, scale, preset, seed, loss, out);
    if (cor->parsed()) return cmd_corrupt(data_path, scale, kinds, severities, seed, out);
    if (exp->parsed()) return cmd_run_experiment(config, out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
