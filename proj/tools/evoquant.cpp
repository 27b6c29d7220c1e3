// Copyright 2026 The evoquant Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// evoquant command-line tool. Exit codes: 0 success, 2 usage/input errors,
// 1 evaluation or internal failures.

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evoquant.hpp"

namespace fs = std::filesystem;
using namespace evoquant;

namespace {

std::vector<int> parse_bits(const std::string& text) {
  std::vector<int> bits;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t used = 0;
    int b = 0;
    try {
      b = std::stoi(item, &used);
    } catch (const std::exception&) {
      throw InvalidArgument("bad bit width: '" + item + "'");
    }
    if (used != item.size()) throw InvalidArgument("bad bit width: '" + item + "'");
    bits.push_back(b);
  }
  if (bits.empty()) throw InvalidArgument("empty policy");
  return bits;
}

std::string mb(std::uint64_t bytes) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(6) << static_cast<double>(bytes) / kBytesPerMB;
  return os.str();
}

void print_result(const std::string& label, const FitnessRecord& f) {
  std::cout << label << ": accuracy " << std::fixed << std::setprecision(6) << f.accuracy
            << ", size " << f.size_bytes << " bytes (" << mb(f.size_bytes) << " MB), fitness "
            << f.fitness << '\n';
  std::cout.unsetf(std::ios::floatfield);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string());
  out << text;
  out.flush();
  if (!out) throw IoError("write failed: " + path.string());
}

fs::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir);
  return dir;
}

ModelGenome read_genome_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return genome_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(path + ": " + e.what());
  }
}

// Genome and stacking profile recorded in a model's metadata.
std::pair<ModelGenome, StackingProfile> model_architecture(const Metadata& metadata) {
  const auto g = metadata.find("genome");
  const auto p = metadata.find("profile");
  if (g == metadata.end() || p == metadata.end())
    throw FormatError("model metadata lacks genome/profile entries");
  try {
    return {genome_from_json(nlohmann::json::parse(g->second)),
            profile_from_json(nlohmann::json::parse(p->second))};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("model metadata: ") + e.what());
  }
}

std::string policy_json(const QuantizationPolicy& p) {
  return nlohmann::json{{"bits", p.bits}}.dump() + "\n";
}

// ---------------------------------------------------------------------------

struct QuantizeArgs {
  std::string model, out, policy;
  int bits = 0;
  std::size_t bucket = kDefaultBucketSize;
  std::vector<std::string> exempt_names;
  std::vector<int> exempt_cells;
};

int cmd_quantize(const QuantizeArgs& a) {
  const FloatModel model = load_float_model_file(a.model);
  if ((a.bits > 0) == !a.policy.empty()) throw InvalidArgument("give exactly one of --bits and --policy");
  require(a.bucket >= 2, "bucket size must be >= 2");
  const std::vector<int> policy =
      a.bits > 0 ? std::vector<int>(model.cell_count(), a.bits) : parse_bits(a.policy);
  Exemptions ex;
  ex.names.insert(a.exempt_names.begin(), a.exempt_names.end());
  for (int c : a.exempt_cells) {
    require(c >= 0 && c <= 0xffff, "cell index out of range");
    ex.cells.insert(static_cast<std::uint16_t>(c));
  }
  const QuantizedModel qm = quantize_model(model, policy, a.bucket, ex);
  const Bytes bytes = save_quantized_model(qm);
  write_file(a.out, bytes);

  const std::size_t float_bytes = save_float_model(model).size();
  std::uint64_t float_bits = 0, formula_bits = 0;
  double bound = 0.0;
  for (const auto& qt : qm.tensors) {
    float_bits += qt.value_count() * static_cast<std::uint64_t>(qm.float_width_bits);
    formula_bits += theoretical_bits(qt.value_count(), qt.bit_width, qt.bucket_size, qm.float_width_bits);
    bound = std::max(bound, reconstruction_bound(qt));
  }
  std::cout << "float size: " << float_bytes << " bytes (" << mb(float_bytes) << " MB)\n";
  std::cout << "quantized size: " << bytes.size() << " bytes (" << mb(bytes.size()) << " MB)\n";
  std::cout << std::fixed << std::setprecision(3);
  if (formula_bits > 0)
    std::cout << "theoretical ratio: "
              << static_cast<double>(float_bits) / static_cast<double>(formula_bits) << '\n';
  else
    std::cout << "theoretical ratio: n/a (all tensors exempt)\n";
  std::cout << "actual ratio: " << static_cast<double>(float_bytes) / static_cast<double>(bytes.size())
            << '\n';
  std::cout << std::scientific << std::setprecision(9) << "error bound: " << bound << '\n';
  return 0;
}

int cmd_dequantize(const std::string& in, const std::string& out, int width) {
  require(width == 16 || width == 32 || width == 64, "width must be 16, 32 or 64");
  const FloatModel m = dequantize_model(load_quantized_model_file(in), width);
  save_float_model_file(m, out);
  std::cout << "wrote " << out << " (" << m.value_count() << " values, f" << width << ")\n";
  return 0;
}

// Loads the config and applies the mandatory --seed.
RunConfig config_with_seed(const std::string& path, std::uint64_t seed) {
  RunConfig rc = load_run_config(path);
  rc.search.seed = seed;
  return rc;
}

int cmd_search(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
  const RunConfig rc = config_with_seed(config_path, seed);
  validate(rc.search);
  const fs::path dir = ensure_dir(out_dir);
  std::optional<Dataset> data;
  if (rc.evaluator.kind == EvaluatorKind::kToy) data = rc.evaluator.dataset.load();
  auto evaluator = make_evaluator(rc, data);
  const SearchHistory h = run_search(rc.search, *evaluator);
  write_text(dir / "history.jsonl", history_string(h));

  const Individual& best = h.best();
  write_text(dir / "best_genome.json", genome_to_json(best.genome).dump(2) + "\n");
  print_result("search best", best.fitness);

  nlohmann::ordered_json summary;
  summary["best_id"] = best.id;
  summary["search"] = {{"accuracy", best.fitness.accuracy},
                       {"size_bytes", best.fitness.size_bytes},
                       {"fitness", best.fitness.fitness}};
  FitnessRecord final_record = best.fitness;
  std::shared_ptr<const QuantizedModel> final_model = best.result.quantized_model;
  if (data && rc.search.evaluation_profile != rc.search.space.profile) {
    // Retrain the winner at evaluation scale.
    ModelGenome g = best.genome;
    g.policy = remap_policy(g.policy, rc.search.evaluation_profile.cell_count());
    RunConfig eval_rc = rc;
    eval_rc.evaluator.share_parameters = false;
    auto final_eval = make_evaluator(eval_rc, data, &rc.search.evaluation_profile);
    const EvalResult r = final_eval->evaluate(g);
    final_record = fitness(r.accuracy, r.size_bytes, rc.search.target_bytes);
    final_model = r.quantized_model;
    print_result("final (evaluation profile)", final_record);
  }
  summary["final"] = {{"accuracy", final_record.accuracy},
                      {"size_bytes", final_record.size_bytes},
                      {"fitness", final_record.fitness}};
  if (final_model) {
    save_quantized_model_file(*final_model, (dir / "best_model.jsqq").string());
    summary["model"] = "best_model.jsqq";
  }
  write_text(dir / "summary.json", summary.dump(2) + "\n");
  std::cout << "wrote " << dir.string() << '\n';
  return 0;
}

int cmd_search_policy(const std::string& model_path, const std::string& config_path,
                      std::uint64_t seed, const std::string& seed_policy, const std::string& out_dir) {
  FloatModel model = load_float_model_file(model_path);
  if (model.cell_count() == 0) throw InvalidArgument("model has no cell_index tags");
  auto [genome, profile] = model_architecture(model.metadata);

  RunConfig rc = config_with_seed(config_path, seed);
  SearchConfig& c = rc.search;
  c.mode = SearchMode::kPolicyOnly;
  c.space.profile = profile;
  c.evaluation_profile = profile;
  if (profile.cell_count() != model.cell_count()) throw InvalidArgument("policy length mismatch");
  c.base_genome = genome;
  c.seed_individuals.clear();
  if (!seed_policy.empty()) {
    ModelGenome seeded = genome;
    seeded.policy.bits = parse_bits(seed_policy);
    if (seeded.policy.bits.size() != model.cell_count()) throw InvalidArgument("policy length mismatch");
    require_valid(seeded, c.space);
    c.seed_individuals.push_back(seeded);
  }
  validate(c);
  const fs::path dir = ensure_dir(out_dir);

  Dataset data = rc.evaluator.dataset.load();
  NetworkPlan plan = assemble(genome, profile, data.dims, data.classes);
  QuantizeOnlyEvaluator ev(std::move(model), std::move(plan), std::move(data), c.bucket_size,
                           rc.evaluator.exemptions);
  for (int b : c.space.bit_choices) {
    ModelGenome u = genome;
    u.policy.bits.assign(ev.cell_count(), b);
    const EvalResult r = ev.evaluate(u);
    print_result("uniform " + std::to_string(b) + "-bit", fitness(r.accuracy, r.size_bytes, c.target_bytes));
  }

  const SearchHistory h = run_search(c, ev);
  write_text(dir / "history.jsonl", history_string(h));
  const Individual& best = h.best();
  write_text(dir / "best_policy.json", policy_json(best.genome.policy));
  save_quantized_model_file(*best.result.quantized_model, (dir / "best_model.jsqq").string());
  print_result("search best", best.fitness);
  std::cout << "best policy: " << nlohmann::json(best.genome.policy.bits).dump() << '\n';
  return 0;
}

struct EvalArgs {
  std::string config, model, genome, save_float, save_quantized;
  bool evaluation_profile = false;
};

int cmd_eval(const EvalArgs& a) {
  const RunConfig rc = load_run_config(a.config);
  if (a.model.empty() == a.genome.empty()) throw InvalidArgument("give exactly one of MODEL and --genome");
  if (rc.evaluator.kind != EvaluatorKind::kToy) throw InvalidArgument("eval needs a toy evaluator config");
  const Dataset data = rc.evaluator.dataset.load();
  FitnessRecord rec;
  if (!a.model.empty()) {
    if (!a.save_float.empty() || !a.save_quantized.empty())
      throw InvalidArgument("--save-float/--save-quantized apply to --genome only");
    const Bytes bytes = read_file(a.model);
    const QuantizedModel qm = load_quantized_model(bytes);
    const auto [genome, profile] = model_architecture(qm.metadata);
    const NetworkPlan plan = assemble(genome, profile, data.dims, data.classes);
    const double acc = validation_accuracy(plan, dequantize_model(qm), data);
    rec = fitness(acc, bytes.size(), rc.search.target_bytes);
  } else {
    const StackingProfile& profile =
        a.evaluation_profile ? rc.search.evaluation_profile : rc.search.space.profile;
    ModelGenome g = read_genome_file(a.genome);
    g.policy = remap_policy(g.policy, profile.cell_count());
    const auto problems = validate(g, SpaceConfig{rc.search.space.combinations, rc.search.space.ops,
                                                  rc.search.space.bit_choices, profile});
    if (!problems.empty()) throw InvalidArgument("invalid genome: " + problems.front());
    ToyEvaluatorOptions opt;
    opt.profile = profile;
    opt.hyper = rc.evaluator.hyper;
    opt.bucket_size = rc.search.bucket_size;
    opt.exemptions = rc.evaluator.exemptions;
    ToyEvaluator ev(data, opt);
    const NetworkPlan plan = assemble(g, profile, data.dims, data.classes);
    const FloatModel model = ev.train_genome(g, plan);
    const EvalResult r = evaluate_quantized(plan, model, g.policy, data, opt.bucket_size, opt.exemptions);
    std::cout << "float accuracy: " << std::fixed << std::setprecision(6)
              << validation_accuracy(plan, model, data) << '\n';
    std::cout.unsetf(std::ios::floatfield);
    if (!a.save_float.empty()) save_float_model_file(model, a.save_float);
    if (!a.save_quantized.empty()) save_quantized_model_file(*r.quantized_model, a.save_quantized);
    rec = fitness(r.accuracy, r.size_bytes, rc.search.target_bytes);
  }
  print_result("eval", rec);
  return 0;
}

ParsedHistory load_history(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  try {
    return parse_history(in);
  } catch (const FormatError& e) {
    throw FormatError(path + ": " + e.what());
  }
}

std::string pareto_csv(const std::vector<TradeoffPoint>& points) {
  std::ostringstream os;
  os << "accuracy,size_bytes\n";
  for (const auto& p : pareto_front(points)) os << format_number(p.accuracy) << ',' << p.size_bytes << '\n';
  return os.str();
}

int cmd_pareto(const std::vector<std::string>& paths, const std::string& out) {
  std::vector<TradeoffPoint> points;
  for (const auto& p : paths) {
    const auto h = load_history(p);
    points.insert(points.end(), h.points.begin(), h.points.end());
  }
  const std::string csv = pareto_csv(points);
  if (out.empty()) {
    std::cout << csv;
  } else {
    write_text(out, csv);
  }
  return 0;
}

int cmd_sweep(const std::string& config_path, std::uint64_t seed, const std::string& out_dir,
              unsigned threads) {
  const RunConfig rc = config_with_seed(config_path, seed);
  if (rc.grid.empty()) throw InvalidArgument("empty grid");
  require(threads >= 1, "threads must be >= 1");
  std::optional<Dataset> data;
  if (rc.evaluator.kind == EvaluatorKind::kToy) data = rc.evaluator.dataset.load();
  const auto curves = sweep(rc.grid, rc.search, [&] { return make_evaluator(rc, data); }, threads);
  const fs::path dir = ensure_dir(out_dir);
  for (const auto& c : curves) {
    std::ostringstream os;
    write_curve_csv(c.stats, os);
    const std::string name = "curve_P" + std::to_string(c.pair.population_size) + "_S" +
                             std::to_string(c.pair.sample_size) + ".csv";
    write_text(dir / name, os.str());
    std::cout << std::fixed << std::setprecision(6) << "P=" << c.pair.population_size
              << " S=" << c.pair.sample_size << ": mean fitness " << c.stats.front().mean << " -> "
              << c.stats.back().mean << ", best " << c.stats.back().best << '\n';
  }
  return 0;
}

int cmd_report(const std::vector<std::string>& paths, const std::string& out_dir) {
  const fs::path dir = ensure_dir(out_dir);
  std::vector<TradeoffPoint> all;
  std::cout << "history,iterations,initial_mean,final_mean,final_std,best_fitness,evaluated\n"
            << std::fixed << std::setprecision(6);
  for (std::size_t i = 0; i < paths.size(); ++i) {
    const auto h = load_history(paths[i]);
    all.insert(all.end(), h.points.begin(), h.points.end());
    std::vector<PopulationStats> curve;
    for (const auto& [it, s] : h.curve) curve.push_back(s);
    std::ostringstream os;
    write_curve_csv(curve, os);
    const std::string stem = paths.size() == 1 ? "curve" : "curve_" + std::to_string(i);
    write_text(dir / (stem + ".csv"), os.str());
    std::cout << paths[i] << ',' << h.curve.back().first << ',' << curve.front().mean << ','
              << curve.back().mean << ',' << curve.back().std << ',' << curve.back().best << ','
              << h.points.size() << '\n';
  }
  const std::string front = pareto_csv(all);
  write_text(dir / "pareto.csv", front);
  std::cout << "\npareto front\n" << front;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint architecture and quantization-policy search for small networks"};
  app.require_subcommand(1, 1);

  QuantizeArgs q;
  auto* quantize = app.add_subcommand("quantize", "Quantize a JSQW float model into JSQQ");
  quantize->add_option("model", q.model, "Input JSQW model")->required();
  quantize->add_option("-o,--out", q.out, "Output JSQQ path")->required();
  quantize->add_option("--bits", q.bits, "Uniform bit width for every cell");
  quantize->add_option("--policy", q.policy, "Comma-separated bit width per cell");
  quantize->add_option("-k,--bucket-size", q.bucket, "Bucket size")->capture_default_str();
  quantize->add_option("--exempt-name", q.exempt_names, "Keep this tensor at full precision");
  quantize->add_option("--exempt-cell", q.exempt_cells, "Keep this cell at full precision");

  std::string dq_in, dq_out;
  int dq_width = 64;
  auto* dequantize = app.add_subcommand("dequantize", "Expand a JSQQ model back to JSQW");
  dequantize->add_option("model", dq_in, "Input JSQQ model")->required();
  dequantize->add_option("-o,--out", dq_out, "Output JSQW path")->required();
  dequantize->add_option("--width", dq_width, "Float width of the output (16, 32, 64)")
      ->capture_default_str();

  std::string config, out_dir, seed_policy;
  std::uint64_t seed = 0;
  unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  auto* search = app.add_subcommand("search", "Joint architecture and policy search");
  search->add_option("config", config, "Run configuration JSON")->required();
  search->add_option("--seed", seed, "Master seed")->required();
  search->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  std::string sp_model;
  auto* search_policy = app.add_subcommand("search-policy", "Policy-only search on a pretrained model");
  search_policy->add_option("model", sp_model, "Pretrained JSQW model with cell tags")->required();
  search_policy->add_option("config", config, "Run configuration JSON")->required();
  search_policy->add_option("--seed", seed, "Master seed")->required();
  search_policy->add_option("--seed-policy", seed_policy, "Comma-separated policy for the initial population");
  search_policy->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  EvalArgs e;
  auto* eval = app.add_subcommand("eval", "Evaluate a JSQQ artifact or train and evaluate a genome");
  eval->add_option("config", e.config, "Run configuration JSON (dataset, training, target)")->required();
  eval->add_option("model", e.model, "JSQQ model written by search");
  eval->add_option("--genome", e.genome, "Genome JSON to train and quantize");
  eval->add_flag("--evaluation-profile", e.evaluation_profile, "Train at the evaluation profile");
  eval->add_option("--save-float", e.save_float, "Write the trained float model (JSQW)");
  eval->add_option("--save-quantized", e.save_quantized, "Write the quantized model (JSQQ)");

  std::vector<std::string> histories;
  std::string pareto_out;
  auto* pareto = app.add_subcommand("pareto", "Non-dominated (accuracy, size) points of histories");
  pareto->add_option("history", histories, "History JSON-lines files")->required();
  pareto->add_option("-o,--out", pareto_out, "CSV output (stdout when omitted)");

  auto* sweep_cmd = app.add_subcommand("sweep", "Population/sample size sweep");
  sweep_cmd->add_option("config", config, "Run configuration JSON with a grid")->required();
  sweep_cmd->add_option("--seed", seed, "Master seed")->required();
  sweep_cmd->add_option("-o,--out-dir", out_dir, "Output directory")->required();
  sweep_cmd->add_option("--threads", threads, "Concurrent runs")->capture_default_str();

  auto* report = app.add_subcommand("report", "Curve and Pareto tables from histories");
  report->add_option("history", histories, "History JSON-lines files")->required();
  report->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*quantize) return cmd_quantize(q);
    if (*dequantize) return cmd_dequantize(dq_in, dq_out, dq_width);
    if (*search) return cmd_search(config, seed, out_dir);
    if (*search_policy) return cmd_search_policy(sp_model, config, seed, seed_policy, out_dir);
    if (*eval) return cmd_eval(e);
    if (*pareto) return cmd_pareto(histories, pareto_out);
    if (*sweep_cmd) return cmd_sweep(config, seed, out_dir, threads);
    if (*report) return cmd_report(histories, out_dir);
  } catch (const InvalidArgument& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const IoError& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return 1;
  }
  return 2;
}
