#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tricode/assembly.hpp"
#include "tricode/ast.hpp"
#include "tricode/bpe.hpp"
#include "tricode/encoder.hpp"
#include "tricode/errors.hpp"
#include "tricode/evaluation.hpp"
#include "tricode/manifest.hpp"
#include "tricode/objectives.hpp"
#include "tricode/synth.hpp"
#include "tricode/training.hpp"

namespace {

using nlohmann::ordered_json;
using namespace tricode;

// TRICODE_OUT_DIR prefixes relative output paths; inputs are untouched.
std::string resolve_out(const std::string& path) {
  if (path.empty()) {
    return path;
  }
  const char* dir = std::getenv("TRICODE_OUT_DIR");
  if (dir == nullptr || *dir == '\0' ||
      std::filesystem::path(path).is_absolute()) {
    return path;
  }
  return (std::filesystem::path(dir) / path).string();
}

// Files created by the running command; removed unless the command commits,
// so a failed run leaves no partial outputs behind.
class OutputGuard {
 public:
  ~OutputGuard() {
    if (committed_) {
      return;
    }
    for (const std::string& path : paths_) {
      std::error_code ec;
      std::filesystem::remove(path, ec);
    }
  }
  void track(const std::string& path) {
    if (!path.empty()) {
      paths_.push_back(path);
    }
  }
  void commit() { committed_ = true; }

 private:
  std::vector<std::string> paths_;
  bool committed_ = false;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw FormatError("cannot read " + path);
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw FormatError("cannot write " + path);
  }
  out << content;
  if (!out) {
    throw FormatError("short write to " + path);
  }
}

std::string parent_dir(const std::string& path) {
  return std::filesystem::path(path).parent_path().string();
}

std::vector<std::string> active_objectives(const TrainConfig& config) {
  std::vector<std::string> out;
  if (config.mmlm) out.push_back("mmlm");
  if (config.ip) out.push_back("ip");
  if (config.tep) out.push_back("tep");
  if (config.mcl) out.push_back("mcl");
  return out;
}

// Shared by the model-loading commands: budgets and vocab path come from the
// checkpoint's stored train config unless flags override them.
struct EvalOptions {
  std::string corpus;
  std::string checkpoint;
  std::string vocab;
  std::string out;
  bool cosine = false;
  uint64_t seed = 0;
  Budgets budgets;
  bool budgets_overridden = false;
};

struct PretrainOptions {
  std::string corpus;
  std::string vocab;
  std::string out;
  std::string log;
  std::string resume;
  ModelConfig model;
  std::string pooling = "cls";
  TrainConfig train;
};

struct InspectOptions {
  std::string corpus;
  std::string vocab;
  std::string out;
  int64_t step = 1;
  TrainConfig train;
};

void run_parse(const std::string& in, const std::string& out_path,
               bool pretty, uint64_t seed) {
  const AstNode root = parse(read_file(in));
  const std::string json_text = ast_to_json_text(root, pretty);
  if (out_path.empty()) {
    std::cout << json_text << "\n";
    return;
  }
  const std::string out = resolve_out(out_path);
  OutputGuard guard;
  guard.track(out);
  write_file(out, json_text + "\n");

  RunManifest manifest;
  manifest.command = "parse";
  manifest.seed = seed;
  ordered_json config;
  config["in"] = in;
  config["out"] = out;
  config["pretty"] = pretty;
  manifest.config_json = config.dump();
  manifest.outputs = {out};
  guard.track(manifest_path_for(out));
  write_run_manifest(manifest, manifest_path_for(out));
  guard.commit();
}

void run_train_bpe(const std::string& corpus_path, int target_size,
                   const std::string& out_path, uint64_t seed) {
  const auto examples = load_corpus_jsonl(corpus_path);
  const std::string base = parent_dir(corpus_path);
  const Vocab vocab = Vocab::train(collect_corpus_surfaces(examples, base),
                                   target_size,
                                   collect_corpus_kinds(examples, base));
  const std::string out = resolve_out(out_path);
  OutputGuard guard;
  guard.track(out);
  vocab.save(out);

  RunManifest manifest;
  manifest.command = "train-bpe";
  manifest.seed = seed;
  ordered_json config;
  config["corpus"] = corpus_path;
  config["target_size"] = target_size;
  config["vocab_size"] = vocab.size();
  config["out"] = out;
  manifest.config_json = config.dump();
  manifest.outputs = {out};
  guard.track(manifest_path_for(out));
  write_run_manifest(manifest, manifest_path_for(out));
  guard.commit();
}

void run_pretrain(PretrainOptions& opt) {
  const auto examples = load_corpus_jsonl(opt.corpus);
  const std::string base = parent_dir(opt.corpus);
  const Vocab vocab = Vocab::load(opt.vocab);
  std::vector<ModalTriple> triples;
  triples.reserve(examples.size());
  for (const CorpusExample& example : examples) {
    triples.push_back(build_triple(example, vocab, base));
  }

  opt.model.encoder.vocab_size = vocab.size();
  opt.model.pooling = pooling_from_name(opt.pooling);
  opt.model.validate();
  opt.train.validate();

  Model model(opt.model);
  model.init(opt.train.seed);
  Trainer trainer(model, vocab, std::move(triples), opt.train);
  if (!opt.resume.empty()) {
    trainer.load_checkpoint(opt.resume);
  }

  const std::string out = resolve_out(opt.out);
  const std::string log = resolve_out(opt.log);
  OutputGuard guard;
  guard.track(out);
  guard.track(log);
  trainer.run(log, out);

  RunManifest manifest;
  manifest.command = "pretrain";
  manifest.seed = opt.train.seed;
  ordered_json config;
  config["corpus"] = opt.corpus;
  config["vocab"] = opt.vocab;
  config["model"] = ordered_json::parse(model_config_to_json(opt.model));
  config["train"] = ordered_json::parse(train_config_to_json(opt.train));
  if (!opt.resume.empty()) {
    config["resume"] = opt.resume;
  }
  manifest.config_json = config.dump();
  manifest.objectives = active_objectives(opt.train);
  manifest.outputs = {out};
  if (!log.empty()) {
    manifest.outputs.push_back(log);
  }
  guard.track(manifest_path_for(out));
  write_run_manifest(manifest, manifest_path_for(out));
  guard.commit();
}

void run_eval(const EvalOptions& opt, bool clone) {
  const auto examples = load_corpus_jsonl(opt.corpus);
  const std::string base = parent_dir(opt.corpus);
  const Vocab vocab = Vocab::load(opt.vocab);
  Model model = model_from_checkpoint(opt.checkpoint);

  Budgets budgets = opt.budgets;
  if (!opt.budgets_overridden) {
    budgets = train_config_from_checkpoint(opt.checkpoint).budgets;
  }

  std::vector<ModalTriple> triples;
  std::vector<int> cluster_ids;
  triples.reserve(examples.size());
  for (const CorpusExample& example : examples) {
    triples.push_back(build_triple(example, vocab, base));
    cluster_ids.push_back(example.cluster_id);
  }

  const MetricReport report =
      clone ? eval_clone(model, triples, cluster_ids, budgets, opt.cosine)
            : eval_search(model, triples, budgets, opt.cosine);
  const std::string report_text = metric_report_json(report);
  std::cout << report_text << "\n";

  if (opt.out.empty()) {
    return;
  }
  const std::string out = resolve_out(opt.out);
  OutputGuard guard;
  guard.track(out);
  write_file(out, report_text + "\n");

  RunManifest manifest;
  manifest.command = clone ? "eval-clone" : "eval-search";
  manifest.seed = opt.seed;
  ordered_json config;
  config["corpus"] = opt.corpus;
  config["checkpoint"] = opt.checkpoint;
  config["vocab"] = opt.vocab;
  config["cosine"] = opt.cosine;
  config["budget_nl"] = budgets.nl;
  config["budget_pl"] = budgets.pl;
  config["budget_ast"] = budgets.ast;
  manifest.config_json = config.dump();
  manifest.outputs = {out};
  guard.track(manifest_path_for(out));
  write_run_manifest(manifest, manifest_path_for(out));
  guard.commit();
}

const char* mask_action_name(MaskPlan::Action action) {
  switch (action) {
    case MaskPlan::Action::Mask: return "mask";
    case MaskPlan::Action::Random: return "random";
    default: return "keep";
  }
}

void run_inspect(InspectOptions& opt) {
  const auto examples = load_corpus_jsonl(opt.corpus);
  const std::string base = parent_dir(opt.corpus);
  const Vocab vocab = Vocab::load(opt.vocab);
  std::vector<ModalTriple> triples;
  triples.reserve(examples.size());
  for (const CorpusExample& example : examples) {
    triples.push_back(build_triple(example, vocab, base));
  }

  opt.train.validate();
  ModelConfig model_config;
  model_config.encoder.vocab_size = vocab.size();
  Model model(model_config);  // plans never touch the weights
  Trainer trainer(model, vocab, std::move(triples), opt.train);
  const Trainer::BatchInspection batch = trainer.inspect_step(opt.step);

  ordered_json j;
  j["step"] = batch.step;
  j["paired"] = batch.paired;
  j["scheme"] = batch.scheme;
  j["examples"] = batch.examples;
  ordered_json rows = ordered_json::array();
  for (size_t i = 0; i < batch.masks.size(); ++i) {
    ordered_json row;
    row["example"] = batch.examples[i];
    ordered_json mask;
    mask["positions"] = batch.masks[i].positions;
    ordered_json actions = ordered_json::array();
    for (MaskPlan::Action action : batch.masks[i].actions) {
      actions.push_back(mask_action_name(action));
    }
    mask["actions"] = std::move(actions);
    mask["replacements"] = batch.masks[i].replacements;
    mask["original_ids"] = batch.masks[i].original_ids;
    row["mask"] = std::move(mask);
    row["identifier_labels"] = batch.identifier_labels[i];
    ordered_json edges;
    ordered_json pairs = ordered_json::array();
    for (const auto& [a, b] : batch.edge_plans[i].pairs) {
      pairs.push_back(ordered_json::array({a, b}));
    }
    edges["pairs"] = std::move(pairs);
    edges["labels"] = batch.edge_plans[i].labels;
    row["edges"] = std::move(edges);
    rows.push_back(std::move(row));
  }
  j["batch"] = std::move(rows);
  const std::string dump = j.dump(2);

  if (opt.out.empty()) {
    std::cout << dump << "\n";
    return;
  }
  const std::string out = resolve_out(opt.out);
  OutputGuard guard;
  guard.track(out);
  write_file(out, dump + "\n");

  RunManifest manifest;
  manifest.command = "inspect-batch";
  manifest.seed = opt.train.seed;
  ordered_json config;
  config["corpus"] = opt.corpus;
  config["vocab"] = opt.vocab;
  config["step"] = opt.step;
  config["train"] = ordered_json::parse(train_config_to_json(opt.train));
  manifest.config_json = config.dump();
  manifest.outputs = {out};
  guard.track(manifest_path_for(out));
  write_run_manifest(manifest, manifest_path_for(out));
  guard.commit();
}

// The vendored CLI11 only processes config files attached to the root app, so
// subcommand settings files are applied by hand. Runs inside the --config
// option's validation pass, before required-option checks, so a file can
// satisfy required settings. Explicitly passed flags win over file values.
void apply_config_file(CLI::App* cmd, const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw CLI::ValidationError("cannot read " + path);
  }
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string text = CLI::detail::trim_copy(line);
    if (text.empty() || text.front() == '#' || text.front() == ';') {
      continue;
    }
    const std::string where = path + ":" + std::to_string(line_no);
    const auto eq = text.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw CLI::ValidationError(where + ": expected key=value");
    }
    const std::string key = CLI::detail::trim_copy(text.substr(0, eq));
    std::string value = CLI::detail::trim_copy(text.substr(eq + 1));
    CLI::detail::remove_quotes(value);
    CLI::Option* opt = cmd->get_option_no_throw("--" + key);
    if (opt == nullptr) {
      opt = cmd->get_option_no_throw(key);
    }
    if (opt == nullptr) {
      throw CLI::ValidationError(where + ": unknown setting \"" + key + "\"");
    }
    if (opt->count() > 0) {
      continue;
    }
    if (opt->get_expected_min() == 0) {
      opt->add_result(opt->get_flag_value("--" + key, value));
    } else {
      opt->add_result(value);
    }
    opt->run_callback();
  }
}

void add_config_option(CLI::App* cmd, std::string& slot) {
  cmd->add_option("--config", slot, "Settings file (key=value; flags win)")
      ->check(CLI::ExistingFile)
      ->each([cmd](const std::string& path) { apply_config_file(cmd, path); });
}

void add_budget_flags(CLI::App* sub, Budgets* budgets) {
  sub->add_option("--budget-nl", budgets->nl, "Comment-token budget");
  sub->add_option("--budget-pl", budgets->pl, "Code-token budget");
  sub->add_option("--budget-ast", budgets->ast, "Tree-token budget");
}

void add_train_flags(CLI::App* sub, TrainConfig* train) {
  sub->add_option("--steps", train->steps, "Optimizer steps");
  sub->add_option("--batch-size", train->batch_size, "Examples per step");
  sub->add_option("--lr", train->learning_rate, "Peak learning rate");
  sub->add_option("--l2", train->l2_lambda, "Weight-decay coefficient");
  sub->add_option("--seed", train->seed, "Base random seed");
  sub->add_flag("--mmlm,!--no-mmlm", train->mmlm, "Masked-token objective");
  sub->add_flag("--ip,!--no-ip", train->ip, "Identifier objective");
  sub->add_flag("--tep,!--no-tep", train->tep, "Tree-edge objective");
  sub->add_flag("--mcl,!--no-mcl", train->mcl, "Contrastive objective");
  sub->add_flag("--sum-losses", train->sum_losses,
                "Sum token losses instead of averaging");
  sub->add_option("--tep-negatives", train->tep_negatives_per_positive,
                  "Sampled non-edges per true edge");
  sub->add_flag("--tep-full-pairs", train->tep_full_pairs,
                "Score every node pair instead of sampling");
  sub->add_option("--clip-norm", train->clip_norm,
                  "Global gradient-norm ceiling (0 disables)");
  sub->add_option("--warmup-steps", train->warmup_steps,
                  "Linear learning-rate warmup");
  sub->add_option("--checkpoint-every", train->checkpoint_every,
                  "Mid-run checkpoint interval (0 disables)");
  add_budget_flags(sub, &train->budgets);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Syntax-aware multi-modal code-representation pipeline"};
  app.require_subcommand(1);

  // parse
  std::string parse_in, parse_out;
  bool parse_pretty = false;
  uint64_t parse_seed = 0;
  std::string parse_cfg, bpe_cfg, pre_cfg, search_cfg, clone_cfg, inspect_cfg;
  CLI::App* parse_cmd =
      app.add_subcommand("parse", "Parse mini-language source to tree JSON");
  parse_cmd->add_option("--in", parse_in, "Source file")
      ->required()
      ->check(CLI::ExistingFile);
  parse_cmd->add_option("--out", parse_out, "Output file (default stdout)");
  parse_cmd->add_flag("--pretty", parse_pretty, "Indented JSON");
  parse_cmd->add_option("--seed", parse_seed, "Recorded in the manifest");
  add_config_option(parse_cmd, parse_cfg);
  parse_cmd->callback(
      [&] { run_parse(parse_in, parse_out, parse_pretty, parse_seed); });

  // train-bpe
  std::string bpe_corpus, bpe_out;
  int bpe_target = 512;
  uint64_t bpe_seed = 0;
  CLI::App* bpe_cmd =
      app.add_subcommand("train-bpe", "Fit a subword vocabulary to a corpus");
  bpe_cmd->add_option("--corpus", bpe_corpus, "Corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  bpe_cmd->add_option("--target-size", bpe_target, "Vocabulary size cap");
  bpe_cmd->add_option("--out", bpe_out, "Vocabulary file")->required();
  bpe_cmd->add_option("--seed", bpe_seed, "Recorded in the manifest");
  add_config_option(bpe_cmd, bpe_cfg);
  bpe_cmd->callback(
      [&] { run_train_bpe(bpe_corpus, bpe_target, bpe_out, bpe_seed); });

  // pretrain
  PretrainOptions pre;
  CLI::App* pre_cmd =
      app.add_subcommand("pretrain", "Run the pre-training objectives");
  pre_cmd->add_option("--corpus", pre.corpus, "Corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  pre_cmd->add_option("--vocab", pre.vocab, "Vocabulary file")
      ->required()
      ->check(CLI::ExistingFile);
  pre_cmd->add_option("--out", pre.out, "Checkpoint file")->required();
  pre_cmd->add_option("--log", pre.log, "Per-step loss JSONL");
  pre_cmd->add_option("--resume", pre.resume, "Checkpoint to continue from")
      ->check(CLI::ExistingFile);
  pre_cmd->add_option("--layers", pre.model.encoder.layers, "Encoder depth");
  pre_cmd->add_option("--hidden", pre.model.encoder.hidden_size,
                      "Hidden width");
  pre_cmd->add_option("--heads", pre.model.encoder.heads, "Attention heads");
  pre_cmd->add_option("--ffn", pre.model.encoder.ffn_size,
                      "Feed-forward width");
  pre_cmd->add_option("--max-positions", pre.model.encoder.max_positions,
                      "Positional-table length");
  pre_cmd->add_option("--dropout", pre.model.encoder.dropout_rate,
                      "Dropout rate");
  pre_cmd->add_option("--proj-dim", pre.model.projection_dim,
                      "Contrastive projection width");
  pre_cmd->add_option("--pooling", pre.pooling, "cls or mean");
  add_train_flags(pre_cmd, &pre.train);
  add_config_option(pre_cmd, pre_cfg);
  pre_cmd->callback([&] { run_pretrain(pre); });

  // eval-search / eval-clone
  EvalOptions search, clone;
  CLI::App* search_cmd = app.add_subcommand(
      "eval-search", "Comment-to-code retrieval (mean reciprocal rank)");
  CLI::App* clone_cmd = app.add_subcommand(
      "eval-clone", "Clone retrieval (mean average precision at R)");
  for (auto [cmd, opt] : {std::pair{search_cmd, &search},
                          std::pair{clone_cmd, &clone}}) {
    cmd->add_option("--corpus", opt->corpus, "Corpus JSONL")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", opt->checkpoint, "Model checkpoint")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--vocab", opt->vocab, "Vocabulary file")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", opt->out, "Report file (always printed)");
    cmd->add_flag("--cosine", opt->cosine, "Rank by cosine instead of dot");
    cmd->add_option("--seed", opt->seed, "Recorded in the manifest");
    cmd->add_option("--budget-nl", opt->budgets.nl, "Comment-token budget")
        ->each([opt](const std::string&) { opt->budgets_overridden = true; });
    cmd->add_option("--budget-pl", opt->budgets.pl, "Code-token budget")
        ->each([opt](const std::string&) { opt->budgets_overridden = true; });
    cmd->add_option("--budget-ast", opt->budgets.ast, "Tree-token budget")
        ->each([opt](const std::string&) { opt->budgets_overridden = true; });
  }
  add_config_option(search_cmd, search_cfg);
  add_config_option(clone_cmd, clone_cfg);
  search_cmd->callback([&] { run_eval(search, false); });
  clone_cmd->callback([&] { run_eval(clone, true); });

  // inspect-batch
  InspectOptions inspect;
  CLI::App* inspect_cmd = app.add_subcommand(
      "inspect-batch", "Dump one training step's batch plan as JSON");
  inspect_cmd->add_option("--corpus", inspect.corpus, "Corpus JSONL")
      ->required()
      ->check(CLI::ExistingFile);
  inspect_cmd->add_option("--vocab", inspect.vocab, "Vocabulary file")
      ->required()
      ->check(CLI::ExistingFile);
  inspect_cmd->add_option("--step", inspect.step, "Step number (from 1)");
  inspect_cmd->add_option("--out", inspect.out, "Output file (default stdout)");
  add_train_flags(inspect_cmd, &inspect.train);
  add_config_option(inspect_cmd, inspect_cfg);
  inspect_cmd->callback([&] { run_inspect(inspect); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
