#include "tricode/synth.hpp"

#include <numeric>
#include <string>
#include <vector>

#include "tricode/errors.hpp"
#include "tricode/rng.hpp"

namespace tricode {

namespace {

const char* kAdjectives[] = {
    "amber", "brisk", "calm",   "dusty", "eager", "faint",
    "glad",  "hollow", "ivory", "jolly", "keen",  "lunar",
    "mellow", "noble", "olive", "plump", "quiet", "rustic",
    "sleek", "tidy",  "urban",  "vivid", "wavy",  "zesty"};
const char* kNouns[] = {
    "melon",  "ticket", "orbit",  "pixel",  "ledger", "badge",
    "canyon", "drum",   "ember",  "falcon", "grove",  "harbor",
    "island", "jacket", "kettle", "lantern", "meadow", "nugget",
    "otter",  "parcel", "quarry", "ribbon", "saddle", "tunnel"};
constexpr int kAdjCount = 24;
constexpr int kNounCount = 24;

// Stem-free identifiers for renamed clones; names carry no cluster signal.
const char* kRenames[] = {"alpha", "bravo", "copper", "delta", "echo",
                          "forge", "gamma", "hazel",  "index", "juror",
                          "krill", "lotus", "micro",  "nylon", "oxide",
                          "prism"};
constexpr int kRenameCount = 16;

struct Template {
  const char* op;  // function-name prefix
  // Placeholders: {F} function name, {V} value variable, {A} adjective,
  // {N} noun, {1}/{2} small integer constants.
  const char* code;
  const char* comments[3];
};

const Template kTemplates[] = {
    {"scale",
     "def {F}(value):\n    {V} = value * {1}\n    return {V} + {2}\n",
     {"scale the {A} {N} value by a fixed step",
      "apply a fixed scaling to the {A} {N} value",
      "multiply the {A} {N} value and shift it"}},
    {"clip",
     "def {F}(reading):\n    if reading <= {1}:\n        return reading\n"
     "    return {1}\n",
     {"clip the {A} {N} reading to an upper bound",
      "cap the {A} {N} reading at a limit",
      "bound the {A} {N} reading from above"}},
    {"combine",
     "def {F}(left, right):\n    {V} = left + right\n    return {V}\n",
     {"combine two {A} {N} parts into one total",
      "merge a pair of {A} {N} parts",
      "sum the {A} {N} pieces together"}},
    {"tag",
     "def {F}(record):\n    label = \"{A}_{N}\"\n"
     "    return attach(record, label)\n",
     {"tag the {A} {N} record with a label",
      "attach a label to the {A} {N} record",
      "mark the {A} {N} record"}},
    {"grow",
     "def {F}(count, steps):\n    {V} = count + steps * {1}\n"
     "    return {V}\n",
     {"grow the {A} {N} count by scaled steps",
      "increase the {A} {N} count step by step",
      "raise the {A} {N} count with each step"}},
    {"measure",
     "def {F}(low, high):\n    {V} = high + -low\n    return {V} * {1}\n",
     {"measure the {A} {N} span between ends",
      "find the width of the {A} {N} span",
      "compute the {A} {N} span length"}},
};
constexpr int kTemplateCount = 6;

std::string expand(const std::string& pattern, const std::string& fn,
                   const std::string& var, const std::string& adj,
                   const std::string& noun, int c1, int c2) {
  std::string out;
  out.reserve(pattern.size() + 32);
  for (size_t i = 0; i < pattern.size(); ++i) {
    if (pattern[i] != '{' || i + 2 >= pattern.size() || pattern[i + 2] != '}') {
      out += pattern[i];
      continue;
    }
    switch (pattern[i + 1]) {
      case 'F': out += fn; break;
      case 'V': out += var; break;
      case 'A': out += adj; break;
      case 'N': out += noun; break;
      case '1': out += std::to_string(c1); break;
      case '2': out += std::to_string(c2); break;
      default:
        out += pattern[i];
        continue;
    }
    i += 2;
  }
  return out;
}

}  // namespace

std::vector<CorpusExample> synth_corpus(const SynthConfig& config) {
  if (config.count < 1) {
    throw ConfigError("synth corpus: count must be positive");
  }
  if (config.cluster_size < 1) {
    throw ConfigError("synth corpus: cluster_size must be positive");
  }
  if (config.count % config.cluster_size != 0) {
    throw ConfigError("synth corpus: count " + std::to_string(config.count) +
                      " is not a multiple of cluster_size " +
                      std::to_string(config.cluster_size));
  }
  if (config.cluster_size > kRenameCount + 1) {
    throw ConfigError("synth corpus: at most " +
                      std::to_string(kRenameCount + 1) +
                      " distinctly named clones per cluster");
  }
  const int clusters = config.count / config.cluster_size;
  if (clusters > kAdjCount * kNounCount) {
    throw ConfigError("synth corpus: at most " +
                      std::to_string(kAdjCount * kNounCount) +
                      " clusters per corpus");
  }

  Rng rng(derive_seed(config.seed, {seed_tag::kSynth}));
  std::vector<int> stems(static_cast<size_t>(kAdjCount * kNounCount));
  std::iota(stems.begin(), stems.end(), 0);
  rng.shuffle(stems);

  std::vector<CorpusExample> out;
  out.reserve(static_cast<size_t>(config.count));
  for (int c = 0; c < clusters; ++c) {
    const std::string adj = kAdjectives[stems[static_cast<size_t>(c)] / kNounCount];
    const std::string noun = kNouns[stems[static_cast<size_t>(c)] % kNounCount];
    const std::string stem = adj + "_" + noun;
    const Template& tpl = kTemplates[rng.below(kTemplateCount)];
    const int c1 = 2 + static_cast<int>(rng.below(8));
    const int c2 = 2 + static_cast<int>(rng.below(8));
    const int variant0 = static_cast<int>(rng.below(3));

    for (int k = 0; k < config.cluster_size; ++k) {
      // Clone zero keeps the stem names; later clones rename every
      // identifier while structure, constants, and comment stay put.
      const std::string var = k == 0 ? stem : kRenames[k - 1];
      const std::string fn = std::string(tpl.op) + "_" + var;
      CorpusExample example;
      example.code = expand(tpl.code, fn, var, adj, noun, c1, c2);
      if (config.paired) {
        example.has_comment = true;
        example.comment =
            expand(tpl.comments[(variant0 + k) % 3], fn, var, adj, noun, c1, c2);
      }
      if (config.cluster_size > 1) {
        example.cluster_id = c;
      }
      out.push_back(std::move(example));
    }
  }
  return out;
}

}  // namespace tricode
