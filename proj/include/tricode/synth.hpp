#pragma once

#include <cstdint>
#include <vector>

#include "tricode/assembly.hpp"

namespace tricode {

// Controlled-gold corpus generation: each example is a templated
// mini-language function whose identifiers share word stems with its
// comment, so comment-to-code retrieval has a learnable signal.  With
// cluster_size > 1, examples come in groups of variable-renamed clones
// sharing a cluster id and their structure.
struct SynthConfig {
  int count = 64;
  uint64_t seed = 0;
  bool paired = true;    // attach comments
  int cluster_size = 1;  // clones per cluster; 1 leaves cluster ids unset
};

std::vector<CorpusExample> synth_corpus(const SynthConfig& config);

}  // namespace tricode
