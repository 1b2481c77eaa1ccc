#pragma once

#include <string>

#include "tricode/rng.hpp"

namespace tricode::testing {

// Grammar-directed generator: output is always valid mini-language text.
// A comparison never nests directly inside another comparison (the grammar
// has no chained comparisons), so operands pass allow_cmp=false; parentheses
// and argument lists restart a full expression.
inline std::string gen_expr(Rng& rng, int depth, bool allow_cmp = true) {
  static const char* kNames[] = {"x", "y", "result", "total", "len",
                                 "value", "acc", "n"};
  if (depth <= 0 || rng.below(3) == 0) {
    switch (rng.below(4)) {
      case 0:
        return kNames[rng.below(8)];
      case 1:
        return std::to_string(rng.below(1000));
      case 2:
        return std::to_string(rng.below(100)) + "." +
               std::to_string(rng.below(100));
      default:
        return "\"s" + std::to_string(rng.below(50)) + "\"";
    }
  }
  switch (rng.below(6)) {
    case 0:
      return gen_expr(rng, depth - 1, false) + " + " +
             gen_expr(rng, depth - 1, false);
    case 1:
      return gen_expr(rng, depth - 1, false) + " * " +
             gen_expr(rng, depth - 1, false);
    case 2:
      if (allow_cmp) {
        return gen_expr(rng, depth - 1, false) + " <= " +
               gen_expr(rng, depth - 1, false);
      }
      return gen_expr(rng, depth - 1, false);
    case 3:
      return "-" + gen_expr(rng, depth - 1, false);
    case 4:
      return "(" + gen_expr(rng, depth - 1, true) + ")";
    default: {
      std::string args;
      const uint64_t n_args = rng.below(3);
      for (uint64_t i = 0; i < n_args; ++i) {
        if (i) {
          args += ", ";
        }
        args += gen_expr(rng, depth - 1, true);
      }
      return std::string(kNames[rng.below(8)]) + "(" + args + ")";
    }
  }
}

inline void gen_stmt(Rng& rng, int depth, int indent, std::string* out) {
  const std::string pad(static_cast<size_t>(indent) * 4, ' ');
  switch (depth > 0 ? rng.below(5) : rng.below(3)) {
    case 0:
      *out += pad + "x = " + gen_expr(rng, 2) + "\n";
      break;
    case 1:
      *out += pad + "return " + gen_expr(rng, 2) + "\n";
      break;
    case 2:
      *out += pad + gen_expr(rng, 2) + "\n";
      break;
    case 3: {
      *out += pad + "if " + gen_expr(rng, 1) + ":\n";
      const uint64_t body = 1 + rng.below(2);
      for (uint64_t i = 0; i < body; ++i) {
        gen_stmt(rng, depth - 1, indent + 1, out);
      }
      if (rng.below(2) == 0) {
        *out += pad + "else:\n";
        gen_stmt(rng, depth - 1, indent + 1, out);
      }
      break;
    }
    default: {
      *out += pad + "def helper" + std::to_string(rng.below(10)) + "(a, b):\n";
      const uint64_t body = 1 + rng.below(3);
      for (uint64_t i = 0; i < body; ++i) {
        gen_stmt(rng, depth - 1, indent + 1, out);
      }
      break;
    }
  }
}

inline std::string gen_program(Rng& rng) {
  std::string out;
  const uint64_t stmts = 1 + rng.below(4);
  for (uint64_t i = 0; i < stmts; ++i) {
    gen_stmt(rng, 2, 0, &out);
  }
  return out;
}

}  // namespace tricode::testing
