#pragma once

#include <map>
#include <stdexcept>
#include <string>

// Independent evaluator for skill source text, used as a test oracle. It
// shares no code with the library: it reads the text line by line and
// evaluates expressions while parsing them, without building a tree.
namespace ref {

struct Failure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Variable names may be abstract names or lane-indexed aliases.
using Bindings = std::map<std::string, double>;

// Runs the program from value = 0 and returns the final accumulator.
// Throws Failure on any error (syntax, unknown name, zero divisor,
// non-finite result, bad builtin use).
double run(const std::string& source, const Bindings& vars);

struct Counts {
  int nodes = 0;
  int depth = 0;
};

// Node count and branch depth under the library's counting convention.
Counts count(const std::string& source);

}  // namespace ref
