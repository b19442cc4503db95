#include <vector>

#include "nl2ltl/error.hpp"
#include "nl2ltl/ltl.hpp"

namespace nl2ltl::ltl {
namespace {

// Truth value of `node` at every position, filled back to front.
std::vector<char> satisfaction(const Node& node, const Trace& trace) {
  const auto n = trace.size();
  std::vector<char> out(n, 0);
  switch (node.kind) {
    case NodeKind::Atom:
      for (std::size_t i = 0; i < n; ++i) out[i] = trace.at(i).count(node.text) ? 1 : 0;
      return out;
    case NodeKind::Unary: {
      const auto sub = satisfaction(node.children[0], trace);
      if (node.text == "!") {
        for (std::size_t i = 0; i < n; ++i) out[i] = !sub[i];
      } else if (node.text == "X") {
        for (std::size_t i = 0; i + 1 < n; ++i) out[i] = sub[i + 1];
      } else if (node.text == "F") {
        char acc = 0;
        for (std::size_t i = n; i-- > 0;) out[i] = acc = (acc || sub[i]);
      } else if (node.text == "G") {
        char acc = 1;
        for (std::size_t i = n; i-- > 0;) out[i] = acc = (acc && sub[i]);
      }
      return out;
    }
    case NodeKind::Binary: {
      const auto lhs = satisfaction(node.children[0], trace);
      const auto rhs = satisfaction(node.children[1], trace);
      if (node.text == "&") {
        for (std::size_t i = 0; i < n; ++i) out[i] = lhs[i] && rhs[i];
      } else if (node.text == "|") {
        for (std::size_t i = 0; i < n; ++i) out[i] = lhs[i] || rhs[i];
      } else if (node.text == "->") {
        for (std::size_t i = 0; i < n; ++i) out[i] = !lhs[i] || rhs[i];
      } else if (node.text == "U") {
        char next = 0;
        for (std::size_t i = n; i-- > 0;) out[i] = next = (rhs[i] || (lhs[i] && next));
      }
      return out;
    }
  }
  return out;
}

}  // namespace

Trace::Trace(std::vector<std::set<std::string>> steps) : steps_(std::move(steps)) {
  if (steps_.empty()) throw Error(Errc::InvalidArgument, "trace must have at least one step");
  for (const auto& step : steps_) {
    for (const auto& name : step) {
      if (!parse_ap(name)) throw Error(Errc::InvalidArgument, "trace member '" + name + "' is not an AP");
    }
  }
}

bool evaluate_on_trace(const Node& node, const Trace& trace) { return satisfaction(node, trace).front() != 0; }

bool evaluate_on_trace(const Formula& formula, const Trace& trace) {
  return evaluate_on_trace(formula.ast(), trace);
}

}  // namespace nl2ltl::ltl
