#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "chainblock/page_graph.hpp"
#include "oracles.hpp"

namespace gen {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
    bool chance(double p) { return static_cast<double>(engine_() >> 11) * 0x1.0p-53 < p; }
    template <class T>
    const T& pick(const std::vector<T>& v) { return v[below(v.size())]; }

private:
    std::mt19937_64 engine_;
};

struct RulePair {
    std::string rule;
    oracle::Request request;
};

// A random rule over a small vocabulary, plus a request biased to come
// close to matching it.
RulePair random_rule_pair(Rng& rng);
std::string random_url(Rng& rng);

// Random page graph with at most `max_nodes` nodes: parser-built skeleton,
// scripts inserting elements and scripts, image requests, late
// re-insertions, orphan elements, and occasionally a conflicting creator
// or an insertion cycle.
chainblock::PageGraph random_graph(Rng& rng, std::size_t max_nodes);

// One script whose own insertions cover `own_regions` distinct parser
// regions, optionally inserting a child script covering `child_regions`.
struct SafetyCase {
    chainblock::PageGraph graph;
    chainblock::NodeId parent;
    std::optional<chainblock::NodeId> child;
};
SafetyCase safety_case(std::size_t own_regions, std::size_t child_regions);

}  // namespace gen
