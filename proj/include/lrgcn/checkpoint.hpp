#pragma once
// Versioned binary checkpoint holding the predictor, the path policy, and
// optionally the rule store. Round-trips bit-exactly.

#include <cstdint>
#include <filesystem>

#include "lrgcn/path_miner.hpp"
#include "lrgcn/predictor.hpp"
#include "lrgcn/rule_engine.hpp"

namespace lrgcn {

struct Checkpoint {
    PredictorParams predictor;
    PolicyParams policy;
    RuleStore rules;
    bool has_rules = false;
    std::uint64_t seed = 0;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace lrgcn
