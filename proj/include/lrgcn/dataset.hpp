#pragma once
// Dataset loading/splitting and coverage-preserving sparse subset
// construction. Dev/test splits are never sparsified.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lrgcn/kg.hpp"

namespace lrgcn {

struct DatasetBundle {
    std::vector<StringTriple> train;
    std::vector<StringTriple> dev;
    std::vector<StringTriple> test;
    std::string name;
    std::string source_path;
};

// Expects train.txt, valid.txt, test.txt under dir. Validates that dev and
// test reference only entities/relations present in the train vocabulary;
// violations raise a coverage error listing the offenders.
DatasetBundle load_dataset(const std::filesystem::path& dir);

// Returns floor(fraction * |train|) triples covering every entity and
// every relation of the input, deterministically for a given seed:
//   1. covering pass over uncovered entities then relations in id order,
//      each picking a uniformly random incident triple;
//   2. remainder filled by uniform sampling without replacement.
// Output preserves the input order of the chosen triples. Throws if the
// fraction is out of (0, 1] or the covering set alone exceeds the target.
std::vector<StringTriple> sparsify(const std::vector<StringTriple>& train,
                                   double fraction, std::uint64_t seed);

}  // namespace lrgcn
