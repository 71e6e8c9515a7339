#pragma once

#include "degas/glo.hpp"
#include "degas/io.hpp"

namespace degas {

/// Complete search state: config, epoch, weights, batch-norm statistics, α,
/// latents with momentum, optimizer state, RNG state, data split and history.
/// Loading then continuing training is bitwise identical to never stopping.
Bytes save_search_state(const SearchState& state);
SearchState load_search_state(const Bytes& bytes);

/// Same for genotype training; the genotype text is embedded.
Bytes save_training_state(const TrainState& state);
TrainState load_training_state(const Bytes& bytes);

}  // namespace degas
