#pragma once

#include <vector>

#include "dfsq/design.hpp"
#include "dfsq/distortion.hpp"
#include "dfsq/functions.hpp"
#include "dfsq/sources.hpp"

namespace dfsq {

/// One bit Y = 1{X_2 <= cut} sent from encoder 2 to encoder 1. Encoder 1
/// switches between two quantizers on Y; the decoder recovers Y from
/// encoder 2's index (quantizer 2 pins a boundary at the cut).
struct ChatScenario {
    const SourceModel* source = nullptr;
    const FunctionModel* function = nullptr;
    ThresholdEvent event{1, 0.5};
    std::size_t grid_nodes = 1025;
    std::size_t mc_samples = 1 << 16;
    std::uint64_t seed = 11;

    double branch_prob(int y) const;
};

/// Per-branch profile bundle for variable 1.
struct ChatProfiles {
    SensitivityProfile unconditional;
    SensitivityProfile branch[2];
    double p[2] = {0.0, 0.0};
};

ChatProfiles chat_profiles(const ChatScenario& sc);

/// Fixed-rate distortion factor D_1 (multiplying 2^{-2 R_1}/12) with and
/// without the chat bit: mixture of conditional L^{1/3} quasinorms vs the
/// unconditional quasinorm.
struct ChatConstants {
    double with_chat = 0.0;
    double without_chat = 0.0;
    double ratio() const { return without_chat / with_chat; }
};

ChatConstants fixed_rate_chat_constant(const ChatScenario& sc,
                                       const ChatProfiles& prof);
ChatConstants variable_rate_chat_constant(const ChatScenario& sc,
                                          const ChatProfiles& prof);

struct ChatSimReport {
    Regime regime = Regime::Fixed;
    double rate_per_variable = 0.0;
    double D1_chat = 0.0;
    double D1_nochat = 0.0;
    double se_chat = 0.0;
    double se_nochat = 0.0;
    double ratio = 0.0;          // nochat / chat
    double chat_link_bits = 1.0;  // accounted on the encoder-encoder link
    double charged_rate = 0.0;    // alternative accounting: R_1 + 1
};

/// Measures variable 1's distortion contribution empirically (variable 2 is
/// left unquantized for the estimate, isolating the D_1 term), with common
/// random numbers across the chat and no-chat runs.
ChatSimReport simulate_chat(const ChatScenario& sc, Regime regime,
                            double rate_per_variable, std::size_t samples,
                            std::uint64_t seed, int threads = 0);

}  // namespace dfsq
