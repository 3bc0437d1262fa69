#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>

namespace pcn {

// Barrier-delimited phases. Setup covers state construction (feedforward
// initialization, clamping) and is accounted apart from per-update cost.
enum class PhaseKind : std::size_t { Errors, Values, Weights, Forward, Backward, Setup, Count };

std::string to_string(PhaseKind kind);

// Instrumented cost counters.
//
// mm_count counts propagation products: predictions θ·f(x), error transport
// θᵀ·ε, and the BP forward/backward recursions. Weight-gradient products
// ε·f(x)ᵀ are tallied separately in grad_products; like elementwise work they
// are not part of the per-update MM/SMM figures. A phase in which at least one
// propagation product runs counts as one SMM.
struct StepLedger {
    std::uint64_t mm_count = 0;
    std::uint64_t smm_count = 0;
    std::uint64_t weight_updates = 0;
    std::uint64_t grad_products = 0;
    std::uint64_t setup_mm = 0;
    std::uint64_t setup_smm = 0;
    std::array<std::int64_t, static_cast<std::size_t>(PhaseKind::Count)> wall_ns{};

    std::int64_t total_wall_ns() const noexcept;

    StepLedger& operator+=(const StepLedger& o) noexcept;
    friend StepLedger operator-(StepLedger a, const StepLedger& b) noexcept;
    // Compares counters only; timings never compare equal across runs.
    bool same_counts(const StepLedger& o) const noexcept;
};

}  // namespace pcn
