#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hybridpay/simulator.hpp"

namespace hybridpay::sim {

inline constexpr std::size_t kMaxGridCells = 10000;

/// Axes of a fault grid. An empty axis keeps the base scenario's value.
struct GridSpec {
    std::vector<extrail::BankBehavior> payerBank;
    std::vector<extrail::BankBehavior> payeeBank;
    std::vector<std::string> payerStrategies;
    std::vector<std::string> payeeStrategies;
    std::vector<Alternative> alternatives;
    std::vector<std::uint64_t> slowDelays;
    std::vector<std::uint64_t> collateralPayer;
    std::vector<std::uint64_t> collateralPayee;
};

/// Every bank behaviour on both sides, the standard participant strategies
/// and all three alternatives.
GridSpec default_fault_grid();

GridSpec parse_grid(const nlohmann::json& doc);
/// A path to a grid file, or "faults" for the default grid.
GridSpec load_grid(const std::string& pathOrName);

std::size_t grid_size(const GridSpec& grid);

struct Cell {
    ScenarioConfig config;
    nlohmann::json labels;
};

/// Throws GridTooLarge above kMaxGridCells.
std::vector<Cell> expand(const ScenarioConfig& base, const GridSpec& grid);

struct CellSummary {
    nlohmann::json labels;
    std::string outcome;
    std::vector<Violation> violations;
    nlohmann::json verdict;
};

struct Enumeration {
    std::vector<CellSummary> cells;
    std::size_t violating = 0;
};

using CellObserver = std::function<void(const Cell&, const RunResult&)>;

Enumeration enumerate(const ScenarioConfig& base, const GridSpec& grid, std::uint64_t seed = 0,
                      const CellObserver& observer = {});

nlohmann::json enumeration_json(const Enumeration& e);
std::string enumeration_table(const Enumeration& e);

} // namespace hybridpay::sim
