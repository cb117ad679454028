#include "rodeepc/common.hpp"

namespace rodeepc {

Error::Error(std::string kind, const std::string& message)
    : std::runtime_error(message), kind_(std::move(kind)) {}

SimulationError::SimulationError(const std::string& m, std::int64_t step)
    : Error("simulation", m + " (step " + std::to_string(step) + ")"), step_(step) {}

}  // namespace rodeepc
