#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "gridengine/model.hpp"

namespace gridengine {

struct IslandPartition {
    /// Bus ids per island; buses within an island keep model order.
    std::vector<std::vector<std::string>> islands;
    /// True when the island holds an in-service Slack bus.
    std::vector<bool> energized;
};

/// Connected components over in-service buses and branches. Islands are
/// ordered by their smallest bus id (natural order, see id_less).
IslandPartition find_islands(const NetworkModel& net);

/// Island number for every model bus (-1 for out-of-service buses), using the
/// same island numbering as find_islands.
std::vector<int> island_of_buses(const NetworkModel& net);

/// Natural ordering of ids: purely numeric ids compare by value and sort
/// before non-numeric ones, the rest compare lexicographically.
bool id_less(std::string_view a, std::string_view b);

}  // namespace gridengine
