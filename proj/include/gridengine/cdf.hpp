#pragma once

#include <string>
#include <string_view>

#include "gridengine/model.hpp"

namespace gridengine {

/// Reads an IEEE Common Data Format case (title card, "BUS DATA FOLLOWS"
/// and "BRANCH DATA FOLLOWS" sections, each closed by "-999").
///
/// Powers are converted to per unit on the title-card MVA base, angles to
/// radians. Bus type codes map 3 -> Slack, 2 -> PV, 0/1 -> PQ and 4 ->
/// Isolated. Bus ids are the bus numbers; branch ids are
/// "<tap bus>-<z bus>-<circuit>". Card fields the model does not use are kept
/// in the aux maps under "cdf." keys, and everything after the branch
/// section is kept verbatim in the network aux entry "cdf.trailer".
///
/// Errors (ErrorKind::Parse) name the line and the column span.
NetworkModel parse_cdf(std::string_view text);

/// Emits the fixed-column format. Requires layer >= AcLoadflow and integer
/// bus ids in 1..9999; child networks, out-of-service elements and other
/// things the format cannot carry raise ErrorKind::UnsupportedFeature.
/// Names longer than 12 characters are truncated.
std::string write_cdf(const NetworkModel& net);

}  // namespace gridengine
