#pragma once

#include "teach/common/json_util.hpp"
#include "teach/esn/esn.hpp"

namespace teach::esn {

inline constexpr int kModelVersion = 1;

json to_json(const EsnConfig& config);

/// Overlays the keys present in `doc` onto `base`; unknown keys are
/// rejected. The result is validated.
EsnConfig config_from_json(const json& doc, EsnConfig base = {});

/// {"kind":"esn","version":1,"config","norm","weights":{"w_in","w","w_out"}}
/// with W as {"rows","cols","triplets":[[i,j,v],...]}.
json model_to_json(const EsnModel& model);

/// Checks shapes, feature stds and that the stored W has the configured
/// spectral radius (within 1e-6). Throws ValidationError.
EsnModel model_from_json(const json& doc);

}  // namespace teach::esn
