#pragma once

#include <iosfwd>
#include <vector>

#include "gdp/app/run_config.hpp"
#include "gdp/image.hpp"

namespace gdp::app {

// Each command writes its report to `out` and returns a process exit code.
// Invalid configurations and I/O failures throw.

int cmd_degrade(const RunConfig& cfg, std::ostream& out);
int cmd_restore(const RunConfig& cfg, std::ostream& out);
int cmd_ablate(const RunConfig& cfg, std::ostream& out);
int cmd_metrics(const RunConfig& cfg, std::ostream& out);

/// Shape of the clean image that a degradation stage list maps onto `observed`.
Shape infer_domain(const std::string& degradation, const Shape& observed);

/// Eight distinct 1x8x8 images used by `ablate` when no prior is given.
std::vector<ImageTensor> toy_dataset();

/// "out.png" + "mask" -> "out.mask.gdpf"; the extension is always replaced.
std::string sidecar_path(const std::string& output, const std::string& tag, const std::string& ext);

}  // namespace gdp::app
