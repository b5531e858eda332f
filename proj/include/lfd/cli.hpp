#pragma once

#include <string>

#include "lfd/config.hpp"
#include "lfd/pik.hpp"
#include "lfd/skills.hpp"

namespace lfd::cli {

/// Entry point for the `lfd` tool.
int run(int argc, char** argv);

/// Renderers shared by the subcommands and their tests.
std::string segments_text(const std::vector<Keypoint>& keypoints, const std::vector<Segment>& segments);
std::string policy_summary(const Policy& policy);

}  // namespace lfd::cli
