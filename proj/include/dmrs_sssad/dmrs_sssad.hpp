#pragma once

// Umbrella header.

#include "dmrs_sssad/baselines.hpp"
#include "dmrs_sssad/cdl_channel.hpp"
#include "dmrs_sssad/common.hpp"
#include "dmrs_sssad/harness/config.hpp"
#include "dmrs_sssad/harness/experiment.hpp"
#include "dmrs_sssad/harness/report.hpp"
#include "dmrs_sssad/harness/roc.hpp"
#include "dmrs_sssad/harness/trials.hpp"
#include "dmrs_sssad/phy_link.hpp"
#include "dmrs_sssad/sparsity_extractor.hpp"
#include "dmrs_sssad/sssad_detector.hpp"
#include "dmrs_sssad/zc_dmrs.hpp"
