#pragma once

#include <string>

#include "arp/common.hpp"
#include "arp/config.hpp"
#include "arp/eval.hpp"

namespace arp::cli {

int run_cli(int argc, char** argv);

// Executes an experiment manifest: an ordered list of pipeline stages with
// their parameters and seeds. Stages whose outputs already exist with a
// matching input hash are skipped, so completed runs are resumable and
// re-runs are cheap. Any stage failure aborts with the stage name; partial
// outputs are preserved.
int run_manifest(const fs::path& manifest_path);

// store paths resolve against ARPLAN_STORE_ROOT when relative and the
// variable is set
fs::path resolve_store_path(const std::string& path);

// [x0 | active region | H plan frames] strip written as one PNG row; the
// region slot is mid-grey when the arm plans without regions
void write_plan_strip(const fs::path& out_png, const Frame& x0, const Frame* region,
                      const std::vector<Frame>& plan);

} // namespace arp::cli
