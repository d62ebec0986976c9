#pragma once

#include <string>
#include <vector>

#include "mvt/metrics.hpp"

namespace mvt {

struct SystemEval {
    std::string name;
    EvalReport report;
};

// EvalReport as a JSON document with stable key order (byte-identical for
// identical reports).
std::string eval_report_json(const EvalReport& report);

// One bucket report as CSV: header line, then label,count,value rows.
std::string bucket_csv(const BucketReport& report);

// Side-by-side text tables over N systems: metric columns, one row per
// system, and a delta row against the first system under every other one.
std::string render_comparison(const std::vector<SystemEval>& systems);

// The same comparison as JSON, deltas included.
std::string comparison_json(const std::vector<SystemEval>& systems);

}  // namespace mvt
