#pragma once

#include <string>
#include <vector>

#include "stagecost/training.hpp"

namespace stagecost {

/// One CSV row per depth 0..N. The block-indexed columns (param_norm_sq,
/// output_residual_norm) are empty on the final row. Training exports carry a
/// leading epoch column; plain evaluations do not.
std::string trajectory_csv_header(bool with_epoch);

/// Rows for one record, without a header. Doubles print as %.17g so the
/// reader recovers them bit for bit.
std::string trajectory_csv_rows(const TrajectoryRecord& rec, bool with_epoch);

/// Append a record to a CSV file, creating it (with header) when missing.
/// The file is rewritten through a temp file, so readers never see half a
/// record. Appending to a file whose header disagrees is an error.
void append_trajectory_csv(const std::string& path, const TrajectoryRecord& rec,
                           bool with_epoch);

/// Parse a file produced by the writer above; accepts both header variants.
/// Records without an epoch column come back with epoch -1.
std::vector<TrajectoryRecord> read_trajectory_csv(const std::string& path);

}  // namespace stagecost
