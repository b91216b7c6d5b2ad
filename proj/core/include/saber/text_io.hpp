// Copyright 2026 The SaberSim Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

namespace saber {

// Shortest-exact decimal form (%.17g): parsing it back yields the same bits,
// which is what the byte-identical-rerun contract leans on.
std::string format_double(double v);

// One CSV line, LF-terminated. Fields are written verbatim; callers only pass
// numbers and identifier-like names, so no quoting layer is needed.
std::string csv_row(const std::vector<std::string>& fields);

// Splits one CSV line (no quoting, matching csv_row).
std::vector<std::string> csv_split(const std::string& line);

}  // namespace saber
