#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "potpred/timeseries.hpp"

namespace potpred {

/**
 * @brief Single numeric column with an optional header line.
 *
 * Blank lines are skipped. Only the first non-blank line may be a
 * header. Non-numeric or non-finite cells raise DomainError naming the
 * 1-based line; an empty column raises DegenerateSampleError.
 */
std::vector<double> read_column(std::istream& is, const std::string& source = "input");
std::vector<double> read_column_file(const std::string& path);

/**
 * @brief Series input for the time-series commands.
 *
 * One column is read as observations. Three columns are (y, mu_hat,
 * xi_hat) from an external filter; the final row leaves y empty and
 * carries the next-step mu_hat and xi_hat.
 */
SeriesInput read_series(std::istream& is, const std::string& source = "input");
SeriesInput read_series_file(const std::string& path);

/// Writes through a temporary sibling file renamed into place; nothing is left behind on failure.
void write_file_atomic(const std::string& path, const std::function<void(std::ostream&)>& body);

}  // namespace potpred
