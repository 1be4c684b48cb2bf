#pragma once

#include <cstdint>
#include <string>

#include "pdmp/average.hpp"

namespace pdmp {

// FNV-1a 64-bit digest of input text, rendered as 16 hex digits; used for the
// inputs-digest field of summary documents.
std::string fnv1a_hex(const std::string& text);

// Machine-readable documents (JSON).  One record per assumption:
// {id, pass, measured, threshold, detail}.
std::string validation_report_json(const ValidationReport& report);

std::string discounted_summary_json(const DiscountedSolution& sol,
                                    const std::string& inputs_digest,
                                    double elapsed_seconds);

std::string average_summary_json(const AverageSolution& sol,
                                 const BoundednessReport& bounds,
                                 const std::string& inputs_digest,
                                 double elapsed_seconds);

std::string estimate_summary_json(const McEstimate& est,
                                  const std::string& inputs_digest,
                                  double elapsed_seconds);

} // namespace pdmp
