#pragma once

#include <string>
#include <string_view>

#include "nnmip/mip_model.hpp"

namespace nnmip {

// Fixed-format MPS export.
//
// Names that do not fit the 8-character fixed fields, contain whitespace, or
// start with '_' are replaced by "_C" / "_R" followed by the six-digit
// variable or row id (e.g. "_C000042"). The objective row is "_OBJ". Each
// replaced name is recorded in a "*@var <mangled> <original>" or
// "*@row <mangled> <original>" comment so parse_mps can restore it.
//
// Numbers are written with the shortest decimal form that parses back to the
// same double; long forms overflow the 12-column numeric field, which
// whitespace-delimited readers accept.
//
// Binaries sit between INTORG/INTEND markers and always carry explicit bounds.
// A maximisation objective is announced with an OBJSENSE section.
std::string export_mps(const MipModel& model, std::string_view model_name = "NNMIP");

/// Reads the subset of MPS produced by export_mps (whitespace-delimited).
/// Throws ModelError on malformed input, RANGES sections, or general integers.
MipModel parse_mps(std::string_view text);

std::string mangle_mps_name(std::string_view name, char kind, int id);

}  // namespace nnmip
