#pragma once

#include <stdexcept>
#include <string>
#include <variant>

#include "mubsep/measurements.hpp"
#include "mubsep/tensor.hpp"

namespace mubsep {

/// Matrix and shape as read from a file; not yet validated as a state.
struct StateDocument {
  CMatrix mat;
  Shape shape;
};

using Document = std::variant<StateDocument, MubSet, MumSet, GsicSet>;

/// Malformed or structurally inconsistent document.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Schema: {"kind": "state"|"mub"|"mum"|"gsic", "dims": [..] or "dim": d,
//          "params": {..}, "data": ..}
// Complex scalars are [re, im]; matrices are arrays of rows; MUB data is a
// list of bases, each a list of vectors.
std::string serialize(const Document& doc);
Document parse_document(const std::string& text);

std::string kind_of(const Document& doc);

Document read_document(const std::string& path);
void write_document(const std::string& path, const Document& doc);

inline StateDocument state_document(const DensityMatrix& rho) { return {rho.matrix(), rho.shape()}; }

}  // namespace mubsep
