#pragma once

#include <filesystem>
#include <iosfwd>

#include "dem/geometry.hpp"

namespace dem {

/// Reads `v` and `f` records. Faces with more than three corners are
/// rejected; `vt`/`vn` references in face records and normal lines are ignored.
TriangleMesh read_obj(std::istream& in);
TriangleMesh read_obj(const std::filesystem::path& path);

void write_obj(std::ostream& out, const TriangleMesh& mesh);
void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh);

}  // namespace dem
