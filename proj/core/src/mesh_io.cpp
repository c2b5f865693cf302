#include "dem/mesh_io.hpp"

#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>
#include <string>

namespace dem {

namespace {

Index parse_face_index(const std::string& token, std::size_t vertex_count) {
  const std::string head = token.substr(0, token.find('/'));
  long long id = 0;
  try {
    id = std::stoll(head);
  } catch (const std::exception&) {
    throw IoError("obj: bad face index '" + token + "'");
  }
  if (id < 0) id = static_cast<long long>(vertex_count) + id + 1;
  if (id < 1 || id > static_cast<long long>(vertex_count)) {
    throw IoError("obj: face index out of range '" + token + "'");
  }
  return static_cast<Index>(id - 1);
}

}  // namespace

TriangleMesh read_obj(std::istream& in) {
  TriangleMesh mesh;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      double x = 0, y = 0, z = 0;
      if (!(ls >> x >> y >> z)) {
        throw IoError("obj: malformed vertex on line " + std::to_string(line_no));
      }
      mesh.vertices.emplace_back(Real(x), Real(y), Real(z));
    } else if (tag == "f") {
      std::array<Index, 3> face{};
      std::string token;
      int n = 0;
      while (ls >> token) {
        if (n == 3) {
          throw IoError("obj: non-triangular face on line " + std::to_string(line_no));
        }
        face[n++] = parse_face_index(token, mesh.vertices.size());
      }
      if (n != 3) {
        throw IoError("obj: face with fewer than 3 corners on line " +
                      std::to_string(line_no));
      }
      mesh.faces.push_back(face);
    }
  }
  return mesh;
}

TriangleMesh read_obj(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path.string());
  return read_obj(in);
}

void write_obj(std::ostream& out, const TriangleMesh& mesh) {
  out << std::setprecision(std::numeric_limits<Real>::max_digits10);
  for (const auto& v : mesh.vertices) {
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const auto& f : mesh.faces) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
}

void write_obj(const std::filesystem::path& path, const TriangleMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  write_obj(out, mesh);
}

}  // namespace dem
