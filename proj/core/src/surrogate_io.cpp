#include <fstream>
#include <sstream>

#include "dem/surrogate.hpp"
#include "json.hpp"

namespace dem {

namespace {

using nlohmann::json;

json to_json(const Triangle& t) {
  return json::array({t.v1.x(), t.v1.y(), t.v1.z(), t.v2.x(), t.v2.y(), t.v2.z(), t.v3.x(),
                      t.v3.y(), t.v3.z()});
}

Triangle triangle_from_json(const json& j) {
  if (!j.is_array() || j.size() != 9) throw SchemaMismatch("triangle must be 9 numbers");
  std::array<Real, 9> c;
  for (int i = 0; i < 9; ++i) c[i] = j.at(i).get<Real>();
  return {Vec3(c[0], c[1], c[2]), Vec3(c[3], c[4], c[5]), Vec3(c[6], c[7], c[8])};
}

}  // namespace

std::string tree_to_json(const SurrogateTree& tree) {
  json nodes = json::array();
  for (const auto& n : tree.nodes) {
    nodes.push_back({{"triangle", to_json(n.triangle)},
                     {"epsilon", n.epsilon},
                     {"parent", n.parent},
                     {"children", n.children},
                     {"leaf_triangles", n.leaf_triangles},
                     {"level", n.level},
                     {"height", n.height}});
  }
  json doc{{"version", kTreeFormatVersion},
           {"mesh_size", tree.mesh_size},
           {"n_surrogate", tree.n_surrogate},
           {"finest_epsilon", tree.finest_epsilon},
           {"nodes", std::move(nodes)}};
  return doc.dump(1);
}

SurrogateTree tree_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("tree json: ") + e.what());
  }
  try {
    if (doc.at("version").get<int>() != kTreeFormatVersion)
      throw SchemaMismatch("unsupported tree format version");
    SurrogateTree tree;
    tree.mesh_size = doc.at("mesh_size").get<std::size_t>();
    tree.n_surrogate = doc.at("n_surrogate").get<int>();
    tree.finest_epsilon = doc.at("finest_epsilon").get<Real>();
    for (const auto& jn : doc.at("nodes")) {
      SurrogateNode n;
      n.triangle = triangle_from_json(jn.at("triangle"));
      n.epsilon = jn.at("epsilon").get<Real>();
      n.parent = jn.at("parent").get<int>();
      n.children = jn.at("children").get<std::vector<int>>();
      n.leaf_triangles = jn.at("leaf_triangles").get<std::vector<Index>>();
      n.level = jn.at("level").get<int>();
      n.height = jn.at("height").get<int>();
      tree.nodes.push_back(std::move(n));
    }
    if (tree.nodes.empty()) throw SchemaMismatch("tree has no nodes");
    const int count = static_cast<int>(tree.nodes.size());
    for (const auto& n : tree.nodes) {
      for (int c : n.children)
        if (c <= 0 || c >= count) throw SchemaMismatch("child index out of range");
      for (Index t : n.leaf_triangles)
        if (t >= tree.mesh_size) throw SchemaMismatch("leaf triangle index out of range");
    }
    return tree;
  } catch (const json::exception& e) {
    throw SchemaMismatch(std::string("tree json: ") + e.what());
  }
}

void save_tree(const std::string& path, const SurrogateTree& tree) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path);
  out << tree_to_json(tree) << '\n';
}

SurrogateTree load_tree(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return tree_from_json(buf.str());
}

}  // namespace dem
