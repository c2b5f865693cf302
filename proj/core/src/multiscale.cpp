#include "dem/multiscale.hpp"

#include <algorithm>
#include <utility>

namespace dem {

void DetectionStats::add_level(int level, std::uint64_t n) {
  if (level_checks.size() <= static_cast<std::size_t>(level)) level_checks.resize(level + 1, 0);
  level_checks[level] += n;
}

DetectionStats& DetectionStats::operator+=(const DetectionStats& o) {
  counters += o.counters;
  for (std::size_t l = 0; l < o.level_checks.size(); ++l)
    add_level(static_cast<int>(l), o.level_checks[l]);
  return *this;
}

PairingOutcome classify_pairing(const DistanceResult& r, bool mesh_pair, Halo halo) {
  if (r.kind == DistanceKind::Contact) return PairingOutcome::Contact;
  if (mesh_pair) return PairingOutcome::Separated;
  if (r.kind == DistanceKind::NoContact && r.lower_bound > halo.sum())
    return PairingOutcome::Separated;
  return PairingOutcome::Undecided;
}

namespace {

struct Pairing {
  int a;
  int b;
};

ContactPoint contact_from(const DistanceResult& r, const PlacedHierarchy& a,
                          const PlacedHierarchy& b, int ea, int eb, const Triangle& ta,
                          Halo halo) {
  const Hierarchy& ha = *a.hierarchy;
  const Hierarchy& hb = *b.hierarchy;
  ContactPoint c = make_contact(r, ta, halo);
  c.particle_i = a.particle;
  c.particle_j = b.particle;
  c.source_i = ha.is_mesh(ea) ? ha.mesh_index(ea) : ea;
  c.source_j = hb.is_mesh(eb) ? hb.mesh_index(eb) : eb;
  c.level_i = ha.height(ea);
  c.level_j = hb.height(eb);
  return c;
}

}  // namespace

std::vector<ContactPoint> multiscale_contacts(
    const PlacedHierarchy& a, const PlacedHierarchy& b, const KernelParams& p,
    DetectionStats& stats, unsigned workers,
    std::vector<std::vector<std::pair<int, int>>>* rounds) {
  const Hierarchy& ha = *a.hierarchy;
  const Hierarchy& hb = *b.hierarchy;
  std::vector<ContactPoint> out;
  std::vector<Pairing> frontier{{ha.root(), hb.root()}};
  while (!frontier.empty()) {
    std::vector<KernelJob> jobs;
    jobs.reserve(frontier.size());
    for (const auto& f : frontier) {
      const bool mesh_pair = ha.is_mesh(f.a) && hb.is_mesh(f.b);
      jobs.push_back({a.world(f.a), b.world(f.b), Halo{ha.epsilon(f.a), hb.epsilon(f.b)},
                      mesh_pair});
      stats.add_level(std::max(ha.height(f.a), hb.height(f.b)), 1);
    }
    const auto results = run_kernel_jobs(jobs, p, stats.counters, workers);
    if (rounds) {
      auto& r = rounds->emplace_back();
      for (const auto& f : frontier) r.emplace_back(f.a, f.b);
    }

    std::vector<Pairing> next;
    for (std::size_t n = 0; n < frontier.size(); ++n) {
      if (results[n].error != KernelError::None)
        throw DegenerateTriangle("degenerate triangle in multiscale detection");
      const auto& f = frontier[n];
      const bool mesh_pair = jobs[n].allow_fallback;
      const auto verdict = classify_pairing(results[n].result, mesh_pair, jobs[n].halo);
      if (verdict == PairingOutcome::Separated) continue;
      if (mesh_pair) {
        out.push_back(contact_from(results[n].result, a, b, f.a, f.b, jobs[n].a, jobs[n].halo));
        continue;
      }
      const std::vector<int> self_a{f.a}, self_b{f.b};
      const auto& ca = ha.is_mesh(f.a) ? self_a : ha.children(f.a);
      const auto& cb = hb.is_mesh(f.b) ? self_b : hb.children(f.b);
      for (int x : ca)
        for (int y : cb) next.push_back({x, y});
    }
    frontier = std::move(next);
  }
  std::sort(out.begin(), out.end(), [](const ContactPoint& x, const ContactPoint& y) {
    return std::pair(x.source_i, x.source_j) < std::pair(y.source_i, y.source_j);
  });
  return out;
}

std::vector<ContactPoint> single_level_contacts(const PlacedHierarchy& a,
                                                const PlacedHierarchy& b,
                                                const KernelParams& p, DetectionStats& stats,
                                                unsigned workers) {
  const Hierarchy& ha = *a.hierarchy;
  const Hierarchy& hb = *b.hierarchy;
  const int na = ha.element_count() - ha.node_count();
  const int nb = hb.element_count() - hb.node_count();
  std::vector<Triangle> wb;
  wb.reserve(nb);
  for (int l = 0; l < nb; ++l) wb.push_back(b.world(hb.mesh_element(l)));
  const Halo halo{ha.tree().finest_epsilon, hb.tree().finest_epsilon};

  std::vector<KernelJob> jobs;
  jobs.reserve(static_cast<std::size_t>(na) * nb);
  for (int k = 0; k < na; ++k) {
    const Triangle ta = a.world(ha.mesh_element(k));
    for (int l = 0; l < nb; ++l) jobs.push_back({ta, wb[l], halo, true});
  }
  stats.add_level(0, jobs.size());
  const auto results = run_kernel_jobs(jobs, p, stats.counters, workers);
  std::vector<ContactPoint> out;
  for (std::size_t n = 0; n < results.size(); ++n) {
    if (results[n].error != KernelError::None)
      throw DegenerateTriangle("degenerate triangle in contact detection");
    if (!results[n].result.contact()) continue;
    const int k = static_cast<int>(n / nb);
    const int l = static_cast<int>(n % nb);
    out.push_back(contact_from(results[n].result, a, b, ha.mesh_element(k), hb.mesh_element(l),
                               jobs[n].a, halo));
  }
  return out;
}

ActiveSet initial_active_set(const Hierarchy& h) {
  ActiveSet s;
  s.active.insert(h.root());
  return s;
}

void narrow_active_set(std::set<int>& active, const ActiveSet& state, const Hierarchy& h,
                       std::span<const int> non_contact) {
  const std::set<int> before = active;
  for (int e : non_contact) {
    if (!active.count(e)) continue;
    const int parent = h.parent(e);
    if (parent < 0 || state.memory.count(e) || before.count(parent)) continue;
    active.erase(e);
    active.insert(parent);
  }
}

void active_set_cleanup(std::set<int>& active, const Hierarchy& h) {
  for (;;) {
    int descendant = -1, ancestor = -1;
    for (int e : active) {
      for (int up = h.parent(e); up >= 0; up = h.parent(up)) {
        if (active.count(up)) {
          descendant = e;
          ancestor = up;
          break;
        }
      }
      if (ancestor >= 0) break;
    }
    if (ancestor < 0) return;
    for (int x = descendant; x != ancestor; x = h.parent(x))
      for (int s : h.children(h.parent(x))) active.insert(s);
    active.erase(ancestor);
  }
}

bool commit_active_set(ActiveSet& state, std::set<int> next) {
  if (next == state.active) return false;
  for (int e : state.active)
    if (!next.count(e)) state.removed.insert(e);
  for (int e : next)
    if (!state.active.count(e) && state.removed.count(e)) state.memory.insert(e);
  state.active = std::move(next);
  return true;
}

std::vector<int> covered_mesh_triangles(const std::set<int>& active, const Hierarchy& h) {
  std::vector<int> out;
  std::vector<int> stack;
  for (int e : active) {
    stack.push_back(e);
    while (!stack.empty()) {
      const int x = stack.back();
      stack.pop_back();
      if (h.is_mesh(x)) {
        out.push_back(h.mesh_index(x));
        continue;
      }
      for (int c : h.children(x)) stack.push_back(c);
    }
  }
  return out;
}

}  // namespace dem
