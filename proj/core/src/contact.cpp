#include "dem/contact.hpp"

#include <cmath>

namespace dem {

ContactPoint make_contact(const DistanceResult& r, const Triangle& ti, Halo halo) {
  ContactPoint c;
  const Real w = halo.a / halo.sum();
  c.position = r.point_a + w * (r.point_b - r.point_a);
  c.normal = r.point_a - c.position;
  c.epsilon = halo.a;
  if (!(c.normal.norm() > 0) && !ti.is_degenerate()) c.fallback_direction = -ti.unit_normal();
  return c;
}

MassProperties mass_properties_from_mesh(const TriangleMesh& mesh, Real density) {
  // canonical second moment of the unit tetrahedron (0, e1, e2, e3)
  Mat3 canonical;
  canonical << 2, 1, 1, 1, 2, 1, 1, 1, 2;
  canonical /= Real(120);

  Real volume = 0;
  Vec3 first = Vec3::Zero();
  Mat3 second = Mat3::Zero();
  for (std::size_t f = 0; f < mesh.size(); ++f) {
    const Triangle t = mesh.triangle(f);
    Mat3 a;
    a.col(0) = t.v1;
    a.col(1) = t.v2;
    a.col(2) = t.v3;
    const Real det = a.determinant();
    volume += det / 6;
    first += det / 24 * (t.v1 + t.v2 + t.v3);
    second += det * a * canonical * a.transpose();
  }
  if (!(volume > 0)) throw OpenMesh("mesh encloses no positive volume");

  MassProperties m;
  m.volume = volume;
  m.mass = density * volume;
  m.center_of_mass = first / volume;
  const Mat3 central = density * (second - volume * m.center_of_mass * m.center_of_mass.transpose());
  m.inertia = central.trace() * Mat3::Identity() - central;
  return m;
}

void ForceModelParams::validate() const {
  if (!(k_s > 0)) throw InvalidSpec("k_s must be positive");
  if (!(epsilon > 0)) throw InvalidSpec("epsilon must be positive");
}

Real reduced_mass_factor(const MassProperties& mi, const MassProperties& mj) {
  const Real inv = mi.inverse_mass() + mj.inverse_mass();
  if (!(inv > 0)) return 0;
  return std::sqrt(1 / inv);
}

Vec3 contact_force(const ContactPoint& c, const MassProperties& mi, const MassProperties& mj,
                   const ForceModelParams& p) {
  const Real len = c.normal.norm();
  if (len < Real(1e-12)) throw ZeroNormal("contact normal vanishes");
  const Real stretch = 1 - len / c.epsilon;
  if (stretch <= 0) return Vec3::Zero();
  return c.normal / len * (p.k_s * stretch * reduced_mass_factor(mi, mj));
}

Acceleration acceleration_from(const Vec3& force, const Vec3& torque, const MassProperties& mass,
                               const Quat& rotation, const Vec3& omega) {
  Acceleration out;
  if (mass.immovable) return out;
  const Mat3 r = rotation.toRotationMatrix();
  const Mat3 iw = r * mass.inertia * r.transpose();
  out.dv = force / mass.mass;
  out.domega = iw.ldlt().solve(torque - omega.cross(iw * omega));
  return out;
}

Acceleration accumulate(std::span<const AppliedForce> forces, const MassProperties& mass,
                        const Vec3& world_center, const Quat& rotation, const Vec3& omega) {
  if (forces.empty()) return {};
  Vec3 total = Vec3::Zero();
  Vec3 torque = Vec3::Zero();
  for (const auto& f : forces) {
    total += f.force;
    torque += (f.point - world_center).cross(f.force);
  }
  return acceleration_from(total, torque, mass, rotation, omega);
}

std::vector<ContactPoint> find_contacts_single_level(std::span<const Triangle> a,
                                                     std::span<const Triangle> b,
                                                     const KernelParams& p,
                                                     KernelCounters& counters,
                                                     std::pair<int, int> particles,
                                                     bool same_set, unsigned workers) {
  std::vector<KernelJob> jobs;
  std::vector<std::pair<int, int>> ids;
  jobs.reserve(a.size() * b.size());
  const Halo halo = Halo::uniform(p.epsilon);
  for (std::size_t k = 0; k < a.size(); ++k) {
    for (std::size_t l = 0; l < b.size(); ++l) {
      if (same_set && k == l) continue;
      jobs.push_back({a[k], b[l], halo, true});
      ids.emplace_back(static_cast<int>(k), static_cast<int>(l));
    }
  }
  const auto results = run_kernel_jobs(jobs, p, counters, workers);
  std::vector<ContactPoint> out;
  for (std::size_t n = 0; n < results.size(); ++n) {
    if (results[n].error != KernelError::None)
      throw DegenerateTriangle("degenerate triangle in contact detection");
    if (!results[n].result.contact()) continue;
    ContactPoint c = make_contact(results[n].result, jobs[n].a, halo);
    c.particle_i = particles.first;
    c.particle_j = particles.second;
    c.source_i = ids[n].first;
    c.source_j = ids[n].second;
    out.push_back(c);
  }
  return out;
}

std::vector<ContactPoint> find_contacts_single_level(const TriangleSoup& a,
                                                     const TriangleSoup& b,
                                                     const KernelParams& p,
                                                     KernelCounters& counters,
                                                     std::pair<int, int> particles,
                                                     bool same_set, unsigned workers) {
  const auto ta = unflatten(a);
  const auto tb = unflatten(b);
  return find_contacts_single_level(ta, tb, p, counters, particles, same_set, workers);
}

namespace {

// One greedy pass; returns true if anything merged.
bool merge_pass(std::vector<ContactPoint>& contacts, Real epsilon) {
  std::vector<std::vector<std::size_t>> clusters;
  for (std::size_t n = 0; n < contacts.size(); ++n) {
    const auto& c = contacts[n];
    bool joined = false;
    for (auto& cl : clusters) {
      const auto& rep = contacts[cl.front()];
      if (rep.particle_i == c.particle_i && rep.particle_j == c.particle_j &&
          (rep.position - c.position).norm() <= epsilon) {
        cl.push_back(n);
        joined = true;
        break;
      }
    }
    if (!joined) clusters.push_back({n});
  }
  if (clusters.size() == contacts.size()) return false;

  std::vector<ContactPoint> merged;
  merged.reserve(clusters.size());
  for (const auto& cl : clusters) {
    ContactPoint m = contacts[cl.front()];
    if (cl.size() > 1) {
      Vec3 pos = Vec3::Zero();
      Vec3 nrm = Vec3::Zero();
      Real len = 0;
      for (std::size_t n : cl) {
        pos += contacts[n].position;
        nrm += contacts[n].normal;
        len += contacts[n].normal.norm();
      }
      const Real count = Real(cl.size());
      m.position = pos / count;
      nrm /= count;
      len /= count;
      const Real nlen = nrm.norm();
      m.normal = nlen > 0 ? Vec3(nrm * (len / nlen)) : nrm;
    }
    merged.push_back(m);
  }
  contacts = std::move(merged);
  return true;
}

}  // namespace

std::vector<ContactPoint> merge_contacts(std::span<const ContactPoint> contacts, Real epsilon) {
  std::vector<ContactPoint> out(contacts.begin(), contacts.end());
  while (merge_pass(out, epsilon)) {
  }
  return out;
}

}  // namespace dem
