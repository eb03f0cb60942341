#include "graspview/viewmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <sstream>

#include <zlib.h>

namespace gv {

namespace {
constexpr double kPi = std::numbers::pi;
constexpr std::uint32_t kMapFormatVersion = 1;
constexpr char kMapMagic[5] = {'G', 'V', 'M', 'A', 'P'};

double wrap_azimuth(double a) {
  a = std::fmod(a + kPi, 2 * kPi);
  if (a <= 0) a += 2 * kPi;
  return a - kPi;
}

template <typename T>
void write_pod(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& in, T& v, const std::string& path) {
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw CorruptFile("truncated map file: " + path);
}

}  // namespace

void SmoothingParams::validate() const {
  if (!(variance > 0) || !(spacing > 0) || !(extent > 0)) {
    throw ConfigError("smoothing params must be positive");
  }
  const double ratio = extent / spacing;
  if (std::abs(ratio - std::round(ratio)) > 1e-9) {
    throw ConfigError("extent must be a multiple of spacing");
  }
}

int SmoothingParams::cells_per_axis() const {
  return 2 * static_cast<int>(std::round(extent / spacing)) + 1;
}

Vec3 project_viewpoint(const Vec3& view_position, const Pose& grasp_pose) {
  return transform_point(invert(grasp_pose), view_position);
}

std::pair<double, double> direction_to_angles(const Vec3& v) {
  const double norm = v.norm();
  if (norm < 1e-9) throw ZeroVector("cannot take angles of a zero direction");
  const Vec3 u = v / norm;
  const double elevation = std::asin(std::clamp(u.z(), -1.0, 1.0));
  if (std::abs(elevation) > kPi / 2 - 1e-9) return {0.0, elevation};  // pole
  return {std::atan2(u.y(), u.x()), elevation};
}

std::pair<double, double> viewpoint_angles(const Vec3& view_position,
                                           const Pose& grasp_pose) {
  // The viewing ray points from the camera toward the grasp origin, so a
  // head-on camera (in front of the hand, looking along the approach axis)
  // projects to (0, 0).
  return direction_to_angles(-project_viewpoint(view_position, grasp_pose));
}

std::size_t RawSampleSet::tp() const {
  return std::count_if(entries.begin(), entries.end(),
                       [](const Entry& e) { return e.predicted_positive && e.label; });
}
std::size_t RawSampleSet::fp() const {
  return std::count_if(entries.begin(), entries.end(),
                       [](const Entry& e) { return e.predicted_positive && !e.label; });
}
std::size_t RawSampleSet::tn() const {
  return std::count_if(entries.begin(), entries.end(),
                       [](const Entry& e) { return !e.predicted_positive && !e.label; });
}
std::size_t RawSampleSet::fn() const {
  return std::count_if(entries.begin(), entries.end(),
                       [](const Entry& e) { return !e.predicted_positive && e.label; });
}

RawSampleSet accumulate(const std::vector<ViewSample>& samples, double threshold) {
  RawSampleSet out;
  out.threshold = threshold;
  out.entries.reserve(samples.size());
  for (const auto& s : samples) {
    out.entries.push_back(
        {s.azimuth, s.elevation, s.score, s.label, s.score >= threshold});
  }
  return out;
}

RawSampleSet merge(const RawSampleSet& a, const RawSampleSet& b) {
  if (a.threshold != b.threshold) {
    throw ThresholdMismatch("cannot merge sample sets with different thresholds");
  }
  RawSampleSet out = a;
  out.entries.insert(out.entries.end(), b.entries.begin(), b.entries.end());
  return out;
}

double ViewMapGrid::at(MapChannel c, int azimuth_idx, int elevation_idx) const {
  return channels[static_cast<int>(c)][elevation_idx * n_azimuth + azimuth_idx];
}

double ViewMapGrid::interpolate(MapChannel c, double azimuth, double elevation) const {
  const double e = params.extent;
  if (azimuth < -e || azimuth > e || elevation < -e || elevation > e) {
    return -std::numeric_limits<double>::infinity();
  }
  const double fa = (azimuth + e) / params.spacing;
  const double fe = (elevation + e) / params.spacing;
  const int ia = std::min(static_cast<int>(fa), n_azimuth - 2);
  const int ie = std::min(static_cast<int>(fe), n_elevation - 2);
  const double ta = fa - ia;
  const double te = fe - ie;
  const double v00 = at(c, ia, ie);
  const double v10 = at(c, ia + 1, ie);
  const double v01 = at(c, ia, ie + 1);
  const double v11 = at(c, ia + 1, ie + 1);
  return (1 - ta) * (1 - te) * v00 + ta * (1 - te) * v10 + (1 - ta) * te * v01 +
         ta * te * v11;
}

ViewMapGrid smooth(const RawSampleSet& raw, const SmoothingParams& p) {
  p.validate();
  ViewMapGrid m;
  m.params = p;
  m.threshold = raw.threshold;
  m.n_azimuth = m.n_elevation = p.cells_per_axis();
  m.sample_count = raw.entries.size();
  const int n_cells = m.n_azimuth * m.n_elevation;
  for (auto& ch : m.channels) ch.assign(n_cells, 0.0);

  // Deterministic summation order regardless of how the set was merged.
  std::vector<RawSampleSet::Entry> entries = raw.entries;
  std::sort(entries.begin(), entries.end(), [](const auto& a, const auto& b) {
    return std::tie(a.azimuth, a.elevation, a.score, a.label) <
           std::tie(b.azimuth, b.elevation, b.score, b.label);
  });

  std::vector<double> acc_num(n_cells, 0.0), acc_den(n_cells, 0.0);
  auto& cand = m.channels[static_cast<int>(MapChannel::CandidateDensity)];
  auto& tp = m.channels[static_cast<int>(MapChannel::TpDensity)];
  auto& fp = m.channels[static_cast<int>(MapChannel::FpDensity)];

  for (const auto& s : entries) {
    for (int ie = 0; ie < m.n_elevation; ++ie) {
      const double de = s.elevation - m.cell_coord(ie);
      for (int ia = 0; ia < m.n_azimuth; ++ia) {
        const double da = wrap_azimuth(s.azimuth - m.cell_coord(ia));
        const double k = std::exp(-(da * da + de * de) / (2.0 * p.variance));
        const int idx = ie * m.n_azimuth + ia;
        cand[idx] += k;
        if (s.predicted_positive && s.label) tp[idx] += k;
        if (s.predicted_positive && !s.label) fp[idx] += k;
        if (s.predicted_positive == s.label) acc_num[idx] += k;
        acc_den[idx] += k;
      }
    }
  }

  auto& acc = m.channels[static_cast<int>(MapChannel::Accuracy)];
  auto& tmf = m.channels[static_cast<int>(MapChannel::TpMinusFp)];
  for (int i = 0; i < n_cells; ++i) {
    acc[i] = acc_den[i] < 1e-12 ? std::numeric_limits<double>::quiet_NaN()
                                : acc_num[i] / acc_den[i];
    tmf[i] = tp[i] - fp[i];
  }
  return m;
}

ViewMapGrid average_maps(const std::vector<ViewMapGrid>& maps) {
  if (maps.empty()) throw ConfigError("cannot average zero maps");
  ViewMapGrid out = maps.front();
  const int n_cells = out.n_azimuth * out.n_elevation;
  for (std::size_t i = 1; i < maps.size(); ++i) {
    if (maps[i].n_azimuth != out.n_azimuth || maps[i].n_elevation != out.n_elevation ||
        maps[i].threshold != out.threshold) {
      throw ConfigError("cannot average maps with different grids or thresholds");
    }
  }
  for (int c = 0; c < kNumChannels; ++c) {
    const bool is_acc = c == static_cast<int>(MapChannel::Accuracy);
    for (int i = 0; i < n_cells; ++i) {
      double sum = 0.0;
      int defined = 0;
      for (const auto& m : maps) {
        const double v = m.channels[c][i];
        if (is_acc && std::isnan(v)) continue;
        sum += v;
        ++defined;
      }
      out.channels[c][i] = defined == 0 ? std::numeric_limits<double>::quiet_NaN()
                                        : sum / (is_acc ? defined
                                                        : static_cast<int>(maps.size()));
    }
  }
  out.sample_count = 0;
  for (const auto& m : maps) out.sample_count += m.sample_count;
  return out;
}

void save_map(const ViewMapGrid& m, const std::string& path) {
  std::ostringstream body(std::ios::binary);
  body.write(kMapMagic, sizeof(kMapMagic));
  write_pod(body, kMapFormatVersion);
  write_pod(body, m.params.spacing);
  write_pod(body, m.params.extent);
  write_pod(body, m.params.variance);
  write_pod(body, m.threshold);
  write_pod(body, static_cast<std::uint32_t>(m.n_azimuth));
  write_pod(body, static_cast<std::uint32_t>(m.n_elevation));
  write_pod(body, static_cast<std::uint32_t>(kNumChannels));
  write_pod(body, m.sample_count);
  write_pod(body, static_cast<std::uint32_t>(m.meta.size()));
  body.write(m.meta.data(), m.meta.size());
  for (const auto& ch : m.channels) {
    body.write(reinterpret_cast<const char*>(ch.data()), ch.size() * sizeof(double));
  }
  const std::string bytes = body.str();
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), bytes.size()));

  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(bytes.data(), bytes.size());
  write_pod(out, crc);
  if (!out) throw IoError("write failed: " + path);
}

ViewMapGrid load_map(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  if (bytes.size() < sizeof(kMapMagic) + sizeof(std::uint32_t)) {
    throw CorruptFile("map file too short: " + path);
  }
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + bytes.size() - sizeof(stored_crc),
              sizeof(stored_crc));
  bytes.resize(bytes.size() - sizeof(stored_crc));
  const std::uint32_t crc = static_cast<std::uint32_t>(
      crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), bytes.size()));
  if (crc != stored_crc) throw CorruptFile("checksum mismatch: " + path);

  std::istringstream body(bytes, std::ios::binary);
  char magic[sizeof(kMapMagic)];
  body.read(magic, sizeof(magic));
  if (!body || std::memcmp(magic, kMapMagic, sizeof(magic)) != 0) {
    throw CorruptFile("bad magic: " + path);
  }
  std::uint32_t version;
  read_pod(body, version, path);
  if (version != kMapFormatVersion) {
    throw FormatVersionMismatch("map format version " + std::to_string(version) +
                                ", expected " + std::to_string(kMapFormatVersion));
  }
  ViewMapGrid m;
  read_pod(body, m.params.spacing, path);
  read_pod(body, m.params.extent, path);
  read_pod(body, m.params.variance, path);
  read_pod(body, m.threshold, path);
  std::uint32_t n_az, n_el, n_ch, meta_len;
  read_pod(body, n_az, path);
  read_pod(body, n_el, path);
  read_pod(body, n_ch, path);
  read_pod(body, m.sample_count, path);
  read_pod(body, meta_len, path);
  if (n_ch != kNumChannels) throw CorruptFile("unexpected channel count: " + path);
  m.n_azimuth = static_cast<int>(n_az);
  m.n_elevation = static_cast<int>(n_el);
  m.meta.resize(meta_len);
  body.read(m.meta.data(), meta_len);
  if (!body) throw CorruptFile("truncated map file: " + path);
  const std::size_t n_cells = static_cast<std::size_t>(n_az) * n_el;
  for (auto& ch : m.channels) {
    ch.resize(n_cells);
    body.read(reinterpret_cast<char*>(ch.data()), n_cells * sizeof(double));
    if (!body) throw CorruptFile("truncated map file: " + path);
  }
  return m;
}

void export_map_csv(const ViewMapGrid& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "azimuth,elevation,candidate_density,tp_density,fp_density,accuracy,"
         "tp_minus_fp\n";
  out.precision(17);
  for (int ie = 0; ie < m.n_elevation; ++ie) {
    for (int ia = 0; ia < m.n_azimuth; ++ia) {
      out << m.cell_coord(ia) << "," << m.cell_coord(ie);
      for (int c = 0; c < kNumChannels; ++c) {
        out << "," << m.channels[c][ie * m.n_azimuth + ia];
      }
      out << "\n";
    }
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace gv
