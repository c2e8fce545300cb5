// Apache License, Version 2.0, refer to LICENSE.txt
//
// Supermodel file format, version 1, little-endian:
//   magic "SDPM" | u32 version | u32 dim | u32 n_particles
//   config: f64 alpha, u8 mode, u8 resampler, u8 normalize_xi,
//           u8 component_density, u64 seed, u32 recompute_period,
//           prior (f64 kappa, f64 nu, p x f64 lambda, upper-triangle omega)
//   registry: u64 count, then per record: string id, optional string label,
//             u64 n_samples
//   per particle: u64 total, u32 n_components,
//                 per component: u64 count, p x f64 mean,
//                                p(p+1)/2 x f64 scatter upper triangle,
//                 u64 n_experiments, per experiment: u32 row length + u64s
//   u32 CRC-32 (IEEE) of everything before it.
#include <zlib.h>

#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include "sdpm/errors.hpp"
#include "sdpm/supermodel.hpp"

namespace sdpm {

namespace {

constexpr char kMagic[4] = {'S', 'D', 'P', 'M'};
constexpr std::uint32_t kFormatVersion = 1;

class ByteWriter {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void f64(double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof(bits));
    u64(bits);
  }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf_.insert(buf_.end(), s.begin(), s.end());
  }
  void raw(const char* data, std::size_t n) { buf_.insert(buf_.end(), data, data + n); }
  const std::vector<char>& bytes() const { return buf_; }

 private:
  std::vector<char> buf_;
};

class ByteReader {
 public:
  ByteReader(const char* data, std::size_t size) : data_(data), size_(size) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(data_[pos_++]);
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i)
      v |= static_cast<std::uint32_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= static_cast<std::uint64_t>(static_cast<unsigned char>(data_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  double f64() {
    std::uint64_t bits = u64();
    double v;
    std::memcpy(&v, &bits, sizeof(v));
    return v;
  }
  std::string str() {
    std::uint32_t n = u32();
    need(n);
    std::string s(data_ + pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > size_) throw IoError("supermodel file truncated");
  }
  const char* data_;
  std::size_t size_;
  std::size_t pos_ = 0;
};

void write_upper_triangle(ByteWriter& w, const Matrix& m) {
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.cols(); ++j) w.f64(m(i, j));
}

Matrix read_symmetric(ByteReader& r, int p) {
  Matrix m(p, p);
  for (int i = 0; i < p; ++i)
    for (int j = i; j < p; ++j) {
      m(i, j) = r.f64();
      m(j, i) = m(i, j);
    }
  return m;
}

}  // namespace

struct SupermodelCodec {
  static void encode(const Supermodel& m, ByteWriter& w) {
    w.raw(kMagic, 4);
    w.u32(kFormatVersion);
    w.u32(static_cast<std::uint32_t>(m.dim_));
    w.u32(static_cast<std::uint32_t>(m.config_.n_particles));

    const DpmConfig& cfg = m.config_;
    w.f64(cfg.alpha);
    w.u8(static_cast<std::uint8_t>(cfg.mode));
    w.u8(static_cast<std::uint8_t>(cfg.resampler));
    w.u8(cfg.normalize_xi ? 1 : 0);
    w.u8(static_cast<std::uint8_t>(cfg.component_density));
    w.u64(cfg.seed);
    w.u32(static_cast<std::uint32_t>(cfg.recompute_period));
    w.f64(m.prior_.kappa());
    w.f64(m.prior_.nu());
    for (Eigen::Index i = 0; i < m.prior_.lambda().size(); ++i) w.f64(m.prior_.lambda()(i));
    write_upper_triangle(w, m.prior_.omega());

    w.u64(m.registry_.size());
    for (const auto& rec : m.registry_) {
      w.str(rec.id);
      w.u8(rec.label ? 1 : 0);
      if (rec.label) w.str(*rec.label);
      w.u64(rec.n_samples);
    }

    for (const Particle& particle : m.particles_) {
      w.u64(particle.total());
      w.u32(static_cast<std::uint32_t>(particle.components().size()));
      for (const ComponentStats& c : particle.components()) {
        w.u64(c.count());
        for (Eigen::Index i = 0; i < c.mean().size(); ++i) w.f64(c.mean()(i));
        write_upper_triangle(w, c.scatter());
      }
      const auto& xi = particle.xi();
      w.u64(xi.size());
      for (const auto& row : xi) {
        w.u32(static_cast<std::uint32_t>(row.size()));
        for (std::uint64_t v : row) w.u64(v);
      }
    }
  }

  static Supermodel decode(const char* data, std::size_t size) {
    if (size < 4 + 4 || std::memcmp(data, kMagic, 4) != 0)
      throw IoError("not a supermodel file (bad magic)");
    if (size < 4 + 4 + 4 + 4 + 4)  // header + checksum
      throw IoError("supermodel file truncated");

    const std::size_t body = size - 4;
    std::uint32_t stored_crc = 0;
    for (int i = 0; i < 4; ++i)
      stored_crc |= static_cast<std::uint32_t>(static_cast<unsigned char>(data[body + i]))
                    << (8 * i);
    const auto computed =
        static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(data),
                                         static_cast<uInt>(body)));
    if (computed != stored_crc) throw IoError("supermodel file checksum mismatch");

    ByteReader r(data, body);
    r.u32();  // magic, verified above
    const std::uint32_t version = r.u32();
    if (version != kFormatVersion)
      throw IoError("unsupported supermodel format version " + std::to_string(version));
    const int dim = static_cast<int>(r.u32());
    const int n_particles = static_cast<int>(r.u32());
    if (dim < 1 || n_particles < 1) throw IoError("supermodel file: invalid header");

    DpmConfig cfg;
    cfg.n_particles = n_particles;
    cfg.alpha = r.f64();
    cfg.mode = static_cast<AllocationMode>(r.u8());
    cfg.resampler = static_cast<ResampleScheme>(r.u8());
    cfg.normalize_xi = r.u8() != 0;
    cfg.component_density = static_cast<ComponentDensity>(r.u8());
    cfg.seed = r.u64();
    cfg.recompute_period = static_cast<int>(r.u32());
    const double kappa = r.f64();
    const double nu = r.f64();
    Vector lambda(dim);
    for (int i = 0; i < dim; ++i) lambda(i) = r.f64();
    Matrix omega = read_symmetric(r, dim);
    cfg.prior = NiwPrior(std::move(lambda), kappa, std::move(omega), nu);

    Supermodel m(dim, std::move(cfg));

    const std::uint64_t n_records = r.u64();
    m.registry_.clear();
    for (std::uint64_t i = 0; i < n_records; ++i) {
      ExperimentRecord rec;
      rec.id = r.str();
      if (r.u8() != 0) rec.label = r.str();
      rec.n_samples = r.u64();
      m.registry_.push_back(std::move(rec));
    }

    m.particles_.clear();
    for (int t = 0; t < n_particles; ++t) {
      const std::uint64_t total = r.u64();
      const std::uint32_t n_components = r.u32();
      std::vector<ComponentStats> comps;
      comps.reserve(n_components);
      for (std::uint32_t c = 0; c < n_components; ++c) {
        const std::uint64_t count = r.u64();
        Vector mean(dim);
        for (int i = 0; i < dim; ++i) mean(i) = r.f64();
        Matrix scatter = read_symmetric(r, dim);
        comps.emplace_back(count, std::move(mean), std::move(scatter));
      }
      const std::uint64_t n_experiments = r.u64();
      std::vector<std::vector<std::uint64_t>> xi(n_experiments);
      for (auto& row : xi) {
        const std::uint32_t len = r.u32();
        row.resize(len);
        for (std::uint32_t i = 0; i < len; ++i) row[i] = r.u64();
      }
      Particle particle(dim, std::move(comps), std::move(xi));
      if (particle.total() != total)
        throw IoError("supermodel file: particle totals inconsistent");
      m.particles_.push_back(std::move(particle));
    }
    m.validate();
    return m;
  }
};

void Supermodel::save(std::ostream& out) const {
  ByteWriter w;
  SupermodelCodec::encode(*this, w);
  const auto crc = static_cast<std::uint32_t>(
      crc32(0L, reinterpret_cast<const Bytef*>(w.bytes().data()),
            static_cast<uInt>(w.bytes().size())));
  out.write(w.bytes().data(), static_cast<std::streamsize>(w.bytes().size()));
  char tail[4];
  for (int i = 0; i < 4; ++i) tail[i] = static_cast<char>((crc >> (8 * i)) & 0xff);
  out.write(tail, 4);
  if (!out) throw IoError("failed to write supermodel stream");
}

Supermodel Supermodel::load(std::istream& in) {
  std::vector<char> data((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
  return SupermodelCodec::decode(data.data(), data.size());
}

void Supermodel::save_file(const std::filesystem::path& path) const {
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    save(out);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename temporary model file onto '" + path.string() + "'");
  }
}

Supermodel Supermodel::load_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open model file '" + path.string() + "'");
  return load(in);
}

}  // namespace sdpm
