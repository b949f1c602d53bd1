// SPDX-License-Identifier: Apache-2.0
//
// cmfbeam: broadband covariance-matrix-fitting beamforming
// ------------------------------------------------------------------------

#include "cmfbeam/csm.hpp"

#include "cmfbeam/detail/forward.hpp"
#include "cmfbeam/parallel.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

namespace cmfbeam {

// ------------------------------------------------------------------ CsmSet

CsmSet::CsmSet(FrequencyGrid grid, std::vector<CMatX> matrices)
    : grid_(std::move(grid)), matrices_(std::move(matrices)) {
  if (static_cast<Index>(matrices_.size()) != grid_.size()) {
    throw std::invalid_argument("CsmSet: matrix count " + std::to_string(matrices_.size()) +
                                " != frequency count " + std::to_string(grid_.size()));
  }
  mic_count_ = matrices_.front().rows();
  if (mic_count_ < 2) throw std::invalid_argument("CsmSet: need at least 2 microphones");
  for (std::size_t j = 0; j < matrices_.size(); ++j) {
    CMatX& c = matrices_[j];
    if (c.rows() != mic_count_ || c.cols() != mic_count_) {
      throw std::invalid_argument("CsmSet: matrix " + std::to_string(j) + " is not " + std::to_string(mic_count_) +
                                  "x" + std::to_string(mic_count_));
    }
    if (!c.allFinite()) throw std::invalid_argument("CsmSet: matrix " + std::to_string(j) + " is not finite");
    CMatX sym = (c + c.adjoint()) * 0.5;
    c = std::move(sym);
    const double scale = std::max(1.0, c.diagonal().real().cwiseAbs().maxCoeff());
    if (c.diagonal().real().minCoeff() < -1e-12 * scale) {
      throw std::invalid_argument("CsmSet: matrix " + std::to_string(j) + " has a negative diagonal entry");
    }
  }
}

CsmSet CsmSet::zeros(const FrequencyGrid& grid, Index mic_count) {
  return CsmSet(grid, std::vector<CMatX>(static_cast<std::size_t>(grid.size()), CMatX::Zero(mic_count, mic_count)));
}

CsmSet CsmSet::subset(Index j) const { return CsmSet(grid_.subset(j), {at(j)}); }

CsmSet CsmSet::scaled(double factor) const {
  std::vector<CMatX> m = matrices_;
  for (auto& c : m) c *= factor;
  return CsmSet(grid_, std::move(m));
}

// ----------------------------------------------------------- UpperTriIndex

UpperTriIndex::UpperTriIndex(Index mic_count) {
  pairs_.reserve(static_cast<std::size_t>(mic_count * (mic_count - 1) / 2));
  for (Index i = 1; i < mic_count; ++i)
    for (Index j = 0; j < i; ++j) pairs_.emplace_back(i, j);
}

CVecX UpperTriIndex::gather(const CMatX& c) const {
  CVecX out(size());
  for (std::size_t p = 0; p < pairs_.size(); ++p) out[static_cast<Index>(p)] = c(pairs_[p].first, pairs_[p].second);
  return out;
}

// --------------------------------------------------------------- synthesis

CsmSet synthesize_csm(const Scene& scene) {
  const Index m_count = scene.array().size();
  const Index f_count = scene.grid().size();
  std::vector<CMatX> out(static_cast<std::size_t>(f_count));
  parallel_for(static_cast<std::size_t>(f_count), [&](std::size_t jj) {
    const auto j = static_cast<Index>(jj);
    const double k = scene.grid().wavenumber(j);
    CMatX c = CMatX::Zero(m_count, m_count);
    CVecX h;
    for (const auto& s : scene.sources()) {
      const Vec3 axis = dipole_direction<double>(s.axis.theta, s.axis.phi);
      for (Pole pole : {Pole::monopole, Pole::dipole}) {
        if (!s.has(pole)) continue;
        detail::pole_response(scene.array().positions(), s.position, axis, k, pole, h);
        detail::add_lower(c, h, s.spectrum(pole)[j]);
      }
    }
    detail::mirror_lower(c);
    out[jj] = std::move(c);
  });
  return CsmSet(scene.grid(), std::move(out));
}

CsmSet snapshot_csm(const Scene& scene, Index snapshots, std::uint64_t seed) {
  if (snapshots < 1) throw std::invalid_argument("snapshot_csm: snapshots must be >= 1");
  const Index m_count = scene.array().size();
  const Index f_count = scene.grid().size();
  std::vector<CMatX> out(static_cast<std::size_t>(f_count));
  parallel_for(static_cast<std::size_t>(f_count), [&](std::size_t jj) {
    const auto j = static_cast<Index>(jj);
    const double k = scene.grid().wavenumber(j);
    // Each frequency owns its stream so results are independent of threading.
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(jj)};
    std::mt19937_64 rng(seq);
    std::normal_distribution<double> normal(0.0, 1.0);

    std::vector<CVecX> responses;
    std::vector<double> amplitude;
    for (const auto& s : scene.sources()) {
      const Vec3 axis = dipole_direction<double>(s.axis.theta, s.axis.phi);
      for (Pole pole : {Pole::monopole, Pole::dipole}) {
        if (!s.has(pole)) continue;
        CVecX h;
        detail::pole_response(scene.array().positions(), s.position, axis, k, pole, h);
        responses.push_back(std::move(h));
        amplitude.push_back(std::sqrt(s.spectrum(pole)[j] / 2.0));
      }
    }
    CMatX p = CMatX::Zero(m_count, snapshots);
    for (Index s = 0; s < snapshots; ++s) {
      for (std::size_t n = 0; n < responses.size(); ++n) {
        const double re = normal(rng);
        const double im = normal(rng);
        p.col(s) += Complex(amplitude[n] * re, amplitude[n] * im) * responses[n];
      }
    }
    CMatX c = CMatX::Zero(m_count, m_count);
    c.selfadjointView<Eigen::Lower>().rankUpdate(p, 1.0 / static_cast<double>(snapshots));
    detail::mirror_lower(c);
    out[jj] = std::move(c);
  });
  return CsmSet(scene.grid(), std::move(out));
}

CsmSet superpose(const CsmSet& a, const CsmSet& b) {
  if (!(a.grid() == b.grid())) throw std::invalid_argument("superpose: frequency grids differ");
  if (a.mic_count() != b.mic_count()) throw std::invalid_argument("superpose: microphone counts differ");
  std::vector<CMatX> out(a.matrices().size());
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = a.matrices()[j] + b.matrices()[j];
  return CsmSet(a.grid(), std::move(out));
}

double frobenius_distance(const CsmSet& a, const CsmSet& b) {
  if (!(a.grid() == b.grid()) || a.mic_count() != b.mic_count()) {
    throw std::invalid_argument("frobenius_distance: incompatible CSM sets");
  }
  double sum = 0.0;
  for (Index j = 0; j < a.frequency_count(); ++j) sum += (a.at(j) - b.at(j)).squaredNorm();
  return std::sqrt(sum);
}

GroundTruthSpectrum ground_truth_psd(const CsmSet& csm, const Vec3& y, const MicArray& array) {
  if (array.size() != csm.mic_count()) throw std::invalid_argument("ground_truth_psd: array size mismatch");
  const UpperTriIndex tri(csm.mic_count());
  GroundTruthSpectrum out{VecX(csm.frequency_count()), VecX(csm.frequency_count())};
  CVecX h;
  for (Index j = 0; j < csm.frequency_count(); ++j) {
    detail::pole_response(array.positions(), y, Vec3::Zero(), csm.grid().wavenumber(j), Pole::monopole, h);
    VecX ratio(tri.size());
    for (Index p = 0; p < tri.size(); ++p) {
      const auto [i, l] = tri.pairs()[static_cast<std::size_t>(p)];
      const Complex t = h[i] * std::conj(h[l]);
      if (std::abs(t) == 0.0) throw std::domain_error("ground_truth_psd: zero propagation entry");
      ratio[p] = std::abs(csm.at(j)(i, l) / t);
    }
    const double mean = ratio.mean();
    out.mean[j] = mean;
    out.std[j] = std::sqrt((ratio.array() - mean).square().mean());
  }
  return out;
}

// --------------------------------------------------------------------- I/O

namespace {

constexpr char kMagic[8] = {'C', 'M', 'F', 'C', 'S', 'M', '0', '1'};

template <typename T> void put_le(std::ostream& out, T value) {
  unsigned char bytes[sizeof(T)];
  std::memcpy(bytes, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  out.write(reinterpret_cast<const char*>(bytes), sizeof(T));
}

template <typename T> T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  in.read(reinterpret_cast<char*>(bytes), sizeof(T));
  if (!in) throw std::runtime_error("read_csm_binary: truncated input");
  if constexpr (std::endian::native == std::endian::big) std::reverse(bytes, bytes + sizeof(T));
  T value;
  std::memcpy(&value, bytes, sizeof(T));
  return value;
}

}  // namespace

void write_csm_binary(const CsmSet& csm, std::ostream& out) {
  out.write(kMagic, sizeof(kMagic));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(csm.mic_count()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(csm.frequency_count()));
  put_le<double>(out, csm.grid().speed_of_sound());
  for (double f : csm.grid().frequencies()) put_le<double>(out, f);
  for (const auto& c : csm.matrices()) {
    for (Index i = 0; i < c.rows(); ++i) {
      for (Index j = 0; j < c.cols(); ++j) {
        put_le<double>(out, c(i, j).real());
        put_le<double>(out, c(i, j).imag());
      }
    }
  }
  if (!out) throw std::runtime_error("write_csm_binary: write failed");
}

CsmSet read_csm_binary(std::istream& in) {
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error("read_csm_binary: bad magic, expected CMFCSM01");
  }
  const auto m = static_cast<Index>(get_le<std::uint32_t>(in));
  const auto f = static_cast<std::size_t>(get_le<std::uint32_t>(in));
  const double c0 = get_le<double>(in);
  std::vector<double> freqs(f);
  for (auto& v : freqs) v = get_le<double>(in);
  std::vector<CMatX> mats(f, CMatX(m, m));
  for (auto& c : mats) {
    for (Index i = 0; i < m; ++i) {
      for (Index j = 0; j < m; ++j) {
        const double re = get_le<double>(in);
        const double im = get_le<double>(in);
        c(i, j) = Complex(re, im);
      }
    }
  }
  return CsmSet(FrequencyGrid(std::move(freqs), c0), std::move(mats));
}

void write_csm_text(const CsmSet& csm, std::ostream& out) {
  out << std::setprecision(17);
  out << "# cmfbeam csm v1\n# units: frequency Hz, speed_of_sound m/s, entries Pa^2/Hz (re im pairs)\n";
  out << "M " << csm.mic_count() << "\nF " << csm.frequency_count() << "\nspeed_of_sound "
      << csm.grid().speed_of_sound() << "\nfrequencies";
  for (double f : csm.grid().frequencies()) out << ' ' << f;
  out << '\n';
  for (Index j = 0; j < csm.frequency_count(); ++j) {
    out << "frequency " << csm.grid().frequency(j) << '\n';
    const CMatX& c = csm.at(j);
    for (Index i = 0; i < c.rows(); ++i) {
      for (Index l = 0; l < c.cols(); ++l) out << (l ? " " : "") << c(i, l).real() << ' ' << c(i, l).imag();
      out << '\n';
    }
  }
}

CsmSet read_csm_text(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  auto next_line = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] != '#') return std::istringstream(line);
    }
    throw std::runtime_error("read_csm_text: unexpected end of input after line " + std::to_string(line_no));
  };
  auto expect_key = [&](std::istringstream& s, const std::string& key) {
    std::string k;
    s >> k;
    if (k != key) {
      throw std::runtime_error("read_csm_text: line " + std::to_string(line_no) + ": expected '" + key + "'");
    }
  };
  Index m = 0;
  std::size_t f = 0;
  double c0 = 0.0;
  {
    auto s = next_line();
    expect_key(s, "M");
    s >> m;
  }
  {
    auto s = next_line();
    expect_key(s, "F");
    s >> f;
  }
  {
    auto s = next_line();
    expect_key(s, "speed_of_sound");
    s >> c0;
  }
  std::vector<double> freqs(f);
  {
    auto s = next_line();
    expect_key(s, "frequencies");
    for (auto& v : freqs) {
      if (!(s >> v)) throw std::runtime_error("read_csm_text: line " + std::to_string(line_no) + ": short frequency list");
    }
  }
  std::vector<CMatX> mats(f, CMatX(m, m));
  for (std::size_t j = 0; j < f; ++j) {
    auto s = next_line();
    expect_key(s, "frequency");
    for (Index i = 0; i < m; ++i) {
      auto row = next_line();
      for (Index l = 0; l < m; ++l) {
        double re = 0.0;
        double im = 0.0;
        if (!(row >> re >> im)) {
          throw std::runtime_error("read_csm_text: line " + std::to_string(line_no) + ": expected " +
                                   std::to_string(2 * m) + " numbers");
        }
        mats[j](i, l) = Complex(re, im);
      }
    }
  }
  return CsmSet(FrequencyGrid(std::move(freqs), c0), std::move(mats));
}

void save_csm(const CsmSet& csm, const std::filesystem::path& path) {
  const bool binary = path.extension() == ".csmb";
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw std::runtime_error("save_csm: cannot open " + path.string());
  if (binary) {
    write_csm_binary(csm, out);
  } else {
    write_csm_text(csm, out);
  }
}

CsmSet load_csm(const std::filesystem::path& path) {
  const bool binary = path.extension() == ".csmb";
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw std::runtime_error("load_csm: cannot open " + path.string());
  return binary ? read_csm_binary(in) : read_csm_text(in);
}

}  // namespace cmfbeam
