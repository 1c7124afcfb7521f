// SPDX-License-Identifier: Apache-2.0

#include "preempt/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>

namespace preempt {

PilotObservation receive_pilot(const ChannelVector& h, Complex pilot, double noise_power, Rng& rng) {
  PilotObservation obs;
  obs.pilot = pilot;
  obs.noise_power = noise_power;
  obs.y = h * pilot;
  for (Eigen::Index i = 0; i < obs.y.size(); ++i) obs.y(i) += complex_normal(rng, noise_power);
  return obs;
}

ChannelVector estimate_channel(const PilotObservation& obs, double prior_snr) {
  const double shrink = std::isinf(prior_snr) ? 1.0 : prior_snr / (1.0 + prior_snr);
  const Complex scale = shrink * std::conj(obs.pilot) / std::norm(obs.pilot);
  return obs.y * scale;
}

double measured_snr(const PilotObservation& obs) {
  if (obs.noise_power <= 0.0) return std::numeric_limits<double>::infinity();
  const double per_antenna = obs.y.squaredNorm() / static_cast<double>(obs.y.size());
  return std::max(0.0, per_antenna / obs.noise_power - 1.0);
}

Complex ls_los_gain(const PilotObservation& obs, const LosGeometry& los, const ArrayGeometry& geom) {
  const ChannelVector a = array_response(geom, los.azimuth, los.elevation);
  // a has unit-modulus entries, so its pseudo-inverse is a^H / N_T.
  const Complex projected = a.dot(obs.y) / static_cast<double>(a.size());
  const Complex ls = projected * std::conj(obs.pilot) / std::norm(obs.pilot);
  return std::conj(propagation_phase(los.distance, geom.carrier_hz)) * ls;
}

ChannelEstimate decompose(const PilotObservation& obs, const ChannelVector& h_hat,
                          const std::optional<LosGeometry>& los, const ArrayGeometry& geom) {
  ChannelEstimate est;
  est.full = h_hat;
  if (los) {
    est.has_los = true;
    est.los_gain = ls_los_gain(obs, *los, geom);
    est.los = (est.los_gain * propagation_phase(los->distance, geom.carrier_hz)) *
              array_response(geom, los->azimuth, los->elevation);
  } else {
    est.los = ChannelVector::Zero(h_hat.size());
  }
  est.nlos = est.full - est.los;
  return est;
}

double q_function(double x) { return 0.5 * std::erfc(x / std::sqrt(2.0)); }

double ser_from_snr(double snr, int bits) {
  if (snr < 0.0 || std::isnan(snr)) throw std::domain_error("SER requires a non-negative SNR");
  if (bits != 2 && bits != 4 && bits != 6 && bits != 8) {
    throw std::domain_error("unsupported modulation bits " + std::to_string(bits));
  }
  const double m = std::ldexp(1.0, bits);
  const double root = std::sqrt(m);
  const double p = 2.0 * (root - 1.0) / root * q_function(std::sqrt(3.0 * snr / (m - 1.0)));
  const double s = 1.0 - p;
  return std::clamp(1.0 - s * s, 0.0, 1.0);
}

int McsTable::expected_bits(int m) {
  if (m >= 0 && m <= 4) return 2;
  if (m <= 10) return 4;
  if (m <= 19) return 6;
  if (m <= 27) return 8;
  return -1;
}

McsTable::McsTable(std::vector<McsEntry> entries) : entries_(std::move(entries)) {
  if (entries_.empty()) throw std::invalid_argument("MCS table is empty");
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& e = entries_[i];
    if (e.index != static_cast<int>(i)) {
      throw std::invalid_argument("MCS table indices must be contiguous from 0");
    }
    if (e.bits != expected_bits(e.index)) {
      throw std::invalid_argument("MCS " + std::to_string(e.index) + " has " +
                                  std::to_string(e.bits) + " bits, expected " +
                                  std::to_string(expected_bits(e.index)));
    }
    if (e.spectral_efficiency < 0.0) throw std::invalid_argument("negative spectral efficiency");
    if (i > 0 && e.spectral_efficiency < entries_[i - 1].spectral_efficiency) {
      throw std::invalid_argument("spectral efficiency must be non-decreasing in the MCS index");
    }
  }
}

McsTable McsTable::nr_256qam() {
  static const double kSe[] = {0.2344, 0.3770, 0.6016, 0.8770, 1.1758, 1.4766, 1.6953,
                               1.9141, 2.1602, 2.4063, 2.5703, 2.7305, 3.0293, 3.3223,
                               3.6094, 3.9023, 4.2129, 4.5234, 4.8164, 5.1152, 5.3320,
                               5.5547, 5.8906, 6.2266, 6.5703, 6.9141, 7.1602, 7.4063};
  std::vector<McsEntry> e;
  for (int m = 0; m < 28; ++m) e.push_back({m, expected_bits(m), kSe[m]});
  return McsTable(std::move(e));
}

McsTable McsTable::load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open MCS table " + path.string());
  std::string line;
  std::vector<McsEntry> entries;
  bool header = true;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (header) {
      header = false;
      if (line.rfind("m,", 0) == 0) continue;
    }
    std::replace(line.begin(), line.end(), ',', ' ');
    std::istringstream ss(line);
    McsEntry e;
    if (!(ss >> e.index >> e.bits >> e.spectral_efficiency)) {
      throw std::runtime_error(path.string() + ":" + std::to_string(line_no) + ": malformed row");
    }
    entries.push_back(e);
  }
  return McsTable(std::move(entries));
}

std::optional<int> min_rb_count(double rate_min_bits, int mcs, const McsTable& table, int n_re,
                                int n_sdm) {
  const double per_rb = table.at(mcs).spectral_efficiency * n_re * n_sdm;
  if (per_rb <= 0.0) return std::nullopt;
  if (rate_min_bits <= 0.0) return 0;
  return static_cast<int>(std::ceil(rate_min_bits / per_rb - 1e-12));
}

ChannelVector steering_from_cosines(const ArrayGeometry& geom, double u, double v) {
  ChannelVector a(geom.size());
  const double k = 2.0 * std::numbers::pi * geom.spacing;
  for (int p = 0; p < geom.nx; ++p)
    for (int q = 0; q < geom.ny; ++q) a(p * geom.ny + q) = std::polar(1.0, k * (p * u + q * v));
  return a;
}

AngularGrid::AngularGrid(const ArrayGeometry& geom, int oversampling) : geom_(geom) {
  step_ = 1.0 / (geom.spacing * std::max(geom.nx, geom.ny) * oversampling);
  const int half = static_cast<int>(std::floor(1.0 / step_));
  for (int i = -half; i <= half; ++i) {
    for (int j = -half; j <= half; ++j) {
      const double u = i * step_;
      const double v = j * step_;
      if (u * u + v * v <= 1.0) cosines_.emplace_back(u, v);
    }
  }
  atoms_.resize(geom.size(), static_cast<Eigen::Index>(cosines_.size()));
  for (std::size_t c = 0; c < cosines_.size(); ++c) {
    atoms_.col(static_cast<Eigen::Index>(c)) =
        steering_from_cosines(geom, cosines_[c].first, cosines_[c].second);
  }
}

std::vector<PathParams> extract_paths(const ChannelVector& residual_in, const AngularGrid& grid,
                                      int max_paths, double energy_floor, double nominal_distance) {
  const ArrayGeometry& geom = grid.geometry();
  const int n = geom.size();
  std::vector<std::pair<double, double>> picked;
  Eigen::MatrixXcd basis(n, 0);
  ChannelVector residual = residual_in;
  Eigen::VectorXcd coeffs;

  auto score = [&](double u, double v) {
    return std::norm(steering_from_cosines(geom, u, v).dot(residual));
  };

  for (int iter = 0; iter < max_paths; ++iter) {
    const Eigen::VectorXd corr = (grid.atoms().adjoint() * residual).cwiseAbs2();
    Eigen::Index idx = 0;
    double best = corr.maxCoeff(&idx);
    auto [bu, bv] = grid.cosines(idx);
    for (double step = grid.step() / 2; step > 1e-7; step /= 2) {
      bool moved = true;
      while (moved) {
        moved = false;
        const double cand[4][2] = {{bu + step, bv}, {bu - step, bv}, {bu, bv + step}, {bu, bv - step}};
        for (const auto& c : cand) {
          if (c[0] * c[0] + c[1] * c[1] > 1.0) continue;
          const double val = score(c[0], c[1]);
          if (val > best) {
            best = val;
            bu = c[0];
            bv = c[1];
            moved = true;
          }
        }
      }
    }
    if (best / n < energy_floor) break;
    picked.emplace_back(bu, bv);
    basis.conservativeResize(n, basis.cols() + 1);
    basis.col(basis.cols() - 1) = steering_from_cosines(geom, bu, bv);
    coeffs = basis.colPivHouseholderQr().solve(residual_in);
    residual = residual_in - basis * coeffs;
  }

  std::vector<PathParams> out;
  const Complex derotate = std::conj(propagation_phase(nominal_distance, geom.carrier_hz));
  for (std::size_t i = 0; i < picked.size(); ++i) {
    const auto [u, v] = picked[i];
    PathParams p;
    p.elevation = std::asin(std::clamp(v, -1.0, 1.0));
    const double c = std::cos(p.elevation);
    p.azimuth = c > 1e-12 ? std::asin(std::clamp(u / c, -1.0, 1.0)) : 0.0;
    p.distance = nominal_distance;
    p.gain = coeffs(static_cast<Eigen::Index>(i)) * derotate;
    out.push_back(p);
  }
  return out;
}

}  // namespace preempt
