#pragma once

// Random scenario synthesis: node geometry, path loss, Rician fading,
// eavesdropper CSI error.

#include <random>

#include "risee/types.hpp"

namespace risee {

struct GeometryConfig {
  double cell_radius = 50.0;        // m, user annulus outer radius around the RIS
  double min_user_ris_dist = 20.0;  // m
  double user_height_min = 1.5, user_height_max = 2.5;
  double bs_ris_dist = 20.0;
  double eve_radius_around_bs = 30.0;
  double ris_height = 10.0;
  double bs_height = 10.0;
  double eve_height_min = 1.5, eve_height_max = 2.5;

  void validate() const {
    if (cell_radius <= 0 || min_user_ris_dist <= 0 || bs_ris_dist <= 0 ||
        eve_radius_around_bs <= 0 || ris_height <= 0 || bs_height <= 0)
      throw std::invalid_argument("distances must be > 0");
    if (user_height_min > user_height_max || eve_height_min > eve_height_max)
      throw std::invalid_argument("height ranges must be ordered");
    if (min_user_ris_dist > cell_radius)
      throw std::invalid_argument("user annulus is empty");
  }
};

struct FadingConfig {
  double n_h = 4.0;   // path-loss exponent user->RIS
  double n_gE = 4.0;  // eavesdropper->RIS
  double n_gB = 2.0;  // RIS->BS
  double K_t = 4.0;   // Rician factor RIS->BS
  double K_r = 2.0;   // Rician factor users/eve->RIS
  double noise_psd_dbm_hz = -174.0;
  double noise_figure_db = 5.0;

  void validate() const {
    if (n_h < 2 || n_gE < 2 || n_gB < 2) throw std::invalid_argument("exponents must be >= 2");
    if (K_t < 0 || K_r < 0) throw std::invalid_argument("Rician factors must be >= 0");
  }
};

using vec3 = Eigen::Vector3d;

struct NodePositions {
  std::vector<vec3> users;
  vec3 bs;
  vec3 ris;
  vec3 eve;
};

inline vec3 uniform_annulus_point(std::mt19937_64& rng, const vec3& center, double r_min,
                                  double r_max, double h_min, double h_max) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double r = std::sqrt(r_min * r_min + unif(rng) * (r_max * r_max - r_min * r_min));
  const double theta = 2.0 * M_PI * unif(rng);
  const double h = h_min + unif(rng) * (h_max - h_min);
  return {center.x() + r * std::cos(theta), center.y() + r * std::sin(theta), h};
}

inline NodePositions place_nodes(int K, const GeometryConfig& geom, std::uint64_t seed) {
  geom.validate();
  std::mt19937_64 rng(seed);
  NodePositions pos;
  pos.ris = {0.0, 0.0, geom.ris_height};
  pos.bs = {geom.bs_ris_dist, 0.0, geom.bs_height};
  pos.users.reserve(K);
  for (int k = 0; k < K; ++k)
    pos.users.push_back(uniform_annulus_point(rng, pos.ris, geom.min_user_ris_dist,
                                              geom.cell_radius, geom.user_height_min,
                                              geom.user_height_max));
  pos.eve = uniform_annulus_point(rng, pos.bs, 0.0, geom.eve_radius_around_bs,
                                  geom.eve_height_min, geom.eve_height_max);
  return pos;
}

inline complexd cgauss(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, M_SQRT1_2);
  const double re = n(rng);
  const double im = n(rng);
  return {re, im};
}

/// Rician vector with unit average element power. The LOS component has
/// unit-modulus entries with a linear phase progression from a random angle.
inline cvec rician_vector(int dim, double k_factor, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double phi0 = 2.0 * M_PI * unif(rng);
  const double slope = M_PI * std::sin(2.0 * M_PI * unif(rng));
  cvec v(dim);
  const double los_w = std::sqrt(k_factor / (1.0 + k_factor));
  const double nlos_w = std::sqrt(1.0 / (1.0 + k_factor));
  for (int n = 0; n < dim; ++n)
    v(n) = los_w * std::polar(1.0, phi0 + slope * n) + nlos_w * cgauss(rng);
  return v;
}

inline cmat rician_matrix(int rows, int cols, double k_factor, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double phi_r = 2.0 * M_PI * unif(rng);
  const double slope_r = M_PI * std::sin(2.0 * M_PI * unif(rng));
  const double phi_c = 2.0 * M_PI * unif(rng);
  const double slope_c = M_PI * std::sin(2.0 * M_PI * unif(rng));
  cvec ar(rows), ac(cols);
  for (int i = 0; i < rows; ++i) ar(i) = std::polar(1.0, phi_r + slope_r * i);
  for (int j = 0; j < cols; ++j) ac(j) = std::polar(1.0, phi_c + slope_c * j);
  cmat m = std::sqrt(k_factor / (1.0 + k_factor)) * (ar * ac.adjoint());
  const double nlos_w = std::sqrt(1.0 / (1.0 + k_factor));
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) += nlos_w * cgauss(rng);
  return m;
}

/// d^{-n} with a 1 m reference distance; amplitude scale is sqrt of this.
inline double pathloss(double distance_m, double exponent) {
  return std::pow(distance_m, -exponent);
}

/// Total noise power over bandwidth B from a PSD in dBm/Hz plus a noise figure.
inline double noise_power(double bandwidth_hz, double psd_dbm_hz, double noise_figure_db) {
  return dbm_to_watt(psd_dbm_hz + noise_figure_db + 10.0 * std::log10(bandwidth_hz));
}

/// Normalized error variance of the eavesdropper CSI model:
/// E[||delta||^2] / E[||g||^2] with E[||g||^2] = ||g_hat||^2 + N sigma_g^2.
inline double nev(const ChannelSet& channels) {
  const double err = channels.g_hat.size() * channels.sigma2_g;
  const double total = channels.g_hat.squaredNorm() + err;
  if (err == 0.0) return 0.0;
  return err / total;
}

/// One full scenario realization. nev_target is the NEV the generated
/// sigma2_g realizes exactly (must be in [0, 1)).
inline ChannelSet generate_scenario(const SystemParams& params, const GeometryConfig& geom,
                                    const FadingConfig& fading, std::uint64_t seed,
                                    double nev_target = 0.0) {
  fading.validate();
  if (nev_target < 0.0 || nev_target >= 1.0)
    throw std::invalid_argument("nev_target must be in [0, 1)");
  const NodePositions pos = place_nodes(params.K, geom, seed);
  std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);

  ChannelSet ch;
  ch.h.reserve(params.K);
  for (int k = 0; k < params.K; ++k) {
    const double d = (pos.users[k] - pos.ris).norm();
    ch.h.push_back(std::sqrt(pathloss(d, fading.n_h)) *
                   rician_vector(params.N, fading.K_r, rng));
  }
  const double d_bs = (pos.bs - pos.ris).norm();
  ch.G_B = std::sqrt(pathloss(d_bs, fading.n_gB)) *
           rician_matrix(params.N_B, params.N, fading.K_t, rng);
  const double d_eve = (pos.eve - pos.ris).norm();
  ch.g_hat = std::sqrt(pathloss(d_eve, fading.n_gE)) *
             rician_vector(params.N, fading.K_r, rng);

  if (nev_target == 0.0) {
    ch.sigma2_g = 0.0;
    ch.g_true = ch.g_hat;
  } else {
    ch.sigma2_g = nev_target * ch.g_hat.squaredNorm() / (params.N * (1.0 - nev_target));
    cvec delta(params.N);
    for (int n = 0; n < params.N; ++n) delta(n) = std::sqrt(ch.sigma2_g) * cgauss(rng);
    ch.g_true = ch.g_hat + delta;
  }
  return ch;
}

}  // namespace risee
