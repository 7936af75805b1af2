#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <stdexcept>
#include <vector>

namespace risee {

using cvec = Eigen::VectorXcd;
using cmat = Eigen::MatrixXcd;
using rvec = Eigen::VectorXd;
using rmat = Eigen::MatrixXd;
using complexd = std::complex<double>;

namespace detail {
constexpr double kInvLn2 = 1.4426950408889634;  // 1/ln 2
}

enum class RisMode { Active, NearlyPassive };
enum class CsiMode { Perfect, Statistical };
enum class Objective { SEE, SSR };

/// Static scenario description. All powers in linear watts.
struct SystemParams {
  int K = 1;    // users
  int N_B = 1;  // receive antennas
  int N = 1;    // RIS elements
  double B = 20e6;  // bandwidth, Hz

  double sigma2_B = 1e-12;    // per-antenna noise at the legitimate receiver
  double sigma2_RIS = 1e-12;  // RIS amplification noise
  double sigma2_E = 1e-12;    // eavesdropper noise

  rvec P_max;            // per-user transmit power budget, length K
  double P_R_max = 0.0;  // RIS amplifier RF budget; ignored when NearlyPassive

  RisMode ris_mode = RisMode::Active;
  double P_c_n = 0.0;    // per-element static power
  double P_0_RIS = 0.0;  // residual RIS static power
  double P_0 = 1e-3;     // transmitter + receiver static power

  double static_power() const { return N * P_c_n + P_0_RIS + P_0; }
  double ris_rf_budget() const {
    return ris_mode == RisMode::Active ? P_R_max : 0.0;
  }

  void validate() const {
    if (K < 1 || N_B < 1 || N < 1) throw std::invalid_argument("K, N_B, N must be >= 1");
    if (B <= 0) throw std::invalid_argument("B must be > 0");
    if (sigma2_B < 0 || sigma2_RIS < 0 || sigma2_E < 0 || P_R_max < 0 ||
        P_c_n < 0 || P_0_RIS < 0 || P_0 < 0)
      throw std::invalid_argument("powers must be >= 0");
    if (P_max.size() != K) throw std::invalid_argument("P_max length must equal K");
    if ((P_max.array() < 0).any()) throw std::invalid_argument("P_max entries must be >= 0");
  }
};

/// One realization of all propagation matrices plus the eavesdropper CSI model.
struct ChannelSet {
  std::vector<cvec> h;  // K user->RIS channels, length N each
  cmat G_B;             // RIS->receiver, N_B x N
  cvec g_hat;           // estimated mean RIS->eavesdropper channel
  double sigma2_g = 0;  // per-element CSI error variance
  cvec g_true;          // realized RIS->eavesdropper channel

  void validate(const SystemParams& params) const {
    if ((int)h.size() != params.K) throw std::invalid_argument("channel count mismatch");
    for (const auto& hk : h)
      if (hk.size() != params.N) throw std::invalid_argument("user channel length mismatch");
    if (G_B.rows() != params.N_B || G_B.cols() != params.N)
      throw std::invalid_argument("G_B dimension mismatch");
    if (g_hat.size() != params.N || g_true.size() != params.N)
      throw std::invalid_argument("eavesdropper channel length mismatch");
    if (sigma2_g < 0) throw std::invalid_argument("sigma2_g must be >= 0");
  }
};

/// Decision variables: RIS reflections, transmit powers, receive filter bank.
struct Allocation {
  cvec gamma;  // length N
  rvec p;      // length K
  cmat C;      // N_B x K, column k is the filter for user k
};

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watt_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }
inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

// Real embedding of complex vectors, interleaved (Re, Im) pairs.
inline rvec embed(const cvec& z) {
  rvec x(2 * z.size());
  for (Eigen::Index n = 0; n < z.size(); ++n) {
    x(2 * n) = z(n).real();
    x(2 * n + 1) = z(n).imag();
  }
  return x;
}

inline cvec unembed(const rvec& x) {
  cvec z(x.size() / 2);
  for (Eigen::Index n = 0; n < z.size(); ++n) z(n) = complexd(x(2 * n), x(2 * n + 1));
  return z;
}

}  // namespace risee
