#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <random>
#include <vector>

#include "lrhp/alphabets.hpp"

namespace lrhp {

using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using RMatrix = Eigen::MatrixXd;
using RVector = Eigen::VectorXd;

enum class PowerConvention {
  EqualSplit,    // P_s = P / S
  PerSubcarrier  // P_s = P
};

struct SystemConfig {
  int n_tx = 64;
  int m_rf = 8;
  int n_users = 2;
  int n_subcarriers = 64;
  int analog_bits = 1;
  /// Quantization levels per real dimension; 0 selects an unquantized digital precoder.
  int quant_levels = 2;
  double total_power_dbm = 35.0;
  double carrier_ghz = 28.0;
  double noise_figure_db = 10.0;
  double subcarrier_bandwidth_hz = 10e6;
  double rician_k_db = 10.0;
  int n_taps_minus_one = 3;
  std::array<double, 2> distance_range_m{100.0, 200.0};
  std::array<double, 2> angle_range_rad{-1.0471975511965976, 1.0471975511965976};
  int n_sym = 140;
  double fronthaul_budget_bits_per_symbol = 15.0;
  double ep_damping = 0.5;
  int ep_max_iter = 30;
  double ep_tol = 1e-4;
  double outer_tol = 0.01;
  int outer_max_iter = 50;
  double bisection_tol = 1e-3;
  PowerConvention power_convention = PowerConvention::EqualSplit;
  std::uint64_t seed = 1;

  bool unquantized_digital() const noexcept { return quant_levels == 0; }
  /// Throws ParameterError on any violated invariant.
  void validate() const;
  double total_power_w() const;
  double subcarrier_power_w() const;
  double noise_power_w() const;
};

/// Columns are ordered user-major: column k*S + s is user k, sub-carrier s.
struct ChannelSet {
  CMatrix h;
  std::vector<double> user_distances_m;
  std::vector<double> user_angles_rad;
  int n_users = 0;
  int n_subcarriers = 0;

  auto user_view(int k) const { return h.middleCols(static_cast<Eigen::Index>(k) * n_subcarriers, n_subcarriers); }
  auto column(int k, int s) const { return h.col(static_cast<Eigen::Index>(k) * n_subcarriers + s); }
};

struct LinkBudget {
  double data_bits_per_symbol = 0.0;
  double precoder_update_bits_per_symbol = 0.0;
  double proposed_total = 0.0;
  double conventional_total = 0.0;
  int iq_bits = 0;
  double max_levels_log2 = 0.0;
};

/// Independent random stream identified by (seed, trial, user). The engine
/// state depends only on the key, so streams can be created on any worker.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t trial, std::uint64_t user);
  std::mt19937_64& engine() noexcept { return engine_; }
  double uniform(double lo, double hi);
  /// Circularly-symmetric complex normal with unit variance.
  cplx complex_normal();

 private:
  std::mt19937_64 engine_;
};

CVector array_response(double angle_rad, int n);

double path_loss_db(double distance_m, double carrier_ghz);

double noise_power_dbm(const SystemConfig& config);

inline double dbm_to_watt(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

/// Multi-tap Rician channel for every user; user k draws from RngStream(seed, trial, k).
ChannelSet draw_channel(const SystemConfig& config, std::uint64_t trial);

/// Same generative model with explicit per-user streams.
ChannelSet draw_channel(const SystemConfig& config, std::vector<RngStream>& user_streams);

LinkBudget fronthaul_accounting(const SystemConfig& config, int modulation_order, int iq_bits);

/// Largest L = 2^m with log2(L) <= C_F * N_sym / (2 M_T K S); 0 if even L = 2 violates the budget.
int max_supported_levels(const SystemConfig& config);

}  // namespace lrhp
