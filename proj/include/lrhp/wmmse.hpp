#pragma once

#include <vector>

#include "lrhp/channel.hpp"

namespace lrhp {

/// Infinite-resolution fully-digital precoder, laid out like ChannelSet::h.
struct FullyDigitalPrecoder {
  CMatrix f;
  int n_users = 0;
  int n_subcarriers = 0;

  auto column(int k, int s) const { return f.col(static_cast<Eigen::Index>(k) * n_subcarriers + s); }
};

struct RateReport {
  RMatrix per_user_per_subcarrier;  // K x S, bits/s/Hz
  double sum_rate_per_subcarrier_avg = 0.0;
  double total_sum_rate = 0.0;
};

struct WmmseTrace {
  /// Sum over sub-carriers of the sum rate after each iteration; entry 0 is the initial point.
  std::vector<double> utility;
  std::vector<int> iterations_per_subcarrier;
  bool truncated = false;
};

struct WmmseOptions {
  double tol = 1e-4;
  int max_iter = 200;
};

/// SINR of user k on sub-carrier s. The channel acts through a plain
/// transpose: y = h^T f.
double sinr(const ChannelSet& h, const CMatrix& f, int k, int s, double n0);

RateReport sum_rate(const ChannelSet& h, const CMatrix& f, double n0);

/// ||F_FD - F_RF F_BB||_F^2
double mse_to_target(const CMatrix& f_fd, const CMatrix& f_rf, const CMatrix& f_bb);

/// Total transmit power on sub-carrier s for the effective precoder f.
double subcarrier_power(const CMatrix& f, int n_users, int n_subcarriers, int s);

/// Matched filter per user with the budget split equally among users with a
/// nonzero channel.
CMatrix matched_filter_precoder(const ChannelSet& h, double p_s);

/// Per-sub-carrier WMMSE (receiver, weight, precoder with bisected power
/// multiplier) started from the matched filter.
std::pair<FullyDigitalPrecoder, WmmseTrace> wmmse_fully_digital(const ChannelSet& h, double p_s, double n0,
                                                                const WmmseOptions& options = {});

}  // namespace lrhp
