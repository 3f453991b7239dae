#include "lrhp/channel.hpp"

#include <cmath>
#include <numbers>

#include "lrhp/errors.hpp"

namespace lrhp {

void SystemConfig::validate() const {
  if (n_users < 1 || m_rf < n_users || n_tx <= m_rf)
    throw ParameterError("need 1 <= K <= M_T < N_T");
  if (n_subcarriers < 1) throw ParameterError("need at least one sub-carrier");
  if (analog_bits < 1 || analog_bits > 16) throw ParameterError("analog_bits must be in [1, 16]");
  if (quant_levels != 0 && (quant_levels < 2 || (quant_levels & (quant_levels - 1)) != 0))
    throw ParameterError("quant_levels must be 0 (unquantized) or a power of two >= 2");
  if (!std::isfinite(total_power_dbm)) throw ParameterError("total power must be finite");
  if (!(carrier_ghz > 0.0) || !(subcarrier_bandwidth_hz > 0.0))
    throw ParameterError("carrier frequency and bandwidth must be positive");
  if (n_taps_minus_one < 0) throw ParameterError("tap count must be nonnegative");
  if (!(distance_range_m[0] > 0.0) || distance_range_m[1] < distance_range_m[0])
    throw ParameterError("distance range must be positive and ordered");
  if (angle_range_rad[1] < angle_range_rad[0]) throw ParameterError("angle range must be ordered");
  if (n_sym < 1) throw ParameterError("n_sym must be positive");
  if (!(ep_damping >= 0.0 && ep_damping <= 1.0)) throw ParameterError("EP damping must lie in [0, 1]");
  if (ep_max_iter < 1 || !(ep_tol > 0.0)) throw ParameterError("invalid EP stopping parameters");
  if (!(outer_tol > 0.0) || outer_max_iter < 1) throw ParameterError("invalid outer stopping parameters");
  if (!(bisection_tol > 0.0)) throw ParameterError("bisection tolerance must be positive");
}

double SystemConfig::total_power_w() const { return dbm_to_watt(total_power_dbm); }

double SystemConfig::subcarrier_power_w() const {
  return power_convention == PowerConvention::EqualSplit ? total_power_w() / n_subcarriers : total_power_w();
}

double SystemConfig::noise_power_w() const { return dbm_to_watt(noise_power_dbm(*this)); }

RngStream::RngStream(std::uint64_t seed, std::uint64_t trial, std::uint64_t user) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(trial), static_cast<std::uint32_t>(trial >> 32),
                    static_cast<std::uint32_t>(user), static_cast<std::uint32_t>(user >> 32),
                    0x6c726870u};
  engine_.seed(seq);
}

double RngStream::uniform(double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

cplx RngStream::complex_normal() {
  std::normal_distribution<double> n(0.0, std::sqrt(0.5));
  const double re = n(engine_);
  const double im = n(engine_);
  return {re, im};
}

CVector array_response(double angle_rad, int n) {
  if (n < 1) throw ParameterError("array size must be positive");
  CVector a(n);
  const double phase = std::numbers::pi * std::sin(angle_rad);
  for (int m = 0; m < n; ++m) a(m) = std::polar(1.0, phase * m);
  return a;
}

double path_loss_db(double distance_m, double carrier_ghz) {
  if (!(distance_m > 0.0) || !(carrier_ghz > 0.0))
    throw ParameterError("path loss needs positive distance and carrier frequency");
  return 22.0 * std::log10(distance_m) + 28.0 + 20.0 * std::log10(carrier_ghz);
}

double noise_power_dbm(const SystemConfig& config) {
  if (!(config.subcarrier_bandwidth_hz > 0.0)) throw ParameterError("bandwidth must be positive");
  return -174.0 + 10.0 * std::log10(config.subcarrier_bandwidth_hz) + config.noise_figure_db;
}

ChannelSet draw_channel(const SystemConfig& config, std::vector<RngStream>& user_streams) {
  const int nt = config.n_tx, n_users = config.n_users, n_sc = config.n_subcarriers;
  const int taps = config.n_taps_minus_one;
  if (static_cast<int>(user_streams.size()) != n_users)
    throw ParameterError("need one random stream per user");

  const double kappa = std::pow(10.0, config.rician_k_db / 10.0);
  const double los_weight = std::isinf(kappa) ? 1.0 : std::sqrt(kappa / (kappa + 1.0));
  const double nlos_weight = std::isinf(kappa) ? 0.0 : std::sqrt(1.0 / (kappa + 1.0));

  ChannelSet ch;
  ch.n_users = n_users;
  ch.n_subcarriers = n_sc;
  ch.h = CMatrix::Zero(nt, static_cast<Eigen::Index>(n_users) * n_sc);
  ch.user_distances_m.resize(n_users);
  ch.user_angles_rad.resize(n_users);

  for (int k = 0; k < n_users; ++k) {
    auto& rng = user_streams[k];
    const double d = config.distance_range_m[0] == config.distance_range_m[1]
                         ? config.distance_range_m[0]
                         : rng.uniform(config.distance_range_m[0], config.distance_range_m[1]);
    const double phi = config.angle_range_rad[0] == config.angle_range_rad[1]
                           ? config.angle_range_rad[0]
                           : rng.uniform(config.angle_range_rad[0], config.angle_range_rad[1]);
    ch.user_distances_m[k] = d;
    ch.user_angles_rad[k] = phi;
    const double amplitude = std::sqrt(std::pow(10.0, -path_loss_db(d, config.carrier_ghz) / 10.0));

    CMatrix tap(nt, taps + 1);
    tap.col(0) = los_weight * amplitude * array_response(phi, nt);
    for (int l = 1; l <= taps; ++l)
      for (int n = 0; n < nt; ++n) tap(n, l) = nlos_weight * amplitude * rng.complex_normal();

    for (int s = 0; s < n_sc; ++s) {
      CVector col = CVector::Zero(nt);
      for (int l = 0; l <= taps; ++l) {
        const double angle = -2.0 * std::numbers::pi * static_cast<double>(l) * s / n_sc;
        col += tap.col(l) * std::polar(1.0, angle);
      }
      ch.h.col(static_cast<Eigen::Index>(k) * n_sc + s) = col;
    }
  }
  return ch;
}

ChannelSet draw_channel(const SystemConfig& config, std::uint64_t trial) {
  std::vector<RngStream> streams;
  streams.reserve(config.n_users);
  for (int k = 0; k < config.n_users; ++k) streams.emplace_back(config.seed, trial, k);
  return draw_channel(config, streams);
}

LinkBudget fronthaul_accounting(const SystemConfig& config, int modulation_order, int iq_bits) {
  if (modulation_order < 2 || iq_bits < 1 || config.n_sym < 1 || config.quant_levels < 2)
    throw ParameterError("fronthaul accounting needs positive counts and L >= 2");
  const double mk_s = static_cast<double>(config.m_rf) * config.n_users * config.n_subcarriers;
  LinkBudget b;
  b.iq_bits = iq_bits;
  b.data_bits_per_symbol =
      static_cast<double>(config.n_users) * config.n_subcarriers * std::log2(static_cast<double>(modulation_order));
  b.precoder_update_bits_per_symbol = 2.0 * std::log2(static_cast<double>(config.quant_levels)) * mk_s / config.n_sym;
  b.max_levels_log2 = config.fronthaul_budget_bits_per_symbol * config.n_sym / (2.0 * mk_s);
  b.proposed_total = b.data_bits_per_symbol + b.precoder_update_bits_per_symbol;
  b.conventional_total = static_cast<double>(config.n_subcarriers) * config.m_rf * iq_bits;
  return b;
}

int max_supported_levels(const SystemConfig& config) {
  const double mk_s = static_cast<double>(config.m_rf) * config.n_users * config.n_subcarriers;
  const double bound = config.fronthaul_budget_bits_per_symbol * config.n_sym / (2.0 * mk_s);
  if (bound < 1.0) return 0;
  const int bits = static_cast<int>(std::floor(bound + 1e-12));
  return bits >= 30 ? (1 << 30) : (1 << bits);
}

}  // namespace lrhp
