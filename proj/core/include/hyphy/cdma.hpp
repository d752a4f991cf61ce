#pragma once

#include "hyphy/common.hpp"

namespace hyphy {

struct CdmaConfig {
    int k_users = 3;
    int n_gain = 32;       // chips per bit
    int m_oversample = 2;  // samples per chip
    int n_packets = 100;
    int l_paths = 3;
    double snr_db = 8.0;
    double nfr_db = 5.0;          // user amplitudes unbalanced around 2 by +-nfr_db
    double rho_mismatch = 0.0;    // chip-flip probability at the base station
    double chip_interval = 1e-3;  // seconds
    double rolloff = 0.5;

    int frame_len() const { return m_oversample * n_gain; }
    int g_len() const { return m_oversample * n_gain + 8 * m_oversample - 1; }
    double t_b() const { return n_gain * chip_interval; }

    void validate() const {
        if (k_users < 1 || n_gain < 1 || n_packets < 1 || l_paths < 1)
            throw std::invalid_argument("CdmaConfig: positive counts required");
        if (m_oversample != 2) throw std::invalid_argument("CdmaConfig: m_oversample is fixed at 2");
        if (!(rho_mismatch >= 0.0 && rho_mismatch <= 1.0))
            throw std::invalid_argument("CdmaConfig: rho_mismatch must be in [0,1]");
    }
};

struct UserChannel {
    cxd amplitude = 1.0;  // A_k
    double offset = 0.0;  // timing offset, seconds
    VecC path_gains;      // per-path complex gains
    VecD path_delays;     // per-path delays, seconds

    void validate(const CdmaConfig& cfg) const {
        if (path_gains.size() != path_delays.size() || path_gains.size() < 1)
            throw std::invalid_argument("UserChannel: gain/delay arrays must match, length >= 1");
        if (offset < 0.0 || (path_delays.array() < 0.0).any())
            throw std::invalid_argument("UserChannel: delays must be nonnegative");
        if (offset + path_delays.maxCoeff() >= cfg.t_b())
            throw std::invalid_argument("UserChannel: delay spread must stay below the bit interval");
    }
};

/// Antipodal long spreading codes, one length-N chip row per user and packet.
struct SpreadingCodes {
    std::vector<std::vector<std::vector<int>>> chips;  // [k][p][n] in {-1,+1}

    int k_users() const { return static_cast<int>(chips.size()); }
    int n_packets() const { return chips.empty() ? 0 : static_cast<int>(chips[0].size()); }
};

SpreadingCodes random_codes(int k_users, int n_packets, int n_gain, Rng& rng);

/// Near-far randomized channels: amplitude 2 * 10^(u/20), u ~ unif(-nfr_db, nfr_db),
/// unit-average-power path gains, delays spread over a fraction of the bit interval.
std::vector<UserChannel> random_user_channels(const CdmaConfig& cfg, Rng& rng);

Eigen::MatrixXi random_bits(int k_users, int n_packets, Rng& rng);  // entries +-1

struct CdmaScene {
    CdmaConfig cfg;
    SpreadingCodes codes;
    std::vector<UserChannel> channels;
    Eigen::MatrixXi true_bits;  // K x P, +-1
    MatC frames;                // frame_len x P
    MatC g_true;                // g_len x K
    double noise_var = 0.0;     // per complex sample
};

/// Square-root raised cosine chip pulse, time-limited to [0, 4 t_c] (centered at 2 t_c).
double srrc_pulse(double t, double t_c, double rolloff);
/// Raised cosine chip pulse, time-limited to [0, 8 t_c) (centered at 4 t_c);
/// equals the SRRC self-convolution up to the truncation error.
double rc_pulse(double t, double t_c, double rolloff);

/// Effective chip pulse samples g_k[i-1] = g_k(i t_c / M), i = 1..MN+8M-1.
VecC effective_chip_pulse(const UserChannel& uc, const CdmaConfig& cfg);

/// Chip-placement matrix satisfying C_{k,p-lag}(p) g_k = samples of the user's
/// contribution from bit p-lag over the p-th frame.
MatD code_matrix(const SpreadingCodes& codes, int k, int p, int lag, const CdmaConfig& cfg);

/// Noise-free superposition of all users' contributions, one frame per column.
MatC synthesize_noiseless_frames(const CdmaConfig& cfg, const SpreadingCodes& codes,
                                 const std::vector<UserChannel>& channels,
                                 const Eigen::MatrixXi& bits, const MatC& g);

CdmaScene synthesize_scene(const CdmaConfig& cfg, const SpreadingCodes& codes,
                           const std::vector<UserChannel>& channels, const Eigen::MatrixXi& bits,
                           Rng& rng);

/// Two-frame observation window [y(p); y(p+1)] used for the detection of bit p.
VecC detection_window(const CdmaScene& scene, int p);

/// Stacked least-squares channel estimate over the first n_t training frames,
/// using the supplied (possibly mismatched) codes and the known training bits.
/// Returns one g column per user.
MatC ls_channel_estimate(const MatC& frames, const SpreadingCodes& codes_assumed,
                         const Eigen::MatrixXi& bits, const CdmaConfig& cfg, int n_t);

struct SinglePathEstimate {
    double tau = 0.0;        // seconds
    double amplitude = 0.0;  // >= 0
    double phase = 0.0;      // in (-pi, pi]
};

/// Sliding-window correlation estimator of the strongest path.
SinglePathEstimate extract_single_path(const VecC& g_hat_k, const CdmaConfig& cfg);

/// Recursive single-path estimation with successive cancellation; paths sorted
/// by descending amplitude. Amplitudes and the timing offset are folded into
/// the returned gains/delays (amplitude = 1, offset = 0).
UserChannel extract_multipath(const VecC& g_hat_k, int l_paths, const CdmaConfig& cfg);

/// Linear MMSE detection of the bits of packet p from the two-frame window
/// [y(p); y(p+1)], with the model covariance built from the assumed pulses and codes.
std::vector<int> mmse_detect(const VecC& window_2p, int p, const MatC& g_assumed, double noise_var,
                             const SpreadingCodes& codes_assumed, const CdmaConfig& cfg);

/// Exact minimum-distance decision over all 2^K bit patterns of packet p given
/// the two previous bit vectors (entries +-1, or 0 before the first packet).
std::vector<int> map_detect_exhaustive(const VecC& y_frame, int p, const std::vector<int>& bits_p1,
                                       const std::vector<int>& bits_p2, const SpreadingCodes& codes,
                                       const MatC& g, const CdmaConfig& cfg);

/// Independent chip flips with probability rho.
SpreadingCodes corrupt_codes(const SpreadingCodes& codes, double rho, Rng& rng);

/// Scene as a directory of CSV files (frames.csv, bits.csv, codes.csv,
/// channels.csv, meta.csv); schemas documented in the README.
void export_scene(const std::string& dir, const CdmaScene& scene);
CdmaScene import_scene(const std::string& dir);

}  // namespace hyphy
