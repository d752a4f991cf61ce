#include "hyphy/cdma.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace hyphy {

SpreadingCodes random_codes(int k_users, int n_packets, int n_gain, Rng& rng) {
    SpreadingCodes codes;
    codes.chips.assign(k_users, std::vector<std::vector<int>>(n_packets, std::vector<int>(n_gain)));
    for (auto& user : codes.chips)
        for (auto& packet : user)
            for (auto& chip : packet) chip = rng.uniform() < 0.5 ? -1 : 1;
    return codes;
}

std::vector<UserChannel> random_user_channels(const CdmaConfig& cfg, Rng& rng) {
    cfg.validate();
    std::vector<UserChannel> channels(cfg.k_users);
    const double tc = cfg.chip_interval;
    for (auto& uc : channels) {
        const double u_db = rng.uniform(-cfg.nfr_db, cfg.nfr_db);
        uc.amplitude = 2.0 * std::pow(10.0, u_db / 20.0);
        uc.offset = rng.uniform(0.0, 4.0 * tc);
        uc.path_gains.resize(cfg.l_paths);
        uc.path_delays.resize(cfg.l_paths);
        for (int l = 0; l < cfg.l_paths; ++l) {
            uc.path_gains[l] = rng.cnormal(1.0 / cfg.l_paths);
            uc.path_delays[l] = l == 0 ? 0.0 : rng.uniform(0.0, 6.0 * tc);
        }
        uc.validate(cfg);
    }
    return channels;
}

Eigen::MatrixXi random_bits(int k_users, int n_packets, Rng& rng) {
    Eigen::MatrixXi bits(k_users, n_packets);
    for (int k = 0; k < k_users; ++k)
        for (int p = 0; p < n_packets; ++p) bits(k, p) = rng.uniform() < 0.5 ? -1 : 1;
    return bits;
}

double srrc_pulse(double t, double t_c, double rolloff) {
    if (t < 0.0 || t > 4.0 * t_c) return 0.0;
    const double u = (t - 2.0 * t_c) / t_c;
    const double a = rolloff;
    if (std::abs(u) < 1e-12) return 1.0 - a + 4.0 * a / kPi;
    if (a > 0.0 && std::abs(std::abs(u) - 1.0 / (4.0 * a)) < 1e-9) {
        return a / std::sqrt(2.0) *
               ((1.0 + 2.0 / kPi) * std::sin(kPi / (4.0 * a)) +
                (1.0 - 2.0 / kPi) * std::cos(kPi / (4.0 * a)));
    }
    return (std::sin(kPi * u * (1.0 - a)) + 4.0 * a * u * std::cos(kPi * u * (1.0 + a))) /
           (kPi * u * (1.0 - std::pow(4.0 * a * u, 2)));
}

double rc_pulse(double t, double t_c, double rolloff) {
    if (t < 0.0 || t >= 8.0 * t_c) return 0.0;
    const double v = (t - 4.0 * t_c) / t_c;
    const double a = rolloff;
    if (std::abs(v) < 1e-12) return 1.0;
    if (a > 0.0 && std::abs(std::abs(v) - 1.0 / (2.0 * a)) < 1e-9) {
        const double x = kPi / (2.0 * a);
        return (kPi / 4.0) * std::sin(x) / x;
    }
    const double sinc = std::sin(kPi * v) / (kPi * v);
    return sinc * std::cos(kPi * a * v) / (1.0 - std::pow(2.0 * a * v, 2));
}

VecC effective_chip_pulse(const UserChannel& uc, const CdmaConfig& cfg) {
    cfg.validate();
    uc.validate(cfg);
    const int len = cfg.g_len();
    const double dt = cfg.chip_interval / cfg.m_oversample;
    VecC g = VecC::Zero(len);
    for (int i = 1; i <= len; ++i) {
        const double t = i * dt;
        cxd acc = 0.0;
        for (Eigen::Index l = 0; l < uc.path_gains.size(); ++l)
            acc += uc.path_gains[l] *
                   rc_pulse(t - uc.offset - uc.path_delays[l], cfg.chip_interval, cfg.rolloff);
        g[i - 1] = uc.amplitude * acc;
    }
    return g;
}

MatD code_matrix(const SpreadingCodes& codes, int k, int p, int lag, const CdmaConfig& cfg) {
    cfg.validate();
    if (lag < 0 || lag > 2) throw std::invalid_argument("code_matrix: lag must be 0, 1 or 2");
    if (k < 0 || k >= codes.k_users() || p - lag < 0 || p >= codes.n_packets())
        throw std::invalid_argument("code_matrix: index out of range");
    const int mn = cfg.frame_len();
    const int glen = cfg.g_len();
    const int m = cfg.m_oversample;
    MatD c = MatD::Zero(mn, glen);
    const auto& beta = codes.chips[size_t(k)][size_t(p - lag)];
    for (int s = 1; s <= mn; ++s) {
        for (int n = 0; n < cfg.n_gain; ++n) {
            const int idx = lag * mn + s - n * m;
            if (idx >= 1 && idx <= glen) c(s - 1, idx - 1) += double(beta[size_t(n)]);
        }
    }
    return c;
}

namespace {

// real matrix times complex vector
VecC apply_real(const MatD& m, const VecC& v) {
    VecC out(m.rows());
    out.real() = m * v.real();
    out.imag() = m * v.imag();
    return out;
}

// A_k(p) g_k = sum over lags of b_k(p - lag) C_{k,p-lag}(p) g_k.
VecC user_frame_contribution(const SpreadingCodes& codes, const Eigen::MatrixXi& bits, int k, int p,
                             const VecC& g, const CdmaConfig& cfg) {
    VecC acc = VecC::Zero(cfg.frame_len());
    for (int lag = 0; lag <= 2; ++lag) {
        if (p - lag < 0) continue;  // cold start: bits before packet 0 are 0
        const int b = bits(k, p - lag);
        if (b == 0) continue;
        acc += double(b) * apply_real(code_matrix(codes, k, p, lag, cfg), g);
    }
    return acc;
}

MatD user_code_block(const SpreadingCodes& codes, const Eigen::MatrixXi& bits, int k, int p,
                     const CdmaConfig& cfg) {
    MatD acc = MatD::Zero(cfg.frame_len(), cfg.g_len());
    for (int lag = 0; lag <= 2; ++lag) {
        if (p - lag < 0) continue;
        const int b = bits(k, p - lag);
        if (b == 0) continue;
        acc += double(b) * code_matrix(codes, k, p, lag, cfg);
    }
    return acc;
}

}  // namespace

MatC synthesize_noiseless_frames(const CdmaConfig& cfg, const SpreadingCodes& codes,
                                 const std::vector<UserChannel>& channels,
                                 const Eigen::MatrixXi& bits, const MatC& g) {
    cfg.validate();
    if (static_cast<int>(channels.size()) != cfg.k_users || bits.rows() != cfg.k_users ||
        bits.cols() < cfg.n_packets || codes.k_users() != cfg.k_users ||
        codes.n_packets() < cfg.n_packets)
        throw std::invalid_argument("synthesize_noiseless_frames: inconsistent users/packets");
    MatC frames(cfg.frame_len(), cfg.n_packets);
    for (int p = 0; p < cfg.n_packets; ++p) {
        VecC y = VecC::Zero(cfg.frame_len());
        for (int k = 0; k < cfg.k_users; ++k)
            y += user_frame_contribution(codes, bits, k, p, g.col(k), cfg);
        frames.col(p) = y;
    }
    return frames;
}

CdmaScene synthesize_scene(const CdmaConfig& cfg, const SpreadingCodes& codes,
                           const std::vector<UserChannel>& channels, const Eigen::MatrixXi& bits,
                           Rng& rng) {
    CdmaScene scene;
    scene.cfg = cfg;
    scene.codes = codes;
    scene.channels = channels;
    scene.true_bits = bits;
    scene.g_true.resize(cfg.g_len(), cfg.k_users);
    for (int k = 0; k < cfg.k_users; ++k) scene.g_true.col(k) = effective_chip_pulse(channels[size_t(k)], cfg);

    scene.frames = synthesize_noiseless_frames(cfg, codes, channels, bits, scene.g_true);
    const double p_sig = scene.frames.cwiseAbs2().mean();
    scene.noise_var = p_sig * std::pow(10.0, -cfg.snr_db / 10.0);
    for (int p = 0; p < cfg.n_packets; ++p)
        for (int s = 0; s < cfg.frame_len(); ++s) scene.frames(s, p) += rng.cnormal(scene.noise_var);
    return scene;
}

VecC detection_window(const CdmaScene& scene, int p) {
    const int mn = scene.cfg.frame_len();
    if (p < 0 || p + 1 >= scene.frames.cols())
        throw std::invalid_argument("detection_window: window exceeds the scene");
    VecC w(2 * mn);
    w.head(mn) = scene.frames.col(p);
    w.tail(mn) = scene.frames.col(p + 1);
    return w;
}

MatC ls_channel_estimate(const MatC& frames, const SpreadingCodes& codes_assumed,
                         const Eigen::MatrixXi& bits, const CdmaConfig& cfg, int n_t) {
    cfg.validate();
    if (n_t < 1 || n_t > frames.cols()) throw std::invalid_argument("ls_channel_estimate: bad n_t");
    const int glen = cfg.g_len();
    const int dim = glen * cfg.k_users;
    MatD normal = MatD::Zero(dim, dim);
    VecC rhs = VecC::Zero(dim);
    MatD a(cfg.frame_len(), dim);
    for (int p = 0; p < n_t; ++p) {
        for (int k = 0; k < cfg.k_users; ++k)
            a.middleCols(k * glen, glen) = user_code_block(codes_assumed, bits, k, p, cfg);
        normal.noalias() += a.transpose() * a;
        rhs.real() += a.transpose() * frames.col(p).real();
        rhs.imag() += a.transpose() * frames.col(p).imag();
    }
    Eigen::LDLT<MatD> ldlt(normal);
    const double dmax = ldlt.vectorD().cwiseAbs().maxCoeff();
    const double dmin = ldlt.vectorD().minCoeff();
    if (ldlt.info() != Eigen::Success || !(dmax > 0.0) || dmin < 1e-12 * dmax) {
        const auto eig = Eigen::SelfAdjointEigenSolver<MatD>(normal).eigenvalues();
        const int deficient = int((eig.array() < 1e-12 * eig.maxCoeff()).count());
        throw SingularModelError("ls_channel_estimate: normal matrix rank deficient by " +
                                 std::to_string(deficient) + " (add training frames)");
    }
    VecC x(dim);
    x.real() = ldlt.solve(VecD(rhs.real()));
    x.imag() = ldlt.solve(VecD(rhs.imag()));
    MatC g_hat(glen, cfg.k_users);
    for (int k = 0; k < cfg.k_users; ++k) g_hat.col(k) = x.segment(k * glen, glen);
    return g_hat;
}

SinglePathEstimate extract_single_path(const VecC& g_hat_k, const CdmaConfig& cfg) {
    cfg.validate();
    const int glen = cfg.g_len();
    if (g_hat_k.size() != glen) throw std::invalid_argument("extract_single_path: wrong g length");
    if (g_hat_k.norm() <= 0.0) throw std::invalid_argument("extract_single_path: all-zero input");
    const int m = cfg.m_oversample;
    const int mn = cfg.frame_len();
    const double dt = cfg.chip_interval / m;
    const VecD energy = g_hat_k.cwiseAbs2();  // m_k = g o g^*

    // coarse peak: sliding correlation with the |h_RC|^2 template
    VecD templ(8 * m - 1);
    for (int i = 1; i <= 8 * m - 1; ++i)
        templ[i - 1] = std::pow(rc_pulse(i * dt, cfg.chip_interval, cfg.rolloff), 2);
    int i_k = 1;
    double best = -1.0;
    for (int l = 1; l <= mn + 1; ++l) {
        double corr = 0.0;
        for (int i = 1; i <= 8 * m - 1; ++i) {
            const int idx = l + i - 1;
            if (idx >= 1 && idx <= glen) corr += energy[idx - 1] * templ[i - 1];
        }
        if (corr > best) {
            best = corr;
            i_k = l;
        }
    }

    // fine grid around the peak at resolution t_c / (10 m)
    const int half = 2 * 10 - 1;  // n' in [-19, 19]
    int n_best = 0;
    double corr_best = -1.0;
    for (int n = -half; n <= half; ++n) {
        double corr = 0.0;
        for (int i = 1; i <= 8 * m; ++i) {
            const int idx = i_k + i;
            if (idx < 1 || idx > glen) continue;
            const double w = std::pow(rc_pulse(i * dt - n * dt / 10.0, cfg.chip_interval, cfg.rolloff), 2);
            corr += energy[idx - 1] * w;
        }
        if (corr > corr_best) {
            corr_best = corr;
            n_best = n;
        }
    }
    SinglePathEstimate est;
    est.tau = i_k * dt + n_best * dt / 10.0;

    // amplitude and phase from the projection onto the sampled pulse
    double psi_norm2 = 0.0;
    cxd proj = 0.0;
    for (int i = 1; i <= 8 * m; ++i) {
        const int idx = i_k + i;
        if (idx < 1 || idx > glen) continue;
        const double psi = rc_pulse((i_k + i) * dt - est.tau, cfg.chip_interval, cfg.rolloff);
        psi_norm2 += psi * psi;
        proj += psi * g_hat_k[idx - 1];
    }
    const cxd c = psi_norm2 > 0.0 ? proj / psi_norm2 : cxd(0.0);
    est.amplitude = std::abs(c);
    est.phase = std::arg(c);
    return est;
}

UserChannel extract_multipath(const VecC& g_hat_k, int l_paths, const CdmaConfig& cfg) {
    if (l_paths < 1) throw std::invalid_argument("extract_multipath: l_paths must be >= 1");
    const double dt = cfg.chip_interval / cfg.m_oversample;
    VecC residual = g_hat_k;
    std::vector<SinglePathEstimate> paths;
    for (int l = 0; l < l_paths; ++l) {
        const SinglePathEstimate est = extract_single_path(residual, cfg);
        paths.push_back(est);
        for (int i = 1; i <= cfg.g_len(); ++i)
            residual[i - 1] -= std::polar(est.amplitude, est.phase) *
                               rc_pulse(i * dt - est.tau, cfg.chip_interval, cfg.rolloff);
    }
    std::sort(paths.begin(), paths.end(),
              [](const SinglePathEstimate& a, const SinglePathEstimate& b) {
                  return a.amplitude > b.amplitude;
              });
    UserChannel uc;
    uc.amplitude = 1.0;
    uc.offset = 0.0;
    uc.path_gains.resize(l_paths);
    uc.path_delays.resize(l_paths);
    for (int l = 0; l < l_paths; ++l) {
        uc.path_gains[l] = std::polar(paths[size_t(l)].amplitude, paths[size_t(l)].phase);
        uc.path_delays[l] = paths[size_t(l)].tau;
    }
    return uc;
}

std::vector<int> mmse_detect(const VecC& window_2p, int p, const MatC& g_assumed, double noise_var,
                             const SpreadingCodes& codes_assumed, const CdmaConfig& cfg) {
    cfg.validate();
    const int mn = cfg.frame_len();
    if (window_2p.size() != 2 * mn) throw std::invalid_argument("mmse_detect: window must cover two frames");
    const int k_users = cfg.k_users;

    // window signature of bit q for frames (p, p+1): stacked lag-(p-q) placements
    const auto signature = [&](int k, int q) {
        VecC s = VecC::Zero(2 * mn);
        for (int fr = 0; fr <= 1; ++fr) {
            const int frame = p + fr;
            const int lag = frame - q;
            if (lag < 0 || lag > 2 || q < 0 || frame >= codes_assumed.n_packets()) continue;
            s.segment(fr * mn, mn) =
                apply_real(code_matrix(codes_assumed, k, frame, lag, cfg), g_assumed.col(k));
        }
        return s;
    };

    MatC r_yy = MatC::Zero(2 * mn, 2 * mn);
    std::vector<VecC> wanted(static_cast<size_t>(k_users));
    for (int k = 0; k < k_users; ++k) {
        for (int q = p - 2; q <= p + 1; ++q) {
            const VecC s = signature(k, q);
            r_yy.noalias() += s * s.adjoint();
            if (q == p) wanted[size_t(k)] = s;
        }
    }
    r_yy.diagonal().array() += std::max(noise_var, 1e-12 * std::real(r_yy.trace()) / double(2 * mn));

    Eigen::LLT<MatC> llt(r_yy);
    if (llt.info() != Eigen::Success) {
        r_yy.diagonal().array() += 1e-6 * std::real(r_yy.trace()) / double(2 * mn);
        llt.compute(r_yy);
        if (llt.info() != Eigen::Success) throw SingularModelError("mmse_detect: window covariance not PD");
    }
    std::vector<int> bits(static_cast<size_t>(k_users));
    for (int k = 0; k < k_users; ++k) {
        const VecC w = llt.solve(wanted[size_t(k)]);
        bits[size_t(k)] = std::real(w.dot(window_2p)) >= 0.0 ? 1 : -1;
    }
    return bits;
}

std::vector<int> map_detect_exhaustive(const VecC& y_frame, int p, const std::vector<int>& bits_p1,
                                       const std::vector<int>& bits_p2, const SpreadingCodes& codes,
                                       const MatC& g, const CdmaConfig& cfg) {
    cfg.validate();
    const int k_users = cfg.k_users;
    if (k_users > 12) throw std::invalid_argument("map_detect_exhaustive: K too large for enumeration");
    if (y_frame.size() != cfg.frame_len()) throw std::invalid_argument("map_detect_exhaustive: bad frame");

    VecC base = VecC::Zero(cfg.frame_len());
    MatC s0(cfg.frame_len(), k_users);
    for (int k = 0; k < k_users; ++k) {
        if (p - 1 >= 0 && bits_p1[size_t(k)] != 0)
            base += double(bits_p1[size_t(k)]) * apply_real(code_matrix(codes, k, p, 1, cfg), g.col(k));
        if (p - 2 >= 0 && bits_p2[size_t(k)] != 0)
            base += double(bits_p2[size_t(k)]) * apply_real(code_matrix(codes, k, p, 2, cfg), g.col(k));
        s0.col(k) = apply_real(code_matrix(codes, k, p, 0, cfg), g.col(k));
    }
    const VecC target = y_frame - base;

    std::vector<int> best_bits(size_t(k_users), -1);
    double best_cost = std::numeric_limits<double>::infinity();
    for (std::uint32_t mask = 0; mask < (1u << k_users); ++mask) {
        VecC cand = VecC::Zero(cfg.frame_len());
        for (int k = 0; k < k_users; ++k) {
            // lexicographic enumeration over (-1, +1) per user, user 0 slowest
            const int b = (mask >> (k_users - 1 - k)) & 1u ? 1 : -1;
            cand += double(b) * s0.col(k);
        }
        const double cost = (target - cand).squaredNorm();
        if (cost < best_cost) {
            best_cost = cost;
            for (int k = 0; k < k_users; ++k)
                best_bits[size_t(k)] = (mask >> (k_users - 1 - k)) & 1u ? 1 : -1;
        }
    }
    return best_bits;
}

SpreadingCodes corrupt_codes(const SpreadingCodes& codes, double rho, Rng& rng) {
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("corrupt_codes: rho must be in [0,1]");
    SpreadingCodes out = codes;
    for (auto& user : out.chips)
        for (auto& packet : user)
            for (auto& chip : packet)
                if (rng.uniform() < rho) chip = -chip;
    return out;
}

namespace {

void write_csv_line(std::ofstream& os, const std::vector<double>& vals) {
    for (size_t i = 0; i < vals.size(); ++i) os << (i ? "," : "") << vals[i];
    os << "\n";
}

std::vector<double> parse_csv_line(const std::string& line) {
    std::vector<double> out;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) out.push_back(std::stod(cell));
    return out;
}

}  // namespace

void export_scene(const std::string& dir, const CdmaScene& scene) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    const auto open = [&](const std::string& name) {
        std::ofstream os(dir + "/" + name);
        if (!os) throw std::runtime_error("export_scene: cannot open " + dir + "/" + name);
        os << std::setprecision(17);
        return os;
    };
    {
        auto os = open("meta.csv");
        os << "key,value\n";
        os << "k_users," << scene.cfg.k_users << "\nn_gain," << scene.cfg.n_gain << "\nm_oversample,"
           << scene.cfg.m_oversample << "\nn_packets," << scene.cfg.n_packets << "\nl_paths,"
           << scene.cfg.l_paths << "\nsnr_db," << scene.cfg.snr_db << "\nnfr_db," << scene.cfg.nfr_db
           << "\nrho_mismatch," << scene.cfg.rho_mismatch << "\nchip_interval,"
           << scene.cfg.chip_interval << "\nrolloff," << scene.cfg.rolloff << "\nnoise_var,"
           << scene.noise_var << "\n";
    }
    {
        auto os = open("frames.csv");
        for (Eigen::Index p = 0; p < scene.frames.cols(); ++p) {
            std::vector<double> row{double(p)};
            for (Eigen::Index s = 0; s < scene.frames.rows(); ++s) {
                row.push_back(scene.frames(s, p).real());
                row.push_back(scene.frames(s, p).imag());
            }
            write_csv_line(os, row);
        }
    }
    {
        auto os = open("bits.csv");
        for (Eigen::Index k = 0; k < scene.true_bits.rows(); ++k) {
            std::vector<double> row;
            for (Eigen::Index p = 0; p < scene.true_bits.cols(); ++p) row.push_back(scene.true_bits(k, p));
            write_csv_line(os, row);
        }
    }
    {
        auto os = open("codes.csv");
        for (int k = 0; k < scene.codes.k_users(); ++k)
            for (int p = 0; p < scene.codes.n_packets(); ++p) {
                std::vector<double> row{double(k), double(p)};
                for (int c : scene.codes.chips[size_t(k)][size_t(p)]) row.push_back(c);
                write_csv_line(os, row);
            }
    }
    {
        auto os = open("channels.csv");
        for (const auto& uc : scene.channels) {
            std::vector<double> row{uc.amplitude.real(), uc.amplitude.imag(), uc.offset};
            for (Eigen::Index l = 0; l < uc.path_gains.size(); ++l) {
                row.push_back(uc.path_gains[l].real());
                row.push_back(uc.path_gains[l].imag());
                row.push_back(uc.path_delays[l]);
            }
            write_csv_line(os, row);
        }
    }
}

CdmaScene import_scene(const std::string& dir) {
    const auto read_lines = [&](const std::string& name) {
        std::ifstream is(dir + "/" + name);
        if (!is) throw std::runtime_error("import_scene: cannot open " + dir + "/" + name);
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(is, line))
            if (!line.empty()) lines.push_back(line);
        return lines;
    };
    CdmaScene scene;
    for (const auto& line : read_lines("meta.csv")) {
        const auto comma = line.find(',');
        const std::string key = line.substr(0, comma), val = line.substr(comma + 1);
        if (key == "key") continue;
        const double v = std::stod(val);
        if (key == "k_users") scene.cfg.k_users = int(v);
        else if (key == "n_gain") scene.cfg.n_gain = int(v);
        else if (key == "m_oversample") scene.cfg.m_oversample = int(v);
        else if (key == "n_packets") scene.cfg.n_packets = int(v);
        else if (key == "l_paths") scene.cfg.l_paths = int(v);
        else if (key == "snr_db") scene.cfg.snr_db = v;
        else if (key == "nfr_db") scene.cfg.nfr_db = v;
        else if (key == "rho_mismatch") scene.cfg.rho_mismatch = v;
        else if (key == "chip_interval") scene.cfg.chip_interval = v;
        else if (key == "rolloff") scene.cfg.rolloff = v;
        else if (key == "noise_var") scene.noise_var = v;
        else throw std::runtime_error("import_scene: unknown meta key " + key);
    }
    scene.cfg.validate();
    {
        const auto lines = read_lines("frames.csv");
        scene.frames.resize(scene.cfg.frame_len(), Eigen::Index(lines.size()));
        for (const auto& line : lines) {
            const auto row = parse_csv_line(line);
            const int p = int(row[0]);
            for (int s = 0; s < scene.cfg.frame_len(); ++s)
                scene.frames(s, p) = cxd(row[size_t(1 + 2 * s)], row[size_t(2 + 2 * s)]);
        }
    }
    {
        const auto lines = read_lines("bits.csv");
        scene.true_bits.resize(Eigen::Index(lines.size()), Eigen::Index(parse_csv_line(lines[0]).size()));
        for (size_t k = 0; k < lines.size(); ++k) {
            const auto row = parse_csv_line(lines[k]);
            for (size_t p = 0; p < row.size(); ++p) scene.true_bits(Eigen::Index(k), Eigen::Index(p)) = int(row[p]);
        }
    }
    {
        const auto lines = read_lines("codes.csv");
        scene.codes.chips.assign(size_t(scene.cfg.k_users), {});
        for (const auto& line : lines) {
            const auto row = parse_csv_line(line);
            const size_t k = size_t(row[0]);
            std::vector<int> chips;
            for (size_t i = 2; i < row.size(); ++i) chips.push_back(int(row[i]));
            scene.codes.chips[k].push_back(std::move(chips));
        }
    }
    {
        const auto lines = read_lines("channels.csv");
        for (const auto& line : lines) {
            const auto row = parse_csv_line(line);
            UserChannel uc;
            uc.amplitude = cxd(row[0], row[1]);
            uc.offset = row[2];
            const int l_paths = int((row.size() - 3) / 3);
            uc.path_gains.resize(l_paths);
            uc.path_delays.resize(l_paths);
            for (int l = 0; l < l_paths; ++l) {
                uc.path_gains[l] = cxd(row[size_t(3 + 3 * l)], row[size_t(4 + 3 * l)]);
                uc.path_delays[l] = row[size_t(5 + 3 * l)];
            }
            scene.channels.push_back(std::move(uc));
        }
    }
    scene.g_true.resize(scene.cfg.g_len(), scene.cfg.k_users);
    for (int k = 0; k < scene.cfg.k_users; ++k)
        scene.g_true.col(k) = effective_chip_pulse(scene.channels[size_t(k)], scene.cfg);
    return scene;
}

}  // namespace hyphy
