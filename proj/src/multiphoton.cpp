#include "dmtc/multiphoton.hpp"

#include <Eigen/SparseCore>

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_map>

#include "dmtc/dicke.hpp"

namespace dmtc {

namespace {

using SpMat = Eigen::SparseMatrix<cd>;
using Trip = Eigen::Triplet<cd>;

// ---------------------------- exact full-space solver ----------------------------

struct ExactOps {
    int n_spins = 0;
    int n_fock = 0;
    int dim = 0;
    SpMat h0, a_op, a_dag;
    std::vector<SpMat> sig, sig_dag;
    Eigen::VectorXd nvec, evec, topfock;
};

void apply_lindblad_ops(const ExactOps& ops, const SystemConfig& cfg, double wc,
                        const Eigen::VectorXd& decay_diag,
                        const Eigen::Ref<const Eigen::MatrixXcd>& rho,
                        Eigen::Ref<Eigen::MatrixXcd> out) {
    const int dim = ops.dim;
    Eigen::MatrixXcd hr = ops.h0 * rho;
    if (wc != 0) hr.noalias() += wc * (ops.nvec.asDiagonal() * rho);
    const Eigen::MatrixXcd ac = cd(0, -1) * hr;
    out = ac + ac.adjoint();

    out.noalias() += cfg.kappa * (ops.a_op * rho * ops.a_dag);
    if (cfg.gamma > 0) {
        for (int i = 0; i < ops.n_spins; ++i) {
            out.noalias() += cfg.gamma * (ops.sig[static_cast<size_t>(i)] * rho *
                                          ops.sig_dag[static_cast<size_t>(i)]);
        }
    }
    for (int j = 0; j < dim; ++j) {
        const double ddj = decay_diag[j];
        for (int i = 0; i < dim; ++i) out(i, j) -= (decay_diag[i] + ddj) * rho(i, j);
    }
}

ExactOps build_exact(const SystemConfig& cfg, int n_max) {
    ExactOps ops;
    ops.n_spins = cfg.n_emitters;
    ops.n_fock = n_max + 1;
    const int dspin = 1 << ops.n_spins;
    ops.dim = ops.n_fock * dspin;
    const double g = cfg.g();
    auto idx = [&](int n, int mask) { return n * dspin + mask; };

    ops.nvec.resize(ops.dim);
    ops.evec.resize(ops.dim);
    ops.topfock = Eigen::VectorXd::Zero(ops.dim);
    for (int n = 0; n < ops.n_fock; ++n) {
        for (int mask = 0; mask < dspin; ++mask) {
            ops.nvec[idx(n, mask)] = n;
            ops.evec[idx(n, mask)] = __builtin_popcount(static_cast<unsigned>(mask));
            if (n == n_max) ops.topfock[idx(n, mask)] = 1.0;
        }
    }

    std::vector<Trip> th, ta;
    for (int n = 0; n < ops.n_fock; ++n) {
        for (int mask = 0; mask < dspin; ++mask) {
            const int row = idx(n, mask);
            double diag = 0;
            for (int i = 0; i < ops.n_spins; ++i) {
                if (mask & (1 << i)) diag += cfg.emitter_freqs[static_cast<size_t>(i)];
            }
            if (diag != 0) th.emplace_back(row, row, diag);
            // a^dag sigma_i + sigma_i^dag a
            for (int i = 0; i < ops.n_spins; ++i) {
                const int bit = 1 << i;
                if ((mask & bit) && n + 1 < ops.n_fock) {
                    const int to = idx(n + 1, mask & ~bit);
                    th.emplace_back(to, row, g * std::sqrt(n + 1.0));
                    th.emplace_back(row, to, g * std::sqrt(n + 1.0));
                }
            }
            if (n > 0) ta.emplace_back(idx(n - 1, mask), row, std::sqrt(static_cast<double>(n)));
        }
    }
    ops.h0.resize(ops.dim, ops.dim);
    ops.h0.setFromTriplets(th.begin(), th.end());
    ops.a_op.resize(ops.dim, ops.dim);
    ops.a_op.setFromTriplets(ta.begin(), ta.end());
    ops.a_dag = SpMat(ops.a_op.adjoint());

    ops.sig.reserve(static_cast<size_t>(ops.n_spins));
    for (int i = 0; i < ops.n_spins; ++i) {
        std::vector<Trip> ts;
        const int bit = 1 << i;
        for (int n = 0; n < ops.n_fock; ++n) {
            for (int mask = 0; mask < dspin; ++mask) {
                if (mask & bit) ts.emplace_back(idx(n, mask & ~bit), idx(n, mask), 1.0);
            }
        }
        SpMat s(ops.dim, ops.dim);
        s.setFromTriplets(ts.begin(), ts.end());
        ops.sig.push_back(s);
        ops.sig_dag.emplace_back(s.adjoint());
    }
    return ops;
}

// -------------------------- permutation-invariant solver --------------------------

std::uint64_t pack_state(int n, const std::array<int, 4>& e) {
    std::uint64_t k = static_cast<std::uint64_t>(n);
    for (int b = 0; b < 4; ++b) k = (k << 10) | static_cast<std::uint64_t>(e[static_cast<size_t>(b)]);
    return k;
}

struct Transfer {
    int from_block = 0;
    SpMat x, x_dag;
};

struct Sector {
    int dim = 0;
    std::vector<int> state_n;
    std::vector<std::array<int, 4>> state_e;
    std::unordered_map<std::uint64_t, int> index;
    std::vector<SpMat> coupling, coupling_dag;  // a^dag J_b^- per bin, within sector
    SpMat a_down, a_down_dag;                   // to sector nu-1 of the same block
    Eigen::VectorXd nvec, evec, decay_diag, topfock;
    std::vector<Transfer> incoming;             // local-decay feeds from sector nu+1
    std::ptrdiff_t offset = 0;
};

struct Block {
    std::array<int, 4> twice_j{};
    double weight = 1.0;
    std::vector<Sector> sectors;  // indexed by total excitation nu = 0..N
};

struct BinnedPlan {
    std::vector<EmitterBin> bins;
    int n_bins = 0;
    int total = 0;
    int n_max = 0;
    double g = 0, kappa = 1, gamma = 0;
    std::vector<Block> blocks;
    std::ptrdiff_t flat_len = 0;  // state entries + 2 accumulators
};

void enumerate_sector_states(const BinnedPlan& plan, const std::array<int, 4>& twice_j,
                             int nu, Sector& sec) {
    std::array<int, 4> e{};
    std::array<int, 4> lo{}, hi{};
    for (int b = 0; b < plan.n_bins; ++b) {
        lo[static_cast<size_t>(b)] = (plan.bins[static_cast<size_t>(b)].count - twice_j[static_cast<size_t>(b)]) / 2;
        hi[static_cast<size_t>(b)] = (plan.bins[static_cast<size_t>(b)].count + twice_j[static_cast<size_t>(b)]) / 2;
    }
    // Recursive fill of bin excitations summing with the photon number to nu.
    auto rec = [&](auto&& self, int b, int used) -> void {
        if (b == plan.n_bins) {
            const int n = nu - used;
            if (n < 0 || n > plan.n_max) return;
            sec.state_n.push_back(n);
            sec.state_e.push_back(e);
            return;
        }
        for (int v = lo[static_cast<size_t>(b)]; v <= hi[static_cast<size_t>(b)]; ++v) {
            if (used + v > nu) break;
            e[static_cast<size_t>(b)] = v;
            self(self, b + 1, used + v);
        }
        e[static_cast<size_t>(b)] = lo[static_cast<size_t>(b)];
    };
    rec(rec, 0, 0);
    sec.dim = static_cast<int>(sec.state_n.size());
    for (int i = 0; i < sec.dim; ++i) {
        sec.index.emplace(pack_state(sec.state_n[static_cast<size_t>(i)], sec.state_e[static_cast<size_t>(i)]), i);
    }
}

BinnedPlan build_binned(const BinnedEnsemble& ens, const Coupling& coupling, double kappa,
                        double gamma, int n_max) {
    BinnedPlan plan;
    plan.bins = ens.bins;
    plan.n_bins = static_cast<int>(ens.bins.size());
    plan.total = ens.total();
    plan.n_max = n_max;
    plan.kappa = kappa;
    plan.gamma = gamma;
    plan.g = coupling.of(plan.total);

    // j-block combinations: only the maximal ladders when there is no local decay.
    std::vector<std::array<int, 4>> combos;
    if (gamma == 0) {
        std::array<int, 4> top{};
        for (int b = 0; b < plan.n_bins; ++b) top[static_cast<size_t>(b)] = plan.bins[static_cast<size_t>(b)].count;
        combos.push_back(top);
    } else {
        combos.push_back({});
        std::vector<std::array<int, 4>> next;
        for (int b = 0; b < plan.n_bins; ++b) {
            next.clear();
            for (const auto& c : combos) {
                for (int tj : dicke::allowed_twice_j(plan.bins[static_cast<size_t>(b)].count)) {
                    auto cc = c;
                    cc[static_cast<size_t>(b)] = tj;
                    next.push_back(cc);
                }
            }
            combos.swap(next);
        }
    }
    std::unordered_map<std::uint64_t, int> block_of;
    auto combo_key = [](const std::array<int, 4>& tj) {
        std::uint64_t k = 0;
        for (int b = 0; b < 4; ++b) k = (k << 10) | static_cast<std::uint64_t>(tj[static_cast<size_t>(b)]);
        return k;
    };

    for (const auto& c : combos) {
        Block blk;
        blk.twice_j = c;
        for (int b = 0; b < plan.n_bins; ++b) {
            blk.weight *= static_cast<double>(
                dicke::multiplicity(plan.bins[static_cast<size_t>(b)].count, c[static_cast<size_t>(b)]));
        }
        block_of.emplace(combo_key(c), static_cast<int>(plan.blocks.size()));
        plan.blocks.push_back(std::move(blk));
    }

    // Sector bases and within-block operators.
    for (auto& blk : plan.blocks) {
        blk.sectors.resize(static_cast<size_t>(plan.total) + 1);
        for (int nu = 0; nu <= plan.total; ++nu) {
            Sector& sec = blk.sectors[static_cast<size_t>(nu)];
            enumerate_sector_states(plan, blk.twice_j, nu, sec);
            if (sec.dim == 0) continue;

            sec.nvec.resize(sec.dim);
            sec.evec.resize(sec.dim);
            sec.topfock = Eigen::VectorXd::Zero(sec.dim);
            for (int i = 0; i < sec.dim; ++i) {
                const int n = sec.state_n[static_cast<size_t>(i)];
                const auto& e = sec.state_e[static_cast<size_t>(i)];
                sec.nvec[i] = n;
                sec.evec[i] = std::accumulate(e.begin(), e.begin() + plan.n_bins, 0);
                if (n == plan.n_max) sec.topfock[i] = 1.0;
            }
            sec.decay_diag = 0.5 * plan.kappa * sec.nvec + 0.5 * plan.gamma * sec.evec;

            sec.coupling.resize(static_cast<size_t>(plan.n_bins));
            sec.coupling_dag.resize(static_cast<size_t>(plan.n_bins));
            for (int b = 0; b < plan.n_bins; ++b) {
                std::vector<Trip> tc;
                for (int i = 0; i < sec.dim; ++i) {
                    const int n = sec.state_n[static_cast<size_t>(i)];
                    auto e = sec.state_e[static_cast<size_t>(i)];
                    if (n + 1 > plan.n_max) continue;
                    const double low = dicke::lowering_element(
                        plan.bins[static_cast<size_t>(b)].count, blk.twice_j[static_cast<size_t>(b)],
                        e[static_cast<size_t>(b)]);
                    if (low == 0) continue;
                    e[static_cast<size_t>(b)] -= 1;
                    const auto it = sec.index.find(pack_state(n + 1, e));
                    if (it == sec.index.end()) continue;
                    tc.emplace_back(it->second, i, std::sqrt(n + 1.0) * low);
                }
                SpMat m(sec.dim, sec.dim);
                m.setFromTriplets(tc.begin(), tc.end());
                sec.coupling[static_cast<size_t>(b)] = m;
                sec.coupling_dag[static_cast<size_t>(b)] = SpMat(m.adjoint());
            }

            if (nu > 0) {
                Sector& below = blk.sectors[static_cast<size_t>(nu - 1)];
                std::vector<Trip> tdown;
                for (int i = 0; i < sec.dim; ++i) {
                    const int n = sec.state_n[static_cast<size_t>(i)];
                    if (n == 0) continue;
                    const auto it = below.index.find(pack_state(n - 1, sec.state_e[static_cast<size_t>(i)]));
                    if (it == below.index.end()) continue;
                    tdown.emplace_back(it->second, i, std::sqrt(static_cast<double>(n)));
                }
                sec.a_down.resize(below.dim, sec.dim);
                sec.a_down.setFromTriplets(tdown.begin(), tdown.end());
                sec.a_down_dag = SpMat(sec.a_down.adjoint());
            }
        }
    }

    // Local-decay transfers between j blocks (and within one) for gamma > 0.
    if (gamma > 0) {
        for (int pb = 0; pb < static_cast<int>(plan.blocks.size()); ++pb) {
            const Block& src = plan.blocks[static_cast<size_t>(pb)];
            for (int b = 0; b < plan.n_bins; ++b) {
                const int nb = plan.bins[static_cast<size_t>(b)].count;
                for (const auto& ch :
                     dicke::local_decay_channels(nb, src.twice_j[static_cast<size_t>(b)])) {
                    auto tjq = src.twice_j;
                    tjq[static_cast<size_t>(b)] = ch.twice_j_to;
                    const auto itb = block_of.find(combo_key(tjq));
                    if (itb == block_of.end()) continue;
                    Block& dst = plan.blocks[static_cast<size_t>(itb->second)];
                    for (int nu = 1; nu <= plan.total; ++nu) {
                        const Sector& from = src.sectors[static_cast<size_t>(nu)];
                        Sector& to = dst.sectors[static_cast<size_t>(nu - 1)];
                        if (from.dim == 0 || to.dim == 0) continue;
                        std::vector<Trip> tx;
                        for (int i = 0; i < from.dim; ++i) {
                            auto e = from.state_e[static_cast<size_t>(i)];
                            const double amp = ch.amp[static_cast<size_t>(e[static_cast<size_t>(b)])];
                            if (amp == 0) continue;
                            e[static_cast<size_t>(b)] -= 1;
                            const auto it = to.index.find(pack_state(from.state_n[static_cast<size_t>(i)], e));
                            if (it == to.index.end()) continue;
                            tx.emplace_back(it->second, i, amp);
                        }
                        if (tx.empty()) continue;
                        Transfer tr;
                        tr.from_block = pb;
                        tr.x.resize(to.dim, from.dim);
                        tr.x.setFromTriplets(tx.begin(), tx.end());
                        tr.x_dag = SpMat(tr.x.adjoint());
                        to.incoming.push_back(std::move(tr));
                    }
                }
            }
        }
    }

    std::ptrdiff_t off = 0;
    for (auto& blk : plan.blocks) {
        for (auto& sec : blk.sectors) {
            sec.offset = off;
            off += static_cast<std::ptrdiff_t>(sec.dim) * sec.dim;
        }
    }
    plan.flat_len = off + 2;
    return plan;
}

struct BinnedRhs {
    const BinnedPlan* plan;
    const PulsePhase* phase;

    void operator()(double t, const Eigen::VectorXcd& y, Eigen::VectorXcd& dy) const {
        const auto& p = *plan;
        dy.setZero();

        std::array<cd, 4> ph;
        const double phi_c = (*phase)(t);
        for (int b = 0; b < p.n_bins; ++b) {
            const double arg = phi_c - p.bins[static_cast<size_t>(b)].freq * t;
            ph[static_cast<size_t>(b)] = cd(std::cos(arg), std::sin(arg));
        }

        double flux_rate = 0, loss_rate = 0;
        const cd mi(0.0, -1.0);
        for (size_t ib = 0; ib < p.blocks.size(); ++ib) {
            const Block& blk = p.blocks[ib];
            for (size_t nu = 0; nu < blk.sectors.size(); ++nu) {
                const Sector& sec = blk.sectors[nu];
                if (sec.dim == 0) continue;
                const int d = sec.dim;
                Eigen::Map<const Eigen::MatrixXcd> rho(y.data() + sec.offset, d, d);
                Eigen::Map<Eigen::MatrixXcd> out(dy.data() + sec.offset, d, d);

                // -i [H(t), rho] with H = sum_b g (ph_b C_b + conj(ph_b) C_b^dag)
                Eigen::MatrixXcd hr = Eigen::MatrixXcd::Zero(d, d);
                for (int b = 0; b < p.n_bins; ++b) {
                    const cd cb = p.g * ph[static_cast<size_t>(b)];
                    hr += cb * (sec.coupling[static_cast<size_t>(b)] * rho);
                    hr += std::conj(cb) * (sec.coupling_dag[static_cast<size_t>(b)] * rho);
                }
                const Eigen::MatrixXcd ac = mi * hr;
                out = ac + ac.adjoint();

                // cavity jump feed from the sector one excitation up
                if (nu + 1 < blk.sectors.size() && blk.sectors[nu + 1].dim > 0) {
                    const Sector& up = blk.sectors[nu + 1];
                    Eigen::Map<const Eigen::MatrixXcd> rup(y.data() + up.offset, up.dim, up.dim);
                    out.noalias() += p.kappa * (up.a_down * rup * up.a_down_dag);
                }
                // local decay feeds
                for (const auto& tr : sec.incoming) {
                    const Sector& from = p.blocks[static_cast<size_t>(tr.from_block)]
                                             .sectors[nu + 1];
                    Eigen::Map<const Eigen::MatrixXcd> rfrom(y.data() + from.offset, from.dim, from.dim);
                    out.noalias() += p.gamma * (tr.x * rfrom * tr.x_dag);
                }
                // diagonal decay of populations and coherences
                for (int j = 0; j < d; ++j) {
                    const double ddj = sec.decay_diag[j];
                    for (int i = 0; i < d; ++i) {
                        out(i, j) -= (sec.decay_diag[i] + ddj) * rho(i, j);
                    }
                }

                double tr_n = 0, tr_e = 0;
                for (int i = 0; i < d; ++i) {
                    const double pii = rho(i, i).real();
                    tr_n += sec.nvec[i] * pii;
                    tr_e += sec.evec[i] * pii;
                }
                flux_rate += blk.weight * tr_n;
                loss_rate += blk.weight * tr_e;
            }
        }
        dy[p.flat_len - 2] = p.kappa * flux_rate;
        dy[p.flat_len - 1] = p.gamma * loss_rate;
    }
};

double binned_excitation(const BinnedPlan& p, const Eigen::VectorXcd& y) {
    double exc = 0;
    for (const auto& blk : p.blocks) {
        for (const auto& sec : blk.sectors) {
            if (sec.dim == 0) continue;
            Eigen::Map<const Eigen::MatrixXcd> rho(y.data() + sec.offset, sec.dim, sec.dim);
            for (int i = 0; i < sec.dim; ++i) {
                exc += blk.weight * (sec.nvec[i] + sec.evec[i]) * rho(i, i).real();
            }
        }
    }
    return exc;
}

double binned_top_population(const BinnedPlan& p, const Eigen::VectorXcd& y) {
    double pop = 0;
    for (const auto& blk : p.blocks) {
        for (const auto& sec : blk.sectors) {
            if (sec.dim == 0) continue;
            Eigen::Map<const Eigen::MatrixXcd> rho(y.data() + sec.offset, sec.dim, sec.dim);
            for (int i = 0; i < sec.dim; ++i) {
                if (sec.topfock[i] != 0) pop += blk.weight * rho(i, i).real();
            }
        }
    }
    return pop;
}

}  // namespace

// ---------------------------------- public API ----------------------------------

void FockTruncation::validate(int total_excitations) const {
    if (n_max < 1) throw std::invalid_argument("FockTruncation: n_max must be >= 1");
    if (n_max < total_excitations && !monitor_leakage) {
        throw std::invalid_argument(
            "FockTruncation: n_max below the initial excitation requires leakage monitoring");
    }
}

int BinnedEnsemble::total() const {
    int n = 0;
    for (const auto& b : bins) n += b.count;
    return n;
}

void BinnedEnsemble::validate() const {
    if (bins.empty() || bins.size() > 4) {
        throw std::invalid_argument("BinnedEnsemble: need between 1 and 4 bins");
    }
    for (const auto& b : bins) {
        if (b.count < 1) throw std::invalid_argument("BinnedEnsemble: bin counts must be positive");
        if (!std::isfinite(b.freq)) throw std::invalid_argument("BinnedEnsemble: non-finite bin frequency");
    }
}

BinnedEnsemble BinnedEnsemble::from_frequencies(const std::vector<double>& freqs, double tol) {
    BinnedEnsemble ens;
    for (double f : freqs) {
        bool found = false;
        for (auto& b : ens.bins) {
            if (std::abs(b.freq - f) <= tol) {
                ++b.count;
                found = true;
                break;
            }
        }
        if (!found) ens.bins.push_back({f, 1});
    }
    ens.validate();
    return ens;
}

MultiphotonResult exact_full_fidelity(const SystemConfig& config, const Pulse& pulse,
                                      const FockTruncation& trunc, const HorizonPolicy& policy,
                                      Eigen::MatrixXcd* final_rho) {
    config.validate();
    pulse.validate();
    if (config.n_emitters > 8) {
        throw std::length_error("exact_full_fidelity: state space too large (N > 8)");
    }
    trunc.validate(config.n_emitters);

    const ExactOps ops = build_exact(config, trunc.n_max);
    const int dim = ops.dim;
    const Eigen::Index flat = static_cast<Eigen::Index>(dim) * dim + 2;

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(flat);
    {
        // fully inverted: cavity vacuum, every emitter excited
        const int mask = (1 << config.n_emitters) - 1;
        const int i0 = 0 * (1 << config.n_emitters) + mask;
        y[static_cast<Eigen::Index>(i0) * dim + i0] = 1.0;
    }

    const Eigen::VectorXd decay_diag = 0.5 * config.kappa * ops.nvec + 0.5 * config.gamma * ops.evec;
    auto rhs_for = [&](double wc) {
        return [&, wc](double, const Eigen::VectorXcd& v, Eigen::VectorXcd& dv) {
            Eigen::Map<const Eigen::MatrixXcd> rho(v.data(), dim, dim);
            Eigen::Map<Eigen::MatrixXcd> out(dv.data(), dim, dim);
            apply_lindblad_ops(ops, config, wc, decay_diag, rho, out);

            double tr_n = 0, tr_e = 0;
            for (int i = 0; i < dim; ++i) {
                const double pii = rho(i, i).real();
                tr_n += ops.nvec[i] * pii;
                tr_e += ops.evec[i] * pii;
            }
            dv[flat - 2] = config.kappa * tr_n;
            dv[flat - 1] = config.gamma * tr_e;
        };
    };

    MultiphotonResult res;
    ode::StepControl ctl{policy.tol, 0, 0};
    auto excitation = [&](const Eigen::VectorXcd& v) {
        Eigen::Map<const Eigen::MatrixXcd> rho(v.data(), dim, dim);
        double e = 0;
        for (int i = 0; i < dim; ++i) e += (ops.nvec[i] + ops.evec[i]) * rho(i, i).real();
        return e;
    };
    auto top_pop = [&](const Eigen::VectorXcd& v) {
        Eigen::Map<const Eigen::MatrixXcd> rho(v.data(), dim, dim);
        double e = 0;
        for (int i = 0; i < dim; ++i) {
            if (ops.topfock[i] != 0) e += rho(i, i).real();
        }
        return e;
    };

    double prev = 0;
    bool stopped = false;
    for (double t_stop : horizon_grid(pulse, policy, config.kappa)) {
        integrate_piecewise(pulse, y, prev, t_stop, ctl, rhs_for,
                            [&](double, const Eigen::VectorXcd& v) {
                                if (trunc.monitor_leakage) {
                                    res.leakage = std::max(res.leakage, top_pop(v));
                                }
                            });
        prev = t_stop;
        res.horizon = t_stop;
        if (excitation(y) < policy.residual_cutoff) {
            stopped = true;
            break;
        }
    }

    res.flux_integral = y[flat - 2].real();
    res.emitter_loss = y[flat - 1].real();
    res.value = res.flux_integral / config.n_emitters;
    res.residual = excitation(y);
    res.truncated = !stopped && res.residual > 100.0 * policy.residual_cutoff;
    res.leak_flagged = trunc.monitor_leakage && res.leakage > trunc.leakage_threshold &&
                       trunc.n_max < config.n_emitters;
    if (final_rho) {
        *final_rho = Eigen::Map<const Eigen::MatrixXcd>(y.data(), dim, dim);
    }
    return res;
}

namespace detail {

Eigen::MatrixXcd lindblad_apply(const SystemConfig& config, const Pulse& pulse, double t,
                                int n_max, const Eigen::MatrixXcd& rho) {
    config.validate();
    pulse.validate();
    const ExactOps ops = build_exact(config, n_max);
    if (rho.rows() != ops.dim || rho.cols() != ops.dim) {
        throw std::invalid_argument("lindblad_apply: density matrix dimension mismatch");
    }
    const Eigen::VectorXd decay_diag =
        0.5 * config.kappa * ops.nvec + 0.5 * config.gamma * ops.evec;
    Eigen::MatrixXcd out(ops.dim, ops.dim);
    apply_lindblad_ops(ops, config, pulse.omega_c(t), decay_diag, rho, out);
    return out;
}

}  // namespace detail

MultiphotonResult binned_fidelity(const BinnedEnsemble& ensemble, const Coupling& coupling,
                                  double kappa, double gamma, const Pulse& pulse,
                                  const FockTruncation& trunc, const HorizonPolicy& policy) {
    ensemble.validate();
    pulse.validate();
    if (!(kappa > 0) || !std::isfinite(kappa)) throw std::invalid_argument("binned_fidelity: kappa must be > 0");
    if (!(gamma >= 0) || !std::isfinite(gamma)) throw std::invalid_argument("binned_fidelity: gamma must be >= 0");
    const int total = ensemble.total();
    trunc.validate(total);

    const BinnedPlan plan = build_binned(ensemble, coupling, kappa, gamma, trunc.n_max);
    const PulsePhase phase(pulse);

    Eigen::VectorXcd y = Eigen::VectorXcd::Zero(plan.flat_len);
    {
        // fully inverted: top of every maximal ladder, cavity empty
        const Sector& sec = plan.blocks.front().sectors[static_cast<size_t>(total)];
        std::array<int, 4> e{};
        for (int b = 0; b < plan.n_bins; ++b) e[static_cast<size_t>(b)] = plan.bins[static_cast<size_t>(b)].count;
        const auto it = sec.index.find(pack_state(0, e));
        if (it == sec.index.end()) throw std::runtime_error("binned_fidelity: lost initial state");
        y[sec.offset + static_cast<std::ptrdiff_t>(it->second) * sec.dim + it->second] = 1.0;
    }

    const BinnedRhs rhs{&plan, &phase};
    MultiphotonResult res;
    ode::StepControl ctl{policy.tol, 0, 0};

    double prev = 0;
    bool stopped = false;
    for (double t_stop : horizon_grid(pulse, policy, kappa)) {
        integrate_piecewise(
            pulse, y, prev, t_stop, ctl, [&](double) { return rhs; },
            [&](double, const Eigen::VectorXcd& v) {
                if (trunc.monitor_leakage) {
                    res.leakage = std::max(res.leakage, binned_top_population(plan, v));
                }
            });
        prev = t_stop;
        res.horizon = t_stop;
        if (binned_excitation(plan, y) < policy.residual_cutoff) {
            stopped = true;
            break;
        }
    }

    res.flux_integral = y[plan.flat_len - 2].real();
    res.emitter_loss = y[plan.flat_len - 1].real();
    res.value = res.flux_integral / total;
    res.residual = binned_excitation(plan, y);
    res.truncated = !stopped && res.residual > 100.0 * policy.residual_cutoff;
    res.leak_flagged = trunc.monitor_leakage && res.leakage > trunc.leakage_threshold &&
                       trunc.n_max < total;
    return res;
}

double normalized_fidelity(double raw, const SystemConfig& config, const FockTruncation& trunc,
                           const HorizonPolicy& policy, const Pulse& baseline_pulse) {
    config.validate();
    const double mean =
        std::accumulate(config.emitter_freqs.begin(), config.emitter_freqs.end(), 0.0) /
        config.n_emitters;
    BinnedEnsemble homog;
    homog.bins = {{mean, config.n_emitters}};
    const auto base = binned_fidelity(homog, config.coupling, config.kappa, config.gamma,
                                      baseline_pulse, trunc, policy);
    if (base.value < 1e-12) {
        throw std::runtime_error("normalized_fidelity: homogeneous baseline is numerically zero");
    }
    return raw / base.value;
}

}  // namespace dmtc
