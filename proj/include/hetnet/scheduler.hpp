#pragma once

// Per-station resource-block scheduling: the online proportional-fair rule,
// the running fraction bookkeeping, a round-robin baseline, and an offline
// solver for the underlying concave program used to check the online rule.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "hetnet/matrix.hpp"

namespace hetnet {

inline constexpr double kColdStartEpsilon = 1e-9;  // nats/s
inline constexpr std::size_t kNoClient = std::numeric_limits<std::size_t>::max();

/// phi[k+1] from phi[k]: ((k-1) * phi + [scheduled]) / k.
inline double next_fraction(double phi, std::size_t k, bool scheduled) {
    if (k == 0) throw std::invalid_argument("frame counter starts at 1");
    const double kk = static_cast<double>(k);
    return (kk - 1.0) / kk * phi + (scheduled ? 1.0 / kk : 0.0);
}

/// Scheduling state of one station over its own clients (local indices).
/// fraction(i, z) is the share of past frames in which block z went to i;
/// throughput(i) is the running mean of the throughput credited to i.
class ScheduleState {
public:
    ScheduleState() = default;
    ScheduleState(std::size_t clients, std::size_t blocks)
        : phi_(clients, blocks, 0.0), r_(clients, 0.0) {}

    std::size_t frame() const noexcept { return k_; }
    std::size_t num_clients() const noexcept { return r_.size(); }
    std::size_t num_blocks() const noexcept { return phi_.cols(); }

    const Matrix& fractions() const noexcept { return phi_; }
    double fraction(std::size_t i, std::size_t z) const { return phi_.at(i, z); }
    std::span<const double> throughput() const noexcept { return r_; }

    /// Seeds r before the first frame with eps + max_z H(i,z) / |Z|, so the
    /// first argmax is defined and favours no one.
    void warm_start(const Matrix& rates) {
        if (rates.rows() != num_clients() || rates.cols() != num_blocks()) {
            throw std::invalid_argument("rate table does not match schedule state");
        }
        for (std::size_t i = 0; i < num_clients(); ++i) {
            const auto row = rates.row(i);
            const double best = row.empty() ? 0.0 : *std::max_element(row.begin(), row.end());
            r_[i] = kColdStartEpsilon + best / static_cast<double>(std::max<std::size_t>(num_blocks(), 1));
        }
    }

    /// Applies one frame: assignment[z] is the local client given block z
    /// (kNoClient if idle) and credited[i] the throughput i received.
    void record_frame(std::span<const std::size_t> assignment, std::span<const double> credited) {
        if (assignment.size() != num_blocks() || credited.size() != num_clients()) {
            throw std::invalid_argument("frame record does not match schedule state");
        }
        const double kk = static_cast<double>(k_);
        const double keep = (kk - 1.0) / kk;
        for (double& v : phi_.data()) v *= keep;
        for (std::size_t z = 0; z < assignment.size(); ++z) {
            if (assignment[z] != kNoClient) phi_(assignment[z], z) += 1.0 / kk;
        }
        for (std::size_t i = 0; i < r_.size(); ++i) r_[i] = keep * r_[i] + credited[i] / kk;
        ++k_;
    }

private:
    std::size_t k_ = 1;
    Matrix phi_;
    std::vector<double> r_;
};

/// argmax_i w_i * H_i / r_i over a station's clients; ties go to the lowest
/// index. Returns nullopt when the station serves nobody.
inline std::optional<std::size_t> pf_pick(std::span<const double> weights, std::span<const double> block_rates,
                                          std::span<const double> throughput) {
    if (weights.empty()) return std::nullopt;
    std::size_t best = 0;
    double best_val = -1.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        const double v = weights[i] * block_rates[i] / std::max(throughput[i], kColdStartEpsilon);
        if (v > best_val) {
            best_val = v;
            best = i;
        }
    }
    return best;
}

/// Round robin by frame: the whole frame goes to one rotation position.
inline std::size_t rr_pick(std::size_t num_clients, std::uint64_t frame) {
    if (num_clients == 0) throw std::invalid_argument("round robin over an empty cell");
    return static_cast<std::size_t>(frame % num_clients);
}

/// One PF frame over a static rate table (clients x blocks). Fills
/// `assignment` and `credited`.
inline void pf_schedule_frame(std::span<const double> weights, const Matrix& rates, const ScheduleState& state,
                              std::vector<std::size_t>& assignment, std::vector<double>& credited) {
    const std::size_t n = weights.size(), Z = rates.cols();
    assignment.assign(Z, kNoClient);
    credited.assign(n, 0.0);
    if (n == 0) return;
    std::vector<double> scale(n);
    for (std::size_t i = 0; i < n; ++i) scale[i] = weights[i] / std::max(state.throughput()[i], kColdStartEpsilon);
    for (std::size_t z = 0; z < Z; ++z) {
        std::size_t best = 0;
        double best_val = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double v = scale[i] * rates(i, z);
            if (v > best_val) {
                best_val = v;
                best = i;
            }
        }
        assignment[z] = best;
        credited[best] += rates(best, z);
    }
}

/// Runs the online PF rule for `frames` frames on static rates.
inline ScheduleState simulate_pf(std::span<const double> weights, const Matrix& rates, std::size_t frames) {
    ScheduleState st(weights.size(), rates.cols());
    if (weights.empty()) return st;
    st.warm_start(rates);
    std::vector<std::size_t> assignment;
    std::vector<double> credited;
    for (std::size_t k = 0; k < frames; ++k) {
        pf_schedule_frame(weights, rates, st, assignment, credited);
        st.record_frame(assignment, credited);
    }
    return st;
}

inline double pf_value(std::span<const double> weights, std::span<const double> throughput) {
    double s = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(throughput[i] > 0.0)) return -std::numeric_limits<double>::infinity();
        s += weights[i] * std::log(throughput[i]);
    }
    return s;
}

inline std::vector<double> throughput_of(const Matrix& fractions, const Matrix& rates) {
    std::vector<double> r(fractions.rows(), 0.0);
    for (std::size_t i = 0; i < fractions.rows(); ++i)
        for (std::size_t z = 0; z < fractions.cols(); ++z) r[i] += fractions(i, z) * rates(i, z);
    return r;
}

/// Largest relative gap (max_k w_k H_kz / r_k - w_i H_iz / r_i) / max_k(...)
/// over entries with phi_iz > support_tol. Zero at an optimum.
inline double kkt_residual(std::span<const double> weights, const Matrix& rates, const Matrix& fractions,
                           double support_tol = 1e-9) {
    const auto r = throughput_of(fractions, rates);
    double worst = 0.0;
    for (std::size_t z = 0; z < rates.cols(); ++z) {
        double lambda = 0.0;
        for (std::size_t i = 0; i < weights.size(); ++i) lambda = std::max(lambda, weights[i] * rates(i, z) / r[i]);
        if (lambda <= 0.0) continue;
        for (std::size_t i = 0; i < weights.size(); ++i) {
            if (fractions(i, z) <= support_tol) continue;
            worst = std::max(worst, (lambda - weights[i] * rates(i, z) / r[i]) / lambda);
        }
    }
    return worst;
}

struct ScheduleSolution {
    Matrix fractions;
    std::vector<double> throughput;
    double pf_value = 0.0;
    double kkt_residual = 0.0;
    std::size_t iterations = 0;
};

struct OracleOptions {
    std::size_t max_iterations = 20000;
    double kkt_tolerance = 1e-7;
};

namespace detail {

/// Euclidean projection of v onto the probability simplex (sort-based).
inline void project_simplex(std::span<double> v) {
    std::vector<double> u(v.begin(), v.end());
    std::sort(u.begin(), u.end(), std::greater<>());
    double cum = 0.0, theta = 0.0;
    for (std::size_t j = 0; j < u.size(); ++j) {
        cum += u[j];
        const double t = (cum - 1.0) / static_cast<double>(j + 1);
        if (u[j] - t > 0.0) theta = t;
    }
    for (double& x : v) x = std::max(x - theta, 0.0);
}

inline double objective(std::span<const double> w, const Matrix& rates, const Matrix& phi) {
    return pf_value(w, throughput_of(phi, rates));
}

/// Exact two-client optimum: the first client takes a prefix of blocks
/// sorted by its rate ratio, with at most one block split.
inline Matrix two_client_optimum(std::span<const double> w, const Matrix& rates) {
    const std::size_t Z = rates.cols();
    std::vector<std::size_t> order(Z);
    std::iota(order.begin(), order.end(), 0);
    auto ratio = [&](std::size_t z) {
        const double a = rates(0, z), b = rates(1, z);
        if (b <= 0.0) return a > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
        return a / b;
    };
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return ratio(x) > ratio(y); });
    std::vector<double> tail_b(Z + 1, 0.0);
    for (std::size_t j = Z; j-- > 0;) tail_b[j] = tail_b[j + 1] + rates(1, order[j]);
    double best = -std::numeric_limits<double>::infinity();
    std::size_t best_k = 0;
    double best_x = 0.0;
    double head_a = 0.0;
    for (std::size_t k = 0; k < Z; ++k) {
        // client 0 owns order[0..k), shares order[k] with fraction x
        const double a = rates(0, order[k]), b = rates(1, order[k]);
        double x = 0.0;
        const double den = (w[0] + w[1]) * a * b;
        if (den > 0.0) {
            x = (w[0] * a * tail_b[k] - w[1] * b * head_a) / den;
        } else {
            x = b <= 0.0 ? 1.0 : 0.0;
        }
        x = std::clamp(x, 0.0, 1.0);
        const double r0 = head_a + x * a, r1 = tail_b[k] - x * b;
        const double val = (r0 > 0.0 && r1 > 0.0) ? w[0] * std::log(r0) + w[1] * std::log(r1)
                                                  : -std::numeric_limits<double>::infinity();
        if (val > best) {
            best = val;
            best_k = k;
            best_x = x;
        }
        head_a += a;
    }
    Matrix phi(2, Z, 0.0);
    for (std::size_t j = 0; j < Z; ++j) {
        const std::size_t z = order[j];
        const double share = j < best_k ? 1.0 : (j == best_k ? best_x : 0.0);
        phi(0, z) = share;
        phi(1, z) = 1.0 - share;
    }
    return phi;
}

}  // namespace detail

/// Maximises sum_i w_i ln(sum_z phi_iz H_iz) over per-block simplices by
/// projected-gradient ascent with backtracking. One- and two-client
/// instances are solved exactly. Throws std::domain_error if some client
/// has zero rate on every block (the program is then unbounded below).
inline ScheduleSolution solve_schedule_oracle(std::span<const double> weights, const Matrix& rates,
                                              const OracleOptions& opts = {}) {
    const std::size_t n = weights.size(), Z = rates.cols();
    if (rates.rows() != n) throw std::invalid_argument("rate table does not match weights");
    if (n == 0 || Z == 0) throw std::invalid_argument("empty scheduling instance");
    for (std::size_t i = 0; i < n; ++i) {
        const auto row = rates.row(i);
        if (std::none_of(row.begin(), row.end(), [](double h) { return h > 0.0; })) {
            throw std::domain_error("client " + std::to_string(i) + " has zero rate on every block");
        }
    }

    ScheduleSolution sol;
    if (n == 1) {
        sol.fractions = Matrix(1, Z, 1.0);
    } else if (n == 2) {
        sol.fractions = detail::two_client_optimum(weights, rates);
    } else {
        Matrix phi(n, Z, 1.0 / static_cast<double>(n));
        Matrix grad(n, Z), trial(n, Z);
        std::vector<double> col(n);
        double f = detail::objective(weights, rates, phi);
        double step = 1.0;
        bool stalled = false;
        for (; !stalled && sol.iterations < opts.max_iterations; ++sol.iterations) {
            const auto r = throughput_of(phi, rates);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t z = 0; z < Z; ++z) grad(i, z) = weights[i] * rates(i, z) / r[i];
            if (kkt_residual(weights, rates, phi) < opts.kkt_tolerance) break;
            step *= 2.0;
            for (;;) {
                for (std::size_t z = 0; z < Z; ++z) {
                    for (std::size_t i = 0; i < n; ++i) col[i] = phi(i, z) + step * grad(i, z);
                    detail::project_simplex(col);
                    for (std::size_t i = 0; i < n; ++i) trial(i, z) = col[i];
                }
                double lin = 0.0, sq = 0.0;
                for (std::size_t k = 0; k < n * Z; ++k) {
                    const double d = trial.data()[k] - phi.data()[k];
                    lin += grad.data()[k] * d;
                    sq += d * d;
                }
                const double ft = detail::objective(weights, rates, trial);
                if (ft >= f + lin - sq / (2.0 * step)) {
                    stalled = sq < 1e-30;
                    phi = trial;
                    f = ft;
                    break;
                }
                step *= 0.5;
                // Once f stops resolving the increase the search collapses;
                // the iterate is then optimal to rounding precision.
                if (step < 1e-12) {
                    stalled = true;
                    break;
                }
            }
        }
        sol.fractions = std::move(phi);
    }
    sol.throughput = throughput_of(sol.fractions, rates);
    sol.pf_value = pf_value(weights, sol.throughput);
    sol.kkt_residual = kkt_residual(weights, rates, sol.fractions);
    return sol;
}

}  // namespace hetnet
