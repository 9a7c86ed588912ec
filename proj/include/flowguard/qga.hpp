// qga.hpp - quantum-inspired genetic search over embedding subsets and
// classifier hyperparameters: qubit chromosomes, measurement collapse,
// fitness-guided rotation updates with an elitist best record, plus an
// exhaustive oracle and a budget-matched random-search baseline for
// verification
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <chrono>
#include <optional>
#include <thread>
#include <unordered_map>
#include <vector>

#include "flowguard/classifier.hpp"
#include "flowguard/errors.hpp"
#include "flowguard/matrix.hpp"
#include "flowguard/metrics.hpp"
#include "flowguard/rng.hpp"

namespace flowguard {

/// Two-amplitude unit state. Amplitudes are kept real and nonnegative:
/// measurement probabilities depend only on b^2, and the first-quadrant
/// parameterization gives the rotation step an unambiguous sign.
struct Qubit {
    double a = M_SQRT1_2;
    double b = M_SQRT1_2;

    double prob_one() const { return b * b; }
};

using Chromosome = std::vector<Qubit>;

inline bool qubit_valid(const Qubit& q, double tol = 1e-9) {
    return q.a >= 0.0 && q.b >= 0.0 && std::abs(q.a * q.a + q.b * q.b - 1.0) <= tol;
}

// plain rotation-gate application, no clamping; exposed separately so the
// norm-preservation property can be checked on the raw matrix
inline std::pair<double, double> rotate_raw(const Qubit& q, double delta) {
    const double c = std::cos(delta), s = std::sin(delta);
    return {c * q.a - s * q.b, s * q.a + c * q.b};
}

inline Qubit rotate(const Qubit& q, double delta) {
    auto [a, b] = rotate_raw(q, delta);
    double ca = std::max(a, 0.0), cb = std::max(b, 0.0);
    double n = std::sqrt(ca * ca + cb * cb);
    if (n < 1e-12) {
        // rotation left the first quadrant entirely; probabilities only see
        // squared amplitudes, so reflect back in
        ca = std::abs(a);
        cb = std::abs(b);
        n = std::sqrt(ca * ca + cb * cb);
    }
    return {ca / n, cb / n};
}

/// Sign policy for the rotation step: move the measurement probability of a
/// mismatched bit toward the best record's bit, but only when the candidate
/// scored worse than the best.
inline double delta_theta(bool bit, bool best_bit, bool current_worse_than_best,
                          double magnitude) {
    if (bit == best_bit || !current_worse_than_best) return 0.0;
    return best_bit ? magnitude : -magnitude;
}

struct HyperGrids {
    std::array<double, 4> learning_rate{0.3, 0.1, 0.03, 0.01};
    std::array<double, 4> l2_penalty{0.0, 1e-4, 1e-3, 1e-2};

    static constexpr std::size_t n_bits() { return 4; } // 2 bits per grid
};

struct MeasuredSolution {
    std::vector<bool> bits;          // post-repair, length m + n_bits
    std::vector<std::size_t> subset; // selected embedding dims, 0-based
    std::size_t lr_index = 0;
    std::size_t l2_index = 0;
    ClassifierHyper hyper;
};

struct FitnessWeights {
    double w_acc = 0.7;
    double w_fpr = 0.2;
    double w_cost = 0.02;

    void validate() const {
        if (w_acc < 0 || w_fpr < 0 || w_cost < 0) throw BadConfig("fitness weights must be >= 0");
        if (w_acc + w_fpr <= 0.0) throw BadConfig("w_acc + w_fpr must be > 0");
    }
};

struct QGAConfig {
    std::size_t population = 20;
    std::size_t generations = 50;
    double delta_theta_magnitude = 0.05; // radians; 0 degenerates to random search
    std::size_t stagnation_patience = 15; // 0 disables early stop
    std::uint64_t seed = 1;

    void validate() const {
        if (population < 2) throw BadConfig("population must be >= 2");
        if (generations < 1) throw BadConfig("generations must be >= 1");
        if (delta_theta_magnitude < 0.0) throw BadConfig("delta_theta_magnitude must be >= 0");
    }
};

struct BestRecord {
    std::vector<bool> bits;
    double fitness = 0.0;
    std::size_t generation_found = 0;
    std::size_t evaluations_used = 0;
};

/// Everything a fitness evaluation needs: embedding matrices and labels for
/// the train/val splits, the trade-off weights, and the run seed.
struct EvaluationContext {
    Matrix train_z, val_z;
    std::vector<int> train_y, val_y;
    FitnessWeights weights;
    std::uint64_t seed = 0;

    std::size_t m() const { return train_z.cols; }

    void validate() const {
        weights.validate();
        if (train_z.cols != val_z.cols)
            throw DimensionMismatch("context: train/val embedding widths differ");
        if (train_z.rows != train_y.size() || val_z.rows != val_y.size())
            throw DimensionMismatch("context: label lengths do not match rows");
        if (train_z.cols == 0 || train_z.rows == 0 || val_z.rows == 0)
            throw DimensionMismatch("context: empty embedding matrix");
    }
};

inline std::vector<Chromosome> init_population(const QGAConfig& cfg, std::size_t n_q) {
    cfg.validate();
    if (n_q < 1) throw InvalidDimensions("init_population: n_q must be >= 1");
    return std::vector<Chromosome>(cfg.population, Chromosome(n_q, Qubit{}));
}

inline std::vector<bool> measure(const Chromosome& c, RngStream& rng) {
    std::vector<bool> bits(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) bits[i] = rng.uniform() < c[i].prob_one();
    return bits;
}

/// Split a measured bitstring into the feature subset and grid indices.
/// An empty subset is repaired by forcing on the feature bit with the
/// largest 1-probability in the measuring chromosome (lowest index wins
/// ties); without a chromosome the repair falls to index 0, which is the
/// same tie-break applied to a uniform superposition.
inline MeasuredSolution decode(const std::vector<bool>& bits, std::size_t m,
                               const HyperGrids& grids, const Chromosome* chrom = nullptr) {
    if (bits.size() != m + HyperGrids::n_bits())
        throw LengthMismatch("decode: expected " + std::to_string(m + HyperGrids::n_bits()) +
                             " bits, got " + std::to_string(bits.size()));
    if (chrom && chrom->size() != bits.size())
        throw LengthMismatch("decode: chromosome length mismatch");
    MeasuredSolution sol;
    sol.bits = bits;
    for (std::size_t i = 0; i < m; ++i)
        if (bits[i]) sol.subset.push_back(i);
    if (sol.subset.empty()) {
        std::size_t arg = 0;
        if (chrom) {
            double best = -1.0;
            for (std::size_t i = 0; i < m; ++i)
                if ((*chrom)[i].prob_one() > best) {
                    best = (*chrom)[i].prob_one();
                    arg = i;
                }
        }
        sol.bits[arg] = true;
        sol.subset.push_back(arg);
    }
    sol.lr_index = (bits[m] ? 2 : 0) + (bits[m + 1] ? 1 : 0);
    sol.l2_index = (bits[m + 2] ? 2 : 0) + (bits[m + 3] ? 1 : 0);
    sol.hyper.learning_rate = grids.learning_rate[sol.lr_index];
    sol.hyper.l2_penalty = grids.l2_penalty[sol.l2_index];
    return sol;
}

struct FitnessBreakdown {
    double accuracy = 0.0;
    double fpr = 0.0;
    double cost = 0.0;
    double value = 0.0;
};

/// F(S) = w_acc * Acc + w_fpr * (1 - FPR) - w_cost * Cost with Cost = |S|/m.
/// Single-class training data aborts the candidate with fitness 0.
inline FitnessBreakdown fitness_detail(const MeasuredSolution& sol,
                                       const EvaluationContext& ctx) {
    ctx.validate();
    if (sol.subset.empty()) throw InvalidDimensions("fitness: empty subset");
    FitnessBreakdown out;
    out.cost = static_cast<double>(sol.subset.size()) / static_cast<double>(ctx.m());

    Matrix ztr = select_columns(ctx.train_z, sol.subset);
    ClassifierParams clf;
    try {
        clf = train_classifier(ztr, ctx.train_y, sol.hyper, ctx.seed);
    } catch (const SingleClassTraining&) {
        return out; // value stays 0
    }
    Matrix zval = select_columns(ctx.val_z, sol.subset);
    auto pred = scores_to_labels(predict_scores(clf, zval));
    ConfusionCounts c = confusion(ctx.val_y, pred);
    out.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    // no negatives in val means nothing can be misflagged
    out.fpr = (c.fp + c.tn) ? static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn)
                            : 0.0;
    out.value = ctx.weights.w_acc * out.accuracy + ctx.weights.w_fpr * (1.0 - out.fpr) -
                ctx.weights.w_cost * out.cost;
    return out;
}

inline double fitness(const MeasuredSolution& sol, const EvaluationContext& ctx) {
    return fitness_detail(sol, ctx).value;
}

namespace detail {

inline std::uint64_t bits_key(const std::vector<bool>& bits) {
    if (bits.size() > 63) throw TooLarge("bitstring longer than 63 bits");
    std::uint64_t k = 0;
    for (std::size_t i = 0; i < bits.size(); ++i)
        if (bits[i]) k |= (1ULL << i);
    return k;
}

inline bool lex_less(const std::vector<bool>& a, const std::vector<bool>& b) {
    for (std::size_t i = 0; i < a.size() && i < b.size(); ++i)
        if (a[i] != b[i]) return !a[i];
    return a.size() < b.size();
}

// evaluate fn(i) for i in [0, count) on a couple of threads; results land in
// index order, so any later reduction is schedule-independent
template <typename Fn>
void parallel_for_indexed(std::size_t count, Fn&& fn) {
    unsigned hw = std::thread::hardware_concurrency();
    std::size_t n_threads = std::min<std::size_t>(hw ? hw : 1, 4);
    if (n_threads <= 1 || count < 4) {
        for (std::size_t i = 0; i < count; ++i) fn(i);
        return;
    }
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < n_threads; ++t)
        pool.emplace_back([&, t] {
            for (std::size_t i = t; i < count; i += n_threads) fn(i);
        });
    for (auto& th : pool) th.join();
}

} // namespace detail

struct EvolveResult {
    BestRecord best;
    FitnessBreakdown best_detail;
    std::vector<double> trace; // best-so-far fitness per generation
    std::size_t generations_run = 0;
    std::vector<double> generation_seconds;
};

/// One run of the evolutionary loop: measure the population, evaluate,
/// update the elitist best record, then rotate every qubit toward the best
/// record's bits. Fitness values are memoized per bitstring, so
/// evaluations_used counts distinct trainings (always <= population *
/// generations).
inline EvolveResult evolve(const QGAConfig& cfg, const EvaluationContext& ctx,
                           const HyperGrids& grids = {}) {
    cfg.validate();
    ctx.validate();
    const std::size_t m = ctx.m();
    const std::size_t n_q = m + HyperGrids::n_bits();
    auto population = init_population(cfg, n_q);

    EvolveResult out;
    std::optional<BestRecord> best;
    std::unordered_map<std::uint64_t, double> cache;
    std::size_t evaluations = 0;
    std::size_t stagnation = 0;

    for (std::size_t gen = 0; gen < cfg.generations; ++gen) {
        auto t0 = std::chrono::steady_clock::now();
        std::vector<MeasuredSolution> sols(cfg.population);
        for (std::size_t i = 0; i < cfg.population; ++i) {
            auto rng = derive_stream(cfg.seed, "qga.measure", gen, i);
            sols[i] = decode(measure(population[i], rng), m, grids, &population[i]);
        }

        // evaluate distinct new bitstrings, in parallel, then reduce in order
        std::vector<std::uint64_t> keys(cfg.population);
        std::vector<std::uint64_t> miss;
        for (std::size_t i = 0; i < cfg.population; ++i) {
            keys[i] = detail::bits_key(sols[i].bits);
            if (!cache.count(keys[i])) {
                cache.emplace(keys[i], 0.0); // reserve slot
                miss.push_back(keys[i]);
            }
        }
        {
            std::vector<double> vals(miss.size());
            std::vector<const MeasuredSolution*> by_key(miss.size());
            for (std::size_t k = 0; k < miss.size(); ++k)
                for (std::size_t i = 0; i < cfg.population; ++i)
                    if (keys[i] == miss[k]) {
                        by_key[k] = &sols[i];
                        break;
                    }
            detail::parallel_for_indexed(miss.size(), [&](std::size_t k) {
                vals[k] = fitness(*by_key[k], ctx);
            });
            for (std::size_t k = 0; k < miss.size(); ++k) cache[miss[k]] = vals[k];
            evaluations += miss.size();
        }

        bool improved = false;
        std::vector<double> fit(cfg.population);
        for (std::size_t i = 0; i < cfg.population; ++i) {
            fit[i] = cache[keys[i]];
            if (!best || fit[i] > best->fitness) {
                best = BestRecord{sols[i].bits, fit[i], gen, 0};
                improved = true;
            }
        }
        out.trace.push_back(best->fitness);

        for (std::size_t i = 0; i < cfg.population; ++i) {
            const bool worse = fit[i] < best->fitness;
            for (std::size_t q = 0; q < n_q; ++q) {
                const double d = delta_theta(sols[i].bits[q], best->bits[q], worse,
                                             cfg.delta_theta_magnitude);
                if (d != 0.0) population[i][q] = rotate(population[i][q], d);
            }
        }

        out.generations_run = gen + 1;
        out.generation_seconds.push_back(
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
        stagnation = improved ? 0 : stagnation + 1;
        if (cfg.stagnation_patience > 0 && stagnation >= cfg.stagnation_patience) break;
    }

    out.best = *best;
    out.best.evaluations_used = evaluations;
    MeasuredSolution best_sol = decode(out.best.bits, m, grids);
    out.best_detail = fitness_detail(best_sol, ctx);
    return out;
}

struct OracleResult {
    std::vector<bool> bits;
    double fitness = 0.0;
    std::size_t evaluations = 0;
};

/// Ground truth by brute force: every nonempty subset crossed with every
/// grid cell. Ties resolve to the lexicographically smallest bitstring.
inline OracleResult exhaustive_oracle(const EvaluationContext& ctx,
                                      const HyperGrids& grids = {}) {
    ctx.validate();
    const std::size_t m = ctx.m();
    if (m + HyperGrids::n_bits() > 18)
        throw TooLarge("exhaustive_oracle: search space above 2^18 evaluations");

    const std::uint64_t n_masks = (1ULL << m) - 1; // nonempty subsets
    const std::size_t total = static_cast<std::size_t>(n_masks) * 16;

    auto bits_of = [&](std::size_t job) {
        const std::uint64_t mask = (job / 16) + 1;
        const std::size_t cell = job % 16;
        std::vector<bool> bits(m + HyperGrids::n_bits(), false);
        for (std::size_t i = 0; i < m; ++i) bits[i] = (mask >> i) & 1;
        bits[m] = (cell & 8) != 0;
        bits[m + 1] = (cell & 4) != 0;
        bits[m + 2] = (cell & 2) != 0;
        bits[m + 3] = (cell & 1) != 0;
        return bits;
    };

    std::vector<double> values(total);
    detail::parallel_for_indexed(total, [&](std::size_t job) {
        MeasuredSolution sol = decode(bits_of(job), m, grids);
        values[job] = fitness(sol, ctx);
    });

    OracleResult out;
    out.evaluations = total;
    bool have = false;
    double best_val = 0.0;
    std::vector<bool> best_bits;
    for (std::size_t job = 0; job < total; ++job) {
        const double v = values[job];
        if (!have || v > best_val) {
            have = true;
            best_val = v;
            best_bits = bits_of(job);
        } else if (v == best_val) {
            auto bits = bits_of(job);
            if (detail::lex_less(bits, best_bits)) best_bits = std::move(bits);
        }
    }
    out.bits = best_bits;
    out.fitness = best_val;
    return out;
}

struct RandomSearchResult {
    std::vector<bool> bits;
    double fitness = 0.0;
    std::size_t samples = 0;
};

/// Budget-matched baseline: `samples` uniform bitstrings through the same
/// decode/repair and fitness path, best kept.
inline RandomSearchResult random_search(const EvaluationContext& ctx, std::size_t samples,
                                        std::uint64_t seed, const HyperGrids& grids = {}) {
    ctx.validate();
    const std::size_t m = ctx.m();
    const std::size_t n_q = m + HyperGrids::n_bits();
    auto rng = derive_stream(seed, "qga.random_search");

    std::vector<std::vector<bool>> draws(samples);
    for (auto& bits : draws) {
        bits.resize(n_q);
        for (std::size_t q = 0; q < n_q; ++q) bits[q] = rng.bernoulli(0.5);
    }

    std::unordered_map<std::uint64_t, double> cache;
    RandomSearchResult out;
    out.samples = samples;
    bool have = false;
    std::vector<std::uint64_t> keys(samples);
    std::vector<MeasuredSolution> sols(samples);
    std::vector<std::uint64_t> miss;
    for (std::size_t i = 0; i < samples; ++i) {
        sols[i] = decode(draws[i], m, grids);
        keys[i] = detail::bits_key(sols[i].bits);
        if (!cache.count(keys[i])) {
            cache.emplace(keys[i], 0.0);
            miss.push_back(keys[i]);
        }
    }
    std::vector<double> vals(miss.size());
    std::vector<const MeasuredSolution*> by_key(miss.size());
    for (std::size_t k = 0; k < miss.size(); ++k)
        for (std::size_t i = 0; i < samples; ++i)
            if (keys[i] == miss[k]) {
                by_key[k] = &sols[i];
                break;
            }
    detail::parallel_for_indexed(miss.size(),
                                 [&](std::size_t k) { vals[k] = fitness(*by_key[k], ctx); });
    for (std::size_t k = 0; k < miss.size(); ++k) cache[miss[k]] = vals[k];
    for (std::size_t i = 0; i < samples; ++i) {
        const double v = cache[keys[i]];
        if (!have || v > out.fitness) {
            have = true;
            out.fitness = v;
            out.bits = sols[i].bits;
        }
    }
    return out;
}

} // namespace flowguard
