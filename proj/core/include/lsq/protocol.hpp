#pragma once

#include "lsq/problem.hpp"
#include "lsq/random.hpp"
#include "lsq/types.hpp"

#include <string>
#include <variant>
#include <vector>

namespace lsq {

/// Bounded per-entry perturbation applied to iterated variables each round.
struct NoiseChannel {
    enum class Kind { None, RoundDecimals, AdditiveUniform };

    Kind kind = Kind::None;
    int decimals = 0;             // RoundDecimals
    double lo = 0.0, hi = 0.0;    // AdditiveUniform, per-entry range [lo, hi)
    std::uint64_t seed = 0;

    static NoiseChannel none() { return {}; }
    static NoiseChannel round_decimals(int k);
    static NoiseChannel additive_uniform(double lo, double hi, std::uint64_t seed);

    /// "none" | "round:K" | "uniform:LO,HI,SEED"
    static NoiseChannel parse(const std::string& text);
    std::string describe() const;

    bool is_none() const { return kind == Kind::None; }

    /// Worst-case perturbation norm for a dim-length vector:
    /// 0.5 * 10^-k * sqrt(dim) for rounding, max(|lo|,|hi|) * sqrt(dim)
    /// for uniform noise, 0 for the identity channel.
    double norm_bound(Index dim) const;
};

/// Stateful applier: the uniform channel consumes one reproducible stream
/// across all variables and rounds, in the order apply() is called
/// (agent-id-then-entry order for per-agent variables).
class NoiseStream {
public:
    explicit NoiseStream(NoiseChannel channel);

    void apply(Vector& v);
    void apply(Matrix& K);  // column by column, entries in index order

    const NoiseChannel& channel() const { return channel_; }
    void reset() { rng_ = SplitMix64(channel_.seed); }

private:
    NoiseChannel channel_;
    SplitMix64 rng_;
};

/// One-shot form: perturbs v with a fresh stream seeded from the channel.
Vector apply_noise(const NoiseChannel& c, const Vector& v);

/// Synchronous server-agent round engine. Holds the immutable shards, the
/// noise stream, and the round counter. Reduction order is ascending
/// agent_id, left fold: replies are computed independently per agent (they
/// may run concurrently) and folded in that fixed order, so repeated runs
/// with identical inputs are bit-identical regardless of schedule.
class RoundEngine {
public:
    explicit RoundEngine(std::vector<AgentShard> shards, NoiseChannel noise = {});
    explicit RoundEngine(std::vector<QuadraticShard> shards, NoiseChannel noise = {});

    int agents() const { return agents_; }
    Index dim() const { return dim_; }
    int round() const { return round_; }
    void advance() { ++round_; }

    bool quadratic() const;
    const std::vector<AgentShard>& lsq_shards() const;
    const std::vector<QuadraticShard>& quad_shards() const;

    /// f is invoked once per shard in ascending agent_id order.
    template <class Fn>
    void visit_shards(Fn&& f) const {
        if (auto* v = std::get_if<std::vector<AgentShard>>(&shards_)) {
            for (const auto& s : *v) f(s);
        } else {
            for (const auto& s : std::get<std::vector<QuadraticShard>>(shards_)) f(s);
        }
    }

    NoiseStream& noise() { return noise_; }
    const NoiseStream& noise_channel() const { return noise_; }

private:
    std::variant<std::vector<AgentShard>, std::vector<QuadraticShard>> shards_;
    NoiseStream noise_;
    Index dim_ = 0;
    int agents_ = 0;
    int round_ = 0;
};

/// Executes one synchronous round of `solver` and advances the counter.
/// Returns ||sum_i g^i(t)|| as reported by the solver.
template <class Solver>
double run_round(Solver& solver, RoundEngine& engine) {
    if (solver.x().size() != engine.dim())
        throw std::invalid_argument("run_round: solver state and shards disagree on dimension");
    double grad_norm = solver.round(engine);
    engine.advance();
    return grad_norm;
}

}  // namespace lsq
