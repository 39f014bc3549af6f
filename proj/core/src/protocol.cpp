#include "lsq/protocol.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace lsq {

NoiseChannel NoiseChannel::round_decimals(int k) {
    if (k < 0) throw std::invalid_argument("round_decimals: negative digit count");
    NoiseChannel c;
    c.kind = Kind::RoundDecimals;
    c.decimals = k;
    return c;
}

NoiseChannel NoiseChannel::additive_uniform(double lo, double hi, std::uint64_t seed) {
    if (lo > hi) throw std::invalid_argument("additive_uniform: lo > hi");
    NoiseChannel c;
    c.kind = Kind::AdditiveUniform;
    c.lo = lo;
    c.hi = hi;
    c.seed = seed;
    return c;
}

NoiseChannel NoiseChannel::parse(const std::string& text) {
    if (text == "none" || text.empty()) return none();
    if (text.rfind("round:", 0) == 0) return round_decimals(std::stoi(text.substr(6)));
    if (text.rfind("uniform:", 0) == 0) {
        std::istringstream in(text.substr(8));
        double lo = 0.0, hi = 0.0;
        std::uint64_t seed = 0;
        char c1 = 0, c2 = 0;
        if (!(in >> lo >> c1 >> hi >> c2 >> seed) || c1 != ',' || c2 != ',')
            throw std::invalid_argument("noise spec: expected uniform:lo,hi,seed");
        return additive_uniform(lo, hi, seed);
    }
    throw std::invalid_argument("unknown noise spec: " + text);
}

std::string NoiseChannel::describe() const {
    switch (kind) {
        case Kind::None:
            return "none";
        case Kind::RoundDecimals:
            return "round:" + std::to_string(decimals);
        case Kind::AdditiveUniform: {
            std::ostringstream out;
            out << "uniform:" << lo << "," << hi << "," << seed;
            return out.str();
        }
    }
    return "none";
}

double NoiseChannel::norm_bound(Index dim) const {
    const double root = std::sqrt(static_cast<double>(dim));
    switch (kind) {
        case Kind::None:
            return 0.0;
        case Kind::RoundDecimals:
            return 0.5 * std::pow(10.0, -decimals) * root;
        case Kind::AdditiveUniform:
            return std::max(std::abs(lo), std::abs(hi)) * root;
    }
    return 0.0;
}

NoiseStream::NoiseStream(NoiseChannel channel) : channel_(channel), rng_(channel.seed) {
    if (channel_.kind == NoiseChannel::Kind::AdditiveUniform && channel_.lo > channel_.hi)
        throw std::invalid_argument("NoiseStream: lo > hi");
}

void NoiseStream::apply(Vector& v) {
    switch (channel_.kind) {
        case NoiseChannel::Kind::None:
            return;
        case NoiseChannel::Kind::RoundDecimals: {
            // Ties round half away from zero, matching std::round.
            const double scale = std::pow(10.0, channel_.decimals);
            for (Index i = 0; i < v.size(); ++i) v(i) = std::round(v(i) * scale) / scale;
            return;
        }
        case NoiseChannel::Kind::AdditiveUniform:
            for (Index i = 0; i < v.size(); ++i)
                v(i) += rng_.next_uniform(channel_.lo, channel_.hi);
            return;
    }
}

void NoiseStream::apply(Matrix& K) {
    if (channel_.kind == NoiseChannel::Kind::None) return;
    for (Index j = 0; j < K.cols(); ++j) {
        Vector col = K.col(j);
        apply(col);
        K.col(j) = col;
    }
}

Vector apply_noise(const NoiseChannel& c, const Vector& v) {
    NoiseStream stream(c);
    Vector out = v;
    stream.apply(out);
    return out;
}

namespace {

template <class Shards>
Index shard_dim(const Shards& shards) {
    if (shards.empty()) throw std::invalid_argument("RoundEngine: no shards");
    Index d = 0;
    int expect_id = 1;
    for (const auto& s : shards) {
        if (s.agent_id != expect_id++)
            throw std::invalid_argument("RoundEngine: shard agent_ids must be 1..m ascending");
        Index cols;
        if constexpr (requires { s.Ai; }) {
            cols = s.Ai.cols();
            if (s.Bi.size() != s.Ai.rows())
                throw std::invalid_argument("RoundEngine: shard observation length mismatch");
        } else {
            cols = s.Pi.cols();
            if (s.Pi.rows() != cols || s.qi.size() != cols)
                throw std::invalid_argument("RoundEngine: quadratic shard dimension mismatch");
        }
        if (d == 0)
            d = cols;
        else if (cols != d)
            throw std::invalid_argument("RoundEngine: shards disagree on column count");
    }
    if (d == 0) throw std::invalid_argument("RoundEngine: zero-dimensional shards");
    return d;
}

}  // namespace

RoundEngine::RoundEngine(std::vector<AgentShard> shards, NoiseChannel noise)
    : shards_(std::move(shards)), noise_(noise) {
    const auto& v = std::get<std::vector<AgentShard>>(shards_);
    dim_ = shard_dim(v);
    agents_ = static_cast<int>(v.size());
}

RoundEngine::RoundEngine(std::vector<QuadraticShard> shards, NoiseChannel noise)
    : shards_(std::move(shards)), noise_(noise) {
    const auto& v = std::get<std::vector<QuadraticShard>>(shards_);
    dim_ = shard_dim(v);
    agents_ = static_cast<int>(v.size());

    // Each local cost matrix must be symmetric and their sum positive
    // semi-definite, otherwise the aggregate cost is not convex.
    Matrix P_sum = Matrix::Zero(dim_, dim_);
    for (const auto& s : v) {
        const double scale = std::max(1e-300, s.Pi.cwiseAbs().maxCoeff());
        if ((s.Pi - s.Pi.transpose()).cwiseAbs().maxCoeff() > 1e-10 * scale)
            throw std::invalid_argument("RoundEngine: quadratic shard matrix is not symmetric");
        P_sum += s.Pi;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (P_sum + P_sum.transpose()),
                                             Eigen::EigenvaluesOnly);
    const double lmax = es.eigenvalues().cwiseAbs().maxCoeff();
    if (es.eigenvalues()(0) < -1e-10 * std::max(1.0, lmax))
        throw std::invalid_argument("RoundEngine: aggregate quadratic cost is not convex");
}

bool RoundEngine::quadratic() const {
    return std::holds_alternative<std::vector<QuadraticShard>>(shards_);
}

const std::vector<AgentShard>& RoundEngine::lsq_shards() const {
    if (quadratic())
        throw std::logic_error("RoundEngine: least-squares shards requested from quadratic engine");
    return std::get<std::vector<AgentShard>>(shards_);
}

const std::vector<QuadraticShard>& RoundEngine::quad_shards() const {
    if (!quadratic())
        throw std::logic_error("RoundEngine: quadratic shards requested from least-squares engine");
    return std::get<std::vector<QuadraticShard>>(shards_);
}

}  // namespace lsq
