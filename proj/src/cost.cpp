#include "mmot/cost.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "mmot/errors.hpp"

namespace mmot {

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * x[i];
    return s;
}

double block_max(const std::vector<AffinePiece>& pieces, const std::vector<double>& x) {
    double best = -std::numeric_limits<double>::infinity();
    for (const auto& piece : pieces) best = std::max(best, dot(piece.a, x) + piece.b);
    return best;
}

double inf_norm(const std::vector<double>& a) {
    double n = 0.0;
    for (double v : a) n = std::max(n, std::abs(v));
    return n;
}

void check_blocks(const CPWACost& f) {
    if (f.pos_blocks.empty() && f.neg_blocks.empty())
        throw DomainError("cost: needs at least one block");
    const std::size_t n = f.box.dims();
    for (const auto* blocks : {&f.pos_blocks, &f.neg_blocks})
        for (const auto& block : *blocks) {
            if (block.empty()) throw DomainError("cost: empty block");
            for (const auto& piece : block)
                if (piece.a.size() != n)
                    throw DomainError("cost: piece dimension does not match the box");
        }
}

}  // namespace

bool Box::contains(const std::vector<double>& x, double guard) const {
    if (x.size() != dims()) return false;
    for (std::size_t i = 0; i < dims(); ++i) {
        const double pad = guard * std::max({1.0, std::abs(lo[i]), std::abs(hi[i])});
        if (x[i] < lo[i] - pad || x[i] > hi[i] + pad) return false;
    }
    return true;
}

double CPWACost::eval(const std::vector<double>& x) const {
    if (!box.contains(x)) {
        std::ostringstream msg;
        msg << "cost: point outside the box (dim " << x.size() << " vs " << box.dims() << ")";
        throw DomainError(msg.str());
    }
    double value = 0.0;
    for (const auto& block : pos_blocks) value += block_max(block, x);
    for (const auto& block : neg_blocks) value -= block_max(block, x);
    return value;
}

void CPWACost::shift(double c) {
    if (pos_blocks.empty()) {
        std::vector<AffinePiece> constant(1);
        constant[0].a.assign(box.dims(), 0.0);
        constant[0].b = c;
        pos_blocks.push_back(std::move(constant));
        return;
    }
    for (auto& piece : pos_blocks.front()) piece.b += c;
}

double CPWACost::box_upper_bound() const {
    double ub = 0.0;
    for (const auto& block : pos_blocks) {
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& piece : block) m = std::max(m, box_max_linear(piece.a, piece.b, box));
        ub += m;
    }
    for (const auto& block : neg_blocks) {
        // max of affine pieces >= any single piece's box minimum; the largest
        // such minimum is a valid lower bound for the block.
        double m = -std::numeric_limits<double>::infinity();
        for (const auto& piece : block) m = std::max(m, box_min_linear(piece.a, piece.b, box));
        ub -= m;
    }
    return ub;
}

CPWACost CPWACost::parse(const Json& descriptor, Box box) {
    CPWACost f;
    f.box = std::move(box);
    try {
        auto read_blocks = [](const Json& j) {
            std::vector<std::vector<AffinePiece>> blocks;
            for (const auto& jblock : j) {
                std::vector<AffinePiece> block;
                for (const auto& jpiece : jblock) {
                    AffinePiece piece;
                    piece.a = jpiece.at("a").get<std::vector<double>>();
                    piece.b = jpiece.at("b").get<double>();
                    block.push_back(std::move(piece));
                }
                blocks.push_back(std::move(block));
            }
            return blocks;
        };
        if (descriptor.contains("pos_blocks"))
            f.pos_blocks = read_blocks(descriptor.at("pos_blocks"));
        if (descriptor.contains("neg_blocks"))
            f.neg_blocks = read_blocks(descriptor.at("neg_blocks"));
    } catch (const Json::exception& e) {
        throw DomainError(std::string("cost descriptor: ") + e.what());
    }
    check_blocks(f);
    return f;
}

Json CPWACost::serialize() const {
    auto write_blocks = [](const std::vector<std::vector<AffinePiece>>& blocks) {
        Json j = Json::array();
        for (const auto& block : blocks) {
            Json jblock = Json::array();
            for (const auto& piece : block) {
                Json jpiece;
                jpiece["a"] = piece.a;
                jpiece["b"] = piece.b;
                jblock.push_back(std::move(jpiece));
            }
            j.push_back(std::move(jblock));
        }
        return j;
    };
    Json out;
    out["pos_blocks"] = write_blocks(pos_blocks);
    out["neg_blocks"] = write_blocks(neg_blocks);
    return out;
}

LipschitzInfo lipschitz_l1(const CPWACost& f) {
    LipschitzInfo info;
    for (const auto& block : f.pos_blocks) {
        double m = 0.0;
        for (const auto& piece : block) m = std::max(m, inf_norm(piece.a));
        info.pos_contributions.push_back(m);
        info.l_f += m;
    }
    for (const auto& block : f.neg_blocks) {
        double m = 0.0;
        for (const auto& piece : block) m = std::max(m, inf_norm(piece.a));
        info.neg_contributions.push_back(m);
        info.l_f += m;
    }
    return info;
}

double box_max_linear(const std::vector<double>& a, double b, const Box& box) {
    double m = b;
    for (std::size_t i = 0; i < a.size(); ++i)
        m += a[i] > 0.0 ? a[i] * box.hi[i] : a[i] * box.lo[i];
    return m;
}

double box_min_linear(const std::vector<double>& a, double b, const Box& box) {
    double m = b;
    for (std::size_t i = 0; i < a.size(); ++i)
        m += a[i] > 0.0 ? a[i] * box.lo[i] : a[i] * box.hi[i];
    return m;
}

CPWACost random_instance(std::size_t n, std::size_t k_pos, std::size_t k_neg,
                         std::uint64_t seed, Box box, double t_lo, double t_hi) {
    if (n < 1) throw DomainError("random_instance: N must be >= 1");
    if (k_pos + k_neg < 1) throw DomainError("random_instance: needs at least one block");
    if (box.dims() != n) throw DomainError("random_instance: box dimension mismatch");
    Rng rng = Rng::stream(seed, /*tag=*/0x11, /*index=*/0);
    CPWACost f;
    f.box = std::move(box);
    auto make_block = [&]() {
        std::vector<double> s(n);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : s) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        } while (!(norm > 1e-12));
        for (auto& v : s) v /= norm;
        const double t = rng.uniform(t_lo, t_hi);
        // |<s, x> - t| as the larger of the two signed expressions.
        std::vector<AffinePiece> block(2);
        block[0].a = s;
        block[0].b = -t;
        block[1].a.resize(n);
        for (std::size_t i = 0; i < n; ++i) block[1].a[i] = -s[i];
        block[1].b = t;
        return block;
    };
    for (std::size_t k = 0; k < k_pos; ++k) f.pos_blocks.push_back(make_block());
    for (std::size_t k = 0; k < k_neg; ++k) f.neg_blocks.push_back(make_block());
    return f;
}

}  // namespace mmot
