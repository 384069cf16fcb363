#pragma once

// Closed-loop simulation with per-subsystem policies and monitoring.

#include "sepinv/synth.hpp"

#include <functional>
#include <ostream>
#include <random>

namespace sepinv {

/// u_i as a function of the full state; decentralized policies read only x_i.
using Policy = std::function<Vec(const Vec& x)>;

enum class DistMode { zero, vertices, random };

inline DistMode parse_dist_mode(const std::string& s)
{
    if (s == "zero")
        return DistMode::zero;
    if (s == "vertices")
        return DistMode::vertices;
    if (s == "random")
        return DistMode::random;
    throw Error("unknown disturbance mode '" + s + "' (zero|vertices|random)");
}

struct Violation {
    int step = 0;
    int subsystem = 0; ///< 1-based
    std::string kind;  ///< state_exit | input_violation
};

struct GoalVisit {
    int step = 0;
    int subsystem = 0; ///< 1-based
    int goal = 0;
};

struct Trajectory {
    std::vector<Vec> states; ///< steps + 1 entries
    std::vector<Vec> inputs;
    std::vector<Vec> disturbances;
    std::vector<Violation> violations;
    std::vector<GoalVisit> visits; ///< entries into a goal (outside at step-1, inside at step)

    int visit_count(int subsystem, int goal) const
    {
        int c = 0;
        for (const auto& v : visits)
            c += v.subsystem == subsystem && v.goal == goal;
        return c;
    }
};

struct SimOptions {
    int steps = 100;
    DistMode dist = DistMode::zero;
    std::uint64_t seed = 0;
    /// goals[i] are monitored for subsystem i (may be empty)
    std::vector<std::vector<HPolytope>> goals;
    double tol = 1e-9;
};

/// u = K x, one policy per subsystem.
inline std::vector<Policy> gain_policies(const ComposedSystem& cs, const SynthesisSolution& sol)
{
    std::vector<Policy> out;
    for (int i = 0; i < cs.d(); ++i) {
        const Mat Ki = sol.K.middleRows(cs.blocks[i].u, cs.blocks[i].m);
        out.push_back([Ki](const Vec& x) -> Vec { return Ki * x; });
    }
    return out;
}

/// Policy reading x_i only; the controller is shared so its mode persists.
inline Policy local_policy(const ComposedSystem& cs, std::shared_ptr<RecurrenceController> ctrl)
{
    const BlockRange b = cs.blocks[ctrl->subsystem];
    return [b, ctrl](const Vec& x) -> Vec { return recurrence_policy(*ctrl, x.segment(b.x, b.n)); };
}

namespace sim_detail {

class Disturber {
public:
    Disturber(const ComposedSystem& cs, DistMode mode, std::uint64_t seed) : cs_(cs), mode_(mode), rng_(seed)
    {
        for (int i = 0; i < cs.d(); ++i)
            verts_.push_back(cs.blocks[i].p > 0 ? parallelotope_vertices(cs.Hd_block(i)) : std::vector<Vec>{});
    }

    Vec next(int step)
    {
        Vec d = Vec::Zero(cs_.p);
        if (mode_ == DistMode::zero)
            return d;
        std::uniform_real_distribution<double> uni(-1.0, 1.0);
        for (int i = 0; i < cs_.d(); ++i) {
            const auto& b = cs_.blocks[i];
            if (b.p == 0)
                continue;
            if (mode_ == DistMode::vertices) {
                // subsystems walk their vertex lists out of phase
                const auto& V = verts_[i];
                d.segment(b.d, b.p) = V[static_cast<std::size_t>(step + 7 * i) % V.size()];
            } else {
                Vec xi(b.p);
                for (Eigen::Index k = 0; k < b.p; ++k)
                    xi(k) = uni(rng_);
                d.segment(b.d, b.p) = cs_.Hd_block(i).partialPivLu().solve(xi);
            }
        }
        return d;
    }

private:
    const ComposedSystem& cs_;
    DistMode mode_;
    std::mt19937_64 rng_;
    std::vector<std::vector<Vec>> verts_;
};

} // namespace sim_detail

inline Trajectory run(const ComposedSystem& cs, const SynthesisSolution& sol, const std::vector<Policy>& policies,
    const Vec& x0, const SimOptions& opts)
{
    if (static_cast<int>(policies.size()) != cs.d())
        throw Error("run: need one policy per subsystem");
    if (x0.size() != cs.n)
        throw Error("run: initial state has the wrong dimension");
    if (opts.steps < 0)
        throw Error("run: steps must be >= 0");
    for (int i = 0; i < cs.d(); ++i)
        if (!sol.gen_sets[i].contains_point(x0.segment(cs.blocks[i].x, cs.blocks[i].n), 1e-8))
            throw Error("run: initial state outside the invariant set", i + 1);

    Trajectory tr;
    tr.states.push_back(x0);
    sim_detail::Disturber dist(cs, opts.dist, opts.seed);
    std::vector<std::vector<bool>> inside(cs.d());

    auto monitor = [&](int step, const Vec& x) {
        for (int i = 0; i < cs.d(); ++i) {
            const auto& b = cs.blocks[i];
            const Vec xi = x.segment(b.x, b.n);
            if (!sol.gen_sets[i].contains_point(xi, opts.tol))
                tr.violations.push_back({step, i + 1, "state_exit"});
            if (i < static_cast<int>(opts.goals.size())) {
                auto& in = inside[i];
                in.resize(opts.goals[i].size(), false);
                for (std::size_t g = 0; g < opts.goals[i].size(); ++g) {
                    const bool now = opts.goals[i][g].contains_point(xi, opts.tol);
                    if (now && !in[g])
                        tr.visits.push_back({step, i + 1, static_cast<int>(g)});
                    in[g] = now;
                }
            }
        }
    };
    monitor(0, x0);

    Vec x = x0;
    for (int t = 0; t < opts.steps; ++t) {
        Vec u(cs.m);
        for (int i = 0; i < cs.d(); ++i) {
            const auto& b = cs.blocks[i];
            const Vec ui = policies[i](x);
            if (ui.size() != b.m)
                throw Error("run: policy returned an input of the wrong size", i + 1);
            u.segment(b.u, b.m) = ui;
            const Vec res = cs.Hu_block(i) * ui - cs.hu_block(i);
            if (res.size() && res.maxCoeff() > opts.tol)
                tr.violations.push_back({t, i + 1, "input_violation"});
        }
        const Vec d = dist.next(t);
        x = cs.A * x + cs.B * u + (cs.p > 0 ? Vec(cs.E * d) : Vec::Zero(cs.n));
        tr.inputs.push_back(u);
        tr.disturbances.push_back(d);
        tr.states.push_back(x);
        monitor(t + 1, x);
    }
    return tr;
}

/// step, x…, u…, d…, events (inputs and disturbances are empty on the last row)
inline void write_trajectory_csv(std::ostream& os, const ComposedSystem& cs, const Trajectory& tr)
{
    os << "step";
    for (Eigen::Index k = 0; k < cs.n; ++k)
        os << ",x" << k + 1;
    for (Eigen::Index k = 0; k < cs.m; ++k)
        os << ",u" << k + 1;
    for (Eigen::Index k = 0; k < cs.p; ++k)
        os << ",d" << k + 1;
    os << ",events\n";
    for (std::size_t t = 0; t < tr.states.size(); ++t) {
        os << t;
        for (Eigen::Index k = 0; k < cs.n; ++k)
            os << ',' << lmi::fmt17(tr.states[t](k));
        for (Eigen::Index k = 0; k < cs.m; ++k)
            os << ',' << (t < tr.inputs.size() ? lmi::fmt17(tr.inputs[t](k)) : "");
        for (Eigen::Index k = 0; k < cs.p; ++k)
            os << ',' << (t < tr.disturbances.size() ? lmi::fmt17(tr.disturbances[t](k)) : "");
        os << ',';
        bool first = true;
        auto sep = [&] {
            if (!first)
                os << ';';
            first = false;
        };
        for (const auto& v : tr.visits)
            if (v.step == static_cast<int>(t)) {
                sep();
                os << "goal" << v.subsystem << '_' << v.goal;
            }
        for (const auto& v : tr.violations)
            if (v.step == static_cast<int>(t)) {
                sep();
                os << v.kind << v.subsystem;
            }
        os << '\n';
    }
}

} // namespace sepinv
