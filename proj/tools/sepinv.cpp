// sepinv: synthesis, verification and simulation of separable invariant sets.
//
// Exit codes: 0 success/valid, 2 infeasible/not valid/not converged, 1 usage or input error.

#include "sepinv.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <fstream>
#include <iostream>
#include <memory>

using namespace sepinv;

namespace {

constexpr int kOk = 0;
constexpr int kUsage = 1;
constexpr int kFail = 2;

/// Writes to `path`, or stdout for "-".
class Sink {
public:
    explicit Sink(const std::string& path)
    {
        if (path != "-") {
            file_ = std::make_unique<std::ofstream>(path);
            if (!*file_)
                throw Error("cannot write '" + path + "'");
        }
    }
    std::ostream& operator*() { return file_ ? *file_ : std::cout; }

private:
    std::unique_ptr<std::ofstream> file_;
};

Vec to_vec(const std::vector<double>& v) { return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size())); }

int check_subsystem_arg(const ComposedSystem& cs, int i)
{
    if (i < 1 || i > cs.d())
        throw Error("subsystem index " + std::to_string(i) + " out of range 1.." + std::to_string(cs.d()));
    return i - 1;
}

void print_certificate_summary(std::ostream& os, const Certificate& c)
{
    os << "certificate: " << (c.valid ? "valid" : "NOT valid") << ", worst margin " << lmi::fmt17(c.worst());
    if (c.worst_facet() >= 0)
        os << " (worst invariance facet " << c.worst_facet() + 1 << ")";
    os << '\n';
}

/// "i:lo:hi" on coordinate `coord` (1-based) of subsystem i.
struct GoalArg {
    int sub = 0;
    double lo = 0.0, hi = 0.0;
};

GoalArg parse_goal(const std::string& s)
{
    GoalArg g;
    char c1 = 0, c2 = 0;
    std::istringstream is(s);
    if (!(is >> g.sub >> c1 >> g.lo >> c2 >> g.hi) || c1 != ':' || c2 != ':' || !(is >> std::ws).eof())
        throw Error("goal '" + s + "': expected SUB:LO:HI");
    if (!(g.lo <= g.hi))
        throw Error("goal '" + s + "': LO must not exceed HI");
    return g;
}

// ---------------------------------------------------------------- subcommands

struct SynthArgs {
    std::string model, out = "solution.json", cert = "certificate.txt", objective = "none", backend = "internal";
    double eps = 0.0;
    int iters = 400;
    bool verbose = false;
};

int cmd_synth(const SynthArgs& a)
{
    const ComposedSystem cs = compose(load_model_file(a.model));
    const double eps = a.eps > 0.0 ? a.eps : default_eps(cs);
    const LmiProblem prob = build_problem(cs, eps);
    SolveOptions so;
    so.max_iter = a.iters;
    so.backend = a.backend;
    so.verbose = a.verbose;
    if (a.objective == "trace")
        so.objective = trace_w_objective(prob);

    const auto t0 = std::chrono::steady_clock::now();
    const SolveOutcome out = solve(prob, so);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << "variables " << prob.num_vars() << ", blocks " << prob.blocks.size() << ", eps " << lmi::fmt17(eps)
              << '\n'
              << "solve: " << to_string(out.status) << " after " << out.iterations << " iterations, margin "
              << lmi::fmt17(out.min_margin) << ", " << secs << " s\n";
    if (!out.message.empty())
        std::cout << "solver: " << out.message << '\n';
    if (out.status != SolveStatus::feasible)
        return kFail;

    const SynthesisSolution sol = recover(cs, prob, *out.y);
    const Certificate cert = certify(cs, sol);
    {
        Sink s(a.out);
        io::write_solution(*s, cs, sol);
    }
    {
        Sink s(a.cert);
        write_certificate(*s, cert);
    }
    print_certificate_summary(std::cout, cert);
    return cert.valid ? kOk : kFail;
}

int cmd_verify(const std::string& model, const std::string& solution, const std::string& cert_out, long samples,
    std::uint64_t seed)
{
    const ComposedSystem cs = compose(load_model_file(model));
    const SynthesisSolution sol = io::load_solution_file(solution, cs);
    const Certificate cert = certify(cs, sol);
    if (!cert_out.empty()) {
        Sink s(cert_out);
        write_certificate(*s, cert);
    }
    print_certificate_summary(std::cout, cert);
    if (samples > 0) {
        const SampleReport r = sample_check(cs, sol, samples, seed);
        std::cout << "sampled " << samples << " points: " << r.violations << " violations\n";
        if (r.violations > 0)
            return kFail;
    }
    return cert.valid ? kOk : kFail;
}

int cmd_refine(const std::string& model, const std::string& solution, int iters, double step_cap,
    const std::string& out, const std::string& log)
{
    const ComposedSystem cs = compose(load_model_file(model));
    const SynthesisSolution sol = io::load_solution_file(solution, cs);
    if (!certify(cs, sol).valid) {
        std::cout << "initial solution is not valid\n";
        return kFail;
    }
    RefineOptions o;
    o.iters = iters;
    o.step_cap = step_cap;
    const RefineResult r = refine(cs, sol, o);
    for (std::size_t k = 0; k < r.accepted.size(); ++k)
        std::cout << "iterate " << k << ": score " << lmi::fmt17(set_score(cs, r.accepted[k])) << '\n';
    if (!log.empty()) {
        Sink s(log);
        write_refine_csv(*s, r);
    }
    Sink s(out);
    io::write_solution(*s, cs, r.accepted.back());
    return kOk;
}

int cmd_envelope(const std::string& model, const std::string& solution, int sub, const std::vector<double>& point,
    const std::string& out)
{
    const ComposedSystem cs = compose(load_model_file(model));
    const SynthesisSolution sol = io::load_solution_file(solution, cs);
    const int i = check_subsystem_arg(cs, sub);
    const InputEnvelope env = admissible_inputs(cs, sol, i, to_vec(point));
    Sink s(out);
    io::write_envelope(*s, env);
    if (is_empty(env.poly)) {
        std::cerr << "envelope is empty\n";
        return kFail;
    }
    return kOk;
}

int cmd_reach(const std::string& model, const std::string& solution, int sub, const std::vector<double>& target,
    const std::vector<double>& goal, int coord, int max_levels, const std::string& out)
{
    const ComposedSystem cs = compose(load_model_file(model));
    const SynthesisSolution sol = io::load_solution_file(solution, cs);
    const int i = check_subsystem_arg(cs, sub);
    if (coord < 1 || coord > cs.blocks[i].n)
        throw Error("--coord out of range");
    const HPolytope T = slab_goal(cs, sol, i, coord - 1, target[0], target[1]);
    const HPolytope G = slab_goal(cs, sol, i, coord - 1, goal[0], goal[1]);
    const ReachLadder L = reach_ladder(cs, sol, i, T, G, max_levels);
    std::ostream& log = out == "-" ? std::cerr : std::cout;
    log << "ladder: " << L.levels.size() << " levels, " << (L.converged ? "converged" : "NOT converged");
    if (L.covered_at >= 0)
        log << ", goal covered at level " << L.covered_at;
    if (L.shrunk_target)
        log << ", level 0 shrunk to the invariant core of the target";
    log << '\n';
    Sink s(out);
    io::write_ladder(*s, L);
    return L.converged ? kOk : kFail;
}

struct SimArgs {
    std::string model, solution, policy = "recurrence", dist = "zero", out = "-";
    int steps = 200, coord = 1, max_levels = 100;
    std::uint64_t seed = 0;
    std::vector<double> x0;
    std::vector<std::string> goals;
};

int cmd_simulate(const SimArgs& a)
{
    const ComposedSystem cs = compose(load_model_file(a.model));
    const SynthesisSolution sol = io::load_solution_file(a.solution, cs);
    SimOptions so;
    so.steps = a.steps;
    so.dist = parse_dist_mode(a.dist);
    so.seed = a.seed;
    so.goals.resize(cs.d());
    for (const auto& s : a.goals) {
        const GoalArg g = parse_goal(s);
        const int i = check_subsystem_arg(cs, g.sub);
        if (a.coord < 1 || a.coord > cs.blocks[i].n)
            throw Error("--coord out of range");
        so.goals[i].push_back(slab_goal(cs, sol, i, a.coord - 1, g.lo, g.hi));
    }

    std::vector<Policy> policies;
    if (a.policy == "gain") {
        policies = gain_policies(cs, sol);
    } else if (a.policy == "recurrence") {
        for (int i = 0; i < cs.d(); ++i) {
            if (so.goals[i].size() != 2)
                throw Error("recurrence policy needs exactly two --goal entries per subsystem", i + 1);
            auto ctrl = std::make_shared<RecurrenceController>(
                make_recurrence_controller(cs, sol, i, so.goals[i][0], so.goals[i][1], a.max_levels));
            for (int k = 0; k < 2; ++k)
                if (!ctrl->ladders[k].converged) {
                    std::cout << "subsystem " << i + 1 << ": ladder toward goal " << k + 1 << " did not converge\n";
                    return kFail;
                }
            policies.push_back(local_policy(cs, ctrl));
        }
    } else {
        throw Error("unknown policy '" + a.policy + "' (recurrence|gain)");
    }

    const Vec x0 = a.x0.empty() ? Vec::Zero(cs.n) : to_vec(a.x0);
    const Trajectory tr = run(cs, sol, policies, x0, so);
    {
        Sink s(a.out);
        write_trajectory_csv(*s, cs, tr);
    }
    std::ostream& log = a.out == "-" ? std::cerr : std::cout;
    log << "steps " << a.steps << ", violations " << tr.violations.size() << '\n';
    for (int i = 0; i < cs.d(); ++i)
        for (std::size_t g = 0; g < so.goals[i].size(); ++g)
            log << "subsystem " << i + 1 << " goal " << g + 1 << ": " << tr.visit_count(i + 1, static_cast<int>(g))
                << " visits\n";
    return tr.violations.empty() ? kOk : kFail;
}

int cmd_export_plot(const std::string& artifact, const std::string& out, const std::string& model)
{
    const std::string text = read_text_file(artifact);
    const io::json j = io::parse(text, artifact);
    Sink s(out);
    const std::string fmt = j.is_object() && j.contains("format") && j["format"].is_string()
        ? j["format"].get<std::string>()
        : std::string();
    if (fmt == "sepinv-solution 1") {
        if (model.empty())
            throw Error("export-plot: a solution needs --model");
        const ComposedSystem cs = compose(load_model_file(model));
        const SynthesisSolution sol = io::read_solution(text, cs);
        for (int i = 0; i < cs.d(); ++i)
            io::write_vertices_csv(*s, sol.gen_sets[i].to_hpolytope(), "subsystem" + std::to_string(i + 1));
    } else if (fmt == "sepinv-ladder 1") {
        const ReachLadder L = io::read_ladder(j);
        io::write_vertices_csv(*s, L.target, "target");
        for (std::size_t r = 0; r < L.levels.size(); ++r)
            io::write_vertices_csv(*s, L.levels[r], "level" + std::to_string(r));
    } else if (fmt == "sepinv-controller 1") {
        for (std::size_t k = 0; k < j["ladders"].size(); ++k) {
            const ReachLadder L = io::read_ladder(j["ladders"][k]);
            for (std::size_t r = 0; r < L.levels.size(); ++r)
                io::write_vertices_csv(*s, L.levels[r], "ladder" + std::to_string(k + 1) + "_level" + std::to_string(r));
        }
    } else if (fmt == "sepinv-envelope 1") {
        io::write_vertices_csv(*s, io::read_envelope(j).poly, "envelope");
    } else if (j.is_object() && j.contains("H") && j.contains("h")) {
        io::write_vertices_csv(*s, io::read_hpolytope(j), "polytope");
    } else {
        throw Error("export-plot: unrecognized artifact '" + artifact + "'");
    }
    return kOk;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Separable robust invariant sets for coupled linear subsystems"};
    app.require_subcommand(1);

    SynthArgs sa;
    auto* synth = app.add_subcommand("synth", "Build and solve the LMI problem, recover and certify");
    synth->add_option("model", sa.model, "Model file")->required()->check(CLI::ExistingFile);
    synth->add_option("--eps", sa.eps, "Strictness margin (default 1e-6·max(1,‖A‖∞))")->check(CLI::NonNegativeNumber);
    synth->add_option("--iters", sa.iters, "Solver iteration limit")->check(CLI::PositiveNumber);
    synth->add_option("--objective", sa.objective, "Phase-2 objective")->check(CLI::IsMember({"none", "trace"}));
    synth->add_option("--backend", sa.backend, "internal, or a command taking <problem> <result>")
        ->envname("SEPINV_BACKEND");
    synth->add_option("-o,--out", sa.out, "Solution file");
    synth->add_option("--cert", sa.cert, "Certificate report");
    synth->add_flag("-v,--verbose", sa.verbose, "Solver trace on stderr");

    std::string model, solution, out = "-", cert_out, log;
    long samples = 0;
    std::uint64_t seed = 0;
    auto add_model_solution = [&](CLI::App* c) {
        c->add_option("model", model, "Model file")->required()->check(CLI::ExistingFile);
        c->add_option("solution", solution, "Solution file")->required()->check(CLI::ExistingFile);
    };

    auto* verify = app.add_subcommand("verify", "Certify a solution against a model");
    add_model_solution(verify);
    verify->add_option("--cert", cert_out, "Write the certificate report here");
    verify->add_option("--samples", samples, "Additional sampled closed-loop checks")->check(CLI::NonNegativeNumber);
    verify->add_option("--seed", seed, "Sampling seed");

    int iters = 5;
    double step_cap = 0.25;
    auto* ref = app.add_subcommand("refine", "Enlarge the invariant sets by iterated re-solves");
    add_model_solution(ref);
    ref->add_option("--iters", iters, "Rounds")->check(CLI::NonNegativeNumber);
    ref->add_option("--step-cap", step_cap, "Initial trust-region radius (relative)")->check(CLI::PositiveNumber);
    std::string refine_out = "refined.json";
    ref->add_option("-o,--out", refine_out, "Refined solution file")->capture_default_str();
    ref->add_option("--log", log, "Per-attempt CSV log");

    int sub = 1;
    std::vector<double> point;
    auto* envc = app.add_subcommand("envelope", "Admissible input polytope at a local state");
    add_model_solution(envc);
    envc->add_option("-i", sub, "Subsystem (1-based)")->required();
    envc->add_option("--point", point, "Local state x_i")->required();
    envc->add_option("-o,--out", out, "Envelope file");

    std::vector<double> target, goal;
    int coord = 1, max_levels = 100;
    auto* reach = app.add_subcommand("reach", "Robust backward-reachability ladder toward a slab target");
    add_model_solution(reach);
    reach->add_option("-i", sub, "Subsystem (1-based)")->required();
    reach->add_option("--target", target, "LO HI of the target slab")->required()->expected(2);
    reach->add_option("--goal", goal, "LO HI of the slab the ladder must cover")->required()->expected(2);
    reach->add_option("--coord", coord, "Slab coordinate (1-based)");
    reach->add_option("--max-levels", max_levels, "Level limit")->check(CLI::PositiveNumber);
    reach->add_option("-o,--out", out, "Ladder file");

    SimArgs sim;
    auto* simc = app.add_subcommand("simulate", "Closed-loop simulation");
    simc->add_option("model", sim.model, "Model file")->required()->check(CLI::ExistingFile);
    simc->add_option("solution", sim.solution, "Solution file")->required()->check(CLI::ExistingFile);
    simc->add_option("--policy", sim.policy, "recurrence or gain")->check(CLI::IsMember({"recurrence", "gain"}));
    simc->add_option("--steps", sim.steps, "Steps")->check(CLI::NonNegativeNumber);
    simc->add_option("--dist", sim.dist, "zero, vertices or random")
        ->check(CLI::IsMember({"zero", "vertices", "random"}));
    simc->add_option("--seed", sim.seed, "Seed for --dist random");
    simc->add_option("--x0", sim.x0, "Initial state (default 0)");
    simc->add_option("--goal", sim.goals, "SUB:LO:HI slab goal, repeatable");
    simc->add_option("--coord", sim.coord, "Goal slab coordinate (1-based)");
    simc->add_option("--max-levels", sim.max_levels, "Ladder level limit")->check(CLI::PositiveNumber);
    simc->add_option("-o,--out", sim.out, "Trajectory CSV");

    std::string artifact, plot_model;
    auto* plot = app.add_subcommand("export-plot", "Vertex CSV of a solution, ladder, controller, envelope or polytope");
    plot->add_option("artifact", artifact, "Artifact file")->required()->check(CLI::ExistingFile);
    plot->add_option("-o,--out", out, "CSV file");
    plot->add_option("--model", plot_model, "Model file (for solutions)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return kUsage;
    }

    try {
        if (*synth)
            return cmd_synth(sa);
        if (*verify)
            return cmd_verify(model, solution, cert_out, samples, seed);
        if (*ref)
            return cmd_refine(model, solution, iters, step_cap, refine_out, log);
        if (*envc)
            return cmd_envelope(model, solution, sub, point, out);
        if (*reach) {
            if (!(target[0] <= target[1]) || !(goal[0] <= goal[1]))
                throw Error("slab bounds must satisfy LO <= HI");
            return cmd_reach(model, solution, sub, target, goal, coord, max_levels, out);
        }
        if (*simc)
            return cmd_simulate(sim);
        if (*plot)
            return cmd_export_plot(artifact, out, plot_model);
    } catch (const Error& e) {
        std::cerr << "error: ";
        if (e.subsystem() > 0)
            std::cerr << "subsystem " << e.subsystem() << (e.field().empty() ? "" : ", field " + e.field()) << ": ";
        std::cerr << e.what() << '\n';
        return kUsage;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kUsage;
    }
    return kUsage;
}
