#pragma once

// Command-line front end. run() takes the argument list without the program
// name and writes the report to `out`, diagnostics to `err`.
//
// Exit codes: 0 positive verdict, 1 refutation, 2 inconclusive,
// 3 usage or parse error.

#include "lop/applicative.hpp"
#include "lop/ciu.hpp"
#include "lop/flow.hpp"
#include "lop/fs.hpp"
#include "lop/lmc.hpp"
#include "lop/separator.hpp"
#include "lop/trees.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace lop::cli {

enum Exit { Positive = 0, Refuted = 1, Inconclusive = 2, UsageError = 3 };

struct Bounds {
    unsigned depth = 8;       // big-step / stack depth
    unsigned level = 5;       // tree game level
    unsigned budget = 200;    // head-reduction steps per node
    unsigned steps = 64;      // formal-sum steps
    unsigned sem_depth = 16;  // depth of spc's semantics
    unsigned k = 8;           // applicative τ-row depth
    unsigned d = 3;           // applicative argument rounds
    unsigned max_states = 5000;
    Strategy strategy = Strategy::CBN;
    bool detect = false;  // divergence heuristic

    std::string to_string() const {
        std::ostringstream s;
        s << "depth=" << depth << " level=" << level << " budget=" << budget << " steps=" << steps
          << " sem_depth=" << sem_depth << " k=" << k << " d=" << d << " max_states=" << max_states
          << " strategy=" << lop::to_string(strategy) << " detect=" << (detect ? "on" : "off");
        return s.str();
    }
};

struct UsageFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline Strategy parse_strategy(const std::string& s) {
    if (s == "cbn") return Strategy::CBN;
    if (s == "cbv") return Strategy::CBV;
    throw UsageFailure("unknown strategy '" + s + "' (cbn, cbv)");
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageFailure("cannot read '" + path + "'");
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

// `key = value` lines, `#` comments
inline void apply_bounds(Bounds& b, const std::string& text, const std::string& origin) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        auto where = origin + ":" + std::to_string(lineno) + ": ";
        auto eq = line.find('=');
        if (eq == std::string::npos) throw UsageFailure(where + "expected 'key = value'");
        std::string key = lop::detail::trim(line.substr(0, eq)), val = lop::detail::trim(line.substr(eq + 1));
        auto num = [&]() -> unsigned {
            try {
                std::size_t used = 0;
                long v = std::stol(val, &used);
                if (used != val.size() || v <= 0) throw std::invalid_argument("");
                return static_cast<unsigned>(v);
            } catch (const std::exception&) {
                throw UsageFailure(where + key + " must be a positive integer, got '" + val + "'");
            }
        };
        if (key == "depth") b.depth = num();
        else if (key == "level") b.level = num();
        else if (key == "budget") b.budget = num();
        else if (key == "steps") b.steps = num();
        else if (key == "sem_depth") b.sem_depth = num();
        else if (key == "k") b.k = num();
        else if (key == "d") b.d = num();
        else if (key == "max_states") b.max_states = num();
        else if (key == "strategy") b.strategy = parse_strategy(val);
        else if (key == "detect") {
            if (val != "on" && val != "off") throw UsageFailure(where + "detect must be on or off");
            b.detect = val == "on";
        } else
            throw UsageFailure(where + "unknown bound '" + key + "'");
    }
}

namespace detail {

struct Options {
    std::string bounds_file, defs_file, args_file, stacks_file, mode = "bigstep", metric = "steps", strategy;
    std::optional<unsigned> depth, level, budget, steps, sem_depth, k, d, max_states;
    bool detect = false, no_detect = false;
    std::vector<std::string> inputs;
    std::vector<int> pair;
};

inline Bounds resolve_bounds(const Options& o) {
    Bounds b;
    // LOP_BOUNDS names the file used when --bounds is absent
    std::string file = o.bounds_file;
    if (const char* env = std::getenv("LOP_BOUNDS"); file.empty() && env) file = env;
    if (!file.empty()) apply_bounds(b, read_file(file), file);
    auto set = [](unsigned& dst, const std::optional<unsigned>& v) {
        if (v) dst = *v;
    };
    set(b.depth, o.depth);
    set(b.level, o.level);
    set(b.budget, o.budget);
    set(b.steps, o.steps);
    set(b.sem_depth, o.sem_depth);
    set(b.k, o.k);
    set(b.d, o.d);
    set(b.max_states, o.max_states);
    if (!o.strategy.empty()) b.strategy = parse_strategy(o.strategy);
    if (o.detect) b.detect = true;
    if (o.no_detect) b.detect = false;
    return b;
}

inline NamedEnv environment(const Options& o) {
    return o.defs_file.empty() ? prelude() : parse_definitions(read_file(o.defs_file));
}

inline Term term_arg(const std::string& text, const NamedEnv& env, bool allow_free = false) {
    ParseOptions po;
    po.allow_free = allow_free;
    try {
        return parse_term(text, env, po);
    } catch (const ParseError& e) {
        throw UsageFailure("parse: in '" + text + "': " + e.what());
    }
}

inline Term closed_arg(const std::string& text, const NamedEnv& env) {
    Term t = term_arg(text, env);
    if (!t.closed()) throw UsageFailure("'" + text + "' is not a closed term");
    return t;
}

inline std::vector<Term> term_lines(const std::string& path, const NamedEnv& env) {
    std::vector<Term> out;
    std::istringstream in(read_file(path));
    std::string line;
    while (std::getline(in, line)) {
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        out.push_back(closed_arg(line, env));
    }
    return out;
}

inline AppParams app_params(const Bounds& b, const Options& o, const NamedEnv& env) {
    AppParams p;
    p.k = b.k;
    p.d = b.d;
    p.strategy = b.strategy;
    p.detect_divergence = b.detect;
    p.max_states = b.max_states;
    if (!o.args_file.empty()) p.args = term_lines(o.args_file, env);
    return p;
}

inline EvalOptions eval_options(const Bounds& b) {
    EvalOptions e;
    e.strategy = b.strategy;
    e.detect_divergence = b.detect;
    return e;
}

inline void need(const Options& o, std::size_t n, const std::string& what) {
    if (o.inputs.size() != n) throw UsageFailure("expected " + what);
}

inline int run_command(const std::string& cmd, const Options& o, std::ostream& out);

}  // namespace detail

inline int corpus_check(const std::string& dir, std::ostream& out);

inline int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"lop: exact analyses for the probabilistic lambda calculus"};
    app.require_subcommand(1);
    detail::Options o;
    std::string corpus_dir;

    auto common = [&](CLI::App* c) {
        c->add_option("--bounds", o.bounds_file, "bounds file (key = value); LOP_BOUNDS gives the default");
        c->add_option("--depth", o.depth, "evaluation depth")->check(CLI::PositiveNumber);
        c->add_option("--strategy", o.strategy, "cbn or cbv");
        c->add_flag("--detect", o.detect, "certify divergence of cut terms that revisit themselves");
        c->add_flag("--no-detect", o.no_detect, "turn the divergence heuristic off");
        c->add_option("--defs", o.defs_file, "definitions file (name = term lines)");
    };
    auto terms = [&](CLI::App* c, const char* what) {
        common(c);
        c->add_option("terms", o.inputs, what)->required();
    };

    terms(app.add_subcommand("eval", "value distribution at a finite depth"), "closed term");
    terms(app.add_subcommand("prob", "bounds on the convergence probability"), "closed term");
    for (const char* name : {"bisim", "sim"}) {
        CLI::App* c = app.add_subcommand(name, std::string("bounded applicative ") +
                                                   (name[0] == 'b' ? "bisimilarity" : "similarity") + " of M and N");
        terms(c, "M N");
        c->add_option("--k", o.k, "semantics depth of each τ-row")->check(CLI::PositiveNumber);
        c->add_option("--d", o.d, "argument rounds")->check(CLI::PositiveNumber);
        c->add_option("--max-states", o.max_states)->check(CLI::PositiveNumber);
        c->add_option("--args", o.args_file, "argument set, one closed term per line");
    }
    {
        CLI::App* c = app.add_subcommand("ciu", "search for a stack on which M converges more than N");
        terms(c, "M N");
        c->add_option("--stacks", o.stacks_file, "stacks, one per line, frames separated by ';'");
        c->add_option("--metric", o.metric, "steps or nested");
    }
    for (const char* name : {"llt", "llt-eq", "separate"}) {
        CLI::App* c = app.add_subcommand(name, name == std::string("llt")      ? "Levy-Longo tree to a depth"
                                               : name == std::string("llt-eq") ? "compare two trees level by level"
                                                                               : "build a separating context");
        terms(c, name == std::string("llt") ? "pure term" : "M N");
        c->add_option("--level", o.level, "game level")->check(CLI::PositiveNumber);
        c->add_option("--budget", o.budget, "head-reduction steps per node")->check(CLI::PositiveNumber);
    }
    for (const char* name : {"fs-eval", "fs-step"}) {
        CLI::App* c = app.add_subcommand(name, name == std::string("fs-eval") ? "formal-sum evaluation"
                                                                               : "one formal-sum step");
        terms(c, "extended term");
        c->add_option("--steps", o.steps)->check(CLI::PositiveNumber);
        c->add_option("--sem-depth", o.sem_depth)->check(CLI::PositiveNumber);
    }
    {
        CLI::App* c = app.add_subcommand("clb-check", "check a coupled logical bisimulation");
        common(c);
        c->add_option("relation", o.inputs, "relation file")->required();
        c->add_option("--mode", o.mode, "smallstep, bigstep, upto_fs or upto_ctx");
        c->add_option("--steps", o.steps)->check(CLI::PositiveNumber);
        c->add_option("--sem-depth", o.sem_depth)->check(CLI::PositiveNumber);
    }
    {
        CLI::App* c = app.add_subcommand("disentangle", "disentangle a probability assignment");
        c->add_option("assignment", o.inputs, "assignment file")->required();
        c->add_option("--bounds", o.bounds_file);
    }
    for (const char* name : {"lmc-bisim", "lmc-sim"}) {
        CLI::App* c = app.add_subcommand(name, name == std::string("lmc-bisim") ? "bisimilarity classes of a chain"
                                                                                 : "largest simulation of a chain");
        c->add_option("chain", o.inputs, "chain file")->required();
        c->add_option("--pair", o.pair, "query two states")->expected(2);
        c->add_option("--bounds", o.bounds_file);
    }
    {
        CLI::App* c = app.add_subcommand("corpus", "run the golden cases in a directory");
        c->add_option("dir", corpus_dir, "corpus directory")->required();
    }

    try {
        std::vector<std::string> rev(args.rbegin(), args.rend());
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return Positive;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return Positive;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return UsageError;
    }

    const std::string cmd = app.get_subcommands().front()->get_name();
    try {
        if (cmd == "corpus") return corpus_check(corpus_dir, out);
        return detail::run_command(cmd, o, out);
    } catch (const ParseError& e) {
        err << "error: parse: " << e.what() << "\n";
    } catch (const UsageFailure& e) {
        err << "error: " << e.what() << "\n";
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
    }
    return UsageError;
}

namespace detail {

inline int run_command(const std::string& cmd, const Options& o, std::ostream& out) {
    const Bounds b = resolve_bounds(o);
    out << "# lop " << cmd << "\n# bounds: " << b.to_string() << "\n";

    if (cmd == "disentangle") {
        need(o, 1, "one assignment file");
        ProbabilityAssignment pa = parse_assignment(read_file(o.inputs[0]));
        DisentangleResult d = disentangle(pa);
        DisentangleCheck c = verify_disentanglement(pa, d);
        out << format_disentanglement(d) << "flow " << to_string(d.flow_value) << "\n";
        if (!c.ok) {
            out << "check: condition " << c.condition << " fails\n";
            return Refuted;
        }
        out << "check: ok\n";
        return Positive;
    }
    if (cmd == "lmc-bisim" || cmd == "lmc-sim") {
        need(o, 1, "one chain file");
        MLMC c = parse_lmc(read_file(o.inputs[0]));
        for (int s : o.pair)
            if (s < 0 || s >= c.states()) throw UsageFailure("state " + std::to_string(s) + " out of range");
        if (cmd == "lmc-bisim") {
            Partition p = bisim_partition(c);
            p.normalize();
            out << to_string(p);
            if (o.pair.empty()) return Positive;
            bool same = p.same_block(o.pair[0], o.pair[1]);
            out << o.pair[0] << (same ? " ~ " : " !~ ") << o.pair[1] << "\n";
            return same ? Positive : Refuted;
        }
        StateRelation r = largest_simulation(c);
        for (int s = 0; s < c.states(); ++s) {
            out << s << " <=";
            for (int t = 0; t < c.states(); ++t)
                if (r.contains(s, t)) out << " " << t;
            out << "\n";
        }
        if (o.pair.empty()) return Positive;
        bool le = r.contains(o.pair[0], o.pair[1]);
        out << o.pair[0] << (le ? " <= " : " !<= ") << o.pair[1] << "\n";
        return le ? Positive : Refuted;
    }
    if (cmd == "clb-check") {
        need(o, 1, "one relation file");
        CoupledRelation r = parse_relation(read_file(o.inputs[0]));
        FsOptions fo;
        fo.sem_depth = b.sem_depth;
        ClbMode mode = parse_clb_mode(o.mode);
        ClbVerdict v = check_clb(r, mode, b.steps, fo);
        out << "mode " << to_string(mode) << "\n" << to_string(v, r) << "\n";
        return v.kind == ClbVerdict::Pass ? Positive : Refuted;
    }

    const NamedEnv env = environment(o);
    if (cmd == "fs-eval" || cmd == "fs-step") {
        need(o, 1, "one extended term");
        ExtTerm e = parse_ext_term(o.inputs[0], env);
        FsOptions fo;
        fo.sem_depth = b.sem_depth;
        fo.eval.strategy = b.strategy;
        if (cmd == "fs-step") {
            if (e.summed_value()) {
                out << "summed value " << to_string(e) << "\n";
                return Positive;
            }
            FsStepResult r = fs_step(e, fo);
            out << r.rule << " " << to_string(r.next) << "\n";
            if (r.residual != 0) out << "residual " << to_string(r.residual) << "\n";
            return Positive;
        }
        FsEvalResult r = fs_eval(e, b.steps, fo);
        out << "steps " << r.steps << "\n";
        if (!r.reached) {
            out << "no summed value\nresidual " << to_string(r.residual) << "\n";
            return Inconclusive;
        }
        out << "value " << to_string(r.value) << "\nmass " << to_string(r.value.mass()) << "\nresidual "
            << to_string(r.residual) << "\n";
        return Positive;
    }
    if (cmd == "eval" || cmd == "prob") {
        need(o, 1, "one term");
        Term m = closed_arg(o.inputs[0], env);
        Approx a = approximate(m, b.depth, eval_options(b));
        if (cmd == "eval") out << to_string(a.dist) << "residual " << to_string(a.residual) << "\n";
        out << "lower " << to_string(a.dist.mass()) << "\nupper " << to_string(a.dist.mass() + a.residual) << "\n";
        return Positive;
    }
    if (cmd == "bisim" || cmd == "sim") {
        need(o, 2, "two terms M N");
        Term m = closed_arg(o.inputs[0], env), n = closed_arg(o.inputs[1], env);
        AppParams p = app_params(b, o, env);
        if (cmd == "bisim") {
            BisimVerdict v = check_bounded_bisim(m, n, p);
            out << format_certificate(v, m, n, p);
            if (v.kind == BisimVerdict::NotBisimilar) out << "replay " << (replay(v, m, n, p) ? "ok" : "FAILED") << "\n";
            return v.kind == BisimVerdict::NotBisimilar ? Refuted : Positive;
        }
        SimVerdict v = check_bounded_sim(m, n, p);
        out << format_certificate(v, m, n, p);
        if (v.kind == SimVerdict::NotSimilar) out << "replay " << (replay(v, m, n, p) ? "ok" : "FAILED") << "\n";
        return v.kind == SimVerdict::NotSimilar ? Refuted : Positive;
    }
    if (cmd == "ciu") {
        need(o, 2, "two terms M N");
        Term m = closed_arg(o.inputs[0], env), n = closed_arg(o.inputs[1], env);
        StackOptions so;
        so.detect_divergence = b.detect;
        if (o.metric == "steps") so.metric = StackMetric::Steps;
        else if (o.metric == "nested") so.metric = StackMetric::Nested;
        else throw UsageFailure("unknown metric '" + o.metric + "' (steps, nested)");
        std::vector<FrameStack> stacks = default_stacks();
        if (!o.stacks_file.empty()) {
            stacks.clear();
            std::istringstream in(read_file(o.stacks_file));
            std::string line;
            while (std::getline(in, line)) {
                if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
                std::string t = lop::detail::trim(line);
                if (t == "nil") stacks.push_back(FrameStack{});
                else if (!t.empty()) stacks.push_back(parse_stack(t, env));
            }
        }
        CiuVerdict v = ciu_compare(m, n, stacks, b.depth, so);
        if (v.kind == CiuVerdict::NotCIULess) {
            out << "not CIU-below on stack " << v.witness.to_string() << "\nleft " << to_string(v.m) << "\nright "
                << to_string(v.n) << "\n";
            return Refuted;
        }
        out << "consistent on " << v.stacks_tried << " stacks\n";
        return Positive;
    }
    if (cmd == "llt") {
        need(o, 1, "one pure term");
        Term m = term_arg(o.inputs[0], env, true);
        require_pure(m, "llt");
        LevyLongoTree t = llt(m, b.depth, b.budget, b.detect);
        out << to_string(t);
        return has_unknown(t) ? Inconclusive : Positive;
    }
    if (cmd == "llt-eq" || cmd == "separate") {
        need(o, 2, "two pure terms M N");
        Term m = term_arg(o.inputs[0], env, true), n = term_arg(o.inputs[1], env, true);
        require_pure(m, cmd.c_str());
        require_pure(n, cmd.c_str());
        if (cmd == "llt-eq") {
            LltEqVerdict v = llt_eq(m, n, b.level, b.budget, b.detect);
            out << to_string(v) << "\n";
            return v.kind == LltEqVerdict::SameUpTo ? Positive
                   : v.kind == LltEqVerdict::Different ? Refuted
                                                       : Inconclusive;
        }
        SeparateResult r = separate(m, n, b.level, b.budget);
        out << to_string(r.difference) << "\n";
        switch (r.kind) {
            case SeparateResult::Separated:
                out << to_string(r.witness) << "separated at depth " << r.witness.depth << "\n";
                return Positive;
            case SeparateResult::NotSeparatedAtLevel: out << "no difference within the level\n"; return Refuted;
            case SeparateResult::VerificationTimeout:
                out << to_string(r.witness) << "witness did not verify by depth 64\n";
                return Inconclusive;
            default: return Inconclusive;
        }
    }
    throw UsageFailure("unknown command '" + cmd + "'");
}

// shell-like split honouring double and single quotes
inline std::vector<std::string> split_command(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool have = false;
    char quote = 0;
    for (char c : line) {
        if (quote) {
            if (c == quote) quote = 0;
            else cur += c;
        } else if (c == '"' || c == '\'') {
            quote = c;
            have = true;
        } else if (c == ' ' || c == '\t') {
            if (have) out.push_back(cur);
            cur.clear();
            have = false;
        } else {
            cur += c;
            have = true;
        }
    }
    if (quote) throw UsageFailure("unterminated quote");
    if (have) out.push_back(cur);
    return out;
}

}  // namespace detail

// Each case directory holds input.lop (its first `#!` line is the command,
// the rest is whatever the command reads), bounds.cfg and expect.txt (the
// report followed by `exit N`). File arguments are relative to the case.
inline int corpus_check(const std::string& dir, std::ostream& out) {
    namespace fsys = std::filesystem;
    if (!fsys::is_directory(dir)) throw UsageFailure("'" + dir + "' is not a directory");
    std::vector<fsys::path> cases;
    for (const auto& e : fsys::directory_iterator(dir))
        if (e.is_directory()) cases.push_back(e.path());
    std::sort(cases.begin(), cases.end());
    unsigned passed = 0, failed = 0;
    for (const fsys::path& c : cases) {
        const std::string name = c.filename().string();
        auto bad = [&](const std::string& why) {
            out << "case " << name << ": FAIL " << why << "\n";
            ++failed;
        };
        std::string missing;
        for (const char* f : {"input.lop", "expect.txt", "bounds.cfg"})
            if (!fsys::is_regular_file(c / f)) missing += std::string(missing.empty() ? "" : ", ") + f;
        if (!missing.empty()) {
            bad("missing " + missing);
            continue;
        }
        std::istringstream in(read_file((c / "input.lop").string()));
        std::string first;
        std::getline(in, first);
        if (first.rfind("#!", 0) != 0) {
            bad("input.lop must start with a '#!' command line");
            continue;
        }
        std::vector<std::string> args;
        try {
            args = detail::split_command(first.substr(2));
        } catch (const UsageFailure& e) {
            bad(e.what());
            continue;
        }
        for (std::string& a : args)
            if (!a.empty() && a[0] != '-' && fsys::is_regular_file(c / a)) a = (c / a).string();
        args.push_back("--bounds");
        args.push_back((c / "bounds.cfg").string());
        std::ostringstream got, err;
        int code = run(args, got, err);
        std::string actual = got.str() + err.str() + "exit " + std::to_string(code) + "\n";
        // the header echoes absolute paths nowhere, so the text is portable
        std::string expected = read_file((c / "expect.txt").string());
        if (actual == expected) {
            out << "case " << name << ": pass\n";
            ++passed;
            continue;
        }
        std::istringstream ea(expected), aa(actual);
        std::string el, al;
        int line = 0;
        while (true) {
            ++line;
            bool he = static_cast<bool>(std::getline(ea, el)), ha = static_cast<bool>(std::getline(aa, al));
            if (!he && !ha) break;
            if (!he || !ha || el != al) {
                bad("mismatch at line " + std::to_string(line) + "\n  expected: " + (he ? el : "<end>") +
                    "\n  actual:   " + (ha ? al : "<end>"));
                break;
            }
        }
    }
    out << "summary: " << passed << " passed, " << failed << " failed\n";
    return failed ? Refuted : Positive;
}

}  // namespace lop::cli
