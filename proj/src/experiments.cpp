#include "wdlab/experiments.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <fstream>
#include <thread>

#include "wdlab/rng.hpp"

namespace wdlab::experiments {

namespace fs = std::filesystem;
using nlohmann::json;

void require_keys(const json& j, const std::vector<std::string>& allowed,
                  const std::string& path) {
    if (!j.is_object()) throw ConfigError(path + ": expected an object");
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool ok = false;
        for (const auto& k : allowed)
            if (it.key() == k) ok = true;
        if (!ok) throw ConfigError(path + "." + it.key() + ": unknown key");
    }
}

namespace {

const json& need(const json& j, const std::string& key, const std::string& path) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError(path + "." + key + ": missing");
    return *it;
}

double need_positive(const json& j, const std::string& key, const std::string& path) {
    double v = need(j, key, path).get<double>();
    if (!(v > 0.0)) throw ConfigError(path + "." + key + ": must be > 0");
    return v;
}

}  // namespace

model::Architecture parse_architecture(const json& j, const std::string& path) {
    require_keys(j, {"K", "input_dim", "widths", "activation", "H"}, path);
    model::Architecture arch;
    arch.K = need(j, "K", path).get<int>();
    arch.input_dim = need(j, "input_dim", path).get<std::size_t>();
    arch.widths = j.value("widths", std::vector<std::size_t>{});
    std::string act = need(j, "activation", path).get<std::string>();
    int H = j.value("H", 1);
    if (act == "identity") arch.activation = model::Activation::identity();
    else if (act == "relu") arch.activation = model::Activation::relu();
    else if (act == "relu_power") arch.activation = model::Activation::relu_power(H);
    else throw ConfigError(path + ".activation: unknown kind '" + act + "'");
    try {
        arch.validate();
    } catch (const std::exception& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return arch;
}

datagen::TaskSpec parse_task(const json& j, const std::string& path) {
    require_keys(j, {"d", "n", "subspace", "label_freq", "seed"}, path);
    datagen::TaskSpec spec;
    spec.d = need(j, "d", path).get<std::size_t>();
    spec.n = need(j, "n", path).get<std::size_t>();
    spec.label_freq = j.value("label_freq", 1.0);
    spec.seed = j.value("seed", std::uint64_t{0});
    const json& sub = need(j, "subspace", path);
    if (sub.is_string()) {
        std::string s = sub.get<std::string>();
        std::size_t half = spec.d / 2;
        if (s == "first_half")
            for (std::size_t i = 0; i < half; ++i) spec.subspace.push_back(i);
        else if (s == "second_half")
            for (std::size_t i = half; i < spec.d; ++i) spec.subspace.push_back(i);
        else if (s == "all")
            for (std::size_t i = 0; i < spec.d; ++i) spec.subspace.push_back(i);
        else
            throw ConfigError(path + ".subspace: unknown preset '" + s + "'");
    } else if (sub.is_array()) {
        for (const auto& v : sub) spec.subspace.push_back(v.get<std::size_t>());
    } else {
        throw ConfigError(path + ".subspace: expected array or preset string");
    }
    return spec;
}

optimize::InitKind parse_init_kind(const std::string& s, const std::string& path) {
    if (s == "xavier") return optimize::InitKind::xavier;
    if (s == "scaled_gaussian") return optimize::InitKind::scaled_gaussian;
    if (s == "zeros") return optimize::InitKind::zeros;
    if (s == "balanced_rank1") return optimize::InitKind::balanced_rank1;
    throw ConfigError(path + ": unknown init kind '" + s + "'");
}

optimize::TrainConfig parse_train(const json& j, const std::string& path) {
    require_keys(j, {"eta", "lambda", "steps", "seed", "checkpoint_every", "init",
                     "init_param", "batch_size", "train_head"}, path);
    optimize::TrainConfig cfg;
    cfg.eta = need_positive(j, "eta", path);
    cfg.lambda = need(j, "lambda", path).get<double>();
    if (cfg.lambda < 0.0) throw ConfigError(path + ".lambda: must be >= 0");
    cfg.steps = need(j, "steps", path).get<std::uint64_t>();
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.checkpoint_every = j.value("checkpoint_every", std::uint64_t{0});
    cfg.init = parse_init_kind(j.value("init", std::string("xavier")), path + ".init");
    cfg.init_param = j.value("init_param", 1.0);
    cfg.batch_size = j.value("batch_size", std::size_t{0});
    cfg.train_head = j.value("train_head", true);
    return cfg;
}

optimize::GFConfig parse_gf(const json& j, const std::string& path) {
    require_keys(j, {"lambda", "h", "T", "mode", "record_every"}, path);
    optimize::GFConfig cfg;
    cfg.lambda = need(j, "lambda", path).get<double>();
    if (cfg.lambda < 0.0) throw ConfigError(path + ".lambda: must be >= 0");
    cfg.h = need_positive(j, "h", path);
    cfg.T = need_positive(j, "T", path);
    std::string mode = j.value("mode", std::string("per_layer"));
    if (mode == "per_layer") cfg.mode = optimize::GFMode::per_layer;
    else if (mode == "end_to_end") cfg.mode = optimize::GFMode::end_to_end;
    else throw ConfigError(path + ".mode: unknown mode '" + mode + "'");
    cfg.record_every = j.value("record_every", std::uint64_t{0});
    return cfg;
}

std::uint64_t config_hash(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ull;  // FNV-1a
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

namespace {

std::string art_path(const RunContext& ctx, const std::string& name) {
    fs::create_directories(ctx.out_dir);
    return (fs::path(ctx.out_dir) / name).string();
}

void stamp(std::ofstream& out, std::uint64_t hash, std::uint64_t seed) {
    out << "# config_hash=" << std::hex << hash << std::dec << " seed=" << seed << '\n';
}

linalg::Vector fixed_sign_head(std::size_t m, std::uint64_t seed) {
    Rng rng = Rng(seed).split(0x11eadu);
    linalg::Vector u(m);
    double scale = 1.0 / std::sqrt(static_cast<double>(m));
    for (auto& x : u.data) x = rng.uniform() < 0.5 ? -scale : scale;
    return u;
}

model::Params build_init(const model::Architecture& arch,
                         const optimize::TrainConfig& cfg) {
    model::Params p = optimize::init_params(arch, cfg.init, cfg.init_param, cfg.seed);
    if (!cfg.train_head) p.head = fixed_sign_head(arch.head_dim(), cfg.seed);
    return p;
}

inspect::Checkpoint params_to_checkpoint(const model::Params& p,
                                         const model::Architecture& arch,
                                         const optimize::TrainConfig& cfg,
                                         std::uint64_t step) {
    inspect::Checkpoint ckpt;
    for (std::size_t k = 0; k < p.weights.size(); ++k) {
        inspect::Tensor t;
        t.dtype = inspect::DType::f64;
        t.shape = {p.weights[k].rows, p.weights[k].cols};
        t.values = p.weights[k].data;
        ckpt.tensors.emplace_back("W" + std::to_string(k + 1), std::move(t));
    }
    inspect::Tensor head;
    head.dtype = inspect::DType::f64;
    head.shape = {p.head.dim()};
    head.values = p.head.data;
    ckpt.tensors.emplace_back("w" + std::to_string(arch.K), std::move(head));
    inspect::CheckpointMeta meta;
    meta.K = arch.K;
    meta.H = arch.activation.H;
    meta.widths = arch.widths;
    meta.activation = arch.activation.kind == model::ActivationKind::identity ? "identity"
                      : arch.activation.kind == model::ActivationKind::relu   ? "relu"
                                                                              : "relu_power";
    meta.lambda = cfg.lambda;
    meta.eta = cfg.eta;
    meta.step = step;
    meta.seed = cfg.seed;
    ckpt.meta = meta;
    return ckpt;
}

}  // namespace

double classification_error(const model::Params& p, const model::Architecture& arch,
                            const model::Dataset& data) {
    std::size_t errs = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.labels[i] * model::forward(p, arch, data.inputs[i]).f <= 0.0) ++errs;
    return static_cast<double>(errs) / static_cast<double>(data.size());
}

double margin_error(const model::Params& p, const model::Architecture& arch,
                    const model::Dataset& data) {
    std::size_t errs = 0;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.labels[i] * model::forward(p, arch, data.inputs[i]).f < 1.0) ++errs;
    return static_cast<double>(errs) / static_cast<double>(data.size());
}

double avg_inverse_stable_rank(const model::Params& p) {
    double sum = 1.0;  // head layer: rank-1 row, ratio exactly 1
    for (const auto& w : p.weights) {
        // The ratio is scale invariant; normalizing by the largest entry keeps
        // the power iteration out of the denormal range for heavily decayed
        // weights.
        double scale = 0.0;
        for (double v : w.data) scale = std::max(scale, std::abs(v));
        if (scale == 0.0) throw model::InvalidInput("avg_inverse_stable_rank: zero layer");
        linalg::Matrix scaled = w;
        for (double& v : scaled.data) v /= scale;
        auto sr = linalg::stable_rank(scaled);
        sum += sr.spec / sr.fro;
    }
    return sum / static_cast<double>(p.weights.size() + 1);
}

void emit_trajectory_csv(const optimize::Trajectory& traj, const std::string& path,
                         std::uint64_t hash, std::uint64_t seed) {
    if (traj.checkpoints.empty()) throw ConfigError("emit_trajectory_csv: empty trajectory");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_trajectory_csv: cannot write " + path);
    stamp(out, hash, seed);
    out.precision(17);
    out << "step_or_time,L,L_lambda,balancedness,integral";
    for (std::size_t k = 0; k < traj.checkpoints.front().layer_srank.size(); ++k)
        out << ",srank_" << k + 1;
    out << '\n';
    for (const auto& pt : traj.checkpoints) {
        out << pt.t << ',' << pt.L << ',' << pt.L_lambda << ',' << pt.balancedness << ','
            << pt.integral;
        for (double s : pt.layer_srank) out << ',' << s;
        out << '\n';
    }
}

void emit_merge_csv(const MergeCurves& curves, const std::string& path,
                    std::uint64_t hash, std::uint64_t seed) {
    if (curves.step.empty()) throw ConfigError("emit_merge_csv: empty trajectory");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_merge_csv: cannot write " + path);
    stamp(out, hash, seed);
    out.precision(17);
    out << "step,loss_task_a_model_a,loss_task_a_merged,loss_task_b_model_b,"
           "loss_task_b_merged\n";
    for (std::size_t i = 0; i < curves.step.size(); ++i)
        out << curves.step[i] << ',' << curves.loss_a_model_a[i] << ','
            << curves.loss_a_merged[i] << ',' << curves.loss_b_model_b[i] << ','
            << curves.loss_b_merged[i] << '\n';
}

void emit_sweep_csv(const std::vector<SweepRow>& rows, const std::string& path,
                    std::uint64_t hash) {
    if (rows.empty()) throw ConfigError("emit_sweep_csv: no sweep rows");
    std::ofstream out(path);
    if (!out) throw std::runtime_error("emit_sweep_csv: cannot write " + path);
    stamp(out, hash, rows.front().seed);
    out.precision(17);
    out << "lambda,seed,avg_inv_stable_rank,classification_error,margin_error,avg_loss\n";
    for (const auto& r : rows)
        out << r.lambda << ',' << r.seed << ',' << r.avg_inv_stable_rank << ','
            << r.classification_error << ',' << r.margin_error << ',' << r.avg_loss << '\n';
}

SweepRow sweep_point(const model::Architecture& arch, const datagen::TaskSpec& task,
                     const optimize::TrainConfig& base, double lambda,
                     std::uint64_t seed) {
    datagen::TaskSpec t = task;
    t.seed = seed;
    model::Dataset data = datagen::gen_task(t);
    optimize::TrainConfig cfg = base;
    cfg.lambda = lambda;
    cfg.seed = seed;
    cfg.checkpoint_every = cfg.steps;  // only endpoints needed
    model::Params p0 = build_init(arch, cfg);
    optimize::Trajectory traj = optimize::gd_train(p0, arch, data, cfg);
    const auto& last = traj.checkpoints.back();
    SweepRow row;
    row.lambda = lambda;
    row.seed = seed;
    row.avg_inv_stable_rank = avg_inverse_stable_rank(last.params);
    row.classification_error = classification_error(last.params, arch, data);
    row.margin_error = margin_error(last.params, arch, data);
    row.avg_loss = last.L;
    return row;
}

void cmd_train(const RunContext& ctx) {
    require_keys(ctx.config, {"architecture", "task", "train"}, "config");
    auto arch = parse_architecture(need(ctx.config, "architecture", "config"),
                                   "config.architecture");
    auto task = parse_task(need(ctx.config, "task", "config"), "config.task");
    auto train = parse_train(need(ctx.config, "train", "config"), "config.train");
    if (ctx.has_seed_override) train.seed = ctx.seed_override;
    if (task.d != arch.input_dim)
        throw ConfigError("config.task.d: must equal architecture input_dim");
    model::Dataset data = datagen::gen_task(task);
    model::Params p0 = build_init(arch, train);
    optimize::Trajectory traj = optimize::gd_train(p0, arch, data, train);
    emit_trajectory_csv(traj, art_path(ctx, "trajectory.csv"), ctx.hash, train.seed);
    inspect::write_native(art_path(ctx, "final.ckpt"),
                          params_to_checkpoint(traj.checkpoints.back().params, arch, train,
                                               train.steps));
}

void cmd_polish(const RunContext& ctx) {
    require_keys(ctx.config,
                 {"architecture", "task", "lambda", "tol", "init", "init_param", "seed",
                  "max_iters"}, "config");
    auto arch = parse_architecture(need(ctx.config, "architecture", "config"),
                                   "config.architecture");
    auto task = parse_task(need(ctx.config, "task", "config"), "config.task");
    double lambda = need_positive(ctx.config, "lambda", "config");
    double tol = need_positive(ctx.config, "tol", "config");
    std::uint64_t seed = ctx.config.value("seed", std::uint64_t{0});
    if (ctx.has_seed_override) seed = ctx.seed_override;
    auto kind = parse_init_kind(ctx.config.value("init", std::string("xavier")),
                                "config.init");
    double init_param = ctx.config.value("init_param", 1.0);
    std::uint64_t max_iters = ctx.config.value("max_iters", std::uint64_t{2'000'000});

    model::Dataset data = datagen::gen_task(task);
    model::Params p0 = optimize::init_params(arch, kind, init_param, seed);
    auto result = optimize::polish_to_stationary(p0, arch, data, lambda, tol, max_iters);
    auto report = diagnostics::full_report(result.params, arch, data, lambda, &p0);
    std::ofstream out(art_path(ctx, "stationarity_report.json"));
    out << report.to_json() << '\n';
    optimize::TrainConfig meta_cfg;
    meta_cfg.lambda = lambda;
    meta_cfg.seed = seed;
    inspect::write_native(art_path(ctx, "polished.ckpt"),
                          params_to_checkpoint(result.params, arch, meta_cfg,
                                               result.iterations));
}

void cmd_gf(const RunContext& ctx) {
    require_keys(ctx.config, {"architecture", "task", "gf", "init", "init_param", "seed"},
                 "config");
    auto arch = parse_architecture(need(ctx.config, "architecture", "config"),
                                   "config.architecture");
    auto task = parse_task(need(ctx.config, "task", "config"), "config.task");
    auto gf = parse_gf(need(ctx.config, "gf", "config"), "config.gf");
    std::uint64_t seed = ctx.config.value("seed", std::uint64_t{0});
    if (ctx.has_seed_override) seed = ctx.seed_override;
    auto kind = parse_init_kind(ctx.config.value("init", std::string("balanced_rank1")),
                                "config.init");
    double init_param = ctx.config.value("init_param", 0.5);

    model::Dataset data = datagen::gen_task(task);
    model::Params p0 = optimize::init_params(arch, kind, init_param, seed);
    optimize::Trajectory traj;
    if (gf.mode == optimize::GFMode::per_layer) {
        traj = optimize::gf_integrate(p0, arch, data, gf);
    } else {
        linalg::Vector w0 = model::end_to_end_vector(p0, arch);
        traj = optimize::gf_integrate_end_to_end(w0, arch.K, data, gf);
    }
    emit_trajectory_csv(traj, art_path(ctx, "gf_trajectory.csv"), ctx.hash, seed);
}

void cmd_merge(const RunContext& ctx) {
    require_keys(ctx.config, {"architecture", "task_a", "task_b", "train"}, "config");
    auto arch = parse_architecture(need(ctx.config, "architecture", "config"),
                                   "config.architecture");
    auto task_a = parse_task(need(ctx.config, "task_a", "config"), "config.task_a");
    auto task_b = parse_task(need(ctx.config, "task_b", "config"), "config.task_b");
    auto train = parse_train(need(ctx.config, "train", "config"), "config.train");
    if (ctx.has_seed_override) train.seed = ctx.seed_override;

    merging::TaskPair pair = datagen::gen_task_pair(task_a, task_b);
    optimize::TrainConfig cfg_a = train;
    optimize::TrainConfig cfg_b = train;
    cfg_b.seed = train.seed + 1;
    model::Params p0a = build_init(arch, cfg_a);
    model::Params p0b = build_init(arch, cfg_b);
    auto traj_a = optimize::gd_train(p0a, arch, pair.data_a, cfg_a);
    auto traj_b = optimize::gd_train(p0b, arch, pair.data_b, cfg_b);

    MergeCurves curves;
    std::ofstream gap_out(art_path(ctx, "gap_bound.csv"));
    stamp(gap_out, ctx.hash, train.seed);
    gap_out.precision(17);
    gap_out << "step,measured_gap,bound,decay_term,eps_term\n";
    double w0_cross = 0.0;
    for (const auto& x : pair.data_a.inputs)
        w0_cross = std::max(w0_cross, linalg::norm(linalg::matvec(p0b.weights[0], x)));
    std::size_t n_pts = std::min(traj_a.checkpoints.size(), traj_b.checkpoints.size());
    for (std::size_t i = 0; i < n_pts; ++i) {
        const auto& ca = traj_a.checkpoints[i];
        const auto& cb = traj_b.checkpoints[i];
        auto gap_a = merging::merge_gap_eval(ca.params, cb.params, arch,
                                             pair.data_a.inputs, &pair.data_a.labels);
        auto gap_b = merging::merge_gap_eval(cb.params, ca.params, arch,
                                             pair.data_b.inputs, &pair.data_b.labels);
        curves.step.push_back(ca.t);
        curves.loss_a_model_a.push_back(gap_a.loss_original);
        curves.loss_a_merged.push_back(gap_a.loss_merged);
        curves.loss_b_model_b.push_back(gap_b.loss_original);
        curves.loss_b_merged.push_back(gap_b.loss_merged);

        merging::MergeBoundInputs bi;
        bi.kind = merging::BoundKind::shallow;
        bi.eta = train.eta;
        bi.lambda = train.lambda;
        bi.t = ca.t;
        bi.epsilon = pair.epsilon;
        bi.init_term = w0_cross;
        double bound_v = std::numeric_limits<double>::quiet_NaN();
        double decay_v = bound_v, eps_v = bound_v;
        if (train.lambda > 0.0 && arch.K == 2 && !train.train_head) {
            auto b = merging::bound_eval(bi);
            bound_v = b.value;
            decay_v = b.decay_term;
            eps_v = b.eps_term;
        }
        gap_out << ca.t << ',' << gap_a.max_gap << ',' << bound_v << ',' << decay_v
                << ',' << eps_v << '\n';
    }
    emit_merge_csv(curves, art_path(ctx, "merge_curves.csv"), ctx.hash, train.seed);
}

void cmd_rank_sweep(const RunContext& ctx) {
    require_keys(ctx.config, {"architecture", "task", "train", "lambda_grid", "seeds"},
                 "config");
    auto arch = parse_architecture(need(ctx.config, "architecture", "config"),
                                   "config.architecture");
    auto task = parse_task(need(ctx.config, "task", "config"), "config.task");
    auto train = parse_train(need(ctx.config, "train", "config"), "config.train");
    std::vector<double> grid = need(ctx.config, "lambda_grid", "config").get<std::vector<double>>();
    std::vector<std::uint64_t> seeds =
        need(ctx.config, "seeds", "config").get<std::vector<std::uint64_t>>();
    if (ctx.has_seed_override) seeds = {ctx.seed_override};
    if (grid.empty()) throw ConfigError("config.lambda_grid: must be nonempty");
    if (seeds.empty()) throw ConfigError("config.seeds: must be nonempty");

    struct Job {
        double lambda;
        std::uint64_t seed;
    };
    std::vector<Job> jobs;
    for (double lam : grid)
        for (auto s : seeds) jobs.push_back({lam, s});
    std::vector<SweepRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    int n_workers = std::max(1, std::min<int>(ctx.jobs, static_cast<int>(jobs.size())));
    auto worker = [&]() {
        for (;;) {
            std::size_t i = next.fetch_add(1);
            if (i >= jobs.size()) return;
            rows[i] = sweep_point(arch, task, train, jobs[i].lambda, jobs[i].seed);
        }
    };
    std::vector<std::thread> pool;
    for (int i = 1; i < n_workers; ++i) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    emit_sweep_csv(rows, art_path(ctx, "rank_sweep.csv"), ctx.hash);
}

void cmd_inspect(const RunContext& ctx) {
    require_keys(ctx.config, {"checkpoint", "groups"}, "config");
    std::string path = need(ctx.config, "checkpoint", "config").get<std::string>();
    std::vector<inspect::LayerGroup> groups;
    if (ctx.config.contains("groups")) {
        for (const auto& g : ctx.config["groups"]) {
            require_keys(g, {"name", "members"}, "config.groups[]");
            inspect::LayerGroup lg;
            lg.name = need(g, "name", "config.groups[]").get<std::string>();
            lg.members = need(g, "members", "config.groups[]").get<std::vector<std::string>>();
            groups.push_back(std::move(lg));
        }
    }
    auto ckpt = inspect::read_checkpoint(path);
    auto report = inspect::layer_report(ckpt, groups);
    {
        std::ofstream out(art_path(ctx, "layer_report.csv"));
        out << report.to_csv();
    }
    {
        std::ofstream out(art_path(ctx, "layer_report.json"));
        out << report.to_json() << '\n';
    }
}

void cmd_gen_data(const RunContext& ctx) {
    require_keys(ctx.config, {"task_a", "task_b"}, "config");
    auto task_a = parse_task(need(ctx.config, "task_a", "config"), "config.task_a");
    auto task_b = parse_task(need(ctx.config, "task_b", "config"), "config.task_b");
    auto pair = datagen::gen_task_pair(task_a, task_b);
    datagen::export_csv(pair.data_a, art_path(ctx, "task_a.csv"));
    datagen::export_csv(pair.data_b, art_path(ctx, "task_b.csv"));
    json meta;
    meta["epsilon"] = pair.epsilon;
    meta["config_hash"] = ctx.hash;
    std::ofstream out(art_path(ctx, "gen_meta.json"));
    out << meta.dump(2) << '\n';
}

int run(const std::string& command, const std::string& config_path,
        const std::string& out_dir, const std::uint64_t* seed_override, int jobs) {
    RunContext ctx;
    ctx.jobs = jobs;
    if (seed_override) {
        ctx.has_seed_override = true;
        ctx.seed_override = *seed_override;
    }
    ctx.out_dir = out_dir;
    if (ctx.out_dir.empty()) {
        const char* env = std::getenv("WDLAB_OUT");
        ctx.out_dir = env ? env : ".";
    }
    try {
        std::ifstream in(config_path);
        if (!in) throw ConfigError("config: cannot open " + config_path);
        std::string text((std::istreambuf_iterator<char>(in)),
                         std::istreambuf_iterator<char>());
        ctx.hash = config_hash(text);
        try {
            ctx.config = json::parse(text);
        } catch (const json::exception& e) {
            throw ConfigError(std::string("config: invalid JSON: ") + e.what());
        }
        if (command == "train") cmd_train(ctx);
        else if (command == "polish") cmd_polish(ctx);
        else if (command == "gf") cmd_gf(ctx);
        else if (command == "merge") cmd_merge(ctx);
        else if (command == "rank-sweep") cmd_rank_sweep(ctx);
        else if (command == "inspect") cmd_inspect(ctx);
        else if (command == "gen-data") cmd_gen_data(ctx);
        else throw ConfigError("unknown command: " + command);
    } catch (const ConfigError& e) {
        fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const nlohmann::json::exception& e) {
        fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const std::invalid_argument& e) {
        fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const optimize::DivergenceError& e) {
        fprintf(stderr, "divergence: %s (last checkpoint t=%g)\n", e.what(),
                e.so_far.checkpoints.empty() ? -1.0 : e.so_far.checkpoints.back().t);
        return 3;
    } catch (const std::exception& e) {
        fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}

}  // namespace wdlab::experiments
