#include "tcmm/cli.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <CLI11.hpp>

#include "tcmm/blob_io.hpp"
#include "tcmm/config.hpp"
#include "tcmm/eval.hpp"
#include "tcmm/gradcheck.hpp"
#include "tcmm/synth.hpp"
#include "tcmm/train.hpp"

namespace tcmm {

namespace {

struct Options {
    std::string config;
    std::string out;
    std::string checkpoint;
    std::optional<std::uint64_t> seed;
    int trials = 50;
};

std::string fmt(const char* f, double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, f, v);
    return buf;
}

int cmd_gen_data(const Options& opt, std::ostream& out) {
    RunConfig cfg = load_run_config(opt.config);
    if (opt.seed) cfg.data.seed = *opt.seed;
    const auto stem = opt.out.empty() ? cfg.paths.dataset : std::filesystem::path(opt.out);
    const auto ds = generate(cfg.data);
    write_dataset(ds, stem);
    const auto files = file_pair(stem);
    out << "wrote " << files.manifest.string() << " and " << files.blob.string() << ": " << ds.size()
        << " samples, " << cfg.data.num_identities << " identities\n";
    return kExitOk;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    write_bytes(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

int cmd_train(const Options& opt, std::ostream& out, std::ostream& err) {
    RunConfig cfg = load_run_config(opt.config);
    if (opt.seed) cfg.train.seed = *opt.seed;
    const auto ds = read_dataset(cfg.paths.dataset);
    if (ds.spec.patch_input_dim != cfg.data.patch_input_dim || ds.spec.patches_per_image != cfg.data.patches_per_image) {
        throw ConfigError("paths.dataset", "dataset dimensions disagree with the data section");
    }

    if (cfg.paths.log.has_parent_path()) std::filesystem::create_directories(cfg.paths.log.parent_path());
    std::ofstream log(cfg.paths.log, std::ios::binary | std::ios::trunc);
    if (!log) throw FormatError("cannot open log for writing: " + cfg.paths.log.string());

    TrainResult result;
    try {
        result = train(cfg.train, ds, [&](const EpochLog& rec) {
            log << rec.to_json().dump() << '\n';
            log.flush();
        });
    } catch (const NonFiniteLoss& e) {
        auto diag = cfg.paths.log;
        diag += ".diag.json";
        write_json(diag, e.diagnostics());
        err << "error: " << e.what() << " (diagnostics in " << diag.string() << ")\n";
        return kExitNumericFailure;
    }
    write_checkpoint({result.params, result.instance_memory, result.prototype_memory}, cfg.paths.checkpoint);

    out << "checkpoint " << file_pair(cfg.paths.checkpoint).manifest.string() << "\n";
    if (result.log.empty()) {
        out << "no epochs run\n";
    } else {
        const auto& last = result.log.back();
        out << "epoch " << last.epoch << ": total " << fmt("%.6f", last.mean_total) << " constraint "
            << fmt("%.6f", last.mean_constraint) << " proto " << fmt("%.6f", last.mean_proto) << " anchor "
            << fmt("%.6f", last.mean_anchor) << " C " << last.num_clusters << " outliers " << last.outliers << "\n";
    }
    return kExitOk;
}

int cmd_eval(const Options& opt, std::ostream& out) {
    const RunConfig cfg = load_run_config(opt.config);
    const auto ckpt_stem = opt.checkpoint.empty() ? cfg.paths.checkpoint : std::filesystem::path(opt.checkpoint);
    const auto ckpt = read_checkpoint(ckpt_stem);
    const auto& p = ckpt.params;
    if (p.input_dim() != static_cast<std::size_t>(cfg.data.patch_input_dim) ||
        p.feature_dim() != static_cast<std::size_t>(cfg.train.feature_dim) ||
        p.num_parts() != static_cast<std::size_t>(cfg.train.num_parts)) {
        throw ConfigError("checkpoint", "dimensions (D=" + std::to_string(p.feature_dim()) + ", d_in=" +
                                            std::to_string(p.input_dim()) + ", Z=" + std::to_string(p.num_parts()) +
                                            ") disagree with config");
    }
    const auto ds = read_dataset(cfg.paths.dataset);
    if (ds.spec.patch_input_dim != cfg.data.patch_input_dim) {
        throw ConfigError("paths.dataset", "dataset dimensions disagree with the data section");
    }
    const Matrix features = encode_dataset(p, ds);
    const auto split = split_query_gallery(ds, cfg.eval.query_per_identity, cfg.eval.seed);

    auto gather = [&](const std::vector<std::size_t>& idx, Matrix& feats, std::vector<int>& ids) {
        feats = Matrix(idx.size(), features.cols());
        for (std::size_t i = 0; i < idx.size(); ++i) {
            std::copy(features.row(idx[i]).begin(), features.row(idx[i]).end(), feats.row(i).begin());
            ids.push_back(ds.samples[idx[i]].identity);
        }
    };
    Matrix qf, gf;
    std::vector<int> qid, gid;
    gather(split.query, qf, qid);
    gather(split.gallery, gf, gid);
    const auto metrics = evaluate_retrieval(qf, qid, gf, gid, cfg.eval.k_max);
    write_json(cfg.paths.metrics, metrics.to_json());
    if (cfg.paths.per_query_csv) write_text(*cfg.paths.per_query_csv, metrics.per_query_csv());
    out << "mAP " << fmt("%.4f", metrics.mean_ap) << " Rank-1 " << fmt("%.4f", metrics.cmc.front()) << " queries "
        << metrics.num_queries - metrics.excluded_queries << " excluded " << metrics.excluded_queries << "\n";
    return kExitOk;
}

int cmd_gradcheck(const Options& opt, std::ostream& out, std::ostream& err) {
    GradcheckOptions g;
    if (opt.seed) g.seed = *opt.seed;
    g.trials = opt.trials;
    if (g.trials < 1) {
        err << "error: --trials must be >= 1\n";
        return kExitInputError;
    }
    return gradcheck_command(g, out, err);
}

}  // namespace

int gradcheck_command(const GradcheckOptions& options, std::ostream& out, std::ostream& err) {
    const auto report = run_gradcheck(options);
    out << report.text();
    if (report.all_pass()) return kExitOk;
    for (const auto& c : report.components) {
        if (!c.pass) {
            err << "gradient check failed: " << component_name(c.component) << " (instance seed "
                << c.worst_instance_seed << ")\n";
        }
    }
    return kExitCheckFailed;
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"TCMM desk-scale trainer: synthetic data, training, retrieval evaluation, gradient checks", "tcmm"};
    app.require_subcommand(1);
    Options opt;

    auto* gen = app.add_subcommand("gen-data", "Generate a synthetic dataset");
    gen->add_option("--config", opt.config, "Run config JSON")->required();
    gen->add_option("--out", opt.out, "Dataset stem (overrides paths.dataset)");
    gen->add_option("--seed", opt.seed, "Override data.seed");

    auto* tr = app.add_subcommand("train", "Train the encoder");
    tr->add_option("--config", opt.config, "Run config JSON")->required();
    tr->add_option("--seed", opt.seed, "Override train.seed");

    auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint (mAP, CMC)");
    ev->add_option("--config", opt.config, "Run config JSON")->required();
    ev->add_option("--checkpoint", opt.checkpoint, "Checkpoint stem (overrides paths.checkpoint)");

    auto* gc = app.add_subcommand("gradcheck", "Finite-difference check of every analytic gradient");
    gc->add_option("--seed", opt.seed, "Base seed");
    gc->add_option("--trials", opt.trials, "Random instances per component");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitInputError;
    }

    try {
        if (gen->parsed()) return cmd_gen_data(opt, out);
        if (tr->parsed()) return cmd_train(opt, out, err);
        if (ev->parsed()) return cmd_eval(opt, out);
        if (gc->parsed()) return cmd_gradcheck(opt, out, err);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const FormatError& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInputError;
    } catch (const NumericError& e) {
        err << "numeric failure: " << e.what() << "\n";
        return kExitNumericFailure;
    } catch (const std::invalid_argument& e) {
        err << "input error: " << e.what() << "\n";
        return kExitInputError;
    }
    return kExitInputError;
}

}  // namespace tcmm
