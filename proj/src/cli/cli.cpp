#include "surveyforge/cli.hpp"

#include "common.hpp"
#include "surveyforge/adjust.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>

namespace surveyforge::cli {

std::filesystem::path Context::resolve(const std::string &path) const {
    std::filesystem::path p(path);
    return p.is_absolute() ? p : base / p;
}

std::filesystem::path Context::input(const std::string &key, bool artifact) const {
    if (!config.contains(key) || !config.at(key).is_string()) {
        throw ConfigError("config key '" + key + "' must name a file");
    }
    auto path = resolve(config.at(key).get<std::string>());
    if (!std::filesystem::exists(path)) {
        const std::string msg = "'" + key + "' file not found: " + path.string();
        if (artifact) {
            throw MissingArtifactError(msg);
        }
        throw ConfigError(msg);
    }
    return path;
}

std::filesystem::path Context::output(const std::string &name) const { return out / name; }

void Context::warn(const std::string &message) const {
    if (log_level >= LogLevel::Warn) {
        std::cerr << "warning: " << message << '\n';
    }
}

void Context::info(const std::string &message) const {
    if (log_level >= LogLevel::Info) {
        std::cerr << message << '\n';
    }
}

LogLevel log_level_from_env() {
    const char *env = std::getenv("SURVEYFORGE_LOG");
    if (!env) {
        return LogLevel::Warn;
    }
    const std::string v(env);
    if (v == "quiet" || v == "error") {
        return LogLevel::Quiet;
    }
    if (v == "info") {
        return LogLevel::Info;
    }
    if (v == "debug") {
        return LogLevel::Debug;
    }
    return LogLevel::Warn;
}

void write_file(const std::filesystem::path &path, const std::string &content) {
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path());
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw Error("cannot write " + path.string());
    }
    out << content;
    if (!out) {
        throw Error("write failed for " + path.string());
    }
}

WeightSummary summarize_weights(const std::vector<double> &w) {
    WeightSummary s;
    s.n = w.size();
    if (w.empty()) {
        return s;
    }
    double sum = 0.0;
    for (double x : w) {
        sum += x;
    }
    s.mean = sum / static_cast<double>(w.size());
    double ss = 0.0;
    for (double x : w) {
        ss += (x - s.mean) * (x - s.mean);
    }
    s.sd = w.size() > 1 ? std::sqrt(ss / static_cast<double>(w.size() - 1)) : 0.0;
    const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
    s.min = *lo;
    s.max = *hi;
    s.iqr = adjust::quantile_type7(w, 0.75) - adjust::quantile_type7(w, 0.25);
    s.cv = s.mean != 0.0 ? s.sd / s.mean : 0.0;
    return s;
}

namespace {

nlohmann::json read_config(const std::filesystem::path &path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot open config '" + path.string() + "'");
    }
    try {
        return nlohmann::json::parse(in);
    } catch (const nlohmann::json::exception &e) {
        throw ConfigError("config '" + path.string() + "': " + e.what());
    }
}

} // namespace

int run(const std::vector<std::string> &args) {
    CLI::App app{"Complex-survey weighting and estimation", "surveyforge"};
    app.require_subcommand(1);
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;

    auto add = [&](const std::string &name, const std::string &description) {
        auto *sub = app.add_subcommand(name, description);
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--out", out_dir, "Output directory (overrides the config)");
        sub->add_option("--seed", seed, "Seed override");
        return sub;
    };
    auto *weight = add("weight", "Design, final and section weights with diagnostics");
    auto *prevalence = add("prevalence", "Prevalence tables for the original, unweighted and weighted designs");
    auto *compare = add("compare", "Diff and VarRatio comparison with figure panel data");
    auto *simulate = add("simulate", "Monte Carlo validation scenarios");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp &e) {
        return app.exit(e);
    } catch (const CLI::ParseError &e) {
        app.exit(e);
        return kConfigError;
    }

    Context ctx;
    ctx.log_level = log_level_from_env();
    ctx.seed = seed;
    try {
        const std::filesystem::path cfg(config_path);
        ctx.config = read_config(cfg);
        if (!ctx.config.is_object()) {
            throw ConfigError("config '" + config_path + "' must be a JSON object");
        }
        ctx.base = cfg.has_parent_path() ? cfg.parent_path() : std::filesystem::path(".");
        if (!out_dir.empty()) {
            ctx.out = out_dir;
        } else if (ctx.config.contains("out")) {
            ctx.out = ctx.resolve(ctx.config.at("out").get<std::string>());
        } else {
            ctx.out = ".";
        }
        std::filesystem::create_directories(ctx.out);

        if (weight->parsed()) {
            return cmd_weight(ctx);
        }
        if (prevalence->parsed()) {
            return cmd_prevalence(ctx);
        }
        if (compare->parsed()) {
            return cmd_compare(ctx);
        }
        if (simulate->parsed()) {
            return cmd_simulate(ctx);
        }
        return kConfigError;
    } catch (const MissingArtifactError &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kMissingArtifact;
    } catch (const ConfigError &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const nlohmann::json::exception &e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception &e) {
        std::cerr << "error: " << e.what() << '\n';
        return kRuntimeFailure;
    }
}

} // namespace surveyforge::cli
