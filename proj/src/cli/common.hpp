#pragma once

#include "surveyforge/error.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace surveyforge::cli {

/// An input produced by an earlier subcommand is absent.
class MissingArtifactError : public Error {
public:
    using Error::Error;
};

enum class LogLevel { Quiet, Warn, Info, Debug };

struct Context {
    nlohmann::json config;
    /// Directory of the config file; relative paths resolve against it.
    std::filesystem::path base;
    std::filesystem::path out;
    std::optional<std::uint64_t> seed;
    LogLevel log_level = LogLevel::Warn;

    std::filesystem::path resolve(const std::string &path) const;
    /// Required path-valued key; ConfigError when absent, or when the file is
    /// missing (MissingArtifactError instead when `artifact` is set).
    std::filesystem::path input(const std::string &key, bool artifact = false) const;
    std::filesystem::path output(const std::string &name) const;

    void warn(const std::string &message) const;
    void info(const std::string &message) const;
};

LogLevel log_level_from_env();

/// Writes text to a file, creating parent directories.
void write_file(const std::filesystem::path &path, const std::string &content);

/// N, Mean, Sd, Min, Max, IQR, CV of one weight vector.
struct WeightSummary {
    std::size_t n = 0;
    double mean = 0.0;
    double sd = 0.0;
    double min = 0.0;
    double max = 0.0;
    double iqr = 0.0;
    double cv = 0.0;
};

WeightSummary summarize_weights(const std::vector<double> &w);

int cmd_weight(const Context &ctx);
int cmd_prevalence(const Context &ctx);
int cmd_compare(const Context &ctx);
int cmd_simulate(const Context &ctx);

} // namespace surveyforge::cli
